//! Reduced systems: higher Euler–Poincaré equations on a Lie algebra,
//! second order Hamel equations on a trivial Atiyah algebroid and second
//! order Lagrange–Poincaré equations with a connection, plus conservation
//! monitors.

use serde::{Deserialize, Serialize};

use crate::algebroid::{ConnectionSpec, Shape, StructureConstants};
use crate::error::{Error, Result};
use crate::expr::{BinOp, Node};
use crate::graded::CurveJet;
use crate::jet::Jet;
use crate::lagrange::{ExplicitSystem, LagrangianSpec, Trajectory};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReducedKind {
    EulerPoincare,
    Hamel,
    LagrangePoincare,
}

/// A Lagrangian on a Lie algebra or a trivial Atiyah algebroid `TM ⊕ 𝔤`,
/// with an optional background connection.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    kind: ReducedKind,
    spec: LagrangianSpec,
    connection: Option<ConnectionSpec>,
    constants: StructureConstants,
    n: usize,
}

/// Jets of a reduced curve: the base curve `x(t)` and the `𝔤`-curve `y(t)`.
/// The base velocity is `ẋ`.
#[derive(Debug, Clone)]
pub struct ReducedJet {
    pub x: Vec<Jet<f64>>,
    pub y: Vec<Jet<f64>>,
}

/// Base and fiber residual blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedResidual {
    pub base: Vec<f64>,
    pub fiber: Vec<f64>,
}

impl ReducedSystem {
    pub fn new(kind: ReducedKind, spec: LagrangianSpec, connection: Option<ConnectionSpec>) -> Result<Self> {
        let (constants, n) = match (kind, spec.algebroid().shape()) {
            (ReducedKind::EulerPoincare, Shape::LieAlgebra(c)) => (c.clone(), 0),
            (ReducedKind::Hamel | ReducedKind::LagrangePoincare, Shape::AtiyahTrivial(c)) => {
                (c.clone(), spec.n_base())
            }
            (ReducedKind::EulerPoincare, _) => {
                return Err(Error::InvalidStructure("Euler–Poincaré systems need a Lie algebra".into()))
            }
            _ => {
                return Err(Error::InvalidStructure(
                    "Hamel and Lagrange–Poincaré systems need a trivial Atiyah algebroid".into(),
                ))
            }
        };
        if kind != ReducedKind::EulerPoincare && spec.order() != 2 {
            return Err(Error::Unsupported(format!(
                "Hamel and Lagrange–Poincaré systems are second order, got k = {}",
                spec.order()
            )));
        }
        match (kind, &connection) {
            (ReducedKind::LagrangePoincare, None) => {
                return Err(Error::Unsupported("Lagrange–Poincaré systems need a connection".into()))
            }
            (ReducedKind::LagrangePoincare, Some(conn)) => {
                if conn.n_base() != n || conn.constants() != &constants {
                    return Err(Error::Dimension("connection does not match the Atiyah algebroid".into()));
                }
            }
            (_, Some(_)) => {
                return Err(Error::Unsupported("only Lagrange–Poincaré systems take a connection".into()))
            }
            _ => {}
        }
        Ok(ReducedSystem {
            kind,
            spec,
            connection,
            constants,
            n,
        })
    }

    pub fn euler_poincare(spec: LagrangianSpec) -> Result<Self> {
        Self::new(ReducedKind::EulerPoincare, spec, None)
    }

    pub fn hamel(spec: LagrangianSpec) -> Result<Self> {
        Self::new(ReducedKind::Hamel, spec, None)
    }

    pub fn lagrange_poincare(spec: LagrangianSpec, connection: ConnectionSpec) -> Result<Self> {
        Self::new(ReducedKind::LagrangePoincare, spec, Some(connection))
    }

    pub fn kind(&self) -> ReducedKind {
        self.kind
    }

    pub fn spec(&self) -> &LagrangianSpec {
        &self.spec
    }

    pub fn connection(&self) -> Option<&ConnectionSpec> {
        self.connection.as_ref()
    }

    pub fn constants(&self) -> &StructureConstants {
        &self.constants
    }

    pub fn n_base(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.constants.rank()
    }

    /// The same curve as a curve in the algebroid, `y₁ = (ẋ, y)`.
    pub fn curve_jet(&self, jets: &ReducedJet) -> Result<CurveJet> {
        self.check_dims(jets)?;
        let mut y1: Vec<Jet<f64>> = jets.x.iter().map(Jet::derivative).collect();
        y1.extend(jets.y.iter().cloned());
        Ok(CurveJet::new(jets.x.clone(), y1))
    }

    /// The Lagrangian as a function on the algebroid used for integration.
    /// With a connection this is the adapted frame of
    /// [`ConnectionSpec::atiyah_frame`], and the weight-two `𝔤` coordinate of
    /// the reduced Lagrangian is the covariant derivative
    /// `Dyᶜ/Dt = ẏᶜ + vᴬ Cᶜ_ab 𝔸ᵇ_A yᵃ` in place of `ẏᶜ`.
    pub fn frame_spec(&self) -> Result<LagrangianSpec> {
        let Some(conn) = &self.connection else {
            return Ok(self.spec.clone());
        };
        let (n, g) = (self.n, self.rank());
        let spec = &self.spec;
        let kappa = 1.0 / spec.convention().to_plain(2);
        let coeff_node = |a: usize, aa: usize| match conn.component(a, aa) {
            crate::algebroid::Coefficient::Zero => None,
            crate::algebroid::Coefficient::Const(v) => Some(Node::Num(*v)),
            crate::algebroid::Coefficient::Expr(e) => Some(e.root().clone()),
        };
        let mut replacements: Vec<Node> = (0..spec.variables().len()).map(Node::Var).collect();
        for c in 0..g {
            let mut shift: Option<Node> = None;
            for aa in 0..n {
                for a in 0..g {
                    for b in 0..g {
                        let k = self.constants.get(a, b, c);
                        let Some(conn_node) = coeff_node(b, aa).filter(|_| k != 0.0) else {
                            continue;
                        };
                        let term = Node::binary(
                            BinOp::Mul,
                            Node::Num(kappa * k),
                            Node::binary(
                                BinOp::Mul,
                                conn_node,
                                Node::binary(
                                    BinOp::Mul,
                                    Node::Var(spec.fiber_index(1, aa)),
                                    Node::Var(spec.fiber_index(1, n + a)),
                                ),
                            ),
                        );
                        shift = Some(match shift {
                            None => term,
                            Some(s) => Node::binary(BinOp::Add, s, term),
                        });
                    }
                }
            }
            if let Some(s) = shift {
                let z = spec.fiber_index(2, n + c);
                replacements[z] = Node::binary(BinOp::Add, Node::Var(z), s);
            }
        }
        let lagrangian = spec.lagrangian().substitute(&replacements, spec.variables().to_vec());
        LagrangianSpec::new(conn.atiyah_frame(), 2, lagrangian, spec.convention())
    }

    /// The explicit ODE of [`frame_spec`](Self::frame_spec).
    pub fn explicit(&self) -> Result<ExplicitSystem> {
        Ok(self.frame_spec()?.reduce_to_explicit())
    }

    fn check_dims(&self, jets: &ReducedJet) -> Result<()> {
        if jets.x.len() != self.n || jets.y.len() != self.rank() {
            return Err(Error::Dimension(format!(
                "reduced jets must have {} base and {} fiber entries",
                self.n,
                self.rank()
            )));
        }
        Ok(())
    }

    fn check_kind(&self, allowed: &[ReducedKind], what: &str) -> Result<()> {
        if allowed.contains(&self.kind) {
            return Ok(());
        }
        Err(Error::Unsupported(format!("{what} is not defined for a {:?} system", self.kind)))
    }

    fn check_orders(&self, jets: &ReducedJet) -> Result<()> {
        let k = self.spec.order();
        let need_y = 2 * k - 1;
        if let Some(have) = jets.y.iter().map(Jet::order).min().filter(|&o| o < need_y) {
            return Err(Error::JetOrder { needed: need_y, available: have });
        }
        if let Some(have) = jets.x.iter().map(Jet::order).min().filter(|&o| o < 2 * k) {
            return Err(Error::JetOrder { needed: 2 * k, available: have });
        }
        Ok(())
    }

    /// Connection components along the curve, `[a][A]`.
    fn connection_jets(&self, x: &[Jet<f64>]) -> Result<Vec<Vec<Jet<f64>>>> {
        match &self.connection {
            Some(conn) => conn.components_at(x),
            None => Ok(vec![vec![Jet::constant(0.0); self.n]; self.rank()]),
        }
    }

    /// `D/Dt ψ_a = ψ̇_a − vᴬ Cᶜ_ab 𝔸ᵇ_A ψ_c`.
    fn covariant_dual(&self, psi: &[Jet<f64>], v: &[Jet<f64>], conn: &[Vec<Jet<f64>>]) -> Vec<Jet<f64>> {
        let g = self.rank();
        (0..g)
            .map(|a| {
                let mut out = psi[a].derivative();
                for b in 0..g {
                    for c in 0..g {
                        let k = self.constants.get(a, b, c);
                        if k == 0.0 {
                            continue;
                        }
                        for (big_a, va) in v.iter().enumerate() {
                            out = out - (va.clone() * conn[b][big_a].clone() * psi[c].clone()).scale(k);
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// `Dyᶜ/Dt = ẏᶜ + vᴬ Cᶜ_ab 𝔸ᵇ_A yᵃ`.
    fn covariant(&self, y: &[Jet<f64>], v: &[Jet<f64>], conn: &[Vec<Jet<f64>>]) -> Vec<Jet<f64>> {
        let g = self.rank();
        (0..g)
            .map(|c| {
                let mut out = y[c].derivative();
                for a in 0..g {
                    for b in 0..g {
                        let k = self.constants.get(a, b, c);
                        if k == 0.0 {
                            continue;
                        }
                        for (big_a, va) in v.iter().enumerate() {
                            out = out + (va.clone() * conn[b][big_a].clone() * y[a].clone()).scale(k);
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// Partials of `L` along the reduced curve, with the weight-two `𝔤`
    /// coordinate taken covariantly when a connection is present.
    fn partial_jets(&self, jets: &ReducedJet, conn: &[Vec<Jet<f64>>]) -> Result<Vec<Jet<f64>>> {
        let k = self.spec.order();
        let conv = self.spec.convention();
        let v: Vec<Jet<f64>> = jets.x.iter().map(Jet::derivative).collect();
        let mut values: Vec<Jet<f64>> = jets.x.clone();
        for w in 1..=k {
            let s = 1.0 / conv.to_plain(w);
            values.extend(v.iter().map(|j| j.nth_derivative(w - 1).scale(s)));
            if w == 2 && self.connection.is_some() {
                values.extend(self.covariant(&jets.y, &v, conn).into_iter().map(|j| j.scale(s)));
            } else {
                values.extend(jets.y.iter().map(|j| j.nth_derivative(w - 1).scale(s)));
            }
        }
        self.spec.partials(&values)
    }

    /// `Σ_w (−1)^{w−1} c_w dʷ⁻¹/dtʷ⁻¹ ∂L/∂y_w` for fiber index `i`, with
    /// `c_w = 1/w!` in homogeneous coordinates and `1` in plain ones.
    fn ostrogradski(&self, grad: &[Jet<f64>], i: usize) -> Jet<f64> {
        let conv = self.spec.convention();
        (1..=self.spec.order()).fold(Jet::constant(0.0), |acc, w| {
            let s = if w % 2 == 1 { 1.0 } else { -1.0 } / conv.to_plain(w);
            acc + grad[self.spec.fiber_index(w, i)].nth_derivative(w - 1).scale(s)
        })
    }

    /// `yᵇ Cᶜ_ba π_c − π̇_a` on the `𝔤` block, with `π̇` replaced by
    /// `dπ` when supplied.
    fn coadjoint_block(&self, y: &[f64], pi: &[Jet<f64>], dpi: &[Jet<f64>]) -> Vec<f64> {
        let g = self.rank();
        (0..g)
            .map(|a| {
                let mut r = -dpi[a].coeff(0);
                for b in 0..g {
                    for c in 0..g {
                        r += y[b] * self.constants.get(b, a, c) * pi[c].coeff(0);
                    }
                }
                r
            })
            .collect()
    }
}

fn heads(jets: &[Jet<f64>]) -> Vec<f64> {
    jets.iter().map(|j| *j.head()).collect()
}

/// Residual `yᵇ Cᶜ_ba πᵏ_c − π̇ᵏ_a` of the higher Euler–Poincaré equations
/// `d/dt πᵏ = ad*_y πᵏ`, where `πᵏ` is the top Jacobi–Ostrogradski momentum.
///
/// Needs jets of `y` of order `2k − 1`.
pub fn euler_poincare_residual(sys: &ReducedSystem, jets: &ReducedJet) -> Result<Vec<f64>> {
    sys.check_kind(&[ReducedKind::EulerPoincare], "the Euler–Poincaré residual")?;
    sys.check_dims(jets)?;
    sys.check_orders(jets)?;
    let grad = sys.partial_jets(jets, &[])?;
    let pi: Vec<Jet<f64>> = (0..sys.rank()).map(|a| sys.ostrogradski(&grad, a)).collect();
    let dpi: Vec<Jet<f64>> = pi.iter().map(Jet::derivative).collect();
    Ok(sys.coadjoint_block(&heads(&jets.y), &pi, &dpi))
}

/// Residuals of the second order Hamel equations:
/// `∂L/∂x − d/dt ∂L/∂v + c₂ d²/dt² ∂L/∂w` on the base and
/// `yᵇ Cᶜ_ba π_c − π̇_a` with `π = ∂L/∂y − c₂ d/dt ∂L/∂z` on the fiber,
/// where `c₂ = ½` in homogeneous coordinates and `1` in plain ones.
///
/// Needs base jets of order 4 and fiber jets of order 3.
pub fn hamel_residual(sys: &ReducedSystem, jets: &ReducedJet) -> Result<ReducedResidual> {
    sys.check_kind(&[ReducedKind::Hamel], "the Hamel residual")?;
    sys.check_dims(jets)?;
    sys.check_orders(jets)?;
    let n = sys.n;
    let grad = sys.partial_jets(jets, &[])?;
    let base = (0..n)
        .map(|big_a| *grad[big_a].head() - sys.ostrogradski(&grad, big_a).coeff(1))
        .collect();
    let pi: Vec<Jet<f64>> = (0..sys.rank()).map(|a| sys.ostrogradski(&grad, n + a)).collect();
    let dpi: Vec<Jet<f64>> = pi.iter().map(Jet::derivative).collect();
    Ok(ReducedResidual {
        base,
        fiber: sys.coadjoint_block(&heads(&jets.y), &pi, &dpi),
    })
}

/// Residuals of the second order Lagrange–Poincaré equations with
/// `Sᵃ_A = vᴮ𝔽ᵃ_BA + yᵇCᵃ_bc𝔸ᶜ_A`, `ζ = ∂L/∂z`, `π = ∂L/∂y − c₂ Dζ/Dt` and
/// `⟨ζ, [y, u]⟩ = ζ_c Cᶜ_ab yᵃ uᵇ`:
///
/// base `∂L/∂x − d/dt ∂L/∂v + c₂ d²/dt² ∂L/∂w − Sᵃ_A π_a
/// + c₂ (vᴮ ⟨ζ, [y, ∂_A𝔸_B]⟩ − d/dt ⟨ζ, [y, 𝔸_A]⟩)`,
/// fiber `yᵇCᶜ_ba π_c − Dπ_a/Dt`.
///
/// Here `z` is the covariant weight-two coordinate, see
/// [`ReducedSystem::frame_spec`]. Needs base jets of order 4 and fiber jets
/// of order 3.
pub fn lagrange_poincare_residual(sys: &ReducedSystem, jets: &ReducedJet) -> Result<ReducedResidual> {
    sys.check_kind(&[ReducedKind::LagrangePoincare], "the Lagrange–Poincaré residual")?;
    sys.check_dims(jets)?;
    sys.check_orders(jets)?;
    let (n, g) = (sys.n, sys.rank());
    let conn_spec = sys.connection.as_ref().expect("checked at construction");
    let kappa = 1.0 / sys.spec.convention().to_plain(2);
    let conn = sys.connection_jets(&jets.x)?;
    let grad = sys.partial_jets(jets, &conn)?;
    let v: Vec<Jet<f64>> = jets.x.iter().map(Jet::derivative).collect();
    let zeta: Vec<Jet<f64>> = (0..g).map(|a| grad[sys.spec.fiber_index(2, n + a)].clone()).collect();
    let dzeta = sys.covariant_dual(&zeta, &v, &conn);
    let pi: Vec<Jet<f64>> = (0..g)
        .map(|a| grad[sys.spec.fiber_index(1, n + a)].clone() - dzeta[a].scale(kappa))
        .collect();
    let dpi = sys.covariant_dual(&pi, &v, &conn);
    let y = heads(&jets.y);
    let fiber = sys.coadjoint_block(&y, &pi, &dpi);

    let x = heads(&jets.x);
    let vh = heads(&v);
    let f = conn_spec.curvature(&x)?;
    let a0: Vec<Vec<f64>> = conn.iter().map(|row| heads(row)).collect();
    let c = &sys.constants;
    let s = |a: usize, big_a: usize| -> f64 {
        let mut r = 0.0;
        for (big_b, vb) in vh.iter().enumerate() {
            r += vb * f[a][big_b][big_a];
        }
        for b in 0..g {
            for cc in 0..g {
                r += y[b] * c.get(b, cc, a) * a0[cc][big_a];
            }
        }
        r
    };
    // slopes[b][B][A] = ∂_A 𝔸ᵇ_B
    let slopes = (0..g)
        .map(|b| (0..n).map(|big_b| conn_spec.component(b, big_b).gradient(&x)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let base = (0..n)
        .map(|big_a| -> Result<f64> {
            let mut r = *grad[big_a].head() - sys.ostrogradski(&grad, big_a).coeff(1);
            for a in 0..g {
                r -= s(a, big_a) * pi[a].coeff(0);
            }
            let mut pairing = Jet::constant(0.0);
            let mut gauge = 0.0;
            for (b, row) in conn.iter().enumerate() {
                for a in 0..g {
                    for cc in 0..g {
                        let k = c.get(a, b, cc);
                        if k == 0.0 {
                            continue;
                        }
                        pairing = pairing + (zeta[cc].clone() * jets.y[a].clone() * row[big_a].clone()).scale(k);
                        for (big_b, vb) in vh.iter().enumerate() {
                            gauge += k * zeta[cc].coeff(0) * y[a] * vb * slopes[b][big_b][big_a];
                        }
                    }
                }
            }
            Ok(r + kappa * (gauge - pairing.coeff(1)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReducedResidual { base, fiber })
}

/// The abelian Lorentz-force form: base
/// `∂L/∂x − d/dt ∂L/∂v + c₂ d²/dt² ∂L/∂w − vᴮ𝔽ᵃ_BA (∂L/∂yᵃ − c₂ d/dt ∂L/∂zᵃ)`
/// and fiber `−d/dt (∂L/∂y − c₂ d/dt ∂L/∂z)`.
pub fn lorentz_residual(sys: &ReducedSystem, jets: &ReducedJet) -> Result<ReducedResidual> {
    sys.check_kind(&[ReducedKind::LagrangePoincare], "the Lorentz-force residual")?;
    if !sys.constants.is_abelian() {
        return Err(Error::Unsupported("the Lorentz-force form needs an abelian Lie algebra".into()));
    }
    sys.check_dims(jets)?;
    sys.check_orders(jets)?;
    let (n, g) = (sys.n, sys.rank());
    let conn = sys.connection.as_ref().expect("checked at construction");
    let grad = sys.partial_jets(jets, &[])?;
    let pi: Vec<Jet<f64>> = (0..g).map(|a| sys.ostrogradski(&grad, n + a)).collect();
    let x = heads(&jets.x);
    let v: Vec<f64> = jets.x.iter().map(|j| j.coeff(1)).collect();
    let f = conn.curvature(&x)?;
    let base = (0..n)
        .map(|big_a| {
            let mut r = *grad[big_a].head() - sys.ostrogradski(&grad, big_a).coeff(1);
            for a in 0..g {
                let force: f64 = (0..n).map(|big_b| v[big_b] * f[a][big_b][big_a]).sum();
                r -= force * pi[a].coeff(0);
            }
            r
        })
        .collect();
    Ok(ReducedResidual {
        base,
        fiber: pi.iter().map(|p| -p.coeff(1)).collect(),
    })
}

/// A monitored quantity along a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct ConservedQuantity {
    pub name: String,
    pub values: Vec<f64>,
    /// `max_t |q(t) − q(0)|`.
    pub drift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentumReport {
    pub quantities: Vec<ConservedQuantity>,
}

impl MomentumReport {
    pub fn max_drift(&self) -> f64 {
        self.quantities.iter().fold(0.0, |a, q| a.max(q.drift))
    }
}

fn quantity(name: String, values: Vec<f64>) -> ConservedQuantity {
    let start = values.first().copied().unwrap_or(0.0);
    let drift = values.iter().fold(0.0f64, |a, v| a.max((v - start).abs()));
    ConservedQuantity { name, values, drift }
}

/// Drift of the conserved parts of the top momentum `πᵏ` on the `𝔤` block:
/// each component for an abelian algebra, `‖πᵏ‖²` for `so(3)`.
pub fn conserved_momentum_monitor(sys: &ReducedSystem, traj: &Trajectory) -> Result<MomentumReport> {
    let momenta = traj
        .momenta
        .as_ref()
        .ok_or_else(|| Error::Unsupported("trajectory carries no momentum ladder".into()))?;
    let (n, g, k) = (sys.n, sys.rank(), sys.spec.order());
    let top: Vec<&[f64]> = momenta
        .iter()
        .map(|ladder| {
            ladder
                .get(k - 1)
                .filter(|p| p.len() == n + g)
                .map(|p| &p[n..])
                .ok_or_else(|| Error::Dimension("momentum ladder does not match the system".into()))
        })
        .collect::<Result<_>>()?;
    let quantities = if sys.constants.is_abelian() {
        (0..g)
            .map(|a| quantity(format!("pi_{k}_{}", n + a + 1), top.iter().map(|p| p[a]).collect()))
            .collect()
    } else if sys.constants == StructureConstants::so3() {
        vec![quantity(
            format!("norm2_pi_{k}"),
            top.iter().map(|p| p.iter().map(|v| v * v).sum()).collect(),
        )]
    } else {
        return Err(Error::Unsupported(
            "no conserved quantity is known for this Lie algebra".into(),
        ));
    };
    Ok(MomentumReport { quantities })
}

/// Convenience: reduced jets from a curve in the algebroid, dropping the
/// base velocity block of `y₁`.
pub fn reduced_from_curve(sys: &ReducedSystem, curve: &CurveJet) -> Result<ReducedJet> {
    if curve.x.len() != sys.n || curve.y1.len() != sys.n + sys.rank() {
        return Err(Error::Dimension("curve does not match the reduced system".into()));
    }
    Ok(ReducedJet {
        x: curve.x.clone(),
        y: curve.y1[sys.n..].to_vec(),
    })
}
