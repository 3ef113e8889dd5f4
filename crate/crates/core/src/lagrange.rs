//! Lagrangian side: the phase-dynamics relation, Jacobi–Ostrogradski
//! momenta, Euler–Lagrange residuals and explicit integration.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::algebroid::AlgebroidSpec;
use crate::error::{Error, Result};
use crate::expr::{parse, Expression, Node};
use crate::graded::{embed_levels, level_vars, Convention, CurveJet, EpsilonImage, HigherPoint, WeightedStructure};
use crate::jet::Jet;
use crate::linalg::{solve_checked, Matrix};
use crate::ode::{rk4, step_count};
use crate::scalar::{dot, values, Scalar};

/// A Lagrangian on `F_k = Aᵏ` over the variables of [`level_vars`].
#[derive(Debug, Clone)]
pub struct LagrangianSpec {
    k: usize,
    algebroid: Arc<AlgebroidSpec>,
    structure: Arc<WeightedStructure>,
    lagrangian: Expression,
    derivatives: Arc<Derivatives>,
    convention: Convention,
}

/// Symbolic first partials of `L` and the rows `∂²L/∂zⁱ∂v` of its Hessian.
#[derive(Debug)]
struct Derivatives {
    gradient: Vec<Expression>,
    top_hessian: Vec<Vec<Expression>>,
}

impl Derivatives {
    fn new(l: &Expression, top: &[usize]) -> Self {
        let gradient: Vec<Expression> = (0..l.variables().len()).map(|i| l.derivative(i)).collect();
        let top_hessian = top
            .iter()
            .map(|&i| (0..l.variables().len()).map(|j| gradient[i].derivative(j)).collect())
            .collect();
        Derivatives { gradient, top_hessian }
    }
}

fn eval_all<S: Scalar>(exprs: &[Expression], values: &[S]) -> Result<Vec<S>> {
    exprs
        .iter()
        .map(|e| match e.as_constant() {
            Some(v) => Ok(S::from_f64(v)),
            None => Ok(e.eval(values)?),
        })
        .collect()
}

impl LagrangianSpec {
    /// Uses the built-in weighted structure of `Aᵏ`.
    pub fn new(algebroid: AlgebroidSpec, k: usize, lagrangian: Expression, convention: Convention) -> Result<Self> {
        let structure = WeightedStructure::lie_algebroid(&algebroid, k)?;
        let vars = level_vars(algebroid.n_base(), algebroid.m_fiber(), k);
        let lagrangian = lagrangian.rebind(&vars)?;
        let top: Vec<usize> = (0..algebroid.m_fiber())
            .map(|a| algebroid.n_base() + (k - 1) * algebroid.m_fiber() + a)
            .collect();
        Ok(LagrangianSpec {
            k,
            derivatives: Arc::new(Derivatives::new(&lagrangian, &top)),
            lagrangian,
            algebroid: Arc::new(algebroid),
            structure: Arc::new(structure),
            convention,
        })
    }

    /// All first partials of `L` along `values`.
    pub fn partials<S: Scalar>(&self, values: &[S]) -> Result<Vec<S>> {
        eval_all(&self.derivatives.gradient, values)
    }

    /// `∂²L/∂zⁱ∂vʲ` for the top block `z` and every variable `v`.
    pub fn top_hessian_rows<S: Scalar>(&self, values: &[S]) -> Result<Vec<Vec<S>>> {
        self.derivatives
            .top_hessian
            .iter()
            .map(|row| eval_all(row, values))
            .collect()
    }

    pub fn parse(algebroid: AlgebroidSpec, k: usize, source: &str, convention: Convention) -> Result<Self> {
        let vars = level_vars(algebroid.n_base(), algebroid.m_fiber(), k);
        let e = parse(source, &vars)?;
        Self::new(algebroid, k, e, convention)
    }

    /// Replaces the weighted structure used by the explicit reduction.
    pub fn with_structure(mut self, structure: WeightedStructure) -> Result<Self> {
        if structure.order() != self.k
            || structure.n_base() != self.algebroid.n_base()
            || structure.m_fiber() != self.algebroid.m_fiber()
        {
            return Err(Error::Dimension("weighted structure does not match the Lagrangian".into()));
        }
        self.structure = Arc::new(structure);
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn algebroid(&self) -> &AlgebroidSpec {
        &self.algebroid
    }

    pub fn structure(&self) -> &WeightedStructure {
        &self.structure
    }

    pub fn lagrangian(&self) -> &Expression {
        &self.lagrangian
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn n_base(&self) -> usize {
        self.algebroid.n_base()
    }

    pub fn m_fiber(&self) -> usize {
        self.algebroid.m_fiber()
    }

    pub fn variables(&self) -> &[String] {
        self.lagrangian.variables()
    }

    /// Index of `y_w^a` among the variables.
    pub fn fiber_index(&self, w: usize, a: usize) -> usize {
        self.n_base() + (w - 1) * self.m_fiber() + a
    }

    /// Indices of the top block `z = y_k`.
    pub fn top_indices(&self) -> Vec<usize> {
        (0..self.m_fiber()).map(|a| self.fiber_index(self.k, a)).collect()
    }

    fn check_point(&self, p: &HigherPoint) -> Result<()> {
        let ok = p.x.len() == self.n_base()
            && p.y.len() == self.k
            && p.y.iter().all(|b| b.len() == self.m_fiber())
            && p.convention == self.convention;
        if !ok {
            return Err(Error::Dimension(format!(
                "point does not lie in F_{} with base {} and rank {} in the {} convention",
                self.k,
                self.n_base(),
                self.m_fiber(),
                self.convention.name()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, p: &HigherPoint) -> Result<f64> {
        self.check_point(p)?;
        Ok(self.lagrangian.eval(&p.flat())?)
    }

    /// All first partials at `p`.
    pub fn gradient(&self, p: &HigherPoint) -> Result<Vec<f64>> {
        self.check_point(p)?;
        self.partials(&p.flat())
    }

    /// The same Lagrangian expressed in the coordinates of another
    /// convention.
    pub fn in_convention(&self, to: Convention) -> LagrangianSpec {
        let (n, m) = (self.n_base(), self.m_fiber());
        let vars = self.variables().to_vec();
        let replacements: Vec<Node> = (0..vars.len())
            .map(|i| {
                if i < n {
                    return Node::Var(i);
                }
                let w = (i - n) / m + 1;
                let f = to.to_plain(w) / self.convention.to_plain(w);
                if f == 1.0 {
                    Node::Var(i)
                } else {
                    Node::binary(crate::expr::BinOp::Mul, Node::Num(f), Node::Var(i))
                }
            })
            .collect();
        let lagrangian = self.lagrangian.substitute(&replacements, vars);
        LagrangianSpec {
            derivatives: Arc::new(Derivatives::new(&lagrangian, &self.top_indices())),
            lagrangian,
            convention: to,
            ..self.clone()
        }
    }

    fn factor(&self, w: usize) -> f64 {
        self.convention.weight_factor(w)
    }

    /// Jets of every variable along the curve, truncated to a common valid
    /// order of at least `needed`.
    fn variable_jets(&self, curve: &CurveJet, needed: usize) -> Result<Vec<Jet<f64>>> {
        let (n, m, k) = (self.n_base(), self.m_fiber(), self.k);
        if curve.x.len() != n || curve.y1.len() != m {
            return Err(Error::Dimension("curve jets do not match the algebroid".into()));
        }
        let x_order = curve.x_order();
        let y_order = curve.y_order();
        let available = x_order.min(y_order.saturating_sub(k - 1));
        if y_order < k - 1 || available < needed {
            let (need, have) = if y_order < needed + k - 1 {
                (needed + k - 1, y_order)
            } else {
                (needed, x_order)
            };
            return Err(Error::JetOrder {
                needed: need,
                available: have,
            });
        }
        let mut jets: Vec<Jet<f64>> = curve.x.iter().map(|j| j.truncate(available)).collect();
        for w in 1..=k {
            jets.extend(curve.level(w, self.convention).into_iter().map(|j| j.truncate(available)));
        }
        Ok(jets)
    }

    fn ladder_jets(&self, jets: &[Jet<f64>]) -> Result<(Vec<Jet<f64>>, Vec<Vec<Jet<f64>>>)> {
        let (m, k) = (self.m_fiber(), self.k);
        let g = self.partials(jets)?;
        let mut ladder: Vec<Vec<Jet<f64>>> = Vec::with_capacity(k);
        ladder.push(
            (0..m)
                .map(|a| g[self.fiber_index(k, a)].scale(1.0 / self.factor(k)))
                .collect(),
        );
        for u in 1..k {
            let next = (0..m)
                .map(|a| {
                    (g[self.fiber_index(k - u, a)].clone() - ladder[u - 1][a].derivative())
                        .scale(1.0 / self.factor(k - u))
                })
                .collect();
            ladder.push(next);
        }
        Ok((g, ladder))
    }

    /// The momentum ladder `π¹..πᵏ` at the expansion time of the curve.
    ///
    /// Needs base jets of order `k − 1` and fiber jets of order `2k − 2`.
    pub fn jacobi_ostrogradski(&self, curve: &CurveJet) -> Result<Vec<Vec<f64>>> {
        let jets = self.variable_jets(curve, self.k - 1)?;
        let (_, ladder) = self.ladder_jets(&jets)?;
        Ok(ladder.iter().map(|b| b.iter().map(|j| *j.head()).collect()).collect())
    }

    /// Residual of the `k`-th order Euler–Lagrange equations,
    /// `ρᵀ∂L/∂x + y₁ᵇ Cᶜ_ba πᵏ_c − π̇ᵏ_a`, followed by the admissibility tail
    /// `ẋ − ρ(x) y₁`.
    ///
    /// Needs base jets of order `k` and fiber jets of order `2k − 1`.
    pub fn el_residual(&self, curve: &CurveJet) -> Result<Vec<f64>> {
        let (n, m, k) = (self.n_base(), self.m_fiber(), self.k);
        let jets = self.variable_jets(curve, k)?;
        let (g, ladder) = self.ladder_jets(&jets)?;
        let x: Vec<f64> = curve.x.iter().map(|j| *j.head()).collect();
        let y: Vec<f64> = curve.y1.iter().map(|j| *j.head()).collect();
        let rho = self.algebroid.anchor_at(&x)?;
        let c = self.algebroid.structure_at(&x)?;
        let top = &ladder[k - 1];
        let mut out = Vec::with_capacity(m + n);
        for a in 0..m {
            let mut r = -top[a].coeff(1);
            for (big_a, row) in rho.iter().enumerate() {
                r += row[a] * *g[big_a].head();
            }
            for b in 0..m {
                if y[b] == 0.0 {
                    continue;
                }
                for cc in 0..m {
                    r += y[b] * c.get(b, a, cc) * *top[cc].head();
                }
            }
            out.push(r);
        }
        for (big_a, row) in rho.iter().enumerate() {
            out.push(curve.x[big_a].coeff(1) - dot(row, &y));
        }
        Ok(out)
    }

    /// One representative of the relation `Λᵉ_L` over `p`: `Π¹` is forced by
    /// `∂L/∂z` and `free = (Π²..Πᵏ)` are the remaining parameters.
    pub fn tulczyjew_differential(&self, p: &HigherPoint, free: &[Vec<f64>]) -> Result<PhaseTangent> {
        self.check_point(p)?;
        let (m, k) = (self.m_fiber(), self.k);
        if free.len() != k - 1 || free.iter().any(|b| b.len() != m) {
            return Err(Error::Dimension(format!("expected {} free momentum blocks of size {m}", k - 1)));
        }
        let flat = p.flat();
        let g = self.partials(&flat)?;
        let (pi, image) = self.epsilon_of_gradient(&flat, &g, free.to_vec())?;
        Ok(PhaseTangent {
            base: flat[..flat.len() - m].to_vec(),
            pi,
            dx: image.dx,
            dpi: image.dpi,
        })
    }

    /// Applies `ε` to `𝒫L`: returns the full ladder and the image.
    fn epsilon_of_gradient<S: Scalar>(
        &self,
        flat: &[S],
        g: &[S],
        upper: Vec<Vec<S>>,
    ) -> Result<(Vec<Vec<S>>, EpsilonImage<S>)> {
        let (n, m, k) = (self.n_base(), self.m_fiber(), self.k);
        let mut pi: Vec<Vec<S>> = Vec::with_capacity(k);
        pi.push((0..m).map(|a| g[self.fiber_index(k, a)].scale(1.0 / self.factor(k))).collect());
        pi.extend(upper);
        let levels: Vec<Vec<S>> = (1..=k)
            .map(|w| flat[self.fiber_index(w, 0)..self.fiber_index(w, 0) + m].to_vec())
            .collect();
        let y = embed_levels(&levels, self.convention);
        let mut p: Vec<Vec<S>> = vec![g[..n].to_vec()];
        for u in 1..k {
            let f = self.factor(u);
            p.push(
                (0..m)
                    .map(|a| g[self.fiber_index(u, a)].clone() - pi[k - u][a].scale(f))
                    .collect(),
            );
        }
        let image = self.structure.apply(&flat[..n + (k - 1) * m], &y, &p, &pi)?;
        Ok((pi, image))
    }

    /// The explicit system on `(x, y₁..y_k, Π²..Πᵏ)`.
    pub fn reduce_to_explicit(&self) -> ExplicitSystem {
        ExplicitSystem { spec: self.clone() }
    }
}

/// An element of `T D*(F_k)`: position `(X, Π)` and velocity `(δX, δΠ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTangent {
    /// Coordinates of `F_{k−1}`.
    pub base: Vec<f64>,
    /// `Π¹..Πᵏ`.
    pub pi: Vec<Vec<f64>>,
    pub dx: Vec<Vec<f64>>,
    pub dpi: Vec<Vec<f64>>,
}

/// Explicit first-order form of the Euler–Lagrange equations for a Lagrangian
/// hyperregular in the top block.
///
/// The state is `(x, y₁, …, y_k, Π², …, Πᵏ)` flattened; `Π¹ = ∂L/∂z / c(k)` is
/// algebraic.
#[derive(Debug, Clone)]
pub struct ExplicitSystem {
    spec: LagrangianSpec,
}

impl ExplicitSystem {
    pub fn spec(&self) -> &LagrangianSpec {
        &self.spec
    }

    /// Number of point coordinates, `n + k m`.
    pub fn point_dim(&self) -> usize {
        self.spec.variables().len()
    }

    pub fn dim(&self) -> usize {
        self.point_dim() + (self.spec.k - 1) * self.spec.m_fiber()
    }

    pub fn state(&self, p: &HigherPoint, upper: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.spec.check_point(p)?;
        let m = self.spec.m_fiber();
        if upper.len() != self.spec.k - 1 || upper.iter().any(|b| b.len() != m) {
            return Err(Error::Dimension(format!(
                "expected {} momentum blocks Π²..Πᵏ of size {m}",
                self.spec.k - 1
            )));
        }
        Ok(p.flat().into_iter().chain(upper.iter().flatten().copied()).collect())
    }

    pub fn split(&self, s: &[f64]) -> (HigherPoint, Vec<Vec<f64>>) {
        let (n, m, k) = (self.spec.n_base(), self.spec.m_fiber(), self.spec.k);
        let point = HigherPoint {
            x: s[..n].to_vec(),
            y: (0..k).map(|w| s[n + w * m..n + (w + 1) * m].to_vec()).collect(),
            convention: self.spec.convention,
        };
        let upper = (0..k - 1)
            .map(|u| s[self.point_dim() + u * m..self.point_dim() + (u + 1) * m].to_vec())
            .collect();
        (point, upper)
    }

    fn upper_blocks<S: Scalar>(&self, s: &[S]) -> Vec<Vec<S>> {
        let (m, k) = (self.spec.m_fiber(), self.spec.k);
        let start = self.point_dim();
        (0..k - 1)
            .map(|u| s[start + u * m..start + (u + 1) * m].to_vec())
            .collect()
    }

    /// The full ladder `Π¹..Πᵏ` at a state.
    pub fn momenta<S: Scalar>(&self, s: &[S]) -> Result<Vec<Vec<S>>> {
        let spec = &self.spec;
        let flat = &s[..self.point_dim()];
        let g = eval_all(&spec.derivatives.gradient[spec.fiber_index(spec.k, 0)..], flat)?;
        let mut pi = vec![g.iter().map(|v| v.scale(1.0 / spec.factor(spec.k))).collect()];
        pi.extend(self.upper_blocks(s));
        Ok(pi)
    }

    /// `Σ_U ⟨Πᵁ, Y_{k+1−U}⟩ − L`, conserved along solutions for autonomous `L`.
    pub fn energy(&self, s: &[f64]) -> Result<f64> {
        let spec = &self.spec;
        let (point, _) = self.split(s);
        let pi = self.momenta(s)?;
        let y = embed_levels(&point.y, spec.convention);
        let k = spec.k;
        let pairing: f64 = (1..=k).map(|u| dot(&pi[u - 1], &y[k - u])).sum();
        Ok(pairing - spec.lagrangian.eval(&s[..self.point_dim()])?)
    }

    /// The right-hand side, generic so that it also runs on Taylor jets.
    pub fn rhs<S: Scalar>(&self, s: &[S]) -> Result<Vec<S>> {
        let spec = &self.spec;
        let (m, k) = (spec.m_fiber(), spec.k);
        if s.len() != self.dim() {
            return Err(Error::Dimension(format!("state has {} entries, expected {}", s.len(), self.dim())));
        }
        let nv = self.point_dim();
        let flat = &s[..nv];
        let g = spec.partials(flat)?;
        let (_, image) = spec.epsilon_of_gradient(flat, &g, self.upper_blocks(s))?;
        let rows = spec.top_hessian_rows(flat)?;
        let velocity: Vec<&S> = image.dx.iter().flatten().collect();
        let mixed: Vec<S> = rows
            .iter()
            .map(|row| row.iter().zip(&velocity).fold(S::zero(), |acc, (h, v)| acc + h.clone() * (*v).clone()))
            .collect();
        let top = nv - m;
        let hessian = Matrix::from_rows(rows.iter().map(|row| row[top..].to_vec()).collect());
        let fk = spec.factor(k);
        let rhs: Vec<S> = (0..m)
            .map(|a| image.dpi[0][a].scale(fk) - mixed[a].clone())
            .collect();
        let zdot = solve_checked(&hessian, &rhs).map_err(|e| Error::SingularHessian {
            point: values(s),
            condition: e.condition,
        })?;
        let mut out: Vec<S> = image.dx.into_iter().flatten().collect();
        out.extend(zdot);
        out.extend(image.dpi.into_iter().skip(1).flatten());
        Ok(out)
    }

    /// Taylor expansion of the solution through `order`, by repeated
    /// integration of the right-hand side in jet arithmetic.
    pub fn state_jets(&self, s: &[f64], order: usize) -> Result<Vec<Jet<f64>>> {
        let mut jets: Vec<Jet<f64>> = s.iter().map(|&v| Jet::constant(v)).collect();
        for pass in 1..=order {
            let f = self.rhs(&jets)?;
            jets = f
                .iter()
                .zip(s)
                .map(|(d, &v)| d.integral(v).truncate(pass))
                .collect();
        }
        Ok(jets)
    }

    /// The solution through a state as a curve jet of the order needed by
    /// [`LagrangianSpec::el_residual`].
    pub fn curve_jet(&self, s: &[f64]) -> Result<CurveJet> {
        let (n, m, k) = (self.spec.n_base(), self.spec.m_fiber(), self.spec.k);
        let jets = self.state_jets(s, 2 * k - 1)?;
        Ok(CurveJet::new(jets[..n].to_vec(), jets[n..n + m].to_vec()))
    }

    /// Fixed-step RK4 from `initial` over `[0, t_end]`.
    ///
    /// On a failure mid-run the nodes computed so far are returned with the
    /// error.
    pub fn integrate(&self, initial: &[f64], t_end: f64, h: f64, options: &IntegrateOptions) -> Result<Trajectory, Failure> {
        let fail = |error: Error| Failure {
            error,
            partial: Box::new(Trajectory::empty(self.spec.convention, h)),
        };
        let steps = step_count(t_end, h).map_err(fail)?;
        if initial.len() != self.dim() {
            return Err(fail(Error::Dimension(format!(
                "initial state has {} entries, expected {}",
                initial.len(),
                self.dim()
            ))));
        }
        let (states, error) = rk4(|s| self.rhs(s), initial, h, steps);
        match (self.trajectory(states, h, options), error) {
            (Ok(t), None) => Ok(t),
            (Ok(t), Some(error)) => Err(Failure {
                error,
                partial: Box::new(t),
            }),
            (Err(e), _) => Err(fail(e)),
        }
    }

    fn trajectory(&self, states: Vec<Vec<f64>>, h: f64, options: &IntegrateOptions) -> Result<Trajectory> {
        let momenta = states
            .iter()
            .map(|s| self.momenta(s))
            .collect::<Result<Vec<_>>>()?;
        let energy = states.iter().map(|s| self.energy(s)).collect::<Result<Vec<_>>>()?;
        let stride = options.residual_stride;
        let el_residual = states
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                if stride == 0 || i % stride != 0 {
                    return None;
                }
                let r = self.spec.el_residual(&self.curve_jet(s).ok()?).ok()?;
                Some(r.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
            })
            .collect();
        let points = states.iter().map(|s| self.split(s).0).collect();
        Ok(Trajectory {
            times: (0..states.len()).map(|i| i as f64 * h).collect(),
            points,
            momenta: Some(momenta),
            energy,
            el_residual,
            convention: self.spec.convention,
            integrator: "rk4".into(),
            step: h,
            states,
        })
    }
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    /// Evaluate the Euler–Lagrange residual every `residual_stride` nodes;
    /// zero disables it.
    pub residual_stride: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { residual_stride: 1 }
    }
}

/// A sampled solution on a uniform grid.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<HigherPoint>,
    /// Per node, the ladder `π¹..πᵏ`.
    pub momenta: Option<Vec<Vec<Vec<f64>>>>,
    pub energy: Vec<f64>,
    /// Per node, the largest residual component where it was evaluated and
    /// the solution jet exists.
    pub el_residual: Vec<Option<f64>>,
    pub convention: Convention,
    pub integrator: String,
    pub step: f64,
    /// Raw integrator states.
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub(crate) fn empty(convention: Convention, step: f64) -> Self {
        Trajectory {
            times: vec![],
            points: vec![],
            momenta: None,
            energy: vec![],
            el_residual: vec![],
            convention,
            integrator: "rk4".into(),
            step,
            states: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_el_residual(&self) -> Option<f64> {
        self.el_residual.iter().flatten().copied().reduce(f64::max)
    }

    pub fn energy_drift(&self) -> f64 {
        let Some(e0) = self.energy.first() else {
            return 0.0;
        };
        self.energy.iter().fold(0.0, |acc, e| acc.max((e - e0).abs()))
    }
}

/// An integration that stopped early.
#[derive(Debug, Clone)]
pub struct Failure {
    pub error: Error,
    pub partial: Box<Trajectory>,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} after {} nodes", self.error, self.partial.len())
    }
}

impl std::error::Error for Failure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Failure> for Error {
    fn from(f: Failure) -> Error {
        f.error
    }
}
