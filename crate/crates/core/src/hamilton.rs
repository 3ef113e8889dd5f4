//! Hamiltonian side: the Legendre map to the Mironian, Hamiltonians of
//! hyperregular Lagrangians, the phase dynamics `Λ_H` and consistency with
//! the Lagrangian side.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebroid::AlgebroidSpec;
use crate::error::{Error, Result};
use crate::expr::{parse, Expression};
use crate::graded::{
    embed_levels, level_vars, Convention, EpsilonImage, HigherPoint, MironianPoint, WeightedStructure,
};
use crate::jet::Jet;
use crate::lagrange::{LagrangianSpec, Trajectory};
use crate::linalg::{solve_checked, Matrix};
use crate::ode::{rk4, step_count};
use crate::scalar::{dot, lift, Scalar};

/// How a Hamiltonian value relates to the section of the affine bundle it
/// stands for. A function `H` corresponds to the section `−H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignConvention {
    #[default]
    Function,
    Section,
}

impl SignConvention {
    /// Factor turning a stored value into the function-convention value.
    pub fn factor(self) -> f64 {
        match self {
            SignConvention::Function => 1.0,
            SignConvention::Section => -1.0,
        }
    }
}

/// Name of the Mironian momentum coordinate `Θ¹_a`, e.g. `theta_1`.
pub fn theta_var(a: usize) -> String {
    format!("theta_{}", a + 1)
}

/// Variables of `Mi(F_k)`: those of `F_{k−1}` followed by `theta_1..theta_m`.
pub fn mironian_vars(n: usize, m: usize, k: usize) -> Vec<String> {
    let mut vars = level_vars(n, m, k - 1);
    vars.extend((0..m).map(theta_var));
    vars
}

impl MironianPoint {
    /// Coordinates in the order of [`mironian_vars`].
    pub fn flat(&self) -> Vec<f64> {
        self.x
            .iter()
            .chain(self.y.iter().flatten())
            .chain(&self.theta)
            .copied()
            .collect()
    }
}

/// A Hamiltonian on `Mi(F_k)`, reported in the function convention.
pub trait Hamiltonian: Send + Sync {
    fn order(&self) -> usize;
    fn n_base(&self) -> usize;
    fn m_fiber(&self) -> usize;
    fn convention(&self) -> Convention;
    /// Value at Mironian coordinates, function convention.
    fn value(&self, mironian: &[f64]) -> Result<f64>;
    /// All first partials, function convention.
    fn gradient(&self, mironian: &[f64]) -> Result<Vec<f64>>;
}

/// A Hamiltonian given as an expression over [`mironian_vars`].
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    k: usize,
    algebroid: Arc<AlgebroidSpec>,
    expression: Expression,
    gradient: Vec<Expression>,
    convention: Convention,
    sign: SignConvention,
}

impl HamiltonianSpec {
    pub fn new(
        algebroid: AlgebroidSpec,
        k: usize,
        expression: Expression,
        convention: Convention,
        sign: SignConvention,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Dimension("order k must be at least 1".into()));
        }
        let vars = mironian_vars(algebroid.n_base(), algebroid.m_fiber(), k);
        let expression = expression.rebind(&vars)?;
        let gradient = (0..vars.len()).map(|i| expression.derivative(i)).collect();
        Ok(HamiltonianSpec {
            k,
            algebroid: Arc::new(algebroid),
            expression,
            gradient,
            convention,
            sign,
        })
    }

    pub fn parse(
        algebroid: AlgebroidSpec,
        k: usize,
        source: &str,
        convention: Convention,
        sign: SignConvention,
    ) -> Result<Self> {
        let vars = mironian_vars(algebroid.n_base(), algebroid.m_fiber(), k);
        let e = parse(source, &vars)?;
        Self::new(algebroid, k, e, convention, sign)
    }

    pub fn algebroid(&self) -> &AlgebroidSpec {
        &self.algebroid
    }

    pub fn expression(&self) -> &Expression {
        &self.expression
    }

    pub fn sign(&self) -> SignConvention {
        self.sign
    }

    /// The stored value in this spec's own sign convention.
    pub fn raw_value(&self, mironian: &[f64]) -> Result<f64> {
        Ok(self.expression.eval(mironian)?)
    }
}

impl Hamiltonian for HamiltonianSpec {
    fn order(&self) -> usize {
        self.k
    }
    fn n_base(&self) -> usize {
        self.algebroid.n_base()
    }
    fn m_fiber(&self) -> usize {
        self.algebroid.m_fiber()
    }
    fn convention(&self) -> Convention {
        self.convention
    }
    fn value(&self, mironian: &[f64]) -> Result<f64> {
        Ok(self.sign.factor() * self.raw_value(mironian)?)
    }
    fn gradient(&self, mironian: &[f64]) -> Result<Vec<f64>> {
        let f = self.sign.factor();
        self.gradient
            .iter()
            .map(|e| Ok(f * e.eval(mironian)?))
            .collect()
    }
}

/// The Legendre map `λ_L`: `(x, y₁..y_{k−1}, z) ↦ (x, y₁..y_{k−1}, ∂L/∂z)`.
pub fn legendre(spec: &LagrangianSpec, p: &HigherPoint) -> Result<MironianPoint> {
    let g = spec.gradient(p)?;
    let k = spec.order();
    Ok(MironianPoint {
        x: p.x.clone(),
        y: p.y[..k - 1].to_vec(),
        theta: spec.top_indices().iter().map(|&i| g[i]).collect(),
        convention: p.convention,
    })
}

const NEWTON_ITERATIONS: usize = 50;
const NEWTON_HALVINGS: usize = 8;
const NEWTON_TOL: f64 = 1e-12;

fn top_gradient<S: Scalar>(spec: &LagrangianSpec, values: &[S]) -> Result<Vec<S>> {
    let g = spec.partials(values)?;
    Ok(spec.top_indices().iter().map(|&i| g[i].clone()).collect())
}

fn top_hessian<S: Scalar>(spec: &LagrangianSpec, values: &[S]) -> Result<Matrix<S>> {
    let top = values.len() - spec.m_fiber();
    let rows = spec.top_hessian_rows(values)?;
    Ok(Matrix::from_rows(rows.into_iter().map(|r| r[top..].to_vec()).collect()))
}

fn singular(values: &[f64], condition: f64) -> Error {
    Error::SingularHessian {
        point: values.to_vec(),
        condition,
    }
}

/// Solves `θ = ∂L/∂z(x, y, z)` for `z` by damped Newton iteration from
/// `z_guess` (zero if absent).
pub fn inverse_legendre(spec: &LagrangianSpec, mp: &MironianPoint, z_guess: Option<&[f64]>) -> Result<HigherPoint> {
    let (n, m, k) = (spec.n_base(), spec.m_fiber(), spec.order());
    if mp.x.len() != n || mp.y.len() != k - 1 || mp.y.iter().any(|b| b.len() != m) || mp.theta.len() != m {
        return Err(Error::Dimension("Mironian point does not match the Lagrangian".into()));
    }
    let mut values: Vec<f64> = mp.x.iter().chain(mp.y.iter().flatten()).copied().collect();
    let lower = values.len();
    match z_guess {
        Some(z) if z.len() == m => values.extend_from_slice(z),
        Some(_) => return Err(Error::Dimension(format!("initial guess must have {m} entries"))),
        None => values.extend(std::iter::repeat(0.0).take(m)),
    }
    let tol = NEWTON_TOL * mp.theta.iter().fold(1.0f64, |a, t| a.max(t.abs()));
    let residual = |v: &[f64]| -> Result<Vec<f64>> {
        Ok(top_gradient(spec, v)?
            .iter()
            .zip(&mp.theta)
            .map(|(g, t)| g - t)
            .collect())
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut r = residual(&values)?;
    for _ in 0..NEWTON_ITERATIONS {
        if norm(&r) < tol {
            let mut y: Vec<Vec<f64>> = mp.y.clone();
            y.push(values[lower..].to_vec());
            return Ok(HigherPoint::new(mp.x.clone(), y, mp.convention));
        }
        let h = top_hessian(spec, &values)?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = solve_checked(&h, &neg).map_err(|e| singular(&values, e.condition))?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=NEWTON_HALVINGS {
            let mut trial = values.clone();
            for (t, s) in trial[lower..].iter_mut().zip(&step) {
                *t += alpha * s;
            }
            if let Ok(rt) = residual(&trial) {
                if norm(&rt) < norm(&r) {
                    accepted = Some((trial, rt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((v, rt)) => {
                values = v;
                r = rt;
            }
            None => {
                return Err(Error::NewtonDivergence {
                    iterations: NEWTON_ITERATIONS,
                    residual: norm(&r),
                })
            }
        }
    }
    if norm(&r) < tol {
        let mut y: Vec<Vec<f64>> = mp.y.clone();
        y.push(values[lower..].to_vec());
        return Ok(HigherPoint::new(mp.x.clone(), y, mp.convention));
    }
    Err(Error::NewtonDivergence {
        iterations: NEWTON_ITERATIONS,
        residual: norm(&r),
    })
}

/// `H = ⟨θ, z⟩ − L(z)` with `z = λ_L⁻¹(θ)`, for a Lagrangian hyperregular in
/// the top block.
#[derive(Debug, Clone)]
pub struct LegendreHamiltonian {
    spec: LagrangianSpec,
}

pub fn hamiltonian_from_lagrangian(spec: &LagrangianSpec) -> LegendreHamiltonian {
    LegendreHamiltonian { spec: spec.clone() }
}

impl LegendreHamiltonian {
    pub fn lagrangian(&self) -> &LagrangianSpec {
        &self.spec
    }

    fn split(&self, mironian: &[f64]) -> Result<MironianPoint> {
        let (n, m, k) = (self.spec.n_base(), self.spec.m_fiber(), self.spec.order());
        if mironian.len() != n + k * m {
            return Err(Error::Dimension(format!(
                "Mironian point has {} coordinates, expected {}",
                mironian.len(),
                n + k * m
            )));
        }
        Ok(MironianPoint {
            x: mironian[..n].to_vec(),
            y: (0..k - 1).map(|w| mironian[n + w * m..n + (w + 1) * m].to_vec()).collect(),
            theta: mironian[n + (k - 1) * m..].to_vec(),
            convention: self.spec.convention(),
        })
    }

    /// `H` over any scalar, with `z` found in floating point and then refined
    /// by Newton steps in `S` so that derivatives carried by `S` are exact.
    pub fn eval<S: Scalar>(&self, mironian: &[S], z0: &[f64]) -> Result<S> {
        let m = self.spec.m_fiber();
        let split = mironian.len() - m;
        let theta = &mironian[split..];
        let mut values: Vec<S> = mironian[..split].to_vec();
        values.extend(lift::<S>(z0));
        for _ in 0..3 {
            let g = top_gradient(&self.spec, &values)?;
            let h = top_hessian(&self.spec, &values)?;
            let r: Vec<S> = g.into_iter().zip(theta).map(|(g, t)| t.clone() - g).collect();
            let step = solve_checked(&h, &r).map_err(|e| singular(&crate::scalar::values(&values), e.condition))?;
            for (v, s) in values[split..].iter_mut().zip(step) {
                *v = v.clone() + s;
            }
        }
        let z = &values[split..];
        Ok(dot(theta, z) - self.spec.lagrangian().eval(&values)?)
    }

    /// The top block `z = λ_L⁻¹(θ)`.
    pub fn top_block(&self, mironian: &[f64]) -> Result<Vec<f64>> {
        let mp = self.split(mironian)?;
        let p = inverse_legendre(&self.spec, &mp, None)?;
        Ok(p.z().to_vec())
    }
}

impl Hamiltonian for LegendreHamiltonian {
    fn order(&self) -> usize {
        self.spec.order()
    }
    fn n_base(&self) -> usize {
        self.spec.n_base()
    }
    fn m_fiber(&self) -> usize {
        self.spec.m_fiber()
    }
    fn convention(&self) -> Convention {
        self.spec.convention()
    }
    fn value(&self, mironian: &[f64]) -> Result<f64> {
        let z = self.top_block(mironian)?;
        self.eval(mironian, &z)
    }
    fn gradient(&self, mironian: &[f64]) -> Result<Vec<f64>> {
        let z = self.top_block(mironian)?;
        let mut seeded: Vec<Jet<f64>> = mironian.iter().map(|&v| Jet::constant(v)).collect();
        let mut out = Vec::with_capacity(mironian.len());
        for i in 0..mironian.len() {
            seeded[i] = Jet::variable(mironian[i], 1);
            out.push(self.eval(&seeded, &z)?.coeff(1));
            seeded[i] = Jet::constant(mironian[i]);
        }
        Ok(out)
    }
}

/// The phase dynamics `Λ_H` at a Mironian point with upper momenta
/// `Π²..Πᵏ`: `ε` applied with `Y_w = c(w)X_w`, `Y_k = c(k)∂H/∂θ`,
/// `P₀ = −∂H/∂x`, `P_w = −(∂H/∂X_w + c(w)Π^{k+1−w})` and `Π¹ = θ/c(k)`.
pub fn hamiltonian_phase_dynamics<H: Hamiltonian + ?Sized>(
    h: &H,
    ws: &WeightedStructure,
    mp: &MironianPoint,
    upper: &[Vec<f64>],
) -> Result<EpsilonImage<f64>> {
    let (n, m, k) = (h.n_base(), h.m_fiber(), h.order());
    if ws.order() != k || ws.n_base() != n || ws.m_fiber() != m {
        return Err(Error::Dimension("weighted structure does not match the Hamiltonian".into()));
    }
    if upper.len() != k - 1 || upper.iter().any(|b| b.len() != m) {
        return Err(Error::Dimension(format!("expected {} momentum blocks of size {m}", k - 1)));
    }
    let conv = h.convention();
    let f = |w: usize| conv.weight_factor(w);
    let flat = mp.flat();
    let grad = h.gradient(&flat)?;
    let lower = n + (k - 1) * m;
    let mut levels: Vec<Vec<f64>> = mp.y.clone();
    levels.push(grad[lower..].to_vec());
    let y = embed_levels(&levels, conv);
    let mut pi: Vec<Vec<f64>> = vec![mp.theta.iter().map(|t| t / f(k)).collect()];
    pi.extend(upper.iter().cloned());
    let mut p: Vec<Vec<f64>> = vec![grad[..n].iter().map(|v| -v).collect()];
    for w in 1..k {
        p.push(
            (0..m)
                .map(|a| -(grad[n + (w - 1) * m + a] + f(w) * pi[k - w][a]))
                .collect(),
        );
    }
    ws.apply(&flat[..lower], &y, &p, &pi)
}

/// The generating family `h(φ, f) = φ(f) − L(f)` with `φ(f) = ⟨θ, z⟩`.
pub fn generating_family_eval(spec: &LagrangianSpec, phi: &MironianPoint, f: &HigherPoint) -> Result<f64> {
    let k = spec.order();
    if phi.x != f.x || f.y.len() != k || phi.y.as_slice() != &f.y[..k - 1] {
        return Err(Error::BaseMismatch(
            "covector and point lie over different points of F_{k-1}".into(),
        ));
    }
    Ok(dot(&phi.theta, f.z()) - spec.eval(f)?)
}

/// Outcome of comparing `𝒟_H` with `𝒟_L`.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub samples: usize,
    pub max_difference: f64,
    pub tol: f64,
    pub pass: bool,
    /// Set when a sample could not be evaluated, e.g. a degenerate Lagrangian.
    pub failure: Option<String>,
}

/// Random sample points of `F_k` in `[−1, 1]` with random upper momenta.
pub fn random_samples(spec: &LagrangianSpec, count: usize, seed: u64) -> Vec<(HigherPoint, Vec<Vec<f64>>)> {
    let (n, m, k) = (spec.n_base(), spec.m_fiber(), spec.order());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut block = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    (0..count)
        .map(|_| {
            let x = block(n);
            let y = (0..k).map(|_| block(m)).collect();
            let upper = (0..k - 1).map(|_| block(m)).collect();
            (HigherPoint::new(x, y, spec.convention()), upper)
        })
        .collect()
}

/// Checks that `Λ_H` at `λ_L(p)` and `Λᵉ_L` at `p` give the same tangent
/// vector of `D*(F_k)` for each sample.
pub fn consistency_check(spec: &LagrangianSpec, samples: &[(HigherPoint, Vec<Vec<f64>>)], tol: f64) -> ConsistencyReport {
    let h = hamiltonian_from_lagrangian(spec);
    let mut worst = 0.0f64;
    for (i, (p, upper)) in samples.iter().enumerate() {
        let compare = || -> Result<f64> {
            let lag = spec.tulczyjew_differential(p, upper)?;
            let mp = legendre(spec, p)?;
            let ham = hamiltonian_phase_dynamics(&h, spec.structure(), &mp, upper)?;
            let diff = lag
                .dx
                .iter()
                .flatten()
                .zip(ham.dx.iter().flatten())
                .chain(lag.dpi.iter().flatten().zip(ham.dpi.iter().flatten()))
                .fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
            Ok(diff)
        };
        match compare() {
            Ok(d) => worst = worst.max(d),
            Err(e) => {
                return ConsistencyReport {
                    samples: i,
                    max_difference: worst,
                    tol,
                    pass: false,
                    failure: Some(format!("sample {i}: {e}")),
                }
            }
        }
    }
    ConsistencyReport {
        samples: samples.len(),
        max_difference: worst,
        tol,
        pass: worst <= tol,
        failure: None,
    }
}

/// `H(λ_L(γ)) + Σ_{U≥2} ⟨Πᵁ, Y_{k+1−U}⟩` along a Lagrangian trajectory.
pub fn energy_along(spec: &LagrangianSpec, traj: &Trajectory) -> Result<Vec<f64>> {
    let h = hamiltonian_from_lagrangian(spec);
    let k = spec.order();
    let momenta = traj
        .momenta
        .as_ref()
        .ok_or_else(|| Error::Unsupported("trajectory carries no momenta".into()))?;
    traj.points
        .iter()
        .zip(momenta)
        .map(|(p, pi)| {
            let mp = legendre(spec, p)?;
            let y = embed_levels(&p.y, spec.convention());
            let extra: f64 = (2..=k).map(|u| dot(&pi[u - 1], &y[k - u])).sum();
            Ok(h.eval(&mp.flat(), p.z())? + extra)
        })
        .collect()
}

/// Explicit Hamiltonian flow on `(x, y₁..y_{k−1}, θ, Π²..Πᵏ)`.
#[derive(Clone)]
pub struct HamiltonianSystem {
    h: Arc<dyn Hamiltonian>,
    ws: Arc<WeightedStructure>,
}

impl HamiltonianSystem {
    pub fn new(h: Arc<dyn Hamiltonian>, ws: WeightedStructure) -> Result<Self> {
        if ws.order() != h.order() || ws.n_base() != h.n_base() || ws.m_fiber() != h.m_fiber() {
            return Err(Error::Dimension("weighted structure does not match the Hamiltonian".into()));
        }
        Ok(HamiltonianSystem { h, ws: Arc::new(ws) })
    }

    pub fn dim(&self) -> usize {
        self.h.n_base() + (2 * self.h.order() - 1) * self.h.m_fiber()
    }

    fn mironian_dim(&self) -> usize {
        self.h.n_base() + self.h.order() * self.h.m_fiber()
    }

    pub fn split(&self, s: &[f64]) -> (MironianPoint, Vec<Vec<f64>>) {
        let (n, m, k) = (self.h.n_base(), self.h.m_fiber(), self.h.order());
        let md = self.mironian_dim();
        let mp = MironianPoint {
            x: s[..n].to_vec(),
            y: (0..k - 1).map(|w| s[n + w * m..n + (w + 1) * m].to_vec()).collect(),
            theta: s[md - m..md].to_vec(),
            convention: self.h.convention(),
        };
        let upper = (0..k - 1).map(|u| s[md + u * m..md + (u + 1) * m].to_vec()).collect();
        (mp, upper)
    }

    pub fn rhs(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.dim() {
            return Err(Error::Dimension(format!("state has {} entries, expected {}", s.len(), self.dim())));
        }
        let (mp, upper) = self.split(s);
        let image = hamiltonian_phase_dynamics(self.h.as_ref(), &self.ws, &mp, &upper)?;
        let fk = self.h.convention().weight_factor(self.h.order());
        let mut out: Vec<f64> = image.dx.into_iter().flatten().collect();
        let mut dpi = image.dpi.into_iter();
        out.extend(dpi.next().unwrap_or_default().into_iter().map(|v| v * fk));
        out.extend(dpi.flatten());
        Ok(out)
    }

    /// `H + Σ_{U≥2} ⟨Πᵁ, Y_{k+1−U}⟩` with `Y_k = c(k)∂H/∂θ`.
    pub fn energy(&self, s: &[f64]) -> Result<f64> {
        let (mp, upper) = self.split(s);
        let k = self.h.order();
        let flat = mp.flat();
        let mut levels = mp.y.clone();
        let grad = self.h.gradient(&flat)?;
        levels.push(grad[flat.len() - self.h.m_fiber()..].to_vec());
        let y = embed_levels(&levels, self.h.convention());
        let extra: f64 = (2..=k).map(|u| dot(&upper[u - 2], &y[k - u])).sum();
        Ok(self.h.value(&flat)? + extra)
    }

    pub fn integrate(&self, initial: &[f64], t_end: f64, h: f64) -> Result<Trajectory, crate::lagrange::Failure> {
        let conv = self.h.convention();
        let fail = |error: Error| crate::lagrange::Failure {
            error,
            partial: Box::new(Trajectory::empty(conv, h)),
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
        let traj = self.trajectory(states, h);
        match (traj, error) {
            (Ok(t), None) => Ok(t),
            (Ok(t), Some(error)) => Err(crate::lagrange::Failure {
                error,
                partial: Box::new(t),
            }),
            (Err(e), _) => Err(fail(e)),
        }
    }

    fn trajectory(&self, states: Vec<Vec<f64>>, h: f64) -> Result<Trajectory> {
        let k = self.h.order();
        let fk = self.h.convention().weight_factor(k);
        let mut points = Vec::with_capacity(states.len());
        let mut momenta = Vec::with_capacity(states.len());
        let mut energy = Vec::with_capacity(states.len());
        for s in &states {
            let (mp, upper) = self.split(s);
            let flat = mp.flat();
            let grad = self.h.gradient(&flat)?;
            let mut y = mp.y.clone();
            y.push(grad[flat.len() - self.h.m_fiber()..].to_vec());
            points.push(HigherPoint::new(mp.x.clone(), y, mp.convention));
            let mut pi = vec![mp.theta.iter().map(|t| t / fk).collect::<Vec<_>>()];
            pi.extend(upper);
            momenta.push(pi);
            energy.push(self.energy(s)?);
        }
        Ok(Trajectory {
            times: (0..states.len()).map(|i| i as f64 * h).collect(),
            points,
            momenta: Some(momenta),
            energy,
            el_residual: vec![None; states.len()],
            convention: self.h.convention(),
            integrator: "rk4".into(),
            step: h,
            states,
        })
    }
}
