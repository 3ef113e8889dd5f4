//! Weighted coordinates on `F_k = Aᵏ`, the holonomic embedding, the compact
//! weighted map `ε`, admissibility and the vertical lift.

use serde::{Deserialize, Serialize};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebroid::{base_var, AlgebroidSpec, CheckReport, Coefficient};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::scalar::Scalar;

/// How fiber coordinates of weight `w` relate to time derivatives of the
/// primary curve.
///
/// `Plain`: `y_w = y₁⁽ʷ⁻¹⁾`. `Homogeneous`: `ȳ_w = y₁⁽ʷ⁻¹⁾/w!`, so that
/// `d/dt ȳ_{w−1} = w ȳ_w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    #[default]
    Plain,
    Homogeneous,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

impl Convention {
    /// Multiplier of level `w` in the holonomic embedding and in the weighted
    /// momentum relations: `w` (homogeneous) or `1` (plain).
    pub fn weight_factor(self, w: usize) -> f64 {
        match self {
            Convention::Plain => 1.0,
            Convention::Homogeneous => w as f64,
        }
    }

    /// Factor taking a level-`w` coordinate in this convention to plain.
    pub fn to_plain(self, w: usize) -> f64 {
        match self {
            Convention::Plain => 1.0,
            Convention::Homogeneous => factorial(w),
        }
    }

    /// Factor taking rung `U` of a momentum ladder of order `k` to plain.
    pub fn momentum_to_plain(self, k: usize, u: usize) -> f64 {
        1.0 / self.to_plain(k - u)
    }

    pub fn name(self) -> &'static str {
        match self {
            Convention::Plain => "plain",
            Convention::Homogeneous => "homogeneous",
        }
    }
}

impl std::str::FromStr for Convention {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "plain" => Ok(Convention::Plain),
            "homogeneous" => Ok(Convention::Homogeneous),
            other => Err(format!("unknown convention `{other}` (expected plain or homogeneous)")),
        }
    }
}

/// Name of fiber coordinate `a` (zero-based) at weight `w`, e.g. `y2_1`.
pub fn fiber_var(w: usize, a: usize) -> String {
    format!("y{w}_{}", a + 1)
}

/// Variable names of `F_l`: `x1..xn` then `y{w}_{a}` for `w = 1..l`.
pub fn level_vars(n: usize, m: usize, l: usize) -> Vec<String> {
    (0..n)
        .map(base_var)
        .chain((1..=l).flat_map(|w| (0..m).map(move |a| fiber_var(w, a))))
        .collect()
}

/// A point of `F_k`: base coordinates and fiber blocks of weight `1..k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HigherPoint {
    pub x: Vec<f64>,
    /// `y[w − 1]` is the weight-`w` block.
    pub y: Vec<Vec<f64>>,
    pub convention: Convention,
}

impl HigherPoint {
    pub fn new(x: Vec<f64>, y: Vec<Vec<f64>>, convention: Convention) -> Self {
        HigherPoint { x, y, convention }
    }

    pub fn order(&self) -> usize {
        self.y.len()
    }

    /// The top block `z = y_k`.
    pub fn z(&self) -> &[f64] {
        self.y.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// All coordinates in the order of [`level_vars`].
    pub fn flat(&self) -> Vec<f64> {
        self.x.iter().chain(self.y.iter().flatten()).copied().collect()
    }

    /// Drops blocks of weight above `l`.
    pub fn project_to_level(&self, l: usize) -> Result<HigherPoint> {
        if l > self.order() {
            return Err(Error::Level {
                level: l,
                order: self.order(),
            });
        }
        Ok(HigherPoint {
            x: self.x.clone(),
            y: self.y[..l].to_vec(),
            convention: self.convention,
        })
    }

    /// The homogeneity action: each weight-`w` block scales by `tʷ`.
    pub fn homogeneity_scale(&self, t: f64) -> HigherPoint {
        HigherPoint {
            x: self.x.clone(),
            y: self
                .y
                .iter()
                .enumerate()
                .map(|(i, b)| b.iter().map(|v| v * t.powi(i as i32 + 1)).collect())
                .collect(),
            convention: self.convention,
        }
    }

    pub fn convert_convention(&self, to: Convention) -> HigherPoint {
        HigherPoint {
            x: self.x.clone(),
            y: self
                .y
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let f = self.convention.to_plain(i + 1) / to.to_plain(i + 1);
                    b.iter().map(|v| v * f).collect()
                })
                .collect(),
            convention: to,
        }
    }

    /// The holonomic vector `ι(p)`: base truncated to order `k − 1` and fiber
    /// `Y_U = U·y_U` (homogeneous) or `Y_U = y_U` (plain).
    pub fn holonomic_embed(&self) -> LinearizedVector {
        let k = self.order();
        LinearizedVector {
            base: HigherPoint {
                x: self.x.clone(),
                y: self.y[..k.saturating_sub(1)].to_vec(),
                convention: self.convention,
            },
            fiber: embed_levels(&self.y, self.convention),
        }
    }
}

/// `Y_U = c(U)·y_U` for the levels of a point.
pub fn embed_levels<S: Scalar>(y: &[Vec<S>], convention: Convention) -> Vec<Vec<S>> {
    y.iter()
        .enumerate()
        .map(|(i, b)| {
            let f = convention.weight_factor(i + 1);
            b.iter().map(|v| v.scale(f)).collect()
        })
        .collect()
}

/// An element of the linearisation `D(F_k)`: a point of `F_{k−1}` and fiber
/// blocks `Y_1..Y_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedVector {
    pub base: HigherPoint,
    pub fiber: Vec<Vec<f64>>,
}

/// A point of `D*(F_k)`: `x`, `y_1..y_{k−1}` and the momentum ladder
/// `π¹..πᵏ` (`pi[U − 1]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
    pub convention: Convention,
}

impl PhasePoint {
    pub fn order(&self) -> usize {
        self.pi.len()
    }

    /// Rescales coordinates and momenta so that the pairings
    /// `⟨πᵁ, Y_{k+1−U}⟩` are preserved.
    pub fn convert_convention(&self, to: Convention) -> PhasePoint {
        let k = self.order();
        let from = self.convention;
        PhasePoint {
            x: self.x.clone(),
            y: self
                .y
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let f = from.to_plain(i + 1) / to.to_plain(i + 1);
                    b.iter().map(|v| v * f).collect()
                })
                .collect(),
            pi: self
                .pi
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let f = from.momentum_to_plain(k, i + 1) / to.momentum_to_plain(k, i + 1);
                    b.iter().map(|v| v * f).collect()
                })
                .collect(),
            convention: to,
        }
    }
}

/// A point of the Mironian `F_{k−1} ×_M F̄*_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MironianPoint {
    pub x: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub convention: Convention,
}

/// A block `ρ[u]` of weight `u` sending `Y_V` to the velocity of `X_{V+u−1}`;
/// its transpose sends `P_{V+u−1}` into the velocity of `Π^{k+1−V}`.
#[derive(Debug, Clone)]
pub struct RhoBlock {
    pub weight: usize,
    pub source: usize,
    /// `entries[row][col]`, rows over `X_{V+u−1}`, columns over the fiber.
    pub entries: Vec<Vec<Coefficient>>,
}

/// A block `C[u]` of weight `u`: `δΠᵁ_J += Cᴷ_IJ Yᴵ_V Πᵂ_K` with
/// `W = U + 1 − V − u`.
#[derive(Debug, Clone)]
pub struct CBlock {
    pub weight: usize,
    pub y_level: usize,
    pub target: usize,
    /// `entries[(I m + J) m + K]`.
    pub entries: Vec<Coefficient>,
}

/// Homogeneous structure functions of a weighted algebroid on `F_k`, in the
/// compact form of `ε`. Coefficients are expressions over the coordinates of
/// `F_{k−1}` ([`level_vars`] with `l = k − 1`).
#[derive(Debug, Clone)]
pub struct WeightedStructure {
    k: usize,
    n: usize,
    m: usize,
    rho: Vec<RhoBlock>,
    c: Vec<CBlock>,
}

/// Velocities produced by `ε`: `dx[t]` for `X_t`, `t = 0..k−1`, and `dpi[U − 1]`
/// for `Πᵁ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonImage<S> {
    pub dx: Vec<Vec<S>>,
    pub dpi: Vec<Vec<S>>,
}

impl WeightedStructure {
    /// General constructor; blocks are checked for dimensions and weight
    /// ranges but not for homogeneity.
    pub fn new(k: usize, n: usize, m: usize, rho: Vec<RhoBlock>, c: Vec<CBlock>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Dimension("order k must be at least 1".into()));
        }
        let vars = level_vars(n, m, k - 1);
        let dim = |t: usize| if t == 0 { n } else { m };
        let mut rho_out = Vec::with_capacity(rho.len());
        for b in rho {
            if b.source == 0 || b.source + b.weight > k {
                return Err(Error::Dimension(format!(
                    "ρ block of weight {} on level {} is out of range for k = {k}",
                    b.weight, b.source
                )));
            }
            let rows = dim(b.source + b.weight - 1);
            if b.entries.len() != rows || b.entries.iter().any(|r| r.len() != m) {
                return Err(Error::Dimension(format!("ρ block must be {rows}×{m}")));
            }
            let entries = b
                .entries
                .iter()
                .map(|r| r.iter().map(|c| c.rebind(&vars)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            rho_out.push(RhoBlock { entries, ..b });
        }
        let mut c_out = Vec::with_capacity(c.len());
        for b in c {
            let valid = b.y_level >= 1
                && b.target >= 1
                && b.target <= k
                && b.target + 1 >= b.y_level + b.weight + 1
                && b.target + 1 - b.y_level - b.weight <= k;
            if !valid {
                return Err(Error::Dimension(format!(
                    "C block (u = {}, V = {}, U = {}) is out of range for k = {k}",
                    b.weight, b.y_level, b.target
                )));
            }
            if b.entries.len() != m * m * m {
                return Err(Error::Dimension(format!("C block must have {m}³ entries")));
            }
            let entries = b.entries.iter().map(|c| c.rebind(&vars)).collect::<Result<Vec<_>>>()?;
            c_out.push(CBlock { entries, ..b });
        }
        Ok(WeightedStructure {
            k,
            n,
            m,
            rho: rho_out,
            c: c_out,
        })
    }

    /// The structure of `Aᵏ` for a Lie algebroid `A`: `ρ[0] = (ρᴬ_b, δᵃ_b)` and
    /// `C[0] = Cᶜ_ab` acting on the top momentum.
    pub fn lie_algebroid(spec: &AlgebroidSpec, k: usize) -> Result<Self> {
        let (n, m) = (spec.n_base(), spec.m_fiber());
        let mut rho = vec![RhoBlock {
            weight: 0,
            source: 1,
            entries: (0..n)
                .map(|a| (0..m).map(|b| spec.anchor_entry(a, b).clone()).collect())
                .collect(),
        }];
        for v in 2..=k {
            rho.push(RhoBlock {
                weight: 0,
                source: v,
                entries: (0..m)
                    .map(|a| (0..m).map(|b| Coefficient::constant(if a == b { 1.0 } else { 0.0 })).collect())
                    .collect(),
            });
        }
        let mut entries = Vec::with_capacity(m * m * m);
        for i in 0..m {
            for j in 0..m {
                for kk in 0..m {
                    entries.push(spec.structure_entry(i, j, kk));
                }
            }
        }
        let c = if entries.iter().all(Coefficient::is_zero) {
            vec![]
        } else {
            vec![CBlock {
                weight: 0,
                y_level: 1,
                target: k,
                entries,
            }]
        };
        WeightedStructure::new(k, n, m, rho, c)
    }

    /// The structure of `TᵏM`.
    pub fn tangent(k: usize, n: usize) -> Result<Self> {
        Self::lie_algebroid(&AlgebroidSpec::tangent(n), k)
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn n_base(&self) -> usize {
        self.n
    }

    pub fn m_fiber(&self) -> usize {
        self.m
    }

    pub fn rho_blocks(&self) -> &[RhoBlock] {
        &self.rho
    }

    pub fn c_blocks(&self) -> &[CBlock] {
        &self.c
    }

    /// Largest relative deviation from weight equivariance of `ε` over
    /// `count` random inputs in `[−1, 1]`: scaling every input of weight `w`
    /// by `sʷ` must scale `dX_t` by `s^{t+1}` and `dΠ^i` by `s^{i+1}`.
    pub fn check_equivariance(&self, count: usize, seed: u64, tol: f64) -> Result<CheckReport> {
        let (k, n, m) = (self.k, self.n, self.m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rvec = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect() };
        let mut report = CheckReport::new("weight_equivariance", tol);
        let s: f64 = 1.7;
        for sample in 0..count {
            let x = rvec(n + (k - 1) * m);
            let y: Vec<Vec<f64>> = (0..k).map(|_| rvec(m)).collect();
            let p: Vec<Vec<f64>> = (0..k).map(|t| rvec(self.level_dim(t))).collect();
            let pi: Vec<Vec<f64>> = (0..k).map(|_| rvec(m)).collect();
            let xs: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(i, v)| if i < n { *v } else { v * s.powi(((i - n) / m + 1) as i32) })
                .collect();
            let scale = |blocks: &[Vec<f64>], w: &dyn Fn(usize) -> i32| -> Vec<Vec<f64>> {
                blocks
                    .iter()
                    .enumerate()
                    .map(|(i, b)| b.iter().map(|v| v * s.powi(w(i))).collect())
                    .collect()
            };
            let a = self.apply(&x, &y, &p, &pi)?;
            let b = self.apply(
                &xs,
                &scale(&y, &|i| i as i32 + 1),
                &scale(&p, &|t| (k + 1 - t) as i32),
                &scale(&pi, &|i| i as i32 + 1),
            )?;
            let blocks = a.dx.iter().zip(&b.dx).enumerate().map(|(t, (u, v))| (t as i32 + 1, u, v));
            let blocks = blocks.chain(a.dpi.iter().zip(&b.dpi).enumerate().map(|(i, (u, v))| (i as i32 + 2, u, v)));
            for (power, u, v) in blocks {
                let f = s.powi(power);
                let size = u.iter().fold(0.0f64, |acc, p| acc.max((p * f).abs()));
                let err = u.iter().zip(v).fold(0.0f64, |acc, (p, q)| acc.max((q - p * f).abs()));
                if size > 0.0 {
                    report.record(err / size, sample);
                } else {
                    report.record(err, sample);
                }
            }
        }
        Ok(report.finish())
    }

    fn level_dim(&self, t: usize) -> usize {
        if t == 0 {
            self.n
        } else {
            self.m
        }
    }

    /// Applies `ε`.
    ///
    /// * `x`: coordinates of `F_{k−1}` in [`level_vars`] order.
    /// * `y`: fiber blocks `Y_1..Y_k`.
    /// * `p`: base momenta `P_0..P_{k−1}`, dual to `X_0..X_{k−1}`.
    /// * `pi`: fiber momenta `Π¹..Πᵏ`.
    pub fn apply<S: Scalar>(
        &self,
        x: &[S],
        y: &[Vec<S>],
        p: &[Vec<S>],
        pi: &[Vec<S>],
    ) -> Result<EpsilonImage<S>> {
        let (k, m) = (self.k, self.m);
        let dims_ok = x.len() == self.n + (k - 1) * m
            && y.len() == k
            && y.iter().all(|b| b.len() == m)
            && p.len() == k
            && p.iter().enumerate().all(|(t, b)| b.len() == self.level_dim(t))
            && pi.len() == k
            && pi.iter().all(|b| b.len() == m);
        if !dims_ok {
            return Err(Error::Dimension("ε inputs do not match the weighted structure".into()));
        }
        let mut dx: Vec<Vec<S>> = (0..k).map(|t| vec![S::zero(); self.level_dim(t)]).collect();
        let mut dpi: Vec<Vec<S>> = (0..k).map(|_| vec![S::zero(); m]).collect();
        for block in &self.rho {
            let t = block.source + block.weight - 1;
            let dual = k - block.source;
            let yv = &y[block.source - 1];
            for (row, entries) in block.entries.iter().enumerate() {
                for (col, coeff) in entries.iter().enumerate() {
                    if coeff.is_zero() {
                        continue;
                    }
                    let r = coeff.eval(x)?;
                    dx[t][row] = dx[t][row].clone() + r.clone() * yv[col].clone();
                    dpi[dual][col] = dpi[dual][col].clone() + r * p[t][row].clone();
                }
            }
        }
        for block in &self.c {
            let w = block.target + 1 - block.y_level - block.weight;
            let yv = &y[block.y_level - 1];
            let piw = &pi[w - 1];
            let out = &mut dpi[block.target - 1];
            for i in 0..m {
                for j in 0..m {
                    for kk in 0..m {
                        let coeff = &block.entries[(i * m + j) * m + kk];
                        if coeff.is_zero() {
                            continue;
                        }
                        let cv = coeff.eval(x)?;
                        out[j] = out[j].clone() + cv * yv[i].clone() * piw[kk].clone();
                    }
                }
            }
        }
        Ok(EpsilonImage { dx, dpi })
    }

    /// Admissibility residual of a curve in `F_k` given by jets of all its
    /// coordinates: `d/dt X_t − (ε∘ι)_t` for `t = 0..k−1`, flattened.
    pub fn admissibility_residual(&self, curve: &FkJet, convention: Convention) -> Result<Vec<f64>> {
        let k = self.k;
        curve.check(self.n, self.m, k)?;
        let needed = 1;
        if curve.min_order(k - 1) < needed {
            return Err(Error::JetOrder {
                needed,
                available: curve.min_order(k - 1),
            });
        }
        let point = curve.point(convention);
        let flat: Vec<f64> = point.flat();
        let lower = &flat[..self.n + (k - 1) * self.m];
        let y = embed_levels(&point.y, convention);
        let p: Vec<Vec<f64>> = (0..k).map(|t| vec![0.0; self.level_dim(t)]).collect();
        let pi = vec![vec![0.0; self.m]; k];
        let image = self.apply(lower, &y, &p, &pi)?;
        let mut out = Vec::new();
        for (t, d) in image.dx.iter().enumerate() {
            let jets = if t == 0 { &curve.x } else { &curve.y[t - 1] };
            for (j, v) in jets.iter().zip(d) {
                out.push(j.coeff(1) - v);
            }
        }
        Ok(out)
    }
}

/// Jets of every coordinate of a curve in `F_k`.
#[derive(Debug, Clone)]
pub struct FkJet {
    pub x: Vec<Jet<f64>>,
    pub y: Vec<Vec<Jet<f64>>>,
}

impl FkJet {
    fn check(&self, n: usize, m: usize, k: usize) -> Result<()> {
        if self.x.len() != n || self.y.len() != k || self.y.iter().any(|b| b.len() != m) {
            return Err(Error::Dimension("curve jets do not match the structure".into()));
        }
        Ok(())
    }

    /// Smallest jet order among levels `0..=l`.
    pub fn min_order(&self, l: usize) -> usize {
        self.x
            .iter()
            .chain(self.y[..l].iter().flatten())
            .map(Jet::order)
            .min()
            .unwrap_or(usize::MAX)
    }

    pub fn point(&self, convention: Convention) -> HigherPoint {
        HigherPoint {
            x: self.x.iter().map(|j| *j.head()).collect(),
            y: self.y.iter().map(|b| b.iter().map(|j| *j.head()).collect()).collect(),
            convention,
        }
    }
}

/// Jets of a curve in `A`: base `x(t)` and the weight-one fiber `y₁(t)`.
/// Higher fiber levels are derived from `y₁` according to a convention.
#[derive(Debug, Clone)]
pub struct CurveJet {
    pub x: Vec<Jet<f64>>,
    pub y1: Vec<Jet<f64>>,
}

impl CurveJet {
    pub fn new(x: Vec<Jet<f64>>, y1: Vec<Jet<f64>>) -> Self {
        CurveJet { x, y1 }
    }

    pub fn x_order(&self) -> usize {
        self.x.iter().map(Jet::order).min().unwrap_or(usize::MAX)
    }

    pub fn y_order(&self) -> usize {
        self.y1.iter().map(Jet::order).min().unwrap_or(usize::MAX)
    }

    /// A curve with the given fiber jet whose base jet solves `ẋ = ρ(x) y₁`
    /// from `x0`, built by Picard iteration to one order above `y1`.
    pub fn admissible(spec: &AlgebroidSpec, x0: &[f64], y1: Vec<Jet<f64>>) -> Result<Self> {
        if x0.len() != spec.n_base() || y1.len() != spec.m_fiber() {
            return Err(Error::Dimension("initial point or fiber jet has the wrong size".into()));
        }
        let order = y1.iter().map(Jet::order).min().unwrap_or(0) + 1;
        let mut x: Vec<Jet<f64>> = x0.iter().map(|&v| Jet::constant(v)).collect();
        for pass in 1..=order {
            let rho = spec.anchor_at(&x)?;
            x = rho
                .iter()
                .zip(x0)
                .map(|(row, &start)| {
                    row.iter()
                        .zip(&y1)
                        .fold(Jet::constant(0.0), |acc, (r, y)| acc + r.clone() * y.clone())
                        .integral(start)
                        .truncate(pass)
                })
                .collect();
        }
        Ok(CurveJet { x, y1 })
    }

    /// Level `w` of the fiber along the curve.
    pub fn level(&self, w: usize, convention: Convention) -> Vec<Jet<f64>> {
        let f = 1.0 / convention.to_plain(w);
        self.y1
            .iter()
            .map(|j| j.nth_derivative(w - 1).scale(f))
            .collect()
    }

    /// All coordinates of `F_k` along the curve.
    pub fn to_fk(&self, k: usize, convention: Convention) -> FkJet {
        FkJet {
            x: self.x.clone(),
            y: (1..=k).map(|w| self.level(w, convention)).collect(),
        }
    }

    /// The point of `F_k` at the expansion time.
    pub fn point(&self, k: usize, convention: Convention) -> HigherPoint {
        self.to_fk(k, convention).point(convention)
    }
}

/// Whether a jet of a curve `(x(t), y(t))` in `A` of order `≥ k − 1` lies in
/// `Aᵏ`, i.e. `ẋ = ρ(x) y` holds through order `k − 2`.
pub fn higher_admissible_membership(
    spec: &AlgebroidSpec,
    k: usize,
    curve: &CurveJet,
    tol: f64,
) -> Result<bool> {
    let needed = k.saturating_sub(1);
    let available = curve.x_order().min(curve.y_order());
    if available < needed {
        return Err(Error::JetOrder { needed, available });
    }
    if k < 2 {
        return Ok(true);
    }
    let order = k - 2;
    let rho = spec.anchor_at(&curve.x)?;
    for (a, row) in rho.iter().enumerate() {
        let image = row
            .iter()
            .zip(&curve.y1)
            .fold(Jet::constant(0.0), |acc, (r, y)| acc + r.clone() * y.clone())
            .truncate(order);
        let velocity = curve.x[a].derivative().truncate(order);
        for i in 0..=order {
            if (velocity.coeff(i) - image.coeff(i)).abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Vertical lift `D(Tᵏ⁺¹M) ≅ TTᵏM`: a tangent vector to `TᵏM` at
/// `a = (q, …, q⁽ᵏ⁾)` with components `(δq, …, δq⁽ᵏ⁾)`, lifted to the vertical
/// fiber over `b = (q, …, q⁽ᵏ⁺¹⁾)`. Returns `(0, δq, 2δq̇, …, (k+1)δq⁽ᵏ⁾)`.
pub fn vertical_lift(
    k: usize,
    base: &[Vec<f64>],
    delta: &[Vec<f64>],
    b: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    if base.len() != k + 1 || delta.len() != k + 1 || b.len() != k + 2 {
        return Err(Error::Dimension(format!(
            "vertical lift at order {k} needs {} base levels, {} deltas and {} target levels",
            k + 1,
            k + 1,
            k + 2
        )));
    }
    let n = base[0].len();
    if base.iter().chain(delta).chain(b).any(|l| l.len() != n) {
        return Err(Error::Dimension("level blocks have different lengths".into()));
    }
    if base.iter().zip(b).any(|(p, q)| p != q) {
        return Err(Error::BaseMismatch(
            "the tangent vector is not based at the projection of the target point".into(),
        ));
    }
    let mut out = vec![vec![0.0; n]];
    for (j, d) in delta.iter().enumerate() {
        out.push(d.iter().map(|v| (j + 1) as f64 * v).collect());
    }
    Ok(out)
}
