//! Almost Lie algebroid data in a local frame: anchor `ρᴬ_b(x)` and structure
//! functions `Cᶜ_ab(x)`, their axiom checks, built-ins and connection
//! curvature.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{partials, Expression};
use crate::scalar::Scalar;

/// Name of base coordinate `A` (zero-based), as used in expressions.
pub fn base_var(a: usize) -> String {
    format!("x{}", a + 1)
}

pub fn base_vars(n: usize) -> Vec<String> {
    (0..n).map(base_var).collect()
}

/// A structure-function entry. Constants skip expression evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Zero,
    Const(f64),
    Expr(Expression),
}

impl Coefficient {
    pub fn from_expression(e: Expression) -> Coefficient {
        match e.as_constant() {
            Some(v) if v == 0.0 => Coefficient::Zero,
            Some(v) => Coefficient::Const(v),
            None => Coefficient::Expr(e),
        }
    }

    pub fn constant(v: f64) -> Coefficient {
        if v == 0.0 {
            Coefficient::Zero
        } else {
            Coefficient::Const(v)
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coefficient::Zero)
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        Ok(match self {
            Coefficient::Zero => S::zero(),
            Coefficient::Const(v) => S::from_f64(*v),
            Coefficient::Expr(e) => e.eval(x)?,
        })
    }

    /// First partials with respect to every variable.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(match self {
            Coefficient::Expr(e) => {
                let all: Vec<usize> = (0..x.len()).collect();
                partials(e, x, &all)?
            }
            _ => vec![0.0; x.len()],
        })
    }

    pub fn negated(&self) -> Coefficient {
        match self {
            Coefficient::Zero => Coefficient::Zero,
            Coefficient::Const(v) => Coefficient::Const(-v),
            Coefficient::Expr(e) => Coefficient::Expr(Expression::from_node(
                crate::expr::Node::Neg(Box::new(e.root().clone())),
                e.variables().to_vec(),
            )),
        }
    }

    /// Re-expresses an expression entry over a larger variable list.
    pub fn rebind(&self, variables: &[String]) -> Result<Coefficient> {
        Ok(match self {
            Coefficient::Expr(e) => Coefficient::Expr(e.rebind(variables)?),
            other => other.clone(),
        })
    }
}

/// Constant structure constants of a Lie algebra, `Cᶜ_ab`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    m: usize,
    c: Vec<f64>,
}

impl StructureConstants {
    /// From a dense table `table[a][b][c] = Cᶜ_ab`; must be antisymmetric in
    /// `(a, b)` to 1e-12.
    pub fn from_dense(table: &[Vec<Vec<f64>>]) -> Result<Self> {
        let m = table.len();
        let mut c = vec![0.0; m * m * m];
        for (a, rows) in table.iter().enumerate() {
            if rows.len() != m {
                return Err(Error::InvalidStructure(format!("row {a} has length {}, expected {m}", rows.len())));
            }
            for (b, col) in rows.iter().enumerate() {
                if col.len() != m {
                    return Err(Error::InvalidStructure(format!(
                        "entry ({a}, {b}) has length {}, expected {m}",
                        col.len()
                    )));
                }
                for (k, v) in col.iter().enumerate() {
                    c[(a * m + b) * m + k] = *v;
                }
            }
        }
        let s = StructureConstants { m, c };
        s.check_antisymmetric()?;
        Ok(s)
    }

    /// From sparse zero-based entries `(a, b, c, Cᶜ_ab)`; the `(b, a)` entry is
    /// filled by antisymmetry and must agree if also listed.
    pub fn from_entries(m: usize, entries: &[(usize, usize, usize, f64)]) -> Result<Self> {
        let mut c = vec![0.0; m * m * m];
        let mut set = vec![false; m * m * m];
        for &(a, b, k, v) in entries {
            if a >= m || b >= m || k >= m {
                return Err(Error::InvalidStructure(format!("entry ({a}, {b}, {k}) out of range for rank {m}")));
            }
            for (i, val) in [((a * m + b) * m + k, v), ((b * m + a) * m + k, -v)] {
                if set[i] && (c[i] - val).abs() > 1e-12 {
                    return Err(Error::InvalidStructure(format!(
                        "entries for ({a}, {b}, {k}) are not antisymmetric"
                    )));
                }
                c[i] = val;
                set[i] = true;
            }
        }
        Ok(StructureConstants { m, c })
    }

    pub fn abelian(m: usize) -> Self {
        StructureConstants {
            m,
            c: vec![0.0; m * m * m],
        }
    }

    /// `so(3)` with `Cᶜ_ab = ε_abc`.
    pub fn so3() -> Self {
        let mut c = vec![0.0; 27];
        for (a, b, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            c[(a * 3 + b) * 3 + k] = 1.0;
            c[(b * 3 + a) * 3 + k] = -1.0;
        }
        StructureConstants { m: 3, c }
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    /// `Cᶜ_ab`.
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.c[(a * self.m + b) * self.m + c]
    }

    pub fn is_abelian(&self) -> bool {
        self.c.iter().all(|v| *v == 0.0)
    }

    fn check_antisymmetric(&self) -> Result<()> {
        let m = self.m;
        for a in 0..m {
            for b in 0..m {
                for k in 0..m {
                    if (self.get(a, b, k) + self.get(b, a, k)).abs() > 1e-12 {
                        return Err(Error::InvalidStructure(format!(
                            "C^{k}_{a}{b} = {} is not antisymmetric in (a, b)",
                            self.get(a, b, k)
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A dense `m×m×m` structure tensor evaluated at a point, `t[(a m + b) m + c] = Cᶜ_ab`.
#[derive(Debug, Clone)]
pub struct Tensor3<S> {
    pub m: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Tensor3<S> {
    pub fn get(&self, a: usize, b: usize, c: usize) -> &S {
        &self.data[(a * self.m + b) * self.m + c]
    }
}

/// Which special shape an algebroid came from; used by the reduced systems.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    General,
    Tangent,
    LieAlgebra(StructureConstants),
    /// `TM ⊕ 𝔤` over `M`: the first `n` fiber indices are the tangent part.
    AtiyahTrivial(StructureConstants),
}

/// Anchor and structure functions of an (almost) Lie algebroid over a single
/// chart of dimension `n_base`, rank `m_fiber`.
#[derive(Debug, Clone)]
pub struct AlgebroidSpec {
    n_base: usize,
    m_fiber: usize,
    anchor: Vec<Vec<Coefficient>>,
    /// `structure[pair(a, b)][c] = Cᶜ_ab` for `a < b`.
    structure: Vec<Vec<Coefficient>>,
    is_lie: bool,
    shape: Shape,
}

fn pair_index(m: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b);
    a * m - a * (a + 1) / 2 + (b - a - 1)
}

impl AlgebroidSpec {
    /// Builds a spec from an `n×m` anchor table and zero-based structure
    /// entries `(a, b, c, Cᶜ_ab)` with `a ≠ b`. Expressions may use only the
    /// base variables `x1..xn`.
    pub fn new(
        n_base: usize,
        m_fiber: usize,
        anchor: Vec<Vec<Expression>>,
        structure: Vec<(usize, usize, usize, Expression)>,
    ) -> Result<Self> {
        let names = base_vars(n_base);
        if anchor.len() != n_base || anchor.iter().any(|r| r.len() != m_fiber) {
            return Err(Error::Dimension(format!("anchor must be {n_base}×{m_fiber}")));
        }
        let anchor = anchor
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|e| Ok(Coefficient::from_expression(e.rebind(&names)?)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let pairs = m_fiber * m_fiber.saturating_sub(1) / 2;
        let mut table = vec![vec![Coefficient::Zero; m_fiber]; pairs];
        let mut seen = vec![vec![false; m_fiber]; pairs];
        for (a, b, c, e) in structure {
            if a >= m_fiber || b >= m_fiber || c >= m_fiber {
                return Err(Error::InvalidStructure(format!(
                    "entry ({a}, {b}, {c}) out of range for rank {m_fiber}"
                )));
            }
            if a == b {
                if e.as_constant() == Some(0.0) {
                    continue;
                }
                return Err(Error::InvalidStructure(format!("C^{c}_{a}{a} must vanish")));
            }
            let coeff = Coefficient::from_expression(e.rebind(&names)?);
            let (lo, hi, coeff) = if a < b { (a, b, coeff) } else { (b, a, coeff.negated()) };
            let p = pair_index(m_fiber, lo, hi);
            if seen[p][c] {
                return Err(Error::InvalidStructure(format!(
                    "C^{c}_{lo}{hi} given more than once"
                )));
            }
            seen[p][c] = true;
            table[p][c] = coeff;
        }
        Ok(AlgebroidSpec {
            n_base,
            m_fiber,
            anchor,
            structure: table,
            is_lie: false,
            shape: Shape::General,
        })
    }

    pub fn tangent(n: usize) -> Self {
        let anchor = (0..n)
            .map(|a| (0..n).map(|b| Coefficient::constant(if a == b { 1.0 } else { 0.0 })).collect())
            .collect();
        AlgebroidSpec {
            n_base: n,
            m_fiber: n,
            anchor,
            structure: vec![vec![Coefficient::Zero; n]; n * n.saturating_sub(1) / 2],
            is_lie: true,
            shape: Shape::Tangent,
        }
    }

    pub fn lie_algebra(constants: StructureConstants) -> Self {
        let m = constants.rank();
        let mut spec = Self::with_constant_block(0, m, 0, &constants);
        spec.shape = Shape::LieAlgebra(constants);
        spec
    }

    /// `TM ⊕ 𝔤` over an `n`-dimensional base with the trivial bracket on the
    /// tangent part and `constants` on the `𝔤` part.
    pub fn atiyah_trivial(n: usize, constants: StructureConstants) -> Self {
        let m = n + constants.rank();
        let mut spec = Self::with_constant_block(n, m, n, &constants);
        for a in 0..n {
            spec.anchor[a][a] = Coefficient::Const(1.0);
        }
        spec.shape = Shape::AtiyahTrivial(constants);
        spec
    }

    fn with_constant_block(n: usize, m: usize, offset: usize, constants: &StructureConstants) -> Self {
        let g = constants.rank();
        let mut structure = vec![vec![Coefficient::Zero; m]; m * m.saturating_sub(1) / 2];
        for a in 0..g {
            for b in a + 1..g {
                for c in 0..g {
                    structure[pair_index(m, offset + a, offset + b)][offset + c] =
                        Coefficient::constant(constants.get(a, b, c));
                }
            }
        }
        AlgebroidSpec {
            n_base: n,
            m_fiber: m,
            anchor: vec![vec![Coefficient::Zero; m]; n],
            structure,
            is_lie: true,
            shape: Shape::General,
        }
    }

    pub fn n_base(&self) -> usize {
        self.n_base
    }

    pub fn m_fiber(&self) -> usize {
        self.m_fiber
    }

    pub fn is_lie(&self) -> bool {
        self.is_lie
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn base_names(&self) -> Vec<String> {
        base_vars(self.n_base)
    }

    /// `ρᴬ_b`.
    pub fn anchor_entry(&self, a: usize, b: usize) -> &Coefficient {
        &self.anchor[a][b]
    }

    /// `Cᶜ_ab` as stored (antisymmetrized on access).
    pub fn structure_entry(&self, a: usize, b: usize, c: usize) -> Coefficient {
        match a.cmp(&b) {
            std::cmp::Ordering::Equal => Coefficient::Zero,
            std::cmp::Ordering::Less => self.structure[pair_index(self.m_fiber, a, b)][c].clone(),
            std::cmp::Ordering::Greater => self.structure[pair_index(self.m_fiber, b, a)][c].negated(),
        }
    }

    /// The anchor matrix at `x`, indexed `[A][b]`.
    pub fn anchor_at<S: Scalar>(&self, x: &[S]) -> Result<Vec<Vec<S>>> {
        self.check_point(x.len())?;
        self.anchor
            .iter()
            .map(|row| row.iter().map(|c| c.eval(x)).collect())
            .collect()
    }

    /// The full antisymmetric structure tensor at `x`.
    pub fn structure_at<S: Scalar>(&self, x: &[S]) -> Result<Tensor3<S>> {
        self.check_point(x.len())?;
        let m = self.m_fiber;
        let mut data = vec![S::zero(); m * m * m];
        for a in 0..m {
            for b in a + 1..m {
                for (c, coeff) in self.structure[pair_index(m, a, b)].iter().enumerate() {
                    if coeff.is_zero() {
                        continue;
                    }
                    let v = coeff.eval(x)?;
                    data[(b * m + a) * m + c] = -v.clone();
                    data[(a * m + b) * m + c] = v;
                }
            }
        }
        Ok(Tensor3 { m, data })
    }

    fn check_point(&self, len: usize) -> Result<()> {
        if len != self.n_base {
            return Err(Error::Dimension(format!(
                "base point has {len} coordinates, expected {}",
                self.n_base
            )));
        }
        Ok(())
    }

    /// Residual of the anchor compatibility
    /// `Rᴮ_ab = ρᴬ_a ∂_A ρᴮ_b − ρᴬ_b ∂_A ρᴮ_a − Cᶜ_ab ρᴮ_c` over the samples.
    pub fn check_almost_lie(&self, samples: &[Vec<f64>], tol: f64) -> Result<CheckReport> {
        let mut report = CheckReport::new("almost-Lie", tol);
        let (n, m) = (self.n_base, self.m_fiber);
        for (index, x) in samples.iter().enumerate() {
            let at = |e: Error| Error::AtSample {
                index,
                point: x.clone(),
                source: Box::new(e),
            };
            let rho = self.anchor_at(x).map_err(at)?;
            let c = self.structure_at(x).map_err(at)?;
            // d_rho[B][b][A] = ∂_A ρᴮ_b
            let d_rho = self
                .anchor
                .iter()
                .map(|row| row.iter().map(|e| e.gradient(x)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()
                .map_err(at)?;
            for a in 0..m {
                for b in 0..m {
                    for bb in 0..n {
                        let mut r = 0.0;
                        for aa in 0..n {
                            r += rho[aa][a] * d_rho[bb][b][aa] - rho[aa][b] * d_rho[bb][a][aa];
                        }
                        for k in 0..m {
                            r -= c.get(a, b, k) * rho[bb][k];
                        }
                        report.record(r.abs(), index);
                    }
                }
            }
        }
        Ok(report.finish())
    }

    /// Residual of the Jacobi identity,
    /// `Σ_cyc(a,b,c) [Cᵉ_ab Cᵈ_ec − ρᴬ_c ∂_A Cᵈ_ab]`, over the samples.
    pub fn check_jacobi(&self, samples: &[Vec<f64>], tol: f64) -> Result<CheckReport> {
        let mut report = CheckReport::new("Jacobi", tol);
        let (n, m) = (self.n_base, self.m_fiber);
        for (index, x) in samples.iter().enumerate() {
            let at = |e: Error| Error::AtSample {
                index,
                point: x.clone(),
                source: Box::new(e),
            };
            let rho = self.anchor_at(x).map_err(at)?;
            let c = self.structure_at(x).map_err(at)?;
            // d_c[(a m + b) m + d][A] = ∂_A Cᵈ_ab
            let mut d_c = vec![vec![0.0; n]; m * m * m];
            for a in 0..m {
                for b in a + 1..m {
                    for d in 0..m {
                        let g = self.structure[pair_index(m, a, b)][d].gradient(x).map_err(at)?;
                        d_c[(b * m + a) * m + d] = g.iter().map(|v| -v).collect();
                        d_c[(a * m + b) * m + d] = g;
                    }
                }
            }
            let term = |a: usize, b: usize, cc: usize, d: usize| {
                let quadratic: f64 = (0..m).map(|e| c.get(a, b, e) * c.get(e, cc, d)).sum();
                let anchor: f64 = (0..n).map(|aa| rho[aa][cc] * d_c[(a * m + b) * m + d][aa]).sum();
                quadratic - anchor
            };
            for a in 0..m {
                for b in 0..m {
                    for cc in 0..m {
                        for d in 0..m {
                            let r = term(a, b, cc, d) + term(b, cc, a, d) + term(cc, a, b, d);
                            report.record(r.abs(), index);
                        }
                    }
                }
            }
        }
        Ok(report.finish())
    }

    /// Runs the Jacobi check and records the outcome in the `is_lie` flag.
    pub fn verify_lie(mut self, samples: &[Vec<f64>], tol: f64) -> Result<(Self, CheckReport)> {
        let report = self.check_jacobi(samples, tol)?;
        self.is_lie = report.pass;
        Ok((self, report))
    }
}

/// Outcome of a sampled axiom check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
    /// Sample index attaining the maximum.
    pub worst_sample: Option<usize>,
}

impl CheckReport {
    pub fn new(name: &str, tol: f64) -> Self {
        CheckReport {
            name: name.to_string(),
            max_residual: 0.0,
            tol,
            pass: true,
            worst_sample: None,
        }
    }

    pub fn record(&mut self, residual: f64, sample: usize) {
        if residual > self.max_residual || residual.is_nan() {
            self.max_residual = residual;
            self.worst_sample = Some(sample);
        }
    }

    pub fn finish(mut self) -> Self {
        self.pass = self.max_residual <= self.tol;
        self
    }
}

/// Default number of sample points for axiom checks.
pub const DEFAULT_SAMPLES: usize = 50;

/// `count` points uniform in `[−1, 1]ⁿ`, reproducible from `seed`.
pub fn sample_cloud(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect()
}

/// Components `𝔸ᵃ_A(x)` of a principal connection on a trivial bundle, with
/// the structure constants of its Lie algebra.
#[derive(Debug, Clone)]
pub struct ConnectionSpec {
    n_base: usize,
    /// `components[a][A]`.
    components: Vec<Vec<Coefficient>>,
    constants: StructureConstants,
}

impl ConnectionSpec {
    pub fn new(
        n_base: usize,
        components: Vec<Vec<Expression>>,
        constants: StructureConstants,
    ) -> Result<Self> {
        let names = base_vars(n_base);
        if components.len() != constants.rank() || components.iter().any(|r| r.len() != n_base) {
            return Err(Error::Dimension(format!(
                "connection must be {}×{n_base}",
                constants.rank()
            )));
        }
        let components = components
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|e| Ok(Coefficient::from_expression(e.rebind(&names)?)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConnectionSpec {
            n_base,
            components,
            constants,
        })
    }

    /// Constant components `values[a][A]`.
    pub fn constant(values: &[Vec<f64>], constants: StructureConstants) -> Result<Self> {
        let n = values.first().map_or(0, Vec::len);
        if values.len() != constants.rank() || values.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged connection table".into()));
        }
        Ok(ConnectionSpec {
            n_base: n,
            components: values
                .iter()
                .map(|r| r.iter().map(|&v| Coefficient::constant(v)).collect())
                .collect(),
            constants,
        })
    }

    pub fn n_base(&self) -> usize {
        self.n_base
    }

    pub fn constants(&self) -> &StructureConstants {
        &self.constants
    }

    /// Scales every component by `s`.
    pub fn scaled(&self, s: f64) -> ConnectionSpec {
        let components = self
            .components
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| match c {
                        Coefficient::Zero => Coefficient::Zero,
                        Coefficient::Const(v) => Coefficient::constant(v * s),
                        Coefficient::Expr(e) => Coefficient::Expr(Expression::from_node(
                            crate::expr::Node::binary(
                                crate::expr::BinOp::Mul,
                                crate::expr::Node::Num(s),
                                e.root().clone(),
                            ),
                            e.variables().to_vec(),
                        )),
                    })
                    .collect()
            })
            .collect();
        ConnectionSpec {
            components,
            ..self.clone()
        }
    }

    /// `𝔸ᵃ_A` as a coefficient.
    pub fn component(&self, a: usize, aa: usize) -> &Coefficient {
        &self.components[a][aa]
    }

    /// The Atiyah algebroid `TM ⊕ 𝔤` in the frame adapted to the connection:
    /// horizontal lifts `H_A = ∂_A − 𝔸ᵃ_A e_a` followed by `e_a`. Its
    /// brackets are `[H_A, H_B] = −𝔽ᵃ_AB e_a`, `[H_A, e_b] = −𝔸ᵃ_A Cᶜ_ab e_c`
    /// and `[e_a, e_b] = Cᶜ_ab e_c`.
    pub fn atiyah_frame(&self) -> AlgebroidSpec {
        use crate::expr::{BinOp, Node};
        let (n, g) = (self.n_base, self.constants.rank());
        let m = n + g;
        let names = base_vars(n);
        let node = |c: &Coefficient| match c {
            Coefficient::Zero => Node::Num(0.0),
            Coefficient::Const(v) => Node::Num(*v),
            Coefficient::Expr(e) => e.root().clone(),
        };
        let coeff = |root: Node| {
            let e = Expression::from_node(root, names.clone());
            if (0..n).any(|i| e.depends_on(i)) {
                Coefficient::from_expression(e)
            } else {
                Coefficient::constant(e.eval(&vec![0.0; n]).unwrap_or(0.0))
            }
        };
        let mut spec = AlgebroidSpec::with_constant_block(n, m, n, &self.constants);
        for aa in 0..n {
            spec.anchor[aa][aa] = Coefficient::Const(1.0);
        }
        let sum = |terms: Vec<Node>| {
            terms
                .into_iter()
                .reduce(|a, b| Node::binary(BinOp::Add, a, b))
                .unwrap_or(Node::Num(0.0))
        };
        for aa in 0..n {
            for b in 0..g {
                for c in 0..g {
                    let terms = (0..g)
                        .filter(|&a| self.constants.get(a, b, c) != 0.0 && !self.components[a][aa].is_zero())
                        .map(|a| Node::binary(BinOp::Mul, Node::Num(-self.constants.get(a, b, c)), node(&self.components[a][aa])))
                        .collect();
                    spec.structure[pair_index(m, aa, n + b)][n + c] = coeff(sum(terms));
                }
            }
            for bb in aa + 1..n {
                for c in 0..g {
                    let mut terms = Vec::new();
                    // −𝔽ᶜ_AB = ∂_B𝔸ᶜ_A − ∂_A𝔸ᶜ_B − 𝔸ᵇ_A𝔸ᵉ_B Cᶜ_eb
                    if let Coefficient::Expr(e) = &self.components[c][aa] {
                        terms.push(e.derivative(bb).root().clone());
                    }
                    if let Coefficient::Expr(e) = &self.components[c][bb] {
                        terms.push(Node::Neg(Box::new(e.derivative(aa).root().clone())));
                    }
                    for b in 0..g {
                        for e in 0..g {
                            let k = self.constants.get(e, b, c);
                            if k != 0.0 && !self.components[b][aa].is_zero() && !self.components[e][bb].is_zero() {
                                terms.push(Node::binary(
                                    BinOp::Mul,
                                    Node::Num(-k),
                                    Node::binary(BinOp::Mul, node(&self.components[b][aa]), node(&self.components[e][bb])),
                                ));
                            }
                        }
                    }
                    spec.structure[pair_index(m, aa, bb)][n + c] = coeff(sum(terms));
                }
            }
        }
        spec
    }

    /// `𝔸ᵃ_A` at `x`, indexed `[a][A]`.
    pub fn components_at<S: Scalar>(&self, x: &[S]) -> Result<Vec<Vec<S>>> {
        if x.len() != self.n_base {
            return Err(Error::Dimension(format!(
                "base point has {} coordinates, expected {}",
                x.len(),
                self.n_base
            )));
        }
        self.components
            .iter()
            .map(|row| row.iter().map(|c| c.eval(x)).collect())
            .collect()
    }

    /// Curvature `𝔽ᵃ_AB = ∂_A𝔸ᵃ_B − ∂_B𝔸ᵃ_A + 𝔸ᵇ_A𝔸ᶜ_B Cᵃ_cb`, indexed `[a][A][B]`.
    pub fn curvature(&self, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        let n = self.n_base;
        let g = self.constants.rank();
        let conn = self.components_at(x)?;
        // grad[a][B][A] = ∂_A 𝔸ᵃ_B
        let grad = self
            .components
            .iter()
            .map(|row| row.iter().map(|c| c.gradient(x)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let mut f = vec![vec![vec![0.0; n]; n]; g];
        for a in 0..g {
            for aa in 0..n {
                for bb in aa + 1..n {
                    let mut v = grad[a][bb][aa] - grad[a][aa][bb];
                    for b in 0..g {
                        for c in 0..g {
                            let k = self.constants.get(c, b, a);
                            if k != 0.0 {
                                v += conn[b][aa] * conn[c][bb] * k;
                            }
                        }
                    }
                    f[a][aa][bb] = v;
                    f[a][bb][aa] = -v;
                }
            }
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn e(src: &str, n: usize) -> Expression {
        parse(src, &base_vars(n)).unwrap()
    }

    #[test]
    fn tangent_is_identity_without_bracket() {
        let t = AlgebroidSpec::tangent(3);
        let rho = t.anchor_at(&[0.1, 0.2, 0.3]).unwrap();
        for (a, row) in rho.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                assert_eq!(*v, if a == b { 1.0 } else { 0.0 });
            }
        }
        assert!(t.structure_at(&[0.0; 3]).unwrap().data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn tangent_passes_both_checks_tightly() {
        for n in 1..=6 {
            let t = AlgebroidSpec::tangent(n);
            let s = sample_cloud(n, DEFAULT_SAMPLES, 1);
            assert!(t.check_almost_lie(&s, 1e-14).unwrap().pass);
            assert!(t.check_jacobi(&s, 1e-14).unwrap().pass);
        }
    }

    #[test]
    fn so3_table() {
        let g = AlgebroidSpec::lie_algebra(StructureConstants::so3());
        let c = g.structure_at::<f64>(&[]).unwrap();
        assert_eq!(*c.get(0, 1, 2), 1.0);
        assert_eq!(*c.get(1, 0, 2), -1.0);
        assert_eq!(*c.get(2, 0, 1), 1.0);
        assert_eq!(*c.get(0, 1, 0), 0.0);
        let s = sample_cloud(0, 3, 0);
        assert_eq!(g.check_almost_lie(&s, 0.0).unwrap().max_residual, 0.0);
        assert!(g.check_jacobi(&s, 1e-15).unwrap().pass);
    }

    #[test]
    fn so3_jacobi_brute_force() {
        let c = StructureConstants::so3();
        let mut worst: f64 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for k in 0..3 {
                    for d in 0..3 {
                        let mut r = 0.0;
                        for (p, q, s) in [(a, b, k), (b, k, a), (k, a, b)] {
                            for e in 0..3 {
                                r += c.get(p, q, e) * c.get(e, s, d);
                            }
                        }
                        worst = worst.max(r.abs());
                    }
                }
            }
        }
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn identity_anchor_with_bracket_fails_almost_lie() {
        let spec = AlgebroidSpec::new(
            2,
            2,
            vec![vec![e("1", 2), e("0", 2)], vec![e("0", 2), e("1", 2)]],
            vec![(0, 1, 0, e("0.5", 2)), (0, 1, 1, e("-2", 2))],
        )
        .unwrap();
        let r = spec.check_almost_lie(&sample_cloud(2, 5, 3), 1e-12).unwrap();
        assert!(!r.pass);
        assert!((r.max_residual - 2.0).abs() < 1e-15);
    }

    #[test]
    fn corrupted_constants_fail_jacobi() {
        let c = StructureConstants::from_entries(
            3,
            &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0), (0, 1, 0, 0.7)],
        )
        .unwrap();
        let spec = AlgebroidSpec::lie_algebra(c);
        let (spec, r) = spec.verify_lie(&sample_cloud(0, 1, 0), 1e-12).unwrap();
        assert!(!r.pass && r.max_residual > 0.1);
        assert!(!spec.is_lie());
    }

    #[test]
    fn atiyah_trivial_passes() {
        let spec = AlgebroidSpec::atiyah_trivial(2, StructureConstants::so3());
        assert_eq!(spec.m_fiber(), 5);
        let s = sample_cloud(2, DEFAULT_SAMPLES, 7);
        assert!(spec.check_almost_lie(&s, 1e-12).unwrap().pass);
        assert!(spec.check_jacobi(&s, 1e-12).unwrap().pass);
        let c = spec.structure_at(&[0.3, 0.1]).unwrap();
        assert_eq!(*c.get(2, 3, 4), 1.0);
        assert_eq!(*c.get(0, 2, 3), 0.0);
    }

    #[test]
    fn rejects_non_antisymmetric_constants() {
        let mut t = vec![vec![vec![0.0; 2]; 2]; 2];
        t[0][1][0] = 1.0;
        t[1][0][0] = 1.0;
        assert!(StructureConstants::from_dense(&t).is_err());
        assert!(StructureConstants::from_entries(2, &[(0, 1, 0, 1.0), (1, 0, 0, 1.0)]).is_err());
    }

    /// The tangent bundle of ℝ³ in the frame
    /// e₁ = ∂₁, e₂ = ∂₂ + x₁²∂₃, e₃ = ∂₃ + x₂∂₁, whose structure functions
    /// depend on x. It is a genuine Lie algebroid.
    fn frame_algebroid() -> AlgebroidSpec {
        AlgebroidSpec::new(
            3,
            3,
            vec![
                vec![e("1", 3), e("0", 3), e("x2", 3)],
                vec![e("0", 3), e("1", 3), e("0", 3)],
                vec![e("0", 3), e("x1^2", 3), e("1", 3)],
            ],
            vec![
                (0, 1, 0, e("-2*x1*x2", 3)),
                (0, 1, 2, e("2*x1", 3)),
                (1, 2, 0, e("1 + 2*x1*x2^2", 3)),
                (1, 2, 2, e("-2*x1*x2", 3)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn frame_algebroid_with_varying_structure_functions() {
        let spec = frame_algebroid();
        let s = sample_cloud(3, DEFAULT_SAMPLES, 11);
        assert!(spec.check_almost_lie(&s, 1e-12).unwrap().pass);
        let (spec, r) = spec.verify_lie(&s, 1e-12).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(spec.is_lie());
    }

    #[test]
    fn domain_errors_name_the_sample() {
        let spec = AlgebroidSpec::new(1, 1, vec![vec![e("log(x1)", 1)]], vec![]).unwrap();
        let err = spec.check_almost_lie(&[vec![0.5], vec![-0.5]], 1e-12).unwrap_err();
        assert!(matches!(err, Error::AtSample { index: 1, .. }));
    }

    #[test]
    fn curvature_zero_connection() {
        let conn = ConnectionSpec::constant(&vec![vec![0.0, 0.0]; 3], StructureConstants::so3()).unwrap();
        let f = conn.curvature(&[0.2, -0.4]).unwrap();
        assert!(f.iter().flatten().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn curvature_abelian_linear_matches_finite_differences() {
        let n = 2;
        let comps = vec![vec![e("0.3*x1 - 1.2*x2", n), e("2*x1 + 0.5*x2", n)]];
        let conn = ConnectionSpec::new(n, comps, StructureConstants::abelian(1)).unwrap();
        let x = [0.4, -0.7];
        let f = conn.curvature(&x).unwrap();
        let h = 1e-5;
        let a = |x: &[f64]| conn.components_at(x).unwrap();
        let d = |aa: usize, bb: usize| {
            let mut p = x.to_vec();
            let mut q = x.to_vec();
            p[aa] += h;
            q[aa] -= h;
            (a(&p)[0][bb] - a(&q)[0][bb]) / (2.0 * h)
        };
        let curl = d(0, 1) - d(1, 0);
        assert!((f[0][0][1] - curl).abs() < 1e-8);
        assert!((f[0][0][1] - 3.2).abs() < 1e-12);
        assert_eq!(f[0][1][0], -f[0][0][1]);
    }

    #[test]
    fn curvature_constant_so3_brute_force() {
        let vals = vec![vec![0.3, -0.2], vec![0.5, 0.1], vec![-0.4, 0.7]];
        let conn = ConnectionSpec::constant(&vals, StructureConstants::so3()).unwrap();
        let f = conn.curvature(&[0.0, 0.0]).unwrap();
        let eps = |a: usize, b: usize, c: usize| StructureConstants::so3().get(a, b, c);
        for a in 0..3 {
            for aa in 0..2 {
                for bb in 0..2 {
                    let mut want = 0.0;
                    for b in 0..3 {
                        for c in 0..3 {
                            want += vals[b][aa] * vals[c][bb] * eps(a, c, b);
                        }
                    }
                    assert!((f[a][aa][bb] - want).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn atiyah_frame_is_a_lie_algebroid() {
        let comps = vec![
            vec![parse("x1*x2", &base_vars(2)).unwrap(), parse("sin(x1)", &base_vars(2)).unwrap()],
            vec![parse("0.3", &base_vars(2)).unwrap(), parse("x1^2 - x2", &base_vars(2)).unwrap()],
            vec![parse("cos(x2)", &base_vars(2)).unwrap(), parse("0", &base_vars(2)).unwrap()],
        ];
        let conn = ConnectionSpec::new(2, comps, StructureConstants::so3()).unwrap();
        let frame = conn.atiyah_frame();
        assert_eq!(frame.m_fiber(), 5);
        let s = sample_cloud(2, DEFAULT_SAMPLES, 5);
        let al = frame.check_almost_lie(&s, 1e-12).unwrap();
        let jac = frame.check_jacobi(&s, 1e-10).unwrap();
        assert!(al.pass && jac.pass, "{al:?} {jac:?}");
        let x = [0.4, -0.7];
        let c = frame.structure_at(&x).unwrap();
        let f = conn.curvature(&x).unwrap();
        for a in 0..3 {
            assert!((c.get(0, 1, 2 + a) + f[a][0][1]).abs() < 1e-14);
        }
    }

    #[test]
    fn atiyah_frame_without_connection_is_trivial() {
        let conn = ConnectionSpec::constant(&[vec![0.0], vec![0.0], vec![0.0]], StructureConstants::so3()).unwrap();
        let frame = conn.atiyah_frame();
        let plain = AlgebroidSpec::atiyah_trivial(1, StructureConstants::so3());
        let (a, b) = (frame.structure_at(&[0.2]).unwrap(), plain.structure_at(&[0.2]).unwrap());
        assert_eq!(a.data, b.data);
    }
}
