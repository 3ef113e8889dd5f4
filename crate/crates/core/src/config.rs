//! JSON system descriptions: schema, validation and assembly into library
//! objects. Every validation error carries the path of the offending field.

use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::algebroid::{base_vars, AlgebroidSpec, ConnectionSpec, StructureConstants};
use crate::expr::{parse, Expression};
use crate::graded::{level_vars, Convention, HigherPoint, PhasePoint};
use crate::hamilton::{mironian_vars, HamiltonianSpec, SignConvention};
use crate::lagrange::LagrangianSpec;
use crate::reduce::{ReducedKind, ReducedSystem};

/// A configuration problem, located by a dotted field path such as
/// `algebroid.structure` or `simulation.y[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgebroidKind {
    Tangent,
    LieAlgebra,
    AtiyahTrivial,
    Explicit,
}

/// A table entry: a number or an expression in the base variables.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Expr(String),
}

/// Structure constants or functions: a builtin name, a dense `m×m×m` table
/// `[a][b][c] = Cᶜ_ab`, or sparse one-based `[a, b, c, value]` entries.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StructureTable {
    Named(String),
    Dense(Vec<Vec<Vec<Entry>>>),
    Sparse(Vec<(usize, usize, usize, Entry)>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebroidConfig {
    pub kind: AlgebroidKind,
    /// Base dimension (`tangent`, `atiyah_trivial`, `explicit`).
    pub n: Option<usize>,
    /// Rank of the Lie algebra (`lie_algebra`, `atiyah_trivial`) or of the
    /// bundle (`explicit`).
    pub rank: Option<usize>,
    /// `n×rank` anchor table (`explicit` only).
    pub anchor: Option<Vec<Vec<Entry>>>,
    pub structure: Option<StructureTable>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionConfig {
    /// `components[a][A] = 𝔸ᵃ_A(x)`, one row per Lie-algebra index.
    pub components: Vec<Vec<Entry>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub t_end: f64,
    pub step: f64,
    #[serde(default)]
    pub x: Vec<f64>,
    /// Fiber blocks `y_1..y_k` (Lagrangian) or `y_1..y_{k−1}` (Hamiltonian).
    #[serde(default)]
    pub y: Vec<Vec<f64>>,
    /// Top Mironian momentum `θ` (Hamiltonian systems only).
    pub theta: Option<Vec<f64>>,
    /// Free momenta `Π²..Πᵏ`; zero when omitted.
    pub momenta: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_stride")]
    pub residual_stride: usize,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default = "default_samples")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_samples() -> usize {
    50
}

fn default_tol() -> f64 {
    1e-12
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            count: default_samples(),
            seed: 0,
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "names::trajectory")]
    pub trajectory: String,
    #[serde(default = "names::residual")]
    pub residual: String,
    #[serde(default = "names::momenta")]
    pub momenta: String,
    #[serde(default = "names::legendre")]
    pub legendre: String,
    #[serde(default = "names::report")]
    pub report: String,
    /// Column groups written to the trajectory CSV, in file order; all when
    /// omitted.
    pub columns: Option<Vec<ColumnGroup>>,
}

mod names {
    pub fn trajectory() -> String {
        "trajectory.csv".into()
    }
    pub fn residual() -> String {
        "residual.csv".into()
    }
    pub fn momenta() -> String {
        "momenta.csv".into()
    }
    pub fn legendre() -> String {
        "legendre.csv".into()
    }
    pub fn report() -> String {
        "report.json".into()
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            trajectory: names::trajectory(),
            residual: names::residual(),
            momenta: names::momenta(),
            legendre: names::legendre(),
            report: names::report(),
            columns: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnGroup {
    T,
    X,
    Y,
    Pi,
    Energy,
    Monitors,
    ElResidual,
}

impl ColumnGroup {
    pub const ALL: [ColumnGroup; 7] = [
        ColumnGroup::T,
        ColumnGroup::X,
        ColumnGroup::Y,
        ColumnGroup::Pi,
        ColumnGroup::Energy,
        ColumnGroup::Monitors,
        ColumnGroup::ElResidual,
    ];
}

/// The raw configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: Option<String>,
    pub algebroid: AlgebroidConfig,
    pub order: usize,
    #[serde(default)]
    pub convention: Convention,
    pub lagrangian: Option<String>,
    pub hamiltonian: Option<String>,
    #[serde(default)]
    pub sign: SignConvention,
    pub reduction: Option<ReducedKind>,
    pub connection: Option<ConnectionConfig>,
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl SystemConfig {
    pub fn from_json(text: &str) -> CResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            ConfigError::new(path, e.into_inner().to_string())
        })
    }

    pub fn from_file(path: &Path) -> CResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// A validated system ready for the commands.
#[derive(Debug, Clone)]
pub struct System {
    pub config: SystemConfig,
    pub algebroid: AlgebroidSpec,
    pub order: usize,
    pub convention: Convention,
    pub lagrangian: Option<LagrangianSpec>,
    pub hamiltonian: Option<HamiltonianSpec>,
    pub connection: Option<ConnectionSpec>,
    pub reduced: Option<ReducedSystem>,
}

/// The initial state of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// `(x, y₁..y_k, Π²..Πᵏ)` for the Lagrangian flow.
    Lagrangian(Vec<f64>),
    /// `(x, y₁..y_{k−1}, θ, Π²..Πᵏ)` for the Hamiltonian flow.
    Hamiltonian(Vec<f64>),
}

fn entry_expr(entry: &Entry, vars: &[String], path: &str) -> CResult<Expression> {
    match entry {
        Entry::Number(v) => Ok(Expression::constant(*v, vars.to_vec())),
        Entry::Expr(s) => parse(s, vars).map_err(|e| ConfigError::new(path, e.to_string())),
    }
}

fn entry_number(entry: &Entry, path: &str) -> CResult<f64> {
    match entry {
        Entry::Number(v) => Ok(*v),
        Entry::Expr(s) => parse(s, &[])
            .ok()
            .and_then(|e| e.as_constant())
            .ok_or_else(|| ConfigError::new(path, format!("expected a constant, got `{s}`"))),
    }
}

fn require<T: Clone>(value: &Option<T>, path: &str, kind: &str) -> CResult<T> {
    value
        .clone()
        .ok_or_else(|| ConfigError::new(path, format!("required for kind `{kind}`")))
}

fn forbid<T>(value: &Option<T>, path: &str, kind: &str) -> CResult<()> {
    match value {
        Some(_) => Err(ConfigError::new(path, format!("not allowed for kind `{kind}`"))),
        None => Ok(()),
    }
}

/// Dense or sparse constant table, checked against `rank` when given.
fn constants(table: &StructureTable, rank: Option<usize>) -> CResult<StructureConstants> {
    const PATH: &str = "algebroid.structure";
    let check_rank = |c: StructureConstants| match rank {
        Some(r) if r != c.rank() => Err(ConfigError::new(
            PATH,
            format!("table has rank {}, but algebroid.rank is {r}", c.rank()),
        )),
        _ => Ok(c),
    };
    match table {
        StructureTable::Named(name) => match name.as_str() {
            "so3" => check_rank(StructureConstants::so3()),
            "abelian" => {
                let r = rank.ok_or_else(|| ConfigError::new("algebroid.rank", "required for `abelian`"))?;
                Ok(StructureConstants::abelian(r))
            }
            other => Err(ConfigError::new(PATH, format!("unknown Lie algebra `{other}` (expected so3 or abelian)"))),
        },
        StructureTable::Dense(rows) => {
            let m = rank.unwrap_or(rows.len());
            check_dense_shape(rows, m)?;
            let table = rows
                .iter()
                .enumerate()
                .map(|(a, r)| {
                    r.iter()
                        .enumerate()
                        .map(|(b, c)| {
                            c.iter()
                                .enumerate()
                                .map(|(k, e)| entry_number(e, &format!("{PATH}[{a}][{b}][{k}]")))
                                .collect::<CResult<Vec<_>>>()
                        })
                        .collect::<CResult<Vec<_>>>()
                })
                .collect::<CResult<Vec<_>>>()?;
            StructureConstants::from_dense(&table).map_err(|e| ConfigError::new(PATH, e.to_string()))
        }
        StructureTable::Sparse(entries) => {
            let m = rank.ok_or_else(|| ConfigError::new("algebroid.rank", "required with sparse structure entries"))?;
            let list = entries
                .iter()
                .enumerate()
                .map(|(i, (a, b, c, v))| {
                    let p = format!("{PATH}[{i}]");
                    let idx = sparse_index([*a, *b, *c], m, &p)?;
                    Ok((idx[0], idx[1], idx[2], entry_number(v, &p)?))
                })
                .collect::<CResult<Vec<_>>>()?;
            StructureConstants::from_entries(m, &list).map_err(|e| ConfigError::new(PATH, e.to_string()))
        }
    }
}

fn check_dense_shape<T>(rows: &[Vec<Vec<T>>], m: usize) -> CResult<()> {
    const PATH: &str = "algebroid.structure";
    let bad = rows.len() != m
        || rows.iter().any(|r| r.len() != m)
        || rows.iter().flatten().any(|c| c.len() != m);
    if bad {
        return Err(ConfigError::new(PATH, format!("expected a {m}×{m}×{m} table for rank {m}")));
    }
    Ok(())
}

fn sparse_index(idx: [usize; 3], m: usize, path: &str) -> CResult<[usize; 3]> {
    if idx.iter().any(|&i| i == 0 || i > m) {
        return Err(ConfigError::new(
            path,
            format!("indices {idx:?} out of range 1..={m} (indices are one-based)"),
        ));
    }
    Ok(idx.map(|i| i - 1))
}

fn build_algebroid(cfg: &AlgebroidConfig) -> CResult<AlgebroidSpec> {
    match cfg.kind {
        AlgebroidKind::Tangent => {
            let kind = "tangent";
            let n = require(&cfg.n, "algebroid.n", kind)?;
            forbid(&cfg.structure, "algebroid.structure", kind)?;
            forbid(&cfg.anchor, "algebroid.anchor", kind)?;
            if let Some(r) = cfg.rank {
                if r != n {
                    return Err(ConfigError::new("algebroid.rank", format!("tangent({n}) has rank {n}, not {r}")));
                }
            }
            Ok(AlgebroidSpec::tangent(n))
        }
        AlgebroidKind::LieAlgebra => {
            let kind = "lie_algebra";
            forbid(&cfg.anchor, "algebroid.anchor", kind)?;
            if cfg.n.is_some_and(|n| n != 0) {
                return Err(ConfigError::new("algebroid.n", "a Lie algebra has a zero-dimensional base"));
            }
            let table = require(&cfg.structure, "algebroid.structure", kind)?;
            Ok(AlgebroidSpec::lie_algebra(constants(&table, cfg.rank)?))
        }
        AlgebroidKind::AtiyahTrivial => {
            let kind = "atiyah_trivial";
            forbid(&cfg.anchor, "algebroid.anchor", kind)?;
            let n = require(&cfg.n, "algebroid.n", kind)?;
            let table = require(&cfg.structure, "algebroid.structure", kind)?;
            Ok(AlgebroidSpec::atiyah_trivial(n, constants(&table, cfg.rank)?))
        }
        AlgebroidKind::Explicit => build_explicit(cfg),
    }
}

fn build_explicit(cfg: &AlgebroidConfig) -> CResult<AlgebroidSpec> {
    let kind = "explicit";
    let n = require(&cfg.n, "algebroid.n", kind)?;
    let m = require(&cfg.rank, "algebroid.rank", kind)?;
    let vars = base_vars(n);
    let anchor_rows = cfg.anchor.clone().unwrap_or_default();
    if anchor_rows.len() != n || anchor_rows.iter().any(|r| r.len() != m) {
        return Err(ConfigError::new("algebroid.anchor", format!("expected an {n}×{m} table")));
    }
    let anchor = anchor_rows
        .iter()
        .enumerate()
        .map(|(a, row)| {
            row.iter()
                .enumerate()
                .map(|(b, e)| entry_expr(e, &vars, &format!("algebroid.anchor[{a}][{b}]")))
                .collect::<CResult<Vec<_>>>()
        })
        .collect::<CResult<Vec<_>>>()?;
    const PATH: &str = "algebroid.structure";
    let mut entries = Vec::new();
    match &cfg.structure {
        None => {}
        Some(StructureTable::Named(name)) => {
            return Err(ConfigError::new(PATH, format!("named table `{name}` not allowed for kind `explicit`")))
        }
        Some(StructureTable::Dense(rows)) => {
            check_dense_shape(rows, m)?;
            for (a, r) in rows.iter().enumerate() {
                for (b, c) in r.iter().enumerate() {
                    for (k, e) in c.iter().enumerate() {
                        let p = format!("{PATH}[{a}][{b}][{k}]");
                        let e = entry_expr(e, &vars, &p)?;
                        if a < b {
                            entries.push((a, b, k, e));
                        } else if a == b && e.as_constant() != Some(0.0) {
                            return Err(ConfigError::new(p, "diagonal entries must vanish"));
                        }
                    }
                }
            }
        }
        Some(StructureTable::Sparse(list)) => {
            for (i, (a, b, c, v)) in list.iter().enumerate() {
                let p = format!("{PATH}[{i}]");
                let idx = sparse_index([*a, *b, *c], m, &p)?;
                entries.push((idx[0], idx[1], idx[2], entry_expr(v, &vars, &p)?));
            }
        }
    }
    AlgebroidSpec::new(n, m, anchor, entries).map_err(|e| ConfigError::new(PATH, e.to_string()))
}

fn build_connection(cfg: &ConnectionConfig, alg: &AlgebroidSpec) -> CResult<ConnectionSpec> {
    const PATH: &str = "connection.components";
    let crate::algebroid::Shape::AtiyahTrivial(constants) = alg.shape() else {
        return Err(ConfigError::new("connection", "a connection needs an `atiyah_trivial` algebroid"));
    };
    let n = alg.n_base();
    let vars = base_vars(n);
    if cfg.components.len() != constants.rank() || cfg.components.iter().any(|r| r.len() != n) {
        return Err(ConfigError::new(PATH, format!("expected a {}×{n} table", constants.rank())));
    }
    let rows = cfg
        .components
        .iter()
        .enumerate()
        .map(|(a, row)| {
            row.iter()
                .enumerate()
                .map(|(b, e)| entry_expr(e, &vars, &format!("{PATH}[{a}][{b}]")))
                .collect::<CResult<Vec<_>>>()
        })
        .collect::<CResult<Vec<_>>>()?;
    ConnectionSpec::new(n, rows, constants.clone()).map_err(|e| ConfigError::new(PATH, e.to_string()))
}

impl System {
    /// Validates a configuration. `convention` overrides the file's
    /// convention; the Lagrangian and initial data are converted so the
    /// system stays the same.
    pub fn build(config: SystemConfig, convention: Option<Convention>) -> CResult<Self> {
        let k = config.order;
        if k == 0 {
            return Err(ConfigError::new("order", "must be at least 1"));
        }
        let algebroid = build_algebroid(&config.algebroid)?;
        let (n, m) = (algebroid.n_base(), algebroid.m_fiber());
        let native = config.convention;
        let target = convention.unwrap_or(native);
        let lagrangian = match &config.lagrangian {
            None => None,
            Some(src) => {
                let spec = LagrangianSpec::parse(algebroid.clone(), k, src, native)
                    .map_err(|e| ConfigError::new("lagrangian", e.to_string()))?;
                Some(spec.in_convention(target))
            }
        };
        let hamiltonian = match &config.hamiltonian {
            None => None,
            Some(src) => {
                if target != native {
                    return Err(ConfigError::new(
                        "convention",
                        "overriding the convention of a Hamiltonian system is not supported",
                    ));
                }
                let e = parse(src, &mironian_vars(n, m, k)).map_err(|e| ConfigError::new("hamiltonian", e.to_string()))?;
                Some(
                    HamiltonianSpec::new(algebroid.clone(), k, e, native, config.sign)
                        .map_err(|e| ConfigError::new("hamiltonian", e.to_string()))?,
                )
            }
        };
        if lagrangian.is_some() && hamiltonian.is_some() {
            return Err(ConfigError::new("hamiltonian", "give either a lagrangian or a hamiltonian, not both"));
        }
        let connection = match &config.connection {
            None => None,
            Some(c) => Some(build_connection(c, &algebroid)?),
        };
        let reduced = match config.reduction {
            None => {
                if connection.is_some() {
                    return Err(ConfigError::new("reduction", "a connection requires `lagrange_poincare`"));
                }
                None
            }
            Some(kind) => {
                let spec = lagrangian
                    .clone()
                    .ok_or_else(|| ConfigError::new("lagrangian", "required by `reduction`"))?;
                Some(
                    ReducedSystem::new(kind, spec, connection.clone())
                        .map_err(|e| ConfigError::new("reduction", e.to_string()))?,
                )
            }
        };
        let system = System {
            algebroid,
            order: k,
            convention: target,
            lagrangian,
            hamiltonian,
            connection,
            reduced,
            config,
        };
        system.check_simulation()?;
        Ok(system)
    }

    pub fn load(path: &Path, convention: Option<Convention>) -> CResult<Self> {
        Self::build(SystemConfig::from_file(path)?, convention)
    }

    /// The Lagrangian whose Euler–Lagrange equations are integrated: the
    /// connection-adapted frame Lagrangian for Lagrange–Poincaré systems.
    pub fn dynamics(&self) -> CResult<LagrangianSpec> {
        match &self.reduced {
            Some(r) => r.frame_spec().map_err(|e| ConfigError::new("connection", e.to_string())),
            None => self
                .lagrangian
                .clone()
                .ok_or_else(|| ConfigError::new("lagrangian", "required by this command")),
        }
    }

    fn check_simulation(&self) -> CResult<()> {
        let Some(sim) = &self.config.simulation else {
            return Ok(());
        };
        if !(sim.step > 0.0 && sim.step.is_finite()) {
            return Err(ConfigError::new("simulation.step", "must be positive"));
        }
        if !(sim.t_end >= 0.0 && sim.t_end.is_finite()) {
            return Err(ConfigError::new("simulation.t_end", "must be non-negative"));
        }
        self.initial_state().map(|_| ())
    }

    /// The initial state from the `simulation` block, in the working
    /// convention.
    pub fn initial_state(&self) -> CResult<InitialState> {
        let sim = self
            .config
            .simulation
            .as_ref()
            .ok_or_else(|| ConfigError::new("simulation", "required by this command"))?;
        let (n, m, k) = (self.algebroid.n_base(), self.algebroid.m_fiber(), self.order);
        if sim.x.len() != n {
            return Err(ConfigError::new("simulation.x", format!("expected {n} entries, got {}", sim.x.len())));
        }
        let hamiltonian = self.hamiltonian.is_some();
        let levels = if hamiltonian { k - 1 } else { k };
        if sim.y.len() != levels {
            return Err(ConfigError::new("simulation.y", format!("expected {levels} blocks, got {}", sim.y.len())));
        }
        for (i, b) in sim.y.iter().enumerate() {
            if b.len() != m {
                return Err(ConfigError::new(format!("simulation.y[{i}]"), format!("expected {m} entries, got {}", b.len())));
            }
        }
        let momenta = sim.momenta.clone().unwrap_or_else(|| vec![vec![0.0; m]; k - 1]);
        if momenta.len() != k - 1 {
            return Err(ConfigError::new("simulation.momenta", format!("expected {} blocks Π²..Πᵏ", k - 1)));
        }
        for (i, b) in momenta.iter().enumerate() {
            if b.len() != m {
                return Err(ConfigError::new(format!("simulation.momenta[{i}]"), format!("expected {m} entries")));
            }
        }
        if hamiltonian {
            let theta = sim
                .theta
                .clone()
                .ok_or_else(|| ConfigError::new("simulation.theta", "required for a Hamiltonian system"))?;
            if theta.len() != m {
                return Err(ConfigError::new("simulation.theta", format!("expected {m} entries")));
            }
            let state = sim.x.iter().chain(sim.y.iter().flatten()).chain(&theta).chain(momenta.iter().flatten());
            return Ok(InitialState::Hamiltonian(state.copied().collect()));
        }
        if sim.theta.is_some() {
            return Err(ConfigError::new("simulation.theta", "only for Hamiltonian systems"));
        }
        if self.lagrangian.is_none() {
            return Err(ConfigError::new("lagrangian", "a simulation needs a lagrangian or a hamiltonian"));
        }
        // Π¹ is not stored in the state; a placeholder keeps the ladder
        // length right for the conversion.
        let mut pi = vec![vec![0.0; m]];
        pi.extend(momenta);
        let phase = PhasePoint {
            x: sim.x.clone(),
            y: sim.y.clone(),
            pi,
            convention: self.config.convention,
        }
        .convert_convention(self.convention);
        let point = HigherPoint::new(phase.x, phase.y, self.convention);
        let state = point.flat().into_iter().chain(phase.pi.into_iter().skip(1).flatten());
        Ok(InitialState::Lagrangian(state.collect()))
    }

    /// Names of the point coordinates `x1.., y1_1..` of `F_k`.
    pub fn point_vars(&self) -> Vec<String> {
        level_vars(self.algebroid.n_base(), self.algebroid.m_fiber(), self.order)
    }
}
