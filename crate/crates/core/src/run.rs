//! The batch commands behind the `gmech` binary, returning tables and
//! reports rather than writing files.

use std::sync::Arc;

use serde::Serialize;

use crate::algebroid::{sample_cloud, CheckReport};
use crate::config::{ConfigError, InitialState, System};
use crate::csvio::{pi_column, x_column, y_column, SampledCurve, Table};
use crate::error::Error;
use crate::graded::WeightedStructure;
use crate::hamilton::{
    consistency_check, hamiltonian_from_lagrangian, inverse_legendre, legendre, random_samples, theta_var, ConsistencyReport,
    Hamiltonian, HamiltonianSystem,
};
use crate::lagrange::{IntegrateOptions, LagrangianSpec, Trajectory};
use crate::reduce::{conserved_momentum_monitor, ConservedQuantity, ReducedKind};

/// A result that may be partial: `error` is the numerical failure that cut
/// the computation short.
#[derive(Debug)]
pub struct Outcome<T> {
    pub value: T,
    pub error: Option<Error>,
}

impl<T> Outcome<T> {
    fn complete(value: T) -> Self {
        Outcome { value, error: None }
    }
}

fn config_err(path: &str, e: Error) -> ConfigError {
    ConfigError {
        path: path.into(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub checks: Vec<CheckReport>,
    pub pass: bool,
}

/// Almost-Lie and Jacobi checks on `count` base points, the weight
/// equivariance of `ε`, and, for a connection, the same axioms for its
/// adapted frame.
pub fn check(sys: &System, count: usize, seed: u64, tol: f64) -> Result<CheckSummary, Error> {
    let samples = sample_cloud(sys.algebroid.n_base(), count, seed);
    let mut checks = vec![
        sys.algebroid.check_almost_lie(&samples, tol)?,
        sys.algebroid.check_jacobi(&samples, tol)?,
    ];
    let ws = WeightedStructure::lie_algebroid(&sys.algebroid, sys.order)?;
    checks.push(ws.check_equivariance(count, seed, tol)?);
    if let Some(conn) = &sys.connection {
        let frame = conn.atiyah_frame();
        for mut r in [frame.check_almost_lie(&samples, tol)?, frame.check_jacobi(&samples, tol)?] {
            r.name = format!("connection_frame_{}", r.name);
            checks.push(r);
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(CheckSummary { checks, pass })
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: Trajectory,
    /// Conserved momenta of Euler–Poincaré and Hamel systems.
    pub monitors: Vec<ConservedQuantity>,
}

fn monitors(sys: &System, traj: &Trajectory) -> Vec<ConservedQuantity> {
    match &sys.reduced {
        Some(r) if r.kind() != ReducedKind::LagrangePoincare => {
            conserved_momentum_monitor(r, traj).map(|m| m.quantities).unwrap_or_default()
        }
        _ => Vec::new(),
    }
}

/// Integrates the configured system from its initial state.
pub fn simulate(sys: &System) -> Result<Outcome<Simulation>, ConfigError> {
    let sim = sys
        .config
        .simulation
        .as_ref()
        .ok_or_else(|| ConfigError {
            path: "simulation".into(),
            message: "required by simulate".into(),
        })?;
    let result = match sys.initial_state()? {
        InitialState::Lagrangian(s0) => {
            let explicit = sys.dynamics()?.reduce_to_explicit();
            let options = IntegrateOptions {
                residual_stride: sim.residual_stride,
            };
            explicit.integrate(&s0, sim.t_end, sim.step, &options)
        }
        InitialState::Hamiltonian(s0) => {
            let h = sys.hamiltonian.clone().expect("validated Hamiltonian system");
            let ws = WeightedStructure::lie_algebroid(&sys.algebroid, sys.order).map_err(|e| config_err("algebroid", e))?;
            let flow = HamiltonianSystem::new(Arc::new(h), ws).map_err(|e| config_err("hamiltonian", e))?;
            flow.integrate(&s0, sim.t_end, sim.step)
        }
    };
    let (trajectory, error) = match result {
        Ok(t) => (t, None),
        Err(f) => (*f.partial, Some(f.error)),
    };
    let monitors = monitors(sys, &trajectory);
    Ok(Outcome {
        value: Simulation { trajectory, monitors },
        error,
    })
}

fn lagrangian_for(sys: &System, command: &str) -> Result<LagrangianSpec, ConfigError> {
    if sys.lagrangian.is_none() {
        return Err(ConfigError {
            path: "lagrangian".into(),
            message: format!("required by {command}"),
        });
    }
    sys.dynamics()
}

/// Per-node Euler–Lagrange residual of a sampled curve, from
/// finite-difference jets. Columns `t, el_1..el_m, adm_1..adm_n,
/// el_residual`; nodes too close to the ends are left empty.
pub fn residual(sys: &System, curve: &SampledCurve) -> Result<Outcome<Table>, ConfigError> {
    let spec = lagrangian_for(sys, "residual")?;
    let (n, m, k) = (spec.n_base(), spec.m_fiber(), spec.order());
    let mut header = vec!["t".to_string()];
    header.extend((0..m).map(|a| format!("el_{}", a + 1)));
    header.extend((0..n).map(|a| format!("adm_{}", a + 1)));
    header.push("el_residual".into());
    let mut rows = Vec::with_capacity(curve.len());
    for i in 0..curve.len() {
        let node = || -> Result<Option<Vec<f64>>, Error> {
            match curve.curve_jet(spec.algebroid(), spec.convention(), i, 2 * k - 1)? {
                Some(jet) => spec.el_residual(&jet).map(Some),
                None => Ok(None),
            }
        };
        match node() {
            Ok(r) => rows.push(with_time(curve.times[i], r, n + m, true)),
            Err(error) => {
                return Ok(Outcome {
                    value: Table::new(header, rows),
                    error: Some(error),
                })
            }
        }
    }
    Ok(Outcome::complete(Table::new(header, rows)))
}

fn with_time(t: f64, values: Option<Vec<f64>>, width: usize, max_column: bool) -> Vec<Option<f64>> {
    let mut row = vec![Some(t)];
    match values {
        Some(v) => {
            let max = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            row.extend(v.into_iter().map(Some));
            if max_column {
                row.push(Some(max));
            }
        }
        None => row.extend(std::iter::repeat(None).take(width + max_column as usize)),
    }
    row
}

/// The Jacobi–Ostrogradski ladder `pi_U_a` along a sampled curve.
pub fn momenta(sys: &System, curve: &SampledCurve) -> Result<Outcome<Table>, ConfigError> {
    let spec = lagrangian_for(sys, "momenta")?;
    let (m, k) = (spec.m_fiber(), spec.order());
    let mut header = vec!["t".to_string()];
    header.extend((1..=k).flat_map(|u| (0..m).map(move |a| pi_column(u, a))));
    let mut rows = Vec::with_capacity(curve.len());
    for i in 0..curve.len() {
        let node = || -> Result<Option<Vec<f64>>, Error> {
            match curve.curve_jet(spec.algebroid(), spec.convention(), i, 2 * k - 2)? {
                Some(jet) => Ok(Some(spec.jacobi_ostrogradski(&jet)?.concat())),
                None => Ok(None),
            }
        };
        match node() {
            Ok(r) => rows.push(with_time(curve.times[i], r, k * m, false)),
            Err(error) => {
                return Ok(Outcome {
                    value: Table::new(header, rows),
                    error: Some(error),
                })
            }
        }
    }
    Ok(Outcome::complete(Table::new(header, rows)))
}

#[derive(Debug, Clone, Serialize)]
pub struct LegendreSummary {
    pub samples: usize,
    /// Largest `|λ_L⁻¹(λ_L(p)) − p|` over the sampled points.
    pub max_roundtrip_error: f64,
    pub consistency: Option<ConsistencyReport>,
}

/// Samples of the Legendre map and the Hamiltonian: columns `x_A, y_w_a`
/// (`w ≤ k`), `theta_a`, `H` and `roundtrip`, plus the consistency check of
/// the two phase dynamics. A system given by a Hamiltonian is sampled on
/// the Mironian directly, without `z` and the round trip.
pub fn legendre_samples(sys: &System, count: usize, seed: u64, tol: f64) -> Result<Outcome<(Table, LegendreSummary)>, ConfigError> {
    let (n, m, k) = (sys.algebroid.n_base(), sys.algebroid.m_fiber(), sys.order);
    if let Some(h) = &sys.hamiltonian {
        return Ok(hamiltonian_samples(h, n, m, k, count, seed));
    }
    let spec = lagrangian_for(sys, "legendre")?;
    let mut header: Vec<String> = (0..n).map(x_column).collect();
    header.extend((1..=k).flat_map(|w| (0..m).map(move |a| y_column(w, a))));
    header.extend((0..m).map(theta_var));
    header.push("H".into());
    header.push("roundtrip".into());
    let samples = random_samples(&spec, count, seed);
    let h = hamiltonian_from_lagrangian(&spec);
    let mut rows = Vec::with_capacity(count);
    let mut worst = 0.0f64;
    for (p, _) in &samples {
        let row = || -> Result<(Vec<Option<f64>>, f64), Error> {
            let mp = legendre(&spec, p)?;
            let back = inverse_legendre(&spec, &mp, None)?;
            let err = p.z().iter().zip(back.z()).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
            let value = h.eval(&mp.flat(), back.z())?;
            let mut row: Vec<Option<f64>> = p.flat().into_iter().map(Some).collect();
            row.extend(mp.theta.iter().map(|v| Some(*v)));
            row.push(Some(value));
            row.push(Some(err));
            Ok((row, err))
        };
        match row() {
            Ok((r, err)) => {
                rows.push(r);
                worst = worst.max(err);
            }
            Err(error) => {
                let summary = LegendreSummary {
                    samples: rows.len(),
                    max_roundtrip_error: worst,
                    consistency: None,
                };
                return Ok(Outcome {
                    value: (Table::new(header, rows), summary),
                    error: Some(error),
                });
            }
        }
    }
    let consistency = consistency_check(&spec, &samples, tol);
    let summary = LegendreSummary {
        samples: rows.len(),
        max_roundtrip_error: worst,
        consistency: Some(consistency),
    };
    Ok(Outcome::complete((Table::new(header, rows), summary)))
}

fn hamiltonian_samples(h: &dyn Hamiltonian, n: usize, m: usize, k: usize, count: usize, seed: u64) -> Outcome<(Table, LegendreSummary)> {
    let mut header: Vec<String> = (0..n).map(x_column).collect();
    header.extend((1..k).flat_map(|w| (0..m).map(move |a| y_column(w, a))));
    header.extend((0..m).map(theta_var));
    header.push("H".into());
    let dim = n + k * m;
    let mut rows = Vec::with_capacity(count);
    let mut error = None;
    for point in sample_cloud(dim, count, seed) {
        match h.value(&point) {
            Ok(v) => rows.push(point.into_iter().map(Some).chain([Some(v)]).collect()),
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }
    let summary = LegendreSummary {
        samples: rows.len(),
        max_roundtrip_error: 0.0,
        consistency: None,
    };
    Outcome {
        value: (Table::new(header, rows), summary),
        error,
    }
}
