//! Acceptance suite. Prints one line per criterion and fails the target if
//! any criterion fails.

mod common;

use std::panic;
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::{action_stationarity, random_coeffs, Taylor};
use graded_mechanics::algebroid::{base_var, base_vars, sample_cloud, AlgebroidSpec, ConnectionSpec, StructureConstants};
use graded_mechanics::config::System;
use graded_mechanics::graded::{fiber_var, Convention, CurveJet, HigherPoint, PhasePoint, WeightedStructure};
use graded_mechanics::hamilton::{consistency_check, hamiltonian_from_lagrangian, inverse_legendre, legendre, random_samples, Hamiltonian};
use graded_mechanics::lagrange::{LagrangianSpec, Trajectory};
use graded_mechanics::reduce::{
    euler_poincare_residual, hamel_residual, lagrange_poincare_residual, lorentz_residual, ReducedJet, ReducedSystem,
};
use graded_mechanics::{parse, run, Expression, Jet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str, conv: Option<Convention>) -> System {
    System::load(&configs().join(format!("{name}.json")), conv).unwrap()
}

fn simulate(sys: &System) -> run::Simulation {
    let out = run::simulate(sys).unwrap();
    if let Some(e) = out.error {
        panic!("{:?}: {e}", sys.config.name);
    }
    out.value
}

fn jet(rng: &mut ChaCha8Rng, order: usize) -> Jet<f64> {
    Jet::from_coeffs(random_coeffs(rng, order + 1))
}

fn so3_free(conv: Convention) -> LagrangianSpec {
    let spec = LagrangianSpec::parse(
        AlgebroidSpec::lie_algebra(StructureConstants::so3()),
        2,
        "0.5*(1.5*y2_1^2 + 2*y2_2^2 + 3*y2_3^2)",
        Convention::Plain,
    )
    .unwrap();
    spec.in_convention(conv)
}

const INERTIA: [f64; 3] = [1.5, 2.0, 3.0];

/// Free second-order rigid body against `I_j x⃛ʲ − Σ cᵏ_ij I_k xⁱ ẍᵏ`.
fn so3_higher_euler() -> Outcome {
    let start = Instant::now();
    let spec = so3_free(Convention::Plain);
    let reduced = ReducedSystem::euler_poincare(spec.clone()).unwrap();
    let c = StructureConstants::so3();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst, mut velocity_form) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let y: Vec<Jet<f64>> = (0..3).map(|_| jet(&mut rng, 3)).collect();
        let general = spec.el_residual(&CurveJet::new(vec![], y.clone())).unwrap();
        let ep = euler_poincare_residual(&reduced, &ReducedJet { x: vec![], y: y.clone() }).unwrap();
        for j in 0..3 {
            let mut want = INERTIA[j] * y[j].derivative_value(3);
            let mut literal = want;
            for i in 0..3 {
                for k in 0..3 {
                    want -= c.get(i, j, k) * INERTIA[k] * y[i].coeff(0) * y[k].derivative_value(2);
                    literal -= c.get(i, j, k) * INERTIA[k] * y[i].coeff(0) * y[k].derivative_value(1);
                }
            }
            worst = worst.max((general[j] - want).abs()).max((ep[j] - want).abs());
            velocity_form = velocity_form.max((general[j] - literal).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst < 1e-10 && secs < 1.0 && velocity_form > 1e-3,
        format!("max error {worst:.2e} in {secs:.3} s; first-derivative variant off by {velocity_form:.2e}"),
    )
}

/// A nonlinear Lagrangian on `T^k ℝⁿ` with its partials written out by hand.
struct Classical {
    k: usize,
    n: usize,
    weights: Vec<Vec<f64>>,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl Classical {
    fn random(k: usize, n: usize, rng: &mut ChaCha8Rng) -> Self {
        Classical {
            k,
            n,
            weights: (0..=k).map(|_| (0..n).map(|_| rng.gen_range(0.5..1.5)).collect()).collect(),
            alpha: rng.gen_range(-1.0..1.0),
            beta: rng.gen_range(-1.0..1.0),
            gamma: rng.gen_range(-1.0..1.0),
        }
    }

    fn name(j: usize, a: usize) -> String {
        if j == 0 {
            base_var(a)
        } else {
            fiber_var(j, a)
        }
    }

    /// `Σ ½ w (q⁽ʲ⁾)² + α sin q₁ (q₁′)² + β q₁⁽ᵏ⁾ q′ₙ + γ cos qₙ (q₁⁽ᵏ⁾)²`.
    fn source(&self) -> String {
        let (k, n) = (self.k, self.n);
        let mut terms = vec![];
        for j in 0..=k {
            for a in 0..n {
                terms.push(format!("0.5*{}*{}^2", self.weights[j][a], Self::name(j, a)));
            }
        }
        let top = Self::name(k, 0);
        terms.push(format!("{}*sin(x1)*y1_1^2", self.alpha));
        terms.push(format!("{}*{top}*{}", self.beta, Self::name(1, n - 1)));
        terms.push(format!("{}*cos({})*{top}^2", self.gamma, base_var(n - 1)));
        terms.join(" + ")
    }

    /// `Σⱼ (−1)ʲ Dʲ ∂L/∂q⁽ʲ⁾` at `t = 0`, evaluated with the Taylor oracle.
    fn euler_lagrange(&self, q: &[Taylor]) -> Vec<f64> {
        let (k, n) = (self.k, self.n);
        let len = q[0].0.len();
        let d: Vec<Vec<Taylor>> = (0..=k).map(|j| q.iter().map(|qa| qa.nth(j)).collect()).collect();
        let mut partial: Vec<Vec<Taylor>> = (0..=k)
            .map(|j| (0..n).map(|a| d[j][a].scale(self.weights[j][a])).collect())
            .collect();
        let add = |p: &mut Vec<Vec<Taylor>>, j: usize, a: usize, t: Taylor| {
            p[j][a] = p[j][a].clone() + t;
        };
        let (s1, c1) = d[0][0].sin_cos();
        add(&mut partial, 0, 0, (c1 * d[1][0].powi(2)).scale(self.alpha));
        add(&mut partial, 1, 0, (s1 * d[1][0].clone()).scale(2.0 * self.alpha));
        add(&mut partial, k, 0, d[1][n - 1].scale(self.beta));
        add(&mut partial, 1, n - 1, d[k][0].scale(self.beta));
        let (sn, cn) = d[0][n - 1].sin_cos();
        add(&mut partial, 0, n - 1, -(sn * d[k][0].powi(2)).scale(self.gamma));
        add(&mut partial, k, 0, (cn * d[k][0].clone()).scale(2.0 * self.gamma));
        debug_assert!(len > 2 * k);
        (0..n)
            .map(|a| (0..=k).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * partial[j][a].nth(j).value()).sum())
            .collect()
    }
}

fn tangent_alternating_sum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for k in 1..=3 {
        for n in 1..=2 {
            let model = Classical::random(k, n, &mut rng);
            let spec = LagrangianSpec::parse(AlgebroidSpec::tangent(n), k, &model.source(), Convention::Plain).unwrap();
            for _ in 0..100 {
                let q: Vec<Taylor> = (0..n).map(|_| Taylor(random_coeffs(&mut rng, 2 * k + 1))).collect();
                let x = q.iter().map(|t| Jet::from_coeffs(t.0.clone())).collect();
                let v = q.iter().map(|t| Jet::from_coeffs(t.derivative().0[..2 * k].to_vec())).collect();
                let r = spec.el_residual(&CurveJet::new(x, v)).unwrap();
                let want = model.euler_lagrange(&q);
                worst = worst.max(max_diff(&r[..n], &want)).max(max_abs(&r[n..]));
            }
        }
    }
    ensure(worst < 1e-9, format!("max error {worst:.2e} over k = 1..3, n = 1..2"))
}

const SIMULATED: [&str; 7] = [
    "oscillator",
    "t2r_quadratic",
    "so3_free",
    "javelin",
    "hamel_abelian",
    "hamel_so3",
    "lp_constant",
];

/// Symmetric first variation of the discrete action along each bundled
/// trajectory, against `C h²`.
fn discrete_action_stationarity() -> Outcome {
    let mut lines = vec![];
    let mut ok = true;
    for (i, name) in SIMULATED.iter().enumerate() {
        let start = Instant::now();
        let sys = load(name, None);
        let traj = simulate(&sys).trajectory;
        let h = traj.step;
        let gap = action_stationarity(&sys.dynamics().unwrap(), &traj, 1e-5, 8, 300 + i as u64);
        let secs = start.elapsed().as_secs_f64();
        let bound = 10.0 * h * h;
        ok &= gap <= bound && secs < 10.0;
        lines.push(format!("{name} {gap:.1e} ({secs:.2} s)"));
    }
    ensure(ok, format!("bound 10 h² = 1e-5: {}", lines.join(", ")))
}

fn monitor_drift(name: &str, quantity: Option<&str>) -> (f64, f64) {
    let start = Instant::now();
    let sim = simulate(&load(name, None));
    let drift = sim
        .monitors
        .iter()
        .filter(|q| quantity.map_or(true, |n| q.name == n))
        .fold(0.0f64, |a, q| a.max(q.drift));
    assert!(!sim.monitors.is_empty());
    (drift, start.elapsed().as_secs_f64())
}

fn conserved_momenta() -> Outcome {
    let (abelian, ta) = monitor_drift("hamel_abelian", None);
    let (casimir, tc) = monitor_drift("so3_free", Some("norm2_pi_2"));
    ensure(
        abelian < 1e-8 && casimir < 1e-8 && ta < 5.0 && tc < 5.0,
        format!("abelian momentum drift {abelian:.1e} ({ta:.2} s), so(3) |π|² drift {casimir:.1e} ({tc:.2} s)"),
    )
}

fn closed_form_hamiltonians() -> Outcome {
    let free = so3_free(Convention::Plain);
    let h = hamiltonian_from_lagrangian(&free);
    let mut worst = 0.0f64;
    for p in sample_cloud(6, 100, 105) {
        let want = 0.5 * (0..3).map(|a| p[3 + a].powi(2) / INERTIA[a]).sum::<f64>();
        worst = worst.max((h.value(&p).unwrap() - want).abs());
    }
    let javelin = load("javelin", None).dynamics().unwrap();
    let hj = hamiltonian_from_lagrangian(&javelin);
    let mut worst_j = 0.0f64;
    for p in sample_cloud(6, 100, 106) {
        let want = -0.5 * p.iter().map(|v| v * v).sum::<f64>();
        worst_j = worst_j.max((hj.value(&p).unwrap() - want).abs());
    }
    let c1 = consistency_check(&free, &random_samples(&free, 100, 107), 1e-8);
    let c2 = consistency_check(&javelin, &random_samples(&javelin, 100, 108), 1e-8);
    ensure(
        worst < 1e-12 && worst_j < 1e-12 && c1.pass && c2.pass,
        format!(
            "rigid body {worst:.1e}, javelin {worst_j:.1e}, consistency {:.1e} / {:.1e}",
            c1.max_difference, c2.max_difference
        ),
    )
}

/// `½ zᵀAz + zᵀB u + ½ Σ cⱼ uⱼ² + dᵀz` with `A` symmetric positive definite and
/// `u` the lower coordinates.
fn random_quadratic(rng: &mut ChaCha8Rng, vars_lower: &[String], top: &[String]) -> String {
    let m = top.len();
    let r: Vec<Vec<f64>> = (0..m).map(|_| random_coeffs(rng, m)).collect();
    let mut terms = vec![];
    for a in 0..m {
        for b in 0..m {
            let rr: f64 = (0..m).map(|i| r[i][a] * r[i][b]).sum::<f64>() * 0.5 / m as f64;
            let entry = rr + if a == b { 1.0 } else { 0.0 };
            terms.push(format!("0.5*{entry}*{}*{}", top[a], top[b]));
        }
        terms.push(format!("{}*{}", rng.gen_range(-1.0..1.0), top[a]));
        for u in vars_lower {
            terms.push(format!("{}*{}*{u}", rng.gen_range(-1.0..1.0), top[a]));
        }
    }
    for u in vars_lower {
        terms.push(format!("0.5*{}*{u}^2", rng.gen_range(-1.0..1.0)));
    }
    terms.join(" + ")
}

fn legendre_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=4);
        let alg = if m == 3 && rng.gen_bool(0.5) {
            AlgebroidSpec::lie_algebra(StructureConstants::so3())
        } else {
            AlgebroidSpec::tangent(m)
        };
        let (n, m) = (alg.n_base(), alg.m_fiber());
        let conv = if rng.gen_bool(0.5) { Convention::Plain } else { Convention::Homogeneous };
        let mut lower = base_vars(n);
        lower.extend((1..k).flat_map(|w| (0..m).map(move |a| fiber_var(w, a))));
        let top: Vec<String> = (0..m).map(|a| fiber_var(k, a)).collect();
        let spec = LagrangianSpec::parse(alg, k, &random_quadratic(&mut rng, &lower, &top), conv).unwrap();
        let x = random_coeffs(&mut rng, n);
        let y = (0..k).map(|_| random_coeffs(&mut rng, m)).collect();
        let p = HigherPoint::new(x, y, conv);
        let back = inverse_legendre(&spec, &legendre(&spec, &p).unwrap(), None).unwrap();
        worst = worst.max(max_diff(&p.flat(), &back.flat()));
    }
    ensure(worst < 1e-12, format!("max round-trip error {worst:.1e}"))
}

fn reduced_jet(rng: &mut ChaCha8Rng, n: usize, g: usize, k: usize) -> ReducedJet {
    ReducedJet {
        x: (0..n).map(|_| jet(rng, 2 * k)).collect(),
        y: (0..g).map(|_| jet(rng, 2 * k - 1)).collect(),
    }
}

fn lagrange_poincare_limits() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let source = "0.5*(y1_1^2 + 2*y1_2^2) + 0.7*y2_1^2 + 0.4*y2_2*y2_3 + 0.9*y2_3^2 + 1.1*y2_4^2 + 0.3*y2_5^2 \
        + 0.2*y1_3*y1_4*x1 + 0.5*y1_5^2 + y1_3^2 + 0.3*x2*y2_4 - cos(x1) + 0.1*y1_1*y2_3";
    let mut mismatches = 0;
    for conv in [Convention::Plain, Convention::Homogeneous] {
        let spec = LagrangianSpec::parse(AlgebroidSpec::atiyah_trivial(2, StructureConstants::so3()), 2, source, conv).unwrap();
        let hamel = ReducedSystem::hamel(spec.clone()).unwrap();
        let zero = ConnectionSpec::constant(&[vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]], StructureConstants::so3()).unwrap();
        let lp = ReducedSystem::lagrange_poincare(spec, zero).unwrap();
        for _ in 0..50 {
            let j = reduced_jet(&mut rng, 2, 3, 2);
            if hamel_residual(&hamel, &j).unwrap() != lagrange_poincare_residual(&lp, &j).unwrap() {
                mismatches += 1;
            }
        }
    }

    let vars = base_vars(2);
    let e = |s: &str| parse(s, &vars).unwrap();
    let comps = vec![vec![e("-x2"), e("x1")], vec![e("x1*x2"), e("sin(x1)")]];
    let conn = ConnectionSpec::new(2, comps, StructureConstants::abelian(2)).unwrap();
    let spec = LagrangianSpec::parse(
        AlgebroidSpec::atiyah_trivial(2, StructureConstants::abelian(2)),
        2,
        "0.5*(y1_1^2 + y1_2^2) + 0.3*y2_1^2 + 0.2*y2_2^2 + y1_3^2 + 0.5*y2_3^2 + y1_3*y1_4 + 0.4*y2_4^2 + 0.1*x1*x2*y2_3",
        Convention::Homogeneous,
    )
    .unwrap();
    let sys = ReducedSystem::lagrange_poincare(spec, conn).unwrap();
    let mut lorentz = 0.0f64;
    for _ in 0..100 {
        let j = reduced_jet(&mut rng, 2, 2, 2);
        let a = lagrange_poincare_residual(&sys, &j).unwrap();
        let b = lorentz_residual(&sys, &j).unwrap();
        lorentz = lorentz.max(max_diff(&a.base, &b.base)).max(max_diff(&a.fiber, &b.fiber));
    }
    ensure(
        mismatches == 0 && lorentz < 1e-10,
        format!("zero connection: {mismatches}/100 inexact; abelian Lorentz form {lorentz:.1e}"),
    )
}

fn structure_checks() -> Outcome {
    let mut cases = vec![];
    for n in 1..=4 {
        cases.push((format!("tangent({n})"), AlgebroidSpec::tangent(n)));
    }
    cases.push(("so(3)".into(), AlgebroidSpec::lie_algebra(StructureConstants::so3())));
    cases.push(("atiyah(2, so(3))".into(), AlgebroidSpec::atiyah_trivial(2, StructureConstants::so3())));
    let vars = base_vars(2);
    let e = |s: &str| parse(s, &vars).unwrap();
    let conn = ConnectionSpec::new(2, vec![vec![e("0.3 + x2"), e("sin(x1)")], vec![e("x1*x2"), e("-0.4")], vec![e("0.2"), e("x1^2 - x2")]], StructureConstants::so3())
        .unwrap();
    cases.push(("connection frame".into(), conn.atiyah_frame()));
    let mut worst = 0.0f64;
    let mut ok = true;
    for (name, alg) in &cases {
        let samples = sample_cloud(alg.n_base(), 50, 108);
        for r in [alg.check_almost_lie(&samples, 1e-12).unwrap(), alg.check_jacobi(&samples, 1e-12).unwrap()] {
            if !r.pass {
                ok = false;
                eprintln!("{name}: {} {:e}", r.name, r.max_residual);
            }
            worst = worst.max(r.max_residual);
        }
    }

    let mut so3 = vec![(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)];
    so3.push((0, 1, 0, 0.5));
    let broken_jacobi = AlgebroidSpec::lie_algebra(StructureConstants::from_entries(3, &so3).unwrap());
    let samples = sample_cloud(0, 50, 109);
    let jacobi_flagged = !broken_jacobi.check_jacobi(&samples, 1e-12).unwrap().pass;
    let c = |v: f64| Expression::constant(v, vars.clone());
    let broken_anchor =
        AlgebroidSpec::new(2, 2, vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]], vec![(0, 1, 0, c(0.5))]).unwrap();
    let anchor_flagged = !broken_anchor.check_almost_lie(&sample_cloud(2, 50, 110), 1e-12).unwrap().pass;
    ensure(
        ok && jacobi_flagged && anchor_flagged,
        format!(
            "{} structures, max residual {worst:.1e}; corrupted Jacobi flagged: {jacobi_flagged}, corrupted anchor flagged: {anchor_flagged}",
            cases.len()
        ),
    )
}

fn weight_equivariance() -> Outcome {
    let mut worst = 0.0f64;
    let mut ok = true;
    let mut structures = vec![];
    for k in 1..=3 {
        for n in 1..=3 {
            structures.push(WeightedStructure::tangent(k, n).unwrap());
        }
        for alg in [
            AlgebroidSpec::lie_algebra(StructureConstants::so3()),
            AlgebroidSpec::lie_algebra(StructureConstants::abelian(2)),
            AlgebroidSpec::atiyah_trivial(2, StructureConstants::so3()),
        ] {
            structures.push(WeightedStructure::lie_algebroid(&alg, k).unwrap());
        }
    }
    for (i, ws) in structures.iter().enumerate() {
        let r = ws.check_equivariance(20, 110 + i as u64, 1e-12).unwrap();
        ok &= r.pass;
        worst = worst.max(r.max_residual);
    }
    ensure(ok, format!("{} structures, max relative error {worst:.1e}", structures.len()))
}

fn generic_lagrangian(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize) -> String {
    let mut terms = vec![];
    for a in 0..m {
        terms.push(format!("0.5*{}*{}^2", rng.gen_range(0.5..1.5), fiber_var(k, a)));
        for w in 1..k {
            terms.push(format!("{}*{}^2", rng.gen_range(-1.0..1.0), fiber_var(w, a)));
        }
    }
    terms.push(format!("{}*y1_1*{}", rng.gen_range(-1.0..1.0), fiber_var(k, m - 1)));
    if n > 0 {
        terms.push(format!("{}*sin(x1)*y1_1*{}", rng.gen_range(-1.0..1.0), fiber_var(k, 0)));
        terms.push("0.5*x1^2".into());
    }
    terms.join(" + ")
}

fn phase_point(traj: &Trajectory, i: usize) -> PhasePoint {
    let p = &traj.points[i];
    PhasePoint {
        x: p.x.clone(),
        y: p.y.clone(),
        pi: traj.momenta.as_ref().unwrap()[i].clone(),
        convention: traj.convention,
    }
}

fn convention_covariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let mut worst = 0.0f64;
    for alg in [
        AlgebroidSpec::tangent(2),
        AlgebroidSpec::lie_algebra(StructureConstants::so3()),
        AlgebroidSpec::atiyah_trivial(2, StructureConstants::so3()),
    ] {
        let (n, m) = (alg.n_base(), alg.m_fiber());
        for k in 1..=3 {
            let plain = LagrangianSpec::parse(alg.clone(), k, &generic_lagrangian(&mut rng, n, m, k), Convention::Plain).unwrap();
            let homog = plain.in_convention(Convention::Homogeneous);
            let fiber_scale = Convention::Homogeneous.momentum_to_plain(k, k) / Convention::Plain.momentum_to_plain(k, k);
            for _ in 0..34 {
                let y1: Vec<Jet<f64>> = (0..m).map(|_| jet(&mut rng, 2 * k - 1)).collect();
                let x0 = random_coeffs(&mut rng, n);
                let curve = CurveJet::admissible(&alg, &x0, y1).unwrap();
                let rp = plain.el_residual(&curve).unwrap();
                let rh = homog.el_residual(&curve).unwrap();
                let scaled: Vec<f64> = rh.iter().enumerate().map(|(i, v)| if i < m { v * fiber_scale } else { *v }).collect();
                worst = worst.max(max_diff(&rp, &scaled));
            }
        }
    }

    let p = simulate(&load("so3_free", None)).trajectory;
    let h = simulate(&load("so3_free", Some(Convention::Homogeneous))).trajectory;
    let mut motion = 0.0f64;
    for i in (0..p.len()).step_by(100) {
        let a = phase_point(&p, i).convert_convention(Convention::Homogeneous);
        let b = phase_point(&h, i);
        for (u, v) in a.y.iter().zip(&b.y).chain(a.pi.iter().zip(&b.pi)) {
            motion = motion.max(max_diff(u, v));
        }
    }
    ensure(
        worst < 1e-10 && motion < 1e-10,
        format!("residuals {worst:.1e}; converted so(3) trajectory {motion:.1e}"),
    )
}

fn oscillator() -> Outcome {
    let start = Instant::now();
    let traj = simulate(&load("oscillator", None)).trajectory;
    let secs = start.elapsed().as_secs_f64();
    let t = *traj.times.last().unwrap();
    let err = (traj.points.last().unwrap().x[0] - 1f64.cos()).abs();
    ensure(
        (t - 1.0).abs() < 1e-12 && err < 1e-6 && secs < 1.0,
        format!("|x(1) − cos 1| = {err:.1e} in {secs:.3} s"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("so(3) higher Euler equation", so3_higher_euler),
        ("tangent alternating sum", tangent_alternating_sum),
        ("discrete action stationarity", discrete_action_stationarity),
        ("conserved momenta", conserved_momenta),
        ("closed-form Hamiltonians", closed_form_hamiltonians),
        ("Legendre round trip", legendre_round_trip),
        ("Lagrange-Poincare limits", lagrange_poincare_limits),
        ("structure checks", structure_checks),
        ("weight equivariance", weight_equivariance),
        ("convention covariance", convention_covariance),
        ("harmonic oscillator", oscillator),
    ];
    panic::set_hook(Box::new(|info| eprintln!("{info}")));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail}", i + 1);
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
