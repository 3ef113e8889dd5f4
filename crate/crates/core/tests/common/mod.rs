//! Oracles shared by the integration tests. None of them use the library's
//! momenta, residuals or jets: the action oracle needs only `L`, `ρ` and `C`,
//! and the Taylor type below is a separate implementation.

#![allow(dead_code)]

use std::ops::{Add, Mul, Neg, Sub};

use graded_mechanics::algebroid::AlgebroidSpec;
use graded_mechanics::lagrange::{LagrangianSpec, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Truncated Taylor series with coefficients `f⁽ⁱ⁾/i!`, all of one length.
#[derive(Clone, Debug)]
pub struct Taylor(pub Vec<f64>);

impl Taylor {
    pub fn constant(v: f64, len: usize) -> Self {
        let mut c = vec![0.0; len];
        c[0] = v;
        Taylor(c)
    }

    pub fn derivative(&self) -> Self {
        let mut c: Vec<f64> = (1..self.0.len()).map(|i| self.0[i] * i as f64).collect();
        c.push(0.0);
        Taylor(c)
    }

    pub fn nth(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |t, _| t.derivative())
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    pub fn scale(&self, s: f64) -> Self {
        Taylor(self.0.iter().map(|v| v * s).collect())
    }

    pub fn powi(&self, n: u32) -> Self {
        (1..n).fold(self.clone(), |acc, _| acc * self.clone())
    }

    /// `(sin, cos)` by the coupled recurrences.
    pub fn sin_cos(&self) -> (Self, Self) {
        let a = &self.0;
        let len = a.len();
        let mut s = vec![0.0; len];
        let mut c = vec![0.0; len];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..len {
            let (mut sk, mut ck) = (0.0, 0.0);
            for j in 1..=k {
                sk += j as f64 * a[j] * c[k - j];
                ck -= j as f64 * a[j] * s[k - j];
            }
            s[k] = sk / k as f64;
            c[k] = ck / k as f64;
        }
        (Taylor(s), Taylor(c))
    }
}

impl Add for Taylor {
    type Output = Taylor;
    fn add(self, r: Taylor) -> Taylor {
        Taylor(self.0.iter().zip(&r.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for Taylor {
    type Output = Taylor;
    fn sub(self, r: Taylor) -> Taylor {
        Taylor(self.0.iter().zip(&r.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}

impl Mul for Taylor {
    type Output = Taylor;
    fn mul(self, r: Taylor) -> Taylor {
        let len = self.0.len();
        Taylor(
            (0..len)
                .map(|k| (0..=k).map(|j| self.0[j] * r.0[k - j]).sum())
                .collect(),
        )
    }
}

pub fn random_coeffs(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Central difference weights for derivative `d` (0..=3) on a 7-point
/// stencil, accurate to `O(h⁴)`.
fn stencil(d: usize) -> [f64; 7] {
    match d {
        0 => [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        1 => [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
        2 => [1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0],
        3 => [1.0 / 8.0, -1.0, 13.0 / 8.0, 0.0, -13.0 / 8.0, 1.0, -1.0 / 8.0],
        _ => panic!("derivative order {d} not tabulated"),
    }
}

/// `Σ h L` over interior nodes, with the weight-`w` fiber coordinates
/// obtained from `ys` (weight one) by finite differences in the spec's
/// convention.
pub fn discrete_action(spec: &LagrangianSpec, h: f64, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    let k = spec.order();
    let conv = spec.convention();
    let mut total = 0.0;
    for i in 3..xs.len() - 3 {
        let mut flat = xs[i].clone();
        for w in 1..=k {
            let weights = stencil(w - 1);
            let scale = 1.0 / (h.powi(w as i32 - 1) * conv.to_plain(w));
            for a in 0..ys[i].len() {
                let d: f64 = (0..7).map(|s| weights[s] * ys[i + s - 3][a]).sum();
                flat.push(d * scale);
            }
        }
        total += h * spec.lagrangian().eval(&flat).unwrap();
    }
    total
}

/// A smooth bump supported on `|t − center| < width`.
fn bump(t: f64, center: f64, width: f64) -> (f64, f64) {
    let s = (t - center) / width;
    if s.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - s * s;
    (q.powi(8), 8.0 * q.powi(7) * (-2.0 * s) / width)
}

/// Applies the variation generated by `η(t) = amp·bump(t)`:
/// `δx = ρ(x)η`, `δY = η̇ + C(x)(Y, η)`.
fn varied(
    alg: &AlgebroidSpec,
    times: &[f64],
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    amp: &[f64],
    center: f64,
    width: f64,
    delta: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = amp.len();
    let mut vx = Vec::with_capacity(xs.len());
    let mut vy = Vec::with_capacity(ys.len());
    for ((t, x), y) in times.iter().zip(xs).zip(ys) {
        let (b, db) = bump(*t, center, width);
        let eta: Vec<f64> = amp.iter().map(|a| a * b).collect();
        let rho = alg.anchor_at(x).unwrap();
        let c = alg.structure_at(x).unwrap();
        vx.push(
            x.iter()
                .enumerate()
                .map(|(big_a, xa)| xa + delta * (0..m).map(|j| rho[big_a][j] * eta[j]).sum::<f64>())
                .collect(),
        );
        vy.push(
            (0..m)
                .map(|kk| {
                    let mut d = amp[kk] * db;
                    for i in 0..m {
                        for j in 0..m {
                            d += c.get(i, j, kk) * y[i] * eta[j];
                        }
                    }
                    y[kk] + delta * d
                })
                .collect(),
        );
    }
    (vx, vy)
}

/// Largest `|S(+δ) − S(−δ)| / (2δ)` over `count` random admissible
/// variations supported inside the trajectory.
pub fn action_stationarity(spec: &LagrangianSpec, traj: &Trajectory, delta: f64, count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = traj.step;
    let xs: Vec<Vec<f64>> = traj.points.iter().map(|p| p.x.clone()).collect();
    let ys: Vec<Vec<f64>> = traj.points.iter().map(|p| p.y[0].clone()).collect();
    let t_end = *traj.times.last().unwrap();
    let alg = spec.algebroid();
    let mut worst = 0.0f64;
    for _ in 0..count {
        let amp = random_coeffs(&mut rng, spec.m_fiber());
        let width = rng.gen_range(0.15..0.3) * t_end;
        let center = rng.gen_range(width + 0.01 * t_end..t_end - width - 0.01 * t_end);
        let (px, py) = varied(alg, &traj.times, &xs, &ys, &amp, center, width, delta);
        let (mx, my) = varied(alg, &traj.times, &xs, &ys, &amp, center, width, -delta);
        let d = (discrete_action(spec, h, &px, &py) - discrete_action(spec, h, &mx, &my)) / (2.0 * delta);
        worst = worst.max(d.abs());
    }
    worst
}
