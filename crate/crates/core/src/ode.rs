//! Fixed-step classical Runge–Kutta.

use crate::error::{Error, Result};

/// Number of steps of size `h` covering `[0, t_end]`; `t_end` must be a whole
/// multiple of `h`.
pub fn step_count(t_end: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::Unsupported(format!(
            "need h > 0 and finite t_end ≥ 0, got h = {h}, t_end = {t_end}"
        )));
    }
    let steps = (t_end / h).round();
    if (steps * h - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::Unsupported(format!(
            "t_end = {t_end} is not a whole number of steps h = {h}"
        )));
    }
    Ok(steps as usize)
}

/// Runs `steps` RK4 steps from `s0`. Returns every state reached and, if the
/// run stopped early, the reason.
pub fn rk4<F>(f: F, s0: &[f64], h: f64, steps: usize) -> (Vec<Vec<f64>>, Option<Error>)
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let axpy = |a: &[f64], b: &[f64], c: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + c * y).collect() };
    let step = |s: &[f64]| -> Result<Vec<f64>> {
        let k1 = f(s)?;
        let k2 = f(&axpy(s, &k1, h / 2.0))?;
        let k3 = f(&axpy(s, &k2, h / 2.0))?;
        let k4 = f(&axpy(s, &k3, h))?;
        Ok((0..s.len())
            .map(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect())
    };
    let mut states = Vec::with_capacity(steps + 1);
    states.push(s0.to_vec());
    for i in 0..steps {
        let current = states.last().expect("non-empty");
        match step(current) {
            Ok(next) if next.iter().all(|v| v.is_finite()) => states.push(next),
            Ok(_) => return (states, Some(Error::NonFinite { t: (i + 1) as f64 * h })),
            Err(e) => return (states, Some(e)),
        }
    }
    (states, None)
}
