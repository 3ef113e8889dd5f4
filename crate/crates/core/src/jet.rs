//! Truncated Taylor series in one parameter.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{One, Zero};
use smallvec::SmallVec;

use crate::scalar::Scalar;

type Coeffs<S> = SmallVec<[S; 4]>;

/// A truncated Taylor series `Σ cᵢ tⁱ` with normalized coefficients
/// `cᵢ = f⁽ⁱ⁾/i!`.
///
/// Coefficients past the stored length are exact zeros, so constants are
/// one-coefficient jets and mix freely with jets of any order. The order of
/// a result is the largest order among its operands.
#[derive(Clone, PartialEq)]
pub struct Jet<S> {
    coeffs: Coeffs<S>,
}

impl<S: Scalar> Jet<S> {
    pub fn constant(value: S) -> Self {
        let mut coeffs = Coeffs::new();
        coeffs.push(value);
        Jet { coeffs }
    }

    /// The jet of the identity map `t ↦ value + t` truncated at `order`.
    pub fn variable(value: S, order: usize) -> Self {
        let mut jet = Jet::constant(value);
        if order >= 1 {
            jet.coeffs.push(S::one());
            jet.coeffs.extend((2..=order).map(|_| S::zero()));
        }
        jet
    }

    /// Builds a jet from normalized coefficients. An empty list is zero.
    pub fn from_coeffs(coeffs: impl IntoIterator<Item = S>) -> Self {
        let mut coeffs: Coeffs<S> = coeffs.into_iter().collect();
        if coeffs.is_empty() {
            coeffs.push(S::zero());
        }
        Jet { coeffs }
    }

    /// Builds a jet from derivative values `f, f', f'', …`.
    pub fn from_derivatives(derivs: impl IntoIterator<Item = S>) -> Self {
        let mut factorial = 1.0;
        Jet::from_coeffs(derivs.into_iter().enumerate().map(|(i, d)| {
            if i > 1 {
                factorial *= i as f64;
            }
            d.scale(1.0 / factorial)
        }))
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    /// Normalized coefficient `i`; zero past the stored length.
    pub fn coeff(&self, i: usize) -> S {
        self.coeffs.get(i).cloned().unwrap_or_else(S::zero)
    }

    /// The `i`-th derivative at the expansion point.
    pub fn derivative_value(&self, i: usize) -> S {
        let factorial: f64 = (1..=i).map(|j| j as f64).product();
        self.coeff(i).scale(factorial)
    }

    pub fn head(&self) -> &S {
        &self.coeffs[0]
    }

    /// Derivative with respect to the series parameter; the order drops by one.
    pub fn derivative(&self) -> Self {
        Jet::from_coeffs(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c.scale(i as f64)),
        )
    }

    /// Repeated [`derivative`](Self::derivative).
    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |j, _| j.derivative())
    }

    /// Antiderivative with the given constant term; the order rises by one.
    pub fn integral(&self, constant: S) -> Self {
        let mut coeffs = Coeffs::with_capacity(self.coeffs.len() + 1);
        coeffs.push(constant);
        coeffs.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c.scale(1.0 / (i + 1) as f64)),
        );
        Jet { coeffs }
    }

    /// Drops coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        Jet::from_coeffs(self.coeffs.iter().take(order + 1).cloned())
    }

    /// Evaluates the polynomial at parameter `t`.
    pub fn eval_at(&self, t: f64) -> S {
        self.coeffs
            .iter()
            .rev()
            .fold(S::zero(), |acc, c| acc.scale(t) + c.clone())
    }

    fn len_with(&self, other: &Self) -> usize {
        self.coeffs.len().max(other.coeffs.len())
    }

    fn map(&self, f: impl Fn(&S) -> S) -> Self {
        Jet {
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    fn sin_cos(&self) -> (Self, Self) {
        let n = self.coeffs.len();
        let a = &self.coeffs;
        let mut s: Coeffs<S> = Coeffs::with_capacity(n);
        let mut c: Coeffs<S> = Coeffs::with_capacity(n);
        s.push(a[0].sin());
        c.push(a[0].cos());
        for k in 1..n {
            let mut sk = S::zero();
            let mut ck = S::zero();
            for j in 1..=k {
                let ja = a[j].scale(j as f64);
                sk = sk + ja.clone() * c[k - j].clone();
                ck = ck - ja * s[k - j].clone();
            }
            s.push(sk.scale(1.0 / k as f64));
            c.push(ck.scale(1.0 / k as f64));
        }
        (Jet { coeffs: s }, Jet { coeffs: c })
    }
}

impl<S: Scalar> fmt::Debug for Jet<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coeffs.iter()).finish()
    }
}

impl<S: Scalar> Add for Jet<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let n = self.len_with(&rhs);
        Jet {
            coeffs: (0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect(),
        }
    }
}

impl<S: Scalar> Sub for Jet<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let n = self.len_with(&rhs);
        Jet {
            coeffs: (0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect(),
        }
    }
}

impl<S: Scalar> Neg for Jet<S> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|c| -c.clone())
    }
}

impl<S: Scalar> Mul for Jet<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (la, lb) = (self.coeffs.len(), rhs.coeffs.len());
        if la == 1 {
            let a = &self.coeffs[0];
            return rhs.map(|b| a.clone() * b.clone());
        }
        if lb == 1 {
            let b = &rhs.coeffs[0];
            return self.map(|a| a.clone() * b.clone());
        }
        let n = la.max(lb);
        let coeffs = (0..n)
            .map(|k| {
                let lo = k.saturating_sub(lb - 1);
                let hi = k.min(la - 1);
                (lo..=hi).fold(S::zero(), |acc, i| {
                    acc + self.coeffs[i].clone() * rhs.coeffs[k - i].clone()
                })
            })
            .collect();
        Jet { coeffs }
    }
}

impl<S: Scalar> Div for Jet<S> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let lb = rhs.coeffs.len();
        if lb == 1 {
            let b = &rhs.coeffs[0];
            return self.map(|a| a.clone() / b.clone());
        }
        let n = self.len_with(&rhs);
        let b0 = rhs.coeffs[0].clone();
        let mut q: Coeffs<S> = Coeffs::with_capacity(n);
        for k in 0..n {
            let mut acc = self.coeff(k);
            for j in 1..=k.min(lb - 1) {
                acc = acc - rhs.coeffs[j].clone() * q[k - j].clone();
            }
            q.push(acc / b0.clone());
        }
        Jet { coeffs: q }
    }
}

impl<S: Scalar> Zero for Jet<S> {
    fn zero() -> Self {
        Jet::constant(S::zero())
    }
    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.value() == 0.0 && c.is_zero())
    }
}

impl<S: Scalar> One for Jet<S> {
    fn one() -> Self {
        Jet::constant(S::one())
    }
}

impl<S: Scalar> Scalar for Jet<S> {
    fn from_f64(v: f64) -> Self {
        Jet::constant(S::from_f64(v))
    }

    fn value(&self) -> f64 {
        self.coeffs[0].value()
    }

    fn sin(&self) -> Self {
        self.sin_cos().0
    }

    fn cos(&self) -> Self {
        self.sin_cos().1
    }

    fn exp(&self) -> Self {
        let a = &self.coeffs;
        let mut e: Coeffs<S> = Coeffs::with_capacity(a.len());
        e.push(a[0].exp());
        for k in 1..a.len() {
            let sum = (1..=k).fold(S::zero(), |acc, j| {
                acc + a[j].scale(j as f64) * e[k - j].clone()
            });
            e.push(sum.scale(1.0 / k as f64));
        }
        Jet { coeffs: e }
    }

    fn ln(&self) -> Self {
        let a = &self.coeffs;
        let mut l: Coeffs<S> = Coeffs::with_capacity(a.len());
        l.push(a[0].ln());
        for k in 1..a.len() {
            let sum = (1..k).fold(S::zero(), |acc, j| {
                acc + l[j].scale(j as f64) * a[k - j].clone()
            });
            l.push((a[k].clone() - sum.scale(1.0 / k as f64)) / a[0].clone());
        }
        Jet { coeffs: l }
    }

    fn sqrt(&self) -> Self {
        let a = &self.coeffs;
        let mut r: Coeffs<S> = Coeffs::with_capacity(a.len());
        r.push(a[0].sqrt());
        for k in 1..a.len() {
            let sum = (1..k).fold(S::zero(), |acc, j| acc + r[j].clone() * r[k - j].clone());
            r.push((a[k].clone() - sum) / r[0].scale(2.0));
        }
        Jet { coeffs: r }
    }

    fn scale(&self, factor: f64) -> Self {
        self.map(|c| c.scale(factor))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    type J = Jet<f64>;

    fn close(a: &J, b: &[f64]) {
        assert_eq!(a.coeffs().len(), b.len(), "{a:?} vs {b:?}");
        for (x, y) in a.coeffs().iter().zip(b) {
            assert_relative_eq!(*x, *y, epsilon = 1e-14, max_relative = 1e-12);
        }
    }

    #[test]
    fn exp_series() {
        let t = J::variable(0.0, 3);
        close(&t.exp(), &[1.0, 1.0, 0.5, 1.0 / 6.0]);
    }

    #[test]
    fn square_derivative() {
        let t = J::variable(1.0, 1);
        close(&(t.clone() * t), &[1.0, 2.0]);
    }

    #[test]
    fn sin_cos_series() {
        let t = J::variable(0.0, 4);
        close(&t.sin(), &[0.0, 1.0, 0.0, -1.0 / 6.0, 0.0]);
        close(&t.cos(), &[1.0, 0.0, -0.5, 0.0, 1.0 / 24.0]);
    }

    #[test]
    fn log_inverts_exp() {
        let t = J::from_coeffs([0.3, -1.2, 0.7, 2.0]);
        let back = t.exp().ln();
        close(&back, t.coeffs());
    }

    #[test]
    fn sqrt_squares_back() {
        let t = J::from_coeffs([2.0, 0.4, -1.0, 0.25]);
        let r = t.sqrt();
        close(&(r.clone() * r), t.coeffs());
    }

    #[test]
    fn division_inverts_product() {
        let a = J::from_coeffs([1.5, -0.3, 0.2, 0.9]);
        let b = J::from_coeffs([0.7, 1.1, -0.4, 0.3]);
        close(&((a.clone() * b.clone()) / b), a.coeffs());
    }

    #[test]
    fn constants_mix_with_jets() {
        let t = J::variable(2.0, 2);
        close(&(t.clone() * J::from_f64(3.0) + J::from_f64(1.0)), &[7.0, 3.0, 0.0]);
    }

    #[test]
    fn derivative_and_integral() {
        let p = J::from_coeffs([1.0, 2.0, 3.0, 4.0]);
        close(&p.derivative(), &[2.0, 6.0, 12.0]);
        close(&p.derivative().integral(1.0), p.coeffs());
        assert_eq!(p.derivative_value(3), 24.0);
    }

    #[test]
    fn nested_jets_give_mixed_partials() {
        // f(x, y) = x² y at (2, 3): ∂²f/∂x∂y = 2x = 4.
        let x = Jet::variable(Jet::constant(2.0), 1);
        let y = Jet::constant(Jet::variable(3.0, 1));
        let f = x.clone() * x * y;
        assert_eq!(f.coeff(1).coeff(1), 4.0);
        assert_eq!(f.coeff(1).coeff(0), 12.0);
    }

    #[test]
    fn order_zero_is_plain_arithmetic() {
        let a = J::constant(1.3);
        let b = J::constant(-0.4);
        assert_eq!((a.clone() / b.clone()).value(), 1.3 / -0.4);
        assert_eq!(a.sin().value(), 1.3f64.sin());
        assert_eq!((a * b).value(), 1.3 * -0.4);
    }

    #[test]
    fn f32_jets() {
        let t = Jet::<f32>::variable(0.5, 2);
        let sq = t.clone() * t;
        assert_eq!(sq.coeffs(), &[0.25f32, 1.0, 1.0]);
    }
}
