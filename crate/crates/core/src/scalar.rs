//! The scalar abstraction shared by plain floats and Taylor jets.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{Float, One, Zero};

/// Arithmetic needed by the expression evaluator and everything built on it.
///
/// Implemented for `f64`, `f32` and [`Jet<S>`](crate::Jet) for any `S: Scalar`,
/// so jets nest to give mixed partial derivatives.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;

    /// The leading real value (the constant coefficient for jets).
    fn value(&self) -> f64;

    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;

    fn scale(&self, factor: f64) -> Self {
        self.clone() * Self::from_f64(factor)
    }

    fn powi(&self, n: u32) -> Self {
        let mut result = Self::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result * base.clone();
            }
            n >>= 1;
            if n > 0 {
                base = base.clone() * base;
            }
        }
        result
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            fn value(&self) -> f64 {
                *self as f64
            }
            fn sin(&self) -> Self {
                Float::sin(*self)
            }
            fn cos(&self) -> Self {
                Float::cos(*self)
            }
            fn exp(&self) -> Self {
                Float::exp(*self)
            }
            fn ln(&self) -> Self {
                Float::ln(*self)
            }
            fn sqrt(&self) -> Self {
                Float::sqrt(*self)
            }
            fn scale(&self, factor: f64) -> Self {
                *self * factor as $t
            }
            fn powi(&self, n: u32) -> Self {
                Float::powi(*self, n as i32)
            }
        }
    };
}

float_scalar!(f64);
float_scalar!(f32);

/// Lifts a slice of reals into any scalar type.
pub fn lift<S: Scalar>(values: &[f64]) -> Vec<S> {
    values.iter().map(|&v| S::from_f64(v)).collect()
}

/// Leading values of a slice of scalars.
pub fn values<S: Scalar>(xs: &[S]) -> Vec<f64> {
    xs.iter().map(Scalar::value).collect()
}

/// Dot product over scalars.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}
