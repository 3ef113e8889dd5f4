//! Small dense LU with partial pivoting, generic over [`Scalar`].

use crate::scalar::Scalar;

/// Condition estimates above this are treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct Singular {
    /// One-norm condition estimate; infinite for an exactly singular pivot.
    pub condition: f64,
}

/// Row-major square matrix.
#[derive(Debug, Clone)]
pub struct Matrix<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![S::zero(); n * n],
        }
    }

    pub fn from_columns(columns: Vec<Vec<S>>) -> Self {
        let n = columns.len();
        let mut m = Matrix::zeros(n);
        for (j, col) in columns.into_iter().enumerate() {
            assert_eq!(col.len(), n, "non-square matrix");
            for (i, v) in col.into_iter().enumerate() {
                m.data[i * n + j] = v;
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let n = rows.len();
        let data: Vec<S> = rows
            .into_iter()
            .flat_map(|r| {
                assert_eq!(r.len(), n, "non-square matrix");
                r
            })
            .collect();
        Matrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.n + j]
    }

    pub fn values(&self) -> Matrix<f64> {
        Matrix {
            n: self.n,
            data: self.data.iter().map(Scalar::value).collect(),
        }
    }

    /// LU factorization with row pivoting chosen on leading values.
    pub fn lu(&self) -> Result<Lu<S>, Singular> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| {
                    a[i * n + k]
                        .value()
                        .abs()
                        .total_cmp(&a[j * n + k].value().abs())
                })
                .unwrap_or(k);
            if a[p * n + k].value() == 0.0 {
                return Err(Singular {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k].clone();
            for i in k + 1..n {
                let factor = a[i * n + k].clone() / pivot.clone();
                for j in k + 1..n {
                    let update = factor.clone() * a[k * n + j].clone();
                    a[i * n + j] = a[i * n + j].clone() - update;
                }
                a[i * n + k] = factor;
            }
        }
        Ok(Lu { n, a, perm })
    }
}

impl Matrix<f64> {
    fn one_norm(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// One-norm condition number, computed through the explicit inverse.
    pub fn condition(&self) -> f64 {
        if self.n == 0 {
            return 1.0;
        }
        let Ok(lu) = self.lu() else {
            return f64::INFINITY;
        };
        let columns: Vec<Vec<f64>> = (0..self.n)
            .map(|j| {
                let mut e = vec![0.0; self.n];
                e[j] = 1.0;
                lu.solve(&e)
            })
            .collect();
        let inverse = Matrix::from_columns(columns);
        let c = self.one_norm() * inverse.one_norm();
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    }
}

pub struct Lu<S> {
    n: usize,
    a: Vec<S>,
    perm: Vec<usize>,
}

impl<S: Scalar> Lu<S> {
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.n;
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] = x[i].clone() - self.a[i * n + j].clone() * x[j].clone();
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] = x[i].clone() - self.a[i * n + j].clone() * x[j].clone();
            }
            x[i] = x[i].clone() / self.a[i * n + i].clone();
        }
        x
    }
}

/// Solves `A x = b`, refusing matrices whose condition estimate exceeds
/// [`CONDITION_LIMIT`].
pub fn solve_checked<S: Scalar>(a: &Matrix<S>, b: &[S]) -> Result<Vec<S>, Singular> {
    let condition = a.values().condition();
    if !(condition <= CONDITION_LIMIT) {
        return Err(Singular { condition });
    }
    Ok(a.lu()?.solve(b))
}
