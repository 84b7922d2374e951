//! Direct tridiagonal solve (Thomas algorithm).

use crate::error::{Error, Result};

/// Row `i` reads `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`;
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Solves without pivoting; `context` labels the error on a zero pivot.
    pub fn solve(&self, context: &str) -> Result<Vec<f64>> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let lower = if i > 0 { self.lower[i] } else { 0.0 };
            let (c_prev, d_prev) = if i > 0 {
                (c[i - 1], d[i - 1])
            } else {
                (0.0, 0.0)
            };
            let pivot = self.diag[i] - lower * c_prev;
            let scale = self.diag[i].abs() + lower.abs() + self.upper[i].abs();
            if !pivot.is_finite() || pivot.abs() <= 1e-300 || pivot.abs() <= 1e-15 * scale {
                return Err(Error::SingularSystem {
                    context: context.to_string(),
                    row: i,
                    pivot,
                });
            }
            c[i] = if i + 1 < n {
                self.upper[i] / pivot
            } else {
                0.0
            };
            d[i] = (self.rhs[i] - lower * d_prev) / pivot;
        }
        let mut x = d;
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "tridiagonal solution ({context})"
            )));
        }
        Ok(x)
    }

    /// Largest `|A x - b|_i / (|A| |x| + |b|)_i`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut ax = self.diag[i] * x[i];
                let mut scale = (self.diag[i] * x[i]).abs();
                if i > 0 {
                    ax += self.lower[i] * x[i - 1];
                    scale += (self.lower[i] * x[i - 1]).abs();
                }
                if i + 1 < n {
                    ax += self.upper[i] * x[i + 1];
                    scale += (self.upper[i] * x[i + 1]).abs();
                }
                scale += self.rhs[i].abs();
                if scale == 0.0 {
                    0.0
                } else {
                    (ax - self.rhs[i]).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let t = Tridiagonal {
            lower: vec![0.0, -1.0, -1.0],
            diag: vec![2.0, 2.0, 2.0],
            upper: vec![-1.0, -1.0, 0.0],
            rhs: vec![1.0, 0.0, 1.0],
        };
        let x = t.solve("test").unwrap();
        for v in &x {
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert!(t.relative_residual(&x) < 1e-16);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let t = Tridiagonal {
            lower: vec![0.0, 1.0],
            diag: vec![1.0, 1.0],
            upper: vec![1.0, 0.0],
            rhs: vec![1.0, 1.0],
        };
        match t.solve("unit") {
            Err(Error::SingularSystem { row, .. }) => assert_eq!(row, 1),
            other => panic!("expected singular, got {other:?}"),
        }
    }
}
