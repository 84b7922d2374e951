//! Anderson acceleration of a fixed-point map `x -> g(x)`.

use std::collections::VecDeque;

/// Mixing state for one fixed-point iteration.
#[derive(Debug, Clone)]
pub struct Anderson {
    depth: usize,
    iterates: VecDeque<Vec<f64>>,
    residuals: VecDeque<Vec<f64>>,
}

impl Anderson {
    /// `depth = 0` reproduces the plain iteration.
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            iterates: VecDeque::new(),
            residuals: VecDeque::new(),
        }
    }

    pub fn reset(&mut self) {
        self.iterates.clear();
        self.residuals.clear();
    }

    /// Next iterate from the current one `x` and its image `gx`. Falls back
    /// to `gx` (and forgets the history) if the mixed iterate is not positive.
    pub fn next(&mut self, x: &[f64], gx: &[f64]) -> Vec<f64> {
        if self.depth == 0 {
            return gx.to_vec();
        }
        let f: Vec<f64> = gx.iter().zip(x).map(|(g, x)| g - x).collect();
        self.iterates.push_back(x.to_vec());
        self.residuals.push_back(f);
        while self.iterates.len() > self.depth + 1 {
            self.iterates.pop_front();
            self.residuals.pop_front();
        }
        let k = self.iterates.len();
        if k < 2 {
            return gx.to_vec();
        }
        let diff = |v: &VecDeque<Vec<f64>>, i: usize| -> Vec<f64> {
            v[i + 1].iter().zip(&v[i]).map(|(a, b)| a - b).collect()
        };
        let d_f: Vec<Vec<f64>> = (0..k - 1).map(|i| diff(&self.residuals, i)).collect();
        let d_x: Vec<Vec<f64>> = (0..k - 1).map(|i| diff(&self.iterates, i)).collect();
        let gamma = least_squares(&d_f, &self.residuals[k - 1]);
        let mut out = gx.to_vec();
        for (c, (dx, df)) in gamma.iter().zip(d_x.iter().zip(&d_f)) {
            for (o, (a, b)) in out.iter_mut().zip(dx.iter().zip(df)) {
                *o -= c * (a + b);
            }
        }
        if out.iter().all(|v| v.is_finite() && *v > 0.0) {
            out
        } else {
            self.reset();
            gx.to_vec()
        }
    }
}

/// `argmin |b - A c|` for the columns `a` by modified Gram-Schmidt, dropping
/// columns that are numerically dependent on earlier ones.
fn least_squares(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r = vec![vec![0.0; n]; n];
    let mut kept = Vec::with_capacity(n);
    for (j, col) in a.iter().enumerate() {
        let norm0 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = col.clone();
        for (i, qi) in q.iter().enumerate() {
            let d: f64 = qi.iter().zip(&v).map(|(x, y)| x * y).sum();
            r[i][j] = d;
            for (vv, qq) in v.iter_mut().zip(qi) {
                *vv -= d * qq;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 * norm0 && norm > 0.0 {
            r[q.len()][j] = norm;
            q.push(v.into_iter().map(|x| x / norm).collect());
            kept.push(j);
        }
    }
    // R restricted to the kept columns is upper triangular
    let m = kept.len();
    let qtb: Vec<f64> = q
        .iter()
        .map(|qi| qi.iter().zip(b).map(|(x, y)| x * y).sum())
        .collect();
    let mut c = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|l| r[i][kept[l]] * c[l]).sum();
        c[i] = (qtb[i] - s) / r[i][kept[i]];
    }
    let mut gamma = vec![0.0; n];
    for (i, &j) in kept.iter().enumerate() {
        gamma[j] = c[i];
    }
    gamma
}
