//! Angular quadrature, spatial mesh and time-step schedule.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
///
/// Newton iteration on `P_n` from Chebyshev initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (_, d) = legendre_and_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Discrete-ordinates set: direction cosines and weights summing to 2.
///
/// Directions are ordered with the negative block first (descending `|mu|`)
/// followed by the positive block (ascending `mu`), i.e. `mu` is ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularQuadrature {
    mu: Vec<f64>,
    weights: Vec<f64>,
}

impl AngularQuadrature {
    /// Double Gauss-Legendre set: an `order_per_half`-point rule mapped onto
    /// each half-range `(0, 1)` and `(-1, 0)`.
    pub fn double_gauss(order_per_half: usize) -> Result<Self> {
        if order_per_half == 0 {
            return Err(Error::invalid("double-Gauss order must be >= 1"));
        }
        let (x, w) = gauss_legendre(order_per_half);
        let half_mu: Vec<f64> = x.iter().map(|x| 0.5 * (1.0 + x)).collect();
        let half_w: Vec<f64> = w.iter().map(|w| 0.5 * w).collect();
        let mut mu = Vec::with_capacity(2 * order_per_half);
        let mut weights = Vec::with_capacity(2 * order_per_half);
        for i in (0..order_per_half).rev() {
            mu.push(-half_mu[i]);
            weights.push(half_w[i]);
        }
        mu.extend_from_slice(&half_mu);
        weights.extend_from_slice(&half_w);
        Ok(Self { mu, weights })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_m w_m mu_m^k`.
    pub fn moment(&self, k: i32) -> f64 {
        self.mu
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w * m.powi(k))
            .sum()
    }
}

/// 1D slab mesh of `J` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    dx: Vec<f64>,
    edges: Vec<f64>,
}

impl SpatialMesh {
    pub fn new(dx: Vec<f64>) -> Result<Self> {
        if dx.is_empty() {
            return Err(Error::invalid("mesh needs at least one cell"));
        }
        if let Some(bad) = dx.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return Err(Error::invalid(format!(
                "cell widths must be positive, got {bad}"
            )));
        }
        let mut edges = Vec::with_capacity(dx.len() + 1);
        edges.push(0.0);
        let mut x = 0.0;
        for d in &dx {
            x += d;
            edges.push(x);
        }
        Ok(Self { dx, edges })
    }

    pub fn uniform(length: f64, cells: usize) -> Result<Self> {
        if !(length > 0.0) || cells == 0 {
            return Err(Error::invalid(format!(
                "uniform mesh needs positive length and cells, got {length}, {cells}"
            )));
        }
        let mut mesh = Self::new(vec![length / cells as f64; cells])?;
        // pin the right edge exactly
        *mesh.edges.last_mut().unwrap() = length;
        Ok(mesh)
    }

    pub fn num_cells(&self) -> usize {
        self.dx.len()
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn length(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }
}

/// Time-step schedule starting at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    steps: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !(t_end >= t0) {
            return Err(Error::invalid(format!(
                "time grid needs dt > 0 and t_end >= t0, got dt={dt}, [{t0}, {t_end}]"
            )));
        }
        let n = ((t_end - t0) / dt - 1e-9).ceil().max(0.0) as usize;
        Ok(Self {
            t0,
            steps: vec![dt; n],
        })
    }

    pub fn from_steps(t0: f64, steps: Vec<f64>) -> Result<Self> {
        if let Some(bad) = steps.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return Err(Error::invalid(format!(
                "time steps must be positive, got {bad}"
            )));
        }
        Ok(Self { t0, steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    /// Time at the end of step `n` (1-based); `time_at(0)` is `t0`.
    pub fn time_at(&self, n: usize) -> f64 {
        self.t0 + self.steps[..n].iter().sum::<f64>()
    }

    pub fn t_end(&self) -> f64 {
        self.time_at(self.steps.len())
    }
}
