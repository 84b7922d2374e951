//! Low-rank storage of the previous-step intensity.
//!
//! A group's cell-average intensity is a `J x M` matrix (rows are cells,
//! columns are directions). It is kept either in full, as a rank-`r`
//! truncated SVD of the whole matrix, or as a rank-`r` truncated SVD of the
//! remainder left after subtracting a P2 angular expansion built from its
//! first three angular moments.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::quadrature::AngularQuadrature;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data has {} entries, expected {rows} x {cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds the `J x M` matrix from direction-major storage (`m * J + j`).
    pub fn from_direction_major(values: &[f64], cells: usize, dirs: usize) -> Result<Self> {
        if values.len() != cells * dirs {
            return Err(Error::invalid(format!(
                "intensity has {} entries, expected {cells} x {dirs}",
                values.len()
            )));
        }
        let mut m = Self::zeros(cells, dirs);
        for d in 0..dirs {
            for j in 0..cells {
                m.data[j * dirs + d] = values[d * cells + j];
            }
        }
        Ok(m)
    }

    pub fn to_direction_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.data.len()];
        for j in 0..self.rows {
            for d in 0..self.cols {
                out[d * self.rows + j] = self.data[j * self.cols + d];
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self - other`.
    pub fn minus(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::GridMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self { data, ..*self })
    }
}

/// Thin SVD `A = U diag(sigma) V^T` with singular values descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    /// `rows x k`
    pub u: Matrix,
    pub sigma: Vec<f64>,
    /// `cols x k`
    pub v: Matrix,
}

/// Thin SVD by one-sided Jacobi rotations, `k = min(rows, cols)`.
///
/// Singular vectors are sign-normalized so the first significant entry of
/// each right vector is positive. Left vectors belonging to zero singular
/// values are completed to an orthonormal set.
pub fn svd_reduced(a: &Matrix) -> Svd {
    if a.rows < a.cols {
        let t = svd_reduced(&a.transpose());
        let mut out = Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
        normalize_signs(&mut out);
        return out;
    }
    let (m, n) = (a.rows, a.cols);
    // columns of `w` converge to U Sigma, `v` accumulates the rotations
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|c| (0..m).map(|r| a.get(r, c)).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|c| (0..n).map(|r| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = w[p].iter().map(|x| x * x).sum();
                let beta: f64 = w[q].iter().map(|x| x * x).sum();
                let gamma: f64 = w[p].iter().zip(&w[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (wp, wq) = pair_mut(&mut w, p, q);
                for (x, y) in wp.iter_mut().zip(wq.iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
                let (vp, vq) = pair_mut(&mut v, p, q);
                for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = w
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let mut u = Matrix::zeros(m, n);
    let mut vm = Matrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let tiny = norms.iter().cloned().fold(0.0, f64::max) * 1e-300_f64.max(f64::EPSILON * 1e-3);
    let mut filled: Vec<Vec<f64>> = Vec::new();
    for (k, &src) in order.iter().enumerate() {
        let s = norms[src];
        for r in 0..n {
            vm.set(r, k, v[src][r]);
        }
        let col: Vec<f64> = if s > tiny && s > 0.0 {
            sigma.push(s);
            w[src].iter().map(|x| x / s).collect()
        } else {
            sigma.push(0.0);
            complete_basis(&filled, m)
        };
        for r in 0..m {
            u.set(r, k, col[r]);
        }
        filled.push(col);
    }
    let mut out = Svd { u, sigma, v: vm };
    normalize_signs(&mut out);
    out
}

fn pair_mut(cols: &mut [Vec<f64>], p: usize, q: usize) -> (&mut Vec<f64>, &mut Vec<f64>) {
    let (lo, hi) = cols.split_at_mut(q);
    (&mut lo[p], &mut hi[0])
}

/// Unit vector orthogonal to `existing` (Gram-Schmidt on coordinate axes).
fn complete_basis(existing: &[Vec<f64>], len: usize) -> Vec<f64> {
    let mut best = vec![0.0; len];
    let mut best_norm = -1.0;
    for axis in 0..len {
        let mut cand = vec![0.0; len];
        cand[axis] = 1.0;
        for _ in 0..2 {
            for e in existing {
                let d: f64 = cand.iter().zip(e).map(|(a, b)| a * b).sum();
                for (c, x) in cand.iter_mut().zip(e) {
                    *c -= d * x;
                }
            }
        }
        let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > best_norm {
            best_norm = norm;
            best = cand;
        }
        if norm > 0.5 {
            break;
        }
    }
    best.iter().map(|x| x / best_norm).collect()
}

fn normalize_signs(svd: &mut Svd) {
    let k = svd.sigma.len();
    for l in 0..k {
        let col_max = (0..svd.v.rows).fold(0.0, |m: f64, r| m.max(svd.v.get(r, l).abs()));
        let first = (0..svd.v.rows)
            .map(|r| svd.v.get(r, l))
            .find(|x| x.abs() > 1e-8 * col_max);
        if matches!(first, Some(x) if x < 0.0) {
            for r in 0..svd.v.rows {
                let x = svd.v.get(r, l);
                svd.v.set(r, l, -x);
            }
            for r in 0..svd.u.rows {
                let x = svd.u.get(r, l);
                svd.u.set(r, l, -x);
            }
        }
    }
}

/// Rank-`r` factors `U_r diag(sigma_r) V_r^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PodFactors {
    /// `J x r`, row-major
    pub u: Matrix,
    pub sigma: Vec<f64>,
    /// `M x r`, row-major
    pub v: Matrix,
}

impl PodFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn element_count(&self) -> usize {
        self.u.data.len() + self.sigma.len() + self.v.data.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let (rows, cols, r) = (self.u.rows, self.v.rows, self.rank());
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let mut s = 0.0;
                for l in 0..r {
                    s += self.u.get(i, l) * self.sigma[l] * self.v.get(j, l);
                }
                out.data[i * cols + j] = s;
            }
        }
        out
    }
}

fn check_rank(a: &Matrix, rank: usize) -> Result<()> {
    let d = a.rows.min(a.cols);
    if rank > d {
        return Err(Error::invalid(format!(
            "rank {rank} exceeds the maximal rank d = min(J, M) = {d}"
        )));
    }
    Ok(())
}

/// Truncated SVD of `a` at `rank`.
pub fn truncate(a: &Matrix, rank: usize) -> Result<PodFactors> {
    check_rank(a, rank)?;
    let svd = svd_reduced(a);
    let mut u = Matrix::zeros(a.rows, rank);
    let mut v = Matrix::zeros(a.cols, rank);
    for l in 0..rank {
        for i in 0..a.rows {
            u.set(i, l, svd.u.get(i, l));
        }
        for j in 0..a.cols {
            v.set(j, l, svd.v.get(j, l));
        }
    }
    Ok(PodFactors {
        u,
        sigma: svd.sigma[..rank].to_vec(),
        v,
    })
}

/// Rank-`r` approximation of the full intensity matrix.
pub fn compress_full_intensity(a: &Matrix, rank: usize) -> Result<PodFactors> {
    if rank == 0 {
        return Err(Error::invalid("full-intensity compression needs rank >= 1"));
    }
    truncate(a, rank)
}

/// Zeroth, first and second angular moments of each row, with the second
/// moment stored as an Eddington factor (1/3 where the density vanishes).
#[derive(Debug, Clone, PartialEq)]
pub struct AngularMoments {
    pub phi: Vec<f64>,
    pub flux: Vec<f64>,
    pub eddington: Vec<f64>,
}

pub fn angular_moments(a: &Matrix, quad: &AngularQuadrature) -> Result<AngularMoments> {
    if a.cols != quad.len() {
        return Err(Error::GridMismatch(format!(
            "matrix has {} directions, quadrature has {}",
            a.cols,
            quad.len()
        )));
    }
    let (mu, w) = (quad.mu(), quad.weights());
    let mut out = AngularMoments {
        phi: Vec::with_capacity(a.rows),
        flux: Vec::with_capacity(a.rows),
        eddington: Vec::with_capacity(a.rows),
    };
    for j in 0..a.rows {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for m in 0..a.cols {
            let x = w[m] * a.get(j, m);
            s0 += x;
            s1 += x * mu[m];
            s2 += x * mu[m] * mu[m];
        }
        out.phi.push(s0);
        out.flux.push(s1);
        out.eddington.push(if s0.abs() > 1e-300 {
            s2 / s0
        } else {
            1.0 / 3.0
        });
    }
    Ok(out)
}

/// P2 angular expansion `1/2 (phi + 3 mu F + 5/4 (3 mu^2 - 1)(3 f - 1) phi)`
/// evaluated at the quadrature directions.
pub fn p2_expansion(moments: &AngularMoments, quad: &AngularQuadrature) -> Matrix {
    let rows = moments.phi.len();
    let cols = quad.len();
    let mut out = Matrix::zeros(rows, cols);
    for j in 0..rows {
        let phi = moments.phi[j];
        let quad_term = 1.25 * (3.0 * moments.eddington[j] - 1.0) * phi;
        for (m, mu) in quad.mu().iter().enumerate() {
            let p2 = 3.0 * mu * mu - 1.0;
            out.data[j * cols + m] = 0.5 * (phi + 3.0 * mu * moments.flux[j] + p2 * quad_term);
        }
    }
    out
}

/// P2 expansion plus a rank-`r` approximation of what it leaves over.
#[derive(Debug, Clone, PartialEq)]
pub struct RemainderPod {
    pub moments: AngularMoments,
    pub remainder: PodFactors,
}

impl RemainderPod {
    pub fn reconstruct(&self, quad: &AngularQuadrature) -> Result<Matrix> {
        let mut base = p2_expansion(&self.moments, quad);
        if self.remainder.rank() > 0 {
            let r = self.remainder.reconstruct();
            for (b, x) in base.data.iter_mut().zip(&r.data) {
                *b += x;
            }
        }
        Ok(base)
    }

    pub fn element_count(&self) -> usize {
        self.remainder.element_count()
            + self.moments.phi.len()
            + self.moments.flux.len()
            + self.moments.eddington.len()
    }
}

/// Rank `0` keeps the P2 expansion alone.
pub fn compress_remainder(
    a: &Matrix,
    quad: &AngularQuadrature,
    rank: usize,
) -> Result<RemainderPod> {
    check_rank(a, rank)?;
    let moments = angular_moments(a, quad)?;
    let remainder = a.minus(&p2_expansion(&moments, quad))?;
    Ok(RemainderPod {
        moments,
        remainder: truncate(&remainder, rank)?,
    })
}

/// Storage scheme for the previous-step intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// full intensity
    Full,
    /// rank-`r` approximation of the intensity
    PodI { rank: usize },
    /// P2 expansion plus rank-`r` remainder
    PodRt { rank: usize },
}

impl Scheme {
    pub fn rank(&self) -> Option<usize> {
        match self {
            Scheme::Full => None,
            Scheme::PodI { rank } | Scheme::PodRt { rank } => Some(*rank),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Full => "be",
            Scheme::PodI { .. } => "pod-i",
            Scheme::PodRt { .. } => "pod-rt",
        }
    }

    pub fn label(&self) -> String {
        match self.rank() {
            None => self.name().to_string(),
            Some(r) => format!("{}-r{r}", self.name()),
        }
    }
}

/// The stored previous-step intensity of one group.
#[derive(Debug, Clone, PartialEq)]
pub enum IntensityStore {
    Full(Matrix),
    PodI(PodFactors),
    PodRt(RemainderPod),
}

impl IntensityStore {
    pub fn compress(a: Matrix, scheme: Scheme, quad: &AngularQuadrature) -> Result<Self> {
        Ok(match scheme {
            Scheme::Full => Self::Full(a),
            Scheme::PodI { rank } => Self::PodI(compress_full_intensity(&a, rank)?),
            Scheme::PodRt { rank } => Self::PodRt(compress_remainder(&a, quad, rank)?),
        })
    }

    pub fn reconstruct(&self, quad: &AngularQuadrature) -> Result<Matrix> {
        match self {
            Self::Full(a) => Ok(a.clone()),
            Self::PodI(p) => Ok(p.reconstruct()),
            Self::PodRt(p) => p.reconstruct(quad),
        }
    }

    pub fn element_count(&self) -> usize {
        match self {
            Self::Full(a) => a.data.len(),
            Self::PodI(p) => p.element_count(),
            Self::PodRt(p) => p.element_count(),
        }
    }
}

/// Problem dimensions entering the storage accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StorageDims {
    pub cells: usize,
    pub dirs: usize,
    pub groups: usize,
}

/// Number of reals carried between time steps, with the P2 remainder
/// variant counting its moments as `phi` and `F` per cell.
///
/// Full: `G(JM + 2J + 1) + 2J + 1`; POD-I replaces `JM` by `r(J + M + 1)`;
/// POD-RT adds `2J` per group on top of that.
pub fn storage_count(scheme: Scheme, dims: StorageDims) -> usize {
    let StorageDims {
        cells: j,
        dirs: m,
        groups: g,
    } = dims;
    let per_group = match scheme {
        Scheme::Full => j * m + 2 * j + 1,
        Scheme::PodI { rank } => rank * (j + m + 1) + 2 * j + 1,
        Scheme::PodRt { rank } => rank * (j + m + 1) + 4 * j + 1,
    };
    g * per_group + 2 * j + 1
}

/// `100 (1 - count / full)`.
pub fn reduction_percent(count: usize, full: usize) -> f64 {
    100.0 * (1.0 - count as f64 / full as f64)
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"MLQDSNAP";

/// Binary snapshot of a store.
///
/// Layout (little endian): magic `MLQDSNAP`, `u8` kind (0 full, 1 POD-I,
/// 2 POD-RT), `u64` rows `J`, `u64` columns `M`, `u64` rank, then `f64`
/// arrays. Full: `J*M` row-major entries. POD-I: `U` (`J*r`, row-major),
/// `sigma` (`r`), `V` (`M*r`, row-major). POD-RT: the POD-I arrays of the
/// remainder followed by `phi`, `F` and `f` (`J` each).
pub fn write_snapshot<W: Write>(store: &IntensityStore, out: &mut W) -> std::io::Result<()> {
    let put = |out: &mut W, xs: &[f64]| -> std::io::Result<()> {
        for x in xs {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    };
    out.write_all(SNAPSHOT_MAGIC)?;
    let (kind, rows, cols, rank) = match store {
        IntensityStore::Full(a) => (0u8, a.rows, a.cols, 0),
        IntensityStore::PodI(p) => (1, p.u.rows, p.v.rows, p.rank()),
        IntensityStore::PodRt(p) => (
            2,
            p.remainder.u.rows,
            p.remainder.v.rows,
            p.remainder.rank(),
        ),
    };
    out.write_all(&[kind])?;
    for n in [rows, cols, rank] {
        out.write_all(&(n as u64).to_le_bytes())?;
    }
    let put_pod = |out: &mut W, p: &PodFactors| -> std::io::Result<()> {
        put(out, &p.u.data)?;
        put(out, &p.sigma)?;
        put(out, &p.v.data)
    };
    match store {
        IntensityStore::Full(a) => put(out, &a.data),
        IntensityStore::PodI(p) => put_pod(out, p),
        IntensityStore::PodRt(p) => {
            put_pod(out, &p.remainder)?;
            put(out, &p.moments.phi)?;
            put(out, &p.moments.flux)?;
            put(out, &p.moments.eddington)
        }
    }
}

pub fn read_snapshot<R: Read>(input: &mut R) -> Result<IntensityStore> {
    let bad = |m: &str| Error::invalid(format!("snapshot: {m}"));
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|_| bad("truncated header"))?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut kind = [0u8; 1];
    input
        .read_exact(&mut kind)
        .map_err(|_| bad("truncated header"))?;
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let mut b = [0u8; 8];
        input
            .read_exact(&mut b)
            .map_err(|_| bad("truncated header"))?;
        *d = usize::try_from(u64::from_le_bytes(b)).map_err(|_| bad("dimension overflow"))?;
    }
    let [rows, cols, rank] = dims;
    let mut take = |n: usize| -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            input
                .read_exact(&mut b)
                .map_err(|_| bad("truncated data"))?;
            v.push(f64::from_le_bytes(b));
        }
        Ok(v)
    };
    let pod = |take: &mut dyn FnMut(usize) -> Result<Vec<f64>>| -> Result<PodFactors> {
        Ok(PodFactors {
            u: Matrix::new(rows, rank, take(rows * rank)?)?,
            sigma: take(rank)?,
            v: Matrix::new(cols, rank, take(cols * rank)?)?,
        })
    };
    match kind[0] {
        0 => Ok(IntensityStore::Full(Matrix::new(
            rows,
            cols,
            take(rows * cols)?,
        )?)),
        1 => Ok(IntensityStore::PodI(pod(&mut take)?)),
        2 => {
            let remainder = pod(&mut take)?;
            let moments = AngularMoments {
                phi: take(rows)?,
                flux: take(rows)?,
                eddington: take(rows)?,
            };
            Ok(IntensityStore::PodRt(RemainderPod { moments, remainder }))
        }
        k => Err(bad(&format!("unknown kind {k}"))),
    }
}
