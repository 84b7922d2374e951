//! Planck spectrum integrals, group emission and the Fleck-Cummings opacity.
//!
//! Photon energies and temperatures are in keV, lengths in cm, time in ns and
//! energy in jerks (1 Jk = 1e9 J). All functions are pure.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Speed of light and radiation constant in the cm / ns / keV / Jk unit system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// cm / ns
    pub c: f64,
    /// Jk cm^-3 keV^-4
    pub a_rad: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            c: 29.979_245_8,
            a_rad: 0.013_72,
        }
    }
}

impl PhysicalConstants {
    pub fn new(c: f64, a_rad: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) || !(a_rad > 0.0 && a_rad.is_finite()) {
            return Err(Error::invalid(format!(
                "physical constants must be positive: c={c}, a_R={a_rad}"
            )));
        }
        Ok(Self { c, a_rad })
    }
}

/// Photon-energy group boundaries `edges[0] < edges[1] < ... < edges[G]`.
///
/// The first edge may be zero and the last may be `f64::INFINITY`, which
/// makes the top group open.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    edges: Vec<f64>,
}

impl GroupStructure {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::invalid("group structure needs at least two edges"));
        }
        if edges[0] < 0.0 || edges[0].is_nan() {
            return Err(Error::invalid("first group edge must be >= 0"));
        }
        for (i, pair) in edges.windows(2).enumerate() {
            if !(pair[1] > pair[0]) {
                return Err(Error::invalid(format!(
                    "group edges must be strictly increasing (edge {} = {}, edge {} = {})",
                    i,
                    pair[0],
                    i + 1,
                    pair[1]
                )));
            }
        }
        if edges[..edges.len() - 1].iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid("only the last group edge may be infinite"));
        }
        Ok(Self { edges })
    }

    /// Default 17-group structure: `[0, 16 log-spaced edges from 0.7075 to
    /// 20 keV, +inf]`.
    pub fn fleck_cummings_default() -> Self {
        let (lo, hi) = (0.7075_f64, 20.0_f64);
        let n = 16;
        let mut edges = Vec::with_capacity(n + 2);
        edges.push(0.0);
        let ratio = (hi / lo).ln() / (n - 1) as f64;
        for i in 0..n {
            edges.push(if i == n - 1 {
                hi
            } else {
                lo * (ratio * i as f64).exp()
            });
        }
        edges.push(f64::INFINITY);
        Self { edges }
    }

    pub fn num_groups(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bounds(&self, g: usize) -> (f64, f64) {
        (self.edges[g], self.edges[g + 1])
    }

    pub fn has_open_top(&self) -> bool {
        self.edges.last().is_some_and(|e| e.is_infinite())
    }
}

/// `pi^4 / 15`, the integral of `x^3/(e^x - 1)` over `[0, inf)`.
pub const PLANCK_INTEGRAL: f64 =
    std::f64::consts::PI * std::f64::consts::PI * std::f64::consts::PI * std::f64::consts::PI
        / 15.0;

/// `B_{2k} / (2k)!` for k = 1..16.
pub(crate) const BERNOULLI_OVER_FACTORIAL: [f64; 16] = [
    0.083333333333333333,
    -0.0013888888888888889,
    3.3068783068783069e-5,
    -8.2671957671957672e-7,
    2.0876756987868099e-8,
    -5.2841901386874932e-10,
    1.3382536530684679e-11,
    -3.3896802963225829e-13,
    8.5860620562778446e-15,
    -2.1748686985580619e-16,
    5.5090028283602295e-18,
    -1.3954464685812523e-19,
    3.5347070396294675e-21,
    -8.9535174270375469e-23,
    2.2679524523376831e-24,
    -5.7447906688722024e-26,
];

// Crossover between the power series and the exponential series.
const SERIES_SPLIT: f64 = 2.0;

/// `int_0^x t^3/(e^t - 1) dt` for `0 <= x <= SERIES_SPLIT`.
fn lower_integral(x: f64) -> f64 {
    let x2 = x * x;
    let x3 = x2 * x;
    let mut sum = x3 / 3.0 - x3 * x / 8.0;
    let mut pow = x3 * x2; // x^(2k+3)
    for (k, c) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let term = c * pow / (2 * k + 5) as f64;
        sum += term;
        if term.abs() < 1e-19 * sum.abs() {
            break;
        }
        pow *= x2;
    }
    sum
}

/// `e^x * int_x^inf t^3/(e^t - 1) dt` for `x >= SERIES_SPLIT`.
fn scaled_upper_integral(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    let decay = (-x).exp();
    let (x2, x3) = (x * x, x * x * x);
    let mut weight = 1.0; // e^{-(n-1)x}
    let mut sum = 0.0;
    for n in 1..=200u32 {
        let r = 1.0 / n as f64;
        let term = weight * r * (x3 + r * (3.0 * x2 + r * (6.0 * x + 6.0 * r)));
        sum += term;
        if term < 1e-19 * sum {
            break;
        }
        weight *= decay;
        if weight == 0.0 {
            break;
        }
    }
    sum
}

/// Series values at one reduced photon energy `x = h nu / kT`.
#[derive(Debug, Clone, Copy)]
struct EdgeSeries {
    x: f64,
    /// `int_0^x`, only for `x <= SERIES_SPLIT`
    lower: f64,
    /// `e^x int_x^inf`, only for `x >= SERIES_SPLIT`
    scaled_upper: f64,
}

impl EdgeSeries {
    fn at(x: f64) -> Self {
        let (lower, scaled_upper) = if x <= SERIES_SPLIT {
            (lower_integral(x), f64::NAN)
        } else {
            (f64::NAN, scaled_upper_integral(x))
        };
        Self {
            x,
            lower,
            scaled_upper,
        }
    }

    /// `int_x^inf`, valid for `x > SERIES_SPLIT`.
    fn upper(&self) -> f64 {
        if self.x.is_infinite() {
            0.0
        } else {
            (-self.x).exp() * self.scaled_upper
        }
    }
}

fn split_values() -> (f64, f64) {
    static SPLIT: OnceLock<(f64, f64)> = OnceLock::new();
    *SPLIT.get_or_init(|| {
        let lower = lower_integral(SERIES_SPLIT);
        (
            lower,
            (-SERIES_SPLIT).exp() * scaled_upper_integral(SERIES_SPLIT),
        )
    })
}

fn integral_between(a: &EdgeSeries, b: &EdgeSeries) -> f64 {
    if b.x <= SERIES_SPLIT {
        b.lower - a.lower
    } else if a.x >= SERIES_SPLIT {
        let ua = if a.x <= SERIES_SPLIT {
            split_values().1
        } else {
            a.upper()
        };
        ua - b.upper()
    } else {
        let (lower_split, upper_split) = split_values();
        (lower_split - a.lower) + (upper_split - b.upper())
    }
}

/// `int_a^b t^3/(e^t - 1) dt` for `0 <= a < b <= inf`.
pub fn planck_integral(a: f64, b: f64) -> f64 {
    integral_between(&EdgeSeries::at(a), &EdgeSeries::at(b))
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!(
            "temperature must be positive, got {t}"
        )));
    }
    Ok(())
}

fn check_bounds(lo: f64, hi: f64) -> Result<()> {
    if !(lo >= 0.0) || !(hi > lo) || lo.is_infinite() {
        return Err(Error::invalid(format!(
            "photon energy bounds must satisfy 0 <= lo < hi, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Fraction of the black-body spectrum at temperature `t` lying between
/// photon energies `lo` and `hi` (keV).
pub fn planck_fraction(t: f64, lo: f64, hi: f64) -> Result<f64> {
    check_temperature(t)?;
    check_bounds(lo, hi)?;
    let b = planck_integral(lo / t, hi / t) / PLANCK_INTEGRAL;
    Ok(b.clamp(0.0, 1.0))
}

/// Group emission `B_g = (c a_R T^4 / 2) b_g(T)`, normalised so that
/// `sum_g 2 B_g = c a_R T^4` when the group structure covers `[0, inf)`.
pub fn group_emission(
    t: f64,
    groups: &GroupStructure,
    consts: &PhysicalConstants,
) -> Result<Vec<f64>> {
    Ok(group_coefficients(t, groups, consts)?.emission)
}

/// Fleck-Cummings spectral opacity `27/(h nu)^3 (1 - exp(-h nu / kT))` in cm^-1.
pub fn spectral_opacity(hnu: f64, t: f64) -> Result<f64> {
    check_temperature(t)?;
    if !(hnu > 0.0) || !hnu.is_finite() {
        return Err(Error::invalid(format!(
            "photon energy must be positive, got {hnu}"
        )));
    }
    Ok(27.0 / (hnu * hnu * hnu) * (-(-hnu / t).exp_m1()))
}

// Planck mean from the series values at the two group edges.
fn mean_opacity_between(t: f64, a: &EdgeSeries, b: &EdgeSeries) -> Result<f64> {
    let (num, den) = if a.x >= SERIES_SPLIT {
        let width = b.x - a.x;
        let num = if width.is_infinite() {
            1.0
        } else {
            -(-width).exp_m1()
        };
        let tail = if b.x.is_infinite() {
            0.0
        } else {
            (-width).exp() * b.scaled_upper
        };
        let head = if a.x <= SERIES_SPLIT {
            scaled_upper_integral(a.x)
        } else {
            a.scaled_upper
        };
        (num, head - tail)
    } else {
        let num = (-a.x).exp() - if b.x.is_infinite() { 0.0 } else { (-b.x).exp() };
        (num, integral_between(a, b))
    };
    if den.is_finite() && den > 1e-300 {
        Ok(27.0 / (t * t * t) * num / den)
    } else {
        let (lo, hi) = (a.x * t, b.x * t);
        // Degenerate group: evaluate at the group midpoint.
        let mid = if hi.is_infinite() {
            2.0 * lo.max(f64::MIN_POSITIVE)
        } else if lo > 0.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * hi
        };
        log::warn!(
            "degenerate Planck weight in group [{lo}, {hi}] at T={t}; using midpoint opacity"
        );
        spectral_opacity(mid, t)
    }
}

/// Planck-weighted group opacity of the Fleck-Cummings material.
///
/// With `x = h nu / kT` the numerator collapses to
/// `(27 / T^3) (e^{-x_lo} - e^{-x_hi})`. When `x_lo` is large both numerator
/// and denominator are evaluated with the common factor `e^{-x_lo}` removed,
/// so cold groups keep their finite Planck mean instead of underflowing.
pub fn planck_mean_opacity(t: f64, lo: f64, hi: f64) -> Result<f64> {
    check_temperature(t)?;
    check_bounds(lo, hi)?;
    mean_opacity_between(t, &EdgeSeries::at(lo / t), &EdgeSeries::at(hi / t))
}

/// Group opacities and emission at one temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCoefficients {
    pub opacity: Vec<f64>,
    pub emission: Vec<f64>,
}

/// `kappa_g(T)` and `B_g(T)` for every group, sharing the series work
/// between adjacent groups.
pub fn group_coefficients(
    t: f64,
    groups: &GroupStructure,
    consts: &PhysicalConstants,
) -> Result<GroupCoefficients> {
    check_temperature(t)?;
    let edges: Vec<EdgeSeries> = groups
        .edges()
        .iter()
        .map(|e| EdgeSeries::at(e / t))
        .collect();
    let scale = 0.5 * consts.c * consts.a_rad * t.powi(4);
    let mut opacity = Vec::with_capacity(groups.num_groups());
    let mut emission = Vec::with_capacity(groups.num_groups());
    for pair in edges.windows(2) {
        let b = (integral_between(&pair[0], &pair[1]) / PLANCK_INTEGRAL).clamp(0.0, 1.0);
        emission.push(scale * b);
        opacity.push(mean_opacity_between(t, &pair[0], &pair[1])?);
    }
    Ok(GroupCoefficients { opacity, emission })
}

/// Group opacities `kappa_g(T)` for every group.
pub fn group_opacity(t: f64, groups: &GroupStructure) -> Result<Vec<f64>> {
    Ok(group_coefficients(t, groups, &PhysicalConstants::default())?.opacity)
}
