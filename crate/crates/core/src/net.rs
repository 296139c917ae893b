//! Generalized numbers as sampled nets.
//!
//! A [`GeneralizedNumber`] is a representative `(x_eps)` sampled on the
//! dyadic grid `eps_k = 2^-k`. Asymptotic predicates (negligible, strictly
//! nonzero, valuation) are decided on the tail window, i.e. the `W` smallest
//! samples of the grid.

use std::fmt;
use std::ops::{Add, Mul, Neg, Range, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Magnitudes below this are treated as exact zeros by the log fits.
pub const NUMERIC_FLOOR: f64 = 1e-300;

pub const DEFAULT_SAMPLES: usize = 40;
pub const DEFAULT_TAIL_WINDOW: usize = 16;
/// Exponent of the strictly-nonzero tail test.
pub const DEFAULT_M_INV: f64 = 8.0;
/// Valuation above which a net counts as negligible.
pub const DEFAULT_M_MAX: f64 = 12.0;

/// The sample points `eps_k = 2^-k`, `k = 0..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonGrid {
    samples: Vec<f64>,
    tail_window: usize,
}

impl EpsilonGrid {
    pub fn new(count: usize, tail_window: usize) -> Result<Arc<Self>> {
        if tail_window < 4 {
            return Err(Error::InvalidGrid(format!(
                "tail window {tail_window} is below 4"
            )));
        }
        if tail_window > count {
            return Err(Error::InvalidGrid(format!(
                "tail window {tail_window} exceeds sample count {count}"
            )));
        }
        if count > 1000 {
            return Err(Error::InvalidGrid(format!("{count} samples underflow f64")));
        }
        let samples = (0..count).map(|k| 2f64.powi(-(k as i32))).collect();
        Ok(Arc::new(Self {
            samples,
            tail_window,
        }))
    }

    pub fn standard() -> Arc<Self> {
        Self::new(DEFAULT_SAMPLES, DEFAULT_TAIL_WINDOW).expect("default grid is valid")
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn tail_window(&self) -> usize {
        self.tail_window
    }

    pub fn eps(&self, k: usize) -> f64 {
        self.samples[k]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Indices of the tail window, the `W` smallest epsilons.
    pub fn tail(&self) -> Range<usize> {
        self.len() - self.tail_window..self.len()
    }
}

/// A sampled net `(x_eps)` on an [`EpsilonGrid`].
#[derive(Clone, PartialEq)]
pub struct GeneralizedNumber {
    grid: Arc<EpsilonGrid>,
    values: Vec<f64>,
}

impl fmt::Debug for GeneralizedNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralizedNumber")
            .field("samples", &self.values.len())
            .field("tail", &&self.values[self.grid.tail()])
            .finish()
    }
}

pub(crate) fn same_grid(a: &Arc<EpsilonGrid>, b: &Arc<EpsilonGrid>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl GeneralizedNumber {
    pub fn from_samples(grid: &Arc<EpsilonGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Builds a net from `f(k, eps_k)`.
    pub fn from_fn(grid: &Arc<EpsilonGrid>, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(k, grid.eps(k))).collect();
        Self::from_samples(grid, values)
    }

    pub fn constant(grid: &Arc<EpsilonGrid>, c: f64) -> Self {
        Self::from_samples(grid, vec![c; grid.len()]).expect("finite constant")
    }

    pub fn zero(grid: &Arc<EpsilonGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn one(grid: &Arc<EpsilonGrid>) -> Self {
        Self::constant(grid, 1.0)
    }

    /// The canonical moderate net `c * eps^a`.
    pub fn power(c: f64, a: f64, grid: &Arc<EpsilonGrid>) -> Result<Self> {
        if !c.is_finite() || !a.is_finite() {
            return Err(Error::Precondition(format!(
                "power net needs finite coefficient and exponent, got {c}, {a}"
            )));
        }
        let values: Vec<f64> = grid.samples().iter().map(|e| c * e.powf(a)).collect();
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Overflow { index });
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Characteristic function of the index set picked by `selector`.
    pub fn indicator(grid: &Arc<EpsilonGrid>, selector: impl Fn(usize) -> bool) -> Self {
        let values = (0..grid.len())
            .map(|k| if selector(k) { 1.0 } else { 0.0 })
            .collect();
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    /// Indicator of the even grid indices.
    pub fn even(grid: &Arc<EpsilonGrid>) -> Self {
        Self::indicator(grid, |k| k % 2 == 0)
    }

    /// Indicator of the odd grid indices.
    pub fn odd(grid: &Arc<EpsilonGrid>) -> Self {
        Self::indicator(grid, |k| k % 2 == 1)
    }

    pub fn grid(&self) -> &Arc<EpsilonGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn tail_values(&self) -> &[f64] {
        &self.values[self.grid.tail()]
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid)
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Pointwise map. Panics if `f` produces a non-finite sample.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        assert!(
            values.iter().all(|v| v.is_finite()),
            "pointwise map produced a non-finite sample"
        );
        Self {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_samples(&self.grid, values)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    /// Largest tail magnitude.
    pub fn tail_sup(&self) -> f64 {
        self.tail_values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// True when every tail sample is below the numeric floor.
    pub fn is_tail_zero(&self) -> bool {
        self.tail_values().iter().all(|v| v.abs() < NUMERIC_FLOOR)
    }

    /// Tail indices `k` with `|x_k| < eps_k^m`.
    pub fn tail_failures(&self, m: f64) -> Vec<usize> {
        self.grid
            .tail()
            .filter(|&k| !(self.values[k].abs() >= self.grid.eps(k).powf(m)))
            .collect()
    }

    /// `|x_eps| >= eps^m` on the whole tail window.
    pub fn is_strictly_nonzero(&self, m: f64) -> bool {
        self.tail_failures(m).is_empty()
    }

    /// `x_eps >= eps^m` on the whole tail window.
    pub fn is_strictly_positive(&self, m: f64) -> bool {
        self.grid
            .tail()
            .all(|k| self.values[k] >= self.grid.eps(k).powf(m))
    }

    /// `x_eps <= -eps^m` on the whole tail window.
    pub fn is_strictly_negative(&self, m: f64) -> bool {
        self.grid
            .tail()
            .all(|k| self.values[k] <= -self.grid.eps(k).powf(m))
    }

    /// Multiplicative inverse, defined when the net passes the strictly-nonzero
    /// test at exponent `m`. Outside the tail window the germ is unconstrained,
    /// so samples that cannot be inverted there are set to zero.
    pub fn invert(&self, m: f64) -> Result<Self> {
        let indices = self.tail_failures(m);
        if !indices.is_empty() {
            return Err(Error::NotStrictlyNonzero {
                exponent: m,
                indices,
            });
        }
        let values = self
            .values
            .iter()
            .map(|&v| {
                let r = 1.0 / v;
                if r.is_finite() {
                    r
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values,
        })
    }

    /// Empirical valuation over the tail window.
    pub fn valuation(&self) -> Result<AsymptoticFit> {
        fit_tail(&self.grid, &self.values)
    }

    /// The sharp norm `exp(-nu)`; zero for nets vanishing on the tail.
    pub fn sharp_norm(&self) -> Result<f64> {
        let fit = self.valuation()?;
        Ok(if fit.all_below_floor {
            0.0
        } else {
            (-fit.nu()).exp()
        })
    }

    pub fn classify(&self, m_max: f64, m_inv: f64) -> NetClass {
        classify(self, m_max, m_inv)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&GeneralizedNumber> for &GeneralizedNumber {
            type Output = GeneralizedNumber;
            fn $method(self, rhs: &GeneralizedNumber) -> GeneralizedNumber {
                assert!(self.same_grid(rhs), "nets live on different epsilon grids");
                let values = self
                    .values
                    .iter()
                    .zip(&rhs.values)
                    .map(|(a, b)| a $op b)
                    .collect();
                GeneralizedNumber { grid: Arc::clone(&self.grid), values }
            }
        }

        impl $trait<GeneralizedNumber> for GeneralizedNumber {
            type Output = GeneralizedNumber;
            fn $method(self, rhs: GeneralizedNumber) -> GeneralizedNumber {
                (&self).$method(&rhs)
            }
        }

        impl $trait<&GeneralizedNumber> for GeneralizedNumber {
            type Output = GeneralizedNumber;
            fn $method(self, rhs: &GeneralizedNumber) -> GeneralizedNumber {
                (&self).$method(rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for &GeneralizedNumber {
    type Output = GeneralizedNumber;
    fn neg(self) -> GeneralizedNumber {
        self.map(|v| -v)
    }
}

impl Neg for GeneralizedNumber {
    type Output = GeneralizedNumber;
    fn neg(self) -> GeneralizedNumber {
        -&self
    }
}

impl Mul<&GeneralizedNumber> for f64 {
    type Output = GeneralizedNumber;
    fn mul(self, rhs: &GeneralizedNumber) -> GeneralizedNumber {
        rhs.scale(self)
    }
}

/// Result of the log-log regression over the tail window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticFit {
    /// Least-squares slope of `ln|x|` against `ln eps` over nonzero tail samples.
    pub slope: f64,
    pub intercept: f64,
    /// Max absolute deviation of the log data from the fitted line.
    pub residual: f64,
    pub all_below_floor: bool,
    /// Slope of the upper supporting line of the log data, the exponent `b` of
    /// the tightest bound `|x| <= C eps^b`. Differs from `slope` for branched nets.
    pub envelope_slope: f64,
    pub usable: usize,
}

impl AsymptoticFit {
    /// The empirical valuation: the smaller of the regression and envelope slopes.
    pub fn nu(&self) -> f64 {
        self.slope.min(self.envelope_slope)
    }
}

pub(crate) fn fit_tail(grid: &EpsilonGrid, values: &[f64]) -> Result<AsymptoticFit> {
    let points: Vec<(f64, f64)> = grid
        .tail()
        .filter(|&k| values[k].abs() >= NUMERIC_FLOOR)
        .map(|k| (grid.eps(k).ln(), values[k].abs().ln()))
        .collect();
    if points.is_empty() {
        return Ok(AsymptoticFit {
            slope: f64::INFINITY,
            intercept: 0.0,
            residual: 0.0,
            all_below_floor: true,
            envelope_slope: f64::INFINITY,
            usable: 0,
        });
    }
    if points.len() < 3 {
        return Err(Error::Fit {
            usable: points.len(),
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    Ok(AsymptoticFit {
        slope,
        intercept,
        residual,
        all_below_floor: false,
        envelope_slope: upper_envelope_slope(&points, mx),
        usable: points.len(),
    })
}

/// Slope of the upper convex hull edge lying above the mean abscissa.
fn upper_envelope_slope(points: &[(f64, f64)], mean_x: f64) -> f64 {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for p in sorted {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) >= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let edge = hull
        .windows(2)
        .find(|w| w[0].0 <= mean_x && mean_x <= w[1].0)
        .unwrap_or(&hull[hull.len() - 2..]);
    (edge[1].1 - edge[0].1) / (edge[1].0 - edge[0].0)
}

/// Coarse asymptotic classes of a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetClass {
    Negligible,
    StrictlyPositive,
    StrictlyNegative,
    StrictlyNonzero,
    ModerateIndeterminate,
}

impl NetClass {
    pub fn is_strictly_nonzero(self) -> bool {
        matches!(
            self,
            Self::StrictlyPositive | Self::StrictlyNegative | Self::StrictlyNonzero
        )
    }
}

impl fmt::Display for NetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Negligible => "negligible",
            Self::StrictlyPositive => "strictly_positive",
            Self::StrictlyNegative => "strictly_negative",
            Self::StrictlyNonzero => "strictly_nonzero",
            Self::ModerateIndeterminate => "moderate_indeterminate",
        };
        f.write_str(s)
    }
}

/// Negligible: valuation at least `m_max` and the sup over the later half of
/// the window does not exceed the sup over the earlier half.
pub fn is_negligible(x: &GeneralizedNumber, m_max: f64) -> bool {
    if x.is_tail_zero() {
        return true;
    }
    let Ok(fit) = x.valuation() else {
        return false;
    };
    let tail = x.tail_values();
    let half = tail.len() / 2;
    let sup = |s: &[f64]| s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    fit.nu() >= m_max && sup(&tail[half..]) <= sup(&tail[..half])
}

pub fn classify(x: &GeneralizedNumber, m_max: f64, m_inv: f64) -> NetClass {
    debug_assert!(m_max > m_inv && m_inv > 0.0);
    if is_negligible(x, m_max) {
        NetClass::Negligible
    } else if x.is_strictly_positive(m_inv) {
        NetClass::StrictlyPositive
    } else if x.is_strictly_negative(m_inv) {
        NetClass::StrictlyNegative
    } else if x.is_strictly_nonzero(m_inv) {
        NetClass::StrictlyNonzero
    } else {
        NetClass::ModerateIndeterminate
    }
}

/// The exponents used by the tail tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub m_inv: f64,
    pub m_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            m_inv: DEFAULT_M_INV,
            m_max: DEFAULT_M_MAX,
        }
    }
}

impl Thresholds {
    pub fn new(m_inv: f64, m_max: f64) -> Result<Self> {
        if !(m_max > m_inv && m_inv > 0.0) {
            return Err(Error::Precondition(format!(
                "need m_max > m_inv > 0, got m_inv={m_inv}, m_max={m_max}"
            )));
        }
        Ok(Self { m_inv, m_max })
    }

    pub fn classify(&self, x: &GeneralizedNumber) -> NetClass {
        classify(x, self.m_max, self.m_inv)
    }

    pub fn is_negligible(&self, x: &GeneralizedNumber) -> bool {
        is_negligible(x, self.m_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Arc<EpsilonGrid> {
        EpsilonGrid::standard()
    }

    #[test]
    fn grid_invariants() {
        let g = grid();
        assert_eq!(g.eps(0), 1.0);
        assert!(g.samples().windows(2).all(|w| w[1] < w[0]));
        assert_eq!(g.tail(), 24..40);
        assert!(EpsilonGrid::new(10, 3).is_err());
        assert!(EpsilonGrid::new(10, 11).is_err());
    }

    #[test]
    fn power_samples() {
        let g = grid();
        let x = GeneralizedNumber::power(1.0, 2.0, &g).unwrap();
        for k in 0..g.len() {
            assert_eq!(x.value(k), 2f64.powi(-2 * k as i32));
        }
        let z = GeneralizedNumber::power(0.0, 5.0, &g).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn power_overflow_names_index() {
        let g = grid();
        match GeneralizedNumber::power(1.0, -30.0, &g) {
            Err(Error::Overflow { index }) => assert_eq!(index, 35),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_exponent_fit() {
        let g = grid();
        let x = GeneralizedNumber::power(3.0, -1.5, &g).unwrap();
        let fit = x.valuation().unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-9);
        assert!((fit.nu() + 1.5).abs() < 1e-9);
        assert!(fit.residual < 1e-9);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn indicators_are_orthogonal_idempotents() {
        let g = grid();
        let e = GeneralizedNumber::even(&g);
        let o = GeneralizedNumber::odd(&g);
        assert_eq!(&e * &e, e);
        let one = GeneralizedNumber::one(&g);
        assert!((&e * &(&one - &e)).values().iter().all(|&v| v == 0.0));
        assert_eq!(&e + &o, one);
    }

    #[test]
    fn ring_exponents_add() {
        let g = grid();
        let a = GeneralizedNumber::power(1.0, 1.0, &g).unwrap();
        let b = GeneralizedNumber::power(1.0, 2.0, &g).unwrap();
        let p = &a * &b;
        assert!((p.valuation().unwrap().nu() - 3.0).abs() < 1e-9);
        for k in 0..g.len() {
            assert_eq!(p.value(k), g.eps(k).powi(3));
        }
    }

    #[test]
    fn invert_power() {
        let g = grid();
        let x = GeneralizedNumber::power(2.0, 1.0, &g).unwrap();
        let inv = x.invert(2.0).unwrap();
        for k in 0..g.len() {
            assert!((inv.value(k) - 0.5 / g.eps(k)).abs() <= 1e-15 * inv.value(k));
        }
    }

    #[test]
    fn invert_zero_divisor_fails_on_odd_tail() {
        let g = grid();
        let e = GeneralizedNumber::even(&g);
        match e.invert(1.0) {
            Err(Error::NotStrictlyNonzero { indices, .. }) => {
                assert_eq!(indices, (25..40).step_by(2).collect::<Vec<_>>());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn valuation_examples() {
        let g = grid();
        let sq = GeneralizedNumber::power(1.0, 2.0, &g).unwrap();
        assert!((sq.valuation().unwrap().nu() - 2.0).abs() < 1e-9);
        let zero = GeneralizedNumber::zero(&g);
        let fit = zero.valuation().unwrap();
        assert!(fit.all_below_floor && fit.nu() == f64::INFINITY);
        let branched = &GeneralizedNumber::even(&g) * &GeneralizedNumber::power(1.0, 1.0, &g).unwrap();
        assert!((branched.valuation().unwrap().nu() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn envelope_takes_the_dominant_branch() {
        let g = grid();
        let e = GeneralizedNumber::even(&g);
        let o = GeneralizedNumber::odd(&g);
        let x = &e * &GeneralizedNumber::power(1.0, 1.0, &g).unwrap()
            + &o * &GeneralizedNumber::power(1.0, 3.0, &g).unwrap();
        let fit = x.valuation().unwrap();
        assert!(fit.slope > 1.5);
        assert!((fit.envelope_slope - 1.0).abs() < 1e-9);
        assert!((fit.nu() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_usable_samples() {
        let g = grid();
        let x = GeneralizedNumber::indicator(&g, |k| k == 30 || k == 31);
        assert_eq!(x.valuation(), Err(Error::Fit { usable: 2 }));
    }

    #[test]
    fn sharp_norm_examples() {
        let g = grid();
        let sq = GeneralizedNumber::power(1.0, 2.0, &g).unwrap();
        assert!((sq.sharp_norm().unwrap() - (-2f64).exp()).abs() < 1e-6);
        assert_eq!(GeneralizedNumber::zero(&g).sharp_norm().unwrap(), 0.0);
        let x = GeneralizedNumber::power(1.0, -1.0, &g).unwrap() + GeneralizedNumber::one(&g);
        assert!((x.sharp_norm().unwrap() - 1f64.exp()).abs() < 1e-5);
    }

    #[test]
    fn classify_examples() {
        let g = grid();
        let t = Thresholds::default();
        let p5 = GeneralizedNumber::power(1.0, 5.0, &g).unwrap();
        assert_eq!(classify(&p5, 12.0, 8.0), NetClass::StrictlyPositive);
        assert_eq!(t.classify(&-&p5), NetClass::StrictlyNegative);
        assert_eq!(
            t.classify(&GeneralizedNumber::even(&g)),
            NetClass::ModerateIndeterminate
        );
        let p15 = GeneralizedNumber::power(1.0, 15.0, &g).unwrap();
        assert_eq!(t.classify(&p15), NetClass::Negligible);
        let alt = GeneralizedNumber::even(&g) - GeneralizedNumber::odd(&g);
        assert_eq!(t.classify(&alt), NetClass::StrictlyNonzero);
        let branched_tiny = &GeneralizedNumber::even(&g) * &p15;
        assert_eq!(t.classify(&branched_tiny), NetClass::Negligible);
    }

    #[test]
    fn growing_net_is_not_negligible_even_with_steep_fit_prefix() {
        let g = grid();
        let x = GeneralizedNumber::from_fn(&g, |k, e| if k < 32 { e.powi(20) } else { 1.0 }).unwrap();
        assert!(!is_negligible(&x, 12.0));
    }

    #[test]
    #[should_panic(expected = "different epsilon grids")]
    fn mixing_grids_panics() {
        let a = GeneralizedNumber::one(&EpsilonGrid::new(20, 8).unwrap());
        let b = GeneralizedNumber::one(&EpsilonGrid::standard());
        let _ = &a + &b;
    }

    #[test]
    fn try_ops_report_grid_mismatch() {
        let a = GeneralizedNumber::one(&EpsilonGrid::new(20, 8).unwrap());
        let b = GeneralizedNumber::one(&EpsilonGrid::standard());
        assert_eq!(a.try_add(&b), Err(Error::GridMismatch));
    }

    fn power_sum() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.1f64..10.0, -3.0f64..6.0), 1..4)
    }

    fn build(terms: &[(f64, f64)], g: &Arc<EpsilonGrid>) -> GeneralizedNumber {
        terms.iter().fold(GeneralizedNumber::zero(g), |acc, &(c, a)| {
            acc + GeneralizedNumber::power(c, a, g).unwrap()
        })
    }

    proptest! {
        #[test]
        fn valuation_adds_on_powers(a in -6.0f64..6.0, b in -6.0f64..6.0) {
            let g = grid();
            let x = GeneralizedNumber::power(1.0, a, &g).unwrap();
            let y = GeneralizedNumber::power(1.0, b, &g).unwrap();
            let nu = (&x * &y).valuation().unwrap().nu();
            prop_assert!((nu - (a + b)).abs() < 1e-6);
        }

        #[test]
        fn idempotent_indicators(mask in any::<u64>()) {
            let g = grid();
            let chi = GeneralizedNumber::indicator(&g, |k| mask >> (k % 64) & 1 == 1);
            prop_assert_eq!(&chi * &chi, chi);
        }

        #[test]
        fn sharp_norm_is_ultrametric(x in power_sum(), y in power_sum()) {
            let g = grid();
            let (x, y) = (build(&x, &g), build(&y, &g));
            let s = (&x + &y).sharp_norm().unwrap();
            let m = x.sharp_norm().unwrap().max(y.sharp_norm().unwrap());
            prop_assert!(s <= m + 1e-6, "{s} > {m}");
        }

        #[test]
        fn negligible_perturbation_keeps_strict_verdicts(terms in power_sum(), sign in prop::bool::ANY) {
            let g = grid();
            let t = Thresholds::default();
            let mut x = build(&terms, &g);
            if sign { x = -x; }
            let before = t.classify(&x);
            let after = t.classify(&(&x + &GeneralizedNumber::power(1.0, t.m_max + 4.0, &g).unwrap()));
            if before.is_strictly_nonzero() {
                prop_assert_eq!(before, after);
            }
        }

        #[test]
        fn inverse_is_exact_on_tail(c in 0.1f64..10.0, a in -4.0f64..7.0) {
            let g = grid();
            let x = GeneralizedNumber::power(c, a, &g).unwrap();
            let inv = x.invert(8.0).unwrap();
            let r = &(&inv * &x) - &GeneralizedNumber::one(&g);
            prop_assert!(r.tail_values().iter().all(|v| v.abs() <= 2.0 * f64::EPSILON));
        }
    }
}
