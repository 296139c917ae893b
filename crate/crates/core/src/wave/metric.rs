use std::sync::Arc;

use crate::error::{Error, Result};
use crate::net::{EpsilonGrid, GeneralizedNumber, Thresholds};
use crate::par;

use super::grid::Torus;
use super::split::Split;

/// A symmetric spatial tensor with at most two dimensions. One-dimensional
/// tensors keep `xy = 0` and `yy = 1`, so the 2x2 formulas for determinant and
/// inverse reduce to the scalar ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Self = Self { xx: 1.0, xy: 0.0, yy: 1.0 };
    pub const ZERO: Self = Self { xx: 0.0, xy: 0.0, yy: 0.0 };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub const fn scalar(c: f64) -> Self {
        Self { xx: c, xy: 0.0, yy: c }
    }

    /// The 1-D tensor `(c)`.
    pub const fn line(c: f64) -> Self {
        Self { xx: c, xy: 0.0, yy: 1.0 }
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        match (a, b) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            _ => self.xy,
        }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn inverse(&self) -> Self {
        let d = self.det();
        Self::new(self.yy / d, -self.xy / d, self.xx / d)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.xx * c, self.xy * c, self.yy * c)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn quad(&self, a: [f64; 2]) -> f64 {
        self.xx * a[0] * a[0] + 2.0 * self.xy * a[0] * a[1] + self.yy * a[1] * a[1]
    }

    /// Eigenvalues restricted to the first `dim` axes, ascending.
    pub fn eigenvalues(&self, dim: usize) -> (f64, f64) {
        if dim == 1 {
            return (self.xx, self.xx);
        }
        let mean = 0.5 * (self.xx + self.yy);
        let r = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (mean - r, mean + r)
    }

    pub fn is_positive_definite(&self, dim: usize) -> bool {
        self.eigenvalues(dim).0 > 0.0
    }

    pub fn max_abs(&self, dim: usize) -> f64 {
        if dim == 1 {
            self.xx.abs()
        } else {
            self.xx.abs().max(self.xy.abs()).max(self.yy.abs())
        }
    }
}

/// Lapse bounds `M <= V <= M0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LapseBounds {
    pub m: f64,
    pub m0: f64,
}

impl LapseBounds {
    pub const UNIT: Self = Self { m: 1.0, m0: 1.0 };
}

/// Smooth bump `exp(1 - 1/(1 - 16 s^2))` supported on `|s| < 1/4`, with peak 1.
pub fn bump(s: f64) -> f64 {
    let q = 16.0 * s * s;
    if q >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - q)).exp()
    }
}

/// Per-epsilon static line element `-V^2 dt^2 + h_ab dx^a dx^b` on a torus.
#[derive(Debug, Clone)]
pub struct StaticMetricFamily {
    torus: Torus,
    grid: Arc<EpsilonGrid>,
    bounds: LapseBounds,
    lapse: Vec<Vec<f64>>,
    spatial: Vec<Vec<Sym2>>,
}

impl StaticMetricFamily {
    pub fn new(
        torus: Torus,
        grid: Arc<EpsilonGrid>,
        bounds: LapseBounds,
        lapse: Vec<Vec<f64>>,
        spatial: Vec<Vec<Sym2>>,
    ) -> Result<Self> {
        if !(bounds.m > 0.0 && bounds.m <= bounds.m0) {
            return Err(Error::InvalidMetric(format!(
                "lapse bounds need 0 < M <= M0, got M={}, M0={}",
                bounds.m, bounds.m0
            )));
        }
        if lapse.len() != grid.len() || spatial.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                found: lapse.len().min(spatial.len()),
            });
        }
        let dim = torus.dim();
        for (index, (v, h)) in lapse.iter().zip(&spatial).enumerate() {
            if v.len() != torus.len() || h.len() != torus.len() {
                return Err(Error::Dimension {
                    expected: torus.len(),
                    found: v.len().min(h.len()),
                });
            }
            for (point, (&vp, hp)) in v.iter().zip(h).enumerate() {
                if !(vp.is_finite() && hp.xx.is_finite() && hp.xy.is_finite() && hp.yy.is_finite()) {
                    return Err(Error::NonFinite { index });
                }
                if !hp.is_positive_definite(dim) {
                    return Err(Error::SingularMetric { index, point });
                }
                let slack = 1e-12 * bounds.m0;
                if vp < bounds.m - slack || vp > bounds.m0 + slack {
                    return Err(Error::InvalidMetric(format!(
                        "lapse {vp} outside [{}, {}] at epsilon index {index}, point {point}",
                        bounds.m, bounds.m0
                    )));
                }
            }
        }
        Ok(Self {
            torus,
            grid,
            bounds,
            lapse,
            spatial,
        })
    }

    pub fn from_fn(
        torus: Torus,
        grid: Arc<EpsilonGrid>,
        bounds: LapseBounds,
        f: impl Fn(f64, [f64; 2]) -> (f64, Sym2) + Sync + Send,
    ) -> Result<Self> {
        let dim = torus.dim();
        let fields = par::map_indices(grid.len(), |k| {
            let eps = grid.eps(k);
            (0..torus.len())
                .map(|p| {
                    let (v, h) = f(eps, torus.coord(p));
                    (v, if dim == 1 { Sym2::line(h.xx) } else { h })
                })
                .unzip::<_, _, Vec<f64>, Vec<Sym2>>()
        });
        let (lapse, spatial) = fields.into_iter().unzip();
        Self::new(torus, grid, bounds, lapse, spatial)
    }

    pub fn flat(torus: Torus, grid: Arc<EpsilonGrid>) -> Self {
        Self::from_fn(torus, grid, LapseBounds::UNIT, |_, _| (1.0, Sym2::IDENTITY)).expect("flat metric is valid")
    }

    /// `V = 1`, `h = (1 + a bump(|x| / eps)) delta`.
    pub fn bump_family(torus: Torus, grid: Arc<EpsilonGrid>, amplitude: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude < 0.9) {
            return Err(Error::InvalidMetric(format!("bump amplitude {amplitude} not in (0, 0.9)")));
        }
        Self::from_fn(torus, grid, LapseBounds::UNIT, move |eps, x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            (1.0, Sym2::scalar(1.0 + amplitude * bump(r / eps)))
        })
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn grid(&self) -> &Arc<EpsilonGrid> {
        &self.grid
    }

    pub fn bounds(&self) -> LapseBounds {
        self.bounds
    }

    pub fn dim(&self) -> usize {
        self.torus.dim()
    }

    pub fn lapse(&self, k: usize) -> &[f64] {
        &self.lapse[k]
    }

    pub fn spatial(&self, k: usize) -> &[Sym2] {
        &self.spatial[k]
    }

    /// Volume density `sqrt|g| = V sqrt(det h)` per point.
    pub fn density(&self, k: usize) -> Vec<f64> {
        self.lapse[k]
            .iter()
            .zip(&self.spatial[k])
            .map(|(v, h)| v * h.det().sqrt())
            .collect()
    }

    /// Largest coordinate light speed `V sqrt(lambda_max(h^-1))` over points and epsilon.
    pub fn max_speed(&self) -> f64 {
        let dim = self.dim();
        self.lapse
            .iter()
            .zip(&self.spatial)
            .flat_map(|(v, h)| v.iter().zip(h).map(move |(v, h)| v * (1.0 / h.eigenvalues(dim).0).sqrt()))
            .fold(0.0, f64::max)
    }

    /// Spacetime metric component `g_ab` at point `p`, with index 0 for time.
    pub fn g_lower(&self, k: usize, p: usize, a: usize, b: usize) -> f64 {
        match (a, b) {
            (0, 0) => -self.lapse[k][p].powi(2),
            (0, _) | (_, 0) => 0.0,
            _ => self.spatial[k][p].get(a - 1, b - 1),
        }
    }

    /// Inverse spacetime metric `g^ab`.
    pub fn g_upper(&self, k: usize, p: usize, a: usize, b: usize) -> f64 {
        match (a, b) {
            (0, 0) => -self.lapse[k][p].powi(-2),
            (0, _) | (_, 0) => 0.0,
            _ => self.spatial[k][p].inverse().get(a - 1, b - 1),
        }
    }

    /// The Riemannian form `e^ab = g^ab + 2 xi^a xi^b / V^2`, that is
    /// `diag(V^-2, h^-1)`.
    pub fn e_upper(&self, k: usize, p: usize, a: usize, b: usize) -> f64 {
        if a == 0 && b == 0 {
            self.lapse[k][p].powi(-2)
        } else {
            self.g_upper(k, p, a, b)
        }
    }
}

/// Negligible change of a metric family's representative.
#[derive(Debug, Clone)]
pub struct MetricDelta {
    pub lapse: Vec<Vec<f64>>,
    pub spatial: Vec<Vec<Sym2>>,
}

impl MetricDelta {
    pub fn zero(metric: &StaticMetricFamily) -> Self {
        let n = metric.torus.len();
        Self {
            lapse: vec![vec![0.0; n]; metric.grid.len()],
            spatial: vec![vec![Sym2::ZERO; n]; metric.grid.len()],
        }
    }

    pub fn from_fn(metric: &StaticMetricFamily, f: impl Fn(f64, [f64; 2]) -> (f64, Sym2)) -> Self {
        let torus = &metric.torus;
        let dim = torus.dim();
        let (lapse, spatial) = (0..metric.grid.len())
            .map(|k| {
                let eps = metric.grid.eps(k);
                (0..torus.len())
                    .map(|p| {
                        let (v, h) = f(eps, torus.coord(p));
                        (v, if dim == 1 { Sym2::new(h.xx, 0.0, 0.0) } else { h })
                    })
                    .unzip::<_, _, Vec<f64>, Vec<Sym2>>()
            })
            .unzip();
        Self { lapse, spatial }
    }

    /// Per-epsilon sup norm over all components.
    pub fn sup_net(&self, metric: &StaticMetricFamily) -> GeneralizedNumber {
        let dim = metric.dim();
        let values = self
            .lapse
            .iter()
            .zip(&self.spatial)
            .map(|(v, h)| {
                v.iter()
                    .map(|x| x.abs())
                    .chain(h.iter().map(|s| s.max_abs(dim)))
                    .fold(0.0, f64::max)
            })
            .collect();
        GeneralizedNumber::from_samples(metric.grid(), values).expect("finite delta")
    }

    /// Checks negligibility and that the perturbed representative is still a valid metric.
    pub fn validate(&self, metric: &StaticMetricFamily, thresholds: &Thresholds) -> Result<()> {
        let n = metric.torus.len();
        if self.lapse.len() != metric.grid.len()
            || self.spatial.len() != metric.grid.len()
            || self.lapse.iter().any(|v| v.len() != n)
            || self.spatial.iter().any(|h| h.len() != n)
        {
            return Err(Error::Dimension {
                expected: n,
                found: self.lapse.first().map_or(0, Vec::len),
            });
        }
        if !thresholds.is_negligible(&self.sup_net(metric)) {
            return Err(Error::Precondition("metric delta is not negligible".into()));
        }
        let dim = metric.dim();
        for k in 0..metric.grid.len() {
            for p in 0..n {
                let v = Split::new(metric.lapse[k][p], self.lapse[k][p]);
                if v.perturbed() <= 0.0 {
                    return Err(Error::InvalidMetric(format!("perturbed lapse vanishes at index {k}, point {p}")));
                }
                let h = metric.spatial[k][p].add(&self.spatial[k][p]);
                if !h.is_positive_definite(dim) {
                    return Err(Error::SingularMetric { index: k, point: p });
                }
            }
        }
        Ok(())
    }
}

/// Empirical growth rates of the metric coefficients and their derivatives in epsilon.
#[derive(Debug, Clone)]
pub struct SettingReport {
    /// Valuation of `sup |g_ab|`; the setting needs `>= -0.1`.
    pub coefficient_slope: f64,
    /// Valuations of `sup |D^k g_ab|` for `k = 1, 2`; the setting needs `>= -k - 0.2`.
    pub derivative_slopes: [f64; 2],
    pub passed: bool,
}

fn slope_of(grid: &Arc<EpsilonGrid>, values: Vec<f64>) -> f64 {
    let net = GeneralizedNumber::from_samples(grid, values).expect("finite sup norms");
    match net.valuation() {
        Ok(fit) => fit.nu(),
        Err(_) => f64::NEG_INFINITY,
    }
}

pub fn validate_setting(metric: &StaticMetricFamily) -> SettingReport {
    let torus = &metric.torus;
    let dim = torus.dim();
    let comps = 1 + dim * (dim + 1) / 2;
    let sups = par::map_indices(metric.grid.len(), |k| {
        let fields: Vec<Vec<f64>> = (0..comps)
            .map(|c| {
                (0..torus.len())
                    .map(|p| match c {
                        0 => metric.lapse[k][p].powi(2),
                        1 => metric.spatial[k][p].xx,
                        2 => metric.spatial[k][p].xy,
                        _ => metric.spatial[k][p].yy,
                    })
                    .collect()
            })
            .collect();
        let mut s = [0.0f64; 3];
        for f in &fields {
            for p in 0..torus.len() {
                s[0] = s[0].max(f[p].abs());
                for a in 0..dim {
                    s[1] = s[1].max(torus.d1(f, p, a).abs());
                    for b in 0..dim {
                        s[2] = s[2].max(torus.d2(f, p, a, b).abs());
                    }
                }
            }
        }
        s
    });
    let column = |i: usize| sups.iter().map(|s| s[i]).collect::<Vec<_>>();
    let coefficient_slope = slope_of(&metric.grid, column(0));
    let derivative_slopes = [slope_of(&metric.grid, column(1)), slope_of(&metric.grid, column(2))];
    let passed = coefficient_slope >= -0.1
        && derivative_slopes[0] >= -1.2
        && derivative_slopes[1] >= -2.2;
    SettingReport {
        coefficient_slope,
        derivative_slopes,
        passed,
    }
}

/// Spacetime Christoffel symbols per epsilon and point, with index 0 for time.
#[derive(Debug, Clone)]
pub struct Christoffel {
    n: usize,
    data: Vec<Vec<f64>>,
}

impl Christoffel {
    /// `Gamma^c_ab` at epsilon index `k` and point `p`.
    pub fn get(&self, k: usize, p: usize, c: usize, a: usize, b: usize) -> f64 {
        let n = self.n;
        self.data[k][p * n * n * n + c * n * n + a * n + b]
    }

    pub fn max_abs(&self, k: usize) -> f64 {
        self.data[k].iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `Gamma^c_ab = g^cd (d_a g_db + d_b g_da - d_d g_ab) / 2` with centered
/// differences in space and no time dependence.
pub fn christoffel(metric: &StaticMetricFamily) -> Result<Christoffel> {
    let torus = &metric.torus;
    let d = torus.dim();
    let n = d + 1;
    let data = par::try_map_indices(metric.grid.len(), |k| {
        let comp: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|a| (0..n).map(|b| (0..torus.len()).map(|p| metric.g_lower(k, p, a, b)).collect()).collect())
            .collect();
        let mut out = vec![0.0; torus.len() * n * n * n];
        for p in 0..torus.len() {
            if metric.spatial[k][p].det() <= 0.0 || metric.lapse[k][p] <= 0.0 {
                return Err(Error::SingularMetric { index: k, point: p });
            }
            // dg[i][a][b] = d_i g_ab; the time derivative slot stays zero.
            let mut dg = vec![vec![vec![0.0; n]; n]; n];
            for i in 1..n {
                for a in 0..n {
                    for b in 0..n {
                        dg[i][a][b] = torus.d1(&comp[a][b], p, i - 1);
                    }
                }
            }
            for c in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let mut s = 0.0;
                        for e in 0..n {
                            let gi = metric.g_upper(k, p, c, e);
                            if gi != 0.0 {
                                s += gi * (dg[a][e][b] + dg[b][e][a] - dg[e][a][b]);
                            }
                        }
                        out[p * n * n * n + c * n * n + a * n + b] = 0.5 * s;
                    }
                }
            }
        }
        Ok(out)
    })?;
    Ok(Christoffel { n, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<EpsilonGrid> {
        super::super::wave_grid()
    }

    #[test]
    fn sym2_algebra() {
        let h = Sym2::new(2.0, 0.5, 1.0);
        assert_eq!(h.det(), 1.75);
        let hi = h.inverse();
        assert!((hi.xx * h.xx + hi.xy * h.xy - 1.0).abs() < 1e-15);
        let (lo, hi) = h.eigenvalues(2);
        assert!((lo * hi - 1.75).abs() < 1e-14 && (lo + hi - 3.0).abs() < 1e-14);
        assert_eq!(Sym2::line(4.0).inverse(), Sym2::line(0.25));
    }

    #[test]
    fn bump_shape() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(0.25), 0.0);
        assert_eq!(bump(-0.3), 0.0);
        assert!(bump(0.1) > 0.0 && bump(0.1) < 1.0);
    }

    #[test]
    fn rejects_invalid_fields() {
        let t = Torus::unit_line(16);
        let g = grid();
        let neg = StaticMetricFamily::from_fn(t.clone(), Arc::clone(&g), LapseBounds::UNIT, |_, _| (1.0, Sym2::line(-1.0)));
        assert!(matches!(neg.unwrap_err(), Error::SingularMetric { index: 0, point: 0 }));
        let wide = StaticMetricFamily::from_fn(t, g, LapseBounds::UNIT, |_, _| (2.0, Sym2::IDENTITY));
        assert!(matches!(wide.unwrap_err(), Error::InvalidMetric(_)));
    }

    #[test]
    fn setting_examples() {
        let g = grid();
        let r = validate_setting(&StaticMetricFamily::flat(Torus::unit_line(64), Arc::clone(&g)));
        assert!(r.passed);
        assert_eq!(r.coefficient_slope, 0.0);

        // Resolve the bump on every sample: support radius eps/4 spans >= 16 cells.
        let fine = EpsilonGrid::new(7, 4).unwrap();
        let t = Torus::unit_line(8192);
        let m = StaticMetricFamily::bump_family(t.clone(), Arc::clone(&fine), 0.5).unwrap();
        let r = validate_setting(&m);
        assert!(r.passed, "{r:?}");
        assert!(r.coefficient_slope.abs() < 0.05);
        assert!((r.derivative_slopes[0] + 1.0).abs() < 0.1, "{r:?}");
        assert!((r.derivative_slopes[1] + 2.0).abs() < 0.1, "{r:?}");

        let loud = StaticMetricFamily::from_fn(t, fine, LapseBounds::UNIT, |eps, x| {
            (1.0, Sym2::line(1.0 + bump(x[0]) / eps))
        })
        .unwrap();
        let r = validate_setting(&loud);
        assert!(!r.passed);
        assert!((r.coefficient_slope + 1.0).abs() < 0.1, "{r:?}");
    }

    #[test]
    fn christoffel_of_flat_metric_vanishes() {
        let m = StaticMetricFamily::flat(Torus::new(2, 8, 1.0).unwrap(), grid());
        let c = christoffel(&m).unwrap();
        assert!((0..m.grid().len()).all(|k| c.max_abs(k) == 0.0));
    }

    #[test]
    fn christoffel_matches_analytic_symbols() {
        let pi2 = 2.0 * std::f64::consts::PI;
        let g = EpsilonGrid::new(4, 4).unwrap();
        let bounds = LapseBounds { m: 0.5, m0: 1.5 };
        let errs: Vec<f64> = [128usize, 256]
            .iter()
            .map(|&n| {
                let t = Torus::unit_line(n);
                let m = StaticMetricFamily::from_fn(t.clone(), Arc::clone(&g), bounds, |_, x| {
                    (1.0 + 0.3 * (pi2 * x[0]).cos(), Sym2::line(2.0 + (pi2 * x[0]).sin()))
                })
                .unwrap();
                let c = christoffel(&m).unwrap();
                (0..t.len())
                    .map(|p| {
                        let x = t.coord(p)[0];
                        let h = 2.0 + (pi2 * x).sin();
                        let dh = pi2 * (pi2 * x).cos();
                        let v = 1.0 + 0.3 * (pi2 * x).cos();
                        let dv = -0.3 * pi2 * (pi2 * x).sin();
                        let e1 = (c.get(0, p, 1, 1, 1) - dh / (2.0 * h)).abs();
                        let e2 = (c.get(0, p, 0, 0, 1) - dv / v).abs();
                        let e3 = (c.get(0, p, 1, 0, 0) - v * dv / h).abs();
                        assert_eq!(c.get(0, p, 0, 0, 0), 0.0);
                        e1.max(e2).max(e3)
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(errs[0] < 1e-2, "{errs:?}");
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.9, "{order}");
    }

    #[test]
    fn christoffel_invariant_under_constant_scaling() {
        let g = EpsilonGrid::new(4, 4).unwrap();
        let pi2 = 2.0 * std::f64::consts::PI;
        let t = Torus::new(2, 16, 1.0).unwrap();
        let h = |c: f64| move |_: f64, x: [f64; 2]| {
            (c.sqrt(), Sym2::new(c * (2.0 + (pi2 * x[0]).sin()), c * 0.3 * (pi2 * x[1]).cos(), c * 1.5))
        };
        let bounds = LapseBounds { m: 0.1, m0: 10.0 };
        let a = christoffel(&StaticMetricFamily::from_fn(t.clone(), Arc::clone(&g), bounds, h(1.0)).unwrap()).unwrap();
        let b = christoffel(&StaticMetricFamily::from_fn(t.clone(), g, bounds, h(3.0)).unwrap()).unwrap();
        for p in 0..t.len() {
            for i in 0..27 {
                let (c, r) = (i / 9, i % 9);
                let (x, y) = (a.get(0, p, c, r / 3, r % 3), b.get(0, p, c, r / 3, r % 3));
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }
}
