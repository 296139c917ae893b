use crate::error::{Error, Result};

use super::metric::{LapseBounds, StaticMetricFamily};

/// Tolerance added to the spacelike bound `-1/(2M)`.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;

/// Region under `S = t - h (1 - |x - c|^2 / rho^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParaboloidRegion {
    pub height: f64,
    pub radius: f64,
    pub center: [f64; 2],
}

impl ParaboloidRegion {
    /// Largest admissible `h / rho`.
    pub fn ratio_limit(bounds: LapseBounds) -> f64 {
        0.5 * (bounds.m0 / (6.0 * bounds.m)).sqrt()
    }

    pub fn ratio(&self) -> f64 {
        self.height / self.radius
    }

    /// `S` at time `t` and spatial point `x`.
    pub fn level(&self, t: f64, x: [f64; 2]) -> f64 {
        let r2 = (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2);
        t - self.height * (1.0 - r2 / (self.radius * self.radius))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionFailure {
    pub eps_index: usize,
    pub offset: [f64; 2],
    pub value: f64,
}

/// Result of checking `<dS, dS> <= -1/(2M)` on the sampled boundary.
#[derive(Debug, Clone)]
pub struct RegionCertificate {
    pub bound: f64,
    /// Largest `<dS, dS>` over samples and tail epsilon.
    pub max_norm: f64,
    /// `<dS, dS>` at the apex, per tail epsilon.
    pub apex: Vec<f64>,
    pub samples: usize,
    pub failures: Vec<RegionFailure>,
    pub passed: bool,
}

/// Checks the ratio condition, then evaluates the normal of `S` at every
/// lattice offset within `rho` of the center snapped to the grid.
pub fn build_region(
    bounds: LapseBounds,
    height: f64,
    radius: f64,
    center: [f64; 2],
    metric: &StaticMetricFamily,
) -> Result<(ParaboloidRegion, RegionCertificate)> {
    if !(height > 0.0 && radius > 0.0 && height.is_finite() && radius.is_finite()) {
        return Err(Error::Precondition(format!("paraboloid needs h, rho > 0, got {height}, {radius}")));
    }
    if !(bounds.m > 0.0 && bounds.m0 >= bounds.m) {
        return Err(Error::Precondition(format!("invalid lapse bounds {} {}", bounds.m, bounds.m0)));
    }
    let region = ParaboloidRegion { height, radius, center };
    let limit = ParaboloidRegion::ratio_limit(bounds);
    if region.ratio() > limit {
        return Err(Error::RatioViolated { ratio: region.ratio(), limit });
    }

    let torus = metric.torus();
    let dim = torus.dim();
    let dx = torus.dx();
    let origin = torus.nearest(center);
    let reach = (radius / dx).floor() as isize;
    let mut offsets = Vec::new();
    let span = |axis: usize| if axis < dim { -reach..=reach } else { 0..=0 };
    for i in span(0) {
        for j in span(1) {
            let x = [i as f64 * dx, j as f64 * dx];
            if x[0] * x[0] + x[1] * x[1] <= radius * radius * (1.0 + 1e-12) {
                let mut p = torus.shift(origin, 0, i);
                if dim > 1 {
                    p = torus.shift(p, 1, j);
                }
                offsets.push((x, p));
            }
        }
    }

    let bound = -1.0 / (2.0 * bounds.m);
    let slope = 2.0 * height / (radius * radius);
    let mut max_norm = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    let mut apex = Vec::new();
    for k in metric.grid().tail() {
        let lapse = metric.lapse(k);
        let spatial = metric.spatial(k);
        for &(x, p) in &offsets {
            let hinv = spatial[p].inverse();
            let value = -lapse[p].powi(-2) + slope * slope * hinv.quad(x);
            if x == [0.0, 0.0] {
                apex.push(value);
            }
            max_norm = max_norm.max(value);
            if !(value <= bound + CERTIFICATE_TOLERANCE) {
                failures.push(RegionFailure { eps_index: k, offset: x, value });
            }
        }
    }
    let passed = failures.is_empty();
    Ok((
        region,
        RegionCertificate {
            bound,
            max_norm,
            apex,
            samples: offsets.len(),
            failures,
            passed,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave::grid::Torus;
    use crate::wave::metric::Sym2;
    use crate::wave::wave_grid;

    fn flat(dim: usize) -> StaticMetricFamily {
        StaticMetricFamily::flat(Torus::new(dim, 64, 4.0).unwrap(), wave_grid())
    }

    #[test]
    fn flat_certificate() {
        for dim in [1, 2] {
            let m = flat(dim);
            let (region, cert) = build_region(LapseBounds::UNIT, 0.2, 1.0, [0.0, 0.0], &m).unwrap();
            assert!(cert.passed, "{cert:?}");
            assert!(cert.max_norm <= -0.5 + CERTIFICATE_TOLERANCE);
            // The rim value is -1 + (2h/rho)^2.
            assert!((cert.max_norm - (-1.0 + 0.16)).abs() < 1e-12);
            assert!(cert.apex.iter().all(|&a| a == -1.0));
            assert_eq!(region.ratio(), 0.2);
            assert!(region.level(0.0, [1.0, 0.0]).abs() < 1e-15 && region.level(0.2, [0.0, 0.0]).abs() < 1e-15);
        }
    }

    #[test]
    fn ratio_rejected() {
        let m = flat(1);
        let err = build_region(LapseBounds::UNIT, 1.0, 1.0, [0.0, 0.0], &m).unwrap_err();
        assert!(matches!(err, Error::RatioViolated { .. }));
        assert!(build_region(LapseBounds::UNIT, 0.0, 1.0, [0.0, 0.0], &m).is_err());
        assert!(ParaboloidRegion::ratio_limit(LapseBounds::UNIT) > 0.2);
    }

    #[test]
    fn failing_samples_reported() {
        let t = Torus::new(1, 64, 4.0).unwrap();
        let bounds = LapseBounds { m: 0.5, m0: 4.0 };
        // A slow lapse makes the rim nearly null.
        let m = StaticMetricFamily::from_fn(t, wave_grid(), bounds, |_, _| (3.0, Sym2::line(0.05))).unwrap();
        let (_, cert) = build_region(bounds, 0.5, 1.0, [0.3, 0.0], &m).unwrap();
        assert!(!cert.passed && !cert.failures.is_empty());
        assert!(cert.apex.iter().all(|&a| (a + 1.0 / 9.0).abs() < 1e-15));
    }
}
