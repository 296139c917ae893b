//! Sharp topology on generalized numbers: the ultrametric distance, dressed
//! balls, their interval models, and nested-ball intersections.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::net::{same_grid, EpsilonGrid, GeneralizedNumber, NUMERIC_FLOOR};

/// Slope tolerance used for sharp norms of fitted nets.
pub const FIT_TOLERANCE: f64 = 0.05;

/// Longest chain accepted by [`intersect_nested`].
pub const MAX_CHAIN: usize = 64;

/// Relative headroom kept when shrinking models, so that nesting survives rounding.
const SHRINK_MARGIN: f64 = 1.0 - 1e-9;

fn check_grid(a: &Arc<EpsilonGrid>, b: &Arc<EpsilonGrid>) -> Result<()> {
    if same_grid(a, b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `d(x, y) = |x - y|_e`.
///
/// Differences of nearby centers often vanish exactly on most of the tail,
/// leaving one or two nonzero samples. Those are scored by the pointwise
/// exponent `min ln|z_k| / ln eps_k` instead of a regression.
pub fn ultrametric_distance(x: &GeneralizedNumber, y: &GeneralizedNumber) -> Result<f64> {
    let z = x.try_sub(y)?;
    match z.sharp_norm() {
        Err(Error::Fit { usable }) if usable > 0 => {
            let grid = z.grid();
            let nu = grid
                .tail()
                .filter(|&k| z.value(k).abs() >= NUMERIC_FLOOR)
                .map(|k| z.value(k).abs().ln() / grid.eps(k).ln())
                .fold(f64::INFINITY, f64::min);
            Ok((-nu).exp())
        }
        other => other,
    }
}

/// Closed sharp ball of radius `r = exp(-rho)`.
#[derive(Debug, Clone)]
pub struct DressedBall {
    center: GeneralizedNumber,
    radius: f64,
    rho: f64,
}

impl DressedBall {
    pub fn new(center: GeneralizedNumber, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Precondition(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius, rho: -radius.ln() })
    }

    pub fn with_rho(center: GeneralizedNumber, rho: f64) -> Result<Self> {
        let ball = Self::new(center, (-rho).exp())?;
        Ok(Self { rho, ..ball })
    }

    pub fn center(&self) -> &GeneralizedNumber {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn contains(&self, y: &GeneralizedNumber) -> Result<bool> {
        Ok(ultrametric_distance(y, &self.center)? <= self.radius)
    }
}

/// Positive net, non-decreasing as epsilon decreases, of sharp norm one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionENet {
    grid: Arc<EpsilonGrid>,
    samples: Vec<f64>,
}

impl ConditionENet {
    pub fn new(grid: &Arc<EpsilonGrid>, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), found: samples.len() });
        }
        if let Some(index) = samples.iter().position(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Precondition(format!("condition (E) net not positive at index {index}")));
        }
        if let Some(index) = samples.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Precondition(format!("condition (E) net decreases after index {index}")));
        }
        let slope = GeneralizedNumber::from_samples(grid, samples.clone())?.valuation()?.nu();
        if slope.abs() > FIT_TOLERANCE {
            return Err(Error::ConditionE { slope });
        }
        Ok(Self { grid: Arc::clone(grid), samples })
    }

    pub fn constant(grid: &Arc<EpsilonGrid>, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    pub fn grid(&self) -> &Arc<EpsilonGrid> {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

/// `C_k = 2 max(raw_0, ..., raw_k, 1)`.
pub fn make_condition_e(raw: &GeneralizedNumber) -> Result<ConditionENet> {
    if let Some(index) = raw.values().iter().position(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::Precondition(format!("raw sample {index} is negative or not finite")));
    }
    let mut running = 1.0f64;
    let samples = raw
        .values()
        .iter()
        .map(|&r| {
            running = running.max(r);
            2.0 * running
        })
        .collect();
    ConditionENet::new(raw.grid(), samples)
}

/// Intervals `[x_k - C_k eps_k^rho, x_k + C_k eps_k^rho]`.
#[derive(Debug, Clone)]
pub struct EuclideanModel {
    pub rho: f64,
    pub centers: Vec<f64>,
    pub half_widths: Vec<f64>,
}

impl EuclideanModel {
    pub fn interval(&self, k: usize) -> (f64, f64) {
        (self.centers[k] - self.half_widths[k], self.centers[k] + self.half_widths[k])
    }

    pub fn contains_point(&self, k: usize, y: f64) -> bool {
        (y - self.centers[k]).abs() <= self.half_widths[k]
    }

    /// `inner_k` lies inside `self_k`, checked on centers and half-widths.
    pub fn contains_model_at(&self, inner: &Self, k: usize) -> bool {
        (inner.centers[k] - self.centers[k]).abs() + inner.half_widths[k] <= self.half_widths[k]
    }

    /// A representative of `y` inside every interval, obtained by replacing the
    /// samples that fall outside with the model center. Also returns the
    /// replaced indices; a point of the open ball only needs a prefix.
    pub fn capture(&self, y: &GeneralizedNumber) -> (GeneralizedNumber, Vec<usize>) {
        let mut replaced = Vec::new();
        let samples = (0..y.values().len())
            .map(|k| {
                if self.contains_point(k, y.value(k)) {
                    y.value(k)
                } else {
                    replaced.push(k);
                    self.centers[k]
                }
            })
            .collect();
        let captured = GeneralizedNumber::from_samples(y.grid(), samples).expect("finite model centers");
        (captured, replaced)
    }
}

/// Model of `ball` with the given net, centered at `representative`, which
/// should be a representative of the ball's center.
pub fn euclidean_model(ball: &DressedBall, c: &ConditionENet, representative: &GeneralizedNumber) -> Result<EuclideanModel> {
    check_grid(representative.grid(), c.grid())?;
    let grid = c.grid();
    Ok(EuclideanModel {
        rho: ball.rho,
        centers: representative.values().to_vec(),
        half_widths: (0..grid.len()).map(|k| c.samples[k] * grid.eps(k).powf(ball.rho)).collect(),
    })
}

/// Witness data for a nested intersection.
#[derive(Debug, Clone)]
pub struct NestedCertificate {
    /// `d(x, x_i)` for the witness `x`.
    pub distances: Vec<f64>,
    pub radii: Vec<f64>,
    pub models: Vec<EuclideanModel>,
    pub nets: Vec<ConditionENet>,
    /// Indices where the representative of the next center was re-centered.
    pub recentered: Vec<Vec<usize>>,
    /// Every model interval lies inside its predecessor, for every epsilon.
    pub models_nested: bool,
    /// `d(x, x_i) <= r_i (1 + tolerance)` for every ball.
    pub passed: bool,
}

/// Relative tolerance of the witness distances.
pub const WITNESS_TOLERANCE: f64 = 1e-3;

/// Builds a nested sequence of interval models and returns the midpoint of the
/// innermost interval, per epsilon, as a point of every ball.
pub fn intersect_nested(balls: &[DressedBall]) -> Result<(GeneralizedNumber, NestedCertificate)> {
    let n = balls.len();
    if n == 0 || n > MAX_CHAIN {
        return Err(Error::Precondition(format!("chain length {n} outside 1..={MAX_CHAIN}")));
    }
    let grid = Arc::clone(balls[0].center.grid());
    for b in balls {
        check_grid(&grid, b.center.grid())?;
    }
    for (i, w) in balls.windows(2).enumerate() {
        if !(w[1].radius < w[0].radius) {
            return Err(Error::Precondition(format!("radii not strictly decreasing at ball {i}")));
        }
        let d = ultrametric_distance(&w[1].center, &w[0].center)?;
        if d > w[0].radius * FIT_TOLERANCE.exp() {
            return Err(Error::NotNested { outer: i, inner: i + 1 });
        }
    }

    let len = grid.len();
    let eps_pow = |k: usize, rho: f64| grid.eps(k).powf(rho);
    let mut reps: Vec<Vec<f64>> = vec![balls[0].center.values().to_vec()];
    let mut nets: Vec<ConditionENet> = Vec::with_capacity(n);
    let mut recentered = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n {
        let current = &reps[i];
        let raw: Vec<f64> = match balls.get(i + 1) {
            Some(next) => (0..len)
                .map(|k| (next.center.value(k) - current[k]).abs() / eps_pow(k, balls[i].rho))
                .collect(),
            None => vec![0.0; len],
        };
        let fresh = make_condition_e(&GeneralizedNumber::from_samples(&grid, raw.clone())?)?;
        let net = match nets.last() {
            None => fresh,
            Some(outer) => {
                let shift = balls[i - 1].rho - balls[i].rho;
                let samples = (0..len)
                    .map(|k| (0.5 * SHRINK_MARGIN * outer.samples[k] * eps_pow(k, shift)).min(fresh.samples[k]))
                    .collect();
                ConditionENet::new(&grid, samples)?
            }
        };
        if let Some(next) = balls.get(i + 1) {
            let mut moved = Vec::new();
            let rep = (0..len)
                .map(|k| {
                    if raw[k] <= 0.5 * net.samples[k] {
                        next.center.value(k)
                    } else {
                        moved.push(k);
                        current[k]
                    }
                })
                .collect();
            reps.push(rep);
            recentered.push(moved);
        }
        nets.push(net);
    }

    let models: Vec<EuclideanModel> = balls
        .iter()
        .zip(&nets)
        .zip(&reps)
        .map(|((b, c), r)| euclidean_model(b, c, &GeneralizedNumber::from_samples(&grid, r.clone())?))
        .collect::<Result<_>>()?;
    let models_nested = models
        .windows(2)
        .all(|w| (0..len).all(|k| w[0].contains_model_at(&w[1], k)));

    let witness = GeneralizedNumber::from_samples(&grid, models[n - 1].centers.clone())?;
    let distances = balls
        .iter()
        .map(|b| ultrametric_distance(&witness, &b.center))
        .collect::<Result<Vec<_>>>()?;
    let radii: Vec<f64> = balls.iter().map(|b| b.radius).collect();
    let passed = distances
        .iter()
        .zip(&radii)
        .all(|(d, r)| *d <= r * (1.0 + WITNESS_TOLERANCE));
    Ok((
        witness,
        NestedCertificate {
            distances,
            radii,
            models,
            nets,
            recentered,
            models_nested,
            passed,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Arc<EpsilonGrid> {
        EpsilonGrid::standard()
    }

    fn power_sum(g: &Arc<EpsilonGrid>, terms: &[(f64, f64)]) -> GeneralizedNumber {
        GeneralizedNumber::from_fn(g, |_, e| terms.iter().map(|&(c, a)| c * e.powf(a)).sum()).unwrap()
    }

    /// `x_i = x_{i-1} + c_i(eps) eps^i`, accumulated sample by sample.
    fn chain(g: &Arc<EpsilonGrid>, n: usize, coeff: impl Fn(usize, usize) -> f64) -> Vec<GeneralizedNumber> {
        let mut out: Vec<GeneralizedNumber> = Vec::new();
        for i in 1..=n {
            let prev = out.last().cloned().unwrap_or_else(|| GeneralizedNumber::zero(g));
            out.push(GeneralizedNumber::from_fn(g, |k, e| prev.value(k) + coeff(i, k) * e.powi(i as i32)).unwrap());
        }
        out
    }

    #[test]
    fn distance_examples() {
        let g = grid();
        let x = power_sum(&g, &[(1.0, 1.0), (3.0, 2.5)]);
        assert_eq!(ultrametric_distance(&x, &x).unwrap(), 0.0);
        let e3 = GeneralizedNumber::power(1.0, 3.0, &g).unwrap();
        let d = ultrametric_distance(&GeneralizedNumber::zero(&g), &e3).unwrap();
        assert!((d - (-3.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn condition_e_examples() {
        let g = grid();
        let c = make_condition_e(&GeneralizedNumber::one(&g)).unwrap();
        assert!(c.samples().iter().all(|&s| s == 2.0));

        let raw = GeneralizedNumber::from_fn(&g, |k, _| (k as f64).sin().abs()).unwrap();
        let c = make_condition_e(&raw).unwrap();
        let mut running = 0.0f64;
        for k in 0..g.len() {
            running = running.max(raw.value(k));
            assert_eq!(c.samples()[k], 2.0 * running.max(1.0));
            assert!(c.samples()[k] <= 2.0);
        }

        let growing = GeneralizedNumber::power(1.0, -0.5, &g).unwrap();
        assert!(matches!(make_condition_e(&growing), Err(Error::ConditionE { .. })));
        let negative = GeneralizedNumber::from_fn(&g, |k, _| if k == 3 { -1.0 } else { 1.0 }).unwrap();
        assert!(make_condition_e(&negative).is_err());
    }

    #[test]
    fn condition_e_invariants_checked() {
        let g = grid();
        assert!(ConditionENet::new(&g, vec![1.0; 39]).is_err());
        let mut s = vec![1.0; 40];
        s[10] = 0.5;
        assert!(ConditionENet::new(&g, s).is_err());
        assert!(ConditionENet::constant(&g, 0.0).is_err());
        assert!(ConditionENet::constant(&g, 3.0).is_ok());
    }

    #[test]
    fn unit_model() {
        let g = grid();
        let ball = DressedBall::new(GeneralizedNumber::zero(&g), (-1.0f64).exp()).unwrap();
        assert!((ball.rho() - 1.0).abs() < 1e-15);
        let m = euclidean_model(&ball, &ConditionENet::constant(&g, 1.0).unwrap(), ball.center()).unwrap();
        for k in 0..g.len() {
            let (lo, hi) = m.interval(k);
            let e = g.eps(k);
            assert!((lo + e).abs() <= 1e-15 * e && (hi - e).abs() <= 1e-15 * e);
        }
        assert!(DressedBall::new(GeneralizedNumber::zero(&g), 0.0).is_err());
    }

    #[test]
    fn open_ball_points_are_captured_after_a_prefix() {
        let g = grid();
        let x = power_sum(&g, &[(1.0, 0.5)]);
        let ball = DressedBall::with_rho(x.clone(), 2.0).unwrap();
        let m = euclidean_model(&ball, &ConditionENet::constant(&g, 1.0).unwrap(), &x).unwrap();
        let y = &x + &power_sum(&g, &[(50.0, 2.3)]);
        assert!(ultrametric_distance(&y, &x).unwrap() < ball.radius());
        let (captured, replaced) = m.capture(&y);
        assert!(!replaced.is_empty());
        assert!(replaced.iter().all(|&k| !g.tail().contains(&k)));
        assert!((0..g.len()).all(|k| m.contains_point(k, captured.value(k))));
        assert_eq!(ultrametric_distance(&captured, &y).unwrap(), 0.0);
    }

    #[test]
    fn sphere_point_escapes_every_sample() {
        let g = grid();
        let x = power_sum(&g, &[(1.0, 1.0)]);
        let ball = DressedBall::with_rho(x.clone(), 1.5).unwrap();
        let c = make_condition_e(&GeneralizedNumber::from_fn(&g, |k, _| 1.0 + 1.0 / (k + 1) as f64).unwrap()).unwrap();
        let m = euclidean_model(&ball, &c, &x).unwrap();
        let y = GeneralizedNumber::from_fn(&g, |k, _| x.value(k) + 2.0 * m.half_widths[k]).unwrap();
        assert!((0..g.len()).all(|k| !m.contains_point(k, y.value(k))));
        let d = ultrametric_distance(&y, &x).unwrap();
        assert!((d - ball.radius()).abs() < 1e-3 * ball.radius());
    }

    #[test]
    fn single_ball() {
        let g = grid();
        let x = power_sum(&g, &[(2.0, 0.0), (1.0, 1.0)]);
        let (w, cert) = intersect_nested(&[DressedBall::new(x.clone(), 0.3).unwrap()]).unwrap();
        assert_eq!(w, x);
        assert!(cert.passed && cert.models_nested);
        assert_eq!(cert.distances, vec![0.0]);
    }

    fn check_chain(centers: &[GeneralizedNumber], rhos: &[f64]) -> NestedCertificate {
        let balls: Vec<DressedBall> = centers
            .iter()
            .zip(rhos)
            .map(|(c, &r)| DressedBall::with_rho(c.clone(), r).unwrap())
            .collect();
        let (w, cert) = intersect_nested(&balls).unwrap();
        assert!(cert.models_nested && cert.passed, "{:?}", cert.distances);
        let deepest = centers.last().unwrap();
        for (b, d) in balls.iter().zip(&cert.distances) {
            let oracle = ultrametric_distance(deepest, b.center()).unwrap();
            assert!(oracle <= b.radius() * (1.0 + WITNESS_TOLERANCE));
            assert!((d - oracle).abs() <= oracle.max(*d) * (FIT_TOLERANCE.exp() - 1.0), "{d} vs {oracle}");
        }
        for m in &cert.models {
            assert!(m.half_widths.iter().all(|&h| h > 0.0));
        }
        let _ = w;
        cert
    }

    #[test]
    fn power_chain() {
        let g = grid();
        let centers = chain(&g, 10, |_, _| 1.0);
        let rhos: Vec<f64> = (1..=10).map(|i| i as f64 + 0.5).collect();
        check_chain(&centers, &rhos);
    }

    #[test]
    fn branched_chain() {
        let g = grid();
        let centers = chain(&g, 10, |_, k| if k % 2 == 0 { 1.0 } else { 2.0 });
        let rhos: Vec<f64> = (1..=10).map(|i| i as f64 + 0.5).collect();
        let cert = check_chain(&centers, &rhos);
        // Each parity class on its own: the witness restricted to even or odd
        // indices stays within every radius.
        for parity in 0..2 {
            let (w, _) = intersect_nested(
                &centers
                    .iter()
                    .zip(&rhos)
                    .map(|(c, &r)| {
                        let branch = GeneralizedNumber::from_fn(&g, |k, _| if k % 2 == parity { c.value(k) } else { 0.0 }).unwrap();
                        DressedBall::with_rho(branch, r).unwrap()
                    })
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            for (k, &h) in cert.models.last().unwrap().half_widths.iter().enumerate() {
                if k % 2 == parity {
                    assert!((w.value(k) - cert.models.last().unwrap().centers[k]).abs() <= h);
                }
            }
        }
    }

    #[test]
    fn nesting_violation_names_the_pair() {
        let g = grid();
        let a = DressedBall::with_rho(GeneralizedNumber::zero(&g), 1.0).unwrap();
        let b = DressedBall::with_rho(GeneralizedNumber::power(1.0, 2.0, &g).unwrap(), 2.0).unwrap();
        let c = DressedBall::with_rho(GeneralizedNumber::power(1.0, 0.5, &g).unwrap(), 3.0).unwrap();
        let err = intersect_nested(&[a.clone(), b.clone(), c]).unwrap_err();
        assert!(matches!(err, Error::NotNested { outer: 1, inner: 2 }));
        assert!(intersect_nested(&[b, a]).is_err());
        assert!(intersect_nested(&[]).is_err());
    }

    #[test]
    fn shrinking_recenters_large_parameters() {
        let g = grid();
        // A large coefficient on the second step forces small models early on.
        let x1 = GeneralizedNumber::zero(&g);
        let x2 = GeneralizedNumber::power(1e6, 1.0, &g).unwrap();
        let x3 = &x2 + &GeneralizedNumber::power(1e9, 2.0, &g).unwrap();
        let cert = check_chain(&[x1, x2, x3], &[1.0, 2.0, 3.0]);
        assert!(!cert.recentered[1].is_empty());
        assert!(cert.recentered.iter().flatten().all(|k| !g.tail().contains(k)));
    }

    #[test]
    fn witness_stable_under_representative_change() {
        let g = grid();
        let centers = chain(&g, 6, |_, _| 1.0);
        let rhos: Vec<f64> = (1..=6).map(|i| i as f64 + 0.5).collect();
        let a = check_chain(&centers, &rhos);
        // Changes on the large-parameter prefix and a negligible term.
        let moved: Vec<GeneralizedNumber> = centers
            .iter()
            .map(|c| GeneralizedNumber::from_fn(&g, |k, e| c.value(k) + if k < 5 { 0.3 } else { e.powi(30) }).unwrap())
            .collect();
        let b = check_chain(&moved, &rhos);
        for (x, y) in a.distances.iter().zip(&b.distances) {
            assert!((x - y).abs() <= x.max(*y) * (FIT_TOLERANCE.exp() - 1.0));
        }
    }

    fn power_net(g: &Arc<EpsilonGrid>, terms: &[(f64, i32)]) -> GeneralizedNumber {
        power_sum(g, &terms.iter().map(|&(c, a)| (c, a as f64)).collect::<Vec<_>>())
    }

    fn terms() -> impl Strategy<Value = Vec<(f64, i32)>> {
        prop::collection::vec((prop_oneof![-4.0f64..-0.5, 0.5f64..4.0], 0i32..8), 1..4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn strong_triangle(a in terms(), b in terms(), c in terms()) {
            let g = grid();
            let (x, y, z) = (power_net(&g, &a), power_net(&g, &b), power_net(&g, &c));
            let dxz = ultrametric_distance(&x, &z).unwrap();
            let dxy = ultrametric_distance(&x, &y).unwrap();
            let dyz = ultrametric_distance(&y, &z).unwrap();
            prop_assert!(dxz <= dxy.max(dyz) + 1e-6);
        }

        #[test]
        fn isosceles(a in terms(), b in terms(), c in terms()) {
            let g = grid();
            let (x, y, z) = (power_net(&g, &a), power_net(&g, &b), power_net(&g, &c));
            let dxy = ultrametric_distance(&x, &y).unwrap();
            let dyz = ultrametric_distance(&y, &z).unwrap();
            let dxz = ultrametric_distance(&x, &z).unwrap();
            let tol = FIT_TOLERANCE.exp() - 1.0;
            prop_assume!((dxy - dyz).abs() > tol * dxy.max(dyz));
            prop_assert!((dxz - dxy.max(dyz)).abs() <= tol * dxz.max(dxy.max(dyz)));
        }
    }
}
