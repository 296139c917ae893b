//! Positive scaling of a mollifier net and of a constant field.

use std::sync::Arc;

use anyhow::{bail, Result};
use colombeau::{EpsilonGrid, GeneralizedNumber, Thresholds};

/// Compactly supported profile on `(-1, 1)`, normalized by quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mollifier {
    /// `exp(-1 / (1 - s^2))`.
    Bump,
}

impl Mollifier {
    fn profile(self, s: f64) -> f64 {
        match self {
            Self::Bump => {
                if s.abs() < 1.0 {
                    (-1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub h: f64,
    /// `D_eps(h) = int rho_eps(h x) - rho_eps(x) dx`.
    pub defect: GeneralizedNumber,
    pub defect_valuation: f64,
    pub defect_negligible: bool,
    /// The same defect for the constant field.
    pub constant_defect: GeneralizedNumber,
    pub constant_valuation: f64,
    pub constant_negligible: bool,
}

/// Evaluates the defects on `x = eps s`, `s` on a uniform grid covering the
/// supports of both `rho_eps(x)` and `rho_eps(h x)`. With `rho_eps(x) =
/// rho(x / eps) / eps` the integral becomes `sum (rho(h s) - rho(s)) ds`.
pub fn scaling_demo(
    h: f64,
    mollifier: Mollifier,
    constant: f64,
    points: usize,
    grid: &Arc<EpsilonGrid>,
    thresholds: &Thresholds,
) -> Result<ScalingReport> {
    if !(h > 0.0 && h.is_finite()) {
        bail!("scaling factor must be positive, got {h}");
    }
    if points < 3 {
        bail!("need at least three quadrature points");
    }
    let reach = 1.0f64.max(1.0 / h);
    let ds = 2.0 * reach / (points - 1) as f64;
    let s: Vec<f64> = (0..points).map(|i| -reach + i as f64 * ds).collect();
    let mass: f64 = s.iter().map(|&t| mollifier.profile(t)).sum::<f64>() * ds;
    let rho = |t: f64| mollifier.profile(t) / mass;

    // int f(h x) - f(x) dx with x = eps s.
    let defect_of = |f: &dyn Fn(f64, f64) -> f64| {
        GeneralizedNumber::from_fn(grid, |_, eps| {
            s.iter().map(|&t| f(eps, h * eps * t) - f(eps, eps * t)).sum::<f64>() * eps * ds
        })
    };
    let defect = defect_of(&|eps, x| rho(x / eps) / eps)?;
    let constant_defect = defect_of(&|_, _| constant)?;
    let nu = |x: &GeneralizedNumber| x.valuation().map(|f| f.nu()).unwrap_or(f64::NAN);
    Ok(ScalingReport {
        h,
        defect_valuation: nu(&defect),
        defect_negligible: thresholds.is_negligible(&defect),
        constant_valuation: nu(&constant_defect),
        constant_negligible: thresholds.is_negligible(&constant_defect),
        defect,
        constant_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(h: f64) -> ScalingReport {
        scaling_demo(h, Mollifier::Bump, 3.0, 4097, &EpsilonGrid::standard(), &Thresholds::default()).unwrap()
    }

    #[test]
    fn halving_defect() {
        let r = run(2.0);
        for &d in r.defect.values() {
            assert!((d + 0.5).abs() < 1e-3, "{d}");
        }
        assert!(r.defect_valuation.abs() < 0.2);
        assert!(!r.defect_negligible);
        assert!(r.constant_defect.values().iter().all(|&d| d == 0.0));
        assert_eq!(r.constant_valuation, f64::INFINITY);
        assert!(r.constant_negligible);
    }

    #[test]
    fn identity_scaling_is_exact() {
        let r = run(1.0);
        assert!(r.defect.values().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn stretching_defect() {
        let r = run(0.5);
        for &d in r.defect.values() {
            assert!((d - 1.0).abs() < 1e-3, "{d}");
        }
    }

    #[test]
    fn rejects_nonpositive_factor() {
        let g = EpsilonGrid::standard();
        assert!(scaling_demo(0.0, Mollifier::Bump, 1.0, 101, &g, &Thresholds::default()).is_err());
        assert!(scaling_demo(-2.0, Mollifier::Bump, 1.0, 101, &g, &Thresholds::default()).is_err());
    }
}
