//! Wave equation on regularized static space-times, solved representative by
//! representative with finite differences on a periodic box.

mod energy;
mod grid;
mod metric;
mod operator;
mod region;
mod solver;
mod split;

use std::sync::Arc;

use crate::net::EpsilonGrid;

pub use energy::*;
pub use grid::Torus;
pub use metric::{bump, christoffel, validate_setting, Christoffel, LapseBounds, MetricDelta, SettingReport, StaticMetricFamily, Sym2};
pub use operator::{apply, apply_difference, coefficients, dalembert_apply, div_flux, split_coefficients, Coefficients, SplitCoefficients};
pub use region::*;
pub use solver::*;
pub use split::Split;

pub const DEFAULT_WAVE_SAMPLES: usize = 12;
pub const DEFAULT_WAVE_TAIL_WINDOW: usize = 6;
pub const DEFAULT_CFL: f64 = 0.5;

/// The coarser epsilon grid used for wave runs.
pub fn wave_grid() -> Arc<EpsilonGrid> {
    EpsilonGrid::new(DEFAULT_WAVE_SAMPLES, DEFAULT_WAVE_TAIL_WINDOW).expect("valid default grid")
}
