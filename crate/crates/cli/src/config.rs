//! Experiment configuration.
//!
//! A config file is TOML with the optional top-level keys `experiment`,
//! `seed` and `out` and the tables `[grid]`, `[algebra]`, `[causality]`,
//! `[wave]`, `[region]`, `[sharp]` and `[scaling]`. Every key has a default;
//! unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Algebra,
    Causality,
    Wave,
    Sharp,
    Scaling,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Algebra => "algebra",
            Self::Causality => "causality",
            Self::Wave => "wave",
            Self::Sharp => "sharp",
            Self::Scaling => "scaling",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricFamily {
    /// `V = 1`, `h = identity`.
    Flat,
    /// `V = 1`, `h = (1 + a phi(|x|/eps)) identity`.
    Bump,
    /// Smooth epsilon-dependent lapse and spatial metric with `M = 1/4`, `M0 = 4`.
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub samples: usize,
    pub tail_window: usize,
    pub m_inv: f64,
    pub m_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { samples: 40, tail_window: 16, m_inv: 8.0, m_max: 12.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgebraConfig {
    pub valuation_trials: usize,
    pub eigen_trials: usize,
    pub congruence_trials: usize,
    pub perturbation_valuation: f64,
}

impl Default for AlgebraConfig {
    fn default() -> Self {
        Self { valuation_trials: 100, eigen_trials: 50, congruence_trials: 50, perturbation_valuation: 14.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CausalityConfig {
    pub gap_trials: usize,
    pub riemann_trials: usize,
    pub dec_trials: usize,
}

impl Default for CausalityConfig {
    fn default() -> Self {
        Self { gap_trials: 200, riemann_trials: 100, dec_trials: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveConfig {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub cfl: f64,
    pub t_final: f64,
    pub snapshots: usize,
    /// Size and tail window of the epsilon grid used by wave runs.
    pub samples: usize,
    pub tail_window: usize,
    pub metric: MetricFamily,
    pub amplitude: f64,
    /// Resolutions of the flat convergence study.
    pub convergence: Vec<usize>,
    /// Exponent of the data and metric perturbations.
    pub perturbation_valuation: f64,
}

impl Default for WaveConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n: 256,
            length: 1.0,
            cfl: 0.5,
            t_final: 1.0,
            snapshots: 10,
            samples: 12,
            tail_window: 6,
            metric: MetricFamily::Flat,
            amplitude: 0.5,
            convergence: vec![64, 128, 256],
            perturbation_valuation: 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionConfig {
    pub height: f64,
    pub radius: f64,
    pub m: f64,
    pub m0: f64,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self { height: 0.2, radius: 1.0, m: 1.0, m0: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SharpConfig {
    pub chain_length: usize,
    pub random_chains: usize,
    pub max_random_length: usize,
}

impl Default for SharpConfig {
    fn default() -> Self {
        Self { chain_length: 10, random_chains: 50, max_random_length: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub h: f64,
    /// Quadrature points of the rescaled variable.
    pub points: usize,
    pub constant: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self { h: 2.0, points: 4097, constant: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub grid: GridConfig,
    pub algebra: AlgebraConfig,
    pub causality: CausalityConfig,
    pub wave: WaveConfig,
    pub region: RegionConfig,
    pub sharp: SharpConfig,
    pub scaling: ScalingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 20240601,
            out: None,
            grid: GridConfig::default(),
            algebra: AlgebraConfig::default(),
            causality: CausalityConfig::default(),
            wave: WaveConfig::default(),
            region: RegionConfig::default(),
            sharp: SharpConfig::default(),
            scaling: ScalingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError(msg()))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        check((4..=60).contains(&g.samples), || format!("grid.samples {} not in 4..=60", g.samples))?;
        check(g.tail_window >= 4 && g.tail_window <= g.samples, || {
            format!("grid.tail_window {} not in 4..=samples", g.tail_window)
        })?;
        check(g.m_inv > 0.0 && g.m_inv.is_finite(), || format!("grid.m_inv {} must be positive", g.m_inv))?;
        check(g.m_max >= g.m_inv && g.m_max.is_finite(), || format!("grid.m_max {} below m_inv", g.m_max))?;

        let a = &self.algebra;
        for (name, n) in [
            ("algebra.valuation_trials", a.valuation_trials),
            ("algebra.eigen_trials", a.eigen_trials),
            ("algebra.congruence_trials", a.congruence_trials),
            ("causality.gap_trials", self.causality.gap_trials),
            ("causality.riemann_trials", self.causality.riemann_trials),
            ("causality.dec_trials", self.causality.dec_trials),
            ("sharp.random_chains", self.sharp.random_chains),
        ] {
            check((1..=10_000).contains(&n), || format!("{name} {n} not in 1..=10000"))?;
        }
        check(a.perturbation_valuation > 0.0 && a.perturbation_valuation <= 30.0, || {
            format!("algebra.perturbation_valuation {} not in (0, 30]", a.perturbation_valuation)
        })?;

        let w = &self.wave;
        check(w.dim == 1 || w.dim == 2, || format!("wave.dim {} must be 1 or 2", w.dim))?;
        let max_n = if w.dim == 1 { 1 << 16 } else { 1 << 10 };
        check(w.n >= 8 && w.n <= max_n, || format!("wave.n {} not in 8..={max_n}", w.n))?;
        check(w.length > 0.0 && w.length.is_finite(), || format!("wave.length {} must be positive", w.length))?;
        check(w.cfl > 0.0 && w.cfl < 1.0, || format!("wave.cfl {} not in (0, 1)", w.cfl))?;
        check(w.t_final > 0.0 && w.t_final <= 100.0, || format!("wave.t_final {} not in (0, 100]", w.t_final))?;
        check((1..=1000).contains(&w.snapshots), || format!("wave.snapshots {} not in 1..=1000", w.snapshots))?;
        check((4..=20).contains(&w.samples), || format!("wave.samples {} not in 4..=20", w.samples))?;
        check(w.tail_window >= 4 && w.tail_window <= w.samples, || {
            format!("wave.tail_window {} not in 4..=samples", w.tail_window)
        })?;
        check(w.amplitude > 0.0 && w.amplitude < 0.9, || format!("wave.amplitude {} not in (0, 0.9)", w.amplitude))?;
        check(
            w.convergence.len() >= 2 && w.convergence.iter().all(|&n| (8..=1 << 14).contains(&n)),
            || "wave.convergence needs at least two resolutions in 8..=16384".into(),
        )?;
        check(w.convergence.windows(2).all(|p| p[1] == 2 * p[0]), || {
            "wave.convergence resolutions must double".into()
        })?;
        check(w.perturbation_valuation >= 4.0 && w.perturbation_valuation <= 30.0, || {
            format!("wave.perturbation_valuation {} not in [4, 30]", w.perturbation_valuation)
        })?;

        let r = &self.region;
        check(r.height > 0.0 && r.radius > 0.0, || "region.height and region.radius must be positive".into())?;
        check(r.m > 0.0 && r.m0 >= r.m, || format!("region bounds need 0 < m <= m0, got {} {}", r.m, r.m0))?;

        let s = &self.sharp;
        check((1..=sharp_limit()).contains(&s.chain_length), || {
            format!("sharp.chain_length {} not in 1..={}", s.chain_length, sharp_limit())
        })?;
        check((2..=sharp_limit()).contains(&s.max_random_length), || {
            format!("sharp.max_random_length {} not in 2..={}", s.max_random_length, sharp_limit())
        })?;

        let c = &self.scaling;
        check(c.h > 0.0 && c.h.is_finite(), || format!("scaling.h {} must be positive", c.h))?;
        check((65..=1 << 20).contains(&c.points), || format!("scaling.points {} not in 65..=1048576", c.points))?;
        check(c.constant.is_finite(), || "scaling.constant must be finite".into())?;
        Ok(())
    }
}

/// Longest chain accepted by the sharp experiment; chains stop short of
/// exponents whose powers underflow on the finest samples.
pub const fn sharp_limit() -> usize {
    24
}
