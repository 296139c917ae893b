//! Config-driven runner for the colombeau experiments.

pub mod config;
pub mod criteria;
pub mod experiments;
pub mod report;
pub mod scaling;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use config::{ConfigError, Experiment, ExperimentConfig};
use report::{Outcome, MANIFEST_SCHEMA};

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid_k: Option<usize>,
    pub tail_window: Option<usize>,
    pub m_inv: Option<f64>,
    pub m_max: Option<f64>,
    pub cfl: Option<f64>,
}

/// Applies overrides and validates. `--grid-k` and `--tail-window` address
/// the wave grid for the wave experiment and the main grid otherwise.
pub fn resolve(
    experiment: Experiment,
    base: ExperimentConfig,
    o: &Overrides,
) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = base;
    if let Some(e) = cfg.experiment {
        if e != experiment {
            return Err(ConfigError(format!("config is for experiment {e}, not {experiment}")));
        }
    }
    cfg.experiment = Some(experiment);
    if let Some(out) = &o.out {
        cfg.out = Some(out.clone());
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    let wave = experiment == Experiment::Wave;
    if let Some(k) = o.grid_k {
        if wave {
            cfg.wave.samples = k;
        } else {
            cfg.grid.samples = k;
        }
    }
    if let Some(w) = o.tail_window {
        if wave {
            cfg.wave.tail_window = w;
        } else {
            cfg.grid.tail_window = w;
        }
    }
    if let Some(m) = o.m_inv {
        cfg.grid.m_inv = m;
    }
    if let Some(m) = o.m_max {
        cfg.grid.m_max = m;
    }
    if let Some(c) = o.cfl {
        cfg.wave.cfl = c;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Output(anyhow::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "{e}"),
            Self::Output(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for RunError {}

impl RunError {
    pub const fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'a str,
    version: &'a str,
    experiment: String,
    seed: u64,
    parallel: bool,
    config: &'a ExperimentConfig,
    derived: serde_json::Map<String, serde_json::Value>,
    assumptions: Vec<&'a str>,
    files: Vec<String>,
    checks: Vec<serde_json::Value>,
}

const ASSUMPTIONS: [&str; 2] = [
    "the boundary of the causal future of the initial slice is the slice itself",
    "per-epsilon work may run concurrently; results are collected in epsilon order",
];

pub fn default_out(experiment: Experiment) -> PathBuf {
    PathBuf::from("colombeau-out").join(experiment.to_string())
}

/// Runs a resolved config and writes CSVs, `manifest.json` and `summary.txt`.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    cfg.validate().map_err(RunError::Config)?;
    let experiment = cfg
        .experiment
        .ok_or_else(|| RunError::Config(ConfigError("no experiment selected".into())))?;
    let ctx = criteria::Context::new(cfg).map_err(|e| RunError::Config(ConfigError(format!("{e:#}"))))?;
    let out_dir = cfg.out.clone().unwrap_or_else(|| default_out(experiment));
    let outcome = experiments::run(&ctx, experiment);
    write_outputs(&out_dir, cfg, experiment, &outcome).map_err(RunError::Output)?;
    Ok(outcome)
}

fn write_outputs(dir: &Path, cfg: &ExperimentConfig, experiment: Experiment, outcome: &Outcome) -> anyhow::Result<()> {
    use anyhow::Context as _;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = experiment.to_string();
    let mut files = Vec::new();
    for t in &outcome.tables {
        t.write(dir, &name)?;
        files.push(t.file_name());
    }
    report::write_summary(dir, &name, outcome)?;
    files.push("summary.txt".into());
    files.push("manifest.json".into());
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        version: env!("CARGO_PKG_VERSION"),
        experiment: name,
        seed: cfg.seed,
        parallel: colombeau::par::is_parallel(),
        config: cfg,
        derived: outcome
            .derived
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::json!(v)))
            .collect(),
        assumptions: ASSUMPTIONS.to_vec(),
        files,
        checks: outcome
            .checks
            .iter()
            .map(|c| serde_json::json!({ "id": c.id, "name": c.name, "passed": c.passed, "margin": report::num(c.margin) }))
            .collect(),
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), text + "\n").context("writing manifest.json")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_address_the_right_grid() {
        let o = Overrides {
            grid_k: Some(10),
            tail_window: Some(5),
            cfl: Some(0.4),
            ..Default::default()
        };
        let wave = resolve(Experiment::Wave, ExperimentConfig::default(), &o).unwrap();
        assert_eq!((wave.wave.samples, wave.wave.tail_window, wave.grid.samples), (10, 5, 40));
        assert_eq!(wave.wave.cfl, 0.4);
        let alg = resolve(Experiment::Algebra, ExperimentConfig::default(), &o).unwrap();
        assert_eq!((alg.grid.samples, alg.grid.tail_window, alg.wave.samples), (10, 5, 12));
    }

    #[test]
    fn mismatched_experiment_is_rejected() {
        let cfg = ExperimentConfig {
            experiment: Some(Experiment::Sharp),
            ..Default::default()
        };
        assert!(resolve(Experiment::Wave, cfg, &Overrides::default()).is_err());
    }

    #[test]
    fn invalid_override_is_rejected() {
        let o = Overrides {
            cfl: Some(2.0),
            ..Default::default()
        };
        assert!(resolve(Experiment::Wave, ExperimentConfig::default(), &o).is_err());
    }
}
