use std::sync::Arc;

use crate::error::{Error, Result};
use crate::net::{AsymptoticFit, EpsilonGrid, GeneralizedNumber, Thresholds};
use crate::par;

use super::grid::Torus;
use super::metric::{validate_setting, MetricDelta, StaticMetricFamily};
use super::operator::{apply, apply_difference, coefficients, split_coefficients};

/// Growth factor over the initial sup norm that counts as a blow-up.
pub const INSTABILITY_FACTOR: f64 = 1e6;

/// Cauchy data `u(0) = v`, `d_t u(0) = w`, one field per epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    pub v: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
}

impl CauchyData {
    pub fn from_fn(
        grid: &EpsilonGrid,
        torus: &Torus,
        v: impl Fn(f64, [f64; 2]) -> f64,
        w: impl Fn(f64, [f64; 2]) -> f64,
    ) -> Self {
        let field = |f: &dyn Fn(f64, [f64; 2]) -> f64| {
            (0..grid.len())
                .map(|k| torus.sample(|x| f(grid.eps(k), x)))
                .collect()
        };
        Self {
            v: field(&v),
            w: field(&w),
        }
    }

    pub fn zero(grid: &EpsilonGrid, torus: &Torus) -> Self {
        Self::from_fn(grid, torus, |_, _| 0.0, |_, _| 0.0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let sum = |a: &[Vec<f64>], b: &[Vec<f64>]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
                .collect()
        };
        Self {
            v: sum(&self.v, &other.v),
            w: sum(&self.w, &other.w),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let mul = |a: &[Vec<f64>]| a.iter().map(|x| x.iter().map(|p| p * c).collect()).collect();
        Self {
            v: mul(&self.v),
            w: mul(&self.w),
        }
    }

    fn check(&self, grid: &EpsilonGrid, torus: &Torus) -> Result<()> {
        for (k, (v, w)) in self.v.iter().zip(&self.w).enumerate() {
            if v.len() != torus.len() || w.len() != torus.len() {
                return Err(Error::Dimension {
                    expected: torus.len(),
                    found: v.len().min(w.len()),
                });
            }
            if v.iter().chain(w).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { index: k });
            }
        }
        if self.v.len() != grid.len() || self.w.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                found: self.v.len().min(self.w.len()),
            });
        }
        Ok(())
    }
}

/// Time levels around a recorded slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub prev: Vec<f64>,
    pub cur: Vec<f64>,
    pub next: Vec<f64>,
}

impl Slice {
    pub fn sup(&self) -> f64 {
        self.cur.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub t_final: f64,
    pub cfl: f64,
    /// Number of recorded intervals; slices sit at `j T / snapshots`.
    pub snapshots: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            cfl: super::DEFAULT_CFL,
            snapshots: 10,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::Precondition(format!("cfl {} not in (0, 1)", self.cfl)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Precondition(format!("final time {} must be positive", self.t_final)));
        }
        if self.snapshots == 0 {
            return Err(Error::Precondition("need at least one snapshot interval".into()));
        }
        Ok(())
    }

    /// Uniform step `T / (snapshots * m)` with the smallest `m` meeting the CFL bound.
    fn step(&self, dx: f64, speed: f64) -> (f64, usize) {
        let limit = self.cfl * dx / speed;
        let per = (self.t_final / (self.snapshots as f64 * limit)).ceil().max(1.0) as usize;
        (self.t_final / (self.snapshots * per) as f64, per)
    }
}

/// Per-epsilon leapfrog solution recorded at the slice times.
#[derive(Debug, Clone)]
pub struct WaveRun {
    pub grid: Arc<EpsilonGrid>,
    pub torus: Torus,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `slices[k][j]` is epsilon index `k` at time `times[j]`.
    pub slices: Vec<Vec<Slice>>,
}

impl WaveRun {
    pub fn slice_index(&self, tau: f64) -> Result<usize> {
        let tol = 1e-9 * self.times.last().copied().unwrap_or(1.0).max(1.0);
        self.times
            .iter()
            .position(|t| (t - tau).abs() <= tol)
            .ok_or(Error::NotASlice(tau))
    }

    /// Per-epsilon sup of `|u|` over every recorded slice.
    pub fn sup_net(&self) -> GeneralizedNumber {
        let values = self
            .slices
            .iter()
            .map(|s| s.iter().map(Slice::sup).fold(0.0, f64::max))
            .collect();
        GeneralizedNumber::from_samples(&self.grid, values).expect("finite run")
    }

    pub fn final_slice(&self, k: usize) -> &Slice {
        self.slices[k].last().expect("at least one slice")
    }
}

/// Leapfrog for `blocks` stacked fields of length `n` with acceleration `accel`.
fn integrate(
    index: usize,
    n: usize,
    blocks: usize,
    dt: f64,
    per: usize,
    snapshots: usize,
    u0: Vec<f64>,
    w0: &[f64],
    accel: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<Vec<Vec<Slice>>> {
    let a0 = accel(&u0);
    let taylor = |sign: f64| -> Vec<f64> {
        (0..u0.len())
            .map(|i| u0[i] + sign * dt * w0[i] + 0.5 * dt * dt * a0[i])
            .collect()
    };
    let mut prev = taylor(-1.0);
    let mut next = taylor(1.0);
    let mut cur = u0;
    let reference: Vec<f64> = (0..blocks)
        .map(|b| {
            let r = b * n..(b + 1) * n;
            let sv = cur[r.clone()].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let sw = w0[r].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            sv.max(sw * dt * (per * snapshots) as f64)
        })
        .collect();
    let split = |s: &Slice| -> Vec<Slice> {
        (0..blocks)
            .map(|b| {
                let r = b * n..(b + 1) * n;
                Slice {
                    prev: s.prev[r.clone()].to_vec(),
                    cur: s.cur[r.clone()].to_vec(),
                    next: s.next[r].to_vec(),
                }
            })
            .collect()
    };
    let mut out: Vec<Vec<Slice>> = vec![Vec::with_capacity(snapshots + 1); blocks];
    let mut record = |prev: &[f64], cur: &[f64], next: &[f64]| -> Result<()> {
        let s = Slice {
            prev: prev.to_vec(),
            cur: cur.to_vec(),
            next: next.to_vec(),
        };
        for (b, part) in split(&s).into_iter().enumerate() {
            if part.cur.iter().any(|x| !x.is_finite())
                || (reference[b] > 0.0 && part.sup() > INSTABILITY_FACTOR * reference[b])
            {
                return Err(Error::Unstable { index });
            }
            out[b].push(part);
        }
        Ok(())
    };
    record(&prev, &cur, &next)?;
    for step in 1..=per * snapshots {
        let a = accel(&next);
        let newer: Vec<f64> = (0..a.len())
            .map(|i| 2.0 * next[i] - cur[i] + dt * dt * a[i])
            .collect();
        prev = std::mem::replace(&mut cur, std::mem::replace(&mut next, newer));
        if step % per == 0 {
            record(&prev, &cur, &next)?;
        }
    }
    Ok(out)
}

fn prepare(
    metric: &StaticMetricFamily,
    data: &CauchyData,
    opts: &SolveOptions,
) -> Result<(f64, usize, Vec<f64>)> {
    opts.validate()?;
    let report = validate_setting(metric);
    if !report.passed {
        return Err(Error::InvalidMetric(format!(
            "setting bounds fail: coefficient slope {:.3}, derivative slopes {:.3}, {:.3}",
            report.coefficient_slope, report.derivative_slopes[0], report.derivative_slopes[1]
        )));
    }
    data.check(metric.grid(), metric.torus())?;
    let (dt, per) = opts.step(metric.torus().dx(), metric.max_speed());
    let times = (0..=opts.snapshots)
        .map(|j| opts.t_final * j as f64 / opts.snapshots as f64)
        .collect();
    Ok((dt, per, times))
}

/// Solves `d_t^2 u = L_eps u` per epsilon by leapfrog with a Taylor start.
pub fn solve(metric: &StaticMetricFamily, data: &CauchyData, opts: &SolveOptions) -> Result<WaveRun> {
    let (dt, per, times) = prepare(metric, data, opts)?;
    let torus = metric.torus();
    let n = torus.len();
    let slices = par::try_map_indices(metric.grid().len(), |k| {
        let c = coefficients(metric, k);
        integrate(k, n, 1, dt, per, opts.snapshots, data.v[k].clone(), &data.w[k], |u| {
            apply(torus, &c, u)
        })
        .map(|mut s| s.remove(0))
    })?;
    Ok(WaveRun {
        grid: Arc::clone(metric.grid()),
        torus: torus.clone(),
        dt,
        times,
        slices,
    })
}

/// Solves the base problem together with the exact difference to the problem
/// with data `data + data_delta` and metric `metric + metric_delta`.
pub fn solve_split(
    metric: &StaticMetricFamily,
    metric_delta: &MetricDelta,
    data: &CauchyData,
    data_delta: &CauchyData,
    opts: &SolveOptions,
) -> Result<(WaveRun, WaveRun)> {
    let (dt, per, times) = prepare(metric, data, opts)?;
    data_delta.check(metric.grid(), metric.torus())?;
    let torus = metric.torus();
    let n = torus.len();
    let both = par::try_map_indices(metric.grid().len(), |k| {
        let c = split_coefficients(metric, metric_delta, k);
        let u0 = [data.v[k].as_slice(), &data_delta.v[k]].concat();
        let w0 = [data.w[k].as_slice(), &data_delta.w[k]].concat();
        integrate(k, n, 2, dt, per, opts.snapshots, u0, &w0, |state| {
            let (u, w) = state.split_at(n);
            let mut a = apply(torus, &c.base, u);
            a.extend(apply_difference(torus, &c, u, w));
            a
        })
    })?;
    let (base, diff): (Vec<_>, Vec<_>) = both
        .into_iter()
        .map(|mut s| {
            let d = s.pop().expect("difference block");
            (s.pop().expect("base block"), d)
        })
        .unzip();
    let run = |slices| WaveRun {
        grid: Arc::clone(metric.grid()),
        torus: torus.clone(),
        dt,
        times: times.clone(),
        slices,
    };
    Ok((run(base), run(diff)))
}

/// Size of the difference between two solutions of one problem.
#[derive(Debug, Clone)]
pub struct DifferenceReport {
    /// Per-epsilon sup over the run of `|u^ - u|`.
    pub sup_difference: GeneralizedNumber,
    pub fit: AsymptoticFit,
    /// Empirical valuation; infinite when the difference vanishes on the tail.
    pub valuation: f64,
    pub difference: WaveRun,
}

fn difference_report(difference: WaveRun) -> Result<DifferenceReport> {
    let sup_difference = difference.sup_net();
    let fit = sup_difference.valuation()?;
    Ok(DifferenceReport {
        valuation: fit.nu(),
        fit,
        sup_difference,
        difference,
    })
}

/// Effect of a negligible change of Cauchy data.
pub fn uniqueness_test(
    metric: &StaticMetricFamily,
    data: &CauchyData,
    perturbation: &CauchyData,
    opts: &SolveOptions,
    thresholds: &Thresholds,
) -> Result<DifferenceReport> {
    let sup = |f: &[Vec<f64>]| f.iter().map(|x| x.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
    let grid = metric.grid();
    for field in [&perturbation.v, &perturbation.w] {
        let net = GeneralizedNumber::from_samples(grid, sup(field))?;
        if !thresholds.is_negligible(&net) {
            return Err(Error::Precondition("data perturbation is not negligible".into()));
        }
    }
    let (_, diff) = solve_split(metric, &MetricDelta::zero(metric), data, perturbation, opts)?;
    difference_report(diff)
}

/// Effect of replacing the metric representative by a negligibly different one.
pub fn representative_independence(
    metric: &StaticMetricFamily,
    delta: &MetricDelta,
    data: &CauchyData,
    opts: &SolveOptions,
    thresholds: &Thresholds,
) -> Result<DifferenceReport> {
    delta.validate(metric, thresholds)?;
    let zero = CauchyData::zero(metric.grid(), metric.torus());
    let (_, diff) = solve_split(metric, delta, data, &zero, opts)?;
    difference_report(diff)
}
