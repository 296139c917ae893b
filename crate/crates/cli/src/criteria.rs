//! The twelve acceptance checks, parameterized by the experiment config.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{ensure, Result};
use colombeau::linalg::{self, GenMatrix, GenVector};
use colombeau::lorentz::{self, EnergySource, GenBilinearForm};
use colombeau::sharp::{self, DressedBall, FIT_TOLERANCE, WITNESS_TOLERANCE};
use colombeau::wave::{self, CauchyData, LapseBounds, MetricDelta, SolveOptions, StaticMetricFamily, Sym2, Torus};
use colombeau::{par, EpsilonGrid, Error, GeneralizedNumber, Thresholds};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, MetricFamily};
use crate::report::{num, Check, Outcome, Table};
use crate::scaling::{scaling_demo, Mollifier};

/// Resolved grids and thresholds shared by the checks.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: ExperimentConfig,
    pub grid: Arc<EpsilonGrid>,
    pub wave_grid: Arc<EpsilonGrid>,
    pub thresholds: Thresholds,
}

impl Context {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            grid: EpsilonGrid::new(cfg.grid.samples, cfg.grid.tail_window)?,
            wave_grid: EpsilonGrid::new(cfg.wave.samples, cfg.wave.tail_window)?,
            thresholds: Thresholds::new(cfg.grid.m_inv, cfg.grid.m_max)?,
            cfg: cfg.clone(),
        })
    }

    /// Independent stream per check, so each check sees the same draws
    /// whichever subset is run.
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        r.set_stream(stream);
        r
    }

    fn m_inv(&self) -> f64 {
        self.cfg.grid.m_inv
    }
}

fn single(check: Check) -> Outcome {
    Outcome {
        checks: vec![check],
        ..Default::default()
    }
}

/// Valuation, or `-inf` when the tail does not support a fit.
fn nu(x: &GeneralizedNumber) -> f64 {
    x.valuation().map(|f| f.nu()).unwrap_or(f64::NEG_INFINITY)
}

fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let c = rng.gen_range(lo..hi);
    if rng.gen_bool(0.5) {
        c
    } else {
        -c
    }
}

pub fn valuation_accuracy(ctx: &Context) -> Result<Outcome> {
    let mut rng = ctx.rng(1);
    let params: Vec<(f64, f64)> = (0..ctx.cfg.algebra.valuation_trials)
        .map(|_| (rng.gen_range(0.1..=10.0), rng.gen_range(-6.0..=6.0)))
        .collect();
    let errors = par::try_map_indices(params.len(), |i| {
        let (c, a) = params[i];
        GeneralizedNumber::power(c, a, &ctx.grid).map(|x| (nu(&x) - a).abs())
    })?;
    let worst = errors.iter().copied().fold(0.0, f64::max);
    Ok(single(Check::new(
        "C1",
        "valuation accuracy",
        1e-3 - worst,
        format!("{} nets, max |nu - a| = {}", params.len(), num(worst)),
    )))
}

pub fn eigenvalue_well_definedness(ctx: &Context) -> Result<Outcome> {
    let mut rng = ctx.rng(2);
    let g = &ctx.grid;
    let b = ctx.cfg.algebra.perturbation_valuation;
    let noise = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
    let pert = GenMatrix::from_fn(g, 4, |_, e| &noise * e.powf(b))?;
    let families: Vec<Vec<(f64, f64)>> = (0..ctx.cfg.algebra.eigen_trials)
        .map(|_| (0..16).map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(-2.0..2.0))).collect())
        .collect();
    let target = b - 2.0;
    let results = par::try_map_indices(families.len(), |t| -> Result<(f64, f64)> {
        let terms = &families[t];
        let a = GenMatrix::from_fn(g, 4, |_, e| {
            DMatrix::from_fn(4, 4, |i, j| {
                let (c, p) = terms[4 * i.min(j) + i.max(j)];
                c * e.powf(p)
            })
        })?;
        let r = linalg::well_definedness_check(&a, &pert)?;
        let worst_nu = r.differences.iter().map(nu).fold(f64::INFINITY, f64::min);
        let bound = r
            .tail
            .iter()
            .map(|&(d, bd)| if bd > 0.0 { (bd - d) / bd } else if d == 0.0 { 1.0 } else { -1.0 })
            .fold(f64::INFINITY, f64::min);
        Ok((worst_nu, bound))
    })?;
    let worst_nu = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let worst_bound = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(single(Check::all(
        "C2",
        "eigenvalue well-definedness",
        &[
            Check::new(
                "C2a",
                "difference valuation",
                worst_nu - target,
                format!("min nu = {} over {} families, need >= {}", num(worst_nu), results.len(), num(target)),
            ),
            Check::new(
                "C2b",
                "matching bound",
                worst_bound,
                format!("min relative slack to sqrt(2)|E|_F = {}", num(worst_bound)),
            ),
        ],
    )))
}

pub fn index_stability(ctx: &Context) -> Result<Outcome> {
    let g = &ctx.grid;
    let m_inv = ctx.m_inv();
    let mink = linalg::index(&GenMatrix::minkowski(g, 4), m_inv)?;
    let sign = GeneralizedNumber::even(g).try_sub(&GeneralizedNumber::odd(g))?;
    let branched = linalg::index(&GenMatrix::diagonal(&[sign, GeneralizedNumber::one(g)])?, m_inv)?;

    let mut rng = ctx.rng(3);
    let mut cases = Vec::new();
    while cases.len() < ctx.cfg.algebra.congruence_trials {
        let q: DMatrix<f64> = DMatrix::from_fn(4, 4, |i, j| (if i == j { 2.0 } else { 0.0 }) + rng.gen_range(-1.0..1.0));
        let d: Vec<(f64, f64)> = (0..4).map(|_| (signed(&mut rng, 0.5, 3.0), rng.gen_range(-0.3..=0.3))).collect();
        if q.determinant().abs() > 0.1 {
            cases.push((q, d));
        }
    }
    let agree = par::try_map_indices(cases.len(), |t| -> Result<bool> {
        let (q, d) = &cases[t];
        let entries = d
            .iter()
            .map(|&(c, a)| GeneralizedNumber::power(c, a, g))
            .collect::<colombeau::Result<Vec<_>>>()?;
        let diag = GenMatrix::diagonal(&entries)?;
        let expected = d.iter().filter(|p| p.0 < 0.0).count();
        let congruent = linalg::symmetrize(&diag.congruence(&GenMatrix::constant(g, q)));
        Ok(linalg::index(&diag, m_inv)?.index == Some(expected)
            && linalg::index(&congruent, m_inv)?.index == Some(expected))
    })?;
    let invariant = agree.iter().filter(|&&b| b).count();
    Ok(single(Check::all(
        "C3",
        "index stability",
        &[
            Check::new(
                "C3a",
                "minkowski index",
                if mink.index == Some(1) { 1.0 } else { -1.0 },
                format!("{:?}", mink.index),
            ),
            Check::new(
                "C3b",
                "branched sign",
                if branched.index.is_none() { 1.0 } else { -1.0 },
                format!("{:?}, stable = {}", branched.index, branched.stable),
            ),
            Check::new(
                "C3c",
                "sylvester invariance",
                invariant as f64 - cases.len() as f64,
                format!("{invariant}/{} congruences", cases.len()),
            ),
        ],
    )))
}

/// Future timelike net: spatial components `c eps^a`, time component
/// dominating their Euclidean length by a factor 3 in every sample.
fn timelike(grid: &Arc<EpsilonGrid>, rng: &mut ChaCha8Rng, spread: f64) -> Result<GenVector> {
    let terms: Vec<(f64, f64)> = (0..4).map(|_| (signed(rng, 0.2, 3.0), rng.gen_range(-spread..=spread))).collect();
    let comps = terms
        .iter()
        .map(|&(c, a)| GeneralizedNumber::power(c, a, grid))
        .collect::<colombeau::Result<Vec<_>>>()?;
    let time = GeneralizedNumber::from_fn(grid, |k, _| {
        let s = comps[1..].iter().map(|c| c.value(k).powi(2)).sum::<f64>().sqrt();
        1.5 * comps[0].value(k).abs().max(2.0 * s)
    })?;
    let mut all = vec![time];
    all.extend(comps[1..].iter().cloned());
    Ok(GenVector::from_components(&all)?)
}

fn timelike_pairs(ctx: &Context, stream: u64, count: usize, spread: f64) -> Result<Vec<(GenVector, GenVector)>> {
    let mut rng = ctx.rng(stream);
    (0..count)
        .map(|_| Ok((timelike(&ctx.grid, &mut rng, spread)?, timelike(&ctx.grid, &mut rng, spread)?)))
        .collect()
}

fn minkowski(ctx: &Context) -> GenBilinearForm {
    GenBilinearForm::minkowski(&ctx.grid, 4, ctx.thresholds)
}

/// Least-squares slope of `ln|x_k|` against `ln eps_k` over the given samples.
fn slope(grid: &EpsilonGrid, x: &GeneralizedNumber, ks: &[usize]) -> f64 {
    let pts: Vec<(f64, f64)> = ks.iter().map(|&k| (grid.eps(k).ln(), x.value(k).abs().ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn inverse_cauchy_schwarz(ctx: &Context) -> Result<Outcome> {
    let g = minkowski(ctx);
    let pairs = timelike_pairs(ctx, 4, ctx.cfg.causality.gap_trials, 1.0)?;
    let worst = par::try_map_indices(pairs.len(), |i| {
        lorentz::inverse_cs_gap(&g, &pairs[i].0, &pairs[i].1).map(|r| r.min_normalized)
    })?
    .into_iter()
    .fold(f64::INFINITY, f64::min);

    let gr = &ctx.grid;
    let zero = GeneralizedNumber::zero(gr);
    let u = GenVector::constant(gr, &[1.0, 0.0, 0.0, 0.0]);
    let chi_eps = GeneralizedNumber::even(gr).try_mul(&GeneralizedNumber::power(1.0, 1.0, gr)?)?;
    let v = GenVector::from_components(&[GeneralizedNumber::one(gr), chi_eps, zero.clone(), zero])?;
    let gap = lorentz::inverse_cs_gap(&g, &u, &v)?.gap;
    let odd_zero = gr.tail().filter(|k| k % 2 == 1).all(|k| gap.value(k) == 0.0);
    let even: Vec<usize> = gr.tail().filter(|k| k % 2 == 0).collect();
    let even_slope = slope(gr, &gap, &even);
    Ok(single(Check::all(
        "C4",
        "inverse cauchy-schwarz",
        &[
            Check::new(
                "C4a",
                "random timelike pairs",
                worst + lorentz::SIGN_TOLERANCE,
                format!("{} pairs, min normalized gap = {}", pairs.len(), num(worst)),
            ),
            Check::new(
                "C4b",
                "idempotent example",
                if odd_zero { 1e-3 - (even_slope - 2.0).abs() } else { -1.0 },
                format!("odd branch zero = {odd_zero}, even slope = {}", num(even_slope)),
            ),
        ],
    )))
}

pub fn riemannian_construction(ctx: &Context) -> Result<Outcome> {
    let g = minkowski(ctx);
    let pairs = timelike_pairs(ctx, 5, ctx.cfg.causality.riemann_trials, 1.0)?;
    let positive = par::try_map_indices(pairs.len(), |i| -> colombeau::Result<bool> {
        let u = lorentz::normalize_timelike(&g, &pairs[i].0)?;
        let v = lorentz::normalize_timelike(&g, &pairs[i].1)?;
        let h = lorentz::riemann_from_pair(&g, &u, &v)?;
        Ok(linalg::is_positive_definite_minors(h.matrix(), ctx.m_inv()))
    })?
    .into_iter()
    .filter(|&b| b)
    .count();

    let t = GenVector::constant(&ctx.grid, &[1.0, 0.0, 0.0, 0.0]);
    let h = lorentz::riemann_from_pair(&g, &t, &t)?;
    let half = DMatrix::from_diagonal_element(4, 4, 0.5);
    let dev = h.matrix().slices().iter().map(|m| (m - &half).amax()).fold(0.0, f64::max);
    Ok(single(Check::all(
        "C5",
        "riemannian construction",
        &[
            Check::new(
                "C5a",
                "principal minors",
                positive as f64 - pairs.len() as f64,
                format!("{positive}/{} pairs", pairs.len()),
            ),
            Check::new("C5b", "minkowski example", 1e-12 - dev, format!("max deviation from diag(1/2) = {}", num(dev))),
        ],
    )))
}

pub fn dominant_energy(ctx: &Context) -> Result<Outcome> {
    let g = minkowski(ctx);
    let gr = &ctx.grid;
    let pairs = timelike_pairs(ctx, 6, ctx.cfg.causality.dec_trials, 0.5)?;
    let mut rng = ctx.rng(7);
    let sources: Vec<[EnergySource; 3]> = (0..pairs.len())
        .map(|_| {
            let scalar = GeneralizedNumber::constant(gr, rng.gen_range(-2.0..=2.0));
            let cov: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            let rank2 = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-2.0..=2.0));
            [
                EnergySource::Scalar(scalar),
                EnergySource::Covector(GenVector::constant(gr, &cov)),
                EnergySource::Rank2(GenMatrix::constant(gr, &rank2)),
            ]
        })
        .collect();
    let results = par::try_map_indices(pairs.len(), |i| -> colombeau::Result<(f64, f64)> {
        let xi = lorentz::normalize_timelike(&g, &pairs[i].0)?;
        let eta = lorentz::normalize_timelike(&g, &pairs[i].1)?;
        let (_, e_upper) = lorentz::flip_metric(&g, &xi)?;
        let mut sign = f64::INFINITY;
        let mut identity = 0.0f64;
        for (order, w) in sources[i].iter().enumerate() {
            let t = lorentz::energy_tensor(&g, &e_upper, w, order)?;
            let r = lorentz::dec_check(&t, &g, &xi, &eta)?;
            sign = sign.min(r.s1_min_normalized).min(r.s2_min_normalized);
            if let EnergySource::Covector(theta) = w {
                let g_inv = g.inverse()?;
                let tt = g_inv.bilinear(theta, theta);
                let ff = g.eval(&r.flux, &r.flux);
                let xx = g.eval(&xi, &xi);
                for k in 0..gr.len() {
                    let f = r.flux.at(k);
                    let scale = f.dot(&(g.matrix().at(k).abs() * f.abs())).max(1.0);
                    let resid = (ff.value(k) - 0.25 * tt.value(k).powi(2) * xx.value(k)).abs();
                    identity = identity.max(resid / scale);
                }
            }
        }
        Ok((sign, identity))
    })?;
    let sign = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let identity = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(single(Check::all(
        "C6",
        "dominant energy condition",
        &[
            Check::new(
                "C6a",
                "energy contractions",
                sign + lorentz::SIGN_TOLERANCE,
                format!("{} observer pairs, k = 0, 1, 2, min normalized = {}", pairs.len(), num(sign)),
            ),
            Check::new(
                "C6b",
                "flux identity",
                1e-10 - identity,
                format!("max relative residual = {}", num(identity)),
            ),
        ],
    )))
}

fn standing_data(grid: &EpsilonGrid, torus: &Torus) -> CauchyData {
    CauchyData::from_fn(grid, torus, |_, x| (2.0 * PI * x[0]).sin(), |_, _| 0.0)
}

fn solve_options(ctx: &Context) -> SolveOptions {
    SolveOptions {
        t_final: ctx.cfg.wave.t_final,
        cfl: ctx.cfg.wave.cfl,
        snapshots: ctx.cfg.wave.snapshots,
    }
}

/// Runs at the unit-line resolutions of the config; returns per resolution
/// `(n, max error at T, j = 1 energy drift, total energy drift)`.
pub fn convergence_study(ctx: &Context) -> Result<Vec<(usize, f64, f64, f64)>> {
    let grid = EpsilonGrid::new(4, 4)?;
    let opts = solve_options(ctx);
    ctx.cfg
        .wave
        .convergence
        .iter()
        .map(|&n| {
            let torus = Torus::unit_line(n);
            let metric = StaticMetricFamily::flat(torus.clone(), Arc::clone(&grid));
            let run = wave::solve(&metric, &standing_data(&grid, &torus), &opts)?;
            let t_end = *run.times.last().expect("at least one slice");
            let exact = torus.sample(|x| (2.0 * PI * x[0]).sin() * (2.0 * PI * t_end).cos());
            let err = run
                .final_slice(0)
                .cur
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let report = wave::analyze(&metric, &run)?;
            let drift = |f: &dyn Fn(&wave::SliceQuantities) -> f64| {
                let row = &report.table[0];
                let e0 = f(&row[0]);
                row.iter().map(|q| (f(q) - e0).abs()).fold(0.0, f64::max) / e0
            };
            Ok((n, err, drift(&|q| q.terms[1]), drift(&|q| q.energy(1))))
        })
        .collect()
}

pub fn flat_convergence(ctx: &Context) -> Result<Outcome> {
    let start = Instant::now();
    let rows = convergence_study(ctx)?;
    let elapsed = start.elapsed().as_secs_f64();
    let order = rows
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).log2())
        .fold(f64::INFINITY, f64::min);
    let finest = rows.last().expect("validated: two or more resolutions");
    let mut table = Table::new("convergence", &["n", "dx", "max_error", "order", "drift_e1_term", "drift_e1_total"]);
    for (i, r) in rows.iter().enumerate() {
        let ord = if i == 0 { f64::NAN } else { (rows[i - 1].1 / r.1).log2() };
        table.push(vec![
            r.0.to_string(),
            num(1.0 / r.0 as f64),
            num(r.1),
            num(ord),
            num(r.2),
            num(r.3),
        ]);
    }
    let check = Check::all(
        "C7",
        "flat wave convergence",
        &[
            Check::new("C7a", "order", order - 1.9, format!("min observed order = {}", num(order))),
            Check::new(
                "C7b",
                "gradient energy drift",
                0.01 - finest.2,
                format!(
                    "n = {}: drift = {}, full first-order energy drift = {} (info)",
                    finest.0,
                    num(finest.2),
                    num(finest.3)
                ),
            ),
            Check::new("C7c", "runtime", 60.0 - elapsed, format!("{elapsed:.2} s")),
        ],
    );
    Ok(Outcome {
        checks: vec![check],
        tables: vec![table],
        ..Default::default()
    })
}

/// Smooth family with `1/4 <= V <= 4`.
pub fn smooth_family(torus: Torus, grid: Arc<EpsilonGrid>) -> Result<StaticMetricFamily> {
    Ok(StaticMetricFamily::from_fn(torus, grid, LapseBounds { m: 0.25, m0: 4.0 }, |eps, x| {
        let v = 1.0 + 0.6 * (2.0 * PI * x[0]).sin() + 0.1 * eps;
        (v, Sym2::line(1.5 + 0.5 * (2.0 * PI * x[0]).cos()))
    })?)
}

pub fn family(ctx: &Context, kind: MetricFamily, torus: Torus) -> Result<StaticMetricFamily> {
    let grid = Arc::clone(&ctx.wave_grid);
    Ok(match kind {
        MetricFamily::Flat => StaticMetricFamily::flat(torus, grid),
        MetricFamily::Bump => StaticMetricFamily::bump_family(torus, grid, ctx.cfg.wave.amplitude)?,
        MetricFamily::Smooth => smooth_family(torus, grid)?,
    })
}

pub fn wave_torus(ctx: &Context) -> Result<Torus> {
    Ok(Torus::new(ctx.cfg.wave.dim, ctx.cfg.wave.n, ctx.cfg.wave.length)?)
}

/// A mixture of modes, so every energy order sees a nonzero field.
pub fn mixed_data(grid: &EpsilonGrid, torus: &Torus) -> CauchyData {
    let l = torus.length();
    CauchyData::from_fn(
        grid,
        torus,
        |_, x| (2.0 * PI * x[0] / l).sin() + 0.3 * (6.0 * PI * x[0] / l).cos() + 0.2 * (2.0 * PI * x[1] / l).cos(),
        |_, x| (4.0 * PI * x[0] / l).sin(),
    )
}

pub fn energy_equivalence(ctx: &Context) -> Result<Outcome> {
    let torus = Torus::unit_line(ctx.cfg.wave.n);
    let opts = solve_options(ctx);
    let flat = family(ctx, MetricFamily::Flat, torus.clone())?;
    let run = wave::solve(&flat, &mixed_data(&ctx.wave_grid, &torus), &opts)?;
    let report = wave::analyze(&flat, &run)?;
    let mut worst_flat = 0.0f64;
    for &tau in &report.times {
        for k in 0..=wave::MAX_ORDER {
            let eq = wave::verify_equivalence(&flat, &report, tau, k)?;
            for &(e, n) in &eq.values {
                let dev = if n == 0.0 { if e == 0.0 { 0.0 } else { f64::INFINITY } } else { (e / (0.5 * n) - 1.0).abs() };
                worst_flat = worst_flat.max(dev);
            }
        }
    }

    let smooth = family(ctx, MetricFamily::Smooth, torus.clone())?;
    let run = wave::solve(&smooth, &mixed_data(&ctx.wave_grid, &torus), &opts)?;
    let report = wave::analyze(&smooth, &run)?;
    let mut margin = f64::INFINITY;
    let mut held = true;
    for &tau in &report.times {
        for k in 0..=wave::MAX_ORDER {
            let eq = wave::verify_equivalence(&smooth, &report, tau, k)?;
            held &= eq.sandwich_holds;
            margin = margin.min(eq.margin);
        }
    }
    Ok(single(Check::all(
        "C8",
        "energy and sobolev equivalence",
        &[
            Check::new("C8a", "flat equality", 0.01 - worst_flat, format!("max |E / (|u|^2 / 2) - 1| = {}", num(worst_flat))),
            Check::new(
                "C8b",
                "bounded-coefficient sandwich",
                if held { margin.max(0.0) } else { margin.min(-f64::MIN_POSITIVE) },
                format!("all slices and k <= 2 within {}% slack: {held}, min margin = {}", 100.0 * wave::EQUIVALENCE_SLACK, num(margin)),
            ),
        ],
    )))
}

pub fn uniqueness_surrogate(ctx: &Context) -> Result<Outcome> {
    let start = Instant::now();
    let torus = wave_torus(ctx)?;
    let opts = solve_options(ctx);
    let metric = family(ctx, MetricFamily::Bump, torus.clone())?;
    let grid = &ctx.wave_grid;
    let b = ctx.cfg.wave.perturbation_valuation;
    let data = mixed_data(grid, &torus);
    let l = torus.length();
    let pert = CauchyData::from_fn(grid, &torus, |e, x| e.powf(b) * (2.0 * PI * x[0] / l).sin(), |e, x| e.powf(b) * (2.0 * PI * x[0] / l).cos());
    let data_run = wave::uniqueness_test(&metric, &data, &pert, &opts, &ctx.thresholds)?;
    let delta = MetricDelta::from_fn(&metric, |e, x| {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt() / l;
        (0.0, Sym2::scalar(e.powf(b) * wave::bump(r)))
    });
    let metric_run = wave::representative_independence(&metric, &delta, &data, &opts, &ctx.thresholds)?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok(single(Check::all(
        "C9",
        "uniqueness surrogate",
        &[
            Check::new(
                "C9a",
                "data perturbation",
                data_run.valuation - (b - 2.0),
                format!("nu = {}", num(data_run.valuation)),
            ),
            Check::new(
                "C9b",
                "representative change",
                metric_run.valuation - (b - 4.0),
                format!("nu = {}", num(metric_run.valuation)),
            ),
            Check::new("C9c", "runtime", 180.0 - elapsed, format!("{elapsed:.2} s for {} epsilon samples", grid.len())),
        ],
    )))
}

pub fn paraboloid_certificate(ctx: &Context) -> Result<Outcome> {
    let r = &ctx.cfg.region;
    let bounds = LapseBounds { m: r.m, m0: r.m0 };
    let dim = ctx.cfg.wave.dim;
    let length = 4.0 * r.radius;
    let n = ctx.cfg.wave.n.max(64);
    let torus = Torus::new(dim, n, length)?;
    let metric = StaticMetricFamily::flat(torus, Arc::clone(&ctx.wave_grid));
    let center = [0.0, 0.0];
    let (_, cert) = wave::build_region(bounds, r.height, r.radius, center, &metric)?;
    let limit = cert.bound + wave::CERTIFICATE_TOLERANCE;
    let rejected = matches!(
        wave::build_region(bounds, r.radius, r.radius, center, &metric),
        Err(Error::RatioViolated { .. })
    );
    Ok(single(Check::all(
        "C10",
        "paraboloid certificate",
        &[
            Check::new(
                "C10a",
                "spacelike boundary",
                if cert.passed { limit - cert.max_norm } else { (limit - cert.max_norm).min(-f64::MIN_POSITIVE) },
                format!("{} samples, max <dS,dS> = {}, bound = {}", cert.samples, num(cert.max_norm), num(cert.bound)),
            ),
            Check::new(
                "C10b",
                "ratio violation rejected",
                if rejected { 1.0 } else { -1.0 },
                format!("h = rho = {}: rejected = {rejected}", r.radius),
            ),
        ],
    )))
}

/// One step `x_{i+1} = x_i + c eps^e` of a chain; branched steps use separate
/// coefficients on even and odd samples.
#[derive(Debug, Clone, Copy)]
pub struct ChainStep {
    pub rho: f64,
    pub exponent: f64,
    pub even: f64,
    pub odd: f64,
}

/// Nested chain with radii `exp(-rho_i)` and centers built incrementally.
pub fn random_chain(rng: &mut ChaCha8Rng, len: usize, branched: bool) -> Vec<ChainStep> {
    let mut rho = rng.gen_range(0.5..=1.5);
    (0..len)
        .map(|i| {
            if i > 0 {
                rho += rng.gen_range(0.5..=1.0);
            }
            let branch = branched && rng.gen_bool(0.5);
            let exponent = if !branch && rng.gen_bool(0.25) { rho } else { rho + rng.gen_range(0.2..=1.0) };
            let even = signed(rng, 0.5, 3.0);
            let odd = if branch { signed(rng, 0.5, 3.0) } else { even };
            ChainStep { rho, exponent, even, odd }
        })
        .collect()
}

/// The fixed chain of the sharp experiment: `rho_i = i + 1/2`, unit steps
/// `eps^(i+1)` for the first half and branched coefficients afterwards.
pub fn example_chain(len: usize) -> Vec<ChainStep> {
    (0..len)
        .map(|i| {
            let rho = i as f64 + 1.5;
            let (even, odd) = if 2 * i < len { (1.0, 1.0) } else { (1.0, 2.0) };
            ChainStep { rho, exponent: rho + 0.5, even, odd }
        })
        .collect()
}

pub fn chain_centers(grid: &Arc<EpsilonGrid>, steps: &[ChainStep]) -> Result<Vec<GeneralizedNumber>> {
    let mut out: Vec<GeneralizedNumber> = Vec::with_capacity(steps.len());
    let mut prev = GeneralizedNumber::zero(grid);
    for s in steps {
        let next = GeneralizedNumber::from_fn(grid, |k, e| {
            let c = if k % 2 == 0 { s.even } else { s.odd };
            prev.value(k) + c * e.powf(s.exponent)
        })?;
        out.push(next.clone());
        prev = next;
    }
    Ok(out)
}

/// Witness distances next to the deepest-center oracle.
#[derive(Debug, Clone)]
pub struct ChainResult {
    pub rhos: Vec<f64>,
    pub certificate: sharp::NestedCertificate,
    pub oracle: Vec<f64>,
    /// Worst relative slack of `d <= r (1 + tol)`.
    pub radius_margin: f64,
    /// Worst slack of the oracle agreement.
    pub oracle_margin: f64,
}

impl ChainResult {
    pub fn passed(&self) -> bool {
        self.certificate.passed && self.certificate.models_nested && self.radius_margin >= 0.0 && self.oracle_margin >= 0.0
    }
}

pub fn check_chain(grid: &Arc<EpsilonGrid>, steps: &[ChainStep]) -> Result<ChainResult> {
    let centers = chain_centers(grid, steps)?;
    let balls = centers
        .iter()
        .zip(steps)
        .map(|(c, s)| DressedBall::with_rho(c.clone(), s.rho))
        .collect::<colombeau::Result<Vec<_>>>()?;
    let (_, certificate) = sharp::intersect_nested(&balls)?;
    let deepest = centers.last().expect("non-empty chain");
    let oracle = centers
        .iter()
        .map(|c| sharp::ultrametric_distance(deepest, c))
        .collect::<colombeau::Result<Vec<_>>>()?;
    let rel = FIT_TOLERANCE.exp() - 1.0;
    let mut radius_margin = f64::INFINITY;
    let mut oracle_margin = f64::INFINITY;
    for ((d, r), o) in certificate.distances.iter().zip(&certificate.radii).zip(&oracle) {
        radius_margin = radius_margin.min((r * (1.0 + WITNESS_TOLERANCE) - d) / r);
        let scale = d.max(*o);
        let slack = if scale == 0.0 { 1.0 } else { rel - (d - o).abs() / scale };
        oracle_margin = oracle_margin.min(slack);
    }
    Ok(ChainResult {
        rhos: steps.iter().map(|s| s.rho).collect(),
        certificate,
        oracle,
        radius_margin,
        oracle_margin,
    })
}

/// Certificate rows of one chain.
pub fn chain_table(name: &str, result: &ChainResult) -> Table {
    let mut t = Table::new(name, &["index", "rho", "radius", "distance", "oracle", "recentered", "pass"]);
    let c = &result.certificate;
    for i in 0..c.radii.len() {
        let moved = if i == 0 { 0 } else { c.recentered[i - 1].len() };
        let pass = c.distances[i] <= c.radii[i] * (1.0 + WITNESS_TOLERANCE);
        t.push(vec![
            (i + 1).to_string(),
            num(result.rhos[i]),
            num(c.radii[i]),
            num(c.distances[i]),
            num(result.oracle[i]),
            moved.to_string(),
            pass.to_string(),
        ]);
    }
    t
}

pub fn spherical_completeness(ctx: &Context) -> Result<Outcome> {
    let mut rng = ctx.rng(11);
    let max_len = ctx.cfg.sharp.max_random_length;
    let chains: Vec<Vec<ChainStep>> = (0..ctx.cfg.sharp.random_chains)
        .map(|i| {
            let len = rng.gen_range(2..=max_len);
            random_chain(&mut rng, len, i % 2 == 1)
        })
        .collect();
    let results = par::try_map_indices(chains.len(), |i| check_chain(&ctx.grid, &chains[i]))?;
    let passed = results.iter().filter(|r| r.passed()).count();
    let radius = results.iter().map(|r| r.radius_margin).fold(f64::INFINITY, f64::min);
    let oracle = results.iter().map(|r| r.oracle_margin).fold(f64::INFINITY, f64::min);
    let nested = results.iter().all(|r| r.certificate.models_nested);
    let longest = chains.iter().map(Vec::len).max().unwrap_or(0);
    Ok(single(Check::all(
        "C11",
        "spherical completeness",
        &[
            Check::new(
                "C11a",
                "witness within radii",
                (passed as f64 - results.len() as f64).min(radius),
                format!("{passed}/{} chains (longest {longest}), models nested = {nested}, min slack = {}", results.len(), num(radius)),
            ),
            Check::new("C11b", "deepest-center oracle", oracle, format!("min slack = {}", num(oracle))),
        ],
    )))
}

pub fn scaling_defect(ctx: &Context) -> Result<Outcome> {
    let s = &ctx.cfg.scaling;
    ensure!(s.h > 0.0, "scaling factor must be positive");
    let r = scaling_demo(s.h, Mollifier::Bump, s.constant, s.points, &ctx.grid, &ctx.thresholds)?;
    let expected = 1.0 / s.h - 1.0;
    let dev = r.defect.tail_values().iter().map(|d| (d - expected).abs()).fold(0.0, f64::max);
    let zero = r.constant_defect.values().iter().all(|&d| d == 0.0);
    let mut table = Table::new("scaling", &["eps", "defect", "constant_defect"]);
    for k in 0..ctx.grid.len() {
        table.push(vec![num(ctx.grid.eps(k)), num(r.defect.value(k)), num(r.constant_defect.value(k))]);
    }
    let check = Check::all(
        "C12",
        "scaling demo",
        &[
            Check::new("C12a", "defect value", 1e-3 - dev, format!("h = {}: max |D - (1/h - 1)| = {}", num(s.h), num(dev))),
            Check::new(
                "C12b",
                "defect valuation",
                if r.defect_negligible { -1.0 } else { 0.2 - r.defect_valuation.abs() },
                format!("nu = {}, negligible = {}", num(r.defect_valuation), r.defect_negligible),
            ),
            Check::new(
                "C12c",
                "constant field",
                if zero && r.constant_valuation == f64::INFINITY { 1.0 } else { -1.0 },
                format!("exactly zero = {zero}, nu = {}", num(r.constant_valuation)),
            ),
        ],
    );
    Ok(Outcome {
        checks: vec![check],
        tables: vec![table],
        ..Default::default()
    })
}

pub type Criterion = fn(&Context) -> Result<Outcome>;

/// All checks in order.
pub const ALL: [(&str, Criterion); 12] = [
    ("C1", valuation_accuracy),
    ("C2", eigenvalue_well_definedness),
    ("C3", index_stability),
    ("C4", inverse_cauchy_schwarz),
    ("C5", riemannian_construction),
    ("C6", dominant_energy),
    ("C7", flat_convergence),
    ("C8", energy_equivalence),
    ("C9", uniqueness_surrogate),
    ("C10", paraboloid_certificate),
    ("C11", spherical_completeness),
    ("C12", scaling_defect),
];
