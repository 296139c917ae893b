use std::sync::Arc;

use crate::error::{Error, Result};
use crate::net::{EpsilonGrid, GeneralizedNumber};
use crate::par;

use super::metric::{christoffel, Christoffel, StaticMetricFamily};
use super::operator::{apply, coefficients};
use super::solver::{CauchyData, WaveRun};

/// Highest energy order.
pub const MAX_ORDER: usize = 2;

/// Relative slack of the energy/norm sandwich.
pub const EQUIVALENCE_SLACK: f64 = 0.05;

/// Integrated quantities of one slice, indexed by derivative order `j`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SliceQuantities {
    /// `int V/2 |nabla^j u|_e^2 mu`.
    pub terms: [f64; 3],
    /// `int |nabla^j u|_e^2 mu`.
    pub covariant: [f64; 3],
    /// `int sum (d^j u)^2 mu` over all spacetime index tuples.
    pub partial: [f64; 3],
    pub sup_u: f64,
}

impl SliceQuantities {
    /// `E^k = sum_{j <= k}` of the energy terms.
    pub fn energy(&self, k: usize) -> f64 {
        self.terms[..=k].iter().sum()
    }

    /// Squared covariant Sobolev norm of order `k`.
    pub fn covariant_sq(&self, k: usize) -> f64 {
        self.covariant[..=k].iter().sum()
    }

    /// Squared partial-derivative Sobolev norm of order `k`.
    pub fn partial_sq(&self, k: usize) -> f64 {
        self.partial[..=k].iter().sum()
    }
}

/// `u`, `d_t u` and `d_t^2 u` on one time slice.
struct Fields<'a> {
    u: &'a [f64],
    ut: Vec<f64>,
    utt: Vec<f64>,
}

fn quantities(metric: &StaticMetricFamily, gamma: &Christoffel, k: usize, f: &Fields<'_>) -> SliceQuantities {
    let torus = metric.torus();
    let d = torus.dim();
    let n = d + 1;
    let mut q = SliceQuantities::default();
    let cell = torus.cell_volume();
    let lapse = metric.lapse(k);
    for p in 0..torus.len() {
        let v = lapse[p];
        let mu = v * metric.spatial(k)[p].det().sqrt() * cell;
        let mut g = [0.0; 3];
        g[0] = f.ut[p];
        for i in 1..n {
            g[i] = torus.d1(f.u, p, i - 1);
        }
        let mut h = [[0.0; 3]; 3];
        h[0][0] = f.utt[p];
        for i in 1..n {
            h[0][i] = torus.d1(&f.ut, p, i - 1);
            h[i][0] = h[0][i];
            for j in 1..n {
                h[i][j] = torus.d2(f.u, p, i - 1, j - 1);
            }
        }
        let mut hc = h;
        for a in 0..n {
            for b in 0..n {
                hc[a][b] -= (0..n).map(|c| gamma.get(k, p, c, a, b) * g[c]).sum::<f64>();
            }
        }
        let e = |a: usize, b: usize| metric.e_upper(k, p, a, b);
        let mut grad_e = 0.0;
        let mut hess_e = 0.0;
        let mut grad_p = 0.0;
        let mut hess_p = 0.0;
        for a in 0..n {
            grad_p += g[a] * g[a];
            for b in 0..n {
                grad_e += e(a, b) * g[a] * g[b];
                hess_p += h[a][b] * h[a][b];
                for c in 0..n {
                    for dd in 0..n {
                        hess_e += e(a, c) * e(b, dd) * hc[a][b] * hc[c][dd];
                    }
                }
            }
        }
        let u2 = f.u[p] * f.u[p];
        let cov = [u2, grad_e, hess_e];
        let part = [u2, grad_p, hess_p];
        for j in 0..3 {
            q.covariant[j] += cov[j] * mu;
            q.partial[j] += part[j] * mu;
            q.terms[j] += 0.5 * v * cov[j] * mu;
        }
        q.sup_u = q.sup_u.max(f.u[p].abs());
    }
    q
}

/// Energies and Sobolev norms for every epsilon and slice of a run.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub grid: Arc<EpsilonGrid>,
    pub times: Vec<f64>,
    /// `table[k][j]` for epsilon index `k` and slice `j`.
    pub table: Vec<Vec<SliceQuantities>>,
}

impl EnergyReport {
    pub fn slice_index(&self, tau: f64) -> Result<usize> {
        let tol = 1e-9 * self.times.last().copied().unwrap_or(1.0).max(1.0);
        self.times
            .iter()
            .position(|t| (t - tau).abs() <= tol)
            .ok_or(Error::NotASlice(tau))
    }

    /// Per-epsilon `sup_tau E^k`.
    pub fn sup_energy(&self, order: usize) -> GeneralizedNumber {
        let values = self
            .table
            .iter()
            .map(|row| row.iter().map(|q| q.energy(order)).fold(0.0, f64::max))
            .collect();
        GeneralizedNumber::from_samples(&self.grid, values).expect("finite energies")
    }
}

pub fn analyze(metric: &StaticMetricFamily, run: &WaveRun) -> Result<EnergyReport> {
    let gamma = christoffel(metric)?;
    let dt = run.dt;
    let table = par::map_indices(run.grid.len(), |k| {
        run.slices[k]
            .iter()
            .map(|s| {
                let fields = Fields {
                    u: &s.cur,
                    ut: s.next.iter().zip(&s.prev).map(|(a, b)| (a - b) / (2.0 * dt)).collect(),
                    utt: (0..s.cur.len())
                        .map(|i| (s.next[i] - 2.0 * s.cur[i] + s.prev[i]) / (dt * dt))
                        .collect(),
                };
                quantities(metric, &gamma, k, &fields)
            })
            .collect()
    });
    Ok(EnergyReport {
        grid: Arc::clone(&run.grid),
        times: run.times.clone(),
        table,
    })
}

fn check_order(k: usize) -> Result<()> {
    if k > MAX_ORDER {
        return Err(Error::Precondition(format!("energy order {k} exceeds {MAX_ORDER}")));
    }
    Ok(())
}

/// `E^k_{tau, eps}` for every epsilon.
pub fn energy(metric: &StaticMetricFamily, run: &WaveRun, tau: f64, k: usize) -> Result<Vec<f64>> {
    check_order(k)?;
    let j = run.slice_index(tau)?;
    let report = analyze(metric, run)?;
    Ok(report.table.iter().map(|row| row[j].energy(k)).collect())
}

/// Squared (covariant, partial) Sobolev norms of order `k` for every epsilon.
pub fn sobolev_norms(metric: &StaticMetricFamily, run: &WaveRun, tau: f64, k: usize) -> Result<Vec<(f64, f64)>> {
    check_order(k)?;
    let j = run.slice_index(tau)?;
    let report = analyze(metric, run)?;
    Ok(report
        .table
        .iter()
        .map(|row| (row[j].covariant_sq(k), row[j].partial_sq(k)))
        .collect())
}

/// `E^k_{0, eps}` from Cauchy data, with `d_t^2 u = L v` supplied by the equation.
pub fn initial_energy_from_data(metric: &StaticMetricFamily, data: &CauchyData, k: usize) -> Result<Vec<f64>> {
    check_order(k)?;
    let gamma = christoffel(metric)?;
    let torus = metric.torus();
    Ok(par::map_indices(metric.grid().len(), |e| {
        let fields = Fields {
            u: &data.v[e],
            ut: data.w[e].clone(),
            utt: apply(torus, &coefficients(metric, e), &data.v[e]),
        };
        quantities(metric, &gamma, e, &fields).energy(k)
    }))
}

/// Energy/norm sandwich `A' |u|^2 <= E^k <= A |u|^2` with `A = M0/2`, `A' = M/2`,
/// and the epsilon-weighted comparison of partial and covariant norms.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub order: usize,
    pub a_lower: f64,
    pub a_upper: f64,
    /// Per epsilon: `(E^k, |u|^2_{D,k})`.
    pub values: Vec<(f64, f64)>,
    /// Smallest of `(E - A'|u|^2)` and `(A|u|^2 - E)` relative to `A|u|^2`.
    pub margin: f64,
    pub sandwich_holds: bool,
    /// Fitted `B` with `|u|^2_part,k <= B sum_j eps^{-2(k-j)} |u|^2_cov,j`.
    pub partial_constant: f64,
    /// Fitted `B'` with the roles of the two norms exchanged.
    pub covariant_constant: f64,
    pub weighted_bounded: bool,
}

pub fn verify_equivalence(metric: &StaticMetricFamily, report: &EnergyReport, tau: f64, k: usize) -> Result<EquivalenceReport> {
    check_order(k)?;
    let j = report.slice_index(tau)?;
    let bounds = metric.bounds();
    let (a_lower, a_upper) = (0.5 * bounds.m, 0.5 * bounds.m0);
    let grid = &report.grid;
    let mut margin = f64::INFINITY;
    let mut values = Vec::with_capacity(grid.len());
    let mut ratios = [Vec::new(), Vec::new()];
    for (e, row) in report.table.iter().enumerate() {
        let q = &row[j];
        let (en, norm) = (q.energy(k), q.covariant_sq(k));
        values.push((en, norm));
        if grid.tail().contains(&e) {
            let scale = a_upper * norm;
            if scale > 0.0 {
                margin = margin.min((en - a_lower * norm) / scale).min((a_upper * norm - en) / scale);
            } else {
                margin = margin.min(if en == 0.0 { 0.0 } else { -f64::INFINITY });
            }
        }
        let eps = grid.eps(e);
        let weighted = |s: &[f64; 3]| (0..=k).map(|i| eps.powi(-2 * (k - i) as i32) * s[i]).sum::<f64>();
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        ratios[0].push(ratio(q.partial_sq(k), weighted(&q.covariant)));
        ratios[1].push(ratio(q.covariant_sq(k), weighted(&q.partial)));
    }
    let tail_max = |r: &[f64]| grid.tail().map(|e| r[e]).fold(0.0, f64::max);
    let uniform = |r: Vec<f64>| {
        GeneralizedNumber::from_samples(grid, r)
            .ok()
            .and_then(|n| n.valuation().ok())
            .is_some_and(|f| f.nu() >= -0.2)
    };
    let partial_constant = tail_max(&ratios[0]);
    let covariant_constant = tail_max(&ratios[1]);
    let weighted_bounded =
        partial_constant.is_finite() && covariant_constant.is_finite() && ratios.into_iter().all(uniform);
    Ok(EquivalenceReport {
        order: k,
        a_lower,
        a_upper,
        values,
        sandwich_holds: margin >= -EQUIVALENCE_SLACK,
        margin,
        partial_constant,
        covariant_constant,
        weighted_bounded,
    })
}

/// Gronwall-type growth of `E^1` and moderateness of the sup energies.
#[derive(Debug, Clone)]
pub struct GrowthReport {
    /// Smallest `C` with `E^1_tau <= E^1_0 exp(C tau)` on the recorded slices, per epsilon.
    pub rate: Vec<f64>,
    pub rate_max: f64,
    /// Rate finite on every tail sample.
    pub uniform: bool,
    /// Fitted `N` with `sup_tau E^k = O(eps^-N)`, for `k = 0, 1, 2`.
    pub moderate_exponent: [f64; 3],
    pub moderate: [bool; 3],
    pub identically_zero: [bool; 3],
}

pub fn verify_energy_growth(report: &EnergyReport) -> GrowthReport {
    let rate: Vec<f64> = report
        .table
        .iter()
        .map(|row| {
            let e0 = row[0].energy(1);
            row.iter()
                .zip(&report.times)
                .skip(1)
                .map(|(q, &t)| {
                    let e = q.energy(1);
                    if e0 > 0.0 {
                        (e / e0).ln() / t
                    } else if e == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let tail: Vec<f64> = report.grid.tail().map(|k| rate[k]).collect();
    let rate_max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut moderate_exponent = [0.0; 3];
    let mut moderate = [false; 3];
    let mut identically_zero = [false; 3];
    for k in 0..3 {
        let sup = report.sup_energy(k);
        identically_zero[k] = sup.values().iter().all(|&v| v == 0.0);
        match sup.valuation() {
            Ok(fit) => {
                moderate_exponent[k] = if fit.all_below_floor { 0.0 } else { (-fit.nu()).max(0.0) };
                moderate[k] = moderate_exponent[k].is_finite();
            }
            Err(_) => moderate_exponent[k] = f64::INFINITY,
        }
    }
    GrowthReport {
        uniform: tail.iter().all(|c| c.is_finite()),
        rate,
        rate_max,
        moderate_exponent,
        moderate,
        identically_zero,
    }
}

/// Comparison of `sup |u|` with `sup_tau E^2` over epsilon.
#[derive(Debug, Clone)]
pub struct SupReport {
    pub ratio: Vec<f64>,
    /// Fitted exponent `N >= 0` with `ratio <= K eps^-N`.
    pub exponent: f64,
    pub constant: f64,
    pub bounded: bool,
}

pub fn sup_vs_energy(report: &EnergyReport) -> SupReport {
    let energy = report.sup_energy(2);
    let ratio: Vec<f64> = report
        .table
        .iter()
        .zip(energy.values())
        .map(|(row, &e)| {
            let s = row.iter().map(|q| q.sup_u).fold(0.0, f64::max);
            if e > 0.0 {
                s / e
            } else {
                0.0
            }
        })
        .collect();
    let grid = &report.grid;
    let exponent = match GeneralizedNumber::from_samples(grid, ratio.clone()).and_then(|n| n.valuation()) {
        Ok(fit) if fit.all_below_floor => 0.0,
        Ok(fit) => (-fit.nu()).max(0.0),
        Err(_) => f64::INFINITY,
    };
    let constant = grid
        .tail()
        .map(|k| ratio[k] * grid.eps(k).powf(exponent))
        .fold(0.0, f64::max);
    SupReport {
        bounded: exponent.is_finite() && constant.is_finite(),
        ratio,
        exponent,
        constant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave::grid::Torus;
    use crate::wave::metric::{LapseBounds, Sym2};
    use crate::wave::solver::{solve, SolveOptions};
    use crate::wave::wave_grid;
    use std::f64::consts::PI;

    fn standing(n: usize) -> (StaticMetricFamily, CauchyData) {
        let t = Torus::unit_line(n);
        let g = EpsilonGrid::new(4, 4).unwrap();
        let d = CauchyData::from_fn(&g, &t, |_, x| (2.0 * PI * x[0]).sin(), |_, _| 0.0);
        (StaticMetricFamily::flat(t, g), d)
    }

    #[test]
    fn standing_wave_energies() {
        let (m, d) = standing(256);
        let run = solve(&m, &d, &SolveOptions::default()).unwrap();
        let r = analyze(&m, &run).unwrap();
        for (j, &tau) in r.times.iter().enumerate() {
            let q = r.table[0][j];
            let want = 0.25 * (2.0 * PI * tau).cos().powi(2);
            assert!((q.energy(0) - want).abs() < 2e-3, "{} vs {want}", q.energy(0));
            assert!((q.terms[1] - PI * PI).abs() < 0.01 * PI * PI);
        }
        let e1: Vec<f64> = r.table[0].iter().map(|q| q.terms[1]).collect();
        let drift = e1.iter().map(|e| (e - e1[0]).abs()).fold(0.0, f64::max) / e1[0];
        assert!(drift < 0.01, "{drift}");

        let growth = verify_energy_growth(&r);
        assert!(growth.rate_max.abs() < 0.05, "{:?}", growth.rate);
        assert!(growth.uniform && growth.moderate.iter().all(|&b| b));
        let e = energy(&m, &run, 0.5, 0).unwrap();
        assert!((e[0] - 0.25).abs() < 2e-3);
        assert!(energy(&m, &run, 0.55, 0).is_err());
        assert!(energy(&m, &run, 0.5, 3).is_err());
    }

    #[test]
    fn flat_norms_coincide() {
        let t = Torus::new(2, 24, 1.0).unwrap();
        let g = EpsilonGrid::new(4, 4).unwrap();
        let m = StaticMetricFamily::flat(t.clone(), Arc::clone(&g));
        let d = CauchyData::from_fn(&g, &t, |_, x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos(), |_, x| x[0].cos());
        let run = solve(&m, &d, &SolveOptions { t_final: 0.2, ..Default::default() }).unwrap();
        let r = analyze(&m, &run).unwrap();
        for row in &r.table {
            for q in row {
                assert_eq!(q.covariant, q.partial);
                for k in 0..3 {
                    assert_eq!(q.energy(k), 0.5 * q.covariant_sq(k));
                }
            }
        }
        for k in 0..3 {
            let eq = verify_equivalence(&m, &r, 0.2, k).unwrap();
            assert!(eq.sandwich_holds && eq.margin.abs() < 1e-12, "{eq:?}");
        }
    }

    #[test]
    fn constant_field_norms() {
        let t = Torus::unit_line(16);
        let g = EpsilonGrid::new(4, 4).unwrap();
        let m = StaticMetricFamily::flat(t.clone(), Arc::clone(&g));
        let d = CauchyData::from_fn(&g, &t, |_, _| 3.0, |_, _| 0.0);
        let run = solve(&m, &d, &SolveOptions { t_final: 0.1, cfl: 0.5, snapshots: 1 }).unwrap();
        for k in 0..3 {
            for (cov, part) in sobolev_norms(&m, &run, 0.1, k).unwrap() {
                assert!((cov - 9.0).abs() < 1e-12 && (part - 9.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_solution_reports() {
        let t = Torus::unit_line(16);
        let g = wave_grid();
        let m = StaticMetricFamily::flat(t.clone(), Arc::clone(&g));
        let run = solve(&m, &CauchyData::zero(&g, &t), &SolveOptions { t_final: 0.1, ..Default::default() }).unwrap();
        let r = analyze(&m, &run).unwrap();
        let growth = verify_energy_growth(&r);
        assert_eq!(growth.identically_zero, [true; 3]);
        assert_eq!(growth.rate_max, 0.0);
        let s = sup_vs_energy(&r);
        assert!(s.ratio.iter().all(|&x| x == 0.0) && s.bounded);
        let eq = verify_equivalence(&m, &r, 0.1, 2).unwrap();
        assert!(eq.sandwich_holds && eq.values.iter().all(|&(a, b)| a == 0.0 && b == 0.0));
    }

    fn varying_lapse(n: usize) -> StaticMetricFamily {
        let t = Torus::unit_line(n);
        StaticMetricFamily::from_fn(t, wave_grid(), LapseBounds { m: 0.25, m0: 4.0 }, |eps, x| {
            let v = 1.0 + 0.6 * (2.0 * PI * x[0]).sin() + 0.1 * eps;
            (v, Sym2::line(1.5 + 0.5 * (2.0 * PI * x[0]).cos()))
        })
        .unwrap()
    }

    #[test]
    fn bounded_coefficient_sandwich() {
        let m = varying_lapse(128);
        let g = Arc::clone(m.grid());
        let d = CauchyData::from_fn(&g, m.torus(), |_, x| (2.0 * PI * x[0]).sin() + 0.3 * (6.0 * PI * x[0]).cos(), |_, x| (4.0 * PI * x[0]).sin());
        let run = solve(&m, &d, &SolveOptions { t_final: 0.5, ..Default::default() }).unwrap();
        let r = analyze(&m, &run).unwrap();
        for &tau in &r.times {
            for k in 0..3 {
                let eq = verify_equivalence(&m, &r, tau, k).unwrap();
                assert!(eq.sandwich_holds, "{eq:?}");
                for &(e, n) in &eq.values {
                    assert!(e / n >= 0.125 - 1e-12 && e / n <= 2.0 + 1e-12);
                }
                assert!(eq.weighted_bounded, "{eq:?}");
            }
        }
    }

    #[test]
    fn initial_energy_examples() {
        let (m, d) = standing(256);
        let e = initial_energy_from_data(&m, &d, 0).unwrap();
        assert!((e[0] - 0.25).abs() < 1e-12);
        let z = CauchyData::zero(m.grid(), m.torus());
        assert!(initial_energy_from_data(&m, &z, 2).unwrap().iter().all(|&x| x == 0.0));

        let m = varying_lapse(64);
        let g = Arc::clone(m.grid());
        let d = CauchyData::from_fn(&g, m.torus(), |_, x| (2.0 * PI * x[0]).sin(), |_, x| (2.0 * PI * x[0]).cos());
        for k in 0..3 {
            let a = initial_energy_from_data(&m, &d, k).unwrap();
            let b = initial_energy_from_data(&m, &d.scale(3.0), k).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((y - 9.0 * x).abs() <= 1e-12 * y.abs());
            }
        }
        let tiny = CauchyData::from_fn(&g, m.torus(), |e, x| e.powi(12) * (2.0 * PI * x[0]).sin(), |_, _| 0.0);
        for k in 0..3 {
            let net = GeneralizedNumber::from_samples(&g, initial_energy_from_data(&m, &tiny, k).unwrap()).unwrap();
            assert!(net.valuation().unwrap().nu() >= 20.0);
        }
    }

    #[test]
    fn initial_energy_agrees_with_first_slice() {
        let m = varying_lapse(128);
        let g = Arc::clone(m.grid());
        let d = CauchyData::from_fn(&g, m.torus(), |_, x| (2.0 * PI * x[0]).sin(), |_, x| 0.5 * (2.0 * PI * x[0]).cos());
        let run = solve(&m, &d, &SolveOptions { t_final: 0.1, ..Default::default() }).unwrap();
        let from_run = energy(&m, &run, 0.0, 2).unwrap();
        let from_data = initial_energy_from_data(&m, &d, 2).unwrap();
        for (a, b) in from_run.iter().zip(&from_data) {
            assert!((a - b).abs() < 1e-3 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn bump_family_reports() {
        let t = Torus::unit_line(256);
        let g = wave_grid();
        let m = StaticMetricFamily::bump_family(t.clone(), Arc::clone(&g), 0.5).unwrap();
        let d = CauchyData::from_fn(&g, &t, |_, x| (2.0 * PI * x[0]).sin(), |_, _| 0.0);
        let run = solve(&m, &d, &SolveOptions { t_final: 0.5, ..Default::default() }).unwrap();
        let r = analyze(&m, &run).unwrap();
        let growth = verify_energy_growth(&r);
        assert!(growth.uniform && growth.rate_max.is_finite());
        assert!(growth.moderate.iter().all(|&b| b), "{growth:?}");
        let s = sup_vs_energy(&r);
        assert!(s.bounded && s.exponent.is_finite());
        let eq = verify_equivalence(&m, &r, 0.5, 2).unwrap();
        assert!(eq.sandwich_holds);
        let differ = r.table.iter().any(|row| row.iter().any(|q| q.covariant[2] != q.partial[2]));
        assert!(differ);
        assert!(eq.weighted_bounded, "{eq:?}");
    }
}
