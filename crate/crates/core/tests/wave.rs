use std::f64::consts::PI;
use std::sync::Arc;

use colombeau::wave::{self, CauchyData, MetricDelta, SolveOptions, StaticMetricFamily, Sym2, Torus};
use colombeau::{par, EpsilonGrid, Thresholds};

fn standing(n: usize, grid: &Arc<EpsilonGrid>) -> (StaticMetricFamily, CauchyData) {
    let t = Torus::unit_line(n);
    let d = CauchyData::from_fn(grid, &t, |_, x| (2.0 * PI * x[0]).sin(), |_, _| 0.0);
    (StaticMetricFamily::flat(t, Arc::clone(grid)), d)
}

#[test]
fn flat_energy_tracks_the_exact_solution() {
    let g = EpsilonGrid::new(4, 4).unwrap();
    let (m, d) = standing(256, &g);
    let run = wave::solve(&m, &d, &SolveOptions::default()).unwrap();
    let r = wave::analyze(&m, &run).unwrap();
    for (j, &tau) in r.times.iter().enumerate() {
        let q = r.table[0][j];
        // u = sin(2 pi x) cos(2 pi t): E^0 = cos^2 / 4, gradient term = pi^2.
        assert!((q.terms[0] - 0.25 * (2.0 * PI * tau).cos().powi(2)).abs() < 2e-3);
        assert!((q.terms[1] - PI * PI).abs() < 1e-2 * PI * PI);
    }
    assert!(wave::verify_energy_growth(&r).uniform);
    assert!(wave::sup_vs_energy(&r).bounded);
}

#[test]
fn negligible_changes_leave_negligible_traces() {
    let g = wave::wave_grid();
    let (m, d) = standing(128, &g);
    let opts = SolveOptions { t_final: 0.5, ..Default::default() };
    let th = Thresholds::default();
    let pert = CauchyData::from_fn(&g, m.torus(), |e, x| e.powi(14) * (4.0 * PI * x[0]).cos(), |_, _| 0.0);
    let r = wave::uniqueness_test(&m, &d, &pert, &opts, &th).unwrap();
    assert!(r.valuation >= 12.0, "{:?}", r.fit);
    let delta = MetricDelta::from_fn(&m, |e, x| (e.powi(14) * wave::bump(x[0]), Sym2::line(0.0)));
    let r = wave::representative_independence(&m, &delta, &d, &opts, &th).unwrap();
    assert!(r.valuation >= 10.0, "{:?}", r.fit);
}

#[test]
fn paraboloid_limits() {
    let g = wave::wave_grid();
    let m = StaticMetricFamily::flat(Torus::new(2, 32, 4.0).unwrap(), g);
    let b = wave::LapseBounds::UNIT;
    let (_, cert) = wave::build_region(b, 0.2, 1.0, [0.0, 0.0], &m).unwrap();
    assert!(cert.passed && cert.max_norm <= -0.5);
    assert!(wave::build_region(b, 0.3, 1.0, [0.0, 0.0], &m).is_err());
}

#[test]
fn parallel_and_sequential_maps_agree() {
    let f = |i: usize| (i as f64).sqrt().sin();
    assert_eq!(par::map_indices(1000, f), par::map_indices_seq(1000, f));
}
