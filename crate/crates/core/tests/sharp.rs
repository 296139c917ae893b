use std::sync::Arc;

use colombeau::sharp::{intersect_nested, ultrametric_distance, DressedBall};
use colombeau::{EpsilonGrid, GeneralizedNumber};
use proptest::prelude::*;

fn grid() -> Arc<EpsilonGrid> {
    EpsilonGrid::standard()
}

/// Centers `x_i = x_{i-1} + c_i eps^(rho_i + 1/2)` with radii `exp(-rho_i)`.
fn chain(steps: &[(f64, f64)]) -> Vec<DressedBall> {
    let g = grid();
    let mut prev = GeneralizedNumber::zero(&g);
    let mut rho = 0.0;
    steps
        .iter()
        .map(|&(c, gap)| {
            rho += gap;
            let next = GeneralizedNumber::from_fn(&g, |k, e| prev.value(k) + c * e.powf(rho + 0.5)).unwrap();
            prev = next.clone();
            DressedBall::with_rho(next, rho).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn witness_lies_in_every_ball(steps in prop::collection::vec((prop_oneof![-3.0f64..-0.5, 0.5f64..3.0], 0.5f64..1.0), 1..12)) {
        let balls = chain(&steps);
        let (w, cert) = intersect_nested(&balls).unwrap();
        prop_assert!(cert.passed && cert.models_nested);
        for b in &balls {
            prop_assert!(b.contains(&w).unwrap());
        }
    }
}

#[test]
fn distance_is_symmetric_and_zero_on_the_diagonal() {
    let g = grid();
    let x = GeneralizedNumber::power(2.0, 1.0, &g).unwrap();
    let y = GeneralizedNumber::power(1.0, 2.0, &g).unwrap();
    assert_eq!(ultrametric_distance(&x, &x).unwrap(), 0.0);
    let d = ultrametric_distance(&x, &y).unwrap();
    assert_eq!(d, ultrametric_distance(&y, &x).unwrap());
    assert!((d - (-1.0f64).exp()).abs() < 1e-6);
}
