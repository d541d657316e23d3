use proptest::prelude::*;
use starscatter_core::bc::{free_scattering, normalize_boundary, BoundaryPair};
use starscatter_core::jost::{KGrid, Propagator, ScatteringTable};
use starscatter_core::linalg;
use starscatter_core::potential::Preset;
use starscatter_core::spectrum::find_bound_states;
use starscatter_core::state::StateGrid;

/// Root of `q cot q + kappa = 0` with `q^2 + kappa^2 = depth`, by bisection.
fn well_kappa(depth: f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = |kappa: f64| {
        let q = (depth - kappa * kappa).sqrt();
        q / q.tan() + kappa
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(lo).signum() == g(mid).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn dirichlet_square_well_bound_state() {
    let pg = Preset::SquareWell {
        depth: -10.0,
        width: 1.0,
    }
    .build(0.01, Some(1.5))
    .unwrap();
    let prop = Propagator::new(&pg).unwrap();
    let bp = BoundaryPair::dirichlet(1);
    let grid = StateGrid::new(1, pg.h, 12.0).unwrap();
    let set = find_bound_states(&prop, &bp, 1e-3, 4.0, &grid).unwrap();
    assert_eq!(set.count(), 1);
    // q ranges over (pi/2, pi) for the ground state
    let pi = std::f64::consts::PI;
    let expected = well_kappa(
        10.0,
        (10.0 - pi * pi).sqrt() + 1e-9,
        (10.0 - 0.25 * pi * pi).sqrt() - 1e-9,
    );
    assert!(
        (set.states[0].kappa - expected).abs() < 1e-6,
        "{} vs {expected}",
        set.states[0].kappa
    );
    let e = &set.states[0].eigenfunctions[0];
    assert!((grid.norm(e) - 1.0).abs() < 1e-6);
}

#[test]
fn zero_potential_reproduces_free_scattering() {
    let pg = Preset::Zero { n: 2 }.build(0.05, Some(1.0)).unwrap();
    let prop = Propagator::new(&pg).unwrap();
    let bp = BoundaryPair::mixed(2, 0.9);
    let kg = KGrid::new(4.0, 0.25).unwrap();
    let table = ScatteringTable::compute(&prop, &bp, kg, false).unwrap();
    for j in 0..kg.len() {
        let s0 = free_scattering(kg.k(j), &bp).unwrap();
        assert!(linalg::frob(&(&table.s[j] - s0)) < 1e-12);
    }
}

proptest! {
    #[test]
    fn free_scattering_is_unitary(theta in 0.05f64..3.1, k in -20.0f64..20.0) {
        prop_assume!(k.abs() > 1e-3);
        let bp = BoundaryPair::mixed(3, theta);
        let s = free_scattering(k, &bp).unwrap();
        let id = linalg::identity(3);
        prop_assert!(linalg::frob(&(&s * s.adjoint() - id)) < 1e-12);
    }

    #[test]
    fn normal_form_recovers_the_angle(theta in 0.05f64..3.1) {
        let nf = normalize_boundary(&BoundaryPair::mixed(2, theta)).unwrap();
        for &t in &nf.thetas {
            prop_assert!((t - theta).abs() < 1e-10, "{} vs {}", t, theta);
        }
    }
}
