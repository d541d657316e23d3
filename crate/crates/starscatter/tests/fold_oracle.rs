use num_complex::Complex64;
use starscatter::core::evolve::Method;
use starscatter::core::fold::{
    delta_boundary, evolve_line, fold_to_halfline, scalar_coupling, transmission_residual,
    LineProblem, LineSettings, LineState,
};
use starscatter::core::jost::{jost_matrix, scattering_from_jost, Propagator};
use starscatter::core::linalg::{c, CMat, CVec};
use starscatter::core::state::StateGrid;
use starscatter::oracles::{self, Steps};

fn barrier_line(h: f64) -> (LineProblem, Steps) {
    let steps = Steps::new(vec![-0.5, 0.3, 1.0], vec![2.0, -1.0]);
    let q = |x: f64| {
        let v = if (-0.5..0.3).contains(&x) {
            2.0
        } else if (0.3..1.0).contains(&x) {
            -1.0
        } else {
            0.0
        };
        CMat::from_element(1, 1, c(v, 0.0))
    };
    let bp = delta_boundary(&scalar_coupling(0.0)).unwrap();
    (LineProblem::from_fn(1, h, 1.5, bp, q).unwrap(), steps)
}

#[test]
fn folded_scattering_matches_line_transfer_matrix() {
    let (lp, steps) = barrier_line(0.05);
    let (pg, bp) = fold_to_halfline(&lp).unwrap();
    let prop = Propagator::new(&pg).unwrap();
    for k in [0.3, 0.8, 1.5, 3.0] {
        let plus = prop.sample(c(k, 0.0), false).unwrap();
        let minus = prop.sample(c(-k, 0.0), false).unwrap();
        let s = scattering_from_jost(
            &jost_matrix(&minus, Some(&plus), &bp).unwrap(),
            &jost_matrix(&plus, Some(&minus), &bp).unwrap(),
            k,
        )
        .unwrap();
        // channel 2 carries the left half-line, so left incidence is column 2
        let (r, t) = oracles::line_coefficients(k, &steps, &[]);
        let err = (s[(1, 1)] - r)
            .norm()
            .max((s[(0, 1)] - t).norm())
            .max((s[(1, 0)] - t).norm());
        assert!(err < 1e-6, "k = {k}: {err:e}");
    }
}

fn gaussian_line(grid: StateGrid, a: f64, x0: f64, k0: f64) -> LineState {
    LineState::from_fn(grid, |x| {
        CVec::from_element(1, oracles::free_gaussian(a, x0, k0, 0.0, x))
    })
}

fn line_distance(a: &LineState, b: &LineState) -> f64 {
    let g = a.grid;
    let d = |p: &[Complex64], q: &[Complex64]| {
        g.norm(&p.iter().zip(q).map(|(x, y)| x - y).collect::<Vec<_>>())
            .powi(2)
    };
    (d(&a.plus, &b.plus) + d(&a.minus, &b.minus)).sqrt() / b.norm()
}

#[test]
fn free_line_packet_crosses_the_origin_freely() {
    let grid = StateGrid::new(1, 0.02, 40.0).unwrap();
    let lp = LineProblem::from_fn(
        1,
        0.02,
        1.0,
        delta_boundary(&scalar_coupling(0.0)).unwrap(),
        |_| CMat::zeros(1, 1),
    )
    .unwrap();
    let (a, x0, k0) = (0.5, -3.0, 2.0);
    let v0 = gaussian_line(grid, a, x0, k0);
    for t in [0.5, 1.5] {
        let out = evolve_line(&lp, &v0, t, &LineSettings::default()).unwrap();
        let exact = LineState::from_fn(grid, |x| {
            CVec::from_element(1, oracles::free_gaussian(a, x0, k0, t, x))
        });
        let err = line_distance(&out.v, &exact);
        assert!(err < 1e-4, "t = {t}: {err:e}");
        assert!(out.norm_drift.abs() < 1e-8);
    }
}

#[test]
fn line_routes_agree_through_a_barrier() {
    let (lp, _) = barrier_line(0.02);
    let grid = StateGrid::new(1, 0.02, 40.0).unwrap();
    let v0 = gaussian_line(grid, 0.5, -4.0, 1.8);
    let t = 1.5;
    let spectral = evolve_line(&lp, &v0, t, &LineSettings::default()).unwrap();
    let stepper = evolve_line(
        &lp,
        &v0,
        t,
        &LineSettings {
            method: Method::Stepper,
            ..LineSettings::default()
        },
    )
    .unwrap();
    let err = line_distance(&stepper.v, &spectral.v);
    assert!(err < 1e-3, "{err:e}");
    assert!(spectral.norm_drift.abs() < 1e-6);
}

#[test]
fn attractive_delta_keeps_its_bound_part() {
    let lambda = scalar_coupling(-1.4);
    let lp = LineProblem::delta(1, 0.02, 1.0, &lambda, |_| CMat::zeros(1, 1)).unwrap();
    let grid = StateGrid::new(1, 0.02, 40.0).unwrap();
    // bound component plus a distant packet, so the data nearly satisfy the jump condition
    let v0 = LineState::from_fn(grid, |x| {
        CVec::from_element(
            1,
            oracles::free_gaussian(0.5, -7.0, 1.0, 0.0, x) + 0.8 * (-0.7 * x.abs()).exp(),
        )
    });
    let out = evolve_line(&lp, &v0, 1.0, &LineSettings::default()).unwrap();
    assert_eq!(out.bound_count, 1);
    assert!(out.norm_drift.abs() < 1e-6, "{}", out.norm_drift);
    let (jump, kink) = transmission_residual(&out.v, &lambda);
    assert!(jump < 1e-8 && kink < 1e-3, "{jump:e} {kink:e}");
}
