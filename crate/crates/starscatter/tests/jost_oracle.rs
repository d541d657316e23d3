use num_complex::Complex64;
use starscatter::core::bc::{validate_boundary, BoundaryPair};
use starscatter::core::jost::{KGrid, Propagator, ScatteringTable};
use starscatter::core::linalg::{c, CMat};
use starscatter::core::potential::{PotentialGrid, Preset};
use starscatter::core::spectrum::find_bound_states;
use starscatter::core::state::StateGrid;
use starscatter::oracles::{self, Steps};

fn three_steps(h: f64) -> (PotentialGrid, Steps) {
    let steps = Steps::new(vec![0.0, 0.4, 1.0, 1.6], vec![1.5, -3.0, 0.7]);
    let cells = (2.0 / h).round() as usize;
    let samples = (0..cells)
        .map(|i| {
            let x = (i as f64 + 0.5) * h;
            let v = steps
                .values
                .iter()
                .enumerate()
                .find(|(j, _)| x >= steps.edges[*j] && x < steps.edges[j + 1]);
            CMat::from_element(1, 1, c(v.map_or(0.0, |p| *p.1), 0.0))
        })
        .collect();
    (PotentialGrid::new(1, h, samples).unwrap(), steps)
}

#[test]
fn jost_and_s_match_plane_wave_matching() {
    let h = 0.02;
    let cases = vec![
        (
            Preset::SquareWell {
                depth: -2.0,
                width: 1.0,
            }
            .build(h, None)
            .unwrap(),
            Steps::square(-2.0, 1.0),
        ),
        (
            Preset::SquareBarrier {
                height: 3.0,
                width: 1.0,
            }
            .build(h, None)
            .unwrap(),
            Steps::square(3.0, 1.0),
        ),
        three_steps(h),
    ];
    let theta = 0.8_f64;
    let pairs = [(0.0, 1.0), (-1.0, 0.0), (-theta.sin(), theta.cos())];
    for (pg, steps) in &cases {
        let prop = Propagator::new(pg).unwrap();
        for &(a, b) in &pairs {
            let bp = validate_boundary(
                CMat::from_element(1, 1, c(a, 0.0)),
                CMat::from_element(1, 1, c(b, 0.0)),
            )
            .unwrap();
            for k in [0.5, 1.0, 2.0, 7.3] {
                let j = prop.jost(c(k, 0.0), &bp).unwrap()[(0, 0)];
                let j0 = oracles::scalar_jost(c(k, 0.0), steps, a, b);
                assert!(
                    (j - j0).norm() < 1e-8 * j0.norm().max(1.0),
                    "J k={k}: {j} vs {j0}"
                );
            }
            let table = ScatteringTable::compute(&prop, &bp, KGrid::new(10.0, 0.5).unwrap(), false)
                .unwrap();
            for (i, s) in table.s.iter().enumerate() {
                let s0 = oracles::scalar_s(table.kgrid.k(i), steps, a, b);
                assert!((s[(0, 0)] - s0).norm() < 1e-8);
            }
            let kappa = 0.9;
            let j = prop.jost(Complex64::new(0.0, kappa), &bp).unwrap()[(0, 0)];
            let j0 = oracles::scalar_jost(Complex64::new(0.0, kappa), steps, a, b);
            assert!((j - j0).norm() < 1e-8 * j0.norm().max(1.0));
        }
    }
}

#[test]
fn square_well_bound_states_match_transcendental_roots() {
    for depth in [2.0, 12.0, 30.0] {
        let pg = Preset::SquareWell {
            depth: -depth,
            width: 1.0,
        }
        .build(0.01, None)
        .unwrap();
        let prop = Propagator::new(&pg).unwrap();
        let grid = StateGrid::new(1, 0.01, 20.0).unwrap();
        let kmax = depth.sqrt() + 1.0;
        let bs = find_bound_states(&prop, &BoundaryPair::dirichlet(1), 1e-3, kmax, &grid).unwrap();
        let mut found: Vec<f64> = bs.states.iter().map(|b| b.kappa).collect();
        found.sort_by(|a, b| b.total_cmp(a));
        let expected = oracles::square_well_dirichlet_kappas(depth, 1.0);
        assert_eq!(
            found.len(),
            expected.len(),
            "depth {depth}: {found:?} vs {expected:?}"
        );
        for (k, k0) in found.iter().zip(&expected) {
            assert!((k - k0).abs() < 1e-6, "{k} vs {k0}");
        }
    }
}
