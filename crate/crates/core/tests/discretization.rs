mod common;

use common::{coupled, random_vec, rng};
use coupled_stability::discretize::{BoundaryFunctional, BoundaryWeight};
use coupled_stability::linalg::{eigenvalues, GramFactor};
use coupled_stability::systems::{Component, ObservationKind};
use coupled_stability::*;
use nalgebra::{DMatrix, DVector};

#[test]
fn free_blocks_are_stable_at_every_resolution() {
    for id in SystemId::ALL {
        for n in [8, 16, 32, 64] {
            let cg = coupled(id, n);
            for a in [&cg.a1, &cg.a2] {
                let s = spectral_abscissa(a).unwrap();
                assert!(s.abscissa < 0.0, "{id:?} n={n} {:?}: {}", a.space.kind, s.abscissa);
            }
        }
    }
}

#[test]
fn dirichlet_wave_at_coarsest_grid() {
    let spec = catalog_lookup(SystemId::WaveWave2018, &SystemParams::unit(SystemId::WaveWave2018)).unwrap();
    assert_eq!(spec.space2.kind, SpaceKind::WaveDirichletLeft);
    let a = build_generator(&spec.space2, &Grid::new(4).unwrap()).unwrap();
    assert_eq!(a.dim(), 8);
    assert!(eigenvalues(&a.matrix).unwrap().iter().all(|z| z.re < 0.0));
}

#[test]
fn grams_are_positive_definite() {
    for id in SystemId::ALL {
        for n in [8, 16, 32] {
            let cg = coupled(id, n);
            for a in [&cg.a1, &cg.a2] {
                let min = a.gram.symmetric_eigenvalues().min();
                assert!(min > 0.0, "{id:?} n={n}: {min}");
                assert_eq!(a.gram, a.gram.transpose());
            }
        }
    }
}

#[test]
fn dissipative_within_slack_on_random_states() {
    let mut r = rng(11);
    for id in SystemId::ALL {
        let cg = coupled(id, 20);
        for a in [&cg.a1, &cg.a2] {
            let f = GramFactor::new(&a.gram).unwrap();
            let slack = a.dissipation_slack();
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..200 {
                let mut x = random_vec(&mut r, a.dim());
                x /= f.norm(&x);
                worst = worst.max(x.dot(&(&a.gram * (&a.matrix * &x))));
            }
            assert!(worst <= slack, "{id:?} {:?}: {worst}", a.space.kind);
            assert!(worst <= 1e-9, "{id:?} {:?}: {worst}", a.space.kind);
        }
    }
}

#[test]
fn beam_slope_weight_adds_a_rank_one_term() {
    let grid = Grid::new(16).unwrap();
    let weighted = SpaceSpec {
        kind: SpaceKind::BeamClampedFree,
        params: SystemParams::default().with(systems::Param::C2, 1.0).with(systems::Param::C3, 2.0),
        boundary_weights: vec![BoundaryWeight {
            functional: BoundaryFunctional::SlopeAtLeft,
            coefficient: 2.0,
        }],
    };
    let bare = SpaceSpec {
        boundary_weights: vec![],
        ..weighted.clone()
    };
    let diff = build_gram(&weighted, &grid).unwrap() - build_gram(&bare, &grid).unwrap();
    let mut s: Vec<f64> = diff.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    assert!(s[1] <= 1e-12 * s[0]);

    // diff = 2ℓℓᵀ with ℓ the discrete f′(0): exact on f = x, and of size h on f = x².
    let m = bare.free_nodes(&grid);
    let lin = DVector::from_fn(2 * m, |i, _| if i < m { grid.x(i + 1) } else { 0.0 });
    let quad = DVector::from_fn(2 * m, |i, _| if i < m { grid.x(i + 1).powi(2) } else { 0.0 });
    assert!((lin.dot(&(&diff * &lin)) - 2.0).abs() < 1e-12);
    assert!((quad.dot(&(&diff * &quad)) - 2.0 * grid.h * grid.h).abs() < 1e-12);
    assert!((s[0] - 2.0 / (grid.h * grid.h)).abs() < 1e-9 * s[0]);
}

#[test]
fn observation_rows_reproduce_polynomial_derivatives() {
    // first-derivative stencil is exact to degree 2, second-derivative to degree 3
    for n in [8, 16, 64] {
        let grid = Grid::new(n).unwrap();
        let spec = catalog_lookup(SystemId::WaveWave2018, &SystemParams::unit(SystemId::WaveWave2018)).unwrap();
        let c = build_observation(&spec, &grid).unwrap();
        let m = spec.space2.free_nodes(&grid);
        for (p, want) in [(1, 1.0), (2, 0.0)] {
            let x = DVector::from_fn(2 * m, |i, _| if i < m { grid.x(i + 1).powi(p) } else { 0.0 });
            assert!(((&c.rows * &x)[0] - want).abs() < 1e-12, "n={n} p={p}");
        }

        let spec = catalog_lookup(SystemId::BeamBeam2017, &SystemParams::unit(SystemId::BeamBeam2017)).unwrap();
        let c = build_observation(&spec, &grid).unwrap();
        let m = spec.space2.free_nodes(&grid);
        for (p, want) in [(2, 2.0), (3, 0.0)] {
            let x = DVector::from_fn(2 * m, |i, _| if i < m { grid.x(i + 1).powi(p) } else { 0.0 });
            let got = (&c.rows * &x)[0];
            assert!((got - want).abs() < 1e-12 * (n * n) as f64, "n={n} p={p}: {got}");
        }
    }
}

#[test]
fn point_rows_read_gain_times_trace() {
    let grid = Grid::new(12).unwrap();
    let params = SystemParams::unit(SystemId::BeamBeam2008).with(systems::Param::C1, 2.0);
    let spec = catalog_lookup(SystemId::BeamBeam2008, &params).unwrap();
    let c = build_observation(&spec, &grid).unwrap();
    let m = spec.space2.free_nodes(&grid);
    let mut x = DVector::zeros(2 * m);
    x[2 * m - 1] = 5.0;
    assert_eq!((&c.rows * &x)[0], 10.0);

    let spec = catalog_lookup(SystemId::KrsticWave, &SystemParams::unit(SystemId::KrsticWave)).unwrap();
    let c = build_observation(&spec, &grid).unwrap();
    assert_eq!(c.rows.row(0), c.rows.row(1));
    let m = spec.space2.free_nodes(&grid);
    let mut x = DVector::zeros(2 * m);
    x[m - 1] = 1.0;
    x[2 * m - 1] = 1.0;
    assert_eq!((&c.rows * &x)[0], 2.0);
    assert!(matches!(
        c.kinds[0],
        ObservationKind::Combination { ref terms } if matches!(terms[1], ObservationKind::PointValue { component: Component::Velocity, .. })
    ));
}

#[test]
fn delta_column_is_local_and_profile_column_is_exponential() {
    let grid = Grid::new(16).unwrap();
    let spec = catalog_lookup(SystemId::BeamBeam2008, &SystemParams::unit(SystemId::BeamBeam2008)).unwrap();
    let b = build_injection(&spec, &grid).unwrap();
    let nz: Vec<usize> = (0..b.columns.nrows()).filter(|&i| b.columns[(i, 0)] != 0.0).collect();
    let m = spec.space1.free_nodes(&grid);
    assert_eq!(nz, vec![2 * m - 1], "only the tip velocity row sees the shear input");

    let p = SystemParams::unit(SystemId::KrsticWave).with(systems::Param::C1, 1.5).with(systems::Param::Q, 0.7);
    let spec = catalog_lookup(SystemId::KrsticWave, &p).unwrap();
    let b = build_injection(&spec, &grid).unwrap();
    let m = spec.space1.free_nodes(&grid);
    let first = grid.n + 1 - m;
    for j in 0..m {
        let want = (1.5 + 0.7) * (0.7 * (1.0 - grid.x(j + first))).exp();
        assert!((b.columns[(m + j, 0)] - want).abs() < 1e-14 * want);
        assert_eq!(b.columns[(j, 0)], 0.0);
    }
}

#[test]
fn delta_prime_column_converges_to_derivative_pairing() {
    // ⟨b, φ⟩ in the velocity inner product → −φ′(0) for φ(0) = 0
    let spec = catalog_lookup(SystemId::BeamBeam2017, &SystemParams::unit(SystemId::BeamBeam2017)).unwrap();
    type Case = (fn(f64) -> f64, f64);
    let tests: [Case; 2] = [(f64::sin, 1.0), (|x| x * (2.0 * x).exp(), 1.0)];
    for (phi, dphi0) in tests {
        let mut errs = Vec::new();
        for n in [16, 32, 64, 128] {
            let grid = Grid::new(n).unwrap();
            let b = build_injection(&spec, &grid).unwrap();
            let a = build_generator(&spec.space1, &grid).unwrap();
            let m = spec.space1.free_nodes(&grid);
            let first = grid.n + 1 - m;
            let v = DVector::from_fn(2 * m, |i, _| if i >= m { phi(grid.x(i - m + first)) } else { 0.0 });
            let pairing = b.columns.column(0).dot(&(&a.gram * &v));
            errs.push((pairing + dphi0).abs());
        }
        for w in errs.windows(2) {
            assert!(w[1] < 0.6 * w[0], "{errs:?}");
        }
        assert!(errs[3] < 2e-2, "{errs:?}");
    }
}

#[test]
fn generators_round_trip_through_both_export_formats() {
    let cg = coupled(SystemId::BeamBeam2017, 10);
    for m in [&cg.matrix, &cg.gram, &cg.b.columns, &cg.c.rows] {
        assert_eq!(&export::matrix_from_csv(&export::matrix_to_csv(m)).unwrap(), m);
        assert_eq!(&export::matrix_from_bytes(&export::matrix_to_bytes(m)).unwrap(), m);
    }
    let empty = DMatrix::<f64>::zeros(0, 0);
    assert_eq!(export::matrix_from_bytes(&export::matrix_to_bytes(&empty)).unwrap(), empty);
}
