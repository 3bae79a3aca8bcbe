//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use coupled_stability::linalg::GramFactor;
use coupled_stability::semigroup::{complex_state, resolvent_identity_residual, semigroup_property_residual};
use coupled_stability::stability::{
    admissibility_control, admissibility_observation, convolution_term_norm, saturated_control,
    saturated_observation, uniform_grid,
};
use coupled_stability::systems::Param;
use coupled_stability::{
    catalog_lookup, coupled_from_spec, evolve_direct, evolve_vop, spectral_abscissa, theorem_bound_certificate,
    AdmissibilityMethod, CoupledGenerator, Generator, Grid, MatrixGenerator, Propagator, QuadratureSpec, SystemId,
    SystemParams, Verdict,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn build(id: SystemId, params: &SystemParams, n: usize) -> CoupledGenerator {
    let spec = catalog_lookup(id, params).unwrap();
    coupled_from_spec(&spec, &Grid::new(n).unwrap()).unwrap()
}

fn unit(id: SystemId, n: usize) -> CoupledGenerator {
    build(id, &SystemParams::unit(id), n)
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0))
}

fn split(cg: &CoupledGenerator, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    (x.rows(0, cg.dim1()).into_owned(), x.rows(cg.dim1(), cg.dim2()).into_owned())
}

fn abscissa_negative() -> Outcome {
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    for id in SystemId::ALL {
        for n in [16, 32, 64] {
            worst = worst.max(spectral_abscissa(&unit(id, n)).unwrap().abscissa);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (worst < 0.0 && secs <= 30.0, format!("max abscissa {worst:.3e}, {secs:.1} s"))
}

fn vop_matches_direct() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for id in SystemId::ALL {
        let cg = unit(id, 12);
        let p = Propagator::new(&cg).unwrap();
        for _ in 0..20 {
            let mut x = random_vec(&mut rng, cg.dim());
            x /= p.factor.norm(&x);
            let direct = evolve_direct(&cg, &x, 1.0, 1.0).unwrap().states.pop().unwrap();
            let (f, g) = split(&cg, &x);
            let v = evolve_vop(cg.blocks(), &f, &g, 1.0, QuadratureSpec::gauss(64)).unwrap();
            worst = worst.max(p.factor.norm(&(v - &direct)) / p.factor.norm(&direct));
        }
    }
    (worst <= 1e-6, format!("max relative error {worst:.3e}"))
}

fn resolvent_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for id in SystemId::ALL {
        let cg = unit(id, 16);
        let f1 = GramFactor::new(&cg.a1.gram).unwrap();
        let f2 = GramFactor::new(&cg.a2.gram).unwrap();
        for lam in [Complex64::new(1.0, 0.0), Complex64::new(1.0, 5.0), Complex64::new(10.0, 0.0)] {
            for _ in 0..20 {
                let f = random_vec(&mut rng, cg.dim1());
                let g = random_vec(&mut rng, cg.dim2());
                let r = resolvent_identity_residual(cg.blocks(), lam, &complex_state(&f), &complex_state(&g)).unwrap();
                worst = worst.max(r / (f1.norm(&f) + f2.norm(&g)));
            }
        }
    }
    (worst <= 1e-9, format!("max residual / (|f|+|g|) {worst:.3e}"))
}

fn triangular_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for id in SystemId::ALL {
        let cg = unit(id, 16);
        let whole = Propagator::new(&cg).unwrap();
        let free = Propagator::new(&cg.a2).unwrap();
        for t in [0.1, 1.0, 5.0] {
            for _ in 0..20 {
                let mut x = random_vec(&mut rng, cg.dim());
                x /= whole.factor.norm(&x);
                let (_, g) = split(&cg, &x);
                let (_, y2) = split(&cg, &whole.apply(t, &x));
                worst = worst.max(free.factor.norm(&(y2 - free.apply(t, &g))));
            }
        }
    }
    (worst <= 1e-10, format!("max gram-norm gap {worst:.3e}"))
}

fn semigroup_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for id in SystemId::ALL {
        let cg = unit(id, 16);
        let f = GramFactor::new(&cg.gram).unwrap();
        for (t, s) in [(0.5, 0.5), (1.0, 2.0)] {
            let mut x = random_vec(&mut rng, cg.dim());
            x /= f.norm(&x);
            worst = worst.max(semigroup_property_residual(&cg, t, s, &x).unwrap());
        }
    }
    (worst <= 1e-9, format!("max residual {worst:.3e}"))
}

fn decay_certificates() -> Outcome {
    let start = Instant::now();
    let grid = uniform_grid(10.0, 50);
    let mut ok = true;
    let mut ratios = Vec::new();
    for id in SystemId::ALL {
        let cert = theorem_bound_certificate(&unit(id, 16), 0.5, 1.0, &grid).unwrap();
        ok &= cert.verdict == Verdict::Holds;
        ratios.push(format!("{}={:.3}", id.name(), cert.worst_ratio));
    }
    let secs = start.elapsed().as_secs_f64();
    (ok && secs <= 120.0, format!("worst ratios {}, {secs:.1} s", ratios.join(" ")))
}

fn admissibility_closed_forms() -> Outcome {
    let exact = ((1.0 - (-2.0f64).exp()) / 2.0).sqrt();
    let scalar = MatrixGenerator::new(DMatrix::from_element(1, 1, -1.0));
    let one = DMatrix::from_element(1, 1, 1.0);
    let mut scalar_err = 0.0f64;
    for method in [AdmissibilityMethod::GramianEig, AdmissibilityMethod::InputMapSVD] {
        let w = admissibility_control(&scalar, &one, 1.0, 512, method).unwrap().value;
        let v = admissibility_observation(&scalar, &one, 1.0, 512, method).unwrap().value;
        scalar_err = scalar_err.max((w - exact).abs()).max((v - exact).abs());
    }
    let mut spread = 0.0f64;
    for id in SystemId::ALL {
        let cg = unit(id, 16);
        for t0 in [1.0, 4.0] {
            let pairs = [
                [AdmissibilityMethod::GramianEig, AdmissibilityMethod::InputMapSVD]
                    .map(|m| admissibility_control(&cg.a1, &cg.b.columns, t0, 512, m).unwrap().value),
                [AdmissibilityMethod::GramianEig, AdmissibilityMethod::InputMapSVD]
                    .map(|m| admissibility_observation(&cg.a2, &cg.c.rows, t0, 512, m).unwrap().value),
            ];
            for [a, b] in pairs {
                spread = spread.max((a - b).abs() / a.abs());
            }
        }
    }
    (
        scalar_err <= 1e-3 && spread <= 1e-6,
        format!("scalar error {scalar_err:.3e}, method spread {spread:.3e}"),
    )
}

fn convolution_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for id in SystemId::ALL {
        let cg = unit(id, 16);
        let k = saturated_control(&cg.a1, &cg.b.columns, 0.0, 1.0, 64).unwrap().value;
        let n = saturated_observation(&cg.a2, &cg.c.rows, 0.0, 1.0, 64).unwrap().value;
        let f2 = GramFactor::new(&cg.a2.gram).unwrap();
        for _ in 0..50 {
            let g = random_vec(&mut rng, cg.dim2());
            for t in [1.0, 5.0] {
                let c = convolution_term_norm(cg.blocks(), &g, t).unwrap();
                worst = worst.max(c / (k * n * f2.norm(&g)));
            }
        }
    }
    (worst <= 1.02, format!("max term / (K N |g|) {worst:.4}"))
}

fn trapezoid_order() -> Outcome {
    let cg = unit(SystemId::WaveWave2018, 8);
    let p = Propagator::new(&cg).unwrap();
    let mut parts = Vec::new();
    for a in [&cg.a1, &cg.a2] {
        let m = a.space.free_nodes(&a.grid);
        let first = a.grid.n + 1 - m;
        for i in 0..2 * m {
            let x = a.grid.x(i % m + first);
            parts.push(if i < m { (std::f64::consts::FRAC_PI_2 * x).sin() } else { x * (1.0 - x) });
        }
    }
    let x = DVector::from_vec(parts);
    let exact = p.apply(1.0, &x);
    let (f, g) = split(&cg, &x);
    let errs: Vec<f64> = [16, 32, 64, 128]
        .iter()
        .map(|&k| {
            let v = evolve_vop(cg.blocks(), &f, &g, 1.0, QuadratureSpec::trapezoid(k)).unwrap();
            p.factor.norm(&(v - &exact))
        })
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    (min >= 1.9, format!("observed orders {orders:.3?}"))
}

fn c0_strengthening() -> Outcome {
    let id = SystemId::WaveWave2018;
    let mut worst = f64::NEG_INFINITY;
    for c0 in [0.25, 0.5, 2.0, 4.0] {
        let params = SystemParams::unit(id).with(Param::C0, c0);
        worst = worst.max(spectral_abscissa(&build(id, &params, 32)).unwrap().abscissa);
    }
    (worst < 0.0, format!("max abscissa {worst:.3e}"))
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify");
    let run = || {
        let o = Command::new(env!("CARGO_BIN_EXE_coupled-stability"))
            .args(["verify", "--system", "WaveWave2018", "--n", "16", "--seed", "11", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        let report = std::fs::read(out.join("verify.json")).unwrap_or_default();
        (o.status.code(), o.stdout, report)
    };
    let (code_a, stdout_a, a) = run();
    let (code_b, stdout_b, b) = run();
    let ok = code_a == Some(0) && code_b == Some(0) && !a.is_empty() && a == b && stdout_a == stdout_b;
    (ok, format!("exit codes {code_a:?} {code_b:?}, report {} bytes", a.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("coupled spectral abscissa < 0 at n = 16, 32, 64", abscissa_negative),
        ("variation of parameters matches direct flow", vop_matches_direct),
        ("block resolvent identity", resolvent_identity),
        ("triangular invariance", triangular_invariance),
        ("semigroup law", semigroup_law),
        ("composite decay certificate holds", decay_certificates),
        ("admissibility closed forms and method agreement", admissibility_closed_forms),
        ("convolution term bounded by K N |g|", convolution_bound),
        ("trapezoid convergence order", trapezoid_order),
        ("stability for c0 away from 1", c0_strengthening),
        ("CLI verify determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = check();
        if !ok {
            failed += 1;
        }
        println!("{} {:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
