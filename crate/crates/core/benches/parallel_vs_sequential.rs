use std::hint::black_box;
use std::time::Duration;

use coupled_stability::stability::{operator_norms, uniform_grid};
use coupled_stability::{
    catalog_lookup, coupled_from_spec, evolve_direct, par, theorem_bound_certificate, CoupledGenerator, Generator, Grid,
    SystemId, SystemParams,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;

fn system(id: SystemId, n: usize) -> CoupledGenerator {
    let spec = catalog_lookup(id, &SystemParams::unit(id)).unwrap();
    coupled_from_spec(&spec, &Grid::new(n).unwrap()).unwrap()
}

const MODES: [(&str, bool); 2] = [("parallel", false), ("sequential", true)];

fn trajectory(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolve_direct");
    for n in [16, 32] {
        let cg = system(SystemId::WaveWave2018, n);
        let x0 = DVector::from_element(cg.dim(), 1.0);
        for (label, seq) in MODES {
            group.bench_with_input(BenchmarkId::new(label, n), &n, |b, _| {
                par::set_sequential(seq);
                b.iter(|| evolve_direct(&cg, black_box(&x0), 10.0, 0.01).unwrap());
            });
        }
    }
    group.finish();
}

fn norm_grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator_norms");
    let grid = uniform_grid(10.0, 50);
    for n in [16, 32] {
        let cg = system(SystemId::BeamBeam2008, n);
        for (label, seq) in MODES {
            group.bench_with_input(BenchmarkId::new(label, n), &n, |b, _| {
                par::set_sequential(seq);
                b.iter(|| operator_norms(&cg, black_box(&grid)).unwrap());
            });
        }
    }
    group.finish();
}

fn certificate(c: &mut Criterion) {
    let mut group = c.benchmark_group("certificate");
    let grid = uniform_grid(10.0, 50);
    let cg = system(SystemId::KrsticWave, 16);
    for (label, seq) in MODES {
        group.bench_function(label, |b| {
            par::set_sequential(seq);
            b.iter(|| theorem_bound_certificate(&cg, 0.5, 1.0, black_box(&grid)).unwrap());
        });
    }
    group.finish();
    par::set_sequential(false);
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10).measurement_time(Duration::from_secs(3));
    targets = trajectory, norm_grid, certificate
}
criterion_main!(benches);
