#![allow(dead_code)]

use coupled_stability::{catalog_lookup, coupled_from_spec, CoupledGenerator, Grid, SystemId, SystemParams};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn coupled(id: SystemId, n: usize) -> CoupledGenerator {
    let spec = catalog_lookup(id, &SystemParams::unit(id)).unwrap();
    coupled_from_spec(&spec, &Grid::new(n).unwrap()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0))
}

/// The fixed state `x_i = ((7i + 3) mod 11) − 5` used by the frozen oracles.
pub fn pattern_state(d: usize) -> DVector<f64> {
    DVector::from_fn(d, |i, _| ((7 * i + 3) % 11) as f64 - 5.0)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Displacement `sin(πx/2)` and velocity `x(1 − x)` sampled on each block's
/// free nodes.
pub fn smooth_state(cg: &CoupledGenerator) -> DVector<f64> {
    let mut parts = Vec::new();
    for a in [&cg.a1, &cg.a2] {
        let m = a.space.free_nodes(&a.grid);
        let first = a.grid.n + 1 - m;
        for i in 0..2 * m {
            let x = a.grid.x(i % m + first);
            parts.push(if i < m { (std::f64::consts::FRAC_PI_2 * x).sin() } else { x * (1.0 - x) });
        }
    }
    DVector::from_vec(parts)
}
