//! Spectra, operator norms, fitted decay pairs, admissibility constants and
//! the composite decay certificate of a block-triangular coupled system.
//!
//! Admissibility Gramians are integrated exactly on each sub-interval
//! (quadrature seed on a short interval, then doubling), so the time-step
//! count only controls how the horizon is partitioned.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupling::{CoupledGenerator, Generator};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, expm, gauss_legendre_unit, norm1, spectral_norm};
use crate::par;
use crate::semigroup::{Blocks, Propagator};

/// Slack between the coupled norm and the composite bound in the verdict.
pub const NORM_FACTOR: f64 = 2.0;

/// Relative growth per horizon doubling below which a constant is saturated.
pub const SATURATION_GROWTH: f64 = 0.01;

/// Horizon doublings tried before giving up on saturation.
pub const MAX_DOUBLINGS: usize = 40;

/// Time steps per horizon used for the certificate's admissibility constants.
pub const CERT_STEPS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Sorted by decreasing real part, then decreasing imaginary part.
    pub eigenvalues: Vec<Complex64>,
    pub abscissa: f64,
    pub gap_to_axis: f64,
}

fn report_of(m: &DMatrix<f64>) -> Result<SpectralReport> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            what: "generator must be square",
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("generator matrix"));
    }
    let mut eigenvalues = eigenvalues(m)?;
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let abscissa = eigenvalues.first().map_or(f64::NEG_INFINITY, |z| z.re);
    Ok(SpectralReport {
        eigenvalues,
        abscissa,
        gap_to_axis: -abscissa,
    })
}

/// Full dense spectrum, computed on the energy-coordinate matrix.
pub fn spectral_abscissa<G: Generator + ?Sized>(g: &G) -> Result<SpectralReport> {
    report_of(&Propagator::new(g)?.energy)
}

/// Gram-weighted operator norm `‖e^{Gt}‖`.
pub fn operator_norm_at<G: Generator + ?Sized>(g: &G, t: f64) -> Result<f64> {
    Ok(operator_norms(g, &[t])?[0])
}

/// [`operator_norm_at`] over a list of times, evaluated in parallel.
pub fn operator_norms<G: Generator + ?Sized>(g: &G, times: &[f64]) -> Result<Vec<f64>> {
    if let Some(&t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    let prop = Propagator::new(g)?;
    norms_energy(&prop.energy, times)
}

fn norms_energy(a: &DMatrix<f64>, times: &[f64]) -> Result<Vec<f64>> {
    par::map(times, |&t| spectral_norm(&expm(&(a * t))).ok_or(Error::EigenSolverFailed))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub m: f64,
    pub omega: f64,
}

/// Fit `‖e^{Gt}‖ ≤ M e^{−ωt}` on `t_grid`.
///
/// `ω` is the least-squares slope of `log ‖e^{Gt}‖` over the tail half of the
/// grid, capped by the spectral gap; if that slope is not negative the
/// endpoint rate `−log ‖e^{Gt_max}‖ / t_max` is used instead. `M` is then the
/// smallest constant for which the bound holds at every grid point.
pub fn fit_decay<G: Generator + ?Sized>(g: &G, t_grid: &[f64]) -> Result<DecayFit> {
    check_grid(t_grid)?;
    let prop = Propagator::new(g)?;
    let gap = report_of(&prop.energy)?.gap_to_axis;
    let norms = norms_energy(&prop.energy, t_grid)?;
    fit_from_norms(t_grid, &norms, gap)
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.len() < 4 {
        return Err(Error::InvalidArgument("t_grid needs at least 4 points".into()));
    }
    if t_grid[0] < 0.0 || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("t_grid must be finite and >= 0".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("t_grid must be strictly increasing".into()));
    }
    Ok(())
}

fn fit_from_norms(t: &[f64], norms: &[f64], gap: f64) -> Result<DecayFit> {
    let (t_max, n_max) = (*t.last().unwrap(), *norms.last().unwrap());
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    let no_decay = !(n_max < 1.0) || !(gap > 0.0);
    if no_decay {
        return Err(Error::NoDecayDetected { t: t_max, norm: n_max });
    }
    let tail = t.len() / 2;
    let (ts, ls): (Vec<f64>, Vec<f64>) = t[tail..]
        .iter()
        .zip(&norms[tail..])
        .map(|(&t, &n)| (t, n.max(f64::MIN_POSITIVE).ln()))
        .unzip();
    let k = ts.len() as f64;
    let (tm, lm) = (ts.iter().sum::<f64>() / k, ls.iter().sum::<f64>() / k);
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(&ls).map(|(t, l)| (t - tm) * (l - lm)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let omega = if -slope > 0.0 {
        (-slope).min(gap)
    } else {
        (-n_max.ln() / t_max).min(gap)
    };
    let m = t
        .iter()
        .zip(norms)
        .map(|(&t, &n)| n * (omega * t).exp())
        .fold(0.0, f64::max);
    Ok(DecayFit { m, omega })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdmissibilityKind {
    ControlW,
    ObservationV,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdmissibilityMethod {
    /// Square root of the top eigenvalue of the finite-horizon Gramian.
    GramianEig,
    /// Top singular value of the stacked input (or output) map.
    InputMapSVD,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityEstimate {
    pub t0: f64,
    pub value: f64,
    pub kind: AdmissibilityKind,
    pub method: AdmissibilityMethod,
    pub time_steps: usize,
}

/// `W(t0)`: norm of `u ↦ ∫₀^{t0} e^{A(t0−s)} B u(s) ds` from `L²(0,t0)` into
/// the gram-normed state space.
pub fn admissibility_control<G: Generator + ?Sized>(
    a: &G,
    b: &DMatrix<f64>,
    t0: f64,
    steps: usize,
    method: AdmissibilityMethod,
) -> Result<AdmissibilityEstimate> {
    let prop = Propagator::new(a)?;
    let bt = control_map(&prop, b)?;
    let value = horizon_value(&prop.energy, &(&bt * bt.transpose()), t0, steps, method)?;
    Ok(AdmissibilityEstimate {
        t0,
        value,
        kind: AdmissibilityKind::ControlW,
        method,
        time_steps: steps,
    })
}

/// `V(t0)`: norm of `x ↦ C e^{A·} x` from the gram-normed state space into
/// `L²(0,t0)`.
pub fn admissibility_observation<G: Generator + ?Sized>(
    a: &G,
    c: &DMatrix<f64>,
    t0: f64,
    steps: usize,
    method: AdmissibilityMethod,
) -> Result<AdmissibilityEstimate> {
    let prop = Propagator::new(a)?;
    let ct = observation_map(&prop, c)?;
    let value = horizon_value(
        &prop.energy.transpose(),
        &(ct.transpose() * &ct),
        t0,
        steps,
        method,
    )?;
    Ok(AdmissibilityEstimate {
        t0,
        value,
        kind: AdmissibilityKind::ObservationV,
        method,
        time_steps: steps,
    })
}

fn control_map(prop: &Propagator, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != prop.dim() {
        return Err(Error::DimensionMismatch {
            what: "B rows vs state dimension",
            expected: prop.dim(),
            actual: b.nrows(),
        });
    }
    Ok(prop.factor.left(b))
}

fn observation_map(prop: &Propagator, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c.ncols() != prop.dim() {
        return Err(Error::DimensionMismatch {
            what: "C columns vs state dimension",
            expected: prop.dim(),
            actual: c.ncols(),
        });
    }
    Ok(prop.factor.right_inv(c))
}

fn check_horizon(t0: f64, steps: usize) -> Result<()> {
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be > 0, got {t0}")));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be >= 1".into()));
    }
    Ok(())
}

/// `∫₀^{dt} e^{ar} s e^{aᵀr} dr` and `e^{a·dt}`.
fn interval_gramian(a: &DMatrix<f64>, s: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let scale = norm1(a) * dt;
    let k = if scale > 0.5 { (scale / 0.5).log2().ceil() as i32 } else { 0 };
    let delta = dt / 2f64.powi(k);
    let (xi, wi) = gauss_legendre_unit(12);
    let mut p = DMatrix::zeros(a.nrows(), a.nrows());
    for (x, w) in xi.iter().zip(&wi) {
        let e = expm(&(a * (delta * x)));
        p += &e * s * e.transpose() * (w * delta);
    }
    let mut e = expm(&(a * delta));
    for _ in 0..k {
        p = &p + &e * &p * e.transpose();
        e = &e * &e;
    }
    (symmetrize(p), e)
}

fn symmetrize(p: DMatrix<f64>) -> DMatrix<f64> {
    (&p + p.transpose()) * 0.5
}

fn top_eigen_sqrt(p: &DMatrix<f64>) -> f64 {
    if p.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(p.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .sqrt()
}

/// Horizon Gramian `Σ_{j<steps} Eʲ P_Δ Eʲᵀ` by Horner's rule.
fn horizon_gramian(a: &DMatrix<f64>, s: &DMatrix<f64>, t0: f64, steps: usize) -> DMatrix<f64> {
    let (p_step, e) = interval_gramian(a, s, t0 / steps as f64);
    let mut p = p_step.clone();
    for _ in 1..steps {
        p = &p_step + &e * p * e.transpose();
    }
    symmetrize(p)
}

fn horizon_value(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    t0: f64,
    steps: usize,
    method: AdmissibilityMethod,
) -> Result<f64> {
    check_horizon(t0, steps)?;
    if s.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    match method {
        AdmissibilityMethod::GramianEig => Ok(top_eigen_sqrt(&horizon_gramian(a, s, t0, steps))),
        AdmissibilityMethod::InputMapSVD => {
            let (p_step, e) = interval_gramian(a, s, t0 / steps as f64);
            let root = psd_root(&p_step);
            let (d, r) = root.shape();
            let mut stacked = DMatrix::zeros(d, r * steps);
            let mut block = root;
            for j in 0..steps {
                stacked.view_mut((0, j * r), (d, r)).copy_from(&block);
                block = &e * block;
            }
            spectral_norm(&stacked.transpose()).ok_or(Error::EigenSolverFailed)
        }
    }
}

/// `R` with `R Rᵀ = P`, dropping numerically null directions.
fn psd_root(p: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(p.clone());
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cut = top * 1e-15 * p.nrows() as f64;
    let keep: Vec<usize> = (0..p.nrows()).filter(|&i| eig.eigenvalues[i] > cut).collect();
    let mut r = DMatrix::zeros(p.nrows(), keep.len().max(1));
    for (col, &i) in keep.iter().enumerate() {
        r.set_column(col, &(eig.eigenvectors.column(i) * eig.eigenvalues[i].sqrt()));
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturatedConstant {
    pub value: f64,
    /// Horizon at which growth per doubling fell below [`SATURATION_GROWTH`].
    pub horizon: f64,
    pub saturated: bool,
    /// `(t0, value)` at every horizon visited.
    pub ladder: Vec<(f64, f64)>,
}

/// Double the horizon from `t_start` until the constant grows by less than
/// [`SATURATION_GROWTH`], reusing `P(2T) = P(T) + e^{aT} P(T) e^{aᵀT}`.
fn saturate(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    t_start: f64,
    steps: usize,
) -> Result<SaturatedConstant> {
    check_horizon(t_start, steps)?;
    if s.iter().all(|&v| v == 0.0) {
        return Ok(SaturatedConstant {
            value: 0.0,
            horizon: t_start,
            saturated: true,
            ladder: vec![(t_start, 0.0)],
        });
    }
    let mut p = horizon_gramian(a, s, t_start, steps);
    let mut e = expm(&(a * t_start));
    let mut t = t_start;
    let mut value = top_eigen_sqrt(&p);
    let mut ladder = vec![(t, value)];
    for _ in 0..MAX_DOUBLINGS {
        p = symmetrize(&p + &e * &p * e.transpose());
        e = &e * &e;
        t *= 2.0;
        let next = top_eigen_sqrt(&p);
        ladder.push((t, next));
        let grew = next > (1.0 + SATURATION_GROWTH) * value;
        value = value.max(next);
        if !grew {
            return Ok(SaturatedConstant {
                value,
                horizon: t,
                saturated: true,
                ladder,
            });
        }
        if !value.is_finite() {
            break;
        }
    }
    Ok(SaturatedConstant {
        value,
        horizon: t,
        saturated: false,
        ladder,
    })
}

/// `K = sup_t W(t)` for the pair `(A + shift·I, B)`.
pub fn saturated_control<G: Generator + ?Sized>(
    a: &G,
    b: &DMatrix<f64>,
    shift: f64,
    t_start: f64,
    steps: usize,
) -> Result<SaturatedConstant> {
    let prop = Propagator::new(a)?;
    let bt = control_map(&prop, b)?;
    let a = shifted(&prop.energy, shift);
    saturate(&a, &(&bt * bt.transpose()), t_start, steps)
}

/// `N = sup_t V(t)` for the pair `(A + shift·I, C)`.
pub fn saturated_observation<G: Generator + ?Sized>(
    a: &G,
    c: &DMatrix<f64>,
    shift: f64,
    t_start: f64,
    steps: usize,
) -> Result<SaturatedConstant> {
    let prop = Propagator::new(a)?;
    let ct = observation_map(&prop, c)?;
    let a = shifted(&prop.energy, shift).transpose();
    saturate(&a, &(ct.transpose() * &ct), t_start, steps)
}

fn shifted(a: &DMatrix<f64>, shift: f64) -> DMatrix<f64> {
    let n = a.nrows();
    a + DMatrix::identity(n, n) * shift
}

/// `max{M₁ + M₂, K₁N₁ + M₂}`
pub fn composite_bound(m1: f64, m2: f64, k1: f64, n1: f64) -> f64 {
    (m1 + m2).max(k1 * n1 + m2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub m_a1: f64,
    pub omega_a1: f64,
    pub m_a2: f64,
    pub omega_a2: f64,
    pub k_const: f64,
    pub n_const: f64,
    pub k1: f64,
    pub n1: f64,
    pub gamma: f64,
    pub gamma_fraction: f64,
    pub bound_const: f64,
    pub horizon_k: f64,
    pub horizon_n: f64,
    pub horizon_k1: f64,
    pub horizon_n1: f64,
    pub admissibility_steps: usize,
    pub t_grid: Vec<f64>,
    /// `‖e^{𝔄t}‖` on `t_grid`.
    pub norms: Vec<f64>,
    /// `NORM_FACTOR · bound_const · e^{−γt}` on `t_grid`.
    pub envelope: Vec<f64>,
    /// `max_t norms / envelope`.
    pub worst_ratio: f64,
    pub verdict: Verdict,
}

/// Build the composite certificate for a catalog coupled system.
pub fn theorem_bound_certificate(
    coupled: &CoupledGenerator,
    gamma_fraction: f64,
    t0: f64,
    t_grid: &[f64],
) -> Result<DecayCertificate> {
    certificate_for_blocks(coupled.blocks(), gamma_fraction, t0, t_grid)
}

/// [`theorem_bound_certificate`] on arbitrary blocks. `t0` is the first
/// horizon of the saturation ladders.
pub fn certificate_for_blocks(
    blocks: Blocks<'_>,
    gamma_fraction: f64,
    t0: f64,
    t_grid: &[f64],
) -> Result<DecayCertificate> {
    if !(gamma_fraction > 0.0 && gamma_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma_fraction must lie in (0, 1), got {gamma_fraction}"
        )));
    }
    check_grid(t_grid)?;
    let p1 = Propagator::new(blocks.a1)?;
    let p2 = Propagator::new(blocks.a2)?;
    let fit1 = fit_block(&p1, t_grid)?;
    let fit2 = fit_block(&p2, t_grid)?;
    let gamma = gamma_fraction * fit1.omega.min(fit2.omega);
    for p in [&p1, &p2] {
        let abscissa = report_of(&shifted(&p.energy, gamma))?.abscissa;
        if abscissa >= 0.0 {
            return Err(Error::ShiftedUnstable { gamma, abscissa });
        }
    }

    let bt = control_map(&p1, blocks.b)?;
    let ct = observation_map(&p2, blocks.c)?;
    let sb = &bt * bt.transpose();
    let sc = ct.transpose() * &ct;
    let a2t = p2.energy.transpose();
    let steps = CERT_STEPS;
    let k = saturate(&p1.energy, &sb, t0, steps)?;
    let n = saturate(&a2t, &sc, t0, steps)?;
    let k1 = saturate(&shifted(&p1.energy, gamma), &sb, t0, steps)?;
    let n1 = saturate(&shifted(&a2t, gamma), &sc, t0, steps)?;

    let bound_const = composite_bound(fit1.m, fit2.m, k1.value, n1.value);
    let coupled = Propagator::new(&blocks.assemble())?;
    let norms = norms_energy(&coupled.energy, t_grid)?;
    let envelope: Vec<f64> = t_grid
        .iter()
        .map(|&t| NORM_FACTOR * bound_const * (-gamma * t).exp())
        .collect();
    let worst_ratio = norms
        .iter()
        .zip(&envelope)
        .map(|(n, e)| n / e)
        .fold(0.0, f64::max);
    let verdict = if worst_ratio <= 1.0 {
        Verdict::Holds
    } else {
        Verdict::Violated
    };
    Ok(DecayCertificate {
        m_a1: fit1.m,
        omega_a1: fit1.omega,
        m_a2: fit2.m,
        omega_a2: fit2.omega,
        k_const: k.value,
        n_const: n.value,
        k1: k1.value,
        n1: n1.value,
        gamma,
        gamma_fraction,
        bound_const,
        horizon_k: k.horizon,
        horizon_n: n.horizon,
        horizon_k1: k1.horizon,
        horizon_n1: n1.horizon,
        admissibility_steps: steps,
        t_grid: t_grid.to_vec(),
        norms,
        envelope,
        worst_ratio,
        verdict,
    })
}

fn fit_block(p: &Propagator, t_grid: &[f64]) -> Result<DecayFit> {
    let gap = report_of(&p.energy)?.gap_to_axis;
    let norms = norms_energy(&p.energy, t_grid)?;
    fit_from_norms(t_grid, &norms, gap)
}

/// Gram norm of the convolution term `∫₀ᵗ e^{A₁(t−σ)} B C e^{A₂σ} g dσ`,
/// read off the first component of `e^{𝔄t}(0, g)`.
pub fn convolution_term_norm(blocks: Blocks<'_>, g: &nalgebra::DVector<f64>, t: f64) -> Result<f64> {
    let coupled = blocks.assemble();
    let prop = Propagator::new(&coupled)?;
    let (d1, d2) = (blocks.dim1(), blocks.dim2());
    if g.len() != d2 {
        return Err(Error::DimensionMismatch {
            what: "g vs subsystem 2",
            expected: d2,
            actual: g.len(),
        });
    }
    let mut x = nalgebra::DVector::zeros(d1 + d2);
    x.rows_mut(d1, d2).copy_from(g);
    let y = prop.apply(t, &x);
    let p1 = Propagator::new(blocks.a1)?;
    Ok(p1.factor.norm(&y.rows(0, d1).clone_owned()))
}

/// Uniform grid of `points` samples over `[0, t_end]`.
pub fn uniform_grid(t_end: f64, points: usize) -> Vec<f64> {
    let k = points.max(2) - 1;
    (0..=k).map(|i| t_end * i as f64 / k as f64).collect()
}
