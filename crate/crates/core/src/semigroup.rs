//! Evolution under `e^{𝔄t}` by two independent routes, plus resolvents.
//!
//! * [`evolve_direct`] exponentiates a generator (coupled or free).
//! * [`evolve_vop`] evaluates the explicit representation
//!   `S(t)(f, g) = (e^{A₁t}f + ∫₀ᵗ e^{A₁(t−σ)} B C e^{A₂σ} g dσ, e^{A₂t} g)`
//!   from the free blocks only, by quadrature.
//!
//! Exponentials and solves are carried out in energy coordinates `z = Lᵀx`
//! (`gram = L Lᵀ`), where the generators are close to normal and all
//! reported norms are Euclidean.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupling::{CoupledGenerator, Generator, MatrixGenerator};
use crate::error::{Error, Result};
use crate::linalg::{expm, gauss_legendre_unit, solve_complex, to_complex, GramFactor};
use crate::par;

/// Nodes per panel of the Gauss–Legendre rule.
pub const GAUSS_POINTS: usize = 16;

/// Relative residual budget of a resolvent solve.
pub const SOLVE_TOL: f64 = 1e-10;

/// Reciprocal pivot ratio below which a resolvent solve is rejected.
pub const RCOND_MIN: f64 = 1e-13;

/// Samples per independently seeded chunk of a trajectory.
const CHUNK: usize = 32;

/// The block data of a coupled system: free generators and coupling maps.
#[derive(Clone, Copy)]
pub struct Blocks<'a> {
    pub a1: &'a dyn Generator,
    pub a2: &'a dyn Generator,
    /// `dim(a1) × k`
    pub b: &'a DMatrix<f64>,
    /// `k × dim(a2)`
    pub c: &'a DMatrix<f64>,
}

impl<'a> Blocks<'a> {
    pub fn new(
        a1: &'a dyn Generator,
        a2: &'a dyn Generator,
        b: &'a DMatrix<f64>,
        c: &'a DMatrix<f64>,
    ) -> Result<Self> {
        let blocks = Self { a1, a2, b, c };
        blocks.check()?;
        Ok(blocks)
    }

    fn check(&self) -> Result<()> {
        let mismatch = |what, expected, actual| Error::DimensionMismatch {
            what,
            expected,
            actual,
        };
        if self.b.nrows() != self.a1.dim() {
            return Err(mismatch("B rows vs subsystem 1", self.a1.dim(), self.b.nrows()));
        }
        if self.c.ncols() != self.a2.dim() {
            return Err(mismatch("C columns vs subsystem 2", self.a2.dim(), self.c.ncols()));
        }
        if self.b.ncols() != self.c.nrows() {
            return Err(mismatch("B columns vs C rows", self.b.ncols(), self.c.nrows()));
        }
        Ok(())
    }

    pub fn dim1(&self) -> usize {
        self.a1.dim()
    }

    pub fn dim2(&self) -> usize {
        self.a2.dim()
    }

    /// `[[A₁, B·C], [0, A₂]]` with block-diagonal Gram.
    pub fn assemble(&self) -> MatrixGenerator {
        let (d1, d2) = (self.dim1(), self.dim2());
        let d = d1 + d2;
        let mut m = DMatrix::zeros(d, d);
        m.view_mut((0, 0), (d1, d1)).copy_from(self.a1.matrix());
        m.view_mut((d1, d1), (d2, d2)).copy_from(self.a2.matrix());
        m.view_mut((0, d1), (d1, d2)).copy_from(&(self.b * self.c));
        let mut gram = DMatrix::zeros(d, d);
        gram.view_mut((0, 0), (d1, d1)).copy_from(self.a1.gram());
        gram.view_mut((d1, d1), (d2, d2)).copy_from(self.a2.gram());
        MatrixGenerator::with_gram(m, gram)
    }
}

impl CoupledGenerator {
    pub fn blocks(&self) -> Blocks<'_> {
        Blocks {
            a1: &self.a1,
            a2: &self.a2,
            b: &self.b.columns,
            c: &self.c.rows,
        }
    }
}

/// A generator in energy coordinates, ready for exponentiation.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub factor: GramFactor,
    /// `Lᵀ G L⁻ᵀ`
    pub energy: DMatrix<f64>,
}

impl Propagator {
    pub fn new<G: Generator + ?Sized>(g: &G) -> Result<Self> {
        let gm = g.matrix();
        if !gm.is_square() || g.gram().shape() != gm.shape() {
            return Err(Error::DimensionMismatch {
                what: "generator and gram shapes",
                expected: gm.nrows(),
                actual: g.gram().nrows(),
            });
        }
        if gm.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("generator matrix"));
        }
        let factor = GramFactor::new(g.gram())?;
        let energy = factor.similarity(gm);
        Ok(Self { factor, energy })
    }

    pub fn dim(&self) -> usize {
        self.energy.nrows()
    }

    /// `e^{Ãt}` in energy coordinates.
    pub fn exp_energy(&self, t: f64) -> DMatrix<f64> {
        expm(&(&self.energy * t))
    }

    /// `e^{Gt}` in the original coordinates.
    pub fn exp(&self, t: f64) -> DMatrix<f64> {
        self.factor.similarity_inv(&self.exp_energy(t))
    }

    /// `e^{Gt} x`
    pub fn apply(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.factor
            .from_energy(&(self.exp_energy(t) * self.factor.to_energy(x)))
    }
}

fn check_state(what: &'static str, expected: usize, x: &DVector<f64>) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            actual: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// `‖state‖²_gram`
    pub energies: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Sample times `0, dt, 2dt, …` up to `t_end`, with `t_end` appended when it
/// is not a multiple of `dt`.
pub fn time_samples(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be >= 0, got {t_end}")));
    }
    let k = (t_end / dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=k).map(|i| i as f64 * dt).collect();
    let last = *times.last().unwrap();
    if t_end - last > 1e-12 * t_end.max(1.0) {
        times.push(t_end);
    } else if let Some(l) = times.last_mut() {
        *l = l.min(t_end).max(last);
    }
    Ok(times)
}

/// `x(t_k) = e^{G t_k} x0` on the sample grid of [`time_samples`].
///
/// Samples are grouped in fixed chunks; each chunk is seeded by one
/// exponential and advanced by the cached step `e^{G·dt}`. Chunks run in
/// parallel, and the output does not depend on the thread count.
pub fn evolve_direct<G: Generator + ?Sized>(
    g: &G,
    x0: &DVector<f64>,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let prop = Propagator::new(g)?;
    check_state("initial state", prop.dim(), x0)?;
    let times = time_samples(t_end, dt)?;
    let z0 = prop.factor.to_energy(x0);
    let step = prop.exp_energy(dt);
    let chunks: Vec<&[f64]> = times.chunks(CHUNK).collect();
    let per_chunk = par::map(&chunks, |chunk| {
        let mut out = Vec::with_capacity(chunk.len());
        let mut z = prop.exp_energy(chunk[0]) * &z0;
        let mut t_prev = chunk[0];
        out.push(z.clone());
        for &t in &chunk[1..] {
            z = if ((t - t_prev) - dt).abs() <= 1e-12 * dt.max(1.0) {
                &step * &z
            } else {
                prop.exp_energy(t - t_prev) * &z
            };
            t_prev = t;
            out.push(z.clone());
        }
        out
    });
    let zs: Vec<DVector<f64>> = per_chunk.into_iter().flatten().collect();
    let energies = zs.iter().map(|z| z.norm_squared()).collect();
    let states = zs.iter().map(|z| prop.factor.from_energy(z)).collect();
    Ok(Trajectory {
        times,
        states,
        energies,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadratureRule {
    /// Composite trapezoid on `panels` equal panels.
    Trapezoid,
    /// Composite Gauss–Legendre with [`GAUSS_POINTS`] nodes per panel.
    GaussLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rule: QuadratureRule,
    pub panels: usize,
}

impl QuadratureSpec {
    pub fn gauss(panels: usize) -> Self {
        Self {
            rule: QuadratureRule::GaussLegendre,
            panels,
        }
    }

    pub fn trapezoid(panels: usize) -> Self {
        Self {
            rule: QuadratureRule::Trapezoid,
            panels,
        }
    }
}

/// Evaluate `S(t)(f0, g0)` from the free blocks: the first component is
/// `e^{A₁t}f0` plus the quadrature of `σ ↦ e^{A₁(t−σ)} B C e^{A₂σ} g0`, the
/// second is `e^{A₂t}g0`. Returns the stacked state.
///
/// Step exponentials are cached per panel, and the convolution sum is
/// accumulated by Horner's rule in `e^{A₁h}`.
pub fn evolve_vop(
    blocks: Blocks<'_>,
    f0: &DVector<f64>,
    g0: &DVector<f64>,
    t: f64,
    quad: QuadratureSpec,
) -> Result<DVector<f64>> {
    blocks.check()?;
    if quad.panels == 0 {
        return Err(Error::InvalidArgument("quadrature needs at least one panel".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    let p1 = Propagator::new(blocks.a1)?;
    let p2 = Propagator::new(blocks.a2)?;
    check_state("f0", p1.dim(), f0)?;
    check_state("g0", p2.dim(), g0)?;

    let z1 = p1.factor.to_energy(f0);
    let z2 = p2.factor.to_energy(g0);
    // B̃ C̃ = Lᵀ₁ B C L⁻ᵀ₂
    let coupling = p2.factor.right_inv(&p1.factor.left(&(blocks.b * blocks.c)));

    let first = p1.exp_energy(t) * &z1 + convolution_energy(&p1, &p2, &coupling, &z2, t, quad);
    let second = p2.exp_energy(t) * &z2;

    let f = p1.factor.from_energy(&first);
    let g = p2.factor.from_energy(&second);
    Ok(DVector::from_iterator(
        f.len() + g.len(),
        f.iter().chain(g.iter()).copied(),
    ))
}

/// `∫₀ᵗ e^{Ã₁(t−σ)} K e^{Ã₂σ} z dσ` by composite quadrature.
fn convolution_energy(
    p1: &Propagator,
    p2: &Propagator,
    coupling: &DMatrix<f64>,
    z: &DVector<f64>,
    t: f64,
    quad: QuadratureSpec,
) -> DVector<f64> {
    let d1 = p1.dim();
    if t == 0.0 || z.iter().all(|&v| v == 0.0) || coupling.iter().all(|&v| v == 0.0) {
        return DVector::zeros(d1);
    }
    let panels = quad.panels;
    let h = t / panels as f64;
    let e1 = p1.exp_energy(h);
    let e2 = p2.exp_energy(h);
    let mut acc = DVector::zeros(d1);
    match quad.rule {
        QuadratureRule::Trapezoid => {
            let mut v = z.clone();
            for k in 0..=panels {
                let w = if k == 0 || k == panels { 0.5 * h } else { h };
                acc = &e1 * acc + coupling * &v * w;
                if k < panels {
                    v = &e2 * v;
                }
            }
        }
        QuadratureRule::GaussLegendre => {
            let (xi, wi) = gauss_legendre_unit(GAUSS_POINTS);
            let left: Vec<DMatrix<f64>> = xi.iter().map(|&x| p2.exp_energy(h * x)).collect();
            let right: Vec<DMatrix<f64>> =
                xi.iter().map(|&x| p1.exp_energy(h * (1.0 - x))).collect();
            let mut v = z.clone();
            for _ in 0..panels {
                let mut panel = DVector::zeros(d1);
                for i in 0..xi.len() {
                    panel += &right[i] * (coupling * (&left[i] * &v)) * (wi[i] * h);
                }
                acc = &e1 * acc + panel;
                v = &e2 * v;
            }
        }
    }
    acc
}

/// `(λI − G)⁻¹ x` by a dense complex solve in energy coordinates.
///
/// Fails with [`Error::SingularOrIllConditioned`] when the LU factors are
/// numerically singular or the gram-norm residual exceeds [`SOLVE_TOL`].
pub fn resolvent_apply<G: Generator + ?Sized>(
    g: &G,
    lambda: Complex64,
    x: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    let prop = Propagator::new(g)?;
    resolvent_with(&prop, lambda, x)
}

fn resolvent_with(
    prop: &Propagator,
    lambda: Complex64,
    x: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    let d = prop.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            what: "resolvent argument",
            expected: d,
            actual: x.len(),
        });
    }
    let to_energy = |v: &DVector<Complex64>| {
        let re = prop.factor.to_energy(&v.map(|c| c.re));
        let im = prop.factor.to_energy(&v.map(|c| c.im));
        DVector::from_fn(d, |i, _| Complex64::new(re[i], im[i]))
    };
    let z = to_energy(x);
    let m = DMatrix::<Complex64>::identity(d, d) * lambda - to_complex(&prop.energy);
    let (w, res, rcond) =
        solve_complex(&m, &z).ok_or(Error::SingularOrIllConditioned(lambda))?;
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    let bad = !(res <= SOLVE_TOL);
    if bad || rcond < RCOND_MIN || w.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SingularOrIllConditioned(lambda));
    }
    let re = prop.factor.from_energy(&w.map(|c| c.re));
    let im = prop.factor.from_energy(&w.map(|c| c.im));
    Ok(DVector::from_fn(d, |i, _| Complex64::new(re[i], im[i])))
}

/// Complexify a real state.
pub fn complex_state(x: &DVector<f64>) -> DVector<Complex64> {
    x.map(|v| Complex64::new(v, 0.0))
}

/// Gram-norm distance between `R(λ,𝔄)(f,g)` and the block formula
/// `(R(λ,A₁)f + R(λ,A₁) B C R(λ,A₂) g, R(λ,A₂) g)`.
pub fn resolvent_identity_residual(
    blocks: Blocks<'_>,
    lambda: Complex64,
    f: &DVector<Complex64>,
    g: &DVector<Complex64>,
) -> Result<f64> {
    blocks.check()?;
    let coupled = blocks.assemble();
    let pc = Propagator::new(&coupled)?;
    let p1 = Propagator::new(blocks.a1)?;
    let p2 = Propagator::new(blocks.a2)?;
    let (d1, d2) = (p1.dim(), p2.dim());
    if f.len() != d1 || g.len() != d2 {
        return Err(Error::DimensionMismatch {
            what: "resolvent arguments",
            expected: d1 + d2,
            actual: f.len() + g.len(),
        });
    }
    let fg = DVector::from_iterator(d1 + d2, f.iter().chain(g.iter()).copied());
    let whole = resolvent_with(&pc, lambda, &fg)?;

    let rg = resolvent_with(&p2, lambda, g)?;
    let bc = to_complex(&(blocks.b * blocks.c));
    let rf = resolvent_with(&p1, lambda, f)?;
    let rbc = resolvent_with(&p1, lambda, &(bc * &rg))?;
    let top = rf + rbc;
    let formula = DVector::from_iterator(d1 + d2, top.iter().chain(rg.iter()).copied());
    Ok(pc.factor.norm_complex(&(whole - formula)))
}

/// `‖e^{G(t+s)}x − e^{Gt}e^{Gs}x‖_gram`
pub fn semigroup_property_residual<G: Generator + ?Sized>(
    g: &G,
    t: f64,
    s: f64,
    x: &DVector<f64>,
) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) {
        return Err(Error::InvalidArgument("t and s must be >= 0".into()));
    }
    let prop = Propagator::new(g)?;
    check_state("state", prop.dim(), x)?;
    let z = prop.factor.to_energy(x);
    let whole = prop.exp_energy(t + s) * &z;
    let split = prop.exp_energy(t) * (prop.exp_energy(s) * &z);
    Ok((whole - split).norm())
}

/// `‖e^{G·dt}x − x‖_gram`
pub fn strong_continuity_residual<G: Generator + ?Sized>(
    g: &G,
    dt: f64,
    x: &DVector<f64>,
) -> Result<f64> {
    let prop = Propagator::new(g)?;
    check_state("state", prop.dim(), x)?;
    let z = prop.factor.to_energy(x);
    Ok((prop.exp_energy(dt) * &z - &z).norm())
}

/// `‖λ·C·R(λ,A)g − C g‖`: the finite-dimensional echo of the Λ-extension
/// `C_Λ g = lim_{λ→∞} λ C R(λ,A) g`, which coincides with `C g` here.
pub fn lambda_extension_residual<G: Generator + ?Sized>(
    a: &G,
    c: &DMatrix<f64>,
    lambda: f64,
    g: &DVector<f64>,
) -> Result<f64> {
    let lam = Complex64::new(lambda, 0.0);
    let r = resolvent_apply(a, lam, &complex_state(g))?;
    let cr = to_complex(c) * r * lam;
    let cg = complex_state(&(c * g));
    Ok((cr - cg).norm())
}
