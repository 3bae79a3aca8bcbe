//! Finite-difference generators, energy Gram matrices and boundary
//! injection/observation operators for the beam and string subsystems.
//!
//! All schemes are second-order central differences on the uniform grid
//! `x_j = j/n` with ghost-point elimination of the boundary conditions.
//! States are stacked as `(f, g)` over the free nodes, where Dirichlet nodes
//! are removed rather than penalized.
//!
//! With trapezoid weights the ghost-point schemes satisfy a discrete
//! integration-by-parts identity, so every free generator is dissipative in
//! its own Gram norm up to roundoff.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::GramFactor;
use crate::systems::{
    Component, CoupledSystemSpec, InjectionKind, ObservationKind, Param, SystemParams,
};

/// Minimum resolution; the beam stencils reach three nodes into the domain.
pub const MIN_N: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_N {
            return Err(Error::GridTooCoarse { n, min: MIN_N });
        }
        Ok(Self { n, h: 1.0 / n as f64 })
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(|j| self.x(j))
    }

    /// Grid index of a boundary location (`0` or `1`) or of any grid node.
    fn node_of(&self, x0: f64) -> Result<usize> {
        let j = (x0 * self.n as f64).round();
        if !(0.0..=self.n as f64).contains(&j) || (j * self.h - x0).abs() > 1e-12 {
            return Err(Error::UnsupportedKind(format!("x0 = {x0} is not a grid node")));
        }
        Ok(j as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceKind {
    /// `H²_F × L²`: pinned at 0 with end moment `f″(0) = c2·g′(0) + c3·f′(0)`,
    /// free at 1 (`f″(1) = f‴(1) = 0`).
    BeamClampedFree,
    /// `H²_E × L²`: clamped at 0, `f″(1) = 0`, tip shear `f‴(1) = c1·g(1)`.
    BeamFreeTip,
    /// `H¹ × L²`: `f′(0) = c2·g(0)`, `f′(1) = −c1·f(1)`.
    WaveRobin,
    /// `H¹_F × L²`: `f(0) = 0`, `f′(1) = −c0·g(1)`.
    WaveDirichletLeft,
}

impl SpaceKind {
    pub fn is_beam(self) -> bool {
        matches!(self, SpaceKind::BeamClampedFree | SpaceKind::BeamFreeTip)
    }

    fn first_free_node(self) -> usize {
        match self {
            SpaceKind::WaveRobin => 0,
            _ => 1,
        }
    }

    fn required(self) -> &'static [Param] {
        match self {
            SpaceKind::BeamClampedFree => &[Param::C2, Param::C3],
            SpaceKind::BeamFreeTip => &[Param::C1],
            SpaceKind::WaveRobin => &[Param::C1, Param::C2],
            SpaceKind::WaveDirichletLeft => &[Param::C0],
        }
    }
}

/// Boundary functionals that can carry a weight in the energy norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryFunctional {
    /// `f′(0)`
    SlopeAtLeft,
    /// `f(1)`
    DisplacementAtRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryWeight {
    pub functional: BoundaryFunctional,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub kind: SpaceKind,
    pub params: SystemParams,
    pub boundary_weights: Vec<BoundaryWeight>,
}

impl SpaceSpec {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for &p in self.kind.required() {
            match self.params.get(p) {
                Some(v) if v.is_finite() && v > 0.0 => {}
                Some(_) => bad.push(format!("{} must be > 0", p.name())),
                None => bad.push(format!("{} required", p.name())),
            }
        }
        for w in &self.boundary_weights {
            if !(w.coefficient.is_finite() && w.coefficient > 0.0) {
                bad.push(format!("weight on {:?} must be > 0", w.functional));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(bad.join("; ")))
        }
    }

    /// Number of free nodes, i.e. half the state dimension.
    pub fn free_nodes(&self, grid: &Grid) -> usize {
        grid.n + 1 - self.kind.first_free_node()
    }

    pub fn state_dim(&self, grid: &Grid) -> usize {
        2 * self.free_nodes(grid)
    }
}

/// Index map between grid nodes and the stacked `(f, g)` state.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    first: usize,
    m: usize,
}

impl Layout {
    fn new(kind: SpaceKind, grid: &Grid) -> Self {
        let first = kind.first_free_node();
        Self {
            n: grid.n,
            first,
            m: grid.n + 1 - first,
        }
    }

    fn f(&self, j: usize) -> Option<usize> {
        (j >= self.first && j <= self.n).then(|| j - self.first)
    }

    fn g(&self, j: usize) -> Option<usize> {
        self.f(j).map(|i| i + self.m)
    }

    fn nodes(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.n
    }
}

/// A free subsystem generator together with its energy Gram matrix.
#[derive(Debug, Clone)]
pub struct DiscreteGenerator {
    pub matrix: DMatrix<f64>,
    pub gram: DMatrix<f64>,
    pub space: SpaceSpec,
    pub grid: Grid,
}

impl DiscreteGenerator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Documented dissipativity slack `τ_diss(h)`: the largest admissible
    /// value of `Re⟨A x, x⟩_gram / ‖x‖²_gram`.
    ///
    /// The ghost-point schemes are dissipative up to roundoff, so the `O(h)`
    /// allowance is never approached in practice.
    pub fn dissipation_slack(&self) -> f64 {
        self.grid.h
    }

    /// Largest value of `⟨A x, x⟩_gram / ‖x‖²_gram`, i.e. the top eigenvalue
    /// of the symmetric part of `A` in energy coordinates.
    pub fn numerical_abscissa(&self) -> Result<f64> {
        let factor = GramFactor::new(&self.gram)?;
        let a = factor.similarity(&self.matrix);
        let sym = (&a + a.transpose()) * 0.5;
        Ok(sym.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }
}

/// `B`: columns injecting the coupling input into subsystem 1.
#[derive(Debug, Clone)]
pub struct BoundaryInjection {
    /// `dim(subsystem 1) × channels`
    pub columns: DMatrix<f64>,
    pub kinds: Vec<InjectionKind>,
}

/// `C`: rows reading the coupling trace off subsystem 2.
#[derive(Debug, Clone)]
pub struct BoundaryObservation {
    /// `channels × dim(subsystem 2)`
    pub rows: DMatrix<f64>,
    pub kinds: Vec<ObservationKind>,
}

fn check_grid(grid: &Grid) -> Result<()> {
    if grid.n < MIN_N {
        return Err(Error::GridTooCoarse { n: grid.n, min: MIN_N });
    }
    Ok(())
}

/// Assemble the free generator of `space` (homogeneous boundary conditions,
/// coupling input removed) and its Gram matrix.
pub fn build_generator(space: &SpaceSpec, grid: &Grid) -> Result<DiscreteGenerator> {
    check_grid(grid)?;
    space.validate()?;
    let matrix = match space.kind {
        SpaceKind::WaveRobin | SpaceKind::WaveDirichletLeft => wave_matrix(space, grid)?,
        SpaceKind::BeamFreeTip | SpaceKind::BeamClampedFree => beam_matrix(space, grid)?,
    };
    let gram = build_gram(space, grid)?;
    GramFactor::new(&gram)?;
    Ok(DiscreteGenerator {
        matrix,
        gram,
        space: space.clone(),
        grid: *grid,
    })
}

fn wave_matrix(space: &SpaceSpec, grid: &Grid) -> Result<DMatrix<f64>> {
    let lay = Layout::new(space.kind, grid);
    let (n, h) = (grid.n, grid.h);
    let h2 = h * h;
    let mut a = DMatrix::zeros(2 * lay.m, 2 * lay.m);
    for j in lay.nodes() {
        let (fi, gi) = (lay.f(j).unwrap(), lay.g(j).unwrap());
        a[(fi, gi)] = 1.0;
        if j > 0 && j < n {
            for (jj, w) in [(j - 1, 1.0), (j, -2.0), (j + 1, 1.0)] {
                if let Some(c) = lay.f(jj) {
                    a[(gi, c)] += w / h2;
                }
            }
        }
    }
    match space.kind {
        SpaceKind::WaveRobin => {
            let c1 = space.params.req(Param::C1)?;
            let c2 = space.params.req(Param::C2)?;
            // f′(0) = c2·g(0) via ghost f₋₁ = f₁ − 2h·f′(0)
            let g0 = lay.g(0).unwrap();
            a[(g0, lay.f(0).unwrap())] += -2.0 / h2;
            a[(g0, lay.f(1).unwrap())] += 2.0 / h2;
            a[(g0, g0)] += -2.0 * c2 / h;
            // f′(1) = −c1·f(1) via ghost f_{n+1} = f_{n−1} + 2h·f′(1)
            let gn = lay.g(n).unwrap();
            let fnn = lay.f(n).unwrap();
            a[(gn, lay.f(n - 1).unwrap())] += 2.0 / h2;
            a[(gn, fnn)] += -2.0 / h2 - 2.0 * c1 / h;
        }
        SpaceKind::WaveDirichletLeft => {
            let c0 = space.params.req(Param::C0)?;
            let gn = lay.g(n).unwrap();
            a[(gn, lay.f(n - 1).unwrap())] += 2.0 / h2;
            a[(gn, lay.f(n).unwrap())] += -2.0 / h2;
            a[(gn, gn)] += -2.0 * c0 / h;
        }
        other => return Err(Error::UnsupportedSpaceKind(format!("{other:?}"))),
    }
    Ok(a)
}

/// Rows `d_0..d_n` of the discrete curvature `f″` over the free `f` block,
/// with the ghost values of the homogeneous conditions substituted.
///
/// For `BeamClampedFree` row 0 is left empty: `f″(0)` is prescribed by the
/// end-moment condition instead.
fn curvature_rows(kind: SpaceKind, lay: &Layout, grid: &Grid) -> DMatrix<f64> {
    let (n, h2) = (grid.n, grid.h * grid.h);
    let mut d = DMatrix::zeros(n + 1, lay.m);
    for k in 1..n {
        for (jj, w) in [(k - 1, 1.0), (k, -2.0), (k + 1, 1.0)] {
            if let Some(c) = lay.f(jj) {
                d[(k, c)] += w / h2;
            }
        }
    }
    if kind == SpaceKind::BeamFreeTip {
        // clamped: f₋₁ = f₁, f₀ = 0
        d[(0, lay.f(1).unwrap())] = 2.0 / h2;
    }
    // f″(1) = 0 leaves row n empty.
    d
}

fn beam_matrix(space: &SpaceSpec, grid: &Grid) -> Result<DMatrix<f64>> {
    let lay = Layout::new(space.kind, grid);
    let (n, h) = (grid.n, grid.h);
    let h2 = h * h;
    let d = curvature_rows(space.kind, &lay, grid);
    let mut a = DMatrix::zeros(2 * lay.m, 2 * lay.m);
    for j in 1..=n {
        let (fi, gi) = (lay.f(j).unwrap(), lay.g(j).unwrap());
        a[(fi, gi)] = 1.0;
        // f⁗_j = (d_{j−1} − 2 d_j + d_{j+1}) / h²; at the free tip the
        // ghost d_{n+1} = d_{n−1} + 2h·f‴(1).
        let mut fourth = d.row(j - 1) - d.row(j) * 2.0;
        if j < n {
            fourth += d.row(j + 1);
        } else {
            fourth += d.row(n - 1);
        }
        for c in 0..lay.m {
            a[(gi, c)] -= fourth[c] / h2;
        }
    }
    match space.kind {
        SpaceKind::BeamFreeTip => {
            let c1 = space.params.req(Param::C1)?;
            let gn = lay.g(n).unwrap();
            a[(gn, gn)] += -2.0 * c1 / h;
        }
        SpaceKind::BeamClampedFree => {
            // f″(0) = c2·g′(0) + c3·f′(0) with one-sided f′(0) ≈ f₁/h.
            let c2 = space.params.req(Param::C2)?;
            let c3 = space.params.req(Param::C3)?;
            let g1 = lay.g(1).unwrap();
            a[(g1, g1)] += -c2 / (h2 * h);
            a[(g1, lay.f(1).unwrap())] += -c3 / (h2 * h);
        }
        other => return Err(Error::UnsupportedSpaceKind(format!("{other:?}"))),
    }
    Ok(a)
}

/// Row vector over the `f` block evaluating a boundary functional.
fn functional_row(func: BoundaryFunctional, lay: &Layout, grid: &Grid) -> DVector<f64> {
    let mut row = DVector::zeros(lay.m);
    match func {
        BoundaryFunctional::SlopeAtLeft => {
            row[lay.f(1).unwrap()] += 1.0 / grid.h;
            if let Some(i) = lay.f(0) {
                row[i] -= 1.0 / grid.h;
            }
        }
        BoundaryFunctional::DisplacementAtRight => {
            row[lay.f(grid.n).unwrap()] = 1.0;
        }
    }
    row
}

/// Energy Gram matrix: trapezoid quadrature of `|g|²`, of `|f′|²` (strings)
/// or `|f″|²` (beams), plus the rank-one boundary terms.
///
/// The result is symmetric; it is positive definite whenever the space's
/// own boundary weights are present.
pub fn build_gram(space: &SpaceSpec, grid: &Grid) -> Result<DMatrix<f64>> {
    check_grid(grid)?;
    let lay = Layout::new(space.kind, grid);
    let (n, h) = (grid.n, grid.h);
    let m = lay.m;
    let mut gram = DMatrix::zeros(2 * m, 2 * m);

    for j in lay.nodes() {
        let w = if j == 0 || j == n { 0.5 * h } else { h };
        let gi = lay.g(j).unwrap();
        gram[(gi, gi)] = w;
    }

    let mut stiff = DMatrix::<f64>::zeros(m, m);
    if space.kind.is_beam() {
        let d = curvature_rows(space.kind, &lay, grid);
        for k in 0..=n {
            let w = match (space.kind, k) {
                (SpaceKind::BeamClampedFree, 0) => 0.0,
                (_, 0) => 0.5 * h,
                (_, k) if k == n => 0.5 * h,
                _ => h,
            };
            if w > 0.0 {
                let r = d.row(k);
                stiff += r.transpose() * r * w;
            }
        }
    } else {
        // Σ h·((f_{j+1} − f_j)/h)²
        for j in 0..n {
            let mut r = DVector::<f64>::zeros(m);
            if let Some(i) = lay.f(j + 1) {
                r[i] += 1.0 / h;
            }
            if let Some(i) = lay.f(j) {
                r[i] -= 1.0 / h;
            }
            stiff += &r * r.transpose() * h;
        }
    }
    for w in &space.boundary_weights {
        let r = functional_row(w.functional, &lay, grid);
        stiff += &r * r.transpose() * w.coefficient;
    }
    gram.view_mut((0, 0), (m, m)).copy_from(&stiff);
    // exact symmetry
    let gram = (&gram + gram.transpose()) * 0.5;
    Ok(gram)
}

/// Column of the derivative of the free system with respect to a boundary
/// input entering the condition at `end` (`0` = left, `1` = right).
fn boundary_input_column(
    space: &SpaceSpec,
    grid: &Grid,
    end: usize,
    moment: bool,
) -> Result<DVector<f64>> {
    let lay = Layout::new(space.kind, grid);
    let (n, h) = (grid.n, grid.h);
    let mut col = DVector::zeros(2 * lay.m);
    let unsupported = || {
        Error::UnsupportedKind(format!(
            "{} input at x = {} for {:?}",
            if moment { "moment" } else { "flux" },
            end,
            space.kind
        ))
    };
    match (space.kind, end, moment) {
        // f′(0) = … + u
        (SpaceKind::WaveRobin, 0, false) => col[lay.g(0).unwrap()] = -2.0 / h,
        // f′(1) = … + u
        (SpaceKind::WaveRobin, 1, false) | (SpaceKind::WaveDirichletLeft, 1, false) => {
            col[lay.g(n).unwrap()] = 2.0 / h
        }
        // f‴(1) = c1·g(1) + u
        (SpaceKind::BeamFreeTip, 1, false) => col[lay.g(n).unwrap()] = -2.0 / h,
        // f″(0) = c2·g′(0) + c3·f′(0) + u
        (SpaceKind::BeamClampedFree, 0, true) => col[lay.g(1).unwrap()] = -1.0 / (h * h),
        _ => return Err(unsupported()),
    }
    Ok(col)
}

fn boundary_end(grid: &Grid, x0: f64) -> Result<usize> {
    match grid.node_of(x0)? {
        0 => Ok(0),
        j if j == grid.n => Ok(1),
        j => Err(Error::UnsupportedKind(format!("boundary injection at interior node {j}"))),
    }
}

/// `B` for subsystem 1 of `spec`: one column per coupling channel.
pub fn build_injection(spec: &CoupledSystemSpec, grid: &Grid) -> Result<BoundaryInjection> {
    check_grid(grid)?;
    let space = &spec.space1;
    let lay = Layout::new(space.kind, grid);
    let mut columns = DMatrix::zeros(2 * lay.m, spec.injection.len());
    for (k, kind) in spec.injection.iter().enumerate() {
        let col = match *kind {
            InjectionKind::Delta { x0 } => {
                boundary_input_column(space, grid, boundary_end(grid, x0)?, false)?
            }
            InjectionKind::DeltaPrime { x0 } => {
                boundary_input_column(space, grid, boundary_end(grid, x0)?, true)?
            }
            InjectionKind::Profile { amplitude, rate } => {
                let mut c = DVector::zeros(2 * lay.m);
                for j in lay.nodes() {
                    c[lay.g(j).unwrap()] = amplitude * (rate * (1.0 - grid.x(j))).exp();
                }
                c
            }
        };
        columns.set_column(k, &col);
    }
    Ok(BoundaryInjection {
        columns,
        kinds: spec.injection.clone(),
    })
}

/// One-sided second-order stencils at the boundary node `j0`, as
/// `(grid node, weight)` pairs.
fn derivative_stencil(order: u8, j0: usize, grid: &Grid) -> Result<Vec<(usize, f64)>> {
    let (n, h) = (grid.n, grid.h);
    let (base, sign): (&[f64], f64) = match order {
        1 => (&[-1.5, 2.0, -0.5], 1.0 / h),
        2 => (&[2.0, -5.0, 4.0, -1.0], 1.0 / (h * h)),
        _ => unreachable!(),
    };
    let st = if j0 == 0 {
        base.iter().enumerate().map(|(i, &w)| (i, w * sign)).collect()
    } else if j0 == n {
        // mirror: odd derivatives flip sign
        let s = if order == 1 { -sign } else { sign };
        base.iter().enumerate().map(|(i, &w)| (n - i, w * s)).collect()
    } else {
        return Err(Error::UnsupportedKind(format!(
            "derivative observation at interior node {j0}"
        )));
    };
    Ok(st)
}

fn observation_row(
    kind: &ObservationKind,
    lay: &Layout,
    grid: &Grid,
    row: &mut DVector<f64>,
) -> Result<()> {
    let mut add = |component: Component, j: usize, w: f64| {
        let idx = match component {
            Component::Displacement => lay.f(j),
            Component::Velocity => lay.g(j),
        };
        // eliminated Dirichlet nodes contribute zero
        if let Some(i) = idx {
            row[i] += w;
        }
    };
    match kind {
        ObservationKind::PointValue {
            component,
            x0,
            gain,
        } => add(*component, grid.node_of(*x0)?, *gain),
        ObservationKind::FirstDerivative {
            component,
            x0,
            gain,
        } => {
            for (j, w) in derivative_stencil(1, grid.node_of(*x0)?, grid)? {
                add(*component, j, gain * w);
            }
        }
        ObservationKind::SecondDerivative {
            component,
            x0,
            gain,
        } => {
            for (j, w) in derivative_stencil(2, grid.node_of(*x0)?, grid)? {
                add(*component, j, gain * w);
            }
        }
        ObservationKind::Combination { terms } => {
            for t in terms {
                observation_row(t, lay, grid, row)?;
            }
        }
    }
    Ok(())
}

/// `C` acting on subsystem 2 of `spec`: one row per coupling channel.
pub fn build_observation(spec: &CoupledSystemSpec, grid: &Grid) -> Result<BoundaryObservation> {
    check_grid(grid)?;
    let lay = Layout::new(spec.space2.kind, grid);
    let mut rows = DMatrix::zeros(spec.observation.len(), 2 * lay.m);
    for (k, kind) in spec.observation.iter().enumerate() {
        let mut r = DVector::zeros(2 * lay.m);
        observation_row(kind, &lay, grid, &mut r)?;
        rows.set_row(k, &r.transpose());
    }
    Ok(BoundaryObservation {
        rows,
        kinds: spec.observation.clone(),
    })
}

/// The coupled system matrix obtained by discretizing the coupled PDE in one
/// pass: each nodal equation is evaluated pointwise with explicit ghost
/// values, and the coupling trace is substituted directly into subsystem 1's
/// boundary conditions and forcing.
///
/// This path shares no assembly code with [`build_generator`],
/// [`build_injection`] or [`build_observation`].
pub fn direct_coupled_matrix(spec: &CoupledSystemSpec, grid: &Grid) -> Result<DMatrix<f64>> {
    check_grid(grid)?;
    let d1 = spec.space1.state_dim(grid);
    let d2 = spec.space2.state_dim(grid);
    let dim = d1 + d2;
    let mut a = DMatrix::zeros(dim, dim);
    let mut e = DVector::zeros(dim);
    for col in 0..dim {
        e.fill(0.0);
        e[col] = 1.0;
        let r = direct_rhs(spec, grid, &e)?;
        a.set_column(col, &r);
    }
    Ok(a)
}

/// Nodal values of `(f, g)` on `0..=n`, with Dirichlet nodes set to zero.
fn nodal(kind: SpaceKind, grid: &Grid, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let lay = Layout::new(kind, grid);
    let mut f = vec![0.0; grid.n + 1];
    let mut g = vec![0.0; grid.n + 1];
    for j in lay.nodes() {
        f[j] = x[lay.f(j).unwrap()];
        g[j] = x[lay.g(j).unwrap()];
    }
    (f, g)
}

fn direct_rhs(spec: &CoupledSystemSpec, grid: &Grid, x: &DVector<f64>) -> Result<DVector<f64>> {
    let d1 = spec.space1.state_dim(grid);
    let (x1, x2) = (&x.as_slice()[..d1], &x.as_slice()[d1..]);
    let (f2, g2) = nodal(spec.space2.kind, grid, x2);
    let (n, h) = (grid.n, grid.h);
    let p = &spec.params;

    // Coupling traces, written out per system.
    let one_sided_d1 = |f: &[f64]| (-1.5 * f[0] + 2.0 * f[1] - 0.5 * f[2]) / h;
    let one_sided_d2 = |f: &[f64]| (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h);

    let mut left_flux = 0.0; // added to f′(0) or f″(0) of subsystem 1
    let mut right_flux = 0.0; // added to f′(1) or f‴(1)
    let mut forcing = vec![0.0; n + 1];
    use crate::systems::SystemId::*;
    match spec.id {
        BeamBeam2008 => right_flux = p.req(Param::C1)? * g2[n],
        BeamBeam2017 => left_flux = one_sided_d2(&f2),
        WaveWave2018 => left_flux = one_sided_d1(&f2),
        KrsticWave => {
            let (q, c0, c1) = (p.req(Param::Q)?, p.req(Param::C0)?, p.req(Param::C1)?);
            let trace = q * f2[n] + c0 * g2[n];
            right_flux = trace;
            for (j, v) in forcing.iter_mut().enumerate() {
                *v = (c1 + q) * (q * (1.0 - grid.x(j))).exp() * trace;
            }
        }
    }

    let r1 = space_rhs(&spec.space1, grid, x1, left_flux, right_flux, &forcing)?;
    let zero = vec![0.0; n + 1];
    let r2 = space_rhs(&spec.space2, grid, x2, 0.0, 0.0, &zero)?;
    Ok(DVector::from_iterator(
        x.len(),
        r1.into_iter().chain(r2),
    ))
}

/// Pointwise ghost-point evaluation of `d/dt (f, g)` for one subsystem with
/// inhomogeneous boundary data.
fn space_rhs(
    space: &SpaceSpec,
    grid: &Grid,
    x: &[f64],
    left: f64,
    right: f64,
    forcing: &[f64],
) -> Result<Vec<f64>> {
    let (n, h) = (grid.n, grid.h);
    let (h2, h3, h4) = (h * h, h * h * h, h * h * h * h);
    let (f, g) = nodal(space.kind, grid, x);
    let pr = &space.params;
    // ext[i] holds node i − 2
    let mut ext = vec![0.0; n + 5];
    ext[2..n + 3].copy_from_slice(&f);
    let at = |e: &Vec<f64>, j: isize| e[(j + 2) as usize];
    let mut acc = vec![0.0; n + 1];
    let nn = n as isize;
    match space.kind {
        SpaceKind::WaveRobin | SpaceKind::WaveDirichletLeft => {
            if space.kind == SpaceKind::WaveRobin {
                let slope0 = pr.req(Param::C2)? * g[0] + left;
                ext[1] = f[1] - 2.0 * h * slope0;
                let slope1 = -pr.req(Param::C1)? * f[n] + right;
                ext[n + 3] = f[n - 1] + 2.0 * h * slope1;
            } else {
                let slope1 = -pr.req(Param::C0)? * g[n] + right;
                ext[n + 3] = f[n - 1] + 2.0 * h * slope1;
            }
            for j in 0..=nn {
                acc[j as usize] =
                    (at(&ext, j - 1) - 2.0 * at(&ext, j) + at(&ext, j + 1)) / h2;
            }
        }
        SpaceKind::BeamFreeTip | SpaceKind::BeamClampedFree => {
            if space.kind == SpaceKind::BeamFreeTip {
                ext[1] = f[1]; // f′(0) = 0
                let shear = pr.req(Param::C1)? * g[n] + right;
                let fn1 = 2.0 * f[n] - f[n - 1];
                ext[n + 3] = fn1;
                ext[n + 4] = 2.0 * h3 * shear + 2.0 * fn1 - 2.0 * f[n - 1] + f[n - 2];
            } else {
                let moment = pr.req(Param::C2)? * g[1] / h + pr.req(Param::C3)? * f[1] / h + left;
                ext[1] = h2 * moment - f[1];
                let fn1 = 2.0 * f[n] - f[n - 1];
                ext[n + 3] = fn1;
                ext[n + 4] = 2.0 * fn1 - 2.0 * f[n - 1] + f[n - 2];
            }
            for j in 1..=nn {
                let s = at(&ext, j - 2) - 4.0 * at(&ext, j - 1) + 6.0 * at(&ext, j)
                    - 4.0 * at(&ext, j + 1)
                    + at(&ext, j + 2);
                acc[j as usize] = -s / h4;
            }
        }
    }
    let lay = Layout::new(space.kind, grid);
    let mut out = vec![0.0; 2 * lay.m];
    for j in lay.nodes() {
        out[lay.f(j).unwrap()] = g[j];
        out[lay.g(j).unwrap()] = acc[j] + forcing[j];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{catalog_lookup, SystemId};

    fn spec(id: SystemId) -> CoupledSystemSpec {
        catalog_lookup(id, &SystemParams::unit(id)).unwrap()
    }

    #[test]
    fn grid_guard() {
        assert_eq!(Grid::new(3).unwrap_err(), Error::GridTooCoarse { n: 3, min: 4 });
        let g = Grid::new(8).unwrap();
        assert_eq!(g.nodes().count(), 9);
        assert_eq!(g.h * g.n as f64, 1.0);
    }

    #[test]
    fn dirichlet_wave_dimensions() {
        let s = spec(SystemId::WaveWave2018);
        let gen = build_generator(&s.space2, &Grid::new(4).unwrap()).unwrap();
        assert_eq!(gen.dim(), 8);
    }

    #[test]
    fn robin_wave_acts_as_second_difference_on_displacement() {
        let s = spec(SystemId::WaveWave2018);
        let grid = Grid::new(8).unwrap();
        let gen = build_generator(&s.space1, &grid).unwrap();
        let m = gen.dim() / 2;
        let f: Vec<f64> = grid.nodes().map(|x| (2.0 * x).sin() + x * x).collect();
        let mut state = DVector::zeros(2 * m);
        state.rows_mut(0, m).copy_from(&DVector::from_vec(f.clone()));
        let out = &gen.matrix * &state;
        assert!(out.rows(0, m).iter().all(|&v| v == 0.0));
        let h2 = grid.h * grid.h;
        for j in 1..grid.n {
            let want = (f[j - 1] - 2.0 * f[j] + f[j + 1]) / h2;
            assert!((out[m + j] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn gram_velocity_block_is_trapezoid() {
        let s = spec(SystemId::WaveWave2018);
        let grid = Grid::new(8).unwrap();
        let gram = build_gram(&s.space1, &grid).unwrap();
        let m = grid.n + 1;
        let g: Vec<f64> = grid.nodes().map(|x| 1.0 + x).collect();
        let mut state = DVector::zeros(2 * m);
        state.rows_mut(m, m).copy_from(&DVector::from_vec(g.clone()));
        let q = state.dot(&(&gram * &state));
        let trap: f64 = g
            .iter()
            .enumerate()
            .map(|(j, v)| if j == 0 || j == grid.n { 0.5 } else { 1.0 } * grid.h * v * v)
            .sum();
        assert!((q - trap).abs() < 1e-14);
    }

    #[test]
    fn unsupported_injection() {
        let mut s = spec(SystemId::WaveWave2018);
        s.injection = vec![InjectionKind::DeltaPrime { x0: 0.0 }];
        let err = build_injection(&s, &Grid::new(8).unwrap()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedKind(_)));
    }

    #[test]
    fn invalid_space() {
        let mut s = spec(SystemId::WaveWave2018).space2;
        s.params.c0 = Some(-1.0);
        assert!(build_generator(&s, &Grid::new(8).unwrap()).is_err());
    }

    #[test]
    fn beam_stencil_matches_pointwise_fourth_difference() {
        // free generators from both assembly paths coincide (no coupling)
        for id in [SystemId::BeamBeam2008, SystemId::BeamBeam2017] {
            let s = spec(id);
            let grid = Grid::new(10).unwrap();
            let direct = direct_coupled_matrix(&s, &grid).unwrap();
            let d1 = s.space1.state_dim(&grid);
            for (space, off) in [(&s.space1, 0), (&s.space2, d1)] {
                let gen = build_generator(space, &grid).unwrap();
                let d = gen.dim();
                let blk = direct.view((off, off), (d, d));
                let diff = (&gen.matrix - blk).abs().max();
                assert!(diff <= 1e-13 * gen.matrix.abs().max(), "{id:?}: {diff}");
            }
        }
    }
}
