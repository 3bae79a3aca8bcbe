//! Block-upper-triangular coupled generator `[[A₁, B·C], [0, A₂]]`.
//!
//! The domain condition `A₁f + BCg ∈ X` is vacuous for matrices, so it is
//! not represented.

use nalgebra::DMatrix;

use crate::discretize::{
    build_generator, build_injection, build_observation, BoundaryInjection, BoundaryObservation,
    DiscreteGenerator, Grid,
};
use crate::error::{Error, Result};
use crate::systems::CoupledSystemSpec;

/// Anything that acts as a generator on a Gram-normed state space.
pub trait Generator {
    fn matrix(&self) -> &DMatrix<f64>;
    fn gram(&self) -> &DMatrix<f64>;

    fn dim(&self) -> usize {
        self.matrix().nrows()
    }
}

impl Generator for DiscreteGenerator {
    fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }
}

/// A bare matrix with an explicit Gram, used for hand-built test cases and
/// shifted blocks.
#[derive(Debug, Clone)]
pub struct MatrixGenerator {
    pub matrix: DMatrix<f64>,
    pub gram: DMatrix<f64>,
}

impl MatrixGenerator {
    /// Euclidean Gram.
    pub fn new(matrix: DMatrix<f64>) -> Self {
        let n = matrix.nrows();
        Self {
            matrix,
            gram: DMatrix::identity(n, n),
        }
    }

    pub fn with_gram(matrix: DMatrix<f64>, gram: DMatrix<f64>) -> Self {
        Self { matrix, gram }
    }
}

impl Generator for MatrixGenerator {
    fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }
}

#[derive(Debug, Clone)]
pub struct CoupledGenerator {
    pub a1: DiscreteGenerator,
    pub a2: DiscreteGenerator,
    pub b: BoundaryInjection,
    pub c: BoundaryObservation,
    pub matrix: DMatrix<f64>,
    pub gram: DMatrix<f64>,
}

impl Generator for CoupledGenerator {
    fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }
}

impl CoupledGenerator {
    pub fn dim1(&self) -> usize {
        self.a1.dim()
    }

    pub fn dim2(&self) -> usize {
        self.a2.dim()
    }

    /// The coupling block `B·C`.
    pub fn coupling_block(&self) -> DMatrix<f64> {
        &self.b.columns * &self.c.rows
    }
}

/// Stack `[[A₁, B·C], [0, A₂]]` with the block-diagonal Gram. No rescaling.
pub fn assemble_coupled(
    a1: DiscreteGenerator,
    a2: DiscreteGenerator,
    b: BoundaryInjection,
    c: BoundaryObservation,
) -> Result<CoupledGenerator> {
    let (d1, d2) = (a1.dim(), a2.dim());
    if b.columns.ncols() != c.rows.nrows() {
        return Err(Error::DimensionMismatch {
            what: "B columns vs C rows",
            expected: b.columns.ncols(),
            actual: c.rows.nrows(),
        });
    }
    if b.columns.nrows() != d1 {
        return Err(Error::DimensionMismatch {
            what: "B rows vs subsystem 1 dimension",
            expected: d1,
            actual: b.columns.nrows(),
        });
    }
    if c.rows.ncols() != d2 {
        return Err(Error::DimensionMismatch {
            what: "C columns vs subsystem 2 dimension",
            expected: d2,
            actual: c.rows.ncols(),
        });
    }
    let d = d1 + d2;
    let mut matrix = DMatrix::zeros(d, d);
    matrix.view_mut((0, 0), (d1, d1)).copy_from(&a1.matrix);
    matrix.view_mut((d1, d1), (d2, d2)).copy_from(&a2.matrix);
    matrix
        .view_mut((0, d1), (d1, d2))
        .copy_from(&(&b.columns * &c.rows));
    let mut gram = DMatrix::zeros(d, d);
    gram.view_mut((0, 0), (d1, d1)).copy_from(&a1.gram);
    gram.view_mut((d1, d1), (d2, d2)).copy_from(&a2.gram);
    Ok(CoupledGenerator {
        a1,
        a2,
        b,
        c,
        matrix,
        gram,
    })
}

/// Build all four pieces for a catalog spec and assemble them.
pub fn coupled_from_spec(spec: &CoupledSystemSpec, grid: &Grid) -> Result<CoupledGenerator> {
    let a1 = build_generator(&spec.space1, grid)?;
    let a2 = build_generator(&spec.space2, grid)?;
    let b = build_injection(spec, grid)?;
    let c = build_observation(spec, grid)?;
    assemble_coupled(a1, a2, b, c)
}
