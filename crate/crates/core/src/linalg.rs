//! Dense linear-algebra helpers shared by the discretization and the
//! semigroup/stability layers.
//!
//! Everything here is desk scale (dimension up to a few hundred), so plain
//! dense `nalgebra` matrices are used throughout.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Coefficients of the [13/13] Padé approximant of `exp`.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// 1-norm threshold below which the degree-13 approximant is accurate to
/// unit roundoff.
const THETA13: f64 = 5.371_920_351_148_152;

/// Matrix exponential by scaling and squaring with a fixed [13/13] diagonal
/// Padé approximant.
///
/// The scaling exponent is chosen so that `‖A / 2^s‖₁ ≤ θ₁₃`.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm of a non-square matrix");
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm = norm1(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-s);

    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular after scaling");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Maximum absolute column sum.
pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Cholesky factor `gram = L Lᵀ` with the cached inverse of `L`.
///
/// The energy coordinates of a state `x` are `z = Lᵀ x`, so that the gram
/// norm of `x` is the Euclidean norm of `z`.
#[derive(Debug, Clone)]
pub struct GramFactor {
    l: DMatrix<f64>,
    l_inv: DMatrix<f64>,
}

impl GramFactor {
    pub fn new(gram: &DMatrix<f64>) -> Result<Self> {
        if !gram.is_square() {
            return Err(Error::DimensionMismatch {
                what: "gram must be square",
                expected: gram.nrows(),
                actual: gram.ncols(),
            });
        }
        let chol = Cholesky::new(gram.clone()).ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let n = l.nrows();
        let l_inv = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { l, l_inv })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `Lᵀ x`
    pub fn to_energy(&self, x: &DVector<f64>) -> DVector<f64> {
        self.l.tr_mul(x)
    }

    /// `L⁻ᵀ z`
    pub fn from_energy(&self, z: &DVector<f64>) -> DVector<f64> {
        self.l_inv.tr_mul(z)
    }

    /// `Lᵀ M L⁻ᵀ`, the matrix `M` expressed in energy coordinates.
    pub fn similarity(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.l.tr_mul(m) * self.l_inv.transpose()
    }

    /// `L⁻ᵀ M Lᵀ`, the inverse of [`similarity`](Self::similarity).
    pub fn similarity_inv(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.l_inv.tr_mul(m) * self.l.transpose()
    }

    /// `Lᵀ M`, for maps landing in the state space.
    pub fn left(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.l.tr_mul(m)
    }

    /// `M L⁻ᵀ`, for maps leaving the state space.
    pub fn right_inv(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m * self.l_inv.transpose()
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.to_energy(x).norm()
    }

    pub fn norm_complex(&self, x: &DVector<Complex64>) -> f64 {
        let re = self.to_energy(&x.map(|v| v.re));
        let im = self.to_energy(&x.map(|v| v.im));
        (re.norm_squared() + im.norm_squared()).sqrt()
    }
}

/// Gram-weighted norm `sqrt(xᵀ G x)`.
pub fn gram_norm(gram: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(gram * x)).max(0.0).sqrt()
}

/// Largest singular value, or `None` if the SVD fails to converge.
pub fn spectral_norm(m: &DMatrix<f64>) -> Option<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Some(0.0);
    }
    let svd = m.clone().try_svd(false, false, f64::EPSILON, 0)?;
    Some(svd.singular_values.iter().copied().fold(0.0, f64::max))
}

/// All eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::<f64, Dyn>::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or(Error::EigenSolverFailed)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Complexify a real matrix.
pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Solve `M y = x` for complex `M`, with one step of iterative refinement.
///
/// Returns the solution together with the relative residual
/// `‖M y − x‖ / ‖x‖` and the reciprocal pivot ratio of the LU factors.
pub fn solve_complex(
    m: &DMatrix<Complex64>,
    x: &DVector<Complex64>,
) -> Option<(DVector<Complex64>, f64, f64)> {
    let lu = m.clone().lu();
    let u = lu.u();
    let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);
    for i in 0..u.nrows() {
        let p = u[(i, i)].norm();
        pmin = pmin.min(p);
        pmax = pmax.max(p);
    }
    let rcond = if pmax > 0.0 { pmin / pmax } else { 0.0 };
    let mut y = lu.solve(x)?;
    let r = x - m * &y;
    if let Some(dy) = lu.solve(&r) {
        let y2 = &y + dy;
        if y2.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            y = y2;
        }
    }
    let xn = x.norm();
    let res = (x - m * &y).norm() / if xn > 0.0 { xn } else { 1.0 };
    Some((y, res, rcond))
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(points >= 1);
    let n = points;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
