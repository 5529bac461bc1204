//! Hermitian matrices, spectral functional calculus, and PSD-order comparison.
//!
//! All matrix-valued data in this crate lives in H_d, the d×d complex Hermitian
//! matrices. Scalar maps lift through the eigendecomposition: for A = VΛV*,
//! f(A) = V·diag(f(λ₁),…,f(λ_d))·V*. Matrices are small (d ≲ 16), so everything
//! goes through dense eigensolves — robustness over speed.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::check::{vector_witness, CheckResult, Tolerance};
use crate::error::{Error, Result};

pub type Complex64 = Complex<f64>;
pub type CMatrix = DMatrix<Complex64>;

/// Per-entry absolute tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_ENTRY_TOL: f64 = 1e-12;

/// A validated d×d complex Hermitian matrix (d ≥ 1).
///
/// Construction symmetrizes the stored entries to (M + M*)/2 after checking the
/// input is Hermitian within [`HERMITIAN_ENTRY_TOL`] per entry, so the invariant
/// holds exactly from then on.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    mat: CMatrix,
}

impl HermitianMatrix {
    /// Validate and wrap a complex matrix.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() == 0 || mat.nrows() != mat.ncols() {
            return Err(Error::validation(format!(
                "Hermitian matrix must be square with d ≥ 1, got {}×{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        for i in 0..mat.nrows() {
            for j in 0..mat.ncols() {
                let z = mat[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::validation(format!(
                        "non-finite entry at ({i},{j}): {z}"
                    )));
                }
                let dev = (z - mat[(j, i)].conj()).norm();
                if dev > HERMITIAN_ENTRY_TOL {
                    return Err(Error::validation(format!(
                        "matrix is not Hermitian: |A[{i}][{j}] - conj(A[{j}][{i}])| = {dev:.3e} > {HERMITIAN_ENTRY_TOL:.0e}"
                    )));
                }
            }
        }
        Ok(Self::symmetrize(mat))
    }

    /// Wrap a matrix that is Hermitian in exact arithmetic, scrubbing floating-point
    /// dust by replacing it with (M + M*)/2.
    pub(crate) fn symmetrize(mat: CMatrix) -> Self {
        let adj = mat.adjoint();
        HermitianMatrix {
            mat: (mat + adj).scale(0.5),
        }
    }

    /// Real symmetric input as a Hermitian matrix.
    pub fn from_real(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::validation("ragged rows in real matrix input"));
        }
        let mat = CMatrix::from_fn(d, d, |i, j| Complex64::new(rows[i][j], 0.0));
        Self::new(mat)
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1, "Hermitian dimension must be ≥ 1");
        HermitianMatrix {
            mat: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        assert!(d >= 1, "Hermitian dimension must be ≥ 1");
        HermitianMatrix {
            mat: CMatrix::identity(d, d),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "Hermitian dimension must be ≥ 1");
        let d = diag.len();
        HermitianMatrix {
            mat: CMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    Complex64::new(diag[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.mat[(i, j)]
    }

    pub fn scale(&self, a: f64) -> Self {
        HermitianMatrix {
            mat: self.mat.scale(a),
        }
    }

    /// General (not necessarily Hermitian) matrix product.
    pub fn mul(&self, rhs: &Self) -> CMatrix {
        &self.mat * &rhs.mat
    }

    /// A·A — Hermitian for Hermitian A.
    pub fn square(&self) -> Self {
        Self::symmetrize(&self.mat * &self.mat)
    }

    /// self · inner · self — Hermitian whenever both factors are.
    pub fn sandwich(&self, inner: &Self) -> Self {
        Self::symmetrize(&self.mat * &inner.mat * &self.mat)
    }

    /// Trace (real for Hermitian matrices).
    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.norm()
    }

    /// Operator norm: max |λ| over the spectrum.
    pub fn op_norm(&self) -> f64 {
        let se = spectral(self);
        se.eigenvalues()
            .iter()
            .fold(0.0f64, |m, &l| m.max(l.abs()))
    }

    /// Largest |entry| — a cheap scale proxy used in tolerance thresholds.
    pub fn max_abs_entry(&self) -> f64 {
        self.mat.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }
}

impl std::ops::Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in add");
        HermitianMatrix {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl std::ops::Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in sub");
        HermitianMatrix {
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl std::ops::Neg for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn neg(self) -> HermitianMatrix {
        HermitianMatrix {
            mat: -self.mat.clone(),
        }
    }
}

/// JSON shape: {"d": int, "re": [[...]], "im": [[...]]}; "im" omitted when zero.
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    d: usize,
    re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<Vec<Vec<f64>>>,
}

impl From<HermitianMatrix> for MatrixJson {
    fn from(h: HermitianMatrix) -> Self {
        let d = h.dim();
        let re = (0..d)
            .map(|i| (0..d).map(|j| h.entry(i, j).re).collect())
            .collect();
        let any_im = h.mat.iter().any(|z| z.im != 0.0);
        let im = any_im.then(|| {
            (0..d)
                .map(|i| (0..d).map(|j| h.entry(i, j).im).collect())
                .collect()
        });
        MatrixJson { d, re, im }
    }
}

impl TryFrom<MatrixJson> for HermitianMatrix {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        let d = j.d;
        let check_shape = |name: &str, rows: &Vec<Vec<f64>>| -> Result<()> {
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(Error::validation(format!(
                    "\"{name}\" must be a {d}×{d} array"
                )));
            }
            Ok(())
        };
        check_shape("re", &j.re)?;
        if let Some(im) = &j.im {
            check_shape("im", im)?;
        }
        if d == 0 {
            return Err(Error::validation("matrix dimension must be ≥ 1"));
        }
        let mat = CMatrix::from_fn(d, d, |i, jx| {
            let im = j.im.as_ref().map_or(0.0, |m| m[i][jx]);
            Complex64::new(j.re[i][jx], im)
        });
        HermitianMatrix::new(mat)
    }
}

impl Serialize for HermitianMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        HermitianMatrix::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// Eigendecomposition A = V·diag(λ)·V* with λ sorted ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unitary matrix of eigenvector columns, ordered to match the eigenvalues.
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    /// V·diag(f(λ))·V*; domain error if `f` is non-finite on an eigenvalue.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
        let d = self.eigenvalues.len();
        let mut fl = Vec::with_capacity(d);
        for &l in &self.eigenvalues {
            let y = f(l);
            if !y.is_finite() {
                return Err(Error::domain(format!(
                    "scalar map is non-finite at eigenvalue {l}: {y}"
                )));
            }
            fl.push(y);
        }
        let v = &self.eigenvectors;
        let diag = CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::new(fl[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Ok(HermitianMatrix::symmetrize(v * diag * v.adjoint()))
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.apply(|l| l).expect("identity map is finite")
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn spectral(a: &HermitianMatrix) -> SpectralDecomposition {
    let se = a.mat.clone().symmetric_eigen();
    let d = a.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        se.eigenvalues[i]
            .partial_cmp(&se.eigenvalues[j])
            .expect("finite eigenvalues")
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(d, d, |i, j| se.eigenvectors[(i, order[j])]);
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// f(A) through the spectral decomposition.
pub fn herm_fn(a: &HermitianMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    spectral(a).apply(f)
}

/// e^A for Hermitian A (spectral route).
pub fn herm_exp(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    herm_fn(a, f64::exp)
}

/// A^p for PSD A and real p ≥ 0; eigenvalues are clamped at 0 before powering so
/// that roundoff-negative eigenvalues of a PSD matrix do not poison fractional
/// powers. Callers must ensure A is PSD up to roundoff.
pub fn psd_power(a: &HermitianMatrix, p: f64) -> Result<HermitianMatrix> {
    herm_fn(a, |l| l.max(0.0).powf(p))
}

/// Largest eigenvalue. d = 2 uses the closed form (hot path in Monte Carlo tails).
pub fn lambda_max(a: &HermitianMatrix) -> f64 {
    if a.dim() == 2 {
        let m = (a.mat[(0, 0)].re + a.mat[(1, 1)].re) * 0.5;
        let delta = (a.mat[(0, 0)].re - a.mat[(1, 1)].re) * 0.5;
        let off = a.mat[(0, 1)].norm_sqr();
        return m + (delta * delta + off).sqrt();
    }
    *spectral(a)
        .eigenvalues()
        .last()
        .expect("nonempty spectrum")
}

/// Smallest eigenvalue.
pub fn lambda_min(a: &HermitianMatrix) -> f64 {
    if a.dim() == 2 {
        let m = (a.mat[(0, 0)].re + a.mat[(1, 1)].re) * 0.5;
        let delta = (a.mat[(0, 0)].re - a.mat[(1, 1)].re) * 0.5;
        let off = a.mat[(0, 1)].norm_sqr();
        return m - (delta * delta + off).sqrt();
    }
    spectral(a).eigenvalues()[0]
}

/// PSD-order check A ⪯ B: passes iff λ_min(B − A) ≥ −(tol.abs + tol.rel·‖B−A‖).
/// The witness is the eigenvector attaining λ_min of the slack matrix.
pub fn psd_leq(a: &HermitianMatrix, b: &HermitianMatrix, tol: Tolerance) -> Result<CheckResult> {
    if a.dim() != b.dim() {
        return Err(Error::validation(format!(
            "dimension mismatch in PSD comparison: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let diff = b - a;
    let se = spectral(&diff);
    let margin = se.eigenvalues()[0];
    let scale = se
        .eigenvalues()
        .iter()
        .fold(0.0f64, |m, &l| m.max(l.abs()));
    let v = se.eigenvectors().column(0);
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
    Ok(CheckResult::from_margin("psd-leq", margin, scale, tol)
        .with_witness(vector_witness(&re, &im)))
}

/// Deterministic GUE-style random Hermitian matrix: off-diagonal entries are
/// complex Gaussian with standard deviation `scale` (real/imaginary parts
/// N(0, scale²/2) each), diagonal entries real N(0, scale²). `scale = 0` gives
/// the zero matrix.
pub fn random_hermitian(d: usize, scale: f64, seed: u64) -> HermitianMatrix {
    assert!(d >= 1, "Hermitian dimension must be ≥ 1");
    assert!(
        scale.is_finite() && scale >= 0.0,
        "scale must be finite and ≥ 0"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mat = CMatrix::zeros(d, d);
    let offdiag_sd = scale / std::f64::consts::SQRT_2;
    for i in 0..d {
        for j in i..d {
            if i == j {
                let x: f64 = StandardNormal.sample(&mut rng);
                mat[(i, i)] = Complex64::new(scale * x, 0.0);
            } else {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                mat[(i, j)] = Complex64::new(offdiag_sd * re, offdiag_sd * im);
                mat[(j, i)] = mat[(i, j)].conj();
            }
        }
    }
    HermitianMatrix { mat }
}

/// Random PSD matrix: square of [`random_hermitian`], rescaled so the operator
/// norm is about `scale`.
pub fn random_psd(d: usize, scale: f64, seed: u64) -> HermitianMatrix {
    let a = random_hermitian(d, 1.0, seed);
    let sq = a.square();
    let norm = sq.op_norm();
    if norm == 0.0 {
        return HermitianMatrix::zeros(d);
    }
    sq.scale(scale / norm)
}

/// Matrix exponential of a general complex matrix by Padé-free scaling and
/// squaring: scale so ‖M/2^s‖₁ ≤ 1, sum the Taylor series to degree 16, then
/// square s times. Serves as the non-spectral oracle and the fallback for
/// non-reversible generators.
pub fn expm_taylor(m: &CMatrix) -> CMatrix {
    let d = m.nrows();
    // max column sum of absolute values
    let norm1 = (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let s = if norm1 <= 1.0 {
        0
    } else {
        norm1.log2().ceil() as u32
    };
    let t = m.map(|z| z / 2f64.powi(s as i32));
    // Horner evaluation of Σ_{j≤16} T^j / j!
    let mut acc = CMatrix::identity(d, d);
    for j in (1..=16u32).rev() {
        acc = &t * acc.map(|z| z / f64::from(j)) + CMatrix::identity(d, d);
    }
    let mut result = acc;
    for _ in 0..s {
        result = &result * &result;
    }
    result
}
