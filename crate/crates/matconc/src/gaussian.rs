//! Matrix-valued polynomials on ℝⁿ under the standard Gaussian measure, and
//! the Ornstein–Uhlenbeck (OU) calculus on them.
//!
//! For `f: ℝⁿ → H_d` polynomial, the OU carré du champ is
//! `Γ(f) = Σ_i (∂_i f)²`, the Dirichlet form is `𝓔(f) = E[Γ(f)]` under the
//! standard Gaussian `γ_n`, and the Gaussian Poincaré inequality
//! `Var_γ(f) ⪯ E[Γ(f)]` holds with constant 1. All expectations of
//! polynomials are computed *exactly* (up to roundoff) with Gauss–Hermite
//! quadrature of sufficient order: an order-`m` rule integrates degree
//! `≤ 2m − 1`, and products over independent coordinates reduce to
//! per-variable moment tables.
//!
//! The symbolic layer is deliberately small: polynomials in `n` commuting
//! real variables with Hermitian matrix coefficients, partial derivatives,
//! and products (used internally, where coefficients temporarily live in the
//! full matrix algebra).

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::check::{CheckResult, Tolerance};
use crate::error::{Error, Result};
use crate::matcore::{CMatrix, HermitianMatrix};
use crate::quad::{gauss_hermite, Quadrature1d};

// ---------------------------------------------------------------------------
// Matrix polynomials
// ---------------------------------------------------------------------------

/// A polynomial `ℝⁿ → H_d` stored as a sparse map from exponent vectors to
/// Hermitian coefficients: `f(x) = Σ_e x^e · A_e`.
///
/// Exponent vectors have length `n_vars`; coefficients are `dim × dim`.
/// Duplicate exponents are merged and exact-zero coefficients dropped at
/// construction, so the representation is canonical and iteration order
/// (lexicographic in the exponent) is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    n_vars: usize,
    dim: usize,
    terms: BTreeMap<Vec<u32>, HermitianMatrix>,
}

impl MatrixPolynomial {
    pub fn new(
        n_vars: usize,
        dim: usize,
        terms: impl IntoIterator<Item = (Vec<u32>, HermitianMatrix)>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("coefficient dimension must be ≥ 1"));
        }
        let mut map: BTreeMap<Vec<u32>, HermitianMatrix> = BTreeMap::new();
        for (exps, coeff) in terms {
            if exps.len() != n_vars {
                return Err(Error::validation(format!(
                    "exponent vector {exps:?} has length {}, expected {n_vars}",
                    exps.len()
                )));
            }
            if coeff.dim() != dim {
                return Err(Error::validation(format!(
                    "coefficient at {exps:?} is {}×{}, expected {dim}×{dim}",
                    coeff.dim(),
                    coeff.dim()
                )));
            }
            match map.entry(exps) {
                std::collections::btree_map::Entry::Vacant(v) => {
                    v.insert(coeff);
                }
                std::collections::btree_map::Entry::Occupied(mut o) => {
                    let merged = o.get() + &coeff;
                    o.insert(merged);
                }
            }
        }
        map.retain(|_, c| c.max_abs_entry() != 0.0);
        Ok(MatrixPolynomial {
            n_vars,
            dim,
            terms: map,
        })
    }

    pub fn zero(n_vars: usize, dim: usize) -> Self {
        MatrixPolynomial {
            n_vars,
            dim,
            terms: BTreeMap::new(),
        }
    }

    /// The constant polynomial `x ↦ m`.
    pub fn constant(n_vars: usize, m: HermitianMatrix) -> Self {
        let dim = m.dim();
        MatrixPolynomial::new(n_vars, dim, [(vec![0; n_vars], m)])
            .expect("constant construction cannot fail")
    }

    /// The linear polynomial `Σ_i x_i A_i`.
    pub fn linear(coeffs: &[HermitianMatrix]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::validation("linear polynomial needs at least one coefficient"));
        }
        let n = coeffs.len();
        let dim = coeffs[0].dim();
        MatrixPolynomial::new(
            n,
            dim,
            coeffs.iter().enumerate().map(|(i, a)| {
                let mut e = vec![0u32; n];
                e[i] = 1;
                (e, a.clone())
            }),
        )
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total degree (0 for the zero polynomial).
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Terms in lexicographic exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &HermitianMatrix)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluates at a point.
    pub fn eval(&self, x: &[f64]) -> Result<HermitianMatrix> {
        if x.len() != self.n_vars {
            return Err(Error::validation(format!(
                "point has {} coordinates, polynomial has {} variables",
                x.len(),
                self.n_vars
            )));
        }
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for (exps, coeff) in &self.terms {
            let monomial: f64 = exps
                .iter()
                .zip(x)
                .map(|(&e, &xi)| xi.powi(e as i32))
                .product();
            if monomial != 0.0 {
                acc += coeff.matrix().scale(monomial);
            }
        }
        Ok(HermitianMatrix::symmetrize(acc))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        MatrixPolynomial::new(
            self.n_vars,
            self.dim,
            self.terms
                .iter()
                .chain(other.terms.iter())
                .map(|(e, c)| (e.clone(), c.clone())),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, a: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| (e.clone(), c.scale(a)))
            .collect();
        MatrixPolynomial {
            n_vars: self.n_vars,
            dim: self.dim,
            terms,
        }
    }

    /// Largest coefficient magnitude; a cheap scale proxy for tolerances.
    pub fn coeff_scale(&self) -> f64 {
        self.terms
            .values()
            .fold(0.0f64, |m, c| m.max(c.max_abs_entry()))
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.n_vars != other.n_vars || self.dim != other.dim {
            return Err(Error::validation(
                "polynomials have different variable counts or dimensions",
            ));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    exponents: Vec<u32>,
    coeff: HermitianMatrix,
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    n: usize,
    d: usize,
    terms: Vec<TermJson>,
}

impl Serialize for MatrixPolynomial {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PolyJson {
            n: self.n_vars,
            d: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermJson {
                    exponents: e.clone(),
                    coeff: c.clone(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MatrixPolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = PolyJson::deserialize(deserializer)?;
        MatrixPolynomial::new(
            raw.n,
            raw.d,
            raw.terms.into_iter().map(|t| (t.exponents, t.coeff)),
        )
        .map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// General-coefficient polynomials (internal, for products)
// ---------------------------------------------------------------------------

/// A polynomial with arbitrary (not necessarily Hermitian) matrix
/// coefficients; products of Hermitian-coefficient polynomials pass through
/// here before symmetric combinations land back in [`MatrixPolynomial`].
#[derive(Debug, Clone)]
pub(crate) struct GeneralPolynomial {
    n_vars: usize,
    dim: usize,
    terms: BTreeMap<Vec<u32>, CMatrix>,
}

impl GeneralPolynomial {
    pub(crate) fn from_hermitian(p: &MatrixPolynomial) -> Self {
        GeneralPolynomial {
            n_vars: p.n_vars,
            dim: p.dim,
            terms: p
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), c.matrix().clone()))
                .collect(),
        }
    }

    pub(crate) fn zero(n_vars: usize, dim: usize) -> Self {
        GeneralPolynomial {
            n_vars,
            dim,
            terms: BTreeMap::new(),
        }
    }

    fn insert(&mut self, exps: Vec<u32>, m: CMatrix) {
        match self.terms.entry(exps) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(m);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += m;
            }
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        for (e, c) in &other.terms {
            self.insert(e.clone(), c.clone());
        }
    }

    pub(crate) fn scale(&self, a: f64) -> Self {
        GeneralPolynomial {
            n_vars: self.n_vars,
            dim: self.dim,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c.scale(a))).collect(),
        }
    }

    pub(crate) fn mul(&self, other: &Self) -> Self {
        let mut out = GeneralPolynomial::zero(self.n_vars, self.dim);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exps: Vec<u32> = ea.iter().zip(eb).map(|(&a, &b)| a + b).collect();
                out.insert(exps, ca * cb);
            }
        }
        out
    }

    /// ∂/∂x_i term by term.
    pub(crate) fn partial(&self, i: usize) -> Self {
        let mut out = GeneralPolynomial::zero(self.n_vars, self.dim);
        for (exps, coeff) in &self.terms {
            let e = exps[i];
            if e > 0 {
                let mut de = exps.clone();
                de[i] = e - 1;
                out.insert(de, coeff.scale(e as f64));
            }
        }
        out
    }

    /// Multiplication by the monomial `x_i`.
    pub(crate) fn shift_up(&self, i: usize) -> Self {
        GeneralPolynomial {
            n_vars: self.n_vars,
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| {
                    let mut up = e.clone();
                    up[i] += 1;
                    (up, c.clone())
                })
                .collect(),
        }
    }

    /// Converts back, symmetrizing each coefficient (exact when the
    /// polynomial is Hermitian-valued by construction).
    pub(crate) fn into_hermitian(self) -> Result<MatrixPolynomial> {
        MatrixPolynomial::new(
            self.n_vars,
            self.dim,
            self.terms
                .into_iter()
                .map(|(e, c)| (e, HermitianMatrix::symmetrize(c))),
        )
    }
}

// ---------------------------------------------------------------------------
// OU calculus
// ---------------------------------------------------------------------------

/// The partial derivative `∂f/∂x_i` (0-based variable index).
pub fn mpoly_partial(f: &MatrixPolynomial, i: usize) -> Result<MatrixPolynomial> {
    if i >= f.n_vars() {
        return Err(Error::validation(format!(
            "variable index {i} out of range for a polynomial in {} variables",
            f.n_vars()
        )));
    }
    GeneralPolynomial::from_hermitian(f).partial(i).into_hermitian()
}

/// The OU carré du champ `Γ(f) = Σ_i (∂_i f)²`, a PSD-valued matrix
/// polynomial of degree `≤ 2(deg f − 1)`.
pub fn ou_gamma(f: &MatrixPolynomial) -> Result<MatrixPolynomial> {
    let mut acc = GeneralPolynomial::zero(f.n_vars(), f.dim());
    for i in 0..f.n_vars() {
        let di = GeneralPolynomial::from_hermitian(f).partial(i);
        acc.add_assign(&di.mul(&di));
    }
    acc.into_hermitian()
}

/// The one-dimensional OU generator `𝓛f = −x·f′ + f″` (requires `n_vars == 1`).
pub fn ou_generator_apply(f: &MatrixPolynomial) -> Result<MatrixPolynomial> {
    if f.n_vars() != 1 {
        return Err(Error::validation(format!(
            "the symbolic OU generator is implemented for 1 variable, got {}",
            f.n_vars()
        )));
    }
    let g = GeneralPolynomial::from_hermitian(f);
    let d1 = g.partial(0);
    let d2 = d1.partial(0);
    let mut out = d1.shift_up(0).scale(-1.0);
    out.add_assign(&d2);
    out.into_hermitian()
}

// ---------------------------------------------------------------------------
// Gaussian expectations
// ---------------------------------------------------------------------------

/// A Gauss–Hermite rule for the standard normal factor, applied per variable
/// through its moment table.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    rule: Quadrature1d,
    order: usize,
}

impl QuadratureRule {
    pub fn new(order: usize) -> Result<Self> {
        Ok(QuadratureRule {
            rule: gauss_hermite(order)?,
            order,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `E[x^k]` under the discrete rule (exact for `k ≤ 2·order − 1`).
    pub fn moment(&self, k: u32) -> f64 {
        self.rule.moment(k)
    }

    /// The minimal order needed to integrate a polynomial of total degree
    /// `deg` exactly: `⌈(deg + 1)/2⌉`.
    pub fn required_order(deg: u32) -> usize {
        ((deg as usize) + 2) / 2
    }

    fn check_degree(&self, deg: u32, what: &str) -> Result<()> {
        let required = Self::required_order(deg);
        if self.order < required {
            return Err(Error::QuadratureOrder {
                required,
                got: self.order,
                context: format!("{what} has degree {deg}"),
            });
        }
        Ok(())
    }
}

/// `E_γ[f]` for the standard Gaussian on ℝⁿ, exact given sufficient order.
///
/// Independence factorizes every monomial: `E[x^e] = Π_i E[x_i^{e_i}]`, so a
/// single one-dimensional moment table serves every variable.
pub fn gauss_expect(f: &MatrixPolynomial, rule: &QuadratureRule) -> Result<HermitianMatrix> {
    rule.check_degree(f.degree(), "integrand")?;
    let mut acc = CMatrix::zeros(f.dim(), f.dim());
    for (exps, coeff) in f.terms() {
        let weight: f64 = exps.iter().map(|&e| rule.moment(e)).product();
        if weight != 0.0 {
            acc += coeff.matrix().scale(weight);
        }
    }
    Ok(HermitianMatrix::symmetrize(acc))
}

/// `Var_γ(f) = E[f²] − (E f)²`, exact given order ≥ ⌈(2·deg f + 1)/2⌉.
pub fn gaussian_variance(f: &MatrixPolynomial, rule: &QuadratureRule) -> Result<HermitianMatrix> {
    let g = GeneralPolynomial::from_hermitian(f);
    let f2 = g.mul(&g).into_hermitian()?;
    rule.check_degree(f2.degree(), "f²")?;
    let mean = gauss_expect(f, rule)?;
    let second = gauss_expect(&f2, rule)?;
    Ok(&second - &mean.square())
}

/// Checks the Gaussian Poincaré inequality `Var_γ(f) ⪯ E_γ[Γ(f)]` (constant 1)
/// for a concrete matrix polynomial, with all expectations exact.
pub fn gaussian_poincare_check(
    f: &MatrixPolynomial,
    rule: &QuadratureRule,
    tol: Tolerance,
) -> Result<CheckResult> {
    let var = gaussian_variance(f, rule)?;
    let gamma = ou_gamma(f)?;
    rule.check_degree(gamma.degree(), "Γ(f)")?;
    let energy = gauss_expect(&gamma, rule)?;
    let res = crate::matcore::psd_leq(&var, &energy, tol)?;
    Ok(CheckResult {
        name: "gaussian-poincare".into(),
        ..res
    })
}

/// Largest grid we are willing to scan for the Γ supremum.
pub const MAX_VF_GRID_POINTS: usize = 2_000_000;

/// Estimates the tail-bound proxy `v_f = sup_x ‖Γ(f)(x)‖_op`.
///
/// Returns `(value, exact)`. When `Γ` is constant (e.g. affine `f`) the
/// supremum is exact and no box is needed. Otherwise a nonconstant PSD-valued
/// polynomial is unbounded on ℝⁿ, so a bounding `box = (lo, hi)` applied to
/// every coordinate is required, and the supremum over the `grid^n` lattice
/// (a lower estimate of the box supremum) is returned with `exact = false`.
pub fn gaussian_vf(
    f: &MatrixPolynomial,
    bounding_box: Option<(f64, f64)>,
    grid: usize,
) -> Result<(f64, bool)> {
    let gamma = ou_gamma(f)?;
    if gamma.degree() == 0 {
        let value = match gamma.terms().next() {
            Some((_, c)) => c.op_norm(),
            None => 0.0,
        };
        return Ok((value, true));
    }
    let (lo, hi) = bounding_box.ok_or_else(|| {
        Error::Unbounded(
            "Γ(f) is a nonconstant PSD-valued polynomial, hence unbounded on ℝⁿ; \
             supply a bounding box to scan"
                .into(),
        )
    })?;
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::validation(format!(
            "invalid bounding box [{lo}, {hi}]"
        )));
    }
    if grid < 2 {
        return Err(Error::validation("grid must have at least 2 points per axis"));
    }
    let n = f.n_vars();
    let total = grid.checked_pow(n as u32).unwrap_or(usize::MAX);
    if total > MAX_VF_GRID_POINTS {
        return Err(Error::SizeCap {
            what: "Γ supremum scan grid".into(),
            max: MAX_VF_GRID_POINTS,
            got: total,
            advice: "reduce the per-axis grid or the number of variables".into(),
        });
    }
    let step = (hi - lo) / (grid - 1) as f64;
    let mut point = vec![lo; n];
    let mut sup = 0.0f64;
    for flat in 0..total {
        let mut rest = flat;
        for coord in point.iter_mut() {
            *coord = lo + step * (rest % grid) as f64;
            rest /= grid;
        }
        sup = sup.max(gamma.eval(&point)?.op_norm());
    }
    Ok((sup, false))
}

// ---------------------------------------------------------------------------
// Monte Carlo sampling
// ---------------------------------------------------------------------------

/// Draws one standard Gaussian point in ℝⁿ.
pub(crate) fn sample_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// A deterministic stream of standard Gaussian points (ChaCha8-seeded).
pub struct GaussianStream {
    rng: ChaCha8Rng,
    n: usize,
    remaining: u64,
}

impl Iterator for GaussianStream {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(sample_point(&mut self.rng, self.n))
    }
}

/// `count` i.i.d. standard Gaussian points in ℝⁿ, deterministic in the seed.
pub fn gaussian_mc_sample(n: usize, count: u64, seed: u64) -> Result<GaussianStream> {
    if n == 0 {
        return Err(Error::validation("dimension n must be ≥ 1"));
    }
    Ok(GaussianStream {
        rng: ChaCha8Rng::seed_from_u64(seed),
        n,
        remaining: count,
    })
}
