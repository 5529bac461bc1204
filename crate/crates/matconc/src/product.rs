//! Product measures `μ = μ₁ ⊗ … ⊗ μ_n` and their coordinate-refresh dynamics.
//!
//! The product chain refreshes coordinate `i` at rate 1 with a fresh draw
//! from `μ_i`: `Q(x, x^{i→z}) = μ_i(z)` for `z ≠ x_i`. Its semigroup
//! factorizes over coordinates,
//!
//! ```text
//! P_t f = Σ_{I ⊆ [n]} (1 − e^{−t})^{|I|} e^{−t(n−|I|)} · E_I f,
//! ```
//!
//! where `E_I` integrates the coordinates in `I` out against their factors.
//! The carré du champ is `Γ(f)(x) = ½ Σ_i ∫ (f(x^{i→z}) − f(x))² dμ_i(z)`,
//! and the Dirichlet form tensorizes into coordinate-wise conditional
//! variances, giving the matrix Efron–Stein inequality
//! `Var_μ(f) ⪯ Σ_i E_μ[Var_{μ_i}(f)] = 𝓔(f)` with constant 1.

use nalgebra::DMatrix;

use crate::chain::{FiniteMeasure, Generator, MatrixFunction, StateSpace};
use crate::check::{CheckResult, Tolerance};
use crate::dirichlet::{dirichlet_form, variance};
use crate::error::{Error, Result};
use crate::matcore::{lambda_min, CMatrix, HermitianMatrix};

/// Largest joint state space we materialize generators and functions on.
pub const MAX_JOINT_STATES: usize = 2048;
/// Largest number of factors for the closed-form semigroup (the subset
/// formula has `2^n` terms; the implementation factorizes but honors the
/// documented cap).
pub const MAX_CLOSED_FORM_FACTORS: usize = 12;

/// A finite product probability space with an explicit joint enumeration.
///
/// Joint states are ordered lexicographically with the *leftmost* coordinate
/// most significant; labels join the factor labels with `","`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSpace {
    factors: Vec<FiniteMeasure>,
    sizes: Vec<usize>,
    strides: Vec<usize>,
    joint_space: StateSpace,
    joint_measure: FiniteMeasure,
}

impl ProductSpace {
    pub fn new(factors: Vec<FiniteMeasure>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::validation("a product space needs at least one factor"));
        }
        let sizes: Vec<usize> = factors.iter().map(|m| m.space().size()).collect();
        let total: usize = sizes.iter().product();
        if total > MAX_JOINT_STATES {
            return Err(Error::SizeCap {
                what: "product state space".into(),
                max: MAX_JOINT_STATES,
                got: total,
                advice: "use fewer or smaller factors, or work with per-coordinate quantities".into(),
            });
        }
        let n = factors.len();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        let mut labels = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for idx in 0..total {
            let coords = coords_from_index(idx, &sizes, &strides);
            let label = coords
                .iter()
                .enumerate()
                .map(|(i, &c)| factors[i].space().label(c))
                .collect::<Vec<_>>()
                .join(",");
            let weight: f64 = coords
                .iter()
                .enumerate()
                .map(|(i, &c)| factors[i].weight(c))
                .product();
            labels.push(label);
            weights.push(weight);
        }
        let joint_space = StateSpace::new(labels)?;
        // Product weights of normalized factors sum to Π(Σ μ_i) = 1 up to
        // roundoff; renormalize the dust so construction can't fail.
        let total_w: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.into_iter().map(|w| w / total_w).collect();
        let joint_measure = FiniteMeasure::new(joint_space.clone(), weights)?;
        Ok(ProductSpace {
            factors,
            sizes,
            strides,
            joint_space,
            joint_measure,
        })
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[FiniteMeasure] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> &FiniteMeasure {
        &self.factors[i]
    }

    /// Number of joint states.
    pub fn size(&self) -> usize {
        self.joint_measure.space().size()
    }

    pub fn joint_space(&self) -> &StateSpace {
        &self.joint_space
    }

    pub fn joint_measure(&self) -> &FiniteMeasure {
        &self.joint_measure
    }

    /// Joint index of a coordinate tuple.
    pub fn index_of(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.n() {
            return Err(Error::validation(format!(
                "expected {} coordinates, got {}",
                self.n(),
                coords.len()
            )));
        }
        let mut idx = 0;
        for (i, &c) in coords.iter().enumerate() {
            if c >= self.sizes[i] {
                return Err(Error::validation(format!(
                    "coordinate {i} is {c}, but the factor has {} states",
                    self.sizes[i]
                )));
            }
            idx += c * self.strides[i];
        }
        Ok(idx)
    }

    /// Coordinate tuple of a joint index.
    pub fn coords_of(&self, idx: usize) -> Vec<usize> {
        coords_from_index(idx, &self.sizes, &self.strides)
    }

    /// The joint index reached from `idx` by setting coordinate `i` to `z`.
    fn replace(&self, idx: usize, i: usize, z: usize) -> usize {
        let current = (idx / self.strides[i]) % self.sizes[i];
        idx - current * self.strides[i] + z * self.strides[i]
    }
}

fn coords_from_index(idx: usize, sizes: &[usize], strides: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .zip(strides)
        .map(|(&s, &st)| (idx / st) % s)
        .collect()
}

/// The coordinate-refresh generator `Q(x, x^{i→z}) = μ_i(z)`, tagged
/// reversible w.r.t. the joint product measure.
pub fn product_generator(space: &ProductSpace) -> Result<Generator> {
    let total = space.size();
    let mut rates = DMatrix::<f64>::zeros(total, total);
    for x in 0..total {
        let coords = space.coords_of(x);
        let mut exit = 0.0;
        for i in 0..space.n() {
            for z in 0..space.sizes[i] {
                if z == coords[i] {
                    continue;
                }
                let r = space.factor(i).weight(z);
                if r != 0.0 {
                    rates[(x, space.replace(x, i, z))] += r;
                    exit += r;
                }
            }
        }
        rates[(x, x)] = -exit;
    }
    Generator::reversible(
        space.joint_space().clone(),
        rates,
        space.joint_measure().clone(),
    )
}

/// Averages coordinate `i` of `f` against its factor:
/// `(A_i f)(x) = Σ_z μ_i(z) f(x^{i→z})`.
fn average_coordinate(space: &ProductSpace, f: &MatrixFunction, i: usize) -> Result<MatrixFunction> {
    let d = f.dim();
    let values = (0..space.size())
        .map(|x| {
            let mut acc = CMatrix::zeros(d, d);
            for z in 0..space.sizes[i] {
                let w = space.factor(i).weight(z);
                if w != 0.0 {
                    acc += f.value(space.replace(x, i, z)).matrix().scale(w);
                }
            }
            HermitianMatrix::symmetrize(acc)
        })
        .collect();
    MatrixFunction::new(space.joint_space().clone(), values)
}

/// Evaluates the closed-form product semigroup
/// `P_t f = Σ_{I ⊆ [n]} (1−e^{−t})^{|I|} e^{−t(n−|I|)} E_I f`.
///
/// Implemented through the factorization `P_t = Π_i (e^{−t}·id + (1−e^{−t})·A_i)`
/// whose expansion is exactly the subset sum; capped at `n ≤ 12` factors.
pub fn product_semigroup_closed_form(
    space: &ProductSpace,
    t: f64,
    f: &MatrixFunction,
) -> Result<MatrixFunction> {
    if space.n() > MAX_CLOSED_FORM_FACTORS {
        return Err(Error::SizeCap {
            what: "closed-form product semigroup factors".into(),
            max: MAX_CLOSED_FORM_FACTORS,
            got: space.n(),
            advice: "use the generator-based semigroup for larger products".into(),
        });
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::validation(format!("time t = {t} must be finite and ≥ 0")));
    }
    if f.space() != space.joint_space() {
        return Err(Error::validation("function does not live on the joint product space"));
    }
    let stay = (-t).exp();
    let refresh = 1.0 - stay;
    let mut current = f.clone();
    for i in 0..space.n() {
        let averaged = average_coordinate(space, &current, i)?;
        let values = current
            .values()
            .iter()
            .zip(averaged.values())
            .map(|(orig, avg)| &orig.scale(stay) + &avg.scale(refresh))
            .collect();
        current = MatrixFunction::new(space.joint_space().clone(), values)?;
    }
    Ok(current)
}

/// The product carré du champ
/// `Γ(f)(x) = ½ Σ_i Σ_z μ_i(z) (f(x^{i→z}) − f(x))²`, as a function on the
/// joint space.
pub fn product_gamma(space: &ProductSpace, f: &MatrixFunction) -> Result<MatrixFunction> {
    if f.space() != space.joint_space() {
        return Err(Error::validation("function does not live on the joint product space"));
    }
    let d = f.dim();
    let values = (0..space.size())
        .map(|x| {
            let mut acc = CMatrix::zeros(d, d);
            for i in 0..space.n() {
                for z in 0..space.sizes[i] {
                    let w = space.factor(i).weight(z);
                    if w != 0.0 {
                        let diff = f.value(space.replace(x, i, z)) - f.value(x);
                        acc += diff.square().into_matrix().scale(0.5 * w);
                    }
                }
            }
            HermitianMatrix::symmetrize(acc)
        })
        .collect();
    MatrixFunction::new(space.joint_space().clone(), values)
}

/// The tensorized Dirichlet form together with its coordinate decomposition:
/// returns `(𝓔(f), [T_1, …, T_n])` where `T_i = E_μ[Var_{μ_i}(f)]` and
/// `𝓔(f) = Σ_i T_i`.
pub fn product_dirichlet(
    space: &ProductSpace,
    f: &MatrixFunction,
) -> Result<(HermitianMatrix, Vec<HermitianMatrix>)> {
    if f.space() != space.joint_space() {
        return Err(Error::validation("function does not live on the joint product space"));
    }
    let d = f.dim();
    let mu = space.joint_measure();
    let mut terms = Vec::with_capacity(space.n());
    let mut total = CMatrix::zeros(d, d);
    for i in 0..space.n() {
        let mut term = CMatrix::zeros(d, d);
        for x in 0..space.size() {
            let w = mu.weight(x);
            if w == 0.0 {
                continue;
            }
            // Conditional mean and second moment of f along the i-fiber.
            let mut mean = CMatrix::zeros(d, d);
            let mut second = CMatrix::zeros(d, d);
            for z in 0..space.sizes[i] {
                let wz = space.factor(i).weight(z);
                if wz != 0.0 {
                    let v = f.value(space.replace(x, i, z));
                    mean += v.matrix().scale(wz);
                    second += v.square().into_matrix().scale(wz);
                }
            }
            let cond_var = second - (&mean * &mean);
            term += cond_var.scale(w);
        }
        total += &term;
        terms.push(HermitianMatrix::symmetrize(term));
    }
    Ok((HermitianMatrix::symmetrize(total), terms))
}

/// Checks the matrix Efron–Stein inequality `Var_μ(f) ⪯ Σ_i E_μ[Var_{μ_i}(f)]`
/// (Poincaré with constant 1 for the product chain).
///
/// Margin is `λ_min(𝓔(f) − Var(f))`; the witness reports the trace of each
/// coordinate term and the residual between the tensorized form and the
/// generator-based Dirichlet form.
pub fn efron_stein_check(
    space: &ProductSpace,
    f: &MatrixFunction,
    tol: Tolerance,
) -> Result<CheckResult> {
    let mu = space.joint_measure();
    let var = variance(mu, f)?;
    let (energy, terms) = product_dirichlet(space, f)?;
    let gap = &energy - &var;
    let margin = lambda_min(&gap);
    let scale = energy.op_norm().max(var.op_norm());
    let q = product_generator(space)?;
    let energy_gen = dirichlet_form(&q, mu, f)?;
    let decomposition_residual = (&energy - &energy_gen).op_norm();
    Ok(CheckResult::from_margin("efron-stein", margin, scale, tol).with_witness(
        serde_json::json!({
            "coordinate_term_traces": terms.iter().map(|t| t.trace()).collect::<Vec<_>>(),
            "decomposition_residual": decomposition_residual,
            "variance_trace": var.trace(),
            "energy_trace": energy.trace(),
        }),
    ))
}

/// The tail-bound variance proxy for product measures:
/// `v_f = 2·sup_x ‖Γ(f)(x)‖_op`.
pub fn product_vf(space: &ProductSpace, f: &MatrixFunction) -> Result<f64> {
    Ok(2.0 * product_gamma(space, f)?.sup_norm())
}
