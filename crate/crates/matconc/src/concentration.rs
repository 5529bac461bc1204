//! Tail bounds from matrix Poincaré inequalities, the Laplace-transform
//! bound, the moment-recursion step, and empirical tails.
//!
//! The central object is the sub-exponential tail bound
//!
//! ```text
//! P(λ_max(f − E_μ f) ≥ t) ≤ b(t) = d·exp(−t² / (2αv + t·√(2αv))),
//! ```
//!
//! valid whenever μ satisfies a matrix Poincaré inequality with constant `α`
//! and `v = sup_x ‖Γ(f)(x)‖` bounds the carré du champ. Specialized display
//! forms for product measures, Gaussian polynomials, and Lipschitz functions
//! of homogeneous cube measures are thin wrappers over the same evaluator
//! ([`product_tail_spec`], [`gaussian_tail_spec`], [`cube_lipschitz_tail_spec`]).
//!
//! The route to `b(t)` is checked piecewise: [`laplace_bound_check`] verifies
//! the exponential-moment bound `E_μ Tr e^{δ(f−Ef)} ≤ 2d/(2 − αvδ²)`,
//! [`recursion_step_check`] the single induction step behind it, and
//! [`chernoff_delta`] supplies the optimizing exponent. [`exact_tail`] /
//! [`mc_tail`] produce empirical tails and [`dominance_report`] compares them
//! against a bound.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{expectation, FiniteMeasure, Generator, MatrixFunction};
use crate::check::{CheckResult, Tolerance};
use crate::corpus::derive_seed;
use crate::dirichlet::gamma_sup_norm;
use crate::error::{Error, Result};
use crate::matcore::{herm_exp, lambda_max};

/// Two-sided 99% normal quantile used for Wilson score intervals.
pub const WILSON_Z_99: f64 = 2.5758293035489004;

/// Monte Carlo work is split into fixed-size chunks, each with its own
/// derived RNG stream, so results are identical for any thread count.
const MC_CHUNK: usize = 16_384;

// ---------------------------------------------------------------------------
// The tail bound and its wrappers
// ---------------------------------------------------------------------------

/// Parameters of the Poincaré tail bound
/// `b(t) = d·exp(−t²/(2αv + t√(2αv)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBoundSpec {
    /// Matrix dimension.
    pub d: usize,
    /// Poincaré constant of the underlying measure.
    pub alpha: f64,
    /// Uniform bound on `‖Γ(f)‖` (may be 0 for constant functions).
    pub v_gamma: f64,
}

impl TailBoundSpec {
    pub fn new(d: usize, alpha: f64, v_gamma: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::validation("matrix dimension d must be ≥ 1"));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::validation(format!(
                "Poincaré constant α = {alpha} must be finite and > 0"
            )));
        }
        if !(v_gamma.is_finite() && v_gamma >= 0.0) {
            return Err(Error::validation(format!(
                "carré du champ bound v = {v_gamma} must be finite and ≥ 0"
            )));
        }
        Ok(TailBoundSpec { d, alpha, v_gamma })
    }

    /// Evaluates `b(t)`. Degenerate case `v = 0`: `b(0) = d`, `b(t) = 0` for
    /// `t > 0` (a constant function never deviates).
    pub fn bound(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::validation(format!("tail threshold t = {t} must be ≥ 0")));
        }
        let d = self.d as f64;
        if t == 0.0 {
            return Ok(d);
        }
        let av2 = 2.0 * self.alpha * self.v_gamma;
        if av2 == 0.0 {
            return Ok(0.0);
        }
        Ok(d * (-t * t / (av2 + t * av2.sqrt())).exp())
    }
}

/// Evaluates the tail bound; alias of [`TailBoundSpec::bound`] for call sites
/// that read better with a free function.
pub fn poincare_tail_bound(spec: &TailBoundSpec, t: f64) -> Result<f64> {
    spec.bound(t)
}

/// Tail spec for product measures: the displayed form
/// `d·exp(−t²/(v_f + t√v_f))` with `v_f` the product-measure variance proxy
/// ([`crate::product::product_vf`]) equals the general evaluator at
/// `α = 1, v = v_f/2`.
pub fn product_tail_spec(d: usize, v_f: f64) -> Result<TailBoundSpec> {
    TailBoundSpec::new(d, 1.0, v_f / 2.0)
}

/// The product display form evaluated directly (used to cross-check the
/// wrapper algebra).
pub fn product_tail_bound(d: usize, v_f: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::validation(format!("tail threshold t = {t} must be ≥ 0")));
    }
    if v_f <= 0.0 {
        return product_tail_spec(d, v_f.max(0.0))?.bound(t);
    }
    if t == 0.0 {
        return Ok(d as f64);
    }
    Ok(d as f64 * (-t * t / (v_f + t * v_f.sqrt())).exp())
}

/// Tail spec for Gaussian measures: `α = 1` (Ornstein–Uhlenbeck Poincaré
/// constant) and `v = sup‖Σᵢ(∂ᵢf)²‖`, giving `d·exp(−t²/(2v + t√(2v)))`.
pub fn gaussian_tail_spec(d: usize, v_f: f64) -> Result<TailBoundSpec> {
    TailBoundSpec::new(d, 1.0, v_f)
}

/// Tail spec for 1-Lipschitz functions of SCP cube measures on the
/// `k`-homogeneous slice: `α = 2k`, `v = 2`, giving the displayed
/// `d·exp(−t²/(8k + 2t√(2k)))`.
pub fn cube_lipschitz_tail_spec(d: usize, k: usize) -> Result<TailBoundSpec> {
    if k == 0 {
        return Err(Error::validation("slice weight k must be ≥ 1"));
    }
    TailBoundSpec::new(d, 2.0 * k as f64, 2.0)
}

/// The cube display form evaluated directly (used to cross-check the wrapper
/// algebra).
pub fn cube_lipschitz_tail_bound(d: usize, k: usize, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::validation(format!("tail threshold t = {t} must be ≥ 0")));
    }
    if k == 0 {
        return Err(Error::validation("slice weight k must be ≥ 1"));
    }
    if t == 0.0 {
        return Ok(d as f64);
    }
    let k = k as f64;
    Ok(d as f64 * (-t * t / (8.0 * k + 2.0 * t * (2.0 * k).sqrt())).exp())
}

/// The exponent that optimizes the Chernoff bound assembled from the Laplace
/// bound: `δ(t) = t / (αv + t·√(αv/2))`.
///
/// Always strictly inside the Laplace bound's validity range
/// `(0, √(2/(αv)))`, approaching the right endpoint as `t → ∞`.
pub fn chernoff_delta(alpha: f64, v: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && v > 0.0) {
        return Err(Error::validation("chernoff_delta requires α > 0 and v > 0"));
    }
    if !(t >= 0.0) {
        return Err(Error::validation(format!("tail threshold t = {t} must be ≥ 0")));
    }
    Ok(t / (alpha * v + t * (alpha * v / 2.0).sqrt()))
}

// ---------------------------------------------------------------------------
// Laplace-transform bound and the recursion step
// ---------------------------------------------------------------------------

/// The centered function `f − E_μ f`.
pub fn centered(mu: &FiniteMeasure, f: &MatrixFunction) -> Result<MatrixFunction> {
    let mean = expectation(mu, f)?;
    MatrixFunction::new(
        f.space().clone(),
        f.values().iter().map(|v| v - &mean).collect(),
    )
}

/// An evenly spaced grid of `count` exponents strictly inside the Laplace
/// bound's validity range `(0, √(2/(αv)))` (strictly inside `(0, 1]` when
/// `v = 0`, where every exponent is valid).
pub fn laplace_delta_grid(alpha: f64, v_gamma: f64, count: usize) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !(v_gamma >= 0.0) {
        return Err(Error::validation("grid requires α > 0 and v ≥ 0"));
    }
    if count == 0 {
        return Err(Error::validation("grid needs at least one point"));
    }
    let cap = if alpha * v_gamma > 0.0 {
        (2.0 / (alpha * v_gamma)).sqrt()
    } else {
        1.0
    };
    Ok((1..=count)
        .map(|j| cap * j as f64 / (count + 1) as f64)
        .collect())
}

/// Checks the Laplace-transform bound
/// `E_μ Tr e^{δ(f − E_μf)} ≤ 2d / (2 − αvδ²)` at every grid exponent, with
/// `v = sup‖Γ(f)‖` computed from the chain.
///
/// The left side is evaluated exactly (one matrix exponential per state).
/// Margin is the worst `RHS − LHS`; the witness records the tightest grid
/// point. Requires a reversible chain, `α > 0`, and every
/// `δ ∈ (0, √(2/(αv)))`.
pub fn laplace_bound_check(
    q: &Generator,
    mu: &FiniteMeasure,
    f: &MatrixFunction,
    alpha: f64,
    delta_grid: &[f64],
    tol: Tolerance,
) -> Result<CheckResult> {
    if !(alpha > 0.0) {
        return Err(Error::validation("a Poincaré constant must be > 0"));
    }
    if delta_grid.is_empty() {
        return Err(Error::validation("the exponent grid is empty"));
    }
    let v = gamma_sup_norm(q, f)?;
    let cap = if alpha * v > 0.0 {
        (2.0 / (alpha * v)).sqrt()
    } else {
        f64::INFINITY
    };
    for &delta in delta_grid {
        if !(delta > 0.0 && delta < cap) {
            return Err(Error::validation(format!(
                "exponent δ = {delta} outside the validity range (0, {cap:.6})"
            )));
        }
    }
    let g = centered(mu, f)?;
    let d = f.dim() as f64;
    let mut worst = f64::INFINITY;
    let mut worst_at = (0.0, 0.0, 0.0);
    let mut scale = 0.0f64;
    for &delta in delta_grid {
        let mut lhs = 0.0;
        for x in 0..mu.space().size() {
            let w = mu.weight(x);
            if w > 0.0 {
                lhs += w * herm_exp(&g.value(x).scale(delta))?.trace();
            }
        }
        let rhs = 2.0 * d / (2.0 - alpha * v * delta * delta);
        scale = scale.max(lhs.abs()).max(rhs.abs());
        if rhs - lhs < worst {
            worst = rhs - lhs;
            worst_at = (delta, lhs, rhs);
        }
    }
    Ok(
        CheckResult::from_margin("laplace-transform-bound", worst, scale, tol).with_witness(
            serde_json::json!({
                "v_gamma": v,
                "tightest_delta": worst_at.0,
                "lhs": worst_at.1,
                "rhs": worst_at.2,
                "grid_len": delta_grid.len(),
            }),
        ),
    )
}

/// Checks the single moment-recursion step behind the Laplace bound:
///
/// ```text
/// Tr[(E_μ e^{2g})^p] ≤ (1 − αv_g)^{−(p−1)}·Tr[(E_μ e^g)^{2p}]
///                      + αv_g·Tr[E_μ e^{2pg}]
/// ```
///
/// for centered `g` (`‖E_μ g‖ ≤ 1e-10`), `p ≥ 1`, and `αv_g < 1` with
/// `v_g = sup‖Γ(g)‖`. All three traces are evaluated exactly.
pub fn recursion_step_check(
    q: &Generator,
    mu: &FiniteMeasure,
    g: &MatrixFunction,
    p: usize,
    alpha: f64,
    tol: Tolerance,
) -> Result<CheckResult> {
    if p == 0 {
        return Err(Error::validation("the recursion step needs p ≥ 1"));
    }
    if !(alpha > 0.0) {
        return Err(Error::validation("a Poincaré constant must be > 0"));
    }
    let mean_norm = expectation(mu, g)?.op_norm();
    if mean_norm > 1e-10 {
        return Err(Error::validation(format!(
            "g must be centered: ‖E_μ g‖ = {mean_norm:.3e} > 1e-10"
        )));
    }
    let v = gamma_sup_norm(q, g)?;
    let av = alpha * v;
    if av >= 1.0 {
        return Err(Error::validation(format!(
            "the step requires αv_g < 1, got {av:.6}"
        )));
    }
    let exp_of = |factor: f64| -> Result<MatrixFunction> {
        MatrixFunction::new(
            g.space().clone(),
            g.values()
                .iter()
                .map(|m| herm_exp(&m.scale(factor)))
                .collect::<Result<Vec<_>>>()?,
        )
    };
    let e_2g = expectation(mu, &exp_of(2.0)?)?;
    let e_g = expectation(mu, &exp_of(1.0)?)?;
    let e_2pg = expectation(mu, &exp_of(2.0 * p as f64)?)?;
    let lhs = crate::matcore::psd_power(&e_2g, p as f64)?.trace();
    let mid = crate::matcore::psd_power(&e_g, 2.0 * p as f64)?.trace();
    let rhs = (1.0 - av).powi(-(p as i32 - 1)) * mid + av * e_2pg.trace();
    Ok(
        CheckResult::from_margin("moment-recursion-step", rhs - lhs, lhs.abs().max(rhs.abs()), tol)
            .with_witness(serde_json::json!({
                "p": p,
                "alpha_v": av,
                "lhs": lhs,
                "rhs": rhs,
            })),
    )
}

// ---------------------------------------------------------------------------
// Empirical tails
// ---------------------------------------------------------------------------

/// How a [`TailEstimate`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    Exact,
    MonteCarlo,
}

/// An empirical (or exactly enumerated) tail curve
/// `t ↦ P(λ_max(f − Ef) ≥ t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    /// Strictly increasing, nonnegative thresholds.
    pub t_grid: Vec<f64>,
    /// Tail probability (or empirical frequency) at each threshold.
    pub probabilities: Vec<f64>,
    pub method: TailMethod,
    /// Wilson 99% half-width at each threshold; all zeros for exact tails.
    pub half_widths: Vec<f64>,
    /// Number of samples behind a Monte Carlo estimate.
    pub sample_count: Option<u64>,
}

impl TailEstimate {
    fn validate_grid(t_grid: &[f64]) -> Result<()> {
        if t_grid.is_empty() {
            return Err(Error::validation("the threshold grid is empty"));
        }
        for (i, &t) in t_grid.iter().enumerate() {
            if !(t >= 0.0) {
                return Err(Error::validation(format!(
                    "threshold t = {t} must be ≥ 0 (tails are one-sided)"
                )));
            }
            if i > 0 && t <= t_grid[i - 1] {
                return Err(Error::validation("thresholds must be strictly increasing"));
            }
        }
        Ok(())
    }
}

/// The exact tail of `λ_max(f − E_μ f)` by enumeration over a finite space.
pub fn exact_tail(mu: &FiniteMeasure, f: &MatrixFunction, t_grid: &[f64]) -> Result<TailEstimate> {
    TailEstimate::validate_grid(t_grid)?;
    let g = centered(mu, f)?;
    let stats: Vec<f64> = (0..mu.space().size()).map(|x| lambda_max(g.value(x))).collect();
    let probabilities: Vec<f64> = t_grid
        .iter()
        .map(|&t| {
            // `+ 0.0` normalizes the empty sum (-0.0) to +0.0 for reports.
            stats
                .iter()
                .zip(0..)
                .filter(|&(s, _)| *s >= t)
                .map(|(_, x)| mu.weight(x))
                .sum::<f64>()
                + 0.0
        })
        .collect();
    Ok(TailEstimate {
        t_grid: t_grid.to_vec(),
        probabilities,
        method: TailMethod::Exact,
        half_widths: vec![0.0; t_grid.len()],
        sample_count: None,
    })
}

/// Monte Carlo tail of a sampled statistic with Wilson 99% half-widths.
///
/// `sample_stat` draws one sample from its RNG and returns the statistic
/// (typically `λ_max(f(X) − Ef)`). Samples are generated in fixed chunks of
/// 16384 whose RNG streams derive from `seed`, so the estimate is identical
/// for any thread count. Requires `n ≥ 1000`.
pub fn mc_tail<F>(sample_stat: F, t_grid: &[f64], n: u64, seed: u64) -> Result<TailEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    TailEstimate::validate_grid(t_grid)?;
    if n < 1000 {
        return Err(Error::validation(format!(
            "n = {n} Monte Carlo samples is too few; use at least 1000"
        )));
    }
    let chunks = n.div_ceil(MC_CHUNK as u64);
    let counts: Vec<u64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c));
            let size = (n - c * MC_CHUNK as u64).min(MC_CHUNK as u64);
            let mut local = vec![0u64; t_grid.len()];
            for _ in 0..size {
                let s = sample_stat(&mut rng);
                // Grid is increasing: find the exceedance prefix.
                for (j, &t) in t_grid.iter().enumerate() {
                    if s >= t {
                        local[j] += 1;
                    } else {
                        break;
                    }
                }
            }
            local
        })
        .reduce(
            || vec![0u64; t_grid.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let nf = n as f64;
    let z = WILSON_Z_99;
    let mut probabilities = Vec::with_capacity(t_grid.len());
    let mut half_widths = Vec::with_capacity(t_grid.len());
    for &c in &counts {
        let p = c as f64 / nf;
        let denom = 1.0 + z * z / nf;
        let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
        probabilities.push(p);
        half_widths.push(half);
    }
    Ok(TailEstimate {
        t_grid: t_grid.to_vec(),
        probabilities,
        method: TailMethod::MonteCarlo,
        half_widths,
        sample_count: Some(n),
    })
}

/// Compares an empirical tail against a bound: pass iff at every grid point
///
/// ```text
/// probability − k·half_width ≤ min(1, b(t)),
/// ```
///
/// `k = 3` for Monte Carlo (sampling noise must not raise false alarms) and
/// `k = 0` for exact tails. Margin is the worst slack; grid points where the
/// raw frequency exceeds the bound but the band absorbs it are listed as
/// inconclusive in the witness.
pub fn dominance_report(bound: &TailBoundSpec, estimate: &TailEstimate) -> Result<CheckResult> {
    let k = match estimate.method {
        TailMethod::Exact => 0.0,
        TailMethod::MonteCarlo => 3.0,
    };
    let mut worst = f64::INFINITY;
    let mut worst_t = 0.0;
    let mut inconclusive = Vec::new();
    for ((&t, &p), &hw) in estimate
        .t_grid
        .iter()
        .zip(&estimate.probabilities)
        .zip(&estimate.half_widths)
    {
        let b = bound.bound(t)?.min(1.0);
        let slack = b - (p - k * hw);
        if slack < worst {
            worst = slack;
            worst_t = t;
        }
        if p > b && slack >= 0.0 {
            inconclusive.push(t);
        }
    }
    Ok(
        CheckResult::from_margin("tail-dominance", worst, 1.0, Tolerance::absolute(1e-12))
            .with_witness(serde_json::json!({
                "tightest_t": worst_t,
                "band_multiplier": k,
                "inconclusive_t": inconclusive,
                "method": estimate.method,
            })),
    )
}
