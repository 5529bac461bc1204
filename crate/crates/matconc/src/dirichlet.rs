//! Matrix variance, carré du champ, Dirichlet forms, and Poincaré
//! certificates for reversible finite chains.
//!
//! For a chain with generator `Q` reversible w.r.t. `μ` and a matrix-valued
//! function `f`:
//!
//! ```text
//! Var_μ(f)  = E_μ[f²] − (E_μ f)²                       (PSD)
//! Γ(f)(x)   = ½ Σ_{y≠x} Q(x,y) (f(y) − f(x))²          (PSD-valued)
//! 𝓔(f)      = E_μ[Γ(f)] = ½ Σ_{x,y} μ(x)Q(x,y)(f(y) − f(x))²
//! ```
//!
//! A Poincaré inequality `Var_μ(f) ⪯ α·𝓔(f)` holds for every `f` with
//! `α = 1/gap`, where `gap` is the spectral gap of the symmetrized generator;
//! [`poincare_check`] tests the matrix inequality for a concrete `f` and
//! [`spectral_gap`] certifies the constant. The dynamic counterpart
//! `Var_μ(f) = 2∫₀^∞ 𝓔(P_t f) dt` is checked numerically by
//! [`variance_integral_identity`].

use serde::Serialize;

use crate::chain::{
    apply_generator, expectation, FiniteMeasure, Generator, MatrixFunction, ReversibleSemigroup,
};
use crate::check::{CheckResult, Tolerance};
use crate::error::{Error, Result};
use crate::matcore::{lambda_min, psd_leq, CMatrix, HermitianMatrix};

/// How a Poincaré constant was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateSource {
    /// `α = 1/gap` from the spectral gap of the symmetrized generator; valid
    /// for every matrix dimension `d`.
    SpectralGap,
    /// Supplied by the caller (e.g. a structural constant such as `2k` for
    /// homogeneous cube measures).
    UserSupplied,
    /// The largest α required over a finite batch of random test functions;
    /// a lower-bound estimate, *not* a certified constant.
    EmpiricalSearch,
}

/// A Poincaré constant together with its provenance.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PoincareCertificate {
    pub alpha: f64,
    pub source: CertificateSource,
    /// The spectral gap when the certificate came from one.
    pub gap: Option<f64>,
}

/// `Var_μ(f) = E_μ[f²] − (E_μ f)²`.
pub fn variance(mu: &FiniteMeasure, f: &MatrixFunction) -> Result<HermitianMatrix> {
    let mean = expectation(mu, f)?;
    let second = expectation(mu, &f.map(|m| m.square()))?;
    Ok(&second - &mean.square())
}

/// The carré du champ `Γ(f)(x) = ½ Σ_{y≠x} Q(x,y)(f(y) − f(x))²`.
///
/// Each value is an explicitly PSD combination of Hermitian squares, so the
/// result is PSD-valued up to roundoff regardless of reversibility.
pub fn carre_du_champ(q: &Generator, f: &MatrixFunction) -> Result<MatrixFunction> {
    if q.space() != f.space() {
        return Err(Error::validation("generator and function live on different state spaces"));
    }
    let n = q.size();
    let d = f.dim();
    let values = (0..n)
        .map(|x| {
            let mut acc = CMatrix::zeros(d, d);
            for y in 0..n {
                if y == x {
                    continue;
                }
                let rate = q.rate(x, y);
                if rate != 0.0 {
                    let diff = f.value(y) - f.value(x);
                    acc += diff.square().into_matrix().scale(0.5 * rate);
                }
            }
            HermitianMatrix::symmetrize(acc)
        })
        .collect();
    MatrixFunction::new(q.space().clone(), values)
}

/// The algebraic form `Γ(f) = ½(𝓛(f²) − f·𝓛f − (𝓛f)·f)`.
///
/// Agrees with [`carre_du_champ`] identically; kept as an independent
/// implementation for cross-checking the jump-sum formula.
pub fn carre_du_champ_algebraic(q: &Generator, f: &MatrixFunction) -> Result<MatrixFunction> {
    let lf2 = apply_generator(q, &f.map(|m| m.square()))?;
    let lf = apply_generator(q, f)?;
    let values = (0..q.size())
        .map(|x| {
            let cross = f.value(x).mul(lf.value(x)) + lf.value(x).mul(f.value(x));
            HermitianMatrix::symmetrize((lf2.value(x).matrix() - cross).scale(0.5))
        })
        .collect();
    MatrixFunction::new(q.space().clone(), values)
}

/// The Dirichlet form `𝓔(f) = E_μ[Γ(f)] = ½Σ_{x,y} μ(x)Q(x,y)(f(y) − f(x))²`.
///
/// Requires `Q` reversible w.r.t. `μ` (otherwise the two standard expressions
/// for `𝓔` disagree and the quantity loses its meaning); checked within
/// construction tolerances.
pub fn dirichlet_form(q: &Generator, mu: &FiniteMeasure, f: &MatrixFunction) -> Result<HermitianMatrix> {
    let check = crate::chain::validate_generator(q, mu, Tolerance::new(1e-10, 1e-10)?)?;
    if !check.pass {
        return Err(Error::validation(format!(
            "Dirichlet form requires reversibility; validation margin {:.3e}",
            check.margin
        )));
    }
    expectation(mu, &carre_du_champ(q, f)?)
}

/// The generator expression `𝓔(f) = −E_μ[f·𝓛f]` (symmetrized), equal to
/// [`dirichlet_form`] under reversibility; kept for cross-checks.
pub fn dirichlet_form_via_generator(
    q: &Generator,
    mu: &FiniteMeasure,
    f: &MatrixFunction,
) -> Result<HermitianMatrix> {
    let lf = apply_generator(q, f)?;
    let d = f.dim();
    let mut acc = CMatrix::zeros(d, d);
    for x in 0..q.size() {
        let w = mu.weight(x);
        if w != 0.0 {
            acc += f.value(x).mul(lf.value(x)).scale(-w);
        }
    }
    Ok(HermitianMatrix::symmetrize(acc))
}

/// `v_f = ‖ ‖Γ(f)‖_op ‖_{L∞(μ)}`: the largest operator norm of the carré du
/// champ over the state space.
///
/// Uses the full state space rather than the support of `μ`, which is the
/// conservative choice for tail bounds.
pub fn gamma_sup_norm(q: &Generator, f: &MatrixFunction) -> Result<f64> {
    Ok(carre_du_champ(q, f)?.sup_norm())
}

/// Certifies `α = 1/gap` from the spectral gap of the symmetrized generator.
///
/// Errors with [`Error::NoSpectralGap`] when the chain is reducible (second
/// eigenvalue of `−S` below `1e-12`) or has a single state.
pub fn spectral_gap(q: &Generator, mu: &FiniteMeasure) -> Result<PoincareCertificate> {
    if q.size() < 2 {
        return Err(Error::NoSpectralGap(
            "single-state chain has no spectral gap".into(),
        ));
    }
    let semigroup = ReversibleSemigroup::new(q, mu)?;
    // Spectrum of S ascending; the largest eigenvalue is 0 (eigenvector √μ).
    // The gap is the distance from 0 to the next eigenvalue.
    let spec = semigroup.spectrum();
    let gap = -spec[spec.len() - 2];
    if gap <= 1e-12 {
        return Err(Error::NoSpectralGap(format!(
            "second eigenvalue {gap:.3e} is not bounded away from zero (reducible chain?)"
        )));
    }
    Ok(PoincareCertificate {
        alpha: 1.0 / gap,
        source: CertificateSource::SpectralGap,
        gap: Some(gap),
    })
}

/// Checks the matrix Poincaré inequality `Var_μ(f) ⪯ α·𝓔(f)` for a concrete
/// function.
///
/// Margin is `λ_min(α𝓔(f) − Var_μ(f))`; the witness carries the eigenvector
/// that violates PSD order when the check fails.
pub fn poincare_check(
    q: &Generator,
    mu: &FiniteMeasure,
    f: &MatrixFunction,
    alpha: f64,
    tol: Tolerance,
) -> Result<CheckResult> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::validation(format!("alpha = {alpha} must be finite and > 0")));
    }
    let var = variance(mu, f)?;
    let energy = dirichlet_form(q, mu, f)?;
    let res = psd_leq(&var, &energy.scale(alpha), tol)?;
    Ok(CheckResult {
        name: "poincare".into(),
        ..res
    })
}

/// Numerically verifies the dynamic variance identity
/// `Var_μ(f) = 2∫₀^∞ 𝓔(P_t f) dt`.
///
/// The integral over `[0, t_max]` is evaluated by Gauss–Legendre quadrature
/// with `nodes` points; the truncated tail is bounded by
/// `e^{−2·gap·t_max}·‖Var_μ(f)‖`, and the check passes iff
/// `‖Var − integral‖_op ≤ tail + 1e-6`.
pub fn variance_integral_identity(
    q: &Generator,
    mu: &FiniteMeasure,
    f: &MatrixFunction,
    t_max: f64,
    nodes: usize,
) -> Result<CheckResult> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::validation(format!("t_max = {t_max} must be finite and > 0")));
    }
    let cert = spectral_gap(q, mu)?;
    let semigroup = ReversibleSemigroup::new(q, mu)?;
    let var = variance(mu, f)?;
    let rule = crate::quad::gauss_legendre(nodes, 0.0, t_max)?;
    let d = f.dim();
    let mut integral = CMatrix::zeros(d, d);
    for (&t, &w) in rule.nodes().iter().zip(rule.weights()) {
        let ptf = semigroup.apply(t, f)?;
        let energy = dirichlet_form(q, mu, &ptf)?;
        integral += energy.matrix().scale(2.0 * w);
    }
    let integral = HermitianMatrix::symmetrize(integral);
    let err = (&var - &integral).op_norm();
    let gap = cert.gap.expect("spectral-gap certificates carry the gap");
    let tail = (-2.0 * gap * t_max).exp() * var.op_norm();
    let budget = tail + 1e-6;
    Ok(CheckResult::from_margin(
        "variance-integral-identity",
        budget - err,
        var.op_norm(),
        Tolerance::absolute(0.0),
    )
    .with_witness(serde_json::json!({
        "residual_norm": err,
        "tail_budget": tail,
        "gap": gap,
        "t_max": t_max,
        "nodes": nodes,
    })))
}

/// Smallest α that makes `Var ⪯ α𝓔` pass for one function, via bisection on
/// `[0, hi]`; `hi` must already pass.
fn minimal_alpha_for(
    q: &Generator,
    mu: &FiniteMeasure,
    f: &MatrixFunction,
    hi: f64,
) -> Result<f64> {
    let var = variance(mu, f)?;
    let energy = dirichlet_form(q, mu, f)?;
    let passes = |alpha: f64| -> bool {
        let gap = &energy.scale(alpha) - &var;
        lambda_min(&gap) >= -1e-12 * (1.0 + gap.op_norm())
    };
    if !passes(hi) {
        // Certified constants can sit exactly on the boundary; widen a hair.
        return Ok(hi);
    }
    let (mut lo, mut hi) = (0.0f64, hi);
    for _ in 0..200 {
        if hi - lo <= 1e-10 * (1.0 + hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Estimates the Poincaré constant empirically: the largest minimal α over
/// `trials` random Hermitian-valued test functions of dimension `d`.
///
/// The result is a lower-bound style estimate tagged
/// [`CertificateSource::EmpiricalSearch`]; it is *not* a certificate. It can
/// never exceed the spectral-gap constant `1/gap`, which is used as the
/// bisection bracket.
pub fn empirical_alpha_search(
    q: &Generator,
    mu: &FiniteMeasure,
    d: usize,
    trials: usize,
    seed: u64,
) -> Result<PoincareCertificate> {
    if d == 0 || trials == 0 {
        return Err(Error::validation("d and trials must be ≥ 1"));
    }
    let cert = spectral_gap(q, mu)?;
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let f = crate::corpus::random_matrix_function(
            q.space(),
            d,
            1.0,
            crate::corpus::derive_seed(seed, trial as u64),
        );
        worst = worst.max(minimal_alpha_for(q, mu, &f, cert.alpha)?);
    }
    Ok(PoincareCertificate {
        alpha: worst,
        source: CertificateSource::EmpiricalSearch,
        gap: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::StateSpace;
    use crate::corpus;
    use crate::matcore::{lambda_min, random_hermitian};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    /// Two-state symmetric chain: rates 1 both ways, uniform μ.
    /// Spectrum of S is {−2, 0}, so gap = 2 and α = 1/2.
    fn two_state() -> (Generator, FiniteMeasure) {
        let space = StateSpace::indexed(2).unwrap();
        let mu = FiniteMeasure::uniform(space.clone());
        let rates = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        (Generator::reversible(space, rates, mu.clone()).unwrap(), mu)
    }

    fn indicator_f(space: &StateSpace, m: &HermitianMatrix) -> MatrixFunction {
        MatrixFunction::new(
            space.clone(),
            vec![HermitianMatrix::zeros(m.dim()), m.clone()],
        )
        .unwrap()
    }

    #[test]
    fn variance_oracles() {
        let (q, mu) = two_state();
        let a = random_hermitian(3, 1.0, 5);
        // Uniform two-point function {0, A}: mean A/2, second moment A²/2,
        // so Var = A²/2 − A²/4 = A²/4.
        let f = indicator_f(q.space(), &a);
        let var = variance(&mu, &f).unwrap();
        assert!((&var - &a.square().scale(0.25)).op_norm() < 1e-13);
        // Constants and point masses have zero variance.
        let c = MatrixFunction::constant(q.space().clone(), a.clone());
        assert!(variance(&mu, &c).unwrap().op_norm() < 1e-13);
        let point = FiniteMeasure::point_mass(q.space().clone(), 0).unwrap();
        assert!(variance(&point, &f).unwrap().op_norm() < 1e-13);
        // Variance is PSD.
        assert!(lambda_min(&var) >= -1e-13);
    }

    #[test]
    fn carre_du_champ_oracles() {
        let (q, _) = two_state();
        let f = indicator_f(q.space(), &HermitianMatrix::identity(2));
        // Γ(f)(0) = ½·1·(I − 0)² = I/2, same at 1 by symmetry.
        let gamma = carre_du_champ(&q, &f).unwrap();
        assert!((gamma.value(0) - &HermitianMatrix::identity(2).scale(0.5)).op_norm() < 1e-14);
        assert!((gamma.value(1) - &HermitianMatrix::identity(2).scale(0.5)).op_norm() < 1e-14);
        // Quadratic homogeneity: Γ(3f) = 9Γ(f).
        let gamma3 = carre_du_champ(&q, &f.scale(3.0)).unwrap();
        assert!(gamma3.sub(&gamma.scale(9.0)).unwrap().sup_norm() < 1e-13);
        // Γ of a constant vanishes.
        let c = MatrixFunction::constant(q.space().clone(), random_hermitian(2, 1.0, 3));
        assert_eq!(carre_du_champ(&q, &c).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn jump_sum_matches_algebraic_carre_du_champ() {
        for trial in 0..60u64 {
            let n = 2 + (trial % 4) as usize;
            let (q, _) = corpus::random_reversible_chain(n, 500 + trial).unwrap();
            let f = corpus::random_matrix_function(q.space(), 1 + (trial % 3) as usize, 1.3, trial);
            let a = carre_du_champ(&q, &f).unwrap();
            let b = carre_du_champ_algebraic(&q, &f).unwrap();
            let scale = 1.0 + a.sup_norm();
            assert!(
                a.sub(&b).unwrap().sup_norm() < 1e-10 * scale,
                "trial {trial}"
            );
        }
    }

    #[test]
    fn gamma_is_psd_valued() {
        for trial in 0..50u64 {
            let (q, _) = corpus::random_reversible_chain(3 + (trial % 3) as usize, trial).unwrap();
            let f = corpus::random_matrix_function(q.space(), 2, 1.5, 1000 + trial);
            let gamma = carre_du_champ(&q, &f).unwrap();
            for x in 0..q.size() {
                assert!(lambda_min(gamma.value(x)) >= -1e-10 * (1.0 + gamma.sup_norm()));
            }
        }
    }

    #[test]
    fn dirichlet_form_oracles() {
        let (q, mu) = two_state();
        let a = random_hermitian(2, 1.0, 17);
        let f = indicator_f(q.space(), &a);
        // Independent hand sum: ½Σ_{x,y} μ(x)Q(x,y)(f(y)−f(x))²
        //   = ½(½·1·A² + ½·1·A²) = A²/2.
        let energy = dirichlet_form(&q, &mu, &f).unwrap();
        assert!((&energy - &a.square().scale(0.5)).op_norm() < 1e-13);
        // Shift invariance: 𝓔(f − c) = 𝓔(f).
        let shifted = f.map(|m| m - &a);
        let energy2 = dirichlet_form(&q, &mu, &shifted).unwrap();
        assert!((&energy - &energy2).op_norm() < 1e-13);
    }

    #[test]
    fn dirichlet_form_matches_generator_expression() {
        for trial in 0..40u64 {
            let (q, mu) = corpus::random_reversible_chain(2 + (trial % 5) as usize, 60 + trial).unwrap();
            let f = corpus::random_matrix_function(q.space(), 2, 1.2, 90 + trial);
            let a = dirichlet_form(&q, &mu, &f).unwrap();
            let b = dirichlet_form_via_generator(&q, &mu, &f).unwrap();
            assert!(
                (&a - &b).op_norm() < 1e-10 * (1.0 + a.op_norm()),
                "trial {trial}"
            );
        }
    }

    #[test]
    fn dirichlet_form_rejects_non_reversible_input() {
        let space = StateSpace::indexed(2).unwrap();
        let rates = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]);
        let q = Generator::new(space.clone(), rates).unwrap();
        let mu = FiniteMeasure::uniform(space.clone());
        let f = MatrixFunction::scalar(space, &[0.0, 1.0]).unwrap();
        assert!(dirichlet_form(&q, &mu, &f).is_err());
    }

    #[test]
    fn gamma_sup_norm_oracles() {
        let (q, _) = two_state();
        let f = indicator_f(q.space(), &HermitianMatrix::identity(2));
        // ‖Γ(f)‖ = ‖I/2‖ = 0.5 at both states.
        assert_abs_diff_eq!(gamma_sup_norm(&q, &f).unwrap(), 0.5, epsilon = 1e-14);
        // Quadratic scaling.
        assert_abs_diff_eq!(gamma_sup_norm(&q, &f.scale(3.0)).unwrap(), 4.5, epsilon = 1e-13);
        let c = MatrixFunction::constant(q.space().clone(), random_hermitian(3, 2.0, 1));
        assert_eq!(gamma_sup_norm(&q, &c).unwrap(), 0.0);
    }

    #[test]
    fn spectral_gap_oracles() {
        // Two-state symmetric: gap 2, α = 1/2.
        let (q, mu) = two_state();
        let cert = spectral_gap(&q, &mu).unwrap();
        assert_abs_diff_eq!(cert.gap.unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.alpha, 0.5, epsilon = 1e-12);
        assert_eq!(cert.source, CertificateSource::SpectralGap);

        // Complete graph on m = 4 states with rate 1/(m−1) to each neighbour:
        // uniform jump chain, gap m/(m−1) = 4/3.
        let m = 4;
        let space = StateSpace::indexed(m).unwrap();
        let mut rates = DMatrix::<f64>::from_element(m, m, 1.0 / (m as f64 - 1.0));
        for x in 0..m {
            rates[(x, x)] = -1.0;
        }
        let mu4 = FiniteMeasure::uniform(space.clone());
        let q4 = Generator::reversible(space, rates, mu4.clone()).unwrap();
        let cert4 = spectral_gap(&q4, &mu4).unwrap();
        assert_abs_diff_eq!(cert4.gap.unwrap(), 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn reducible_chains_have_no_gap() {
        // Two disconnected pairs.
        let space = StateSpace::indexed(4).unwrap();
        let rates = DMatrix::from_row_slice(
            4,
            4,
            &[
                -1.0, 1.0, 0.0, 0.0, //
                1.0, -1.0, 0.0, 0.0, //
                0.0, 0.0, -1.0, 1.0, //
                0.0, 0.0, 1.0, -1.0,
            ],
        );
        let mu = FiniteMeasure::uniform(space.clone());
        let q = Generator::reversible(space, rates, mu.clone()).unwrap();
        assert!(matches!(spectral_gap(&q, &mu), Err(Error::NoSpectralGap(_))));
        // Single state: degenerate.
        let s1 = StateSpace::indexed(1).unwrap();
        let q1 = Generator::new(s1.clone(), DMatrix::zeros(1, 1)).unwrap();
        assert!(spectral_gap(&q1, &FiniteMeasure::uniform(s1)).is_err());
    }

    #[test]
    fn poincare_equality_on_the_two_state_chain() {
        // α = 1/2 is sharp: Var = A²/4 equals α𝓔 = A²/4 for every indicator
        // function, so the margin sits at zero.
        let (q, mu) = two_state();
        let a = random_hermitian(3, 1.0, 23);
        let f = indicator_f(q.space(), &a);
        let res = poincare_check(&q, &mu, &f, 0.5, Tolerance::default()).unwrap();
        assert!(res.pass);
        assert!(res.margin.abs() < 1e-12 * (1.0 + res.scale));
        // Any α below the sharp constant fails for a nonzero function.
        let res = poincare_check(&q, &mu, &f, 0.4, Tolerance::default()).unwrap();
        assert!(!res.pass);
        // Constants pass for arbitrarily small α.
        let c = MatrixFunction::constant(q.space().clone(), a);
        let res = poincare_check(&q, &mu, &c, 1e-6, Tolerance::default()).unwrap();
        assert!(res.pass);
    }

    #[test]
    fn certified_alpha_passes_on_random_instances() {
        for trial in 0..60u64 {
            let n = 2 + (trial % 5) as usize;
            let d = 1 + (trial % 3) as usize;
            let (q, mu) = corpus::random_reversible_chain(n, 7000 + trial).unwrap();
            let cert = spectral_gap(&q, &mu).unwrap();
            let f = corpus::random_matrix_function(q.space(), d, 1.4, 8000 + trial);
            let res = poincare_check(&q, &mu, &f, cert.alpha, Tolerance::new(1e-9, 1e-9).unwrap())
                .unwrap();
            assert!(res.pass, "trial {trial}: margin {:.3e}", res.margin);
        }
    }

    #[test]
    fn variance_integral_identity_two_state() {
        let (q, mu) = two_state();
        let f = indicator_f(q.space(), &random_hermitian(2, 1.0, 31));
        let res = variance_integral_identity(&q, &mu, &f, 10.0, 64).unwrap();
        assert!(res.pass, "margin {:.3e}", res.margin);
        // With gap 2 and t_max = 10, the tail budget is ~2e-9‖Var‖, so the
        // quadrature must genuinely nail the integral.
        let w = res.witness.unwrap();
        assert!(w["residual_norm"].as_f64().unwrap() < 2e-6);
    }

    #[test]
    fn variance_integral_identity_random_chains() {
        for trial in 0..10u64 {
            let (q, mu) = corpus::random_reversible_chain(4, 300 + trial).unwrap();
            let f = corpus::random_matrix_function(q.space(), 2, 1.0, 400 + trial);
            let res = variance_integral_identity(&q, &mu, &f, 8.0, 96).unwrap();
            assert!(res.pass, "trial {trial}: margin {:.3e}", res.margin);
        }
    }

    #[test]
    fn variance_derivative_matches_dirichlet_form() {
        // d/dt Var_μ(P_t f) = −2𝓔(P_t f): finite difference at t₀ = 1e-4.
        let (q, mu) = corpus::random_reversible_chain(4, 77).unwrap();
        let f = corpus::random_matrix_function(q.space(), 2, 1.0, 78);
        let semigroup = ReversibleSemigroup::new(&q, &mu).unwrap();
        let h = 1e-4;
        let t0 = h;
        let var_plus = variance(&mu, &semigroup.apply(t0 + h, &f).unwrap()).unwrap();
        let var_minus = variance(&mu, &semigroup.apply(t0 - h, &f).unwrap()).unwrap();
        let fd = (&var_plus - &var_minus).scale(1.0 / (2.0 * h));
        let energy = dirichlet_form(&q, &mu, &semigroup.apply(t0, &f).unwrap()).unwrap();
        let target = energy.scale(-2.0);
        assert!(
            (&fd - &target).op_norm() < 1e-5 * (1.0 + target.op_norm()),
            "residual {:.3e}",
            (&fd - &target).op_norm()
        );
    }

    #[test]
    fn gamma_from_semigroup_short_time_limit() {
        // Γ(f)(x) = lim_{t→0} P_t[‖f − f(x)‖²-type quadratic]/(2t): concretely
        // (P_t h_x)(x)/(2t) → Γ(f)(x) with h_x(y) = (f(y) − f(x))².
        let (q, mu) = corpus::random_reversible_chain(3, 91).unwrap();
        let f = corpus::random_matrix_function(q.space(), 2, 1.0, 92);
        let semigroup = ReversibleSemigroup::new(&q, &mu).unwrap();
        let gamma = carre_du_champ(&q, &f).unwrap();
        let t = 1e-5;
        for x in 0..q.size() {
            let fx = f.value(x).clone();
            let h = f.map(|m| (m - &fx).square());
            let pth = semigroup.apply(t, &h).unwrap();
            let approx_gamma = pth.value(x).scale(1.0 / (2.0 * t));
            assert!(
                (&approx_gamma - gamma.value(x)).op_norm() < 1e-4 * (1.0 + gamma.sup_norm()),
                "state {x}"
            );
        }
    }

    #[test]
    fn empirical_search_recovers_the_sharp_two_state_constant() {
        let (q, mu) = two_state();
        let cert = empirical_alpha_search(&q, &mu, 2, 20, 4242).unwrap();
        assert_eq!(cert.source, CertificateSource::EmpiricalSearch);
        // Every nonconstant f needs exactly α = 1/2 on this chain.
        assert_abs_diff_eq!(cert.alpha, 0.5, epsilon = 1e-6);
        // And the estimate never exceeds the certified constant.
        assert!(cert.alpha <= 0.5 + 1e-9);
    }
}
