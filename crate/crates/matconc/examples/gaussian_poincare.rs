//! Matrix polynomials of a standard Gaussian vector: the Ornstein–Uhlenbeck
//! carré du champ Γ(f) = Σᵢ(∂ᵢf)², the Gaussian matrix Poincaré inequality
//! Var(f) ⪯ E[Γ(f)] with constant 1, and the sub-exponential tail of
//! λ_max(f − Ef) for a linear f, estimated by Monte Carlo and compared to
//! the closed-form bound.
//!
//! All Gaussian integrals of polynomials are computed *exactly* by
//! Gauss–Hermite quadrature of sufficient order; the moment table against
//! E[Zᵏ] = 0, 1, 0, 3, 0, 15 is the self-test for that machinery.
//!
//! ```sh
//! cargo run --example gaussian_poincare
//! ```

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use matconc::concentration::{dominance_report, gaussian_tail_spec, mc_tail};
use matconc::gaussian::{
    gauss_expect, gaussian_poincare_check, gaussian_vf, ou_gamma, MatrixPolynomial,
    QuadratureRule,
};
use matconc::matcore::{lambda_max, random_hermitian};
use matconc::{Result, Tolerance};

fn main() -> Result<()> {
    // Quadrature self-test: a rule of order m integrates polynomials of
    // degree ≤ 2m−1 exactly, so its ~N(0,1) moments must match
    // 1, 0, 1, 0, 3, 0, 15 to machine precision.
    let rule = QuadratureRule::new(8)?;
    let normal_moments = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0];
    let worst = (0..7)
        .map(|k| (rule.moment(k as u32) - normal_moments[k]).abs())
        .fold(0.0, f64::max);
    println!("max moment error through E[Z⁶]: {worst:.3e}");

    // A degree-2 polynomial in two variables with 2×2 Hermitian coefficients:
    // f(x) = A·x₁ + B·x₂ + C·x₁x₂.
    let a = random_hermitian(2, 0.8, 31);
    let b = random_hermitian(2, 0.8, 32);
    let c = random_hermitian(2, 0.4, 33);
    let f = MatrixPolynomial::new(
        2,
        2,
        [
            (vec![1, 0], a.clone()),
            (vec![0, 1], b.clone()),
            (vec![1, 1], c),
        ],
    )?;

    // Γ(f) = (∂₁f)² + (∂₂f)² has degree 2·(deg f − 1) = 2; the Poincaré
    // check needs the rule to integrate deg(f²) = 4 exactly.
    let rule = QuadratureRule::new(QuadratureRule::required_order(2 * f.degree()))?;
    let check = gaussian_poincare_check(&f, &rule, Tolerance::absolute(1e-9))?;
    println!(
        "{} (deg-2 f): pass = {}, λ_min(E[Γ] − Var) = {:+.3e}",
        check.name, check.pass, check.margin
    );

    // For the tail we switch to the *linear* part, where Γ = A² + B² is
    // constant, so v_f = ‖A² + B²‖ is exact with no bounding box.
    let linear = MatrixPolynomial::linear(&[a, b])?;
    let (v_f, exact) = gaussian_vf(&linear, None, 2)?;
    println!("linear f: v_f = ‖Γ‖ = {v_f:.6} (exact = {exact})");
    let gamma = ou_gamma(&linear)?;
    println!("Γ(f) degree = {} (constant)", gamma.degree());

    // Monte Carlo estimate of P(λ_max(f − Ef) ≥ t) with 200 000 samples.
    // The statistic is re-sampled from the same seed-deterministic stream,
    // so reruns reproduce the exact same curve.
    let mean = gauss_expect(&linear, &rule)?;
    let spec = gaussian_tail_spec(linear.dim(), v_f)?;
    let t_max = 3.0 * (spec.alpha * spec.v_gamma).sqrt();
    let grid: Vec<f64> = (0..60).map(|i| t_max * i as f64 / 59.0).collect();
    let estimate = mc_tail(
        |rng: &mut ChaCha8Rng| {
            let x: Vec<f64> = (0..2).map(|_| StandardNormal.sample(rng)).collect();
            let value = linear.eval(&x).expect("evaluation on sampled point");
            lambda_max(&(&value - &mean))
        },
        &grid,
        200_000,
        99,
    )?;

    // Dominance with a 3-standard-error band on the Monte Carlo side.
    let verdict = dominance_report(&spec, &estimate)?;
    println!(
        "{}: pass = {}, min(bound − (p̂ − 3·se)) = {:+.3e}",
        verdict.name, verdict.pass, verdict.margin
    );
    println!("{:>8}  {:>10}  {:>10}  {:>10}", "t", "bound", "p̂", "3·se");
    for &i in &[0usize, 14, 29, 44, 59] {
        println!(
            "{:>8.4}  {:>10.6}  {:>10.6}  {:>10.6}",
            grid[i],
            spec.bound(grid[i])?.min(1.0),
            estimate.probabilities[i],
            3.0 * estimate.half_widths[i]
        );
    }

    Ok(())
}
