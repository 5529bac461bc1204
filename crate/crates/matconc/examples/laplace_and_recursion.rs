//! The exponential-moment route to matrix concentration: from a Poincaré
//! constant α and a carré-du-champ bound v = sup‖Γ(f)‖ to
//!
//!   E_μ Tr e^{δ(f−Ef)} ≤ 2d / (2 − αvδ²)   for δ ∈ (0, √(2/αv)),
//!
//! via a moment recursion in p, and then to the tail bound
//! d·exp(−t²/(2αv + t√(2αv))) by optimizing the Chernoff exponent.
//! Everything is evaluated exactly on a small reversible chain.
//!
//! ```sh
//! cargo run --example laplace_and_recursion
//! ```

use matconc::concentration::{
    centered, chernoff_delta, laplace_bound_check, laplace_delta_grid, recursion_step_check,
    TailBoundSpec,
};
use matconc::corpus::{random_matrix_function, random_reversible_chain};
use matconc::dirichlet::{gamma_sup_norm, spectral_gap};
use matconc::{Result, Tolerance};

fn main() -> Result<()> {
    let (q, mu) = random_reversible_chain(4, 5)?;
    let f = random_matrix_function(q.space(), 2, 0.6, 6);
    let cert = spectral_gap(&q, &mu)?;
    let v = gamma_sup_norm(&q, &f)?;
    println!("α = 1/gap = {:.6},  v = sup‖Γ(f)‖ = {:.6}", cert.alpha, v);

    // The Laplace bound on a 20-point exponent grid spanning the validity
    // range (0, √(2/(αv))); the witness records the tightest exponent.
    let tol = Tolerance::absolute(1e-8);
    let grid = laplace_delta_grid(cert.alpha, v, 20)?;
    let laplace = laplace_bound_check(&q, &mu, &f, cert.alpha, &grid, tol)?;
    println!(
        "{}: pass = {}, min(rhs − lhs) = {:+.3e}",
        laplace.name, laplace.pass, laplace.margin
    );
    println!("witness: {}", laplace.witness.as_ref().unwrap());

    // One recursion step at p = 1, 2, 4 on the centered observable. The
    // step needs αv_g < 1; if the raw observable is too large, rescale —
    // Γ is quadratic, so scaling g by c scales v_g by c².
    let mut g = centered(&mu, &f)?;
    let mut av = cert.alpha * gamma_sup_norm(&q, &g)?;
    if av >= 0.99 {
        let c = (0.5 / av).sqrt();
        g = g.scale(c);
        av *= c * c;
    }
    println!("\nαv_g = {av:.6} (< 1 required)");
    for p in [1usize, 2, 4] {
        let step = recursion_step_check(&q, &mu, &g, p, cert.alpha, tol)?;
        println!(
            "{} (p = {p}): pass = {}, rhs − lhs = {:+.3e}",
            step.name, step.pass, step.margin
        );
    }

    // Chernoff assembly: with δ(t) = t/(αv + t√(αv/2)), the raw Chernoff
    // bound e^{−δt}·2d/(2 − αvδ²) is what the Laplace bound gives, and the
    // closed-form profile d·exp(−t²/(2αv + t√(2αv))) = d·e^{−δt/2} is its
    // clean upper envelope (half the exponent absorbs the prefactor).
    let spec = TailBoundSpec::new(f.dim(), cert.alpha, v)?;
    println!(
        "\n{:>8}  {:>12}  {:>12}  {:>12}  {:>10}",
        "t", "closed form", "d·e^(−δt/2)", "chernoff", "δ(t)"
    );
    for t in [0.5, 1.0, 2.0, 4.0] {
        let delta = chernoff_delta(cert.alpha, v, t)?;
        let envelope = f.dim() as f64 * (-delta * t / 2.0).exp();
        let assembled =
            (-delta * t).exp() * 2.0 * f.dim() as f64 / (2.0 - cert.alpha * v * delta * delta);
        println!(
            "{t:>8.2}  {:>12.6}  {envelope:>12.6}  {assembled:>12.6}  {delta:>10.6}",
            spec.bound(t)?
        );
    }

    Ok(())
}
