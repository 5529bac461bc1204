//! Tour of the Hermitian building blocks: spectral functions, the PSD
//! order, and the two independent matrix exponentials.
//!
//! ```sh
//! cargo run --example spectral_calculus
//! ```

use matconc::matcore::{
    expm_taylor, herm_exp, herm_fn, lambda_max, lambda_min, psd_leq, psd_power, random_hermitian,
    random_psd, spectral,
};
use matconc::{HermitianMatrix, Result, Tolerance};

fn main() -> Result<()> {
    // A 3×3 complex Hermitian matrix with entries of size ~1.
    let a = random_hermitian(3, 1.0, 42);
    let rounded: Vec<f64> = spectral(&a)
        .eigenvalues()
        .iter()
        .map(|x| (x * 1e6).round() / 1e6)
        .collect();
    println!("spectrum of A: {rounded:?}");
    println!("‖A‖ = {:.6}, λ_min = {:.6}", a.op_norm(), lambda_min(&a));

    // Spectral calculus: any scalar map lifts through the eigendecomposition.
    let cosh_a = herm_fn(&a, f64::cosh)?;
    let exp_a = herm_exp(&a)?;
    let exp_minus_a = herm_exp(&(-&a))?;
    // cosh(A) = (e^A + e^{−A})/2, entrywise to machine precision.
    let reconstructed = (&exp_a + &exp_minus_a).scale(0.5);
    println!(
        "‖cosh(A) − (e^A + e^(−A))/2‖ = {:.3e}",
        (&cosh_a - &reconstructed).op_norm()
    );

    // The Taylor exponential is a fully independent implementation
    // (scaling-and-squaring on the raw complex matrix) used as an oracle.
    let taylor = expm_taylor(a.matrix());
    let spectral = exp_a.matrix();
    let diff = (taylor - spectral).norm();
    println!("spectral vs Taylor exponential: ‖Δ‖_F = {diff:.3e}");

    // PSD order: A ⪯ B iff B − A has no negative eigenvalue. A Loewner
    // comparison that holds: X ⪯ X + P for PSD P.
    let p = random_psd(3, 0.5, 7);
    let res = psd_leq(&a, &(&a + &p), Tolerance::default())?;
    println!(
        "A ⪯ A + P: pass = {}, margin (λ_min of the gap) = {:.3e}",
        res.pass, res.margin
    );

    // And one that fails, with the violating direction in the witness.
    let res = psd_leq(&(&a + &p), &a, Tolerance::default())?;
    println!("A + P ⪯ A: pass = {}, margin = {:.3e}", res.pass, res.margin);

    // Fractional powers clamp at zero, so they are defined for any PSD input.
    let root = psd_power(&p, 0.5)?;
    println!(
        "‖(P^(1/2))² − P‖ = {:.3e}",
        (&root.square() - &p).op_norm()
    );

    // λ_max is the top of the spectrum; t·I ⪰ A exactly from t = λ_max(A).
    let top = lambda_max(&a);
    let shifted = &HermitianMatrix::identity(3).scale(top) - &a;
    println!("λ_min(λ_max·I − A) = {:.3e} (≈ 0)", lambda_min(&shifted));
    Ok(())
}
