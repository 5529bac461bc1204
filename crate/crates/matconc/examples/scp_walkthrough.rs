//! Walkthrough of the stochastic covering property (SCP) machinery on
//! k-homogeneous measures over {0,1}ⁿ: the exhaustive coupling scan, the
//! explicit reversible generator it licenses, the α = 2k matrix Poincaré
//! inequality, and the tail bound for Lipschitz observables. Ends with a
//! measure that *fails* the SCP and the Hall-condition cut that proves it.
//!
//! ```sh
//! cargo run --example scp_walkthrough
//! ```

use matconc::concentration::{cube_lipschitz_tail_spec, dominance_report, exact_tail};
use matconc::corpus::random_lipschitz_cube_function;
use matconc::scp::{
    builtin_measure, config_label, lipschitz_constant, normalization_check, scp_check,
    scp_generator, scp_poincare_check, CubeMeasure, CubeMeasureFamily,
};
use matconc::{Result, Tolerance};

fn main() -> Result<()> {
    // --- The smallest interesting slice: n = 2, k = 1 --------------------
    // Uniform over {10, 01}. The SCP coupling collapses to rates
    // Q(10, 01) = Q(01, 10) = 1/4.
    let tiny = builtin_measure(CubeMeasureFamily::UniformSlice, 2, 1, None)?;
    let scan = scp_check(&tiny)?;
    println!("(n,k) = (2,1): {} pass = {}", scan.name, scan.pass);
    let q = scp_generator(&tiny)?;
    for x in 0..2 {
        for y in 0..2 {
            if x != y {
                let (_, masks) = tiny.to_finite_measure();
                println!(
                    "Q({}, {}) = {}",
                    config_label(2, masks[x]),
                    config_label(2, masks[y]),
                    q.rate(x, y)
                );
            }
        }
    }

    // --- A conditioned-Bernoulli slice: n = 5, k = 2 ----------------------
    // Independent Bernoulli(p_i) conditioned on exactly two successes.
    let p = [0.2, 0.35, 0.5, 0.65, 0.8];
    let mu = builtin_measure(CubeMeasureFamily::ConditionedBernoulli, 5, 2, Some(&p))?;
    let scan = scp_check(&mu)?;
    println!(
        "\n(n,k) = (5,2) Bernoulli: {} pass = {}, worst coupling mass − 1 = {:+.3e}",
        scan.name, scan.pass, scan.margin
    );

    // The generator is reversible by construction; the normalization check
    // confirms every exit rate is ≤ (n−1)/n.
    let norm = normalization_check(&mu)?;
    println!("{}: pass = {}, (n−1)/n − max exit = {:+.3e}", norm.name, norm.pass, norm.margin);

    // Matrix Poincaré with α = 2k on a random Lipschitz observable.
    let f = random_lipschitz_cube_function(&mu, 2, 77);
    let poincare = scp_poincare_check(&mu, &f, Tolerance::absolute(1e-9))?;
    println!("{}: pass = {}, λ_min(2k·𝓔 − Var) = {:+.3e}", poincare.name, poincare.pass, poincare.margin);

    // Tail bound for 1-Lipschitz functions: α = 2k, v = 2. Normalize f by
    // its Lipschitz constant (‖f(x) − f(y)‖ ≤ L·(Hamming/2)) and compare
    // the bound to the exact tail of λ_max(f − Ef).
    let lip = lipschitz_constant(&mu, &f)?;
    let unit = f.scale(1.0 / lip);
    println!("Lipschitz constant of f: {lip:.6} (rescaled to 1)");
    let spec = cube_lipschitz_tail_spec(unit.dim(), mu.k())?;
    let t_max = 3.0 * (spec.alpha * spec.v_gamma).sqrt();
    let grid: Vec<f64> = (0..80).map(|i| t_max * i as f64 / 79.0).collect();
    let (fin, _) = mu.to_finite_measure();
    let estimate = exact_tail(&fin, &unit, &grid)?;
    let verdict = dominance_report(&spec, &estimate)?;
    println!("{}: pass = {}, min(bound − tail) = {:+.3e}", verdict.name, verdict.pass, verdict.margin);

    // --- A measure without the SCP ----------------------------------------
    // Supported on {1100, 0011} only: flipping one coordinate of 1100 can
    // never reach 0011, so the Hall condition fails and the scan returns
    // the deficient cut as a witness.
    let bad = CubeMeasure::new(4, 2, [(0b0011u32, 0.5), (0b1100u32, 0.5)])?;
    let scan = scp_check(&bad)?;
    println!(
        "\nsupport {{1100, 0011}}: {} pass = {}",
        scan.name, scan.pass
    );
    println!("witness: {}", scan.witness.unwrap());
    match scp_generator(&bad) {
        Err(e) => println!("scp_generator refuses: {e}"),
        Ok(_) => unreachable!("the scan above already failed"),
    }

    Ok(())
}
