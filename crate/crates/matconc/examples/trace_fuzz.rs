//! The four trace inequalities behind the exponential-moment machinery,
//! each checked on a hand-built instance, then hammered by the seeded
//! fuzzer. The finale flips the ½ factor in the mean-value inequality to
//! the (false) ¼ and watches the harness catch it and shrink the
//! counterexample to a small, replayable instance.
//!
//! ```sh
//! cargo run --example trace_fuzz
//! ```

use nalgebra::DMatrix;

use matconc::chain::{FiniteMeasure, Generator, MatrixFunction, StateSpace};
use matconc::matcore::{random_hermitian, random_psd};
use matconc::traceineq::{
    check_contraction_power, check_dirichlet_laplace, check_mean_value_trace,
    check_weighted_convexity, fuzz_campaign, FuzzConfig, InequalityId, MatrixDistribution,
};
use matconc::{Result, Tolerance};

fn main() -> Result<()> {
    let tol = Tolerance::new(1e-8, 1e-8)?;

    // 1. Mean-value trace: Tr E[(e^A − e^B)²] bounded by the average of the
    //    endpoint-weighted second differences, with the ½ front factor.
    let a = random_hermitian(3, 0.8, 1);
    let b = MatrixDistribution::new(vec![
        (0.6, random_hermitian(3, 0.8, 2)),
        (0.4, random_hermitian(3, 0.8, 3)),
    ])?;
    let mv = check_mean_value_trace(&a, &b, 2, tol)?;
    println!("{}: pass = {}, margin = {:+.3e}", mv.name, mv.pass, mv.margin);

    // 2. Contraction power: E[KZK] ⪯ (E[KZ^pK])^{1/p} in the PSD order for
    //    ‖E[K²]‖ ≤ 1 and PSD Z (a matrix Jensen inequality).
    let joint: Vec<(f64, _, _)> = vec![
        (0.5, random_hermitian(3, 0.5, 4), random_psd(3, 1.0, 5)),
        (0.5, random_hermitian(3, 0.5, 6), random_psd(3, 1.0, 7)),
    ];
    let cp = check_contraction_power(&joint, 3.0, tol)?;
    println!("{}: pass = {}, margin = {:+.3e}", cp.name, cp.pass, cp.margin);

    // 3. Weighted convexity of the trace power:
    //    Tr(A+B)^p ≤ (γ/(γ−1))^{p−1}·TrA^p + γ^{p−1}·TrB^p for PSD A, B.
    let wc = check_weighted_convexity(
        &random_psd(3, 1.0, 8),
        &random_psd(3, 0.5, 9),
        3.0,
        2,
        tol,
    )?;
    println!("{}: pass = {}, margin = {:+.3e}", wc.name, wc.pass, wc.margin);

    // 4. Dirichlet–Laplace: Tr[(𝓔(e^g))^p] ≤ v_g^p · Tr E[e^{2pg}] on a
    //    two-state chain where both sides reduce to scalars.
    let space = StateSpace::new(vec!["0".into(), "1".into()])?;
    let mu = FiniteMeasure::new(space.clone(), vec![0.5, 0.5])?;
    let rates = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
    let q = Generator::reversible(space.clone(), rates, mu.clone())?;
    let g = MatrixFunction::new(
        space,
        vec![random_hermitian(2, 0.4, 10), random_hermitian(2, 0.4, 11)],
    )?;
    let dl = check_dirichlet_laplace(&q, &mu, &g, 2, tol)?;
    println!("{}: pass = {}, margin = {:+.3e}", dl.name, dl.pass, dl.margin);

    // --- Fuzz all four, 250 seeded trials each ----------------------------
    let config = FuzzConfig {
        trials: 250,
        ..FuzzConfig::default()
    };
    println!("\nfuzzing {} inequalities × {} trials:", config.inequalities.len(), config.trials);
    for report in fuzz_campaign(&config, 2024)? {
        println!(
            "  {:?}: violations = {}, worst margin = {:+.3e}",
            report.inequality,
            report.violations.len(),
            report.worst_margin
        );
    }

    // --- Self-test: inject a false front factor ---------------------------
    // The ½ in the mean-value inequality is sharp; ¼ is wrong and the
    // fuzzer finds it quickly, then shrinks the witness (fewer atoms,
    // smaller dimension, smaller norms) while keeping it violating.
    let buggy = FuzzConfig {
        inequalities: vec![InequalityId::MeanValueTrace],
        trials: 250,
        inject_mean_value_bug: true,
        ..FuzzConfig::default()
    };
    let report = &fuzz_campaign(&buggy, 2024)?[0];
    println!(
        "\nwith the ¼ factor: {} violations, worst margin = {:+.3e}",
        report.violations.len(),
        report.worst_margin
    );
    let worst = report
        .violations
        .iter()
        .min_by(|a, b| a.shrunk_margin.total_cmp(&b.shrunk_margin))
        .expect("the bug is real, so violations exist");
    println!(
        "sample shrunk counterexample (seed {}, margin {:+.3e} → {:+.3e}):",
        worst.seed, worst.margin, worst.shrunk_margin
    );
    println!("{}", serde_json::to_string_pretty(&worst.shrunk).unwrap());

    Ok(())
}
