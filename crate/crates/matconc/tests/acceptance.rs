//! End-to-end acceptance suite: ten high-level criteria, each printing one
//! `acceptance NN name: PASS/FAIL` line (visible with `--nocapture`) and
//! asserting with its tolerances pinned in code. Every criterion is fully
//! seeded; reruns are bit-for-bit repeatable.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use matconc::chain::{
    check_semigroup_properties, semigroup_apply, FiniteMeasure, Generator, StateSpace,
};
use matconc::concentration::{
    centered, cube_lipschitz_tail_spec, dominance_report, exact_tail, gaussian_tail_spec,
    laplace_bound_check, laplace_delta_grid, mc_tail, product_tail_spec, recursion_step_check,
};
use matconc::corpus::{
    derive_seed, random_lipschitz_cube_function, random_matrix_function, random_polynomial,
    random_product_space, random_reversible_chain,
};
use matconc::dirichlet::{gamma_sup_norm, poincare_check, spectral_gap};
use matconc::gaussian::{
    gauss_expect, gaussian_poincare_check, gaussian_vf, MatrixPolynomial, QuadratureRule,
};
use matconc::matcore::{lambda_max, random_hermitian};
use matconc::product::{efron_stein_check, product_generator, product_semigroup_closed_form, product_vf};
use matconc::scp::{
    builtin_measure, config_label, lipschitz_constant, normalization_check, scp_generator,
    CubeMeasure, CubeMeasureFamily,
};
use matconc::traceineq::{fuzz_campaign, FuzzConfig, InequalityId};
use matconc::Tolerance;

/// Prints the criterion's verdict line and fails the test with the collected
/// problems (including a blown runtime budget, when one applies).
fn verdict(index: usize, name: &str, started: Instant, budget: Option<Duration>, mut failures: Vec<String>) {
    let elapsed = started.elapsed();
    if let Some(budget) = budget {
        if elapsed > budget {
            failures.push(format!(
                "runtime {:.2}s exceeded the {:.0}s budget",
                elapsed.as_secs_f64(),
                budget.as_secs_f64()
            ));
        }
    }
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!(
        "acceptance {index:02} {name}: {status} ({:.2}s)",
        elapsed.as_secs_f64()
    );
    assert!(
        failures.is_empty(),
        "criterion {index:02} ({name}) failed:\n  {}",
        failures.join("\n  ")
    );
}

/// 1. On the uniform two-state chain with symmetric rate 1, the Poincaré
/// inequality is an identity: Var = α𝓔 with α = 0.5, |λ_min| ≤ 1e-10 for
/// 100 random observables of dimension ≤ 4.
#[test]
fn criterion_01_two_state_exactness() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let space = StateSpace::new(vec!["0".into(), "1".into()]).unwrap();
    let mu = FiniteMeasure::uniform(space.clone());
    let rates = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
    let q = Generator::reversible(space.clone(), rates, mu.clone()).unwrap();

    let cert = spectral_gap(&q, &mu).unwrap();
    if (cert.alpha - 0.5).abs() > 1e-12 {
        failures.push(format!("certified α = {} (expected 0.5)", cert.alpha));
    }
    for trial in 0..100u64 {
        let d = 1 + (trial as usize % 4);
        let f = random_matrix_function(&space, d, 1.0, derive_seed(101, trial));
        let res = poincare_check(&q, &mu, &f, cert.alpha, Tolerance::absolute(1e-10)).unwrap();
        if res.margin.abs() > 1e-10 {
            failures.push(format!(
                "trial {trial} (d = {d}): |λ_min(α𝓔 − Var)| = {:.3e} > 1e-10",
                res.margin.abs()
            ));
        }
    }
    verdict(1, "two-state exactness", started, Some(Duration::from_secs(1)), failures);
}

/// 2. 500 fuzzed product instances (≤ 3 factors of ≤ 3 states, d ≤ 3):
/// Efron–Stein margin ≥ −1e-9 and the closed-form semigroup matches the
/// matrix-exponential semigroup within 1e-8 at t ∈ {0.1, 1, 3}.
#[test]
fn criterion_02_product_efron_stein_and_closed_form() {
    let started = Instant::now();
    let mut failures = Vec::new();

    for i in 0..500u64 {
        let n = 1 + (i as usize % 3);
        let space = random_product_space(n, 3, derive_seed(201, i)).unwrap();
        let d = 1 + (i as usize % 3);
        let f = random_matrix_function(space.joint_space(), d, 1.0, derive_seed(202, i));

        let es = efron_stein_check(&space, &f, Tolerance::absolute(1e-9)).unwrap();
        if es.margin < -1e-9 {
            failures.push(format!("instance {i}: λ_min(𝓔 − Var) = {:.3e}", es.margin));
        }

        let q = product_generator(&space).unwrap();
        for t in [0.1, 1.0, 3.0] {
            let closed = product_semigroup_closed_form(&space, t, &f).unwrap();
            let generic = semigroup_apply(&q, t, &f).unwrap();
            let diff = closed.sub(&generic).unwrap().sup_norm();
            if diff > 1e-8 {
                failures.push(format!(
                    "instance {i}, t = {t}: closed form deviates by {diff:.3e}"
                ));
            }
        }
    }
    verdict(2, "product Efron–Stein + closed-form semigroup", started, Some(Duration::from_secs(30)), failures);
}

/// 3. 200 fuzzed matrix polynomials (n ≤ 3, deg ≤ 3, d ≤ 3) satisfy the
/// Gaussian Poincaré inequality with margin ≥ −1e-8; Gauss–Hermite moments
/// match the standard normal moments through order 6 to 1e-10.
#[test]
fn criterion_03_gaussian_polynomials_and_moments() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let normal_moments = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0];
    for order in [4usize, 6, 8, 12] {
        let rule = QuadratureRule::new(order).unwrap();
        for (k, &expected) in normal_moments.iter().enumerate() {
            let got = rule.moment(k as u32);
            if (got - expected).abs() > 1e-10 {
                failures.push(format!(
                    "order-{order} rule: E[Z^{k}] = {got:.12e} (expected {expected})"
                ));
            }
        }
    }

    for i in 0..200u64 {
        let n = 1 + (i as usize % 3);
        let deg = 1 + (i % 3) as u32;
        let d = 1 + (i as usize % 3);
        let f = random_polynomial(n, deg, d, 0.7, derive_seed(301, i));
        let rule = QuadratureRule::new(QuadratureRule::required_order(2 * f.degree())).unwrap();
        let res = gaussian_poincare_check(&f, &rule, Tolerance::absolute(1e-8)).unwrap();
        if res.margin < -1e-8 {
            failures.push(format!(
                "polynomial {i} (n = {n}, deg = {deg}, d = {d}): margin {:.3e}",
                res.margin
            ));
        }
    }
    verdict(3, "Gaussian polynomial Poincaré + moments", started, Some(Duration::from_secs(30)), failures);
}

/// 4. SCP generators for uniform and conditioned-Bernoulli slices with
/// (n,k) ∈ {(4,2),(5,2),(6,3)}: detailed-balance residual ≤ 1e-10, max exit
/// rate ≤ (n−1)/n + 1e-10, Poincaré margin ≥ −1e-9 over 200 random f each,
/// and the hand-derived rate Q(10, 01) = 0.25 for (2,1) uniform.
#[test]
fn criterion_04_scp_generator_construction() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let mut measures: Vec<(String, CubeMeasure)> = Vec::new();
    for (pair_idx, &(n, k)) in [(4usize, 2usize), (5, 2), (6, 3)].iter().enumerate() {
        measures.push((
            format!("uniform({n},{k})"),
            builtin_measure(CubeMeasureFamily::UniformSlice, n, k, None).unwrap(),
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(401, pair_idx as u64));
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..0.8)).collect();
        measures.push((
            format!("bernoulli({n},{k})"),
            builtin_measure(CubeMeasureFamily::ConditionedBernoulli, n, k, Some(&p)).unwrap(),
        ));
    }

    for (m_idx, (label, mu)) in measures.iter().enumerate() {
        let q = match scp_generator(mu) {
            Ok(q) => q,
            Err(e) => {
                failures.push(format!("{label}: generator construction failed: {e}"));
                continue;
            }
        };
        let (fin, _) = mu.to_finite_measure();

        let mut residual = 0.0f64;
        for x in 0..q.size() {
            for y in 0..q.size() {
                residual =
                    residual.max((fin.weight(x) * q.rate(x, y) - fin.weight(y) * q.rate(y, x)).abs());
            }
        }
        if residual > 1e-10 {
            failures.push(format!("{label}: detailed-balance residual {residual:.3e}"));
        }

        let norm = normalization_check(mu).unwrap();
        let witness = norm.witness.as_ref().unwrap();
        let max_exit = witness["max_exit_rate"].as_f64().unwrap();
        let sharper = (mu.n() as f64 - 1.0) / mu.n() as f64;
        if max_exit > sharper + 1e-10 {
            failures.push(format!(
                "{label}: max exit rate {max_exit:.12} exceeds (n−1)/n = {sharper:.12}"
            ));
        }

        let alpha = 2.0 * mu.k() as f64;
        for trial in 0..200u64 {
            let d = 1 + (trial as usize % 3);
            let f = random_matrix_function(
                fin.space(),
                d,
                1.0,
                derive_seed(402, (m_idx as u64) << 32 | trial),
            );
            let res = poincare_check(&q, &fin, &f, alpha, Tolerance::absolute(1e-9)).unwrap();
            if res.margin < -1e-9 {
                failures.push(format!(
                    "{label}, trial {trial}: λ_min(2k𝓔 − Var) = {:.3e}",
                    res.margin
                ));
            }
        }
    }

    let tiny = builtin_measure(CubeMeasureFamily::UniformSlice, 2, 1, None).unwrap();
    let q = scp_generator(&tiny).unwrap();
    let (_, masks) = tiny.to_finite_measure();
    let pos = |label: &str| {
        (0..masks.len())
            .find(|&i| config_label(2, masks[i]) == label)
            .unwrap()
    };
    let rate = q.rate(pos("10"), pos("01"));
    if (rate - 0.25).abs() > 1e-12 {
        failures.push(format!("Q(10, 01) = {rate:.15} (expected 0.25)"));
    }

    verdict(4, "SCP generator construction", started, Some(Duration::from_secs(300)), failures);
}

/// 5. Exact enumerated tails never exceed the clipped closed-form bounds on
/// product corpora and on 1-Lipschitz SCP corpora (Lipschitz hypothesis
/// verified by pair scan), over 100 grid points in [0, 3√(αv)].
#[test]
fn criterion_05_tail_dominance() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let grid_for = |alpha: f64, v: f64| -> Vec<f64> {
        let t_max = 3.0 * (alpha * v).sqrt();
        (0..100).map(|i| t_max * i as f64 / 99.0).collect()
    };

    for i in 0..20u64 {
        let n = 1 + (i as usize % 3);
        let space = random_product_space(n, 3, derive_seed(501, i)).unwrap();
        let d = 1 + (i as usize % 3);
        let f = random_matrix_function(space.joint_space(), d, 1.0, derive_seed(502, i));
        let v_f = product_vf(&space, &f).unwrap();
        if v_f <= 0.0 {
            continue; // constant observable: nothing to check
        }
        let spec = product_tail_spec(d, v_f).unwrap();
        let grid = grid_for(spec.alpha, spec.v_gamma);
        let estimate = exact_tail(space.joint_measure(), &f, &grid).unwrap();
        let res = dominance_report(&spec, &estimate).unwrap();
        if res.margin < -1e-12 {
            failures.push(format!("product instance {i}: dominance margin {:.3e}", res.margin));
        }
    }

    for (pair_idx, &(n, k)) in [(4usize, 2usize), (5, 2), (6, 3)].iter().enumerate() {
        let mu = builtin_measure(CubeMeasureFamily::UniformSlice, n, k, None).unwrap();
        let (fin, _) = mu.to_finite_measure();
        for trial in 0..8u64 {
            let d = 1 + (trial as usize % 3);
            let f = random_lipschitz_cube_function(
                &mu,
                d,
                derive_seed(503, (pair_idx as u64) << 16 | trial),
            );
            let lip = lipschitz_constant(&mu, &f).unwrap();
            if lip <= 0.0 {
                continue;
            }
            let unit = f.scale(1.0 / lip);
            // The pair scan doubles as the hypothesis check after rescaling.
            let verified = lipschitz_constant(&mu, &unit).unwrap();
            if verified > 1.0 + 1e-9 {
                failures.push(format!(
                    "scp ({n},{k}) trial {trial}: rescaled Lipschitz constant {verified}"
                ));
                continue;
            }
            let spec = cube_lipschitz_tail_spec(d, k).unwrap();
            let grid = grid_for(spec.alpha, spec.v_gamma);
            let estimate = exact_tail(&fin, &unit, &grid).unwrap();
            let res = dominance_report(&spec, &estimate).unwrap();
            if res.margin < -1e-12 {
                failures.push(format!(
                    "scp ({n},{k}) trial {trial}: dominance margin {:.3e}",
                    res.margin
                ));
            }
        }
    }

    verdict(5, "tail dominance on exact corpora", started, None, failures);
}

/// 6. Monte Carlo tail for f = x₁A₁ + x₂A₂ (d = 2, ‖Aᵢ‖ ≤ 1, N = 10⁶):
/// the empirical tail minus three Wilson half-widths stays below the clipped
/// bound at every grid point, and the scalar tail P(Z ≥ 1) = Φ(−1) is
/// reproduced within three standard errors.
#[test]
fn criterion_06_gaussian_monte_carlo() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let a1 = {
        let raw = random_hermitian(2, 1.0, 601);
        raw.scale(1.0 / raw.op_norm())
    };
    let a2 = {
        let raw = random_hermitian(2, 1.0, 602);
        raw.scale(1.0 / raw.op_norm())
    };
    let linear = MatrixPolynomial::linear(&[a1, a2]).unwrap();
    let (v_f, exact) = gaussian_vf(&linear, None, 2).unwrap();
    if !exact {
        failures.push("Γ of a linear polynomial should be constant".into());
    }
    let rule = QuadratureRule::new(QuadratureRule::required_order(2)).unwrap();
    let mean = gauss_expect(&linear, &rule).unwrap();
    let spec = gaussian_tail_spec(2, v_f).unwrap();

    let t_max = 3.0 * (spec.alpha * spec.v_gamma).sqrt();
    let grid: Vec<f64> = (0..100).map(|i| t_max * i as f64 / 99.0).collect();
    let estimate = mc_tail(
        |rng: &mut ChaCha8Rng| {
            let x: Vec<f64> = (0..2).map(|_| StandardNormal.sample(rng)).collect();
            let value = linear.eval(&x).expect("evaluate linear polynomial");
            lambda_max(&(&value - &mean))
        },
        &grid,
        1_000_000,
        603,
    )
    .unwrap();
    let res = dominance_report(&spec, &estimate).unwrap();
    if res.margin < 0.0 {
        failures.push(format!(
            "matrix tail: min(bound − (p̂ − 3·hw)) = {:.3e}",
            res.margin
        ));
    }

    // Scalar sanity: P(Z ≥ 1) for a standard normal.
    let phi_minus_one: f64 = 0.15865525393145707;
    let scalar = mc_tail(
        |rng: &mut ChaCha8Rng| StandardNormal.sample(rng),
        &[1.0],
        1_000_000,
        604,
    )
    .unwrap();
    let p_hat = scalar.probabilities[0];
    let se = (phi_minus_one * (1.0 - phi_minus_one) / 1.0e6).sqrt();
    if (p_hat - phi_minus_one).abs() > 3.0 * se {
        failures.push(format!(
            "P(Z ≥ 1) estimate {p_hat:.6} deviates from {phi_minus_one:.6} by more than 3·se = {:.2e}",
            3.0 * se
        ));
    }

    verdict(6, "Gaussian Monte Carlo tail", started, Some(Duration::from_secs(120)), failures);
}

/// 7. The Laplace-transform bound holds on a 20-point exponent grid inside
/// (0, √(2/αv)) for 100 fuzzed chains with certified α = 1/gap, and the
/// moment-recursion step holds for p ∈ {1, 2, 4}; zero violations at
/// relative tolerance 1e-8.
#[test]
fn criterion_07_laplace_and_recursion() {
    let started = Instant::now();
    let mut failures = Vec::new();
    let tol = Tolerance::new(0.0, 1e-8).unwrap();

    for i in 0..100u64 {
        let n = 2 + (i as usize % 4);
        let (q, mu) = random_reversible_chain(n, derive_seed(701, i)).unwrap();
        let d = 1 + (i as usize % 3);
        let f = random_matrix_function(q.space(), d, 0.5, derive_seed(702, i));
        let cert = spectral_gap(&q, &mu).unwrap();
        let v = gamma_sup_norm(&q, &f).unwrap();
        if v <= 0.0 {
            continue;
        }

        let grid = laplace_delta_grid(cert.alpha, v, 20).unwrap();
        let laplace = laplace_bound_check(&q, &mu, &f, cert.alpha, &grid, tol).unwrap();
        if !laplace.pass {
            failures.push(format!(
                "chain {i}: Laplace bound violated, margin {:.3e} at scale {:.3e}",
                laplace.margin, laplace.scale
            ));
        }

        let mut g = centered(&mu, &f).unwrap();
        let av = cert.alpha * gamma_sup_norm(&q, &g).unwrap();
        if av >= 0.99 {
            g = g.scale((0.5 / av).sqrt());
        }
        for p in [1usize, 2, 4] {
            let step = recursion_step_check(&q, &mu, &g, p, cert.alpha, tol).unwrap();
            if !step.pass {
                failures.push(format!(
                    "chain {i}, p = {p}: recursion step violated, margin {:.3e}",
                    step.margin
                ));
            }
        }
    }

    verdict(7, "Laplace bound + moment recursion", started, None, failures);
}

/// 8. 1000 seeded fuzz trials per trace inequality find zero violations at
/// relative tolerance 1e-8, and the injected-bug self-test (front factor
/// ½ → ¼) finds violations and shrinks them without weakening the margin.
#[test]
fn criterion_08_trace_inequality_fuzz() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let config = FuzzConfig {
        trials: 1000,
        ..FuzzConfig::default()
    };
    for report in fuzz_campaign(&config, 0).unwrap() {
        if !report.violations.is_empty() {
            failures.push(format!(
                "{:?}: {} violations, worst margin {:.3e}",
                report.inequality,
                report.violations.len(),
                report.worst_margin
            ));
        }
    }

    let buggy = FuzzConfig {
        inequalities: vec![InequalityId::MeanValueTrace],
        trials: 300,
        inject_mean_value_bug: true,
        ..FuzzConfig::default()
    };
    let report = fuzz_campaign(&buggy, 0).unwrap().remove(0);
    if report.violations.is_empty() {
        failures.push("injected-bug self-test found no violations".into());
    }
    for v in &report.violations {
        if v.shrunk_margin > v.margin + 1e-12 {
            failures.push(format!(
                "seed {}: shrinking weakened the margin ({:.3e} → {:.3e})",
                v.seed, v.margin, v.shrunk_margin
            ));
        }
        if v.shrunk["inequality"] != "mean_value_trace" {
            failures.push(format!("seed {}: shrunk witness lost its inequality tag", v.seed));
        }
    }

    verdict(8, "trace-inequality fuzz", started, Some(Duration::from_secs(120)), failures);
}

/// 9. The six structural semigroup properties (with φ ∈ {exp, |·|, square}
/// in the trace-Jensen family) pass on 500 fuzzed reversible instances; the
/// operator Jensen property (P_tf)² ⪯ P_t(f²) has margin ≥ −1e-9.
#[test]
fn criterion_09_semigroup_property_battery() {
    let started = Instant::now();
    let mut failures = Vec::new();
    let tol = Tolerance::absolute(1e-9);

    for i in 0..500u64 {
        let n = 2 + (i as usize % 4);
        let (q, mu) = random_reversible_chain(n, derive_seed(901, i)).unwrap();
        let d = 1 + (i as usize % 3);
        let f = random_matrix_function(q.space(), d, 1.0, derive_seed(902, i));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(903, i));
        let t = rng.random_range(0.05..3.0);

        for res in check_semigroup_properties(&q, &mu, &f, t, tol).unwrap() {
            if !res.pass {
                failures.push(format!(
                    "instance {i} (t = {t:.3}): {} margin {:.3e}",
                    res.name, res.margin
                ));
            }
            if res.name == "semigroup-square-jensen" && res.margin < -1e-9 {
                failures.push(format!(
                    "instance {i}: operator Jensen margin {:.3e}",
                    res.margin
                ));
            }
        }
    }

    verdict(9, "semigroup property battery", started, None, failures);
}

/// 10. Every suite, rerun with identical seeds under worker pools of 1 and
/// 8 threads, writes byte-identical reports.
#[test]
fn criterion_10_deterministic_reports() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, doc: &serde_json::Value| -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, serde_json::to_string_pretty(doc).unwrap()).unwrap();
        path
    };

    let chain = write(
        "chain.json",
        &serde_json::json!({
            "kind": "finite_chain",
            "Q": [[-1.0, 1.0, 0.0], [0.5, -1.5, 1.0], [0.0, 2.0, -2.0]],
            "mu": [0.25, 0.5, 0.25],
        }),
    );
    let product = write(
        "product.json",
        &serde_json::json!({
            "kind": "product",
            "product": {"factors": [
                {"weights": [0.5, 0.5]},
                {"weights": [0.3, 0.7]},
                {"weights": [0.2, 0.3, 0.5]},
            ]},
        }),
    );
    let gaussian = write(
        "gaussian.json",
        &serde_json::json!({
            "kind": "gaussian",
            "n": 2,
            "d": 2,
            "terms": [
                {"exponents": [1, 0], "coeff": {"d": 2, "re": [[0.5, 0.1], [0.1, -0.2]]}},
                {"exponents": [0, 1], "coeff": {"d": 2, "re": [[0.2, 0.0], [0.0, 0.4]]}},
            ],
            "checks": [{"name": "tail", "samples": 20000}],
        }),
    );
    let scp = write(
        "scp.json",
        &serde_json::json!({
            "kind": "scp",
            "builtin": {"kind": "uniform", "n": 4, "k": 2},
        }),
    );
    let fuzz = write(
        "fuzz.json",
        &serde_json::json!({
            "kind": "fuzz",
            "inequalities": [
                "mean_value_trace",
                "contraction_power",
                "weighted_convexity",
                "dirichlet_laplace",
            ],
            "trials": 200,
            "seed": 11,
        }),
    );

    let suites: Vec<(&str, &std::path::Path)> = vec![
        ("poincare-check", &chain),
        ("laplace-check", &chain),
        ("tail-check", &chain),
        ("poincare-check", &product),
        ("tail-check", &product),
        ("gaussian-check", &gaussian),
        ("tail-check", &gaussian),
        ("poincare-check", &scp),
        ("tail-check", &scp),
        ("fuzz", &fuzz),
    ];

    let mut campaigns: Vec<(usize, Vec<String>)> = suites
        .iter()
        .map(|(subcommand, config)| {
            vec![
                subcommand.to_string(),
                "--config".into(),
                config.to_str().unwrap().to_string(),
                "--seed".into(),
                "42".into(),
            ]
        })
        .enumerate()
        .collect();
    campaigns.push((
        suites.len(),
        ["scp-build", "--n", "4", "--k", "2"].iter().map(|s| s.to_string()).collect(),
    ));

    for (idx, base) in &campaigns {
        let run_once = |threads: &str, tag: &str| -> Vec<u8> {
            let out = dir.path().join(format!("{idx}-{tag}.json"));
            let mut args = vec!["matconc".to_string()];
            args.extend(base.iter().cloned());
            args.extend([
                "--threads".to_string(),
                threads.to_string(),
                "--output".to_string(),
                out.to_str().unwrap().to_string(),
            ]);
            let code = matconc::app::run(args.into_iter());
            assert_eq!(code, 0, "campaign #{idx} ({}) exited {code}", base[0]);
            std::fs::read(&out).unwrap()
        };
        let one = run_once("1", "t1");
        let eight = run_once("8", "t8");
        let again = run_once("1", "t1b");
        if one != eight {
            failures.push(format!("{} #{idx}: 1-thread and 8-thread reports differ", base[0]));
        }
        if one != again {
            failures.push(format!("{} #{idx}: identical reruns differ", base[0]));
        }
    }

    verdict(10, "deterministic reports across worker counts", started, None, failures);
}
