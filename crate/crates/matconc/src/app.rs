//! The `matconc` command-line driver.
//!
//! Subcommands map scenario files onto verification suites and write
//! machine-readable reports:
//!
//! * `poincare-check` — variance-versus-energy checks for the scenario's
//!   setting (chain, product, Gaussian, or cube measure);
//! * `tail-check` — exact or Monte Carlo tails against the concentration
//!   bound;
//! * `laplace-check` — the Laplace-transform bound and the moment-recursion
//!   step on a finite-chain scenario;
//! * `scp-build` — constructs the covering-coupling generator for a built-in
//!   cube measure and prints it;
//! * `fuzz` — randomized trace-inequality trials with shrinking;
//! * `gaussian-check` — the Gaussian Poincaré inequality plus quadrature
//!   sanity;
//! * `report` — re-emits a stored JSON report, e.g. as CSV.
//!
//! Exit codes: 0 — every check passed; 1 — at least one mathematical check
//! failed (a potential counterexample; the report is still written);
//! 2 — usage, configuration, or I/O problems.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::chain::{
    check_semigroup_properties, semigroup_apply, validate_generator, FiniteMeasure, Generator,
    MatrixFunction,
};
use crate::check::{CheckResult, Tolerance};
use crate::concentration::{
    cube_lipschitz_tail_spec, dominance_report, exact_tail, gaussian_tail_spec,
    laplace_bound_check, laplace_delta_grid, mc_tail, product_tail_spec, recursion_step_check,
    TailBoundSpec,
};
use crate::corpus::{self, derive_seed};
use crate::dirichlet::{gamma_sup_norm, poincare_check, spectral_gap, variance_integral_identity};
use crate::error::{Error, Result};
use crate::gaussian::{
    gauss_expect, gaussian_poincare_check, gaussian_vf, MatrixPolynomial, QuadratureRule,
};
use crate::product::{
    efron_stein_check, product_generator, product_semigroup_closed_form, product_vf, ProductSpace,
};
use crate::report::{emit_report, write_report_file, Report, ReportFormat, TailCurve};
use crate::scenario::{
    load_config, CheckSpec, OutputSpec, ScenarioKind, ScenarioPayload,
};
use crate::scp::{
    builtin_measure, lipschitz_constant, normalization_check, scp_check,
    scp_generator_with_order, scp_poincare_check, CubeMeasure, CubeMeasureFamily, FlowOrder,
};
use crate::traceineq::{fuzz_campaign, FuzzConfig};

// ---------------------------------------------------------------------------
// Argument grammar
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "matconc",
    version,
    about = "Numerical verification of matrix Poincaré inequalities and the concentration bounds they imply"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Master seed for randomized suites (default: the scenario's own seed,
    /// or 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Absolute tolerance for checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_abs: f64,

    /// Relative tolerance for checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_rel: f64,

    /// Worker threads (0 = one per core). MATCONC_THREADS is the fallback.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Report destination; overrides the scenario's own output path. The
    /// format follows the extension (.csv → CSV, anything else → JSON).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the matrix Poincaré inequality for a scenario.
    PoincareCheck {
        /// Scenario file (finite_chain, product, gaussian, or scp).
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare exact or Monte Carlo tails against the concentration bound.
    TailCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Verify the Laplace-transform bound and the moment-recursion step.
    LaplaceCheck {
        /// Scenario file (finite_chain).
        #[arg(long)]
        config: PathBuf,
    },
    /// Build and print the covering-coupling generator of a cube measure.
    ScpBuild {
        /// Number of coordinates.
        #[arg(long)]
        n: usize,
        /// Number of ones per configuration.
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = FamilyArg::Uniform)]
        family: FamilyArg,
        /// Bernoulli success probabilities (for --family bernoulli).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        p: Vec<f64>,
        /// Atom scan order for the covering couplings.
        #[arg(long, value_enum, default_value_t = OrderArg::Lex)]
        order: OrderArg,
    },
    /// Run randomized trace-inequality trials with counterexample shrinking.
    Fuzz {
        /// Scenario file (fuzz) or bare fuzz configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Verify the Gaussian Poincaré inequality and quadrature moments.
    GaussianCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-emit a stored JSON report in the requested format.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Uniform,
    Bernoulli,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Lex,
    Revlex,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> ReportFormat {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Parses `argv`, runs the selected suite inside a scoped worker pool, and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli.threads.or_else(|| {
        std::env::var("MATCONC_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build();
    match pool {
        Ok(pool) => pool.install(|| dispatch(&cli)),
        Err(e) => {
            eprintln!("error: could not build the worker pool: {e}");
            2
        }
    }
}

/// What a suite produced, before emission.
struct Outcome {
    reports: Vec<Report>,
    /// Destination from the scenario file, if any (overridden by --output).
    file: Option<OutputSpec>,
    /// When set and no file destination applies, the report streams to
    /// stdout in this format instead of the per-check summary (the `report`
    /// subcommand).
    stdout_format: Option<ReportFormat>,
    /// Lines printed before the summary (e.g. the built generator).
    prelude: Vec<String>,
}

impl Outcome {
    fn new(reports: Vec<Report>) -> Self {
        Outcome {
            reports,
            file: None,
            stdout_format: None,
            prelude: Vec::new(),
        }
    }
}

/// Prints one line to stdout, swallowing write failures so a closed pipe
/// (`matconc … | head`) ends the stream quietly instead of panicking.
fn say(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn dispatch(cli: &Cli) -> i32 {
    let outcome = match execute(cli) {
        Ok(o) => o,
        Err(e @ Error::ScpViolated { .. }) => {
            // A failed covering feasibility scan is a mathematical finding,
            // not a usage problem.
            eprintln!("counterexample: {e}");
            return 1;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    for line in &outcome.prelude {
        say(line);
    }
    let destination = cli.output.as_ref().map_or_else(
        || outcome.file.clone(),
        |path| {
            let format = match path.extension().and_then(|e| e.to_str()) {
                Some("csv") => ReportFormat::Csv,
                _ => ReportFormat::Json,
            };
            Some(OutputSpec {
                path: path.clone(),
                format,
            })
        },
    );
    let wrote_file = destination.is_some();
    if let Some(dest) = destination {
        if let Err(e) = write_report_file(&outcome.reports, dest.format, &dest.path) {
            eprintln!("error: could not write {}: {e}", dest.path.display());
            return 2;
        }
    }
    if let (Some(format), false) = (outcome.stdout_format, wrote_file) {
        let mut stdout = std::io::stdout().lock();
        if let Err(e) = emit_report(&outcome.reports, format, &mut stdout) {
            let closed_pipe = matches!(
                &e,
                Error::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe
            );
            if !closed_pipe {
                eprintln!("error: {e}");
                return 2;
            }
        }
    } else {
        let mut failed = 0usize;
        let mut total = 0usize;
        for report in &outcome.reports {
            for check in &report.checks {
                total += 1;
                if !check.pass {
                    failed += 1;
                }
                say(&format!(
                    "{} {} margin={:+.3e}",
                    if check.pass { "PASS" } else { "FAIL" },
                    check.name,
                    check.margin
                ));
            }
        }
        say(&format!(
            "{}: {} checks, {} failed",
            outcome
                .reports
                .first()
                .map_or("(empty)", |r| r.suite.as_str()),
            total,
            failed
        ));
    }
    if outcome.reports.iter().all(Report::pass) {
        0
    } else {
        1
    }
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let tol = Tolerance::new(cli.tol_abs, cli.tol_rel)?;
    match &cli.command {
        Command::PoincareCheck { config } => scenario_suite("poincare-check", config, cli, tol),
        Command::TailCheck { config } => scenario_suite("tail-check", config, cli, tol),
        Command::LaplaceCheck { config } => scenario_suite("laplace-check", config, cli, tol),
        Command::GaussianCheck { config } => scenario_suite("gaussian-check", config, cli, tol),
        Command::Fuzz { config } => scenario_suite("fuzz", config, cli, tol),
        Command::ScpBuild {
            n,
            k,
            family,
            p,
            order,
        } => scp_build(*n, *k, *family, p, *order, cli.seed.unwrap_or(0), tol),
        Command::Report { input, format } => reemit(input, (*format).into()),
    }
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

/// Default check selections per (suite, scenario kind).
fn default_checks(suite: &str, kind: ScenarioKind) -> Result<&'static [&'static str]> {
    let defaults: &[&str] = match (suite, kind) {
        ("poincare-check", ScenarioKind::FiniteChain) => {
            &["generator", "poincare", "variance-identity", "semigroup"]
        }
        ("poincare-check", ScenarioKind::Product) => &["poincare", "semigroup"],
        ("poincare-check", ScenarioKind::Gaussian) => &["poincare", "moments"],
        ("poincare-check", ScenarioKind::Scp) => &["scp", "generator", "poincare"],
        ("tail-check", k) if k != ScenarioKind::Fuzz => &["tail"],
        ("laplace-check", ScenarioKind::FiniteChain) => &["laplace", "recursion"],
        ("gaussian-check", ScenarioKind::Gaussian) => &["poincare", "moments"],
        ("fuzz", ScenarioKind::Fuzz) => &[],
        (suite, kind) => {
            return Err(Error::validation(format!(
                "{suite} does not apply to \"{}\" scenarios",
                kind.name()
            )))
        }
    };
    Ok(defaults)
}

fn scenario_suite(suite: &str, config: &PathBuf, cli: &Cli, tol: Tolerance) -> Result<Outcome> {
    let scenario = load_config(config)?;
    let defaults = default_checks(suite, scenario.kind)?;
    let checks = scenario.selected_checks(defaults);
    let seed = cli.seed.unwrap_or(match &scenario.payload {
        ScenarioPayload::Fuzz(config) => config.seed,
        _ => 0,
    });
    let mut report = Report::new(suite, seed);
    match &scenario.payload {
        ScenarioPayload::FiniteChain { q, mu, f } => {
            chain_suite(q, mu, f.as_ref(), &checks, seed, tol, &mut report)?
        }
        ScenarioPayload::Product { space, f } => {
            product_suite(space, f.as_ref(), &checks, seed, tol, &mut report)?
        }
        ScenarioPayload::Gaussian {
            poly,
            bounding_box,
        } => gaussian_suite(poly, *bounding_box, &checks, seed, tol, &mut report)?,
        ScenarioPayload::Scp { measure, f, order } => {
            scp_suite(measure, f.as_ref(), *order, &checks, seed, tol, &mut report)?
        }
        ScenarioPayload::Fuzz(config) => fuzz_suite(config, seed, &mut report)?,
    }
    let mut outcome = Outcome::new(vec![report]);
    outcome.file = scenario.output;
    Ok(outcome)
}

/// Merges extra key/value pairs into a check's witness object.
fn annotate(mut res: CheckResult, extra: serde_json::Value) -> CheckResult {
    let mut merged = match res.witness.take() {
        Some(serde_json::Value::Object(m)) => m,
        Some(other) => {
            let mut m = serde_json::Map::new();
            m.insert("inner".into(), other);
            m
        }
        None => serde_json::Map::new(),
    };
    if let serde_json::Value::Object(extra) = extra {
        merged.extend(extra);
    }
    res.witness = Some(serde_json::Value::Object(merged));
    res
}

/// Evenly spaced grid `0 = t_0 < … < t_{points−1} = t_max`.
fn t_grid(t_max: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    let t_max = if t_max > 0.0 { t_max } else { 1.0 };
    (0..points)
        .map(|i| t_max * i as f64 / (points - 1) as f64)
        .collect()
}

fn chain_suite(
    q: &Generator,
    mu: &FiniteMeasure,
    f: Option<&MatrixFunction>,
    checks: &[CheckSpec],
    seed: u64,
    tol: Tolerance,
    report: &mut Report,
) -> Result<()> {
    let default_f =
        |stream: u64| corpus::random_matrix_function(q.space(), 2, 1.0, derive_seed(seed, stream));
    let pick = |stream: u64| f.cloned().unwrap_or_else(|| default_f(stream));
    for spec in checks {
        match spec.name.as_str() {
            "generator" => report.checks.push(validate_generator(q, mu, tol)?),
            "poincare" => {
                let cert = spectral_gap(q, mu)?;
                let trials = if f.is_some() {
                    1
                } else {
                    spec.usize_param("trials", 25)
                };
                let mut worst: Option<CheckResult> = None;
                for trial in 0..trials.max(1) as u64 {
                    let g = match f {
                        Some(f) => f.clone(),
                        None => corpus::random_matrix_function(
                            q.space(),
                            1 + (trial as usize % 3),
                            1.0,
                            derive_seed(seed, 0x100 + trial),
                        ),
                    };
                    let res = poincare_check(q, mu, &g, cert.alpha, tol)?;
                    if worst.as_ref().is_none_or(|w| res.margin < w.margin) {
                        worst = Some(res);
                    }
                }
                let res = worst.expect("at least one trial ran");
                report.checks.push(annotate(
                    res,
                    serde_json::json!({"alpha": cert.alpha, "gap": cert.gap, "trials": trials.max(1)}),
                ));
            }
            "variance-identity" => {
                let cert = spectral_gap(q, mu)?;
                let gap = cert.gap.unwrap_or(1.0);
                let t_max = spec.f64_param("t_max", (12.0 / gap).max(10.0));
                let nodes = spec.usize_param("nodes", 128);
                report.checks.push(variance_integral_identity(
                    q,
                    mu,
                    &pick(0x21),
                    t_max,
                    nodes,
                )?);
            }
            "semigroup" => {
                let t = spec.f64_param("t", 1.0);
                report
                    .checks
                    .extend(check_semigroup_properties(q, mu, &pick(0x22), t, tol)?);
            }
            "laplace" => {
                let cert = spectral_gap(q, mu)?;
                let g = pick(0x23);
                let v = gamma_sup_norm(q, &g)?;
                let grid = laplace_delta_grid(cert.alpha, v, spec.usize_param("points", 20))?;
                let res = laplace_bound_check(q, mu, &g, cert.alpha, &grid, tol)?;
                report
                    .checks
                    .push(annotate(res, serde_json::json!({"alpha": cert.alpha})));
            }
            "recursion" => {
                let cert = spectral_gap(q, mu)?;
                let g = crate::concentration::centered(mu, &pick(0x24))?;
                let v = gamma_sup_norm(q, &g)?;
                // The step needs αv < 1; rescale towards αv = ½ when the
                // supplied function is too wide (Γ scales quadratically).
                let shrink = if cert.alpha * v >= 0.99 {
                    (0.5 / (cert.alpha * v)).sqrt()
                } else {
                    1.0
                };
                let g = MatrixFunction::new(
                    g.space().clone(),
                    g.values().iter().map(|m| m.scale(shrink)).collect(),
                )?;
                let ps: Vec<usize> = spec
                    .params
                    .get("p")
                    .and_then(|v| v.as_array())
                    .map(|a| a.iter().filter_map(|x| x.as_u64()).map(|x| x as usize).collect())
                    .unwrap_or_else(|| vec![1, 2, 4]);
                for p in ps {
                    let res = recursion_step_check(q, mu, &g, p, cert.alpha, tol)?;
                    report.checks.push(CheckResult {
                        name: format!("moment-recursion-step-p{p}"),
                        ..annotate(res, serde_json::json!({"rescaled_by": shrink}))
                    });
                }
            }
            "tail" => {
                let cert = spectral_gap(q, mu)?;
                let g = pick(0x25);
                let v = gamma_sup_norm(q, &g)?;
                let bound = TailBoundSpec::new(g.dim(), cert.alpha, v)?;
                let t_max = spec.f64_param("t_max", 3.0 * (cert.alpha * v).sqrt());
                let grid = t_grid(t_max, spec.usize_param("points", 100));
                let est = exact_tail(mu, &g, &grid)?;
                report.checks.push(dominance_report(&bound, &est)?);
                report.curves.push(TailCurve::new("chain-exact", &bound, &est)?);
            }
            other => {
                return Err(Error::validation(format!(
                    "check \"{other}\" is not implemented for finite-chain scenarios"
                )))
            }
        }
    }
    Ok(())
}

fn product_suite(
    space: &ProductSpace,
    f: Option<&MatrixFunction>,
    checks: &[CheckSpec],
    seed: u64,
    tol: Tolerance,
    report: &mut Report,
) -> Result<()> {
    let pick = |stream: u64| {
        f.cloned().unwrap_or_else(|| {
            corpus::random_matrix_function(space.joint_space(), 2, 1.0, derive_seed(seed, stream))
        })
    };
    for spec in checks {
        match spec.name.as_str() {
            "poincare" => {
                let trials = if f.is_some() {
                    1
                } else {
                    spec.usize_param("trials", 25)
                };
                let mut worst: Option<CheckResult> = None;
                for trial in 0..trials.max(1) as u64 {
                    let g = match f {
                        Some(f) => f.clone(),
                        None => corpus::random_matrix_function(
                            space.joint_space(),
                            1 + (trial as usize % 3),
                            1.0,
                            derive_seed(seed, 0x200 + trial),
                        ),
                    };
                    let res = efron_stein_check(space, &g, tol)?;
                    if worst.as_ref().is_none_or(|w| res.margin < w.margin) {
                        worst = Some(res);
                    }
                }
                report.checks.push(annotate(
                    worst.expect("at least one trial ran"),
                    serde_json::json!({"trials": trials.max(1)}),
                ));
            }
            "semigroup" => {
                let g = pick(0x31);
                let q = product_generator(space)?;
                let times: Vec<f64> = spec
                    .params
                    .get("t")
                    .and_then(|v| v.as_array())
                    .map(|a| a.iter().filter_map(serde_json::Value::as_f64).collect())
                    .unwrap_or_else(|| vec![0.1, 1.0, 3.0]);
                let mut worst = f64::INFINITY;
                let mut scale = 0.0f64;
                let mut per_t = serde_json::Map::new();
                for &t in &times {
                    let closed = product_semigroup_closed_form(space, t, &g)?;
                    let direct = semigroup_apply(&q, t, &g)?;
                    let diff = closed.sub(&direct)?.sup_norm();
                    scale = scale.max(closed.sup_norm()).max(direct.sup_norm());
                    worst = worst.min(-diff);
                    per_t.insert(format!("{t}"), serde_json::json!(diff));
                }
                report.checks.push(
                    CheckResult::from_margin("product-semigroup-closed-form", worst, scale, tol)
                        .with_witness(serde_json::Value::Object(per_t)),
                );
            }
            "tail" => {
                let g = pick(0x32);
                let v_f = product_vf(space, &g)?;
                let bound = product_tail_spec(g.dim(), v_f)?;
                let av = bound.alpha * bound.v_gamma;
                let t_max = spec.f64_param("t_max", 3.0 * av.sqrt());
                let grid = t_grid(t_max, spec.usize_param("points", 100));
                let est = exact_tail(space.joint_measure(), &g, &grid)?;
                let res = dominance_report(&bound, &est)?;
                report
                    .checks
                    .push(annotate(res, serde_json::json!({"v_f": v_f})));
                report
                    .curves
                    .push(TailCurve::new("product-exact", &bound, &est)?);
            }
            other => {
                return Err(Error::validation(format!(
                    "check \"{other}\" is not implemented for product scenarios"
                )))
            }
        }
    }
    Ok(())
}

/// Normal moments E[Z^k] for k = 0..=6.
const NORMAL_MOMENTS: [f64; 7] = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0];

fn gaussian_suite(
    poly: &MatrixPolynomial,
    bounding_box: Option<(f64, f64)>,
    checks: &[CheckSpec],
    seed: u64,
    tol: Tolerance,
    report: &mut Report,
) -> Result<()> {
    for spec in checks {
        match spec.name.as_str() {
            "poincare" => {
                let order = spec.usize_param(
                    "order",
                    QuadratureRule::required_order(2 * poly.degree().max(1)),
                );
                let rule = QuadratureRule::new(order)?;
                report.checks.push(gaussian_poincare_check(poly, &rule, tol)?);
            }
            "moments" => {
                let order = spec.usize_param("order", QuadratureRule::required_order(6));
                let rule = QuadratureRule::new(order)?;
                let mut worst = f64::NEG_INFINITY;
                let mut per_k = serde_json::Map::new();
                for (k, &expected) in NORMAL_MOMENTS.iter().enumerate() {
                    let err = (rule.moment(k as u32) - expected).abs();
                    per_k.insert(format!("m{k}"), serde_json::json!(err));
                    worst = worst.max(err);
                }
                report.checks.push(
                    CheckResult::from_margin(
                        "quadrature-moments",
                        -worst,
                        NORMAL_MOMENTS[6],
                        Tolerance::absolute(1e-10),
                    )
                    .with_witness(serde_json::Value::Object(per_k)),
                );
            }
            "tail" => {
                let order = QuadratureRule::required_order(2 * poly.degree().max(1));
                let rule = QuadratureRule::new(order)?;
                let mean = gauss_expect(poly, &rule)?;
                let (v, v_exact) =
                    gaussian_vf(poly, bounding_box, spec.usize_param("box_grid", 41))?;
                let bound = gaussian_tail_spec(poly.dim(), v)?;
                let t_max = spec.f64_param("t_max", 3.0 * v.max(1e-12).sqrt());
                let grid = t_grid(t_max, spec.usize_param("points", 50));
                let samples = spec.usize_param("samples", 100_000).max(1000) as u64;
                let n = poly.n_vars();
                let est = mc_tail(
                    |rng| {
                        let x = crate::gaussian::sample_point(rng, n);
                        let value = poly.eval(&x).expect("evaluation is total on finite points");
                        (&value - &mean).op_norm()
                    },
                    &grid,
                    samples,
                    derive_seed(seed, 0x41),
                )?;
                let res = dominance_report(&bound, &est)?;
                report.checks.push(annotate(
                    res,
                    serde_json::json!({"v_f": v, "v_exact": v_exact, "samples": samples}),
                ));
                report
                    .curves
                    .push(TailCurve::new("gaussian-mc", &bound, &est)?);
            }
            other => {
                return Err(Error::validation(format!(
                    "check \"{other}\" is not implemented for gaussian scenarios"
                )))
            }
        }
    }
    Ok(())
}

fn scp_suite(
    measure: &CubeMeasure,
    f: Option<&MatrixFunction>,
    order: FlowOrder,
    checks: &[CheckSpec],
    seed: u64,
    tol: Tolerance,
    report: &mut Report,
) -> Result<()> {
    let scan = scp_check(measure)?;
    let generator = if scan.pass {
        Some(scp_generator_with_order(measure, order)?)
    } else {
        None
    };
    let (finite_mu, _) = measure.to_finite_measure();
    let pick = |stream: u64| {
        f.cloned()
            .unwrap_or_else(|| corpus::random_lipschitz_cube_function(measure, 2, derive_seed(seed, stream)))
    };
    let skipped = |name: &str, report: &mut Report| {
        report.checks.push(
            CheckResult::from_margin(name, scan.margin, 1.0, tol).with_witness(serde_json::json!({
                "skipped": "the covering feasibility scan failed; no generator exists",
            })),
        );
    };
    for spec in checks {
        match (spec.name.as_str(), &generator) {
            ("scp", _) => report.checks.push(scan.clone()),
            (name, None) => skipped(name, report),
            ("generator", Some(q)) => {
                report.checks.push(validate_generator(q, &finite_mu, tol)?);
                report.checks.push(normalization_check(measure)?);
            }
            ("poincare", Some(_)) => {
                let g = pick(0x51);
                report.checks.push(scp_poincare_check(measure, &g, tol)?);
            }
            ("tail", Some(_)) => {
                let g = pick(0x52);
                let lipschitz = lipschitz_constant(measure, &g)?;
                // The cube bound assumes a 1-Lipschitz function; normalize.
                let g = if lipschitz > 0.0 {
                    MatrixFunction::new(
                        g.space().clone(),
                        g.values().iter().map(|m| m.scale(1.0 / lipschitz)).collect(),
                    )?
                } else {
                    g
                };
                let bound = cube_lipschitz_tail_spec(g.dim(), measure.k())?;
                let av = bound.alpha * bound.v_gamma;
                let t_max = spec.f64_param("t_max", 3.0 * av.sqrt());
                let grid = t_grid(t_max, spec.usize_param("points", 100));
                let est = exact_tail(&finite_mu, &g, &grid)?;
                let res = dominance_report(&bound, &est)?;
                report.checks.push(annotate(
                    res,
                    serde_json::json!({"lipschitz_constant": lipschitz}),
                ));
                report.curves.push(TailCurve::new("scp-exact", &bound, &est)?);
            }
            (other, _) => {
                return Err(Error::validation(format!(
                    "check \"{other}\" is not implemented for scp scenarios"
                )))
            }
        }
    }
    Ok(())
}

fn fuzz_suite(config: &FuzzConfig, seed: u64, report: &mut Report) -> Result<()> {
    for fuzz in fuzz_campaign(config, seed)? {
        let name = serde_json::to_value(fuzz.inequality)?
            .as_str()
            .expect("inequality ids serialize as strings")
            .to_string();
        report.checks.push(CheckResult {
            name: format!("fuzz-{name}"),
            pass: fuzz.violations.is_empty(),
            margin: fuzz.worst_margin,
            scale: 1.0,
            tolerance: config.tolerance,
            witness: Some(serde_json::json!({
                "trials": fuzz.trials,
                "violations": fuzz.violations,
            })),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// scp-build and report
// ---------------------------------------------------------------------------

fn scp_build(
    n: usize,
    k: usize,
    family: FamilyArg,
    p: &[f64],
    order: OrderArg,
    seed: u64,
    tol: Tolerance,
) -> Result<Outcome> {
    let family = match family {
        FamilyArg::Uniform => CubeMeasureFamily::UniformSlice,
        FamilyArg::Bernoulli => CubeMeasureFamily::ConditionedBernoulli,
    };
    let params = if p.is_empty() { None } else { Some(p) };
    let measure = builtin_measure(family, n, k, params)?;
    let order = match order {
        OrderArg::Lex => FlowOrder::Lexicographic,
        OrderArg::Revlex => FlowOrder::ReverseLexicographic,
    };
    let mut report = Report::new("scp-build", seed);
    let mut prelude = Vec::new();
    let scan = scp_check(&measure)?;
    report.checks.push(scan.clone());
    if scan.pass {
        let q = scp_generator_with_order(&measure, order)?;
        let (finite_mu, _) = measure.to_finite_measure();
        let labels = q.space().labels().to_vec();
        prelude.push(format!("states: {}", labels.join(" ")));
        for (x, lx) in labels.iter().enumerate() {
            for (y, ly) in labels.iter().enumerate() {
                prelude.push(format!("Q({lx}, {ly}) = {}", q.rate(x, y)));
            }
        }
        report.checks.push(validate_generator(&q, &finite_mu, tol)?);
        report.checks.push(normalization_check(&measure)?);
    }
    let mut outcome = Outcome::new(vec![report]);
    outcome.prelude = prelude;
    Ok(outcome)
}

fn reemit(input: &PathBuf, format: ReportFormat) -> Result<Outcome> {
    let text = std::fs::read_to_string(input)?;
    let reports: Vec<Report> = serde_json::from_str(&text)?;
    let mut outcome = Outcome::new(reports);
    outcome.stdout_format = Some(format);
    Ok(outcome)
}
