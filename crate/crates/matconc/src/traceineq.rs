//! Randomized verification of the trace inequalities underpinning the
//! Laplace-transform route, with counterexample shrinking.
//!
//! Four checkers evaluate both sides of an inequality exactly on
//! finitely-supported random inputs and report the signed slack:
//!
//! * [`check_mean_value_trace`] — the matrix mean-value trace inequality
//!   `Tr[f(E[(e^A−e^B)²])] ≤ ½Tr[f(E[(A−B)e^{2B}(A−B)])] + ½Tr[f(e^A E[(A−B)²] e^A)]`
//!   at `f(t) = t^p`;
//! * [`check_contraction_power`] — for jointly distributed `(K, Z)` with
//!   `E[K²] ⪯ I` and PSD `Z`: `E[KZK] ⪯ (E[KZ^pK])^{1/p}`, plus its trace
//!   corollary;
//! * [`check_weighted_convexity`] — the split
//!   `Tr[(A+B)^p] ≤ (γ/(γ−1))^{p−1}Tr(A^p) + γ^{p−1}Tr(B^p)`;
//! * [`check_dirichlet_laplace`] — on a reversible chain,
//!   `Tr[(𝓔(e^g))^p] ≤ (sup‖Γ(g)‖)^p · Tr E_μ[e^{2pg}]`.
//!
//! [`fuzz_campaign`] runs seeded trials of any subset in parallel; a failing
//! instance is shrunk (drop atoms, cut dimension, halve norms) while it keeps
//! violating at least as badly, so genuine implementation bugs surface as
//! minimal, reproducible instances. An opt-in injected bug (the ½ factor
//! weakened to ¼) lets the harness prove it can catch and shrink real
//! violations.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{expectation, FiniteMeasure, Generator, MatrixFunction};
use crate::check::{CheckResult, Tolerance};
use crate::corpus::{self, derive_seed};
use crate::dirichlet::{dirichlet_form, gamma_sup_norm};
use crate::error::{Error, Result};
use crate::matcore::{
    herm_exp, lambda_max, lambda_min, psd_power, random_hermitian, random_psd, HermitianMatrix,
};

// ---------------------------------------------------------------------------
// Finitely-supported matrix laws
// ---------------------------------------------------------------------------

/// A finitely-supported law of a Hermitian random matrix.
#[derive(Debug, Clone)]
pub struct MatrixDistribution {
    atoms: Vec<(f64, HermitianMatrix)>,
}

impl MatrixDistribution {
    /// Atoms are `(probability, value)` pairs: probabilities nonnegative and
    /// summing to 1 within `1e-12`, all values of one dimension.
    pub fn new(atoms: Vec<(f64, HermitianMatrix)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::validation("a matrix law needs at least one atom"));
        }
        let d = atoms[0].1.dim();
        let mut total = 0.0;
        for (p, m) in &atoms {
            if !(p.is_finite() && *p >= 0.0) {
                return Err(Error::validation(format!("atom probability {p} is invalid")));
            }
            if m.dim() != d {
                return Err(Error::validation("atoms must share one dimension"));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::validation(format!(
                "atom probabilities sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(MatrixDistribution { atoms })
    }

    pub fn point_mass(m: HermitianMatrix) -> Self {
        MatrixDistribution {
            atoms: vec![(1.0, m)],
        }
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].1.dim()
    }

    pub fn atoms(&self) -> &[(f64, HermitianMatrix)] {
        &self.atoms
    }

    /// `E[map(B)]`, the expectation of a matrix-valued statistic.
    pub fn expect(
        &self,
        map: impl Fn(&HermitianMatrix) -> Result<HermitianMatrix>,
    ) -> Result<HermitianMatrix> {
        let mut acc = HermitianMatrix::zeros(self.dim());
        for (p, m) in &self.atoms {
            if *p > 0.0 {
                acc = &acc + &map(m)?.scale(*p);
            }
        }
        Ok(acc)
    }
}

// ---------------------------------------------------------------------------
// The four checkers
// ---------------------------------------------------------------------------

/// `A^p` for integer `p ≥ 1` by repeated multiplication — no spectral
/// calculus, valid for indefinite Hermitian inputs.
fn herm_int_power(h: &HermitianMatrix, p: usize) -> HermitianMatrix {
    let mut acc = h.clone();
    for _ in 1..p {
        acc = HermitianMatrix::symmetrize(acc.mul(h));
    }
    acc
}

/// The mean-value trace margin with an explicit front factor on the right
/// side (the correct inequality uses ½; the fuzz harness's injected-bug mode
/// weakens it to ¼).
fn mean_value_margin(
    a: &HermitianMatrix,
    b: &MatrixDistribution,
    p: usize,
    factor: f64,
) -> Result<(f64, f64)> {
    if p == 0 {
        return Err(Error::validation("the power p must be ≥ 1"));
    }
    if a.dim() != b.dim() {
        return Err(Error::validation("A and the atoms of B must share a dimension"));
    }
    let ea = herm_exp(a)?;
    let lhs_inner = b.expect(|bi| Ok((&ea - &herm_exp(bi)?).square()))?;
    let mid = b.expect(|bi| Ok((a - bi).sandwich(&herm_exp(&bi.scale(2.0))?)))?;
    let outer = ea.sandwich(&b.expect(|bi| Ok((a - bi).square()))?);
    let lhs = psd_power(&lhs_inner, p as f64)?.trace();
    let rhs = factor * (psd_power(&mid, p as f64)?.trace() + psd_power(&outer, p as f64)?.trace());
    Ok((rhs - lhs, lhs.abs().max(rhs.abs())))
}

/// Checks the mean-value trace inequality at `f(t) = t^p` for deterministic
/// Hermitian `A` and a finitely-supported law `B`; all expectations are exact
/// atom sums. Margin is `RHS − LHS`.
pub fn check_mean_value_trace(
    a: &HermitianMatrix,
    b: &MatrixDistribution,
    p: usize,
    tol: Tolerance,
) -> Result<CheckResult> {
    let (margin, scale) = mean_value_margin(a, b, p, 0.5)?;
    Ok(CheckResult::from_margin("mean-value-trace", margin, scale, tol))
}

/// Checks the contraction–power inequality for a joint law of `(K, Z)` pairs
/// (Z PSD): after rescaling `K` by `1/√λ_max(E[K²])` when that exceeds 1,
///
/// ```text
/// E[KZK] ⪯ (E[KZ^pK])^{1/p}    and    Tr[(E[KZK])^p] ≤ E Tr[KZ^pK].
/// ```
///
/// Margin is `λ_min` of the operator slack; the trace corollary's slack is
/// reported in the witness and folded into `pass`.
///
/// The root is taken of `E[KZ^pK] + ηI` with a backward-error-sized shift
/// `η = 64·ε·d·(1 + Σ wᵢ‖Kᵢ‖²‖Zᵢ‖^p)`. Without it, roundoff in a near-null
/// eigenvalue of `E[KZ^pK]` surfaces as a spurious violation of size
/// `O(roundoff^{1/p})` — the map `t^{1/p}` has unbounded slope at 0⁺, so for
/// nearly singular `Z` and large `p` a `1e-16` eigenvalue error becomes a
/// `~1e-3` error in the root. Since `t^{1/p}` is operator monotone and
/// `‖computed − exact‖ ≤ η`, the shift only absorbs formation noise; it
/// cannot mask a genuine violation larger than `η^{1/p}` (reported in the
/// witness as `root_shift`).
pub fn check_contraction_power(
    joint: &[(f64, HermitianMatrix, HermitianMatrix)],
    p: f64,
    tol: Tolerance,
) -> Result<CheckResult> {
    if joint.is_empty() {
        return Err(Error::validation("the joint law needs at least one atom"));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::validation(format!("the power p = {p} must be ≥ 1")));
    }
    let d = joint[0].1.dim();
    let mut total = 0.0;
    for (w, k, z) in joint {
        if !(w.is_finite() && *w >= 0.0) {
            return Err(Error::validation(format!("atom probability {w} is invalid")));
        }
        if k.dim() != d || z.dim() != d {
            return Err(Error::validation("atoms must share one dimension"));
        }
        let zmin = lambda_min(z);
        if zmin < -1e-10 * (1.0 + z.op_norm()) {
            return Err(Error::validation(format!(
                "a Z atom has eigenvalue {zmin:.3e}; Z must be positive semidefinite"
            )));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::validation(format!(
            "atom probabilities sum to {total}, expected 1 within 1e-12"
        )));
    }
    // Enforce E[K²] ⪯ I by rescaling (the inequality's normalization).
    let mut ek2 = HermitianMatrix::zeros(d);
    for (w, k, _) in joint {
        ek2 = &ek2 + &k.square().scale(*w);
    }
    let top = lambda_max(&ek2);
    let rescale = if top > 1.0 { 1.0 / top.sqrt() } else { 1.0 };

    let mut ekzk = HermitianMatrix::zeros(d);
    let mut ekzpk = HermitianMatrix::zeros(d);
    let mut magnitude = 0.0;
    for (w, k, z) in joint {
        if *w == 0.0 {
            continue;
        }
        let k = k.scale(rescale);
        ekzk = &ekzk + &k.sandwich(z).scale(*w);
        ekzpk = &ekzpk + &k.sandwich(&psd_power(z, p)?).scale(*w);
        magnitude += w * k.op_norm().powi(2) * z.op_norm().powf(p);
    }
    let shift = 64.0 * f64::EPSILON * d as f64 * (1.0 + magnitude);
    let shifted = &ekzpk + &HermitianMatrix::identity(d).scale(shift);
    let root = psd_power(&shifted, 1.0 / p)?;
    let op_margin = lambda_min(&(&root - &ekzk));
    let op_scale = root.op_norm().max(ekzk.op_norm());
    let trace_lhs = psd_power(&ekzk, p)?.trace();
    let trace_rhs = ekzpk.trace();
    let trace_margin = trace_rhs - trace_lhs;
    let trace_scale = trace_lhs.abs().max(trace_rhs.abs());
    let pass = op_margin >= -tol.threshold(op_scale) && trace_margin >= -tol.threshold(trace_scale);
    Ok(CheckResult {
        name: "contraction-power".into(),
        pass,
        margin: op_margin,
        scale: op_scale,
        tolerance: tol,
        witness: Some(serde_json::json!({
            "trace_lhs": trace_lhs,
            "trace_rhs": trace_rhs,
            "trace_margin": trace_margin,
            "rescaled_by": rescale,
            "root_shift": shift,
        })),
    })
}

/// Checks the weighted convexity split
/// `Tr[(A+B)^p] ≤ (γ/(γ−1))^{p−1}·Tr(A^p) + γ^{p−1}·Tr(B^p)` for `γ > 1` and
/// integer `p ≥ 1`.
///
/// The checker evaluates margins for any Hermitian inputs; the inequality is
/// guaranteed for PSD `A, B` (any `p`) and for general Hermitian inputs at
/// even `p`.
pub fn check_weighted_convexity(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    gamma: f64,
    p: usize,
    tol: Tolerance,
) -> Result<CheckResult> {
    if !(gamma > 1.0) {
        return Err(Error::validation(format!("γ = {gamma} must exceed 1")));
    }
    if p == 0 {
        return Err(Error::validation("the power p must be ≥ 1"));
    }
    if a.dim() != b.dim() {
        return Err(Error::validation("A and B must share a dimension"));
    }
    let lhs = herm_int_power(&(a + b), p).trace();
    let e = (p - 1) as i32;
    let rhs = (gamma / (gamma - 1.0)).powi(e) * herm_int_power(a, p).trace()
        + gamma.powi(e) * herm_int_power(b, p).trace();
    Ok(CheckResult::from_margin(
        "weighted-convexity",
        rhs - lhs,
        lhs.abs().max(rhs.abs()),
        tol,
    ))
}

/// Checks the Dirichlet–Laplace trace bound on a reversible chain:
/// `Tr[(𝓔(e^g))^p] ≤ (sup_x‖Γ(g)(x)‖)^p · Tr E_μ[e^{2pg}]`.
pub fn check_dirichlet_laplace(
    q: &Generator,
    mu: &FiniteMeasure,
    g: &MatrixFunction,
    p: usize,
    tol: Tolerance,
) -> Result<CheckResult> {
    if p == 0 {
        return Err(Error::validation("the power p must be ≥ 1"));
    }
    let eg = MatrixFunction::new(
        g.space().clone(),
        g.values().iter().map(herm_exp).collect::<Result<Vec<_>>>()?,
    )?;
    let energy = dirichlet_form(q, mu, &eg)?;
    let lhs = psd_power(&energy, p as f64)?.trace();
    let v = gamma_sup_norm(q, g)?;
    let e2pg = MatrixFunction::new(
        g.space().clone(),
        g.values()
            .iter()
            .map(|m| herm_exp(&m.scale(2.0 * p as f64)))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let rhs = v.powi(p as i32) * expectation(mu, &e2pg)?.trace();
    Ok(
        CheckResult::from_margin("dirichlet-laplace-trace", rhs - lhs, lhs.abs().max(rhs.abs()), tol)
            .with_witness(serde_json::json!({
                "lhs": lhs,
                "rhs": rhs,
                "gamma_sup_norm": v,
            })),
    )
}

// ---------------------------------------------------------------------------
// Fuzzing with shrinking
// ---------------------------------------------------------------------------

/// Names of the fuzzable inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityId {
    MeanValueTrace,
    ContractionPower,
    WeightedConvexity,
    DirichletLaplace,
}

impl InequalityId {
    pub const ALL: [InequalityId; 4] = [
        InequalityId::MeanValueTrace,
        InequalityId::ContractionPower,
        InequalityId::WeightedConvexity,
        InequalityId::DirichletLaplace,
    ];

    /// Stable per-inequality seed stream index (independent of config order).
    fn stream(self) -> u64 {
        match self {
            InequalityId::MeanValueTrace => 1,
            InequalityId::ContractionPower => 2,
            InequalityId::WeightedConvexity => 3,
            InequalityId::DirichletLaplace => 4,
        }
    }
}

fn default_trials() -> usize {
    1000
}

fn default_d_range() -> (usize, usize) {
    (2, 3)
}

fn default_fuzz_tolerance() -> Tolerance {
    Tolerance { abs: 1e-8, rel: 1e-8 }
}

/// Fuzz campaign configuration (JSON: `{"inequalities": [...], "trials": n,
/// "d_range": [lo, hi], "seed": n, "tolerance": {"abs": …, "rel": …}}`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzConfig {
    pub inequalities: Vec<InequalityId>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Matrix dimensions are drawn uniformly from this inclusive range.
    #[serde(default = "default_d_range")]
    pub d_range: (usize, usize),
    /// Master seed used when the caller does not supply one.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fuzz_tolerance")]
    pub tolerance: Tolerance,
    /// Self-test mode: weakens the ½ factor in the mean-value inequality to
    /// ¼, which is false, to prove the harness detects and shrinks
    /// violations.
    #[serde(default)]
    pub inject_mean_value_bug: bool,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            inequalities: InequalityId::ALL.to_vec(),
            trials: default_trials(),
            d_range: default_d_range(),
            seed: 0,
            tolerance: default_fuzz_tolerance(),
            inject_mean_value_bug: false,
        }
    }
}

/// One shrunk counterexample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    /// Trial seed that produced the original violating instance.
    pub seed: u64,
    /// Margin of the original instance.
    pub margin: f64,
    /// Margin of the shrunk instance (≤ `margin + 1e-12`).
    pub shrunk_margin: f64,
    /// The shrunk instance, serialized for replay and triage.
    pub shrunk: serde_json::Value,
}

/// Outcome of fuzzing one inequality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FuzzReport {
    pub inequality: InequalityId,
    pub trials: usize,
    pub violations: Vec<Violation>,
    /// Smallest margin observed across all trials.
    pub worst_margin: f64,
}

/// One concrete fuzz instance, carrying everything needed to evaluate,
/// shrink, and describe it.
#[derive(Clone)]
enum Instance {
    MeanValue {
        a: HermitianMatrix,
        b: MatrixDistribution,
        p: usize,
        factor: f64,
    },
    Contraction {
        joint: Vec<(f64, HermitianMatrix, HermitianMatrix)>,
        p: f64,
    },
    Convexity {
        a: HermitianMatrix,
        b: HermitianMatrix,
        gamma: f64,
        p: usize,
    },
    DirichletLaplace {
        q: Generator,
        mu: FiniteMeasure,
        g: MatrixFunction,
        p: usize,
    },
}

/// Entries of a Hermitian matrix as `[[re, im], …]` rows for JSON reports.
fn matrix_json(m: &HermitianMatrix) -> serde_json::Value {
    let d = m.dim();
    serde_json::Value::Array(
        (0..d)
            .map(|i| {
                serde_json::Value::Array(
                    (0..d)
                        .map(|j| {
                            let e = m.entry(i, j);
                            serde_json::json!([e.re, e.im])
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}

/// The leading `new_d × new_d` principal block (PSD-preserving).
fn principal_block(m: &HermitianMatrix, new_d: usize) -> HermitianMatrix {
    let cm = m.matrix();
    HermitianMatrix::symmetrize(crate::matcore::CMatrix::from_fn(new_d, new_d, |i, j| cm[(i, j)]))
}

impl Instance {
    fn evaluate(&self, tol: Tolerance) -> Result<CheckResult> {
        match self {
            Instance::MeanValue { a, b, p, factor } => {
                let (margin, scale) = mean_value_margin(a, b, *p, *factor)?;
                Ok(CheckResult::from_margin("mean-value-trace", margin, scale, tol))
            }
            Instance::Contraction { joint, p } => check_contraction_power(joint, *p, tol),
            Instance::Convexity { a, b, gamma, p } => check_weighted_convexity(a, b, *gamma, *p, tol),
            Instance::DirichletLaplace { q, mu, g, p } => check_dirichlet_laplace(q, mu, g, *p, tol),
        }
    }

    fn describe(&self) -> serde_json::Value {
        match self {
            Instance::MeanValue { a, b, p, factor } => serde_json::json!({
                "inequality": "mean_value_trace",
                "d": a.dim(),
                "p": p,
                "factor": factor,
                "a": matrix_json(a),
                "atoms": b.atoms().iter()
                    .map(|(w, m)| serde_json::json!({"probability": w, "value": matrix_json(m)}))
                    .collect::<Vec<_>>(),
            }),
            Instance::Contraction { joint, p } => serde_json::json!({
                "inequality": "contraction_power",
                "d": joint[0].1.dim(),
                "p": p,
                "atoms": joint.iter()
                    .map(|(w, k, z)| serde_json::json!({
                        "probability": w, "k": matrix_json(k), "z": matrix_json(z),
                    }))
                    .collect::<Vec<_>>(),
            }),
            Instance::Convexity { a, b, gamma, p } => serde_json::json!({
                "inequality": "weighted_convexity",
                "d": a.dim(),
                "gamma": gamma,
                "p": p,
                "a": matrix_json(a),
                "b": matrix_json(b),
            }),
            Instance::DirichletLaplace { q, mu, g, p } => serde_json::json!({
                "inequality": "dirichlet_laplace",
                "states": q.size(),
                "d": g.dim(),
                "p": p,
                "rates": (0..q.size())
                    .map(|x| (0..q.size()).map(|y| q.rate(x, y)).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
                "mu": (0..q.size()).map(|x| mu.weight(x)).collect::<Vec<_>>(),
                "g": g.values().iter().map(matrix_json).collect::<Vec<_>>(),
            }),
        }
    }

    /// Candidate simplifications, most aggressive first: drop an atom or
    /// state, cut the matrix dimension, halve all norms.
    fn shrink_moves(&self) -> Vec<Instance> {
        let mut out = Vec::new();
        match self {
            Instance::MeanValue { a, b, p, factor } => {
                if b.atoms().len() > 1 {
                    for skip in 0..b.atoms().len() {
                        let kept: Vec<(f64, HermitianMatrix)> = b
                            .atoms()
                            .iter()
                            .enumerate()
                            .filter(|&(i, _)| i != skip)
                            .map(|(_, (w, m))| (*w, m.clone()))
                            .collect();
                        let total: f64 = kept.iter().map(|(w, _)| w).sum();
                        if total > 1e-12 {
                            let renorm: Vec<_> =
                                kept.into_iter().map(|(w, m)| (w / total, m)).collect();
                            if let Ok(dist) = MatrixDistribution::new(renorm) {
                                out.push(Instance::MeanValue {
                                    a: a.clone(),
                                    b: dist,
                                    p: *p,
                                    factor: *factor,
                                });
                            }
                        }
                    }
                }
                if a.dim() > 2 {
                    let nd = a.dim() - 1;
                    let atoms: Vec<_> = b
                        .atoms()
                        .iter()
                        .map(|(w, m)| (*w, principal_block(m, nd)))
                        .collect();
                    if let Ok(dist) = MatrixDistribution::new(atoms) {
                        out.push(Instance::MeanValue {
                            a: principal_block(a, nd),
                            b: dist,
                            p: *p,
                            factor: *factor,
                        });
                    }
                }
                let atoms: Vec<_> = b.atoms().iter().map(|(w, m)| (*w, m.scale(0.5))).collect();
                if let Ok(dist) = MatrixDistribution::new(atoms) {
                    out.push(Instance::MeanValue {
                        a: a.scale(0.5),
                        b: dist,
                        p: *p,
                        factor: *factor,
                    });
                }
            }
            Instance::Contraction { joint, p } => {
                if joint.len() > 1 {
                    for skip in 0..joint.len() {
                        let kept: Vec<_> = joint
                            .iter()
                            .enumerate()
                            .filter(|&(i, _)| i != skip)
                            .map(|(_, t)| t.clone())
                            .collect();
                        let total: f64 = kept.iter().map(|(w, _, _)| w).sum();
                        if total > 1e-12 {
                            out.push(Instance::Contraction {
                                joint: kept
                                    .into_iter()
                                    .map(|(w, k, z)| (w / total, k, z))
                                    .collect(),
                                p: *p,
                            });
                        }
                    }
                }
                let d = joint[0].1.dim();
                if d > 2 {
                    out.push(Instance::Contraction {
                        joint: joint
                            .iter()
                            .map(|(w, k, z)| {
                                (*w, principal_block(k, d - 1), principal_block(z, d - 1))
                            })
                            .collect(),
                        p: *p,
                    });
                }
                out.push(Instance::Contraction {
                    joint: joint
                        .iter()
                        .map(|(w, k, z)| (*w, k.scale(0.5), z.scale(0.5)))
                        .collect(),
                    p: *p,
                });
            }
            Instance::Convexity { a, b, gamma, p } => {
                if a.dim() > 2 {
                    out.push(Instance::Convexity {
                        a: principal_block(a, a.dim() - 1),
                        b: principal_block(b, b.dim() - 1),
                        gamma: *gamma,
                        p: *p,
                    });
                }
                out.push(Instance::Convexity {
                    a: a.scale(0.5),
                    b: b.scale(0.5),
                    gamma: *gamma,
                    p: *p,
                });
            }
            Instance::DirichletLaplace { q, mu, g, p } => {
                // Drop a chain state: reversibility is pairwise, so any
                // principal sub-chain (diagonal re-closed, measure
                // renormalized) stays reversible.
                if q.size() > 2 {
                    for skip in 0..q.size() {
                        if let Some(inst) = drop_state(q, mu, g, *p, skip) {
                            out.push(inst);
                        }
                    }
                }
                if g.dim() > 1 {
                    let nd = g.dim() - 1;
                    if let Ok(ng) = MatrixFunction::new(
                        g.space().clone(),
                        g.values().iter().map(|m| principal_block(m, nd)).collect(),
                    ) {
                        out.push(Instance::DirichletLaplace {
                            q: q.clone(),
                            mu: mu.clone(),
                            g: ng,
                            p: *p,
                        });
                    }
                }
                if let Ok(ng) = MatrixFunction::new(
                    g.space().clone(),
                    g.values().iter().map(|m| m.scale(0.5)).collect(),
                ) {
                    out.push(Instance::DirichletLaplace {
                        q: q.clone(),
                        mu: mu.clone(),
                        g: ng,
                        p: *p,
                    });
                }
            }
        }
        out
    }
}

/// Removes one state from a reversible chain instance, renormalizing the
/// stationary measure and re-closing the rate rows.
fn drop_state(
    q: &Generator,
    mu: &FiniteMeasure,
    g: &MatrixFunction,
    p: usize,
    skip: usize,
) -> Option<Instance> {
    let keep: Vec<usize> = (0..q.size()).filter(|&x| x != skip).collect();
    let total: f64 = keep.iter().map(|&x| mu.weight(x)).sum();
    if total <= 1e-12 {
        return None;
    }
    let m = keep.len();
    let mut rates = DMatrix::<f64>::zeros(m, m);
    for (i, &x) in keep.iter().enumerate() {
        for (j, &y) in keep.iter().enumerate() {
            if i != j {
                rates[(i, j)] = q.rate(x, y);
            }
        }
    }
    for i in 0..m {
        let exit: f64 = (0..m).filter(|&j| j != i).map(|j| rates[(i, j)]).sum();
        rates[(i, i)] = -exit;
    }
    let space = crate::chain::StateSpace::new(
        keep.iter().map(|&x| q.space().label(x).to_string()).collect(),
    )
    .ok()?;
    let measure =
        FiniteMeasure::new(space.clone(), keep.iter().map(|&x| mu.weight(x) / total).collect())
            .ok()?;
    let gen = Generator::reversible(space.clone(), rates, measure.clone()).ok()?;
    let gf = MatrixFunction::new(space, keep.iter().map(|&x| g.value(x).clone()).collect()).ok()?;
    Some(Instance::DirichletLaplace {
        q: gen,
        mu: measure,
        g: gf,
        p,
    })
}

/// A Hermitian draw rescaled to a target operator norm.
fn bounded_hermitian(d: usize, norm: f64, seed: u64) -> HermitianMatrix {
    let raw = random_hermitian(d, 1.0, seed);
    raw.scale(norm / raw.op_norm().max(1e-12))
}

/// A PSD draw rescaled to a target operator norm.
fn bounded_psd(d: usize, norm: f64, seed: u64) -> HermitianMatrix {
    let raw = random_psd(d, 1.0, seed);
    raw.scale(norm / raw.op_norm().max(1e-12))
}

/// Draws one random instance for an inequality. Norms stay bounded (‖·‖ ≤ 3)
/// because both sides involve exponentials; unbounded inputs overflow doubles
/// and test nothing.
fn random_instance(id: InequalityId, cfg: &FuzzConfig, trial_seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let (lo, hi) = cfg.d_range;
    let d = rng.random_range(lo..=hi);
    Ok(match id {
        InequalityId::MeanValueTrace => {
            let p = *[1usize, 2, 3].get(rng.random_range(0..3)).unwrap();
            let a = bounded_hermitian(d, rng.random_range(0.1..3.0), derive_seed(trial_seed, 1));
            let n_atoms = rng.random_range(1..=3);
            let probs = corpus::random_probability_vector(&mut rng, n_atoms, 0.1);
            let atoms = probs
                .into_iter()
                .enumerate()
                .map(|(i, w)| {
                    (
                        w,
                        bounded_hermitian(
                            d,
                            rng.random_range(0.1..3.0),
                            derive_seed(trial_seed, 10 + i as u64),
                        ),
                    )
                })
                .collect();
            Instance::MeanValue {
                a,
                b: MatrixDistribution::new(atoms)?,
                p,
                factor: if cfg.inject_mean_value_bug { 0.25 } else { 0.5 },
            }
        }
        InequalityId::ContractionPower => {
            let p = *[1.0f64, 2.0, 3.0, 5.5].get(rng.random_range(0..4)).unwrap();
            let n_atoms = rng.random_range(1..=3);
            let probs = corpus::random_probability_vector(&mut rng, n_atoms, 0.1);
            let joint = probs
                .into_iter()
                .enumerate()
                .map(|(i, w)| {
                    (
                        w,
                        bounded_hermitian(
                            d,
                            rng.random_range(0.1..1.5),
                            derive_seed(trial_seed, 20 + i as u64),
                        ),
                        bounded_psd(
                            d,
                            rng.random_range(0.1..2.0),
                            derive_seed(trial_seed, 40 + i as u64),
                        ),
                    )
                })
                .collect();
            Instance::Contraction { joint, p }
        }
        InequalityId::WeightedConvexity => {
            let gamma = *[1.1f64, 2.0, 10.0].get(rng.random_range(0..3)).unwrap();
            let p = *[2usize, 3, 4].get(rng.random_range(0..3)).unwrap();
            // PSD instances always satisfy the split; even p additionally
            // admits general Hermitian inputs.
            let general = p % 2 == 0 && rng.random::<bool>();
            let (a, b) = if general {
                (
                    bounded_hermitian(d, rng.random_range(0.1..3.0), derive_seed(trial_seed, 2)),
                    bounded_hermitian(d, rng.random_range(0.1..3.0), derive_seed(trial_seed, 3)),
                )
            } else {
                (
                    bounded_psd(d, rng.random_range(0.1..3.0), derive_seed(trial_seed, 2)),
                    bounded_psd(d, rng.random_range(0.1..3.0), derive_seed(trial_seed, 3)),
                )
            };
            Instance::Convexity { a, b, gamma, p }
        }
        InequalityId::DirichletLaplace => {
            let states = rng.random_range(2..=5);
            let (q, mu) = corpus::random_reversible_chain(states, derive_seed(trial_seed, 5))?;
            let gd = d.min(3);
            let raw = corpus::random_matrix_function(mu.space(), gd, 1.0, derive_seed(trial_seed, 6));
            // Bound ‖g‖ ≤ 1.5 so e^{2pg} stays ~1e4 at p = 3.
            let cap = 1.5 / raw.sup_norm().max(1e-9);
            let g = MatrixFunction::new(
                raw.space().clone(),
                raw.values().iter().map(|m| m.scale(cap.min(1.0))).collect(),
            )?;
            let p = *[1usize, 2, 3].get(rng.random_range(0..3)).unwrap();
            Instance::DirichletLaplace { q, mu, g, p }
        }
    })
}

/// Shrinks a violating instance: accepts a candidate move only when it still
/// violates at least as badly (margin ≤ current + 1e-12), repeating until no
/// move is accepted (or a generous round cap, as halving can in principle
/// keep qualifying).
fn shrink(mut inst: Instance, mut margin: f64, tol: Tolerance) -> (Instance, f64) {
    for _ in 0..64 {
        let mut accepted = false;
        for cand in inst.shrink_moves() {
            if let Ok(res) = cand.evaluate(tol) {
                if !res.pass && res.margin <= margin + 1e-12 {
                    inst = cand;
                    margin = res.margin;
                    accepted = true;
                    break;
                }
            }
        }
        if !accepted {
            break;
        }
    }
    (inst, margin)
}

/// Runs seeded fuzz trials for each configured inequality and reports
/// violations after shrinking. Trials run in parallel; reports are
/// aggregated in trial order, so output is deterministic in
/// `(config, master_seed)` and independent of thread count.
pub fn fuzz_campaign(config: &FuzzConfig, master_seed: u64) -> Result<Vec<FuzzReport>> {
    if config.trials == 0 {
        return Err(Error::validation("a fuzz campaign needs at least one trial"));
    }
    let (lo, hi) = config.d_range;
    if lo < 1 || hi < lo || hi > 6 {
        return Err(Error::validation(format!(
            "d_range [{lo}, {hi}] must satisfy 1 ≤ lo ≤ hi ≤ 6"
        )));
    }
    config
        .inequalities
        .iter()
        .map(|&id| {
            let stream = derive_seed(master_seed, id.stream());
            let outcomes: Vec<(u64, f64, bool)> = (0..config.trials as u64)
                .into_par_iter()
                .map(|t| {
                    let seed = derive_seed(stream, t);
                    let inst = random_instance(id, config, seed)?;
                    let res = inst.evaluate(config.tolerance)?;
                    Ok((seed, res.margin, res.pass))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut violations = Vec::new();
            let mut worst = f64::INFINITY;
            for &(seed, margin, pass) in &outcomes {
                worst = worst.min(margin);
                if !pass {
                    let inst = random_instance(id, config, seed)?;
                    let (shrunk, shrunk_margin) = shrink(inst, margin, config.tolerance);
                    violations.push(Violation {
                        seed,
                        margin,
                        shrunk_margin,
                        shrunk: shrunk.describe(),
                    });
                }
            }
            Ok(FuzzReport {
                inequality: id,
                trials: config.trials,
                violations,
                worst_margin: worst,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::StateSpace;
    use crate::matcore::{expm_taylor, CMatrix, Complex64};
    use approx::assert_abs_diff_eq;

    #[test]
    fn mean_value_point_mass_is_exactly_tight() {
        let a = random_hermitian(3, 1.0, 1);
        let b = MatrixDistribution::point_mass(a.clone());
        for p in [1usize, 2, 3] {
            let res = check_mean_value_trace(&a, &b, p, Tolerance::default()).unwrap();
            assert!(res.pass);
            assert!(res.margin.abs() < 1e-12, "p = {p}: {:.3e}", res.margin);
        }
    }

    #[test]
    fn mean_value_agrees_with_a_raw_product_expansion_at_p_one() {
        // Double implementation: both sides rebuilt from scaling-and-squaring
        // exponentials and raw complex products — no spectral calculus.
        for seed in 0..10u64 {
            let a = bounded_hermitian(3, 1.2, seed);
            let b1 = bounded_hermitian(3, 1.5, 100 + seed);
            let b2 = bounded_hermitian(3, 0.8, 200 + seed);
            let b = MatrixDistribution::new(vec![(0.4, b1.clone()), (0.6, b2.clone())]).unwrap();
            let res = check_mean_value_trace(&a, &b, 1, Tolerance::default()).unwrap();

            let ta = expm_taylor(a.matrix());
            let mut lhs = 0.0;
            let mut mid = 0.0;
            let mut second = crate::matcore::CMatrix::zeros(3, 3);
            for (w, bi) in b.atoms() {
                let tb = expm_taylor(bi.matrix());
                let diff_exp = &ta - &tb;
                lhs += w * (&diff_exp * &diff_exp).trace().re;
                let dm = a.matrix() - bi.matrix();
                let t2b = expm_taylor(&(bi.matrix() * num_complex::Complex64::new(2.0, 0.0)));
                mid += w * (&dm * &t2b * &dm).trace().re;
                second += (&dm * &dm).scale(*w);
            }
            let outer = (&ta * &second * &ta).trace().re;
            let margin_raw = 0.5 * (mid + outer) - lhs;
            assert_abs_diff_eq!(res.margin, margin_raw, epsilon = 1e-9 * (1.0 + res.scale));
            assert!(res.pass, "seed {seed}");
        }
    }

    #[test]
    fn contraction_oracles() {
        // K = I, deterministic Z: both sides equal Z. Keep Z well away from
        // singular so the root's backward-error shift perturbs the equality
        // by ~η/p rather than ~η^{1/p}.
        let z = &random_psd(3, 1.0, 9) + &HermitianMatrix::identity(3);
        let joint = vec![(1.0, HermitianMatrix::identity(3), z)];
        for p in [1.0, 2.0, 5.5] {
            let res = check_contraction_power(&joint, p, Tolerance::default()).unwrap();
            assert!(res.pass);
            assert!(res.margin.abs() < 1e-10, "p = {p}: {:.3e}", res.margin);
        }
        // K = I, two-atom Z: operator Jensen for the concave t ↦ t^{1/p}.
        let joint = vec![
            (0.3, HermitianMatrix::identity(2), random_psd(2, 1.0, 10)),
            (0.7, HermitianMatrix::identity(2), random_psd(2, 2.0, 11)),
        ];
        let res = check_contraction_power(&joint, 3.0, Tolerance::default()).unwrap();
        assert!(res.pass);
        assert!(res.margin >= -1e-12);
        // A Z atom with a negative eigenvalue is rejected.
        let bad = vec![(1.0, HermitianMatrix::identity(2), HermitianMatrix::from_diagonal(&[1.0, -0.5]))];
        assert!(check_contraction_power(&bad, 2.0, Tolerance::default()).is_err());
        // Oversized K gets rescaled rather than rejected.
        let joint = vec![(1.0, HermitianMatrix::identity(2).scale(5.0), random_psd(2, 1.0, 12))];
        let res = check_contraction_power(&joint, 2.0, Tolerance::default()).unwrap();
        assert!(res.pass);
        let w = res.witness.unwrap();
        assert!(w["rescaled_by"].as_f64().unwrap() < 1.0);
    }

    #[test]
    fn contraction_root_survives_near_singular_z() {
        // Z with λ_min ≈ 1.6e-3 at p = 5.5: Z^p has an eigenvalue ~2e-16
        // that roundoff can push negative. With a plain clamped root that
        // eigenvalue maps to 0 instead of ~8e-4 (t^{1/p} has unbounded slope
        // at 0⁺) and the check reports a spurious ~7e-4 violation; the
        // backward-error shift keeps it nonnegative.
        let k = HermitianMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.45371768253548583, 0.0),
                Complex64::new(-0.01623399217914894, -0.2780338961373542),
                Complex64::new(-0.01623399217914894, 0.2780338961373542),
                Complex64::new(-0.8412886660543597, 0.0),
            ],
        ))
        .unwrap();
        let z = HermitianMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.5497833941581648, 0.0),
                Complex64::new(-0.06843461494169813, -0.7508712507688281),
                Complex64::new(-0.06843461494169813, 0.7508712507688281),
                Complex64::new(1.0387505537288355, 0.0),
            ],
        ))
        .unwrap();
        let res =
            check_contraction_power(&[(1.0, k, z)], 5.5, Tolerance::new(1e-8, 1e-8).unwrap())
                .unwrap();
        assert!(res.pass, "margin = {:.3e}", res.margin);
        assert!(res.margin >= -1e-12, "margin = {:.3e}", res.margin);
        let shift = res.witness.unwrap()["root_shift"].as_f64().unwrap();
        assert!(shift > 0.0 && shift < 1e-10);
    }

    #[test]
    fn convexity_oracles() {
        let a = bounded_psd(3, 2.0, 21);
        let b = bounded_psd(3, 1.0, 22);
        // p = 1: additivity of the trace makes it an identity.
        let res = check_weighted_convexity(&a, &b, 2.0, 1, Tolerance::default()).unwrap();
        assert!(res.pass);
        assert!(res.margin.abs() < 1e-12);
        // B = 0: the margin reduces to ((γ/(γ−1))^{p−1} − 1)·Tr(A^p).
        let zero = HermitianMatrix::zeros(3);
        for (gamma, p) in [(1.1f64, 2usize), (2.0, 3), (10.0, 4)] {
            let res = check_weighted_convexity(&a, &zero, gamma, p, Tolerance::default()).unwrap();
            let expected =
                ((gamma / (gamma - 1.0)).powi(p as i32 - 1) - 1.0) * psd_power(&a, p as f64).unwrap().trace();
            assert!(res.pass);
            assert_abs_diff_eq!(res.margin, expected, epsilon = 1e-10 * (1.0 + expected));
        }
        assert!(check_weighted_convexity(&a, &b, 1.0, 2, Tolerance::default()).is_err());
        assert!(check_weighted_convexity(&a, &b, 2.0, 0, Tolerance::default()).is_err());
    }

    #[test]
    fn dirichlet_laplace_scalar_cross_check() {
        // Two states, scalar g: rebuild both sides with bare floats.
        let space = StateSpace::indexed(2).unwrap();
        let pi = FiniteMeasure::new(space.clone(), vec![0.25, 0.75]).unwrap();
        let (q01, q10) = (1.5, 0.5);
        let rates = DMatrix::from_row_slice(2, 2, &[-q01, q01, q10, -q10]);
        let q = Generator::reversible(space.clone(), rates, pi.clone()).unwrap();
        let (g0, g1) = (-0.3, 0.8);
        let g = MatrixFunction::new(
            space,
            vec![
                HermitianMatrix::from_diagonal(&[g0]),
                HermitianMatrix::from_diagonal(&[g1]),
            ],
        )
        .unwrap();
        for p in [1usize, 2, 3] {
            let res = check_dirichlet_laplace(&q, &pi, &g, p, Tolerance::default()).unwrap();
            let energy = 0.25 * q01 * (g1.exp() - g0.exp()).powi(2); // π₀q₀₁(e^{g₁}−e^{g₀})²
            let v = 0.5 * (q01.max(q10)) * (g1 - g0).powi(2);
            let lhs = energy.powi(p as i32);
            let rhs = v.powi(p as i32)
                * (0.25 * (2.0 * p as f64 * g0).exp() + 0.75 * (2.0 * p as f64 * g1).exp());
            let w = res.witness.as_ref().unwrap();
            assert_abs_diff_eq!(w["lhs"].as_f64().unwrap(), lhs, epsilon = 1e-12 * (1.0 + lhs));
            assert_abs_diff_eq!(w["rhs"].as_f64().unwrap(), rhs, epsilon = 1e-12 * (1.0 + rhs));
            assert!(res.pass, "p = {p}");
        }
        // Constant g: both sides vanish.
        let space = StateSpace::indexed(2).unwrap();
        let c = MatrixFunction::constant(space.clone(), random_hermitian(2, 1.0, 30));
        let uniform = FiniteMeasure::uniform(space.clone());
        let sym = Generator::reversible(
            space,
            DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]),
            uniform.clone(),
        )
        .unwrap();
        let res = check_dirichlet_laplace(&sym, &uniform, &c, 2, Tolerance::default()).unwrap();
        assert!(res.pass);
        assert!(res.margin.abs() < 1e-12);
    }

    #[test]
    fn dirichlet_laplace_requires_reversibility() {
        // An untagged, non-reversible generator is rejected by the Dirichlet
        // form underneath.
        let space = StateSpace::indexed(3).unwrap();
        let rates = DMatrix::from_row_slice(
            3,
            3,
            &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0, 1.0, 0.0, -1.0],
        );
        let q = Generator::new(space.clone(), rates).unwrap();
        let mu = FiniteMeasure::uniform(space.clone());
        let g = MatrixFunction::constant(space, HermitianMatrix::identity(2));
        assert!(check_dirichlet_laplace(&q, &mu, &g, 1, Tolerance::default()).is_err());
    }

    #[test]
    fn campaign_default_corpus_is_clean() {
        let config = FuzzConfig {
            trials: 60,
            ..FuzzConfig::default()
        };
        let reports = fuzz_campaign(&config, 7).unwrap();
        assert_eq!(reports.len(), 4);
        for r in &reports {
            assert!(
                r.violations.is_empty(),
                "{:?}: worst margin {:.3e}, first violation {:?}",
                r.inequality,
                r.worst_margin,
                r.violations.first().map(|v| v.seed)
            );
            assert_eq!(r.trials, 60);
        }
    }

    #[test]
    fn campaign_is_deterministic_and_order_independent() {
        let mut config = FuzzConfig {
            trials: 25,
            ..FuzzConfig::default()
        };
        let a = fuzz_campaign(&config, 99).unwrap();
        let b = fuzz_campaign(&config, 99).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        // Per-inequality streams don't depend on list order.
        config.inequalities.reverse();
        let c = fuzz_campaign(&config, 99).unwrap();
        for r in &a {
            let mirror = c.iter().find(|x| x.inequality == r.inequality).unwrap();
            assert_eq!(r.worst_margin, mirror.worst_margin);
        }
        // Empty inequality list → empty report list.
        let empty = FuzzConfig {
            inequalities: vec![],
            ..FuzzConfig::default()
        };
        assert!(fuzz_campaign(&empty, 1).unwrap().is_empty());
    }

    #[test]
    fn injected_bug_is_caught_and_shrunk() {
        let config = FuzzConfig {
            inequalities: vec![InequalityId::MeanValueTrace],
            trials: 40,
            inject_mean_value_bug: true,
            ..FuzzConfig::default()
        };
        let reports = fuzz_campaign(&config, 3).unwrap();
        let report = &reports[0];
        assert!(
            !report.violations.is_empty(),
            "the ¼-factor bug must produce violations"
        );
        for v in &report.violations {
            // Shrinking preserved (or deepened) the violation.
            assert!(v.shrunk_margin <= v.margin + 1e-12);
            assert!(v.shrunk_margin < 0.0);
        }
        // At least one case shrinks to the minimal shape: d = 2, single atom.
        assert!(
            report.violations.iter().any(|v| {
                v.shrunk["d"].as_u64() == Some(2)
                    && v.shrunk["atoms"].as_array().map(|a| a.len()) == Some(1)
            }),
            "expected a d=2 single-atom shrunk instance"
        );
        // The honest factor on the same seeds is clean.
        let honest = FuzzConfig {
            inject_mean_value_bug: false,
            ..config
        };
        assert!(fuzz_campaign(&honest, 3).unwrap()[0].violations.is_empty());
    }

    #[test]
    fn config_json_round_trip_and_unknown_ids() {
        let json = r#"{
            "inequalities": ["mean_value_trace", "weighted_convexity"],
            "trials": 12,
            "d_range": [2, 2],
            "seed": 5,
            "tolerance": {"abs": 1e-8, "rel": 1e-8}
        }"#;
        let config: FuzzConfig = serde_json::from_str(json).unwrap();
        assert_eq!(config.inequalities.len(), 2);
        assert_eq!(config.d_range, (2, 2));
        assert!(!config.inject_mean_value_bug);
        let bad = r#"{"inequalities": ["not_an_inequality"]}"#;
        assert!(serde_json::from_str::<FuzzConfig>(bad).is_err());
        // Defaults fill the optional fields.
        let minimal: FuzzConfig = serde_json::from_str(r#"{"inequalities": []}"#).unwrap();
        assert_eq!(minimal.trials, 1000);
        assert_eq!(minimal.tolerance.abs, 1e-8);
    }

    #[test]
    fn campaign_validates_its_config() {
        let zero_trials = FuzzConfig {
            trials: 0,
            ..FuzzConfig::default()
        };
        assert!(fuzz_campaign(&zero_trials, 0).is_err());
        let bad_range = FuzzConfig {
            d_range: (3, 2),
            ..FuzzConfig::default()
        };
        assert!(fuzz_campaign(&bad_range, 0).is_err());
    }
}
