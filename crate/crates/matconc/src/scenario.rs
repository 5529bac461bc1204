//! Scenario files: JSON descriptions of what to verify.
//!
//! A scenario names a `kind` (which mathematical setting), carries that
//! kind's payload inline, and optionally selects named `checks` and an
//! `output` destination. Validation is field-precise: every problem is
//! reported with the JSON pointer of the offending value, and all problems
//! found are reported together rather than one at a time.
//!
//! ```json
//! {
//!   "kind": "finite_chain",
//!   "states": ["a", "b"],
//!   "Q": [[-1.0, 1.0], [2.0, -2.0]],
//!   "mu": [0.6666666666666666, 0.3333333333333333],
//!   "f": {"d": 2, "values": [{"d": 2, "re": [[1,0],[0,0]]}, {"d": 2, "re": [[0,0],[0,1]]}]},
//!   "checks": ["poincare", {"name": "tail", "points": 50}],
//!   "output": {"path": "chain.json", "format": "json"}
//! }
//! ```

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::chain::{FiniteMeasure, Generator, MatrixFunction, StateSpace};
use crate::error::{ConfigError, Error, Result};
use crate::gaussian::MatrixPolynomial;
use crate::matcore::HermitianMatrix;
use crate::product::ProductSpace;
use crate::report::ReportFormat;
use crate::scp::{builtin_measure, CubeMeasure, CubeMeasureFamily, FlowOrder};
use crate::traceineq::FuzzConfig;

/// The mathematical settings a scenario can describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    FiniteChain,
    Product,
    Gaussian,
    Scp,
    Fuzz,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::FiniteChain => "finite_chain",
            ScenarioKind::Product => "product",
            ScenarioKind::Gaussian => "gaussian",
            ScenarioKind::Scp => "scp",
            ScenarioKind::Fuzz => "fuzz",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "finite_chain" => ScenarioKind::FiniteChain,
            "product" => ScenarioKind::Product,
            "gaussian" => ScenarioKind::Gaussian,
            "scp" => ScenarioKind::Scp,
            "fuzz" => ScenarioKind::Fuzz,
            _ => return None,
        })
    }
}

/// Check names each kind understands. Suites run all of these by default;
/// a scenario's `checks` list narrows the selection.
pub fn allowed_checks(kind: ScenarioKind) -> &'static [&'static str] {
    match kind {
        ScenarioKind::FiniteChain => &[
            "generator",
            "poincare",
            "variance-identity",
            "semigroup",
            "laplace",
            "recursion",
            "tail",
        ],
        ScenarioKind::Product => &["poincare", "semigroup", "tail"],
        ScenarioKind::Gaussian => &["poincare", "moments", "tail"],
        ScenarioKind::Scp => &["scp", "generator", "poincare", "tail"],
        ScenarioKind::Fuzz => &[],
    }
}

/// One selected check, with optional JSON parameters (e.g. grid sizes).
#[derive(Debug, Clone)]
pub struct CheckSpec {
    pub name: String,
    pub params: Map<String, Value>,
}

impl CheckSpec {
    /// Numeric parameter lookup with a default.
    pub fn f64_param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).and_then(Value::as_f64).unwrap_or(default)
    }

    pub fn usize_param(&self, key: &str, default: usize) -> usize {
        self.params
            .get(key)
            .and_then(Value::as_u64)
            .map(|v| v as usize)
            .unwrap_or(default)
    }
}

/// Where a suite writes its report.
#[derive(Debug, Clone)]
pub struct OutputSpec {
    pub path: PathBuf,
    pub format: ReportFormat,
}

/// Fully validated payload: runtime objects, not raw JSON.
#[derive(Debug, Clone)]
pub enum ScenarioPayload {
    FiniteChain {
        q: Generator,
        mu: FiniteMeasure,
        f: Option<MatrixFunction>,
    },
    Product {
        space: ProductSpace,
        f: Option<MatrixFunction>,
    },
    Gaussian {
        poly: MatrixPolynomial,
        /// Coordinate box for scanning sup‖Γ‖ when Γ is nonconstant.
        bounding_box: Option<(f64, f64)>,
    },
    Scp {
        measure: CubeMeasure,
        f: Option<MatrixFunction>,
        order: FlowOrder,
    },
    Fuzz(FuzzConfig),
}

/// A validated scenario, ready for dispatch.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub payload: ScenarioPayload,
    pub checks: Vec<CheckSpec>,
    pub output: Option<OutputSpec>,
}

impl Scenario {
    /// The checks a suite should run: the scenario's selection, or `defaults`
    /// (an `allowed_checks` subset) when no selection was made.
    pub fn selected_checks(&self, defaults: &[&str]) -> Vec<CheckSpec> {
        if self.checks.is_empty() {
            defaults
                .iter()
                .map(|&name| CheckSpec {
                    name: name.to_string(),
                    params: Map::new(),
                })
                .collect()
        } else {
            self.checks.clone()
        }
    }
}

// ---------------------------------------------------------------------------
// Validation plumbing
// ---------------------------------------------------------------------------

/// Collects field-level problems; validation continues past the first error
/// so a bad file is diagnosed in one pass.
#[derive(Default)]
struct Ctx {
    errors: Vec<ConfigError>,
}

impl Ctx {
    fn err(&mut self, pointer: impl Into<String>, message: impl Into<String>) {
        self.errors.push(ConfigError {
            pointer: pointer.into(),
            message: message.into(),
        });
    }

    fn finish(self) -> Result<()> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(self.errors))
        }
    }
}

fn as_object<'a>(v: &'a Value, ptr: &str, ctx: &mut Ctx) -> Option<&'a Map<String, Value>> {
    match v.as_object() {
        Some(o) => Some(o),
        None => {
            ctx.err(ptr, "expected a JSON object");
            None
        }
    }
}

fn as_array<'a>(v: &'a Value, ptr: &str, ctx: &mut Ctx) -> Option<&'a Vec<Value>> {
    match v.as_array() {
        Some(a) => Some(a),
        None => {
            ctx.err(ptr, "expected a JSON array");
            None
        }
    }
}

fn as_str<'a>(v: &'a Value, ptr: &str, ctx: &mut Ctx) -> Option<&'a str> {
    match v.as_str() {
        Some(s) => Some(s),
        None => {
            ctx.err(ptr, "expected a string");
            None
        }
    }
}

fn as_f64(v: &Value, ptr: &str, ctx: &mut Ctx) -> Option<f64> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Some(x),
        _ => {
            ctx.err(ptr, "expected a finite number");
            None
        }
    }
}

fn as_usize(v: &Value, ptr: &str, ctx: &mut Ctx) -> Option<usize> {
    match v.as_u64() {
        Some(x) => Some(x as usize),
        None => {
            ctx.err(ptr, "expected a nonnegative integer");
            None
        }
    }
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str, ctx: &mut Ctx) -> Option<&'a Value> {
    match obj.get(key) {
        Some(v) => Some(v),
        None => {
            ctx.err(format!("/{key}"), "missing required field");
            None
        }
    }
}

fn float_vec(v: &Value, ptr: &str, ctx: &mut Ctx) -> Option<Vec<f64>> {
    let arr = as_array(v, ptr, ctx)?;
    let mut out = Vec::with_capacity(arr.len());
    for (i, e) in arr.iter().enumerate() {
        out.push(as_f64(e, &format!("{ptr}/{i}"), ctx)?);
    }
    Some(out)
}

fn parse_matrix(v: &Value, ptr: &str, ctx: &mut Ctx) -> Option<HermitianMatrix> {
    match serde_json::from_value::<HermitianMatrix>(v.clone()) {
        Ok(m) => Some(m),
        Err(e) => {
            ctx.err(ptr, format!("invalid matrix: {e}"));
            None
        }
    }
}

/// Parses `{"d": int, "values": [matrix, ...]}` against a known state space.
fn parse_matrix_function(
    v: &Value,
    ptr: &str,
    space: &StateSpace,
    ctx: &mut Ctx,
) -> Option<MatrixFunction> {
    let obj = as_object(v, ptr, ctx)?;
    for key in obj.keys() {
        if key != "d" && key != "values" {
            ctx.err(format!("{ptr}/{key}"), "unknown field (expected d, values)");
        }
    }
    let d = required_at(obj, "d", ptr, ctx).and_then(|v| as_usize(v, &format!("{ptr}/d"), ctx))?;
    let values = required_at(obj, "values", ptr, ctx)?;
    let arr = as_array(values, &format!("{ptr}/values"), ctx)?;
    if arr.len() != space.size() {
        ctx.err(
            format!("{ptr}/values"),
            format!("expected {} values (one per state), got {}", space.size(), arr.len()),
        );
        return None;
    }
    let mut mats = Vec::with_capacity(arr.len());
    for (i, e) in arr.iter().enumerate() {
        let vptr = format!("{ptr}/values/{i}");
        let m = parse_matrix(e, &vptr, ctx)?;
        if m.dim() != d {
            ctx.err(vptr, format!("dimension {} does not match d = {d}", m.dim()));
            return None;
        }
        mats.push(m);
    }
    match MatrixFunction::new(space.clone(), mats) {
        Ok(f) => Some(f),
        Err(e) => {
            ctx.err(ptr, e.to_string());
            None
        }
    }
}

fn required_at<'a>(
    obj: &'a Map<String, Value>,
    key: &str,
    base: &str,
    ctx: &mut Ctx,
) -> Option<&'a Value> {
    match obj.get(key) {
        Some(v) => Some(v),
        None => {
            ctx.err(format!("{base}/{key}"), "missing required field");
            None
        }
    }
}

fn reject_unknown_keys(obj: &Map<String, Value>, allowed: &[&str], ctx: &mut Ctx) {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            ctx.err(
                format!("/{key}"),
                format!("unknown field (expected one of: {})", allowed.join(", ")),
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Per-kind payload validation
// ---------------------------------------------------------------------------

fn parse_finite_chain(obj: &Map<String, Value>, ctx: &mut Ctx) -> Option<ScenarioPayload> {
    let q_rows: Vec<Vec<f64>> = {
        let v = required(obj, "Q", ctx)?;
        let rows = as_array(v, "/Q", ctx)?;
        let n = rows.len();
        if n == 0 {
            ctx.err("/Q", "the rate matrix must be nonempty");
            return None;
        }
        let mut out = Vec::with_capacity(n);
        for (i, row) in rows.iter().enumerate() {
            let ptr = format!("/Q/{i}");
            let row = float_vec(row, &ptr, ctx)?;
            if row.len() != n {
                ctx.err(ptr, format!("expected {n} entries, got {}", row.len()));
                return None;
            }
            out.push(row);
        }
        out
    };
    let n = q_rows.len();
    // Structural checks row by row, so the pointer names the culprit.
    let mut structural_ok = true;
    for (i, row) in q_rows.iter().enumerate() {
        let scale = row.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        let sum: f64 = row.iter().sum();
        if sum.abs() > 1e-9 * (1.0 + scale) {
            ctx.err(format!("/Q/{i}"), format!("row sum {sum:.3e} must be 0"));
            structural_ok = false;
        }
        for (j, &e) in row.iter().enumerate() {
            if i != j && e < 0.0 {
                ctx.err(
                    format!("/Q/{i}"),
                    format!("off-diagonal rate Q[{i}][{j}] = {e} must be ≥ 0"),
                );
                structural_ok = false;
                break;
            }
        }
    }
    let space = match obj.get("states") {
        Some(v) => {
            let arr = as_array(v, "/states", ctx)?;
            if arr.len() != n {
                ctx.err("/states", format!("expected {n} labels, got {}", arr.len()));
                return None;
            }
            let mut labels = Vec::with_capacity(n);
            for (i, e) in arr.iter().enumerate() {
                labels.push(as_str(e, &format!("/states/{i}"), ctx)?.to_string());
            }
            match StateSpace::new(labels) {
                Ok(s) => s,
                Err(e) => {
                    ctx.err("/states", e.to_string());
                    return None;
                }
            }
        }
        None => StateSpace::indexed(n).ok()?,
    };
    let mu = {
        let v = required(obj, "mu", ctx)?;
        let weights = float_vec(v, "/mu", ctx)?;
        if weights.len() != n {
            ctx.err("/mu", format!("expected {n} weights, got {}", weights.len()));
            return None;
        }
        match FiniteMeasure::new(space.clone(), weights) {
            Ok(m) => m,
            Err(e) => {
                ctx.err("/mu", e.to_string());
                return None;
            }
        }
    };
    if !structural_ok {
        return None;
    }
    let rates = nalgebra::DMatrix::from_fn(n, n, |i, j| q_rows[i][j]);
    let q = match Generator::reversible(space.clone(), rates, mu.clone()) {
        Ok(q) => q,
        Err(e) => {
            ctx.err("/Q", e.to_string());
            return None;
        }
    };
    let f = match obj.get("f") {
        Some(v) => Some(parse_matrix_function(v, "/f", &space, ctx)?),
        None => None,
    };
    Some(ScenarioPayload::FiniteChain { q, mu, f })
}

fn parse_product(obj: &Map<String, Value>, ctx: &mut Ctx) -> Option<ScenarioPayload> {
    let product = as_object(required(obj, "product", ctx)?, "/product", ctx)?;
    for key in product.keys() {
        if key != "factors" {
            ctx.err(format!("/product/{key}"), "unknown field (expected factors)");
        }
    }
    let factors_v = required_at(product, "factors", "/product", ctx)?;
    let factors_arr = as_array(factors_v, "/product/factors", ctx)?;
    if factors_arr.is_empty() {
        ctx.err("/product/factors", "at least one factor is required");
        return None;
    }
    let mut factors = Vec::with_capacity(factors_arr.len());
    for (i, e) in factors_arr.iter().enumerate() {
        let base = format!("/product/factors/{i}");
        let fo = as_object(e, &base, ctx)?;
        let weights_v = required_at(fo, "weights", &base, ctx)?;
        let wptr = format!("{base}/weights");
        let weights = float_vec(weights_v, &wptr, ctx)?;
        let space = StateSpace::indexed(weights.len().max(1)).ok()?;
        match FiniteMeasure::new(space, weights) {
            Ok(m) => factors.push(m),
            Err(err) => {
                ctx.err(wptr, err.to_string());
                return None;
            }
        }
    }
    let space = match ProductSpace::new(factors) {
        Ok(s) => s,
        Err(e) => {
            ctx.err("/product/factors", e.to_string());
            return None;
        }
    };
    let f = match obj.get("f") {
        Some(v) => Some(parse_matrix_function(v, "/f", space.joint_space(), ctx)?),
        None => None,
    };
    Some(ScenarioPayload::Product { space, f })
}

fn parse_gaussian(obj: &Map<String, Value>, ctx: &mut Ctx) -> Option<ScenarioPayload> {
    let n = required(obj, "n", ctx).and_then(|v| as_usize(v, "/n", ctx))?;
    let d = required(obj, "d", ctx).and_then(|v| as_usize(v, "/d", ctx))?;
    let terms_v = required(obj, "terms", ctx)?;
    let terms_arr = as_array(terms_v, "/terms", ctx)?;
    let mut terms = Vec::with_capacity(terms_arr.len());
    for (i, e) in terms_arr.iter().enumerate() {
        let base = format!("/terms/{i}");
        let to = as_object(e, &base, ctx)?;
        for key in to.keys() {
            if key != "exponents" && key != "coeff" {
                ctx.err(format!("{base}/{key}"), "unknown field (expected exponents, coeff)");
            }
        }
        let eptr = format!("{base}/exponents");
        let exponents_v = required_at(to, "exponents", &base, ctx)?;
        let earr = as_array(exponents_v, &eptr, ctx)?;
        let mut exponents = Vec::with_capacity(earr.len());
        for (j, x) in earr.iter().enumerate() {
            exponents.push(as_usize(x, &format!("{eptr}/{j}"), ctx)? as u32);
        }
        if exponents.len() != n {
            ctx.err(eptr, format!("expected {n} exponents, got {}", exponents.len()));
            return None;
        }
        let cptr = format!("{base}/coeff");
        let coeff = parse_matrix(required_at(to, "coeff", &base, ctx)?, &cptr, ctx)?;
        if coeff.dim() != d {
            ctx.err(cptr, format!("dimension {} does not match d = {d}", coeff.dim()));
            return None;
        }
        terms.push((exponents, coeff));
    }
    let poly = match MatrixPolynomial::new(n, d, terms) {
        Ok(p) => p,
        Err(e) => {
            ctx.err("/terms", e.to_string());
            return None;
        }
    };
    let bounding_box = match obj.get("box") {
        Some(v) => {
            let b = float_vec(v, "/box", ctx)?;
            if b.len() != 2 || b[0] >= b[1] {
                ctx.err("/box", "expected [lo, hi] with lo < hi");
                return None;
            }
            Some((b[0], b[1]))
        }
        None => None,
    };
    Some(ScenarioPayload::Gaussian { poly, bounding_box })
}

fn parse_scp(obj: &Map<String, Value>, ctx: &mut Ctx) -> Option<ScenarioPayload> {
    let measure = if let Some(b) = obj.get("builtin") {
        let bo = as_object(b, "/builtin", ctx)?;
        for key in bo.keys() {
            if !["kind", "n", "k", "params"].contains(&key.as_str()) {
                ctx.err(
                    format!("/builtin/{key}"),
                    "unknown field (expected kind, n, k, params)",
                );
            }
        }
        let kind = as_str(required_at(bo, "kind", "/builtin", ctx)?, "/builtin/kind", ctx)?;
        let family = match kind {
            "uniform" => CubeMeasureFamily::UniformSlice,
            "bernoulli" => CubeMeasureFamily::ConditionedBernoulli,
            other => {
                ctx.err(
                    "/builtin/kind",
                    format!("unknown family \"{other}\" (expected uniform or bernoulli)"),
                );
                return None;
            }
        };
        let n = as_usize(required_at(bo, "n", "/builtin", ctx)?, "/builtin/n", ctx)?;
        let k = as_usize(required_at(bo, "k", "/builtin", ctx)?, "/builtin/k", ctx)?;
        let params = match bo.get("params") {
            Some(v) => Some(float_vec(v, "/builtin/params", ctx)?),
            None => None,
        };
        match builtin_measure(family, n, k, params.as_deref()) {
            Ok(m) => m,
            Err(e) => {
                ctx.err("/builtin", e.to_string());
                return None;
            }
        }
    } else {
        let n = as_usize(required(obj, "n", ctx)?, "/n", ctx)?;
        let k = as_usize(required(obj, "k", ctx)?, "/k", ctx)?;
        let weights_v = required(obj, "weights", ctx)?;
        let wo = as_object(weights_v, "/weights", ctx)?;
        let mut weights = Vec::with_capacity(wo.len());
        let mut total = 0.0;
        for (label, wv) in wo {
            let ptr = format!("/weights/{label}");
            if label.len() != n {
                ctx.err(ptr, format!("label has {} characters, expected n = {n}", label.len()));
                return None;
            }
            let mask = match crate::scp::parse_config_label(label) {
                Ok(m) => m,
                Err(e) => {
                    ctx.err(ptr, e.to_string());
                    return None;
                }
            };
            if mask.count_ones() as usize != k {
                ctx.err(ptr, format!("label has {} ones, expected k = {k}", mask.count_ones()));
                return None;
            }
            let w = as_f64(wv, &ptr, ctx)?;
            if w <= 0.0 {
                ctx.err(ptr, format!("weight {w} must be positive"));
                return None;
            }
            total += w;
            weights.push((mask, w));
        }
        if (total - 1.0).abs() > 1e-12 {
            ctx.err("/weights", format!("weights sum to {total}, expected 1 within 1e-12"));
            return None;
        }
        match CubeMeasure::new(n, k, weights) {
            Ok(m) => m,
            Err(e) => {
                ctx.err("/weights", e.to_string());
                return None;
            }
        }
    };
    let order = match obj.get("order") {
        Some(v) => match as_str(v, "/order", ctx)? {
            "lex" => FlowOrder::Lexicographic,
            "revlex" => FlowOrder::ReverseLexicographic,
            other => {
                ctx.err("/order", format!("unknown order \"{other}\" (expected lex or revlex)"));
                return None;
            }
        },
        None => FlowOrder::default(),
    };
    let f = match obj.get("f") {
        Some(v) => {
            let base = "/f";
            let fo = as_object(v, base, ctx)?;
            for key in fo.keys() {
                if key != "d" && key != "values" {
                    ctx.err(format!("{base}/{key}"), "unknown field (expected d, values)");
                }
            }
            let d = as_usize(required_at(fo, "d", base, ctx)?, "/f/d", ctx)?;
            let values = as_object(required_at(fo, "values", base, ctx)?, "/f/values", ctx)?;
            let space = measure.state_space();
            if values.len() != space.size() {
                ctx.err(
                    "/f/values",
                    format!(
                        "expected one matrix per support configuration ({} labels), got {}",
                        space.size(),
                        values.len()
                    ),
                );
                return None;
            }
            let mut mats = Vec::with_capacity(space.size());
            for label in space.labels() {
                let ptr = format!("/f/values/{label}");
                let Some(mv) = values.get(label) else {
                    ctx.err("/f/values", format!("missing matrix for configuration \"{label}\""));
                    return None;
                };
                let m = parse_matrix(mv, &ptr, ctx)?;
                if m.dim() != d {
                    ctx.err(ptr, format!("dimension {} does not match d = {d}", m.dim()));
                    return None;
                }
                mats.push(m);
            }
            match MatrixFunction::new(space, mats) {
                Ok(f) => Some(f),
                Err(e) => {
                    ctx.err("/f", e.to_string());
                    return None;
                }
            }
        }
        None => None,
    };
    Some(ScenarioPayload::Scp { measure, f, order })
}

fn parse_fuzz(obj: &Map<String, Value>, ctx: &mut Ctx) -> Option<ScenarioPayload> {
    // Everything except the scenario framing is the fuzz configuration.
    let mut payload = Map::new();
    for (k, v) in obj {
        if !["kind", "checks", "output"].contains(&k.as_str()) {
            payload.insert(k.clone(), v.clone());
        }
    }
    match serde_json::from_value::<FuzzConfig>(Value::Object(payload)) {
        Ok(config) => Some(ScenarioPayload::Fuzz(config)),
        Err(e) => {
            ctx.err("", format!("invalid fuzz configuration: {e}"));
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario assembly
// ---------------------------------------------------------------------------

fn parse_checks(obj: &Map<String, Value>, kind: ScenarioKind, ctx: &mut Ctx) -> Vec<CheckSpec> {
    let Some(v) = obj.get("checks") else {
        return Vec::new();
    };
    let Some(arr) = as_array(v, "/checks", ctx) else {
        return Vec::new();
    };
    let allowed = allowed_checks(kind);
    let mut out = Vec::with_capacity(arr.len());
    for (i, e) in arr.iter().enumerate() {
        let base = format!("/checks/{i}");
        let (name, params) = match e {
            Value::String(s) => (s.clone(), Map::new()),
            Value::Object(o) => {
                let Some(name) = o.get("name").and_then(Value::as_str) else {
                    ctx.err(format!("{base}/name"), "missing or non-string check name");
                    continue;
                };
                let mut params = o.clone();
                params.remove("name");
                (name.to_string(), params)
            }
            _ => {
                ctx.err(base, "expected a check name or {\"name\": ..., params...}");
                continue;
            }
        };
        if !allowed.contains(&name.as_str()) {
            ctx.err(
                format!("{base}/name"),
                if allowed.is_empty() {
                    format!("\"{}\" scenarios take no checks", kind.name())
                } else {
                    format!("unknown check \"{name}\" (expected one of: {})", allowed.join(", "))
                },
            );
            continue;
        }
        out.push(CheckSpec { name, params });
    }
    out
}

fn parse_output(obj: &Map<String, Value>, ctx: &mut Ctx) -> Option<OutputSpec> {
    let v = obj.get("output")?;
    let oo = as_object(v, "/output", ctx)?;
    for key in oo.keys() {
        if key != "path" && key != "format" {
            ctx.err(format!("/output/{key}"), "unknown field (expected path, format)");
        }
    }
    let path = PathBuf::from(as_str(required_at(oo, "path", "/output", ctx)?, "/output/path", ctx)?);
    let format = match oo.get("format") {
        Some(f) => match as_str(f, "/output/format", ctx)? {
            "json" => ReportFormat::Json,
            "csv" => ReportFormat::Csv,
            other => {
                ctx.err("/output/format", format!("unknown format \"{other}\" (expected json or csv)"));
                return None;
            }
        },
        None => ReportFormat::Json,
    };
    Some(OutputSpec { path, format })
}

impl Scenario {
    /// Validates a parsed JSON document into a scenario. All field problems
    /// are collected and returned together as configuration errors with JSON
    /// pointers.
    pub fn from_value(doc: &Value) -> Result<Scenario> {
        let mut ctx = Ctx::default();
        let Some(obj) = as_object(doc, "", &mut ctx) else {
            return Err(ctx.finish().unwrap_err());
        };
        let kind = match required(obj, "kind", &mut ctx).and_then(|v| as_str(v, "/kind", &mut ctx)) {
            Some(s) => match ScenarioKind::from_name(s) {
                Some(k) => k,
                None => {
                    ctx.err(
                        "/kind",
                        format!(
                            "unknown kind \"{s}\" (expected finite_chain, product, gaussian, scp, or fuzz)"
                        ),
                    );
                    return Err(ctx.finish().unwrap_err());
                }
            },
            None => return Err(ctx.finish().unwrap_err()),
        };
        match kind {
            ScenarioKind::FiniteChain => {
                reject_unknown_keys(obj, &["kind", "checks", "output", "states", "Q", "mu", "f"], &mut ctx)
            }
            ScenarioKind::Product => {
                reject_unknown_keys(obj, &["kind", "checks", "output", "product", "f"], &mut ctx)
            }
            ScenarioKind::Gaussian => {
                reject_unknown_keys(obj, &["kind", "checks", "output", "n", "d", "terms", "box"], &mut ctx)
            }
            ScenarioKind::Scp => reject_unknown_keys(
                obj,
                &["kind", "checks", "output", "builtin", "n", "k", "weights", "f", "order"],
                &mut ctx,
            ),
            // Fuzz payload fields are checked by the config parser itself.
            ScenarioKind::Fuzz => {}
        }
        let payload = match kind {
            ScenarioKind::FiniteChain => parse_finite_chain(obj, &mut ctx),
            ScenarioKind::Product => parse_product(obj, &mut ctx),
            ScenarioKind::Gaussian => parse_gaussian(obj, &mut ctx),
            ScenarioKind::Scp => parse_scp(obj, &mut ctx),
            ScenarioKind::Fuzz => parse_fuzz(obj, &mut ctx),
        };
        let checks = parse_checks(obj, kind, &mut ctx);
        let output = parse_output(obj, &mut ctx);
        ctx.finish()?;
        Ok(Scenario {
            kind,
            payload: payload.expect("payload parses when no errors were recorded"),
            checks,
            output,
        })
    }
}

/// Loads and validates a scenario file. Missing files and malformed JSON
/// surface as I/O and JSON errors; structural problems surface as
/// configuration errors with JSON-pointer locations.
pub fn load_config(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text)?;
    Scenario::from_value(&doc)
}
