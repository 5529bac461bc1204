//! Finite-state continuous-time Markov chains acting on matrix-valued
//! functions.
//!
//! A chain is given by a generator `Q` (off-diagonal jump rates, rows summing
//! to zero) on a finite state space `Ω`, together with a probability measure
//! `μ`. The generator acts on functions `f: Ω → H_d` (Hermitian `d×d` values)
//! by
//!
//! ```text
//! (𝓛f)(x) = Σ_{y≠x} Q(x,y) · (f(y) − f(x)),
//! ```
//!
//! and generates the semigroup `P_t = e^{tQ}` applied entrywise over states.
//! When `Q` is reversible w.r.t. a strictly positive `μ` (detailed balance
//! `μ(x)Q(x,y) = μ(y)Q(y,x)`), the transition matrix is computed through the
//! symmetrization `S = D^{1/2} Q D^{−1/2}`, `D = diag(μ)`, whose real
//! spectral decomposition gives `e^{tQ} = D^{−1/2} e^{tS} D^{1/2}` exactly and
//! stably; otherwise a scaling-and-squaring Taylor evaluation is used.

use nalgebra::DMatrix;

use crate::check::{CheckResult, Tolerance};
use crate::error::{Error, Result};
use crate::matcore::{expm_taylor, herm_fn, lambda_min, CMatrix, Complex64, HermitianMatrix};

/// Tolerance used for construction-time structural checks (row sums, detailed
/// balance of tagged generators, measure normalization).
pub const STRUCTURAL_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// State spaces
// ---------------------------------------------------------------------------

/// An ordered finite state space with distinct string labels.
///
/// All functions, measures, and generators carry the space they live on;
/// operations that combine several objects require the spaces to be equal
/// (same labels, same order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::validation("state space must contain at least one state"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.clone()) {
                return Err(Error::validation(format!("duplicate state label \"{l}\"")));
            }
        }
        Ok(StateSpace { labels })
    }

    /// The space `{"0", "1", …, "n−1"}`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()).collect())
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, x: usize) -> &str {
        &self.labels[x]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

fn require_same_space(a: &StateSpace, b: &StateSpace, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::validation(format!("{what} live on different state spaces")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Probability measures
// ---------------------------------------------------------------------------

/// A probability measure on a [`StateSpace`]: nonnegative weights summing to 1
/// within `1e-12`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMeasure {
    space: StateSpace,
    weights: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(space: StateSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.size() {
            return Err(Error::validation(format!(
                "measure has {} weights but the space has {} states",
                weights.len(),
                space.size()
            )));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::validation(format!(
                    "weight of state \"{}\" is {w}; weights must be finite and ≥ 0",
                    space.label(i)
                )));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > STRUCTURAL_TOL {
            return Err(Error::validation(format!(
                "weights sum to {total}, expected 1 within {STRUCTURAL_TOL}"
            )));
        }
        Ok(FiniteMeasure { space, weights })
    }

    pub fn uniform(space: StateSpace) -> Self {
        let n = space.size();
        FiniteMeasure {
            space,
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Point mass at state `x`.
    pub fn point_mass(space: StateSpace, x: usize) -> Result<Self> {
        if x >= space.size() {
            return Err(Error::validation(format!("state index {x} out of range")));
        }
        let mut weights = vec![0.0; space.size()];
        weights[x] = 1.0;
        Ok(FiniteMeasure { space, weights })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn weight(&self, x: usize) -> f64 {
        self.weights[x]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when every state has strictly positive weight.
    pub fn is_fully_supported(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// A Markov generator: a square rate matrix with nonnegative off-diagonal
/// entries and rows summing to zero (within `1e-12`), optionally tagged with a
/// stationary measure it is reversible for.
///
/// Construction enforces the structural invariants; detailed balance against a
/// *given* measure is checked either at tagging time ([`Generator::reversible`],
/// hard error) or diagnostically by [`validate_generator`] (a [`CheckResult`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    space: StateSpace,
    rates: DMatrix<f64>,
    stationary: Option<FiniteMeasure>,
}

impl Generator {
    pub fn new(space: StateSpace, rates: DMatrix<f64>) -> Result<Self> {
        let n = space.size();
        if rates.nrows() != n || rates.ncols() != n {
            return Err(Error::validation(format!(
                "rate matrix is {}×{} but the space has {} states",
                rates.nrows(),
                rates.ncols(),
                n
            )));
        }
        let mut rates = rates;
        let scale = rates.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        for x in 0..n {
            for y in 0..n {
                let v = rates[(x, y)];
                if !v.is_finite() {
                    return Err(Error::validation(format!(
                        "rate Q({}, {}) is not finite",
                        space.label(x),
                        space.label(y)
                    )));
                }
                if x != y && v < 0.0 {
                    if v >= -STRUCTURAL_TOL * (1.0 + scale) {
                        rates[(x, y)] = 0.0; // clamp rounding dust
                    } else {
                        return Err(Error::validation(format!(
                            "off-diagonal rate Q({}, {}) = {v} is negative",
                            space.label(x),
                            space.label(y)
                        )));
                    }
                }
            }
            let row_sum: f64 = (0..n).map(|y| rates[(x, y)]).sum();
            if row_sum.abs() > STRUCTURAL_TOL * (1.0 + scale) {
                return Err(Error::validation(format!(
                    "row of state \"{}\" sums to {row_sum}, expected 0",
                    space.label(x)
                )));
            }
        }
        Ok(Generator {
            space,
            rates,
            stationary: None,
        })
    }

    /// Builds a generator and tags it as reversible w.r.t. `mu`, failing if
    /// detailed balance `μ(x)Q(x,y) = μ(y)Q(y,x)` does not hold within `1e-12`
    /// (relative to the largest flow `|μ(x)Q(x,y)|`).
    pub fn reversible(space: StateSpace, rates: DMatrix<f64>, mu: FiniteMeasure) -> Result<Self> {
        let mut g = Generator::new(space, rates)?;
        require_same_space(&g.space, mu.space(), "generator and measure")?;
        let n = g.space.size();
        let scale = (0..n)
            .flat_map(|x| (0..n).map(move |y| (x, y)))
            .fold(0.0f64, |m, (x, y)| m.max((mu.weight(x) * g.rates[(x, y)]).abs()));
        for x in 0..n {
            for y in (x + 1)..n {
                let resid = mu.weight(x) * g.rates[(x, y)] - mu.weight(y) * g.rates[(y, x)];
                if resid.abs() > STRUCTURAL_TOL * (1.0 + scale) {
                    return Err(Error::validation(format!(
                        "detailed balance fails between \"{}\" and \"{}\": residual {resid}",
                        g.space.label(x),
                        g.space.label(y)
                    )));
                }
            }
        }
        g.stationary = Some(mu);
        Ok(g)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn size(&self) -> usize {
        self.space.size()
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.rates[(x, y)]
    }

    /// The measure this generator was tagged reversible for, if any.
    pub fn stationary(&self) -> Option<&FiniteMeasure> {
        self.stationary.as_ref()
    }
}

// ---------------------------------------------------------------------------
// Matrix-valued functions
// ---------------------------------------------------------------------------

/// A function `Ω → H_d` assigning a Hermitian `d×d` matrix to every state.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFunction {
    space: StateSpace,
    values: Vec<HermitianMatrix>,
}

impl MatrixFunction {
    pub fn new(space: StateSpace, values: Vec<HermitianMatrix>) -> Result<Self> {
        if values.len() != space.size() {
            return Err(Error::validation(format!(
                "function has {} values but the space has {} states",
                values.len(),
                space.size()
            )));
        }
        let d = values[0].dim();
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| v.dim() != d) {
            return Err(Error::validation(format!(
                "value at state \"{}\" is {}×{} but the first value is {d}×{d}",
                space.label(i),
                v.dim(),
                v.dim()
            )));
        }
        Ok(MatrixFunction { space, values })
    }

    /// The constant function `x ↦ m`.
    pub fn constant(space: StateSpace, m: HermitianMatrix) -> Self {
        let n = space.size();
        MatrixFunction {
            space,
            values: vec![m; n],
        }
    }

    /// A scalar (`d = 1`) function from real values.
    pub fn scalar(space: StateSpace, values: &[f64]) -> Result<Self> {
        let vals = values
            .iter()
            .map(|&v| HermitianMatrix::from_diagonal(&[v]))
            .collect();
        MatrixFunction::new(space, vals)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.values[0].dim()
    }

    pub fn value(&self, x: usize) -> &HermitianMatrix {
        &self.values[x]
    }

    pub fn values(&self) -> &[HermitianMatrix] {
        &self.values
    }

    /// Applies a Hermitian-to-Hermitian map at every state.
    pub fn map(&self, f: impl Fn(&HermitianMatrix) -> HermitianMatrix) -> Self {
        MatrixFunction {
            space: self.space.clone(),
            values: self.values.iter().map(f).collect(),
        }
    }

    /// Fallible variant of [`Self::map`].
    pub fn try_map(&self, f: impl Fn(&HermitianMatrix) -> Result<HermitianMatrix>) -> Result<Self> {
        let values = self
            .values
            .iter()
            .map(f)
            .collect::<Result<Vec<_>>>()?;
        Ok(MatrixFunction {
            space: self.space.clone(),
            values,
        })
    }

    /// Pointwise difference `f − g` (same space, same dimension).
    pub fn sub(&self, other: &Self) -> Result<Self> {
        require_same_space(&self.space, &other.space, "functions")?;
        if self.dim() != other.dim() {
            return Err(Error::validation("functions have different value dimensions"));
        }
        Ok(MatrixFunction {
            space: self.space.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Pointwise rescaling `a·f`.
    pub fn scale(&self, a: f64) -> Self {
        self.map(|m| m.scale(a))
    }

    /// `sup_x ‖f(x)‖_op`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.op_norm()))
    }
}

// ---------------------------------------------------------------------------
// Generator and semigroup action
// ---------------------------------------------------------------------------

/// Diagnostic validation of a generator against a candidate stationary
/// measure: row sums, off-diagonal signs, and detailed balance.
///
/// The returned margin is the worst slack over all constraints (negative
/// residuals count against it); the witness names the worst constraint.
pub fn validate_generator(q: &Generator, mu: &FiniteMeasure, tol: Tolerance) -> Result<CheckResult> {
    require_same_space(q.space(), mu.space(), "generator and measure")?;
    let n = q.size();
    let scale = q.rates.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut worst = f64::INFINITY;
    let mut witness = serde_json::json!({"kind": "none"});
    let mut note = |margin: f64, w: serde_json::Value| {
        if margin < worst {
            worst = margin;
            witness = w;
        }
    };
    for x in 0..n {
        let row_sum: f64 = (0..n).map(|y| q.rates[(x, y)]).sum();
        note(
            -row_sum.abs(),
            serde_json::json!({"kind": "row-sum", "state": q.space().label(x), "residual": row_sum}),
        );
        for y in 0..n {
            if x != y {
                note(
                    q.rates[(x, y)],
                    serde_json::json!({
                        "kind": "off-diagonal-sign",
                        "from": q.space().label(x),
                        "to": q.space().label(y),
                        "rate": q.rates[(x, y)],
                    }),
                );
            }
            if y > x {
                let resid = mu.weight(x) * q.rates[(x, y)] - mu.weight(y) * q.rates[(y, x)];
                note(
                    -resid.abs(),
                    serde_json::json!({
                        "kind": "detailed-balance",
                        "x": q.space().label(x),
                        "y": q.space().label(y),
                        "residual": resid,
                    }),
                );
            }
        }
    }
    Ok(CheckResult::from_margin("validate-generator", worst, scale, tol).with_witness(witness))
}

/// Applies the generator: `(𝓛f)(x) = Σ_{y≠x} Q(x,y)(f(y) − f(x))`.
pub fn apply_generator(q: &Generator, f: &MatrixFunction) -> Result<MatrixFunction> {
    require_same_space(q.space(), f.space(), "generator and function")?;
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
                    acc += (f.value(y) - f.value(x))
                        .into_matrix()
                        .scale(rate);
                }
            }
            HermitianMatrix::symmetrize(acc)
        })
        .collect();
    MatrixFunction::new(q.space().clone(), values)
}

/// Spectral engine for the transition semigroup of a chain that is reversible
/// with respect to a strictly positive measure.
///
/// `S = D^{1/2} Q D^{−1/2}` is real symmetric under detailed balance; its
/// eigendecomposition (computed once) yields `e^{tQ} = D^{−1/2} V e^{tΛ} Vᵀ D^{1/2}`
/// for every `t` at the cost of two diagonal scalings and one dense product.
#[derive(Debug, Clone)]
pub struct ReversibleSemigroup {
    space: StateSpace,
    d_sqrt: Vec<f64>,
    d_inv_sqrt: Vec<f64>,
    /// Eigenvalues of `S`, ascending. The largest is 0 (up to roundoff) with
    /// eigenvector `√μ`; all others are negative for an irreducible chain.
    eigvals: Vec<f64>,
    eigvecs: DMatrix<f64>,
}

impl ReversibleSemigroup {
    /// Requires detailed balance within `1e-12` and `μ > 0` everywhere.
    pub fn new(q: &Generator, mu: &FiniteMeasure) -> Result<Self> {
        require_same_space(q.space(), mu.space(), "generator and measure")?;
        if !mu.is_fully_supported() {
            return Err(Error::validation(
                "symmetrization requires a strictly positive stationary measure",
            ));
        }
        let check = validate_generator(q, mu, Tolerance::new(STRUCTURAL_TOL, STRUCTURAL_TOL)?)?;
        if !check.pass {
            return Err(Error::validation(format!(
                "generator is not reversible w.r.t. the given measure (margin {:.3e})",
                check.margin
            )));
        }
        let n = q.size();
        let d_sqrt: Vec<f64> = mu.weights().iter().map(|&w| w.sqrt()).collect();
        let d_inv_sqrt: Vec<f64> = d_sqrt.iter().map(|&s| 1.0 / s).collect();
        let mut s = DMatrix::<f64>::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                s[(x, y)] = d_sqrt[x] * q.rate(x, y) * d_inv_sqrt[y];
            }
        }
        // Symmetrize away the last ulps so the eigensolver sees an exactly
        // symmetric matrix.
        let s_sym = (&s + s.transpose()).scale(0.5);
        let eigen = s_sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eigen.eigenvalues[i].total_cmp(&eigen.eigenvalues[j]));
        let eigvals: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i]).collect();
        let mut eigvecs = DMatrix::<f64>::zeros(n, n);
        for (new_col, &old_col) in order.iter().enumerate() {
            eigvecs.set_column(new_col, &eigen.eigenvectors.column(old_col));
        }
        Ok(ReversibleSemigroup {
            space: q.space().clone(),
            d_sqrt,
            d_inv_sqrt,
            eigvals,
            eigvecs,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// Eigenvalues of the symmetrized generator, ascending (all ≤ 0 up to
    /// roundoff; the largest is 0).
    pub fn spectrum(&self) -> &[f64] {
        &self.eigvals
    }

    /// The row-stochastic transition matrix `e^{tQ}`.
    pub fn transition(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::validation(format!("time t = {t} must be finite and ≥ 0")));
        }
        let n = self.eigvals.len();
        let mut scaled = self.eigvecs.clone();
        for j in 0..n {
            let e = (t * self.eigvals[j]).exp();
            for i in 0..n {
                scaled[(i, j)] *= e;
            }
        }
        let exp_s = &scaled * self.eigvecs.transpose();
        let mut p = exp_s;
        for x in 0..n {
            for y in 0..n {
                p[(x, y)] *= self.d_inv_sqrt[x] * self.d_sqrt[y];
            }
        }
        Ok(p)
    }

    /// `(P_t f)(x) = Σ_y P_t(x,y) f(y)`.
    pub fn apply(&self, t: f64, f: &MatrixFunction) -> Result<MatrixFunction> {
        require_same_space(&self.space, f.space(), "semigroup and function")?;
        let p = self.transition(t)?;
        apply_transition(&p, f)
    }
}

fn apply_transition(p: &DMatrix<f64>, f: &MatrixFunction) -> Result<MatrixFunction> {
    let n = f.space().size();
    let d = f.dim();
    let values = (0..n)
        .map(|x| {
            let mut acc = CMatrix::zeros(d, d);
            for y in 0..n {
                let w = p[(x, y)];
                if w != 0.0 {
                    acc += f.value(y).matrix().scale(w);
                }
            }
            HermitianMatrix::symmetrize(acc)
        })
        .collect();
    MatrixFunction::new(f.space().clone(), values)
}

/// The transition matrix `e^{tQ}` of an arbitrary generator.
///
/// Uses the reversible spectral path when the generator carries a strictly
/// positive stationary tag; otherwise falls back to scaling-and-squaring
/// Taylor evaluation of the matrix exponential.
pub fn semigroup_matrix(q: &Generator, t: f64) -> Result<DMatrix<f64>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::validation(format!("time t = {t} must be finite and ≥ 0")));
    }
    if let Some(mu) = q.stationary() {
        if mu.is_fully_supported() {
            return ReversibleSemigroup::new(q, mu)?.transition(t);
        }
    }
    let n = q.size();
    let mut tq = CMatrix::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            tq[(x, y)] = Complex64::new(t * q.rate(x, y), 0.0);
        }
    }
    let exp = expm_taylor(&tq);
    let mut p = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            p[(x, y)] = exp[(x, y)].re;
        }
    }
    Ok(p)
}

/// Applies the semigroup: `(P_t f)(x) = Σ_y (e^{tQ})(x,y) f(y)`.
pub fn semigroup_apply(q: &Generator, t: f64, f: &MatrixFunction) -> Result<MatrixFunction> {
    require_same_space(q.space(), f.space(), "generator and function")?;
    let p = semigroup_matrix(q, t)?;
    apply_transition(&p, f)
}

/// `E_μ[f] = Σ_x μ(x) f(x)`.
pub fn expectation(mu: &FiniteMeasure, f: &MatrixFunction) -> Result<HermitianMatrix> {
    require_same_space(mu.space(), f.space(), "measure and function")?;
    let d = f.dim();
    let mut acc = CMatrix::zeros(d, d);
    for x in 0..mu.space().size() {
        let w = mu.weight(x);
        if w != 0.0 {
            acc += f.value(x).matrix().scale(w);
        }
    }
    Ok(HermitianMatrix::symmetrize(acc))
}

// ---------------------------------------------------------------------------
// Semigroup sanity properties
// ---------------------------------------------------------------------------

/// Checks six structural properties of a reversible Markov semigroup on
/// matrix-valued functions at a single time `t`:
///
/// 1. `𝓛 P_t f = P_t 𝓛 f` (generator–semigroup commutation);
/// 2. `E_μ[f · 𝓛(f²)] = E_μ[𝓛f · f²]` (self-adjointness of `𝓛` in `L²(μ)`,
///    tested against the companion function `g = f²`);
/// 3. `E_μ[𝓛f] = 0` (stationarity of `μ`);
/// 4. `P_t` maps PSD-valued functions to PSD-valued functions (applied to the
///    shifted function `f₊ = f − min_x λ_min(f(x))·I ⪰ 0`);
/// 5. `(P_t f)² ⪯ P_t (f²)` (operator Jensen inequality for the square);
/// 6. `Tr φ(P_t f) ≤ Tr P_t φ(f)` for `φ ∈ {exp, |·|, square}` (trace Jensen).
///
/// Margins are signed slacks (≥ 0 up to roundoff when the property holds).
/// Requires `Q` reversible w.r.t. `mu`; fails fast otherwise.
pub fn check_semigroup_properties(
    q: &Generator,
    mu: &FiniteMeasure,
    f: &MatrixFunction,
    t: f64,
    tol: Tolerance,
) -> Result<Vec<CheckResult>> {
    require_same_space(q.space(), f.space(), "generator and function")?;
    let semigroup = ReversibleSemigroup::new(q, mu)?;
    let n = q.size();
    let mut out = Vec::with_capacity(6);

    let lf = apply_generator(q, f)?;
    let ptf = semigroup.apply(t, f)?;

    // (1) commutation.
    {
        let a = apply_generator(q, &ptf)?;
        let b = semigroup.apply(t, &lf)?;
        let diff = a.sub(&b)?.sup_norm();
        let scale = a.sup_norm().max(b.sup_norm());
        out.push(CheckResult::from_margin(
            "semigroup-generator-commutation",
            -diff,
            scale,
            tol,
        ));
    }

    // (2) self-adjointness against g = f².
    {
        let g = f.map(|m| m.square());
        let lg = apply_generator(q, &g)?;
        let d = f.dim();
        let mut lhs = CMatrix::zeros(d, d);
        let mut rhs = CMatrix::zeros(d, d);
        for x in 0..n {
            let w = mu.weight(x);
            if w != 0.0 {
                lhs += (f.value(x).mul(lg.value(x))).scale(w);
                rhs += (lf.value(x).mul(g.value(x))).scale(w);
            }
        }
        let diff = (&lhs - &rhs).norm();
        let scale = lhs.norm().max(rhs.norm());
        out.push(CheckResult::from_margin(
            "generator-self-adjointness",
            -diff,
            scale,
            tol,
        ));
    }

    // (3) stationarity.
    {
        let mean = expectation(mu, &lf)?;
        let scale = lf.sup_norm();
        out.push(CheckResult::from_margin(
            "generator-mean-zero",
            -mean.op_norm(),
            scale,
            tol,
        ));
    }

    // (4) positivity preservation on the PSD shift of f.
    {
        let bottom = f
            .values()
            .iter()
            .map(lambda_min)
            .fold(f64::INFINITY, f64::min);
        let shift = HermitianMatrix::identity(f.dim()).scale(bottom);
        let f_plus = f.map(|m| m - &shift);
        let pt_plus = semigroup.apply(t, &f_plus)?;
        let margin = pt_plus
            .values()
            .iter()
            .map(lambda_min)
            .fold(f64::INFINITY, f64::min);
        out.push(CheckResult::from_margin(
            "positivity-preservation",
            margin,
            f_plus.sup_norm(),
            tol,
        ));
    }

    // (5) operator Jensen for the square.
    {
        let pt_f2 = semigroup.apply(t, &f.map(|m| m.square()))?;
        let mut margin = f64::INFINITY;
        let mut scale = 0.0f64;
        for x in 0..n {
            let gap = pt_f2.value(x) - &ptf.value(x).square();
            margin = margin.min(lambda_min(&gap));
            scale = scale.max(pt_f2.value(x).op_norm());
        }
        out.push(CheckResult::from_margin(
            "semigroup-square-jensen",
            margin,
            scale,
            tol,
        ));
    }

    // (6) trace Jensen for exp, abs, square.
    {
        let phis: [(&str, fn(f64) -> f64); 3] =
            [("exp", f64::exp), ("abs", f64::abs), ("square", |v| v * v)];
        let mut margin = f64::INFINITY;
        let mut scale = 0.0f64;
        let mut per_phi = serde_json::Map::new();
        for (name, phi) in phis {
            let pt_phi_f = semigroup.apply(t, &f.try_map(|m| herm_fn(m, phi))?)?;
            let mut phi_margin = f64::INFINITY;
            for x in 0..n {
                let outer = herm_fn(ptf.value(x), phi)?.trace();
                let inner = pt_phi_f.value(x).trace();
                phi_margin = phi_margin.min(inner - outer);
                scale = scale.max(inner.abs()).max(outer.abs());
            }
            per_phi.insert(name.to_string(), serde_json::json!(phi_margin));
            margin = margin.min(phi_margin);
        }
        out.push(
            CheckResult::from_margin("trace-jensen", margin, scale, tol)
                .with_witness(serde_json::Value::Object(per_phi)),
        );
    }

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::matcore::random_hermitian;
    use approx::assert_abs_diff_eq;

    fn two_state_symmetric() -> (Generator, FiniteMeasure) {
        let space = StateSpace::indexed(2).unwrap();
        let mu = FiniteMeasure::uniform(space.clone());
        let rates = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let q = Generator::reversible(space, rates, mu.clone()).unwrap();
        (q, mu)
    }

    #[test]
    fn state_space_rejects_duplicates_and_empty() {
        assert!(StateSpace::new(vec![]).is_err());
        assert!(StateSpace::new(vec!["a".into(), "a".into()]).is_err());
        let s = StateSpace::new(vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(s.index_of("b"), Some(1));
        assert_eq!(s.index_of("c"), None);
    }

    #[test]
    fn measure_normalization_is_enforced() {
        let space = StateSpace::indexed(3).unwrap();
        assert!(FiniteMeasure::new(space.clone(), vec![0.5, 0.5, 0.5]).is_err());
        assert!(FiniteMeasure::new(space.clone(), vec![0.5, 0.6, -0.1]).is_err());
        let mu = FiniteMeasure::new(space.clone(), vec![0.2, 0.3, 0.5]).unwrap();
        assert!(mu.is_fully_supported());
        let point = FiniteMeasure::point_mass(space, 1).unwrap();
        assert!(!point.is_fully_supported());
    }

    #[test]
    fn generator_construction_enforces_structure() {
        let space = StateSpace::indexed(2).unwrap();
        // Bad row sum.
        let bad = DMatrix::from_row_slice(2, 2, &[-1.0, 1.1, 1.0, -1.0]);
        assert!(Generator::new(space.clone(), bad).is_err());
        // Negative off-diagonal.
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!(Generator::new(space.clone(), bad).is_err());
        // The zero generator is fine (and reversible for anything).
        let zero = Generator::reversible(
            space.clone(),
            DMatrix::zeros(2, 2),
            FiniteMeasure::uniform(space),
        )
        .unwrap();
        assert_eq!(zero.rate(0, 1), 0.0);
    }

    #[test]
    fn reversible_tagging_rejects_unbalanced_rates() {
        // Q = [[−1, 1], [2, −2]] with uniform μ: flow ½·1 ≠ ½·2.
        let space = StateSpace::indexed(2).unwrap();
        let rates = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]);
        let mu = FiniteMeasure::uniform(space.clone());
        assert!(Generator::reversible(space.clone(), rates.clone(), mu.clone()).is_err());
        // It is a perfectly valid generator, though — and validate reports
        // the balance failure as a failed check, not an error.
        let q = Generator::new(space, rates).unwrap();
        let res = validate_generator(&q, &mu, Tolerance::default()).unwrap();
        assert!(!res.pass);
        let w = res.witness.unwrap();
        assert_eq!(w["kind"], "detailed-balance");
        // The true stationary measure (2/3, 1/3) balances it.
        let mu2 = FiniteMeasure::new(q.space().clone(), vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!(validate_generator(&q, &mu2, Tolerance::default()).unwrap().pass);
    }

    #[test]
    fn apply_generator_two_state_oracle() {
        // Q = [[−1, 1], [1, −1]], f = {0, M}:
        // (𝓛f)(0) = 1·(M − 0) = M and (𝓛f)(1) = 1·(0 − M) = −M.
        let (q, _) = two_state_symmetric();
        let m = random_hermitian(3, 1.0, 7);
        let f = MatrixFunction::new(
            q.space().clone(),
            vec![HermitianMatrix::zeros(3), m.clone()],
        )
        .unwrap();
        let lf = apply_generator(&q, &f).unwrap();
        assert!((lf.value(0) - &m).op_norm() < 1e-14);
        assert!((lf.value(1) - &m.scale(-1.0)).op_norm() < 1e-14);
        // Constants are annihilated.
        let c = MatrixFunction::constant(q.space().clone(), m);
        assert_eq!(apply_generator(&q, &c).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn semigroup_at_time_zero_is_identity() {
        let (q, mu) = corpus::random_reversible_chain(5, 11).unwrap();
        let f = corpus::random_matrix_function(q.space(), 2, 1.0, 13);
        let p0 = semigroup_apply(&q, 0.0, &f).unwrap();
        assert!(p0.sub(&f).unwrap().sup_norm() < 1e-12);
        let _ = mu;
    }

    #[test]
    fn semigroup_long_time_limit_is_the_stationary_mean() {
        let (q, mu) = corpus::random_reversible_chain(4, 3).unwrap();
        let f = corpus::random_matrix_function(q.space(), 3, 1.0, 5);
        let mean = expectation(&mu, &f).unwrap();
        let pt = semigroup_apply(&q, 60.0, &f).unwrap();
        for x in 0..q.size() {
            assert!((pt.value(x) - &mean).op_norm() < 1e-9);
        }
    }

    #[test]
    fn semigroup_law_and_stochastic_rows() {
        let (q, _) = corpus::random_reversible_chain(5, 21).unwrap();
        let (s, t) = (0.3, 1.1);
        let pst = semigroup_matrix(&q, s + t).unwrap();
        let composed = semigroup_matrix(&q, s).unwrap() * semigroup_matrix(&q, t).unwrap();
        assert!((&pst - &composed).abs().max() < 1e-10);
        for x in 0..q.size() {
            let row_sum: f64 = pst.row(x).iter().sum();
            assert_abs_diff_eq!(row_sum, 1.0, epsilon = 1e-9);
            assert!(pst.row(x).iter().all(|&p| p >= -1e-12));
        }
    }

    #[test]
    fn taylor_fallback_agrees_with_spectral_path() {
        // Same chain, tagged (spectral path) and untagged (Taylor fallback).
        let (q, _) = corpus::random_reversible_chain(6, 33).unwrap();
        let untagged = Generator::new(q.space().clone(), q.rates().clone()).unwrap();
        for t in [0.1, 1.0, 4.0] {
            let a = semigroup_matrix(&q, t).unwrap();
            let b = semigroup_matrix(&untagged, t).unwrap();
            assert!((&a - &b).abs().max() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn non_reversible_chain_still_gets_a_stochastic_semigroup() {
        // A 3-cycle with asymmetric rates is irreversible; the Taylor path
        // must still produce probability rows.
        let space = StateSpace::indexed(3).unwrap();
        let rates = DMatrix::from_row_slice(
            3,
            3,
            &[-1.0, 1.0, 0.0, 0.0, -2.0, 2.0, 3.0, 0.0, -3.0],
        );
        let q = Generator::new(space, rates).unwrap();
        let p = semigroup_matrix(&q, 0.7).unwrap();
        for x in 0..3 {
            let row_sum: f64 = p.row(x).iter().sum();
            assert_abs_diff_eq!(row_sum, 1.0, epsilon = 1e-9);
            assert!(p.row(x).iter().all(|&v| v >= -1e-12));
        }
    }

    #[test]
    fn expectation_oracles() {
        let space = StateSpace::indexed(2).unwrap();
        let m = random_hermitian(2, 1.0, 9);
        // Uniform measure on {0, 2M} averages to M.
        let f = MatrixFunction::new(
            space.clone(),
            vec![HermitianMatrix::zeros(2), m.scale(2.0)],
        )
        .unwrap();
        let mu = FiniteMeasure::uniform(space.clone());
        assert!((&expectation(&mu, &f).unwrap() - &m).op_norm() < 1e-14);
        // A point mass reads the function off at its atom.
        let point = FiniteMeasure::point_mass(space, 1).unwrap();
        assert!((&expectation(&point, &f).unwrap() - &m.scale(2.0)).op_norm() < 1e-14);
    }

    #[test]
    fn stationarity_under_the_semigroup() {
        let (q, mu) = corpus::random_reversible_chain(5, 41).unwrap();
        let f = corpus::random_matrix_function(q.space(), 2, 1.5, 43);
        let mean = expectation(&mu, &f).unwrap();
        for t in [0.2, 1.0, 5.0] {
            let pt = semigroup_apply(&q, t, &f).unwrap();
            let mean_t = expectation(&mu, &pt).unwrap();
            assert!((&mean_t - &mean).op_norm() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn semigroup_properties_hold_on_random_reversible_chains() {
        for trial in 0..40u64 {
            let n = 2 + (trial % 4) as usize;
            let d = 1 + (trial % 3) as usize;
            let (q, mu) = corpus::random_reversible_chain(n, 100 + trial).unwrap();
            let f = corpus::random_matrix_function(q.space(), d, 1.2, 200 + trial);
            let t = 0.05 + (trial as f64) * 0.05;
            let results =
                check_semigroup_properties(&q, &mu, &f, t, Tolerance::new(1e-9, 1e-9).unwrap())
                    .unwrap();
            assert_eq!(results.len(), 6);
            for r in &results {
                assert!(
                    r.pass,
                    "trial {trial}: property {} failed with margin {:.3e}",
                    r.name, r.margin
                );
            }
        }
    }

    #[test]
    fn semigroup_properties_on_constant_functions_are_tight() {
        let (q, mu) = two_state_symmetric();
        let f = MatrixFunction::constant(q.space().clone(), random_hermitian(2, 1.0, 77));
        let results =
            check_semigroup_properties(&q, &mu, &f, 0.8, Tolerance::default()).unwrap();
        for r in &results {
            assert!(r.pass, "{} failed", r.name);
        }
        // Equality cases: commutation, self-adjointness, and mean-zero are
        // exact for constants.
        assert!(results[0].margin.abs() < 1e-12);
        assert!(results[1].margin.abs() < 1e-12);
        assert!(results[2].margin.abs() < 1e-12);
    }

    #[test]
    fn properties_reject_non_reversible_input() {
        let space = StateSpace::indexed(2).unwrap();
        let rates = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]);
        let q = Generator::new(space.clone(), rates).unwrap();
        let mu = FiniteMeasure::uniform(space.clone());
        let f = MatrixFunction::scalar(space, &[0.0, 1.0]).unwrap();
        assert!(check_semigroup_properties(&q, &mu, &f, 1.0, Tolerance::default()).is_err());
    }
}
