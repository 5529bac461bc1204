//! Machine-readable run reports: deterministic JSON and plot-ready CSV.
//!
//! Emission is bit-stable: floats are written in scientific notation with 17
//! significant digits (enough to round-trip any `f64`), object keys are
//! sorted, and nothing time- or host-dependent is recorded. Rerunning a suite
//! with the same seed yields a byte-identical file, across worker counts.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::check::CheckResult;
use crate::concentration::{TailBoundSpec, TailEstimate, TailMethod};
use crate::error::Result;

/// Output encodings for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// One point of a tail curve: the clipped bound `min(1, b(t))` against the
/// (estimated) exceedance probability at `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    pub bound: f64,
    pub estimate: f64,
    /// Wilson 99% half-width for Monte Carlo estimates; 0 for exact tails.
    pub half_width: f64,
    /// Dominance at this point: `estimate − k·half_width ≤ bound` with the
    /// same band multiplier as the dominance check (3 for MC, 0 for exact).
    pub pass: bool,
}

/// A named tail curve, ready for CSV emission with columns
/// `t,bound,estimate,half_width,pass`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub name: String,
    pub rows: Vec<TailRow>,
}

impl TailCurve {
    /// Builds the curve for a bound specification against an estimate, one
    /// row per grid point, with the bound clipped at 1 (it bounds a
    /// probability).
    pub fn new(name: impl Into<String>, spec: &TailBoundSpec, estimate: &TailEstimate) -> Result<Self> {
        let k = match estimate.method {
            TailMethod::MonteCarlo => 3.0,
            TailMethod::Exact => 0.0,
        };
        let mut rows = Vec::with_capacity(estimate.t_grid.len());
        for (i, &t) in estimate.t_grid.iter().enumerate() {
            let bound = spec.bound(t)?.min(1.0);
            let estimate_p = estimate.probabilities[i];
            let half_width = estimate.half_widths[i];
            rows.push(TailRow {
                t,
                bound,
                estimate: estimate_p,
                half_width,
                pass: estimate_p - k * half_width <= bound + 1e-12,
            });
        }
        Ok(TailCurve {
            name: name.into(),
            rows,
        })
    }
}

/// The result of one suite run: named checks plus any tail curves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    /// Which suite produced this report (e.g. `"poincare-check"`).
    pub suite: String,
    /// Master seed the run was keyed by.
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<TailCurve>,
}

impl Report {
    pub fn new(suite: impl Into<String>, seed: u64) -> Self {
        Report {
            suite: suite.into(),
            seed,
            checks: Vec::new(),
            curves: Vec::new(),
        }
    }

    /// True when every check passed. Tail curves are always paired with a
    /// dominance check by the suites, so rows need no separate fold here.
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// JSON formatter writing every float as `d.dddddddddddddddde±x`
/// (17 significant digits), so output is deterministic and lossless.
struct SciFloatFormatter;

impl serde_json::ser::Formatter for SciFloatFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Canonical JSON for any serializable value: keys sorted, floats in
/// 17-significant-digit scientific notation, no whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // Passing through `Value` sorts object keys (its map is ordered);
    // serializing structs directly would keep declaration order instead.
    let value = serde_json::to_value(value)?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFloatFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("JSON output is UTF-8"))
}

fn emit_json(reports: &[Report], out: &mut dyn Write) -> Result<()> {
    out.write_all(canonical_json(&reports)?.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

const CSV_HEADER: &str = "t,bound,estimate,half_width,pass\n";

fn emit_csv(reports: &[Report], out: &mut dyn Write) -> Result<()> {
    out.write_all(CSV_HEADER.as_bytes())?;
    for report in reports {
        for curve in &report.curves {
            for row in &curve.rows {
                writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{}",
                    row.t, row.bound, row.estimate, row.half_width, row.pass
                )?;
            }
        }
    }
    Ok(())
}

/// Writes the reports to `out` in the requested format.
///
/// JSON carries everything; CSV carries only the tail-curve rows
/// (`t,bound,estimate,half_width,pass`), concatenated in report order —
/// header-only when there are no curves.
pub fn emit_report(reports: &[Report], format: ReportFormat, out: &mut dyn Write) -> Result<()> {
    match format {
        ReportFormat::Json => emit_json(reports, out),
        ReportFormat::Csv => emit_csv(reports, out),
    }
}

/// [`emit_report`] to a file path.
pub fn write_report_file(reports: &[Report], format: ReportFormat, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    emit_report(reports, format, &mut file)?;
    file.flush()?;
    Ok(())
}
