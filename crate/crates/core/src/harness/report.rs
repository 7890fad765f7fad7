//! Plain-text rendering of run and sweep results.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::run::SummaryReport;
use super::sweep::SweepReport;

pub fn render_summary(s: &SummaryReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario {}: {}", s.scenario_id, verdict(s.all_pass));
    let width = s.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &s.checks {
        let _ = writeln!(
            out,
            "  {:<width$}  {}  value={:<12.5e} margin={:.5e}",
            c.name,
            verdict(c.verdict),
            c.value,
            c.margin,
        );
    }
    if !s.constants.is_empty() {
        let _ = writeln!(out, "  constants:");
        for (k, v) in &s.constants {
            let _ = writeln!(out, "    {k} = {v:.6e}");
        }
    }
    if let Some(t) = s.runtimes.get("total_s") {
        let _ = writeln!(out, "  runtime {t:.2} s");
    }
    out
}

pub fn render_sweep(r: &SweepReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "sweep {} over {}: {}",
        r.base_id,
        r.axis.name(),
        verdict(r.all_pass)
    );
    for p in &r.points {
        let state = match (&p.error, p.all_pass) {
            (Some(e), _) => format!("ERROR {e}"),
            (None, Some(true)) => "PASS".to_string(),
            (None, _) => format!("FAIL {}", p.failed.join(",")),
        };
        let _ = writeln!(out, "  {} = {:<10} {state}", r.axis.name(), p.value);
    }
    for f in &r.fits {
        let _ = writeln!(
            out,
            "  {:<24} C_hat={:.5e} stability={:.4} max_change={:.4} {}",
            f.name,
            f.c_hat,
            f.stability,
            f.max_relative_change,
            if f.stable { "stable" } else { "UNSTABLE" }
        );
        if !f.observed_orders.is_empty() {
            let orders: Vec<String> = f
                .observed_orders
                .iter()
                .map(|o| o.map(|p| format!("{p:.2}")).unwrap_or_else(|| "-".into()))
                .collect();
            let _ = writeln!(out, "  {:<24} observed orders {}", "", orders.join(" "));
        }
    }
    out
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Render whatever results `dir` holds: a run summary, a sweep, or the
/// summaries of its immediate subdirectories. Returns the text and the
/// aggregate verdict.
pub fn report_dir(dir: &Path) -> Result<(String, bool)> {
    let summary = dir.join("summary.json");
    if summary.is_file() {
        let s = SummaryReport::load(&summary)?;
        return Ok((render_summary(&s), s.all_pass));
    }
    let sweep = dir.join("sweep.json");
    if sweep.is_file() {
        let r = SweepReport::load(&sweep)?;
        return Ok((render_sweep(&r), r.all_pass));
    }
    let mut entries: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.join("summary.json").is_file())
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(Error::Precondition(format!(
            "{} holds no summary.json or sweep.json",
            dir.display()
        )));
    }
    let mut text = String::new();
    let mut all = true;
    for p in entries {
        let s = SummaryReport::load(&p.join("summary.json"))?;
        all &= s.all_pass;
        text.push_str(&render_summary(&s));
    }
    Ok((text, all))
}
