//! Scenario execution and report files.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mplab::bounds::{run_theorem, TheoremReport, Verdict};
use mplab::operators::PRESET_NAMES;
use serde::Serialize;
use thiserror::Error;

use crate::config::{self, ConfigError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] mplab::Error),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("serializing report: {0}")]
    Json(#[from] serde_json::Error),
}

pub struct Outcome {
    pub code: u8,
    pub summary: String,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    scenario: &'a str,
    operator: &'a str,
    seed: u64,
    tolerance: f64,
    exit_code: u8,
    reports: &'a [TheoremReport],
}

pub fn list_presets() -> String {
    let mut s = String::new();
    for (name, desc) in PRESET_NAMES {
        let _ = writeln!(s, "{name:<22} {desc}");
    }
    s
}

fn write(path: &Path, contents: &[u8]) -> Result<(), RunError> {
    std::fs::write(path, contents).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

fn slug(label: &str) -> String {
    let mut s: String = label
        .chars()
        .map(|c| match c {
            '-' => 'm',
            c if c.is_ascii_alphanumeric() => c.to_ascii_lowercase(),
            _ => '_',
        })
        .collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

struct Log {
    file: Option<std::fs::File>,
}

impl Log {
    fn line(&mut self, msg: &str) {
        if let Some(f) = &mut self.file {
            let t = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
            let _ = writeln!(f, "[{t:.3}] {msg}");
        }
    }
}

/// Exit code: 0 when every verdict passes, 2 when any hypothesis is not met,
/// 1 when a verdict fails outright.
fn exit_code(reports: &[TheoremReport]) -> u8 {
    if reports.iter().any(|r| matches!(r.verdict, Verdict::HypothesisNotMet { .. })) {
        2
    } else if reports.iter().all(|r| r.verdict == Verdict::Pass) {
        0
    } else {
        1
    }
}

pub fn run(path: &Path, tolerance: Option<f64>, out: Option<&Path>) -> Result<Outcome, RunError> {
    let path = config::resolve(path);
    let cfg = config::load(&path)?;
    let resolved = cfg.resolve(&path)?;
    let tolerance = tolerance.unwrap_or(cfg.tolerance);
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    std::fs::create_dir_all(&out_dir).map_err(|source| RunError::Io { path: out_dir.clone(), source })?;
    let log_path = out_dir.join("run.log");
    let mut log = Log { file: std::fs::File::create(&log_path).ok() };
    log.line(&format!("scenario {} from {}", cfg.name, path.display()));

    let options = cfg.theorem_options(tolerance);
    let mut reports = Vec::new();
    for &id in &cfg.theorems {
        log.line(&format!("start {}", id.name()));
        let mut r = run_theorem(id, &resolved.operator, &resolved.domain, &options).map_err(mplab::Error::from)?;
        r.operator = format!("{} ({})", resolved.label, r.operator);
        log.line(&format!("done {}: {}", id.name(), r.verdict.label()));
        reports.push(r);
    }
    let code = exit_code(&reports);

    let mut text = String::new();
    let _ = writeln!(text, "scenario: {}", cfg.name);
    let _ = writeln!(text, "operator: {}", resolved.label);
    let _ = writeln!(text, "seed: {}", cfg.seed);
    let _ = writeln!(text, "tolerance: {tolerance:e}");
    let _ = writeln!(text, "exit code: {code}");
    for r in &reports {
        text.push('\n');
        text.push_str(&r.text());
    }
    write(&out_dir.join("report.txt"), text.as_bytes())?;

    let file = ReportFile {
        scenario: &cfg.name,
        operator: &resolved.label,
        seed: cfg.seed,
        tolerance,
        exit_code: code,
        reports: &reports,
    };
    write(&out_dir.join("report.json"), serde_json::to_string_pretty(&file)?.as_bytes())?;

    for r in &reports {
        for (label, csv) in &r.fields {
            let name = format!("field_{}_{}.csv", r.theorem.name().to_ascii_lowercase(), slug(label));
            write(&out_dir.join(name), csv.as_bytes())?;
        }
    }
    log.line("reports written");

    let mut summary = String::new();
    for r in &reports {
        let _ = writeln!(summary, "{:<7} {}", r.theorem.name(), r.verdict.label());
        if let Verdict::HypothesisNotMet { hypotheses } = &r.verdict {
            for h in hypotheses {
                let _ = writeln!(summary, "        failed hypothesis: {h}");
            }
        }
        if let Some(cx) = &r.counterexample {
            let _ = writeln!(summary, "        {}", cx.positivity.line());
        }
    }
    let _ = writeln!(summary, "reports in {}", out_dir.display());
    Ok(Outcome { code, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("f = 0, g = -1"), "f_0_g_m1");
    }
}
