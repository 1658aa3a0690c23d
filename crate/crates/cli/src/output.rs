//! CSV/JSON rendering of ROC curves and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use css_core::montecarlo::RocCurve;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::args::{Format, RunPlan};
use crate::CliError;

pub const CSV_HEADER: &str = "label,pfa_target,pfa_hat,pfa_ci_lo,pfa_ci_hi,pd_hat,pd_ci_lo,pd_ci_hi,pfa_theory,pd_theory";

/// Significant digits of every rendered number.
pub const SIG_DIGITS: usize = 10;

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// RFC 3339, UTC. The only field that differs between replays.
    pub timestamp: String,
    pub format: Format,
    /// Data output (`-` for standard output), then the manifest file if any.
    pub outputs: Vec<String>,
    pub plan: RunPlan,
}

impl RunManifest {
    pub fn new(plan: RunPlan, format: Format, outputs: Vec<String>) -> Self {
        let seed = plan.experiments.first().map_or(0, |e| e.scenario.seed);
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            format,
            outputs,
            plan,
        }
    }

    /// Reads a standalone manifest or the manifest embedded in JSON output.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut value: Value = serde_json::from_str(&text)?;
        if let Some(inner) = value.get_mut("manifest") {
            value = inner.take();
        }
        Ok(serde_json::from_value(value)?)
    }
}

/// Renders `x` with [`SIG_DIGITS`] significant digits, trailing zeros trimmed.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIG_DIGITS as i32).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// `x` rounded to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().expect("round trip of formatted float")
}

pub fn render_csv(curves: &[RocCurve]) -> Result<String, CliError> {
    check_nonempty(curves)?;
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in curves {
        if c.label.contains([',', '"', '\n']) {
            return Err(CliError::Usage(format!("curve label {:?} cannot be written as CSV", c.label)));
        }
        for p in &c.points {
            let fields = [
                p.pfa_target,
                p.pfa_hat,
                p.pfa_ci.0,
                p.pfa_ci.1,
                p.pd_hat,
                p.pd_ci.0,
                p.pd_ci.1,
                p.pfa_theory,
                p.pd_theory,
            ];
            out.push_str(&c.label);
            for f in fields {
                out.push(',');
                out.push_str(&format_number(f));
            }
            out.push('\n');
        }
    }
    Ok(out)
}

fn json_number(x: f64) -> Value {
    serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number)
}

pub fn render_json(curves: &[RocCurve], manifest: &RunManifest) -> Result<String, CliError> {
    check_nonempty(curves)?;
    let curves: Vec<Value> = curves
        .iter()
        .map(|c| {
            let points: Vec<Value> = c
                .points
                .iter()
                .map(|p| {
                    let mut m = Map::new();
                    for (k, v) in [
                        ("pfa_target", p.pfa_target),
                        ("pfa_hat", p.pfa_hat),
                        ("pfa_ci_lo", p.pfa_ci.0),
                        ("pfa_ci_hi", p.pfa_ci.1),
                        ("pd_hat", p.pd_hat),
                        ("pd_ci_lo", p.pd_ci.0),
                        ("pd_ci_hi", p.pd_ci.1),
                        ("pfa_theory", p.pfa_theory),
                        ("pd_theory", p.pd_theory),
                    ] {
                        m.insert(k.into(), json_number(v));
                    }
                    m.insert("n_h0".into(), json!(p.n_h0));
                    m.insert("n_h1".into(), json!(p.n_h1));
                    Value::Object(m)
                })
                .collect();
            json!({ "label": c.label, "points": points })
        })
        .collect();
    let doc = json!({ "manifest": manifest, "curves": curves });
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

fn check_nonempty(curves: &[RocCurve]) -> Result<(), CliError> {
    if curves.is_empty() {
        return Err(CliError::Usage("no curves to write".into()));
    }
    Ok(())
}

/// Writes the curves in `format` to `destination` (standard output when `None`).
/// Nothing is created when rendering fails.
pub fn emit_results(
    curves: &[RocCurve],
    format: Format,
    destination: Option<&Path>,
    manifest: &RunManifest,
) -> Result<(), CliError> {
    let text = match format {
        Format::Csv => render_csv(curves)?,
        Format::Json => render_json(curves, manifest)?,
    };
    match destination {
        Some(path) => fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(Path::new("-"), e)),
    }
}

pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(manifest)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| CliError::io(path, e))
}

/// Default manifest location for a data file: `<out>.manifest.json`.
pub fn manifest_path_for(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.1), "0.1");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(1.0 / 3.0), "0.3333333333");
        assert_eq!(format_number(2.0 / 3.0 * 1e-7), "6.666666667e-8");
        assert_eq!(format_number(1_057.312_728_344_58), "1057.312728");
        assert_eq!(format_number(0.99999999999), "1");
        assert_eq!(format_number(6.220960574271784e-16), "6.220960574e-16");
        assert_eq!(format_number(f64::NAN), "NaN");
        assert_eq!(format_number(-0.25), "-0.25");
        assert_eq!(format_number(123456789012.0), "1.23456789e11");
    }

    #[test]
    fn rounding_matches_formatting() {
        let mut x = 1.234_567_890_123_456_7e-300;
        while x < 1e300 {
            for v in [x, -x, x * 0.987_654_321_987] {
                let parsed: f64 = format_number(v).parse().unwrap();
                assert_eq!(parsed, round_sig(v), "{v:e}");
                assert_eq!(round_sig(parsed), parsed);
            }
            x *= 7.3;
        }
    }

    #[test]
    fn manifest_path() {
        assert_eq!(manifest_path_for(Path::new("out/roc.csv")), Path::new("out/roc.csv.manifest.json"));
    }
}
