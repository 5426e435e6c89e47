use std::io::Write;
use std::path::Path;

use super::run::Report;
use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format '{other}' (expected json or csv)")),
        }
    }
}

pub fn render_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// One row per certificate: check, target, verdict, and its first scalar witness.
pub fn render_csv(report: &Report) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| HarnessError::Validation(format!("csv: {e}"));
    w.write_record(["check", "target", "verdict", "key_witness_label", "key_witness_value"])
        .map_err(csv_err)?;
    for r in &report.results {
        let (label, value) = match r.certificate.key_scalar() {
            Some((l, v)) => (l.to_string(), v.to_string()),
            None => (String::new(), String::new()),
        };
        let verdict = format!("{:?}", r.certificate.verdict);
        w.write_record([r.check.as_str(), r.target.as_str(), verdict.as_str(), label.as_str(), value.as_str()])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Validation(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render(report: &Report, format: Format) -> Result<String, HarnessError> {
    match format {
        Format::Json => Ok(render_json(report)),
        Format::Csv => render_csv(report),
    }
}

/// Writes the report to `path`, or to stdout when `path` is `None`.
pub fn emit_report(report: &Report, format: Format, path: Option<&Path>) -> Result<(), HarnessError> {
    let text = render(report, format)?;
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| HarnessError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|source| HarnessError::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

pub fn read_report(path: &Path) -> Result<Report, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))
}
