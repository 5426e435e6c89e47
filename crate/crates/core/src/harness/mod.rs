//! Scenario files, suite execution and report output.

mod report;
mod run;
mod scenario;

pub use report::{emit_report, read_report, render, render_csv, render_json, Format};
pub use run::{run_suite, scenario_digest, CheckResult, Report, RunOptions, Timing, ANNOTATIONS, TOOL_VERSION};
pub use scenario::{
    load_scenario, CheckConfig, CheckKind, CheckParams, NamedGrid, NamedOperator, ScenarioConfig,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Fitz(#[from] crate::error::FitzError),
}
