//! Scenario configuration, simulation orchestration, metrics and trace export.

mod config;
mod metrics;
mod plan;
mod run;
mod trace;

pub use config::{
    load_config, paper_scenario, paper_scenario_toml, ControllerSection, FaultSection, Fidelity,
    FormationSection, InitialSection, LapMode, LeaderSection, ObserverSection, OutputSection,
    ProfileSection, ProfilesSection, SaturationSection, ScenarioConfig, SimSection,
    TopologySection, UavSection, UgvSection,
};
pub use metrics::{convex_hull, metrics, point_in_convex_polygon, MetricsAccumulator, RunMetrics};
pub use plan::RingFormation;
pub use run::{run, run_metrics_only, RunError, RunOutput, Simulation, StepOutput};
pub use trace::{
    export_csv, export_plotdata, read_csv, write_csv, Trace, TraceMeta, TraceRecord, CSV_HEADER,
};

use std::fmt;
use thiserror::Error;

/// World axis. Ground vehicles participate in `X` and `Y` only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    pub fn parse(s: &str) -> Option<Axis> {
        match s {
            "x" => Some(Axis::X),
            "y" => Some(Axis::Y),
            "z" => Some(Axis::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One failed configuration check, addressed by field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario ({} issue(s)):{}", .0.len(), .0.iter().map(|i| format!("\n  - {i}")).collect::<String>())]
    Validation(Vec<ValidationIssue>),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("malformed trace: {0}")]
    Trace(String),
}
