use serde::Serialize;
use serde_json::Value;

use mf_core::corrector::CorrectorError;
use mf_core::extension::ExtensionError;
use mf_core::measure::MeasureError;
use mf_core::rds::RdsError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Error => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
}

impl Check {
    pub fn at_most(name: &'static str, value: f64, bound: f64) -> Self {
        Self { name, passed: value <= bound, value, bound }
    }

    pub fn below(name: &'static str, value: f64, bound: f64) -> Self {
        Self { name, passed: value < bound, value, bound }
    }

    pub fn positive(name: &'static str, value: f64) -> Self {
        Self { name, passed: value > 0.0, value, bound: 0.0 }
    }

    pub fn at_least(name: &'static str, value: f64, bound: f64) -> Self {
        Self { name, passed: value >= bound, value, bound }
    }
}

/// What a command produced: its checks and the command-specific body.
pub struct Outcome {
    pub checks: Vec<Check>,
    pub body: Value,
}

impl Outcome {
    pub fn status(&self) -> (Status, &'static str) {
        match self.checks.iter().find(|c| !c.passed) {
            Some(c) => (Status::Fail, c.name),
            None => (Status::Pass, "ok"),
        }
    }
}

/// A failure that ends the run: exit 1 for mathematical failures, 2 for usage,
/// input and capacity problems.
#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub reason: &'static str,
    pub message: String,
}

impl Failure {
    pub fn usage(reason: &'static str, message: impl Into<String>) -> Self {
        Self { status: Status::Error, reason, message: message.into() }
    }

    pub fn math(reason: &'static str, message: impl Into<String>) -> Self {
        Self { status: Status::Fail, reason, message: message.into() }
    }
}

impl From<MeasureError> for Failure {
    fn from(e: MeasureError) -> Self {
        let reason = match e {
            MeasureError::Capacity { .. } => "capacity",
            MeasureError::Inconsistent { .. } => return Failure::math("inconsistent", e.to_string()),
            _ => "domain",
        };
        Failure::usage(reason, e.to_string())
    }
}

impl From<ExtensionError> for Failure {
    fn from(e: ExtensionError) -> Self {
        let msg = e.to_string();
        match e {
            ExtensionError::Measure(m) => m.into(),
            ExtensionError::Capacity(_) => Failure::usage("capacity", msg),
            ExtensionError::Domain(_) => Failure::usage("domain", msg),
            ExtensionError::Inconsistent { .. } => Failure::math("inconsistent", msg),
            ExtensionError::Positivity { .. } => Failure::math("positivity", msg),
            ExtensionError::Consistency { .. } => Failure::math("consistency", msg),
            ExtensionError::Independence { .. } => Failure::math("independence", msg),
            ExtensionError::Anchor(_) => Failure::math("anchor", msg),
            ExtensionError::AtIndex { .. } | ExtensionError::Numerical(_) => Failure::math("numerical", msg),
        }
    }
}

impl From<CorrectorError> for Failure {
    fn from(e: CorrectorError) -> Self {
        let msg = e.to_string();
        match e {
            CorrectorError::Measure(m) => m.into(),
            CorrectorError::Extension(x) => x.into(),
            CorrectorError::Domain(_) => Failure::usage("domain", msg),
            CorrectorError::Capacity(_) => Failure::usage("capacity", msg),
            CorrectorError::NegativeCell { .. } => Failure::math("negative_cell", msg),
            CorrectorError::Quantization(_) => Failure::math("quantization", msg),
            CorrectorError::MixingSupply { .. } => Failure::math("mixing_supply", msg),
        }
    }
}

impl From<RdsError> for Failure {
    fn from(e: RdsError) -> Self {
        let msg = e.to_string();
        match e {
            RdsError::Domain(_) => Failure::usage("domain", msg),
            RdsError::Window { .. } => Failure::usage("window", msg),
            RdsError::Corrector(c) => c.into(),
        }
    }
}

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct Envelope {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: &'static str,
    pub input: Option<InputDigest>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at_unix: Option<u64>,
    pub status: Status,
    pub reason: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub checks: Vec<Check>,
    pub report: Value,
}
