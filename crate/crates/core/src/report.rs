//! Check records shared by the command-line suite and the acceptance gate.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Informational,
    Skipped,
}

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// a published number
    Reported,
    /// follows from the definitions by inspection
    Immediate,
    /// produced by an independent computation
    Computed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub value: Value,
    pub source: Source,
    pub citation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckReport {
    pub check_name: String,
    pub parameters: Value,
    pub expected: Option<Expected>,
    pub actual: Value,
    pub status: Status,
    /// excluded from determinism comparisons
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

impl CheckReport {
    /// Pass exactly when the actual value equals the expected one.
    pub fn compare(name: impl Into<String>, parameters: Value, expected: Expected, actual: Value) -> Self {
        let status = if expected.value == actual { Status::Pass } else { Status::Fail };
        CheckReport { check_name: name.into(), parameters, expected: Some(expected), actual, status, elapsed_ms: None }
    }

    pub fn informational(name: impl Into<String>, parameters: Value, actual: Value) -> Self {
        CheckReport { check_name: name.into(), parameters, expected: None, actual, status: Status::Informational, elapsed_ms: None }
    }

    pub fn skipped(name: impl Into<String>, parameters: Value, reason: &str) -> Self {
        CheckReport {
            check_name: name.into(),
            parameters,
            expected: None,
            actual: Value::String(reason.to_string()),
            status: Status::Skipped,
            elapsed_ms: None,
        }
    }

    pub fn with_elapsed(mut self, ms: u64) -> Self {
        self.elapsed_ms = Some(ms);
        self
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}
