use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Speech task a segment or label belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Number reading.
    Skt3,
    /// Letter interference.
    Skt7,
    /// Verbal fluency (animal naming).
    Cerad1,
    /// Semi-structured clinical interview.
    Interview,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Skt3, Task::Skt7, Task::Cerad1, Task::Interview];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Skt3 => "skt3",
            Task::Skt7 => "skt7",
            Task::Cerad1 => "cerad1",
            Task::Interview => "interview",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "skt3" => Ok(Task::Skt3),
            "skt7" => Ok(Task::Skt7),
            "cerad1" => Ok(Task::Cerad1),
            "interview" => Ok(Task::Interview),
            other => Err(Error::invalid(format!(
                "unknown task {other:?} (expected skt3, skt7, cerad1 or interview)"
            ))),
        }
    }
}

/// Binary class target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Impairment {
    NonImpaired,
    Impaired,
}

impl Impairment {
    /// +1 for impaired, -1 for non-impaired.
    pub fn sign(self) -> f64 {
        match self {
            Impairment::Impaired => 1.0,
            Impairment::NonImpaired => -1.0,
        }
    }

    pub fn from_decision(value: f64) -> Self {
        if value >= 0.0 {
            Impairment::Impaired
        } else {
            Impairment::NonImpaired
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Impairment::Impaired => "impaired",
            Impairment::NonImpaired => "non_impaired",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Impairment::Impaired => Impairment::NonImpaired,
            Impairment::NonImpaired => Impairment::Impaired,
        }
    }
}

impl fmt::Display for Impairment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}
