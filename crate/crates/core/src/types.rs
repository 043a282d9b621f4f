use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl Gender {
    /// Binary label: 0 = male, 1 = female. `Unknown` has no label.
    pub fn label(self) -> Option<u8> {
        match self {
            Gender::Male => Some(0),
            Gender::Female => Some(1),
            Gender::Unknown => None,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unknown => "unknown",
        })
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "male" => Ok(Gender::Male),
            "f" | "female" => Ok(Gender::Female),
            "u" | "unknown" | "" => Ok(Gender::Unknown),
            other => Err(Error::param(format!("unknown gender {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Ecg,
    Face,
    Finger,
}

impl Modality {
    /// Fixed concatenation order of the fused feature blocks.
    pub const ALL: [Modality; 3] = [Modality::Ecg, Modality::Face, Modality::Finger];

    pub fn index(self) -> usize {
        match self {
            Modality::Ecg => 0,
            Modality::Face => 1,
            Modality::Finger => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Ecg => "ecg",
            Modality::Face => "face",
            Modality::Finger => "finger",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ecg" => Ok(Modality::Ecg),
            "face" => Ok(Modality::Face),
            "finger" | "fingerprint" => Ok(Modality::Finger),
            other => Err(Error::param(format!("unknown modality {other:?}"))),
        }
    }
}
