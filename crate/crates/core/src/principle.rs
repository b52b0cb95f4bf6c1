//! The eight usability principles used as the defect and critique taxonomy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectPrinciple {
    Consistency,
    Feedback,
    Dialog,
    Prevention,
    Control,
    Reversal,
    Memory,
    Hierarchy,
}

impl DefectPrinciple {
    pub const ALL: [DefectPrinciple; 8] = [
        DefectPrinciple::Consistency,
        DefectPrinciple::Feedback,
        DefectPrinciple::Dialog,
        DefectPrinciple::Prevention,
        DefectPrinciple::Control,
        DefectPrinciple::Reversal,
        DefectPrinciple::Memory,
        DefectPrinciple::Hierarchy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DefectPrinciple::Consistency => "consistency",
            DefectPrinciple::Feedback => "feedback",
            DefectPrinciple::Dialog => "dialog",
            DefectPrinciple::Prevention => "prevention",
            DefectPrinciple::Control => "control",
            DefectPrinciple::Reversal => "reversal",
            DefectPrinciple::Memory => "memory",
            DefectPrinciple::Hierarchy => "hierarchy",
        }
    }

    /// Capitalized name for report tables.
    pub fn title(self) -> &'static str {
        match self {
            DefectPrinciple::Consistency => "Consistency",
            DefectPrinciple::Feedback => "Feedback",
            DefectPrinciple::Dialog => "Dialog",
            DefectPrinciple::Prevention => "Prevention",
            DefectPrinciple::Control => "Control",
            DefectPrinciple::Reversal => "Reversal",
            DefectPrinciple::Memory => "Memory",
            DefectPrinciple::Hierarchy => "Hierarchy",
        }
    }
}

impl fmt::Display for DefectPrinciple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown principle {0:?}")]
pub struct UnknownPrinciple(pub String);

impl FromStr for DefectPrinciple {
    type Err = UnknownPrinciple;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        DefectPrinciple::ALL
            .into_iter()
            .find(|p| p.as_str() == lower)
            .ok_or(UnknownPrinciple(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_eight_round_trip() {
        assert_eq!(DefectPrinciple::ALL.len(), 8);
        for p in DefectPrinciple::ALL {
            assert_eq!(p.as_str().parse::<DefectPrinciple>(), Ok(p));
            assert_eq!(p.title().parse::<DefectPrinciple>(), Ok(p));
        }
        assert!("clarity".parse::<DefectPrinciple>().is_err());
    }
}
