//! Fault classes and their 4-bit (A, B, C, G) involvement code.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The twelve simulated conditions, in code-table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultType {
    AG,
    BG,
    CG,
    AB,
    BC,
    CA,
    ABG,
    BCG,
    CAG,
    ABC,
    ABCG,
    NoFault,
}

impl FaultType {
    pub const ALL: [FaultType; 12] = [
        FaultType::AG,
        FaultType::BG,
        FaultType::CG,
        FaultType::AB,
        FaultType::BC,
        FaultType::CA,
        FaultType::ABG,
        FaultType::BCG,
        FaultType::CAG,
        FaultType::ABC,
        FaultType::ABCG,
        FaultType::NoFault,
    ];

    pub fn label(self) -> FaultLabel {
        use FaultType::*;
        let bits = match self {
            AG => [true, false, false, true],
            BG => [false, true, false, true],
            CG => [false, false, true, true],
            AB => [true, true, false, false],
            BC => [false, true, true, false],
            CA => [true, false, true, false],
            ABG => [true, true, false, true],
            BCG => [false, true, true, true],
            CAG => [true, false, true, true],
            ABC => [true, true, true, false],
            ABCG => [true, true, true, true],
            NoFault => [false, false, false, false],
        };
        FaultLabel { bits }
    }

    /// Display name as used in the code table ("No Fault" for the healthy case).
    pub fn name(self) -> &'static str {
        use FaultType::*;
        match self {
            AG => "AG",
            BG => "BG",
            CG => "CG",
            AB => "AB",
            BC => "BC",
            CA => "CA",
            ABG => "ABG",
            BCG => "BCG",
            CAG => "CAG",
            ABC => "ABC",
            ABCG => "ABCG",
            NoFault => "No Fault",
        }
    }

    /// Command-line / CSV token (`none` for the healthy case).
    pub fn token(self) -> &'static str {
        match self {
            FaultType::NoFault => "none",
            other => other.name(),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn involves_ground(self) -> bool {
        self.label().bits[3]
    }

    pub fn is_fault(self) -> bool {
        self != FaultType::NoFault
    }
}

impl fmt::Display for FaultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for FaultType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        match up.as_str() {
            "NONE" | "NO FAULT" | "NOFAULT" => return Ok(FaultType::NoFault),
            "AC" => return Ok(FaultType::CA),
            "ACG" => return Ok(FaultType::CAG),
            _ => {}
        }
        FaultType::ALL
            .into_iter()
            .find(|f| f.name() == up)
            .ok_or_else(|| Error::Parse(format!("unknown fault type `{s}`")))
    }
}

/// Involvement bits in (A, B, C, G) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FaultLabel {
    pub bits: [bool; 4],
}

/// Name lookup result for a code; four of the sixteen codes have no class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelName {
    Known(FaultType),
    Unknown,
}

impl LabelName {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelName::Known(f) => f.name(),
            LabelName::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for LabelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FaultLabel {
    pub const NONE: FaultLabel = FaultLabel { bits: [false; 4] };

    pub fn from_bits(bits: [bool; 4]) -> Self {
        FaultLabel { bits }
    }

    /// Builds a label by thresholding each output with a strict `>`.
    pub fn from_outputs(outputs: &[f64], threshold: f64) -> Self {
        let mut bits = [false; 4];
        for (b, &o) in bits.iter_mut().zip(outputs) {
            *b = o > threshold;
        }
        FaultLabel { bits }
    }

    /// Packs bits as A=8, B=4, C=2, G=1.
    pub fn code(self) -> u8 {
        self.bits
            .iter()
            .fold(0u8, |acc, &b| (acc << 1) | u8::from(b))
    }

    pub fn from_code(code: u8) -> Self {
        assert!(code < 16);
        let mut bits = [false; 4];
        for (i, b) in bits.iter_mut().enumerate() {
            *b = code & (1 << (3 - i)) != 0;
        }
        FaultLabel { bits }
    }

    /// Four-character code string, e.g. `1001`.
    pub fn code_string(self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    pub fn is_none(self) -> bool {
        self.bits == [false; 4]
    }

    pub fn targets(self) -> [f64; 4] {
        self.bits.map(|b| if b { 1.0 } else { 0.0 })
    }

    pub fn fault_type(self) -> Option<FaultType> {
        FaultType::ALL.into_iter().find(|f| f.label() == self)
    }
}

/// Name of the class carrying `label`, or [`LabelName::Unknown`].
pub fn label_name(label: FaultLabel) -> LabelName {
    match label.fault_type() {
        Some(f) => LabelName::Known(f),
        None => LabelName::Unknown,
    }
}
