use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observable outcome of one naming trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResponseCategory {
    /// Correct
    C,
    /// Semantic
    S,
    /// Formal
    F,
    /// Mixed
    M,
    /// Unrelated
    U,
    /// Neologism
    N,
    /// Abstruse neologism
    AN,
    /// Non-naming attempt
    NA,
}

impl ResponseCategory {
    /// Canonical serialization order.
    pub const ALL: [ResponseCategory; 8] = [
        ResponseCategory::C,
        ResponseCategory::S,
        ResponseCategory::F,
        ResponseCategory::M,
        ResponseCategory::U,
        ResponseCategory::N,
        ResponseCategory::AN,
        ResponseCategory::NA,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            ResponseCategory::C => "C",
            ResponseCategory::S => "S",
            ResponseCategory::F => "F",
            ResponseCategory::M => "M",
            ResponseCategory::U => "U",
            ResponseCategory::N => "N",
            ResponseCategory::AN => "AN",
            ResponseCategory::NA => "NA",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.label() == s)
    }
}

impl fmt::Display for ResponseCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Probability law over the eight response categories of one (t,k) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryDistribution(pub [f64; 8]);

impl CategoryDistribution {
    pub fn probs(&self) -> &[f64; 8] {
        &self.0
    }

    pub fn get(&self, c: ResponseCategory) -> f64 {
        self.0[c.index()]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// L-infinity distance between two distributions.
    pub fn max_abs_diff(&self, other: &CategoryDistribution) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<ResponseCategory> for CategoryDistribution {
    type Output = f64;

    fn index(&self, c: ResponseCategory) -> &f64 {
        &self.0[c.index()]
    }
}

/// One (t,k) cell's eight process probabilities; entry `s - 1` holds ψ_s.
pub type PsiCell = [f64; 8];

/// Accepts the closed unit interval; both endpoints are legal branch
/// probabilities in the tree even though parameter tables exclude them.
pub(crate) fn check_cell(psi: &PsiCell) -> Result<()> {
    for (i, &v) in psi.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain {
                what: format!("psi{}", i + 1),
                value: v,
                interval: "[0,1]",
            });
        }
    }
    Ok(())
}
