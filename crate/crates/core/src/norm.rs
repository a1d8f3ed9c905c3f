//! Propagator-norm results shared by the classical and quantum sides.

use crate::noise::Side;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// Noise after every step: ‖(G𝒰)^n‖.
    Noisy,
    /// Noise only before and after n clean steps: ‖G𝒰^nG‖.
    Coarse,
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Flavor::Noisy => "noisy",
            Flavor::Coarse => "coarse",
        })
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Classical => "classical",
            Side::Quantum => "quantum",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatorNorm {
    pub value: f64,
    pub log_value: f64,
    pub n: u64,
    /// Mode attaining the maximum (for iterative paths: the largest component of the top singular vector).
    pub maximizer: Vec<i64>,
    pub flavor: Flavor,
    pub side: Side,
    /// False when the value rests on an estimate rather than a certified search.
    pub certified: bool,
}

impl PropagatorNorm {
    pub fn from_log(log_value: f64, n: u64, maximizer: Vec<i64>, flavor: Flavor, side: Side) -> Self {
        let log_value = log_value.min(0.0);
        Self { value: log_value.exp(), log_value, n, maximizer, flavor, side, certified: true }
    }

    pub fn uncertified(mut self) -> Self {
        self.certified = false;
        self
    }
}
