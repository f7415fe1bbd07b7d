//! Moment containers shared by the engines.

use serde::{Deserialize, Serialize};

/// Integer moments ⟨m⁰⟩..⟨m^k⟩ of a population distribution at one time.
///
/// For processes supported on m ≥ 1 the moments are nondecreasing in k and
/// ⟨m⁰⟩ is the probability mass on the support (the survival probability for
/// the critical process, 1 for the immortal ones).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub time: f64,
    /// values[k] = ⟨m^k⟩ for k = 0..=order.
    pub values: Vec<f64>,
    /// Standard errors aligned with `values`; present for Monte Carlo
    /// estimates only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderrs: Option<Vec<f64>>,
}

impl MomentSet {
    pub fn order(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    /// ⟨m^k⟩; panics if k exceeds the stored order.
    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }
}
