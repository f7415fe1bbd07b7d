//! Process taxonomy and parameter validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four supported branching processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProcessKind {
    /// Critical birth/death branching from a single cell; both rates are 1
    /// by choice of time unit.
    #[serde(rename = "critical")]
    Critical,
    /// Critical branching with the death channel disabled whenever exactly
    /// one cell remains.
    #[serde(rename = "noext")]
    NoExtinction,
    /// Critical branching fed by an immortal stem cell at rate β. The
    /// population index m counts the stem cell plus m−1 ordinary cells.
    #[serde(rename = "immigration")]
    Immigration,
    /// Two-type process: a source injects progenitor cells (rate β) which
    /// proliferate (rate r), differentiate (rate 1−2r into P+M, rate r into
    /// M+M), while post-mitotic cells are removed at rate γ.
    #[serde(rename = "twotype")]
    TwoTypeSource,
}

impl ProcessKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProcessKind::Critical => "critical",
            ProcessKind::NoExtinction => "noext",
            ProcessKind::Immigration => "immigration",
            ProcessKind::TwoTypeSource => "twotype",
        }
    }
}

impl std::fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProcessKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "critical" => Ok(ProcessKind::Critical),
            "noext" => Ok(ProcessKind::NoExtinction),
            "immigration" => Ok(ProcessKind::Immigration),
            "twotype" => Ok(ProcessKind::TwoTypeSource),
            other => Err(Error::Parse(format!(
                "unknown process kind {other:?} (expected critical|noext|immigration|twotype)"
            ))),
        }
    }
}

/// A process together with its rate parameters.
///
/// `Critical` and `NoExtinction` carry no parameters (their rates are fixed
/// to 1 by the time unit). `Immigration` requires `beta > 0`. `TwoTypeSource`
/// requires `beta >= 0`, `0 < r <= 1/2` and `gamma > 0`.
///
/// JSON form: `{"kind": "...", "beta": ..., "r": ..., "gamma": ...}`;
/// omitted fields deserialize to `None` and fail [`validate`](Self::validate)
/// if the process requires them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl ProcessSpec {
    pub fn critical() -> Self {
        ProcessSpec { kind: ProcessKind::Critical, beta: None, r: None, gamma: None }
    }

    pub fn no_extinction() -> Self {
        ProcessSpec { kind: ProcessKind::NoExtinction, beta: None, r: None, gamma: None }
    }

    pub fn immigration(beta: f64) -> Self {
        ProcessSpec { kind: ProcessKind::Immigration, beta: Some(beta), r: None, gamma: None }
    }

    pub fn two_type(beta: f64, r: f64, gamma: f64) -> Self {
        ProcessSpec {
            kind: ProcessKind::TwoTypeSource,
            beta: Some(beta),
            r: Some(r),
            gamma: Some(gamma),
        }
    }

    /// Checks the parameter invariants for the process kind.
    pub fn validate(&self) -> Result<()> {
        let reject_extra = |field: Option<f64>, name: &str| -> Result<()> {
            if field.is_some() {
                Err(Error::ExtraneousParameter(format!(
                    "{} does not take parameter {name}",
                    self.kind
                )))
            } else {
                Ok(())
            }
        };
        let finite = |v: f64, name: &str| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be finite, got {v}")))
            }
        };
        match self.kind {
            ProcessKind::Critical | ProcessKind::NoExtinction => {
                reject_extra(self.beta, "beta")?;
                reject_extra(self.r, "r")?;
                reject_extra(self.gamma, "gamma")?;
            }
            ProcessKind::Immigration => {
                reject_extra(self.r, "r")?;
                reject_extra(self.gamma, "gamma")?;
                let beta = self
                    .beta
                    .ok_or_else(|| Error::MissingParameter("immigration requires beta".into()))?;
                finite(beta, "beta")?;
                if beta <= 0.0 {
                    return Err(Error::NegativeRate(format!(
                        "immigration requires beta > 0, got {beta}"
                    )));
                }
            }
            ProcessKind::TwoTypeSource => {
                let beta = self
                    .beta
                    .ok_or_else(|| Error::MissingParameter("twotype requires beta".into()))?;
                let r = self
                    .r
                    .ok_or_else(|| Error::MissingParameter("twotype requires r".into()))?;
                let gamma = self
                    .gamma
                    .ok_or_else(|| Error::MissingParameter("twotype requires gamma".into()))?;
                finite(beta, "beta")?;
                finite(r, "r")?;
                finite(gamma, "gamma")?;
                if beta < 0.0 {
                    return Err(Error::NegativeRate(format!("beta must be >= 0, got {beta}")));
                }
                if r < 0.0 {
                    return Err(Error::NegativeRate(format!("r must be positive, got {r}")));
                }
                // The P -> P+M channel has rate 1-2r, which must stay nonnegative.
                if r == 0.0 || r > 0.5 {
                    return Err(Error::RateOutOfRange(format!(
                        "twotype requires 0 < r <= 1/2, got {r}"
                    )));
                }
                if gamma <= 0.0 {
                    return Err(Error::NegativeRate(format!("gamma must be > 0, got {gamma}")));
                }
            }
        }
        Ok(())
    }

    /// Smallest population index the process supports: 1 for the one-type
    /// processes, 0 (per axis) for the two-type process.
    pub fn index_origin(&self) -> u64 {
        match self.kind {
            ProcessKind::TwoTypeSource => 0,
            _ => 1,
        }
    }

    pub fn is_two_type(&self) -> bool {
        self.kind == ProcessKind::TwoTypeSource
    }

    pub(crate) fn beta_value(&self) -> f64 {
        self.beta.unwrap_or(0.0)
    }

    pub(crate) fn r_value(&self) -> f64 {
        self.r.unwrap_or(0.0)
    }

    pub(crate) fn gamma_value(&self) -> f64 {
        self.gamma.unwrap_or(0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad process spec: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_is_parameterless_ok() {
        assert!(ProcessSpec::critical().validate().is_ok());
        assert!(ProcessSpec::no_extinction().validate().is_ok());
    }

    #[test]
    fn critical_rejects_parameters() {
        let mut s = ProcessSpec::critical();
        s.beta = Some(1.0);
        assert!(matches!(s.validate(), Err(Error::ExtraneousParameter(_))));
    }

    #[test]
    fn twotype_r_out_of_range() {
        let s = ProcessSpec::two_type(1.0, 0.6, 1.0);
        assert!(matches!(s.validate(), Err(Error::RateOutOfRange(_))));
        let s = ProcessSpec::two_type(1.0, 0.0, 1.0);
        assert!(matches!(s.validate(), Err(Error::RateOutOfRange(_))));
        assert!(ProcessSpec::two_type(0.0, 0.5, 2.0).validate().is_ok());
    }

    #[test]
    fn immigration_requires_active_source() {
        let s = ProcessSpec::immigration(0.0);
        assert!(matches!(s.validate(), Err(Error::NegativeRate(_))));
        let s = ProcessSpec { kind: ProcessKind::Immigration, beta: None, r: None, gamma: None };
        assert!(matches!(s.validate(), Err(Error::MissingParameter(_))));
        assert!(ProcessSpec::immigration(0.5).validate().is_ok());
    }

    #[test]
    fn json_omits_absent_fields() {
        assert_eq!(ProcessSpec::critical().to_json(), r#"{"kind":"critical"}"#);
        let s = ProcessSpec::from_json(r#"{"kind":"immigration","beta":1.5}"#).unwrap();
        assert_eq!(s, ProcessSpec::immigration(1.5));
        // Missing required field deserializes but fails validation.
        let s = ProcessSpec::from_json(r#"{"kind":"immigration"}"#).unwrap();
        assert!(s.validate().is_err());
    }

    #[test]
    fn index_origin_convention() {
        assert_eq!(ProcessSpec::critical().index_origin(), 1);
        assert_eq!(ProcessSpec::immigration(1.0).index_origin(), 1);
        assert_eq!(ProcessSpec::two_type(1.0, 0.25, 1.0).index_origin(), 0);
    }
}
