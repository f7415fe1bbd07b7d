//! Distribution snapshots and their CSV interchange schema.
//!
//! Every engine reports probabilities in the same layout so outputs can be
//! diffed index by index:
//!
//! - one-type processes: `probs[i]` is the probability of population
//!   `origin + i`, with `origin = 1`;
//! - two-type process: a dense row-major grid, `probs[m * cols + n]` is the
//!   probability of `m` progenitor and `n` post-mitotic cells.
//!
//! CSV schema (`# ibp-snapshot v1` header line):
//!
//! ```text
//! # ibp-snapshot v1
//! time,m,probability,tail_mass,engine
//! 1,1,0.25,0,closed_form
//! ```
//!
//! Two-type files add an `n` column after `m`. Monte Carlo exports append a
//! trailing `stderr` column; readers accept both variants.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "# ibp-snapshot v1";

/// Which engine produced a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Engine {
    #[serde(rename = "closed_form")]
    ClosedForm,
    #[serde(rename = "master_eq")]
    MasterEq,
    #[serde(rename = "monte_carlo")]
    MonteCarlo,
    #[serde(rename = "laplace_inv")]
    LaplaceInv,
    #[serde(rename = "characteristics")]
    Characteristics,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::ClosedForm => "closed_form",
            Engine::MasterEq => "master_eq",
            Engine::MonteCarlo => "monte_carlo",
            Engine::LaplaceInv => "laplace_inv",
            Engine::Characteristics => "characteristics",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed_form" => Ok(Engine::ClosedForm),
            "master_eq" => Ok(Engine::MasterEq),
            "monte_carlo" => Ok(Engine::MonteCarlo),
            "laplace_inv" => Ok(Engine::LaplaceInv),
            "characteristics" => Ok(Engine::Characteristics),
            other => Err(Error::Parse(format!("unknown engine {other:?}"))),
        }
    }
}

/// Probability storage for one- and two-type snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SnapshotData {
    OneType { origin: u64, probs: Vec<f64> },
    TwoType { rows: usize, cols: usize, probs: Vec<f64> },
}

/// A probability distribution over population size at a fixed time, with the
/// producing engine and an upper bound on the mass beyond the stored range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSnapshot {
    pub time: f64,
    pub engine: Engine,
    pub tail_mass: f64,
    pub data: SnapshotData,
    /// Per-entry standard errors (Monte Carlo only), aligned with the probs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<f64>>,
}

impl DistributionSnapshot {
    pub fn one_type(time: f64, engine: Engine, origin: u64, probs: Vec<f64>, tail: f64) -> Self {
        DistributionSnapshot {
            time,
            engine,
            tail_mass: tail,
            data: SnapshotData::OneType { origin, probs },
            stderr: None,
        }
    }

    pub fn two_type(
        time: f64,
        engine: Engine,
        rows: usize,
        cols: usize,
        probs: Vec<f64>,
        tail: f64,
    ) -> Self {
        assert_eq!(probs.len(), rows * cols);
        DistributionSnapshot {
            time,
            engine,
            tail_mass: tail,
            data: SnapshotData::TwoType { rows, cols, probs },
            stderr: None,
        }
    }

    pub fn is_two_type(&self) -> bool {
        matches!(self.data, SnapshotData::TwoType { .. })
    }

    pub fn probs(&self) -> &[f64] {
        match &self.data {
            SnapshotData::OneType { probs, .. } => probs,
            SnapshotData::TwoType { probs, .. } => probs,
        }
    }

    /// Probability of population `m` (one-type); zero outside the stored range.
    pub fn prob(&self, m: u64) -> f64 {
        match &self.data {
            SnapshotData::OneType { origin, probs } => {
                if m < *origin {
                    0.0
                } else {
                    probs.get((m - origin) as usize).copied().unwrap_or(0.0)
                }
            }
            SnapshotData::TwoType { .. } => panic!("prob(m) called on a two-type snapshot"),
        }
    }

    /// Probability of the state (m, n) on a two-type grid.
    pub fn prob_mn(&self, m: usize, n: usize) -> f64 {
        match &self.data {
            SnapshotData::TwoType { rows, cols, probs } => {
                if m < *rows && n < *cols {
                    probs[m * cols + n]
                } else {
                    0.0
                }
            }
            SnapshotData::OneType { .. } => panic!("prob_mn called on a one-type snapshot"),
        }
    }

    /// Total stored probability mass (excludes `tail_mass`).
    pub fn total_mass(&self) -> f64 {
        self.probs().iter().sum()
    }

    /// Marginal distribution over the first (m) axis of a two-type grid.
    pub fn marginal_m(&self) -> Vec<f64> {
        match &self.data {
            SnapshotData::TwoType { rows, cols, probs } => (0..*rows)
                .map(|m| probs[m * cols..(m + 1) * cols].iter().sum())
                .collect(),
            SnapshotData::OneType { probs, .. } => probs.clone(),
        }
    }

    /// Marginal distribution over the second (n) axis of a two-type grid.
    pub fn marginal_n(&self) -> Vec<f64> {
        match &self.data {
            SnapshotData::TwoType { rows, cols, probs } => {
                let mut out = vec![0.0; *cols];
                for m in 0..*rows {
                    for (n, o) in out.iter_mut().enumerate() {
                        *o += probs[m * cols + n];
                    }
                }
                out
            }
            SnapshotData::OneType { .. } => panic!("marginal_n on a one-type snapshot"),
        }
    }

    /// ⟨m^k⟩ over the stored range (first axis for two-type grids).
    pub fn moment(&self, k: u32) -> f64 {
        match &self.data {
            SnapshotData::OneType { origin, probs } => probs
                .iter()
                .enumerate()
                .map(|(i, p)| ((origin + i as u64) as f64).powi(k as i32) * p)
                .sum(),
            SnapshotData::TwoType { .. } => self
                .marginal_m()
                .iter()
                .enumerate()
                .map(|(m, p)| (m as f64).powi(k as i32) * p)
                .sum(),
        }
    }

    /// Largest stored index along the m axis (used for truncation bounds).
    pub fn max_index(&self) -> u64 {
        match &self.data {
            SnapshotData::OneType { origin, probs } => origin + probs.len() as u64 - 1,
            SnapshotData::TwoType { rows, .. } => *rows as u64 - 1,
        }
    }
}

/// Serializes snapshots to the versioned CSV schema. All snapshots in one
/// file must share the layout (one- or two-type).
pub fn write_csv(snaps: &[DistributionSnapshot]) -> Result<String> {
    if snaps.is_empty() {
        return Err(Error::Domain("cannot write an empty snapshot list".into()));
    }
    let two_type = snaps[0].is_two_type();
    let with_stderr = snaps.iter().any(|s| s.stderr.is_some());
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    out.push_str("time,m,");
    if two_type {
        out.push_str("n,");
    }
    out.push_str("probability,tail_mass,engine");
    if with_stderr {
        out.push_str(",stderr");
    }
    out.push('\n');
    for s in snaps {
        if s.is_two_type() != two_type {
            return Err(Error::SchemaMismatch(
                "mixed one-type and two-type snapshots in one file".into(),
            ));
        }
        let se = s.stderr.as_deref();
        match &s.data {
            SnapshotData::OneType { origin, probs } => {
                for (i, p) in probs.iter().enumerate() {
                    write!(
                        out,
                        "{},{},{},{},{}",
                        s.time,
                        origin + i as u64,
                        p,
                        s.tail_mass,
                        s.engine.as_str()
                    )
                    .unwrap();
                    if with_stderr {
                        write!(out, ",{}", se.map_or(0.0, |v| v[i])).unwrap();
                    }
                    out.push('\n');
                }
            }
            SnapshotData::TwoType { rows, cols, probs } => {
                for m in 0..*rows {
                    for n in 0..*cols {
                        let i = m * cols + n;
                        write!(
                            out,
                            "{},{},{},{},{},{}",
                            s.time,
                            m,
                            n,
                            probs[i],
                            s.tail_mass,
                            s.engine.as_str()
                        )
                        .unwrap();
                        if with_stderr {
                            write!(out, ",{}", se.map_or(0.0, |v| v[i])).unwrap();
                        }
                        out.push('\n');
                    }
                }
            }
        }
    }
    Ok(out)
}

/// A parsed CSV row; indices are `(m, None)` or `(m, Some(n))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub time: f64,
    pub m: u64,
    pub n: Option<u64>,
    pub probability: f64,
    pub tail_mass: f64,
    pub engine: Engine,
    pub stderr: Option<f64>,
}

/// Parses the snapshot CSV schema back into rows.
pub fn read_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| Error::Parse("empty snapshot file".into()))?;
    if first.trim() != CSV_HEADER {
        return Err(Error::SchemaMismatch(format!(
            "expected header {CSV_HEADER:?}, got {first:?}"
        )));
    }
    let header = lines.next().ok_or_else(|| Error::Parse("missing column header".into()))?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let (two_type, with_stderr) = match cols.as_slice() {
        ["time", "m", "probability", "tail_mass", "engine"] => (false, false),
        ["time", "m", "probability", "tail_mass", "engine", "stderr"] => (false, true),
        ["time", "m", "n", "probability", "tail_mass", "engine"] => (true, false),
        ["time", "m", "n", "probability", "tail_mass", "engine", "stderr"] => (true, true),
        _ => return Err(Error::SchemaMismatch(format!("unrecognized columns {header:?}"))),
    };
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        let expect = 5 + usize::from(two_type) + usize::from(with_stderr);
        if fields.len() != expect {
            return Err(Error::Parse(format!(
                "line {}: expected {expect} fields, got {}",
                lineno + 3,
                fields.len()
            )));
        }
        let fval = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 3)))
        };
        let ival = |s: &str| -> Result<u64> {
            s.parse::<u64>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 3)))
        };
        let mut it = fields.into_iter();
        let time = fval(it.next().unwrap())?;
        let m = ival(it.next().unwrap())?;
        let n = if two_type { Some(ival(it.next().unwrap())?) } else { None };
        let probability = fval(it.next().unwrap())?;
        let tail_mass = fval(it.next().unwrap())?;
        let engine: Engine = it.next().unwrap().parse()?;
        let stderr = if with_stderr { Some(fval(it.next().unwrap())?) } else { None };
        rows.push(CsvRow { time, m, n, probability, tail_mass, engine, stderr });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_one_type() {
        let snap = DistributionSnapshot::one_type(
            1.5,
            Engine::ClosedForm,
            1,
            vec![0.25, 0.125, 0.0625],
            1e-12,
        );
        let text = write_csv(std::slice::from_ref(&snap)).unwrap();
        let rows = read_csv(&text).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].m, 1);
        assert_eq!(rows[0].probability, 0.25);
        assert_eq!(rows[2].m, 3);
        assert_eq!(rows[2].probability, 0.0625);
        assert_eq!(rows[0].engine, Engine::ClosedForm);
        assert_eq!(rows[0].tail_mass, 1e-12);
    }

    #[test]
    fn csv_round_trip_two_type_with_stderr() {
        let mut snap = DistributionSnapshot::two_type(
            2.0,
            Engine::MonteCarlo,
            2,
            2,
            vec![0.5, 0.25, 0.125, 0.125],
            0.0,
        );
        snap.stderr = Some(vec![1e-3, 2e-3, 3e-3, 4e-3]);
        let text = write_csv(std::slice::from_ref(&snap)).unwrap();
        let rows = read_csv(&text).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].n, Some(1));
        assert_eq!(rows[1].stderr, Some(2e-3));
    }

    #[test]
    fn csv_rejects_foreign_header() {
        assert!(matches!(read_csv("time,m\n"), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn marginals_and_moments() {
        let snap = DistributionSnapshot::two_type(
            1.0,
            Engine::Characteristics,
            2,
            3,
            vec![0.1, 0.2, 0.1, 0.3, 0.2, 0.1],
            0.0,
        );
        let mm = snap.marginal_m();
        assert!((mm[0] - 0.4).abs() < 1e-15);
        assert!((mm[1] - 0.6).abs() < 1e-15);
        let mn = snap.marginal_n();
        assert!((mn[0] - 0.4).abs() < 1e-15);
        assert!((snap.moment(1) - 0.6).abs() < 1e-15);
    }
}
