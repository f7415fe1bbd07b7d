//! Exact event-driven stochastic simulation of the four reaction schemes.
//!
//! Direct method: the total rate of the enabled channels sets an exponential
//! waiting time, and the channel is chosen proportionally to its rate. For
//! the one-type processes the channels aggregate over cells (birth rate m,
//! death rate m), so no per-cell bookkeeping is needed.
//!
//! Reproducibility: trajectory i draws from a dedicated counter-based stream
//! (ChaCha8, stream id = i) derived from the base seed, and ensemble merging
//! reduces integer counters only. The returned statistics are therefore
//! byte-identical for any thread count and any scheduling order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{ProcessKind, ProcessSpec};
use crate::snapshot::{DistributionSnapshot, Engine};

/// Cell counts of one trajectory; `n` stays 0 for the one-type processes.
/// The stem cell of the source processes is immortal, so its presence is a
/// constant flag rather than a count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PopulationState {
    pub m: u64,
    pub n: u64,
    pub stem_active: bool,
}

/// One reaction channel firing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Event {
    Birth,
    Death,
    SourceInjection,
    Differentiate,    // P -> P + M
    DoubleDifferentiate, // P -> M + M
    Removal,          // M -> 0
}

fn key_from_seed(seed: u64) -> [u8; 32] {
    // splitmix64 expansion of the base seed into a ChaCha key.
    let mut z = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        z = z.wrapping_add(0x9e3779b97f4a7c15);
        let mut x = z;
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
        x ^= x >> 31;
        chunk.copy_from_slice(&x.to_le_bytes());
    }
    key
}

/// The per-trajectory random stream.
pub struct TrajectoryRng(ChaCha8Rng);

impl TrajectoryRng {
    pub fn new(base_seed: u64, trajectory: u64) -> Self {
        let mut rng = ChaCha8Rng::from_seed(key_from_seed(base_seed));
        rng.set_stream(trajectory);
        TrajectoryRng(rng)
    }

    fn uniform(&mut self) -> f64 {
        // 53-bit uniform in [0, 1).
        (self.0.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    fn exponential(&mut self, rate: f64) -> f64 {
        // 1 - U lies in (0, 1], so the log never sees zero.
        -(1.0 - self.uniform()).ln() / rate
    }
}

/// Enabled channels and their rates in the current state. Returns the total
/// rate and fills `channels` with (rate, event) pairs.
fn channel_rates(
    spec: &ProcessSpec,
    st: &PopulationState,
    channels: &mut Vec<(f64, Event)>,
) -> f64 {
    channels.clear();
    let m = st.m as f64;
    let n = st.n as f64;
    match spec.kind {
        ProcessKind::Critical => {
            if st.m > 0 {
                channels.push((m, Event::Birth));
                channels.push((m, Event::Death));
            }
        }
        ProcessKind::NoExtinction => {
            channels.push((m, Event::Birth));
            if st.m > 1 {
                channels.push((m, Event::Death));
            }
        }
        ProcessKind::Immigration => {
            // st.m counts the stem cell plus mortal cells.
            let mortal = m - 1.0;
            channels.push((spec.beta_value(), Event::SourceInjection));
            if st.m > 1 {
                channels.push((mortal, Event::Birth));
                channels.push((mortal, Event::Death));
            }
        }
        ProcessKind::TwoTypeSource => {
            let r = spec.r_value();
            if spec.beta_value() > 0.0 {
                channels.push((spec.beta_value(), Event::SourceInjection));
            }
            if st.m > 0 {
                channels.push((r * m, Event::Birth));
                channels.push(((1.0 - 2.0 * r) * m, Event::Differentiate));
                channels.push((r * m, Event::DoubleDifferentiate));
            }
            if st.n > 0 {
                channels.push((spec.gamma_value() * n, Event::Removal));
            }
        }
    }
    channels.iter().map(|(rate, _)| rate).sum()
}

fn apply(spec: &ProcessSpec, st: &mut PopulationState, event: Event) {
    match event {
        Event::Birth => st.m += 1,
        Event::Death => st.m -= 1,
        Event::SourceInjection => st.m += 1,
        Event::Differentiate => st.n += 1,
        Event::DoubleDifferentiate => {
            st.m -= 1;
            st.n += 2;
        }
        Event::Removal => st.n -= 1,
    }
    if spec.kind == ProcessKind::NoExtinction {
        assert!(st.m >= 1, "no-extinction floor violated");
    }
}

/// Draws the waiting time and channel for one event; `None` when no channel
/// is enabled (absorbing state).
pub(crate) fn step(
    spec: &ProcessSpec,
    st: &mut PopulationState,
    rng: &mut TrajectoryRng,
    channels: &mut Vec<(f64, Event)>,
) -> Option<f64> {
    let total = channel_rates(spec, st, channels);
    if total <= 0.0 {
        return None;
    }
    let dt = rng.exponential(total);
    let mut pick = rng.uniform() * total;
    let mut chosen = channels.last().expect("nonzero total implies channels").1;
    for &(rate, event) in channels.iter() {
        if pick < rate {
            chosen = event;
            break;
        }
        pick -= rate;
    }
    apply(spec, st, chosen);
    Some(dt)
}

fn initial_state(spec: &ProcessSpec) -> PopulationState {
    match spec.kind {
        ProcessKind::Critical | ProcessKind::NoExtinction => {
            PopulationState { m: 1, n: 0, stem_active: false }
        }
        ProcessKind::Immigration => PopulationState { m: 1, n: 0, stem_active: true },
        ProcessKind::TwoTypeSource => PopulationState { m: 0, n: 0, stem_active: true },
    }
}

/// Simulates one trajectory, recording the state at each sample time.
pub fn simulate_one(
    spec: &ProcessSpec,
    sample_times: &[f64],
    rng: &mut TrajectoryRng,
) -> Result<Vec<PopulationState>> {
    spec.validate()?;
    check_sample_times(sample_times)?;
    let mut st = initial_state(spec);
    let mut out = Vec::with_capacity(sample_times.len());
    let mut channels = Vec::with_capacity(6);
    let mut t = 0.0;
    let mut next = 0usize;
    while next < sample_times.len() {
        let before = st;
        match step(spec, &mut st, rng, &mut channels) {
            Some(dt) => {
                t += dt;
                while next < sample_times.len() && sample_times[next] < t {
                    out.push(before);
                    next += 1;
                }
            }
            None => {
                // Absorbing state: it holds for all remaining sample times.
                while next < sample_times.len() {
                    out.push(st);
                    next += 1;
                }
            }
        }
    }
    Ok(out)
}

fn check_sample_times(sample_times: &[f64]) -> Result<()> {
    if sample_times.is_empty() {
        return Err(Error::Domain("need at least one sample time".into()));
    }
    if sample_times[0] < 0.0 || sample_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("sample times must be nonnegative and increasing".into()));
    }
    Ok(())
}

/// Histogram and moment configuration of an ensemble run.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleOptions {
    pub trajectories: u64,
    pub base_seed: u64,
    /// Histogram bins along m; states above accumulate in the overflow count.
    pub cap_m: usize,
    /// Histogram bins along n (two-type only).
    pub cap_n: usize,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions { trajectories: 100_000, base_seed: 0, cap_m: 512, cap_n: 64 }
    }
}

/// A Monte Carlo moment estimate: ⟨axis^k⟩ with its standard error
/// (sample standard deviation / sqrt(trajectories)).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MomentEstimate {
    pub axis: String,
    pub k: u32,
    pub value: f64,
    pub stderr: f64,
}

/// Ensemble statistics: per-time histograms over states plus moment
/// estimates. Serialized form is byte-stable across thread counts.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnsembleStats {
    pub spec: ProcessSpec,
    pub base_seed: u64,
    pub trajectories: u64,
    pub sample_times: Vec<f64>,
    /// One histogram per sample time. One-type: hist[i] counts population
    /// origin+i. Two-type: row-major (cap_m+1) x (cap_n+1) grid over (m, n).
    pub histograms: Vec<Vec<u64>>,
    /// Trajectories whose state fell above the histogram range, per time.
    pub overflow: Vec<u64>,
    /// Trajectories below the support origin (extinct critical runs, m = 0).
    pub extinct: Vec<u64>,
    pub origin_m: u64,
    pub hist_rows: usize,
    pub hist_cols: usize,
    pub moments: Vec<Vec<MomentEstimate>>,
}

/// Integer accumulators; merging is associative and commutative, which makes
/// the parallel reduction order irrelevant to the result.
struct Accumulator {
    bins: Vec<Vec<u64>>,
    overflow: Vec<u64>,
    extinct: Vec<u64>,
    // Power sums per sample time and axis: m, m^2, m^4 (and n for two-type).
    sums_m: Vec<[u128; 3]>,
    sums_n: Vec<[u128; 3]>,
}

impl Accumulator {
    fn new(times: usize, bins_per_time: usize) -> Self {
        Accumulator {
            bins: vec![vec![0; bins_per_time]; times],
            overflow: vec![0; times],
            extinct: vec![0; times],
            sums_m: vec![[0; 3]; times],
            sums_n: vec![[0; 3]; times],
        }
    }

    fn merge(mut self, other: Accumulator) -> Accumulator {
        for (a, b) in self.bins.iter_mut().zip(other.bins) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.overflow.iter_mut().zip(other.overflow) {
            *x += y;
        }
        for (x, y) in self.extinct.iter_mut().zip(other.extinct) {
            *x += y;
        }
        for (a, b) in self.sums_m.iter_mut().zip(other.sums_m) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.sums_n.iter_mut().zip(other.sums_n) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self
    }

    fn record(
        &mut self,
        time_idx: usize,
        st: &PopulationState,
        origin: u64,
        rows: usize,
        cols: usize,
        two_type: bool,
    ) {
        let (m, n) = (st.m, st.n);
        if two_type {
            if (m as usize) < rows && (n as usize) < cols {
                self.bins[time_idx][m as usize * cols + n as usize] += 1;
            } else {
                self.overflow[time_idx] += 1;
            }
        } else if m < origin {
            self.extinct[time_idx] += 1;
        } else {
            let idx = (m - origin) as usize;
            if idx < rows {
                self.bins[time_idx][idx] += 1;
            } else {
                self.overflow[time_idx] += 1;
            }
        }
        let (m, n) = (m as u128, n as u128);
        self.sums_m[time_idx][0] += m;
        self.sums_m[time_idx][1] += m * m;
        self.sums_m[time_idx][2] += m * m * m * m;
        if two_type {
            self.sums_n[time_idx][0] += n;
            self.sums_n[time_idx][1] += n * n;
            self.sums_n[time_idx][2] += n * n * n * n;
        }
    }
}

/// Runs `opts.trajectories` independent trajectories with the current rayon
/// thread pool and merges them deterministically.
pub fn run_ensemble(
    spec: &ProcessSpec,
    sample_times: &[f64],
    opts: &EnsembleOptions,
) -> Result<EnsembleStats> {
    spec.validate()?;
    check_sample_times(sample_times)?;
    if opts.trajectories == 0 {
        return Err(Error::Domain("need at least one trajectory".into()));
    }
    let two_type = spec.is_two_type();
    let origin = spec.index_origin();
    let (rows, cols) =
        if two_type { (opts.cap_m + 1, opts.cap_n + 1) } else { (opts.cap_m + 1, 1) };
    let bins_per_time = rows * cols;
    let times = sample_times.len();
    if !matches!(bins_per_time.checked_mul(times), Some(v) if v <= (1 << 28)) {
        return Err(Error::Resource(format!(
            "histogram of {bins_per_time} bins x {times} times exceeds the memory budget"
        )));
    }

    let chunk = 4096u64.min(opts.trajectories).max(1);
    let n_chunks = opts.trajectories.div_ceil(chunk);
    let acc = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * chunk;
            let hi = ((ci + 1) * chunk).min(opts.trajectories);
            let mut local = Accumulator::new(times, bins_per_time);
            for traj in lo..hi {
                let mut rng = TrajectoryRng::new(opts.base_seed, traj);
                let states = simulate_one(spec, sample_times, &mut rng)
                    .expect("spec validated before the parallel region");
                for (ti, st) in states.iter().enumerate() {
                    local.record(ti, st, origin, rows, cols, two_type);
                }
            }
            local
        })
        .reduce(
            || Accumulator::new(times, bins_per_time),
            Accumulator::merge,
        );

    let nf = opts.trajectories as f64;
    let moment_table = |sums: &[[u128; 3]],
                        on_support: &dyn Fn(usize) -> f64,
                        axis: &str|
     -> Vec<Vec<MomentEstimate>> {
        sums.iter()
            .enumerate()
            .map(|(ti, s)| {
                let mean1 = s[0] as f64 / nf;
                let mean2 = s[1] as f64 / nf;
                let mean4 = s[2] as f64 / nf;
                let bessel = if opts.trajectories > 1 { nf / (nf - 1.0) } else { 1.0 };
                let var1 = ((mean2 - mean1 * mean1) * bessel).max(0.0);
                let var2 = ((mean4 - mean2 * mean2) * bessel).max(0.0);
                // <axis^0> restricted to the support: the survival fraction
                // for the critical process, exactly 1 for the immortal ones.
                let p0 = on_support(ti);
                vec![
                    MomentEstimate {
                        axis: axis.into(),
                        k: 0,
                        value: p0,
                        stderr: (p0 * (1.0 - p0) / nf).sqrt(),
                    },
                    MomentEstimate {
                        axis: axis.into(),
                        k: 1,
                        value: mean1,
                        stderr: (var1 / nf).sqrt(),
                    },
                    MomentEstimate {
                        axis: axis.into(),
                        k: 2,
                        value: mean2,
                        stderr: (var2 / nf).sqrt(),
                    },
                ]
            })
            .collect()
    };
    let extinct = acc.extinct.clone();
    let survival = |ti: usize| 1.0 - extinct[ti] as f64 / nf;
    let mut moments = moment_table(&acc.sums_m, &survival, "m");
    if two_type {
        for (mm, nn) in moments.iter_mut().zip(moment_table(&acc.sums_n, &|_| 1.0, "n")) {
            mm.extend(nn);
        }
    }

    Ok(EnsembleStats {
        spec: *spec,
        base_seed: opts.base_seed,
        trajectories: opts.trajectories,
        sample_times: sample_times.to_vec(),
        histograms: acc.bins,
        overflow: acc.overflow,
        extinct: acc.extinct,
        origin_m: origin,
        hist_rows: rows,
        hist_cols: cols,
        moments,
    })
}

impl EnsembleStats {
    /// Canonical JSON bytes; identical runs produce identical bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ensemble stats serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad ensemble stats: {e}")))
    }

    /// Converts the histograms to probability snapshots (with binomial
    /// standard errors per bin) in the common snapshot schema.
    pub fn to_snapshots(&self) -> Vec<DistributionSnapshot> {
        let nf = self.trajectories as f64;
        self.sample_times
            .iter()
            .zip(&self.histograms)
            .zip(&self.overflow)
            .map(|((&t, hist), &over)| {
                let probs: Vec<f64> = hist.iter().map(|&c| c as f64 / nf).collect();
                let stderr: Vec<f64> =
                    probs.iter().map(|&p| (p * (1.0 - p) / nf).sqrt()).collect();
                let tail = over as f64 / nf;
                let mut snap = if self.hist_cols > 1 {
                    DistributionSnapshot::two_type(
                        t,
                        Engine::MonteCarlo,
                        self.hist_rows,
                        self.hist_cols,
                        probs,
                        tail,
                    )
                } else {
                    DistributionSnapshot::one_type(
                        t,
                        Engine::MonteCarlo,
                        self.origin_m,
                        probs,
                        tail,
                    )
                };
                snap.stderr = Some(stderr);
                snap
            })
            .collect()
    }
}
