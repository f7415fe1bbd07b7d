//! Direct integration of the truncated master equations.
//!
//! The truncated generator is kept exactly substochastic: probability that
//! would flow past the truncation boundary is accumulated in a lost-mass
//! counter instead of being reflected, so conservation diagnostics stay
//! meaningful. For the critical process the extinction flux (death of the
//! last cell) is tracked in its own counter.
//!
//! Two integrators are available:
//!
//! - [`OdeMethod::Dopri5`]: the adaptive embedded 4/5 pair. The truncated
//!   generator has spectral radius O(cap), so the step controller enforces
//!   dt ≲ c/cap; this is the default and is affordable for cap ≤ 1e4 and
//!   t ≲ 100.
//! - [`OdeMethod::ImplicitTrapezoid`]: Crank–Nicolson with a tridiagonal
//!   (Thomas) solve and step-doubling error control, for the one-type
//!   processes only. The stability limit disappears, which makes long-time
//!   runs (t ~ 1e3 with caps ~ 1e4) practical.

use crate::error::{Error, Result};
use crate::moments::MomentSet;
use crate::process::{ProcessKind, ProcessSpec};
use crate::rk::{dopri5_to, OdeOptions};
use crate::snapshot::{DistributionSnapshot, Engine};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationStrategy {
    Fixed,
    AdaptiveGrow,
}

/// Population-index truncation: `cap` states per axis (`cap_n` overrides the
/// second axis of the two-type grid), and the tail tolerance that triggers
/// regrowth under [`TruncationStrategy::AdaptiveGrow`].
#[derive(Debug, Clone, Copy)]
pub struct TruncationPolicy {
    pub cap: usize,
    pub cap_n: Option<usize>,
    pub tail_tolerance: f64,
    pub strategy: TruncationStrategy,
}

impl TruncationPolicy {
    pub fn fixed(cap: usize) -> Self {
        TruncationPolicy {
            cap,
            cap_n: None,
            tail_tolerance: 1e-8,
            strategy: TruncationStrategy::Fixed,
        }
    }

    pub fn adaptive(cap: usize, tail_tolerance: f64) -> Self {
        TruncationPolicy {
            cap,
            cap_n: None,
            tail_tolerance,
            strategy: TruncationStrategy::AdaptiveGrow,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.cap < 2 || self.cap_n.is_some_and(|c| c < 2) {
            return Err(Error::Domain("truncation cap must be at least 2".into()));
        }
        if !(self.tail_tolerance > 0.0) {
            return Err(Error::Domain("tail tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OdeMethod {
    #[default]
    Dopri5,
    ImplicitTrapezoid,
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub method: OdeMethod,
    /// Hard memory cap on the number of stored states.
    pub max_states: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        // Deep-tail entries accumulate integration noise of order abs_tol;
        // keeping it an order below the -1e-12 nonnegativity floor means the
        // noise can never masquerade as negative probability.
        IntegrateOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-10,
            method: OdeMethod::Dopri5,
            max_states: 1 << 22,
        }
    }
}

/// Integrates the truncated master equation of `spec` and returns one
/// snapshot per grid time.
///
/// Initial condition: a single cell for the one-type processes, an empty
/// system for the two-type process. The reported `tail_mass` is the lost
/// boundary mass plus the probability currently sitting in the top 1% of
/// indices; under `AdaptiveGrow` the cap doubles and integration restarts
/// from the last completed grid time whenever that quantity exceeds the
/// policy tolerance.
pub fn integrate(
    spec: &ProcessSpec,
    t_grid: &[f64],
    policy: &TruncationPolicy,
    opts: &IntegrateOptions,
) -> Result<Vec<DistributionSnapshot>> {
    spec.validate()?;
    policy.validate()?;
    check_grid(t_grid)?;
    if spec.is_two_type() {
        integrate_two_type(spec, t_grid, policy, opts)
    } else {
        integrate_one_type(spec, t_grid, policy, opts)
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Domain("empty time grid".into()));
    }
    if t_grid[0] < 0.0 {
        return Err(Error::Domain("times must be nonnegative".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("times must be strictly increasing".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------- one-type

/// Per-state transition rates of a one-type process, precomputed for a cap.
/// `birth[i]` is the m -> m+1 rate and `death[i]` the m -> m-1 rate of the
/// state with population m = i+1.
struct OneTypeRates {
    birth: Vec<f64>,
    death: Vec<f64>,
}

impl OneTypeRates {
    fn new(kind: ProcessKind, beta: f64, cap: usize) -> Self {
        let mut birth = Vec::with_capacity(cap);
        let mut death = Vec::with_capacity(cap);
        for i in 0..cap {
            let m = (i + 1) as f64;
            match kind {
                ProcessKind::Critical => {
                    birth.push(m);
                    death.push(m);
                }
                ProcessKind::NoExtinction => {
                    birth.push(m);
                    death.push(if i == 0 { 0.0 } else { m });
                }
                // m counts the stem cell plus m-1 ordinary cells; the source
                // fires at rate beta and each ordinary cell at rate 1.
                ProcessKind::Immigration => {
                    birth.push(m - 1.0 + beta);
                    death.push(m - 1.0);
                }
                ProcessKind::TwoTypeSource => unreachable!(),
            }
        }
        OneTypeRates { birth, death }
    }
}

/// State layout: [P_1 .. P_cap, lost, extinct].
fn one_type_rhs(rates: &OneTypeRates, p: &[f64], dp: &mut [f64]) {
    let cap = p.len() - 2;
    let (b, d) = (&rates.birth, &rates.death);
    for i in 0..cap {
        let mut acc = -(b[i] + d[i]) * p[i];
        if i > 0 {
            acc += b[i - 1] * p[i - 1];
        }
        if i + 1 < cap {
            acc += d[i + 1] * p[i + 1];
        }
        dp[i] = acc;
    }
    // Births out of the cap are lost; the death of a single critical cell is
    // the extinction flux (death[0] is zero for the other processes).
    dp[cap] = b[cap - 1] * p[cap - 1];
    dp[cap + 1] = d[0] * p[0];
}

fn one_type_tail(p: &[f64]) -> f64 {
    let cap = p.len() - 2;
    let top = (cap / 100).max(1);
    let dynamic: f64 = p[cap - top..cap].iter().sum();
    (p[cap] + dynamic).max(0.0)
}

/// Negative entries beyond the integration-noise floor indicate a broken
/// run; below it they are clamped to zero. At the default tolerances the
/// floor is the documented -1e-12.
fn noise_floor(opts: &IntegrateOptions) -> f64 {
    (10.0 * opts.abs_tol).max(1e-12)
}

fn one_type_snapshot(t: f64, p: &[f64], floor: f64) -> Result<DistributionSnapshot> {
    let cap = p.len() - 2;
    let mut probs = Vec::with_capacity(cap);
    for &v in &p[..cap] {
        if v < -floor {
            return Err(Error::Precision(format!(
                "integrator produced probability {v:.3e} < -{floor:.1e} at t = {t}"
            )));
        }
        probs.push(v.max(0.0));
    }
    Ok(DistributionSnapshot::one_type(t, Engine::MasterEq, 1, probs, one_type_tail(p)))
}

fn integrate_one_type(
    spec: &ProcessSpec,
    t_grid: &[f64],
    policy: &TruncationPolicy,
    opts: &IntegrateOptions,
) -> Result<Vec<DistributionSnapshot>> {
    let mut cap = policy.cap;
    // checkpoint: last fully accepted (time, state)
    let mut ck_t = 0.0;
    let mut ck_state = initial_one_type(cap);
    let mut done: Vec<DistributionSnapshot> = Vec::new();

    'outer: loop {
        let rates = OneTypeRates::new(spec.kind, spec.beta_value(), cap);
        let mut t = ck_t;
        let mut state = ck_state.clone();
        let mut out: Vec<DistributionSnapshot> = Vec::new();
        let resume_after = ck_t;
        for &target in t_grid.iter().filter(|&&x| x > resume_after) {
            match opts.method {
                OdeMethod::Dopri5 => {
                    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| one_type_rhs(&rates, y, dy);
                    dopri5_to(
                        &mut rhs,
                        t,
                        target,
                        &mut state,
                        &OdeOptions {
                            abs_tol: opts.abs_tol,
                            rel_tol: opts.rel_tol,
                            ..OdeOptions::default()
                        },
                        &mut |_, _| Ok(()),
                    )?;
                }
                OdeMethod::ImplicitTrapezoid => {
                    implicit::advance(&rates, t, target, &mut state, opts)?;
                }
            }
            t = target;
            let tail = one_type_tail(&state);
            if policy.strategy == TruncationStrategy::AdaptiveGrow
                && tail > policy.tail_tolerance
            {
                cap = cap.checked_mul(2).unwrap_or(usize::MAX);
                if cap > opts.max_states {
                    return Err(Error::Truncation(format!(
                        "tail {tail:.3e} > {:.3e} but cap {cap} exceeds the memory budget",
                        policy.tail_tolerance
                    )));
                }
                ck_state = regrow_one_type(&ck_state, cap);
                done.append(&mut out);
                continue 'outer;
            }
            out.push(one_type_snapshot(t, &state, noise_floor(opts))?);
            ck_t = t;
            ck_state = state.clone();
        }
        done.append(&mut out);
        break;
    }
    // Emit the initial condition directly when t = 0 is requested.
    if t_grid[0] == 0.0 {
        done.insert(0, one_type_snapshot(0.0, &initial_one_type(cap), noise_floor(opts))?);
    }
    Ok(done)
}

fn initial_one_type(cap: usize) -> Vec<f64> {
    let mut p = vec![0.0; cap + 2];
    p[0] = 1.0;
    p
}

fn regrow_one_type(state: &[f64], new_cap: usize) -> Vec<f64> {
    let old_cap = state.len() - 2;
    let mut p = vec![0.0; new_cap + 2];
    p[..old_cap].copy_from_slice(&state[..old_cap]);
    p[new_cap] = state[old_cap]; // lost
    p[new_cap + 1] = state[old_cap + 1]; // extinct
    p
}

// ---------------------------------------------------------------- two-type

struct TwoTypeSystem {
    rows: usize,
    cols: usize,
    r: f64,
    gamma: f64,
    beta: f64,
}

impl TwoTypeSystem {
    /// State layout: [P_{0,0} .. P_{rows-1,cols-1} row-major, lost].
    fn rhs(&self, p: &[f64], dp: &mut [f64]) {
        let (rows, cols) = (self.rows, self.cols);
        let (r, gamma, beta) = (self.r, self.gamma, self.beta);
        let idx = |m: usize, n: usize| m * cols + n;
        let mut lost = 0.0;
        for m in 0..rows {
            let mf = m as f64;
            for n in 0..cols {
                let nf = n as f64;
                let i = idx(m, n);
                let mut acc = -(mf + gamma * nf + beta) * p[i];
                if m >= 1 {
                    acc += (r * (mf - 1.0) + beta) * p[idx(m - 1, n)];
                }
                if m + 1 < rows && n >= 2 {
                    acc += r * (mf + 1.0) * p[idx(m + 1, n - 2)];
                }
                if n >= 1 {
                    acc += (1.0 - 2.0 * r) * mf * p[idx(m, n - 1)];
                }
                if n + 1 < cols {
                    acc += gamma * (nf + 1.0) * p[idx(m, n + 1)];
                }
                dp[i] = acc;
                // Fluxes leaving the grid.
                if m + 1 == rows {
                    lost += (r * mf + beta) * p[i];
                }
                if n + 1 == cols {
                    lost += (1.0 - 2.0 * r) * mf * p[i];
                }
                if n + 2 >= cols {
                    lost += r * mf * p[i];
                }
            }
        }
        dp[rows * cols] = lost;
    }

    fn tail(&self, p: &[f64]) -> f64 {
        let (rows, cols) = (self.rows, self.cols);
        let mut border = 0.0;
        for n in 0..cols {
            border += p[(rows - 1) * cols + n];
        }
        for m in 0..rows.saturating_sub(1) {
            border += p[m * cols + cols - 1];
        }
        (p[rows * cols] + border).max(0.0)
    }
}

fn integrate_two_type(
    spec: &ProcessSpec,
    t_grid: &[f64],
    policy: &TruncationPolicy,
    opts: &IntegrateOptions,
) -> Result<Vec<DistributionSnapshot>> {
    if opts.method == OdeMethod::ImplicitTrapezoid {
        return Err(Error::Domain(
            "the implicit trapezoid path supports one-type processes only".into(),
        ));
    }
    let mut rows = policy.cap;
    let mut cols = policy.cap_n.unwrap_or(policy.cap);
    let mut ck_t = 0.0;
    let mut ck_state = initial_two_type(rows, cols);
    let mut done: Vec<DistributionSnapshot> = Vec::new();

    'outer: loop {
        let sys = TwoTypeSystem {
            rows,
            cols,
            r: spec.r_value(),
            gamma: spec.gamma_value(),
            beta: spec.beta_value(),
        };
        let mut t = ck_t;
        let mut state = ck_state.clone();
        let mut out: Vec<DistributionSnapshot> = Vec::new();
        let resume_after = ck_t;
        for &target in t_grid.iter().filter(|&&x| x > resume_after) {
            let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| sys.rhs(y, dy);
            dopri5_to(
                &mut rhs,
                t,
                target,
                &mut state,
                &OdeOptions {
                    abs_tol: opts.abs_tol,
                    rel_tol: opts.rel_tol,
                    ..OdeOptions::default()
                },
                &mut |_, _| Ok(()),
            )?;
            t = target;
            let tail = sys.tail(&state);
            if policy.strategy == TruncationStrategy::AdaptiveGrow
                && tail > policy.tail_tolerance
            {
                (rows, cols) = (rows * 2, cols * 2);
                if rows * cols > opts.max_states {
                    return Err(Error::Truncation(format!(
                        "tail {tail:.3e} > {:.3e} but grid {rows}x{cols} exceeds the memory budget",
                        policy.tail_tolerance
                    )));
                }
                ck_state = regrow_two_type(&ck_state, sys.rows, sys.cols, rows, cols);
                done.append(&mut out);
                continue 'outer;
            }
            out.push(two_type_snapshot(t, &state, rows, cols, tail, noise_floor(opts))?);
            ck_t = t;
            ck_state = state.clone();
        }
        done.append(&mut out);
        break;
    }
    if t_grid[0] == 0.0 {
        let init = initial_two_type(rows, cols);
        done.insert(0, two_type_snapshot(0.0, &init, rows, cols, 0.0, noise_floor(opts))?);
    }
    Ok(done)
}

fn initial_two_type(rows: usize, cols: usize) -> Vec<f64> {
    let mut p = vec![0.0; rows * cols + 1];
    p[0] = 1.0;
    p
}

fn regrow_two_type(
    state: &[f64],
    old_rows: usize,
    old_cols: usize,
    rows: usize,
    cols: usize,
) -> Vec<f64> {
    let mut p = vec![0.0; rows * cols + 1];
    for m in 0..old_rows {
        p[m * cols..m * cols + old_cols]
            .copy_from_slice(&state[m * old_cols..(m + 1) * old_cols]);
    }
    p[rows * cols] = state[old_rows * old_cols];
    p
}

fn two_type_snapshot(
    t: f64,
    state: &[f64],
    rows: usize,
    cols: usize,
    tail: f64,
    floor: f64,
) -> Result<DistributionSnapshot> {
    let mut probs = Vec::with_capacity(rows * cols);
    for &v in &state[..rows * cols] {
        if v < -floor {
            return Err(Error::Precision(format!(
                "integrator produced probability {v:.3e} < -{floor:.1e} at t = {t}"
            )));
        }
        probs.push(v.max(0.0));
    }
    Ok(DistributionSnapshot::two_type(t, Engine::MasterEq, rows, cols, probs, tail))
}

/// Moments by direct summation over a snapshot, with the truncation-error
/// bound `max_index^k_max * tail_mass` checked against `tolerance`.
pub fn moments_from_snapshot(
    snap: &DistributionSnapshot,
    k_max: usize,
    tolerance: f64,
) -> Result<MomentSet> {
    let bound = (snap.max_index() as f64).powi(k_max as i32) * snap.tail_mass;
    if !(bound < tolerance) {
        return Err(Error::Precision(format!(
            "moment truncation bound {bound:.3e} exceeds requested tolerance {tolerance:.3e}"
        )));
    }
    let values = (0..=k_max).map(|k| snap.moment(k as u32)).collect();
    Ok(MomentSet { time: snap.time, values, stderrs: None })
}

// Crank-Nicolson on the tridiagonal one-type generator.
mod implicit {
    use super::{IntegrateOptions, OneTypeRates};
    use crate::error::{Error, Result};

    /// One trapezoidal step: solve (I - h/2 Q) x = (I + h/2 Q) p for the
    /// probability block; lost/extinct counters advance with the trapezoid
    /// of their fluxes. Band coefficients of Q for row i <-> m = i+1:
    /// Q[i][i-1] = birth[i-1], Q[i][i] = -(birth[i]+death[i]),
    /// Q[i][i+1] = death[i+1].
    fn cn_step(rates: &OneTypeRates, p: &[f64], h: f64, out: &mut Vec<f64>) {
        let cap = p.len() - 2;
        let (b, d) = (&rates.birth, &rates.death);
        let q_diag = |i: usize| -(b[i] + d[i]);

        // rhs = (I + h/2 Q) p
        let mut rhs = vec![0.0; cap];
        for (i, r) in rhs.iter_mut().enumerate() {
            let mut acc = (1.0 + 0.5 * h * q_diag(i)) * p[i];
            if i > 0 {
                acc += 0.5 * h * b[i - 1] * p[i - 1];
            }
            if i + 1 < cap {
                acc += 0.5 * h * d[i + 1] * p[i + 1];
            }
            *r = acc;
        }
        // Thomas solve of (I - h/2 Q) x = rhs; the matrix is strictly
        // diagonally dominant (dominance margin 1).
        let mut c_prime = vec![0.0; cap];
        let mut x = rhs;
        let mut denom = 1.0 - 0.5 * h * q_diag(0);
        c_prime[0] = -0.5 * h * d[1] / denom;
        x[0] /= denom;
        for i in 1..cap {
            let lower = -0.5 * h * b[i - 1];
            denom = (1.0 - 0.5 * h * q_diag(i)) - lower * c_prime[i - 1];
            if i + 1 < cap {
                c_prime[i] = -0.5 * h * d[i + 1] / denom;
            }
            x[i] = (x[i] - lower * x[i - 1]) / denom;
        }
        for i in (0..cap - 1).rev() {
            x[i] -= c_prime[i] * x[i + 1];
        }

        // Trapezoidal updates of the loss counters (death[0] is nonzero only
        // for the critical process, where it is the extinction flux).
        let lost = p[cap] + 0.5 * h * b[cap - 1] * (p[cap - 1] + x[cap - 1]);
        let extinct = p[cap + 1] + 0.5 * h * d[0] * (p[0] + x[0]);
        out.clear();
        out.extend_from_slice(&x);
        out.push(lost);
        out.push(extinct);
    }

    /// Advances the state with step-doubling error control (the fine result
    /// is kept; the coarse/fine difference drives the step size).
    pub(super) fn advance(
        rates: &OneTypeRates,
        t0: f64,
        t1: f64,
        state: &mut Vec<f64>,
        opts: &IntegrateOptions,
    ) -> Result<()> {
        let mut t = t0;
        let mut h: f64 = 1e-4;
        let mut full = Vec::new();
        let mut half = Vec::new();
        let mut fine = Vec::new();
        let mut steps = 0usize;
        while t < t1 {
            if steps > 50_000_000 {
                return Err(Error::Stiffness(format!(
                    "implicit step budget exhausted at t = {t}"
                )));
            }
            let h_eff = h.min(t1 - t);
            cn_step(rates, state, h_eff, &mut full);
            cn_step(rates, state, 0.5 * h_eff, &mut half);
            cn_step(rates, &half, 0.5 * h_eff, &mut fine);
            let cap = state.len() - 2;
            let mut err: f64 = 0.0;
            for i in 0..cap {
                let scale = opts.abs_tol + opts.rel_tol * full[i].abs().max(fine[i].abs());
                err = err.max((full[i] - fine[i]).abs() / (3.0 * scale));
            }
            steps += 1;
            if err <= 1.0 {
                t += h_eff;
                std::mem::swap(state, &mut fine);
                let factor = if err == 0.0 { 4.0 } else { (0.9 / err.cbrt()).clamp(0.25, 4.0) };
                h = h_eff * factor;
            } else {
                h = h_eff * (0.9 / err.cbrt()).clamp(0.1, 0.9);
                if h < 1e-14 * t.max(1.0) {
                    return Err(Error::Stiffness(format!("implicit step underflow at t = {t}")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact;
    use crate::process::ProcessSpec;

    #[test]
    fn critical_matches_closed_form_at_t1() {
        let snaps = integrate(
            &ProcessSpec::critical(),
            &[1.0],
            &TruncationPolicy::fixed(500),
            &IntegrateOptions::default(),
        )
        .unwrap();
        assert!((snaps[0].prob(1) - 0.25).abs() < 1e-9);
        assert!((snaps[0].prob(3) - exact::critical_pm(3, 1.0).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn critical_mass_splits_into_survival_and_extinction() {
        let snaps = integrate(
            &ProcessSpec::critical(),
            &[2.0, 5.0],
            &TruncationPolicy::fixed(600),
            &IntegrateOptions::default(),
        )
        .unwrap();
        for snap in &snaps {
            let survival = exact::critical_survival(snap.time);
            assert!(
                (snap.total_mass() - survival).abs() < 1e-8,
                "t={}: {} vs {}",
                snap.time,
                snap.total_mass(),
                survival
            );
        }
    }

    #[test]
    fn noext_conserves_probability() {
        let snaps = integrate(
            &ProcessSpec::no_extinction(),
            &[0.5, 2.0, 8.0],
            &TruncationPolicy::fixed(400),
            &IntegrateOptions::default(),
        )
        .unwrap();
        for snap in &snaps {
            let total = snap.total_mass() + snap.tail_mass;
            assert!((total - 1.0).abs() < 1e-9 + snap.tail_mass, "t={}", snap.time);
        }
    }

    #[test]
    fn immigration_matches_closed_form() {
        let snaps = integrate(
            &ProcessSpec::immigration(1.0),
            &[1.0],
            &TruncationPolicy::fixed(400),
            &IntegrateOptions::default(),
        )
        .unwrap();
        assert!((snaps[0].prob(1) - 0.5).abs() < 1e-9);
        for m in 1..=30 {
            let expect = exact::immigration_pm(m, 1.0, 1.0).unwrap();
            assert!((snaps[0].prob(m) - expect).abs() < 1e-9, "m={m}");
        }
    }

    #[test]
    fn critical_moments_from_ode() {
        let snaps = integrate(
            &ProcessSpec::critical(),
            &[5.0],
            &TruncationPolicy::fixed(700),
            &IntegrateOptions::default(),
        )
        .unwrap();
        let ms = moments_from_snapshot(&snaps[0], 2, 1e-6).unwrap();
        assert!((ms.value(1) - 1.0).abs() < 1e-8);
        // 1e-7 relative: deep-tail noise carries m^2 weight.
        assert!((ms.value(2) - 11.0).abs() < 11.0 * 1e-7);
    }

    #[test]
    fn moment_bound_triggers_precision_error() {
        let snap = DistributionSnapshot::one_type(
            1.0,
            Engine::MasterEq,
            1,
            vec![0.5, 0.25],
            1e-3,
        );
        assert!(matches!(
            moments_from_snapshot(&snap, 4, 1e-6),
            Err(Error::Precision(_))
        ));
    }

    #[test]
    fn adaptive_regrowth_controls_tail() {
        // Start with an absurdly small cap; growth must rescue the run.
        let snaps = integrate(
            &ProcessSpec::critical(),
            &[1.0, 4.0],
            &TruncationPolicy::adaptive(8, 1e-9),
            &IntegrateOptions::default(),
        )
        .unwrap();
        let last = snaps.last().unwrap();
        assert!(last.tail_mass < 1e-9);
        assert!((last.prob(1) - exact::critical_pm(1, 4.0).unwrap()).abs() < 1e-8);
        assert!(last.probs().len() > 8);
    }

    #[test]
    fn truncation_error_when_budget_too_small() {
        let r = integrate(
            &ProcessSpec::critical(),
            &[2.0],
            &TruncationPolicy::adaptive(8, 1e-12),
            &IntegrateOptions { max_states: 64, ..IntegrateOptions::default() },
        );
        assert!(matches!(r, Err(Error::Truncation(_))));
    }

    #[test]
    fn implicit_matches_explicit_for_noext() {
        let policy = TruncationPolicy::fixed(300);
        let explicit = integrate(
            &ProcessSpec::no_extinction(),
            &[3.0],
            &policy,
            &IntegrateOptions::default(),
        )
        .unwrap();
        let implicit = integrate(
            &ProcessSpec::no_extinction(),
            &[3.0],
            &policy,
            &IntegrateOptions {
                method: OdeMethod::ImplicitTrapezoid,
                abs_tol: 1e-13,
                rel_tol: 1e-10,
                ..IntegrateOptions::default()
            },
        )
        .unwrap();
        for m in 1..=50 {
            let d = (explicit[0].prob(m) - implicit[0].prob(m)).abs();
            assert!(d < 1e-8, "m={m}: {d}");
        }
    }

    #[test]
    fn implicit_rejects_two_type() {
        let r = integrate(
            &ProcessSpec::two_type(0.5, 0.25, 1.0),
            &[1.0],
            &TruncationPolicy::fixed(16),
            &IntegrateOptions { method: OdeMethod::ImplicitTrapezoid, ..Default::default() },
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn two_type_conserves_mass_and_matches_empty_probability() {
        let spec = ProcessSpec::two_type(0.25, 0.25, 1.0);
        let snaps = integrate(
            &spec,
            &[2.0],
            &TruncationPolicy::fixed(40),
            &IntegrateOptions::default(),
        )
        .unwrap();
        let snap = &snaps[0];
        assert!((snap.total_mass() + snap.tail_mass - 1.0).abs() < 1e-9 + snap.tail_mass);
        let expect = exact::twotype_special_p00(2.0, 0.25).unwrap();
        assert!((snap.prob_mn(0, 0) - expect).abs() < 1e-9);
    }

    #[test]
    fn two_type_progenitor_mean_grows_linearly() {
        // Progenitor cells branch critically (birth and loss both at rate r),
        // so only the source moves the mean: <m> = beta * t for every r.
        let spec = ProcessSpec::two_type(0.8, 0.3, 2.0);
        let snaps = integrate(
            &spec,
            &[1.5],
            &TruncationPolicy::fixed(48),
            &IntegrateOptions::default(),
        )
        .unwrap();
        let mean_m: f64 = snaps[0]
            .marginal_m()
            .iter()
            .enumerate()
            .map(|(m, p)| m as f64 * p)
            .sum();
        assert!((mean_m - 0.8 * 1.5).abs() < 1e-6, "mean {mean_m}");
    }

    #[test]
    fn grid_validation() {
        let p = TruncationPolicy::fixed(16);
        let o = IntegrateOptions::default();
        assert!(integrate(&ProcessSpec::critical(), &[], &p, &o).is_err());
        assert!(integrate(&ProcessSpec::critical(), &[1.0, 1.0], &p, &o).is_err());
        assert!(integrate(&ProcessSpec::critical(), &[-1.0], &p, &o).is_err());
    }
}
