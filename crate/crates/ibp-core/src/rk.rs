//! Embedded Dormand–Prince 5(4) integrator with adaptive step control.
//!
//! Shared by the master-equation engine and the characteristics engine. The
//! state is a flat `&mut [f64]`; callers encode complex components as real
//! pairs. Steps are clipped to land exactly on requested stop times, so no
//! dense-output interpolation is needed.

use crate::error::{Error, Result};

// Dormand-Prince coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order solution weights (same as the last A row; FSAL).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// Embedded fourth-order weights.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// First trial step; defaults to 1e-4 of the span.
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { abs_tol: 1e-11, rel_tol: 1e-9, initial_step: None, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Suggested step to resume with.
    pub next_step: f64,
}

/// Advances `y` from `t0` to `t1` in place.
///
/// `check` runs after every accepted step and may abort the integration
/// (used for blow-up guards); pass `|_, _| Ok(())` when not needed.
pub fn dopri5_to<F, G>(
    rhs: &mut F,
    t0: f64,
    t1: f64,
    y: &mut [f64],
    opts: &OdeOptions,
    check: &mut G,
) -> Result<StepStats>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: FnMut(f64, &[f64]) -> Result<()>,
{
    let n = y.len();
    let span = t1 - t0;
    if span <= 0.0 {
        return Err(Error::Domain(format!("integration span must be positive ({t0} -> {t1})")));
    }
    let mut stats = StepStats::default();
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    let mut t = t0;
    let mut h = opts.initial_step.unwrap_or(1e-4 * span).min(span);
    rhs(t, y, &mut k[0]);
    stats.rhs_evals += 1;

    while t < t1 {
        if stats.accepted + stats.rejected > opts.max_steps {
            return Err(Error::Stiffness(format!(
                "step budget exhausted at t = {t} (h = {h:.3e})"
            )));
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Stiffness(format!("step underflow at t = {t} (h = {h:.3e})")));
        }
        let clipped = h >= t1 - t;
        let h_eff = if clipped { t1 - t } else { h };

        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                y_stage[i] = y[i] + h_eff * acc;
            }
            rhs(t + C[s] * h_eff, &y_stage, &mut k[s]);
            stats.rhs_evals += 1;
        }

        let mut err_sq = 0.0;
        for i in 0..n {
            let mut y5 = 0.0;
            let mut y4 = 0.0;
            for (j, kj) in k.iter().enumerate() {
                y5 += B5[j] * kj[i];
                y4 += B4[j] * kj[i];
            }
            y_new[i] = y[i] + h_eff * y5;
            let e = h_eff * (y5 - y4);
            let scale = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / scale) * (e / scale);
        }
        let err = (err_sq / n as f64).sqrt();

        if err.is_finite() && err <= 1.0 {
            t = if clipped { t1 } else { t + h_eff };
            y.copy_from_slice(&y_new);
            // FSAL: stage 7 evaluated at (t + h, y_new) is the next k1.
            k.swap(0, 6);
            stats.accepted += 1;
            check(t, y)?;
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = h_eff * factor;
        } else {
            stats.rejected += 1;
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h = h_eff * factor;
            // The rejected stage-7 slot no longer matches y; recompute k1.
            rhs(t, y, &mut k[0]);
            stats.rhs_evals += 1;
        }
    }
    stats.next_step = h;
    Ok(stats)
}
