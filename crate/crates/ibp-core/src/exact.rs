//! Closed-form distributions, moments, scaling functions, and asymptotic
//! laws for the four processes.
//!
//! Everything is evaluated in log space and exponentiated once, so the
//! formulas stay usable for population indices up to ~1e6. Asymptotic laws
//! are separate functions from exact ones and are never silently substituted
//! for them.

use crate::error::{Error, Result};
use crate::moments::MomentSet;
use crate::specfun::{ln_gamma, log_gamma_ratio};

/// A point (μ, value) of a scaling function, μ = m/t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub mu: f64,
    pub value: f64,
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Critical branching: P_m(t) = t^{m-1}/(1+t)^{m+1} for m >= 1, started
/// from a single cell (so P_m(0) = δ_{m,1}).
pub fn critical_pm(m: u64, t: f64) -> Result<f64> {
    check_time(t)?;
    if m < 1 {
        return Err(Error::Domain(format!("critical process supports m >= 1, got {m}")));
    }
    if t == 0.0 {
        return Ok(if m == 1 { 1.0 } else { 0.0 });
    }
    let mf = m as f64;
    Ok(((mf - 1.0) * t.ln() - (mf + 1.0) * t.ln_1p()).exp())
}

/// Survival probability of the critical process, 1/(1+t).
pub fn critical_survival(t: f64) -> f64 {
    1.0 / (1.0 + t)
}

/// Critical moments: ⟨m⁰⟩ = 1/(1+t), ⟨m⟩ = 1, ⟨m²⟩ = 1+2t in closed form;
/// higher orders by direct summation of the distribution with a tail bound
/// below 1e-12.
pub fn critical_moments(t: f64, k_max: usize) -> Result<MomentSet> {
    check_time(t)?;
    let mut values = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let v = match k {
            0 => 1.0 / (1.0 + t),
            1 => 1.0,
            2 => 1.0 + 2.0 * t,
            _ => critical_moment_by_summation(t, k as u32)?,
        };
        values.push(v);
    }
    Ok(MomentSet { time: t, values, stderrs: None })
}

fn critical_moment_by_summation(t: f64, k: u32) -> Result<f64> {
    if t == 0.0 {
        return Ok(1.0);
    }
    // Terms m^k a^{m-1}/(1+t)^2 with a = t/(1+t); past the mode they decay
    // geometrically, so the bound term/(1-a) controls the tail.
    let a = t / (1.0 + t);
    let pref = 1.0 / ((1.0 + t) * (1.0 + t));
    let mut sum = 0.0;
    let mut m = 1u64;
    loop {
        let term = (m as f64).powi(k as i32) * a.powi((m - 1) as i32) * pref;
        sum += term;
        let past_mode = m as f64 > (k as f64) * (1.0 + t);
        if past_mode && term / (1.0 - a) < 1e-13 * sum.max(1e-300) {
            return Ok(sum);
        }
        if m > 500_000_000 {
            return Err(Error::Precision(format!(
                "critical moment k={k} summation did not reach its tail bound at t={t}"
            )));
        }
        m += 1;
    }
}

/// Stem-cell input at rate β: P_m(t) = Γ(m-1+β)/(Γ(m)Γ(β)) ·
/// t^{m-1}/(1+t)^{m-1+β}, where m counts the stem cell plus m-1 ordinary
/// cells (m >= 1).
pub fn immigration_pm(m: u64, t: f64, beta: f64) -> Result<f64> {
    check_time(t)?;
    if m < 1 {
        return Err(Error::Domain(format!("immigration process supports m >= 1, got {m}")));
    }
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("immigration requires beta > 0, got {beta}")));
    }
    if t == 0.0 {
        return Ok(if m == 1 { 1.0 } else { 0.0 });
    }
    let mf = m as f64;
    let lg = ln_gamma(mf - 1.0 + beta)? - ln_gamma(mf)? - ln_gamma(beta)?;
    Ok((lg + (mf - 1.0) * t.ln() - (mf - 1.0 + beta) * t.ln_1p()).exp())
}

/// Scaling function of the input process: Φ(μ) = μ^{β-1} e^{-μ}/Γ(β),
/// normalized to ∫Φ dμ = 1.
pub fn immigration_scaling(mu: f64, beta: f64) -> Result<ScalingPoint> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("scaling variable must be > 0, got {mu}")));
    }
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta must be > 0, got {beta}")));
    }
    let value = ((beta - 1.0) * mu.ln() - mu - ln_gamma(beta)?).exp();
    Ok(ScalingPoint { mu, value })
}

/// Leading-order moments of the input process, ⟨m^k⟩ ≃ t^k Γ(β+k)/Γ(β).
pub fn immigration_moments(t: f64, k: u32, beta: f64) -> Result<f64> {
    check_time(t)?;
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta must be > 0, got {beta}")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    Ok((log_gamma_ratio(beta + k as f64, beta)? + (k as f64) * t.ln()).exp())
}

/// Small-m law of the no-extinction process, P_m ≃ 1/(m ln t).
/// Valid for t >> 1 and m << t.
pub fn noext_small_m_asymptote(m: f64, t: f64) -> Result<f64> {
    if !(t > 1.0) {
        return Err(Error::Domain(format!("asymptote requires t > 1, got {t}")));
    }
    if !(m >= 1.0) {
        return Err(Error::Domain(format!("requires m >= 1, got {m}")));
    }
    Ok(1.0 / (m * t.ln()))
}

/// Scaling form of the no-extinction process,
/// P_m(t) ≃ (1/m)(1/ln t) e^{-m/t}.
pub fn noext_scaling_pm(m: f64, t: f64) -> Result<f64> {
    if !(t > 1.0) {
        return Err(Error::Domain(format!("scaling form requires t > 1, got {t}")));
    }
    if !(m >= 1.0) {
        return Err(Error::Domain(format!("requires m >= 1, got {m}")));
    }
    Ok((-m / t).exp() / (m * t.ln()))
}

/// Asymptotic moments of the no-extinction process,
/// ⟨m^k⟩ ≃ (k-1)! t^k / ln t.
pub fn noext_moment_asymptote(t: f64, k: u32) -> Result<f64> {
    if !(t > 1.0) {
        return Err(Error::Domain(format!("asymptote requires t > 1, got {t}")));
    }
    if k < 1 {
        return Err(Error::Domain("moment order must be >= 1".into()));
    }
    let mut fact = 1.0;
    for j in 2..k {
        fact *= j as f64;
    }
    Ok(fact * (k as f64 * t.ln()).exp() / t.ln())
}

// Two-type closed forms at r = 1/4, γ = 1. The natural parameter is 4β.

fn check_twotype(t: f64, beta: f64) -> Result<()> {
    check_time(t)?;
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("requires beta > 0, got {beta}")));
    }
    Ok(())
}

/// Probability of m progenitor cells regardless of post-mitotic count, for
/// the two-type process at r = 1/4, γ = 1:
/// P_m(t) = Γ(m+4β)/(Γ(4β)Γ(m+1)) (1+t/4)^{-4β} [(t/4)/(1+t/4)]^m.
pub fn twotype_special_pm(m: u64, t: f64, beta: f64) -> Result<f64> {
    check_twotype(t, beta)?;
    if t == 0.0 {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    let mf = m as f64;
    let b4 = 4.0 * beta;
    let lg = ln_gamma(mf + b4)? - ln_gamma(b4)? - ln_gamma(mf + 1.0)?;
    let q = (t / 4.0) / (1.0 + t / 4.0);
    Ok((lg - b4 * (t / 4.0).ln_1p() + mf * q.ln()).exp())
}

/// Probability of m progenitor cells and zero post-mitotic cells at
/// r = 1/4, γ = 1:
/// P_{m,0}(t) = Γ(m+4β)/(Γ(4β)Γ(m+1)) e^{β(1-e^{-t})} (1+t/2)^{-4β}
///              [(t/4)/(1+t/2)]^m.
///
/// The growing exponential prefactor e^{+β(1-e^{-t})} is correct; it is
/// compensated by the faster-growing (1+t/2)^{4β} denominator. See
/// docs/validation-notes.md for the Monte Carlo evidence pinning the sign.
pub fn twotype_special_pm0(m: u64, t: f64, beta: f64) -> Result<f64> {
    check_twotype(t, beta)?;
    if t == 0.0 {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    let mf = m as f64;
    let b4 = 4.0 * beta;
    let lg = ln_gamma(mf + b4)? - ln_gamma(b4)? - ln_gamma(mf + 1.0)?;
    let c = beta * (-(-t).exp_m1()); // β(1 - e^{-t})
    let w = (t / 4.0) / (1.0 + t / 2.0);
    Ok((lg + c - b4 * (t / 2.0).ln_1p() + mf * w.ln()).exp())
}

/// Marginal distribution of the post-mitotic count at r = 1/4, γ = 1:
/// Π_n(t) = e^{β(1-e^{-t})} Σ_{k=0}^n [-β(1-e^{-t})]^k/k! · P_{n-k}(t).
pub fn twotype_special_pin(n: u64, t: f64, beta: f64) -> Result<f64> {
    check_twotype(t, beta)?;
    if t == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let c = beta * (-(-t).exp_m1());
    let mut coeff = 1.0; // (-c)^k / k!
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for k in 0..=n {
        if k > 0 {
            coeff *= -c / k as f64;
        }
        let term = coeff * twotype_special_pm(n - k, t, beta)?;
        // Kahan update: the sum alternates in sign.
        let y = term - compensation;
        let s = sum + y;
        compensation = (s - sum) - y;
        sum = s;
    }
    Ok(c.exp() * sum)
}

/// Probability of an entirely empty system at r = 1/4, γ = 1:
/// P_{0,0}(t) = e^{β(1-e^{-t})}/(1+t/2)^{4β}.
pub fn twotype_special_p00(t: f64, beta: f64) -> Result<f64> {
    check_twotype(t, beta)?;
    let c = beta * (-(-t).exp_m1());
    Ok((c - 4.0 * beta * (t / 2.0).ln_1p()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_real;

    #[test]
    fn critical_pm_examples() {
        assert_eq!(critical_pm(1, 1.0).unwrap(), 0.25);
        assert_eq!(critical_pm(1, 0.0).unwrap(), 1.0);
        assert_eq!(critical_pm(7, 0.0).unwrap(), 0.0);
        // P_3(2) = 2^2/3^4 = 4/81
        assert!((critical_pm(3, 2.0).unwrap() - 4.0 / 81.0).abs() < 1e-15);
        assert!(critical_pm(0, 1.0).is_err());
        assert!(critical_pm(1, -1.0).is_err());
    }

    #[test]
    fn critical_pm_large_m_stays_finite() {
        let p = critical_pm(1_000_000, 1e6).unwrap();
        assert!(p > 0.0 && p.is_finite());
        // Scaling form ~ e^{-1}/t^2 at mu = 1.
        assert!((p * 1e12 * (1.0_f64).exp() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn critical_moment_closed_forms() {
        let ms = critical_moments(3.0, 2).unwrap();
        assert_eq!(ms.value(0), 0.25);
        assert_eq!(ms.value(1), 1.0);
        let ms = critical_moments(5.0, 2).unwrap();
        assert_eq!(ms.value(2), 11.0);
    }

    #[test]
    fn critical_higher_moment_matches_summation_of_closed_form() {
        // k=2 via summation must reproduce the closed form 1+2t.
        let direct = critical_moment_by_summation(5.0, 2).unwrap();
        assert!((direct - 11.0).abs() < 1e-10);
        let m3 = critical_moments(2.0, 3).unwrap().value(3);
        // Oracle: brute-force sum of m^3 t^{m-1}/(1+t)^{m+1} to machine tail.
        let t: f64 = 2.0;
        let mut oracle = 0.0;
        for m in 1..4000u64 {
            oracle += (m as f64).powi(3) * critical_pm(m, t).unwrap();
        }
        assert!((m3 - oracle).abs() < 1e-9 * oracle);
    }

    #[test]
    fn immigration_pm_examples() {
        assert!((immigration_pm(1, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((immigration_pm(2, 1.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(immigration_pm(1, 0.0, 0.7).unwrap(), 1.0);
        assert!(immigration_pm(0, 1.0, 1.0).is_err());
        assert!(immigration_pm(1, 1.0, 0.0).is_err());
    }

    #[test]
    fn immigration_pm_normalizes() {
        let total: f64 =
            (1..=2000).map(|m| immigration_pm(m, 3.0, 0.7).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-10, "total {total}");
    }

    #[test]
    fn immigration_reduces_to_weighted_critical_at_beta_two() {
        // Γ(m+1)/(Γ(m)Γ(2)) = m, so P_m = m t^{m-1}/(1+t)^{m+1}.
        for m in 1..=50u64 {
            let lhs = immigration_pm(m, 1.7, 2.0).unwrap();
            let rhs = m as f64 * critical_pm(m, 1.7).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * rhs.max(1e-30), "m={m}");
        }
    }

    #[test]
    fn immigration_scaling_examples() {
        let p = immigration_scaling(1.0, 1.0).unwrap();
        assert!((p.value - (-1.0_f64).exp()).abs() < 1e-15);
        // Frozen oracle value for μ=2, β=1/2: 2^{-1/2} e^{-2}/Γ(1/2).
        let p = immigration_scaling(2.0, 0.5).unwrap();
        assert!((p.value - 0.05399096651318805).abs() < 1e-15, "got {}", p.value);
        assert!(immigration_scaling(0.0, 0.5).is_err());
    }

    #[test]
    fn immigration_scaling_moment_integrals() {
        // ∫ μ^k Φ(μ) dμ = Γ(β+k)/Γ(β) for k = 1..3 (quadrature, tol 1e-8).
        for &beta in &[0.5, 1.0, 2.0] {
            for k in 1..=3u32 {
                let (integral, _) = integrate_real(
                    &|mu| {
                        if mu <= 0.0 {
                            0.0
                        } else {
                            mu.powi(k as i32) * immigration_scaling(mu, beta).unwrap().value
                        }
                    },
                    0.0,
                    60.0,
                    1e-10,
                    1e-10,
                )
                .unwrap();
                let expect = (log_gamma_ratio(beta + k as f64, beta).unwrap()).exp();
                assert!(
                    (integral / expect - 1.0).abs() < 1e-8,
                    "beta={beta} k={k}: {integral} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn immigration_moment_examples() {
        assert!((immigration_moments(10.0, 1, 2.0).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(immigration_moments(1.0, 0, 0.3).unwrap(), 1.0);
        assert!((immigration_moments(10.0, 2, 1.0).unwrap() - 200.0).abs() < 1e-11);
    }

    #[test]
    fn noext_asymptote_examples() {
        let e = std::f64::consts::E;
        assert!((noext_small_m_asymptote(1.0, e).unwrap() - 1.0).abs() < 1e-15);
        assert!((noext_small_m_asymptote(2.0, e * e).unwrap() - 0.25).abs() < 1e-15);
        assert!((noext_small_m_asymptote(1.0, 1e6).unwrap() - 0.07238241365).abs() < 1e-10);
        assert!(noext_small_m_asymptote(1.0, 1.0).is_err());
    }

    #[test]
    fn noext_scaling_examples() {
        let e = std::f64::consts::E;
        let m = e * e;
        let v = noext_scaling_pm(m, e * e).unwrap();
        assert!((v - 0.024893534183931971).abs() < 1e-15, "got {v}");
        // Ratio to the small-m law is exactly e^{-m/t}.
        for &(m, t) in &[(3.0, 9.0), (10.0, 12.5), (100.0, 50.0)] {
            let ratio =
                noext_scaling_pm(m, t).unwrap() / noext_small_m_asymptote(m, t).unwrap();
            assert!((ratio - (-m / t).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn noext_scaling_moment_integrals() {
        // ∫ μ^{k-1} e^{-μ} dμ = (k-1)! for k = 1..5.
        let mut fact = 1.0;
        for k in 1..=5u32 {
            if k > 1 {
                fact *= (k - 1) as f64;
            }
            let (v, _) = integrate_real(
                &|mu: f64| mu.powi(k as i32 - 1) * (-mu).exp(),
                0.0,
                80.0,
                1e-11,
                1e-11,
            )
            .unwrap();
            assert!((v / fact - 1.0).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn noext_moment_asymptote_examples() {
        let e = std::f64::consts::E;
        assert!((noext_moment_asymptote(e, 1).unwrap() - e).abs() < 1e-13);
        assert!((noext_moment_asymptote(e, 2).unwrap() - e * e).abs() < 1e-12);
        assert!((noext_moment_asymptote(e, 4).unwrap() - 6.0 * e.powi(4)).abs() < 1e-10);
    }

    #[test]
    fn twotype_pm_examples() {
        // 4β = 1 at t = 4: P_0 = 1/2, P_1 = 1/4.
        assert!((twotype_special_pm(0, 4.0, 0.25).unwrap() - 0.5).abs() < 1e-14);
        assert!((twotype_special_pm(1, 4.0, 0.25).unwrap() - 0.25).abs() < 1e-14);
        assert_eq!(twotype_special_pm(0, 0.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn twotype_pm_normalizes() {
        let total: f64 = (0..400).map(|m| twotype_special_pm(m, 5.0, 0.5).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn twotype_pm0_examples() {
        assert_eq!(twotype_special_pm0(0, 0.0, 1.0).unwrap(), 1.0);
        // Frozen oracle: P_{0,0}(2) at β = 1/4 equals e^{(1-e^{-2})/4}/2.
        let v = twotype_special_pm0(0, 2.0, 0.25).unwrap();
        assert!((v - 0.6206543207637837).abs() < 2e-15, "got {v}");
        // Same quantity through two code paths; only rounding may differ.
        assert!((v - twotype_special_p00(2.0, 0.25).unwrap()).abs() < 2e-15);
    }

    #[test]
    fn twotype_pm0_sums_to_no_postmitotic_probability() {
        // Σ_m P_{m,0}(t) = e^{β(1-e^{-t})}/(1+t/4)^{4β}.
        let (t, beta) = (2.0, 0.5);
        let total: f64 = (0..400).map(|m| twotype_special_pm0(m, t, beta).unwrap()).sum();
        let c = beta * (1.0 - (-t as f64).exp());
        let expect = (c - 4.0 * beta * (t / 4.0_f64).ln_1p()).exp();
        assert!((total - expect).abs() < 1e-12, "{total} vs {expect}");
    }

    #[test]
    fn twotype_pin_examples() {
        assert_eq!(twotype_special_pin(0, 0.0, 1.0).unwrap(), 1.0);
        // Frozen oracle values at t = 1, β = 1/2.
        let v = twotype_special_pin(0, 1.0, 0.5).unwrap();
        assert!((v - 0.8778962810793551).abs() < 1e-14, "got {v}");
        let v = twotype_special_pin(1, 1.0, 0.5).unwrap();
        assert!((v - 0.07369036853704481).abs() < 1e-14, "got {v}");
    }

    #[test]
    fn twotype_pin_normalizes() {
        let total: f64 = (0..500).map(|n| twotype_special_pin(n, 2.0, 0.5).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-10, "total {total}");
    }

    #[test]
    fn twotype_empty_is_rarer_than_no_progenitors() {
        // P_0(t) > P_{0,0}(t) for t > 0: an empty system is a stricter event.
        for &t in &[0.5, 1.0, 2.0, 10.0] {
            let p0 = twotype_special_pm(0, t, 0.5).unwrap();
            let p00 = twotype_special_p00(t, 0.5).unwrap();
            assert!(p0 > p00, "t={t}: {p0} vs {p00}");
        }
    }

    #[test]
    fn critical_scaling_convergence_is_monotone() {
        // t^2 P_m e^{m/t} -> 1 at fixed mu = 1; deviation shrinks with t.
        let mut last = f64::INFINITY;
        for &t in &[10.0, 100.0, 1000.0] {
            let m = t as u64;
            let dev = (t * t * critical_pm(m, t).unwrap() * (m as f64 / t).exp() - 1.0).abs();
            assert!(dev < last, "t={t}: {dev} !< {last}");
            last = dev;
        }
    }
}
