//! Cross-engine consistency checks that are not part of the acceptance
//! gate: residuals of closed forms inside the rate equations, moment flux
//! identities between the Laplace and master-equation engines, and
//! refinement stability of the integrator.

use ibp_core::lapinv::{self, InvertOptions};
use ibp_core::mastereq::{self, IntegrateOptions, TruncationPolicy};
use ibp_core::{exact, ProcessSpec};

/// The stem-cell closed form must satisfy its own rate equations:
/// dP_1/dt = -β P_1 + P_2 and, for m >= 2,
/// dP_m/dt = m P_{m+1} - [2(m-1)+β] P_m + (m-2+β) P_{m-1}.
#[test]
fn immigration_closed_form_satisfies_rate_equations() {
    let beta = 0.7;
    let h = 1e-5;
    for &t in &[0.5, 1.0, 5.0] {
        for m in 1..=20u64 {
            let p = |m: u64, t: f64| exact::immigration_pm(m, t, beta).unwrap();
            let dpdt = (p(m, t + h) - p(m, t - h)) / (2.0 * h);
            let rhs = if m == 1 {
                -beta * p(1, t) + p(2, t)
            } else {
                let mf = m as f64;
                mf * p(m + 1, t) - (2.0 * (mf - 1.0) + beta) * p(m, t)
                    + (mf - 2.0 + beta) * p(m - 1, t)
            };
            assert!(
                (dpdt - rhs).abs() < 1e-9,
                "m={m} t={t}: residual {:.3e}",
                (dpdt - rhs).abs()
            );
        }
    }
}

/// Mean flux identity for the no-extinction process: d<m>/dt = P_1(t),
/// with the mean from the master equation and P_1 from Laplace inversion.
#[test]
fn noext_mean_flux_matches_inverted_p1() {
    let h = 0.05;
    let opts = InvertOptions::default();
    for &t in &[1.0, 5.0, 20.0, 50.0] {
        let snaps = mastereq::integrate(
            &ProcessSpec::no_extinction(),
            &[t - h, t + h],
            &TruncationPolicy::fixed(1200),
            &IntegrateOptions::default(),
        )
        .unwrap();
        let m_lo = mastereq::moments_from_snapshot(&snaps[0], 1, 1e-5).unwrap().value(1);
        let m_hi = mastereq::moments_from_snapshot(&snaps[1], 1, 1e-5).unwrap().value(1);
        let flux = (m_hi - m_lo) / (2.0 * h);
        let p1 = lapinv::invert(1, t, &opts).unwrap();
        assert!((flux - p1).abs() < 1e-4, "t={t}: flux {flux} vs P1 {p1}");
    }
}

/// Second-moment flux identity: d<m^2>/dt = 2<m> + P_1 for the
/// no-extinction process, everything from one master-equation run.
#[test]
fn noext_second_moment_flux_identity() {
    let t = 20.0;
    let h = 5e-3;
    let snaps = mastereq::integrate(
        &ProcessSpec::no_extinction(),
        &[t - h, t, t + h],
        &TruncationPolicy::fixed(600),
        &IntegrateOptions { abs_tol: 1e-15, rel_tol: 1e-10, ..Default::default() },
    )
    .unwrap();
    let m2 = |i: usize| mastereq::moments_from_snapshot(&snaps[i], 2, 1e-6).unwrap().value(2);
    let flux = (m2(2) - m2(0)) / (2.0 * h);
    let mean = mastereq::moments_from_snapshot(&snaps[1], 1, 1e-6).unwrap().value(1);
    let p1 = snaps[1].prob(1);
    let residual = (flux - (2.0 * mean + p1)).abs();
    assert!(residual < 1e-6, "residual {residual:.3e}");
}

/// Tightening the integrator tolerance must move the result by less than the
/// coarse run's own error scale.
#[test]
fn master_equation_refinement_stability() {
    let policy = TruncationPolicy::fixed(400);
    let coarse = mastereq::integrate(
        &ProcessSpec::no_extinction(),
        &[3.0],
        &policy,
        &IntegrateOptions { abs_tol: 1e-10, rel_tol: 1e-7, ..Default::default() },
    )
    .unwrap();
    let fine = mastereq::integrate(
        &ProcessSpec::no_extinction(),
        &[3.0],
        &policy,
        &IntegrateOptions { abs_tol: 1e-13, rel_tol: 1e-10, ..Default::default() },
    )
    .unwrap();
    let mut worst = 0.0f64;
    for m in 1..=400u64 {
        worst = worst.max((coarse[0].prob(m) - fine[0].prob(m)).abs());
    }
    // The coarse run controls local error at ~1e-7 relative; the observed
    // drift must stay within that budget.
    assert!(worst < 1e-7, "refinement moved the solution by {worst:.3e}");
}

/// Two-type master equation at the elementary point reproduces both closed
/// marginals.
#[test]
fn two_type_master_equation_matches_special_marginals() {
    let spec = ProcessSpec::two_type(0.5, 0.25, 1.0);
    let snaps = mastereq::integrate(
        &spec,
        &[2.0],
        &TruncationPolicy { cap: 72, cap_n: Some(72), ..TruncationPolicy::fixed(72) },
        &IntegrateOptions::default(),
    )
    .unwrap();
    let marg_m = snaps[0].marginal_m();
    let marg_n = snaps[0].marginal_n();
    for k in 0..30u64 {
        let em = exact::twotype_special_pm(k, 2.0, 0.5).unwrap();
        let en = exact::twotype_special_pin(k, 2.0, 0.5).unwrap();
        assert!((marg_m[k as usize] - em).abs() < 1e-6, "m={k}");
        assert!((marg_n[k as usize] - en).abs() < 1e-6, "n={k}");
    }
}

/// Critical-process survival drains into the tracked extinction mass: the
/// snapshot total plus nothing else must equal 1/(1+t).
#[test]
fn critical_survival_accounting() {
    let snaps = mastereq::integrate(
        &ProcessSpec::critical(),
        &[0.5, 1.0, 4.0, 9.0],
        &TruncationPolicy::fixed(800),
        &IntegrateOptions::default(),
    )
    .unwrap();
    for snap in &snaps {
        let survival = exact::critical_survival(snap.time);
        assert!(
            (snap.total_mass() - survival).abs() < 1e-8,
            "t={}: {} vs {survival}",
            snap.time,
            snap.total_mass()
        );
    }
}

/// The inverted distribution is an honest probability vector at moderate
/// times: entries in [0, 1], partial sums below 1.
#[test]
fn inversion_yields_probabilities() {
    let opts = InvertOptions::default();
    for &t in &[0.5, 2.0, 10.0] {
        let mut total = 0.0;
        for m in 1..=30u64 {
            let p = lapinv::invert(m, t, &opts).unwrap();
            assert!(p > -1e-8 && p < 1.0 + 1e-8, "t={t} m={m}: {p}");
            total += p;
        }
        assert!(total < 1.0 + 1e-6, "t={t}: partial sum {total}");
    }
}
