use ibp_core::mastereq::{self, IntegrateOptions, OdeMethod, TruncationPolicy};
use ibp_core::{exact, ProcessSpec};

fn main() {
    // mastereq critical t=1
    let snaps = mastereq::integrate(&ProcessSpec::critical(), &[1.0],
        &TruncationPolicy::fixed(500), &IntegrateOptions::default()).unwrap();
    println!("P1(1) ode = {:.15e} dev {:.3e}", snaps[0].prob(1), (snaps[0].prob(1)-0.25).abs());
    let mut worst = 0.0f64;
    for m in 1..=400 { worst = worst.max((snaps[0].prob(m)-exact::critical_pm(m,1.0).unwrap()).abs()); }
    println!("critical t=1 max dev over m<=400: {:.3e}", worst);

    // mass split
    let snaps = mastereq::integrate(&ProcessSpec::critical(), &[2.0, 5.0],
        &TruncationPolicy::fixed(600), &IntegrateOptions::default()).unwrap();
    for s in &snaps {
        println!("t={}: total {:.15e} survival {:.15e} dev {:.3e}", s.time, s.total_mass(),
            exact::critical_survival(s.time), (s.total_mass()-exact::critical_survival(s.time)).abs());
    }

    // noext conservation
    let snaps = mastereq::integrate(&ProcessSpec::no_extinction(), &[0.5, 2.0, 8.0],
        &TruncationPolicy::fixed(400), &IntegrateOptions::default()).unwrap();
    for s in &snaps {
        println!("noext t={}: total+tail-1 = {:.3e} (tail {:.3e})", s.time,
            (s.total_mass()+s.tail_mass-1.0).abs(), s.tail_mass);
    }

    // immigration
    let snaps = mastereq::integrate(&ProcessSpec::immigration(1.0), &[1.0],
        &TruncationPolicy::fixed(400), &IntegrateOptions::default()).unwrap();
    let mut worst = 0.0f64;
    for m in 1..=30 { worst = worst.max((snaps[0].prob(m)-exact::immigration_pm(m,1.0,1.0).unwrap()).abs()); }
    println!("immigration max dev: {:.3e}", worst);

    // moments
    let snaps = mastereq::integrate(&ProcessSpec::critical(), &[5.0],
        &TruncationPolicy::fixed(700), &IntegrateOptions::default()).unwrap();
    let ms = mastereq::moments_from_snapshot(&snaps[0], 2, 1e-6).unwrap();
    println!("<m> dev {:.3e}, <m^2> dev {:.3e}", (ms.value(1)-1.0).abs(), (ms.value(2)-11.0).abs());

    // adaptive regrowth
    let snaps = mastereq::integrate(&ProcessSpec::critical(), &[1.0, 4.0],
        &TruncationPolicy::adaptive(8, 1e-9), &IntegrateOptions::default()).unwrap();
    let last = snaps.last().unwrap();
    println!("adaptive: tail {:.3e}, P1 dev {:.3e}, len {}",
        last.tail_mass, (last.prob(1)-exact::critical_pm(1,4.0).unwrap()).abs(), last.probs().len());

    // implicit vs explicit
    let p = TruncationPolicy::fixed(300);
    let e = mastereq::integrate(&ProcessSpec::no_extinction(), &[3.0], &p, &IntegrateOptions::default()).unwrap();
    let i = mastereq::integrate(&ProcessSpec::no_extinction(), &[3.0], &p,
        &IntegrateOptions { method: OdeMethod::ImplicitTrapezoid, abs_tol: 1e-13, rel_tol: 1e-10, ..Default::default() }).unwrap();
    let mut worst = 0.0f64;
    for m in 1..=50 { worst = worst.max((e[0].prob(m)-i[0].prob(m)).abs()); }
    println!("implicit vs explicit: {:.3e}", worst);

    // two-type
    let spec = ProcessSpec::two_type(0.25, 0.25, 1.0);
    let snaps = mastereq::integrate(&spec, &[2.0], &TruncationPolicy::fixed(40), &IntegrateOptions::default()).unwrap();
    let s = &snaps[0];
    println!("twotype: mass dev {:.3e}, p00 dev {:.3e}",
        (s.total_mass()+s.tail_mass-1.0).abs(),
        (s.prob_mn(0,0)-exact::twotype_special_p00(2.0,0.25).unwrap()).abs());
    let spec = ProcessSpec::two_type(0.8, 0.3, 2.0);
    let snaps = mastereq::integrate(&spec, &[1.5], &TruncationPolicy::fixed(48), &IntegrateOptions::default()).unwrap();
    let mean: f64 = snaps[0].marginal_m().iter().enumerate().map(|(m,p)| m as f64 * p).sum();
    println!("twotype mean dev {:.3e}", (mean-1.2).abs());

    // exact closed forms
    let mut worst = 0.0f64;
    for m in 1..=50u64 {
        let lhs = exact::immigration_pm(m, 1.7, 2.0).unwrap();
        let rhs = m as f64 * exact::critical_pm(m, 1.7).unwrap();
        worst = worst.max((lhs-rhs).abs()/rhs.max(1e-300));
    }
    println!("beta2 reduction rel dev: {:.3e}", worst);
    let v = exact::twotype_special_pm0(0, 2.0, 0.25).unwrap();
    println!("pm0 frozen dev {:.3e}; p00 diff {:.3e}", (v-0.6206543207637837f64).abs(),
        (v-exact::twotype_special_p00(2.0,0.25).unwrap()).abs());

    // lapinv small time
    let v = ibp_core::lapinv::invert(1, 0.01, &ibp_core::lapinv::InvertOptions::default()).unwrap();
    let series = 1.0-0.01+1.5e-4;
    println!("invert(1,0.01) = {:.10e}, series {:.10e}, dev {:.3e}", v, series, (v-series).abs());
}
