use std::time::Instant;
use ibp_core::mastereq::{self, IntegrateOptions, TruncationPolicy};
use ibp_core::ProcessSpec;

fn main() {
    for &(atol, rtol, cap) in &[(1e-13, 1e-10, 900), (1e-15, 1e-10, 900), (1e-16, 1e-11, 700)] {
        let t0 = Instant::now();
        let snaps = mastereq::integrate(
            &ProcessSpec::critical(),
            &[1.0, 5.0, 10.0],
            &TruncationPolicy::fixed(cap),
            &IntegrateOptions { abs_tol: atol, rel_tol: rtol, ..Default::default() },
        ).unwrap();
        print!("atol={atol:.0e} rtol={rtol:.0e} cap={cap}: ");
        for s in &snaps {
            let ms = mastereq::moments_from_snapshot(s, 2, 1e-8).unwrap();
            let expect = 1.0 + 2.0 * s.time;
            print!("t={} rel_dev2={:.2e}  ", s.time, (ms.value(2) - expect).abs() / expect);
        }
        println!("({:.2?})", t0.elapsed());
    }
}
