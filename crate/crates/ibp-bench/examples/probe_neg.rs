use ibp_core::rk::{dopri5_to, OdeOptions};

fn main() {
    // Raw critical master equation, cap 500, watch the most negative entry.
    for &(atol, rtol) in &[(1e-11, 1e-9), (1e-12, 1e-9), (1e-13, 1e-10), (1e-14, 1e-11)] {
        let cap = 500usize;
        let mut y = vec![0.0f64; cap + 2];
        y[0] = 1.0;
        let rates: Vec<(f64, f64)> = (1..=cap).map(|m| (m as f64, m as f64)).collect();
        let mut rhs = |_t: f64, p: &[f64], dp: &mut [f64]| {
            for i in 0..cap {
                let (b, d) = rates[i];
                let mut acc = -(b + d) * p[i];
                if i > 0 { acc += rates[i-1].0 * p[i-1]; }
                if i + 1 < cap { acc += rates[i+1].1 * p[i+1]; }
                dp[i] = acc;
            }
            dp[cap] = rates[cap-1].0 * p[cap-1];
            dp[cap+1] = p[0];
        };
        let stats = dopri5_to(&mut rhs, 0.0, 1.0, &mut y,
            &OdeOptions { abs_tol: atol, rel_tol: rtol, ..Default::default() }, &mut |_,_| Ok(())).unwrap();
        let min = y[..cap].iter().cloned().fold(f64::INFINITY, f64::min);
        let which = y[..cap].iter().position(|&v| v == min).unwrap();
        println!("atol={atol:.0e} rtol={rtol:.0e}: min = {min:.3e} at m={} (steps {} rej {})",
            which+1, stats.accepted, stats.rejected);
    }
}
