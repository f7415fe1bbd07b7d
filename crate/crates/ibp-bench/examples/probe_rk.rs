fn main() {
    let mut y = vec![1.0f64];
    let stats = ibp_core::rk::dopri5_to(
        &mut |_, y: &[f64], dy: &mut [f64]| dy[0] = -y[0],
        0.0, 1.0, &mut y,
        &ibp_core::rk::OdeOptions::default(),
        &mut |_, _| Ok(()),
    ).unwrap();
    println!("y(1) = {:.17e}, exact {:.17e}, err {:.3e}, steps {} rej {}",
        y[0], (-1.0f64).exp(), (y[0]-(-1.0f64).exp()).abs(), stats.accepted, stats.rejected);

    // harmonic
    let mut y2 = vec![1.0, 0.0];
    let tau = 2.0*std::f64::consts::PI;
    ibp_core::rk::dopri5_to(
        &mut |_, y: &[f64], dy: &mut [f64]| { dy[0]=y[1]; dy[1]=-y[0]; },
        0.0, tau, &mut y2, &ibp_core::rk::OdeOptions::default(), &mut |_, _| Ok(())).unwrap();
    println!("harmonic: {:?} err {:.3e}", y2, (y2[0]-1.0).abs());
}
