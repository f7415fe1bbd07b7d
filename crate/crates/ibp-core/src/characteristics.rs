//! Two-type generating function along characteristics, and grid coefficient
//! extraction.
//!
//! The generating function P(X, Y, T) = Σ x^m y^n P_{m,n} satisfies a
//! first-order hyperbolic PDE whose characteristics obey
//!
//! ```text
//! dx/dt = x(1-y) - r(x-y)²,   dy/dt = γ(y-1)
//! ```
//!
//! and along them dP/dt = β(x-1) P. Parameterizing by the final values
//! X = x(T), Y = y(T), the y-characteristic is explicit,
//! y(t) - 1 = (Y-1) e^{γ(t-T)}, and the x-characteristic is integrated
//! backward from t = T (terminal value X) jointly with the accumulator
//! ∫(x-1) dt, so no boundary-value problem arises. Then
//! P = exp(β ∫_0^T (x(t)-1) dt).
//!
//! The substituted Riccati form in the variable u = γ(1-Y)e^{γ(t-T)} is not
//! used numerically: it degenerates at Y = 1, which is exactly the slice
//! needed for progenitor marginals. The raw (x, t) system is regular there.
//!
//! Probabilities are recovered by sampling the generating function on a
//! scaled root-of-unity grid and applying a two-dimensional inverse DFT;
//! with unit radii the aliasing error equals the probability mass outside
//! the grid, which is reported as `tail_mass`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::process::{ProcessKind, ProcessSpec};
use crate::rk::{dopri5_to, OdeOptions};
use crate::snapshot::{DistributionSnapshot, Engine};

/// Evaluation point of the two-type generating function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfQuery {
    pub x: Complex64,
    pub y: Complex64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GfOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Abort threshold on |x(t)| during backward integration; the quadratic
    /// term can blow up outside the validated |X|, |Y| <= 1 domain.
    pub guard: f64,
}

impl Default for GfOptions {
    fn default() -> Self {
        GfOptions { abs_tol: 1e-11, rel_tol: 1e-10, guard: 10.0 }
    }
}

fn check_query(spec: &ProcessSpec, q: &GfQuery) -> Result<()> {
    spec.validate()?;
    if spec.kind != ProcessKind::TwoTypeSource {
        return Err(Error::Domain(format!(
            "generating-function engine handles the two-type process, got {}",
            spec.kind
        )));
    }
    if q.x.norm() > 1.0 + 1e-9 || q.y.norm() > 1.0 + 1e-9 {
        return Err(Error::Domain(format!(
            "query outside the convergence domain |x|, |y| <= 1: x={}, y={}",
            q.x, q.y
        )));
    }
    if !(q.t >= 0.0) || !q.t.is_finite() {
        return Err(Error::Domain(format!("time must be finite and >= 0, got {}", q.t)));
    }
    Ok(())
}

/// Evaluates P(X, Y, T) by backward integration of the x-characteristic.
pub fn eval_gf(spec: &ProcessSpec, q: &GfQuery, opts: &GfOptions) -> Result<Complex64> {
    check_query(spec, q)?;
    if q.t == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let (r, gamma, beta) = (spec.r_value(), spec.gamma_value(), spec.beta_value());
    let y_minus_1 = q.y - 1.0;

    // State over sigma = T - t in [0, T]: [Re x, Im x, Re A, Im A] with
    // A = ∫ (x - 1) dsigma.
    let mut state = vec![q.x.re, q.x.im, 0.0, 0.0];
    let mut rhs = |sigma: f64, z: &[f64], dz: &mut [f64]| {
        let x = Complex64::new(z[0], z[1]);
        let y = 1.0 + y_minus_1 * (-gamma * sigma).exp();
        let diff = x - y;
        let u = x * (1.0 - y) - r * diff * diff;
        // dx/dsigma = -U, dA/dsigma = x - 1.
        dz[0] = -u.re;
        dz[1] = -u.im;
        dz[2] = x.re - 1.0;
        dz[3] = x.im;
    };
    let guard = opts.guard;
    dopri5_to(
        &mut rhs,
        0.0,
        q.t,
        &mut state,
        &OdeOptions { abs_tol: opts.abs_tol, rel_tol: opts.rel_tol, ..OdeOptions::default() },
        &mut |sigma, z: &[f64]| {
            if Complex64::new(z[0], z[1]).norm() > guard {
                Err(Error::Convergence(format!(
                    "x-characteristic left the validated domain (|x| > {guard}) at \
                     backward time {sigma}"
                )))
            } else {
                Ok(())
            }
        },
    )?;
    let acc = Complex64::new(state[2], state[3]);
    Ok((beta * acc).exp())
}

/// Elementary closed form of the generating function at r = 1/4, γ = 1:
/// P(x, y, t) = exp[β(1-e^{-t})(1-y)] / [1 + (t/4)(2-x-y)]^{4β}.
pub fn eval_gf_special(spec: &ProcessSpec, q: &GfQuery) -> Result<Complex64> {
    check_query(spec, q)?;
    if spec.r_value() != 0.25 || spec.gamma_value() != 1.0 {
        return Err(Error::Domain(format!(
            "elementary closed form requires r = 1/4 and gamma = 1 exactly, got r={}, gamma={}",
            spec.r_value(),
            spec.gamma_value()
        )));
    }
    let beta = spec.beta_value();
    let c = -(-q.t).exp_m1(); // 1 - e^{-t}
    let base = 1.0 + (q.t / 4.0) * (2.0 - q.x - q.y);
    Ok((beta * c * (1.0 - q.y) - 4.0 * beta * base.ln()).exp())
}

/// Options of the grid extraction.
#[derive(Debug, Clone, Copy)]
pub struct ExtractOptions {
    /// Sampling radii along each axis; 1.0 keeps the aliasing error equal to
    /// the out-of-grid mass, sub-unit radii exist for heavy-tail diagnostics.
    pub radius_m: f64,
    pub radius_n: f64,
    /// Evaluate only half the nodes and mirror by conjugation.
    pub conjugate_symmetry: bool,
    pub gf: GfOptions,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            radius_m: 1.0,
            radius_n: 1.0,
            conjugate_symmetry: true,
            gf: GfOptions::default(),
        }
    }
}

/// Recovers P_{m,n} for m < m_len, n < n_len by two-dimensional Fourier
/// inversion of the generating function sampled at scaled roots of unity.
/// Grid sizes must be powers of two.
pub fn extract_pmn(
    spec: &ProcessSpec,
    t: f64,
    m_len: usize,
    n_len: usize,
    opts: &ExtractOptions,
) -> Result<DistributionSnapshot> {
    if !m_len.is_power_of_two() || !n_len.is_power_of_two() || m_len < 2 || n_len < 2 {
        return Err(Error::Domain(format!(
            "grid sizes must be powers of two >= 2, got {m_len} x {n_len}"
        )));
    }
    if !(0.0 < opts.radius_m && opts.radius_m <= 1.0 && 0.0 < opts.radius_n && opts.radius_n <= 1.0)
    {
        return Err(Error::Domain("sampling radii must lie in (0, 1]".into()));
    }
    let nodes = sample_grid(spec, t, m_len, n_len, opts)?;

    // Forward DFT of the samples divided by the grid size is exactly the
    // coefficient sum Σ P_{m+j·M, n+k·N} ρ^{...}; dividing by ρ^m ρ^n gives
    // the aliased coefficient estimates.
    let mut grid = nodes;
    fft2_in_place(&mut grid, m_len, n_len);

    let norm = 1.0 / (m_len * n_len) as f64;
    let mut probs = Vec::with_capacity(m_len * n_len);
    let mut max_imag: f64 = 0.0;
    for (m, row) in grid.chunks_exact(n_len).enumerate() {
        let rm = opts.radius_m.powi(m as i32);
        for (n, &v) in row.iter().enumerate() {
            let scale = norm / (rm * opts.radius_n.powi(n as i32));
            let p = v * scale;
            max_imag = max_imag.max(p.im.abs());
            if p.re < -1e-9 {
                return Err(Error::Precision(format!(
                    "extracted probability P[{m}][{n}] = {:.3e} is negative beyond tolerance",
                    p.re
                )));
            }
            probs.push(p.re.max(0.0));
        }
    }
    if max_imag > 1e-10 {
        return Err(Error::Precision(format!(
            "extracted probabilities carry imaginary mass {max_imag:.3e} > 1e-10"
        )));
    }
    let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    Ok(DistributionSnapshot::two_type(t, Engine::Characteristics, m_len, n_len, probs, tail))
}

/// Evaluates the generating function on the sampling grid, optionally using
/// the conjugate symmetry P(conj x, conj y) = conj P(x, y) to halve the
/// number of characteristic integrations.
fn sample_grid(
    spec: &ProcessSpec,
    t: f64,
    m_len: usize,
    n_len: usize,
    opts: &ExtractOptions,
) -> Result<Vec<Complex64>> {
    let node = |j: usize, k: usize| GfQuery {
        x: Complex64::from_polar(
            opts.radius_m,
            2.0 * std::f64::consts::PI * j as f64 / m_len as f64,
        ),
        y: Complex64::from_polar(
            opts.radius_n,
            2.0 * std::f64::consts::PI * k as f64 / n_len as f64,
        ),
        t,
    };
    let mut todo: Vec<(usize, usize)> = Vec::with_capacity(m_len * n_len);
    if opts.conjugate_symmetry {
        for j in 0..=m_len / 2 {
            let self_mirror = j == 0 || j == m_len / 2;
            let k_max = if self_mirror { n_len / 2 } else { n_len - 1 };
            for k in 0..=k_max {
                todo.push((j, k));
            }
        }
    } else {
        for j in 0..m_len {
            for k in 0..n_len {
                todo.push((j, k));
            }
        }
    }
    let computed: Vec<Result<Complex64>> = todo
        .par_iter()
        .map(|&(j, k)| eval_gf(spec, &node(j, k), &opts.gf))
        .collect();
    let mut grid = vec![Complex64::new(0.0, 0.0); m_len * n_len];
    for (&(j, k), value) in todo.iter().zip(computed) {
        grid[j * n_len + k] = value?;
    }
    if opts.conjugate_symmetry {
        // Mirror: G[M-j][N-k] = conj G[j][k] (indices mod grid size).
        for j in 0..=m_len / 2 {
            for k in 0..n_len {
                let mj = (m_len - j) % m_len;
                let mk = (n_len - k) % n_len;
                let src = grid[j * n_len + k];
                if mj * n_len + mk != j * n_len + k {
                    grid[mj * n_len + mk] = src.conj();
                }
            }
        }
    }
    Ok(grid)
}

/// In-place 2D forward FFT over a row-major rows x cols grid.
fn fft2_in_place(grid: &mut [Complex64], rows: usize, cols: usize) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(cols);
    for row in grid.chunks_exact_mut(cols) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(rows);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = grid[r * cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            grid[r * cols + c] = column[r];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact;

    fn spec_special(beta: f64) -> ProcessSpec {
        ProcessSpec::two_type(beta, 0.25, 1.0)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn normalization_fixed_point() {
        for spec in [spec_special(0.5), ProcessSpec::two_type(1.3, 0.4, 2.5)] {
            for &t in &[0.5, 2.0, 10.0] {
                let v = eval_gf(&spec, &GfQuery { x: c(1.0, 0.0), y: c(1.0, 0.0), t }, &
                    GfOptions::default())
                .unwrap();
                assert!((v - 1.0).norm() < 1e-12, "t={t}: {v}");
            }
        }
    }

    #[test]
    fn zero_source_is_identically_one() {
        let spec = ProcessSpec::two_type(0.0, 0.3, 1.5);
        let q = GfQuery { x: c(0.3, 0.4), y: c(-0.2, 0.1), t: 3.0 };
        let v = eval_gf(&spec, &q, &GfOptions::default()).unwrap();
        assert!((v - 1.0).norm() < 1e-12);
    }

    #[test]
    fn closed_form_frozen_value() {
        // P(0, 0, 2) at beta = 1/2: exp[(1-e^{-2})/2] / 4.
        let spec = spec_special(0.5);
        let q = GfQuery { x: c(0.0, 0.0), y: c(0.0, 0.0), t: 2.0 };
        let v = eval_gf_special(&spec, &q).unwrap();
        assert!((v.re - 0.3852117858827537).abs() < 1e-15, "got {}", v.re);
        assert_eq!(v.im, 0.0);
        let w = eval_gf(&spec, &q, &GfOptions::default()).unwrap();
        assert!((w - v).norm() < 1e-9, "ode={w} closed={v}");
    }

    #[test]
    fn backward_integration_matches_closed_form_on_unit_grids() {
        let spec = spec_special(0.5);
        let opts = GfOptions::default();
        for &t in &[0.5, 2.0, 8.0] {
            for j in 0..5 {
                for k in 0..5 {
                    let q = GfQuery {
                        x: Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / 5.0),
                        y: Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 5.0),
                        t,
                    };
                    let a = eval_gf(&spec, &q, &opts).unwrap();
                    let b = eval_gf_special(&spec, &q).unwrap();
                    assert!((a - b).norm() < 1e-8, "t={t} j={j} k={k}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn special_form_rejects_other_parameters() {
        let spec = ProcessSpec::two_type(1.0, 0.3, 1.0);
        let q = GfQuery { x: c(0.0, 0.0), y: c(0.0, 0.0), t: 1.0 };
        assert!(matches!(eval_gf_special(&spec, &q), Err(Error::Domain(_))));
    }

    #[test]
    fn queries_outside_unit_disk_rejected() {
        let spec = spec_special(0.5);
        let q = GfQuery { x: c(1.5, 0.0), y: c(0.0, 0.0), t: 1.0 };
        assert!(eval_gf(&spec, &q, &GfOptions::default()).is_err());
    }

    #[test]
    fn restricted_slice_reproduces_postmitotic_marginal() {
        // P(1, 0, t) = Pi_0(t).
        let spec = spec_special(0.5);
        let q = GfQuery { x: c(1.0, 0.0), y: c(0.0, 0.0), t: 1.0 };
        let v = eval_gf(&spec, &q, &GfOptions::default()).unwrap();
        let expect = exact::twotype_special_pin(0, 1.0, 0.5).unwrap();
        assert!((v.re - expect).abs() < 1e-9, "{} vs {expect}", v.re);
        assert!(v.im.abs() < 1e-10);
    }

    #[test]
    fn extraction_matches_closed_forms() {
        let spec = spec_special(0.5);
        let snap = extract_pmn(&spec, 2.0, 32, 32, &ExtractOptions::default()).unwrap();
        // Joint (0,0) entry.
        let p00 = exact::twotype_special_p00(2.0, 0.5).unwrap();
        assert!((snap.prob_mn(0, 0) - p00).abs() < 1e-8);
        // Progenitor marginal.
        let marg = snap.marginal_m();
        for m in 0..12u64 {
            let expect = exact::twotype_special_pm(m, 2.0, 0.5).unwrap();
            assert!(
                (marg[m as usize] - expect).abs() < 1e-7,
                "m={m}: {} vs {expect}",
                marg[m as usize]
            );
        }
        // Post-mitotic marginal.
        let marg_n = snap.marginal_n();
        for n in 0..12u64 {
            let expect = exact::twotype_special_pin(n, 2.0, 0.5).unwrap();
            assert!(
                (marg_n[n as usize] - expect).abs() < 1e-7,
                "n={n}: {} vs {expect}",
                marg_n[n as usize]
            );
        }
        // Mass accounting.
        assert!((snap.total_mass() + snap.tail_mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn symmetry_shortcut_is_exact() {
        let spec = ProcessSpec::two_type(1.0, 0.3, 2.0);
        let full = extract_pmn(
            &spec,
            1.0,
            16,
            16,
            &ExtractOptions { conjugate_symmetry: false, ..Default::default() },
        )
        .unwrap();
        let half = extract_pmn(&spec, 1.0, 16, 16, &ExtractOptions::default()).unwrap();
        let max_diff = full
            .probs()
            .iter()
            .zip(half.probs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_diff <= 1e-14, "shortcut changed the grid by {max_diff:.3e}");
    }

    #[test]
    fn grid_size_validation() {
        let spec = spec_special(0.5);
        assert!(extract_pmn(&spec, 1.0, 12, 16, &ExtractOptions::default()).is_err());
        assert!(extract_pmn(&spec, 1.0, 16, 1, &ExtractOptions::default()).is_err());
    }
}
