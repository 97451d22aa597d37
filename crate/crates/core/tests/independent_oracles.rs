//! Cross-checks of the library's solvers against independently coded
//! oracles: a fixed-step RK4 shooter with plain bisection for the ground
//! state amplitude, and a Sturm oscillation count for the negative modes
//! of the linearized operators. Neither shares quadrature, grids, or
//! eigensolvers with the code under test.

use critwave_core::grid::RadialGrid;
use critwave_core::rescale::rescale;
use critwave_core::shoot::{shoot, ProblemParams, ShootOptions};
use critwave_core::spectra::ground_state_spectrum;
use std::sync::Arc;

/// Nonlinearity of the d = 3, p = 4 equation with both terms on.
fn force(u: f64) -> f64 {
    u.powi(4) + u.powi(5)
}

/// Integrates u'' + (2/r) u' = omega u - force(u) from a series start and
/// reports whether the amplitude overshoots (profile crosses zero).
/// Undershoot is the complementary outcome: the slope turns positive.
fn rk4_overshoots(omega: f64, m: f64, h: f64, r_end: f64) -> bool {
    let accel = |r: f64, u: f64, du: f64| omega * u - force(u) - 2.0 * du / r;
    // Series start deep inside the core scale: the quadratic truncation
    // error is ~(r0 / core)^4 relative, far below the comparison tolerance.
    let r0 = 1e-6;
    let a0 = (omega * m - force(m)) / 3.0;
    let mut r = r0;
    let mut u = m + 0.5 * a0 * r0 * r0;
    let mut du = a0 * r0;
    while r < r_end {
        let k1u = du;
        let k1v = accel(r, u, du);
        let k2u = du + 0.5 * h * k1v;
        let k2v = accel(r + 0.5 * h, u + 0.5 * h * k1u, du + 0.5 * h * k1v);
        let k3u = du + 0.5 * h * k2v;
        let k3v = accel(r + 0.5 * h, u + 0.5 * h * k2u, du + 0.5 * h * k2v);
        let k4u = du + h * k3v;
        let k4v = accel(r + h, u + h * k3u, du + h * k3v);
        u += h * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0;
        du += h * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0;
        r += h;
        // A blow-up past the f64 range can only come from the overshoot
        // branch (undershoot trajectories stay bounded by m), and NaN from
        // an overflowed stage would otherwise fail both sign checks.
        if u <= 0.0 || !u.is_finite() {
            return true;
        }
        if du > 0.0 {
            return false;
        }
    }
    false
}

#[test]
fn bisection_on_a_plain_rk4_recovers_the_amplitude() {
    let params = ProblemParams::new(3, 4.0, 1.0);
    let gs = shoot(&params, &ShootOptions::default()).unwrap();

    let h = 1e-4;
    let r_end = 25.0;
    let mut lo = 1.0;
    let mut hi = 1e4;
    assert!(!rk4_overshoots(1.0, lo, h, r_end), "low bracket must undershoot");
    assert!(rk4_overshoots(1.0, hi, h, r_end), "high bracket must overshoot");
    while (hi - lo) / lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if rk4_overshoots(1.0, mid, h, r_end) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let oracle = 0.5 * (lo + hi);
    let rel = (gs.m - oracle).abs() / oracle;
    assert!(
        rel <= 1e-8,
        "amplitude {} vs independent bisection {} (rel {})",
        gs.m,
        oracle,
        rel
    );
}

/// Counts sign changes of the regular zero-energy solution of
/// -w'' + (alpha - v(r)) w = 0 on (0, r_end], which by Sturm theory
/// equals the number of negative Dirichlet eigenvalues of the radial
/// Schrodinger operator -Delta + alpha - v in d = 3.
fn oscillation_count(alpha: f64, v_half_step: &[f64], h: f64, r_end: f64) -> usize {
    let steps = (r_end / h).round() as usize;
    assert!(v_half_step.len() >= 2 * steps + 1);
    let mut w = h;
    let mut dw = 1.0;
    let mut crossings = 0;
    for k in 1..steps {
        // Q at r_k, r_k + h/2, r_k + h from the half-step table.
        let q0 = alpha - v_half_step[2 * k];
        let qm = alpha - v_half_step[2 * k + 1];
        let q1 = alpha - v_half_step[2 * k + 2];
        let k1w = dw;
        let k1v = q0 * w;
        let k2w = dw + 0.5 * h * k1v;
        let k2v = qm * (w + 0.5 * h * k1w);
        let k3w = dw + 0.5 * h * k2v;
        let k3v = qm * (w + 0.5 * h * k2w);
        let k4w = dw + h * k3v;
        let k4v = q1 * (w + h * k3w);
        let w_next = w + h * (k1w + 2.0 * k2w + 2.0 * k3w + k4w) / 6.0;
        dw += h * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0;
        if w_next * w < 0.0 {
            crossings += 1;
        }
        w = w_next;
    }
    crossings
}

#[test]
fn sturm_oscillation_count_confirms_the_morse_data() {
    let params = ProblemParams::new(3, 4.0, 1e3);
    let gs = shoot(&params, &ShootOptions::default()).unwrap();
    let report = ground_state_spectrum(&gs).unwrap();
    assert_eq!(report.plus_neg_count, 1);

    let rp = rescale(&gs);
    let r_end = 144.0;
    let h = 0.02;
    let fine = Arc::new(RadialGrid::uniform(3, r_end + h, (2.0 * (r_end + h) / h) as usize + 1).unwrap());
    let phi = rp.sample(&fine).unwrap();
    let vals = phi.values();

    // Linearized potentials of the rescaled equation
    // phi'' + (2/r) phi' = alpha phi - beta phi^4 - phi^5:
    // the symmetric branch differentiates the nonlinearity, the
    // antisymmetric branch divides it by phi.
    let v_plus: Vec<f64> = vals
        .iter()
        .map(|&u| 4.0 * rp.beta * u.powi(3) + 5.0 * u.powi(4))
        .collect();
    let v_minus: Vec<f64> = vals
        .iter()
        .map(|&u| rp.beta * u.powi(3) + u.powi(4))
        .collect();

    let plus_count = oscillation_count(rp.alpha, &v_plus, h, r_end);
    let minus_count = oscillation_count(rp.alpha, &v_minus, h, r_end);
    assert_eq!(
        plus_count, report.plus_neg_count,
        "independent oscillation count disagrees with the eigensolver"
    );
    assert_eq!(minus_count, 0, "the antisymmetric branch must be nonnegative");
}

#[test]
fn tightening_the_integrator_tolerance_leaves_the_amplitude() {
    let params = ProblemParams::new(3, 4.0, 100.0);
    let tight = shoot(&params, &ShootOptions::default()).unwrap();
    let loose_opts = ShootOptions {
        rtol: 1e-9,
        ..ShootOptions::default()
    };
    let loose = shoot(&params, &loose_opts).unwrap();
    let rel = (tight.m - loose.m).abs() / tight.m;
    assert!(
        rel <= 1e-7,
        "amplitude moved by {rel} between rtol 1e-12 and 1e-9"
    );
    assert!(tight.residual <= loose.residual * 10.0);
}
