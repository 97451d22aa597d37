//! Adaptive Dormand-Prince 5(4) integration for second-order radial
//! problems written as 2-component first-order systems y = (u, u').
//!
//! Accepted steps are stored as (r, u, u', u'') nodes; between nodes
//! the solution is reconstructed by two-point quintic Hermite
//! interpolation, which matches value, slope and curvature at both
//! ends. Since u'' comes from the right-hand side exactly at the
//! nodes, the reconstruction carries enough smoothness to measure the
//! pointwise defect of the computed solution at step midpoints, which
//! is how the shooting module certifies its residual.
//!
//! Integration runs in either direction (set `r_end` below `r0` to
//! sweep inward); the trajectory always comes back sorted by
//! increasing radius.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Magnitude of the first trial step.
    pub h_init: f64,
    /// Cap on the step magnitude.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-12,
            atol: 1e-14,
            h_init: 1e-6,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The stop predicate fired at an accepted step end.
    Event,
    /// Integration reached `r_end`.
    EndReached,
    /// The controller drove the step below machine resolution.
    StepUnderflow,
    /// `max_steps` accepted/rejected attempts were exhausted.
    MaxSteps,
}

/// Dense output of one integration: nodes sorted by increasing r.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub ddu: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    fn segment(&self, r: f64) -> usize {
        // greatest i with r[i] <= r, clamped to a valid segment start
        match self
            .r
            .binary_search_by(|probe| probe.partial_cmp(&r).unwrap())
        {
            Ok(i) => i.min(self.r.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.r.len() - 2),
        }
    }

    /// Quintic Hermite evaluation of (u, u', u'') at radius r
    /// (clamped extrapolation outside the node range).
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let i = self.segment(r);
        let (r0, r1) = (self.r[i], self.r[i + 1]);
        let h = r1 - r0;
        let t = (r - r0) / h;
        let (u0, m0, a0) = (self.u[i], self.du[i], self.ddu[i]);
        let (u1, m1, a1) = (self.u[i + 1], self.du[i + 1], self.ddu[i + 1]);

        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        // basis matching (value, slope, curvature) at both ends
        let phi0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let phi1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let phi2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
        let psi0 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let psi1 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let psi2 = 0.5 * t3 - t4 + 0.5 * t5;
        let u = u0 * phi0
            + h * m0 * phi1
            + h * h * a0 * phi2
            + u1 * psi0
            + h * m1 * psi1
            + h * h * a1 * psi2;

        let dphi0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
        let dphi1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
        let dphi2 = t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4;
        let dpsi0 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
        let dpsi1 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
        let dpsi2 = 1.5 * t2 - 4.0 * t3 + 2.5 * t4;
        let du = (u0 * dphi0
            + h * m0 * dphi1
            + h * h * a0 * dphi2
            + u1 * dpsi0
            + h * m1 * dpsi1
            + h * h * a1 * dpsi2)
            / h;

        let d2phi0 = -60.0 * t + 180.0 * t2 - 120.0 * t3;
        let d2phi1 = -36.0 * t + 96.0 * t2 - 60.0 * t3;
        let d2phi2 = 1.0 - 9.0 * t + 18.0 * t2 - 10.0 * t3;
        let d2psi0 = 60.0 * t - 180.0 * t2 + 120.0 * t3;
        let d2psi1 = -24.0 * t + 84.0 * t2 - 60.0 * t3;
        let d2psi2 = 3.0 * t - 12.0 * t2 + 10.0 * t3;
        let ddu = (u0 * d2phi0
            + h * m0 * d2phi1
            + h * h * a0 * d2phi2
            + u1 * d2psi0
            + h * m1 * d2psi1
            + h * h * a1 * d2psi2)
            / (h * h);

        (u, du, ddu)
    }

    /// Reverse the node order in place (used after inward sweeps).
    pub fn reverse(&mut self) {
        self.r.reverse();
        self.u.reverse();
        self.du.reverse();
        self.ddu.reverse();
    }

    /// Multiply the solution by a constant.
    pub fn scale(&mut self, s: f64) {
        for v in self
            .u
            .iter_mut()
            .chain(self.du.iter_mut())
            .chain(self.ddu.iter_mut())
        {
            *v *= s;
        }
    }

    /// Rescale the independent variable r -> lambda r, keeping the
    /// stored slopes and curvatures consistent with the new variable.
    pub fn stretch(&mut self, lambda: f64) {
        for v in &mut self.r {
            *v *= lambda;
        }
        let il = 1.0 / lambda;
        for v in &mut self.du {
            *v *= il;
        }
        for v in &mut self.ddu {
            *v *= il * il;
        }
    }
}

#[derive(Debug)]
pub struct OdeOutcome {
    pub traj: Trajectory,
    pub reason: StopReason,
    pub r_last: f64,
    pub y_last: [f64; 2],
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// b5 - b4 (embedded error weights)
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate y' = f(r, y) from r0 to r_end (either direction).
///
/// `stop` is evaluated at every accepted step end; returning true ends
/// the sweep with `StopReason::Event`. The node (r0, y0) goes into the
/// trajectory with u'' taken from f at that point, so callers starting
/// just off a coordinate singularity should pass the regularized RHS.
pub fn integrate<F, S>(
    mut f: F,
    r0: f64,
    y0: [f64; 2],
    r_end: f64,
    opts: &OdeOptions,
    mut stop: S,
) -> Result<OdeOutcome>
where
    F: FnMut(f64, [f64; 2]) -> [f64; 2],
    S: FnMut(f64, [f64; 2]) -> bool,
{
    if !(r_end - r0).is_normal() {
        return Err(CoreError::InvalidParams(
            "degenerate integration interval".into(),
        ));
    }
    let dir = (r_end - r0).signum();
    let span = (r_end - r0).abs();
    let mut h = opts.h_init.abs().min(opts.h_max).min(span) * dir;

    let mut r = r0;
    let mut y = y0;
    let mut k1 = f(r, y);

    let mut traj = Trajectory {
        r: vec![r],
        u: vec![y[0]],
        du: vec![y[1]],
        ddu: vec![k1[1]],
    };

    // PI step-size controller state
    let mut err_old: f64 = 1e-4;
    let mut reason = StopReason::MaxSteps;

    let mut ks = [[0.0f64; 2]; 7];
    for _ in 0..opts.max_steps {
        let remaining = (r_end - r).abs();
        if remaining <= 1e-14 * (r.abs() + r_end.abs()).max(1.0) {
            reason = StopReason::EndReached;
            break;
        }
        if h.abs() > remaining {
            h = remaining * dir;
        }
        // Underflow means h no longer moves r in floating point. The
        // threshold must scale with |r| alone: problems with a
        // coordinate singularity at the origin legitimately take steps
        // proportional to r, far below any absolute floor.
        if h.abs() <= 16.0 * f64::EPSILON * r.abs() {
            reason = StopReason::StepUnderflow;
            break;
        }

        ks[0] = k1;
        for s in 1..7 {
            let mut ys = y;
            for (j, k) in ks.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    ys[0] += h * a * k[0];
                    ys[1] += h * a * k[1];
                }
            }
            ks[s] = f(r + C[s] * h, ys);
        }
        // 5th-order solution is stage 7's argument (FSAL)
        let mut y1 = y;
        for (j, k) in ks.iter().enumerate().take(6) {
            let a = A[6][j];
            if a != 0.0 {
                y1[0] += h * a * k[0];
                y1[1] += h * a * k[1];
            }
        }

        let mut err = 0.0;
        for i in 0..2 {
            let mut e = 0.0;
            for (j, k) in ks.iter().enumerate() {
                e += E[j] * k[i];
            }
            e *= h;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / 2.0).sqrt();

        if err <= 1.0 {
            // accept
            let r1 = r + h;
            let k_new = ks[6]; // FSAL: f(r1, y1)
            traj.r.push(r1);
            traj.u.push(y1[0]);
            traj.du.push(y1[1]);
            traj.ddu.push(k_new[1]);
            r = r1;
            y = y1;
            k1 = k_new;
            if stop(r, y) {
                reason = StopReason::Event;
                break;
            }
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_old.powf(0.4 / 5.0);
            let fac = fac.clamp(0.2, 5.0);
            h = (h * fac).clamp(-opts.h_max, opts.h_max);
            err_old = err.max(1e-10);
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h *= fac;
        }
    }

    if dir < 0.0 {
        traj.reverse();
    }
    Ok(OdeOutcome {
        traj,
        reason,
        r_last: r,
        y_last: y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(_r: f64, y: [f64; 2]) -> [f64; 2] {
        [y[1], -y[0]]
    }

    #[test]
    fn oscillator_stays_accurate_over_many_periods() {
        let opts = OdeOptions {
            rtol: 1e-12,
            atol: 1e-14,
            h_init: 1e-3,
            ..Default::default()
        };
        let out = integrate(harmonic, 0.0, [1.0, 0.0], 20.0, &opts, |_, _| false).unwrap();
        assert_eq!(out.reason, StopReason::EndReached);
        assert!((out.y_last[0] - 20.0f64.cos()).abs() < 1e-9);
        assert!((out.y_last[1] + 20.0f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn dense_output_matches_between_nodes() {
        let opts = OdeOptions {
            rtol: 1e-11,
            atol: 1e-13,
            h_init: 1e-3,
            ..Default::default()
        };
        let out = integrate(harmonic, 0.0, [1.0, 0.0], 10.0, &opts, |_, _| false).unwrap();
        // probe off-node radii
        for k in 0..200 {
            let r = 10.0 * (k as f64 + 0.37) / 200.0;
            let (u, du, ddu) = out.traj.eval(r);
            assert!((u - r.cos()).abs() < 1e-9, "r={r}");
            assert!((du + r.sin()).abs() < 1e-8, "r={r}");
            assert!((ddu + r.cos()).abs() < 1e-6, "r={r}");
        }
    }

    #[test]
    fn tighter_tolerance_buys_accuracy() {
        let loose = OdeOptions {
            rtol: 1e-6,
            atol: 1e-9,
            h_init: 1e-2,
            ..Default::default()
        };
        let tight = OdeOptions {
            rtol: 1e-12,
            atol: 1e-14,
            h_init: 1e-2,
            ..Default::default()
        };
        let e_loose = (integrate(harmonic, 0.0, [1.0, 0.0], 10.0, &loose, |_, _| false)
            .unwrap()
            .y_last[0]
            - 10.0f64.cos())
        .abs();
        let e_tight = (integrate(harmonic, 0.0, [1.0, 0.0], 10.0, &tight, |_, _| false)
            .unwrap()
            .y_last[0]
            - 10.0f64.cos())
        .abs();
        assert!(e_loose < 1e-4);
        assert!(e_tight < 1e-10);
        assert!(e_tight < e_loose / 100.0);
    }

    #[test]
    fn event_stops_at_zero_crossing() {
        let opts = OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            h_max: 0.01,
            ..Default::default()
        };
        // cos crosses zero at pi/2
        let out = integrate(harmonic, 0.0, [1.0, 0.0], 10.0, &opts, |_, y| y[0] < 0.0).unwrap();
        assert_eq!(out.reason, StopReason::Event);
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert!(out.r_last >= half_pi && out.r_last < half_pi + 0.02);
    }

    #[test]
    fn inward_integration_returns_sorted_nodes() {
        // u'' = u has decaying solution e^{-r}; integrate inward from
        // r=8 with the decaying data and check against e^{-r}.
        let opts = OdeOptions {
            rtol: 1e-12,
            atol: 1e-16,
            h_init: 1e-3,
            ..Default::default()
        };
        let u8 = (-8.0f64).exp();
        let out = integrate(
            |_, y| [y[1], y[0]],
            8.0,
            [u8, -u8],
            1.0,
            &opts,
            |_, _| false,
        )
        .unwrap();
        assert_eq!(out.reason, StopReason::EndReached);
        assert!(out.traj.r.windows(2).all(|w| w[0] < w[1]));
        let (u, du, _) = out.traj.eval(2.5);
        assert!((u - (-2.5f64).exp()).abs() / (-2.5f64).exp() < 1e-9);
        assert!((du + (-2.5f64).exp()).abs() / (-2.5f64).exp() < 1e-8);
    }

    #[test]
    fn blowup_reports_step_underflow() {
        // y' = y^2 from y(0)=1 blows up at r=1
        let opts = OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            max_steps: 100_000,
            ..Default::default()
        };
        let out = integrate(
            |_, y| [y[0] * y[0], 0.0],
            0.0,
            [1.0, 0.0],
            2.0,
            &opts,
            |_, _| false,
        )
        .unwrap();
        assert!(
            out.reason == StopReason::StepUnderflow || out.reason == StopReason::MaxSteps,
            "{:?}",
            out.reason
        );
        assert!(out.r_last <= 1.0 + 1e-3);
    }
}
