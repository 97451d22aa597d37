//! The Aubin-Talenti bubble W and its scaling generator.
//!
//! W(r) = (1 + r^2/(d(d-2)))^{-(d-2)/2} is the explicit radial solution
//! of Delta W + W^{(d+2)/(d-2)} = 0 normalized to W(0) = 1. It decays
//! like r^{-(d-2)}, so it misses L^2 in d = 3, 4. The scaling generator
//! Lambda W = (d-2)/2 W + r W' has the closed form
//! `(d-2)/2 (1 - s)(1 + s)^{-d/2}` with `s = r^2/(d(d-2))`, so it
//! changes sign exactly once, at r = sqrt(d(d-2)).
//!
//! Grid quadratures of W-integrands are truncated at r_max; the
//! `*_completed` routines add the analytic remainder over [r_max, inf)
//! so slowly converging pairings (they fall off like inverse powers,
//! not exponentials) can still be quoted at 1e-8 accuracy.

use crate::error::{CoreError, Result};
use crate::field::RadialField;
use crate::fit;
use crate::grid::RadialGrid;
use std::sync::Arc;

/// Sobolev-critical exponent 2* = 2d/(d-2).
pub fn two_star(d: u32) -> f64 {
    2.0 * d as f64 / (d as f64 - 2.0)
}

/// Power appearing in the critical nonlinearity, (d+2)/(d-2) = 2* - 1.
pub fn critical_power(d: u32) -> f64 {
    (d as f64 + 2.0) / (d as f64 - 2.0)
}

/// W(r) in dimension d.
pub fn w_at(d: u32, r: f64) -> f64 {
    let dd = d as f64;
    let s = r * r / (dd * (dd - 2.0));
    (1.0 + s).powf(-(dd - 2.0) / 2.0)
}

/// W'(r).
pub fn dw_at(d: u32, r: f64) -> f64 {
    let dd = d as f64;
    let s = r * r / (dd * (dd - 2.0));
    -(r / dd) * (1.0 + s).powf(-dd / 2.0)
}

/// (Lambda W)(r) = (d-2)/2 W + r W'.
pub fn lambda_w_at(d: u32, r: f64) -> f64 {
    let dd = d as f64;
    let s = r * r / (dd * (dd - 2.0));
    0.5 * (dd - 2.0) * (1.0 - s) * (1.0 + s).powf(-dd / 2.0)
}

/// Radius of the single sign change of Lambda W.
pub fn lambda_w_zero(d: u32) -> f64 {
    let dd = d as f64;
    (dd * (dd - 2.0)).sqrt()
}

/// W sampled on a grid.
pub fn talenti(grid: &Arc<RadialGrid>) -> RadialField {
    let d = grid.d();
    RadialField::from_fn(grid.clone(), |r| w_at(d, r))
}

/// Lambda W sampled on a grid.
pub fn lambda_w(grid: &Arc<RadialGrid>) -> RadialField {
    let d = grid.d();
    RadialField::from_fn(grid.clone(), |r| lambda_w_at(d, r))
}

/// Relative weighted-L^2 residual of Delta W + W^{(d+2)/(d-2)} under the
/// grid's finite-difference Laplacian. Pure discretization diagnostic:
/// it shrinks at second order as the grid is refined.
pub fn talenti_residual(grid: &Arc<RadialGrid>) -> f64 {
    let d = grid.d();
    let q = critical_power(d);
    let w = talenti(grid);
    let lap = w.fd_laplacian();
    let n = grid.len();
    let weights = grid.weights();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n - 1 {
        let source = w.values()[i].powf(q);
        let res = lap[i] + source;
        num += weights[i] * res * res;
        den += weights[i] * source * source;
    }
    (num / den).sqrt()
}

/// <Lambda W, W^p> over all of R^d: grid quadrature plus the analytic
/// remainder beyond r_max. Needs p > 1 in d=3 for the tail to converge.
pub fn pairing_lambda_w_wp(grid: &Arc<RadialGrid>, p: f64) -> f64 {
    let d = grid.d();
    let lw = lambda_w(grid);
    let wp = RadialField::from_fn(grid.clone(), |r| w_at(d, r).powf(p));
    let truncated = lw.inner(&wp).expect("same grid");
    let sigma = grid.sigma();
    let dd = d as f64;
    let tail = fit::tail_integral(
        &|r: f64| lambda_w_at(d, r) * w_at(d, r).powf(p) * r.powf(dd - 1.0),
        grid.r_max(),
        1e-14,
    );
    truncated + sigma * tail
}

/// ||W||_{L^q}^q over all of R^d (grid quadrature + analytic tail).
/// Errors when the tail diverges, i.e. q (d-2) <= d.
pub fn w_lq_full(grid: &Arc<RadialGrid>, q: f64) -> Result<f64> {
    let d = grid.d();
    let dd = d as f64;
    if q * (dd - 2.0) <= dd {
        return Err(CoreError::InvalidParams(format!(
            "||W||_q^q diverges for q={q} in d={d}"
        )));
    }
    let w = talenti(grid);
    let truncated = w
        .grid()
        .weights()
        .iter()
        .zip(w.values())
        .map(|(wt, v)| wt * v.powf(q))
        .sum::<f64>();
    let sigma = grid.sigma();
    let tail = fit::tail_integral(
        &|r: f64| w_at(d, r).powf(q) * r.powf(dd - 1.0),
        grid.r_max(),
        1e-14,
    );
    Ok(truncated + sigma * tail)
}

/// ||grad W||_{L^2}^2 beyond r_from (analytic tail helper for
/// deviation norms against truncated profiles).
pub fn w_h1dot_tail_sq(d: u32, r_from: f64) -> f64 {
    let dd = d as f64;
    let sigma = crate::grid::sphere_area(d);
    sigma
        * fit::tail_integral(
            &|r: f64| {
                let dw = dw_at(d, r);
                dw * dw * r.powf(dd - 1.0)
            },
            r_from,
            1e-14,
        )
}

/// ||W||_{L^q}^q beyond r_from, for convergent q.
pub fn w_lq_tail(d: u32, q: f64, r_from: f64) -> f64 {
    let dd = d as f64;
    let sigma = crate::grid::sphere_area(d);
    sigma
        * fit::tail_integral(
            &|r: f64| w_at(d, r).powf(q) * r.powf(dd - 1.0),
            r_from,
            1e-14,
        )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid3(r: f64, n: usize) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::graded(3, r, n).unwrap())
    }

    #[test]
    fn w_normalization_and_symmetry() {
        for d in [3u32, 4, 5, 7] {
            assert_eq!(w_at(d, 0.0), 1.0);
            assert_eq!(dw_at(d, 0.0), 0.0);
            assert!((lambda_w_at(d, 0.0) - (d as f64 - 2.0) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn lambda_w_closed_form_matches_definition() {
        // Lambda W = (d-2)/2 W + r W' against the separate closed form
        for d in [3u32, 4, 5, 6, 9] {
            for r in [0.0, 0.3, 1.0, 2.5, 10.0, 123.0] {
                let direct = 0.5 * (d as f64 - 2.0) * w_at(d, r) + r * dw_at(d, r);
                assert!(
                    (direct - lambda_w_at(d, r)).abs() < 1e-14 * (1.0 + direct.abs()),
                    "d={d} r={r}"
                );
            }
        }
    }

    #[test]
    fn lambda_w_changes_sign_exactly_once() {
        let d = 3;
        let z = lambda_w_zero(d);
        assert!((z - 3f64.sqrt()).abs() < 1e-15);
        assert!(lambda_w_at(d, z * 0.999) > 0.0);
        assert!(lambda_w_at(d, z * 1.001) < 0.0);
        let g = grid3(50.0, 3000);
        let f = lambda_w(&g);
        let flips = f
            .values()
            .windows(2)
            .filter(|w| w[0].signum() != w[1].signum() && w[0] != 0.0)
            .count();
        assert_eq!(flips, 1);
    }

    #[test]
    fn l2_divergence_flags_by_dimension() {
        // Lambda W ~ r^{-(d-2)}: L^2 diverges iff 2(d-2) <= d, i.e. d <= 4.
        for (d, expect) in [(3u32, true), (4, true), (5, false)] {
            let g = Arc::new(RadialGrid::graded(d, 200.0, 2500).unwrap());
            let rep = lambda_w(&g).norms(&[]);
            assert_eq!(rep.l2_divergent, expect, "d={d}");
        }
    }

    #[test]
    fn w_l6_matches_beta_integral_oracle() {
        // d=3: ||W||_{L^6}^6 = 4 pi int (1+r^2/3)^{-3} r^2 dr
        //     = 4 pi 3^{3/2} B(3/2, 3/2)/2 = 4 pi 3^{3/2} pi/16.
        let exact = 4.0 * PI * 3f64.powf(1.5) * PI / 16.0;
        let v = w_lq_full(&grid3(300.0, 4000), 6.0).unwrap();
        assert!(
            ((v - exact) / exact).abs() < 1e-8,
            "quadrature {v} vs oracle {exact}"
        );
    }

    #[test]
    fn w_l5_matches_beta_integral_oracle() {
        // d=3, p=4: ||W||_{L^5}^5 = 4 pi sqrt(3)
        let exact = 4.0 * PI * 3f64.sqrt();
        let v = w_lq_full(&grid3(300.0, 4000), 5.0).unwrap();
        assert!(((v - exact) / exact).abs() < 1e-8);
    }

    #[test]
    fn w_l2_rejected_in_low_dimension() {
        assert!(w_lq_full(&grid3(100.0, 2000), 2.0).is_err());
        let g5 = Arc::new(RadialGrid::graded(5, 100.0, 2000).unwrap());
        assert!(w_lq_full(&g5, 2.0).is_ok());
    }

    #[test]
    fn pairing_identity_with_lp_norm() {
        // <Lambda W, W^p> = (1/2 - 3/(p+1)) ||W||_{p+1}^{p+1} in d=3.
        let g = grid3(300.0, 4000);
        for p in [3.5, 4.0, 4.5] {
            let lhs = pairing_lambda_w_wp(&g, p);
            let rhs = (0.5 - 3.0 / (p + 1.0)) * w_lq_full(&g, p + 1.0).unwrap();
            assert!(
                ((lhs - rhs) / rhs).abs() < 1e-7,
                "p={p}: lhs={lhs} rhs={rhs}"
            );
        }
        // frozen closed form at p=4: -0.1 * 4 pi sqrt(3)
        let exact = -0.4 * PI * 3f64.sqrt();
        let lhs = pairing_lambda_w_wp(&g, 4.0);
        assert!(((lhs - exact) / exact).abs() < 1e-8);
    }

    #[test]
    fn talenti_discrete_residual_small_and_second_order() {
        let res_a = talenti_residual(&grid3(100.0, 2000));
        let res_b = talenti_residual(&grid3(100.0, 4000));
        assert!(res_a < 1e-4, "coarse residual {res_a}");
        assert!(res_b < res_a / 2.5, "no second-order decay: {res_a} -> {res_b}");
    }
}
