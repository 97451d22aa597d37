//! Nodal scalar fields over a `RadialGrid`, with the norm and pairing
//! machinery the rest of the crate leans on.
//!
//! All pairings are plain L^2(R^d) pairings of radial functions:
//! <f, g> = sigma int f g r^{d-1} dr, evaluated with the grid weights.
//! Truncation to [0, R] is silent here; callers that care about what
//! lives beyond R (slowly decaying comparison profiles, for instance)
//! add their own tail corrections.

use crate::error::{CoreError, Result};
use crate::grid::RadialGrid;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

/// One L^q entry of a `NormReport`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LqNorm {
    pub q: f64,
    /// Norm of the truncated field; meaningful only when `divergent` is false.
    pub value: f64,
    pub divergent: bool,
}

/// Norms of a field plus a power-law tail diagnostic.
///
/// The tail fit regresses log f against log r over the last decade of
/// the grid. L^q is flagged divergent when q * decay <= d, i.e. when
/// the fitted tail fails the integrability test on R^d.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormReport {
    pub l2: f64,
    pub l2_divergent: bool,
    pub h1dot: f64,
    pub lq: Vec<LqNorm>,
    /// Fitted algebraic decay exponent k in f ~ r^{-k}, if a fit was possible.
    pub tail_decay: Option<f64>,
    /// Coefficient of determination of the tail fit.
    pub tail_r2: Option<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::GridMismatch(format!(
                "field has {} values for a {}-node grid",
                values.len(),
                grid.len()
            )));
        }
        Ok(RadialField { grid, values })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        RadialField { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// L^2 pairing against another field on the same grid.
    pub fn inner(&self, other: &RadialField) -> Result<f64> {
        if !self.grid.same_layout(&other.grid) {
            return Err(CoreError::GridMismatch(
                "inner product between fields on different grids".into(),
            ));
        }
        Ok(self
            .grid
            .weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| w * a * b)
            .sum())
    }

    pub fn norm_l2(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm_lq(&self, q: f64) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.abs().powf(q))
            .sum::<f64>()
            .powf(1.0 / q)
    }

    /// Homogeneous H^1 seminorm from piecewise-linear slopes.
    pub fn norm_h1dot(&self) -> f64 {
        let nodes = self.grid.nodes();
        let d = self.grid.d();
        let sigma = self.grid.sigma();
        let mut acc = 0.0;
        for e in 0..nodes.len() - 1 {
            let h = nodes[e + 1] - nodes[e];
            let s = (self.values[e + 1] - self.values[e]) / h;
            acc += s * s * sigma * shell_moment(d, nodes[e], nodes[e + 1]);
        }
        acc.sqrt()
    }

    /// L^2 norm restricted to the ball r <= r_cut.
    pub fn norm_l2_ball(&self, r_cut: f64) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(self.grid.nodes().iter().zip(&self.values))
            .filter(|(_, (r, _))| **r <= r_cut)
            .map(|(w, (_, v))| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Norms plus divergence flags from the tail diagnostic.
    pub fn norms(&self, qs: &[f64]) -> NormReport {
        let fit = self.tail_fit();
        let d = self.grid.d() as f64;
        let flag = |q: f64| fit.map(|(k, _)| q * k <= d).unwrap_or(false);
        NormReport {
            l2: self.norm_l2(),
            l2_divergent: flag(2.0),
            h1dot: self.norm_h1dot(),
            lq: qs
                .iter()
                .map(|&q| LqNorm {
                    q,
                    value: self.norm_lq(q),
                    divergent: flag(q),
                })
                .collect(),
            tail_decay: fit.map(|(k, _)| k),
            tail_r2: fit.map(|(_, r2)| r2),
        }
    }

    /// Least-squares fit of log|f| vs log r over the last decade of the
    /// grid. Returns (decay exponent, R^2), or None when the window has
    /// sign changes, zeros, or too few points for a meaningful fit.
    pub fn tail_fit(&self) -> Option<(f64, f64)> {
        let nodes = self.grid.nodes();
        let r_max = self.grid.r_max();
        let lo = r_max / 10.0;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut sign = 0.0f64;
        for (&r, &v) in nodes.iter().zip(&self.values) {
            if r < lo {
                continue;
            }
            if v == 0.0 {
                return None;
            }
            if sign == 0.0 {
                sign = v.signum();
            } else if v.signum() != sign {
                return None;
            }
            xs.push(r.ln());
            ys.push(v.abs().ln());
        }
        if xs.len() < 8 {
            return None;
        }
        let (slope, _intercept, r2) = crate::fit::linear_fit(&xs, &ys)?;
        Some((-slope, r2))
    }

    /// Discrete radial Laplacian u'' + (d-1)/r u', second order on
    /// smoothly graded grids; the origin uses the regular limit
    /// Delta u(0) = d u''(0).
    pub fn fd_laplacian(&self) -> Vec<f64> {
        let nodes = self.grid.nodes();
        let u = &self.values;
        let n = nodes.len();
        let d = self.grid.d() as f64;
        let mut out = vec![0.0; n];

        out[0] = 2.0 * d * (u[1] - u[0]) / (nodes[1] * nodes[1]);
        for i in 1..n - 1 {
            let hm = nodes[i] - nodes[i - 1];
            let hp = nodes[i + 1] - nodes[i];
            let upp = 2.0 * (u[i - 1] * hp + u[i + 1] * hm - u[i] * (hm + hp))
                / (hm * hp * (hm + hp));
            let up = (u[i + 1] * hm * hm - u[i - 1] * hp * hp
                + u[i] * (hp * hp - hm * hm))
                / (hm * hp * (hm + hp));
            out[i] = upp + (d - 1.0) / nodes[i] * up;
        }
        // one-sided copy at the outer boundary; callers treat it as padding
        out[n - 1] = out[n - 2];
        out
    }
}

/// inner_product as a free function, mirroring the method.
pub fn inner_product(f: &RadialField, g: &RadialField) -> Result<f64> {
    f.inner(g)
}

/// sigma-normalized shell moment int_a^b r^{d-1} dr, stable when b-a << a.
pub fn shell_moment(d: u32, a: f64, b: f64) -> f64 {
    let d = d as f64;
    if a == 0.0 {
        b.powf(d) / d
    } else {
        a.powf(d) * (d * (b / a).ln()).exp_m1() / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;

    fn grid(d: u32, r: f64, n: usize) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::graded(d, r, n).unwrap())
    }

    #[test]
    fn inner_product_is_bilinear_and_symmetric() {
        let g = grid(3, 10.0, 500);
        let f1 = RadialField::from_fn(g.clone(), |r| (-r).exp());
        let f2 = RadialField::from_fn(g.clone(), |r| 1.0 / (1.0 + r * r));
        let f3 = RadialField::from_fn(g.clone(), |r| r * (-r).exp());
        let a = 2.5;
        let lhs = {
            let combo = RadialField::new(
                g.clone(),
                f1.values()
                    .iter()
                    .zip(f3.values())
                    .map(|(x, y)| a * x + y)
                    .collect(),
            )
            .unwrap();
            combo.inner(&f2).unwrap()
        };
        let rhs = a * f1.inner(&f2).unwrap() + f3.inner(&f2).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
        assert_eq!(f1.inner(&f2).unwrap(), f2.inner(&f1).unwrap());
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let f = RadialField::from_fn(grid(3, 10.0, 500), |r| r);
        let g = RadialField::from_fn(grid(3, 10.0, 501), |r| r);
        assert!(f.inner(&g).is_err());
    }

    #[test]
    fn zero_field_norms_are_zero_and_not_divergent() {
        let f = RadialField::from_fn(grid(3, 10.0, 500), |_| 0.0);
        let rep = f.norms(&[4.0, 6.0]);
        assert_eq!(rep.l2, 0.0);
        assert_eq!(rep.h1dot, 0.0);
        assert!(!rep.l2_divergent);
        assert!(rep.lq.iter().all(|e| e.value == 0.0 && !e.divergent));
    }

    #[test]
    fn gaussian_norms_match_closed_forms() {
        // ||e^{-r^2/2}||_{L^2}^2 = int e^{-|x|^2} dx = pi^{3/2} in d=3,
        // ||grad e^{-r^2/2}||^2 = 4 pi int r^4 e^{-r^2} dr = 3 pi^{3/2} / 2.
        let g = Arc::new(RadialGrid::uniform(3, 12.0, 6000).unwrap());
        let f = RadialField::from_fn(g, |r| (-0.5 * r * r).exp());
        let pi32 = std::f64::consts::PI.powf(1.5);
        assert!(
            (f.norm_l2().powi(2) - pi32).abs() < 1e-8,
            "l2sq={} exact={pi32}",
            f.norm_l2().powi(2)
        );
        let h1_exact = (1.5 * pi32).sqrt();
        assert!(
            (f.norm_h1dot() - h1_exact).abs() / h1_exact < 1e-6,
            "h1dot={} exact={}",
            f.norm_h1dot(),
            h1_exact
        );
    }

    #[test]
    fn tail_fit_sees_power_law() {
        // Exact power law on the fit window (the value at r=0 is never
        // touched by the tail fit).
        let f = RadialField::from_fn(grid(3, 100.0, 2000), |r| {
            if r > 0.0 {
                1.0 / r
            } else {
                0.0
            }
        });
        let (k, r2) = f.tail_fit().unwrap();
        assert!((k - 1.0).abs() < 1e-10, "k={k}");
        assert!(r2 > 0.999999);
        let rep = f.norms(&[6.0]);
        assert!(rep.l2_divergent); // 2 * 1 <= 3
        assert!(!rep.lq[0].divergent); // 6 * 1 > 3

        // A rounded-off variant still lands near the true exponent.
        let g = RadialField::from_fn(grid(3, 100.0, 2000), |r| 1.0 / (1.0 + r));
        let (kg, _) = g.tail_fit().unwrap();
        assert!((kg - 1.0).abs() < 0.1, "kg={kg}");
    }

    #[test]
    fn divergence_flag_stable_under_domain_growth() {
        for r_max in [50.0, 100.0, 200.0, 400.0] {
            let f = RadialField::from_fn(grid(3, r_max, 2000), |r| 1.0 / (1.0 + r));
            let rep = f.norms(&[]);
            assert!(rep.l2_divergent, "r_max={r_max}");
        }
    }

    #[test]
    fn exponential_fields_are_never_flagged() {
        let f = RadialField::from_fn(grid(3, 60.0, 2000), |r| (-r).exp());
        let rep = f.norms(&[2.0]);
        assert!(!rep.l2_divergent);
        assert!(rep.tail_decay.unwrap() > 10.0);
    }

    #[test]
    fn fd_laplacian_on_gaussian() {
        // Delta e^{-r^2} = (4r^2 - 2d) e^{-r^2}
        let g = Arc::new(RadialGrid::uniform(3, 6.0, 3000).unwrap());
        let f = RadialField::from_fn(g.clone(), |r| (-r * r).exp());
        let lap = f.fd_laplacian();
        for (i, &r) in g.nodes().iter().enumerate().take(2500).skip(1) {
            let exact = (4.0 * r * r - 6.0) * (-r * r).exp();
            assert!(
                (lap[i] - exact).abs() < 5e-5,
                "r={r} lap={} exact={exact}",
                lap[i]
            );
        }
        // origin limit d * u''(0) = -2d
        assert!((lap[0] + 6.0).abs() < 1e-3);
    }
}
