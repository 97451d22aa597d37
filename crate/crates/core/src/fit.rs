//! Small least-squares and quadrature helpers shared across modules.

/// Ordinary least squares y = a x + b. Returns (slope, intercept, R^2),
/// or None for degenerate inputs.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, intercept, r2))
}

/// Log-log power-law fit y = c x^k over positive samples.
/// Returns (k, c, R^2).
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    if xs.iter().any(|v| !(*v > 0.0)) || ys.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let (slope, intercept, r2) = linear_fit(&lx, &ly)?;
    Some((slope, intercept.exp(), r2))
}

/// Adaptive Simpson quadrature with absolute tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let err = left + right - whole;
        if depth == 0 || err.abs() <= 15.0 * tol {
            left + right + err / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 48)
}

/// int_R^inf f(r) dr by the substitution r = R/t, for integrands that
/// decay faster than r^{-2}.
pub fn tail_integral(f: &dyn Fn(f64) -> f64, r_from: f64, tol: f64) -> f64 {
    let g = move |t: f64| {
        if t <= 0.0 {
            0.0
        } else {
            let r = r_from / t;
            f(r) * r_from / (t * t)
        }
    };
    adaptive_simpson(&g, 0.0, 1.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 7.0).collect();
        let (a, b, r2) = linear_fit(&xs, &ys).unwrap();
        assert!((a - 3.0).abs() < 1e-12);
        assert!((b + 7.0).abs() < 1e-11);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn tail_integral_of_power_law() {
        // int_2^inf r^{-3} dr = 1/8
        let v = tail_integral(&|r: f64| r.powi(-3), 2.0, 1e-13);
        assert!((v - 0.125).abs() < 1e-10);
    }
}
