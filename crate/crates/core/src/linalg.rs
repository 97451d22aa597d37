//! Dense and tridiagonal linear-algebra kernels.
//!
//! Everything here is deterministic and allocation-explicit: symmetric
//! tridiagonal eigenvalues by Sturm bisection, eigenvectors by shifted
//! inverse iteration, full symmetric eigendecompositions by Householder
//! reduction plus implicit QL, pivoted LU solvers (tridiagonal and
//! dense), and real nonsymmetric eigenvalues by balancing, elimination
//! to Hessenberg form and the double-shift QR sweep. The discretized
//! radial operators this crate builds are tridiagonal, so the dense
//! paths only ever see modest sizes (a few thousand at most) and the
//! structured paths carry the large grids.
//!
//! Matrices are row-major `a[i*n + j]`. Eigenvector matrices returned
//! by the symmetric solvers are column-contiguous: `vectors[k*n..(k+1)*n]`
//! is the k-th eigenvector.

use crate::error::{CoreError, Result};

/// Symmetric tridiagonal matrix: `diag[i]` on the diagonal, `off[i]`
/// coupling rows i and i+1 (`off.len() == diag.len() - 1`).
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(CoreError::InvalidParams(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal",
                diag.len(),
                off.len()
            )));
        }
        if !diag.iter().chain(off.iter()).all(|v| v.is_finite()) {
            return Err(CoreError::Numerical(
                "non-finite tridiagonal entry".into(),
            ));
        }
        Ok(SymTridiag { diag, off })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn eigenvalue_bounds(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut radius = 0.0;
            if i > 0 {
                radius += self.off[i - 1].abs();
            }
            if i + 1 < n {
                radius += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - radius);
            hi = hi.max(self.diag[i] + radius);
        }
        let pad = 1e-12 * (hi - lo).abs().max(lo.abs()).max(hi.abs()) + f64::MIN_POSITIVE;
        (lo - pad, hi + pad)
    }

    /// Number of eigenvalues strictly below `x` (Sturm/LDL^T count).
    pub fn count_below(&self, x: f64) -> usize {
        let n = self.n();
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut d = self.diag[0] - x;
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d < 0.0 {
            count += 1;
        }
        for i in 1..n {
            d = (self.diag[i] - x) - self.off[i - 1] * self.off[i - 1] / d;
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn pivmin(&self) -> f64 {
        let bmax = self
            .off
            .iter()
            .fold(0.0f64, |m, b| m.max(b.abs()))
            .max(1.0);
        (f64::MIN_POSITIVE * bmax * bmax).max(1e-300)
    }

    /// k-th eigenvalue in ascending order (k = 0 is the smallest), by
    /// bisection on the Sturm count. Converges to a relative width of
    /// a few ulps regardless of clustering.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        let n = self.n();
        if k >= n {
            return Err(CoreError::InvalidParams(format!(
                "eigenvalue index {k} out of range for size {n}"
            )));
        }
        let (mut lo, mut hi) = self.eigenvalue_bounds();
        for _ in 0..160 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= k + 1 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1e-300) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// The `k` smallest eigenvalues in ascending order.
    pub fn smallest(&self, k: usize) -> Result<Vec<f64>> {
        (0..k.min(self.n())).map(|i| self.eigenvalue(i)).collect()
    }

    /// All eigenvalues strictly below `x`, ascending.
    pub fn eigenvalues_below(&self, x: f64) -> Result<Vec<f64>> {
        let m = self.count_below(x);
        self.smallest(m)
    }

    /// Eigenvector for an eigenvalue estimate, by shifted inverse
    /// iteration with pivoted tridiagonal solves. `ortho` is a list of
    /// already-found vectors to project out each sweep (for clustered
    /// eigenvalues). Returns the unit vector and its residual
    /// `||T v - lambda v||_2`.
    pub fn eigenvector(&self, lambda: f64, ortho: &[&[f64]]) -> Result<(Vec<f64>, f64)> {
        let n = self.n();
        let scale = self
            .diag
            .iter()
            .chain(self.off.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        let pivfloor = f64::EPSILON * scale;

        let sub = self.off.clone();
        let sup = self.off.clone();
        let shifted: Vec<f64> = self.diag.iter().map(|d| d - lambda).collect();
        let mut lu = TridiagLu::factor(&sub, &shifted, &sup)?;
        for d in lu.d.iter_mut() {
            if d.abs() < pivfloor {
                *d = if *d < 0.0 { -pivfloor } else { pivfloor };
            }
        }

        let mut rng = 0x9e3779b97f4a7c15u64 ^ (n as u64).wrapping_mul(0xd1342543de82ef95);
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                rng = splitmix64(rng);
                (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        normalize(&mut v);

        let mut work = vec![0.0; n];
        let mut best_res = f64::INFINITY;
        let mut best = v.clone();
        for _ in 0..8 {
            lu.solve(&mut v);
            for o in ortho {
                let c = dot(&v, o);
                for (vi, oi) in v.iter_mut().zip(o.iter()) {
                    *vi -= c * oi;
                }
            }
            let nrm = norm2(&v);
            if !(nrm > 0.0) || !nrm.is_finite() {
                return Err(CoreError::Numerical(
                    "inverse iteration collapsed to zero".into(),
                ));
            }
            for vi in v.iter_mut() {
                *vi /= nrm;
            }
            self.matvec(&v, &mut work);
            let res = v
                .iter()
                .zip(work.iter())
                .map(|(vi, ti)| (ti - lambda * vi) * (ti - lambda * vi))
                .sum::<f64>()
                .sqrt();
            if res < best_res {
                best_res = res;
                best.copy_from_slice(&v);
            }
            if res <= 64.0 * f64::EPSILON * scale {
                break;
            }
        }
        Ok((best, best_res))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

/// Pivoted LU of a general tridiagonal matrix (partial pivoting with
/// one row interchange per step; fill-in confined to a second
/// superdiagonal).
pub struct TridiagLu {
    n: usize,
    dl: Vec<f64>,
    pub d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swap: Vec<bool>,
    pub singular: bool,
}

impl TridiagLu {
    /// `sub[i]` couples row i+1 to column i, `diag`, `sup[i]` couples
    /// row i to column i+1.
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<TridiagLu> {
        let n = diag.len();
        if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n {
            return Err(CoreError::InvalidParams(
                "tridiagonal factor shape mismatch".into(),
            ));
        }
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swap = vec![false; n.saturating_sub(1)];
        let mut singular = false;

        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                } else if dl[i] == 0.0 {
                    singular = true;
                    dl[i] = 0.0;
                } else {
                    // d[i] == 0, |dl| <= |d| forces dl == 0; unreachable
                    dl[i] = 0.0;
                }
            } else {
                swap[i] = true;
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
            }
        }
        if d[n - 1] == 0.0 {
            singular = true;
        }
        Ok(TridiagLu {
            n,
            dl,
            d,
            du,
            du2,
            swap,
            singular,
        })
    }

    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for i in 0..n - 1 {
            if self.swap[i] {
                let tmp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = tmp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Full eigendecomposition of a symmetric matrix. Eigenvalues ascend;
/// `vectors[k*n..(k+1)*n]` is the (unit) eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub n: usize,
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl SymEigen {
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }
}

/// Householder reduction of a dense symmetric matrix to tridiagonal
/// form with accumulated transforms. On return `a` holds the
/// orthogonal matrix Q (row-major), `d` the diagonal, `e[i]` the
/// coupling of rows i-1 and i (`e[0]` unused).
fn tred2(n: usize, a: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let idx = |i: usize, j: usize| i * n + j;
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        let mut scale = 0.0;
        if l > 0 {
            for k in 0..=l {
                scale += a[idx(i, k)].abs();
            }
            if scale == 0.0 {
                e[i] = a[idx(i, l)];
            } else {
                for k in 0..=l {
                    a[idx(i, k)] /= scale;
                    h += a[idx(i, k)] * a[idx(i, k)];
                }
                let f = a[idx(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[idx(i, l)] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    a[idx(j, i)] = a[idx(i, j)] / h;
                    let mut g_acc = 0.0;
                    for k in 0..=j {
                        g_acc += a[idx(j, k)] * a[idx(i, k)];
                    }
                    for k in j + 1..=l {
                        g_acc += a[idx(k, j)] * a[idx(i, k)];
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * a[idx(i, j)];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = a[idx(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[idx(j, k)] -= f * e[k] + g * a[idx(i, k)];
                    }
                }
            }
        } else {
            e[i] = a[idx(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += a[idx(i, k)] * a[idx(k, j)];
                }
                for k in 0..i {
                    a[idx(k, j)] -= g * a[idx(k, i)];
                }
            }
        }
        d[i] = a[idx(i, i)];
        a[idx(i, i)] = 1.0;
        for j in 0..i {
            a[idx(j, i)] = 0.0;
            a[idx(i, j)] = 0.0;
        }
    }
}

/// Implicit-shift QL on a symmetric tridiagonal matrix with transform
/// accumulation. `d` holds the diagonal, `e[i]` couples i and i+1
/// (`e[n-1]` is workspace). `z` (row-major, n x n) should enter as the
/// identity (tridiagonal input) or as the `tred2` basis; its columns
/// leave as eigenvectors.
fn tql2(n: usize, d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<()> {
    if n == 1 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    // matrix-scale anchor for the stalled-deflation escape below
    let mut anorm = 0.0f64;
    for i in 0..n {
        anorm = anorm.max(d[i].abs() + e[i].abs() + if i > 0 { e[i - 1].abs() } else { 0.0 });
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            // The strict test compares each coupling against its local
            // diagonal pair, which preserves relative accuracy of small
            // eigenvalues. When tiny diagonal entries coexist with a
            // large matrix norm, rotations keep the coupling at
            // eps * anorm noise and the strict test never passes, so a
            // stalled sweep falls back to the norm-anchored threshold
            // (a backward-stable eps * ||A|| perturbation).
            let lax = iter >= 20;
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                let tol = f64::EPSILON * if lax { dd.max(anorm) } else { dd };
                if e[m].abs() <= tol {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(CoreError::Numerical(
                    "QL sweep failed to converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let sign_r = if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let f = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * f;
                    z[k * n + i] = c * z[k * n + i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

fn finish_eigen(n: usize, d: Vec<f64>, z: Vec<f64>) -> SymEigen {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let mut values = Vec::with_capacity(n);
    let mut vectors = vec![0.0; n * n];
    for (k, &src) in order.iter().enumerate() {
        values.push(d[src]);
        for i in 0..n {
            vectors[k * n + i] = z[i * n + src];
        }
    }
    SymEigen {
        n,
        values,
        vectors,
    }
}

/// Eigendecomposition of a dense symmetric matrix (row-major, only the
/// full square is read). O(n^3).
pub fn sym_eigen_dense(n: usize, a: &[f64]) -> Result<SymEigen> {
    if a.len() != n * n || n == 0 {
        return Err(CoreError::InvalidParams(
            "symmetric eigensolver shape mismatch".into(),
        ));
    }
    let mut z = a.to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut z, &mut d, &mut e);
    // shift e to couple (i, i+1)
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    tql2(n, &mut d, &mut e, &mut z)?;
    Ok(finish_eigen(n, d, z))
}

/// Eigendecomposition of a symmetric tridiagonal matrix with
/// accumulated eigenvectors. O(n^3) because of the accumulation; use
/// the Sturm/bisection path when only a few eigenpairs are needed.
pub fn sym_eigen_tridiag(t: &SymTridiag) -> Result<SymEigen> {
    let n = t.n();
    let mut d = t.diag.clone();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&t.off);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql2(n, &mut d, &mut e, &mut z)?;
    Ok(finish_eigen(n, d, z))
}

/// Dense LU with partial pivoting.
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn factor(n: usize, a: &[f64]) -> Result<DenseLu> {
        if a.len() != n * n || n == 0 {
            return Err(CoreError::InvalidParams("LU shape mismatch".into()));
        }
        let mut lu = a.to_vec();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut pmax = lu[k * n + k].abs();
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax == 0.0 {
                return Err(CoreError::Numerical(format!(
                    "singular matrix in LU at column {k}"
                )));
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let m = lu[i * n + k] / pivot;
                lu[i * n + k] = m;
                for j in k + 1..n {
                    lu[i * n + j] -= m * lu[k * n + j];
                }
            }
        }
        Ok(DenseLu { n, lu, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        x
    }
}

pub fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let row = &b[k * n..(k + 1) * n];
            let out = &mut c[i * n..(i + 1) * n];
            for (o, &bj) in out.iter_mut().zip(row) {
                *o += aik * bj;
            }
        }
    }
    c
}

pub fn matvec(n: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
    (0..n).map(|i| dot(&a[i * n..(i + 1) * n], x)).collect()
}

/// Restriction of a dense symmetric matrix to the orthogonal
/// complement of `phi`: apply the Householder reflection H that sends
/// phi to a multiple of e_0 on both sides and drop row/column 0. The
/// returned matrix is (n-1) x (n-1); `lift` maps complement
/// coordinates back to the full space.
pub struct ComplementRestriction {
    n: usize,
    w: Vec<f64>,
}

impl ComplementRestriction {
    pub fn new(phi: &[f64]) -> Result<ComplementRestriction> {
        let n = phi.len();
        let nrm = norm2(phi);
        if !(nrm > 0.0) {
            return Err(CoreError::InvalidParams(
                "cannot deflate the zero vector".into(),
            ));
        }
        let mut w = phi.to_vec();
        for x in w.iter_mut() {
            *x /= nrm;
        }
        // H = I - 2 w w^T with w built so H phi = +-|phi| e0
        w[0] += if w[0] >= 0.0 { 1.0 } else { -1.0 };
        normalize(&mut w);
        Ok(ComplementRestriction { n, w })
    }

    /// H s H with row/column 0 removed. O(n^2).
    pub fn restrict(&self, s: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if s.len() != n * n {
            return Err(CoreError::InvalidParams(
                "complement restriction shape mismatch".into(),
            ));
        }
        let y = matvec(n, s, &self.w);
        let alpha = dot(&self.w, &y);
        // HSH = S - 2 w y^T - 2 y w^T + 4 alpha w w^T
        let mut out = vec![0.0; (n - 1) * (n - 1)];
        for i in 1..n {
            for j in 1..n {
                out[(i - 1) * (n - 1) + (j - 1)] = s[i * n + j] - 2.0 * self.w[i] * y[j]
                    - 2.0 * y[i] * self.w[j]
                    + 4.0 * alpha * self.w[i] * self.w[j];
            }
        }
        Ok(out)
    }

    /// Lift complement coordinates (length n-1) back to the full space.
    pub fn lift(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut full = vec![0.0; n];
        full[1..].copy_from_slice(u);
        let c = dot(&self.w, &full);
        for (f, w) in full.iter_mut().zip(&self.w) {
            *f -= 2.0 * c * w;
        }
        full
    }
}

/// Eigenvalues of a general real matrix by balancing, reduction to
/// upper Hessenberg form, and the double-shift QR sweep. Returns
/// (re, im) pairs in no particular order; complex eigenvalues come in
/// conjugate pairs.
pub fn eigenvalues_dense(n: usize, a: &[f64]) -> Result<Vec<(f64, f64)>> {
    if a.len() != n * n || n == 0 {
        return Err(CoreError::InvalidParams(
            "eigenvalue solver shape mismatch".into(),
        ));
    }
    let mut m = a.to_vec();
    balance(n, &mut m);
    hessenberg(n, &mut m);
    hqr(n, &mut m)
}

/// In-place diagonal balancing (radix-2 norm equalization). Similarity
/// transform, so eigenvalues are unchanged.
fn balance(n: usize, a: &mut [f64]) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j * n + i].abs();
                    r += a[i * n + j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut f = 1.0;
                let s = c + r;
                let mut c_scaled = c;
                while c_scaled < r / RADIX {
                    f *= RADIX;
                    c_scaled *= sqrdx;
                }
                while c_scaled > r * RADIX {
                    f /= RADIX;
                    c_scaled /= sqrdx;
                }
                if (c_scaled + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[i * n + j] *= g;
                    }
                    for j in 0..n {
                        a[j * n + i] *= f;
                    }
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Reduction to upper Hessenberg form by pivoted Gaussian similarity
/// transforms; the junk below the subdiagonal is zeroed on exit.
fn hessenberg(n: usize, a: &mut [f64]) {
    let idx = |i: usize, j: usize| i * n + j;
    for m in 1..n.saturating_sub(1) {
        let mut x = 0.0f64;
        let mut ipiv = m;
        for j in m..n {
            if a[idx(j, m - 1)].abs() > x.abs() {
                x = a[idx(j, m - 1)];
                ipiv = j;
            }
        }
        if ipiv != m {
            for j in m - 1..n {
                a.swap(idx(ipiv, j), idx(m, j));
            }
            for j in 0..n {
                a.swap(idx(j, ipiv), idx(j, m));
            }
        }
        if x != 0.0 {
            for i in m + 1..n {
                let mut y = a[idx(i, m - 1)];
                if y != 0.0 {
                    y /= x;
                    a[idx(i, m - 1)] = y;
                    for j in m..n {
                        let sub = y * a[idx(m, j)];
                        a[idx(i, j)] -= sub;
                    }
                    for j in 0..n {
                        let add = y * a[idx(j, i)];
                        a[idx(j, m)] += add;
                    }
                }
            }
        }
    }
    for i in 2..n {
        for j in 0..i - 1 {
            a[idx(i, j)] = 0.0;
        }
    }
}

/// Double-shift QR eigenvalues of an upper Hessenberg matrix
/// (in-place, destroys `a`).
fn hqr(n: usize, a: &mut [f64]) -> Result<Vec<(f64, f64)>> {
    let idx = |i: usize, j: usize| i * n + j;
    let mut eig: Vec<(f64, f64)> = Vec::with_capacity(n);

    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[idx(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(vec![(0.0, 0.0); n]);
    }

    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        let mut l;
        loop {
            // look for a negligible subdiagonal element; a stalled
            // sweep relaxes the local test to the norm anchor (same
            // rationale as in tql2)
            let lax = its >= 20;
            l = nn;
            while l >= 1 {
                let s_loc =
                    a[idx((l - 1) as usize, (l - 1) as usize)].abs() + a[idx(l as usize, l as usize)].abs();
                let s_loc = if s_loc == 0.0 || lax { s_loc.max(anorm) } else { s_loc };
                if a[idx(l as usize, (l - 1) as usize)].abs() <= f64::EPSILON * s_loc {
                    a[idx(l as usize, (l - 1) as usize)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let x = a[idx(nn as usize, nn as usize)];
            if l == nn {
                eig.push((x + t, 0.0));
                nn -= 1;
                break;
            }
            let y = a[idx((nn - 1) as usize, (nn - 1) as usize)];
            let w = a[idx(nn as usize, (nn - 1) as usize)] * a[idx((nn - 1) as usize, nn as usize)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x_shift = x + t;
                if q >= 0.0 {
                    let z = p + if p >= 0.0 { z } else { -z };
                    let first = x_shift + z;
                    eig.push((first, 0.0));
                    eig.push((if z != 0.0 { x_shift - w / z } else { first }, 0.0));
                } else {
                    eig.push((x_shift + p, z));
                    eig.push((x_shift + p, -z));
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return Err(CoreError::Numerical(format!(
                    "QR eigenvalue sweep failed to converge (block {l}..{nn}, \
                     trailing subdiagonals {:e}, {:e}, norm {anorm:e})",
                    a[idx(nn as usize, (nn - 1) as usize)].abs(),
                    a[idx((nn - 1) as usize, (nn - 2) as usize)].abs(),
                )));
            }
            let (mut x, mut y, mut w) = (x, y, w);
            // exceptional shift every tenth sweep breaks the shift
            // cycling that plain Francis steps fall into on spectra
            // symmetric under negation (λ → −λ pairs)
            if its > 0 && its % 10 == 0 {
                t += x;
                for i in 0..=nn as usize {
                    a[idx(i, i)] -= x;
                }
                let s_exc = a[idx(nn as usize, (nn - 1) as usize)].abs()
                    + a[idx((nn - 1) as usize, (nn - 2) as usize)].abs();
                x = 0.75 * s_exc;
                y = x;
                w = -0.4375 * s_exc * s_exc;
            }
            its += 1;
            // two consecutive small subdiagonals?
            let mut m = nn - 2;
            let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
            while m >= l {
                let z = a[idx(m as usize, m as usize)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[idx((m + 1) as usize, m as usize)]
                    + a[idx(m as usize, (m + 1) as usize)];
                q = a[idx((m + 1) as usize, (m + 1) as usize)] - z - rr - ss;
                r = a[idx((m + 2) as usize, (m + 1) as usize)];
                let s_norm = p.abs() + q.abs() + r.abs();
                p /= s_norm;
                q /= s_norm;
                r /= s_norm;
                if m == l {
                    break;
                }
                let u = a[idx(m as usize, (m - 1) as usize)].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (a[idx((m - 1) as usize, (m - 1) as usize)].abs()
                        + z.abs()
                        + a[idx((m + 1) as usize, (m + 1) as usize)].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[idx(i as usize, (i - 2) as usize)] = 0.0;
                if i != m + 2 {
                    a[idx(i as usize, (i - 3) as usize)] = 0.0;
                }
            }
            // double QR step on rows l..nn, columns l..nn
            for k in m..nn {
                if k != m {
                    p = a[idx(k as usize, (k - 1) as usize)];
                    q = a[idx((k + 1) as usize, (k - 1) as usize)];
                    r = if k != nn - 1 {
                        a[idx((k + 2) as usize, (k - 1) as usize)]
                    } else {
                        0.0
                    };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s_house = {
                    let mag = (p * p + q * q + r * r).sqrt();
                    if p >= 0.0 {
                        mag
                    } else {
                        -mag
                    }
                };
                if s_house != 0.0 {
                    if k == m {
                        if l != m {
                            let v = a[idx(k as usize, (k - 1) as usize)];
                            a[idx(k as usize, (k - 1) as usize)] = -v;
                        }
                    } else {
                        a[idx(k as usize, (k - 1) as usize)] = -s_house * x;
                    }
                    p += s_house;
                    x = p / s_house;
                    y = q / s_house;
                    let z = r / s_house;
                    q /= p;
                    r /= p;
                    for j in (k as usize)..=(nn as usize) {
                        let mut pp = a[idx(k as usize, j)] + q * a[idx((k + 1) as usize, j)];
                        if k != nn - 1 {
                            pp += r * a[idx((k + 2) as usize, j)];
                            a[idx((k + 2) as usize, j)] -= pp * z;
                        }
                        a[idx((k + 1) as usize, j)] -= pp * y;
                        a[idx(k as usize, j)] -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in (l as usize)..=(mmin as usize) {
                        let mut pp = x * a[idx(i, k as usize)] + y * a[idx(i, (k + 1) as usize)];
                        if k != nn - 1 {
                            pp += z * a[idx(i, (k + 2) as usize)];
                            a[idx(i, (k + 2) as usize)] -= pp * r;
                        }
                        a[idx(i, (k + 1) as usize)] -= pp * q;
                        a[idx(i, k as usize)] -= pp;
                    }
                }
            }
        }
    }
    Ok(eig)
}
