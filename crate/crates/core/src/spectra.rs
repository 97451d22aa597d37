//! Spectral analysis of the linearized operators: eigenpairs, the
//! nondegeneracy gap, the unstable eigenvalue of the linearized flow,
//! a cutoff-witness certificate for its sign, and the
//! negative-index/positive-real-eigenvalue count comparison.
//!
//! Grid policy. Everything here runs on geometric grids that resolve
//! the profile core (inner scale M^{-2/(d-2)} for the combined
//! family, ω^{-1/2} for a single-power control). Four builders with
//! different first-step floors serve different accuracy regimes:
//!
//! * [`kernel_grid`] — eigenvalue work near zero. Bisection on the
//!   assembled tridiagonal resolves eigenvalues to roundoff of the
//!   matrix scale, which is dominated by 1/h₀²; a first step of
//!   0.2 × core keeps that floor orders of magnitude below the
//!   near-zero windows being certified, while the dense tail of the
//!   grid still controls the O(δ²) consistency error elsewhere.
//! * [`counting_grid`] — negative-direction counting and the spectral
//!   gap. A first step that coarse would be fatal here: the few-percent
//!   potential misrepresentation it causes in the first cells couples
//!   to the marginal scaling direction of the critical bubble (a
//!   zero-energy resonance) and binds a spurious eigenstate at a
//!   shallow negative energy. The spurious level scales like h₀⁴ and
//!   drops below the classification tolerance once h₀ = 0.02 × core;
//!   an independent oscillation count (zeros of the outward-integrated
//!   zero-energy solution) confirms the count on the continuum side.
//! * [`form_grid`] — quadratic-form identities. The lumped-mass
//!   potential sums lose O((h₀/core)³) of the core mass near the
//!   origin, so this builder pushes the first step down to
//!   0.01 × core where that error sits at 1e-8 of the total.
//! * [`dense_grid`] — everything that needs full eigendecompositions
//!   or the 2n×2n block solve. Sized so dense linear algebra stays in
//!   the hundreds of rows and the matrix scale stays small enough
//!   that the positive-semidefiniteness clamp on L̃₋ operates at
//!   rounding level.
//!
//! For the combined family all counting and near-zero certification
//! happens in rescaled variables (where the matrix scale is tame) and
//! eigenvalues are mapped back through the exact factor M^{4/(d-2)};
//! the single-power control, which has no bubble scale, runs in
//! original variables throughout.

use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::field::RadialField;
use crate::grid::RadialGrid;
use crate::linalg::{
    dot, eigenvalues_dense, matmul, norm2, sym_eigen_dense, sym_eigen_tridiag,
    ComplementRestriction,
};
use crate::operator::{assemble, OperatorKind, OperatorSource, RadialOperator};
use crate::rescale::{rescale, RescaledProfile};
use crate::shoot::GroundStateSolution;
use serde::{Deserialize, Serialize};

/// Resolution (relative step ratio minus one) of the fine spectral
/// grids.
pub const FINE_DELTA: f64 = 4e-4;
/// Resolution of the grids used for dense eigendecompositions.
pub const DENSE_DELTA: f64 = 1.8e-2;
/// First-step floor of [`kernel_grid`], in units of the core scale.
pub const KERNEL_FIRST_STEP: f64 = 0.2;
/// First-step floor of [`counting_grid`], in units of the core scale.
pub const COUNTING_FIRST_STEP: f64 = 2e-2;
/// First-step floor of [`form_grid`], in units of the core scale.
pub const FORM_FIRST_STEP: f64 = 1e-2;
/// First-step floor of [`dense_grid`], in units of the core scale.
pub const DENSE_FIRST_STEP: f64 = 2e-2;
/// L̃₋ eigenvalues in [-PSD_CLAMP, 0] are clamped to zero when taking
/// the operator square root; anything lower is reported as a
/// discretization anomaly.
pub const PSD_CLAMP: f64 = 1e-10;
/// Truncation radius (in core units) of the rescaled grids feeding the
/// 2m×2m block eigenproblem. Double-shift QR applies shifts through
/// the squared matrix, so eigenvalues below √ε·‖B‖ are invisible to
/// the shift and never converge. Cutting the domain here lifts the
/// essential-branch cluster to (π/BLOCK_DOMAIN)² ≈ 4.8e-4, an order
/// of magnitude above that floor, while the modes the instability
/// checks care about stay core-localized and untouched.
pub const BLOCK_DOMAIN: f64 = 144.0;

/// Inner length scale of a ground state: the radius on which the
/// profile turns over at the origin.
pub fn core_scale(gs: &GroundStateSolution) -> f64 {
    if gs.params.critical_on {
        gs.m.powf(-2.0 / (gs.params.d as f64 - 2.0))
    } else {
        gs.params.omega.sqrt().recip()
    }
}

pub(crate) fn geometric_grid(d: u32, r_max: f64, h0: f64, delta: f64) -> Result<Arc<RadialGrid>> {
    let steps = ((1.0 + r_max * delta / h0).ln() / (1.0 + delta).ln()).ceil() as usize;
    let n = (steps + 1).max(24);
    Ok(Arc::new(RadialGrid::geometric(d, r_max, n, h0.min(r_max / n as f64))?))
}

/// Grid for near-zero eigenvalue certification (see module docs).
pub fn kernel_grid(d: u32, r_max: f64, core: f64) -> Result<Arc<RadialGrid>> {
    geometric_grid(d, r_max, KERNEL_FIRST_STEP * core, FINE_DELTA)
}

/// Grid for negative-direction counting and the gap (see module docs).
pub fn counting_grid(d: u32, r_max: f64, core: f64) -> Result<Arc<RadialGrid>> {
    geometric_grid(d, r_max, COUNTING_FIRST_STEP * core, FINE_DELTA)
}

/// Grid for quadratic-form identities (see module docs).
pub fn form_grid(d: u32, r_max: f64, core: f64) -> Result<Arc<RadialGrid>> {
    geometric_grid(d, r_max, FORM_FIRST_STEP * core, FINE_DELTA)
}

/// Grid for dense eigendecompositions (see module docs).
pub fn dense_grid(d: u32, r_max: f64, core: f64) -> Result<Arc<RadialGrid>> {
    geometric_grid(d, r_max, DENSE_FIRST_STEP * core, DENSE_DELTA)
}

/// The k lowest eigenpairs of an assembled operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Matching eigenfields, unit-normalized in the operator's lumped
    /// L² inner product.
    pub eigenfields: Vec<RadialField>,
    /// Eigenpair residuals ‖Av − λv‖ relative to the matrix scale.
    pub residuals: Vec<f64>,
    /// Number of eigenvalues of the full matrix below −zero_tol.
    pub neg_count: usize,
    /// Computed eigenvalues within zero_tol of zero.
    pub near_zero: Vec<f64>,
    /// The scale-aware classification threshold used.
    pub zero_tol: f64,
}

/// Compute the `k` lowest eigenpairs of `op` by Sturm bisection and
/// inverse iteration.
pub fn eigs(op: &RadialOperator, k: usize) -> Result<SpectrumReport> {
    if k == 0 {
        return Err(CoreError::InvalidParams(
            "requested zero eigenpairs".into(),
        ));
    }
    let t = op.matrix();
    let k = k.min(t.n());
    let (lo, hi) = t.eigenvalue_bounds();
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let sigma_half = op.sigma().sqrt();

    let mut eigenvalues = Vec::with_capacity(k);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for j in 0..k {
        let lam = t.eigenvalue(j)?;
        let ortho: Vec<&[f64]> = vectors.iter().map(|v| v.as_slice()).collect();
        let (v, res) = t.eigenvector(lam, &ortho)?;
        eigenvalues.push(lam);
        residuals.push(res / scale);
        vectors.push(v);
    }

    let zero_tol = op.zero_tol();
    let neg_count = t.count_below(-zero_tol);
    let near_zero = eigenvalues
        .iter()
        .copied()
        .filter(|l| l.abs() <= zero_tol)
        .collect();
    let eigenfields = vectors
        .iter()
        .map(|v| {
            let scaled: Vec<f64> = v.iter().map(|x| x / sigma_half).collect();
            op.to_field(&scaled)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SpectrumReport {
        eigenvalues,
        eigenfields,
        residuals,
        neg_count,
        near_zero,
        zero_tol,
    })
}

/// Nondegeneracy gap of the radial L₊ about a ground state, with a
/// one-step grid-refinement stability measurement. All values in
/// original variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapReport {
    /// Smallest positive eigenvalue on the base grid.
    pub gap: f64,
    /// Same quantity after halving the grid resolution.
    pub gap_refined: f64,
    /// |gap_refined − gap| / gap.
    pub rel_change: f64,
    /// The unique negative eigenvalue.
    pub negative_eigenvalue: f64,
}

/// L₊ counting data on one grid: (negative count, λ₀, λ₁), already
/// mapped to original variables.
fn plus_low_spectrum(
    gs: &GroundStateSolution,
    rp: Option<&RescaledProfile>,
    h0: f64,
    delta: f64,
) -> Result<(usize, f64, f64)> {
    let (plus, scale) = match rp {
        Some(rp) => {
            let grid = geometric_grid(rp.source_params.d, rp.r_max, h0, delta)?;
            let op = assemble(OperatorKind::RescaledPlus, OperatorSource::Rescaled(rp), &grid)?;
            let d = rp.source_params.d as f64;
            (op, rp.m.powf(4.0 / (d - 2.0)))
        }
        None => {
            let grid = geometric_grid(gs.params.d, gs.r_max, h0, delta)?;
            let op = assemble(OperatorKind::Plus, OperatorSource::Ground(gs), &grid)?;
            (op, 1.0)
        }
    };
    let t = plus.matrix();
    let negs = t.count_below(-plus.zero_tol());
    Ok((negs, scale * t.eigenvalue(0)?, scale * t.eigenvalue(1)?))
}

/// Smallest |λ| of the radial L₊ spectrum excluding its unique
/// negative eigenvalue, on a truncated domain. Errors if the negative
/// count is not exactly one.
pub fn nondegeneracy_gap(gs: &GroundStateSolution) -> Result<GapReport> {
    let rp = if gs.params.critical_on {
        Some(rescale(gs))
    } else {
        None
    };
    let core = if rp.is_some() { 1.0 } else { core_scale(gs) };
    let h0 = COUNTING_FIRST_STEP * core;

    let (negs, negative_eigenvalue, gap) = plus_low_spectrum(gs, rp.as_ref(), h0, FINE_DELTA)?;
    if negs != 1 {
        return Err(CoreError::SpectralAnomaly(format!(
            "expected exactly one negative radial eigenvalue, found {negs}"
        )));
    }
    let (_, _, gap_refined) = plus_low_spectrum(gs, rp.as_ref(), 0.5 * h0, 0.5 * FINE_DELTA)?;
    if !(gap > 0.0) {
        return Err(CoreError::SpectralAnomaly(format!(
            "nonpositive spectral gap {gap}"
        )));
    }
    Ok(GapReport {
        gap,
        gap_refined,
        rel_change: (gap_refined - gap).abs() / gap,
        negative_eigenvalue,
    })
}

/// Combined spectral certificate about one ground state: the kernel
/// mode of L₋, the negative-direction count and gap of L₊, and the
/// quadratic-form identity ⟨L₊Φ,Φ⟩ against its closed form. All
/// eigenvalues in original variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundSpectrumReport {
    /// Lowest eigenvalue of L₋ (should vanish on the kernel).
    pub minus_lowest: f64,
    /// Cosine similarity between the lowest L₋ eigenfield and Φ.
    pub kernel_cosine: f64,
    /// Eigenpair residuals of the two lowest L₋ modes (relative).
    pub minus_residuals: Vec<f64>,
    /// Number of negative eigenvalues of L₊.
    pub plus_neg_count: usize,
    /// The unique negative eigenvalue of L₊.
    pub plus_negative: f64,
    /// Gap data with refinement stability.
    pub gap: GapReport,
    /// ⟨L₊Φ,Φ⟩ from the assembled operator.
    pub form_value: f64,
    /// −(p−1)ε‖Φ‖^{p+1}_{p+1} − (2*−2)‖Φ‖^{2*}_{2*} from quadrature.
    pub form_closed: f64,
    /// |form_value − form_closed| / |form_closed|.
    pub form_rel_error: f64,
}

/// Run the full spectral certificate for one ground state.
pub fn ground_state_spectrum(gs: &GroundStateSolution) -> Result<GroundSpectrumReport> {
    let rp = if gs.params.critical_on {
        Some(rescale(gs))
    } else {
        None
    };
    let d = gs.params.d as f64;
    let eig_scale = match &rp {
        Some(rp) => rp.m.powf(4.0 / (d - 2.0)),
        None => 1.0,
    };

    // kernel mode of L₋ on the kernel grid
    let (minus, profile) = match &rp {
        Some(rp) => {
            let grid = kernel_grid(gs.params.d, rp.r_max, 1.0)?;
            let op = assemble(OperatorKind::RescaledMinus, OperatorSource::Rescaled(rp), &grid)?;
            let phi = rp.sample(&grid)?;
            (op, phi)
        }
        None => {
            let grid = kernel_grid(gs.params.d, gs.r_max, core_scale(gs))?;
            let op = assemble(OperatorKind::Minus, OperatorSource::Ground(gs), &grid)?;
            let phi = gs.sample(op.grid())?;
            (op, phi)
        }
    };
    let minus_report = eigs(&minus, 2)?;
    let minus_lowest = eig_scale * minus_report.eigenvalues[0];
    let x_phi = minus.to_vector(&profile)?;
    let x_eig = minus.to_vector(&minus_report.eigenfields[0])?;
    let kernel_cosine = dot(&x_phi, &x_eig).abs() / (norm2(&x_phi) * norm2(&x_eig));

    // negative count and gap of L₊ on the counting grid
    let core = if rp.is_some() { 1.0 } else { core_scale(gs) };
    let (plus_neg_count, plus_negative, _) =
        plus_low_spectrum(gs, rp.as_ref(), COUNTING_FIRST_STEP * core, FINE_DELTA)?;
    let gap = nondegeneracy_gap(gs)?;

    // quadratic-form identity on the form grid, original variables
    let fgrid = form_grid(gs.params.d, gs.r_max, core_scale(gs))?;
    let plus = assemble(OperatorKind::Plus, OperatorSource::Ground(gs), &fgrid)?;
    let phi = gs.sample(&fgrid)?;
    let form_value = plus.quadratic_form(&phi)?;
    let p = gs.params.p;
    let ts = gs.params.two_star();
    let mut form_closed =
        -(p - 1.0) * gs.params.epsilon * phi.norm_lq(p + 1.0).powf(p + 1.0);
    if gs.params.critical_on {
        form_closed -= (ts - 2.0) * phi.norm_lq(ts).powf(ts);
    }
    let form_rel_error = (form_value - form_closed).abs() / form_closed.abs();

    Ok(GroundSpectrumReport {
        minus_lowest,
        kernel_cosine,
        minus_residuals: minus_report.residuals,
        plus_neg_count,
        plus_negative,
        gap,
        form_value,
        form_closed,
        form_rel_error,
    })
}

/// Outcome of the symmetrized-operator instability computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstabilityReport {
    /// Lowest eigenvalue of L̃₋^{1/2} L̃₊ L̃₋^{1/2} on the subspace
    /// orthogonal to the profile (rescaled variables).
    pub nu: f64,
    /// √(−ν) when ν < 0: the growth rate of the linearized flow.
    pub mu: Option<f64>,
    /// Minimizer of the symmetrized quadratic form.
    pub f_min: RadialField,
    /// Real part of the constructed eigenfunction of the block flow.
    pub g_re: RadialField,
    /// Imaginary part of the constructed eigenfunction.
    pub g_im: RadialField,
    /// Eigenvalues of the 2n×2n block matrix [[0, L₋], [−L₊, 0]].
    pub block_eigs: Vec<(f64, f64)>,
    /// Relative gap between mu and the block matrix's largest positive
    /// real eigenvalue (absent when ν ≥ 0).
    pub cross_error: Option<f64>,
    /// Worst failure of block-spectrum symmetry under negation,
    /// relative to 1 + |λ|.
    pub negation_defect: f64,
    /// Smallest excess of a random admissible Rayleigh quotient over
    /// ν (nonnegative when ν really is the constrained minimum).
    pub floor_margin: f64,
    /// Multiply rescaled eigenvalues by this to land in original
    /// variables (M^{4/(d−2)}).
    pub eig_scale: f64,
}

struct DensePair {
    grid: Arc<RadialGrid>,
    plus: RadialOperator,
    minus: RadialOperator,
    /// Unit profile direction in the scaled basis.
    x_phi: Vec<f64>,
}

fn dense_pair_rescaled(rp: &RescaledProfile) -> Result<DensePair> {
    let grid = dense_grid(rp.source_params.d, rp.r_max.min(BLOCK_DOMAIN), 1.0)?;
    let plus = assemble(OperatorKind::RescaledPlus, OperatorSource::Rescaled(rp), &grid)?;
    let minus = assemble(
        OperatorKind::RescaledMinus,
        OperatorSource::Rescaled(rp),
        &grid,
    )?;
    let phi = rp.sample(&grid)?;
    let mut x_phi = plus.to_vector(&phi)?;
    let nrm = norm2(&x_phi);
    for x in x_phi.iter_mut() {
        *x /= nrm;
    }
    Ok(DensePair {
        grid,
        plus,
        minus,
        x_phi,
    })
}

fn dense_pair_original(gs: &GroundStateSolution) -> Result<DensePair> {
    let grid = dense_grid(gs.params.d, gs.r_max, core_scale(gs))?;
    let plus = assemble(OperatorKind::Plus, OperatorSource::Ground(gs), &grid)?;
    let minus = assemble(OperatorKind::Minus, OperatorSource::Ground(gs), &grid)?;
    let phi = gs.sample(&grid)?;
    let mut x_phi = plus.to_vector(&phi)?;
    let nrm = norm2(&x_phi);
    for x in x_phi.iter_mut() {
        *x /= nrm;
    }
    Ok(DensePair {
        grid,
        plus,
        minus,
        x_phi,
    })
}

fn transpose(n: usize, a: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

/// Eigendecomposition-based square root of the minus operator, with
/// the positive-semidefiniteness clamp.
fn sqrt_minus(pair: &DensePair) -> Result<Vec<f64>> {
    let eig = sym_eigen_tridiag(pair.minus.matrix())?;
    let m = eig.n;
    let clamp = PSD_CLAMP * (1.0 + pair.minus.constant().abs());
    let mut roots = Vec::with_capacity(m);
    for &lam in &eig.values {
        if lam < -clamp {
            return Err(CoreError::SpectralAnomaly(format!(
                "L₋ eigenvalue {lam:e} below the semidefiniteness clamp −{clamp:e}"
            )));
        }
        roots.push(lam.max(0.0).sqrt());
    }
    // sqrt = Vᵀ diag(roots) V with V rows the eigenvectors
    let mut scaled = eig.vectors.clone();
    for k in 0..m {
        for i in 0..m {
            scaled[k * m + i] *= roots[k];
        }
    }
    let vt = transpose(m, &eig.vectors);
    Ok(matmul(m, &vt, &scaled))
}

fn block_eigenvalues(pair: &DensePair) -> Result<Vec<(f64, f64)>> {
    let m = pair.x_phi.len();
    let aplus = pair.plus.dense();
    let aminus = pair.minus.dense();
    let two = 2 * m;
    let mut block = vec![0.0; two * two];
    for i in 0..m {
        for j in 0..m {
            block[i * two + (m + j)] = aminus[i * m + j];
            block[(m + i) * two + j] = -aplus[i * m + j];
        }
    }
    eigenvalues_dense(two, &block)
}

fn negation_defect(eigs: &[(f64, f64)]) -> f64 {
    let mut worst: f64 = 0.0;
    for &(re, im) in eigs {
        let mut best = f64::INFINITY;
        for &(re2, im2) in eigs {
            let d = ((re + re2).powi(2) + (im + im2).powi(2)).sqrt();
            if d < best {
                best = d;
            }
        }
        let mag = (re * re + im * im).sqrt();
        worst = worst.max(best / (1.0 + mag));
    }
    worst
}

fn splitmix(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

/// Unstable eigenvalue of the linearized flow about a rescaled
/// profile, by the symmetrized operator, cross-checked against the
/// block matrix.
pub fn unstable_eigenvalue(rp: &RescaledProfile) -> Result<InstabilityReport> {
    let pair = dense_pair_rescaled(rp)?;
    let m = pair.x_phi.len();

    let half = sqrt_minus(&pair)?;
    let aplus = pair.plus.dense();
    // S = L₋^{1/2} L₊ L₋^{1/2}, symmetrized against rounding.
    let mut s = matmul(m, &matmul(m, &half, &aplus), &half);
    for i in 0..m {
        for j in (i + 1)..m {
            let avg = 0.5 * (s[i * m + j] + s[j * m + i]);
            s[i * m + j] = avg;
            s[j * m + i] = avg;
        }
    }

    // restrict to the complement of the profile direction
    let restriction = ComplementRestriction::new(&pair.x_phi)?;
    let s_perp = restriction.restrict(&s)?;
    let eig = sym_eigen_dense(m - 1, &s_perp)?;
    let nu = eig.values[0];
    let f_perp = eig.vector(0);
    let f_full = restriction.lift(f_perp);

    // random admissible Rayleigh quotients must stay above ν
    let mut state = 0x0123_4567_89ab_cdefu64;
    let mut floor_margin = f64::INFINITY;
    let mut y = vec![0.0; m - 1];
    for _ in 0..256 {
        for v in y.iter_mut() {
            *v = splitmix(&mut state);
        }
        let nn = dot(&y, &y);
        let mut sy = vec![0.0; m - 1];
        for i in 0..m - 1 {
            let row = &s_perp[i * (m - 1)..(i + 1) * (m - 1)];
            sy[i] = dot(row, &y);
        }
        let q = dot(&y, &sy) / nn;
        floor_margin = floor_margin.min(q - nu);
    }

    // block spectrum and cross-validation
    let block_eigs = block_eigenvalues(&pair)?;
    let defect = negation_defect(&block_eigs);
    let mu = if nu < 0.0 { Some((-nu).sqrt()) } else { None };
    let cross_error = mu.map(|mu_sym| {
        let mu_block = block_eigs.iter().map(|e| e.0).fold(f64::MIN, f64::max);
        (mu_sym - mu_block).abs() / mu_sym
    });

    // eigenfunction of the block flow: u = L₋^{1/2} f, v = −L₊u/μ
    let u = crate::linalg::matvec(m, &half, &f_full);
    let v = match mu {
        Some(mu_val) => {
            let au = crate::linalg::matvec(m, &aplus, &u);
            au.iter().map(|&x| -x / mu_val).collect()
        }
        None => vec![0.0; m],
    };
    let joint = (dot(&u, &u) + dot(&v, &v)).sqrt().max(1e-300);
    let u: Vec<f64> = u.iter().map(|&x| x / joint).collect();
    let v: Vec<f64> = v.iter().map(|&x| x / joint).collect();

    let d = rp.source_params.d as f64;
    Ok(InstabilityReport {
        nu,
        mu,
        f_min: pair.plus.to_field(&f_full)?,
        g_re: pair.plus.to_field(&u)?,
        g_im: pair.plus.to_field(&v)?,
        block_eigs,
        cross_error,
        negation_defect: defect,
        floor_margin,
        eig_scale: rp.m.powf(4.0 / (d - 2.0)),
    })
}

/// Cutoff-witness certificate for the negativity of ν.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessReport {
    /// ⟨L̃₊ g, g⟩ for the test function g = κΦ̃ + Z_R.
    pub value: f64,
    /// The ν-comparable Rayleigh quotient ⟨L̃₊g,g⟩ / ‖L̃₋^{−1/2}g‖².
    pub weighted_quotient: f64,
    /// ⟨L₊(W) Z, Z⟩ = −E of the uncut bubble direction.
    pub e_pairing: f64,
    /// ⟨L₊(W) Z_R, Z_R⟩ after the cutoff.
    pub cut_pairing: f64,
    /// Orthogonalization coefficient κ.
    pub kappa: f64,
    /// A-priori bound 2|⟨Φ̃, Z_R⟩| / ‖Φ̃‖²_{L²(B₁)} that κ must obey.
    pub kappa_bound: f64,
    pub r_cut: f64,
}

fn cutoff(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let a = (-1.0 / (2.0 - s)).exp();
        let b = (-1.0 / (s - 1.0)).exp();
        a / (a + b)
    }
}

/// Build the explicit instability test function g = κΦ̃ + Z_{R_cut}
/// from the negative direction Z of the bubble operator, and return
/// its quadratic form data. Errors when the cutoff destroys the
/// negativity of the Z-direction (R_cut too small).
pub fn instability_witness(rp: &RescaledProfile, r_cut: f64) -> Result<WitnessReport> {
    let domain = rp.r_max.min(BLOCK_DOMAIN);
    if !(r_cut > 1.0) || 2.0 * r_cut >= domain {
        return Err(CoreError::InvalidParams(format!(
            "cutoff radius {r_cut} outside (1, r_max/2)"
        )));
    }
    let pair = dense_pair_rescaled(rp)?;
    let grid = &pair.grid;
    let talenti = assemble(OperatorKind::TalentiPlus, OperatorSource::Bubble, grid)?;

    // negative direction of the bubble operator, projected against W
    let t = talenti.matrix();
    let lam0 = t.eigenvalue(0)?;
    if !(lam0 < 0.0) {
        return Err(CoreError::SpectralAnomaly(format!(
            "bubble operator lost its negative direction (λ₀ = {lam0:e})"
        )));
    }
    let (mut z, _) = t.eigenvector(lam0, &[])?;
    let w_field = crate::bubble::talenti(grid);
    let xw = talenti.to_vector(&w_field)?;
    let c = dot(&z, &xw) / dot(&xw, &xw);
    for (zi, wi) in z.iter_mut().zip(xw.iter()) {
        *zi -= c * wi;
    }
    let nrm = norm2(&z);
    for zi in z.iter_mut() {
        *zi /= nrm;
    }
    let mut tz = vec![0.0; z.len()];
    t.matvec(&z, &mut tz);
    let e_pairing = dot(&z, &tz);
    if !(e_pairing < 0.0) {
        return Err(CoreError::SpectralAnomaly(
            "projection against the bubble destroyed the negative direction".into(),
        ));
    }

    // smooth cutoff at r_cut
    let nodes = grid.nodes();
    let z_r: Vec<f64> = z
        .iter()
        .enumerate()
        .map(|(i, &zi)| cutoff(nodes[i + 1] / r_cut) * zi)
        .collect();
    let mut tzr = vec![0.0; z_r.len()];
    t.matvec(&z_r, &mut tzr);
    let cut_pairing = dot(&z_r, &tzr);
    if cut_pairing >= 0.5 * e_pairing {
        return Err(CoreError::Numerical(format!(
            "cutoff at {r_cut} destroyed the negativity: pairing {cut_pairing:e} vs uncut {e_pairing:e}"
        )));
    }

    // orthogonalize against the profile and form the quadratic form
    let kappa = -dot(&z_r, &pair.x_phi);
    let g: Vec<f64> = z_r
        .iter()
        .zip(pair.x_phi.iter())
        .map(|(&zi, &pi)| zi + kappa * pi)
        .collect();
    let mut ag = vec![0.0; g.len()];
    pair.plus.matrix().matvec(&g, &mut ag);
    let value = pair.plus.sigma() * dot(&g, &ag);

    // ν-comparable normalization ‖L̃₋^{−1/2} g‖²
    let eig = sym_eigen_tridiag(pair.minus.matrix())?;
    let clamp = PSD_CLAMP * (1.0 + pair.minus.constant().abs());
    let mut weighted = 0.0;
    for k in 0..eig.n {
        let lam = eig.values[k];
        if lam <= clamp {
            continue;
        }
        let c = dot(eig.vector(k), &g);
        weighted += c * c / lam;
    }
    let weighted_quotient = dot(&g, &ag) / weighted;

    // a-priori bound on κ from the unit-ball mass of the profile
    let mut ball = 0.0;
    for (i, &x) in pair.x_phi.iter().enumerate() {
        if nodes[i + 1] < 1.0 {
            ball += x * x;
        }
    }
    let phi_nrm = 1.0; // x_phi is unit
    let kappa_bound = 2.0 * dot(&z_r, &pair.x_phi).abs() / (ball * phi_nrm);

    Ok(WitnessReport {
        value,
        weighted_quotient,
        e_pairing,
        cut_pairing,
        kappa,
        kappa_bound,
        r_cut,
    })
}

/// Negative-index comparison between the constrained Hessian and the
/// block flow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexReport {
    /// Negative eigenvalues of the projected operator P₋ L₊ P₋.
    pub n_r: usize,
    /// Block eigenvalues with positive real part.
    pub i_l: usize,
    /// Whether the two counts agree.
    pub matches: bool,
}

/// Count negative directions of the constrained Hessian and positive
/// real eigenvalues of the block flow on a common grid.
pub fn gss_index(gs: &GroundStateSolution) -> Result<IndexReport> {
    let pair = if gs.params.critical_on {
        let rp = rescale(gs);
        dense_pair_rescaled(&rp)?
    } else {
        dense_pair_original(gs)?
    };
    let m = pair.x_phi.len();

    let restriction = ComplementRestriction::new(&pair.x_phi)?;
    let projected = restriction.restrict(&pair.plus.dense())?;
    let eig = sym_eigen_dense(m - 1, &projected)?;
    let tol = pair.plus.zero_tol();
    let n_r = eig.values.iter().filter(|&&l| l < -tol).count();

    let block = block_eigenvalues(&pair)?;
    let max_mag = block
        .iter()
        .map(|&(re, im)| (re * re + im * im).sqrt())
        .fold(0.0f64, f64::max);
    let pos_tol = 1e-6 * max_mag.max(1.0);
    // the block spectrum is symmetric under negation, so positive real
    // parts come in ± pairs; count each pair once
    let i_l = block.iter().filter(|&&(re, _)| re > pos_tol).count().div_ceil(2);

    Ok(IndexReport {
        n_r,
        i_l,
        matches: n_r == i_l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shoot::{shoot, ProblemParams, ShootOptions};

    const KERNEL_WINDOW_FACTOR: f64 = 1e-6;
    const COSINE_FLOOR: f64 = 1.0 - 1e-8;
    const PAIR_RESIDUAL_REL: f64 = 1e-8;
    const GAP_STABILITY: f64 = 0.25;
    const CROSS_ERROR_MAX: f64 = 1e-4;
    const NEGATION_DEFECT_MAX: f64 = 1e-8;

    fn solved(omega: f64) -> GroundStateSolution {
        shoot(&ProblemParams::new(3, 4.0, omega), &ShootOptions::default()).expect("solve")
    }

    #[test]
    fn minus_spectrum_pins_the_kernel_mode() {
        let gs = solved(100.0);
        let grid = kernel_grid(3, gs.r_max, core_scale(&gs)).unwrap();
        let minus = assemble(OperatorKind::Minus, OperatorSource::Ground(&gs), &grid).unwrap();
        let report = eigs(&minus, 2).unwrap();

        let window = KERNEL_WINDOW_FACTOR * gs.params.omega;
        assert!(
            report.eigenvalues[0].abs() <= window,
            "lowest eigenvalue {:e} outside ±{window:e}",
            report.eigenvalues[0]
        );
        assert_eq!(report.neg_count, 0, "L₋ must be nonnegative");
        assert!(report.residuals.iter().all(|&r| r <= PAIR_RESIDUAL_REL));

        // eigenfield tracks the profile
        let phi = gs.sample(&grid).unwrap();
        let xp = minus.to_vector(&phi).unwrap();
        let xe = minus.to_vector(&report.eigenfields[0]).unwrap();
        let cosine = dot(&xp, &xe).abs() / (norm2(&xp) * norm2(&xe));
        assert!(
            cosine >= COSINE_FLOOR,
            "kernel eigenfield cosine {cosine} below {COSINE_FLOOR}"
        );

        // second eigenvalue: bottom of the truncated essential branch
        assert!(report.eigenvalues[1] > window);
    }

    #[test]
    fn plus_spectrum_has_one_simple_negative_direction() {
        let gs = solved(100.0);
        let rp = rescale(&gs);
        let grid = counting_grid(3, rp.r_max, 1.0).unwrap();
        let plus =
            assemble(OperatorKind::RescaledPlus, OperatorSource::Rescaled(&rp), &grid).unwrap();
        let t = plus.matrix();
        let negs = t.count_below(-plus.zero_tol());
        assert_eq!(negs, 1, "expected one negative direction, found {negs}");
        assert!(t.eigenvalue(0).unwrap() < 0.0 && t.eigenvalue(1).unwrap() > 0.0);

        // essential-branch density above the frequency floor grows with
        // the truncation radius
        let alpha = plus.constant();
        let count = |r_max: f64| -> usize {
            let g = counting_grid(3, r_max, 1.0).unwrap();
            let op =
                assemble(OperatorKind::RescaledPlus, OperatorSource::Rescaled(&rp), &g).unwrap();
            op.matrix().count_below(2.0 * alpha)
        };
        let narrow = count(0.5 * rp.r_max);
        let wide = count(rp.r_max);
        assert!(
            wide > narrow,
            "eigenvalue density above the floor should grow with the domain ({narrow} vs {wide})"
        );
    }

    #[test]
    fn quadratic_form_identity_on_the_form_grid() {
        let gs = solved(100.0);
        let grid = form_grid(3, gs.r_max, core_scale(&gs)).unwrap();
        let plus = assemble(OperatorKind::Plus, OperatorSource::Ground(&gs), &grid).unwrap();
        let phi = gs.sample(&grid).unwrap();
        let qf = plus.quadratic_form(&phi).unwrap();

        let p = gs.params.p;
        let ts = gs.params.two_star();
        let closed = -(p - 1.0) * gs.params.epsilon * phi.norm_lq(p + 1.0).powf(p + 1.0)
            - (ts - 2.0) * phi.norm_lq(ts).powf(ts);
        let rel = (qf - closed).abs() / closed.abs();
        assert!(
            rel < 1e-6,
            "⟨L₊Φ,Φ⟩ = {qf:e} vs closed form {closed:e} (rel {rel:e})"
        );
    }

    #[test]
    fn gap_is_positive_and_refinement_stable() {
        let gs = solved(100.0);
        let report = nondegeneracy_gap(&gs).unwrap();
        assert!(report.gap > 0.0);
        assert!(report.negative_eigenvalue < 0.0);
        assert!(
            report.rel_change <= GAP_STABILITY,
            "gap moved {:.1}% under refinement",
            100.0 * report.rel_change
        );

        // subcritical control takes the original-variables path
        let control = shoot(
            &ProblemParams {
                d: 3,
                p: 2.0,
                omega: 50.0,
                epsilon: 1.0,
                critical_on: false,
            },
            &ShootOptions::default(),
        )
        .unwrap();
        let report = nondegeneracy_gap(&control).unwrap();
        assert!(report.gap > 0.0 && report.negative_eigenvalue < 0.0);
        assert!(report.rel_change <= GAP_STABILITY);
    }

    #[test]
    fn spectrum_runner_certifies_kernel_count_and_form() {
        let gs = solved(100.0);
        let omega = gs.params.omega;
        let report = ground_state_spectrum(&gs).unwrap();

        assert!(
            report.minus_lowest.abs() <= KERNEL_WINDOW_FACTOR * omega,
            "kernel eigenvalue {:e} outside ±{:e}",
            report.minus_lowest,
            KERNEL_WINDOW_FACTOR * omega
        );
        assert!(report.kernel_cosine >= COSINE_FLOOR);
        assert!(report.minus_residuals.iter().all(|&r| r <= PAIR_RESIDUAL_REL));
        assert_eq!(report.plus_neg_count, 1);
        assert!(report.plus_negative < 0.0);
        assert!(report.gap.gap > 0.0 && report.gap.rel_change <= GAP_STABILITY);
        assert!(
            report.form_rel_error < 1e-6,
            "form identity off by {:e}",
            report.form_rel_error
        );
    }

    #[test]
    fn truncated_bubble_zero_mode_sinks_with_domain_growth() {
        // ΛW spans the kernel of the bubble operator only in Ḣ¹; on a
        // truncated domain it appears as a small positive eigenvalue
        // that must sink toward zero as the cut moves out.
        let mut previous = f64::INFINITY;
        for r_max in [50.0, 100.0, 200.0] {
            let grid = geometric_grid(3, r_max, 1e-3, 2e-3).unwrap();
            let op = assemble(OperatorKind::TalentiPlus, OperatorSource::Bubble, &grid).unwrap();
            let near_zero = op.matrix().eigenvalue(1).unwrap();
            assert!(near_zero > 0.0 && near_zero < previous);
            previous = near_zero;
        }
    }

    #[test]
    fn random_fields_respect_minus_nonnegativity_and_coercivity() {
        let gs = solved(100.0);
        let grid = dense_grid(3, gs.r_max, core_scale(&gs)).unwrap();
        let minus = assemble(OperatorKind::Minus, OperatorSource::Ground(&gs), &grid).unwrap();
        let phi = gs.sample(&grid).unwrap();
        let x_phi = minus.to_vector(&phi).unwrap();
        let nphi2 = dot(&x_phi, &x_phi);

        let m = minus.interior_len();
        let mut state = 7u64;
        let mut min_q = f64::INFINITY;
        let mut min_coercivity = f64::INFINITY;
        for _ in 0..100 {
            let mut x: Vec<f64> = (0..m).map(|_| splitmix(&mut state)).collect();
            // orthogonalize for the coercivity ratio
            let f_any = minus.to_field(&x).unwrap();
            let q_any = minus.quadratic_form(&f_any).unwrap()
                / (minus.sigma() * dot(&x, &x));
            min_q = min_q.min(q_any);

            let c = dot(&x, &x_phi) / nphi2;
            for (xi, pi) in x.iter_mut().zip(x_phi.iter()) {
                *xi -= c * pi;
            }
            let f = minus.to_field(&x).unwrap();
            let qf = minus.quadratic_form(&f).unwrap();
            let h1 = minus.dirichlet_energy(&f).unwrap()
                + minus.sigma() * dot(&x, &x);
            min_coercivity = min_coercivity.min(qf / h1);
        }
        assert!(
            min_q >= -1e-8 * (1.0 + gs.params.omega),
            "random quadratic form dipped to {min_q:e}"
        );
        assert!(
            min_coercivity > 0.0,
            "constrained coercivity constant {min_coercivity:e} not positive"
        );
    }

    #[test]
    fn instability_report_is_internally_consistent() {
        let gs = solved(100.0);
        let rp = rescale(&gs);
        let report = unstable_eigenvalue(&rp).unwrap();
        assert!(report.nu < 0.0, "expected instability, ν = {:e}", report.nu);
        let mu = report.mu.expect("μ must exist when ν < 0");
        assert!(mu > 0.0);
        assert!(
            report.cross_error.unwrap() <= CROSS_ERROR_MAX,
            "cross error {:e}",
            report.cross_error.unwrap()
        );
        assert!(
            report.negation_defect <= NEGATION_DEFECT_MAX,
            "negation defect {:e}",
            report.negation_defect
        );
        assert!(report.floor_margin >= 0.0);

        // witness certifies the sign and bounds ν from above
        let witness = instability_witness(&rp, 40.0).unwrap();
        assert!(witness.value < 0.0);
        assert!(witness.weighted_quotient < 0.0);
        assert!(
            witness.weighted_quotient >= report.nu - 1e-10,
            "quotient {:e} dips below ν {:e}",
            witness.weighted_quotient,
            report.nu
        );
        assert!(witness.cut_pairing < 0.5 * witness.e_pairing);
        assert!(witness.kappa.abs() <= witness.kappa_bound);
    }

    #[test]
    fn index_counts_agree_and_flip_for_the_stable_control() {
        let gs = solved(100.0);
        let report = gss_index(&gs).unwrap();
        assert_eq!(report.n_r, 1);
        assert_eq!(report.i_l, 1);
        assert!(report.matches);

        let control = shoot(
            &ProblemParams {
                d: 3,
                p: 2.0,
                omega: 50.0,
                epsilon: 1.0,
                critical_on: false,
            },
            &ShootOptions::default(),
        )
        .unwrap();
        let report = gss_index(&control).unwrap();
        assert_eq!(report.n_r, 0);
        assert_eq!(report.i_l, 0);
        assert!(report.matches);
    }
}
