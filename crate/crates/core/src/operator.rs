//! Linearized radial Schrödinger-type operators in Liouville form.
//!
//! The stability theory of the ground states hinges on the pair of
//! linearizations about a profile Φ,
//!
//!   L₊ u = ω u − Δu − force′(Φ) u,      L₋ u = ω u − Δu − (force(Φ)/Φ) u,
//!
//! their rescaled counterparts about Φ̃ (with constant α and the
//! subcritical term weighted by β), and the limiting operator about
//! the explicit bubble W, whose potential is the derivative of the
//! pure critical force.
//!
//! For radial functions the substitution v(r) = r^{(d-1)/2} u(r) turns
//! every one of these into a one-dimensional Schrödinger operator
//!
//!   (T v)(r) = −v″ + [ (d−1)(d−3)/(4r²) + constant − W(r) ] v
//!
//! on (0, R) with v(0) = 0 forced by the transform and a Dirichlet cut
//! at R justified by exponential decay of the discrete eigenfields
//! below the essential-spectrum edge. P1 finite elements on the
//! (nonuniform) node set with a lumped mass matrix then give, after
//! symmetrizing by the square root of the mass, a symmetric
//! tridiagonal matrix whose plain Euclidean inner product represents
//! the volume-measure L² pairing.
//!
//! The potential of the Minus-family operators is not sampled from its
//! closed form. It is reconstructed from the profile itself, so that
//! the sampled profile is an exact discrete eigenvector with
//! eigenvalue zero (the reconstruction differs from the closed form by
//! the O(h²) consistency error of the stiffness matrix, so nothing is
//! lost). The continuous L₋ annihilates the ground state — the
//! identity the whole spectral picture leans on — and a discretization
//! that only gets this right to O(h²) buries the near-zero spectrum
//! under grid noise. With the reconstruction the matrix is an
//! irreducible tridiagonal with negative off-diagonals holding a
//! strictly positive eigenvector, so by Perron–Frobenius that vector
//! is its ground state: the discrete L₋ is positive semidefinite
//! exactly, as in the continuum. The Plus operators add the
//! closed-form excess potentials (p−1)εΦ^{p−1} and (2*−2)Φ^{2*−2} on
//! top of the reconstructed base, which preserves the exact identity
//! L₊Φ = −(p−1)εΦ^p − (2*−2)Φ^{2*−1} at the discrete level.

use std::sync::Arc;

use crate::bubble;
use crate::error::{CoreError, Result};
use crate::field::RadialField;
use crate::grid::RadialGrid;
use crate::linalg::{dot, SymTridiag};
use crate::rescale::RescaledProfile;
use crate::shoot::{GroundStateSolution, ProblemParams};

/// Which linearization to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// L₊ about a ground state, original variables.
    Plus,
    /// L₋ about a ground state, original variables.
    Minus,
    /// L̃₊ about a rescaled profile.
    RescaledPlus,
    /// L̃₋ about a rescaled profile.
    RescaledMinus,
    /// L₊ about the explicit bubble W (zero frequency).
    TalentiPlus,
}

/// What the operator is linearized about.
pub enum OperatorSource<'a> {
    Ground(&'a GroundStateSolution),
    Rescaled(&'a RescaledProfile),
    Bubble,
}

/// One attractive potential term; the operator subtracts
/// `coefficient * values` from the free part.
#[derive(Debug, Clone)]
pub struct PotentialTerm {
    pub label: &'static str,
    pub coefficient: f64,
    pub values: RadialField,
}

/// Assembled operator on the interior nodes of a radial grid.
///
/// `matrix` acts on the scaled coordinates x_i = √(m_i) r_i^{(d-1)/2}
/// f(r_i), in which ⟨f, g⟩ against the volume measure is σ·(x·y) with
/// σ the unit-sphere area. Eigenvalues of `matrix` are the discrete
/// eigenvalues of the operator; eigenvectors map back to radial
/// eigenfields through [`RadialOperator::to_field`].
pub struct RadialOperator {
    kind: OperatorKind,
    grid: Arc<RadialGrid>,
    matrix: SymTridiag,
    constant: f64,
    potentials: Vec<PotentialTerm>,
    /// Lumped 1-D masses (h_{i-1}+h_i)/2 per interior node.
    mass: Vec<f64>,
    /// √mass per interior node.
    sqrt_mass: Vec<f64>,
    /// r^{(d-1)/2} per interior node.
    liouville: Vec<f64>,
}

fn centrifugal(d: u32) -> f64 {
    let dm1 = (d - 1) as f64;
    let dm3 = d as f64 - 3.0;
    dm1 * dm3 / 4.0
}

/// Assemble the requested linearization on `grid`.
///
/// The grid must live in the source's dimension and stay inside the
/// radial range the profile was computed on. Kind and source must
/// agree: original-variable kinds take a ground state, rescaled kinds
/// take a rescaled profile, the bubble operator takes no profile.
pub fn assemble(
    kind: OperatorKind,
    source: OperatorSource,
    grid: &Arc<RadialGrid>,
) -> Result<RadialOperator> {
    match (kind, &source) {
        (OperatorKind::Plus | OperatorKind::Minus, OperatorSource::Ground(gs)) => {
            assemble_about_profile(kind, &gs.params, &gs.traj, grid)
        }
        (
            OperatorKind::RescaledPlus | OperatorKind::RescaledMinus,
            OperatorSource::Rescaled(rp),
        ) => assemble_about_profile(kind, &rp.eq_params(), &rp.traj, grid),
        (OperatorKind::TalentiPlus, OperatorSource::Bubble) => assemble_about_bubble(grid),
        _ => Err(CoreError::InvalidParams(
            "operator kind does not match the supplied linearization source".into(),
        )),
    }
}

fn interior_geometry(grid: &RadialGrid) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let nodes = grid.nodes();
    let n = nodes.len();
    let half = (grid.d() as f64 - 1.0) / 2.0;
    let mut mass = Vec::with_capacity(n - 2);
    let mut sqrt_mass = Vec::with_capacity(n - 2);
    let mut liouville = Vec::with_capacity(n - 2);
    for i in 1..n - 1 {
        let m = 0.5 * (nodes[i + 1] - nodes[i - 1]);
        mass.push(m);
        sqrt_mass.push(m.sqrt());
        liouville.push(nodes[i].powf(half));
    }
    (mass, sqrt_mass, liouville)
}

fn assemble_about_profile(
    kind: OperatorKind,
    params: &ProblemParams,
    traj: &crate::ode::Trajectory,
    grid: &Arc<RadialGrid>,
) -> Result<RadialOperator> {
    params.validate()?;
    if grid.d() != params.d {
        return Err(CoreError::GridMismatch(format!(
            "operator in dimension {} assembled on a d={} grid",
            params.d,
            grid.d()
        )));
    }
    let traj_end = *traj.r.last().ok_or_else(|| {
        CoreError::InvalidParams("empty profile trajectory".into())
    })?;
    if grid.r_max() > traj_end * (1.0 + 1e-9) {
        return Err(CoreError::GridMismatch(format!(
            "grid reaches r={} but the profile is only computed up to r={}",
            grid.r_max(),
            traj_end
        )));
    }

    let nodes = grid.nodes();
    let n = nodes.len();
    let (mass, sqrt_mass, liouville) = interior_geometry(grid);
    let half = (params.d as f64 - 1.0) / 2.0;
    let cent = centrifugal(params.d);
    let constant = params.omega;

    // Profile and its Liouville transform on every node, endpoint
    // values included: the reconstruction below uses the true boundary
    // samples, so the only kernel defect of the Dirichlet matrix is
    // the exponentially small coupling to the last node.
    let phi: Vec<f64> = nodes.iter().map(|&r| traj.eval(r).0).collect();
    for (i, &v) in phi.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(CoreError::Numerical(format!(
                "profile not strictly positive at grid node r={} (value {})",
                nodes[i], v
            )));
        }
    }
    let phiv: Vec<f64> = nodes
        .iter()
        .zip(phi.iter())
        .map(|(&r, &u)| r.powf(half) * u)
        .collect();

    // Reconstructed base potential: the unique W with
    //   (K φv)_i + m_i (cent/r_i² + constant − W_i) φv_i = 0,
    // so the sampled profile is an exact zero mode of the assembled
    // Minus matrix.
    let mut base = vec![0.0; n];
    for i in 1..n - 1 {
        let hl = nodes[i] - nodes[i - 1];
        let hr = nodes[i + 1] - nodes[i];
        let k_row = (phiv[i] - phiv[i - 1]) / hl + (phiv[i] - phiv[i + 1]) / hr;
        base[i] = constant + cent / (nodes[i] * nodes[i]) + k_row / (mass[i - 1] * phiv[i]);
    }
    // Endpoint values are reporting-only (the matrix never sees them);
    // fill them from the closed form force(Φ)/Φ.
    base[0] = params.force(phi[0]) / phi[0];
    base[n - 1] = params.force(phi[n - 1]) / phi[n - 1];

    let mut potentials = vec![PotentialTerm {
        label: "force_ratio",
        coefficient: 1.0,
        values: RadialField::new(grid.clone(), base.clone())?,
    }];

    let plus = matches!(kind, OperatorKind::Plus | OperatorKind::RescaledPlus);
    if plus {
        let sub: Vec<f64> = phi.iter().map(|&u| u.powf(params.p - 1.0)).collect();
        potentials.push(PotentialTerm {
            label: "subcritical_excess",
            coefficient: (params.p - 1.0) * params.epsilon,
            values: RadialField::new(grid.clone(), sub)?,
        });
        if params.critical_on {
            let ts = params.two_star();
            let crit: Vec<f64> = phi.iter().map(|&u| u.powf(ts - 2.0)).collect();
            potentials.push(PotentialTerm {
                label: "critical_excess",
                coefficient: ts - 2.0,
                values: RadialField::new(grid.clone(), crit)?,
            });
        }
    }

    let matrix = build_matrix(grid, &mass, constant, &potentials)?;
    Ok(RadialOperator {
        kind,
        grid: grid.clone(),
        matrix,
        constant,
        potentials,
        mass,
        sqrt_mass,
        liouville,
    })
}

fn assemble_about_bubble(grid: &Arc<RadialGrid>) -> Result<RadialOperator> {
    let d = grid.d();
    let ts = 2.0 * d as f64 / (d as f64 - 2.0);
    let values: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| bubble::w_at(d, r).powf(ts - 2.0))
        .collect();
    let potentials = vec![PotentialTerm {
        label: "critical_derivative",
        coefficient: ts - 1.0,
        values: RadialField::new(grid.clone(), values)?,
    }];
    let (mass, sqrt_mass, liouville) = interior_geometry(grid);
    let matrix = build_matrix(grid, &mass, 0.0, &potentials)?;
    Ok(RadialOperator {
        kind: OperatorKind::TalentiPlus,
        grid: grid.clone(),
        matrix,
        constant: 0.0,
        potentials,
        mass,
        sqrt_mass,
        liouville,
    })
}

fn build_matrix(
    grid: &RadialGrid,
    mass: &[f64],
    constant: f64,
    potentials: &[PotentialTerm],
) -> Result<SymTridiag> {
    let nodes = grid.nodes();
    let n = nodes.len();
    let cent = centrifugal(grid.d());
    let mut diag = Vec::with_capacity(n - 2);
    let mut off = Vec::with_capacity(n - 3);
    for i in 1..n - 1 {
        let hl = nodes[i] - nodes[i - 1];
        let hr = nodes[i + 1] - nodes[i];
        let mut pot = 0.0;
        for term in potentials {
            pot += term.coefficient * term.values.values()[i];
        }
        diag.push(
            (1.0 / hl + 1.0 / hr) / mass[i - 1] + cent / (nodes[i] * nodes[i]) + constant - pot,
        );
        if i < n - 2 {
            off.push(-1.0 / (hr * (mass[i - 1] * mass[i]).sqrt()));
        }
    }
    SymTridiag::new(diag, off)
}

impl RadialOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// Symmetric tridiagonal matrix in the scaled Liouville basis.
    pub fn matrix(&self) -> &SymTridiag {
        &self.matrix
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn potentials(&self) -> &[PotentialTerm] {
        &self.potentials
    }

    /// Number of interior nodes the matrix acts on.
    pub fn interior_len(&self) -> usize {
        self.mass.len()
    }

    /// Unit-sphere area of the grid's dimension: the constant relating
    /// scaled-basis dot products to volume-measure integrals.
    pub fn sigma(&self) -> f64 {
        self.grid.sigma()
    }

    /// Lumped masses per interior node.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    fn check_grid(&self, f: &RadialField) -> Result<()> {
        if !Arc::ptr_eq(f.grid(), &self.grid) && f.grid().spec() != self.grid.spec() {
            return Err(CoreError::GridMismatch(
                "field sampled on a different grid than the operator".into(),
            ));
        }
        Ok(())
    }

    /// Scaled-basis coordinates of a field: x_i = √m_i r_i^{(d-1)/2} f_i.
    pub fn to_vector(&self, f: &RadialField) -> Result<Vec<f64>> {
        self.check_grid(f)?;
        Ok(self.vector_of_samples(f.values()))
    }

    /// Same as [`RadialOperator::to_vector`] from raw node samples
    /// (full grid length; endpoints ignored).
    pub fn vector_of_samples(&self, samples: &[f64]) -> Vec<f64> {
        (0..self.mass.len())
            .map(|i| self.sqrt_mass[i] * self.liouville[i] * samples[i + 1])
            .collect()
    }

    /// Field with the given scaled-basis coordinates; endpoint values
    /// zero (Dirichlet).
    pub fn to_field(&self, x: &[f64]) -> Result<RadialField> {
        if x.len() != self.mass.len() {
            return Err(CoreError::GridMismatch(format!(
                "coordinate vector length {} does not match {} interior nodes",
                x.len(),
                self.mass.len()
            )));
        }
        let mut values = vec![0.0; self.grid.len()];
        for i in 0..x.len() {
            values[i + 1] = x[i] / (self.sqrt_mass[i] * self.liouville[i]);
        }
        RadialField::new(self.grid.clone(), values)
    }

    /// Volume-measure L² inner product of two scaled coordinate
    /// vectors.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.sigma() * dot(x, y)
    }

    /// Apply the operator to a field (lumped-mass sense; endpoint
    /// values of the result are zero).
    pub fn apply(&self, f: &RadialField) -> Result<RadialField> {
        let x = self.to_vector(f)?;
        let mut y = vec![0.0; x.len()];
        self.matrix.matvec(&x, &mut y);
        self.to_field(&y)
    }

    /// ⟨Lf, f⟩ against the volume measure.
    pub fn quadratic_form(&self, f: &RadialField) -> Result<f64> {
        let x = self.to_vector(f)?;
        let mut y = vec![0.0; x.len()];
        self.matrix.matvec(&x, &mut y);
        Ok(self.sigma() * dot(&x, &y))
    }

    /// Discrete Dirichlet energy ∫|∇f|² dμ of a field (the stiffness
    /// plus centrifugal part of the quadratic form, i.e. the operator
    /// with constant and potentials removed).
    pub fn dirichlet_energy(&self, f: &RadialField) -> Result<f64> {
        self.check_grid(f)?;
        let nodes = self.grid.nodes();
        let n = nodes.len();
        let half = (self.grid.d() as f64 - 1.0) / 2.0;
        let cent = centrifugal(self.grid.d());
        let mut v = vec![0.0; n];
        for i in 1..n - 1 {
            v[i] = nodes[i].powf(half) * f.values()[i];
        }
        let mut energy = 0.0;
        for i in 0..n - 1 {
            let h = nodes[i + 1] - nodes[i];
            let dv = (v[i + 1] - v[i]) / h;
            energy += dv * dv * h;
        }
        for i in 1..n - 1 {
            energy += cent / (nodes[i] * nodes[i]) * v[i] * v[i] * self.mass[i - 1];
        }
        Ok(self.sigma() * energy)
    }

    /// Dense row-major copy of the matrix (interior × interior).
    pub fn dense(&self) -> Vec<f64> {
        let m = self.mass.len();
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            a[i * m + i] = self.matrix.diag[i];
            if i + 1 < m {
                a[i * m + i + 1] = self.matrix.off[i];
                a[(i + 1) * m + i] = self.matrix.off[i];
            }
        }
        a
    }

    /// Scale-aware threshold separating "negative" from "zero"
    /// eigenvalues.
    pub fn zero_tol(&self) -> f64 {
        1e-8 * (1.0 + self.constant.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::rescale::rescale;
    use crate::shoot::{shoot, ShootOptions};

    const QF_CONSISTENCY_REL: f64 = 1e-8;
    const KERNEL_RESIDUAL_REL: f64 = 1e-10;
    const POTENTIAL_CONSISTENCY_SCALED: f64 = 1e-2;
    const IDENTITY_REL: f64 = 1e-10;
    const BUBBLE_APPLY_REL: f64 = 1e-3;

    fn solved() -> GroundStateSolution {
        let params = ProblemParams::new(3, 4.0, 10.0);
        shoot(&params, &ShootOptions::default()).expect("solve")
    }

    /// Geometric grid whose first step resolves `core`, the inner
    /// length scale of the profile the operator is built around.
    fn operator_grid(d: u32, r_max: f64, n: usize, core: f64) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::geometric(d, r_max, n, 1e-2 * core).expect("grid"))
    }

    fn core_scale(gs: &GroundStateSolution) -> f64 {
        gs.m.powf(-2.0 / (gs.params.d as f64 - 2.0))
    }

    #[test]
    fn kind_and_source_must_agree() {
        let gs = solved();
        let core = core_scale(&gs);
        let grid = operator_grid(3, gs.r_max, 200, core);
        assert!(assemble(OperatorKind::RescaledPlus, OperatorSource::Ground(&gs), &grid).is_err());
        assert!(assemble(OperatorKind::TalentiPlus, OperatorSource::Ground(&gs), &grid).is_err());
        assert!(assemble(OperatorKind::Plus, OperatorSource::Bubble, &grid).is_err());

        // grid beyond the computed profile
        let too_far = operator_grid(3, 2.0 * gs.r_max, 200, core);
        assert!(matches!(
            assemble(OperatorKind::Plus, OperatorSource::Ground(&gs), &too_far),
            Err(CoreError::GridMismatch(_))
        ));
    }

    #[test]
    fn minus_annihilates_the_profile_and_plus_obeys_the_excess_identity() {
        let gs = solved();
        let grid = operator_grid(3, gs.r_max, 700, core_scale(&gs));
        let minus = assemble(OperatorKind::Minus, OperatorSource::Ground(&gs), &grid).unwrap();
        let phi = gs.sample(&grid).unwrap();

        // The sampled profile is a discrete zero mode up to roundoff:
        // its Rayleigh quotient sits at rounding level of the
        // operator scale, and Sturm counts place an eigenvalue inside
        // a window around zero far tighter than any consistency-error
        // bound could.
        let x = minus.to_vector(&phi).unwrap();
        let mut ax = vec![0.0; x.len()];
        minus.matrix().matvec(&x, &mut ax);
        let rayleigh = crate::linalg::dot(&x, &ax) / crate::linalg::dot(&x, &x);
        assert!(
            rayleigh.abs() < KERNEL_RESIDUAL_REL * (1.0 + minus.constant()),
            "profile Rayleigh quotient {rayleigh:e} off zero"
        );
        let window = 1e-9 * (1.0 + minus.constant());
        assert_eq!(minus.matrix().count_below(-window), 0, "eigenvalue below −{window:e}");
        assert_eq!(minus.matrix().count_below(window), 1, "no eigenvalue inside ±{window:e}");

        // The reconstructed potential tracks the closed form. Measured
        // against the local operator scale ω + V: pointwise-relative
        // comparison is meaningless out in the tail where V decays
        // through the consistency-error floor.
        let base = &minus.potentials()[0].values;
        let params = &gs.params;
        let mut worst: f64 = 0.0;
        for (i, &r) in grid.nodes().iter().enumerate() {
            if r > gs.r_max / 4.0 {
                break;
            }
            let u = gs.traj.eval(r).0;
            let exact = params.force(u) / u;
            worst = worst.max((base.values()[i] - exact).abs() / (params.omega + exact));
        }
        assert!(
            worst < POTENTIAL_CONSISTENCY_SCALED,
            "reconstructed potential drifted {worst:e} from the closed form"
        );

        // L₊Φ = −(p−1)εΦ^p − (2*−2)Φ^{2*−1} transfers exactly to the
        // discrete level because the Plus matrix differs from Minus by
        // diagonal terms.
        let plus = assemble(OperatorKind::Plus, OperatorSource::Ground(&gs), &grid).unwrap();
        let lplus = plus.apply(&phi).unwrap();
        let ts = params.two_star();
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &r) in grid.nodes().iter().enumerate() {
            if i == 0 || i == grid.len() - 1 {
                continue;
            }
            let u = gs.traj.eval(r).0;
            let rhs = -(params.p - 1.0) * params.epsilon * u.powf(params.p)
                - (ts - 2.0) * u.powf(ts - 1.0);
            let w = grid.weights()[i];
            num += w * (lplus.values()[i] - rhs) * (lplus.values()[i] - rhs);
            den += w * rhs * rhs;
        }
        assert!(
            (num / den).sqrt() < IDENTITY_REL,
            "excess identity violated: {:e}",
            (num / den).sqrt()
        );
    }

    #[test]
    fn quadratic_form_matches_summation_by_parts() {
        let gs = solved();
        let grid = operator_grid(3, gs.r_max, 400, core_scale(&gs));
        let rp = rescale(&gs);
        let rgrid = operator_grid(3, rp.r_max.min(2000.0), 400, 1.0);

        let ops = [
            assemble(OperatorKind::Plus, OperatorSource::Ground(&gs), &grid).unwrap(),
            assemble(OperatorKind::Minus, OperatorSource::Ground(&gs), &grid).unwrap(),
            assemble(
                OperatorKind::RescaledPlus,
                OperatorSource::Rescaled(&rp),
                &rgrid,
            )
            .unwrap(),
            assemble(
                OperatorKind::RescaledMinus,
                OperatorSource::Rescaled(&rp),
                &rgrid,
            )
            .unwrap(),
            assemble(OperatorKind::TalentiPlus, OperatorSource::Bubble, &grid).unwrap(),
        ];

        for op in &ops {
            let g = op.grid();
            let f = RadialField::from_fn(g.clone(), |r| {
                (-0.5 * (r - 0.2 * g.r_max()).powi(2) / (0.05 * g.r_max()).powi(2)).exp()
            });

            // independent route: element-wise gradient energy plus
            // lumped potential sums
            let nodes = g.nodes();
            let n = nodes.len();
            let half = (g.d() as f64 - 1.0) / 2.0;
            let mut v = vec![0.0; n];
            for i in 1..n - 1 {
                v[i] = nodes[i].powf(half) * f.values()[i];
            }
            let mut form = 0.0;
            for i in 0..n - 1 {
                let h = nodes[i + 1] - nodes[i];
                let dv = (v[i + 1] - v[i]) / h;
                form += dv * dv * h;
            }
            let cent = centrifugal(g.d());
            for i in 1..n - 1 {
                let m = 0.5 * (nodes[i + 1] - nodes[i - 1]);
                let mut pot = cent / (nodes[i] * nodes[i]) + op.constant();
                for term in op.potentials() {
                    pot -= term.coefficient * term.values.values()[i];
                }
                form += pot * v[i] * v[i] * m;
            }
            form *= g.sigma();

            let qf = op.quadratic_form(&f).unwrap();
            let rel = (qf - form).abs() / form.abs().max(1e-300);
            assert!(
                rel < QF_CONSISTENCY_REL,
                "{:?}: matrix form {qf:e} vs direct quadrature {form:e} (rel {rel:e})",
                op.kind()
            );
        }
    }

    #[test]
    fn bubble_operator_acts_correctly_and_has_a_negative_direction() {
        // Pointwise identity: L₊(W) W = −ΔW − (2*−1)W^{2*−1}
        //                            = W^{2*−1} − (2*−1)W^{2*−1} = −4W⁵ in d=3.
        // Checked away from the Dirichlet cut, where truncating the
        // slowly decaying bubble injects an artificial kink.
        let grid = Arc::new(RadialGrid::graded(3, 100.0, 4000).unwrap());
        let op = assemble(OperatorKind::TalentiPlus, OperatorSource::Bubble, &grid).unwrap();
        let w = bubble::talenti(&grid);
        let lw = op.apply(&w).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &r) in grid.nodes().iter().enumerate() {
            if i == 0 || r > 50.0 {
                continue;
            }
            let rhs = -4.0 * bubble::w_at(3, r).powi(5);
            let wt = grid.weights()[i];
            num += wt * (lw.values()[i] - rhs) * (lw.values()[i] - rhs);
            den += wt * rhs * rhs;
        }
        let rel = (num / den).sqrt();
        assert!(
            rel < BUBBLE_APPLY_REL,
            "bubble operator action off by {rel:e} in weighted norm"
        );

        // one negative direction: the ground state of the matrix
        let lam0 = op.matrix().eigenvalue(0).unwrap();
        assert!(
            lam0 < -1e-2,
            "expected a strictly negative bottom eigenvalue, got {lam0:e}"
        );
    }

    #[test]
    fn rescaled_minus_annihilates_the_rescaled_profile() {
        let gs = solved();
        let rp = rescale(&gs);
        let grid = operator_grid(3, rp.r_max, 900, 1.0);
        let minus =
            assemble(OperatorKind::RescaledMinus, OperatorSource::Rescaled(&rp), &grid).unwrap();
        let phi = rp.sample(&grid).unwrap();
        let x = minus.to_vector(&phi).unwrap();
        let mut ax = vec![0.0; x.len()];
        minus.matrix().matvec(&x, &mut ax);
        let rayleigh = crate::linalg::dot(&x, &ax) / crate::linalg::dot(&x, &x);
        assert!(
            rayleigh.abs() < KERNEL_RESIDUAL_REL,
            "rescaled kernel Rayleigh quotient {rayleigh:e}"
        );
        let window = 1e-10;
        assert_eq!(minus.matrix().count_below(-window), 0);
        assert_eq!(minus.matrix().count_below(window), 1);
    }
}
