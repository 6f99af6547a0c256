//! Fundamental matrices of `DY + A(t)Y = 0`, the matrix `J(t)`, the
//! well-posedness determinant, and homogeneous subinterval systems.
//!
//! Everything integrates with classical fixed-step RK4 on the master grid.
//! `J(t)` is assembled from a single base integration through the flow
//! identity `Phi^t(t_j) = Phi^0(t_j) (Phi^0(t))^{-1}`; the inverse flow is
//! co-integrated as `Psi' = Psi A` rather than inverted node by node.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::problem::ValidatedProblem;
use crate::tol::{Tolerances, OVERFLOW_GUARD};

/// Integrates `M' = rhs(t, M)` over the node range `lo..=hi`, forward and
/// backward from `start`, returning one matrix per node in the range.
fn rk4_range<F>(
    nodes: &[f64],
    lo: usize,
    hi: usize,
    start: usize,
    init: DMatrix<f64>,
    rhs: F,
) -> Result<Vec<DMatrix<f64>>>
where
    F: Fn(f64, &DMatrix<f64>) -> DMatrix<f64>,
{
    debug_assert!(lo <= start && start <= hi);
    let mut values: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); hi - lo + 1];
    values[start - lo] = init;

    let step = |from: usize, to: usize, values: &mut Vec<DMatrix<f64>>| -> Result<()> {
        let t0 = nodes[from];
        let dt = nodes[to] - nodes[from];
        let y0 = &values[from - lo];
        let k1 = rhs(t0, y0);
        let k2 = rhs(t0 + 0.5 * dt, &(y0 + &k1 * (0.5 * dt)));
        let k3 = rhs(t0 + 0.5 * dt, &(y0 + &k2 * (0.5 * dt)));
        let k4 = rhs(t0 + dt, &(y0 + &k3 * dt));
        let next = y0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if next.amax() > OVERFLOW_GUARD {
            return Err(Error::IntegrationOverflow { t: nodes[to], guard: OVERFLOW_GUARD });
        }
        values[to - lo] = next;
        Ok(())
    };

    for k in start..hi {
        step(k, k + 1, &mut values)?;
    }
    for k in (lo..start).rev() {
        step(k + 1, k, &mut values)?;
    }
    Ok(values)
}

/// The fundamental matrix `Phi^s(t)` tabulated on a node range.
#[derive(Debug, Clone)]
pub struct FundamentalMatrix {
    base: usize,
    lo: usize,
    values: Vec<DMatrix<f64>>,
}

impl FundamentalMatrix {
    pub fn base_node(&self) -> usize {
        self.base
    }

    pub fn at(&self, node: usize) -> &DMatrix<f64> {
        &self.values[node - self.lo]
    }
}

/// `Phi^s(t)` for all grid nodes `t`, seeded with the identity at `s`.
pub fn fundamental_matrix(problem: &ValidatedProblem, s: usize) -> Result<FundamentalMatrix> {
    fundamental_range(problem, s, 0, problem.grid().len() - 1)
}

/// `Phi^base(t)` for `t` in the node range `lo..=hi` (base inside the range).
pub fn fundamental_range(
    problem: &ValidatedProblem,
    base: usize,
    lo: usize,
    hi: usize,
) -> Result<FundamentalMatrix> {
    let n = problem.n();
    let coeffs = problem.coeffs().clone();
    let values = rk4_range(
        problem.grid().nodes(),
        lo,
        hi,
        base,
        DMatrix::identity(n, n),
        move |t, m| -(coeffs.companion(t) * m),
    )?;
    Ok(FundamentalMatrix { base, lo, values })
}

/// Well-posedness report for hypothesis (H0).
#[derive(Debug, Clone, Copy)]
pub struct WellPosedness {
    /// det J at the reference node.
    pub det: f64,
    pub wellposed: bool,
    pub ref_node: usize,
    /// Determinants at the three spot-check nodes (near 1/2, 1/4, 3/4).
    pub dets: [f64; 3],
    /// Scale used for the threshold: max(1, ||J(s_ref)||_F).
    pub scale: f64,
}

/// Flow data for one problem: `Phi^0`, its inverse flow, and `J`.
#[derive(Debug, Clone)]
pub struct FlowTable {
    problem: Arc<ValidatedProblem>,
    phi0: Vec<DMatrix<f64>>,
    psi: Vec<DMatrix<f64>>,
    k_mat: DMatrix<f64>,
    j: Vec<DMatrix<f64>>,
    tol_int: f64,
    liouville_residual: f64,
}

impl FlowTable {
    pub fn new(problem: &ValidatedProblem) -> Result<FlowTable> {
        let problem = Arc::new(problem.clone());
        let n = problem.n();
        let nodes = problem.grid().nodes();
        let last = nodes.len() - 1;

        let coeffs = problem.coeffs().clone();
        let phi0 = rk4_range(nodes, 0, last, 0, DMatrix::identity(n, n), |t, m| {
            -(coeffs.companion(t) * m)
        })?;
        let psi = rk4_range(nodes, 0, last, 0, DMatrix::identity(n, n), |t, m| {
            m * coeffs.companion(t)
        })?;

        // K = sum_j D_j Phi^0(t_j): row i of D_j is alpha_ij * e_n^T, so each
        // atom contributes alpha_col_j (outer) row n of Phi^0(t_j).
        let alpha = problem.boundary().alpha();
        let mut k_mat = DMatrix::zeros(n, n);
        for (j, &node) in problem.point_nodes().iter().enumerate() {
            let row_n = phi0[node].row(n - 1);
            for i in 0..n {
                for k in 0..n {
                    k_mat[(i, k)] += alpha[(i, j)] * row_n[k];
                }
            }
        }

        let j: Vec<DMatrix<f64>> = psi.iter().map(|p| &k_mat * p).collect();

        // Liouville calibration: det Phi^0(t) = exp(-int_0^t a_{n-1}).
        let trace_coeff = problem.coeffs().coefficient(n - 1).clone();
        let mut acc = 0.0;
        let mut residual: f64 = 0.0;
        for k in 0..=last {
            if k > 0 {
                acc += trace_coeff.integral(nodes[k - 1], nodes[k]);
            }
            let reference = (-acc).exp();
            let rel = (phi0[k].determinant() - reference).abs() / reference.abs().max(1.0);
            residual = residual.max(rel);
        }
        let tol_int = (20.0 * residual).max(1e-12);

        Ok(FlowTable { problem, phi0, psi, k_mat, j, tol_int, liouville_residual: residual })
    }

    pub fn problem(&self) -> &Arc<ValidatedProblem> {
        &self.problem
    }

    pub fn phi0(&self, node: usize) -> &DMatrix<f64> {
        &self.phi0[node]
    }

    /// Inverse flow `(Phi^0(t))^{-1}`.
    pub fn psi(&self, node: usize) -> &DMatrix<f64> {
        &self.psi[node]
    }

    pub fn j_at(&self, node: usize) -> &DMatrix<f64> {
        &self.j[node]
    }

    pub fn k_matrix(&self) -> &DMatrix<f64> {
        &self.k_mat
    }

    /// Integration tolerance calibrated from the Liouville residual.
    pub fn tol_int(&self) -> f64 {
        self.tol_int
    }

    pub fn liouville_residual(&self) -> f64 {
        self.liouville_residual
    }

    /// `Phi^s(t) = Phi^0(t) Psi(s)` via the flow identity.
    pub fn flow(&self, s: usize, t: usize) -> DMatrix<f64> {
        &self.phi0[t] * &self.psi[s]
    }

    fn reference_node(&self, target: f64) -> usize {
        let grid = self.problem.grid();
        let atoms = self.problem.point_nodes();
        let start = grid.nearest_node(target);
        // Walk outward until the node is not a boundary atom.
        for offset in 0..grid.len() {
            for cand in [start.saturating_sub(offset), (start + offset).min(grid.len() - 1)] {
                if !atoms.contains(&cand) {
                    return cand;
                }
            }
        }
        start
    }

    /// (H0): the verdict |det J| > tol.det * max(1, ||J||_F), spot-checked at
    /// three reference points; nonvanishing is independent of the reference
    /// point, so disagreement signals numerical breakdown.
    pub fn check_wellposed(&self, tol: &Tolerances) -> Result<WellPosedness> {
        let refs = [
            self.reference_node(0.5),
            self.reference_node(0.25),
            self.reference_node(0.75),
        ];
        let mut dets = [0.0; 3];
        let mut verdicts = [false; 3];
        let mut scale0 = 1.0;
        for (k, &node) in refs.iter().enumerate() {
            let j = &self.j[node];
            let det = j.determinant();
            let scale = j.norm().max(1.0);
            dets[k] = det;
            verdicts[k] = det.abs() > tol.det * scale;
            if k == 0 {
                scale0 = scale;
            }
        }
        if verdicts[1] != verdicts[0] || verdicts[2] != verdicts[0] {
            return Err(Error::InconsistentVerdict { dets });
        }
        Ok(WellPosedness {
            det: dets[0],
            wellposed: verdicts[0],
            ref_node: refs[0],
            dets,
            scale: scale0,
        })
    }
}

// ---------------------------------------------------------------------------
// Subinterval homogeneous systems.
// ---------------------------------------------------------------------------

/// One linear condition `sum w * Y_coord(node) = rhs` on a subinterval system.
#[derive(Debug, Clone)]
pub struct LinearCondition {
    /// (node, coordinate 0-based, weight) terms.
    pub terms: Vec<(usize, usize, f64)>,
}

impl LinearCondition {
    /// `Y_coord(node) = .`
    pub fn pin(node: usize, coord: usize) -> Self {
        LinearCondition { terms: vec![(node, coord, 1.0)] }
    }
}

/// Domain of a subinterval system, as node ranges.
#[derive(Debug, Clone, Copy)]
pub enum SubDomain {
    Interval { lo: usize, hi: usize },
    Disjoint { left: (usize, usize), right: (usize, usize) },
}

/// Square condition matrix of a homogeneous subinterval system: rows are the
/// conditions applied to the columns of `Phi^{u}` per interval, with `u` the
/// interval's left endpoint.
pub(crate) struct SubSystem {
    pub matrix: DMatrix<f64>,
    pub flows: Vec<FundamentalMatrix>,
}

pub(crate) fn subinterval_system(
    problem: &ValidatedProblem,
    domain: SubDomain,
    conditions: &[LinearCondition],
    bases: Option<&[usize]>,
) -> Result<SubSystem> {
    let n = problem.n();
    let ranges: Vec<(usize, usize)> = match domain {
        SubDomain::Interval { lo, hi } => vec![(lo, hi)],
        SubDomain::Disjoint { left, right } => vec![left, right],
    };
    for &(lo, hi) in &ranges {
        if lo > hi || hi >= problem.grid().len() {
            return Err(Error::InvalidProblem("bad subinterval node range".into()));
        }
    }
    if let SubDomain::Disjoint { left, right } = domain {
        if left.1 > right.0 {
            return Err(Error::InvalidProblem("disjoint intervals overlap".into()));
        }
    }
    let dim = n * ranges.len();
    if conditions.len() != dim {
        return Err(Error::ConditionCountMismatch { expected: dim, got: conditions.len() });
    }

    let flows: Vec<FundamentalMatrix> = ranges
        .iter()
        .enumerate()
        .map(|(k, &(lo, hi))| {
            let base = bases.map(|b| b[k]).unwrap_or(lo);
            fundamental_range(problem, base, lo, hi)
        })
        .collect::<Result<_>>()?;

    let mut matrix = DMatrix::zeros(dim, dim);
    for (row, cond) in conditions.iter().enumerate() {
        for &(node, coord, w) in &cond.terms {
            let block = ranges
                .iter()
                .position(|&(lo, hi)| node >= lo && node <= hi)
                .ok_or(Error::PointOutOfRange { value: problem.grid().value(node) })?;
            let phi = flows[block].at(node);
            for col in 0..n {
                matrix[(row, block * n + col)] += w * phi[(coord, col)];
            }
        }
    }
    Ok(SubSystem { matrix, flows })
}

/// Determinant of the homogeneous subinterval system; zero iff a nontrivial
/// homogeneous solution exists.
pub fn subinterval_boundary_determinant(
    problem: &ValidatedProblem,
    domain: SubDomain,
    conditions: &[LinearCondition],
) -> Result<f64> {
    let sys = subinterval_system(problem, domain, conditions, None)?;
    Ok(sys.matrix.determinant())
}

/// |det M| normalized by the product of row norms (Hadamard bound), so the
/// value is scale-free in [0, 1].
pub fn hadamard_normalized_det(m: &DMatrix<f64>) -> f64 {
    let det = m.determinant().abs();
    let mut denom = 1.0;
    for i in 0..m.nrows() {
        let norm = m.row(i).norm();
        if norm < 1e-300 {
            return 0.0;
        }
        denom *= norm;
    }
    det / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BoundaryOperator, Coefficient, CoefficientSet, ProblemSpec};
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand::SeedableRng;

    fn scalar_problem(a0: Coefficient, points: Vec<f64>, alpha: Vec<f64>, c: f64) -> ValidatedProblem {
        let m = points.len();
        ProblemSpec::new(
            CoefficientSet::new(vec![a0]).unwrap(),
            BoundaryOperator::new(
                points,
                DMatrix::from_row_slice(1, m, &alpha),
                DVector::from_vec(vec![c]),
            ),
        )
        .validate()
        .unwrap()
    }

    fn golden_problem() -> ValidatedProblem {
        scalar_problem(Coefficient::Constant { value: 0.0 }, vec![0.5, 1.0], vec![1.0, 1.0], 0.0)
    }

    #[test]
    fn zero_generator_flow_is_identity() {
        let p = golden_problem();
        let s = p.grid().node_index(0.5).unwrap();
        let phi = fundamental_matrix(&p, s).unwrap();
        for k in 0..p.grid().len() {
            assert_eq!(phi.at(k)[(0, 0)], 1.0);
        }
    }

    #[test]
    fn scalar_exponential_closed_form() {
        let alpha = 1.7;
        let p = scalar_problem(Coefficient::Constant { value: alpha }, vec![0.0], vec![1.0], 0.0);
        let s = p.grid().node_index(0.25).unwrap();
        let phi = fundamental_matrix(&p, s).unwrap();
        let ts = p.grid().value(s);
        let mut max_err: f64 = 0.0;
        for k in 0..p.grid().len() {
            let t = p.grid().value(k);
            let exact = (-alpha * (t - ts)).exp();
            max_err = max_err.max((phi.at(k)[(0, 0)] - exact).abs());
        }
        assert!(max_err < 1e-11, "max_err = {max_err:.3e}");
    }

    fn oscillator_problem(omega2: f64, points: Vec<f64>, alpha: Vec<f64>, c: Vec<f64>) -> ValidatedProblem {
        let m = points.len();
        ProblemSpec::new(
            CoefficientSet::new(vec![
                Coefficient::Constant { value: omega2 },
                Coefficient::Constant { value: 0.0 },
            ])
            .unwrap(),
            BoundaryOperator::new(points, DMatrix::from_row_slice(2, m, &alpha), DVector::from_vec(c)),
        )
        .validate()
        .unwrap()
    }

    #[test]
    fn oscillator_rotation_closed_form() {
        // D^2 X + omega^2 X = 0 in companion coordinates Y = (DX, X):
        // Phi^s(t) = [[cos w(t-s), -w sin w(t-s)], [sin w(t-s)/w, cos w(t-s)]].
        let omega = 2.0;
        let p = oscillator_problem(omega * omega, vec![0.0, 1.0], vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]);
        let s = p.grid().node_index(0.5).unwrap();
        let phi = fundamental_matrix(&p, s).unwrap();
        let ts = p.grid().value(s);
        let mut max_err: f64 = 0.0;
        for k in (0..p.grid().len()).step_by(37) {
            let th = omega * (p.grid().value(k) - ts);
            let exact = DMatrix::from_row_slice(
                2,
                2,
                &[th.cos(), -omega * th.sin(), th.sin() / omega, th.cos()],
            );
            max_err = max_err.max((phi.at(k) - exact).amax());
        }
        assert!(max_err < 1e-11, "max_err = {max_err:.3e}");
    }

    #[test]
    fn j_matrix_golden_values() {
        // Example: J(t) = 2 for X(1/2) + X(1) = 0 with A = 0.
        let flow = FlowTable::new(&golden_problem()).unwrap();
        for k in (0..flow.problem().grid().len()).step_by(101) {
            assert!((flow.j_at(k)[(0, 0)] - 2.0).abs() < 1e-14);
        }

        // Initial condition X(0) = c: J = 1.
        let ic = scalar_problem(Coefficient::Constant { value: 0.0 }, vec![0.0], vec![1.0], 1.0);
        let flow = FlowTable::new(&ic).unwrap();
        assert!((flow.j_at(500)[(0, 0)] - 1.0).abs() < 1e-14);

        // Anti-symmetric condition X(1/2) - X(1) = 0: J = 0, H0 fails.
        let anti =
            scalar_problem(Coefficient::Constant { value: 0.0 }, vec![0.5, 1.0], vec![1.0, -1.0], 0.0);
        let flow = FlowTable::new(&anti).unwrap();
        assert!(flow.j_at(123)[(0, 0)].abs() < 1e-14);
        let wp = flow.check_wellposed(&Tolerances::default()).unwrap();
        assert!(!wp.wellposed);
        assert!(wp.det.abs() < 1e-8);
    }

    #[test]
    fn wellposedness_verdicts() {
        let wp = FlowTable::new(&golden_problem())
            .unwrap()
            .check_wellposed(&Tolerances::default())
            .unwrap();
        assert!(wp.wellposed);
        assert!((wp.det - 2.0).abs() < 1e-8);

        // Dirichlet D^2 X + pi^2 X = 0, X(0) = X(1) = 0: sin(pi t) is a
        // nontrivial homogeneous solution.
        let dirichlet = oscillator_problem(
            std::f64::consts::PI.powi(2),
            vec![0.0, 1.0],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0],
        );
        let wp = FlowTable::new(&dirichlet).unwrap().check_wellposed(&Tolerances::default()).unwrap();
        assert!(!wp.wellposed, "det = {:.3e}", wp.det);
    }

    #[test]
    fn liouville_and_flow_composition() {
        // Generic smooth problem: a_0 = 1, a_1(t) = t.
        let p = ProblemSpec::new(
            CoefficientSet::new(vec![
                Coefficient::Constant { value: 1.0 },
                Coefficient::Polynomial { coeffs: vec![0.0, 1.0] },
            ])
            .unwrap(),
            BoundaryOperator::new(
                vec![0.0, 1.0],
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
                DVector::from_vec(vec![0.0, 0.0]),
            ),
        )
        .validate()
        .unwrap();
        let flow = FlowTable::new(&p).unwrap();
        assert!(flow.liouville_residual() < 1e-12, "residual = {:.3e}", flow.liouville_residual());

        // Flow composition Phi^u(t) = Phi^s(t) Phi^u(s) at random node triples.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let len = p.grid().len();
        for _ in 0..6 {
            let u = rng.random_range(0..len);
            let s = rng.random_range(0..len);
            let t = rng.random_range(0..len);
            let phi_u = fundamental_matrix(&p, u).unwrap();
            let phi_s = fundamental_matrix(&p, s).unwrap();
            let err = (phi_u.at(t) - phi_s.at(t) * phi_u.at(s)).amax();
            assert!(err <= 10.0 * flow.tol_int(), "err = {err:.3e}, tol = {:.3e}", flow.tol_int());
        }
    }

    #[test]
    fn j_reconstruction_identity() {
        // J_ik(t) = sum_j alpha_ij Phi^t_nk(t_j), with Phi^t integrated
        // directly rather than through the flow identity.
        let p = ProblemSpec::new(
            CoefficientSet::new(vec![
                Coefficient::Constant { value: 0.8 },
                Coefficient::Sinusoid { amplitude: 0.5, omega: 3.0, phase: 0.0, offset: 0.1 },
            ])
            .unwrap(),
            BoundaryOperator::new(
                vec![0.25, 0.75],
                DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 1.0]),
                DVector::from_vec(vec![0.0, 0.0]),
            ),
        )
        .validate()
        .unwrap();
        let flow = FlowTable::new(&p).unwrap();
        let n = p.n();
        for &t in &[0usize, 137, 500, 881, p.grid().len() - 1] {
            let phi_t = fundamental_matrix(&p, t).unwrap();
            let mut direct = DMatrix::zeros(n, n);
            for (j, &node) in p.point_nodes().iter().enumerate() {
                for i in 0..n {
                    for k in 0..n {
                        direct[(i, k)] += p.boundary().alpha()[(i, j)] * phi_t.at(node)[(n - 1, k)];
                    }
                }
            }
            let err = (&direct - flow.j_at(t)).amax();
            let scale = flow.j_at(t).norm().max(1.0);
            assert!(err <= flow.tol_int() * scale, "err = {err:.3e}");
        }
    }

    #[test]
    fn subinterval_determinants() {
        // n=1, A=0 on [0,a], Y(0) = 0: only the trivial solution.
        let p = golden_problem();
        let a = p.grid().node_index(0.4).unwrap();
        let det = subinterval_boundary_determinant(
            &p,
            SubDomain::Interval { lo: 0, hi: a },
            &[LinearCondition::pin(0, 0)],
        )
        .unwrap();
        assert!((det - 1.0).abs() < 1e-12);

        // n=2, a_0 = 4 on [a,b] with b - a = pi/4: X(t) = sin(2(t-a)) satisfies
        // X(a) = 0, DX(b) = 0, so the determinant vanishes.
        let a_val = 0.2;
        let b_val = a_val + std::f64::consts::FRAC_PI_4;
        let spec = ProblemSpec::new(
            CoefficientSet::new(vec![
                Coefficient::Constant { value: 4.0 },
                Coefficient::Constant { value: 0.0 },
            ])
            .unwrap(),
            BoundaryOperator::new(
                vec![0.0, 1.0],
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
                DVector::from_vec(vec![0.0, 0.0]),
            ),
        );
        let p = spec.validate_with(&[a_val, b_val], &Tolerances::default()).unwrap();
        let (a, b) = (p.grid().node_index(a_val).unwrap(), p.grid().node_index(b_val).unwrap());
        let conditions = [LinearCondition::pin(b, 0), LinearCondition::pin(a, 1)];
        let det = subinterval_boundary_determinant(&p, SubDomain::Interval { lo: a, hi: b }, &conditions)
            .unwrap();
        assert!(det.abs() < 1e-10, "det = {det:.3e}");

        // Same conditions with A = 0 (affine solutions): only trivial.
        let p0 = ProblemSpec::new(
            CoefficientSet::new(vec![
                Coefficient::Constant { value: 0.0 },
                Coefficient::Constant { value: 0.0 },
            ])
            .unwrap(),
            BoundaryOperator::new(
                vec![0.0, 1.0],
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
                DVector::from_vec(vec![0.0, 0.0]),
            ),
        )
        .validate_with(&[a_val, b_val], &Tolerances::default())
        .unwrap();
        let det = subinterval_boundary_determinant(&p0, SubDomain::Interval { lo: a, hi: b }, &conditions)
            .unwrap();
        assert!(det.abs() > 0.5, "det = {det:.3e}");
    }

    #[test]
    fn disjoint_domain_determinants() {
        // Two disjoint intervals carry 2n conditions. With A = 0 and n = 1
        // the homogeneous solutions are constant per interval, so pinning one
        // point per interval leaves only the trivial solution, while a
        // difference within one interval always has nontrivial solutions.
        let p = golden_problem();
        let grid = p.grid();
        let left = (0, grid.node_index(0.3).unwrap());
        let right = (grid.node_index(0.7).unwrap(), grid.len() - 1);
        let domain = SubDomain::Disjoint { left, right };

        let pinned = [
            LinearCondition::pin(grid.node_index(0.1).unwrap(), 0),
            LinearCondition::pin(grid.node_index(0.8).unwrap(), 0),
        ];
        let det = subinterval_boundary_determinant(&p, domain, &pinned).unwrap();
        assert!((det - 1.0).abs() < 1e-12, "det = {det}");

        let dependent = [
            LinearCondition {
                terms: vec![
                    (grid.node_index(0.1).unwrap(), 0, 1.0),
                    (grid.node_index(0.2).unwrap(), 0, -1.0),
                ],
            },
            LinearCondition::pin(grid.node_index(0.8).unwrap(), 0),
        ];
        let det = subinterval_boundary_determinant(&p, domain, &dependent).unwrap();
        assert!(det.abs() < 1e-12, "det = {det}");

        // A condition point outside both intervals is rejected.
        let outside = [
            LinearCondition::pin(grid.node_index(0.5).unwrap(), 0),
            LinearCondition::pin(grid.node_index(0.8).unwrap(), 0),
        ];
        assert!(matches!(
            subinterval_boundary_determinant(&p, domain, &outside),
            Err(Error::PointOutOfRange { .. })
        ));
    }

    #[test]
    fn sampled_coefficients_match_their_analytic_form() {
        // A linear coefficient given as samples interpolates exactly, so the
        // flow agrees with the polynomial form to rounding.
        let linear = Coefficient::Polynomial { coeffs: vec![0.3, -0.9] };
        let sampled = Coefficient::Samples {
            values: (0..=100).map(|k| 0.3 - 0.9 * (k as f64 / 100.0)).collect(),
        };
        let build = |a0: Coefficient| {
            ProblemSpec::new(
                CoefficientSet::new(vec![a0]).unwrap(),
                BoundaryOperator::new(
                    vec![0.0],
                    DMatrix::from_row_slice(1, 1, &[1.0]),
                    DVector::from_vec(vec![0.0]),
                ),
            )
            .validate()
            .unwrap()
        };
        let fa = FlowTable::new(&build(linear)).unwrap();
        let fb = FlowTable::new(&build(sampled)).unwrap();
        for k in (0..fa.problem().grid().len()).step_by(111) {
            assert!((fa.phi0(k)[(0, 0)] - fb.phi0(k)[(0, 0)]).abs() < 1e-11);
        }
        assert!(fb.liouville_residual() < 1e-12);
    }

    #[test]
    fn condition_count_mismatch() {
        let p = golden_problem();
        let err = subinterval_boundary_determinant(&p, SubDomain::Interval { lo: 0, hi: 10 }, &[]);
        assert!(matches!(err, Err(Error::ConditionCountMismatch { expected: 1, got: 0 })));
    }

    #[test]
    fn integration_overflow_detected() {
        // Strongly unstable coefficient blows past the guard.
        let p = scalar_problem(Coefficient::Constant { value: -80.0 }, vec![0.0], vec![1.0], 0.0);
        assert!(matches!(
            fundamental_matrix(&p, 0),
            Err(Error::IntegrationOverflow { .. })
        ));
    }
}
