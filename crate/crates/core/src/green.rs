//! The matrix Green function
//! `G(t,s) = J(t)^{-1} [ int_0^s dF(u) J(u)^{-1} - 1_{t<=s} I ] J(s)`
//! and everything derived from its first column: the noise-influence kernel
//! `g(t,s)`, the mean `J(t)^{-1} c`, and the covariance kernel
//! `C(t,s) = int_0^1 g(t,u) g(s,u)^T du`.
//!
//! With `v(u) = J(u) e_1` and the atomic prefix sum
//! `P(u) = sum_{t_j <= u} D_j J(t_j)^{-1}`, the first column is
//! `g(t,u) = J(t)^{-1} (P(u) v(u) - 1_{t<=u} v(u))`, so every covariance
//! reduces to cumulative second moments of `r = P v` and `v`. Those
//! cumulatives are integrated once per problem with a derivative-corrected
//! trapezoid per step (the derivatives are exact: `J' = J A`), keeping
//! quadrature error at the O(h^4) level of the flow integration. Panels never
//! straddle a jump: atoms and the diagonal are grid nodes.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ode::{FlowTable, WellPosedness};
use crate::problem::ValidatedProblem;
use crate::tol::Tolerances;

/// Side of a one-sided evaluation in the second argument of `G(t, .)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// First column of `G(t, .)` tabulated on the grid.
#[derive(Debug, Clone)]
pub struct InfluenceColumn {
    pub t_node: usize,
    /// `g(t, s)` per grid node `s` (right-continuous values).
    pub values: Vec<DVector<f64>>,
    /// Nodes where `G(t, .)` jumps: the boundary atoms and `t` itself.
    pub breakpoints: Vec<usize>,
}

/// Exact-law tables for a well-posed problem.
#[derive(Debug, Clone)]
pub struct GreenTable {
    problem: Arc<ValidatedProblem>,
    flow: FlowTable,
    wellposedness: WellPosedness,
    tol: Tolerances,
    j_inv: Vec<DMatrix<f64>>,
    p_right: Vec<DMatrix<f64>>,
    p_left: Vec<DMatrix<f64>>,
    pub(crate) v: Vec<DVector<f64>>,
    pub(crate) vp: Vec<DVector<f64>>,
    pub(crate) r_right: Vec<DVector<f64>>,
    pub(crate) r_left: Vec<DVector<f64>>,
    pub(crate) rp_right: Vec<DVector<f64>>,
    pub(crate) rp_left: Vec<DVector<f64>>,
    cum_rr: Vec<DMatrix<f64>>,
    cum_rv: Vec<DMatrix<f64>>,
    cum_vv: Vec<DMatrix<f64>>,
    mean: Vec<DVector<f64>>,
    /// Panel-trapezoid kernel weights for Wiener sums: the average of the
    /// panel's two one-sided values, so atoms and the diagonal jump stay in
    /// their own panel while the weak error drops to O(h^2).
    pub(crate) r_panel: Vec<DVector<f64>>,
    pub(crate) v_panel: Vec<DVector<f64>>,
}

impl GreenTable {
    pub fn new(problem: &ValidatedProblem) -> Result<GreenTable> {
        GreenTable::with_tolerances(problem, &Tolerances::default())
    }

    pub fn with_tolerances(problem: &ValidatedProblem, tol: &Tolerances) -> Result<GreenTable> {
        let flow = FlowTable::new(problem)?;
        GreenTable::from_flow(flow, tol)
    }

    pub fn from_flow(flow: FlowTable, tol: &Tolerances) -> Result<GreenTable> {
        let wellposedness = flow.check_wellposed(tol)?;
        if !wellposedness.wellposed {
            return Err(Error::NotWellPosed {
                det: wellposedness.det,
                threshold: tol.det * wellposedness.scale,
            });
        }
        let problem = flow.problem().clone();
        let n = problem.n();
        let len = problem.grid().len();
        let nodes = problem.grid().nodes();

        let k_inv = flow
            .k_matrix()
            .clone()
            .try_inverse()
            .ok_or(Error::NotWellPosed { det: wellposedness.det, threshold: tol.det })?;
        let j_inv: Vec<DMatrix<f64>> = (0..len).map(|k| flow.phi0(k) * &k_inv).collect();

        let mut max_cond: f64 = 0.0;
        for k in (0..len).step_by(16.max(len / 64)) {
            max_cond = max_cond.max(flow.j_at(k).norm() * j_inv[k].norm());
        }
        if max_cond > tol.cond_warn {
            log::warn!("J(t) condition number approx {max_cond:.3e} exceeds {:.1e}", tol.cond_warn);
        }

        // Atomic prefix sums P(u) = sum_{t_j <= u} alpha_col_j (row n of J(t_j)^{-1}).
        let alpha = problem.boundary().alpha();
        let mut p_left = Vec::with_capacity(len);
        let mut p_right = Vec::with_capacity(len);
        let mut current = DMatrix::zeros(n, n);
        for k in 0..len {
            p_left.push(current.clone());
            for (j, &node) in problem.point_nodes().iter().enumerate() {
                if node == k {
                    let row = j_inv[node].row(n - 1);
                    for i in 0..n {
                        for c in 0..n {
                            current[(i, c)] += alpha[(i, j)] * row[c];
                        }
                    }
                }
            }
            p_right.push(current.clone());
        }

        let v: Vec<DVector<f64>> = (0..len).map(|k| flow.j_at(k).column(0).into_owned()).collect();
        // v'(u) = J(u) A(u) e_1, with A(u) e_1 = (a_{n-1}(u), -1, 0, ...).
        let vp: Vec<DVector<f64>> = (0..len)
            .map(|k| flow.j_at(k) * problem.coeffs().companion_first_column(nodes[k]))
            .collect();

        let r_right: Vec<DVector<f64>> = (0..len).map(|k| &p_right[k] * &v[k]).collect();
        let r_left: Vec<DVector<f64>> = (0..len).map(|k| &p_left[k] * &v[k]).collect();
        let rp_right: Vec<DVector<f64>> = (0..len).map(|k| &p_right[k] * &vp[k]).collect();
        let rp_left: Vec<DVector<f64>> = (0..len).map(|k| &p_left[k] * &vp[k]).collect();

        let r_arrays = (r_right.as_slice(), r_left.as_slice(), rp_right.as_slice(), rp_left.as_slice());
        let v_arrays = (v.as_slice(), v.as_slice(), vp.as_slice(), vp.as_slice());
        let cum_rr = cumulative_second_moments(nodes, r_arrays, r_arrays);
        let cum_rv = cumulative_second_moments(nodes, r_arrays, v_arrays);
        let cum_vv = cumulative_second_moments(nodes, v_arrays, v_arrays);

        let c = problem.boundary().c();
        let mean: Vec<DVector<f64>> = (0..len).map(|k| &j_inv[k] * c).collect();

        let r_panel: Vec<DVector<f64>> =
            (0..len - 1).map(|l| (&r_right[l] + &r_left[l + 1]) * 0.5).collect();
        let v_panel: Vec<DVector<f64>> = (0..len - 1).map(|l| (&v[l] + &v[l + 1]) * 0.5).collect();

        Ok(GreenTable {
            problem,
            flow,
            wellposedness,
            tol: *tol,
            j_inv,
            p_right,
            p_left,
            v,
            vp,
            r_right,
            r_left,
            rp_right,
            rp_left,
            cum_rr,
            cum_rv,
            cum_vv,
            mean,
            r_panel,
            v_panel,
        })
    }

    pub fn problem(&self) -> &ValidatedProblem {
        &self.problem
    }

    pub fn flow(&self) -> &FlowTable {
        &self.flow
    }

    pub fn wellposedness(&self) -> &WellPosedness {
        &self.wellposedness
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn tol_int(&self) -> f64 {
        self.flow.tol_int()
    }

    pub fn j_inv(&self, node: usize) -> &DMatrix<f64> {
        &self.j_inv[node]
    }

    /// `m(t) = J(t)^{-1} c`.
    pub fn mean_at(&self, node: usize) -> &DVector<f64> {
        &self.mean[node]
    }

    /// `G(t, s)`, right-continuous in `s` (closed indicator `1_{t<=s}`).
    pub fn green_matrix(&self, t: usize, s: usize) -> DMatrix<f64> {
        self.green_matrix_sided(t, s, Side::Right)
    }

    /// One-sided evaluation `G(t, s±)`.
    pub fn green_matrix_sided(&self, t: usize, s: usize, side: Side) -> DMatrix<f64> {
        let n = self.problem.n();
        let (p, indicator) = match side {
            Side::Right => (&self.p_right[s], t <= s),
            Side::Left => (&self.p_left[s], t < s),
        };
        let mut bracket = p.clone();
        if indicator {
            for i in 0..n {
                bracket[(i, i)] -= 1.0;
            }
        }
        &self.j_inv[t] * bracket * self.flow.j_at(s)
    }

    /// First column of `G(t, s)`, right-continuous in `s`.
    pub fn influence_at(&self, t: usize, s: usize) -> DVector<f64> {
        let w = if t <= s { &self.r_right[s] - &self.v[s] } else { self.r_right[s].clone() };
        &self.j_inv[t] * w
    }

    /// First column of `G(t, .)` on the whole grid with its breakpoints.
    pub fn influence_column(&self, t: usize) -> InfluenceColumn {
        let values = (0..self.problem.grid().len()).map(|s| self.influence_at(t, s)).collect();
        let mut breakpoints: Vec<usize> = self.problem.point_nodes().to_vec();
        if !breakpoints.contains(&t) {
            breakpoints.push(t);
        }
        breakpoints.sort_unstable();
        InfluenceColumn { t_node: t, values, breakpoints }
    }

    /// Covariance block `C(t,s) = int_0^1 g(t,u) g(s,u)^T du`.
    pub fn cov_block(&self, t: usize, s: usize) -> DMatrix<f64> {
        let last = self.problem.grid().len() - 1;
        let tail = |cum: &Vec<DMatrix<f64>>, from: usize| &cum[last] - &cum[from];
        // int w_t w_s^T with w_t(u) = r(u) - 1_{u>=t} v(u):
        //   RR(1) - [RV(1)-RV(s)] - [RV(1)-RV(t)]^T + [VV(1)-VV(max(t,s))].
        let mut m = self.cum_rr[last].clone();
        m -= tail(&self.cum_rv, s);
        m -= tail(&self.cum_rv, t).transpose();
        m += tail(&self.cum_vv, t.max(s));
        &self.j_inv[t] * m * self.j_inv[s].transpose()
    }

    /// Solution of the deterministic system `DY + AY = (f, 0, ..., 0)^T`,
    /// `Lambda[Y] = c`, via the Green representation
    /// `Y(t) = J(t)^{-1} c + int_0^1 G(t,s) (f(s), 0, ...)^T ds`.
    /// `fp` is the derivative of `f` (used by the corrected quadrature).
    pub fn deterministic_solution(
        &self,
        f: &dyn Fn(f64) -> f64,
        fp: &dyn Fn(f64) -> f64,
    ) -> Vec<DVector<f64>> {
        let nodes = self.problem.grid().nodes();
        let len = nodes.len();
        let scale = |xs: &[DVector<f64>], g: &dyn Fn(f64) -> f64| -> Vec<DVector<f64>> {
            (0..len).map(|k| &xs[k] * g(nodes[k])).collect()
        };
        // (r f)' = r' f + r f', (v f)' = v' f + v f'.
        let rf_r = scale(&self.r_right, f);
        let rf_l = scale(&self.r_left, f);
        let rfp_r: Vec<DVector<f64>> =
            (0..len).map(|k| &self.rp_right[k] * f(nodes[k]) + &self.r_right[k] * fp(nodes[k])).collect();
        let rfp_l: Vec<DVector<f64>> =
            (0..len).map(|k| &self.rp_left[k] * f(nodes[k]) + &self.r_left[k] * fp(nodes[k])).collect();
        let vf = scale(&self.v, f);
        let vfp: Vec<DVector<f64>> =
            (0..len).map(|k| &self.vp[k] * f(nodes[k]) + &self.v[k] * fp(nodes[k])).collect();

        let cum_rf =
            cumulative_first_moments(nodes, (rf_r.as_slice(), rf_l.as_slice(), rfp_r.as_slice(), rfp_l.as_slice()));
        let cum_vf = cumulative_first_moments(nodes, (vf.as_slice(), vf.as_slice(), vfp.as_slice(), vfp.as_slice()));

        let last = len - 1;
        (0..len)
            .map(|t| {
                let integral = &cum_rf[last] - (&cum_vf[last] - &cum_vf[t]);
                &self.mean[t] + &self.j_inv[t] * integral
            })
            .collect()
    }
}

type SideArrays<'a> = (&'a [DVector<f64>], &'a [DVector<f64>], &'a [DVector<f64>], &'a [DVector<f64>]);

/// Cumulative `int_0^{x_k} x(u) y(u)^T du` at every node, integrated per step
/// with the corrected trapezoid
/// `Δ/2 (f_L + f_R) + Δ²/12 (f'_L − f'_R)`.
/// Arrays carry (right value, left value, right derivative, left derivative)
/// so each step uses its own panel's one-sided values at atoms.
pub(crate) fn cumulative_second_moments(
    nodes: &[f64],
    x: SideArrays<'_>,
    y: SideArrays<'_>,
) -> Vec<DMatrix<f64>> {
    let (x_r, x_l, xp_r, xp_l) = x;
    let (y_r, y_l, yp_r, yp_l) = y;
    let n = x_r[0].len();
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = DMatrix::zeros(n, n);
    out.push(acc.clone());
    for k in 0..nodes.len() - 1 {
        let dt = nodes[k + 1] - nodes[k];
        let outer = |a: &DVector<f64>, b: &DVector<f64>| a * b.transpose();
        let f_l = outer(&x_r[k], &y_r[k]);
        let f_r = outer(&x_l[k + 1], &y_l[k + 1]);
        let fp_l = outer(&xp_r[k], &y_r[k]) + outer(&x_r[k], &yp_r[k]);
        let fp_r = outer(&xp_l[k + 1], &y_l[k + 1]) + outer(&x_l[k + 1], &yp_l[k + 1]);
        acc += (f_l + f_r) * (0.5 * dt) + (fp_l - fp_r) * (dt * dt / 12.0);
        out.push(acc.clone());
    }
    out
}

/// Cumulative `int_0^{x_k} x(u) du` with the same corrected trapezoid.
fn cumulative_first_moments(nodes: &[f64], x: SideArrays<'_>) -> Vec<DVector<f64>> {
    let (x_r, x_l, xp_r, xp_l) = x;
    let n = x_r[0].len();
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = DVector::zeros(n);
    out.push(acc.clone());
    for k in 0..nodes.len() - 1 {
        let dt = nodes[k + 1] - nodes[k];
        acc += (&x_r[k] + &x_l[k + 1]) * (0.5 * dt) + (&xp_r[k] - &xp_l[k + 1]) * (dt * dt / 12.0);
        out.push(acc.clone());
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::problem::{BoundaryOperator, Coefficient, CoefficientSet, ProblemSpec};
    use nalgebra::{DMatrix, DVector};

    pub(crate) fn golden_table() -> GreenTable {
        let spec = ProblemSpec::new(
            CoefficientSet::new(vec![Coefficient::Constant { value: 0.0 }]).unwrap(),
            BoundaryOperator::new(
                vec![0.5, 1.0],
                DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
                DVector::from_vec(vec![0.0]),
            ),
        );
        GreenTable::new(&spec.validate().unwrap()).unwrap()
    }

    pub(crate) fn brownian_table() -> GreenTable {
        let spec = ProblemSpec::new(
            CoefficientSet::new(vec![Coefficient::Constant { value: 0.0 }]).unwrap(),
            BoundaryOperator::new(
                vec![0.0],
                DMatrix::from_row_slice(1, 1, &[1.0]),
                DVector::from_vec(vec![0.0]),
            ),
        );
        GreenTable::new(&spec.validate().unwrap()).unwrap()
    }

    #[test]
    fn not_wellposed_is_rejected() {
        let spec = ProblemSpec::new(
            CoefficientSet::new(vec![Coefficient::Constant { value: 0.0 }]).unwrap(),
            BoundaryOperator::new(
                vec![0.5, 1.0],
                DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
                DVector::from_vec(vec![0.0]),
            ),
        );
        assert!(matches!(
            GreenTable::new(&spec.validate().unwrap()),
            Err(Error::NotWellPosed { .. })
        ));
    }

    #[test]
    fn golden_influence_matches_closed_form() {
        // g(t,s) = 1/2 1_{s>=1/2} + 1/2 1_{s>=1} - 1_{t<=s}.
        let table = golden_table();
        let grid = table.problem().grid().clone();
        let half = grid.value(table.problem().point_nodes()[0]);
        let mut max_err: f64 = 0.0;
        for t in (0..grid.len()).step_by(97) {
            let col = table.influence_column(t);
            for s in 0..grid.len() {
                let sv = grid.value(s);
                let closed = 0.5 * ((sv >= half) as u8 as f64)
                    + 0.5 * ((s == grid.len() - 1) as u8 as f64)
                    - ((t <= s) as u8 as f64);
                max_err = max_err.max((col.values[s][0] - closed).abs());
            }
        }
        assert!(max_err < 1e-12, "max_err = {max_err:.3e}");

        // Spec'd spot value (the closed form gives -1/2 at (0.25, 0.75)).
        let t = grid.node_index(0.25).unwrap();
        let s = grid.node_index(0.75).unwrap();
        assert!((table.influence_at(t, s)[0] - (-0.5)).abs() < 1e-13);
    }

    #[test]
    fn green_vanishes_at_one() {
        for table in [golden_table(), brownian_table()] {
            let last = table.problem().grid().len() - 1;
            for t in (0..=last).step_by(83) {
                assert!(table.green_matrix(t, last).amax() <= table.tol_int());
            }
        }
    }

    #[test]
    fn brownian_influence_is_past_indicator() {
        let table = brownian_table();
        let last = table.problem().grid().len() - 1;
        for s in (0..=last).step_by(59) {
            let g = table.influence_at(last, s)[0];
            let expect = if s < last { 1.0 } else { 0.0 };
            assert!((g - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn jump_structure() {
        // Away from breakpoints G(t, s+) = G(t, s-); at s = t the jump is -I.
        let table = golden_table();
        let t = table.problem().grid().node_index(0.25).unwrap();
        let atoms = table.problem().point_nodes();
        for s in (1..table.problem().grid().len()).step_by(71) {
            let jump = table.green_matrix_sided(t, s, Side::Right)
                - table.green_matrix_sided(t, s, Side::Left);
            if s == t {
                assert!((jump[(0, 0)] + 1.0).abs() < 1e-12);
            } else if !atoms.contains(&s) {
                assert!(jump.amax() < 1e-13);
            }
        }
        let jump_at_t = table.green_matrix_sided(t, t, Side::Right)
            - table.green_matrix_sided(t, t, Side::Left);
        assert!((jump_at_t[(0, 0)] + 1.0).abs() < 1e-13);
    }

    #[test]
    fn brownian_covariance_is_min_kernel() {
        let table = brownian_table();
        let grid = table.problem().grid().clone();
        let mut max_err: f64 = 0.0;
        for ti in 0..=20 {
            for si in 0..=20 {
                let t = grid.node_index(ti as f64 * 0.05).unwrap();
                let s = grid.node_index(si as f64 * 0.05).unwrap();
                let c = table.cov_block(t, s)[(0, 0)];
                max_err = max_err.max((c - grid.value(t).min(grid.value(s))).abs());
            }
        }
        assert!(max_err < 1e-12, "max_err = {max_err:.3e}");
    }

    #[test]
    fn final_condition_covariance() {
        // X' = dW with X(1) = 0: the solution is W(t) - W(1), so
        // C(t,s) = 1 - max(t,s).
        let spec = ProblemSpec::new(
            CoefficientSet::new(vec![Coefficient::Constant { value: 0.0 }]).unwrap(),
            BoundaryOperator::new(
                vec![1.0],
                DMatrix::from_row_slice(1, 1, &[1.0]),
                DVector::from_vec(vec![0.0]),
            ),
        );
        let table = GreenTable::new(&spec.validate().unwrap()).unwrap();
        let grid = table.problem().grid().clone();
        for (t, s) in [(0.0, 0.0), (0.2, 0.7), (0.5, 0.5), (1.0, 0.3)] {
            let (ti, si) = (grid.node_index(t).unwrap(), grid.node_index(s).unwrap());
            let c = table.cov_block(ti, si)[(0, 0)];
            assert!((c - (1.0 - t.max(s))).abs() < 1e-12, "C({t},{s}) = {c}");
        }
    }

    #[test]
    fn second_order_dirichlet_kernel_is_classical() {
        // D^2 X = dW with X(0) = X(1) = 0. Solving directly,
        // X(t) = int [(t-s) 1_{s<=t} - t(1-s)] dW(s), i.e. the X-coordinate of
        // the influence kernel is -s(1-t) for s <= t and -t(1-s) for s > t,
        // and the DX-coordinate is its t-derivative s 1_{s<=t} + (s-1) 1_{s>t}.
        let spec = ProblemSpec::new(
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
        );
        let table = GreenTable::new(&spec.validate().unwrap()).unwrap();
        let grid = table.problem().grid().clone();
        let mut max_err: f64 = 0.0;
        for t_idx in (0..grid.len()).step_by(89) {
            let t = grid.value(t_idx);
            for s_idx in (0..grid.len()).step_by(47) {
                let s = grid.value(s_idx);
                let g = table.influence_at(t_idx, s_idx);
                // Right-continuous convention: the diagonal belongs to s >= t.
                let (dx_exact, x_exact) = if s_idx >= t_idx {
                    (s - 1.0, -t * (1.0 - s))
                } else {
                    (s, -s * (1.0 - t))
                };
                max_err = max_err.max((g[0] - dx_exact).abs()).max((g[1] - x_exact).abs());
            }
        }
        assert!(max_err < 1e-10, "max_err = {max_err:.3e}");

        // Var X(1/2) = int K(1/2,s)^2 ds = 1/48.
        let half = grid.node_index(0.5).unwrap();
        let var = table.cov_block(half, half)[(1, 1)];
        assert!((var - 1.0 / 48.0).abs() < 1e-9, "var = {var}");
    }

    #[test]
    fn golden_variance_at_half() {
        let table = golden_table();
        let half = table.problem().point_nodes()[0];
        let var = table.cov_block(half, half)[(0, 0)];
        assert!((var - 0.125).abs() < 1e-6, "var = {var}");
    }

    #[test]
    fn covariance_is_symmetric() {
        let spec = ProblemSpec::new(
            CoefficientSet::new(vec![
                Coefficient::Constant { value: 1.0 },
                Coefficient::Polynomial { coeffs: vec![0.2, -0.5] },
            ])
            .unwrap(),
            BoundaryOperator::new(
                vec![0.3, 0.8],
                DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
                DVector::from_vec(vec![0.1, -0.2]),
            ),
        );
        let table = GreenTable::new(&spec.validate().unwrap()).unwrap();
        for (t, s) in [(100, 700), (0, 500), (250, 250), (999, 400)] {
            let err = (table.cov_block(t, s) - table.cov_block(s, t).transpose()).amax();
            assert!(err < 1e-13, "err = {err:.3e}");
        }
    }

    #[test]
    fn reproduction_property() {
        // Two analytic problems: the Green representation must reproduce the
        // closed-form solution, satisfy the ODE under a 5-point stencil, and
        // meet the boundary conditions.

        // (i) n = 1: X' + 2X = cos(3t), X(0) = 1.
        let spec = ProblemSpec::new(
            CoefficientSet::new(vec![Coefficient::Constant { value: 2.0 }]).unwrap(),
            BoundaryOperator::new(
                vec![0.0],
                DMatrix::from_row_slice(1, 1, &[1.0]),
                DVector::from_vec(vec![1.0]),
            ),
        );
        let table = GreenTable::new(&spec.validate().unwrap()).unwrap();
        let y = table.deterministic_solution(&|t| (3.0 * t).cos(), &|t| -3.0 * (3.0 * t).sin());
        let grid = table.problem().grid().clone();
        let closed = |t: f64| {
            (-2.0 * t).exp() + (2.0 * (3.0 * t).cos() + 3.0 * (3.0 * t).sin() - 2.0 * (-2.0 * t).exp()) / 13.0
        };
        let mut max_err: f64 = 0.0;
        for (k, yk) in y.iter().enumerate() {
            max_err = max_err.max((yk[0] - closed(grid.value(k))).abs());
        }
        assert!(max_err <= 100.0 * table.tol_int(), "max_err = {max_err:.3e}");

        // (ii) n = 2, A = 0: X'' = 1 with X(0) = 0, X(1) = 0, so
        // X = t(t-1)/2 and Y = (X', X).
        let spec = ProblemSpec::new(
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
        );
        let table = GreenTable::new(&spec.validate().unwrap()).unwrap();
        let y = table.deterministic_solution(&|_| 1.0, &|_| 0.0);
        let mut max_err: f64 = 0.0;
        for (k, yk) in y.iter().enumerate() {
            let t = grid.value(k);
            max_err = max_err.max((yk[0] - (t - 0.5)).abs());
            max_err = max_err.max((yk[1] - 0.5 * t * (t - 1.0)).abs());
        }
        assert!(max_err <= 100.0 * table.tol_int(), "max_err = {max_err:.3e}");

        // Boundary residual Lambda[Y] - c.
        let x0 = y[table.problem().point_nodes()[0]][1];
        let x1 = y[table.problem().point_nodes()[1]][1];
        assert!(x0.abs() < 1e-12 && x1.abs() < 1e-12);

        // 5-point stencil: DY + AY = (f, 0)^T on uniform interior nodes. The
        // companion matrix still carries its structural -1 subdiagonal.
        let h = grid.h();
        let mut max_res: f64 = 0.0;
        for k in (2..grid.len() - 2).step_by(53) {
            // Skip irregular spacing near inserted nodes.
            if (0..4).any(|d| (grid.value(k - 2 + d + 1) - grid.value(k - 2 + d) - h).abs() > 1e-15) {
                continue;
            }
            let a = table.problem().companion(grid.value(k));
            for coord in 0..2 {
                let d = (y[k - 2][coord] - 8.0 * y[k - 1][coord] + 8.0 * y[k + 1][coord]
                    - y[k + 2][coord])
                    / (12.0 * h);
                let ay = a.row(coord).dot(&y[k].transpose());
                let forcing = if coord == 0 { 1.0 } else { 0.0 };
                max_res = max_res.max((d + ay - forcing).abs());
            }
        }
        assert!(max_res <= 100.0 * table.tol_int().max(1e-12), "max_res = {max_res:.3e}");
    }
}
