//! Boundary-operator canonicalization and classification: basic forms,
//! preserving pairs, the counts (l, q, p), the three subinterval regularity
//! systems, the splitting determinant of the Z1/Z2 decomposition, enlarged
//! conditioning sets, and the Markov-process split criterion.
//!
//! All classification works on a basic expression `(I, B^{-1} N)` of the
//! operator relative to a full-rank minor; the preserving verdict does not
//! depend on the basis choice, so the default basis is picked greedily for
//! stability only.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::green::GreenTable;
use crate::law::Label;
use crate::ode::{hadamard_normalized_det, subinterval_system, LinearCondition, SubDomain};
use crate::problem::ValidatedProblem;
use crate::tol::Tolerances;

/// A boundary operator in basic form relative to a full-rank minor: columns
/// at `basis[i]` equal `e_i`, the rest is `B^{-1} N`.
#[derive(Debug, Clone)]
pub struct BasicForm {
    /// `basis[i]` is the column mapped to the i-th identity column.
    pub basis: Vec<usize>,
    /// The transformed n x m matrix.
    pub lambda: DMatrix<f64>,
    /// Transformed right-hand side `B^{-1} c`.
    pub c: DVector<f64>,
    /// Per-row support: indices into `points` where the entry is nonzero
    /// (|entry| above the support threshold relative to the row maximum).
    pub supports: Vec<Vec<usize>>,
    pub points: Vec<f64>,
    pub point_nodes: Vec<usize>,
}

impl BasicForm {
    pub fn n(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn m(&self) -> usize {
        self.lambda.ncols()
    }

    /// Union of the row supports as node indices.
    pub fn support_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .supports
            .iter()
            .flatten()
            .map(|&j| self.point_nodes[j])
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }
}

/// Computes a basic form. `preferred_basis`, when given, lists the columns to
/// pair with rows 0..n (must form an invertible minor); otherwise columns are
/// chosen greedily left to right with max-|pivot| row selection.
pub fn basic_form(
    problem: &ValidatedProblem,
    preferred_basis: Option<&[usize]>,
    tol: &Tolerances,
) -> Result<BasicForm> {
    let alpha = problem.boundary().alpha();
    let n = alpha.nrows();
    let m = alpha.ncols();

    let basis: Vec<usize> = match preferred_basis {
        Some(cols) => {
            if cols.len() != n || cols.iter().any(|&j| j >= m) {
                return Err(Error::SingularBasis { columns: cols.to_vec() });
            }
            cols.to_vec()
        }
        None => {
            // Greedy rank-revealing sweep: walk columns left to right,
            // eliminating with the largest remaining pivot.
            let mut work = alpha.clone();
            let mut used_rows = vec![false; n];
            let mut pairs: Vec<(usize, usize)> = Vec::new();
            let scale = alpha.amax().max(1e-300);
            for j in 0..m {
                if pairs.len() == n {
                    break;
                }
                let mut best: Option<(usize, f64)> = None;
                for r in 0..n {
                    if !used_rows[r] {
                        let v = work[(r, j)].abs();
                        if best.map(|(_, bv)| v > bv).unwrap_or(true) {
                            best = Some((r, v));
                        }
                    }
                }
                if let Some((r, v)) = best {
                    if v > 1e-12 * scale {
                        let pivot = work[(r, j)];
                        for rr in 0..n {
                            if rr != r {
                                let factor = work[(rr, j)] / pivot;
                                for jj in 0..m {
                                    work[(rr, jj)] -= factor * work[(r, jj)];
                                }
                            }
                        }
                        used_rows[r] = true;
                        pairs.push((r, j));
                    }
                }
            }
            if pairs.len() != n {
                return Err(Error::RankDeficient { ratio: 0.0 });
            }
            let mut basis = vec![0usize; n];
            for (r, j) in pairs {
                basis[r] = j;
            }
            basis
        }
    };

    let b = DMatrix::from_fn(n, n, |i, k| alpha[(i, basis[k])]);
    let b_inv = match b.try_inverse() {
        Some(inv) => {
            // try_inverse succeeds on nearly singular minors; apply the same
            // scale-free rank test as validation.
            let sv = DMatrix::from_fn(n, n, |i, k| alpha[(i, basis[k])]).svd(false, false).singular_values;
            if sv[n - 1] <= tol.rank * sv.max() {
                return Err(Error::SingularBasis { columns: basis.clone() });
            }
            inv
        }
        None => return Err(Error::SingularBasis { columns: basis.clone() }),
    };

    let lambda = &b_inv * alpha;
    let c = &b_inv * problem.boundary().c();

    let supports = (0..n)
        .map(|i| {
            let row_max = (0..m).fold(0.0f64, |acc, j| acc.max(lambda[(i, j)].abs())).max(1e-300);
            (0..m).filter(|&j| lambda[(i, j)].abs() > tol.supp * row_max).collect()
        })
        .collect();

    Ok(BasicForm {
        basis,
        lambda,
        c,
        supports,
        points: problem.boundary().points().to_vec(),
        point_nodes: problem.point_nodes().to_vec(),
    })
}

/// Where one row's support sits relative to the pair (a, b).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSide {
    /// supp in [0, a[.
    Left,
    /// supp in ]a, b[.
    Inside,
    /// supp in ]b, 1].
    Right,
    /// supp in [a,b]^c with points on both sides of [a, b].
    OutsideBoth,
    /// Neither inside nor outside (including a support point at a or b).
    NonPreserving,
}

#[derive(Debug, Clone, Copy)]
pub struct RowClass {
    pub side: RowSide,
    pub preserving: bool,
    /// A support point coincides with a or b.
    pub endpoint_hit: bool,
}

/// The (4.4)-style ordering: row indices grouped by side.
#[derive(Debug, Clone, Default)]
pub struct RowOrdering {
    pub left: Vec<usize>,
    pub inside: Vec<usize>,
    pub right: Vec<usize>,
    pub outside_both: Vec<usize>,
    pub non_preserving: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PairClassification {
    /// Node indices of a and b.
    pub a: usize,
    pub b: usize,
    pub rows: Vec<RowClass>,
    pub preserves: bool,
    /// Row counts with support in [0,a[, ]a,b[, ]b,1].
    pub l: usize,
    pub q: usize,
    pub p: usize,
    pub order: RowOrdering,
    /// a or b lies in some row's support (Theorems on enlarged or split
    /// conditioning assume this does not happen).
    pub endpoint_hit: bool,
}

/// Classifies each row of the basic form against the pair of nodes (a, b).
/// Interval conventions are literal: ]a,b[ open, [a,b]^c = [0,a[ u ]b,1].
pub fn preserves(basic: &BasicForm, a: usize, b: usize) -> PairClassification {
    assert!(a < b, "pair must satisfy a < b");
    let mut rows = Vec::with_capacity(basic.n());
    let mut order = RowOrdering::default();
    for (i, supp) in basic.supports.iter().enumerate() {
        let nodes: Vec<usize> = supp.iter().map(|&j| basic.point_nodes[j]).collect();
        let hit = nodes.iter().any(|&x| x == a || x == b);
        let all_inside = nodes.iter().all(|&x| x > a && x < b);
        let all_left = nodes.iter().all(|&x| x < a);
        let all_right = nodes.iter().all(|&x| x > b);
        let all_outside = nodes.iter().all(|&x| x < a || x > b);
        let side = if hit {
            RowSide::NonPreserving
        } else if all_inside {
            RowSide::Inside
        } else if all_left {
            RowSide::Left
        } else if all_right {
            RowSide::Right
        } else if all_outside {
            RowSide::OutsideBoth
        } else {
            RowSide::NonPreserving
        };
        match side {
            RowSide::Left => order.left.push(i),
            RowSide::Inside => order.inside.push(i),
            RowSide::Right => order.right.push(i),
            RowSide::OutsideBoth => order.outside_both.push(i),
            RowSide::NonPreserving => order.non_preserving.push(i),
        }
        rows.push(RowClass { side, preserving: side != RowSide::NonPreserving, endpoint_hit: hit });
    }
    PairClassification {
        a,
        b,
        preserves: order.non_preserving.is_empty(),
        l: order.left.len(),
        q: order.inside.len(),
        p: order.right.len(),
        endpoint_hit: rows.iter().any(|r| r.endpoint_hit),
        rows,
        order,
    }
}

/// Checks that the preserving verdict agrees across `trials` random bases
/// (it must; the basic-form classification is basis-invariant).
pub fn classification_invariance(
    problem: &ValidatedProblem,
    a: usize,
    b: usize,
    trials: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<bool> {
    let reference = preserves(&basic_form(problem, None, tol)?, a, b).preserves;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = problem.m();
    let n = problem.n();
    let mut cols: Vec<usize> = (0..m).collect();
    let mut tested = 0;
    let mut attempts = 0;
    while tested < trials && attempts < 200 * trials {
        attempts += 1;
        cols.shuffle(&mut rng);
        let candidate = &cols[..n];
        // Skip ill-conditioned minors: near-singular bases place real entries
        // at the support threshold and test rounding noise, not the lemma.
        let minor = DMatrix::from_fn(n, n, |i, k| problem.boundary().alpha()[(i, candidate[k])]);
        let sv = minor.svd(false, false).singular_values;
        if sv[n - 1] <= 1e-6 * sv.max() {
            continue;
        }
        let basic = basic_form(problem, Some(candidate), tol)?;
        if preserves(&basic, a, b).preserves != reference {
            return Ok(false);
        }
        tested += 1;
    }
    Ok(true)
}

/// Determinant report for the three homogeneous systems (on [0,a], [a,b],
/// [b,1]) that define regularity of a preserved pair.
#[derive(Debug, Clone, Copy)]
pub struct RegularityReport {
    pub dets: [f64; 3],
    /// Hadamard-normalized |det|, scale-free in [0,1].
    pub normalized: [f64; 3],
    pub per_system: [bool; 3],
    pub regular: bool,
}

fn row_condition(basic: &BasicForm, row: usize, filter: impl Fn(usize) -> bool) -> LinearCondition {
    let n = basic.n();
    let terms = basic.supports[row]
        .iter()
        .map(|&j| (basic.point_nodes[j], n - 1, basic.lambda[(row, j)]))
        .filter(|&(node, _, _)| filter(node))
        .collect();
    LinearCondition { terms }
}

/// Assembles and evaluates the three regularity systems for a preserved pair.
pub fn regularity(
    table: &GreenTable,
    basic: &BasicForm,
    cls: &PairClassification,
) -> Result<RegularityReport> {
    let problem = table.problem();
    let grid = problem.grid();
    if !cls.preserves {
        return Err(Error::NotPreserved { a: grid.value(cls.a), b: grid.value(cls.b) });
    }
    let n = basic.n();
    let (l, q) = (cls.l, cls.q);
    let (a, b) = (cls.a, cls.b);
    let last = grid.len() - 1;
    let tol = table.tolerances();

    // System on [0,a]: Y_j(a) = 0 for the first n-l coordinates plus the
    // l conditions supported in [0,a[.
    let mut conds_1: Vec<LinearCondition> = (0..n - l).map(|j| LinearCondition::pin(a, j)).collect();
    for &i in &cls.order.left {
        conds_1.push(row_condition(basic, i, |_| true));
    }

    // System on [a,b]: Y_j(b) = 0 for j < n-l-q, Y_j(a) = 0 for j >= n-l,
    // plus the q inside conditions.
    let mut conds_2: Vec<LinearCondition> = (0..n - l - q).map(|j| LinearCondition::pin(b, j)).collect();
    conds_2.extend((n - l..n).map(|j| LinearCondition::pin(a, j)));
    for &i in &cls.order.inside {
        conds_2.push(row_condition(basic, i, |_| true));
    }

    // System on [b,1]: Y_j(b) = 0 for j >= n-l-q, the p outside conditions,
    // and the mixed conditions with their [0,a] contributions dropped
    // (forced to zero by the Y_n lines of the display).
    let mut conds_3: Vec<LinearCondition> = (n - l - q..n).map(|j| LinearCondition::pin(b, j)).collect();
    for &i in &cls.order.right {
        conds_3.push(row_condition(basic, i, |_| true));
    }
    for &i in &cls.order.outside_both {
        conds_3.push(row_condition(basic, i, |node| node > b));
    }

    let systems = [
        subinterval_system(problem, SubDomain::Interval { lo: 0, hi: a }, &conds_1, None)?,
        subinterval_system(problem, SubDomain::Interval { lo: a, hi: b }, &conds_2, None)?,
        subinterval_system(problem, SubDomain::Interval { lo: b, hi: last }, &conds_3, None)?,
    ];
    let mut dets = [0.0; 3];
    let mut normalized = [0.0; 3];
    let mut per_system = [false; 3];
    for (k, sys) in systems.iter().enumerate() {
        dets[k] = sys.matrix.determinant();
        normalized[k] = hadamard_normalized_det(&sys.matrix);
        per_system[k] = normalized[k] > tol.det;
    }
    Ok(RegularityReport { dets, normalized, per_system, regular: per_system.iter().all(|&x| x) })
}

#[derive(Debug, Clone, Copy)]
pub struct SplittingReport {
    pub det: f64,
    /// Hadamard-normalized |det(I - grad_g1 grad_g2)|.
    pub normalized: f64,
}

/// det[I - grad g1 grad g2] of the Z1/Z2 splitting maps: Z1 collects the
/// first n-l coordinates at a and the last l+q at b; Z2 the complement. Each
/// gradient column is the homogeneous subinterval solve driven by a unit
/// perturbation of the opposite block (zero noise, zero data). Nonzero iff
/// the coupled system determines (Y(a), Y(b)) uniquely.
pub fn splitting_determinant(
    table: &GreenTable,
    basic: &BasicForm,
    cls: &PairClassification,
) -> Result<SplittingReport> {
    let problem = table.problem();
    let grid = problem.grid();
    let (av, bv) = (grid.value(cls.a), grid.value(cls.b));
    if !cls.preserves {
        return Err(Error::NotPreserved { a: av, b: bv });
    }
    let report = regularity(table, basic, cls)?;
    if !report.regular {
        let bad = report.per_system.iter().position(|&ok| !ok).unwrap();
        return Err(Error::SingularPair { a: av, b: bv, system: 5 + bad as u8, det: report.dets[bad] });
    }

    let n = basic.n();
    let (l, q) = (cls.l, cls.q);
    let (a, b) = (cls.a, cls.b);
    let last = grid.len() - 1;
    let dim1 = n + q;
    let dim2 = n - q;

    // [a,b] system (base a): rows are b-pins for j < n-l-q, a-pins for
    // j >= n-l, then the inside conditions.
    let mut conds_mid: Vec<LinearCondition> = (0..n - l - q).map(|j| LinearCondition::pin(b, j)).collect();
    conds_mid.extend((n - l..n).map(|j| LinearCondition::pin(a, j)));
    for &i in &cls.order.inside {
        conds_mid.push(row_condition(basic, i, |_| true));
    }
    let sys_mid = subinterval_system(problem, SubDomain::Interval { lo: a, hi: b }, &conds_mid, None)?;
    let lu_mid = sys_mid.matrix.clone().lu();
    let phi_ab = sys_mid.flows[0].at(b).clone();

    let mut grad_g1 = DMatrix::zeros(dim1, dim2);
    for k in 0..dim2 {
        let mut rhs = DVector::zeros(n);
        // Z2 components: coordinates 0..n-l-q at b, then n-l..n at a.
        for j in 0..n - l - q {
            if k == j {
                rhs[j] = 1.0;
            }
        }
        for j in n - l..n {
            let z2_index = (n - l - q) + (j - (n - l));
            if k == z2_index {
                rhs[(n - l - q) + (j - (n - l))] = 1.0;
            }
        }
        let y = lu_mid.solve(&rhs).ok_or(Error::SingularPair {
            a: av,
            b: bv,
            system: 6,
            det: report.dets[1],
        })?;
        // Z1: coordinates 0..n-l at a (the base), then n-l-q..n at b.
        for j in 0..n - l {
            grad_g1[(j, k)] = y[j];
        }
        for j in n - l - q..n {
            grad_g1[((n - l) + (j - (n - l - q)), k)] = phi_ab.row(j).dot(&y.transpose());
        }
    }

    // [0,a] system with base a, so the unknown is Y(a) itself.
    let mut conds_left: Vec<LinearCondition> = (0..n - l).map(|j| LinearCondition::pin(a, j)).collect();
    for &i in &cls.order.left {
        conds_left.push(row_condition(basic, i, |_| true));
    }
    let sys_left =
        subinterval_system(problem, SubDomain::Interval { lo: 0, hi: a }, &conds_left, Some(&[a]))?;
    let lu_left = sys_left.matrix.clone().lu();

    // [b,1] system (base b): b-pins for j >= n-l-q, the p outside rows, and
    // the reduced mixed rows.
    let mut conds_right: Vec<LinearCondition> =
        (n - l - q..n).map(|j| LinearCondition::pin(b, j)).collect();
    for &i in &cls.order.right {
        conds_right.push(row_condition(basic, i, |_| true));
    }
    for &i in &cls.order.outside_both {
        conds_right.push(row_condition(basic, i, |node| node > b));
    }
    let sys_right =
        subinterval_system(problem, SubDomain::Interval { lo: b, hi: last }, &conds_right, None)?;
    let lu_right = sys_right.matrix.clone().lu();

    let mut grad_g2 = DMatrix::zeros(dim2, dim1);
    for k in 0..dim1 {
        // Solve on [0,a]: pins Y_j(a) = Z1_j for j < n-l, left rows zero.
        let mut rhs_left = DVector::zeros(n);
        for j in 0..n - l {
            if k == j {
                rhs_left[j] = 1.0;
            }
        }
        let y_left = lu_left.solve(&rhs_left).ok_or(Error::SingularPair {
            a: av,
            b: bv,
            system: 5,
            det: report.dets[0],
        })?;

        // Solve on [b,1]: pins Y_j(b) = Z1_{j+q}, outside rows zero, mixed
        // rows pick up -sum_{t_j <= a} alpha_ij Y_n(t_j) from the left solve.
        let mut rhs_right = DVector::zeros(n);
        for j in n - l - q..n {
            let z1_index = (n - l) + (j - (n - l - q));
            if k == z1_index {
                rhs_right[j - (n - l - q)] = 1.0;
            }
        }
        let first_mixed_row = (l + q) + cls.order.right.len();
        for (offset, &i) in cls.order.outside_both.iter().enumerate() {
            let mut acc = 0.0;
            for &jj in &basic.supports[i] {
                let node = basic.point_nodes[jj];
                if node < a {
                    let yn = sys_left.flows[0].at(node).row(n - 1).dot(&y_left.transpose());
                    acc += basic.lambda[(i, jj)] * yn;
                }
            }
            rhs_right[first_mixed_row + offset] = -acc;
        }
        let y_right = lu_right.solve(&rhs_right).ok_or(Error::SingularPair {
            a: av,
            b: bv,
            system: 7,
            det: report.dets[2],
        })?;

        // Z2: coordinates 0..n-l-q at b (base of the right solve), then
        // n-l..n at a (from the left solve).
        for j in 0..n - l - q {
            grad_g2[(j, k)] = y_right[j];
        }
        for j in n - l..n {
            grad_g2[((n - l - q) + (j - (n - l)), k)] = y_left[j];
        }
    }

    let m = DMatrix::identity(dim1, dim1) - &grad_g1 * &grad_g2;
    Ok(SplittingReport { det: m.determinant(), normalized: hadamard_normalized_det(&m) })
}

/// Variant of the enlarged conditioning set of the non-preserving theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnlargedVariant {
    /// Enlarge with `Y_n(t)` for t in supp of a non-preserving row inside ]a,b[.
    Inside,
    /// Same with [a,b]^c instead.
    Outside,
}

/// `{Y(a), Y(b)}` (all coordinates) enlarged with `Y_n(t)` at the support
/// points of non-preserving rows on the requested side. Requires a and b
/// outside the support of the operator.
pub fn enlarged_condition_set(
    basic: &BasicForm,
    cls: &PairClassification,
    variant: EnlargedVariant,
) -> Result<Vec<Label>> {
    let n = basic.n();
    if cls.endpoint_hit {
        let value = basic
            .point_nodes
            .iter()
            .zip(&basic.points)
            .find(|(&node, _)| node == cls.a || node == cls.b)
            .map(|(_, &v)| v)
            .unwrap_or(f64::NAN);
        return Err(Error::EndpointInSupport { t: value });
    }
    let mut labels: Vec<Label> = Vec::new();
    for t in [cls.a, cls.b] {
        for coord in 0..n {
            labels.push(Label::new(t, coord));
        }
    }
    for &i in &cls.order.non_preserving {
        for &j in &basic.supports[i] {
            let node = basic.point_nodes[j];
            let keep = match variant {
                EnlargedVariant::Inside => node > cls.a && node < cls.b,
                EnlargedVariant::Outside => node < cls.a || node > cls.b,
            };
            if keep {
                let label = Label::new(node, n - 1);
                if !labels.contains(&label) {
                    labels.push(label);
                }
            }
        }
    }
    Ok(labels)
}

/// Markov-process split criterion at `a`: true iff every row support lies
/// entirely in [0,a[ or entirely in ]a,1]. Requires a outside the support.
pub fn markov_split_ok(basic: &BasicForm, a: usize) -> Result<bool> {
    for (supp, _) in basic.supports.iter().zip(0..) {
        if supp.iter().any(|&j| basic.point_nodes[j] == a) {
            let value = basic
                .point_nodes
                .iter()
                .zip(&basic.points)
                .find(|(&node, _)| node == a)
                .map(|(_, &v)| v)
                .unwrap_or(f64::NAN);
            return Err(Error::EndpointInSupport { t: value });
        }
    }
    Ok(basic.supports.iter().all(|supp| {
        let nodes: Vec<usize> = supp.iter().map(|&j| basic.point_nodes[j]).collect();
        nodes.iter().all(|&x| x < a) || nodes.iter().all(|&x| x > a)
    }))
}
