//! Exact Gaussian law of the solution on finite label sets, partial
//! cross-covariances, conditional-independence verdicts, and the rank/support
//! surrogate for absolute continuity on the boundary manifold.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::green::GreenTable;
use crate::tol::Tolerances;

/// One scalar observable `Y_coord(t)` of the solution: a grid node and a
/// 0-based coordinate (coordinate `n-1` is `X = Y_n`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Label {
    pub node: usize,
    pub coord: usize,
}

impl Label {
    pub fn new(node: usize, coord: usize) -> Self {
        Label { node, coord }
    }
}

/// Labels `(t, 0), ..., (t, n-1)` (all coordinates) for each time in `nodes`.
pub fn full_labels(n: usize, nodes: &[usize]) -> Vec<Label> {
    nodes.iter().flat_map(|&t| (0..n).map(move |c| Label::new(t, c))).collect()
}

/// Finite-dimensional marginal of the solution law.
#[derive(Debug, Clone)]
pub struct JointGaussian {
    pub labels: Vec<Label>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Assembles mean and covariance over `labels`. The covariance is exactly
/// symmetric by construction (upper blocks mirrored).
pub fn joint_law(table: &GreenTable, labels: &[Label]) -> JointGaussian {
    let k = labels.len();
    let mut mean = DVector::zeros(k);
    for (i, l) in labels.iter().enumerate() {
        mean[i] = table.mean_at(l.node)[l.coord];
    }

    let mut blocks: HashMap<(usize, usize), DMatrix<f64>> = HashMap::new();
    let mut cov = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let (ti, tj) = (labels[i].node, labels[j].node);
            let key = (ti.min(tj), ti.max(tj));
            let block = blocks.entry(key).or_insert_with(|| table.cov_block(key.0, key.1));
            let value = if ti <= tj {
                block[(labels[i].coord, labels[j].coord)]
            } else {
                block[(labels[j].coord, labels[i].coord)]
            };
            cov[(i, j)] = value;
            cov[(j, i)] = value;
        }
    }
    JointGaussian { labels: labels.to_vec(), mean, cov }
}

/// Partial cross-covariance of blocks A and B given C, with the conditional
/// variances of each A/B entry and the numerical rank of the conditioning
/// block.
#[derive(Debug, Clone)]
pub struct PartialCovariance {
    pub cross: DMatrix<f64>,
    pub cond_rank: usize,
    pub cvar_a: DVector<f64>,
    pub cvar_b: DVector<f64>,
    /// Unconditional variances of the A and B entries (degeneracy reference).
    pub var_a: DVector<f64>,
    pub var_b: DVector<f64>,
}

/// `Sigma_AB - Sigma_AC Sigma_CC^+ Sigma_CB`, with the pseudo-inverse taken
/// through a symmetric eigendecomposition and eigenvalues below
/// `pinv_cutoff * lambda_max` treated as zero. Degenerate conditioning is
/// expected (boundary constraints kill directions) and handled here.
pub fn conditional_cross_covariance(
    joint: &JointGaussian,
    idx_a: &[usize],
    idx_b: &[usize],
    idx_c: &[usize],
    pinv_cutoff: f64,
) -> PartialCovariance {
    let pick = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| joint.cov[(rows[i], cols[j])])
    };
    let s_ab = pick(idx_a, idx_b);
    let s_aa = pick(idx_a, idx_a);
    let s_bb = pick(idx_b, idx_b);
    if idx_c.is_empty() {
        return PartialCovariance {
            cross: s_ab,
            cond_rank: 0,
            cvar_a: s_aa.diagonal(),
            cvar_b: s_bb.diagonal(),
            var_a: s_aa.diagonal(),
            var_b: s_bb.diagonal(),
        };
    }
    let s_cc = pick(idx_c, idx_c);
    let s_ca = pick(idx_c, idx_a);
    let s_cb = pick(idx_c, idx_b);

    let eigen = SymmetricEigen::new(s_cc);
    let lambda_max = eigen.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let cutoff = pinv_cutoff * lambda_max;
    let mut rank = 0;
    let mut inv = DVector::zeros(idx_c.len());
    for (i, &l) in eigen.eigenvalues.iter().enumerate() {
        if l > cutoff && l > 0.0 {
            inv[i] = 1.0 / l;
            rank += 1;
        }
    }
    // Sigma_CC^+ M = V diag(inv) V^T M.
    let apply_pinv = |m: &DMatrix<f64>| -> DMatrix<f64> {
        let vt_m = eigen.eigenvectors.transpose() * m;
        let mut scaled = vt_m;
        for i in 0..inv.len() {
            let w = inv[i];
            scaled.row_mut(i).scale_mut(w);
        }
        &eigen.eigenvectors * scaled
    };

    let pinv_ca = apply_pinv(&s_ca);
    let pinv_cb = apply_pinv(&s_cb);
    let cross = &s_ab - s_ca.transpose() * &pinv_cb;
    let var_a = s_aa.diagonal();
    let var_b = s_bb.diagonal();
    let cvar_a = (s_aa - s_ca.transpose() * &pinv_ca).diagonal().map(|x| x.max(0.0));
    let cvar_b = (s_bb - s_cb.transpose() * &pinv_cb).diagonal().map(|x| x.max(0.0));
    PartialCovariance { cross, cond_rank: rank, cvar_a, cvar_b, var_a, var_b }
}

/// Conditional-independence verdict between two blocks given a conditioning
/// set. Gaussian law: independence holds iff the partial cross-covariance
/// vanishes; the verdict tests the normalized value against `tol.ci`.
#[derive(Debug, Clone, Copy)]
pub struct CiVerdict {
    pub max_abs_partial_cov: f64,
    /// Max over entries of |partial cov| / (conditional std_A * std_B);
    /// entries whose conditional variance falls below `tol.var` enter
    /// unnormalized.
    pub normalized: f64,
    pub independent: bool,
    pub conditioning_rank: usize,
}

/// Tests conditional independence of `{Y(t), t in times_a}` and
/// `{Y(t), t in times_b}` (all coordinates per time) given `cond`.
pub fn ci_test(
    table: &GreenTable,
    times_a: &[usize],
    times_b: &[usize],
    cond: &[Label],
    tol: &Tolerances,
) -> CiVerdict {
    let n = table.problem().n();
    let a = full_labels(n, times_a);
    let b = full_labels(n, times_b);
    ci_test_labels(table, &a, &b, cond, tol)
}

/// Label-level variant of [`ci_test`].
pub fn ci_test_labels(
    table: &GreenTable,
    labels_a: &[Label],
    labels_b: &[Label],
    cond: &[Label],
    tol: &Tolerances,
) -> CiVerdict {
    let mut labels = labels_a.to_vec();
    labels.extend_from_slice(labels_b);
    labels.extend_from_slice(cond);
    let joint = joint_law(table, &labels);

    let na = labels_a.len();
    let nb = labels_b.len();
    let idx_a: Vec<usize> = (0..na).collect();
    let idx_b: Vec<usize> = (na..na + nb).collect();
    let idx_c: Vec<usize> = (na + nb..labels.len()).collect();
    let pc = conditional_cross_covariance(&joint, &idx_a, &idx_b, &idx_c, tol.pinv);

    let scale = pc.var_a.iter().chain(pc.var_b.iter()).fold(0.0f64, |m, &v| m.max(v));
    let floor = tol.var.max(tol.var_rel * scale);
    let mut max_abs: f64 = 0.0;
    let mut normalized: f64 = 0.0;
    for i in 0..na {
        for j in 0..nb {
            let raw = pc.cross[(i, j)].abs();
            max_abs = max_abs.max(raw);
            let (va, vb) = (pc.cvar_a[i], pc.cvar_b[j]);
            let value = if va >= floor && vb >= floor { raw / (va * vb).sqrt() } else { raw };
            normalized = normalized.max(value);
        }
    }
    CiVerdict {
        max_abs_partial_cov: max_abs,
        normalized,
        independent: normalized <= tol.ci,
        conditioning_rank: pc.cond_rank,
    }
}

/// Rank/support surrogate for absolute continuity on the constraint manifold:
/// the stacked covariance of `(Y(s_1), ..., Y(s_k))` must have rank `n k - n`
/// with the boundary rows spanning the null space.
#[derive(Debug, Clone)]
pub struct SupportRank {
    pub rank: usize,
    pub expected_rank: usize,
    pub nullspace_ok: bool,
    pub max_constraint_residual: f64,
}

pub fn support_rank(table: &GreenTable, times: &[usize]) -> Result<SupportRank> {
    let problem = table.problem();
    let n = problem.n();
    for (&node, &t) in problem.point_nodes().iter().zip(problem.boundary().points()) {
        if !times.contains(&node) {
            return Err(Error::SupportNotCovered { t });
        }
    }
    let labels = full_labels(n, times);
    let joint = joint_law(table, &labels);
    let k = times.len();

    let eigen = SymmetricEigen::new(joint.cov.clone());
    let lambda_max = eigen.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let tol = table.tolerances();
    let rank = eigen
        .eigenvalues
        .iter()
        .filter(|&&l| l > tol.rank_eig * lambda_max && l > 0.0)
        .count();
    let expected_rank = n * k - n;

    // Constraint directions: row i acts as alpha_ij on Y_n(t_j).
    let mut max_residual: f64 = 0.0;
    for i in 0..n {
        let mut u = DVector::zeros(n * k);
        for (j, &node) in problem.point_nodes().iter().enumerate() {
            let pos = times.iter().position(|&t| t == node).expect("checked above");
            u[pos * n + (n - 1)] = problem.boundary().alpha()[(i, j)];
        }
        let residual = (&joint.cov * &u).norm() / (lambda_max.max(1e-300) * u.norm());
        max_residual = max_residual.max(residual);
    }
    let nullspace_ok = rank == expected_rank && max_residual <= tol.constraint;
    Ok(SupportRank { rank, expected_rank, nullspace_ok, max_constraint_residual: max_residual })
}

/// Largest violation of positive semidefiniteness, relative to the largest
/// eigenvalue (0 when the matrix is PSD).
pub fn psd_violation(cov: &DMatrix<f64>) -> f64 {
    let eigen = SymmetricEigen::new(cov.clone());
    let lambda_max = eigen.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l));
    let lambda_min = eigen.eigenvalues.iter().fold(f64::INFINITY, |m, &l| m.min(l));
    if lambda_min >= 0.0 {
        0.0
    } else {
        -lambda_min / lambda_max.max(1e-300)
    }
}
