//! Monte Carlo layer: Wiener path generation, pathwise solution synthesis,
//! empirical covariance estimation, and the coefficient-perturbation
//! convergence experiment.
//!
//! Paths are keyed by (seed, stream): each stream owns an independent ChaCha
//! generator, so parallel generation is deterministic and order-independent.
//! Accumulation runs over fixed-size chunks combined in index order, which
//! keeps estimates bit-identical across thread schedules.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::green::{cumulative_second_moments, GreenTable};
use crate::law::Label;
use crate::problem::{Coefficient, Grid, ValidatedProblem};
use crate::tol::eps_path;

/// One discrete Wiener path on the master grid, W(0) = 0.
#[derive(Debug, Clone)]
pub struct WienerPath {
    pub seed: u64,
    pub stream: u64,
    pub values: Vec<f64>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}

/// Gaussian increments N(0, dt) from a generator keyed by (seed, stream);
/// the same key reproduces the path bit for bit.
pub fn sample_wiener(grid: &Grid, seed: u64, stream: u64) -> WienerPath {
    let mut rng = path_rng(seed, stream);
    let nodes = grid.nodes();
    let mut values = Vec::with_capacity(nodes.len());
    values.push(0.0);
    let mut w = 0.0;
    for k in 0..nodes.len() - 1 {
        let dt = nodes[k + 1] - nodes[k];
        let z: f64 = StandardNormal.sample(&mut rng);
        w += z * dt.sqrt();
        values.push(w);
    }
    WienerPath { seed, stream, values }
}

/// One solution path Y(t_k) on the grid.
#[derive(Debug, Clone)]
pub struct SolutionPath {
    pub values: Vec<DVector<f64>>,
}

/// Pathwise synthesis of `Y(t) = J(t)^{-1} c + int G(t,s) dB(s)` as a Wiener
/// sum with panel-trapezoid kernel weights (the average of the panel's two
/// one-sided values; atoms and the diagonal jump stay in their own panel):
/// `Y(t_k) = J(t_k)^{-1} (c + sum_l rbar_l dW_l - sum_{l >= k} vbar_l dW_l)`.
pub fn sample_solution(table: &GreenTable, wiener: &WienerPath) -> Result<SolutionPath> {
    let problem = table.problem();
    let len = problem.grid().len();
    if wiener.values.len() != len {
        return Err(Error::GridMismatch { t: wiener.values.len() as f64 });
    }
    let n = problem.n();
    let c = problem.boundary().c();

    let mut fixed = DVector::zeros(n);
    for l in 0..len - 1 {
        let dw = wiener.values[l + 1] - wiener.values[l];
        fixed.axpy(dw, &table.r_panel[l], 1.0);
    }
    // Suffix sums T[k] = sum_{l >= k} vbar_l dW_l.
    let mut suffix = vec![DVector::zeros(n); len];
    for l in (0..len - 1).rev() {
        let dw = wiener.values[l + 1] - wiener.values[l];
        suffix[l] = &suffix[l + 1] + &table.v_panel[l] * dw;
    }
    let values = (0..len)
        .map(|k| {
            let inner = c + &fixed - &suffix[k];
            table.j_inv(k) * inner
        })
        .collect();
    Ok(SolutionPath { values })
}

/// Same path through the integration-by-parts form
/// `-sum_l W(s_l) (g(t, s_l) - g(t, s_{l-1}))`; used as a cross-check of the
/// Wiener-increment form.
pub fn sample_solution_by_parts(table: &GreenTable, wiener: &WienerPath) -> Result<SolutionPath> {
    let problem = table.problem();
    let len = problem.grid().len();
    if wiener.values.len() != len {
        return Err(Error::GridMismatch { t: wiener.values.len() as f64 });
    }
    let values = (0..len)
        .map(|t| {
            let mut acc = table.mean_at(t).clone();
            let mut prev = table.influence_at(t, 0);
            for l in 1..len {
                let cur = table.influence_at(t, l);
                acc.axpy(-wiener.values[l], &(&cur - &prev), 1.0);
                prev = cur;
            }
            acc
        })
        .collect();
    Ok(SolutionPath { values })
}

/// `Lambda[Y] - c` for a sampled path.
pub fn boundary_residual(problem: &ValidatedProblem, path: &SolutionPath) -> DVector<f64> {
    let n = problem.n();
    let alpha = problem.boundary().alpha();
    let mut residual = -problem.boundary().c().clone();
    for (j, &node) in problem.point_nodes().iter().enumerate() {
        for i in 0..n {
            residual[i] += alpha[(i, j)] * path.values[node][n - 1];
        }
    }
    residual
}

/// Pathwise tolerance for this problem's grid.
pub fn path_tolerance(problem: &ValidatedProblem) -> f64 {
    eps_path(problem.h())
}

/// Empirical moments over independent paths.
#[derive(Debug, Clone)]
pub struct McEstimate {
    pub labels: Vec<Label>,
    pub n_paths: usize,
    pub mean: DVector<f64>,
    /// Sample covariance; `None` when fewer than two paths were drawn.
    pub cov: Option<DMatrix<f64>>,
    /// Per-entry standard error of the covariance estimate.
    pub stderr: Option<DMatrix<f64>>,
}

const CHUNK: usize = 2048;

/// Monte Carlo mean/covariance of the labelled observables over `n_paths`
/// paths with per-path stream ids `0..n_paths`.
pub fn mc_covariance(
    table: &GreenTable,
    labels: &[Label],
    n_paths: usize,
    seed: u64,
) -> McEstimate {
    let problem = table.problem();
    let grid = problem.grid();
    let len = grid.len();
    let k = labels.len();

    // Kernel rows: value of label (t, i) is mean + sum_l row[l] dW_l with
    // row[l] = (e_i^T J(t)^{-1}) (r(s_l) - 1_{s_l >= t} v(s_l)).
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut means = DVector::zeros(k);
    for (idx, label) in labels.iter().enumerate() {
        means[idx] = table.mean_at(label.node)[label.coord];
        let jrow = table.j_inv(label.node).row(label.coord).into_owned();
        let row: Vec<f64> = (0..len - 1)
            .map(|l| {
                let mut val = jrow.dot(&table.r_panel[l].transpose());
                if label.node <= l {
                    val -= jrow.dot(&table.v_panel[l].transpose());
                }
                val
            })
            .collect();
        rows.push(row);
    }
    let sqrt_dt: Vec<f64> =
        (0..len - 1).map(|l| (grid.value(l + 1) - grid.value(l)).sqrt()).collect();

    let n_chunks = n_paths.div_ceil(CHUNK);
    let partials: Vec<(DVector<f64>, DMatrix<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = ((chunk + 1) * CHUNK).min(n_paths);
            let mut sum = DVector::zeros(k);
            let mut sumsq = DMatrix::zeros(k, k);
            let mut x = vec![0.0; k];
            let mut dw = vec![0.0; len - 1];
            for path in lo..hi {
                let mut rng = path_rng(seed, path as u64);
                for l in 0..len - 1 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    dw[l] = z * sqrt_dt[l];
                }
                for (idx, row) in rows.iter().enumerate() {
                    let mut acc = 0.0;
                    for l in 0..len - 1 {
                        acc += row[l] * dw[l];
                    }
                    x[idx] = means[idx] + acc;
                }
                for i in 0..k {
                    sum[i] += x[i];
                    for j in 0..k {
                        sumsq[(i, j)] += x[i] * x[j];
                    }
                }
            }
            (sum, sumsq)
        })
        .collect();

    let mut sum = DVector::zeros(k);
    let mut sumsq = DMatrix::zeros(k, k);
    for (s, sq) in partials {
        sum += s;
        sumsq += sq;
    }

    let p = n_paths as f64;
    let mean = &sum / p;
    let (cov, stderr) = if n_paths >= 2 {
        let mut cov = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                cov[(i, j)] = (sumsq[(i, j)] - p * mean[i] * mean[j]) / (p - 1.0);
            }
        }
        let stderr = DMatrix::from_fn(k, k, |i, j| {
            ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)] * cov[(i, j)]) / p).sqrt()
        });
        (Some(cov), Some(stderr))
    } else {
        (None, None)
    };
    McEstimate { labels: labels.to_vec(), n_paths, mean, cov, stderr }
}

/// One row of the perturbation experiment table.
#[derive(Debug, Clone, Copy)]
pub struct PerturbationRow {
    pub n: u32,
    /// sup over grid t of the exact L2 distance between the perturbed and
    /// base solutions (driven by the same Wiener process).
    pub sup_l2: f64,
    /// sup over grid (t,s) of the entrywise Green-kernel distance.
    pub kernel_sup: f64,
}

#[derive(Debug, Clone)]
pub struct PerturbationTable {
    pub rows: Vec<PerturbationRow>,
}

/// Exact L2 convergence experiment: perturbs the first companion row by
/// `delta / N` (all other rows are structural) and measures
/// `sup_t ||Y^N(t) - Y(t)||_{L2}` through the Gaussian laws; no Monte Carlo
/// is involved. The perturbed and base solutions share the Wiener process, so
/// the distance couples their kernels through cross second moments.
pub fn perturbation_experiment(
    table: &GreenTable,
    delta: &[Coefficient],
    n_list: &[u32],
) -> Result<PerturbationTable> {
    let problem = table.problem();
    let nodes = problem.grid().nodes().to_vec();
    let len = nodes.len();
    let dim = problem.n();
    let last = len - 1;

    let mut rows = Vec::with_capacity(n_list.len());
    for &big_n in n_list {
        if big_n == 0 {
            return Err(Error::InvalidProblem("perturbation N must be positive".into()));
        }
        let coeffs = problem.coeffs().perturbed(delta, 1.0 / big_n as f64)?;
        let perturbed = problem.with_coeffs(coeffs)?;
        let pert_table = match GreenTable::with_tolerances(&perturbed, table.tolerances()) {
            Ok(t) => t,
            Err(Error::NotWellPosed { .. }) | Err(Error::InconsistentVerdict { .. }) => {
                return Err(Error::PerturbedNotWellPosed { n: big_n })
            }
            Err(e) => return Err(e),
        };

        // Cross second moments between the perturbed and base kernels.
        let pert_r = (
            pert_table.r_right.as_slice(),
            pert_table.r_left.as_slice(),
            pert_table.rp_right.as_slice(),
            pert_table.rp_left.as_slice(),
        );
        let pert_v = (
            pert_table.v.as_slice(),
            pert_table.v.as_slice(),
            pert_table.vp.as_slice(),
            pert_table.vp.as_slice(),
        );
        let base_r = (
            table.r_right.as_slice(),
            table.r_left.as_slice(),
            table.rp_right.as_slice(),
            table.rp_left.as_slice(),
        );
        let base_v =
            (table.v.as_slice(), table.v.as_slice(), table.vp.as_slice(), table.vp.as_slice());
        let cum_rr = cumulative_second_moments(&nodes, pert_r, base_r);
        let cum_rv = cumulative_second_moments(&nodes, pert_r, base_v);
        let cum_vr = cumulative_second_moments(&nodes, pert_v, base_r);
        let cum_vv = cumulative_second_moments(&nodes, pert_v, base_v);

        let mut sup_l2: f64 = 0.0;
        for t in 0..len {
            // Cross block X(t) = E[(Y^N(t)-m^N)(Y(t)-m)^T], with the same
            // operation order as cov_block so a zero perturbation cancels
            // exactly.
            let mut m = cum_rr[last].clone();
            m -= &cum_rv[last] - &cum_rv[t];
            m -= &cum_vr[last] - &cum_vr[t];
            m += &cum_vv[last] - &cum_vv[t];
            let cross = pert_table.j_inv(t) * m * table.j_inv(t).transpose();
            let cp = pert_table.cov_block(t, t);
            let cb = table.cov_block(t, t);
            let mut trace = 0.0;
            for i in 0..dim {
                trace += (cp[(i, i)] - cross[(i, i)]) + (cb[(i, i)] - cross[(i, i)]);
            }
            let dm = pert_table.mean_at(t) - table.mean_at(t);
            let d2 = dm.norm_squared() + trace.max(0.0);
            sup_l2 = sup_l2.max(d2.max(0.0).sqrt());
        }

        let mut kernel_sup: f64 = 0.0;
        for t in 0..len {
            for s in 0..len {
                let diff = pert_table.green_matrix(t, s) - table.green_matrix(t, s);
                kernel_sup = kernel_sup.max(diff.amax());
            }
        }

        rows.push(PerturbationRow { n: big_n, sup_l2, kernel_sup });
    }
    Ok(PerturbationTable { rows })
}
