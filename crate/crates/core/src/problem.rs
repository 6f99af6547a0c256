//! Problem datatypes: coefficients, boundary operator, master grid, and
//! validation.
//!
//! A problem is the n-th order equation `L[X] = dW` on [0,1] with lateral
//! conditions `sum_j alpha_ij X(t_j) = c_i`, i = 1..n. Everything downstream
//! (flows, kernels, laws, samplers) works on a [`ValidatedProblem`], whose
//! master grid contains 0, 1, every `t_j`, and any extra query times as nodes.
//! All values are immutable after validation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol::{Tolerances, H_DEFAULT};

/// A scalar coefficient function of time on [0,1].
///
/// Analytic forms are exact; the sampled form holds values on the uniform
/// `values.len()`-point grid over [0,1] and interpolates linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Coefficient {
    Constant {
        value: f64,
    },
    /// `coeffs[k]` multiplies `t^k`.
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `amplitude * sin(omega t + phase) + offset`.
    Sinusoid {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    Samples {
        values: Vec<f64>,
    },
    /// Weighted sum of other coefficients. Not part of the documented file
    /// schema; used programmatically (e.g. perturbed problems).
    Combination {
        parts: Vec<ScaledCoefficient>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledCoefficient {
    pub scale: f64,
    pub term: Coefficient,
}

impl Coefficient {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Coefficient::Constant { value } => *value,
            Coefficient::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
            }
            Coefficient::Sinusoid {
                amplitude,
                omega,
                phase,
                offset,
            } => amplitude * (omega * t + phase).sin() + offset,
            Coefficient::Samples { values } => {
                if values.len() == 1 {
                    return values[0];
                }
                let m = values.len() - 1;
                let x = (t.clamp(0.0, 1.0)) * m as f64;
                let k = (x.floor() as usize).min(m - 1);
                let frac = x - k as f64;
                values[k] + frac * (values[k + 1] - values[k])
            }
            Coefficient::Combination { parts } => {
                parts.iter().map(|p| p.scale * p.term.eval(t)).sum()
            }
        }
    }

    /// Exact integral over `[lo, hi]` (for the sampled form, exact for the
    /// linear interpolant). Used by the Liouville calibration check.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Coefficient::Constant { value } => value * (hi - lo),
            Coefficient::Polynomial { coeffs } => {
                let anti = |t: f64| {
                    coeffs
                        .iter()
                        .enumerate()
                        .fold(0.0, |acc, (k, &c)| acc + c * t.powi(k as i32 + 1) / (k as f64 + 1.0))
                };
                anti(hi) - anti(lo)
            }
            Coefficient::Sinusoid {
                amplitude,
                omega,
                phase,
                offset,
            } => {
                if omega.abs() < 1e-300 {
                    (amplitude * phase.sin() + offset) * (hi - lo)
                } else {
                    -amplitude / omega * ((omega * hi + phase).cos() - (omega * lo + phase).cos())
                        + offset * (hi - lo)
                }
            }
            Coefficient::Samples { values } => {
                if values.len() == 1 {
                    return values[0] * (hi - lo);
                }
                // Integrate the interpolant piecewise; trapezoid is exact on
                // each sample interval.
                let m = values.len() - 1;
                let dx = 1.0 / m as f64;
                let (sign, lo, hi) = if lo <= hi { (1.0, lo, hi) } else { (-1.0, hi, lo) };
                let mut acc = 0.0;
                let k0 = ((lo / dx).floor() as usize).min(m - 1);
                let k1 = ((hi / dx).ceil() as usize).max(1).min(m);
                for k in k0..k1 {
                    let a = (k as f64 * dx).max(lo);
                    let b = ((k + 1) as f64 * dx).min(hi);
                    if b <= a {
                        continue;
                    }
                    acc += 0.5 * (self.eval(a) + self.eval(b)) * (b - a);
                }
                sign * acc
            }
            Coefficient::Combination { parts } => {
                parts.iter().map(|p| p.scale * p.term.integral(lo, hi)).sum()
            }
        }
    }

    fn check_finite(&self, index: usize, nodes: &[f64]) -> Result<()> {
        for &t in nodes {
            if !self.eval(t).is_finite() {
                return Err(Error::NonFiniteCoefficient { index, t });
            }
        }
        Ok(())
    }
}

/// The coefficients `a_0 .. a_{n-1}` of `L = D^n + a_{n-1} D^{n-1} + ... + a_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    n: usize,
    a: Vec<Coefficient>,
}

impl CoefficientSet {
    pub fn new(a: Vec<Coefficient>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidProblem("order n must be >= 1".into()));
        }
        Ok(CoefficientSet { n: a.len(), a })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn coefficient(&self, i: usize) -> &Coefficient {
        &self.a[i]
    }

    pub fn coefficients(&self) -> &[Coefficient] {
        &self.a
    }

    /// The companion matrix A(t): first row `(a_{n-1}, ..., a_0)`, subdiagonal
    /// -1, zeros elsewhere.
    pub fn companion(&self, t: f64) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            m[(0, j)] = self.a[n - 1 - j].eval(t);
        }
        for i in 1..n {
            m[(i, i - 1)] = -1.0;
        }
        m
    }

    /// First column of A(t): `(a_{n-1}(t), -1, 0, ..., 0)`.
    pub fn companion_first_column(&self, t: f64) -> DVector<f64> {
        let n = self.n;
        let mut v = DVector::zeros(n);
        v[0] = self.a[n - 1].eval(t);
        if n > 1 {
            v[1] = -1.0;
        }
        v
    }

    /// `a_i + scale * delta_i` for every i, as exact combinations.
    pub fn perturbed(&self, delta: &[Coefficient], scale: f64) -> Result<CoefficientSet> {
        if delta.len() != self.n {
            return Err(Error::InvalidProblem(format!(
                "perturbation has {} entries, order is {}",
                delta.len(),
                self.n
            )));
        }
        let a = self
            .a
            .iter()
            .zip(delta)
            .map(|(base, d)| Coefficient::Combination {
                parts: vec![
                    ScaledCoefficient { scale: 1.0, term: base.clone() },
                    ScaledCoefficient { scale, term: d.clone() },
                ],
            })
            .collect();
        CoefficientSet::new(a)
    }
}

/// Lateral boundary conditions `sum_j alpha_ij X(t_j) = c_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryOperator {
    points: Vec<f64>,
    alpha: DMatrix<f64>,
    c: DVector<f64>,
}

impl BoundaryOperator {
    pub fn new(points: Vec<f64>, alpha: DMatrix<f64>, c: DVector<f64>) -> Self {
        BoundaryOperator { points, alpha, c }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }
}

/// Master time grid: uniform step `h` over [0,1] with extra inserted nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    h: f64,
    nodes: Vec<f64>,
}

/// Two times closer than this are considered the same grid node.
const NODE_MERGE: f64 = 1e-12;
/// Lookup slack when matching a query time to an existing node.
const NODE_LOOKUP: f64 = 1e-9;

impl Grid {
    pub fn build(h: f64, extra: &[f64]) -> Result<Grid> {
        if !(h > 0.0 && h <= 0.5) {
            return Err(Error::InvalidProblem(format!("grid step h = {h} out of range")));
        }
        let mut nodes = Vec::with_capacity((1.0 / h) as usize + 2 + extra.len());
        let mut k: usize = 0;
        loop {
            let t = k as f64 * h;
            if t >= 1.0 - NODE_MERGE {
                break;
            }
            nodes.push(t);
            k += 1;
        }
        nodes.push(1.0);
        let mut grid = Grid { h, nodes };
        for &t in extra {
            grid.insert(t)?;
        }
        Ok(grid)
    }

    fn insert(&mut self, t: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::PointOutOfRange { value: t });
        }
        let pos = self.nodes.partition_point(|&x| x < t);
        let near_prev = pos > 0 && (t - self.nodes[pos - 1]).abs() <= NODE_MERGE;
        let near_next = pos < self.nodes.len() && (self.nodes[pos] - t).abs() <= NODE_MERGE;
        if !near_prev && !near_next {
            self.nodes.insert(pos, t);
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    /// Index of the node matching `t`, if any.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let k = self.nearest_node(t);
        ((self.nodes[k] - t).abs() <= NODE_LOOKUP).then_some(k)
    }

    /// Index of the node closest to `t`.
    pub fn nearest_node(&self, t: f64) -> usize {
        let pos = self.nodes.partition_point(|&x| x < t);
        if pos == 0 {
            return 0;
        }
        if pos >= self.nodes.len() {
            return self.nodes.len() - 1;
        }
        if (t - self.nodes[pos - 1]).abs() <= (self.nodes[pos] - t).abs() {
            pos - 1
        } else {
            pos
        }
    }
}

/// A raw problem: coefficients, boundary operator, and grid step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub coeffs: CoefficientSet,
    pub boundary: BoundaryOperator,
    pub h: f64,
}

impl ProblemSpec {
    pub fn new(coeffs: CoefficientSet, boundary: BoundaryOperator) -> Self {
        ProblemSpec { coeffs, boundary, h: H_DEFAULT }
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn validate(&self) -> Result<ValidatedProblem> {
        self.validate_with(&[], &Tolerances::default())
    }

    /// Validates and inserts `extra_nodes` (query times) into the master grid.
    pub fn validate_with(&self, extra_nodes: &[f64], tol: &Tolerances) -> Result<ValidatedProblem> {
        let n = self.coeffs.order();
        let m = self.boundary.m();
        if m < n {
            return Err(Error::TooFewPoints { m, n });
        }
        if self.boundary.alpha.nrows() != n || self.boundary.alpha.ncols() != m {
            return Err(Error::InvalidProblem(format!(
                "alpha must be {n}x{m}, got {}x{}",
                self.boundary.alpha.nrows(),
                self.boundary.alpha.ncols()
            )));
        }
        if self.boundary.c.len() != n {
            return Err(Error::InvalidProblem(format!(
                "c must have {n} entries, got {}",
                self.boundary.c.len()
            )));
        }
        for &t in &self.boundary.points {
            if !t.is_finite() || !(0.0..=1.0).contains(&t) {
                return Err(Error::PointOutOfRange { value: t });
            }
        }

        // Sort points, carrying alpha columns along.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| self.boundary.points[i].total_cmp(&self.boundary.points[j]));
        let points: Vec<f64> = order.iter().map(|&j| self.boundary.points[j]).collect();
        for w in points.windows(2) {
            if w[1] - w[0] <= NODE_MERGE {
                return Err(Error::UnsortedDuplicatePoints { value: w[0] });
            }
        }
        let mut alpha = DMatrix::zeros(n, m);
        for (new_j, &old_j) in order.iter().enumerate() {
            alpha.set_column(new_j, &self.boundary.alpha.column(old_j));
        }

        // Full row rank, scale-free.
        let sv = alpha.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let smin = sv[n - 1];
        if smax <= 0.0 || !smax.is_finite() || smin <= tol.rank * smax {
            return Err(Error::RankDeficient { ratio: if smax > 0.0 { smin / smax } else { 0.0 } });
        }

        let mut all_extra: Vec<f64> = points.clone();
        all_extra.extend_from_slice(extra_nodes);
        let grid = Grid::build(self.h, &all_extra)?;

        for (i, a) in self.coeffs.coefficients().iter().enumerate() {
            a.check_finite(i, grid.nodes())?;
        }

        let point_nodes = points
            .iter()
            .map(|&t| grid.node_index(t).ok_or(Error::GridMismatch { t }))
            .collect::<Result<Vec<usize>>>()?;

        Ok(ValidatedProblem {
            coeffs: self.coeffs.clone(),
            boundary: BoundaryOperator { points, alpha, c: self.boundary.c.clone() },
            h: self.h,
            grid,
            point_nodes,
        })
    }
}

/// A validated problem: sorted points, rank check passed, master grid built
/// with every `t_j` as a node. Immutable; cheap to clone and safe to share.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedProblem {
    coeffs: CoefficientSet,
    boundary: BoundaryOperator,
    h: f64,
    grid: Grid,
    point_nodes: Vec<usize>,
}

impl ValidatedProblem {
    pub fn n(&self) -> usize {
        self.coeffs.order()
    }

    pub fn m(&self) -> usize {
        self.boundary.m()
    }

    pub fn coeffs(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn boundary(&self) -> &BoundaryOperator {
        &self.boundary
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Grid node index of each boundary point, in point order.
    pub fn point_nodes(&self) -> &[usize] {
        &self.point_nodes
    }

    pub fn companion(&self, t: f64) -> DMatrix<f64> {
        self.coeffs.companion(t)
    }

    /// The normalized spec (sorted points) for echoing back to the user.
    pub fn respec(&self) -> ProblemSpec {
        ProblemSpec {
            coeffs: self.coeffs.clone(),
            boundary: self.boundary.clone(),
            h: self.h,
        }
    }

    /// Rebuilds with additional grid nodes (e.g. queried pair endpoints).
    pub fn with_extra_nodes(&self, times: &[f64]) -> Result<ValidatedProblem> {
        self.respec().validate_with(times, &Tolerances::default())
    }

    /// Same grid and boundary, different coefficients.
    pub fn with_coeffs(&self, coeffs: CoefficientSet) -> Result<ValidatedProblem> {
        if coeffs.order() != self.n() {
            return Err(Error::InvalidProblem("perturbation changed the order".into()));
        }
        for (i, a) in coeffs.coefficients().iter().enumerate() {
            a.check_finite(i, self.grid.nodes())?;
        }
        Ok(ValidatedProblem {
            coeffs,
            boundary: self.boundary.clone(),
            h: self.h,
            grid: self.grid.clone(),
            point_nodes: self.point_nodes.clone(),
        })
    }
}

// ---------------------------------------------------------------------------
// Problem file schema (TOML).
// ---------------------------------------------------------------------------

/// Serialized problem file.
///
/// ```toml
/// order = 1
/// coefficients = [{ form = "constant", value = 0.0 }]
///
/// [boundary]
/// points = [0.5, 1.0]
/// alpha = [[1.0, 1.0]]
/// c = [0.0]
///
/// [grid]
/// h = 0.001
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub order: usize,
    pub coefficients: Vec<Coefficient>,
    pub boundary: BoundaryFile,
    #[serde(default)]
    pub grid: GridFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryFile {
    pub points: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFile {
    pub h: f64,
}

impl Default for GridFile {
    fn default() -> Self {
        GridFile { h: H_DEFAULT }
    }
}

impl ProblemSpec {
    pub fn from_toml_str(text: &str) -> Result<ProblemSpec> {
        let file: ProblemFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_spec()
    }

    pub fn to_toml_string(&self) -> String {
        let n = self.coeffs.order();
        let m = self.boundary.m();
        let alpha = (0..n)
            .map(|i| (0..m).map(|j| self.boundary.alpha[(i, j)]).collect())
            .collect();
        let file = ProblemFile {
            order: n,
            coefficients: self.coeffs.coefficients().to_vec(),
            boundary: BoundaryFile {
                points: self.boundary.points.clone(),
                alpha,
                c: self.boundary.c.iter().copied().collect(),
            },
            grid: GridFile { h: self.h },
        };
        toml::to_string(&file).expect("problem file serialization cannot fail")
    }
}

impl ProblemFile {
    pub fn into_spec(self) -> Result<ProblemSpec> {
        if self.coefficients.len() != self.order {
            return Err(Error::Parse(format!(
                "order = {} but {} coefficients given",
                self.order,
                self.coefficients.len()
            )));
        }
        let n = self.order;
        let m = self.boundary.points.len();
        if self.boundary.alpha.len() != n || self.boundary.alpha.iter().any(|r| r.len() != m) {
            return Err(Error::Parse(format!("alpha must be {n} rows of {m} entries")));
        }
        let mut alpha = DMatrix::zeros(n, m);
        for (i, row) in self.boundary.alpha.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                alpha[(i, j)] = x;
            }
        }
        Ok(ProblemSpec {
            coeffs: CoefficientSet::new(self.coefficients)?,
            boundary: BoundaryOperator {
                points: self.boundary.points,
                alpha,
                c: DVector::from_vec(self.boundary.c),
            },
            h: self.grid.h,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn golden_spec() -> ProblemSpec {
        // DX = dW with X(1/2) + X(1) = 0.
        ProblemSpec::new(
            CoefficientSet::new(vec![Coefficient::Constant { value: 0.0 }]).unwrap(),
            BoundaryOperator::new(
                vec![0.5, 1.0],
                DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
                DVector::from_vec(vec![0.0]),
            ),
        )
    }

    #[test]
    fn golden_example_validates() {
        let p = golden_spec().validate().unwrap();
        assert_eq!(p.n(), 1);
        assert_eq!(p.m(), 2);
        assert_eq!(p.point_nodes().len(), 2);
        assert_eq!(p.grid().value(p.point_nodes()[0]), 0.5);
        assert_eq!(p.grid().value(p.point_nodes()[1]), 1.0);
    }

    #[test]
    fn rank_deficient_rejected() {
        let spec = ProblemSpec::new(
            CoefficientSet::new(vec![
                Coefficient::Constant { value: 0.0 },
                Coefficient::Constant { value: 0.0 },
            ])
            .unwrap(),
            BoundaryOperator::new(
                vec![0.25, 0.75],
                DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]),
                DVector::from_vec(vec![0.0, 0.0]),
            ),
        );
        assert!(matches!(spec.validate(), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn too_few_points_rejected() {
        let spec = ProblemSpec::new(
            CoefficientSet::new(vec![
                Coefficient::Constant { value: 0.0 },
                Coefficient::Constant { value: 0.0 },
            ])
            .unwrap(),
            BoundaryOperator::new(
                vec![0.5],
                DMatrix::from_row_slice(2, 1, &[1.0, 2.0]),
                DVector::from_vec(vec![0.0, 0.0]),
            ),
        );
        assert!(matches!(spec.validate(), Err(Error::TooFewPoints { m: 1, n: 2 })));
    }

    #[test]
    fn out_of_range_and_duplicates_rejected() {
        let mut spec = golden_spec();
        spec.boundary = BoundaryOperator::new(
            vec![0.5, 1.5],
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![0.0]),
        );
        assert!(matches!(spec.validate(), Err(Error::PointOutOfRange { .. })));

        let mut spec = golden_spec();
        spec.boundary = BoundaryOperator::new(
            vec![0.5, 0.5],
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![0.0]),
        );
        assert!(matches!(spec.validate(), Err(Error::UnsortedDuplicatePoints { .. })));
    }

    #[test]
    fn unsorted_points_are_sorted_with_columns() {
        let spec = ProblemSpec::new(
            CoefficientSet::new(vec![Coefficient::Constant { value: 0.0 }]).unwrap(),
            BoundaryOperator::new(
                vec![1.0, 0.5],
                DMatrix::from_row_slice(1, 2, &[2.0, 3.0]),
                DVector::from_vec(vec![0.0]),
            ),
        );
        let p = spec.validate().unwrap();
        assert_eq!(p.boundary().points(), &[0.5, 1.0]);
        assert_eq!(p.boundary().alpha()[(0, 0)], 3.0);
        assert_eq!(p.boundary().alpha()[(0, 1)], 2.0);
    }

    #[test]
    fn validation_is_idempotent() {
        let p = golden_spec().validate().unwrap();
        let again = p.respec().validate().unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn companion_layout_examples() {
        // n=1, a_0 = 0.
        let c = CoefficientSet::new(vec![Coefficient::Constant { value: 0.0 }]).unwrap();
        assert_eq!(c.companion(0.3), DMatrix::from_row_slice(1, 1, &[0.0]));

        // n=2 constant: [[p, q], [-1, 0]].
        let c = CoefficientSet::new(vec![
            Coefficient::Constant { value: 7.0 },  // a_0 = q
            Coefficient::Constant { value: -2.0 }, // a_1 = p
        ])
        .unwrap();
        assert_eq!(c.companion(0.1), DMatrix::from_row_slice(2, 2, &[-2.0, 7.0, -1.0, 0.0]));

        // n=2, a_1(t) = t, a_0 = 1, t = 0.5.
        let c = CoefficientSet::new(vec![
            Coefficient::Constant { value: 1.0 },
            Coefficient::Polynomial { coeffs: vec![0.0, 1.0] },
        ])
        .unwrap();
        assert_eq!(c.companion(0.5), DMatrix::from_row_slice(2, 2, &[0.5, 1.0, -1.0, 0.0]));
    }

    #[test]
    fn grid_contains_endpoints_and_inserted_points() {
        let g = Grid::build(1e-3, &[0.5, 1.0, 0.12345]).unwrap();
        assert_eq!(g.value(0), 0.0);
        assert_eq!(g.value(g.len() - 1), 1.0);
        assert!(g.node_index(0.5).is_some());
        assert!(g.node_index(0.12345).is_some());
        assert!(g.node_index(0.1234).is_none());
        for w in g.nodes().windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
order = 1
coefficients = [{ form = "constant", value = 0.0 }]

[boundary]
points = [0.5, 1.0]
alpha = [[1.0, 1.0]]
c = [0.0]

[grid]
h = 0.001
"#;
        let spec = ProblemSpec::from_toml_str(text).unwrap();
        assert_eq!(spec, golden_spec());
        let echoed = spec.to_toml_string();
        let re = ProblemSpec::from_toml_str(&echoed).unwrap();
        assert_eq!(re, spec);
    }

    #[test]
    fn grid_defaults_when_absent() {
        let text = r#"
order = 1
coefficients = [{ form = "constant", value = 1.0 }]

[boundary]
points = [0.0]
alpha = [[1.0]]
c = [2.0]
"#;
        let spec = ProblemSpec::from_toml_str(text).unwrap();
        assert_eq!(spec.h, H_DEFAULT);
    }

    #[test]
    fn sampled_coefficient_interpolates_and_integrates() {
        let c = Coefficient::Samples { values: vec![0.0, 1.0, 0.0] };
        assert_eq!(c.eval(0.25), 0.5);
        assert_eq!(c.eval(0.5), 1.0);
        assert!((c.integral(0.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((c.integral(0.25, 0.75) - 0.375).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn companion_matches_layout(n in 1usize..5, vals in proptest::collection::vec(-3.0f64..3.0, 5), t in 0.0f64..1.0) {
            let a: Vec<Coefficient> = (0..n).map(|i| Coefficient::Constant { value: vals[i] }).collect();
            let c = CoefficientSet::new(a).unwrap();
            let m = c.companion(t);
            for j in 0..n {
                prop_assert_eq!(m[(0, j)], vals[n - 1 - j]);
            }
            for i in 1..n {
                for j in 0..n {
                    let expect = if j + 1 == i { -1.0 } else { 0.0 };
                    prop_assert_eq!(m[(i, j)], expect);
                }
            }
        }

        #[test]
        fn polynomial_integral_matches_eval(coeffs in proptest::collection::vec(-2.0f64..2.0, 1..4), lo in 0.0f64..0.5, hi in 0.5f64..1.0) {
            let c = Coefficient::Polynomial { coeffs };
            // Compare against a fine Riemann sum.
            let steps = 20_000;
            let dx = (hi - lo) / steps as f64;
            let riemann: f64 = (0..steps).map(|k| c.eval(lo + (k as f64 + 0.5) * dx) * dx).sum();
            prop_assert!((c.integral(lo, hi) - riemann).abs() < 1e-6);
        }
    }
}
