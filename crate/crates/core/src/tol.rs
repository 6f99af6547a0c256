/// Numerical thresholds shared across the crate.
///
/// Every field has a spec-pinned default; the CLI can override individual
/// values. All thresholds are scale-aware where they are used (relative to a
/// matrix norm or a largest eigenvalue), except where noted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Full-rank test for the boundary matrix: sigma_min > rank * sigma_max.
    pub rank: f64,
    /// Well-posedness floor: |det J| > det * max(1, ||J||_F).
    pub det: f64,
    /// Support zero-threshold on |alpha_ij| relative to the row maximum.
    pub supp: f64,
    /// Pseudo-inverse cutoff for conditioning covariances, relative to the
    /// largest eigenvalue.
    pub pinv: f64,
    /// Conditional-independence verdict bound on the normalized partial
    /// cross-covariance.
    pub ci: f64,
    /// Conditional variances below this are reported unnormalized.
    pub var: f64,
    /// Degeneracy floor relative to the largest label variance in the test:
    /// conditional variances are differences of O(scale) quantities, so below
    /// `var_rel * scale` they are numerically indistinguishable from zero and
    /// the entry is reported unnormalized.
    pub var_rel: f64,
    /// Constraint-residual bound for support-rank and law checks.
    pub constraint: f64,
    /// Condition-number level that triggers a warning when inverting J.
    pub cond_warn: f64,
    /// Relative eigenvalue cutoff when counting the numerical rank of a
    /// stacked covariance.
    pub rank_eig: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank: 1e-10,
            det: 1e-8,
            supp: 1e-12,
            pinv: 1e-10,
            ci: 1e-6,
            var: 1e-12,
            var_rel: 1e-9,
            constraint: 1e-7,
            cond_warn: 1e10,
            rank_eig: 1e-9,
        }
    }
}

/// Default master-grid step.
pub const H_DEFAULT: f64 = 1e-3;

/// Overflow guard for fundamental-matrix integration.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// Eigenvalue floor (relative to the largest) accepted when asserting positive
/// semidefiniteness of assembled covariances.
pub const PSD_FLOOR: f64 = 1e-10;

/// Pathwise boundary-residual tolerance at grid step `h`.
pub fn eps_path(h: f64) -> f64 {
    100.0 * h
}
