//! Finite-sample surrogates for the conditional-independence theorems: the
//! Markov-field dichotomy over a pair (a, b), the enlarged-conditioning
//! variant for non-preserving pairs, and the Markov-process split at a single
//! point. Time sets are finite samplings (the law is Gaussian with continuous
//! paths, so conditional independence over sigma-fields is tested on finite
//! marginals), always including the support points of non-preserving rows so
//! dependence evidence cannot be missed.

use crate::boundary::{
    enlarged_condition_set, markov_split_ok, preserves, BasicForm, EnlargedVariant,
    PairClassification,
};
use crate::error::Result;
use crate::green::GreenTable;
use crate::law::{ci_test, full_labels, CiVerdict};
use crate::problem::Grid;
use crate::tol::Tolerances;

/// Default number of sampled times per side of a pair.
pub const TIMES_PER_SIDE: usize = 8;

/// Sampled inside/outside times for a pair, as grid nodes.
#[derive(Debug, Clone)]
pub struct PairTimes {
    pub inside: Vec<usize>,
    pub outside: Vec<usize>,
}

fn push_unique(list: &mut Vec<usize>, node: usize, excluded: &[usize]) {
    if !excluded.contains(&node) && !list.contains(&node) {
        list.push(node);
    }
}

/// Samples times for a pair test: equispaced interior nodes of ]a,b[, exterior
/// nodes of [0,a[ and ]b,1] (including the endpoints 0 and 1), plus the
/// support points of every non-preserving row on the matching side.
pub fn pair_sample_times(grid: &Grid, basic: &BasicForm, cls: &PairClassification) -> PairTimes {
    let (a, b) = (cls.a, cls.b);
    let (av, bv) = (grid.value(a), grid.value(b));
    let excluded = [a, b];
    let mut inside = Vec::new();
    for k in 1..=TIMES_PER_SIDE {
        let t = av + (bv - av) * k as f64 / (TIMES_PER_SIDE + 1) as f64;
        push_unique(&mut inside, grid.nearest_node(t), &excluded);
    }

    let mut outside = Vec::new();
    let left_empty = a == 0;
    let right_empty = b == grid.len() - 1;
    let (left_count, right_count) = match (left_empty, right_empty) {
        (false, false) => (TIMES_PER_SIDE / 2, TIMES_PER_SIDE / 2),
        (true, false) => (0, TIMES_PER_SIDE),
        (false, true) => (TIMES_PER_SIDE, 0),
        (true, true) => (0, 0),
    };
    for k in 0..left_count {
        let t = av * k as f64 / left_count as f64;
        push_unique(&mut outside, grid.nearest_node(t), &excluded);
    }
    for k in 1..=right_count {
        let t = bv + (1.0 - bv) * k as f64 / right_count as f64;
        push_unique(&mut outside, grid.nearest_node(t), &excluded);
    }

    for &i in &cls.order.non_preserving {
        for &j in &basic.supports[i] {
            let node = basic.point_nodes[j];
            if node > a && node < b {
                push_unique(&mut inside, node, &excluded);
            } else if node != a && node != b {
                push_unique(&mut outside, node, &excluded);
            }
        }
    }
    inside.sort_unstable();
    outside.sort_unstable();
    PairTimes { inside, outside }
}

/// Outcome of the Markov-field test on one pair: the verdict with
/// conditioning {Y(a), Y(b)} against the prediction "independent iff the pair
/// is preserved".
#[derive(Debug, Clone)]
pub struct MarkovFieldOutcome {
    pub classification: PairClassification,
    pub times: PairTimes,
    pub verdict: CiVerdict,
    pub predicted_independent: bool,
    pub matches: bool,
}

pub fn check_markov_field(
    table: &GreenTable,
    basic: &BasicForm,
    a: usize,
    b: usize,
    tol: &Tolerances,
) -> MarkovFieldOutcome {
    let cls = preserves(basic, a, b);
    let times = pair_sample_times(table.problem().grid(), basic, &cls);
    let cond = full_labels(table.problem().n(), &[a, b]);
    let verdict = ci_test(table, &times.inside, &times.outside, &cond, tol);
    let predicted = cls.preserves;
    MarkovFieldOutcome {
        classification: cls,
        times,
        verdict,
        predicted_independent: predicted,
        matches: verdict.independent == predicted,
    }
}

/// Outcome of the enlarged-conditioning test (both variants): the theorem
/// predicts independence whenever a, b lie outside the support.
#[derive(Debug, Clone)]
pub struct EnlargedOutcome {
    pub inside_variant: CiVerdict,
    pub outside_variant: CiVerdict,
    pub matches: bool,
}

pub fn check_enlarged(
    table: &GreenTable,
    basic: &BasicForm,
    cls: &PairClassification,
    times: &PairTimes,
    tol: &Tolerances,
) -> Result<EnlargedOutcome> {
    let cond_in = enlarged_condition_set(basic, cls, EnlargedVariant::Inside)?;
    let cond_out = enlarged_condition_set(basic, cls, EnlargedVariant::Outside)?;
    let inside_variant = ci_test(table, &times.inside, &times.outside, &cond_in, tol);
    let outside_variant = ci_test(table, &times.inside, &times.outside, &cond_out, tol);
    Ok(EnlargedOutcome {
        inside_variant,
        outside_variant,
        matches: inside_variant.independent && outside_variant.independent,
    })
}

/// Sampled past/future times for a split test at `a`.
#[derive(Debug, Clone)]
pub struct SplitTimes {
    pub past: Vec<usize>,
    pub future: Vec<usize>,
}

pub fn split_sample_times(grid: &Grid, basic: &BasicForm, a: usize) -> SplitTimes {
    let av = grid.value(a);
    let excluded = [a];
    let mut past = Vec::new();
    let mut future = Vec::new();
    for k in 0..TIMES_PER_SIDE {
        let t = av * k as f64 / TIMES_PER_SIDE as f64;
        push_unique(&mut past, grid.nearest_node(t), &excluded);
    }
    for k in 1..=TIMES_PER_SIDE {
        let t = av + (1.0 - av) * k as f64 / TIMES_PER_SIDE as f64;
        push_unique(&mut future, grid.nearest_node(t), &excluded);
    }
    for supp in &basic.supports {
        for &j in supp {
            let node = basic.point_nodes[j];
            if node < a {
                push_unique(&mut past, node, &excluded);
            } else if node > a {
                push_unique(&mut future, node, &excluded);
            }
        }
    }
    past.sort_unstable();
    future.sort_unstable();
    SplitTimes { past, future }
}

/// Outcome of the Markov-process split test at `a`: independence of past and
/// future given Y(a) is predicted exactly when every row support is
/// one-sided.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub one_sided: bool,
    pub times: SplitTimes,
    pub verdict: CiVerdict,
    pub matches: bool,
}

pub fn check_split(
    table: &GreenTable,
    basic: &BasicForm,
    a: usize,
    tol: &Tolerances,
) -> Result<SplitOutcome> {
    let one_sided = markov_split_ok(basic, a)?;
    let times = split_sample_times(table.problem().grid(), basic, a);
    let cond = full_labels(table.problem().n(), &[a]);
    let verdict = ci_test(table, &times.past, &times.future, &cond, tol);
    Ok(SplitOutcome { one_sided, times, verdict, matches: verdict.independent == one_sided })
}

/// True when the classification has at least one non-preserving row whose
/// side assignment came from straddling (not from an endpoint hit); used by
/// orchestration to decide whether the enlarged test applies cleanly.
pub fn enlargement_applicable(cls: &PairClassification) -> bool {
    !cls.preserves && !cls.endpoint_hit
}
