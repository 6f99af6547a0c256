//! Command-line front end: problem ingestion, checks, classification,
//! theorem verification, kernel/path/experiment emission.
//!
//! Exit codes: 0 success or verdict-pass, 1 verdict-fail (including a
//! not-well-posed problem), 2 input error, 3 numerical failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sdebvp::boundary::{basic_form, preserves, regularity, splitting_determinant};
use sdebvp::markov::{check_enlarged, check_markov_field, check_split, pair_sample_times};
use sdebvp::ode::FlowTable;
use sdebvp::sampler::{boundary_residual, perturbation_experiment, sample_solution, sample_wiener};
use sdebvp::suite::{random_pairs, random_splits};
use sdebvp::{Coefficient, Error, GreenTable, ProblemSpec, Tolerances, ValidatedProblem};

#[derive(Parser)]
#[command(name = "sdebvp", version, about = "Linear SDEs with functional boundary conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Problem specification file (TOML).
    #[arg(long)]
    problem: PathBuf,
    /// Output directory (default: $SDEBVP_OUT, then the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master grid step override.
    #[arg(long)]
    h: Option<f64>,
    /// Well-posedness determinant threshold.
    #[arg(long)]
    eps_det: Option<f64>,
    /// Conditional-independence verdict threshold.
    #[arg(long)]
    eps_ci: Option<f64>,
    /// Constraint-residual threshold.
    #[arg(long)]
    eps_rank: Option<f64>,
    /// Degenerate conditional-variance floor.
    #[arg(long)]
    eps_var: Option<f64>,
    /// Pseudo-inverse relative cutoff.
    #[arg(long)]
    pinv_cutoff: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the problem and test well-posedness (H0).
    Check {
        #[command(flatten)]
        common: Common,
        /// Also dump Phi^0(t) and J(t) per node to flow.csv.
        #[arg(long, default_value_t = false)]
        dump_flow: bool,
    },
    /// Classify pairs: preserving, counts, regularity, splitting determinant.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Pairs "a1:b1,a2:b2,...".
        #[arg(long, default_value = "")]
        pairs: String,
    },
    /// Run the conditional-independence theorem suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Explicit pairs "a1:b1,..." (otherwise randomized).
        #[arg(long)]
        pairs: Option<String>,
        /// Number of random pairs when --pairs is absent.
        #[arg(long, default_value_t = 10)]
        rand_pairs: usize,
        /// Explicit split points "a1,a2,..." (otherwise randomized).
        #[arg(long)]
        splits: Option<String>,
        /// Number of random split points when --splits is absent.
        #[arg(long, default_value_t = 5)]
        rand_splits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Emit influence-kernel rows and covariance rows for given times.
    Kernel {
        #[command(flatten)]
        common: Common,
        /// Times "t1,t2,...".
        #[arg(long)]
        times: String,
    },
    /// Sample solution paths and dump them as CSV.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Coefficient-perturbation convergence experiment.
    Perturb {
        #[command(flatten)]
        common: Common,
        /// Constant perturbation of each coefficient, "d0,d1,..." (defaults
        /// to zeros).
        #[arg(long, default_value = "")]
        delta: String,
        /// Perturbation denominators, "2,4,8,...".
        #[arg(long, default_value = "2,4,8,16,32,64")]
        n_list: String,
    },
}

#[derive(Debug)]
enum CliError {
    Input(String),
    VerdictFail(String),
    Numerical(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotWellPosed { .. } => CliError::VerdictFail(e.to_string()),
            Error::IntegrationOverflow { .. }
            | Error::InconsistentVerdict { .. }
            | Error::SingularPair { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { common, dump_flow } => cmd_check(&common, dump_flow),
        Command::Classify { common, pairs } => cmd_classify(&common, &pairs),
        Command::Verify { common, pairs, rand_pairs, splits, rand_splits, seed } => {
            cmd_verify(&common, pairs.as_deref(), rand_pairs, splits.as_deref(), rand_splits, seed)
        }
        Command::Kernel { common, times } => cmd_kernel(&common, &times),
        Command::Sample { common, paths, seed } => cmd_sample(&common, paths, seed),
        Command::Perturb { common, delta, n_list } => cmd_perturb(&common, &delta, &n_list),
    };
    match result {
        Ok(()) => ExitCode::from(0),
        Err(CliError::VerdictFail(msg)) => {
            eprintln!("verdict: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("input error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn out_dir(common: &Common) -> Result<PathBuf, CliError> {
    let dir = common
        .out
        .clone()
        .or_else(|| std::env::var_os("SDEBVP_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn tolerances(common: &Common) -> Result<Tolerances, CliError> {
    let mut tol = Tolerances::default();
    for (slot, value) in [
        (&mut tol.det, common.eps_det),
        (&mut tol.ci, common.eps_ci),
        (&mut tol.constraint, common.eps_rank),
        (&mut tol.var, common.eps_var),
        (&mut tol.pinv, common.pinv_cutoff),
    ] {
        if let Some(v) = value {
            if v <= 0.0 || !v.is_finite() {
                return Err(CliError::Input(format!("tolerance {v} must be positive")));
            }
            *slot = v;
        }
    }
    Ok(tol)
}

fn load_spec(common: &Common) -> Result<ProblemSpec, CliError> {
    let text = fs::read_to_string(&common.problem)
        .map_err(|e| CliError::Input(format!("{}: {e}", common.problem.display())))?;
    let mut spec = ProblemSpec::from_toml_str(&text)?;
    if let Some(h) = common.h {
        spec = spec.with_h(h);
    }
    Ok(spec)
}

fn load_problem(
    common: &Common,
    extra_nodes: &[f64],
    tol: &Tolerances,
) -> Result<ValidatedProblem, CliError> {
    Ok(load_spec(common)?.validate_with(extra_nodes, tol)?)
}

/// Full-precision float formatting: 17 significant digits round-trip.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<(), CliError> {
    let mut text = String::with_capacity(rows.len() * 64 + header.len() + 2);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| CliError::Input(format!("bad number '{s}'")))
        })
        .collect()
}

fn parse_pairs(text: &str) -> Result<Vec<(f64, f64)>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let (a, b) = s
                .split_once(':')
                .ok_or_else(|| CliError::Input(format!("pair '{s}' must be a:b")))?;
            let a: f64 =
                a.trim().parse().map_err(|_| CliError::Input(format!("bad number '{a}'")))?;
            let b: f64 =
                b.trim().parse().map_err(|_| CliError::Input(format!("bad number '{b}'")))?;
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a >= b {
                return Err(CliError::Input(format!("pair {a}:{b} must satisfy 0 <= a < b <= 1")));
            }
            Ok((a, b))
        })
        .collect()
}

fn cmd_check(common: &Common, dump_flow: bool) -> Result<(), CliError> {
    let tol = tolerances(common)?;
    let problem = load_problem(common, &[], &tol)?;
    let dir = out_dir(common)?;

    let flow = FlowTable::new(&problem)?;
    let wp = flow.check_wellposed(&tol)?;

    // Normalized spec echo for reproducibility.
    let echo = problem.respec().to_toml_string();
    fs::write(dir.join("problem.normalized.toml"), echo)?;

    if dump_flow {
        let n = problem.n();
        let grid = problem.grid();
        let mut rows = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let mut row = fmt(grid.value(k));
            for mat in [flow.phi0(k), flow.j_at(k)] {
                for i in 0..n {
                    for j in 0..n {
                        write!(row, ",{}", fmt(mat[(i, j)])).unwrap();
                    }
                }
            }
            rows.push(row);
        }
        let phi_cols: String =
            (1..=n).flat_map(|i| (1..=n).map(move |j| format!(",phi_{i}{j}"))).collect();
        let j_cols: String =
            (1..=n).flat_map(|i| (1..=n).map(move |j| format!(",J_{i}{j}"))).collect();
        write_csv(&dir.join("flow.csv"), &format!("t{phi_cols}{j_cols}"), &rows)?;
        println!("wrote {}", dir.join("flow.csv").display());
    }

    let j = flow.j_at(wp.ref_node);
    let sv = j.clone().svd(false, false).singular_values;
    let cond = sv.max() / sv[problem.n() - 1].max(1e-300);
    println!("order n                = {}", problem.n());
    println!("boundary points m      = {}", problem.m());
    println!("grid nodes             = {}", problem.grid().len());
    println!("det J(s_ref)           = {}", fmt(wp.det));
    println!("spot-check dets        = [{}, {}, {}]", fmt(wp.dets[0]), fmt(wp.dets[1]), fmt(wp.dets[2]));
    println!("threshold              = {}", fmt(tol.det * wp.scale));
    println!("cond J(s_ref)          = {:.3e}", cond);
    println!("integration tolerance  = {:.3e}", flow.tol_int());
    println!("wellposed              = {}", wp.wellposed);
    if wp.wellposed {
        Ok(())
    } else {
        Err(CliError::VerdictFail(format!("not well-posed: det = {}", fmt(wp.det))))
    }
}

fn cmd_classify(common: &Common, pairs_text: &str) -> Result<(), CliError> {
    let tol = tolerances(common)?;
    let pairs = parse_pairs(pairs_text)?;
    let extra: Vec<f64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let problem = load_problem(common, &extra, &tol)?;
    let dir = out_dir(common)?;
    let table = GreenTable::with_tolerances(&problem, &tol)?;
    let basic = basic_form(&problem, None, &tol)?;
    let grid = problem.grid();

    let mut rows = Vec::new();
    for &(a, b) in &pairs {
        let an = grid.node_index(a).ok_or(Error::GridMismatch { t: a })?;
        let bn = grid.node_index(b).ok_or(Error::GridMismatch { t: b })?;
        let cls = preserves(&basic, an, bn);
        let mut row = format!(
            "{},{},{},{},{},{}",
            fmt(a),
            fmt(b),
            cls.preserves,
            cls.l,
            cls.q,
            cls.p
        );
        if cls.preserves {
            let rep = regularity(&table, &basic, &cls)?;
            write!(
                row,
                ",{},{},{},{}",
                rep.regular,
                fmt(rep.dets[0]),
                fmt(rep.dets[1]),
                fmt(rep.dets[2])
            )
            .unwrap();
            if rep.regular {
                let split = splitting_determinant(&table, &basic, &cls)?;
                write!(row, ",{}", fmt(split.det)).unwrap();
            } else {
                row.push_str(",nan");
            }
        } else {
            row.push_str(",false,nan,nan,nan,nan");
        }
        println!(
            "pair ({a}, {b}): preserves={} l={} q={} p={}",
            cls.preserves, cls.l, cls.q, cls.p
        );
        rows.push(row);
    }
    write_csv(
        &dir.join("classify.csv"),
        "a,b,preserves,l,q,p,regular,det_45,det_46,det_47,splitting_det",
        &rows,
    )?;
    println!("wrote {}", dir.join("classify.csv").display());
    Ok(())
}

fn cmd_verify(
    common: &Common,
    pairs_text: Option<&str>,
    rand_pairs: usize,
    splits_text: Option<&str>,
    rand_splits: usize,
    seed: u64,
) -> Result<(), CliError> {
    let tol = tolerances(common)?;
    let explicit_pairs = pairs_text.map(parse_pairs).transpose()?;
    let explicit_splits = splits_text.map(parse_list).transpose()?;
    let mut extra: Vec<f64> = Vec::new();
    if let Some(ps) = &explicit_pairs {
        extra.extend(ps.iter().flat_map(|&(a, b)| [a, b]));
    }
    if let Some(ss) = &explicit_splits {
        extra.extend_from_slice(ss);
    }
    let problem = load_problem(common, &extra, &tol)?;
    let dir = out_dir(common)?;
    let table = GreenTable::with_tolerances(&problem, &tol)?;
    let basic = basic_form(&problem, None, &tol)?;
    let grid = problem.grid().clone();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(usize, usize)> = match &explicit_pairs {
        Some(ps) => ps
            .iter()
            .map(|&(a, b)| {
                Ok((
                    grid.node_index(a).ok_or(Error::GridMismatch { t: a })?,
                    grid.node_index(b).ok_or(Error::GridMismatch { t: b })?,
                ))
            })
            .collect::<Result<_, Error>>()?,
        None => random_pairs(&problem, rand_pairs, &mut rng),
    };
    let splits: Vec<usize> = match &explicit_splits {
        Some(ss) => ss
            .iter()
            .map(|&a| grid.node_index(a).ok_or(Error::GridMismatch { t: a }))
            .collect::<Result<_, Error>>()?,
        None => random_splits(&problem, rand_splits, &mut rng),
    };

    let mut rows = Vec::new();
    let mut failures = 0usize;
    for &(a, b) in &pairs {
        let (av, bv) = (grid.value(a), grid.value(b));
        let out = check_markov_field(&table, &basic, a, b, &tol);
        if !out.matches {
            failures += 1;
        }
        println!(
            "field ({av:.4}, {bv:.4}): preserving={} independent={} normalized={:.3e} {}",
            out.predicted_independent,
            out.verdict.independent,
            out.verdict.normalized,
            if out.matches { "pass" } else { "FAIL" }
        );
        rows.push(format!(
            "field,{},{},{},{},{},{},{},{},{}",
            fmt(av),
            fmt(bv),
            out.predicted_independent,
            out.predicted_independent,
            out.verdict.independent,
            fmt(out.verdict.normalized),
            fmt(out.verdict.max_abs_partial_cov),
            out.verdict.conditioning_rank,
            out.matches
        ));

        if !out.classification.preserves && !out.classification.endpoint_hit {
            let times = pair_sample_times(&grid, &basic, &out.classification);
            let enl = check_enlarged(&table, &basic, &out.classification, &times, &tol)?;
            if !enl.matches {
                failures += 1;
            }
            println!(
                "enlarged ({av:.4}, {bv:.4}): inside={:.3e} outside={:.3e} {}",
                enl.inside_variant.normalized,
                enl.outside_variant.normalized,
                if enl.matches { "pass" } else { "FAIL" }
            );
            rows.push(format!(
                "enlarged,{},{},{},{},{},{},{},{},{}",
                fmt(av),
                fmt(bv),
                false,
                true,
                enl.inside_variant.independent && enl.outside_variant.independent,
                fmt(enl.inside_variant.normalized.max(enl.outside_variant.normalized)),
                fmt(enl
                    .inside_variant
                    .max_abs_partial_cov
                    .max(enl.outside_variant.max_abs_partial_cov)),
                enl.inside_variant.conditioning_rank,
                enl.matches
            ));
        }
    }
    for &a in &splits {
        let av = grid.value(a);
        match check_split(&table, &basic, a, &tol) {
            Ok(out) => {
                if !out.matches {
                    failures += 1;
                }
                println!(
                    "split {av:.4}: one_sided={} independent={} normalized={:.3e} {}",
                    out.one_sided,
                    out.verdict.independent,
                    out.verdict.normalized,
                    if out.matches { "pass" } else { "FAIL" }
                );
                rows.push(format!(
                    "split,{},,{},{},{},{},{},{},{}",
                    fmt(av),
                    out.one_sided,
                    out.one_sided,
                    out.verdict.independent,
                    fmt(out.verdict.normalized),
                    fmt(out.verdict.max_abs_partial_cov),
                    out.verdict.conditioning_rank,
                    out.matches
                ));
            }
            Err(Error::EndpointInSupport { t }) => {
                println!("split {av:.4}: skipped, endpoint in support (t = {t})");
            }
            Err(e) => return Err(e.into()),
        }
    }
    write_csv(
        &dir.join("verify.csv"),
        "kind,a,b,classification,predicted_independent,independent,normalized,max_abs_partial_cov,cond_rank,pass",
        &rows,
    )?;
    println!("wrote {}", dir.join("verify.csv").display());
    if failures == 0 {
        println!("all {} checks passed", rows.len());
        Ok(())
    } else {
        Err(CliError::VerdictFail(format!("{failures} of {} checks failed", rows.len())))
    }
}

fn cmd_kernel(common: &Common, times_text: &str) -> Result<(), CliError> {
    let tol = tolerances(common)?;
    let times = parse_list(times_text)?;
    if times.is_empty() {
        return Err(CliError::Input("--times must list at least one time".into()));
    }
    let problem = load_problem(common, &times, &tol)?;
    let dir = out_dir(common)?;
    let table = GreenTable::with_tolerances(&problem, &tol)?;
    let grid = problem.grid();
    let n = problem.n();

    let mut influence_rows = Vec::new();
    let mut cov_rows = Vec::new();
    for &tv in &times {
        let t = grid.node_index(tv).ok_or(Error::GridMismatch { t: tv })?;
        let col = table.influence_column(t);
        for s in 0..grid.len() {
            let mut row = format!("{},{}", fmt(grid.value(t)), fmt(grid.value(s)));
            for i in 0..n {
                write!(row, ",{}", fmt(col.values[s][i])).unwrap();
            }
            influence_rows.push(row);
        }
        for s in 0..grid.len() {
            let c = table.cov_block(t, s);
            let mut row = format!("{},{}", fmt(grid.value(t)), fmt(grid.value(s)));
            for i in 0..n {
                for j in 0..n {
                    write!(row, ",{}", fmt(c[(i, j)])).unwrap();
                }
            }
            cov_rows.push(row);
        }
    }
    let g_cols: String = (1..=n).map(|i| format!(",g_{i}")).collect();
    let c_cols: String =
        (1..=n).flat_map(|i| (1..=n).map(move |j| format!(",C_{i}{j}"))).collect();
    write_csv(&dir.join("influence.csv"), &format!("t,s{g_cols}"), &influence_rows)?;
    write_csv(&dir.join("covariance.csv"), &format!("t,s{c_cols}"), &cov_rows)?;
    println!("wrote {} and {}", dir.join("influence.csv").display(), dir.join("covariance.csv").display());
    Ok(())
}

fn cmd_sample(common: &Common, paths: usize, seed: u64) -> Result<(), CliError> {
    let tol = tolerances(common)?;
    let problem = load_problem(common, &[], &tol)?;
    let dir = out_dir(common)?;
    let table = GreenTable::with_tolerances(&problem, &tol)?;
    let grid = problem.grid();
    let n = problem.n();

    let mut rows = Vec::new();
    for stream in 0..paths {
        let w = sample_wiener(grid, seed, stream as u64);
        let path = sample_solution(&table, &w)?;
        let residual = boundary_residual(&problem, &path).amax();
        println!("path {stream}: boundary residual {residual:.3e}");
        for k in 0..grid.len() {
            let mut row = format!("{stream},{}", fmt(grid.value(k)));
            for i in 0..n {
                write!(row, ",{}", fmt(path.values[k][i])).unwrap();
            }
            rows.push(row);
        }
    }
    let y_cols: String = (1..=n).map(|i| format!(",Y_{i}")).collect();
    write_csv(&dir.join("paths.csv"), &format!("path,t{y_cols}"), &rows)?;
    println!("wrote {}", dir.join("paths.csv").display());
    Ok(())
}

fn cmd_perturb(common: &Common, delta_text: &str, n_list_text: &str) -> Result<(), CliError> {
    let tol = tolerances(common)?;
    let problem = load_problem(common, &[], &tol)?;
    let dir = out_dir(common)?;
    let table = GreenTable::with_tolerances(&problem, &tol)?;

    let mut delta_values = parse_list(delta_text)?;
    if delta_values.is_empty() {
        delta_values = vec![0.0; problem.n()];
    }
    if delta_values.len() != problem.n() {
        return Err(CliError::Input(format!(
            "--delta needs {} entries, got {}",
            problem.n(),
            delta_values.len()
        )));
    }
    let delta: Vec<Coefficient> =
        delta_values.into_iter().map(|value| Coefficient::Constant { value }).collect();
    let n_list: Vec<u32> = parse_list(n_list_text)?
        .into_iter()
        .map(|x| {
            if x >= 1.0 && x.fract() == 0.0 {
                Ok(x as u32)
            } else {
                Err(CliError::Input(format!("bad N value {x}")))
            }
        })
        .collect::<Result<_, _>>()?;
    if n_list.is_empty() {
        return Err(CliError::Input("--n-list must list at least one N".into()));
    }

    let out = perturbation_experiment(&table, &delta, &n_list)?;
    let mut rows = Vec::new();
    for row in &out.rows {
        println!("N = {:5}: sup_t L2 = {:.6e}, kernel sup = {:.6e}", row.n, row.sup_l2, row.kernel_sup);
        rows.push(format!("{},{},{}", row.n, fmt(row.sup_l2), fmt(row.kernel_sup)));
    }
    write_csv(&dir.join("perturb.csv"), "N,sup_l2,kernel_sup", &rows)?;
    println!("wrote {}", dir.join("perturb.csv").display());
    Ok(())
}
