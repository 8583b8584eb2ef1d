//! Command line for the escape-rate toolkit: reproduces the published
//! tables, reports any supported map, and cross-checks spectral rates
//! against direct simulation.
//!
//! Exit codes: 0 when every inequality verdict and requested `--check`
//! comparison holds, 1 when a verdict, check, or computation fails, 2 for
//! usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use escape_lab_core::{
    build_report, escape_rate_from_eigenvalue, fit_escape_rate, leading_eigenvalue,
    lebesgue_measure, logistic_conjugacy, make_cat_map_model, make_doubling, make_logistic_partition,
    make_skewed_tent, map_spec_from_json, naive_n1, refine, simulate_survival, transition_matrix,
    EstimateReport, InitialLaw, IntervalPartition, MapSpec, MeasureVector, PiecewiseLinearMap,
    SubstochasticMatrix, DEFAULT_SPECTRAL_TOL,
};
use serde_json::json;

/// Published five-decimal values of −ln(1 − 1/k), truncated not rounded.
const NAIVE_TABLE_K: [usize; 7] = [4, 8, 16, 32, 64, 128, 256];
const NAIVE_TABLE: [f64; 7] = [0.28768, 0.13353, 0.06453, 0.03174, 0.01574, 0.00784, 0.00391];

/// Published lower bounds for the skewed tent map, one row per peak
/// position 0.1 … 0.5, one column per cell count 4 … 256.
const TABLE_X0: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
#[rustfmt::skip]
const LOWER_BOUND_TABLE: [[f64; 7]; 5] = [
    [0.77922, 0.44239, 0.28375, 0.19638, 0.14384, 0.10949, 0.08598],
    [0.47400, 0.25981, 0.16685, 0.11452, 0.07286, 0.04757, 0.03175],
    [0.37517, 0.21720, 0.11717, 0.06234, 0.03491, 0.01987, 0.01149],
    [0.37047, 0.17868, 0.08023, 0.03931, 0.01990, 0.01022, 0.00529],
    [0.42387, 0.15808, 0.06928, 0.03297, 0.01604, 0.00792, 0.00393],
];

/// Published four-decimal cat map values.
const CAT_AVERAGE: f64 = 0.2494;
const CAT_LOWER_BOUND: f64 = 0.2476;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] escape_lab_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser)]
#[command(name = "escape-lab", version, about = "Escape rates of open chaotic maps with Markov holes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Convergence tolerance for eigenvalue solves.
    #[arg(long, global = true, default_value_t = DEFAULT_SPECTRAL_TOL)]
    tol: f64,
    /// Output format: csv and json keep full precision, pretty prints five decimals.
    #[arg(long, global = true, value_enum, default_value_t = Format::Pretty)]
    format: Format,
    /// Write the output to this file instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Compare results against the published reference values.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Lower-bound table of the skewed tent map over peak positions and cell counts.
    TentTable {
        /// Peak positions, comma separated. Default: 0.1,0.2,0.3,0.4,0.5.
        #[arg(long, value_delimiter = ',')]
        x0: Vec<f64>,
        /// Cell counts (powers of two), comma separated. Default: 4,8,…,256.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        /// Also emit the average rate and the naive estimates per cell.
        #[arg(long)]
        full: bool,
    },
    /// Naive estimate −ln(1 − 1/k) per cell count.
    NaiveTable {
        /// Cell counts, comma separated. Default: 4,8,…,256.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
    },
    /// Five-state cat map chain: eigenvalues, closed-form references, and the report.
    Cat,
    /// Conjugated logistic map at a given subdivision depth; checks the tent transfer.
    Logistic {
        /// Subdivision depth n, giving 2ⁿ cells.
        #[arg(long, default_value_t = 2)]
        level: u32,
    },
    /// Monte Carlo survival run for one hole, compared against the spectral rate.
    Simulate {
        #[command(flatten)]
        target: MapArgs,
        /// Hole cell, 1-based.
        #[arg(long, default_value_t = 1)]
        hole: usize,
        /// Orbit count.
        #[arg(long, default_value_t = 10_000_000)]
        samples: u64,
        /// Longest survival time tracked; the fit window is [5, nmax].
        #[arg(long, default_value_t = 20)]
        nmax: usize,
        /// Random seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Full estimator report for one map.
    Report {
        #[command(flatten)]
        target: MapArgs,
    },
}

/// Map selection shared by `report` and `simulate`: either an inline JSON
/// spec (or a path to one), or tent/doubling shorthand flags.
#[derive(clap::Args)]
struct MapArgs {
    /// Map spec as JSON, or a path to a JSON file.
    #[arg(long, conflicts_with_all = ["x0", "skew", "levels"])]
    spec: Option<String>,
    /// Skewed tent peak position.
    #[arg(long, conflicts_with = "skew")]
    x0: Option<f64>,
    /// Skewed doubling map break position.
    #[arg(long)]
    skew: Option<f64>,
    /// Refinement steps applied to the two-cell base partition.
    #[arg(long, default_value_t = 0)]
    levels: u32,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Pretty,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_thread_pool() {
        eprintln!("escape-lab: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("escape-lab: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

/// ESCAPE_LAB_THREADS caps the rayon workers used for per-hole solves.
fn init_thread_pool() -> CliResult<()> {
    let Ok(raw) = std::env::var("ESCAPE_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("ESCAPE_LAB_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| usage(e.to_string()))
}

fn run(cli: Cli) -> CliResult<bool> {
    let (text, ok) = match cli.command {
        Command::TentTable { x0, k, full } => {
            cmd_tent_table(x0, k, full, cli.tol, cli.format, cli.check)?
        }
        Command::NaiveTable { k } => cmd_naive_table(k, cli.format, cli.check)?,
        Command::Cat => cmd_cat(cli.tol, cli.format, cli.check)?,
        Command::Logistic { level } => cmd_logistic(level, cli.tol, cli.format, cli.check)?,
        Command::Simulate { target, hole, samples, nmax, seed } => {
            cmd_simulate(target, hole, samples, nmax, seed, cli.tol, cli.format)?
        }
        Command::Report { target } => cmd_report(target, cli.tol, cli.format, cli.check)?,
    };
    match cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(ok)
}

fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// The system every command reduces to: an interval map carrying its
/// partition, or a bare symbolic chain.
enum System {
    Interval { map: PiecewiseLinearMap, partition: IntervalPartition, measure: MeasureVector },
    Symbolic { matrix: SubstochasticMatrix, measure: MeasureVector },
}

impl System {
    fn report(&self, tol: f64) -> CliResult<EstimateReport> {
        let (matrix, measure) = match self {
            System::Interval { map, partition, measure } => {
                (transition_matrix(map, partition)?, measure)
            }
            System::Symbolic { matrix, measure } => (matrix.clone(), measure),
        };
        Ok(build_report(&matrix, measure, tol)?)
    }
}

fn resolve_spec(args: &MapArgs) -> CliResult<MapSpec> {
    if let Some(raw) = &args.spec {
        let doc = if raw.trim_start().starts_with('{') {
            raw.clone()
        } else {
            std::fs::read_to_string(raw)?
        };
        return Ok(map_spec_from_json(&doc).map_err(|e| usage(e.to_string()))?);
    }
    match (args.x0, args.skew) {
        (Some(x0), None) => Ok(MapSpec::Tent { x0, level: args.levels }),
        (None, Some(skew)) => Ok(MapSpec::Doubling { skew, level: args.levels }),
        (None, None) => Err(usage("pick a map: --spec JSON, --x0 POS, or --skew POS")),
        (Some(_), Some(_)) => unreachable!("clap rejects --x0 with --skew"),
    }
}

fn build_system(spec: MapSpec) -> CliResult<System> {
    match spec {
        MapSpec::Tent { x0, level } => {
            let map = make_skewed_tent(x0)?;
            let partition = refine(&map, map.base_partition(), level)?;
            let measure = lebesgue_measure(&partition);
            Ok(System::Interval { map, partition, measure })
        }
        MapSpec::Doubling { skew, level } => {
            let map = make_doubling(skew)?;
            let partition = refine(&map, map.base_partition(), level)?;
            let measure = lebesgue_measure(&partition);
            Ok(System::Interval { map, partition, measure })
        }
        MapSpec::Logistic { level } => {
            let (matrix, measure) = logistic_chain(level)?;
            Ok(System::Symbolic { matrix, measure })
        }
        MapSpec::Cat { level } => {
            let model = make_cat_map_model();
            let model = match level {
                0 => model,
                1 => model.refine_pairs(),
                n => return Err(usage(format!("cat level must be 0 or 1, got {n}"))),
            };
            Ok(System::Symbolic {
                matrix: model.transition().clone(),
                measure: model.state_measure().clone(),
            })
        }
    }
}

/// Transition matrix and invariant measure of the logistic map at depth n,
/// built by pulling its partition back to tent coordinates.
fn logistic_chain(level: u32) -> CliResult<(SubstochasticMatrix, MeasureVector)> {
    let (cells, measure) = make_logistic_partition(level)?;
    let conj = logistic_conjugacy();
    let pulled: Vec<f64> = cells.breakpoints().iter().map(|&b| conj.inverse(b)).collect();
    let symbolic = IntervalPartition::from_breakpoints(&pulled)?;
    let tent = make_skewed_tent(0.5)?;
    Ok((transition_matrix(&tent, &symbolic)?, measure))
}

fn render_report(report: &EstimateReport, format: Format) -> CliResult<String> {
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| usage(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => report.to_csv(),
        Format::Pretty => pretty_report(report),
    })
}

fn pretty_report(r: &EstimateReport) -> String {
    let mut out = String::from("hole  survival p      rho\n");
    for rate in &r.hole_rates {
        out.push_str(&format!(
            "{:>4}     {:.5}  {:>7.5}\n",
            rate.hole_index + 1,
            rate.p,
            rate.rho
        ));
    }
    out.push_str(&format!("average rho  {:.5}\n", r.average_rho));
    out.push_str(&format!("lower bound  {:.5}\n", r.lower_bound));
    out.push_str(&format!("N1           {:.5}\n", r.n1));
    out.push_str(&format!("N2           {:.5}\n", r.n2));
    out.push_str(&format!(
        "average >= lower bound: {}\nN2 >= N1: {}\n",
        yes_no(r.jensen_holds),
        yes_no(r.n2_ge_n1_holds)
    ));
    out
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn report_verdicts(r: &EstimateReport) -> bool {
    r.jensen_holds && r.n2_ge_n1_holds
}

/// Reference lower bound for a tent configuration, when the published
/// table has it.
fn tent_reference(x0: f64, k: usize) -> Option<f64> {
    let xi = TABLE_X0.iter().position(|&r| (r - x0).abs() < 1e-9)?;
    let ki = NAIVE_TABLE_K.iter().position(|&r| r == k)?;
    Some(LOWER_BOUND_TABLE[xi][ki])
}

fn cmd_tent_table(
    x0s: Vec<f64>,
    ks: Vec<usize>,
    full: bool,
    tol: f64,
    format: Format,
    check: bool,
) -> CliResult<(String, bool)> {
    let x0s = if x0s.is_empty() { TABLE_X0.to_vec() } else { x0s };
    let ks = if ks.is_empty() { NAIVE_TABLE_K.to_vec() } else { ks };
    for &x0 in &x0s {
        if !(x0 > 0.0 && x0 < 1.0) {
            return Err(usage(format!("--x0 {x0} is outside (0,1)")));
        }
    }
    for &k in &ks {
        if k < 2 || !k.is_power_of_two() {
            return Err(usage(format!("--k {k} must be a power of two, at least 2")));
        }
    }

    let mut rows = Vec::with_capacity(x0s.len());
    for &x0 in &x0s {
        let map = make_skewed_tent(x0)?;
        let row: Vec<Result<EstimateReport, escape_lab_core::Error>> = ks
            .iter()
            .map(|&k| {
                let levels = k.trailing_zeros() - 1;
                let p = refine(&map, map.base_partition(), levels)?;
                let m = transition_matrix(&map, &p)?;
                build_report(&m, &lebesgue_measure(&p), tol)
            })
            .collect();
        rows.push(row);
    }

    let mut ok = true;
    for (xi, row) in rows.iter().enumerate() {
        for (ki, cell) in row.iter().enumerate() {
            match cell {
                Ok(report) => {
                    ok &= report_verdicts(report);
                    if check {
                        if let Some(want) = tent_reference(x0s[xi], ks[ki]) {
                            if (report.lower_bound - want).abs() >= 1e-4 {
                                eprintln!(
                                    "check failed: x0={} k={}: lower bound {:.5} vs published {want}",
                                    x0s[xi], ks[ki], report.lower_bound
                                );
                                ok = false;
                            }
                        }
                    }
                }
                Err(e) => {
                    eprintln!("x0={} k={}: {e}", x0s[xi], ks[ki]);
                    ok = false;
                }
            }
        }
    }

    let text = match format {
        Format::Pretty => {
            let mut out = String::new();
            let titles: &[(&str, fn(&EstimateReport) -> f64)] = if full {
                &[
                    ("lower bound", |r| r.lower_bound),
                    ("average rho", |r| r.average_rho),
                    ("N2", |r| r.n2),
                    ("N1", |r| r.n1),
                ]
            } else {
                &[("lower bound", |r| r.lower_bound)]
            };
            for (t, (title, get)) in titles.iter().enumerate() {
                if t > 0 {
                    out.push('\n');
                }
                out.push_str(&format!("{title}\n  x0\\k"));
                for &k in &ks {
                    out.push_str(&format!("  {k:>7}"));
                }
                out.push('\n');
                for (xi, row) in rows.iter().enumerate() {
                    out.push_str(&format!("{:>6.2}", x0s[xi]));
                    for cell in row {
                        match cell {
                            Ok(r) => out.push_str(&format!("  {:>7.5}", get(r))),
                            Err(_) => out.push_str("      err"),
                        }
                    }
                    out.push('\n');
                }
            }
            out
        }
        Format::Csv => {
            let mut out = String::from(if full {
                "x0,k,lower_bound,average_rho,n1,n2\n"
            } else {
                "x0,k,lower_bound\n"
            });
            for (xi, row) in rows.iter().enumerate() {
                for (ki, cell) in row.iter().enumerate() {
                    out.push_str(&format!("{},{}", x0s[xi], ks[ki]));
                    match cell {
                        Ok(r) if full => out.push_str(&format!(
                            ",{},{},{},{}\n",
                            sig17(r.lower_bound),
                            sig17(r.average_rho),
                            sig17(r.n1),
                            sig17(r.n2)
                        )),
                        Ok(r) => out.push_str(&format!(",{}\n", sig17(r.lower_bound))),
                        Err(_) => out.push_str(",error\n"),
                    }
                }
            }
            out
        }
        Format::Json => {
            let mut cells = Vec::new();
            for (xi, row) in rows.iter().enumerate() {
                for (ki, cell) in row.iter().enumerate() {
                    cells.push(match cell {
                        Ok(r) if full => json!({
                            "x0": x0s[xi],
                            "k": ks[ki],
                            "lower_bound": r.lower_bound,
                            "average_rho": r.average_rho,
                            "n1": r.n1,
                            "n2": r.n2,
                        }),
                        Ok(r) => json!({
                            "x0": x0s[xi],
                            "k": ks[ki],
                            "lower_bound": r.lower_bound,
                        }),
                        Err(e) => json!({
                            "x0": x0s[xi],
                            "k": ks[ki],
                            "error": e.to_string(),
                        }),
                    });
                }
            }
            format!("{:#}\n", serde_json::Value::Array(cells))
        }
    };
    Ok((text, ok))
}

fn cmd_naive_table(ks: Vec<usize>, format: Format, check: bool) -> CliResult<(String, bool)> {
    let ks = if ks.is_empty() { NAIVE_TABLE_K.to_vec() } else { ks };
    let mut values = Vec::with_capacity(ks.len());
    for &k in &ks {
        values.push(naive_n1(k).map_err(|e| usage(e.to_string()))?);
    }

    let mut ok = true;
    if check {
        for (&k, &v) in ks.iter().zip(&values) {
            if let Some(pos) = NAIVE_TABLE_K.iter().position(|&r| r == k) {
                let truncated = (v * 1e5).floor() / 1e5;
                if (truncated - NAIVE_TABLE[pos]).abs() >= 1e-9 {
                    eprintln!("check failed: k={k}: N1 {truncated} vs published {}", NAIVE_TABLE[pos]);
                    ok = false;
                }
            }
        }
    }

    let text = match format {
        Format::Pretty => {
            let mut out = String::from("   k       N1\n");
            for (&k, &v) in ks.iter().zip(&values) {
                out.push_str(&format!("{k:>4}  {v:.5}\n"));
            }
            out
        }
        Format::Csv => {
            let mut out = String::from("k,n1\n");
            for (&k, &v) in ks.iter().zip(&values) {
                out.push_str(&format!("{k},{}\n", sig17(v)));
            }
            out
        }
        Format::Json => {
            let cells: Vec<_> =
                ks.iter().zip(&values).map(|(&k, &v)| json!({"k": k, "n1": v})).collect();
            format!("{:#}\n", serde_json::Value::Array(cells))
        }
    };
    Ok((text, ok))
}

fn cmd_cat(tol: f64, format: Format, check: bool) -> CliResult<(String, bool)> {
    let model = make_cat_map_model();
    let report = build_report(model.transition(), model.state_measure(), tol)?;
    let s5 = 5.0f64.sqrt();
    let small = 3.0 - s5;
    let references = [small, small, small, small, (1.0 + 2.0f64.sqrt()) / 2.0 * small];
    let measures = model.state_measure().weights().to_vec();

    let mut ok = report_verdicts(&report);
    if check {
        for (rate, &want) in report.hole_rates.iter().zip(&references) {
            if (rate.p - want).abs() >= 1e-10 {
                eprintln!("check failed: hole {}: eigenvalue {} vs closed form {want}", rate.hole_index + 1, rate.p);
                ok = false;
            }
        }
        if (report.average_rho - CAT_AVERAGE).abs() >= 5e-4 {
            eprintln!("check failed: average rho {} vs published {CAT_AVERAGE}", report.average_rho);
            ok = false;
        }
        if (report.lower_bound - CAT_LOWER_BOUND).abs() >= 5e-4 {
            eprintln!("check failed: lower bound {} vs published {CAT_LOWER_BOUND}", report.lower_bound);
            ok = false;
        }
    }

    let text = match format {
        Format::Pretty => {
            let mut out = String::from("five-state cat map chain\n\nstate  measure  survival p  reference      rho\n");
            for (i, rate) in report.hole_rates.iter().enumerate() {
                out.push_str(&format!(
                    "{:>5}  {:.5}     {:.5}    {:.5}  {:.5}\n",
                    i + 1,
                    measures[i],
                    rate.p,
                    references[i],
                    rate.rho
                ));
            }
            out.push('\n');
            out.push_str(&pretty_report(&report));
            out
        }
        Format::Csv => {
            let mut out = report.to_csv();
            for (i, &m) in measures.iter().enumerate() {
                out.push_str(&format!("state_measure,{i},{}\n", sig17(m)));
            }
            for (i, &r) in references.iter().enumerate() {
                out.push_str(&format!("eigenvalue_reference,{i},{}\n", sig17(r)));
            }
            out
        }
        Format::Json => format!(
            "{:#}\n",
            json!({
                "state_measures": measures,
                "eigenvalue_references": references,
                "report": report,
            })
        ),
    };
    Ok((text, ok))
}

fn cmd_logistic(level: u32, tol: f64, format: Format, check: bool) -> CliResult<(String, bool)> {
    if level == 0 {
        return Err(usage("--level must be at least 1"));
    }
    let k = 1usize << level;
    let (matrix, measure) = logistic_chain(level)?;
    let report = build_report(&matrix, &measure, tol)?;
    let (cells, _) = make_logistic_partition(level)?;

    // The conjugacy sends the logistic system to the symmetric tent map, so
    // the two reports must agree to float dust.
    let tent_map = make_skewed_tent(0.5)?;
    let tent_p = refine(&tent_map, tent_map.base_partition(), level - 1)?;
    let tent_report = build_report(
        &transition_matrix(&tent_map, &tent_p)?,
        &lebesgue_measure(&tent_p),
        tol,
    )?;
    let mut difference = (report.average_rho - tent_report.average_rho).abs();
    difference = difference.max((report.lower_bound - tent_report.lower_bound).abs());
    difference = difference.max((report.n1 - tent_report.n1).abs());
    difference = difference.max((report.n2 - tent_report.n2).abs());
    for (a, b) in report.hole_rates.iter().zip(&tent_report.hole_rates) {
        difference = difference.max((a.p - b.p).abs());
        difference = difference.max((a.rho - b.rho).abs());
    }
    let matches_tent = difference < 1e-12;

    let mut ok = report_verdicts(&report) && matches_tent;
    if !matches_tent {
        eprintln!("logistic report differs from tent x0=0.5 k={k} by {difference:.2e}");
    }
    if check {
        if let Some(want) = tent_reference(0.5, k) {
            if (report.lower_bound - want).abs() >= 1e-4 {
                eprintln!("check failed: lower bound {:.5} vs published {want}", report.lower_bound);
                ok = false;
            }
        }
    }

    let breakpoints = cells.breakpoints();
    let text = match format {
        Format::Pretty => {
            let mut out = format!("logistic partition, {k} cells\n");
            for b in &breakpoints {
                out.push_str(&format!("  {b:.5}"));
            }
            out.push_str("\n\n");
            out.push_str(&pretty_report(&report));
            out.push_str(&format!(
                "matches tent x0=0.5 k={k}: {} (max difference {difference:.2e})\n",
                yes_no(matches_tent)
            ));
            out
        }
        Format::Csv => {
            let mut out = report.to_csv();
            for (i, &b) in breakpoints.iter().enumerate() {
                out.push_str(&format!("breakpoint,{i},{}\n", sig17(b)));
            }
            out.push_str(&format!("tent_difference,{}\n", sig17(difference)));
            out
        }
        Format::Json => format!(
            "{:#}\n",
            json!({
                "level": level,
                "cell_count": k,
                "breakpoints": breakpoints,
                "report": report,
                "tent_difference": difference,
                "matches_tent": matches_tent,
            })
        ),
    };
    Ok((text, ok))
}

fn cmd_simulate(
    target: MapArgs,
    hole: usize,
    samples: u64,
    nmax: usize,
    seed: u64,
    tol: f64,
    format: Format,
) -> CliResult<(String, bool)> {
    if samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    if nmax < 8 {
        return Err(usage("--nmax must be at least 8 to fit on [5, nmax]"));
    }
    let spec = resolve_spec(&target)?;
    let System::Interval { map, partition, .. } = build_system(spec)? else {
        return Err(usage("only tent and doubling maps can be simulated directly"));
    };
    if hole == 0 || hole > partition.len() {
        return Err(usage(format!(
            "--hole {hole} is outside 1..={} for this partition",
            partition.len()
        )));
    }

    let matrix = transition_matrix(&map, &partition)?;
    let punched = matrix.punch_hole(hole - 1)?;
    let spectral = leading_eigenvalue(&punched, tol)?;
    let rho = escape_rate_from_eigenvalue(spectral.eigenvalue)?;
    if !rho.is_finite() {
        return Err(usage("nothing survives this hole; there is no rate to fit"));
    }

    let cell = partition.cell(hole - 1).expect("hole index checked");
    let series = simulate_survival(&map, &cell, nmax, samples, seed, InitialLaw::default())?;
    let fit = fit_escape_rate(&series, (5, nmax))?;
    let tolerance = (0.02 * rho).max(3.0 * fit.stderr);
    let agrees = (fit.rate - rho).abs() <= tolerance;

    let text = match format {
        Format::Pretty => format!(
            "spectral rho    {rho:.5}\nfitted rate     {:.5}\nstderr          {:.5}\nfit window      {}..{}\ndifference      {:.5}\ntolerance       {:.5}\nagreement: {}\n",
            fit.rate,
            fit.stderr,
            fit.window.0,
            fit.window.1,
            (fit.rate - rho).abs(),
            tolerance,
            yes_no(agrees)
        ),
        Format::Csv => {
            let mut out = String::from("field,value\n");
            out.push_str(&format!("spectral_rho,{}\n", sig17(rho)));
            out.push_str(&format!("fitted_rate,{}\n", sig17(fit.rate)));
            out.push_str(&format!("stderr,{}\n", sig17(fit.stderr)));
            out.push_str(&format!("window_lo,{}\n", fit.window.0));
            out.push_str(&format!("window_hi,{}\n", fit.window.1));
            out.push_str(&format!("tolerance,{}\n", sig17(tolerance)));
            out.push_str(&format!("agrees,{agrees}\n"));
            out
        }
        Format::Json => format!(
            "{:#}\n",
            json!({
                "hole": hole,
                "samples": samples,
                "seed": seed,
                "spectral_rho": rho,
                "fitted_rate": fit.rate,
                "stderr": fit.stderr,
                "window": [fit.window.0, fit.window.1],
                "tolerance": tolerance,
                "agrees": agrees,
            })
        ),
    };
    Ok((text, agrees))
}

fn cmd_report(target: MapArgs, tol: f64, format: Format, check: bool) -> CliResult<(String, bool)> {
    let spec = resolve_spec(&target)?;
    let report = build_system(spec)?.report(tol)?;

    let mut ok = report_verdicts(&report);
    if check {
        ok &= check_report(&spec, &report)?;
    }
    Ok((render_report(&report, format)?, ok))
}

fn check_report(spec: &MapSpec, report: &EstimateReport) -> CliResult<bool> {
    let reference = match *spec {
        MapSpec::Tent { x0, level } => tent_reference(x0, 2usize << level),
        MapSpec::Logistic { level } => tent_reference(0.5, 1usize << level),
        MapSpec::Cat { level: 0 } => {
            let mut ok = true;
            if (report.average_rho - CAT_AVERAGE).abs() >= 5e-4 {
                eprintln!("check failed: average rho {} vs published {CAT_AVERAGE}", report.average_rho);
                ok = false;
            }
            if (report.lower_bound - CAT_LOWER_BOUND).abs() >= 5e-4 {
                eprintln!("check failed: lower bound {} vs published {CAT_LOWER_BOUND}", report.lower_bound);
                ok = false;
            }
            return Ok(ok);
        }
        _ => None,
    };
    let Some(want) = reference else {
        return Err(usage("no published reference values for this configuration"));
    };
    if (report.lower_bound - want).abs() >= 1e-4 {
        eprintln!("check failed: lower bound {:.5} vs published {want}", report.lower_bound);
        return Ok(false);
    }
    Ok(true)
}
