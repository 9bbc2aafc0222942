//! `gcsstar`: solve graphs of convex sets, run benchmark sweeps and draw
//! planar solutions.
//!
//! Exit codes: 0 solved, 1 internal solver failure, 2 no path exists,
//! 3 timeout or expansion limit, 4 invalid input.

mod svg;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use gcs_star::domination::{CheckImpl, CheckerConfig};
use gcs_star::heuristic::{Heuristic, HeuristicSpec};
use gcs_star::io::{LoadedProblem, RunRecord};
use gcs_star::lp::LpSolver;
use gcs_star::search::{astar_vertex_baseline, gcs_star, SearchError, SearchOptions, SearchResult, SearchStatus};
use rayon::prelude::*;

const ASTAR_BASELINE: &str = "astar-baseline";

#[derive(Parser)]
#[command(name = "gcsstar", version, about = "Forward heuristic search on graphs of convex sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write the solution record.
    Solve(SolveArgs),
    /// Run checkers x heuristics x fixtures and write a CSV table.
    Bench(BenchArgs),
    /// Draw a stored solution of a planar problem.
    Viz(VizArgs),
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Explicit problem or pushing environment JSON.
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    problem: Option<PathBuf>,
    /// Built-in fixture: fig3, stones4 or push1.
    #[arg(long)]
    fixture: Option<String>,
}

#[derive(Args, Clone)]
struct SearchArgs {
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Samples per sampling check.
    #[arg(long, default_value_t = 1)]
    samples: usize,
    /// Seed for sampling checks; required when a sampling or hybrid checker runs.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_path_len: Option<usize>,
    #[arg(long)]
    max_expansions: Option<usize>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Fan successor work out over threads.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// rc-/rn- with sampling, containment or hybrid, or astar-baseline.
    #[arg(long, default_value = "rc-containment")]
    checker: String,
    /// zero or shortcut.
    #[arg(long, default_value = "shortcut")]
    heuristic: String,
    #[command(flatten)]
    search: SearchArgs,
    /// Solution JSON path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also draw the solution (planar problems only).
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "rc-containment,rn-sampling")]
    checkers: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "shortcut")]
    heuristics: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "fig3,stones4")]
    fixtures: Vec<String>,
    #[command(flatten)]
    search: SearchArgs,
    /// CSV path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VizArgs {
    /// Solution JSON written by `solve`.
    #[arg(long)]
    solution: PathBuf,
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    svg: PathBuf,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn input_error(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 4, error: error.into() }
}

fn status_code(status: SearchStatus) -> u8 {
    match status {
        SearchStatus::Solved => 0,
        SearchStatus::Fail => 2,
        SearchStatus::TimedOut | SearchStatus::ExpansionLimit => 3,
    }
}

fn load_problem(args: &ProblemArgs) -> Result<LoadedProblem, Failure> {
    match (&args.problem, &args.fixture) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(input_error)?;
            LoadedProblem::from_json(&text).with_context(|| format!("invalid problem {}", path.display())).map_err(input_error)
        }
        (None, Some(name)) => LoadedProblem::fixture(name).map_err(input_error),
        (None, None) => Err(input_error(anyhow!("either --problem or --fixture is required"))),
    }
}

enum Algorithm {
    GcsStar(CheckerConfig),
    Baseline,
}

fn parse_checker(key: &str, args: &SearchArgs) -> Result<Algorithm, Failure> {
    if key == ASTAR_BASELINE {
        return Ok(Algorithm::Baseline);
    }
    let checker: CheckerConfig = key.parse().map_err(|e: String| input_error(anyhow!(e)))?;
    if args.samples == 0 {
        return Err(input_error(anyhow!("--samples must be at least 1")));
    }
    let seed = match (checker.implementation, args.seed) {
        (CheckImpl::Containment, seed) => seed.unwrap_or(0),
        (_, Some(seed)) => seed,
        (_, None) => return Err(input_error(anyhow!("checker {key} samples points and needs --seed"))),
    };
    Ok(Algorithm::GcsStar(checker.with_samples(args.samples).with_seed(seed)))
}

fn options(args: &SearchArgs) -> Result<SearchOptions, Failure> {
    let timeout = match args.timeout {
        Some(t) if !(t.is_finite() && t >= 0.0) => return Err(input_error(anyhow!("--timeout must be a nonnegative number of seconds"))),
        t => t.map(Duration::from_secs_f64),
    };
    Ok(SearchOptions { max_path_len: args.max_path_len, max_expansions: args.max_expansions, timeout, parallel: args.parallel })
}

struct Run {
    result: SearchResult,
    checker_key: String,
    heuristic_key: String,
    seed: u64,
}

fn run(problem: &LoadedProblem, checker: &str, heuristic: &str, args: &SearchArgs) -> Result<Run, Failure> {
    let solver = LpSolver::from_env().map_err(input_error)?;
    let g = problem.graph();
    let algorithm = parse_checker(checker, args)?;
    let spec = HeuristicSpec::from_key(heuristic, g, args.epsilon).map_err(|e| input_error(anyhow!(e)))?;
    let heuristic_key = spec.to_string();
    let h = Heuristic::new(spec, g, &solver).map_err(input_error)?;
    let opts = options(args)?;
    let (result, seed) = match &algorithm {
        Algorithm::GcsStar(c) => (gcs_star(g, &h, c, &opts, &solver), c.seed),
        Algorithm::Baseline => (astar_vertex_baseline(g, &h, &opts, &solver), args.seed.unwrap_or(0)),
    };
    let result = result.map_err(|e| match e {
        SearchError::MissingMaxPathLen => input_error(anyhow!(e)),
        other => Failure { code: 1, error: anyhow!(other) },
    })?;
    Ok(Run { result, checker_key: checker.to_string(), heuristic_key, seed })
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())).map_err(input_error),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn render(problem: &LoadedProblem, record: &RunRecord) -> Result<String, Failure> {
    let g = problem.graph();
    let stored = record.trajectory(g).map_err(input_error)?;
    let (path, traj) = stored.ok_or_else(|| input_error(anyhow!("solution has no trajectory to draw")))?;
    match problem {
        LoadedProblem::Explicit(e) => svg::render_explicit(e, &path, &traj),
        LoadedProblem::Pushing(p) => svg::render_pushing(p, &path, &traj),
    }
    .map_err(|e| input_error(anyhow!(e)))
}

fn cmd_solve(args: SolveArgs) -> Result<u8, Failure> {
    let problem = load_problem(&args.problem)?;
    if let (Some(_), LoadedProblem::Explicit(e)) = (&args.svg, &problem) {
        svg::check_planar(e).map_err(|e| input_error(anyhow!(e)))?;
    }
    let run = run(&problem, &args.checker, &args.heuristic, &args.search)?;
    let record = RunRecord::new(&run.result, run.seed, &run.checker_key, &run.heuristic_key);
    write_or_print(args.out.as_ref(), &(record.to_json() + "\n"))?;
    if let (Some(svg_path), Some(_)) = (&args.svg, &run.result.solution) {
        let image = render(&problem, &record)?;
        write_or_print(Some(svg_path), &image)?;
    }
    eprintln!(
        "{}: {} expansions, cost {}",
        run.result.status,
        run.result.stats.expansions,
        record.cost.map_or("-".to_string(), |c| c.to_string())
    );
    Ok(status_code(run.result.status))
}

const CSV_HEADER: &str = "alg,checker,impl,heuristic,fixture,time,cost,expansions,status";

fn bench_row(fixture: &str, checker: &str, heuristic: &str, args: &SearchArgs) -> String {
    let (alg, kind, imp) = match checker.split_once('-') {
        _ if checker == ASTAR_BASELINE => ("astar_baseline", "-", "-"),
        Some((k, i)) => ("gcs_star", k, i),
        None => ("gcs_star", checker, "-"),
    };
    let started = Instant::now();
    let outcome = LoadedProblem::fixture(fixture).map_err(input_error).and_then(|p| run(&p, checker, heuristic, args));
    let time = started.elapsed().as_secs_f64();
    match outcome {
        Ok(r) => {
            let cost = r.result.solution.as_ref().map_or(String::new(), |s| s.cost.to_string());
            format!("{alg},{kind},{imp},{},{fixture},{time:.6},{cost},{},{}", r.heuristic_key, r.result.stats.expansions, r.result.status)
        }
        Err(f) => format!("{alg},{kind},{imp},{heuristic},{fixture},{time:.6},,,error: {}", f.error.to_string().replace([',', '\n'], ";")),
    }
}

fn cmd_bench(args: BenchArgs) -> Result<u8, Failure> {
    for c in &args.checkers {
        parse_checker(c, &args.search)?;
    }
    options(&args.search)?;
    let mut matrix = Vec::new();
    for c in &args.checkers {
        for h in &args.heuristics {
            for f in &args.fixtures {
                matrix.push((c, h, f));
            }
        }
    }
    let rows: Vec<String> = matrix.par_iter().map(|(c, h, f)| bench_row(f, c, h, &args.search)).collect();
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    write_or_print(args.out.as_ref(), &csv)?;
    Ok(0)
}

fn cmd_viz(args: VizArgs) -> Result<u8, Failure> {
    let problem = load_problem(&args.problem)?;
    let text = fs::read_to_string(&args.solution).with_context(|| format!("cannot read {}", args.solution.display())).map_err(input_error)?;
    let record = RunRecord::from_json(&text).map_err(input_error)?;
    let image = render(&problem, &record)?;
    write_or_print(Some(&args.svg), &image)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Viz(a) => cmd_viz(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
