use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use deltabmc::checker::{check_reach, CheckConfig, Verdict};
use deltabmc::parse_model;

const EXIT_USAGE: u8 = 64;
const EXIT_MODEL: u8 = 65;

/// Bounded δ-complete reachability checking for nonlinear hybrid automata.
#[derive(Parser, Debug)]
#[command(name = "deltabmc", version)]
struct Args {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    /// Maximum number of jumps.
    #[arg(long)]
    k: usize,
    /// Maximum duration of each continuous step.
    #[arg(long = "M")]
    m: f64,
    /// Weakening precision.
    #[arg(long)]
    delta: f64,
    /// Box width below which the solver stops branching (default delta/4).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Maximum number of solver nodes per path.
    #[arg(long, default_value_t = 1_000_000)]
    node_budget: u64,
    /// Wall-clock budget for the whole run, in seconds.
    #[arg(long, default_value_t = 300.0)]
    time_budget: f64,
    /// Solver worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write the witness trace as JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the witness grid as CSV.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
    /// Check the unsafe region along the whole last flow, not only at its end.
    #[arg(long)]
    interior_unsafe: bool,
    /// Record that the model's invariants are strictly imposed.
    #[arg(long)]
    strict_invariants: bool,
    /// Print a machine-readable report instead of the summary line.
    #[arg(long)]
    json: bool,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    eprintln!("usage: deltabmc --model <FILE> --k <K> --M <M> --delta <DELTA> [options]");
    ExitCode::from(EXIT_USAGE)
}

fn run(args: Args) -> ExitCode {
    if !(args.delta > 0.0 && args.delta.is_finite()) {
        return usage("--delta must be positive");
    }
    if !(args.m > 0.0 && args.m.is_finite()) {
        return usage("--M must be positive");
    }
    let epsilon = args.epsilon.unwrap_or(args.delta / 4.0);
    if !(epsilon > 0.0 && epsilon <= args.delta) {
        return usage("--epsilon must satisfy 0 < epsilon <= delta");
    }
    if !(args.time_budget > 0.0 && args.time_budget.is_finite()) {
        return usage("--time-budget must be positive");
    }
    if args.workers == 0 {
        return usage("--workers must be at least 1");
    }
    let src = match std::fs::read_to_string(&args.model) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.model.display());
            return ExitCode::from(EXIT_MODEL);
        }
    };
    let model = match parse_model(&src) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("{}:{e}", args.model.display());
            return ExitCode::from(EXIT_MODEL);
        }
    };
    let mut cfg = CheckConfig::new(args.k, args.m, args.delta);
    cfg.solver.epsilon = epsilon;
    cfg.solver.node_budget = args.node_budget;
    cfg.solver.time_budget = Some(Duration::from_secs_f64(args.time_budget));
    cfg.solver.workers = args.workers;
    cfg.interior_unsafe = args.interior_unsafe;
    cfg.strict_invariants = args.strict_invariants;
    let result = match check_reach(&model, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_MODEL);
        }
    };
    log::info!("finished in {:.3} s", result.elapsed.as_secs_f64());
    let name = args
        .model
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if let Some(path) = &args.trace {
        let doc = serde_json::to_string_pretty(&result.trace_document(&name)).expect("serializable");
        if let Err(e) = std::fs::write(path, doc + "\n") {
            eprintln!("error: cannot write {}: {e}", path.display());
        }
    }
    if let Some(path) = &args.trace_csv {
        if let Err(e) = std::fs::write(path, result.trace_csv()) {
            eprintln!("error: cannot write {}: {e}", path.display());
        }
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&result).expect("serializable"));
    } else {
        println!("{}", result.summary());
    }
    ExitCode::from(match result.verdict {
        Verdict::Safe => 0,
        Verdict::DeltaUnsafe => 1,
        Verdict::Inconclusive => 2,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Args::try_parse() {
        Ok(args) => run(args),
        Err(e) => {
            use clap::error::ErrorKind;
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    let _ = e.print();
                    ExitCode::from(EXIT_USAGE)
                }
            }
        }
    }
}
