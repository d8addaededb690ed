use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use knobtune::measurement::{brute_force, write_table, CostPolicy, DEFAULT_BRUTE_FORCE_CAP};
use knobtune::tuner::{self, Mode, RunSummary, TunerParams};
use knobtune::{Backend, BackendSpec, DesignSpace, Error, SyntheticLandscapeParams};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 3;
const EXIT_BACKEND: u8 = 4;
const EXIT_NO_VALID: u8 = 5;

#[derive(Parser)]
#[command(name = "knobtune", version, about = "Auto-tune discrete knob spaces against a measurement backend")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    /// Print the default tuner parameters as JSON and exit.
    #[arg(long)]
    print_defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one tuning session and write trace.csv and summary.json.
    Tune(TuneArgs),
    /// Measure every configuration and write an id,fitness table.
    BruteForce(BruteForceArgs),
    /// Write a synthetic backend spec for a space.
    Landscape(LandscapeArgs),
    /// Run several modes over several seeds and write a comparison table.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunConfig {
    /// Design-space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Backend spec JSON file.
    #[arg(long)]
    backend: PathBuf,
    /// JSON file with tuner parameter overrides (any subset of --print-defaults).
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Concurrent measurements for external backends.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    run: RunConfig,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BruteForceArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    backend: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Refuse spaces with more configurations than this.
    #[arg(long, default_value_t = DEFAULT_BRUTE_FORCE_CAP)]
    cap: u64,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct LandscapeArgs {
    #[arg(long)]
    space: PathBuf,
    /// Output backend spec path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    num_peaks: usize,
    #[arg(long, default_value_t = 4.0)]
    peak_sharpness: f64,
    #[arg(long, default_value_t = 0.02)]
    noise_amplitude: f64,
    /// Expression over knob names marking configurations as invalid when it holds.
    #[arg(long)]
    invalid_rule: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    nominal_cost: f64,
    #[arg(long, default_value_t = 2.0)]
    reset_factor: f64,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    run: RunConfig,
    /// Comma-separated modes.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1.., value_parser = parse_mode)]
    modes: Vec<Mode>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    seeds: Vec<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

struct Failure {
    code: u8,
    error: Error,
}

fn config(error: Error) -> Failure {
    Failure { code: EXIT_CONFIG, error }
}

/// Exit code for an error raised while running against the backend.
fn runtime(error: Error) -> Failure {
    let code = match error {
        Error::NoValidResult => EXIT_NO_VALID,
        Error::BackendUnavailable(_) | Error::Protocol(_) | Error::Backend(_) => EXIT_BACKEND,
        Error::Io(_) => EXIT_FAILURE,
        _ => EXIT_CONFIG,
    };
    Failure { code, error }
}

fn output(error: impl Into<Error>) -> Failure {
    Failure {
        code: EXIT_FAILURE,
        error: error.into(),
    }
}

fn parent_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn load_space(path: &Path) -> Result<DesignSpace, Failure> {
    DesignSpace::load(path).map_err(|e| {
        config(match e {
            Error::Io(io) => Error::Space(format!("cannot read {}: {io}", path.display())),
            other => other,
        })
    })
}

fn load_backend(path: &Path, space: &DesignSpace, workers: Option<usize>) -> Result<Box<dyn Backend>, Failure> {
    let spec = BackendSpec::load(path).map_err(|e| {
        config(match e {
            Error::Io(io) => Error::InvalidParams(format!("cannot read {}: {io}", path.display())),
            other => other,
        })
    })?;
    spec.build(space, parent_dir(path), workers).map_err(|e| match e {
        Error::BackendUnavailable(_) => runtime(e),
        other => config(other),
    })
}

fn load_params(run: &RunConfig) -> Result<TunerParams, Failure> {
    let mut params = match &run.params {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config(Error::InvalidParams(format!("cannot read {}: {e}", path.display()))))?;
            serde_json::from_str(&text).map_err(|e| config(e.into()))?
        }
        None => TunerParams::default(),
    };
    if let Some(b) = run.budget {
        params.total_budget = b;
    }
    if let Some(i) = run.iterations {
        params.iterations = i;
    }
    Ok(params)
}

fn tune(args: TuneArgs) -> Result<(), Failure> {
    let space = load_space(&args.run.space)?;
    let mut params = load_params(&args.run)?;
    if let Some(m) = args.mode {
        params.mode = m;
    }
    if let Some(s) = args.seed {
        params.rng_seed = s;
    }
    params.validate().map_err(config)?;
    let backend = load_backend(&args.run.backend, &space, args.run.workers)?;
    let outcome = tuner::run(&space, backend.as_ref(), &params).map_err(runtime)?;

    std::fs::create_dir_all(&args.out).map_err(output)?;
    tuner::write_trace_csv(args.out.join("trace.csv"), &outcome.trace).map_err(output)?;
    let summary = RunSummary::new(&space, params.mode, params.rng_seed, &outcome);
    tuner::write_summary(args.out.join("summary.json"), &summary).map_err(output)?;
    std::fs::write(args.out.join("params.json"), params.to_json() + "\n").map_err(output)?;
    println!(
        "best fitness {} at id {} after {} measurements ({} cost units)",
        summary.best_fitness, summary.best_config_id, summary.measurements, summary.cost_units
    );
    Ok(())
}

fn brute(args: BruteForceArgs) -> Result<(), Failure> {
    let space = load_space(&args.space)?;
    if space.size() > args.cap {
        return Err(config(Error::InvalidParams(format!(
            "space has {} configurations, above the cap of {}",
            space.size(),
            args.cap
        ))));
    }
    let backend = load_backend(&args.backend, &space, args.workers)?;
    let result = brute_force(&space, backend.as_ref(), args.cap).map_err(runtime)?;
    write_table(
        &args.out,
        result.fitness.iter().enumerate().map(|(i, &f)| (i as u64, f)),
    )
    .map_err(output)?;
    let best = space.config_at(result.argmax_id).map_err(runtime)?;
    let report = serde_json::json!({
        "argmax_id": result.argmax_id,
        "max_fitness": result.max_fitness,
        "indices": best.indices(),
        "knobs": space.knobs().iter().zip(space.values_of(&best))
            .map(|(k, v)| (k.name.clone(), serde_json::Value::from(v)))
            .collect::<serde_json::Map<_, _>>(),
    });
    println!("{report}");
    Ok(())
}

fn landscape(args: LandscapeArgs) -> Result<(), Failure> {
    let space = load_space(&args.space)?;
    let spec = BackendSpec::Synthetic {
        landscape: SyntheticLandscapeParams {
            num_peaks: args.num_peaks,
            peak_sharpness: args.peak_sharpness,
            noise_amplitude: args.noise_amplitude,
            invalid_rule: args.invalid_rule,
            seed: args.seed,
        },
        cost: CostPolicy {
            nominal_cost: args.nominal_cost,
            reset_factor: args.reset_factor,
        },
    };
    // Building checks the parameters and the rule against this space.
    spec.build(&space, parent_dir(&args.out), None).map_err(config)?;
    std::fs::write(&args.out, spec.to_json() + "\n").map_err(output)?;
    Ok(())
}

fn compare(args: CompareArgs) -> Result<(), Failure> {
    let space = load_space(&args.run.space)?;
    let params = load_params(&args.run)?;
    params.validate().map_err(config)?;
    let backend = load_backend(&args.run.backend, &space, args.run.workers)?;
    let rows = tuner::compare(&space, backend.as_ref(), &params, &args.modes, &args.seeds).map_err(runtime)?;
    tuner::write_compare_csv(&args.out, &rows).map_err(output)?;
    for r in &rows {
        println!(
            "{}: mean best {:.6}, min best {:.6}, mean measurements {:.1}, mean cost {:.1}",
            r.mode, r.mean_best_fitness, r.min_best_fitness, r.mean_measurements, r.mean_cost_units
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        _ if cli.print_defaults => {
            println!("{}", TunerParams::default().to_json());
            Ok(())
        }
        Some(Command::Tune(a)) => tune(a),
        Some(Command::BruteForce(a)) => brute(a),
        Some(Command::Landscape(a)) => landscape(a),
        Some(Command::Compare(a)) => compare(a),
        None => {
            eprintln!("error: a subcommand or --print-defaults is required (see --help)");
            return ExitCode::from(2);
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}
