use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dumpopt_core::eval::{
    bench_instance, expected_regret, monte_carlo_regret, run_mission, BenchInstance, MissionRunConfig, MAX_ENUMERATION,
};
use dumpopt_core::io::{
    emit_events_csv, emit_metrics, emit_schedule, emit_telemetry_csv, emit_trace_csv, generate_dataset, load_mission,
    parse_trace_csv, trace_rows, CorruptionModel, GeneratorConfig, MetricsRecord, MissionConfig, CALIBRATED_SEED,
    CONFIG_FILE, EVENTS_FILE, TELEMETRY_FILE,
};
use dumpopt_core::{OffsetGrid, TieBreakerKind};
use num_traits::ToPrimitive;

const SCHEDULE_FILE: &str = "schedule.csv";
const TRACE_FILE: &str = "trace.csv";
const METRICS_FILE: &str = "metrics.toml";

#[derive(Parser)]
#[command(name = "dumpopt", version, about = "Follow-The-Leader memory-dump offset selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic mission (events, telemetry, config).
    Generate(GenerateArgs),
    /// Replay a mission with one learner per relative orbit.
    Replay(ReplayArgs),
    /// Seeded Bernoulli experiments with regret and mistake-bound checks.
    Bench(BenchArgs),
    /// Emit the offset trace of a single relative orbit.
    Trace(TraceArgs),
}

/// Offset grid, baseline and dump length, in whole seconds.
#[derive(Args, Clone)]
struct MissionArgs {
    #[arg(long, default_value_t = 0)]
    aos_min: i64,
    #[arg(long, default_value_t = 120)]
    aos_max: i64,
    #[arg(long, default_value_t = 1)]
    aos_step: i64,
    #[arg(long, default_value_t = 0)]
    los_min: i64,
    #[arg(long, default_value_t = 60)]
    los_max: i64,
    #[arg(long, default_value_t = 1)]
    los_step: i64,
    #[arg(long, default_value_t = 30)]
    baseline_aos: i64,
    #[arg(long, default_value_t = 10)]
    baseline_los: i64,
    #[arg(long, default_value_t = 840)]
    dump_duration: i64,
    /// uniform, stay or safe-margin.
    #[arg(long, default_value = "safe-margin")]
    tie_breaker: String,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = CALIBRATED_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    cycles: u32,
    #[arg(long, default_value_t = 127)]
    orbits: u32,
    #[arg(long, default_value_t = 6)]
    first_cycle: u32,
    /// Multiplier on the corruption probabilities; 0 disables corruption.
    #[arg(long, default_value_t = 1.0)]
    corruption: f64,
    /// Probability that a pass has no recorded telemetry.
    #[arg(long, default_value_t = 0.0)]
    unrecorded: f64,
    #[arg(long, default_value = "S6-SYNTH")]
    mission_id: String,
    #[command(flatten)]
    mission: MissionArgs,
}

#[derive(Args)]
struct InputArgs {
    /// Directory holding mission.toml, events.csv and telemetry.csv.
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    #[arg(long, conflicts_with = "dataset_dir")]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "dataset_dir")]
    events: Option<PathBuf>,
    #[arg(long, conflicts_with = "dataset_dir")]
    telemetry: Option<PathBuf>,
    /// Overrides the config's tie-breaker.
    #[arg(long)]
    tie_breaker: Option<String>,
    /// Overrides the config's seed (uniform tie-breaking only).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the per-orbit learners.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random instances to draw (ignored with --probs).
    #[arg(long, default_value_t = 10)]
    instances: usize,
    /// Largest grid side for random instances.
    #[arg(long, default_value_t = 5)]
    max_side: usize,
    #[arg(long, default_value_t = 1000)]
    runs: u64,
    #[arg(long, default_value_t = 500)]
    horizon: u64,
    /// Explicit success probabilities: rows (AOS) separated by ';', entries (LOS) by ','.
    #[arg(long)]
    probs: Option<String>,
    /// Monte Carlo runs for the cross-check against exact expected regret.
    #[arg(long, default_value_t = 200_000)]
    mc_runs: u64,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    ron: u32,
    /// Filter an existing trace file instead of replaying.
    #[arg(long, conflicts_with_all = ["dataset_dir", "config", "events", "telemetry"])]
    trace: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    /// Invalid flag values.
    Usage(String),
    /// Unreadable or malformed input.
    Input(String),
    /// Bench found a bound or cross-check violation.
    Violation(String),
    Output(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Output(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Violation(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Violation(m) | CliError::Output(m) => f.write_str(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Replay(args) => cmd_replay(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Trace(args) => cmd_trace(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn write_files(dir: &Path, files: &[(&str, String)]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn mission_config(args: &GenerateArgs) -> Result<MissionConfig, CliError> {
    let m = &args.mission;
    let config = MissionConfig {
        mission_id: args.mission_id.clone(),
        orbits_per_cycle: args.orbits,
        first_cycle: args.first_cycle,
        cycles: args.cycles,
        seed: args.seed,
        aos_min_ms: m.aos_min * 1000,
        aos_max_ms: m.aos_max * 1000,
        aos_step_ms: m.aos_step * 1000,
        los_min_ms: m.los_min * 1000,
        los_max_ms: m.los_max * 1000,
        los_step_ms: m.los_step * 1000,
        baseline_aos_ms: m.baseline_aos * 1000,
        baseline_los_ms: m.baseline_los * 1000,
        dump_duration_ms: m.dump_duration * 1000,
        tie_breaker: m.tie_breaker.clone(),
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let config = mission_config(args)?;
    if args.corruption.is_nan() || args.corruption < 0.0 {
        return Err(CliError::Usage("--corruption must be >= 0".into()));
    }
    let generator = GeneratorConfig {
        mission_id: args.mission_id.clone(),
        seed: args.seed,
        first_cycle: args.first_cycle,
        cycles: args.cycles,
        orbits_per_cycle: args.orbits,
        corruption: CorruptionModel::default().scaled(args.corruption),
        unrecorded_prob: args.unrecorded,
        baseline: config.baseline().expect("validated"),
        dump_duration: config.dump_duration(),
        ..GeneratorConfig::default()
    };
    let dataset = generate_dataset(&generator).map_err(|e| CliError::Usage(e.to_string()))?;
    write_files(
        &args.out_dir,
        &[
            (EVENTS_FILE, emit_events_csv(&dataset.events())),
            (TELEMETRY_FILE, emit_telemetry_csv(&dataset.telemetry())),
            (CONFIG_FILE, config.emit()),
        ],
    )?;
    println!("mission {}: seed {}", dataset.mission_id(), args.seed);
    println!("passes: {}", dataset.len());
    println!("recorded: {}", dataset.recorded());
    println!("baseline failures: {}", dataset.baseline_failures());
    Ok(())
}

/// Loads the dataset and resolves the run configuration.
fn load(input: &InputArgs) -> Result<(MissionConfig, dumpopt_core::io::MissionDataset, MissionRunConfig), CliError> {
    let (config_path, events_path, telemetry_path) =
        match (&input.dataset_dir, &input.config, &input.events, &input.telemetry) {
            (Some(dir), ..) => (dir.join(CONFIG_FILE), dir.join(EVENTS_FILE), dir.join(TELEMETRY_FILE)),
            (None, Some(c), Some(e), Some(t)) => (c.clone(), e.clone(), t.clone()),
            _ => {
                return Err(CliError::Usage("give --dataset-dir, or all of --config, --events and --telemetry".into()))
            }
        };
    let (config, dataset) =
        load_mission(&config_path, &events_path, &telemetry_path).map_err(|e| CliError::Input(e.to_string()))?;
    let tie_breaker: TieBreakerKind = match &input.tie_breaker {
        Some(name) => name.parse().map_err(|e: dumpopt_core::learner::LearnerError| CliError::Usage(e.to_string()))?,
        None => config.tie_breaker().expect("validated"),
    };
    if input.jobs == 0 {
        return Err(CliError::Usage("--jobs must be >= 1".into()));
    }
    let run = MissionRunConfig {
        grid: config.grid().expect("validated"),
        tie_breaker,
        dump_duration: config.dump_duration(),
        initial_action: config.baseline().expect("validated"),
        seed: input.seed.unwrap_or(config.seed),
        jobs: input.jobs,
    };
    Ok((config, dataset, run))
}

fn cmd_replay(args: &ReplayArgs) -> Result<(), CliError> {
    let (_, dataset, run_config) = load(&args.input)?;
    let out = run_mission(&dataset, &run_config).map_err(|e| CliError::Usage(e.to_string()))?;
    for e in &out.schedule_errors {
        eprintln!("warning: {e}");
    }
    let rows: Vec<_> = out.runs.iter().flat_map(trace_rows).collect();
    let metrics = MetricsRecord {
        mission_id: Some(dataset.mission_id().to_string()),
        tie_breaker: Some(run_config.tie_breaker.to_string()),
        saved: Some(out.report.clone()),
        regret: None,
    };
    write_files(
        &args.out_dir,
        &[
            (SCHEDULE_FILE, emit_schedule(&out.schedule)),
            (TRACE_FILE, emit_trace_csv(&rows)),
            (METRICS_FILE, emit_metrics(&metrics)),
        ],
    )?;
    let r = &out.report;
    println!("passes: {} ({} recorded)", r.total_passes, r.recorded_passes);
    println!("baseline failures: {}", r.baseline_failures);
    println!("learner failures: {} ({} after the first step)", r.learner_failures, r.learner_failures_after_init);
    match r.saved_fraction_f64() {
        Some(f) => println!("saved: {} ({f:.4})", r.saved),
        None => println!("saved: {}", r.saved),
    }
    Ok(())
}

fn parse_probs(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    text.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("--probs: bad number {v:?}"))))
                .collect()
        })
        .collect()
}

fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    if args.runs == 0 || args.horizon == 0 {
        return Err(CliError::Usage("--runs and --horizon must be >= 1".into()));
    }
    let instances = match &args.probs {
        Some(text) => {
            let probs = parse_probs(text)?;
            let n_aos = probs.len() as i64;
            let n_los = probs.first().map_or(0, Vec::len) as i64;
            let grid = OffsetGrid::from_secs(&(0..n_aos).collect::<Vec<_>>(), &(0..n_los).collect::<Vec<_>>())
                .map_err(|e| CliError::Usage(format!("--probs: {e}")))?;
            let inst = BenchInstance { grid, probs };
            dumpopt_core::BernoulliEnvironment::new(inst.grid.clone(), &inst.probs, 0)
                .map_err(|e| CliError::Usage(format!("--probs: {e}")))?;
            vec![inst]
        }
        None => {
            if args.max_side == 0 {
                return Err(CliError::Usage("--max-side must be >= 1".into()));
            }
            BenchInstance::generate(args.seed, args.instances, args.max_side)
        }
    };

    let mut report = String::from("instance,n_aos,n_los,horizon,runs,mistake_bound,max_mistakes,violations,mean_empirical_regret,exact_expected_regret,mc_expected_regret,mc_std_error\n");
    let mut problems = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        let seed = args.seed.wrapping_add(k as u64);
        let r = bench_instance(inst, args.horizon, args.runs, seed);
        if r.violations > 0 {
            problems.push(format!("instance {k}: {} runs exceed the mistake bound", r.violations));
        }
        let (mut exact_text, mut mc_text, mut se_text) = (String::new(), String::new(), String::new());
        let env = inst.environment(seed);
        if inst.grid.len() as u64 * args.horizon <= MAX_ENUMERATION as u64 {
            let exact = expected_regret(&env, args.horizon).map_err(|e| CliError::Usage(e.to_string()))?;
            let exact_f = exact.to_f64().unwrap_or(f64::NAN);
            let est = monte_carlo_regret(&env, args.horizon, args.mc_runs, seed);
            if !est.within(exact_f, 3.0) {
                problems.push(format!(
                    "instance {k}: exact {exact_f:.6} vs Monte Carlo {:.6} ± {:.6}",
                    est.mean, est.std_error
                ));
            }
            exact_text = exact.to_string();
            mc_text = format!("{:.6}", est.mean);
            se_text = format!("{:.6}", est.std_error);
        }
        report.push_str(&format!(
            "{k},{},{},{},{},{},{},{},{:.4},{exact_text},{mc_text},{se_text}\n",
            inst.grid.n_aos(),
            inst.grid.n_los(),
            r.horizon,
            r.runs,
            r.mistake_bound.map_or(String::new(), |b| b.to_string()),
            r.max_mistakes,
            r.violations,
            r.mean_empirical_regret,
        ));
    }
    print!("{report}");
    if let Some(path) = &args.out {
        fs::write(path, &report).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(problems.join("; ")))
    }
}

fn cmd_trace(args: &TraceArgs) -> Result<(), CliError> {
    let rows = match &args.trace {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            parse_trace_csv(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => {
            let (_, dataset, run_config) = load(&args.input)?;
            let out = run_mission(&dataset, &run_config).map_err(|e| CliError::Usage(e.to_string()))?;
            out.runs.iter().flat_map(trace_rows).collect()
        }
    };
    let rows: Vec<_> = rows.into_iter().filter(|r| r.relative_orbit == args.ron).collect();
    if rows.is_empty() {
        return Err(CliError::Input(format!("no rows for relative orbit {}", args.ron)));
    }
    let text = emit_trace_csv(&rows);
    match &args.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
