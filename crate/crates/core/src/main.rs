use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ftbiped::checkpoint;
use ftbiped::config::Config;
use ftbiped::error::{CheckpointError, ConfigError};
use ftbiped::eval::{run_scenarios, select_scenarios, EvalReport};
use ftbiped::gait::write_reference_csv;
use ftbiped::trainer::{build_reference, Trainer, TrainerState};

/// Fault-tolerant planar-biped locomotion: training, evaluation, ablations.
#[derive(Parser)]
#[command(name = "ftbiped", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write metrics plus checkpoints to a run directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint over the fault-scenario grid.
    Eval(EvalArgs),
    /// Train and evaluate ablation variants with shared seeds.
    Ablate(AblateArgs),
    /// Pretty-print a checkpoint header; optionally export gait references.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding run.seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; defaults to $FTBIPED_OUT, then ./runs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-key config override, repeatable: --set ppo.envs=8
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// 10-iteration single-environment smoke run.
    #[arg(long)]
    dry_run: bool,
    /// Resume from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Suppress per-iteration progress lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Scenario subset by name, repeatable; default runs the full grid.
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
    /// Skip per-step JSONL/SVG traces.
    #[arg(long)]
    no_traces: bool,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Variants to run, repeatable. Valid: full, no_status_obs,
    /// no_fallibility, no_phase_modulation, no_curriculum.
    #[arg(long = "variant")]
    variants: Vec<String>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct InspectArgs {
    /// Checkpoint to describe.
    checkpoint: Option<PathBuf>,
    /// Export reference gait curves to CSV (requires --config).
    #[arg(long)]
    gait_csv: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

const USAGE_EXIT: u8 = 2;
const RUNTIME_EXIT: u8 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Inspect(args) => cmd_inspect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CmdError {
    code: u8,
    message: String,
}

impl CmdError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: USAGE_EXIT,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: RUNTIME_EXIT,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::usage(e.to_string())
    }
}

impl From<CheckpointError> for CmdError {
    fn from(e: CheckpointError) -> Self {
        CmdError::runtime(e.to_string())
    }
}

fn load_config(common: &CommonArgs, extra: &[String]) -> Result<Config, CmdError> {
    let mut overrides = common.set.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    overrides.extend_from_slice(extra);
    Ok(Config::load_with_overrides(&common.config, &overrides)?)
}

fn out_root(common: &CommonArgs, config: &Config) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os("FTBIPED_OUT").map(PathBuf::from))
        .or_else(|| config.run.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn prepare_run_dir(root: &Path, name: &str, config: &Config) -> Result<PathBuf, CmdError> {
    let run_dir = root.join(name);
    std::fs::create_dir_all(&run_dir)
        .map_err(|e| CmdError::runtime(format!("cannot create {}: {e}", run_dir.display())))?;
    let snapshot = run_dir.join("config.toml");
    std::fs::write(&snapshot, config.to_toml())
        .map_err(|e| CmdError::runtime(format!("cannot write {}: {e}", snapshot.display())))?;
    Ok(run_dir)
}

fn cmd_train(args: TrainArgs) -> Result<(), CmdError> {
    let extra: Vec<String> = if args.dry_run {
        vec!["ppo.envs=1".into(), "ppo.iterations=10".into()]
    } else {
        vec![]
    };
    let config = load_config(&args.common, &extra)?;
    let root = out_root(&args.common, &config);
    let run_dir = prepare_run_dir(&root, &config.run.name, &config)?;

    let mut trainer = match &args.resume {
        Some(path) => Trainer::load_checkpoint(config, path)?,
        None => Trainer::new(config),
    };
    trainer
        .run(&run_dir, args.quiet)
        .map_err(|e| CmdError::runtime(e.to_string()))?;
    println!("{}", run_dir.display());
    Ok(())
}

fn load_policy(path: &Path) -> Result<TrainerState, CmdError> {
    let (_, state): (checkpoint::CheckpointHeader, TrainerState) = checkpoint::load(path)?;
    Ok(state)
}

fn cmd_eval(args: EvalArgs) -> Result<(), CmdError> {
    let config = load_config(&args.common, &[])?;
    let state = load_policy(&args.checkpoint)?;
    let scenarios = select_scenarios(&config, config.run.seed, &args.scenarios)
        .map_err(|e| CmdError::usage(e.to_string()))?;
    let root = out_root(&args.common, &config);
    let eval_dir = prepare_run_dir(&root, &format!("{}_eval", config.run.name), &config)?;

    let reference = build_reference(&config);
    let traces_dir = eval_dir.join("traces");
    let report = run_scenarios(
        &config,
        &reference,
        &state.nets,
        &state.estimator,
        &scenarios,
        if args.no_traces { None } else { Some(&traces_dir) },
    )
    .map_err(|e| CmdError::runtime(e.to_string()))?;
    report
        .write(&eval_dir)
        .map_err(|e| CmdError::runtime(e.to_string()))?;
    print!("{}", report.summary_csv());
    println!("average_success joint_locking = {}", report.average_success("joint_locking"));
    println!("average_success power_loss = {}", report.average_success("power_loss"));
    println!("{}", eval_dir.display());
    Ok(())
}

const VARIANTS: [&str; 5] = [
    "full",
    "no_status_obs",
    "no_fallibility",
    "no_phase_modulation",
    "no_curriculum",
];

fn variant_overrides(variant: &str) -> Result<Vec<String>, CmdError> {
    match variant {
        "full" => Ok(vec![]),
        "no_status_obs" => Ok(vec!["ablation.status_obs=false".into()]),
        "no_fallibility" => Ok(vec!["ablation.fallibility=false".into()]),
        "no_phase_modulation" => Ok(vec!["ablation.phase_modulation=false".into()]),
        "no_curriculum" => Ok(vec!["ablation.curriculum=false".into()]),
        other => Err(CmdError::usage(format!(
            "unknown variant `{other}`, valid: {}",
            VARIANTS.join(", ")
        ))),
    }
}

fn cmd_ablate(args: AblateArgs) -> Result<(), CmdError> {
    let variants: Vec<String> = if args.variants.is_empty() {
        vec!["full".into()]
    } else {
        args.variants.clone()
    };
    // Validate all names before any training starts.
    for v in &variants {
        variant_overrides(v)?;
    }
    let base_config = load_config(&args.common, &[])?;
    let root = out_root(&args.common, &base_config);
    let base_name = base_config.run.name.clone();

    let mut rows = Vec::new();
    for variant in &variants {
        let mut extra = variant_overrides(variant)?;
        extra.push(format!("run.name=\"{base_name}_{variant}\""));
        let config = load_config(&args.common, &extra)?;
        let run_dir = prepare_run_dir(&root, &config.run.name, &config)?;
        eprintln!("[ablate] training variant `{variant}`");
        let mut trainer = Trainer::new(config.clone());
        trainer
            .run(&run_dir, args.quiet)
            .map_err(|e| CmdError::runtime(e.to_string()))?;

        let scenarios = select_scenarios(&config, config.run.seed, &[])
            .map_err(|e| CmdError::runtime(e.to_string()))?;
        let reference = build_reference(&config);
        let report = run_scenarios(
            &config,
            &reference,
            &trainer.state.nets,
            &trainer.state.estimator,
            &scenarios,
            None,
        )
        .map_err(|e| CmdError::runtime(e.to_string()))?;
        report
            .write(&run_dir.join("eval"))
            .map_err(|e| CmdError::runtime(e.to_string()))?;
        rows.push((variant.clone(), summarize_fault_tracking(&report)));
    }

    let mut csv = String::from("variant,rmse_lin,mbe_lin,rmse_ang,mbe_ang,avg_success_lock,avg_success_power\n");
    for (variant, s) in &rows {
        csv.push_str(&format!(
            "{variant},{},{},{},{},{},{}\n",
            s.rmse_lin, s.mbe_lin, s.rmse_ang, s.mbe_ang, s.lock_success, s.power_success
        ));
    }
    let path = root.join(format!("{base_name}_ablation.csv"));
    std::fs::write(&path, &csv)
        .map_err(|e| CmdError::runtime(format!("cannot write {}: {e}", path.display())))?;
    print!("{csv}");
    println!("{}", path.display());
    Ok(())
}

struct FaultTracking {
    rmse_lin: f64,
    mbe_lin: f64,
    rmse_ang: f64,
    mbe_ang: f64,
    lock_success: f64,
    power_success: f64,
}

/// Velocity-tracking metrics averaged over every fault scenario.
fn summarize_fault_tracking(report: &EvalReport) -> FaultTracking {
    let fault_rows: Vec<_> = report
        .results
        .iter()
        .filter(|r| r.fault_type != "healthy")
        .collect();
    let n = fault_rows.len().max(1) as f64;
    FaultTracking {
        rmse_lin: fault_rows.iter().map(|r| r.lin_x.rmse).sum::<f64>() / n,
        mbe_lin: fault_rows.iter().map(|r| r.lin_x.mbe).sum::<f64>() / n,
        rmse_ang: fault_rows.iter().map(|r| r.ang.rmse).sum::<f64>() / n,
        mbe_ang: fault_rows.iter().map(|r| r.ang.mbe).sum::<f64>() / n,
        lock_success: report.average_success("joint_locking"),
        power_success: report.average_success("power_loss"),
    }
}

fn cmd_inspect(args: InspectArgs) -> Result<(), CmdError> {
    let mut did_something = false;
    if let Some(path) = &args.checkpoint {
        let header = checkpoint::read_header(path)?;
        println!("checkpoint      {}", path.display());
        println!("format version  {}", checkpoint::VERSION);
        println!("iteration       {}", header.iteration);
        println!("stage           {:?}", header.stage);
        println!("actor sizes     {:?}", header.actor_sizes);
        println!("critic sizes    {:?}", header.critic_sizes);
        println!(
            "estimator       {} -> {} -> {}",
            header.estimator_input, header.estimator_hidden, header.estimator_output
        );
        println!("sigma           {:?}", header.sigma);
        did_something = true;
    }
    if let Some(csv_path) = &args.gait_csv {
        let config_path = args.config.as_ref().ok_or_else(|| {
            CmdError::usage("--gait-csv requires --config to build the reference")
        })?;
        let config = Config::load(config_path)?;
        let reference = build_reference(&config);
        write_reference_csv(csv_path, &reference, 500)
            .map_err(|e| CmdError::runtime(format!("cannot write {}: {e}", csv_path.display())))?;
        println!("wrote {}", csv_path.display());
        did_something = true;
    }
    if !did_something {
        return Err(CmdError::usage(
            "nothing to do: pass a checkpoint path and/or --gait-csv",
        ));
    }
    Ok(())
}
