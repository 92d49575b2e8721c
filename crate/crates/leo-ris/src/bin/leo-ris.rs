use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use leo_ris::ao::Mode;
use leo_ris::harness::{
    emit_csv, load_scenario, mc_check, read_manifest, run_experiment, write_manifest, HarnessError, PointStatus,
    ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "leo-ris", version, about = "LEO multi-satellite downlink with a UAV-mounted surface")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset sweep (or a single frame of the config) and write CSV + manifest.
    Run(RunArgs),
    /// Load and check a config file.
    Validate(ConfigArgs),
    /// Compare closed-form and Monte-Carlo rates on slot 0 of the config.
    McCheck(ConfigArgs),
    /// Re-emit the CSV of a saved manifest.
    Report {
        /// Directory holding manifest.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Start from the full-size reference scenario instead of desk scale.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    base: ConfigArgs,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Concurrent sweep points; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn load(args: &ConfigArgs) -> Result<ScenarioConfig, HarnessError> {
    let base = if args.paper_scale { ScenarioConfig::reference() } else { ScenarioConfig::desk() };
    let mut cfg = match &args.config {
        Some(path) => load_scenario(path, base)?,
        None => base,
    };
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<ExitCode, HarnessError> {
    let mut cfg = load(&args.base)?;
    if let Some(m) = &args.mode {
        cfg.run.mode = Mode::parse(m).ok_or_else(|| HarnessError::Validation {
            field: "--mode".into(),
            message: format!("unknown mode {m:?}"),
        })?;
    }
    cfg.validate()?;
    let preset = args.preset.as_deref().unwrap_or("single");
    let report = run_experiment(preset, &cfg, args.jobs)?;
    let csv = emit_csv(&report, &args.out)?;
    let manifest = write_manifest(&report, &args.out)?;
    let mut clean = true;
    for p in &report.points {
        let mean = p.rows.iter().find(|r| r.metric == "mean_min_rate").map(|r| r.value);
        match mean {
            Some(m) => println!("{:<32} {:?} mean min rate {m:.4} ({:.1} s)", p.key, p.status, p.wall_seconds),
            None => println!("{:<32} {:?}", p.key, p.status),
        }
        if let Some(msg) = &p.message {
            eprintln!("  {msg}");
        }
        clean &= p.status == PointStatus::Ok;
    }
    println!("wrote {} and {}", csv.display(), manifest.display());
    Ok(if clean { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate(args) => load(&args).map(|cfg| {
            println!("ok: {} ({:?}, hash {})", cfg.scenario.id, cfg.scenario.kind, cfg.hash());
            ExitCode::SUCCESS
        }),
        Command::McCheck(args) => load(&args).and_then(|cfg| mc_check(&cfg)).map(|rows| {
            println!("{:>3} {:>10} {:>10} {:>10} {:>8}", "ue", "approx", "mc", "tol", "pass");
            for r in &rows {
                println!("{:>3} {:>10.5} {:>10.5} {:>10.5} {:>8}", r.ue, r.approx, r.mc_mean, r.tolerance, r.pass);
            }
            if rows.iter().all(|r| r.pass) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }),
        Command::Report { out } => read_manifest(&out.join("manifest.json")).and_then(|report| {
            let path = emit_csv(&report, &out)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code() as u8)
    })
}
