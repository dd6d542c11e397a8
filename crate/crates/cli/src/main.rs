use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use repairflow::commands::{default_run_id, run, Command};
use repairflow::config::{check_run_id, load_config, LoadedConfig};
use repairflow::error::Result;
use repairflow::sweep::{default_sweep_id, parse_range, sweep, write_sweep, Range};

/// Simulate and steer the three-state repairable system.
#[derive(Debug, Parser)]
#[command(name = "repairflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Overrides `output.out_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides `output.run_id`.
    #[arg(long)]
    run_id: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Steady state, marginals and availability.
    Steady(RunArgs),
    /// Open-loop trajectory and decay fit.
    Simulate(RunArgs),
    /// Scan of the characteristic function.
    Spectrum(RunArgs),
    /// Static repair rates for a target, with a verification run.
    DesignStatic(RunArgs),
    /// Staged feedback control towards a target.
    Control(RunArgs),
    /// Runs a subcommand over the cross product of parameter ranges.
    Sweep {
        #[arg(value_enum)]
        kind: Command,
        #[command(flatten)]
        run: RunArgs,
        /// `key=v1,v2,...` over a numeric config key; repeatable.
        #[arg(long = "range", value_name = "KEY=VALUES")]
        ranges: Vec<String>,
    },
}

fn target_dir(args: &RunArgs, cfg: &LoadedConfig, default_id: String) -> Result<(PathBuf, String)> {
    let out_dir = match &args.out_dir {
        Some(d) => d.clone(),
        None => resolve(&cfg.base_dir, &cfg.config.output.out_dir),
    };
    let run_id = args
        .run_id
        .clone()
        .or_else(|| cfg.config.output.run_id.clone())
        .unwrap_or(default_id);
    check_run_id(&run_id)?;
    Ok((out_dir, run_id))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn dispatch(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Sweep {
            kind,
            run: args,
            ranges,
        } => {
            let cfg = load_config(&args.config)?;
            let ranges: Vec<Range> = ranges
                .iter()
                .map(|r| parse_range(r))
                .collect::<std::result::Result<_, _>>()?;
            let (out_dir, run_id) = target_dir(&args, &cfg, default_sweep_id(&args.config, kind))?;
            let result = sweep(kind, &cfg, ranges)?;
            let dir = write_sweep(&result, &cfg, &out_dir, &run_id)?;
            println!(
                "sweep {}: {} runs, {} with nonzero exit -> {}",
                kind.name(),
                result.table.rows.len(),
                result.failures,
                dir.display()
            );
            Ok(0)
        }
        other => {
            let (command, args) = match other {
                Cmd::Steady(a) => (Command::Steady, a),
                Cmd::Simulate(a) => (Command::Simulate, a),
                Cmd::Spectrum(a) => (Command::Spectrum, a),
                Cmd::DesignStatic(a) => (Command::DesignStatic, a),
                Cmd::Control(a) => (Command::Control, a),
                Cmd::Sweep { .. } => unreachable!(),
            };
            let cfg = load_config(&args.config)?;
            let (out_dir, run_id) =
                target_dir(&args, &cfg, default_run_id(&args.config, command.name()))?;
            let (outcome, dir) = run(command, &cfg, &out_dir, &run_id)?;
            println!(
                "{}: {} -> {}",
                command.name(),
                outcome.status,
                dir.display()
            );
            Ok(outcome.exit_code)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
