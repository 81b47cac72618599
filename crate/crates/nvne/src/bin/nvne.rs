use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nvne::scenario::{
    check_config, emit_outputs, exit_code, preset, preset_names, resolve_output_dir, run_scenario, RunReport,
    ScenarioConfig,
};
use nvne::{NvneError, Result};

#[derive(Parser)]
#[command(name = "nvne", version, about = "Nonlinear von Neumann dynamics scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its outputs. `preset:<name>` selects a built-in config.
    Run {
        config: String,
        /// Output directory (beats NVNE_OUT and the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Validate a config without running it.
    Check { config: String },
    /// List the built-in configs.
    Presets {
        /// Print the JSON of one preset instead.
        name: Option<String>,
    },
}

fn load(source: &str) -> Result<ScenarioConfig> {
    if let Some(name) = source.strip_prefix("preset:") {
        return preset(name);
    }
    let text = fs::read_to_string(source).map_err(|e| NvneError::Io(format!("{source}: {e}")))?;
    ScenarioConfig::from_json(&text)
}

fn print_report(report: &RunReport, written: &[PathBuf]) {
    println!("scenario {} ({:?})", report.scenario_id, report.kind);
    for c in &report.checks {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        let op = match c.comparison {
            nvne::scenario::Comparison::Below => "<",
            nvne::scenario::Comparison::Above => ">",
        };
        println!("  {mark} {:<32} {:>12.4e} {op} {:.1e}", c.name, c.value, c.threshold);
    }
    for (k, v) in &report.headline {
        println!("  {k:<37} {v:>12.6e}");
    }
    for n in &report.notes {
        println!("  note: {n}");
    }
    for p in written {
        println!("  wrote {}", p.display());
    }
    println!(
        "  {} in {:.2} s",
        if report.passed { "passed" } else { "FAILED" },
        report.wall_clock_seconds
    );
}

fn run(config: &str, out: Option<&Path>, quiet: bool) -> Result<RunReport> {
    let cfg = load(config)?;
    let result = run_scenario(&cfg)?;
    let env = std::env::var_os("NVNE_OUT").map(PathBuf::from);
    let dir = resolve_output_dir(out, env.as_deref(), &cfg);
    let written = emit_outputs(&result, &cfg, &dir)?;
    if !quiet {
        print_report(&result.report, &written);
    }
    Ok(result.report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out, quiet } => run(&config, out.as_deref(), quiet),
        Command::Check { config } => load(&config).and_then(|cfg| {
            check_config(&cfg)?;
            println!("{}: ok", cfg.id);
            Ok(RunReport::empty(&cfg))
        }),
        Command::Presets { name: None } => {
            for name in preset_names() {
                println!("{name}");
            }
            return ExitCode::SUCCESS;
        }
        Command::Presets { name: Some(name) } => match preset(&name) {
            Ok(cfg) => {
                println!("{}", cfg.to_json());
                return ExitCode::SUCCESS;
            }
            Err(e) => Err(e),
        },
    };
    if let Err(e) = &outcome {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&outcome) as u8)
}
