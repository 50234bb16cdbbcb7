//! Thin CLI over the qdu library: experiment specs in, reports out.
//! Exit codes: 0 success, 2 invalid input, 3 failed search.

use clap::{Parser, Subcommand};
use qdu::report::{
    builtin_spec, cmd_baselines, cmd_check_seut, cmd_demo, cmd_fit_choice, cmd_fit_state,
    cmd_interference, render, BaselineModel, ExperimentSpec, Format, InterferenceParams, Report,
    ReportError,
};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "qdu", version, about = "Quantum decision models for ambiguity experiments")]
struct Cli {
    /// Output encoding; values are identical across formats.
    #[arg(long, global = true, default_value = "json")]
    format: String,

    /// Master seed for all randomized searches.
    #[arg(long, global = true, env = "QDU_SEED", default_value_t = 0)]
    seed: u64,

    /// Residual tolerance for fitting commands.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// End-to-end run of one built-in experiment.
    Demo {
        /// "ellsberg" or "machina".
        target: String,
    },
    /// Classical SEUT feasibility of a preference pattern.
    CheckSeut {
        /// Spec path, or "ellsberg"/"machina" for the built-ins.
        spec: String,
        /// Pattern like "f1>f2,f4>f3".
        #[arg(long)]
        pattern: String,
        /// Grid points per free prior coordinate.
        #[arg(long, default_value_t = 100)]
        grid: usize,
    },
    /// Expected-utility table of one classical baseline model.
    Baselines {
        spec: String,
        /// seut, maxmin, choquet, variational or second-order.
        #[arg(long)]
        model: String,
    },
    /// Search for a quantum state and model reproducing a pattern.
    FitState {
        spec: String,
        /// contextual, rotated or canonical.
        #[arg(long, default_value = "rotated")]
        mechanism: String,
        #[arg(long, default_value = "f1>f2,f4>f3")]
        pattern: String,
    },
    /// Fit commuting choice observables to the observed joint counts.
    FitChoice { spec: String },
    /// Superposition statistics of two states against their mixture.
    Interference {
        spec: String,
        /// First state: ambiguous weight of the second color.
        #[arg(long, default_value_t = 0.5)]
        weight1: f64,
        #[arg(long, default_value_t = 0.0)]
        phase1_y: f64,
        #[arg(long, default_value_t = 0.0)]
        phase1_b: f64,
        /// Second state: ambiguous weight of the second color.
        #[arg(long, default_value_t = 0.1)]
        weight2: f64,
        #[arg(long, default_value_t = 0.0)]
        phase2_y: f64,
        #[arg(long, default_value_t = 0.0)]
        phase2_b: f64,
        /// Superposition weights (normalized internally).
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 0.0)]
        rel_phase: f64,
    },
}

fn load_spec(arg: &str) -> Result<ExperimentSpec, ReportError> {
    if let Some(spec) = builtin_spec(arg) {
        return Ok(spec);
    }
    let text = std::fs::read_to_string(arg)
        .map_err(|e| ReportError::InvalidInput(format!("cannot read '{arg}': {e}")))?;
    ExperimentSpec::parse(&text)
}

fn run(cli: &Cli) -> Result<Report, ReportError> {
    match &cli.command {
        Cmd::Demo { target } => cmd_demo(target, cli.seed),
        Cmd::CheckSeut {
            spec,
            pattern,
            grid,
        } => cmd_check_seut(&load_spec(spec)?, pattern, *grid),
        Cmd::Baselines { spec, model } => {
            let model: BaselineModel = model.parse()?;
            cmd_baselines(&load_spec(spec)?, model)
        }
        Cmd::FitState {
            spec,
            mechanism,
            pattern,
        } => cmd_fit_state(&load_spec(spec)?, mechanism, pattern, cli.seed),
        Cmd::FitChoice { spec } => cmd_fit_choice(&load_spec(spec)?, cli.seed, cli.tol),
        Cmd::Interference {
            spec,
            weight1,
            phase1_y,
            phase1_b,
            weight2,
            phase2_y,
            phase2_b,
            a,
            b,
            rel_phase,
        } => cmd_interference(
            &load_spec(spec)?,
            &InterferenceParams {
                weight1: *weight1,
                phases1: (*phase1_y, *phase1_b),
                weight2: *weight2,
                phases2: (*phase2_y, *phase2_b),
                a: *a,
                b: *b,
                rel_phase: *rel_phase,
            },
        ),
    }
}

fn main() {
    let cli = Cli::parse();
    let format: Format = match cli.format.parse() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    match run(&cli) {
        Ok(report) => {
            let text = render(&report, format);
            match &cli.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, &text) {
                        eprintln!("cannot write '{}': {e}", path.display());
                        std::process::exit(2);
                    }
                }
                None => print!("{text}"),
            }
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
