//! `dirac`: derive constrained Hamiltonian systems from Lagrangian system
//! files, evaluate brackets, integrate the flows and run the check suite.

mod report;

use std::f64::consts::TAU;
use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dirac_core::flow::{initial_state, monitor_report, write_csv, FlowSetup, DEFAULT_STEP};
use dirac_core::verify::{self, VerifyOptions};
use dirac_core::{parse_expr, parse_system_file, render_expr, ConstrainedSystem, PhaseState, SystemDefinition};
use serde::Serialize;

use report::{BracketReport, DeriveReport, IntegrateReport, VerifyReport};

#[derive(Parser)]
#[command(
    name = "dirac",
    version,
    about = "Constrained Hamiltonian analysis of polynomial Lagrangians"
)]
struct Cli {
    /// Print the report as a single JSON document.
    #[arg(long, global = true)]
    json: bool,
    /// Print nothing on success; rely on the exit code.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and print the derivation.
    Derive { path: PathBuf },
    /// Poisson bracket of two expressions in the system's variables.
    Bracket {
        path: PathBuf,
        #[arg(allow_hyphen_values = true)]
        left: String,
        #[arg(allow_hyphen_values = true)]
        right: String,
        /// Also print the bracket reduced on the constraint surface.
        #[arg(long)]
        weak: bool,
    },
    /// Integrate the Hamilton equations with fixed-step RK4.
    Integrate {
        path: PathBuf,
        /// Field values, or field values followed by momenta.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        init: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        alpha_max: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        step: Option<f64>,
        /// Write the trajectory as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Integrate the Lie equations on the fields and recover momenta
        /// from the constraints.
        #[arg(long)]
        reduced: bool,
    },
    /// Run the symbolic and numeric check suite.
    Verify { path: PathBuf },
}

/// Errors that end a command with exit code 2.
struct CliError(String);

impl<E: Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

fn error(msg: impl Into<String>) -> CliError {
    CliError(msg.into())
}

struct Output {
    json: bool,
    quiet: bool,
}

impl Output {
    fn emit<R: Serialize + Display>(&self, report: &R) -> Result<(), CliError> {
        if self.quiet {
            return Ok(());
        }
        let text = if self.json {
            serde_json::to_string_pretty(report)? + "\n"
        } else {
            report.to_string()
        };
        match io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        }
    }
}

fn load(path: &Path) -> Result<SystemDefinition, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| error(format!("{}: cannot read file: {e}", path.display())))?;
    parse_system_file(&text).map_err(|e| {
        let (line, col) = e.line_col(&text);
        error(format!("{}:{line}:{col}: {e}", path.display()))
    })
}

fn derive(path: &Path, def: &SystemDefinition) -> Result<ConstrainedSystem, CliError> {
    ConstrainedSystem::derive(&def.lagrangian, &def.chart).map_err(|e| error(format!("{}: {e}", path.display())))
}

fn cmd_derive(out: &Output, path: &Path) -> Result<ExitCode, CliError> {
    let def = load(path)?;
    let sys = derive(path, &def)?;
    let verdicts = [verify::el_equals_lie(&def), verify::consistency(&sys)];
    out.emit(&DeriveReport::new(&def, &sys, &verdicts))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bracket(out: &Output, path: &Path, left: &str, right: &str, weak: bool) -> Result<ExitCode, CliError> {
    let def = load(path)?;
    let sys = derive(path, &def)?;
    let chart = &sys.chart;
    let parse = |which: &str, text: &str| {
        parse_expr(text, chart).map_err(|e| error(format!("{which} expression, column {}: {e}", e.span.begin + 1)))
    };
    let (a, b) = (parse("first", left)?, parse("second", right)?);
    let bracket = sys.bracket(&a, &b)?;
    out.emit(&BracketReport {
        left: render_expr(&a, chart),
        right: render_expr(&b, chart),
        weak: weak.then(|| render_expr(&sys.weak_reduce(&bracket), chart)),
        bracket: render_expr(&bracket, chart),
    })?;
    Ok(ExitCode::SUCCESS)
}

struct IntegrateArgs {
    init: Option<Vec<f64>>,
    alpha_max: Option<f64>,
    step: Option<f64>,
    out: Option<PathBuf>,
    reduced: bool,
}

fn cmd_integrate(out: &Output, path: &Path, args: IntegrateArgs) -> Result<ExitCode, CliError> {
    let def = load(path)?;
    let step = args.step.or(def.integrate.step).unwrap_or(DEFAULT_STEP);
    if !(step.is_finite() && step > 0.0) {
        return Err(error(format!("--step must be positive, got {step}")));
    }
    let alpha_max = args.alpha_max.or(def.integrate.alpha_max).unwrap_or(TAU);
    if !(alpha_max.is_finite() && alpha_max >= 0.0) {
        return Err(error(format!("--alpha-max must be nonnegative, got {alpha_max}")));
    }
    let values = args
        .init
        .or_else(|| def.integrate.init.clone())
        .ok_or_else(|| error("no initial values: pass --init or add them to the [integrate] section"))?;
    if values.iter().any(|x| !x.is_finite()) {
        return Err(error("--init values must be finite"));
    }

    let sys = derive(path, &def)?;
    if sys.has_undetermined_multipliers() {
        return Err(error(format!(
            "{}: cannot integrate with undetermined multipliers",
            path.display()
        )));
    }
    let n = def.chart.num_fields();
    let init = if values.len() == n {
        initial_state(&sys, &values, def.generators.as_ref())?
    } else if values.len() == 2 * n {
        PhaseState { alpha: 0.0, values }
    } else {
        return Err(error(format!(
            "--init takes {n} field values or {} phase-space values, got {}",
            2 * n,
            values.len()
        )));
    };
    let setup = if args.reduced {
        let lie = def
            .generators
            .as_ref()
            .ok_or_else(|| error("--reduced needs a [generators] section"))?;
        FlowSetup::reduced(&sys, lie)?
    } else {
        FlowSetup::full(&sys)?
    };
    let traj = setup.integrate(&init, alpha_max, step)?;

    let csv = match &args.out {
        Some(p) => {
            let file = File::create(p).map_err(|e| error(format!("{}: cannot create file: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            write_csv(&mut w, &setup.columns, &traj)?;
            w.flush()?;
            Some(p.display().to_string())
        }
        None => None,
    };
    let summary = monitor_report(&traj);
    out.emit(&IntegrateReport::new(
        &def,
        &sys.chart,
        args.reduced,
        alpha_max,
        &traj,
        &summary,
        csv,
    ))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(out: &Output, path: &Path) -> Result<ExitCode, CliError> {
    let def = load(path)?;
    let checks = verify::run_checks(&def, &VerifyOptions::default());
    let report = VerifyReport::new(&def, &checks);
    out.emit(&report)?;
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = Output {
        json: cli.json,
        quiet: cli.quiet,
    };
    let result = match cli.command {
        Command::Derive { path } => cmd_derive(&out, &path),
        Command::Bracket {
            path,
            left,
            right,
            weak,
        } => cmd_bracket(&out, &path, &left, &right, weak),
        Command::Integrate {
            path,
            init,
            alpha_max,
            step,
            out: csv,
            reduced,
        } => cmd_integrate(
            &out,
            &path,
            IntegrateArgs {
                init,
                alpha_max,
                step,
                out: csv,
                reduced,
            },
        ),
        Command::Verify { path } => cmd_verify(&out, &path),
    };
    match result {
        Ok(code) => code,
        Err(CliError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
