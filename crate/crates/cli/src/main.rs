use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use ghostline::cli::{cmd_bench, cmd_certify, cmd_verify, Flags};
use ghostline::search::SearchEvent;

/// Verify array programs by counterexample-guided ghost-code instrumentation.
#[derive(Parser)]
#[command(name = "ghostline", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify one program.
    Verify {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Verify every `.cw` file of a directory and print a results table.
    Bench {
        dir: PathBuf,
        /// Also write the CSV table to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Check the correctness conditions of a library operator.
    Certify {
        /// One of square, forall, exists, max, min, sum.
        #[arg(value_name = "OPERATOR")]
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Comma-separated operator names (default: chosen from the program).
    #[arg(long, value_delimiter = ',')]
    operator: Option<Vec<String>>,
    /// Overall budget in seconds.
    #[arg(long, default_value_t = 300.0)]
    timeout: f64,
    /// Highest number of simultaneous instances of each operator.
    #[arg(long, default_value_t = 2)]
    max_ops: usize,
    /// Solver command line; it must read SMT-LIB from standard input.
    #[arg(long)]
    solver_cmd: Option<String>,
    /// Write every solver script into this directory.
    #[arg(long)]
    dump_smt: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Random seed passed to the solver.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Do not stream search progress to standard error.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn flags(&self) -> Flags {
        Flags {
            operators: self.operator.clone(),
            timeout: Duration::from_secs_f64(self.timeout.max(0.0)),
            max_ops: self.max_ops,
            solver_cmd: self.solver_cmd.clone(),
            dump_smt: self.dump_smt.clone(),
            seed: self.seed,
            workers: self.workers,
        }
    }
}

const EXIT_ERROR: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { EXIT_ERROR } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Verify { file, common } => {
            let flags = common.flags();
            let mut show = |e: &SearchEvent| {
                eprintln!("{}", serde_json::to_string(e).expect("serializable event"));
            };
            let progress: Option<&mut dyn FnMut(&SearchEvent)> = if common.quiet { None } else { Some(&mut show) };
            let report = cmd_verify(&file, &flags, progress)?;
            if common.json {
                println!("{}", serde_json::to_string_pretty(&report.to_json())?);
            } else {
                println!("verdict: {}", report.verdict);
                for (p, r) in &report.selection {
                    println!("  {p} -> {r}");
                }
                if let Some(w) = &report.witness {
                    println!("witness: {w}");
                }
                if let Some(c) = &report.counterexample {
                    println!("counterexample: {c}");
                }
                if let Some(r) = &report.reason {
                    println!("reason: {r}");
                }
                println!(
                    "inst_space: {}  inst_steps: {}  time_s: {:.3}",
                    report.stats.inst_space, report.stats.inst_steps, report.stats.time_s
                );
            }
            Ok(report.exit_code() as u8)
        }
        Command::Bench { dir, csv, common } => {
            let flags = common.flags();
            let quiet = common.quiet;
            let table = cmd_bench(&dir, &flags, |row| {
                if !quiet {
                    eprintln!("{}", serde_json::to_string(row).expect("serializable row"));
                }
            })?;
            if let Some(path) = csv {
                std::fs::write(path, table.to_csv())?;
            }
            let mut out = std::io::stdout().lock();
            if common.json {
                writeln!(out, "{}", serde_json::to_string_pretty(&table.to_json())?)?;
            } else {
                write!(out, "{}", table.to_csv())?;
            }
            Ok(0)
        }
        Command::Certify { name, common } => {
            let report = cmd_certify(&name, &common.flags())?;
            if common.json {
                println!("{}", serde_json::to_string_pretty(&report.to_json())?);
            } else {
                println!("operator {} over {}", report.operator, report.domain);
                for e in &report.entries {
                    println!(
                        "  {:<18} {:<4} {} ({}){}",
                        e.rule.as_deref().unwrap_or("-"),
                        e.condition,
                        if e.passed { "pass" } else { "FAIL" },
                        e.method,
                        e.witness.as_ref().map(|w| format!(" witness: {w}")).unwrap_or_default()
                    );
                }
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}
