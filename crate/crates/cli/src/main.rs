use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use gjra_core::channel::build_channel_table;
use gjra_core::energy::Problem;
use gjra_core::gjra::{solve, Scheme, SolveReport};
use gjra_core::model::{generate_scenario, load_scenario, save_scenario, PhysicsConfig, SolverConfig, TaskRanges, UavBudget};
use gjra_core::verify::{check_allocation, random_column_suite, verify_columns, OracleReport};
use gjra_cli::sweep::{run_sweep, summarize, write_rows, write_summary, SweepSpec};
use gjra_cli::{compare, exit_code, format_sig, EXIT_VERIFY_FAILED};

#[derive(Parser)]
#[command(name = "gjra", version, about = "Offloading, charging and association for a UAV serving IoT devices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Breakdown,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random scenario and write it as JSON.
    Generate {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        m: usize,
        /// Side of the square deployment area, metres.
        #[arg(long, default_value_t = 1000f64.sqrt())]
        side: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [1e5, 1e6])]
        bits: Vec<f64>,
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [2e5, 1e6])]
        cycles: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one scenario file with one scheme.
    Solve {
        scenario: PathBuf,
        #[arg(long, default_value = "GJRA", value_parser = parse_scheme)]
        scheme: Scheme,
        /// Seed for the random-association scheme.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-pair channel table as CSV.
        #[arg(long)]
        dump_channel: Option<PathBuf>,
        #[arg(long, value_enum)]
        emit: Option<Emit>,
        /// Record wall-clock time in the report instead of zero.
        #[arg(long)]
        timing: bool,
    },
    /// Run a parameter sweep described by a JSON spec.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-(value, scheme) medians; defaults to `<out>.summary.csv`.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Worker threads, 0 for one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        timing: bool,
    },
    /// Solve with every scheme and report gaps to the exhaustive optimum.
    Compare {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check the closed-form allocations against numeric oracles.
    Verify {
        /// Also solve this scenario and audit the result.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: gjra_core::Error| e.to_string())
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    std::fs::write(path, bytes).map_err(|source| gjra_core::Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).map_err(|source| gjra_core::Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(BufWriter::new(f))
}

fn print_breakdown(out: &mut impl Write, rep: &SolveReport) -> io::Result<()> {
    writeln!(out, "device,position,offload,eh_s,local_s,tx_s,offload_compute_s,total_s")?;
    for (i, d) in rep.breakdown.devices.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{},{},{},{}",
            d.position,
            d.offload,
            format_sig(d.eh_s),
            format_sig(d.local_s),
            format_sig(d.tx_s),
            format_sig(d.offload_compute_s),
            format_sig(d.total_s)
        )?;
    }
    Ok(())
}

fn print_oracle_table(out: &mut impl Write, reports: &[OracleReport]) -> io::Result<()> {
    writeln!(out, "{:<24} {:>16} {:>16} {:>12} {:>12} {:>12}  status", "check", "closed_form", "numeric", "gap", "grid_gap", "slack")?;
    for r in reports {
        writeln!(
            out,
            "{:<24} {:>16.9e} {:>16.9e} {:>12.3e} {:>12.3e} {:>12.3e}  {}",
            r.label,
            r.closed_form_objective,
            r.numeric_objective,
            r.relative_gap,
            r.grid_relative_gap,
            r.constraint_residuals.iter().fold(0.0f64, |a, &b| a.max(b.abs())),
            if r.passed { "ok" } else { "FAIL" }
        )?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Generate {
            n,
            m,
            side,
            seed,
            bits,
            cycles,
            out: path,
        } => {
            let ranges = TaskRanges {
                bits: (bits[0], bits[1]),
                cycles: (cycles[0], cycles[1]),
            };
            let s = generate_scenario(n, m, side, seed, PhysicsConfig::default(), UavBudget::default(), ranges)?;
            save_scenario(&s, &path)?;
            writeln!(out, "wrote {} devices, {} positions to {}", n, m, path.display())?;
        }
        Command::Solve {
            scenario,
            scheme,
            seed,
            out: report_path,
            dump_channel,
            emit,
            timing,
        } => {
            let s = load_scenario(&scenario)?;
            if let Some(path) = dump_channel {
                write_file(&path, build_channel_table(&s)?.to_csv().as_bytes())?;
            }
            let cfg = SolverConfig {
                rng_seed: seed,
                ..SolverConfig::default()
            };
            let mut rep = solve(scheme, &s, &cfg)?;
            if !timing {
                rep.wall_time_s = 0.0;
            }
            writeln!(
                out,
                "{}: total latency {} s, rounds {}, converged {}{}",
                rep.scheme,
                format_sig(rep.total_latency_s),
                rep.rounds,
                rep.converged,
                if rep.guard_tripped { " (last round rolled back)" } else { "" }
            )?;
            if emit == Some(Emit::Breakdown) {
                print_breakdown(&mut out, &rep)?;
            }
            if let Some(path) = report_path {
                let mut text = serde_json::to_string_pretty(&rep).context("serializing report")?;
                text.push('\n');
                write_file(&path, text.as_bytes())?;
            }
        }
        Command::Sweep {
            spec,
            out: csv_path,
            summary,
            jobs,
            timing,
        } => {
            let spec = SweepSpec::load(&spec)?;
            let outcomes = run_sweep(&spec, jobs, timing)?;
            write_rows(create(&csv_path)?, &outcomes)?;
            let summary_path = summary.unwrap_or_else(|| csv_path.with_extension("summary.csv"));
            write_summary(create(&summary_path)?, &summarize(&spec, &outcomes))?;
            let failed = outcomes.iter().filter(|o| o.report.is_none()).count();
            writeln!(
                out,
                "{} rows to {} ({} failed), summary to {}",
                outcomes.len(),
                csv_path.display(),
                failed,
                summary_path.display()
            )?;
        }
        Command::Compare { scenario, seed } => {
            let s = load_scenario(&scenario)?;
            let cfg = SolverConfig {
                rng_seed: seed,
                ..SolverConfig::default()
            };
            writeln!(out, "{:<6} {:>20} {:>14}", "scheme", "total_latency_s", "gap_to_ea")?;
            for row in compare(&s, &cfg)? {
                writeln!(out, "{:<6} {:>20} {:>14.6e}", row.scheme.label(), format_sig(row.total_latency_s), row.gap_to_ea)?;
            }
        }
        Command::Verify { scenario, count, seed, tol } => {
            let mut reports = random_column_suite(count, seed, tol)?;
            let mut violations = Vec::new();
            if let Some(path) = scenario {
                let s = load_scenario(&path)?;
                let rep = solve(Scheme::Gjra, &s, &SolverConfig::default())?;
                let p = Problem::new(&s)?;
                reports.extend(verify_columns(&p, &rep.final_alloc, tol));
                violations = check_allocation(&p, &rep.final_alloc);
            }
            print_oracle_table(&mut out, &reports)?;
            for v in &violations {
                writeln!(out, "violation: {}", v.message)?;
            }
            let failed = reports.iter().filter(|r| !r.passed).count();
            writeln!(out, "{} checks, {} failed, {} violations", reports.len(), failed, violations.len())?;
            if failed > 0 || !violations.is_empty() {
                return Ok(EXIT_VERIFY_FAILED);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GJRA_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
