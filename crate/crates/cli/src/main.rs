use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use asyncmh_core::harness::{self, Config, Experiment, WORKERS_ENV};
use asyncmh_core::instrument::{write_rows, RunRow};
use asyncmh_core::netsim::{RunStats, Trace};
use asyncmh_core::Error;
use clap::{Parser, Subcommand};

const CSV_HELP: &str = "\
Run CSV columns (one row per seed and scheduler):
  seed           schedule seed of the run
  scheduler      delay policy (synchronous, uniform, adversarial, fixed)
  n              number of nodes
  max_degree     maximum degree of the graph
  param          q for coloring and custom models, lambda for hardcore, beta for Ising
  horizon        chain horizon T
  makespan       virtual time at which the last node terminated
  phase1_end     virtual time at which every node had entered Phase II
  max_residence  largest Phase-II residence max(0, termination - phase1_end)
  max_chain_len  longest dependency chain ending at a node's last update
  messages       phase-one messages (one per directed edge) plus decisions
  bits           total bits sent, phase-one frames included

Exit codes: 0 success, 1 failed check or run, 2 invalid input.";

#[derive(Debug, Parser)]
#[command(name = "asyncmh", version, about = "Asynchronous distributed Metropolis sampler simulator", after_help = CSV_HELP)]
struct Cli {
    /// Worker threads for batches of independent runs.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate every configured seed and scheduler and write one CSV row per run.
    #[command(after_help = CSV_HELP)]
    Run {
        config: PathBuf,
        /// CSV output file; stdout if absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Final configurations, one `seed scheduler x_0 x_1 ...` line per run.
        #[arg(long)]
        finals: Option<PathBuf>,
        /// Directory for one event trace per run.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
    /// Compare the simulator with the sequential chain on shared randomness.
    VerifyCoupling { config: PathBuf },
    /// Total-variation distance between simulated outputs and the exact target.
    TvTest {
        config: PathBuf,
        /// Number of independent runs; overrides `experiment.runs`.
        #[arg(long)]
        runs: Option<u64>,
    },
    /// Phase-II residence across graph sizes and horizons.
    Sweep {
        config: PathBuf,
        /// Per-run CSV output.
        #[arg(long)]
        rows: Option<PathBuf>,
        /// Per-(n, T) summary CSV; stdout if absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print the update schedule of one seed.
    DumpSchedule {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute run statistics from a saved event trace.
    ReplayTrace { trace: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Deadlock(_) | Error::Invariant(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn output(path: Option<&Path>) -> asyncmh_core::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn experiment(path: &Path) -> asyncmh_core::Result<Experiment> {
    Experiment::from_config(Config::load(path)?)
}

fn execute(cli: Cli) -> asyncmh_core::Result<ExitCode> {
    let pool = harness::thread_pool(cli.workers)?;
    match cli.command {
        Command::Run {
            config,
            out,
            finals,
            trace_dir,
        } => {
            let exp = experiment(&config)?;
            let records = harness::run_all(&exp, &pool)?;
            let rows: Vec<RunRow> = records.iter().map(|r| r.row.clone()).collect();
            write_rows(output(out.as_deref())?, &rows)?;
            if let Some(path) = finals {
                let mut w = BufWriter::new(File::create(path)?);
                for r in &records {
                    write!(w, "{} {}", r.row.seed, r.row.scheduler)?;
                    for x in r.final_config.values() {
                        write!(w, " {x}")?;
                    }
                    writeln!(w)?;
                }
                w.flush()?;
            }
            if let Some(dir) = trace_dir {
                fs::create_dir_all(&dir)?;
                for r in &records {
                    let name = format!("trace-{}-{}.txt", r.row.seed, r.row.scheduler);
                    fs::write(dir.join(name), r.trace.to_text())?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyCoupling { config } => {
            let exp = experiment(&config)?;
            let report = harness::verify_coupling(&exp, &pool, None)?;
            match report.mismatch {
                None => {
                    println!("coupling ok: {} runs", report.checked);
                    Ok(ExitCode::SUCCESS)
                }
                Some(m) => {
                    println!(
                        "coupling mismatch: seed {} scheduler {} node {} expected {} got {}",
                        m.seed, m.scheduler, m.node, m.expected, m.got
                    );
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::TvTest { config, runs } => {
            let exp = experiment(&config)?;
            let runs = runs.or(exp.config.experiment.runs).unwrap_or(1000);
            let report = harness::tv_test(&exp, &pool, runs)?;
            println!("runs,tv,support,observed");
            println!("{},{},{},{}", report.runs, report.tv, report.support, report.observed);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, rows, out } => {
            let config = Config::load(&config)?;
            let report = harness::sweep(&config, &pool)?;
            if let Some(path) = rows {
                write_rows(BufWriter::new(File::create(path)?), &report.rows)?;
            }
            report.write_summary(output(out.as_deref())?)?;
            let fit = &report.fit;
            let coef = |c: Option<f64>| c.map_or("-".to_string(), |x| x.to_string());
            eprintln!(
                "fit max_residence = {} + {} * T + {} * ln n, R^2 = {}",
                fit.intercept,
                coef(fit.horizon_coef),
                coef(fit.log_n_coef),
                fit.r_squared
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::DumpSchedule { config, seed } => {
            let exp = experiment(&config)?;
            let seed = seed.unwrap_or(exp.config.experiment.seed_start);
            print!("{}", exp.schedule(seed)?.to_text());
            Ok(ExitCode::SUCCESS)
        }
        Command::ReplayTrace { trace } => {
            let text = fs::read_to_string(&trace)?;
            let stats = RunStats::from_trace(&Trace::parse_text(&text)?)?;
            println!("makespan,phase1_end,max_residence,messages,phase_one_messages,decision_messages,frames,bits,max_message_bits");
            println!(
                "{},{},{},{},{},{},{},{},{}",
                stats.makespan,
                stats.phase1_end,
                stats.max_residence(),
                stats.message_count,
                stats.phase_one_messages,
                stats.decision_messages,
                stats.frame_count,
                stats.total_bits,
                stats.max_message_bits
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use asyncmh_core::instrument::RUN_CSV_HEADER;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_documents_csv_columns() {
        for column in RUN_CSV_HEADER.split(',') {
            assert!(CSV_HELP.contains(column), "{column} missing from help");
        }
    }
}
