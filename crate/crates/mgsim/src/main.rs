use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mgsim::engine::run_case;
use mgsim::scenario::load_scenario;
use mgsim::trace::{compare_cases, Summary};
use mgsim::SimError;

/// Islanded-microgrid hybrid simulator.
#[derive(Parser)]
#[command(name = "mgsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace CSV and summary JSON.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the integration step (s).
        #[arg(long)]
        dt: Option<f64>,
        /// Override the run duration (s).
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Check the case-1..4 trade-off orderings across four run summaries.
    Compare {
        #[arg(long)]
        out: PathBuf,
        /// Summary JSON files in case order: case1 case2 case3 case4.
        #[arg(num_args = 4)]
        summaries: Vec<PathBuf>,
    },
    /// Load and validate a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

// Exit codes: 0 success, 1 validation error, 2 numerical abort,
// 3 failed ordering check.
fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                SimError::NonFinite { .. } => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn run() -> Result<ExitCode, SimError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            dt,
            duration,
        } => {
            let mut cfg = load_scenario(&scenario)?;
            cfg.apply_overrides(dt, duration)?;
            let result = run_case(&cfg)?;

            fs::create_dir_all(&out).map_err(|source| SimError::Output {
                path: out.display().to_string(),
                source,
            })?;
            let trace_path = out.join(format!("{}_trace.csv", cfg.name));
            let summary_path = out.join(format!("{}_summary.json", cfg.name));
            write_file(&trace_path, result.trace.to_csv_string().as_bytes())?;
            let json = serde_json::to_string_pretty(&result.summary).expect("summary serializes");
            write_file(&summary_path, json.as_bytes())?;

            println!(
                "{}: {} rows -> {}",
                cfg.name,
                result.trace.rows.len(),
                trace_path.display()
            );
            println!(
                "window [{:.1}, {:.1}] s: freq_err={:.2e} rad/s, mean |v|={:.2} V, P disp={:.3}%, Q disp={:.3}%",
                result.summary.window_start,
                result.summary.window_end,
                result.summary.freq_err_final_max,
                result.summary.mean_vmag,
                100.0 * result.summary.p_dispersion,
                100.0 * result.summary.q_dispersion,
            );
            println!("summary -> {}", summary_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { out, summaries } => {
            let mut loaded: Vec<Summary> = Vec::with_capacity(summaries.len());
            for path in &summaries {
                let text = fs::read_to_string(path).map_err(|source| SimError::Output {
                    path: path.display().to_string(),
                    source,
                })?;
                let summary: Summary =
                    serde_json::from_str(&text).map_err(|e| {
                        SimError::Config(mgsim::ConfigError::Parse {
                            path: path.display().to_string(),
                            message: e.to_string(),
                        })
                    })?;
                loaded.push(summary);
            }
            let report = compare_cases(&loaded).map_err(SimError::Config)?;
            fs::create_dir_all(&out).map_err(|source| SimError::Output {
                path: out.display().to_string(),
                source,
            })?;
            let report_path = out.join("compare_report.txt");
            write_file(&report_path, report.render().as_bytes())?;
            print!("{}", report.render());
            println!("report -> {}", report_path.display());
            if report.all_pass {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(3))
            }
        }
        Command::Validate { scenario } => {
            let cfg = load_scenario(&scenario)?;
            println!(
                "{}: ok ({} CIGs, {} buses, {} lines, {} loads, {} events)",
                cfg.name,
                cfg.cigs.len(),
                cfg.system.n_buses,
                cfg.lines.len(),
                cfg.loads.len(),
                cfg.events.len()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), SimError> {
    fs::write(path, bytes).map_err(|source| SimError::Output {
        path: path.display().to_string(),
        source,
    })
}
