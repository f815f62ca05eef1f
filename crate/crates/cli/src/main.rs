use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use dampnls::diagnostics::FitOptions;
use dampnls::error::{Error, Result};
use dampnls::experiments::{
    check_manifest, execute_run, groundstate_report, load_run_config, load_scenario,
    profile_report, run_sweep, summary_table,
};
use dampnls::persistence::write_json;

#[derive(Parser, Debug)]
#[command(name = "dampnls", version, about = "Damped critical NLS laboratory")]
struct Cli {
    /// Root directory for all outputs.
    #[arg(long, global = true, default_value = "out")]
    out_root: PathBuf,
    /// Worker threads for sweeps (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Solve for the ground state Q.
    Groundstate {
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
    /// Build the self-similar profile Q_b.
    Profile {
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Also solve for the outgoing radiation and its flux constant.
        #[arg(long)]
        radiation: bool,
    },
    /// Integrate one configuration and check it.
    Run { config: PathBuf },
    /// Run a scenario file or one of: threshold, damping, perturb.
    Sweep {
        scenario: String,
        /// Override the scenario's run cap.
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Fit blow-up rates to a series CSV or a run manifest.
    Fit {
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        decades: f64,
    },
    /// Re-run the checks of a stored run.
    Check {
        #[arg(long = "run")]
        manifest: PathBuf,
    },
}

fn print(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn diagnostic_code(failures: &[String]) -> u8 {
    for f in failures {
        log::error!("{f}");
    }
    if failures.is_empty() {
        0
    } else {
        4
    }
}

fn execute(cli: &Cli) -> Result<u8> {
    let root: &Path = &cli.out_root;
    match &cli.cmd {
        Cmd::Groundstate { d } => print(&groundstate_report(*d, root)?).map(|_| 0),
        Cmd::Profile { b, eta, d, radiation } => {
            print(&profile_report(*b, *eta, *d, *radiation, root)?).map(|_| 0)
        }
        Cmd::Run { config } => {
            let cfg = load_run_config(config)?;
            let s = execute_run(&cfg, root)?;
            log::info!("run written to {}", s.dir.display());
            print(&s)?;
            Ok(diagnostic_code(&s.report.failures))
        }
        Cmd::Sweep { scenario, cap } => {
            let mut sc = load_scenario(scenario)?;
            if let Some(c) = cap {
                sc.run_cap = *c;
            }
            let (summary, dir) = run_sweep(&sc, root, cli.threads)?;
            print!("{}", summary_table(&summary, '\t'));
            log::info!("summary written to {}", dir.display());
            let failed = summary.rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                return Err(Error::Solver(format!("{failed} runs of the sweep failed")));
            }
            Ok(0)
        }
        Cmd::Fit { input, decades } => {
            let opts = FitOptions {
                decades: *decades,
                ..FitOptions::default()
            };
            print(&dampnls::experiments::fit_file(input, &opts)?).map(|_| 0)
        }
        Cmd::Check { manifest } => {
            let rep = check_manifest(manifest)?;
            let out = manifest.parent().unwrap_or(Path::new(".")).join("report.json");
            write_json(&rep, &out)?;
            let v: Value = serde_json::to_value(&rep)?;
            print(&v)?;
            Ok(diagnostic_code(&rep.failures))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
