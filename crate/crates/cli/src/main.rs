//! `fermtwin`: run scenarios, endurance campaigns and the live server.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use fermtwin_api::ServeConfig;
use fermtwin_core::scenario::{endurance_scenario, export_run, RunReport, Scenario, Speed, SystemSim};
use fermtwin_core::server::Severity;
use tracing_subscriber::EnvFilter;

const LOG_ENV: &str = "FERMTWIN_LOG";

const SHOWN_SWITCHES: usize = 8;

/// Exit code when the run itself could not start.
const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "fermtwin", version, about = "Fermentation sampling digital twin")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Runs a scenario file. Exits non-zero if any invariant was violated.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// `max`, `realtime` or a simulated-seconds-per-second factor.
        #[arg(long)]
        speed: Option<Speed>,
        /// Writes the report and CSV exports here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Back-to-back sampling cycles at maximum speed.
    Endurance {
        #[arg(long)]
        cycles: u64,
        #[arg(long, default_value_t = fermtwin_core::scenario::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serves the HTTP API and live stream.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

fn init_logging() {
    let filter = EnvFilter::try_from_env(LOG_ENV).unwrap_or_else(|_| EnvFilter::new("error"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            speed,
            out,
        } => run(&scenario, seed, speed, out.as_deref()),
        Command::Endurance { cycles, seed, out } => {
            let scenario = endurance_scenario(cycles, seed);
            simulate(scenario, seed, Speed::Max, out.as_deref())
        }
        Command::Serve { config } => serve(&config),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(path: &Path, seed: Option<u64>, speed: Option<Speed>, out: Option<&Path>) -> Result<ExitCode, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let scenario = Scenario::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let seed = seed.unwrap_or(scenario.seed);
    let speed = speed.unwrap_or(scenario.speed);
    simulate(scenario, seed, speed, out)
}

fn simulate(scenario: Scenario, seed: u64, speed: Speed, out: Option<&Path>) -> Result<ExitCode, String> {
    let batch = scenario.batch.batch_id.clone();
    let sim = SystemSim::with_seed(scenario, seed);
    let server = sim.server().clone();
    let started = Instant::now();
    let report = sim.run(speed);
    let wall = started.elapsed();
    print_summary(&report, wall);
    if let Some(dir) = out {
        let files = export_run(dir, &report, &server, &batch).map_err(|e| e.to_string())?;
        println!("exported {} files to {}", files.len(), dir.display());
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn print_summary(r: &RunReport, wall: std::time::Duration) {
    println!("scenario {} seed {}", r.scenario, r.seed);
    println!(
        "simulated {:.1} s in {:.3} s wall, {} ticks, {} boot(s)",
        r.simulated_ms as f64 / 1e3,
        wall.as_secs_f64(),
        r.ticks,
        r.boots
    );
    let final_state = r.final_state.map_or_else(|| "none".to_owned(), |s| s.to_string());
    println!("cycles {} final state {}", r.cycles_completed, final_state);
    if let Some(s) = &r.cycle_stats {
        println!(
            "cycle duration min {} ms mean {:.1} ms max {} ms, max pressure {:.3} bar",
            s.min_duration_ms, s.mean_duration_ms, s.max_duration_ms, s.max_pressure.0
        );
    }
    let mut switches: Vec<String> = r
        .direction_switches
        .iter()
        .take(SHOWN_SWITCHES)
        .map(|d| d.after_cycles.to_string())
        .collect();
    if r.direction_switches.len() > SHOWN_SWITCHES {
        switches.push("...".into());
    }
    println!(
        "direction switches {} after cycles [{}]",
        r.direction_switches.len(),
        switches.join(", ")
    );
    println!("max pressure {:.3} bar", r.max_pressure.0);
    for ep in &r.safety_episodes {
        match ep.latency_ms() {
            Some(l) => println!("safety episode at {} ms: {:.3} bar, handled in {l} ms", ep.reading_at_ms, ep.observed.0),
            None => println!("safety episode at {} ms: {:.3} bar, not handled", ep.reading_at_ms, ep.observed.0),
        }
    }
    let critical = r.alerts.iter().filter(|a| a.severity == Severity::Critical).count();
    println!("alerts {} ({} critical), commands {}", r.alerts.len(), critical, r.commands.len());
    println!(
        "stored {} points, delivery sent {} stored {} missing {} unexpected {}",
        r.store.raw_points, r.delivery.sent, r.delivery.stored, r.delivery.missing, r.delivery.unexpected
    );
    if r.passed() {
        println!("result PASS");
    } else {
        for v in &r.violations {
            println!("violation at {} ms: {:?} {}", v.at_ms, v.kind, v.detail);
        }
        println!("result FAIL ({} violations)", r.violations.len());
    }
}

fn serve(path: &Path) -> Result<ExitCode, String> {
    let cfg = ServeConfig::load(path).map_err(|e| e.to_string())?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(fermtwin_api::serve(&cfg)).map_err(|e| e.to_string())?;
    Ok(ExitCode::SUCCESS)
}
