use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use butler::files;
use butler::http::{router, spawn_ticker, AppState};
use butler_core::executor::ExecConfig;
use butler_core::planner::SearchMode;
use butler_core::service::{run_scenario, Engine};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "butler", version, about = "Household task planner: scenario runner and HTTP service")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sequential,
    Parallel,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    world: PathBuf,
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, default_value_t = 500)]
    tick_budget: u64,
    #[arg(long, default_value_t = 2)]
    retries: u32,
}

impl Common {
    fn config(&self) -> ExecConfig {
        ExecConfig {
            retries: self.retries,
            tick_budget: self.tick_budget,
            mode: match self.mode {
                None => SearchMode::default(),
                Some(Mode::Sequential) => SearchMode::Sequential,
                Some(Mode::Parallel) => SearchMode::Parallel,
            },
            ..ExecConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario bundle and check its expectation block.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        commands: Option<PathBuf>,
        /// Write the trace (one JSON record per line) here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Milliseconds per world tick; 0 leaves ticking to POST /tick.
        #[arg(long, default_value_t = 500)]
        tick_ms: u64,
    },
}

fn run(common: &Common, commands: Option<PathBuf>, trace: Option<PathBuf>) -> ExitCode {
    let bundle = match files::load(&common.world, common.events.as_deref(), commands.as_deref()) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run_scenario(&bundle.world, &bundle.script, &bundle.commands, common.seed, common.config()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for (i, o) in report.outcomes.iter().enumerate() {
        let detail = match &o.result {
            Some(r) => format!(
                "{} actions, assumptions [{}]{}",
                r.actions,
                r.assumptions.join(", "),
                r.outcome.reason().map(|x| format!(", reason: {x}")).unwrap_or_default()
            ),
            None => serde_json::to_string(&o.response).unwrap_or_default(),
        };
        println!("{}. {:?} -> {} ({detail})", i + 1, o.command, o.outcome());
    }
    if let Some(path) = trace {
        if let Err(e) = std::fs::write(&path, &report.trace) {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        for m in &report.mismatches {
            eprintln!("mismatch: {m}");
        }
        ExitCode::FAILURE
    }
}

fn serve(common: &Common, addr: &str, tick_ms: u64) -> ExitCode {
    let bundle = match files::load(&common.world, common.events.as_deref(), None) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let engine = match Engine::load(&bundle.world, &bundle.script, common.seed, common.config()) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    rt.block_on(async {
        let state = AppState::new(engine);
        if tick_ms > 0 {
            spawn_ticker(state.clone(), Duration::from_millis(tick_ms));
        }
        let listener = match tokio::net::TcpListener::bind(addr).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("error: cannot bind {addr}: {e}");
                return ExitCode::from(2);
            }
        };
        eprintln!("listening on {addr}");
        match axum::serve(listener, router(state)).await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { common, commands, trace } => run(&common, commands, trace),
        Cmd::Serve { common, addr, tick_ms } => serve(&common, &addr, tick_ms),
    }
}
