//! `f1`: run the service, seed demo data, check keyword lists and replay
//! smoke-test scripts against a running service.
//!
//! Exit codes: 0 success, 1 validation or assertion failure, 2 environment
//! failure (unreadable files, bad data directory, unreachable service).

mod seed;

use std::collections::HashMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{DateTime, SubsecRound, Utc};
use clap::{Args, Parser, Subcommand};
use f1_client::scenario::{self, RunError, Script};
use f1_client::Client;
use f1_core::challenge::check_wordlist;
use f1_core::{Collection, FileStore, GeoPoint, SnapshotStore};
use f1_server::{Server, ServerConfig};

const FAILED: u8 = 1;
const ENVIRONMENT: u8 = 2;

#[derive(Parser)]
#[command(name = "f1", version, about = "Favor-exchange service and operator tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service until Ctrl-C or SIGTERM.
    Serve(ServeArgs),
    /// Write a deterministic demo population into a data directory.
    Seed(SeedArgs),
    /// Validate a keyword list (one word per line).
    WordlistCheck {
        path: PathBuf,
    },
    /// Replay a scenario script against a running service.
    Scenario(ScenarioArgs),
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "F1_LISTEN", default_value = f1_server::config::DEFAULT_LISTEN)]
    listen: SocketAddr,
    /// Overrides the port of --listen; 0 picks a free one.
    #[arg(long, env = "F1_PORT")]
    port: Option<u16>,
    /// Keep data here; without it everything lives in memory.
    #[arg(long, env = "F1_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Keyword list; defaults to the bundled Polish sample.
    #[arg(long, env = "F1_WORDLIST")]
    wordlist: Option<PathBuf>,
    #[arg(long, env = "F1_DEFAULT_RADIUS_M", default_value_t = f1_core::geo::DEFAULT_NEARBY_RADIUS_M)]
    default_radius_m: f64,
    #[arg(long, env = "F1_SOS_RADIUS_M", default_value_t = f1_core::emergency::DEFAULT_SOS_RADIUS_M)]
    sos_radius_m: f64,
    #[arg(long, env = "F1_RATING_WINDOW_DAYS", default_value_t = f1_core::platform::DEFAULT_RATING_WINDOW_DAYS)]
    rating_window_days: i64,
    /// Bearer token with admin rights; also required to create organizations.
    #[arg(long, env = "F1_ADMIN_TOKEN", hide_env_values = true)]
    admin_token: Option<String>,
    /// Fixed seed for keyword draws (testing only).
    #[arg(long, env = "F1_KEYWORD_SEED", hide = true)]
    keyword_seed: Option<u64>,
    /// Seconds between expiry sweeps.
    #[arg(long, env = "F1_SWEEP_SECS", default_value_t = 30)]
    sweep_secs: u64,
}

#[derive(Args)]
struct SeedArgs {
    #[arg(long, env = "F1_DATA_DIR")]
    data_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    users: usize,
    #[arg(long, default_value_t = 20)]
    requests: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// "lat,lon" the population is scattered around.
    #[arg(long, default_value = "52.2297,21.0122", value_parser = parse_point)]
    center: GeoPoint,
    #[arg(long, default_value_t = 3000.0)]
    spread_m: f64,
    /// Timestamp of the first signup (RFC 3339 or `now`). The fixed default
    /// keeps output a function of the seed and counts alone.
    #[arg(long, default_value = "2026-01-01T00:00:00Z", value_parser = parse_epoch)]
    epoch: DateTime<Utc>,
    /// Replace whatever the data directory already holds.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ScenarioArgs {
    script: PathBuf,
    #[arg(long, env = "F1_BASE_URL", default_value = "http://127.0.0.1:8080")]
    base_url: String,
    /// Predefine a script variable; repeatable.
    #[arg(long = "var", value_name = "NAME=VALUE", value_parser = parse_var)]
    vars: Vec<(String, String)>,
}

fn parse_point(s: &str) -> Result<GeoPoint, String> {
    let (lat, lon) = s.split_once(',').ok_or("expected lat,lon")?;
    let lat = lat.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let lon = lon.trim().parse::<f64>().map_err(|e| e.to_string())?;
    GeoPoint::new(lat, lon).map_err(|e| e.to_string())
}

fn parse_epoch(s: &str) -> Result<DateTime<Utc>, String> {
    if s == "now" {
        return Ok(Utc::now().trunc_subsecs(0));
    }
    DateTime::parse_from_rfc3339(s).map(|t| t.with_timezone(&Utc)).map_err(|e| e.to_string())
}

fn parse_var(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    Ok((k.to_owned(), v.to_owned()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Serve(args) => serve(args),
        Command::Seed(args) => seed(args),
        Command::WordlistCheck { path } => wordlist_check(&path),
        Command::Scenario(args) => run_scenario(args),
    }
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("tokio runtime")
}

fn serve(args: ServeArgs) -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let mut listen = args.listen;
    if let Some(port) = args.port {
        listen.set_port(port);
    }
    let config = ServerConfig {
        listen,
        data_dir: args.data_dir,
        wordlist_path: args.wordlist,
        default_radius_m: args.default_radius_m,
        sos_radius_m: args.sos_radius_m,
        rating_window_days: args.rating_window_days,
        admin_token: args.admin_token,
        keyword_seed: args.keyword_seed,
        sweep_interval: std::time::Duration::from_secs(args.sweep_secs.max(1)),
    };
    runtime().block_on(async {
        let server = match Server::bind(&config).await {
            Ok(s) => s,
            Err(e) => {
                eprintln!("f1 serve: {e}");
                return ExitCode::from(ENVIRONMENT);
            }
        };
        println!("listening on http://{}", server.local_addr());
        let _ = std::io::stdout().flush();
        match server.run(f1_server::shutdown_signal()).await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("f1 serve: {e}");
                ExitCode::from(ENVIRONMENT)
            }
        }
    })
}

fn seed(args: SeedArgs) -> ExitCode {
    let store = match FileStore::open(&args.data_dir) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("f1 seed: {e}");
            return ExitCode::from(ENVIRONMENT);
        }
    };
    match store.load() {
        Ok(existing) if !existing.is_empty() && !args.force => {
            eprintln!(
                "f1 seed: {} already holds data ({} users); pass --force to replace it",
                args.data_dir.display(),
                existing.users.len()
            );
            return ExitCode::from(FAILED);
        }
        Ok(_) => {}
        Err(e) if args.force => eprintln!("f1 seed: replacing unreadable store: {e}"),
        Err(e) => {
            eprintln!("f1 seed: {e}");
            return ExitCode::from(ENVIRONMENT);
        }
    }
    let spec = seed::SeedSpec {
        users: args.users,
        requests: args.requests,
        seed: args.seed,
        center: args.center,
        spread_m: args.spread_m,
        epoch: args.epoch,
    };
    let snapshot = match seed::populate(&spec) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("f1 seed: {e}");
            return ExitCode::from(FAILED);
        }
    };
    if let Err(e) = store.save(&snapshot, &Collection::ALL.into_iter().collect()) {
        eprintln!("f1 seed: {e}");
        return ExitCode::from(ENVIRONMENT);
    }
    println!(
        "seeded {} users and {} requests into {} (seed {})",
        snapshot.users.len(),
        snapshot.requests.len(),
        args.data_dir.display(),
        args.seed
    );
    ExitCode::SUCCESS
}

fn wordlist_check(path: &PathBuf) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("f1 wordlist-check: {}: {e}", path.display());
            return ExitCode::from(ENVIRONMENT);
        }
    };
    let report = check_wordlist(&text);
    println!("count: {}", report.words.len());
    println!("duplicates: {}", report.duplicates);
    println!("rejects: {}", report.rejects.len());
    for reject in &report.rejects {
        println!("  {reject}");
    }
    match report.first_error() {
        None => {
            println!("PASS");
            ExitCode::SUCCESS
        }
        Some(err) => {
            println!("FAIL {err:?}");
            ExitCode::from(FAILED)
        }
    }
}

fn run_scenario(args: ScenarioArgs) -> ExitCode {
    let text = match std::fs::read_to_string(&args.script) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("f1 scenario: {}: {e}", args.script.display());
            return ExitCode::from(ENVIRONMENT);
        }
    };
    let script = match Script::parse(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("f1 scenario: {}: {e}; nothing was sent", args.script.display());
            return ExitCode::from(FAILED);
        }
    };
    let mut vars: HashMap<String, String> = scenario::builtin_vars();
    vars.extend(args.vars);
    let client = Client::new(&args.base_url);
    let outcome = runtime().block_on(scenario::run(&script, &client, vars, |line| println!("{line}")));
    match outcome {
        Ok(report) => {
            let total = report.lines.len();
            println!("{}/{total} lines passed", total - report.failed());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(FAILED)
            }
        }
        Err(RunError::Unreachable { partial, source }) => {
            eprintln!(
                "f1 scenario: {} unreachable after {} line(s): {source}",
                args.base_url,
                partial.lines.len()
            );
            ExitCode::from(ENVIRONMENT)
        }
    }
}
