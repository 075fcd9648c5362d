//! `irsloc`: command-line client of the localization service.
//!
//! Without `--server` an embedded service is started on 127.0.0.1 with a free
//! port, so every command goes through the same HTTP interface.

mod output;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use irsloc_client::Client;
use irsloc_core::api::{AnglesRequest, CrbRequest, ExperimentRequest, LocalizeRequest};
use irsloc_core::bench::{spec_from_toml_str, ExperimentSpec};
use irsloc_core::model::SceneConfig;

/// Rayon worker count for the embedded service; the only environment setting.
const THREADS_ENV: &str = "IRSLOC_THREADS";

#[derive(Parser, Debug)]
#[command(name = "irsloc", version, about = "Multi-IRS collaborative localization experiments")]
struct Cli {
    /// Base URL of a running service; an embedded one is started when absent.
    #[arg(long, global = true)]
    server: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a Monte Carlo experiment preset (or a custom spec) and write CSV and plot data.
    Run {
        /// fig3..fig8, or custom together with --spec.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to results/<scenario>.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated schemes or methods.
        #[arg(long, value_delimiter = ',')]
        scheme: Option<Vec<String>>,
        /// Comma-separated sweep values replacing the preset grid.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// Estimate from synthesized waveforms instead of bound-level measurement draws.
        #[arg(long)]
        full_pipeline: bool,
        /// Keep ADMM iteration traces of the first trial at each sweep point.
        #[arg(long)]
        trace: bool,
        /// TOML experiment spec, required for the custom scenario.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Location bounds of one scene for every scheme.
    Crb {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Delay and angle estimates of one scene.
    Angles {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Skip waveform synthesis; draw matched-filter outputs from the model.
        #[arg(long)]
        ideal: bool,
    },
    /// Localize one scene from bound-level measurements with every method.
    Localize {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Perturb the exact measurements at their covariances with this seed.
        #[arg(long)]
        perturb_seed: Option<u64>,
    },
    /// List the presets.
    Scenarios,
    /// Serve the HTTP interface until interrupted.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

fn read_scene(path: Option<&Path>) -> Result<Option<SceneConfig>> {
    let Some(p) = path else { return Ok(None) };
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Ok(Some(SceneConfig::from_toml_str(&text).with_context(|| format!("scene config {}", p.display()))?))
}

fn read_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(spec_from_toml_str(&text).with_context(|| format!("experiment spec {}", path.display()))?)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    Ok(())
}

async fn connect(server: Option<&str>) -> Result<Client> {
    let url = match server {
        Some(u) => u.to_string(),
        None => {
            let (addr, _) = irsloc_service::spawn("127.0.0.1:0".parse()?).await.context("starting embedded service")?;
            format!("http://{addr}")
        }
    };
    Ok(Client::new(&url)?)
}

/// Exit status 0 iff every sweep point had a successful trial; 2 otherwise.
async fn run(cli: Cli) -> Result<ExitCode> {
    if let Command::Serve { addr } = cli.command {
        configure_threads()?;
        let (bound, handle) = irsloc_service::spawn(addr).await?;
        eprintln!("serving on http://{bound}");
        tokio::select! {
            r = handle => r??,
            _ = tokio::signal::ctrl_c() => {}
        }
        return Ok(ExitCode::SUCCESS);
    }
    if cli.server.is_none() {
        configure_threads()?;
    }
    let client = connect(cli.server.as_deref()).await?;
    match cli.command {
        Command::Run { scenario, trials, seed, out, scheme, grid, full_pipeline, trace, spec } => {
            let spec = spec.as_deref().map(read_spec).transpose()?;
            if scenario == "custom" && spec.is_none() {
                anyhow::bail!("the custom scenario needs --spec FILE");
            }
            let req = ExperimentRequest { scenario: scenario.clone(), n_trials: trials, seed, schemes: scheme, grid, full_pipeline, trace, spec };
            let resp = client.experiment(&req).await?;
            let dir = out.unwrap_or_else(|| PathBuf::from("results").join(&scenario));
            output::write_experiment(&dir, &resp)?;
            for r in &resp.rows {
                println!("{} {}={} {:<14} {:<13} {:>9.3} dB ({} failed of {})", r.scenario, r.sweep_variable, r.sweep_value, r.scheme, r.metric, r.value_db, r.failed, r.trials);
            }
            eprintln!("wrote {}", dir.display());
            if !resp.empty_points.is_empty() {
                eprintln!("no successful trial at {:?}", resp.empty_points);
                return Ok(ExitCode::from(2));
            }
        }
        Command::Crb { config, out } => {
            let req = CrbRequest { scene: read_scene(config.as_deref())?, schemes: vec![] };
            let resp = client.crb(&req).await?;
            output::write_crb(&out, &resp)?;
            for e in &resp.entries {
                println!("{:<14} {:>9.3} dB m^2", e.scheme, e.crb_location_db);
            }
        }
        Command::Angles { config, out, ideal } => {
            let req = AnglesRequest { scene: read_scene(config.as_deref())?, ideal, ..Default::default() };
            let resp = client.angles(&req).await?;
            output::write_angles(&out, &resp)?;
            for a in &resp.angles {
                match &a.estimate {
                    Some(e) => println!("IRS {}: fused {:.6} rad (true {:.6})", a.irs, e.theta_fused, resp.true_angles[a.irs]),
                    None => println!("IRS {}: {:?}", a.irs, a.status),
                }
            }
        }
        Command::Localize { config, out, perturb_seed } => {
            let req = LocalizeRequest { scene: read_scene(config.as_deref())?, perturb_seed, ..Default::default() };
            let resp = client.localize(&req).await?;
            output::write_localize(&out, &resp)?;
            for r in &resp.results {
                match (&r.estimate, &r.error) {
                    (Some(e), _) => println!("{:<12} ({:.6}, {:.6}) error {:.3e} m", r.method, e.position[0], e.position[1], r.error_m.unwrap_or(f64::NAN)),
                    (None, Some(err)) => println!("{:<12} failed: {err}", r.method),
                    _ => {}
                }
            }
        }
        Command::Scenarios => {
            for s in client.scenarios().await? {
                println!("{:<5} {:<13} {:<14} {:?}  {}", s.id, format!("{:?}", s.workload).to_lowercase(), s.sweep_variable, s.grid, s.figure);
            }
        }
        Command::Serve { .. } => unreachable!("handled above"),
    }
    Ok(ExitCode::SUCCESS)
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt().with_env_filter(tracing_subscriber::EnvFilter::from_env("IRSLOC_LOG")).with_writer(std::io::stderr).init();
    match run(Cli::parse()).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
