//! Files written by the commands. All writers create the directory first and
//! attach the path to any I/O error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use irsloc_core::api::{AnglesResponse, CrbResponse, ExperimentResponse, LocalizeResponse};
use irsloc_core::bench::{figure_caption, manifest, plot_series, write_csv, ExperimentSpec};
use serde::Serialize;

/// Recorded in every run manifest: how the stream design spends the power budget.
pub const POWER_NOTE: &str =
    "transmit power: average power over the frame equals the configured tx_power, split equally across the IRS stream blocks";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).with_context(|| format!("writing {}", path.display()))?;
    writeln!(w)?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn write_records<S: Serialize>(path: &Path, rows: impl IntoIterator<Item = S>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(create(path)?);
    for r in rows {
        wr.serialize(r).with_context(|| format!("writing {}", path.display()))?;
    }
    wr.flush().with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct RunManifest<'a> {
    spec: &'a ExperimentSpec,
    figure: &'a str,
    empty_points: &'a [f64],
    notes: [&'a str; 1],
}

#[derive(Serialize)]
struct TimingRow<'a> {
    scenario: &'a str,
    sweep_value: f64,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct TraceCsvRow {
    sweep_index: usize,
    trial: usize,
    irs: usize,
    iteration: usize,
    objective: f64,
    primal_residual: f64,
    dx: f64,
    dz: f64,
    min_eig: f64,
}

/// results.csv, timing.csv, plotdata/*.dat with manifest.tsv, run.json, and traces.csv when traced.
pub fn write_experiment(dir: &Path, resp: &ExperimentResponse) -> Result<()> {
    let results = dir.join("results.csv");
    write_csv(&resp.rows, create(&results)?).with_context(|| format!("writing {}", results.display()))?;

    let mut timing: Vec<TimingRow> = Vec::new();
    for r in &resp.rows {
        if timing.last().map(|t| t.sweep_value) != Some(r.sweep_value) {
            timing.push(TimingRow { scenario: &r.scenario, sweep_value: r.sweep_value, wall_time_s: r.wall_time_s });
        }
    }
    write_records(&dir.join("timing.csv"), timing)?;

    let plot_dir = dir.join("plotdata");
    let series = plot_series(&resp.rows);
    for s in &series {
        let p = plot_dir.join(&s.file_name);
        let mut w = create(&p)?;
        w.write_all(s.render().as_bytes()).with_context(|| format!("writing {}", p.display()))?;
        w.flush()?;
    }
    let m = plot_dir.join("manifest.tsv");
    let mut w = create(&m)?;
    w.write_all(manifest(&series, resp.spec.sweep.axis_label()).as_bytes()).with_context(|| format!("writing {}", m.display()))?;
    w.flush()?;

    if resp.spec.trace {
        let rows = resp.traces.iter().flat_map(|t| {
            t.rows.iter().map(move |r| TraceCsvRow {
                sweep_index: t.sweep_index,
                trial: t.trial,
                irs: t.irs,
                iteration: r.iteration,
                objective: r.objective,
                primal_residual: r.primal_residual,
                dx: r.dx,
                dz: r.dz,
                min_eig: r.min_eig,
            })
        });
        write_records(&dir.join("traces.csv"), rows)?;
    }

    let figure = figure_caption(resp.spec.scenario.name()).0;
    write_json(&dir.join("run.json"), &RunManifest { spec: &resp.spec, figure, empty_points: &resp.empty_points, notes: [POWER_NOTE] })
}

#[derive(Serialize)]
struct CrbCsvRow<'a> {
    scheme: &'a str,
    k: usize,
    n: usize,
    m: usize,
    target_x: f64,
    target_y: f64,
    crb_location_m2: f64,
    crb_location_db: f64,
    singular_trials: usize,
}

/// crb.csv (one row per scheme) and crb.json.
pub fn write_crb(dir: &Path, resp: &CrbResponse) -> Result<()> {
    let rows = resp.entries.iter().map(|e| CrbCsvRow {
        scheme: &e.scheme,
        k: e.k,
        n: e.n,
        m: e.m,
        target_x: e.target[0],
        target_y: e.target[1],
        crb_location_m2: e.crb_location,
        crb_location_db: e.crb_location_db,
        singular_trials: usize::from(e.error.is_some()),
    });
    write_records(&dir.join("crb.csv"), rows)?;
    write_json(&dir.join("crb.json"), resp)
}

#[derive(Serialize)]
struct AngleCsvRow {
    irs: usize,
    status: String,
    true_angle: f64,
    aoa: Option<f64>,
    aod: Option<f64>,
    fused: Option<f64>,
    angle_crb: f64,
}

#[derive(Serialize)]
struct DelayCsvRow {
    l: usize,
    k: usize,
    true_delay_s: f64,
    tau_hat_s: f64,
    grid_index: usize,
    refined: bool,
}

/// angles.csv, delays.csv (waveform pipeline only) and angles.json.
pub fn write_angles(dir: &Path, resp: &AnglesResponse) -> Result<()> {
    let k = resp.true_angles.len();
    let rows = resp.angles.iter().map(|a| AngleCsvRow {
        irs: a.irs,
        status: serde_json::to_value(&a.status).ok().and_then(|v| v.get("status").and_then(|s| s.as_str()).map(String::from)).unwrap_or_default(),
        true_angle: resp.true_angles[a.irs],
        aoa: a.estimate.map(|e| e.theta_aoa),
        aod: a.estimate.and_then(|e| e.theta_aod),
        fused: a.estimate.map(|e| e.theta_fused),
        angle_crb: resp.angle_crb[a.irs],
    });
    write_records(&dir.join("angles.csv"), rows)?;
    if !resp.delays.is_empty() {
        let rows = resp.delays.iter().map(|d| DelayCsvRow {
            l: d.pair.0,
            k: d.pair.1,
            true_delay_s: resp.true_cascade_delays[d.pair.0 * k + d.pair.1],
            tau_hat_s: d.tau_hat,
            grid_index: d.grid_index,
            refined: d.refined,
        });
        write_records(&dir.join("delays.csv"), rows)?;
    }
    write_json(&dir.join("angles.json"), resp)
}

#[derive(Serialize)]
struct LocalizeCsvRow<'a> {
    method: &'a str,
    x: Option<f64>,
    y: Option<f64>,
    error_m: Option<f64>,
    failure: Option<String>,
}

/// localize.csv and localize.json.
pub fn write_localize(dir: &Path, resp: &LocalizeResponse) -> Result<()> {
    let rows = resp.results.iter().map(|r| LocalizeCsvRow {
        method: &r.method,
        x: r.estimate.as_ref().map(|e| e.position[0]),
        y: r.estimate.as_ref().map(|e| e.position[1]),
        error_m: r.error_m,
        failure: r.error.as_ref().map(|e| e.to_string()),
    });
    write_records(&dir.join("localize.csv"), rows)?;
    write_json(&dir.join("localize.json"), resp)
}
