//! Seeded Monte Carlo experiments over scenario presets.
//!
//! Every trial draws from `seed::rng(master, [sweep index, trial, tag])`, so
//! any subset of trials reproduces in isolation and the thread count never
//! changes a result. Rows are aggregated in sweep, scheme order after all
//! trials of a point finish.

pub mod output;

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anm::{estimate_all_angles, AngleHyper, TraceRow};
use crate::delay::{estimate_all_delays, ideal_observations, CascadeObservation};
use crate::error::{Error, Result};
use crate::fisher::{angle_crb, average_crb, scene_fims, trial_scene, Region, Scheme};
use crate::localize::{localize, HybridMeasurements, Method};
use crate::model::{dbm_to_watts, synthesize_received, wrap_angle, PathSpec, SceneConfig, SynthesisOptions};
use crate::seed;

pub use output::{figure_caption, manifest, plot_series, read_csv, write_csv, PlotSeries, CSV_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Custom,
}

impl ScenarioId {
    pub const PRESETS: [ScenarioId; 6] =
        [ScenarioId::Fig3, ScenarioId::Fig4, ScenarioId::Fig5, ScenarioId::Fig6, ScenarioId::Fig7, ScenarioId::Fig8];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Fig3 => "fig3",
            ScenarioId::Fig4 => "fig4",
            ScenarioId::Fig5 => "fig5",
            ScenarioId::Fig6 => "fig6",
            ScenarioId::Fig7 => "fig7",
            ScenarioId::Fig8 => "fig8",
            ScenarioId::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ScenarioId::PRESETS
            .into_iter()
            .chain([ScenarioId::Custom])
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    /// Reflecting elements per IRS.
    Elements,
    /// Sensors per IRS.
    Sensors,
    /// Radius of the target disc around the first IRS, meters.
    Radius,
    TxPowerDbm,
    /// Abscissa of the first two IRSs, meters.
    IrsAbscissa,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Elements => "elements",
            SweepVariable::Sensors => "sensors",
            SweepVariable::Radius => "radius",
            SweepVariable::TxPowerDbm => "tx-power-dbm",
            SweepVariable::IrsAbscissa => "irs-abscissa",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [Self::Elements, Self::Sensors, Self::Radius, Self::TxPowerDbm, Self::IrsAbscissa]
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown sweep variable `{s}`")))
    }

    pub fn axis_label(self) -> &'static str {
        match self {
            SweepVariable::Elements => "reflecting elements N",
            SweepVariable::Sensors => "sensors M",
            SweepVariable::Radius => "coverage radius r (m)",
            SweepVariable::TxPowerDbm => "BS transmit power (dBm)",
            SweepVariable::IrsAbscissa => "IRS abscissa d (m)",
        }
    }
}

/// What a scenario measures at each sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Workload {
    /// Average location bound per scheme.
    Crb,
    /// Angle estimation error per IRS against the angle bound.
    Angles,
    /// Localization error per method against the location bound.
    Localization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "custom_id")]
    pub scenario: ScenarioId,
    pub workload: Workload,
    #[serde(default = "SceneConfig::table1")]
    pub template: SceneConfig,
    #[serde(default = "Region::table1")]
    pub region: Region,
    pub sweep: SweepVariable,
    pub grid: Vec<f64>,
    /// Scheme, method or angle-read names, depending on the workload.
    pub schemes: Vec<String>,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Estimate from synthesized waveforms instead of bound-level draws.
    #[serde(default)]
    pub full_pipeline: bool,
    /// Keep ADMM traces of the first trial at each sweep point.
    #[serde(default)]
    pub trace: bool,
    /// Adds well-conditioned scatter paths so every effective signal is full rank.
    #[serde(default)]
    pub full_rank_channels: bool,
    #[serde(default)]
    pub angle_hyper: AngleHyper,
}

fn custom_id() -> ScenarioId {
    ScenarioId::Custom
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_seed() -> u64 {
    1
}

/// Experiment spec from TOML; omitted fields take the simulation defaults.
pub fn spec_from_toml_str(text: &str) -> Result<ExperimentSpec> {
    let mut spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    spec.template.fill_missing_phases();
    spec.validate()?;
    Ok(spec)
}

pub const DEFAULT_TRIALS: usize = 100;

pub const ANGLE_READS: [&str; 4] = ["fused", "aoa", "aod", "crb"];

impl ExperimentSpec {
    pub fn preset(id: ScenarioId) -> Result<Self> {
        let all_schemes = || Scheme::ALL.iter().map(|s| s.name().to_string()).collect::<Vec<_>>();
        let methods = || Method::ALL.iter().map(|m| m.name().to_string()).chain(["crb".to_string()]).collect::<Vec<_>>();
        let base = ExperimentSpec {
            scenario: id,
            workload: Workload::Crb,
            template: SceneConfig::table1(),
            region: Region::table1(),
            sweep: SweepVariable::Elements,
            grid: vec![],
            schemes: all_schemes(),
            n_trials: DEFAULT_TRIALS,
            seed: 1,
            full_pipeline: false,
            trace: false,
            full_rank_channels: false,
            angle_hyper: AngleHyper::default(),
        };
        Ok(match id {
            ScenarioId::Fig3 => ExperimentSpec { grid: vec![8.0, 16.0, 32.0, 64.0], ..base },
            ScenarioId::Fig4 => ExperimentSpec { sweep: SweepVariable::Sensors, grid: vec![4.0, 8.0, 16.0, 32.0], ..base },
            ScenarioId::Fig5 => ExperimentSpec {
                sweep: SweepVariable::Radius,
                grid: vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
                schemes: vec![Scheme::CollaborativeHybrid.name().into(), Scheme::SingleIrs.name().into()],
                ..base
            },
            ScenarioId::Fig6 => ExperimentSpec {
                workload: Workload::Angles,
                sweep: SweepVariable::TxPowerDbm,
                grid: vec![40.0, 45.0, 50.0, 55.0, 60.0],
                schemes: ANGLE_READS.iter().map(|s| s.to_string()).collect(),
                full_rank_channels: true,
                ..base
            },
            ScenarioId::Fig7 => ExperimentSpec {
                workload: Workload::Localization,
                sweep: SweepVariable::TxPowerDbm,
                grid: vec![30.0, 40.0, 50.0, 60.0],
                schemes: methods(),
                ..base
            },
            ScenarioId::Fig8 => ExperimentSpec {
                workload: Workload::Localization,
                sweep: SweepVariable::IrsAbscissa,
                grid: vec![5.0, 10.0, 20.0, 30.0, 40.0],
                schemes: methods(),
                ..base
            },
            ScenarioId::Custom => return Err(Error::UnknownPreset("custom has no preset; supply a spec".into())),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        let up = self.grid.windows(2).all(|w| w[1] > w[0]);
        let down = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) || self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep grid must be finite and strictly monotone".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("no schemes requested".into()));
        }
        for s in &self.schemes {
            match self.workload {
                Workload::Crb => drop(Scheme::parse(s)?),
                Workload::Localization if s != "crb" => drop(Method::parse(s)?),
                Workload::Angles if !ANGLE_READS.contains(&s.as_str()) => {
                    return Err(Error::Parse(format!("unknown angle read `{s}`")))
                }
                _ => {}
            }
        }
        if self.full_pipeline && self.workload == Workload::Crb {
            return Err(Error::Config("full-pipeline estimation needs an angle or localization workload".into()));
        }
        self.template.validate()
    }

    /// Template and target region at one sweep value.
    pub fn point(&self, value: f64) -> Result<(SceneConfig, Region)> {
        let mut s = self.template.clone();
        let mut region = self.region;
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("{} must be a positive integer, got {value}", self.sweep.name())))
            }
        };
        match self.sweep {
            SweepVariable::Elements => s = s.with_elements(count()?),
            SweepVariable::Sensors => s = s.with_sensors(count()?),
            SweepVariable::Radius => {
                if !(value > 0.0) {
                    return Err(Error::Config("radius must be positive".into()));
                }
                region = Region::Disc { center: s.irs[0].position, radius: value };
            }
            SweepVariable::TxPowerDbm => s.tx_power = dbm_to_watts(value),
            SweepVariable::IrsAbscissa => {
                for irs in s.irs.iter_mut().take(2) {
                    irs.position[0] = value;
                }
            }
        }
        if self.full_rank_channels {
            add_full_rank_paths(&mut s);
        }
        Ok((s, region))
    }
}

/// One scatter path per reflecting element with orthogonal arrival steering
/// and distinct departure bins per IRS, each as strong as the line of sight.
pub fn add_full_rank_paths(scene: &mut SceneConfig) {
    let nt = scene.n_tx as f64;
    let k_total = scene.k();
    let bs = scene.bs_position;
    let lambda = scene.wavelength;
    for (k, irs) in scene.irs.iter_mut().enumerate() {
        let d = (irs.position[0] - bs[0]).hypot(irs.position[1] - bs[1]);
        let gain = lambda / (4.0 * PI * d);
        let n = irs.n_elements;
        irs.scatter_paths = (0..n)
            .map(|p| {
                let aoa = (-1.0 + (2.0 * p as f64 + 1.0) / n as f64).asin();
                let bin = (k_total * p + k) as f64;
                let sin_d = (-0.9 + 2.0 * bin / nt).clamp(-1.0, 1.0);
                PathSpec { gain, aoa, aod: sin_d.asin() }
            })
            .collect();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub sweep_variable: String,
    pub sweep_value: f64,
    pub scheme: String,
    /// crb_location, mse_location, mse_angle or crb_angle.
    pub metric: String,
    #[serde(with = "crate::api::float_or_null")]
    pub value: f64,
    #[serde(with = "crate::api::float_or_null")]
    pub value_db: f64,
    /// Standard error of the mean over successful trials (0 for a single success).
    #[serde(with = "crate::api::float_or_null")]
    pub std_error: f64,
    pub trials: usize,
    pub failed: usize,
    /// Wall-clock seconds for the whole sweep point; left out of the CSV.
    #[serde(default)]
    pub wall_time_s: f64,
}

pub fn to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub sweep_index: usize,
    pub trial: usize,
    pub irs: usize,
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub traces: Vec<TraceRecord>,
}

impl ExperimentOutput {
    /// Sweep points with no successful trial in any row.
    pub fn empty_points(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self.rows.iter().map(|r| r.sweep_value).collect();
        values.dedup();
        values.into_iter().filter(|v| !self.rows.iter().any(|r| r.sweep_value == *v && r.trials > r.failed)).collect()
    }
}

fn row(spec: &ExperimentSpec, value: f64, scheme: &str, metric: &str, stats: Stats, trials: usize, wall: f64) -> ResultRow {
    let Stats { mean, std_error, failed } = stats;
    ResultRow {
        scenario: spec.scenario.name().into(),
        sweep_variable: spec.sweep.name().into(),
        sweep_value: value,
        scheme: scheme.into(),
        metric: metric.into(),
        value: mean,
        value_db: to_db(mean),
        std_error,
        trials,
        failed,
        wall_time_s: wall,
    }
}

#[derive(Debug, Clone, Copy)]
struct Stats {
    mean: f64,
    std_error: f64,
    failed: usize,
}

/// Mean and standard error of the successful samples; NaN when there are none.
fn mean_of(samples: &[Option<f64>]) -> Stats {
    let ok: Vec<f64> = samples.iter().flatten().copied().collect();
    let failed = samples.len() - ok.len();
    let n = ok.len() as f64;
    if ok.is_empty() {
        return Stats { mean: f64::NAN, std_error: f64::NAN, failed };
    }
    let mean = ok.iter().sum::<f64>() / n;
    let std_error = if ok.len() < 2 {
        0.0
    } else {
        (ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    };
    Stats { mean, std_error, failed }
}

/// Observations of one trial: bound-level model draws or the waveform pipeline.
fn trial_observations(scene: &SceneConfig, full: bool, noise_seed: u64) -> Result<Vec<CascadeObservation>> {
    let (geom, streams, _, _) = scene_fims(scene)?;
    if full {
        let rx = synthesize_received(scene, &streams, &geom, &SynthesisOptions::default())?;
        Ok(estimate_all_delays(scene, &geom, &streams, &rx, true)?.1)
    } else {
        ideal_observations(scene, &geom, &streams, true, noise_seed)
    }
}

struct AngleTrial {
    /// Squared wrapped errors per IRS for fused, aoa, aod reads.
    err: [Vec<Option<f64>>; 3],
    crb: Vec<f64>,
    traces: Vec<(usize, Vec<TraceRow>)>,
}

fn angle_trial(spec: &ExperimentSpec, scene: &SceneConfig, trial_seed: u64, keep_trace: bool) -> Result<AngleTrial> {
    let (geom, _, _, fa) = scene_fims(scene)?;
    let obs = trial_observations(scene, spec.full_pipeline, trial_seed)?;
    let mut hyper = spec.angle_hyper;
    hyper.admm.trace = keep_trace;
    let out = estimate_all_angles(&obs, scene, &fa, &hyper);
    let mut err: [Vec<Option<f64>>; 3] = Default::default();
    let mut traces = Vec::new();
    for r in &out {
        let truth = geom.angle[r.irs];
        let e = r.estimate.as_ref();
        err[0].push(e.map(|e| wrap_angle(e.theta_fused - truth).powi(2)));
        err[1].push(e.map(|e| wrap_angle(e.theta_aoa - truth).powi(2)));
        err[2].push(e.and_then(|e| e.theta_aod).map(|d| wrap_angle(d - truth).powi(2)));
        if keep_trace {
            traces.push((r.irs, r.trace.clone()));
        }
    }
    Ok(AngleTrial { err, crb: angle_crb(&fa), traces })
}

fn localization_trial(spec: &ExperimentSpec, scene: &SceneConfig, trial_seed: u64) -> Result<(Vec<Option<f64>>, f64)> {
    let (geom, _, fd, fa) = scene_fims(scene)?;
    let crb = crate::fisher::scheme_crb(scene, Scheme::CollaborativeHybrid)?.crb_location;
    let exact = HybridMeasurements::exact(&geom, &fd, &fa)?;
    let meas = if spec.full_pipeline {
        let (geom, streams, _, _) = scene_fims(scene)?;
        let rx = synthesize_received(scene, &streams, &geom, &SynthesisOptions::default())?;
        let (delays, obs) = estimate_all_delays(scene, &geom, &streams, &rx, true)?;
        let angles = estimate_all_angles(&obs, scene, &fa, &spec.angle_hyper);
        let mut m = exact.clone();
        for d in &delays {
            m.tau_hat[d.pair.0 * scene.k() + d.pair.1] = d.tau_hat;
        }
        for a in &angles {
            let e = a.estimate.as_ref().ok_or_else(|| Error::Domain(format!("no angle at IRS {}", a.irs)))?;
            m.theta_hat[a.irs] = e.theta_fused;
        }
        m
    } else {
        exact.perturbed(&mut seed::rng(trial_seed, &[seed::tag::MEASUREMENT]))
    };
    let truth = scene.target_position;
    let methods: Vec<Method> = spec.schemes.iter().filter(|s| *s != "crb").map(|s| Method::parse(s)).collect::<Result<_>>()?;
    let errs = methods.iter().map(|&m| localize(&meas, scene, m).ok().map(|e| e.error(truth).powi(2))).collect();
    Ok((errs, crb))
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let mut out = ExperimentOutput::default();
    for (si, &value) in spec.grid.iter().enumerate() {
        let start = Instant::now();
        let (template, region) = spec.point(value)?;
        let point_seed = seed::derive(spec.seed, &[si as u64]);
        let mut point_rows = Vec::new();
        match spec.workload {
            Workload::Crb => {
                for name in &spec.schemes {
                    let scheme = Scheme::parse(name)?;
                    let stats = match average_crb(&template, &region, spec.n_trials, point_seed, scheme) {
                        Ok(a) => mean_of(&a.per_trial),
                        Err(Error::AllSingular) => mean_of(&vec![None; spec.n_trials]),
                        Err(e) => return Err(e),
                    };
                    point_rows.push((name.clone(), "crb_location", stats));
                }
            }
            Workload::Angles => {
                let trials: Vec<Result<AngleTrial>> = (0..spec.n_trials)
                    .into_par_iter()
                    .map(|t| {
                        let scene = trial_scene(&template, &region, point_seed, t as u64);
                        angle_trial(spec, &scene, seed::derive(point_seed, &[t as u64]), spec.trace && t == 0)
                    })
                    .collect();
                let mut per: [Vec<Option<f64>>; 4] = Default::default();
                for (t, tr) in trials.into_iter().enumerate() {
                    match tr {
                        Ok(tr) => {
                            // Per-trial average over IRSs; a failed IRS fails the trial.
                            for (j, e) in tr.err.iter().enumerate() {
                                let all: Option<Vec<f64>> = e.iter().copied().collect();
                                per[j].push(all.map(|v| v.iter().sum::<f64>() / v.len() as f64));
                            }
                            per[3].push(Some(tr.crb.iter().sum::<f64>() / tr.crb.len() as f64));
                            for (irs, rows) in tr.traces {
                                out.traces.push(TraceRecord { sweep_index: si, trial: t, irs, rows });
                            }
                        }
                        Err(_) => per.iter_mut().for_each(|p| p.push(None)),
                    }
                }
                for name in &spec.schemes {
                    let j = ANGLE_READS.iter().position(|r| r == name).expect("validated");
                    point_rows.push((name.clone(), if name == "crb" { "crb_angle" } else { "mse_angle" }, mean_of(&per[j])));
                }
            }
            Workload::Localization => {
                let trials: Vec<Result<(Vec<Option<f64>>, f64)>> = (0..spec.n_trials)
                    .into_par_iter()
                    .map(|t| {
                        let scene = trial_scene(&template, &region, point_seed, t as u64);
                        localization_trial(spec, &scene, seed::derive(point_seed, &[t as u64]))
                    })
                    .collect();
                let methods: Vec<&String> = spec.schemes.iter().filter(|s| *s != "crb").collect();
                let mut per: Vec<Vec<Option<f64>>> = vec![Vec::new(); methods.len() + 1];
                for tr in trials {
                    match tr {
                        Ok((errs, crb)) => {
                            for (j, e) in errs.into_iter().enumerate() {
                                per[j].push(e);
                            }
                            per[methods.len()].push(Some(crb));
                        }
                        Err(_) => per.iter_mut().for_each(|p| p.push(None)),
                    }
                }
                for name in &spec.schemes {
                    if name == "crb" {
                        point_rows.push((name.clone(), "crb_location", mean_of(&per[methods.len()])));
                    } else {
                        let j = methods.iter().position(|m| *m == name).expect("listed");
                        point_rows.push((name.clone(), "mse_location", mean_of(&per[j])));
                    }
                }
            }
        }
        let wall = start.elapsed().as_secs_f64();
        for (name, metric, stats) in point_rows {
            out.rows.push(row(spec, value, &name, metric, stats, spec.n_trials, wall));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(id: ScenarioId, trials: usize) -> ExperimentSpec {
        let mut s = ExperimentSpec::preset(id).unwrap();
        s.n_trials = trials;
        s
    }

    #[test]
    fn presets_validate() {
        for id in ScenarioId::PRESETS {
            ExperimentSpec::preset(id).unwrap().validate().unwrap();
        }
        assert!(matches!(ExperimentSpec::preset(ScenarioId::Custom), Err(Error::UnknownPreset(_))));
        assert!(matches!(ScenarioId::parse("fig9"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn bad_specs_rejected() {
        let mut s = small(ScenarioId::Fig3, 2);
        s.grid = vec![8.0, 8.0];
        assert!(s.validate().is_err());
        s.grid = vec![];
        assert!(s.validate().is_err());
        let mut s = small(ScenarioId::Fig3, 0);
        assert!(s.validate().is_err());
        s.n_trials = 1;
        s.schemes = vec!["three-stage".into()];
        assert!(s.validate().is_err());
    }

    #[test]
    fn rows_are_consistent() {
        let mut s = small(ScenarioId::Fig7, 8);
        s.grid = vec![40.0, 50.0];
        let out = run_experiment(&s).unwrap();
        assert_eq!(out.rows.len(), 2 * 5);
        for r in &out.rows {
            assert!((r.value_db - 10.0 * r.value.log10()).abs() < 1e-9);
            assert!(r.failed <= r.trials);
        }
        assert!(out.empty_points().is_empty());
    }

    #[test]
    fn custom_spec_from_toml() {
        let text = r#"
            workload = "localization"
            sweep = "irs-abscissa"
            grid = [10.0, 20.0]
            schemes = ["three-stage", "ls"]
            n_trials = 3
            [template]
            target_position = [4.0, 6.0]
        "#;
        let spec = spec_from_toml_str(text).unwrap();
        assert_eq!(spec.scenario, ScenarioId::Custom);
        assert_eq!(spec.region, Region::table1());
        assert_eq!(spec.template.irs.len(), 3);
        assert!(spec.template.irs.iter().all(|i| i.phase_profile.len() == i.n_elements));
        assert!(matches!(spec_from_toml_str("workload = \"crb\""), Err(Error::Parse(_))));
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.rows.len(), 4);
    }

    #[test]
    fn point_applies_sweep() {
        let s = small(ScenarioId::Fig8, 1);
        let (scene, _) = s.point(20.0).unwrap();
        assert_eq!(scene.irs[0].position[0], 20.0);
        assert_eq!(scene.irs[1].position[0], 20.0);
        assert_eq!(scene.irs[2].position[0], 50.0);
        let s = small(ScenarioId::Fig5, 1);
        let (_, region) = s.point(30.0).unwrap();
        assert_eq!(region, Region::Disc { center: [10.0, 50.0], radius: 30.0 });
        let s = small(ScenarioId::Fig3, 1);
        assert!(s.point(8.5).is_err());
    }

    #[test]
    fn full_rank_paths_give_full_rank_signals() {
        let mut s = SceneConfig::table1();
        add_full_rank_paths(&mut s);
        let st = crate::model::make_orthogonal_streams(&s).unwrap();
        for k in 0..3 {
            let (_, class) = crate::model::effective_signal(&s, k, &st).unwrap();
            assert_eq!(class, crate::model::RankClass::Full);
        }
    }
}
