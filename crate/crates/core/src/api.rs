//! Request and response bodies of the HTTP interface, with the synchronous
//! handlers behind them. The service wraps these; the client and CLI reuse the types.

use serde::{Deserialize, Serialize};

use crate::anm::{estimate_all_angles, AngleHyper, IrsAngles};
use crate::bench::{figure_caption, run_experiment, ExperimentSpec, ResultRow, ScenarioId, TraceRecord, Workload};
use crate::delay::{estimate_all_delays, ideal_observations, DelayEstimate};
use crate::error::{Error, Result};
use crate::fisher::{angle_crb, scene_fims, scheme_crb, Scheme};
use crate::localize::{localize, HybridMeasurements, LocationEstimate, Method};
use crate::model::{synthesize_received, Point, SceneConfig, SynthesisOptions};
use crate::seed;

/// f64 fields that may be NaN or infinite travel as JSON null.
pub mod float_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

pub mod floats_or_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| x.is_finite().then_some(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

/// Error body returned with every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub kind: String,
    pub message: String,
}

impl ApiError {
    /// HTTP status for a library error: bad input 400, unknown preset 404, numerical failure 422.
    pub fn status(&self) -> u16 {
        match self.kind.as_str() {
            "config" | "parse" | "shape" | "domain" => 400,
            "unknown-preset" => 404,
            "internal" => 500,
            _ => 422,
        }
    }
}

impl From<&Error> for ApiError {
    fn from(e: &Error) -> Self {
        let kind = match e {
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::DegenerateGeometry(_) => "degenerate-geometry",
            Error::Infeasible(_) => "infeasible",
            Error::ZeroSignal(_) => "zero-signal",
            Error::SingularFim { .. } => "singular-fim",
            Error::AllSingular => "all-singular",
            Error::WindowBoundary(_) => "window-boundary",
            Error::IllConditioned(_) => "ill-conditioned",
            Error::NoConvergence { .. } => "no-convergence",
            Error::Shape(_) => "shape",
            Error::Singular(_) => "singular",
            Error::UnknownPreset(_) => "unknown-preset",
            Error::Parse(_) => "parse",
        };
        ApiError { kind: kind.into(), message: e.to_string() }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::from(&e)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", self.message, self.kind)
    }
}

impl std::error::Error for ApiError {}

/// Missing scene means the simulation defaults; phases are drawn where absent.
fn resolve_scene(scene: Option<SceneConfig>) -> Result<SceneConfig> {
    let mut s = scene.unwrap_or_else(SceneConfig::table1);
    s.fill_missing_phases();
    s.validate()?;
    Ok(s)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CrbRequest {
    pub scene: Option<SceneConfig>,
    /// Empty means every scheme.
    pub schemes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbEntry {
    pub scheme: String,
    pub k: usize,
    /// Elements and sensors of the first IRS.
    pub n: usize,
    pub m: usize,
    pub target: Point,
    #[serde(with = "float_or_null")]
    pub crb_location: f64,
    #[serde(with = "float_or_null")]
    pub crb_location_db: f64,
    pub fim_location: Option<[[f64; 2]; 2]>,
    /// Set when the location information is singular or the scheme failed.
    pub error: Option<ApiError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbResponse {
    pub entries: Vec<CrbEntry>,
    #[serde(with = "floats_or_null")]
    pub angle_crb: Vec<f64>,
}

fn schemes_or_all(names: &[String]) -> Result<Vec<Scheme>> {
    if names.is_empty() {
        Ok(Scheme::ALL.to_vec())
    } else {
        names.iter().map(|s| Scheme::parse(s)).collect()
    }
}

pub fn crb(req: CrbRequest) -> Result<CrbResponse> {
    let scene = resolve_scene(req.scene)?;
    let schemes = schemes_or_all(&req.schemes)?;
    let (_, _, _, fa) = scene_fims(&scene)?;
    let entries = schemes
        .into_iter()
        .map(|scheme| {
            let base = CrbEntry {
                scheme: scheme.name().into(),
                k: scene.k(),
                n: scene.irs[0].n_elements,
                m: scene.irs[0].n_sensors,
                target: scene.target_position,
                crb_location: f64::NAN,
                crb_location_db: f64::NAN,
                fim_location: None,
                error: None,
            };
            match scheme_crb(&scene, scheme) {
                Ok(r) => {
                    let f = r.fim_location;
                    CrbEntry {
                        crb_location: r.crb_location,
                        crb_location_db: crate::bench::to_db(r.crb_location),
                        fim_location: Some([[f[(0, 0)], f[(0, 1)]], [f[(1, 0)], f[(1, 1)]]]),
                        ..base
                    }
                }
                Err(e) => CrbEntry { error: Some(e.into()), ..base },
            }
        })
        .collect();
    Ok(CrbResponse { entries, angle_crb: angle_crb(&fa) })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AnglesRequest {
    pub scene: Option<SceneConfig>,
    /// Skip waveform synthesis and matched filtering; draw observations from the model.
    pub ideal: bool,
    /// Noise seed for ideal observations; the scene seed when absent.
    pub noise_seed: Option<u64>,
    /// Waveform synthesis settings when not ideal.
    pub synthesis: SynthesisOptions,
    pub hyper: AngleHyper,
    pub trace: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnglesResponse {
    /// Empty for ideal observations.
    pub delays: Vec<DelayEstimate>,
    pub true_cascade_delays: Vec<f64>,
    pub angles: Vec<IrsAngles>,
    pub true_angles: Vec<f64>,
    #[serde(with = "floats_or_null")]
    pub angle_crb: Vec<f64>,
}

pub fn angles(req: AnglesRequest) -> Result<AnglesResponse> {
    let scene = resolve_scene(req.scene)?;
    let (geom, streams, _, fa) = scene_fims(&scene)?;
    let (delays, obs) = if req.ideal {
        let noise_seed = req.noise_seed.unwrap_or_else(|| seed::derive(scene.seed, &[seed::tag::MEASUREMENT]));
        (Vec::new(), ideal_observations(&scene, &geom, &streams, true, noise_seed)?)
    } else {
        let rx = synthesize_received(&scene, &streams, &geom, &req.synthesis)?;
        estimate_all_delays(&scene, &geom, &streams, &rx, true)?
    };
    let mut hyper = req.hyper;
    hyper.admm.trace = req.trace;
    let angles = estimate_all_angles(&obs, &scene, &fa, &hyper);
    Ok(AnglesResponse {
        delays,
        true_cascade_delays: geom.cascade_delays(),
        angles,
        true_angles: geom.angle.clone(),
        angle_crb: angle_crb(&fa),
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizeRequest {
    pub scene: Option<SceneConfig>,
    /// Empty means every method.
    pub methods: Vec<String>,
    /// Supplied measurements; otherwise the exact ones with bound covariances.
    pub measurements: Option<HybridMeasurements>,
    /// Perturb the measurements at their covariances with this seed.
    pub perturb_seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub estimate: Option<LocationEstimate>,
    /// Distance to the scene's target in meters.
    pub error_m: Option<f64>,
    pub error: Option<ApiError>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizeResponse {
    pub truth: Point,
    #[serde(with = "float_or_null")]
    pub crb_location: f64,
    pub measurements: HybridMeasurements,
    pub results: Vec<MethodResult>,
}

pub fn localize_scene(req: LocalizeRequest) -> Result<LocalizeResponse> {
    let scene = resolve_scene(req.scene)?;
    let methods: Vec<Method> = if req.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        req.methods.iter().map(|m| Method::parse(m)).collect::<Result<_>>()?
    };
    let (geom, _, fd, fa) = scene_fims(&scene)?;
    let mut meas = match req.measurements {
        Some(m) => m,
        None => HybridMeasurements::exact(&geom, &fd, &fa)?,
    };
    meas.validate()?;
    if let Some(s) = req.perturb_seed {
        meas = meas.perturbed(&mut seed::rng(s, &[seed::tag::MEASUREMENT]));
    }
    let crb_location = scheme_crb(&scene, Scheme::CollaborativeHybrid).map(|r| r.crb_location).unwrap_or(f64::NAN);
    let truth = scene.target_position;
    let results = methods
        .into_iter()
        .map(|m| match localize(&meas, &scene, m) {
            Ok(e) => MethodResult { method: m.name().into(), error_m: Some(e.error(truth)), estimate: Some(e), error: None },
            Err(e) => MethodResult { method: m.name().into(), estimate: None, error_m: None, error: Some(e.into()) },
        })
        .collect();
    Ok(LocalizeResponse { truth, crb_location, measurements: meas, results })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentRequest {
    /// Preset id; ignored when `spec` is given.
    pub scenario: String,
    pub n_trials: Option<usize>,
    pub seed: Option<u64>,
    pub schemes: Option<Vec<String>>,
    pub grid: Option<Vec<f64>>,
    pub full_pipeline: bool,
    pub trace: bool,
    /// Complete spec for custom experiments.
    pub spec: Option<ExperimentSpec>,
}

impl ExperimentRequest {
    pub fn preset(scenario: &str) -> Self {
        ExperimentRequest { scenario: scenario.into(), ..Default::default() }
    }

    /// Spec after overrides; validated.
    pub fn resolve(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.spec {
            Some(s) => s.clone(),
            None => ExperimentSpec::preset(ScenarioId::parse(&self.scenario)?)?,
        };
        if let Some(n) = self.n_trials {
            spec.n_trials = n;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(s) = &self.schemes {
            spec.schemes = s.clone();
        }
        if let Some(g) = &self.grid {
            spec.grid = g.clone();
        }
        spec.full_pipeline |= self.full_pipeline;
        spec.trace |= self.trace;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResponse {
    pub spec: ExperimentSpec,
    pub rows: Vec<ResultRow>,
    pub traces: Vec<TraceRecord>,
    /// Sweep values where no trial succeeded.
    pub empty_points: Vec<f64>,
}

pub fn experiment(req: ExperimentRequest) -> Result<ExperimentResponse> {
    let spec = req.resolve()?;
    let out = run_experiment(&spec)?;
    let empty_points = out.empty_points();
    Ok(ExperimentResponse { spec, rows: out.rows, traces: out.traces, empty_points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub id: String,
    pub figure: String,
    pub workload: Workload,
    pub sweep_variable: String,
    pub grid: Vec<f64>,
    pub schemes: Vec<String>,
    pub n_trials: usize,
}

pub fn scenarios() -> Vec<ScenarioInfo> {
    ScenarioId::PRESETS
        .iter()
        .filter_map(|&id| ExperimentSpec::preset(id).ok())
        .map(|s| ScenarioInfo {
            id: s.scenario.name().into(),
            figure: figure_caption(s.scenario.name()).0.into(),
            workload: s.workload,
            sweep_variable: s.sweep.name().into(),
            grid: s.grid,
            schemes: s.schemes,
            n_trials: s.n_trials,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crb_defaults_cover_every_scheme() {
        let r = crb(CrbRequest::default()).unwrap();
        assert_eq!(r.entries.len(), Scheme::ALL.len());
        assert!(r.entries.iter().all(|e| e.crb_location > 0.0 && e.error.is_none()));
        assert_eq!(r.angle_crb.len(), 3);
    }

    #[test]
    fn localize_exact_returns_truth() {
        let r = localize_scene(LocalizeRequest::default()).unwrap();
        for m in &r.results {
            assert!(m.error_m.unwrap() < 1e-9, "{}: {:?}", m.method, m.error_m);
        }
    }

    #[test]
    fn request_overrides_and_errors() {
        let mut req = ExperimentRequest::preset("fig3");
        req.n_trials = Some(3);
        req.grid = Some(vec![8.0]);
        let spec = req.resolve().unwrap();
        assert_eq!((spec.n_trials, spec.grid.len()), (3, 1));
        let e: ApiError = ExperimentRequest::preset("fig9").resolve().unwrap_err().into();
        assert_eq!(e.status(), 404);
        req.n_trials = Some(0);
        let e: ApiError = req.resolve().unwrap_err().into();
        assert_eq!((e.kind.as_str(), e.status()), ("config", 400));
    }
}
