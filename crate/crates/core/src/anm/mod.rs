//! Joint AOA/AOD estimation from cascade observations: atomic-norm ADMM per
//! rank class, trust-region departure-angle refinement and angle fusion.

pub mod admm;
pub mod readout;
pub mod toeplitz;
pub mod trust;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use admm::{admm_solve, admm_solve_scaled, AdmmHyper, AdmmItem, AdmmSolution, SecondBlock, TraceRow};
pub use readout::{angle_from_toeplitz, steering_match, ToeplitzAngle};
pub use toeplitz::{toeplitz, toeplitz_adjoint, toeplitz_weights};
pub use trust::{aod_initial_guess, aod_objective, refine_aod, trust_region_aod, AodInit, TrustHyper, TrustOutcome};

use crate::delay::CascadeObservation;
use crate::error::{Error, Result};
use crate::fisher::FimAngle;
use crate::linalg::{svd, CMat, CVec, C64};
use crate::model::{steering_vector, wrap_angle, RankClass, SceneConfig};

/// Condition number of S S^H above which the full-rank inverse is refused.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AngleHyper {
    pub admm: AdmmHyper,
    pub trust: TrustHyper,
}

/// Right-multiplied observation that carries only the angle structure.
#[derive(Debug, Clone)]
pub struct PreparedTarget {
    pub target: CMat,
    pub block: SecondBlock,
    pub weight: f64,
}

impl PreparedTarget {
    pub fn item(&self) -> AdmmItem {
        AdmmItem { target: self.target.clone(), weight: self.weight, block: self.block }
    }
}

fn full_rank_inverse(s: &CMat) -> Result<CMat> {
    let gram = s * s.adjoint();
    let sv = svd(&gram).s;
    let cond = sv[0] / sv.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let inv = gram.try_inverse().ok_or_else(|| Error::Singular("S S^H".into()))?;
    Ok(s.adjoint() * inv)
}

/// AOA-side target: R S^+ (full rank), R V Sigma^-1 (intermediate) or R v1 / s1 (rank one).
pub fn prepare_aoa(obs: &CascadeObservation) -> Result<PreparedTarget> {
    let (target, block) = match obs.rank {
        RankClass::Full => (&obs.r * full_rank_inverse(&obs.s)?, SecondBlock::Toeplitz),
        RankClass::Intermediate | RankClass::RankOne => {
            let d = svd(&obs.s);
            let r = if obs.rank == RankClass::RankOne { 1 } else { crate::linalg::numerical_rank(&d.s, crate::model::TOL_RANK) };
            // S = U diag(s) V^H, so (diag(s) V^H)^+ = V diag(1/s).
            let right = CMat::from_fn(obs.s.ncols(), r, |i, j| d.v[(i, j)] / d.s[j]);
            (&obs.r * right, SecondBlock::Dense)
        }
    };
    Ok(PreparedTarget { target, block, weight: obs.energy })
}

/// AOD-side target for a full-rank pair: (R S^+)^H, so the shared block has size N.
pub fn prepare_aod(obs: &CascadeObservation) -> Result<PreparedTarget> {
    if obs.rank != RankClass::Full {
        return Err(Error::Domain(format!("pair {:?}: joint AOD needs a full-rank effective signal", obs.pair)));
    }
    let y = &obs.r * full_rank_inverse(&obs.s)?;
    Ok(PreparedTarget { target: y.adjoint(), block: SecondBlock::Toeplitz, weight: obs.energy })
}

fn require(obs: &[&CascadeObservation], class: RankClass) -> Result<()> {
    for o in obs {
        if o.rank != class {
            return Err(Error::Domain(format!("pair {:?} has rank class {:?}, expected {:?}", o.pair, o.rank, class)));
        }
    }
    Ok(())
}

fn strict(sol: AdmmSolution) -> Result<AdmmSolution> {
    if sol.converged {
        Ok(sol)
    } else {
        Err(Error::NoConvergence { iterations: sol.iterations, residual: sol.dx.max(sol.dz) })
    }
}

fn solve_batch(targets: &[PreparedTarget], hyper: &AdmmHyper) -> Result<AdmmSolution> {
    let items: Vec<AdmmItem> = targets.iter().map(PreparedTarget::item).collect();
    admm_solve_scaled(&items, hyper)
}

/// AOA batch where every effective signal has full row rank.
pub fn admm_joint_full_rank(obs: &[&CascadeObservation], hyper: &AdmmHyper) -> Result<AdmmSolution> {
    require(obs, RankClass::Full)?;
    let t = obs.iter().map(|o| prepare_aoa(o)).collect::<Result<Vec<_>>>()?;
    strict(solve_batch(&t, hyper)?)
}

/// AOA batch with intermediate-rank effective signals (dense second blocks).
pub fn admm_joint_reduced_rank(obs: &[&CascadeObservation], hyper: &AdmmHyper) -> Result<AdmmSolution> {
    require(obs, RankClass::Intermediate)?;
    let t = obs.iter().map(|o| prepare_aoa(o)).collect::<Result<Vec<_>>>()?;
    strict(solve_batch(&t, hyper)?)
}

/// AOA batch with rank-one effective signals (scalar second blocks).
pub fn admm_rank1(obs: &[&CascadeObservation], hyper: &AdmmHyper) -> Result<AdmmSolution> {
    require(obs, RankClass::RankOne)?;
    let t = obs.iter().map(|o| prepare_aoa(o)).collect::<Result<Vec<_>>>()?;
    strict(solve_batch(&t, hyper)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleDiagnostics {
    pub aoa_iterations: usize,
    pub aoa_residual: f64,
    pub aoa_converged: bool,
    pub aod_iterations: Option<usize>,
    pub aod_residual: Option<f64>,
    pub aod_converged: Option<bool>,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePairEstimate {
    pub irs: usize,
    pub theta_aoa: f64,
    pub theta_aod: Option<f64>,
    pub theta_fused: f64,
    /// (AOA, AOD) weights, summing to 1.
    pub weights: (f64, f64),
    pub diagnostics: Option<AngleDiagnostics>,
}

/// Information-weighted mean of the two angle reads.
///
/// Bearings are line directions, so the departure read is moved to the branch
/// nearest the arrival read before averaging and the result is folded back.
pub fn fuse_angles(irs: usize, theta_aoa: f64, theta_aod: Option<f64>, info_aoa: f64, info_aod: f64) -> AnglePairEstimate {
    let (weights, fused) = match theta_aod {
        Some(d) => {
            let wa = if info_aoa + info_aod > 0.0 { info_aoa / (info_aoa + info_aod) } else { 0.5 };
            let near = theta_aoa + wrap_angle(d - theta_aoa);
            ((wa, 1.0 - wa), wrap_angle(wa * theta_aoa + (1.0 - wa) * near))
        }
        None => ((1.0, 0.0), theta_aoa),
    };
    AnglePairEstimate { irs, theta_aoa, theta_aod, theta_fused: fused, weights, diagnostics: None }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "kebab-case")]
pub enum AngleStatus {
    Ok,
    /// An ADMM batch hit its iteration limit; the last iterate was used.
    NotConverged,
    Failed(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IrsAngles {
    pub irs: usize,
    pub status: AngleStatus,
    pub estimate: Option<AnglePairEstimate>,
    /// Per-iteration trace of the AOA batch when requested.
    pub trace: Vec<TraceRow>,
}

struct SideRead {
    theta: f64,
    iterations: usize,
    residual: f64,
    converged: bool,
    low_confidence: bool,
    trace: Vec<TraceRow>,
}

fn batch<'a>(obs: &'a [CascadeObservation], pick: impl Fn(&CascadeObservation) -> bool) -> Vec<&'a CascadeObservation> {
    let mut b: Vec<&CascadeObservation> = obs.iter().filter(|o| pick(o)).collect();
    b.sort_by_key(|o| o.pair);
    b
}

fn aoa_read(obs: &[&CascadeObservation], spacing: f64, hyper: &AdmmHyper) -> Result<SideRead> {
    let t = obs.iter().map(|o| prepare_aoa(o)).collect::<Result<Vec<_>>>()?;
    let sol = solve_batch(&t, hyper)?;
    let read = angle_from_toeplitz(&sol.v, spacing)?;
    Ok(SideRead {
        theta: read.theta,
        iterations: sol.iterations,
        residual: sol.primal_residual,
        converged: sol.converged,
        low_confidence: read.low_confidence,
        trace: sol.trace,
    })
}

fn aod_full(obs: &[&CascadeObservation], spacing: f64, hyper: &AdmmHyper) -> Result<SideRead> {
    let t = obs.iter().map(|o| prepare_aod(o)).collect::<Result<Vec<_>>>()?;
    let sol = solve_batch(&t, hyper)?;
    let read = angle_from_toeplitz(&sol.v, spacing)?;
    Ok(SideRead {
        theta: read.theta,
        iterations: sol.iterations,
        residual: sol.primal_residual,
        converged: sol.converged,
        low_confidence: read.low_confidence,
        trace: sol.trace,
    })
}

/// Per-observation trust-region reads combined with energy weights.
fn aod_trust(obs: &[&CascadeObservation], aoa: &[Option<f64>], spacing: f64, hyper: &TrustHyper) -> Result<SideRead> {
    let mut acc = 0.0;
    let mut wsum = 0.0;
    let mut iterations = 0;
    let mut residual: f64 = 0.0;
    for o in obs {
        let Some(theta_l) = aoa[o.pair.0] else { continue };
        let m = o.r.nrows();
        let a_hat = steering_vector(theta_l, m, spacing)?;
        let r: CVec = o.r.adjoint() * &a_hat / C64::new(m as f64, 0.0);
        let init = aod_initial_guess(&r, &o.s, spacing, hyper.scan_points)?;
        let (out, _) = refine_aod(&r, &o.s, &init, spacing, hyper)?;
        acc += o.energy * out.theta;
        wsum += o.energy;
        iterations += out.iterations;
        residual = residual.max(out.objective);
    }
    if !(wsum > 0.0) {
        return Err(Error::Domain("no receive-side angle available for AOD refinement".into()));
    }
    Ok(SideRead { theta: acc / wsum, iterations, residual, converged: true, low_confidence: false, trace: Vec::new() })
}

/// AOA and AOD for every IRS from the K^2 observations, fused per IRS.
pub fn estimate_all_angles(obs: &[CascadeObservation], scene: &SceneConfig, info: &FimAngle, hyper: &AngleHyper) -> Vec<IrsAngles> {
    let k = scene.k();
    let sp = scene.element_spacing_ratio;
    let aoa: Vec<Result<SideRead>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let b = batch(obs, |o| o.pair.0 == i);
            if b.is_empty() {
                return Err(Error::Shape(format!("no observations received at IRS {i}")));
            }
            aoa_read(&b, sp, &hyper.admm)
        })
        .collect();
    let aoa_theta: Vec<Option<f64>> = aoa.iter().map(|r| r.as_ref().ok().map(|s| s.theta)).collect();
    let aod: Vec<Option<Result<SideRead>>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let b = batch(obs, |o| o.pair.1 == i);
            let class = b.first().map(|o| o.rank)?;
            match class {
                RankClass::Full => Some(aod_full(&b, sp, &hyper.admm)),
                RankClass::Intermediate => Some(aod_trust(&b, &aoa_theta, sp, &hyper.trust)),
                RankClass::RankOne => None,
            }
        })
        .collect();
    aoa.into_iter()
        .zip(aod)
        .enumerate()
        .map(|(i, (a, d))| {
            let (ia, id) = (info.aoa.get(i).copied().unwrap_or(0.0), info.aod.get(i).copied().unwrap_or(0.0));
            let d = match d {
                Some(Ok(s)) => Some(s),
                // A failed departure read leaves the arrival read alone.
                _ => None,
            };
            let (est, converged, trace) = match (a, d) {
                (Ok(a), d) => {
                    let mut e = fuse_angles(i, a.theta, d.as_ref().map(|s| s.theta), ia, id);
                    let conv = a.converged && d.as_ref().is_none_or(|s| s.converged);
                    e.diagnostics = Some(AngleDiagnostics {
                        aoa_iterations: a.iterations,
                        aoa_residual: a.residual,
                        aoa_converged: a.converged,
                        aod_iterations: d.as_ref().map(|s| s.iterations),
                        aod_residual: d.as_ref().map(|s| s.residual),
                        aod_converged: d.as_ref().map(|s| s.converged),
                        low_confidence: a.low_confidence || d.as_ref().is_some_and(|s| s.low_confidence),
                    });
                    (e, conv, a.trace)
                }
                (Err(e), _) => {
                    return IrsAngles { irs: i, status: AngleStatus::Failed(e.to_string()), estimate: None, trace: Vec::new() };
                }
            };
            let status = if converged { AngleStatus::Ok } else { AngleStatus::NotConverged };
            IrsAngles { irs: i, status, estimate: Some(est), trace }
        })
        .collect()
}
