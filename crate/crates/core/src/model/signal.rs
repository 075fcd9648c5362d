use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::geometry::GeometryParams;
use super::scene::SceneConfig;
use super::steering::steering_vector;
use super::streams::{SensingStreams, TOL_RANK};
use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, numerical_rank, svd, CMat, C64};
use crate::seed;

pub const FRACTIONAL_TAPS: usize = 32;
const HALF: usize = FRACTIONAL_TAPS / 2 - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankClass {
    Full,
    Intermediate,
    RankOne,
}

impl RankClass {
    pub fn of(rank: usize, n: usize) -> Self {
        if rank >= n {
            RankClass::Full
        } else if rank > 1 {
            RankClass::Intermediate
        } else {
            RankClass::RankOne
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    /// Windowed-sinc fractional delays instead of rounding to the grid.
    pub fractional_delay: bool,
    pub noise: bool,
    /// Extra zero samples appended after the longest delayed frame.
    pub margin: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { fractional_delay: false, noise: true, margin: 16 }
    }
}

#[derive(Debug, Clone)]
pub struct ReceivedSignal {
    /// M x T samples.
    pub samples: CMat,
    pub sample_rate: f64,
    pub time_origin: f64,
    /// Some delay was rounded to the sample grid.
    pub off_grid: bool,
}

pub fn fractional_taps(mu: f64) -> [f64; FRACTIONAL_TAPS] {
    let c = HALF as f64 + mu;
    let mut h = [0.0; FRACTIONAL_TAPS];
    for (i, v) in h.iter_mut().enumerate() {
        let x = i as f64 - c;
        let sinc = if x.abs() < 1e-12 { 1.0 } else { (PI * x).sin() / (PI * x) };
        let w = if x.abs() < 16.0 { 0.5 * (1.0 + (PI * x / 16.0).cos()) } else { 0.0 };
        *v = sinc * w;
    }
    h
}

/// Delay the rows of `x` by `delay` samples.
///
/// Returns the index of the first output sample and the delayed rows. Integer
/// delays are exact shifts; fractional parts go through a 32-tap windowed sinc.
pub fn delay_rows(x: &CMat, delay: f64) -> (isize, CMat) {
    let n0 = delay.floor();
    let mu = delay - n0;
    let n0 = n0 as isize;
    if mu.abs() < 1e-12 {
        return (n0, x.clone());
    }
    let h = fractional_taps(mu);
    let (rows, len) = x.shape();
    let out_len = len + FRACTIONAL_TAPS - 1;
    let mut out = CMat::zeros(rows, out_len);
    for r in 0..rows {
        for t in 0..out_len {
            let mut acc = C64::new(0.0, 0.0);
            for (i, &hi) in h.iter().enumerate() {
                if t >= i && t - i < len {
                    acc += x[(r, t - i)] * hi;
                }
            }
            out[(r, t)] = acc;
        }
    }
    (n0 - HALF as isize, out)
}

/// Add `block` into columns of `dst` starting at `start`, clipping at both ends.
pub(crate) fn accumulate(dst: &mut CMat, start: isize, block: &CMat, scale: &CMat) {
    let t_total = dst.ncols() as isize;
    for c in 0..block.ncols() {
        let t = start + c as isize;
        if t < 0 || t >= t_total {
            continue;
        }
        let t = t as usize;
        for r in 0..dst.nrows() {
            let mut acc = C64::new(0.0, 0.0);
            for q in 0..block.nrows() {
                acc += scale[(r, q)] * block[(q, c)];
            }
            dst[(r, t)] += acc;
        }
    }
}

/// Samples needed to hold every delayed frame.
pub fn total_samples(scene: &SceneConfig, geom: &GeometryParams, opts: &SynthesisOptions) -> usize {
    let k = scene.k();
    let mut max_lag: f64 = 0.0;
    for l in 0..k {
        for kk in 0..k {
            max_lag = max_lag.max(geom.total_delay(l, kk) * scene.bandwidth);
        }
    }
    scene.frame_length + max_lag.ceil() as usize + FRACTIONAL_TAPS + opts.margin
}

/// Reflected waveform of IRS k toward the target: a(theta_k)^H Theta_k H_k X (1 x L).
pub fn reflected_waveform(scene: &SceneConfig, geom: &GeometryParams, streams: &SensingStreams, k: usize) -> Result<CMat> {
    let irs = &scene.irs[k];
    let a = steering_vector(geom.angle[k], irs.n_elements, scene.element_spacing_ratio)?;
    let theta = irs.reflection();
    let row = CMat::from_fn(1, irs.n_elements, |_, n| a[n].conj() * theta[n]);
    Ok(row * &streams.channels[k] * streams.transmit())
}

pub fn synthesize_received(
    scene: &SceneConfig,
    streams: &SensingStreams,
    geom: &GeometryParams,
    opts: &SynthesisOptions,
) -> Result<Vec<ReceivedSignal>> {
    let k = scene.k();
    let fs = scene.bandwidth;
    let total = total_samples(scene, geom, opts);
    let waves = (0..k).map(|i| reflected_waveform(scene, geom, streams, i)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(k);
    for l in 0..k {
        let m = scene.irs[l].n_sensors;
        let ar = steering_vector(geom.angle[l], m, scene.element_spacing_ratio)?;
        let mut r = CMat::zeros(m, total);
        let mut off_grid = false;
        for kk in 0..k {
            let lag = geom.total_delay(l, kk) * fs;
            let lag = if opts.fractional_delay {
                lag
            } else {
                let rounded = lag.round();
                if (lag - rounded).abs() > 1e-6 {
                    off_grid = true;
                }
                rounded
            };
            let (start, block) = delay_rows(&waves[kk], lag);
            let scale = CMat::from_fn(m, 1, |i, _| ar[i] * geom.gain(l, kk));
            accumulate(&mut r, start, &block, &scale);
        }
        if opts.noise {
            let mut rng = seed::rng(scene.seed, &[seed::tag::NOISE, l as u64]);
            r += complex_gaussian(&mut rng, m, total, scene.noise_of(l));
        }
        out.push(ReceivedSignal { samples: r, sample_rate: fs, time_origin: 0.0, off_grid });
    }
    Ok(out)
}

/// S_k = Theta_k H_k W_k (N x rows) and its rank class.
pub fn effective_signal(scene: &SceneConfig, k: usize, streams: &SensingStreams) -> Result<(CMat, RankClass)> {
    let theta = scene.irs[k].reflection();
    let mut s = &streams.channels[k] * &streams.w[k];
    for (n, t) in theta.iter().enumerate() {
        let mut row = s.row_mut(n);
        row *= *t;
    }
    let rank = numerical_rank(&svd(&s).s, TOL_RANK);
    let top = s.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if rank == 0 || top == 0.0 {
        return Err(Error::ZeroSignal(k));
    }
    Ok((s, RankClass::of(rank, scene.irs[k].n_elements)))
}
