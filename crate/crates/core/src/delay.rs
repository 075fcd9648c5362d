//! Matched-filter cascade-delay estimation and per-pair observation extraction.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, fro2, CMat, C64};
use crate::model::signal::{accumulate, FRACTIONAL_TAPS};
use crate::model::{
    delay_rows, effective_signal, fractional_taps, steering_vector, GeometryParams, RankClass, ReceivedSignal, SceneConfig, SensingStreams,
    SPEED_OF_LIGHT,
};
use crate::optim::brent_max;
use crate::seed;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub pair: (usize, usize),
    /// Cascade delay estimate in seconds (BS-to-IRS leg removed).
    pub tau_hat: f64,
    pub peak_metric: f64,
    /// Peak on the total-lag sample grid.
    pub grid_index: usize,
    pub refined: bool,
    /// Sub-sample shift applied by refinement.
    pub shift: f64,
}

/// Inclusive range of total-lag grid indices to search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagWindow {
    pub start: usize,
    pub end: usize,
}

fn correlate_int(r: &CMat, x: &CMat, lag: isize) -> CMat {
    let mut c = CMat::zeros(r.nrows(), x.nrows());
    let total = r.ncols() as isize;
    for t in 0..x.ncols() {
        let idx = lag + t as isize;
        if idx < 0 || idx >= total {
            continue;
        }
        let col = r.column(idx as usize);
        for q in 0..x.nrows() {
            let w = x[(q, t)].conj();
            for m in 0..r.nrows() {
                c[(m, q)] += col[m] * w;
            }
        }
    }
    c
}

/// Matched-filter outputs R_l X_k^H(t - lag), with integer-lag results cached.
///
/// A fractional lag is the windowed-sinc combination of neighbouring integer
/// lags, identical to correlating against a fractionally delayed template.
pub struct Correlator<'a> {
    r: &'a CMat,
    x: &'a CMat,
    cache: HashMap<isize, CMat>,
}

impl<'a> Correlator<'a> {
    pub fn new(r: &'a CMat, x: &'a CMat) -> Self {
        Correlator { r, x, cache: HashMap::new() }
    }

    fn int(&mut self, lag: isize) -> &CMat {
        let (r, x) = (self.r, self.x);
        self.cache.entry(lag).or_insert_with(|| correlate_int(r, x, lag))
    }

    pub fn at(&mut self, lag: f64) -> CMat {
        let n0 = lag.floor();
        let mu = lag - n0;
        let n0 = n0 as isize;
        if mu.abs() < 1e-12 {
            return self.int(n0).clone();
        }
        let h = fractional_taps(mu);
        let mut c = CMat::zeros(self.r.nrows(), self.x.nrows());
        let base = n0 - (FRACTIONAL_TAPS / 2 - 1) as isize;
        for (i, &hi) in h.iter().enumerate() {
            c += self.int(base + i as isize) * C64::new(hi, 0.0);
        }
        c
    }

    pub fn metric2(&mut self, lag: f64) -> f64 {
        fro2(&self.at(lag))
    }
}

/// Matched-filter output at a (possibly fractional) total lag.
pub fn correlate(r: &CMat, x: &CMat, lag: f64) -> CMat {
    Correlator::new(r, x).at(lag)
}

/// Squared Frobenius matched-filter metric.
pub fn metric2(r: &CMat, x: &CMat, lag: f64) -> f64 {
    fro2(&correlate(r, x, lag))
}

/// Lag window covering every target inside the scene's bounding box enlarged by 20 %.
pub fn search_window(scene: &SceneConfig, geom: &GeometryParams, l: usize, k: usize) -> LagWindow {
    let mut pts = vec![scene.bs_position, scene.target_position];
    pts.extend(scene.irs.iter().map(|i| i.position));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &pts {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let (mx, my) = (0.2 * (x1 - x0).max(1.0), 0.2 * (y1 - y0).max(1.0));
    let corners = [[x0 - mx, y0 - my], [x0 - mx, y1 + my], [x1 + mx, y0 - my], [x1 + mx, y1 + my]];
    let far = |i: usize| {
        let p = scene.irs[i].position;
        corners.iter().map(|c| (c[0] - p[0]).hypot(c[1] - p[1])).fold(0.0, f64::max)
    };
    let fs = scene.bandwidth;
    let lo = geom.bs_delay[k] * fs;
    let hi = (geom.bs_delay[k] + (far(l) + far(k)) / SPEED_OF_LIGHT) * fs;
    LagWindow { start: (lo.floor() as usize).saturating_sub(2), end: hi.ceil() as usize + 2 }
}

/// Safeguarded parabolic interpolation of the squared metric within half a sample of the grid peak.
fn refine_peak(corr: &mut Correlator, n: usize, m0: f64) -> (f64, f64) {
    let c = n as f64;
    let (lag, m) = brent_max(|t| corr.metric2(t), c - 0.5, c + 0.5, 1e-9, 100);
    if m >= m0 {
        (lag - c, m)
    } else {
        (0.0, m0)
    }
}

pub fn matched_filter_delay(
    r: &ReceivedSignal,
    x: &CMat,
    tau_b2i: f64,
    window: LagWindow,
    refine: bool,
    pair: (usize, usize),
) -> Result<DelayEstimate> {
    let last = r.samples.ncols().saturating_sub(1);
    let end = window.end.min(last);
    if window.start > end {
        return Err(Error::Shape("empty lag window".into()));
    }
    let mut corr = Correlator::new(&r.samples, x);
    let mut best = (window.start, -1.0);
    for n in window.start..=end {
        let m = corr.metric2(n as f64);
        if m > best.1 {
            best = (n, m);
        }
    }
    let (n, m0) = best;
    if (n == window.start && window.start > 0) || (n == end && end > window.start) {
        return Err(Error::WindowBoundary(n));
    }
    let (shift, peak) = if refine { refine_peak(&mut corr, n, m0) } else { (0.0, m0) };
    let lag = n as f64 + shift;
    let tau_hat = (lag / r.sample_rate - tau_b2i).max(0.0);
    Ok(DelayEstimate { pair, tau_hat, peak_metric: peak.sqrt(), grid_index: n, refined: refine, shift })
}

/// Matched-filter output of one (l, k) pair with the effective signal it carries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CascadeObservation {
    pub pair: (usize, usize),
    /// M_l x rows
    pub r: CMat,
    /// N_k x rows
    pub s: CMat,
    pub rank: RankClass,
    pub energy: f64,
}

impl CascadeObservation {
    pub fn new(pair: (usize, usize), r: CMat, s: CMat, rank: RankClass) -> Self {
        let energy = fro2(&r);
        CascadeObservation { pair, r, s, rank, energy }
    }
}

pub fn extract_observation(
    r: &ReceivedSignal,
    x: &CMat,
    est: &DelayEstimate,
    s: &CMat,
    rank: RankClass,
) -> CascadeObservation {
    let lag = est.grid_index as f64 + est.shift;
    CascadeObservation::new(est.pair, correlate(&r.samples, x, lag), s.clone(), rank)
}

/// Post-matched-filter observations synthesized directly from the model:
/// alpha a(theta_l) a(theta_k)^H S_k plus white noise of the sensor variance.
pub fn ideal_observations(
    scene: &SceneConfig,
    geom: &GeometryParams,
    streams: &SensingStreams,
    noise: bool,
    noise_seed: u64,
) -> Result<Vec<CascadeObservation>> {
    let k = scene.k();
    let sp = scene.element_spacing_ratio;
    let eff = (0..k).map(|i| effective_signal(scene, i, streams)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(k * k);
    for l in 0..k {
        let ar = steering_vector(geom.angle[l], scene.irs[l].n_sensors, sp)?;
        for kk in 0..k {
            let at = steering_vector(geom.angle[kk], scene.irs[kk].n_elements, sp)?;
            let (s, class) = &eff[kk];
            let mut r = (&ar * (at.adjoint() * s)) * C64::new(geom.gain(l, kk), 0.0);
            if noise {
                let mut rng = seed::rng(noise_seed, &[seed::tag::MEASUREMENT, l as u64, kk as u64]);
                r += complex_gaussian(&mut rng, r.nrows(), r.ncols(), scene.noise_of(l));
            }
            out.push(CascadeObservation::new((l, kk), r, s.clone(), *class));
        }
    }
    Ok(out)
}

/// Coordinate sweeps used by [`estimate_all_delays`].
pub const CANCELLATION_SWEEPS: usize = 4;

/// Delay estimates and observations for every pair from sampled received signals.
pub fn estimate_all_delays(
    scene: &SceneConfig,
    geom: &GeometryParams,
    streams: &SensingStreams,
    received: &[ReceivedSignal],
    refine: bool,
) -> Result<(Vec<DelayEstimate>, Vec<CascadeObservation>)> {
    estimate_all_delays_with(scene, geom, streams, received, refine, CANCELLATION_SWEEPS)
}

/// Stream delayed by `lag` samples on a frame of `total` samples.
fn placed(x: &CMat, lag: f64, total: usize) -> CMat {
    let (start, block) = delay_rows(x, lag);
    let mut out = CMat::zeros(x.nrows(), total);
    accumulate(&mut out, start, &block, &CMat::identity(x.nrows(), x.nrows()));
    out
}

/// Gram of a stream truncated to the frame at integer lag `n`.
fn gram_at(x: &CMat, n: usize, total: usize, full: &CMat) -> CMat {
    if n + x.ncols() <= total {
        return full.clone();
    }
    let keep = total.saturating_sub(n);
    let v = x.columns(0, keep);
    &v * v.adjoint()
}

/// Least-squares fit metric of stream `x` at integer lag `n` once the row
/// space `q` (T x r, orthonormal columns) of the other streams is projected
/// out. Reduces to the squared Frobenius matched filter with no others.
fn projected_metric(corr: &mut Correlator, q_corr: &mut Option<(Correlator, CMat)>, x: &CMat, n: usize, total: usize, gram: &CMat) -> f64 {
    let mut c = corr.int(n as isize).clone();
    let mut g = gram_at(x, n, total, gram);
    if let Some((qc, rq)) = q_corr.as_mut() {
        let xq = qc.int(n as isize).adjoint();
        c -= &*rq * xq.adjoint();
        g -= &xq * xq.adjoint();
    }
    let scale = g.trace().re / g.nrows() as f64;
    for i in 0..g.nrows() {
        g[(i, i)] += C64::new(1e-10 * scale.max(f64::MIN_POSITIVE), 0.0);
    }
    match g.cholesky() {
        Some(ch) => {
            let sol = ch.solve(&c.adjoint());
            (c * sol).trace().re.max(0.0)
        }
        None => 0.0,
    }
}

/// Like [`estimate_all_delays`], with a chosen number of coordinate sweeps.
///
/// Streams are orthogonal only at equal lag, so at Table-I sizes each pair
/// sees strong sidelobes of the other streams. Each sweep re-picks one pair's
/// lag at a time by the least-squares fit after projecting out the other
/// streams at their current lags, strongest pair first. Observations are
/// taken from the received signal with the jointly fitted contributions of
/// the other streams removed. Zero sweeps is the plain matched filter.
pub fn estimate_all_delays_with(
    scene: &SceneConfig,
    geom: &GeometryParams,
    streams: &SensingStreams,
    received: &[ReceivedSignal],
    refine: bool,
    sweeps: usize,
) -> Result<(Vec<DelayEstimate>, Vec<CascadeObservation>)> {
    let k = scene.k();
    let eff = (0..k).map(|i| effective_signal(scene, i, streams)).collect::<Result<Vec<_>>>()?;
    let mut ests = Vec::with_capacity(k * k);
    let mut obs = Vec::with_capacity(k * k);
    if sweeps == 0 || k == 1 {
        for l in 0..k {
            for kk in 0..k {
                let w = search_window(scene, geom, l, kk);
                let e = matched_filter_delay(&received[l], &streams.x[kk], geom.bs_delay[kk], w, refine, (l, kk))?;
                obs.push(extract_observation(&received[l], &streams.x[kk], &e, &eff[kk].0, eff[kk].1));
                ests.push(e);
            }
        }
        return Ok((ests, obs));
    }
    let grams: Vec<CMat> = streams.x.iter().map(|x| x * x.adjoint()).collect();
    let per_irs = |l: usize| -> Result<Vec<(DelayEstimate, CascadeObservation)>> {
        let r = &received[l];
        let mut out = Vec::with_capacity(k);
        let total = r.samples.ncols();
        let windows: Vec<LagWindow> = (0..k)
            .map(|kk| {
                let w = search_window(scene, geom, l, kk);
                LagWindow { start: w.start, end: w.end.min(total - 1) }
            })
            .collect();
        let mut corrs: Vec<Correlator> = streams.x.iter().map(|x| Correlator::new(&r.samples, x)).collect();
        let mut lags: Vec<usize> = Vec::with_capacity(k);
        let mut peaks: Vec<f64> = Vec::with_capacity(k);
        for kk in 0..k {
            let w = windows[kk];
            let (n, m) = (w.start..=w.end)
                .map(|n| (n, corrs[kk].metric2(n as f64)))
                .fold((w.start, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            lags.push(n);
            peaks.push(m);
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| peaks[b].total_cmp(&peaks[a]));
        // Greedy placement, strongest first, then coordinate sweeps.
        let mut placed_set: Vec<usize> = Vec::with_capacity(k);
        for &kk in &order {
            lags[kk] = best_projected_lag(r, streams, &lags, &placed_set, kk, windows[kk], &mut corrs[kk], &grams[kk]).0;
            placed_set.push(kk);
        }
        for _ in 0..sweeps {
            let mut changed = false;
            for &kk in &order {
                let others: Vec<usize> = (0..k).filter(|&j| j != kk).collect();
                let (n, m) = best_projected_lag(r, streams, &lags, &others, kk, windows[kk], &mut corrs[kk], &grams[kk]);
                if n != lags[kk] {
                    lags[kk] = n;
                    changed = true;
                }
                peaks[kk] = m;
            }
            if !changed {
                break;
            }
        }
        for kk in 0..k {
            let w = windows[kk];
            let n = lags[kk];
            if (n == w.start && w.start > 0) || (n == w.end && w.end > w.start) {
                return Err(Error::WindowBoundary(n));
            }
        }
        // Joint least-squares gains at the chosen lags.
        let all: Vec<CMat> = (0..k).map(|j| placed(&streams.x[j], lags[j] as f64, total)).collect();
        let z = stack_rows(&all);
        let zz = &z * z.adjoint();
        let gains = match zz.clone().cholesky() {
            Some(ch) => ch.solve(&(&z * r.samples.adjoint())).adjoint(),
            None => return Err(Error::Singular("stacked delayed streams".into())),
        };
        let mut offset = 0;
        let fitted: Vec<CMat> = all
            .iter()
            .map(|p| {
                let rows = p.nrows();
                let f = gains.columns(offset, rows) * p;
                offset += rows;
                f
            })
            .collect();
        let sum: CMat = fitted.iter().fold(CMat::zeros(r.samples.nrows(), total), |acc, f| acc + f);
        for kk in 0..k {
            let mut clean = r.clone();
            clean.samples -= &sum - &fitted[kk];
            let x = &streams.x[kk];
            let mut corr = Correlator::new(&clean.samples, x);
            let n = lags[kk];
            let m0 = corr.metric2(n as f64);
            let (shift, peak) = if refine { refine_peak(&mut corr, n, m0) } else { (0.0, m0) };
            let tau_hat = ((n as f64 + shift) / r.sample_rate - geom.bs_delay[kk]).max(0.0);
            let e = DelayEstimate { pair: (l, kk), tau_hat, peak_metric: peak.sqrt(), grid_index: n, refined: refine, shift };
            out.push((e, extract_observation(&clean, x, &e, &eff[kk].0, eff[kk].1)));
        }
        Ok(out)
    };
    let parts = (0..k).into_par_iter().map(per_irs).collect::<Result<Vec<_>>>()?;
    let (ests, obs) = parts.into_iter().flatten().unzip();
    Ok((ests, obs))
}

/// Best grid lag for stream `kk` with the streams in `others` projected out at their lags.
#[allow(clippy::too_many_arguments)]
fn best_projected_lag(
    r: &ReceivedSignal,
    streams: &SensingStreams,
    lags: &[usize],
    others: &[usize],
    kk: usize,
    w: LagWindow,
    corr: &mut Correlator,
    gram: &CMat,
) -> (usize, f64) {
    let total = r.samples.ncols();
    let x = &streams.x[kk];
    let qh;
    let mut qc = if others.is_empty() {
        None
    } else {
        let blocks: Vec<CMat> = others.iter().map(|&j| placed(&streams.x[j], lags[j] as f64, total)).collect();
        let q = stack_rows(&blocks).adjoint().qr().q();
        let rq = &r.samples * &q;
        qh = q.adjoint();
        Some((Correlator::new(&qh, x), rq))
    };
    let mut best = (w.start, -1.0);
    for n in w.start..=w.end {
        let m = projected_metric(corr, &mut qc, x, n, total, gram);
        if m > best.1 {
            best = (n, m);
        }
    }
    best
}

fn stack_rows(blocks: &[CMat]) -> CMat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks[0].ncols();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.rows_mut(at, b.nrows()).copy_from(b);
        at += b.nrows();
    }
    out
}

/// Post-matched-filter SNR of every pair in (l, k) order: noiseless energy of
/// R_l X_k^H at the true lag over the expected noise energy at one lag.
pub fn pair_snr(scene: &SceneConfig, geom: &GeometryParams, streams: &SensingStreams) -> Result<Vec<f64>> {
    let k = scene.k();
    let sp = scene.element_spacing_ratio;
    let mut out = Vec::with_capacity(k * k);
    for l in 0..k {
        let m = scene.irs[l].n_sensors as f64;
        for kk in 0..k {
            let (s, _) = effective_signal(scene, kk, streams)?;
            let x = &streams.x[kk];
            let gram = x * x.adjoint();
            let at = steering_vector(geom.angle[kk], scene.irs[kk].n_elements, sp)?;
            let sig = geom.gain(l, kk).powi(2) * m * fro2(&(at.adjoint() * s * &gram));
            let noise = m * gram.trace().re * scene.noise_of(l);
            out.push(sig / noise);
        }
    }
    Ok(out)
}

/// Metric against lag over a window, for debugging dumps.
pub fn metric_profile(r: &ReceivedSignal, x: &CMat, window: LagWindow) -> Vec<(usize, f64)> {
    let end = window.end.min(r.samples.ncols().saturating_sub(1));
    let mut corr = Correlator::new(&r.samples, x);
    (window.start..=end).map(|n| (n, corr.metric2(n as f64).sqrt())).collect()
}
