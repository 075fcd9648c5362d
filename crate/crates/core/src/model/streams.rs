use std::f64::consts::PI;

use rustfft::FftPlanner;

use super::channel::scene_channel;
use super::scene::SceneConfig;
use crate::error::{Error, Result};
use crate::linalg::{null_space, random_unitary, svd, CMat, C64};
use crate::seed;

pub const TOL_RANK: f64 = 1e-8;

/// Mutually orthogonal sensing streams and their beamformers.
#[derive(Debug, Clone)]
pub struct SensingStreams {
    /// Rows per stream.
    pub rows: usize,
    /// X_k, rows x L with orthonormal rows.
    pub x: Vec<CMat>,
    /// Time derivative of X_k per second (spectral differentiation).
    pub x_dot: Vec<CMat>,
    /// W_k, N_t x rows.
    pub w: Vec<CMat>,
    /// BS-to-IRS channels the beamformers were designed for.
    pub channels: Vec<CMat>,
    /// True when rows < N_t because K * N_t exceeds L.
    pub reduced: bool,
    /// Per IRS: whether leakage into the other IRSs is nulled.
    pub zero_forcing: Vec<bool>,
}

/// Row-wise time derivative of a sampled band-limited signal.
pub fn spectral_derivative(x: &CMat, sample_rate: f64) -> CMat {
    let (rows, len) = x.shape();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut out = CMat::zeros(rows, len);
    let mut buf = vec![C64::new(0.0, 0.0); len];
    for r in 0..rows {
        for (t, b) in buf.iter_mut().enumerate() {
            *b = x[(r, t)];
        }
        fwd.process(&mut buf);
        for (m, b) in buf.iter_mut().enumerate() {
            let f = if 2 * m < len {
                m as f64
            } else if 2 * m == len {
                0.0
            } else {
                m as f64 - len as f64
            } * sample_rate
                / len as f64;
            *b *= C64::new(0.0, 2.0 * PI * f) / len as f64;
        }
        if len % 2 == 0 {
            buf[len / 2] = C64::new(0.0, 0.0);
        }
        inv.process(&mut buf);
        for (t, b) in buf.iter().enumerate() {
            out[(r, t)] = *b;
        }
    }
    out
}

pub fn make_orthogonal_streams(scene: &SceneConfig) -> Result<SensingStreams> {
    let k = scene.k();
    let l = scene.frame_length;
    let nt = scene.n_tx;
    let rows = if k * nt <= l {
        nt
    } else if scene.stream_reduction {
        l / k
    } else {
        return Err(Error::Infeasible(format!("{k} streams of {nt} rows exceed frame length {l}")));
    };
    if rows == 0 {
        return Err(Error::Infeasible(format!("frame length {l} too short for {k} streams")));
    }
    let mut rng = seed::rng(scene.seed, &[seed::tag::STREAMS]);
    let u = random_unitary(&mut rng, l);
    let x: Vec<CMat> = (0..k).map(|i| u.rows(i * rows, rows).into_owned()).collect();
    let x_dot = x.iter().map(|xi| spectral_derivative(xi, scene.bandwidth)).collect();

    let channels = (0..k).map(|i| scene_channel(scene, i)).collect::<Result<Vec<_>>>()?;
    let mut shapes = Vec::with_capacity(k);
    let mut zero_forcing = Vec::with_capacity(k);
    for i in 0..k {
        // Null space of the stacked channels of the other IRSs.
        let others: Vec<&CMat> = (0..k).filter(|&j| j != i).map(|j| &channels[j]).collect();
        let height: usize = others.iter().map(|h| h.nrows()).sum();
        let mut stacked = CMat::zeros(height, nt);
        let mut r0 = 0;
        for h in others {
            stacked.rows_mut(r0, h.nrows()).copy_from(h);
            r0 += h.nrows();
        }
        let mut basis = null_space(&stacked, TOL_RANK);
        let zf = basis.ncols() > 0;
        if !zf {
            basis = CMat::identity(nt, nt);
        }
        zero_forcing.push(zf);
        // Equalizing beams: H_k W_k has orthonormal columns spanning the reachable subspace.
        let reach = &channels[i] * &basis;
        let d = svd(&reach);
        let top = d.s.first().copied().unwrap_or(0.0);
        let used = d.s.iter().take_while(|&&s| s > TOL_RANK * top).count().min(rows);
        let mut shape = CMat::zeros(nt, rows);
        let mut inv_energy = 0.0;
        for c in 0..used {
            let col = &basis * d.v.column(c) * C64::new(1.0 / d.s[c], 0.0);
            shape.set_column(c, &col);
            inv_energy += 1.0 / (d.s[c] * d.s[c]);
        }
        shapes.push((shape, inv_energy));
    }
    let budget = scene.tx_power * l as f64 / k as f64;
    let w = shapes
        .into_iter()
        .map(|(s, e)| if e > 0.0 { s * C64::new((budget / e).sqrt(), 0.0) } else { s })
        .collect();
    Ok(SensingStreams { rows, x, x_dot, w, channels, reduced: rows < nt, zero_forcing })
}

impl SensingStreams {
    /// Sum over k of W_k X_k (N_t x L).
    pub fn transmit(&self) -> CMat {
        let mut out = CMat::zeros(self.w[0].nrows(), self.x[0].ncols());
        for (w, x) in self.w.iter().zip(&self.x) {
            out += w * x;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fro2;

    fn eye_err(x: &CMat) -> f64 {
        let g = x * x.adjoint();
        (g - CMat::identity(x.nrows(), x.nrows())).camax()
    }

    #[test]
    fn single_stream_orthonormal() {
        let mut s = SceneConfig::table1();
        s.irs.truncate(1);
        let st = make_orthogonal_streams(&s).unwrap();
        assert!(eye_err(&st.x[0]) < 1e-10);
        assert!(!st.reduced);
    }

    #[test]
    fn two_streams_mutually_orthogonal() {
        let mut s = SceneConfig::table1();
        s.irs.truncate(2);
        s.n_tx = 4;
        s.frame_length = 16;
        let st = make_orthogonal_streams(&s).unwrap();
        let c = &st.x[0] * st.x[1].adjoint();
        assert!(c.camax() < 1e-10);
    }

    #[test]
    fn table1_reduces_rows() {
        let s = SceneConfig::table1();
        let st = make_orthogonal_streams(&s).unwrap();
        assert_eq!(st.rows, 33);
        assert!(st.reduced);
        for i in 0..3 {
            assert!(eye_err(&st.x[i]) < 1e-10);
            for j in 0..3 {
                if i != j {
                    assert!((&st.x[i] * st.x[j].adjoint()).camax() < 1e-10);
                }
            }
        }
        let total: f64 = st.w.iter().map(fro2).sum();
        assert!((total - s.tx_power * s.frame_length as f64).abs() < 1e-8 * total);
        assert!(st.zero_forcing.iter().all(|&z| z));
        for i in 0..3 {
            for j in 0..3 {
                let leak = fro2(&(&st.channels[i] * &st.w[j]));
                if i != j {
                    assert!(leak < 1e-20 * fro2(&(&st.channels[j] * &st.w[j])));
                }
            }
        }
    }

    #[test]
    fn beam_gains_invariant_under_translation() {
        let base = SceneConfig::table1();
        let mut moved = base.clone();
        let d = [105.44240447875431, 0.0];
        moved.bs_position = d;
        for irs in moved.irs.iter_mut() {
            irs.position[0] += d[0];
        }
        let (a, b) = (make_orthogonal_streams(&base).unwrap(), make_orthogonal_streams(&moved).unwrap());
        for k in 0..3 {
            let ga = fro2(&(&a.channels[k] * &a.w[k]));
            let gb = fro2(&(&b.channels[k] * &b.w[k]));
            assert!((ga - gb).abs() < 1e-9 * ga, "IRS {k}: {ga} vs {gb}");
        }
    }

    #[test]
    fn no_reduction_is_infeasible() {
        let mut s = SceneConfig::table1();
        s.stream_reduction = false;
        assert!(matches!(make_orthogonal_streams(&s), Err(Error::Infeasible(_))));
    }

    #[test]
    fn spectral_derivative_of_tone() {
        let len = 64;
        let fs = 1.0e6;
        let f0 = 5.0 * fs / len as f64;
        let x = CMat::from_fn(1, len, |_, t| C64::from_polar(1.0, 2.0 * PI * f0 * t as f64 / fs));
        let d = spectral_derivative(&x, fs);
        for t in 0..len {
            let want = x[(0, t)] * C64::new(0.0, 2.0 * PI * f0);
            assert!((d[(0, t)] - want).norm() < 1e-6 * want.norm());
        }
    }
}
