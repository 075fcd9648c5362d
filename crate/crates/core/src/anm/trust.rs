//! Two-variable trust-region refinement of a departure angle and real gain.
//!
//! Objective h(alpha, theta) = ||alpha q(theta) - r||^2 with q = S^H a(theta, N),
//! S the N x rows effective signal and r the receive-combined observation.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{vec_norm2, CMat, CVec, C64};
use crate::model::steering::steering_unchecked;
use crate::model::{steering_derivative, steering_second_derivative};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustHyper {
    /// Relative objective change that ends the iteration.
    pub eps: f64,
    pub max_iter: usize,
    /// Initial bound on the squared step length.
    pub initial_radius2: f64,
    pub scan_points: usize,
}

impl Default for TrustHyper {
    fn default() -> Self {
        TrustHyper { eps: 1e-12, max_iter: 500, initial_radius2: 1e-2, scan_points: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustOutcome {
    pub alpha: f64,
    pub theta: f64,
    pub objective: f64,
    pub iterations: usize,
    /// Objective after each accepted step, starting with the initial point.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AodInit {
    pub theta: f64,
    pub alpha: f64,
    /// Common phase of r relative to q(theta); remove it before refining with real alpha.
    pub phase: f64,
}

/// Value, gradient and exact Hessian of h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

fn q_of(s: &CMat, theta: f64, spacing: f64) -> CVec {
    s.adjoint() * steering_unchecked(theta, s.nrows(), spacing)
}

pub fn aod_objective(r: &CVec, s: &CMat, alpha: f64, theta: f64, spacing: f64) -> Quadratic {
    let n = s.nrows();
    let t = theta.clamp(-FRAC_PI_2, FRAC_PI_2);
    let sh = s.adjoint();
    let q = &sh * steering_unchecked(t, n, spacing);
    let q1 = &sh * steering_derivative(t, n, spacing).expect("clamped");
    let q2 = &sh * steering_second_derivative(t, n, spacing).expect("clamped");
    let a = C64::new(alpha, 0.0);
    let e = &q * a - r;
    let value = vec_norm2(&e);
    let qq = vec_norm2(&q);
    let q_r = q.dotc(r).re;
    let d_alpha = 2.0 * alpha * qq - 2.0 * q_r;
    // dh/dtheta = 2 Re(e^H alpha q1)
    let d_theta = 2.0 * alpha * e.dotc(&q1).re;
    let h_aa = 2.0 * qq;
    let h_at = 4.0 * alpha * q.dotc(&q1).re - 2.0 * r.dotc(&q1).re;
    let h_tt = 2.0 * (alpha * alpha * (vec_norm2(&q1) + q.dotc(&q2).re) - alpha * r.dotc(&q2).re);
    Quadratic { value, grad: [d_alpha, d_theta], hess: [[h_aa, h_at], [h_at, h_tt]] }
}

/// Coarse scan of |q^H r|^2 / ||q||^2, least-squares complex gain at the best point.
pub fn aod_initial_guess(r: &CVec, s: &CMat, spacing: f64, points: usize) -> Result<AodInit> {
    let points = points.max(2);
    let mut best = (0.0, f64::NEG_INFINITY, C64::new(0.0, 0.0), 0.0);
    for i in 0..points {
        let t = -FRAC_PI_2 + std::f64::consts::PI * i as f64 / (points - 1) as f64;
        let q = q_of(s, t, spacing);
        let qq = vec_norm2(&q);
        if qq < 1e-300 {
            continue;
        }
        let c = q.dotc(r);
        let score = c.norm_sqr() / qq;
        if score > best.1 {
            best = (t, score, c, qq);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::DegenerateGeometry("S^H a(theta) vanishes on the whole scan".into()));
    }
    let (theta, _, c, qq) = best;
    Ok(AodInit { theta, alpha: c.norm() / qq, phase: c.arg() })
}

/// Outer rounds of phase re-estimation around the real-gain refinement.
pub const PHASE_ROUNDS: usize = 50;

/// Alternates the closed-form common phase arg(q(theta)^H r) with
/// [`trust_region_aod`] on the de-rotated observation until the angle settles.
/// Returns the last inner outcome and the phase.
pub fn refine_aod(r: &CVec, s: &CMat, init: &AodInit, spacing: f64, hyper: &TrustHyper) -> Result<(TrustOutcome, f64)> {
    let (mut theta, mut alpha, mut phase) = (init.theta, init.alpha, init.phase);
    let mut iterations = 0;
    let mut last = None;
    for _ in 0..PHASE_ROUNDS {
        let rr = r * C64::from_polar(1.0, -phase);
        let mut out = trust_region_aod(&rr, s, theta, alpha, spacing, hyper)?;
        iterations += out.iterations;
        let moved = (out.theta - theta).abs();
        theta = out.theta;
        alpha = out.alpha;
        let c = q_of(s, theta, spacing).dotc(r);
        let new_phase = if alpha < 0.0 { c.arg() + std::f64::consts::PI } else { c.arg() };
        let turned = C64::from_polar(1.0, new_phase - phase).arg().abs();
        phase = new_phase;
        alpha = alpha.abs();
        out.iterations = iterations;
        last = Some(out);
        if moved < 1e-13 && turned < 1e-12 {
            break;
        }
    }
    let mut out = last.expect("at least one round");
    out.alpha = alpha;
    out.objective = aod_objective(&(r * C64::from_polar(1.0, -phase)), s, alpha, theta, spacing).value;
    Ok((out, phase))
}

/// Minimizer of g^T p + p^T H p / 2 subject to ||p||^2 <= radius2.
pub(crate) fn solve_subproblem(g: [f64; 2], h: [[f64; 2]; 2], radius2: f64) -> [f64; 2] {
    let delta = radius2.sqrt();
    // Eigen-decomposition of the symmetric 2x2 Hessian, ascending.
    let (a, b, d) = (h[0][0], h[0][1], h[1][1]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let lam = [mean - rad, mean + rad];
    let vecs = if b.abs() > 1e-300 * (a.abs() + d.abs()).max(1.0) {
        let v0 = [lam[0] - d, b];
        let n0 = (v0[0] * v0[0] + v0[1] * v0[1]).sqrt();
        let v0 = [v0[0] / n0, v0[1] / n0];
        [v0, [-v0[1], v0[0]]]
    } else if a <= d {
        [[1.0, 0.0], [0.0, 1.0]]
    } else {
        [[0.0, 1.0], [1.0, 0.0]]
    };
    let gp = [vecs[0][0] * g[0] + vecs[0][1] * g[1], vecs[1][0] * g[0] + vecs[1][1] * g[1]];
    let step_norm2 = |mu: f64| (gp[0] / (lam[0] + mu)).powi(2) + (gp[1] / (lam[1] + mu)).powi(2);
    let combine = |c0: f64, c1: f64| [c0 * vecs[0][0] + c1 * vecs[1][0], c0 * vecs[0][1] + c1 * vecs[1][1]];
    let scale = lam[1].abs().max(lam[0].abs()).max(1e-300);
    if lam[0] > 1e-14 * scale && step_norm2(0.0) <= radius2 {
        return combine(-gp[0] / lam[0], -gp[1] / lam[1]);
    }
    let floor = (-lam[0]).max(0.0);
    let hard = gp[0].abs() <= 1e-12 * (gp[0].abs() + gp[1].abs()).max(1e-300);
    if hard {
        // The multiplier sits at -lambda_min; pad along the lowest eigenvector.
        let mu = floor;
        let c1 = if (lam[1] + mu).abs() > 1e-300 { -gp[1] / (lam[1] + mu) } else { 0.0 };
        if c1 * c1 <= radius2 {
            let c0 = (radius2 - c1 * c1).sqrt();
            return combine(c0, c1);
        }
    }
    // Secular equation ||p(mu)|| = delta, solved by safeguarded Newton on 1/||p|| - 1/delta.
    let mut lo = floor;
    let mut hi = floor + (gp[0].abs() + gp[1].abs()) / delta + scale;
    while step_norm2(hi) > radius2 {
        hi *= 2.0;
    }
    let mut mu = hi;
    for _ in 0..200 {
        let n2 = step_norm2(mu);
        let n = n2.sqrt();
        let phi = 1.0 / n - 1.0 / delta;
        if phi.abs() < 1e-13 / delta {
            break;
        }
        if phi < 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let dn2 = -2.0 * ((gp[0] * gp[0]) / (lam[0] + mu).powi(3) + (gp[1] * gp[1]) / (lam[1] + mu).powi(3));
        let dphi = -0.5 * dn2 / (n2 * n);
        let next = mu - phi / dphi;
        mu = if next > lo && next < hi && next.is_finite() { next } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 * hi.max(1.0) {
            break;
        }
    }
    combine(-gp[0] / (lam[0] + mu), -gp[1] / (lam[1] + mu))
}

pub fn trust_region_aod(
    r: &CVec,
    s: &CMat,
    theta_init: f64,
    alpha_init: f64,
    spacing: f64,
    hyper: &TrustHyper,
) -> Result<TrustOutcome> {
    let q0 = q_of(s, theta_init.clamp(-FRAC_PI_2, FRAC_PI_2), spacing);
    let mut unit = if alpha_init.abs() > 1e-300 { alpha_init.abs() } else { (vec_norm2(r) / vec_norm2(&q0).max(1e-300)).sqrt() };
    if !(unit > 0.0) || !unit.is_finite() {
        unit = 1.0;
    }
    let rs = r / C64::new(unit, 0.0);
    let mut y = [alpha_init / unit, theta_init.clamp(-FRAC_PI_2, FRAC_PI_2)];
    let mut cur = aod_objective(&rs, s, y[0], y[1], spacing);
    let floor = 1e-28 * vec_norm2(&rs).max(1e-300);
    let mut radius2 = hyper.initial_radius2;
    let mut history = vec![cur.value * unit * unit];
    let mut iterations = 0;
    loop {
        if vec_norm2(&q_of(s, y[1], spacing)) < 1e-24 * s.norm_squared().max(1e-300) {
            return Err(Error::DegenerateGeometry("S^H a(theta) vanishes at the iterate".into()));
        }
        if cur.value <= floor || (cur.grad[0].abs() + cur.grad[1].abs()) < 1e-15 {
            break;
        }
        if iterations >= hyper.max_iter {
            return Err(Error::NoConvergence { iterations, residual: cur.value * unit * unit });
        }
        iterations += 1;
        let p = solve_subproblem(cur.grad, cur.hess, radius2);
        let step2 = p[0] * p[0] + p[1] * p[1];
        let trial = [y[0] + p[0], (y[1] + p[1]).clamp(-FRAC_PI_2, FRAC_PI_2)];
        let pred = cur.grad[0] * p[0]
            + cur.grad[1] * p[1]
            + 0.5 * (cur.hess[0][0] * p[0] * p[0] + 2.0 * cur.hess[0][1] * p[0] * p[1] + cur.hess[1][1] * p[1] * p[1]);
        let next = aod_objective(&rs, s, trial[0], trial[1], spacing);
        let actual = next.value - cur.value;
        let ratio = if pred < 0.0 { actual / pred } else { -1.0 };
        if ratio > 0.75 {
            radius2 *= 2.0;
        } else {
            radius2 = 0.25 * step2;
        }
        if actual < 0.0 {
            let rel = -actual / cur.value;
            y = trial;
            cur = next;
            history.push(cur.value * unit * unit);
            if rel <= hyper.eps {
                break;
            }
        } else if radius2 < 1e-30 {
            break;
        }
    }
    Ok(TrustOutcome { alpha: y[0] * unit, theta: y[1], objective: cur.value * unit * unit, iterations, history })
}
