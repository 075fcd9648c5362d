//! The three estimation stages and the stacked-system baselines.

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pinv, RMat, RVec};
use crate::model::{Point, SPEED_OF_LIGHT};

/// Bearings with |cos| below this are dropped from the angle rows.
pub const MIN_COS: f64 = 1e-6;
pub const STAGE2_EPS: f64 = 1e-10;
pub const STAGE2_MAX_ITER: usize = 100;
/// Squares more negative than this are flagged, not just clamped silently.
pub const NEGATIVE_SQUARE_TOL: f64 = 1e-9;

fn solve(a: &RMat, b: &RVec, what: &str) -> Result<RVec> {
    a.clone().lu().solve(b).filter(|x| x.iter().all(|v| v.is_finite())).ok_or_else(|| Error::Singular(what.into()))
}

fn inverse(a: &RMat, what: &str) -> Result<RMat> {
    a.clone().try_inverse().filter(|x| x.iter().all(|v| v.is_finite())).ok_or_else(|| Error::Singular(what.into()))
}

/// Row (l, k) of the K^2 x K segment map has ones at columns l and k.
pub fn segment_map(k: usize) -> RMat {
    let mut a = RMat::zeros(k * k, k);
    for l in 0..k {
        for kk in 0..k {
            a[(l * k + kk, l)] += 1.0;
            a[(l * k + kk, kk)] += 1.0;
        }
    }
    a
}

/// Weighted least-squares segment delays from cascade delays and their covariance.
pub fn stage1_segment_delays(tau_hat: &[f64], cov_tau: &RMat) -> Result<(Vec<f64>, RMat)> {
    let n = tau_hat.len();
    let k = (n as f64).sqrt().round() as usize;
    if k == 0 || k * k != n {
        return Err(Error::Shape(format!("{n} cascade delays is not a square count")));
    }
    if cov_tau.shape() != (n, n) {
        return Err(Error::Shape(format!("delay covariance is {:?}, expected {n}x{n}", cov_tau.shape())));
    }
    let q_inv = cov_tau.clone().cholesky().map(|c| c.inverse()).ok_or_else(|| Error::Singular("cascade-delay covariance".into()))?;
    let a = segment_map(k);
    let at_q = a.transpose() * &q_inv;
    let cov = inverse(&(&at_q * &a), "stage-1 normal matrix")?;
    let x = &cov * (&at_q * RVec::from_column_slice(tau_hat));
    Ok((x.iter().copied().collect(), cov))
}

/// Linear rows of the delay-circle and bearing-line relations with their
/// perturbation variances (all diagonal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2System {
    pub a_tau: RMat,
    pub b_tau: RVec,
    pub a_theta: RMat,
    pub b_theta: RVec,
    /// Variance of each delay-row observation, 4 c^4 tau^2 sigma^2.
    pub r_tau: Vec<f64>,
    /// Variance of the slope error in each bearing row, sec^4 sigma^2.
    pub r_slope: Vec<f64>,
    /// Variance of each bearing-row observation, x_I^2 sec^4 sigma^2.
    pub r_theta: Vec<f64>,
    /// IRS index behind each kept bearing row.
    pub angle_rows: Vec<usize>,
    /// IRSs whose bearing was too close to vertical.
    pub dropped: Vec<usize>,
}

impl Stage2System {
    pub fn stacked(&self) -> (RMat, RVec) {
        let (kt, ka) = (self.a_tau.nrows(), self.a_theta.nrows());
        let mut a = RMat::zeros(kt + ka, 3);
        let mut b = RVec::zeros(kt + ka);
        a.rows_mut(0, kt).copy_from(&self.a_tau);
        a.rows_mut(kt, ka).copy_from(&self.a_theta);
        b.rows_mut(0, kt).copy_from(&self.b_tau);
        b.rows_mut(kt, ka).copy_from(&self.b_theta);
        (a, b)
    }
}

pub fn build_stage2_system(
    segment_delays: &[f64],
    segment_var: &[f64],
    theta_hat: &[f64],
    theta_var: &[f64],
    irs: &[Point],
) -> Result<Stage2System> {
    let k = irs.len();
    if segment_delays.len() != k || segment_var.len() != k || theta_hat.len() != k || theta_var.len() != k {
        return Err(Error::Shape(format!("expected {k} entries per IRS")));
    }
    let c = SPEED_OF_LIGHT;
    let mut a_tau = RMat::zeros(k, 3);
    let mut b_tau = RVec::zeros(k);
    let mut r_tau = Vec::with_capacity(k);
    for (i, p) in irs.iter().enumerate() {
        a_tau[(i, 0)] = -2.0 * p[0];
        a_tau[(i, 1)] = -2.0 * p[1];
        a_tau[(i, 2)] = 1.0;
        let t = segment_delays[i];
        b_tau[i] = t * t * c * c - (p[0] * p[0] + p[1] * p[1]);
        r_tau.push(4.0 * c.powi(4) * t * t * segment_var[i]);
    }
    let mut angle_rows = Vec::new();
    let mut dropped = Vec::new();
    for (i, &th) in theta_hat.iter().enumerate() {
        if th.cos().abs() < MIN_COS {
            dropped.push(i);
        } else {
            angle_rows.push(i);
        }
    }
    let ka = angle_rows.len();
    let mut a_theta = RMat::zeros(ka, 3);
    let mut b_theta = RVec::zeros(ka);
    let (mut r_slope, mut r_theta) = (Vec::with_capacity(ka), Vec::with_capacity(ka));
    for (row, &i) in angle_rows.iter().enumerate() {
        let (t, p) = (theta_hat[i].tan(), irs[i]);
        a_theta[(row, 0)] = t;
        a_theta[(row, 1)] = -1.0;
        b_theta[row] = p[0] * t - p[1];
        let sec4 = theta_hat[i].cos().powi(-4);
        r_slope.push(sec4 * theta_var[i]);
        r_theta.push(p[0] * p[0] * sec4 * theta_var[i]);
    }
    Ok(Stage2System { a_tau, b_tau, a_theta, b_theta, r_tau, r_slope, r_theta, angle_rows, dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2State {
    /// [x, y, s] with s standing for x^2 + y^2.
    pub x2: [f64; 3],
    /// (A_theta + dA)^T W, 3 x (angle rows).
    pub angle_weighting: RMat,
    /// Fitted slope corrections per angle row.
    pub delta_slope: Vec<f64>,
    /// Normal-matrix inverse at the final iterate.
    pub covariance: Matrix3<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Plain least squares on the stacked system.
pub fn ls_solve(sys: &Stage2System) -> Result<[f64; 3]> {
    let (a, b) = sys.stacked();
    if a.nrows() < 3 {
        return Err(Error::Shape(format!("{} rows cannot fix 3 unknowns", a.nrows())));
    }
    let x = pinv(&(a.transpose() * &a)) * (a.transpose() * b);
    Ok([x[0], x[1], x[2]])
}

fn inv_diag(v: &[f64], what: &str) -> Result<RMat> {
    if v.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::Singular(format!("{what} variance must be positive and finite")));
    }
    Ok(RMat::from_diagonal(&RVec::from_iterator(v.len(), v.iter().map(|x| 1.0 / x))))
}

/// One weighted pass at a given first coordinate: returns the new iterate,
/// slope corrections, weighting and covariance.
fn stage2_pass(sys: &Stage2System, x: &[f64; 3], w_tau: &RMat) -> Result<([f64; 3], Vec<f64>, RMat, Matrix3<f64>)> {
    let ka = sys.a_theta.nrows();
    let xt2 = x[0] * x[0];
    let den: Vec<f64> = (0..ka).map(|i| xt2 * sys.r_slope[i] + sys.r_theta[i]).collect();
    let w = inv_diag(&den, "bearing-row")?;
    let resid = &sys.a_theta * RVec::from_column_slice(x) - &sys.b_theta;
    let delta: Vec<f64> = (0..ka).map(|i| -x[0] * sys.r_slope[i] * resid[i] / den[i]).collect();
    let mut corrected = sys.a_theta.clone();
    for (i, d) in delta.iter().enumerate() {
        corrected[(i, 0)] += d;
    }
    let weighting = corrected.transpose() * &w;
    let at_w = sys.a_tau.transpose() * w_tau;
    let normal = &weighting * &sys.a_theta + &at_w * &sys.a_tau;
    let rhs = &weighting * &sys.b_theta + &at_w * &sys.b_tau;
    let xn = solve(&normal, &rhs, "stage-2 normal matrix")?;
    let sym = sys.a_theta.transpose() * &w * &sys.a_theta + &at_w * &sys.a_tau;
    let cov = inverse(&sym, "stage-2 covariance")?;
    let cov = Matrix3::from_fn(|i, j| 0.5 * (cov[(i, j)] + cov[(j, i)]));
    Ok(([xn[0], xn[1], xn[2]], delta, weighting, cov))
}

/// Iterative weighted solution that accounts for slope errors in the bearing
/// rows, started from `init` (plain least squares when None).
pub fn stage2_solve(sys: &Stage2System, init: Option<[f64; 3]>, eps: f64, max_iter: usize) -> Result<Stage2State> {
    let mut x = match init {
        Some(x) => x,
        None => ls_solve(sys)?,
    };
    let w_tau = inv_diag(&sys.r_tau, "delay-row")?;
    let mut state = None;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter.max(1) {
        iterations += 1;
        let (xn, delta, weighting, cov) = stage2_pass(sys, &x, &w_tau)?;
        let step: f64 = (0..3).map(|i| (xn[i] - x[i]).powi(2)).sum();
        x = xn;
        state = Some((delta, weighting, cov));
        if step <= eps {
            converged = true;
            break;
        }
    }
    let (delta_slope, angle_weighting, covariance) = state.expect("at least one pass");
    Ok(Stage2State { x2: x, angle_weighting, delta_slope, covariance, iterations, converged })
}

/// Weighted least squares on the stacked system with observation-side
/// variances only.
pub fn wls_solve(sys: &Stage2System) -> Result<([f64; 3], Matrix3<f64>)> {
    let mut plain = sys.clone();
    plain.r_slope.iter_mut().for_each(|v| *v = 0.0);
    let w_tau = inv_diag(&plain.r_tau, "delay-row")?;
    let (x, _, _, cov) = stage2_pass(&plain, &[0.0; 3], &w_tau)?;
    Ok((x, cov))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage3Output {
    pub position: [f64; 2],
    /// Estimated [x^2, y^2] before the square root.
    pub squares: [f64; 2],
    pub covariance: Matrix2<f64>,
    /// A square was negative and got clamped to zero.
    pub clamped: bool,
}

/// Refines [x, y] using the s = x^2 + y^2 estimate; signs come from stage 2.
pub fn stage3_refine(x2: &[f64; 3], cov2: &Matrix3<f64>) -> Result<Stage3Output> {
    let (x, y) = (x2[0], x2[1]);
    let s = x2[2].max(0.0);
    let jac = Matrix3::from_diagonal(&Vector3::new(2.0 * x, 2.0 * y, 1.0));
    let mut q3 = jac * cov2 * jac.transpose();
    let reg = 1e-12 * q3.diagonal().max().max(f64::MIN_POSITIVE);
    for i in 0..3 {
        q3[(i, i)] += reg;
    }
    let q_inv = q3.try_inverse().ok_or_else(|| Error::Singular("stage-3 covariance".into()))?;
    let a3 = nalgebra::Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 1.0, 1.0);
    let b3 = Vector3::new(x * x, y * y, s);
    let normal = a3.transpose() * q_inv * a3;
    let cov3 = normal.try_inverse().ok_or_else(|| Error::Singular("stage-3 normal matrix".into()))?;
    let sq = cov3 * (a3.transpose() * q_inv * b3);
    let clamped = sq[0] < -NEGATIVE_SQUARE_TOL || sq[1] < -NEGATIVE_SQUARE_TOL;
    let root = |v: f64, sign_of: f64| v.max(0.0).sqrt() * if sign_of < 0.0 { -1.0 } else { 1.0 };
    let position = [root(sq[0], x), root(sq[1], y)];
    // d(sqrt(q))/dq = 1 / (2 sqrt(q)), guarded near zero.
    let d = Matrix2::new(1.0 / (2.0 * position[0].abs().max(1e-9)), 0.0, 0.0, 1.0 / (2.0 * position[1].abs().max(1e-9)));
    Ok(Stage3Output { position, squares: [sq[0], sq[1]], covariance: d * cov3 * d, clamped })
}
