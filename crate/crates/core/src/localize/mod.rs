//! Position from cascade delays and bearings: segment delays by weighted
//! least squares, an iterative weighted solve that accounts for slope errors,
//! and a refinement on the squared coordinates. LS and WLS baselines share
//! the same stacked system.

pub mod stages;

use nalgebra::Matrix2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{FimAngle, FimDelay};
use crate::linalg::RMat;
use crate::model::{GeometryParams, Point, SceneConfig};
pub use stages::{
    build_stage2_system, ls_solve, segment_map, stage1_segment_delays, stage2_solve, stage3_refine, wls_solve, Stage2State,
    Stage2System, Stage3Output, STAGE2_EPS, STAGE2_MAX_ITER,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridMeasurements {
    /// Cascade delays, lexicographic (l, k), seconds.
    pub tau_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub cov_tau: RMat,
    pub cov_theta: RMat,
    pub aod_available: Vec<bool>,
}

fn check_psd(m: &RMat, what: &str) -> Result<()> {
    if !m.is_square() || m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Shape(format!("{what} covariance must be square and finite")));
    }
    if (m - m.transpose()).amax() > 1e-9 * m.amax().max(f64::MIN_POSITIVE) {
        return Err(Error::Domain(format!("{what} covariance is not symmetric")));
    }
    let min = m.clone().symmetric_eigen().eigenvalues.min();
    if min < -1e-12 * m.amax() {
        return Err(Error::Domain(format!("{what} covariance has eigenvalue {min:e}")));
    }
    Ok(())
}

impl HybridMeasurements {
    pub fn k(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if self.tau_hat.len() != k * k || self.cov_tau.shape() != (k * k, k * k) || self.cov_theta.shape() != (k, k) || self.aod_available.len() != k {
            return Err(Error::Shape(format!("inconsistent measurement sizes for K = {k}")));
        }
        check_psd(&self.cov_tau, "delay")?;
        check_psd(&self.cov_theta, "angle")
    }

    /// Exact measurements with the bound covariances attached.
    pub fn exact(geom: &GeometryParams, delay: &FimDelay, angles: &FimAngle) -> Result<Self> {
        let (cov_tau, cov_theta) = crb_covariances(delay, angles)?;
        Ok(HybridMeasurements {
            tau_hat: geom.cascade_delays(),
            theta_hat: geom.angle.clone(),
            cov_tau,
            cov_theta,
            aod_available: angles.aod.iter().map(|&v| v > 0.0).collect(),
        })
    }

    /// Truth plus independent Gaussian errors drawn at the given covariances' diagonals.
    pub fn perturbed<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let mut out = self.clone();
        let mut draw = |v: f64| Normal::new(0.0, v.max(0.0).sqrt()).map(|n| n.sample(rng)).unwrap_or(0.0);
        for (i, t) in out.tau_hat.iter_mut().enumerate() {
            *t += draw(self.cov_tau[(i, i)]);
        }
        for (i, t) in out.theta_hat.iter_mut().enumerate() {
            *t += draw(self.cov_theta[(i, i)]);
        }
        out
    }
}

/// Diagonal covariances from the delay information and the fused angle information.
pub fn crb_covariances(delay: &FimDelay, angles: &FimAngle) -> Result<(RMat, RMat)> {
    if let Some(i) = delay.diag.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Singular(format!("cascade delay {i} carries no information")));
    }
    let k = angles.aoa.len();
    if let Some(i) = (0..k).find(|&i| !(angles.total(i) > 0.0)) {
        return Err(Error::Singular(format!("angle at IRS {i} carries no information")));
    }
    let ct = RMat::from_diagonal(&nalgebra::DVector::from_iterator(delay.diag.len(), delay.diag.iter().map(|v| 1.0 / v)));
    let ca = RMat::from_diagonal(&nalgebra::DVector::from_iterator(k, (0..k).map(|i| 1.0 / angles.total(i))));
    Ok((ct, ca))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ThreeStage,
    TwoStage,
    Wls,
    Ls,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::ThreeStage, Method::TwoStage, Method::Wls, Method::Ls];

    pub fn name(self) -> &'static str {
        match self {
            Method::ThreeStage => "three-stage",
            Method::TwoStage => "two-stage",
            Method::Wls => "wls",
            Method::Ls => "ls",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| Error::Parse(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationEstimate {
    pub method: Method,
    pub position: [f64; 2],
    pub stage1_segment_delays: Vec<f64>,
    /// [x, y, s] from the stacked system, relative to the BS.
    pub stage2_triple: [f64; 3],
    /// Refined [x^2, y^2] relative to the BS.
    pub stage3_squares: Option<[f64; 2]>,
    pub covariance: Matrix2<f64>,
    /// |x^2 + y^2 - s| with s from the last stage run: the stacked-system
    /// solve, or the refined squares' sum for three-stage.
    pub consistency_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub clamped: bool,
    /// IRSs whose bearing row was dropped as near-vertical.
    pub dropped_angle_rows: Vec<usize>,
}

impl LocationEstimate {
    pub fn error(&self, truth: Point) -> f64 {
        (self.position[0] - truth[0]).hypot(self.position[1] - truth[1])
    }
}

fn top_left(c: &nalgebra::Matrix3<f64>) -> Matrix2<f64> {
    Matrix2::new(c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)])
}

pub fn localize(meas: &HybridMeasurements, scene: &SceneConfig, method: Method) -> Result<LocationEstimate> {
    meas.validate()?;
    let k = meas.k();
    if scene.k() != k {
        return Err(Error::Shape(format!("scene has {} IRSs, measurements {k}", scene.k())));
    }
    // The row covariances are modeled in the frame centred on the BS; solving
    // there keeps every method covariant under a translation of the scene.
    let origin = scene.bs_position;
    let irs: Vec<Point> = scene.irs.iter().map(|d| [d.position[0] - origin[0], d.position[1] - origin[1]]).collect();
    let (seg, seg_cov) = stage1_segment_delays(&meas.tau_hat, &meas.cov_tau)?;
    let seg_var: Vec<f64> = (0..k).map(|i| seg_cov[(i, i)]).collect();
    let theta_var: Vec<f64> = (0..k).map(|i| meas.cov_theta[(i, i)]).collect();
    let sys = build_stage2_system(&seg, &seg_var, &meas.theta_hat, &theta_var, &irs)?;
    let consistency = |p: [f64; 2], s: f64| (p[0] * p[0] + p[1] * p[1] - s).abs();
    let mut est = LocationEstimate {
        method,
        position: [0.0; 2],
        stage1_segment_delays: seg,
        stage2_triple: [0.0; 3],
        stage3_squares: None,
        covariance: Matrix2::zeros(),
        consistency_residual: 0.0,
        iterations: 1,
        converged: true,
        clamped: false,
        dropped_angle_rows: sys.dropped.clone(),
    };
    match method {
        Method::Ls => {
            let x = ls_solve(&sys)?;
            let (a, _) = sys.stacked();
            let c = crate::linalg::pinv(&(a.transpose() * &a));
            est.stage2_triple = x;
            est.position = [x[0], x[1]];
            est.covariance = Matrix2::new(c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]);
        }
        Method::Wls => {
            let (x, cov) = wls_solve(&sys)?;
            est.stage2_triple = x;
            est.position = [x[0], x[1]];
            est.covariance = top_left(&cov);
        }
        Method::TwoStage | Method::ThreeStage => {
            let st = stage2_solve(&sys, None, STAGE2_EPS, STAGE2_MAX_ITER)?;
            est.stage2_triple = st.x2;
            est.iterations = st.iterations;
            est.converged = st.converged;
            if method == Method::TwoStage {
                est.position = [st.x2[0], st.x2[1]];
                est.covariance = top_left(&st.covariance);
            } else {
                let out = stage3_refine(&st.x2, &st.covariance)?;
                est.position = out.position;
                est.stage3_squares = Some(out.squares);
                est.covariance = out.covariance;
                est.clamped = out.clamped || st.x2[2] < 0.0;
                est.consistency_residual = consistency(est.position, out.squares[0] + out.squares[1]);
                est.position = [est.position[0] + origin[0], est.position[1] + origin[1]];
                return Ok(est);
            }
        }
    }
    est.consistency_residual = consistency(est.position, est.stage2_triple[2].max(0.0));
    est.position = [est.position[0] + origin[0], est.position[1] + origin[1]];
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::scene_fims;
    use crate::linalg::RVec;
    use crate::model::geometry_params;
    use crate::seed;

    fn table1_at(p: Point) -> (SceneConfig, HybridMeasurements) {
        let s = SceneConfig::table1().with_target(p);
        let (g, _, fd, fa) = scene_fims(&s).unwrap();
        (s, HybridMeasurements::exact(&g, &fd, &fa).unwrap())
    }

    #[test]
    fn stage1_examples() {
        let (x, cov) = stage1_segment_delays(&[600e-9], &RMat::identity(1, 1)).unwrap();
        assert!((x[0] - 300e-9).abs() < 1e-21);
        assert!((cov[(0, 0)] - 0.25).abs() < 1e-15);
        let seg = [210e-9, 180e-9, 150e-9];
        let tau: Vec<f64> = (0..9).map(|i| seg[i / 3] + seg[i % 3]).collect();
        let mut q = RMat::identity(9, 9);
        q[(4, 4)] = 3.0;
        let (x, _) = stage1_segment_delays(&tau, &q).unwrap();
        for i in 0..3 {
            assert!((x[i] - seg[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn stage1_identity_matches_pseudo_inverse() {
        let mut rng = seed::rng(3, &[0]);
        let tau: Vec<f64> = (0..9).map(|_| rng.random::<f64>()).collect();
        let (x, _) = stage1_segment_delays(&tau, &RMat::identity(9, 9)).unwrap();
        let oracle = crate::linalg::pinv(&segment_map(3)) * RVec::from_column_slice(&tau);
        for i in 0..3 {
            assert!((x[i] - oracle[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn stage1_singular_covariance_rejected() {
        assert!(matches!(stage1_segment_delays(&[1.0; 4], &RMat::zeros(4, 4)), Err(Error::Singular(_))));
    }

    #[test]
    fn stage1_residual_is_weighted_orthogonal() {
        let mut rng = seed::rng(5, &[0]);
        let tau: Vec<f64> = (0..9).map(|_| rng.random::<f64>()).collect();
        let b = RMat::from_fn(9, 9, |_, _| rng.random::<f64>() - 0.5);
        let q = &b * b.transpose() + RMat::identity(9, 9) * 0.1;
        let (x, _) = stage1_segment_delays(&tau, &q).unwrap();
        let a = segment_map(3);
        let r = RVec::from_column_slice(&tau) - &a * RVec::from_column_slice(&x);
        let g = a.transpose() * q.try_inverse().unwrap() * r;
        assert!(g.amax() < 1e-10, "{}", g.amax());
    }

    #[test]
    fn exact_rows_are_satisfied() {
        let (s, m) = table1_at([3.0, 7.0]);
        let g = geometry_params(&s).unwrap();
        let irs: Vec<Point> = s.irs.iter().map(|d| d.position).collect();
        let sys = build_stage2_system(&g.delay, &[1e-20; 3], &m.theta_hat, &[1e-6; 3], &irs).unwrap();
        let x = RVec::from_column_slice(&[3.0, 7.0, 58.0]);
        let rt = &sys.a_tau * &x - &sys.b_tau;
        let ra = &sys.a_theta * &x - &sys.b_theta;
        assert!(rt.amax() < 1e-12 * sys.b_tau.amax());
        assert!(ra.amax() < 1e-12 * sys.b_theta.amax().max(1.0));
    }

    #[test]
    fn horizontal_bearing_row() {
        let sys = build_stage2_system(&[1e-7], &[1e-20], &[0.0], &[1e-6], &[[4.0, -2.5]]).unwrap();
        assert_eq!(sys.a_theta.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, -1.0, 0.0]);
        assert_eq!(sys.b_theta[0], 2.5);
    }

    #[test]
    fn vertical_bearing_dropped() {
        let sys = build_stage2_system(&[1e-7; 2], &[1e-20; 2], &[std::f64::consts::FRAC_PI_2, 0.3], &[1e-6; 2], &[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert_eq!(sys.dropped, vec![0]);
        assert_eq!(sys.angle_rows, vec![1]);
    }

    #[test]
    fn bearing_perturbation_matches_stated_variances() {
        // Slope and observation errors from an angle error match sec^4 scaling.
        let (theta, sigma, xi) = (0.7f64, 1e-3, 12.0);
        let mut rng = seed::rng(9, &[0]);
        let n = Normal::new(0.0, sigma).unwrap();
        let trials = 1000;
        let (mut va, mut vb) = (0.0, 0.0);
        for _ in 0..trials {
            let t = theta + n.sample(&mut rng);
            let (da, db) = (t.tan() - theta.tan(), xi * (t.tan() - theta.tan()));
            va += da * da;
            vb += db * db;
        }
        let sys = build_stage2_system(&[1e-7], &[1e-20], &[theta], &[sigma * sigma], &[[xi, 0.0]]).unwrap();
        let (va, vb) = (va / trials as f64, vb / trials as f64);
        assert!((va / sys.r_slope[0] - 1.0).abs() < 0.15, "{}", va / sys.r_slope[0]);
        assert!((vb / sys.r_theta[0] - 1.0).abs() < 0.15);
    }

    #[test]
    fn every_method_exact_on_exact_measurements() {
        for p in [[5.0, 5.0], [0.5, 9.0], [-3.0, -4.0], [8.0, 0.2]] {
            let (s, m) = table1_at(p);
            for method in Method::ALL {
                let e = localize(&m, &s, method).unwrap();
                assert!(e.error(p) < 1e-9, "{method:?} at {p:?}: {:?}", e.position);
            }
        }
    }

    #[test]
    fn third_quadrant_signs_restored() {
        let (s, m) = table1_at([-3.0, -4.0]);
        let e = localize(&m, &s, Method::ThreeStage).unwrap();
        assert!(e.position[0] < 0.0 && e.position[1] < 0.0);
    }

    #[test]
    fn stage3_keeps_consistent_input() {
        let x2 = [2.0, -3.0, 13.0];
        let cov = nalgebra::Matrix3::new(0.2, 0.01, 0.0, 0.01, 0.3, 0.02, 0.0, 0.02, 4.0);
        let out = stage3_refine(&x2, &cov).unwrap();
        assert!((out.position[0] - 2.0).abs() < 1e-12 && (out.position[1] + 3.0).abs() < 1e-12);
        assert!(!out.clamped);
    }

    #[test]
    fn stage2_fixed_point_and_identity_collapse() {
        let (s, m) = table1_at([4.0, 6.0]);
        let mut rng = seed::rng(2, &[0]);
        let noisy = m.perturbed(&mut rng);
        let irs: Vec<Point> = s.irs.iter().map(|d| d.position).collect();
        let (seg, c) = stage1_segment_delays(&noisy.tau_hat, &noisy.cov_tau).unwrap();
        let var: Vec<f64> = (0..3).map(|i| c[(i, i)]).collect();
        let tv: Vec<f64> = (0..3).map(|i| noisy.cov_theta[(i, i)]).collect();
        let sys = build_stage2_system(&seg, &var, &noisy.theta_hat, &tv, &irs).unwrap();
        let st = stage2_solve(&sys, None, STAGE2_EPS, STAGE2_MAX_ITER).unwrap();
        assert!(st.converged);
        let again = stage2_solve(&sys, Some(st.x2), STAGE2_EPS, STAGE2_MAX_ITER).unwrap();
        let d: f64 = (0..3).map(|i| (again.x2[i] - st.x2[i]).powi(2)).sum();
        assert!(d <= STAGE2_EPS, "{d}");

        let mut plain = sys.clone();
        plain.r_tau.iter_mut().for_each(|v| *v = 1.0);
        plain.r_theta.iter_mut().for_each(|v| *v = 1.0);
        plain.r_slope.iter_mut().for_each(|v| *v = 0.0);
        let a = stage2_solve(&plain, None, STAGE2_EPS, STAGE2_MAX_ITER).unwrap().x2;
        let b = ls_solve(&plain).unwrap();
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-6 * b[i].abs().max(1.0), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        assert!(Method::parse("kalman").is_err());
    }
}
