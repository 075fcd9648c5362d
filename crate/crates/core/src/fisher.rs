//! Fisher information for cascade delays and angles, location bounds and
//! benchmark schemes.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{fro2, RMat};
use crate::model::{
    effective_signal, geometry_params, make_orthogonal_streams, steering_derivative, steering_vector, GeometryParams,
    IrsDescriptor, Point, SceneConfig, SensingStreams, SPEED_OF_LIGHT,
};
use crate::seed;

/// Diagonal delay information, entries in lexicographic (l, k) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FimDelay {
    pub k: usize,
    pub diag: Vec<f64>,
}

impl FimDelay {
    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.diag[l * self.k + k]
    }

    /// Indices of unobservable paths (zero information).
    pub fn zero_entries(&self) -> Vec<usize> {
        self.diag.iter().enumerate().filter(|(_, &v)| v <= 0.0).map(|(i, _)| i).collect()
    }

    pub fn matrix(&self) -> RMat {
        RMat::from_diagonal(&nalgebra::DVector::from_vec(self.diag.clone()))
    }
}

/// Diagonal arrival- and departure-angle information per IRS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FimAngle {
    pub aoa: Vec<f64>,
    pub aod: Vec<f64>,
}

impl FimAngle {
    pub fn total(&self, k: usize) -> f64 {
        self.aoa[k] + self.aod[k]
    }
}

/// Per-path signal energies shared by the delay and angle blocks.
struct PathTerms {
    /// ||a^H(theta_k) S_k X_k||^2
    steer: Vec<f64>,
    /// ||a^H(theta_k) S_k Xdot_k||^2
    steer_dot_time: Vec<f64>,
    /// ||adot^H(theta_k) S_k X_k||^2
    deriv: Vec<f64>,
}

fn path_terms(scene: &SceneConfig, geom: &GeometryParams, streams: &SensingStreams) -> Result<PathTerms> {
    let k = scene.k();
    let s = scene.element_spacing_ratio;
    let mut t = PathTerms { steer: vec![0.0; k], steer_dot_time: vec![0.0; k], deriv: vec![0.0; k] };
    for i in 0..k {
        let n = scene.irs[i].n_elements;
        let sk = match effective_signal(scene, i, streams) {
            Ok((m, _)) => m,
            Err(Error::ZeroSignal(_)) => continue,
            Err(e) => return Err(e),
        };
        let a = steering_vector(geom.angle[i], n, s)?;
        let ad = steering_derivative(geom.angle[i], n, s)?;
        let q = a.adjoint() * &sk;
        let p = ad.adjoint() * &sk;
        t.steer[i] = fro2(&(&q * &streams.x[i]));
        t.steer_dot_time[i] = fro2(&(&q * &streams.x_dot[i]));
        t.deriv[i] = fro2(&(&p * &streams.x[i]));
    }
    Ok(t)
}

fn deriv_norm2(theta: f64, count: usize, spacing: f64) -> f64 {
    let w = 2.0 * PI * spacing * theta.cos();
    (0..count).map(|n| (w * n as f64).powi(2)).sum()
}

pub fn fim_delay(scene: &SceneConfig, geom: &GeometryParams, streams: &SensingStreams) -> Result<FimDelay> {
    let t = path_terms(scene, geom, streams)?;
    Ok(delay_from_terms(scene, geom, &t))
}

fn delay_from_terms(scene: &SceneConfig, geom: &GeometryParams, t: &PathTerms) -> FimDelay {
    let k = scene.k();
    let mut diag = vec![0.0; k * k];
    for l in 0..k {
        let m = scene.irs[l].n_sensors as f64;
        for kk in 0..k {
            diag[l * k + kk] = 2.0 / scene.noise_of(l) * m * geom.gain(l, kk).powi(2) * t.steer_dot_time[kk];
        }
    }
    FimDelay { k, diag }
}

pub fn fim_angles(scene: &SceneConfig, geom: &GeometryParams, streams: &SensingStreams) -> Result<FimAngle> {
    let t = path_terms(scene, geom, streams)?;
    Ok(angles_from_terms(scene, geom, &t))
}

fn angles_from_terms(scene: &SceneConfig, geom: &GeometryParams, t: &PathTerms) -> FimAngle {
    let k = scene.k();
    let s = scene.element_spacing_ratio;
    let mut aoa = vec![0.0; k];
    let mut aod = vec![0.0; k];
    for l in 0..k {
        let m = scene.irs[l].n_sensors;
        let w = 2.0 / scene.noise_of(l);
        let dn = deriv_norm2(geom.angle[l], m, s);
        for kk in 0..k {
            let g2 = geom.gain(l, kk).powi(2);
            aoa[l] += w * g2 * dn * t.steer[kk];
            aod[kk] += w * g2 * m as f64 * t.deriv[kk];
        }
    }
    FimAngle { aoa, aod }
}

/// d(parameters)/d(target position): delay columns (l, k) lexicographic, then one angle column per IRS.
pub fn location_jacobian(geom: &GeometryParams) -> RMat {
    let k = geom.k;
    let mut j = RMat::zeros(2, k * k + k);
    for l in 0..k {
        for kk in 0..k {
            let c = l * k + kk;
            for ax in 0..2 {
                j[(ax, c)] = (geom.offset[kk][ax] / geom.distance[kk] + geom.offset[l][ax] / geom.distance[l]) / SPEED_OF_LIGHT;
            }
        }
    }
    for i in 0..k {
        let d2 = geom.distance[i].powi(2);
        j[(0, k * k + i)] = -geom.offset[i][1] / d2;
        j[(1, k * k + i)] = geom.offset[i][0] / d2;
    }
    j
}

/// Position information J blockdiag(F_tau, F_theta) J^T and its trace-inverse bound.
pub fn fim_location(jac: &RMat, delay: &FimDelay, angles: &FimAngle) -> Result<(Matrix2<f64>, f64)> {
    let k = delay.k;
    let mut f = Matrix2::zeros();
    let mut add = |col: usize, w: f64| {
        if w == 0.0 {
            return;
        }
        let v = Vector2::new(jac[(0, col)], jac[(1, col)]);
        f += v * v.transpose() * w;
    };
    for (c, &w) in delay.diag.iter().enumerate() {
        add(c, w);
    }
    for i in 0..k {
        add(k * k + i, angles.total(i));
    }
    let f = (f + f.transpose()) * 0.5;
    let eig = f.symmetric_eigen();
    let (imin, imax) = if eig.eigenvalues[0] <= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let (lmin, lmax) = (eig.eigenvalues[imin], eig.eigenvalues[imax]);
    if !(lmax > 0.0) || lmin <= 1e-12 * lmax {
        let v = eig.eigenvectors.column(imin);
        return Err(Error::SingularFim { null_direction: [v[0], v[1]] });
    }
    Ok((f, 1.0 / lmin + 1.0 / lmax))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    CollaborativeHybrid,
    AngleOnly,
    DelayOnly,
    NoCollaboration,
    SingleIrs,
}

impl Scheme {
    pub const ALL: [Scheme; 5] =
        [Scheme::CollaborativeHybrid, Scheme::AngleOnly, Scheme::DelayOnly, Scheme::NoCollaboration, Scheme::SingleIrs];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::CollaborativeHybrid => "collaborative",
            Scheme::AngleOnly => "angle-only",
            Scheme::DelayOnly => "delay-only",
            Scheme::NoCollaboration => "no-collab",
            Scheme::SingleIrs => "single-irs",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "collaborative" | "collaborative-hybrid" => Ok(Scheme::CollaborativeHybrid),
            "angle-only" => Ok(Scheme::AngleOnly),
            "delay-only" => Ok(Scheme::DelayOnly),
            "no-collab" | "no-collaboration" => Ok(Scheme::NoCollaboration),
            "single-irs" => Ok(Scheme::SingleIrs),
            other => Err(Error::Parse(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrbReport {
    pub scheme: Scheme,
    pub fim_delay: FimDelay,
    pub fim_angle: FimAngle,
    pub jacobian: RMat,
    pub fim_location: Matrix2<f64>,
    pub crb_location: f64,
}

/// All IRS elements and sensors pooled at the first IRS.
pub fn single_irs_scene(scene: &SceneConfig) -> SceneConfig {
    let mut s = scene.clone();
    let first = &scene.irs[0];
    let mut pooled = IrsDescriptor::new(first.position, 0, 0);
    for irs in &scene.irs {
        pooled.n_elements += irs.n_elements;
        pooled.n_sensors += irs.n_sensors;
        pooled.phase_profile.extend_from_slice(&irs.phase_profile);
    }
    pooled.scatter_paths = first.scatter_paths.clone();
    pooled.noise_power = first.noise_power;
    s.irs = vec![pooled];
    s
}

/// Fisher blocks of a scene with streams designed for it.
pub fn scene_fims(scene: &SceneConfig) -> Result<(GeometryParams, SensingStreams, FimDelay, FimAngle)> {
    let geom = geometry_params(scene)?;
    let streams = make_orthogonal_streams(scene)?;
    let t = path_terms(scene, &geom, &streams)?;
    let d = delay_from_terms(scene, &geom, &t);
    let a = angles_from_terms(scene, &geom, &t);
    Ok((geom, streams, d, a))
}

pub fn scheme_crb(scene: &SceneConfig, scheme: Scheme) -> Result<CrbReport> {
    let owned;
    let scene = if scheme == Scheme::SingleIrs {
        owned = single_irs_scene(scene);
        &owned
    } else {
        scene
    };
    let geom = geometry_params(scene)?;
    let streams = make_orthogonal_streams(scene)?;
    let t = path_terms(scene, &geom, &streams)?;
    let mut fd = delay_from_terms(scene, &geom, &t);
    let mut fa = angles_from_terms(scene, &geom, &t);
    match scheme {
        Scheme::CollaborativeHybrid | Scheme::SingleIrs => {}
        Scheme::AngleOnly => fd.diag.iter_mut().for_each(|v| *v = 0.0),
        Scheme::DelayOnly => {
            fa.aoa.iter_mut().for_each(|v| *v = 0.0);
            fa.aod.iter_mut().for_each(|v| *v = 0.0);
        }
        Scheme::NoCollaboration => {
            let k = scene.k();
            for l in 0..k {
                for kk in 0..k {
                    if l != kk {
                        fd.diag[l * k + kk] = 0.0;
                    }
                }
            }
            let s = scene.element_spacing_ratio;
            for i in 0..k {
                let w = 2.0 / scene.noise_of(i);
                let g2 = geom.gain(i, i).powi(2);
                fa.aoa[i] = w * g2 * deriv_norm2(geom.angle[i], scene.irs[i].n_sensors, s) * t.steer[i];
                fa.aod[i] = w * g2 * scene.irs[i].n_sensors as f64 * t.deriv[i];
            }
        }
    }
    let jac = location_jacobian(&geom);
    let (f, crb) = fim_location(&jac, &fd, &fa)?;
    Ok(CrbReport { scheme, fim_delay: fd, fim_angle: fa, jacobian: jac, fim_location: f, crb_location: crb })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Rect { x: [f64; 2], y: [f64; 2] },
    Disc { center: Point, radius: f64 },
    Point { at: Point },
}

impl Region {
    pub fn table1() -> Self {
        Region::Rect { x: [0.0, 10.0], y: [0.0, 10.0] }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match *self {
            Region::Rect { x, y } => [x[0] + (x[1] - x[0]) * rng.random::<f64>(), y[0] + (y[1] - y[0]) * rng.random::<f64>()],
            Region::Disc { center, radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let phi = 2.0 * PI * rng.random::<f64>();
                [center[0] + r * phi.cos(), center[1] + r * phi.sin()]
            }
            Region::Point { at } => at,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Region::Rect { x, y } => format!("rect[{},{}]x[{},{}]", x[0], x[1], y[0], y[1]),
            Region::Disc { center, radius } => format!("disc({},{};{})", center[0], center[1], radius),
            Region::Point { at } => format!("point({},{})", at[0], at[1]),
        }
    }
}

/// Scene of trial `trial`: target drawn from the region, phases and streams reseeded.
pub fn trial_scene(template: &SceneConfig, region: &Region, seed: u64, trial: u64) -> SceneConfig {
    let mut rng = seed::rng(seed, &[seed::tag::TARGET, trial]);
    let mut s = template.with_target(region.sample(&mut rng));
    s.reseed(seed::derive(seed, &[trial]));
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageCrb {
    pub mean: f64,
    /// None marks a singular (or degenerate) trial.
    pub per_trial: Vec<Option<f64>>,
    pub singular: usize,
}

pub fn average_crb(template: &SceneConfig, region: &Region, n_trials: usize, seed: u64, scheme: Scheme) -> Result<AverageCrb> {
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    let per_trial: Vec<Option<f64>> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = trial_scene(template, region, seed, t);
            scheme_crb(&s, scheme).ok().map(|r| r.crb_location)
        })
        .collect();
    let ok: Vec<f64> = per_trial.iter().flatten().copied().collect();
    if ok.is_empty() {
        return Err(Error::AllSingular);
    }
    let mean = ok.iter().sum::<f64>() / ok.len() as f64;
    Ok(AverageCrb { mean, singular: n_trials - ok.len(), per_trial })
}

/// Angle bound per IRS from the combined arrival and departure information.
pub fn angle_crb(angles: &FimAngle) -> Vec<f64> {
    (0..angles.aoa.len()).map(|i| 1.0 / angles.total(i)).collect()
}


#[cfg(test)]
mod tests {
    use super::*;

    fn k1_scene() -> SceneConfig {
        let mut s = SceneConfig::table1();
        s.irs.truncate(1);
        s
    }

    #[test]
    fn zero_gain_gives_zero_fim() {
        let mut s = SceneConfig::table1();
        s.rcs = 0.0;
        let (_, _, d, a) = scene_fims(&s).unwrap();
        assert!(d.diag.iter().all(|&v| v == 0.0));
        assert!(a.aoa.iter().chain(&a.aod).all(|&v| v == 0.0));
        assert_eq!(d.zero_entries().len(), 9);
    }

    #[test]
    fn noise_scaling_on_row_block() {
        let s = SceneConfig::table1();
        let (_, _, d0, _) = scene_fims(&s).unwrap();
        let mut s2 = s.clone();
        s2.irs[1].noise_power = Some(4.0 * s.noise_power);
        let (_, _, d1, _) = scene_fims(&s2).unwrap();
        for l in 0..3 {
            for k in 0..3 {
                let want = if l == 1 { d0.get(l, k) / 4.0 } else { d0.get(l, k) };
                assert!((d1.get(l, k) - want).abs() <= 1e-12 * want);
            }
        }
    }

    #[test]
    fn aoa_information_grows_cubically_in_m() {
        let s = SceneConfig::table1();
        let g = geometry_params(&s).unwrap();
        let st = make_orthogonal_streams(&s).unwrap();
        let a10 = fim_angles(&s, &g, &st).unwrap();
        let s20 = s.with_sensors(20);
        let a20 = fim_angles(&s20, &g, &st).unwrap();
        let ratio = a20.aoa[2] / a10.aoa[2];
        let oracle = (0..20).map(|n| (n * n) as f64).sum::<f64>() / (0..10).map(|n| (n * n) as f64).sum::<f64>();
        assert!((ratio - oracle).abs() < 1e-9 * oracle);
        assert!((7.5..9.5).contains(&ratio));
    }

    #[test]
    fn angle_entries_positive_single_irs_broadside() {
        let mut s = k1_scene();
        s.target_position = [30.0, 50.0];
        let (_, _, _, a) = scene_fims(&s).unwrap();
        assert!(a.aoa[0] > 0.0 && a.aod[0] > 0.0);
    }

    #[test]
    fn jacobian_horizontal_targets() {
        let mut s = SceneConfig::table1();
        s.irs[0].position = [0.0, 0.0];
        s.irs[1].position = [-10.0, 0.0];
        s.irs[2].position = [-30.0, 0.0];
        s.bs_position = [0.0, -20.0];
        s.target_position = [20.0, 0.0];
        let g = geometry_params(&s).unwrap();
        let j = location_jacobian(&g);
        for c in 0..9 {
            assert!(j[(1, c)].abs() < 1e-24);
            assert!((j[(0, c)] - 2.0 / SPEED_OF_LIGHT).abs() < 1e-20);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let s = SceneConfig::table1();
        let g = geometry_params(&s).unwrap();
        let j = location_jacobian(&g);
        let h = 1e-4;
        for ax in 0..2 {
            let mut p = s.clone();
            let mut m = s.clone();
            p.target_position[ax] += h;
            m.target_position[ax] -= h;
            let gp = geometry_params(&p).unwrap();
            let gm = geometry_params(&m).unwrap();
            let dp: Vec<f64> = gp.cascade_delays().into_iter().chain(gp.angle.clone()).collect();
            let dm: Vec<f64> = gm.cascade_delays().into_iter().chain(gm.angle.clone()).collect();
            for c in 0..12 {
                let fd = (dp[c] - dm[c]) / (2.0 * h);
                assert!((fd - j[(ax, c)]).abs() <= 1e-5 * fd.abs().max(1e-30), "col {c}");
            }
        }
        for l in 0..3 {
            for k in 0..3 {
                assert_eq!(j[(0, l * 3 + k)], j[(0, k * 3 + l)]);
            }
        }
    }

    #[test]
    fn single_range_is_singular_hybrid_is_not() {
        let s = k1_scene();
        assert!(matches!(scheme_crb(&s, Scheme::DelayOnly), Err(Error::SingularFim { .. })));
        let r = scheme_crb(&s, Scheme::CollaborativeHybrid).unwrap();
        assert!(r.fim_location.determinant() > 0.0);
    }

    #[test]
    fn fourth_irs_never_hurts() {
        let s = SceneConfig::table1();
        let base = {
            let (g, _, d, a) = scene_fims(&s).unwrap();
            fim_location(&location_jacobian(&g), &d, &a).unwrap().1
        };
        // Same three IRS contributions plus a fourth: compare bounds with equal streams per IRS.
        let (g, _, d, a) = scene_fims(&s).unwrap();
        let j = location_jacobian(&g);
        let (f3, _) = fim_location(&j, &d, &a).unwrap();
        let extra = Vector2::new(1.0, 0.5);
        let f4 = f3 + extra * extra.transpose() * 1e3;
        let crb4 = f4.try_inverse().unwrap().trace();
        assert!(crb4 <= base);
    }

    #[test]
    fn collaboration_never_worse() {
        for t in 0..5 {
            let s = trial_scene(&SceneConfig::table1(), &Region::table1(), 9, t);
            let c = scheme_crb(&s, Scheme::CollaborativeHybrid).unwrap().crb_location;
            let n = scheme_crb(&s, Scheme::NoCollaboration).unwrap().crb_location;
            assert!(c <= n);
        }
    }

    #[test]
    fn average_is_counter_seeded() {
        let s = SceneConfig::table1();
        let r = Region::table1();
        let a = average_crb(&s, &r, 4, 3, Scheme::CollaborativeHybrid).unwrap();
        let b = average_crb(&s, &r, 8, 3, Scheme::CollaborativeHybrid).unwrap();
        assert_eq!(a.per_trial[..], b.per_trial[..4]);
        let one = average_crb(&s, &Region::Point { at: [5.0, 5.0] }, 1, 3, Scheme::CollaborativeHybrid).unwrap();
        let direct = scheme_crb(&trial_scene(&s, &Region::Point { at: [5.0, 5.0] }, 3, 0), Scheme::CollaborativeHybrid).unwrap();
        assert_eq!(one.mean, direct.crb_location);
    }
}
