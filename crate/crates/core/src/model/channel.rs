use std::f64::consts::PI;

use super::geometry::{bearing, GeometryParams};
use super::scene::{PathSpec, SceneConfig};
use super::steering::steering_vector;
use crate::error::Result;
use crate::linalg::{CMat, C64};

/// Geometric line-of-sight path from the BS to IRS `k`.
pub fn los_path(scene: &SceneConfig, k: usize) -> PathSpec {
    let p = scene.irs[k].position;
    let b = scene.bs_position;
    let d = (p[0] - b[0]).hypot(p[1] - b[1]);
    PathSpec {
        gain: scene.wavelength / (4.0 * PI * d),
        aoa: bearing(p, b),
        aod: bearing(b, p),
    }
}

/// Sum of rank-one path terms gain * a(aoa, N) a(aod, N_t)^H.
pub fn make_bs_irs_channel(scene: &SceneConfig, k: usize, paths: &[PathSpec]) -> Result<CMat> {
    let n = scene.irs[k].n_elements;
    let s = scene.element_spacing_ratio;
    let mut h = CMat::zeros(n, scene.n_tx);
    for p in paths {
        let ar = steering_vector(p.aoa, n, s)?;
        let at = steering_vector(p.aod, scene.n_tx, s)?;
        h += (&ar * at.adjoint()) * C64::new(p.gain, 0.0);
    }
    Ok(h)
}

/// Line of sight plus the IRS's configured scatter paths.
pub fn scene_channel(scene: &SceneConfig, k: usize) -> Result<CMat> {
    let mut paths = vec![los_path(scene, k)];
    paths.extend_from_slice(&scene.irs[k].scatter_paths);
    make_bs_irs_channel(scene, k, &paths)
}

/// IRS k -> target -> IRS l channel (M_l x N_k).
pub fn make_cascade_channel(scene: &SceneConfig, geom: &GeometryParams, l: usize, k: usize) -> Result<CMat> {
    let s = scene.element_spacing_ratio;
    let ar = steering_vector(geom.angle[l], scene.irs[l].n_sensors, s)?;
    let at = steering_vector(geom.angle[k], scene.irs[k].n_elements, s)?;
    Ok((ar * at.adjoint()) * C64::new(geom.gain(l, k), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{numerical_rank, svd};
    use crate::model::geometry::geometry_params;

    #[test]
    fn broadside_path_is_all_ones() {
        let s = SceneConfig::table1();
        let h = make_bs_irs_channel(&s, 0, &[PathSpec { gain: 1.0, aoa: 0.0, aod: 0.0 }]).unwrap();
        assert_eq!(h.shape(), (10, 50));
        assert!(h.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn two_paths_rank_two() {
        let s = SceneConfig::table1();
        let paths = [
            PathSpec { gain: 1.0, aoa: 0.2, aod: -0.4 },
            PathSpec { gain: 1.0, aoa: -0.7, aod: 0.5 },
        ];
        let h = make_bs_irs_channel(&s, 0, &paths).unwrap();
        assert_eq!(numerical_rank(&svd(&h).s, 1e-8), 2);
    }

    #[test]
    fn cascade_norm_and_rank() {
        let s = SceneConfig::table1();
        let g = geometry_params(&s).unwrap();
        let h = make_cascade_channel(&s, &g, 0, 2).unwrap();
        let fro = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((fro - g.gain(0, 2) * 10.0).abs() < 1e-18);
        assert_eq!(numerical_rank(&svd(&h).s, 1e-8), 1);
        let ht = make_cascade_channel(&s, &g, 2, 0).unwrap();
        assert!((h - ht.adjoint()).norm() < 1e-18);
    }
}
