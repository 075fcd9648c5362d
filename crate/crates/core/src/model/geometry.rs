use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::scene::{Point, SceneConfig, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

/// Bearing of `to` seen from `from`, as the principal arctangent of dy/dx.
pub fn bearing(from: Point, to: Point) -> f64 {
    let dx = to[0] - from[0];
    let dy = to[1] - from[1];
    let mut t = dy.atan2(dx);
    if t > FRAC_PI_2 {
        t -= PI;
    } else if t < -FRAC_PI_2 {
        t += PI;
    }
    t
}

/// Difference of two bearings as line directions, in [-pi/2, pi/2).
pub fn wrap_angle(d: f64) -> f64 {
    (d + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Target-dependent distances, angles, delays and gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    pub k: usize,
    pub distance: Vec<f64>,
    pub angle: Vec<f64>,
    pub delay: Vec<f64>,
    pub bs_delay: Vec<f64>,
    /// Target minus IRS position, per IRS.
    pub offset: Vec<Point>,
    gain: Vec<f64>,
}

impl GeometryParams {
    pub fn cascade_delay(&self, l: usize, k: usize) -> f64 {
        self.delay[l] + self.delay[k]
    }

    /// Total lag of the path BS -> IRS k -> target -> IRS l.
    pub fn total_delay(&self, l: usize, k: usize) -> f64 {
        self.bs_delay[k] + self.cascade_delay(l, k)
    }

    pub fn gain(&self, l: usize, k: usize) -> f64 {
        self.gain[l * self.k + k]
    }

    pub fn cascade_delays(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.k * self.k);
        for l in 0..self.k {
            for k in 0..self.k {
                out.push(self.cascade_delay(l, k));
            }
        }
        out
    }
}

pub fn geometry_params(scene: &SceneConfig) -> Result<GeometryParams> {
    let k = scene.k();
    let t = scene.target_position;
    let mut g = GeometryParams {
        k,
        distance: Vec::with_capacity(k),
        angle: Vec::with_capacity(k),
        delay: Vec::with_capacity(k),
        bs_delay: Vec::with_capacity(k),
        offset: Vec::with_capacity(k),
        gain: vec![0.0; k * k],
    };
    for (i, irs) in scene.irs.iter().enumerate() {
        let d = dist(t, irs.position);
        if !(d > 0.0) {
            return Err(Error::DegenerateGeometry(format!("target coincides with IRS {i}")));
        }
        g.distance.push(d);
        g.angle.push(bearing(irs.position, t));
        g.delay.push(d / SPEED_OF_LIGHT);
        g.bs_delay.push(dist(irs.position, scene.bs_position) / SPEED_OF_LIGHT);
        g.offset.push([t[0] - irs.position[0], t[1] - irs.position[1]]);
    }
    let lam2k = scene.wavelength.powi(2) * scene.rcs;
    for l in 0..k {
        for kk in 0..k {
            let den = 64.0 * PI.powi(3) * g.distance[kk].powi(2) * g.distance[l].powi(2);
            g.gain[l * k + kk] = (lam2k / den).sqrt();
        }
    }
    Ok(g)
}
