//! Angle read from the dominant eigenvector of a Toeplitz block.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::toeplitz::toeplitz;
use crate::error::{Error, Result};
use crate::linalg::{herm_eig, CVec};
use crate::model::steering_vector;
use crate::optim::golden_max;

pub const GRID_POINTS: usize = 2048;
/// Eigenvalue ratio below which a single-source read is flagged.
pub const CONFIDENT_GAP: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToeplitzAngle {
    pub theta: f64,
    /// Largest over second-largest eigenvalue (infinite when the rest vanish).
    pub gap_ratio: f64,
    pub low_confidence: bool,
}

/// Maximizer of |a(theta)^H w| over [-pi/2, pi/2]: grid scan, then golden section.
pub fn steering_match(w: &CVec, spacing: f64) -> f64 {
    let n = w.len();
    let score = |t: f64| {
        let a = steering_vector(t.clamp(-FRAC_PI_2, FRAC_PI_2), n, spacing).expect("clamped angle");
        a.dotc(w).norm_sqr()
    };
    let step = 2.0 * FRAC_PI_2 / (GRID_POINTS - 1) as f64;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..GRID_POINTS {
        let s = score(-FRAC_PI_2 + i as f64 * step);
        if s > best.1 {
            best = (i, s);
        }
    }
    let c = -FRAC_PI_2 + best.0 as f64 * step;
    let (lo, hi) = ((c - step).max(-FRAC_PI_2), (c + step).min(FRAC_PI_2));
    let (t, s) = golden_max(score, lo, hi, 1e-9);
    if s >= best.1 {
        t
    } else {
        c
    }
}

pub fn angle_from_toeplitz(v: &CVec, spacing: f64) -> Result<ToeplitzAngle> {
    let t = toeplitz(v)?;
    let (vals, vecs) = herm_eig(&t);
    let top = vals[0];
    let scale = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if !(top > 1e-12 * scale.max(f64::MIN_POSITIVE)) || scale < 1e-300 {
        return Err(Error::DegenerateGeometry("Toeplitz block has no positive dominant eigenvalue".into()));
    }
    let second = vals.get(1).copied().unwrap_or(0.0);
    let gap_ratio = if second > 1e-12 * top { top / second } else { f64::INFINITY };
    let w: CVec = vecs.column(0).into_owned();
    Ok(ToeplitzAngle { theta: steering_match(&w, spacing), gap_ratio, low_confidence: gap_ratio < CONFIDENT_GAP })
}
