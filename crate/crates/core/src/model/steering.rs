use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::linalg::{CVec, C64};

fn check(theta: f64, count: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::Domain("steering vector needs at least one element".into()));
    }
    if !(-FRAC_PI_2..=FRAC_PI_2).contains(&theta) {
        return Err(Error::Domain(format!("angle {theta} outside [-pi/2, pi/2]")));
    }
    Ok(())
}

/// Uniform linear array response, element 0 is the phase reference.
pub fn steering_vector(theta: f64, count: usize, spacing_ratio: f64) -> Result<CVec> {
    check(theta, count)?;
    Ok(steering_unchecked(theta, count, spacing_ratio))
}

/// d/dtheta of [`steering_vector`].
pub fn steering_derivative(theta: f64, count: usize, spacing_ratio: f64) -> Result<CVec> {
    check(theta, count)?;
    let a = steering_unchecked(theta, count, spacing_ratio);
    let w = 2.0 * PI * spacing_ratio * theta.cos();
    Ok(CVec::from_fn(count, |n, _| a[n] * C64::new(0.0, w * n as f64)))
}

/// Second derivative, used by the trust-region Hessian.
pub fn steering_second_derivative(theta: f64, count: usize, spacing_ratio: f64) -> Result<CVec> {
    check(theta, count)?;
    let a = steering_unchecked(theta, count, spacing_ratio);
    let k = 2.0 * PI * spacing_ratio;
    Ok(CVec::from_fn(count, |n, _| {
        let n = n as f64;
        let d1 = k * n * theta.cos();
        let d2 = -k * n * theta.sin();
        a[n as usize] * C64::new(-d1 * d1, d2)
    }))
}

pub(crate) fn steering_unchecked(theta: f64, count: usize, spacing_ratio: f64) -> CVec {
    let step = 2.0 * PI * spacing_ratio * theta.sin();
    CVec::from_fn(count, |n, _| {
        if n == 0 {
            C64::new(1.0, 0.0)
        } else {
            C64::from_polar(1.0, step * n as f64)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadside_is_all_ones() {
        let a = steering_vector(0.0, 4, 0.5).unwrap();
        for z in a.iter() {
            assert!((z - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn endfire_alternates() {
        let a = steering_vector(FRAC_PI_2, 2, 0.5).unwrap();
        assert!((a[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((a[1] - C64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn constant_phase_increment() {
        let a = steering_vector(0.3, 8, 0.5).unwrap();
        let inner: C64 = a.iter().map(|z| z.conj() * z).sum();
        assert!((inner.re - 8.0).abs() < 1e-12 && inner.im.abs() < 1e-12);
        let expected = PI * 0.3f64.sin();
        assert!((expected - 0.9284).abs() < 1e-4);
        for n in 1..8 {
            let d = (a[n] * a[n - 1].conj()).arg();
            assert!((d - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_examples() {
        let d = steering_derivative(0.0, 3, 0.5).unwrap();
        assert!(d[0].norm() < 1e-15);
        assert!((d[1] - C64::new(0.0, PI)).norm() < 1e-12);
        assert!((d[2] - C64::new(0.0, 2.0 * PI)).norm() < 1e-12);
        let z = steering_derivative(FRAC_PI_2, 4, 0.5).unwrap();
        assert!(z.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn domain_errors() {
        assert!(steering_vector(2.0, 4, 0.5).is_err());
        assert!(steering_vector(0.1, 0, 0.5).is_err());
        assert!(steering_derivative(-1.6, 4, 0.5).is_err());
    }

    #[test]
    fn second_derivative_matches_difference() {
        let h = 1e-6;
        let (t, n) = (0.4, 7);
        let d2 = steering_second_derivative(t, n, 0.5).unwrap();
        let p = steering_derivative(t + h, n, 0.5).unwrap();
        let m = steering_derivative(t - h, n, 0.5).unwrap();
        let fd = (p - m) / C64::new(2.0 * h, 0.0);
        assert!((fd - &d2).norm() / d2.norm() < 1e-6);
    }
}
