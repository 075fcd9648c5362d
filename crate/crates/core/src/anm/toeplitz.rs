//! Hermitian Toeplitz parameterization and its weighted adjoint.

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};

/// Hermitian Toeplitz matrix with first row `u`: T[i][j] = u[j - i] for j >= i.
pub fn toeplitz(u: &CVec) -> Result<CMat> {
    if u.is_empty() {
        return Err(Error::Shape("empty Toeplitz parameter".into()));
    }
    if u[0].im.abs() > 1e-12 {
        return Err(Error::Domain(format!("Toeplitz diagonal must be real, got imaginary part {:e}", u[0].im)));
    }
    Ok(toeplitz_unchecked(u))
}

pub(crate) fn toeplitz_unchecked(u: &CVec) -> CMat {
    let n = u.len();
    CMat::from_fn(n, n, |i, j| {
        if j > i {
            u[j - i]
        } else if i > j {
            u[i - j].conj()
        } else {
            C64::new(u[0].re, 0.0)
        }
    })
}

/// Trace in entry 0, twice the sum of superdiagonal `n` in entry n.
///
/// For Hermitian X this satisfies Re tr(T(u)^H X) = Re(u^H f(X)).
pub fn toeplitz_adjoint(x: &CMat, n: usize) -> Result<CVec> {
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::Shape(format!("expected {n}x{n}, got {}x{}", x.nrows(), x.ncols())));
    }
    let mut f = CVec::zeros(n);
    f[0] = x.trace();
    for off in 1..n {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..n - off {
            s += x[(i, i + off)];
        }
        f[off] = s * 2.0;
    }
    Ok(f)
}

/// Entry counts behind each adjoint entry: n for the diagonal, 2(n - off) otherwise.
pub fn toeplitz_weights(n: usize) -> Vec<f64> {
    (0..n).map(|off| if off == 0 { n as f64 } else { 2.0 * (n - off) as f64 }).collect()
}

/// Nearest Hermitian Toeplitz parameter (Frobenius sense) to a square matrix:
/// the mean of each diagonal of its Hermitian part, with `shift` subtracted from u[0].
pub(crate) fn project_toeplitz(c: &CMat, shift: f64) -> CVec {
    let n = c.nrows();
    let f = toeplitz_adjoint(&crate::linalg::hermitian_part(c), n).expect("square block");
    let g = toeplitz_weights(n);
    let mut u = CVec::from_fn(n, |i, _| f[i] / g[i]);
    u[0] = C64::new(u[0].re - shift, 0.0);
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_first_entry_is_identity() {
        let u = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        assert_eq!(toeplitz(&u).unwrap(), CMat::identity(3, 3));
        let u = CVec::from_vec(vec![C64::new(2.5, 0.0), C64::new(0.0, 0.0)]);
        assert_eq!(toeplitz(&u).unwrap(), CMat::identity(2, 2) * C64::new(2.5, 0.0));
    }

    #[test]
    fn complex_diagonal_rejected() {
        let u = CVec::from_vec(vec![C64::new(1.0, 1e-6), C64::new(0.0, 0.0)]);
        assert!(matches!(toeplitz(&u), Err(Error::Domain(_))));
    }

    #[test]
    fn layout() {
        let u = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(2.0, 1.0), C64::new(3.0, -1.0)]);
        let t = toeplitz(&u).unwrap();
        assert_eq!(t[(0, 2)], C64::new(3.0, -1.0));
        assert_eq!(t[(2, 0)], C64::new(3.0, 1.0));
        assert_eq!(t[(1, 2)], C64::new(2.0, 1.0));
        assert_eq!(t[(2, 1)], C64::new(2.0, -1.0));
        assert_eq!(t, t.adjoint());
    }

    #[test]
    fn adjoint_hand_counts() {
        let ones = CMat::from_element(3, 3, C64::new(1.0, 0.0));
        let f = toeplitz_adjoint(&ones, 3).unwrap();
        assert_eq!(f.iter().map(|z| z.re).collect::<Vec<_>>(), vec![3.0, 4.0, 2.0]);
        let f = toeplitz_adjoint(&CMat::identity(4, 4), 4).unwrap();
        assert_eq!(f.iter().map(|z| z.re).collect::<Vec<_>>(), vec![4.0, 0.0, 0.0, 0.0]);
        assert!(matches!(toeplitz_adjoint(&ones, 4), Err(Error::Shape(_))));
    }

    #[test]
    fn round_trip_is_weighted() {
        let u = CVec::from_vec(vec![C64::new(0.7, 0.0), C64::new(-0.2, 0.4), C64::new(0.1, 0.3), C64::new(0.5, -0.6)]);
        let f = toeplitz_adjoint(&toeplitz(&u).unwrap(), 4).unwrap();
        let g = toeplitz_weights(4);
        assert_eq!(g, vec![4.0, 6.0, 4.0, 2.0]);
        for i in 0..4 {
            assert!((f[i] - u[i] * g[i]).norm() < 1e-14);
        }
        let back = project_toeplitz(&toeplitz(&u).unwrap(), 0.0);
        assert!((back - u).norm() < 1e-14);
    }
}
