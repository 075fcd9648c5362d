//! Small dense linear-algebra helpers on top of nalgebra, with faer for SVDs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub const J: C64 = C64 { re: 0.0, im: 1.0 };

/// Circular complex Gaussian matrix with per-entry variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CMat {
    let s = (var / 2.0).sqrt();
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(s * re, s * im)
    })
}

/// Haar-distributed unitary matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let g = complex_gaussian(rng, n, n, 1.0);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

pub fn hermitian_part(x: &CMat) -> CMat {
    (x + x.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
pub fn herm_eig(x: &CMat) -> (Vec<f64>, CMat) {
    let h = hermitian_part(x);
    let eig = h.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// Nearest positive semidefinite matrix in Frobenius norm.
pub fn psd_project(x: &CMat) -> CMat {
    let (vals, vecs) = herm_eig(x);
    let n = vals.len();
    let mut out = CMat::zeros(n, n);
    for (j, &lam) in vals.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        let v = vecs.column(j);
        out += (&v * v.adjoint()) * C64::new(lam, 0.0);
    }
    hermitian_part(&out)
}

/// Singular value decomposition with values sorted descending.
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

pub fn svd(x: &CMat) -> Svd {
    let (m, n) = x.shape();
    if m == 0 || n == 0 {
        return Svd { u: CMat::zeros(m, 0), s: vec![], v: CMat::zeros(n, 0) };
    }
    // nalgebra's complex bidiagonal SVD can return a wrong factorization on
    // rank-deficient wide inputs; faer's is used instead.
    let a = faer::Mat::<C64>::from_fn(m, n, |i, j| x[(i, j)]);
    let d = a.thin_svd().expect("SVD converges on finite input");
    let k = m.min(n);
    let sv = d.S().column_vector();
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&p, &q| sv[q].re.total_cmp(&sv[p].re));
    let s = idx.iter().map(|&i| sv[i].re).collect();
    let u = CMat::from_fn(m, k, |r, c| d.U()[(r, idx[c])]);
    let v = CMat::from_fn(n, k, |r, c| d.V()[(r, idx[c])]);
    Svd { u, s, v }
}

/// Number of singular values above `tol` times the largest.
pub fn numerical_rank(s: &[f64], tol: f64) -> usize {
    let top = s.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol * top).count()
}

/// Orthonormal basis (columns) of the null space of `a`.
pub fn null_space(a: &CMat, tol: f64) -> CMat {
    let n = a.ncols();
    if a.nrows() == 0 {
        return CMat::identity(n, n);
    }
    let d = svd(a);
    let r = numerical_rank(&d.s, tol);
    if r == 0 {
        return CMat::identity(n, n);
    }
    let vr = d.v.columns(0, r).into_owned();
    let proj = CMat::identity(n, n) - &vr * vr.adjoint();
    let (vals, vecs) = herm_eig(&proj);
    let k = vals.iter().filter(|&&x| x > 0.5).count();
    vecs.columns(0, k).into_owned()
}

pub fn fro2<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<C64, R, C>>(x: &nalgebra::Matrix<C64, R, C, S>) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

pub fn vec_norm2(x: &CVec) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Moore-Penrose pseudo-inverse of a real matrix.
pub fn pinv(a: &RMat) -> RMat {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return RMat::zeros(n, m);
    }
    let d = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]).thin_svd().expect("SVD converges on finite input");
    let sv = d.S().column_vector();
    let top = (0..sv.nrows()).map(|i| sv[i]).fold(0.0, f64::max);
    let mut out = RMat::zeros(n, m);
    for c in 0..sv.nrows() {
        if sv[c] > 1e-12 * top {
            let vc = RVec::from_fn(n, |r, _| d.V()[(r, c)]);
            let uc = RVec::from_fn(m, |r, _| d.U()[(r, c)]);
            out += vc * uc.transpose() / sv[c];
        }
    }
    out
}

pub fn to_complex(x: &RMat) -> CMat {
    x.map(|v| C64::new(v, 0.0))
}
