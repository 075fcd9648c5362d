//! Interior-point reference for the joint atomic-norm program, via the real
//! embedding of each Hermitian PSD constraint.
#![allow(dead_code)]

use std::collections::BTreeMap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use irsloc_core::anm::{AdmmItem, SecondBlock};
use irsloc_core::linalg::{CMat, C64};
use rand::Rng;
use rand_distr::StandardNormal;

extern crate openblas_src;

/// Column index of upper-triangle entry (r, c), r <= c, in clarabel's svec.
fn svec_index(r: usize, c: usize) -> usize {
    c * (c + 1) / 2 + r
}

/// One real scalar of the program and the Hermitian entries it drives.
struct Basis {
    var: usize,
    entries: Vec<(usize, usize, C64)>,
}

fn hermitian_pair(i: usize, j: usize, val: C64) -> Vec<(usize, usize, C64)> {
    if i == j {
        vec![(i, i, C64::new(val.re, 0.0))]
    } else {
        vec![(i, j, val), (j, i, val.conj())]
    }
}

/// Hermitian Toeplitz block of size n starting at diagonal index `at`; returns its basis and the diagonal variable.
fn toeplitz_basis(n: usize, at: usize, next: &mut usize) -> (Vec<Basis>, usize) {
    let mut out = Vec::new();
    let diag = *next;
    out.push(Basis { var: diag, entries: (0..n).map(|i| (at + i, at + i, C64::new(1.0, 0.0))).collect() });
    *next += 1;
    for off in 1..n {
        for unit in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
            let entries = (0..n - off).flat_map(|i| hermitian_pair(at + i, at + i + off, unit)).collect();
            out.push(Basis { var: *next, entries });
            *next += 1;
        }
    }
    (out, diag)
}

/// Returns the optimal objective of
///   sum_k w_k [tr T(v) + tr B2_k + lambda ||X_k - Y_k||^2]  (w normalized)
/// subject to each [T(v) X_k; X_k^H B2_k] being PSD.
pub fn sdp_objective(items: &[AdmmItem], lambda: f64) -> f64 {
    let m = items[0].target.nrows();
    let total: f64 = items.iter().map(|i| i.weight).sum();
    let mut next = 0usize;
    let (v_basis, v0) = toeplitz_basis(m, 0, &mut next);
    let mut q_lin: BTreeMap<usize, f64> = BTreeMap::new();
    let mut p_diag: BTreeMap<usize, f64> = BTreeMap::new();
    let mut constant = 0.0;
    let mut a_trip: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut cones = Vec::new();
    let mut row0 = 0usize;
    for it in items {
        let wk = it.weight / total;
        let w = it.target.ncols();
        let n = m + w;
        let mut basis: Vec<Basis> = v_basis.iter().map(|b| Basis { var: b.var, entries: b.entries.clone() }).collect();
        *q_lin.entry(v0).or_default() += wk * m as f64;
        match it.block {
            SecondBlock::Toeplitz => {
                let (b2, u0) = toeplitz_basis(w, m, &mut next);
                *q_lin.entry(u0).or_default() += wk * w as f64;
                basis.extend(b2);
            }
            SecondBlock::Dense => {
                for i in 0..w {
                    basis.push(Basis { var: next, entries: vec![(m + i, m + i, C64::new(1.0, 0.0))] });
                    *q_lin.entry(next).or_default() += wk;
                    next += 1;
                    for j in i + 1..w {
                        for unit in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                            basis.push(Basis { var: next, entries: hermitian_pair(m + i, m + j, unit) });
                            next += 1;
                        }
                    }
                }
            }
        }
        for a in 0..m {
            for b in 0..w {
                let y = it.target[(a, b)];
                for (unit, yv) in [(C64::new(1.0, 0.0), y.re), (C64::new(0.0, 1.0), y.im)] {
                    basis.push(Basis { var: next, entries: hermitian_pair(a, m + b, unit) });
                    *p_diag.entry(next).or_default() += 2.0 * lambda * wk;
                    *q_lin.entry(next).or_default() += -2.0 * lambda * wk * yv;
                    constant += lambda * wk * yv * yv;
                    next += 1;
                }
            }
        }
        // Real embedding [[Re H, -Im H], [Im H, Re H]] in svec form; s = -A z.
        for bs in &basis {
            let mut real: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for &(i, j, c) in &bs.entries {
                for (r, cc, val) in [(i, j, c.re), (i + n, j + n, c.re), (i, j + n, -c.im), (i + n, j, c.im)] {
                    *real.entry((r, cc)).or_default() += val;
                }
            }
            for ((r, c), val) in real {
                if r > c || val == 0.0 {
                    continue;
                }
                let scale = if r == c { 1.0 } else { std::f64::consts::SQRT_2 };
                *a_trip.entry((row0 + svec_index(r, c), bs.var)).or_default() -= scale * val;
            }
        }
        let dim = 2 * n;
        cones.push(SupportedConeT::PSDTriangleConeT(dim));
        row0 += dim * (dim + 1) / 2;
    }
    let nvar = next;
    let a = csc(row0, nvar, &a_trip);
    let p = csc(nvar, nvar, &p_diag.iter().map(|(&k, &v)| ((k, k), v)).collect());
    let q: Vec<f64> = (0..nvar).map(|i| q_lin.get(&i).copied().unwrap_or(0.0)).collect();
    let b = vec![0.0; row0];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-10)
        .tol_gap_rel(1e-10)
        .tol_feas(1e-10)
        .max_iter(500)
        .build()
        .unwrap();
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).unwrap();
    solver.solve();
    let st = solver.solution.status;
    assert!(matches!(st, SolverStatus::Solved | SolverStatus::AlmostSolved), "interior point status {st:?}");
    solver.solution.obj_val + constant
}

fn csc(m: usize, n: usize, trip: &BTreeMap<(usize, usize), f64>) -> CscMatrix<f64> {
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (&(r, c), &v) in trip {
        cols[c].push((r, v));
    }
    let mut colptr = vec![0];
    let (mut rowval, mut nzval) = (Vec::new(), Vec::new());
    for col in cols.iter_mut() {
        col.sort_by_key(|e| e.0);
        for &(r, v) in col.iter() {
            rowval.push(r);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

pub fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Random M x N instance: two steering atoms with random mixing plus noise.
pub fn random_instance<R: Rng>(rng: &mut R, m: usize, n: usize) -> CMat {
    let mut y = gaussian(rng, m, n) * C64::new(0.1, 0.0);
    for _ in 0..2 {
        let theta: f64 = rng.random_range(-1.2..1.2);
        let a = irsloc_core::model::steering_vector(theta, m, 0.5).unwrap();
        let coeffs = gaussian(rng, 1, n);
        y += &a * coeffs;
    }
    y
}
