//! Weighted joint atomic-norm ADMM over a batch of observations sharing one
//! Toeplitz-structured angle block.
//!
//! For each item k with target Y_k (M x w_k) the solver works on
//!
//!   min  sum_k e_k [ tr T(v) + tr B2_k + lambda ||X_k - Y_k||^2 ]
//!   s.t. [T(v) X_k; X_k^H B2_k] is PSD for every k,
//!
//! where B2_k is T(u_k) (Toeplitz items) or a dense Hermitian block P_k. The
//! PSD copy Z_k and multiplier G_k carry the constraint, with the augmented
//! term <G_k, Z_k - B_k> + rho ||Z_k - B_k||^2.

use serde::{Deserialize, Serialize};

use super::toeplitz::{project_toeplitz, toeplitz_unchecked};
use crate::error::{Error, Result};
use crate::linalg::{fro2, herm_eig, hermitian_part, psd_project, CMat, CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmHyper {
    pub rho: f64,
    pub lambda: f64,
    /// Bound on the summed squared change of the X blocks.
    pub eps_x: f64,
    /// Bound on the summed squared change of the Z blocks.
    pub eps_z: f64,
    pub max_iter: usize,
    /// Record one [`TraceRow`] per iteration.
    pub trace: bool,
}

impl Default for AdmmHyper {
    fn default() -> Self {
        AdmmHyper { rho: 1.0, lambda: 10.0, eps_x: 1e-8, eps_z: 1e-8, max_iter: 5000, trace: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondBlock {
    Toeplitz,
    Dense,
}

#[derive(Debug, Clone)]
pub struct AdmmItem {
    pub target: CMat,
    pub weight: f64,
    pub block: SecondBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dx: f64,
    pub dz: f64,
    /// Smallest eigenvalue over the Z blocks relative to their norm.
    pub min_eig: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmmSolution {
    pub v: CVec,
    /// T(u_k) or P_k per item.
    pub second: Vec<CMat>,
    pub x: Vec<CMat>,
    pub z: Vec<CMat>,
    pub iterations: usize,
    pub dx: f64,
    pub dz: f64,
    /// sqrt(sum_k ||Z_k - B_k||^2) at exit.
    pub primal_residual: f64,
    /// Objective with weights normalized to sum 1.
    pub objective: f64,
    pub converged: bool,
    /// Targets were divided by this before solving; v and X are in the scaled units.
    pub scale: f64,
    pub trace: Vec<TraceRow>,
}

fn assemble(tv: &CMat, x: &CMat, b2: &CMat) -> CMat {
    let (m, w) = x.shape();
    let mut b = CMat::zeros(m + w, m + w);
    b.view_mut((0, 0), (m, m)).copy_from(tv);
    b.view_mut((0, m), (m, w)).copy_from(x);
    b.view_mut((m, 0), (w, m)).copy_from(&x.adjoint());
    b.view_mut((m, m), (w, w)).copy_from(b2);
    b
}

/// Weighted objective (weights summing to 1) at given blocks.
pub fn objective(items: &[AdmmItem], v0: f64, second: &[CMat], x: &[CMat], lambda: f64) -> f64 {
    let total: f64 = items.iter().map(|it| it.weight).sum();
    items
        .iter()
        .zip(second.iter().zip(x))
        .map(|(it, (b2, xk))| {
            let m = it.target.nrows() as f64;
            it.weight / total * (b2.trace().re + m * v0 + lambda * fro2(&(xk - &it.target)))
        })
        .sum()
}

fn validate(items: &[AdmmItem]) -> Result<usize> {
    let first = items.first().ok_or_else(|| Error::Shape("empty ADMM batch".into()))?;
    let m = first.target.nrows();
    let mut total = 0.0;
    for it in items {
        if it.target.nrows() != m {
            return Err(Error::Shape(format!("targets have {} and {} rows", m, it.target.nrows())));
        }
        if it.target.ncols() == 0 {
            return Err(Error::Shape("target with zero columns".into()));
        }
        if !(it.weight >= 0.0) || !it.weight.is_finite() {
            return Err(Error::Domain(format!("weight {} must be finite and nonnegative", it.weight)));
        }
        total += it.weight;
    }
    if total <= 0.0 {
        return Err(Error::Domain("batch weights sum to zero".into()));
    }
    Ok(m)
}

/// Runs the iteration on the targets as given. Non-convergence is reported
/// through `converged`, not as an error.
pub fn admm_solve(items: &[AdmmItem], hyper: &AdmmHyper) -> Result<AdmmSolution> {
    let m = validate(items)?;
    if !(hyper.rho > 0.0 && hyper.lambda > 0.0) {
        return Err(Error::Domain("rho and lambda must be positive".into()));
    }
    let total: f64 = items.iter().map(|it| it.weight).sum();
    let wts: Vec<f64> = items.iter().map(|it| it.weight / total).collect();
    let (rho, lambda) = (hyper.rho, hyper.lambda);
    let half = 1.0 / (2.0 * rho);
    let n_items = items.len();

    let mut x: Vec<CMat> = items.iter().map(|it| it.target.clone()).collect();
    let mut z: Vec<CMat> = items.iter().map(|it| CMat::zeros(m + it.target.ncols(), m + it.target.ncols())).collect();
    let mut g: Vec<CMat> = z.clone();
    let mut second: Vec<CMat> = items.iter().map(|it| CMat::zeros(it.target.ncols(), it.target.ncols())).collect();
    let mut v = CVec::zeros(m);
    let mut trace = Vec::new();
    let (mut dx, mut dz, mut primal) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < hyper.max_iter {
        iterations += 1;
        let c: Vec<CMat> = z.iter().zip(&g).map(|(zk, gk)| zk + gk * C64::new(half, 0.0)).collect();

        // Shared angle block: weighted average of per-item Toeplitz projections.
        let mut vn = CVec::zeros(m);
        for (ck, &w) in c.iter().zip(&wts) {
            vn += project_toeplitz(&ck.view((0, 0), (m, m)).into_owned(), 0.0) * C64::new(w, 0.0);
        }
        vn[0] = C64::new(vn[0].re - half, 0.0);
        v = vn;
        let tv = toeplitz_unchecked(&v);

        let (mut sx, mut sz, mut sp) = (0.0, 0.0, 0.0);
        let mut min_eig = f64::INFINITY;
        for k in 0..n_items {
            let w = items[k].target.ncols();
            let c2 = c[k].view((m, m), (w, w)).into_owned();
            second[k] = match items[k].block {
                SecondBlock::Toeplitz => toeplitz_unchecked(&project_toeplitz(&c2, half)),
                SecondBlock::Dense => hermitian_part(&c2) - CMat::identity(w, w) * C64::new(half, 0.0),
            };
            let c1 = c[k].view((0, m), (m, w)).into_owned();
            let xn = (&items[k].target * C64::new(lambda, 0.0) + c1 * C64::new(2.0 * rho, 0.0)) / C64::new(lambda + 2.0 * rho, 0.0);
            sx += fro2(&(&xn - &x[k]));
            x[k] = xn;
            let b = assemble(&tv, &x[k], &second[k]);
            let zn = psd_project(&(&b - &g[k] * C64::new(half, 0.0)));
            sz += fro2(&(&zn - &z[k]));
            let gap = &zn - &b;
            sp += fro2(&gap);
            g[k] += gap * C64::new(rho, 0.0);
            if hyper.trace {
                let (vals, _) = herm_eig(&zn);
                let norm = fro2(&zn).sqrt().max(f64::MIN_POSITIVE);
                min_eig = min_eig.min(vals.last().copied().unwrap_or(0.0) / norm);
            }
            z[k] = zn;
        }
        dx = sx;
        dz = sz;
        primal = sp.sqrt();
        if hyper.trace {
            trace.push(TraceRow {
                iteration: iterations,
                objective: objective(items, v[0].re, &second, &x, lambda),
                primal_residual: primal,
                dx,
                dz,
                min_eig,
            });
        }
        if iterations > 1 && dx <= hyper.eps_x && dz <= hyper.eps_z {
            converged = true;
            break;
        }
    }
    let objective = objective(items, v[0].re, &second, &x, lambda);
    Ok(AdmmSolution { v, second, x, z, iterations, dx, dz, primal_residual: primal, objective, converged, scale: 1.0, trace })
}

/// Divides every target by a common scale so the largest has unit-magnitude
/// entries on average, then solves.
pub fn admm_solve_scaled(items: &[AdmmItem], hyper: &AdmmHyper) -> Result<AdmmSolution> {
    validate(items)?;
    let scale = items
        .iter()
        .map(|it| (fro2(&it.target) / (it.target.nrows() * it.target.ncols()) as f64).sqrt())
        .fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Domain("all targets are zero".into()));
    }
    let scaled: Vec<AdmmItem> = items
        .iter()
        .map(|it| AdmmItem { target: &it.target / C64::new(scale, 0.0), weight: it.weight, block: it.block })
        .collect();
    let mut sol = admm_solve(&scaled, hyper)?;
    sol.scale = scale;
    Ok(sol)
}
