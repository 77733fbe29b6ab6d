//! Galerkin approximation of the G-eigenproblem: the energy form and L2 product of
//! invariant basis functions χ_i = RBF(ρ̂(·) − ρ̂(c_i)), solved as Ac = λBc.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::quadrature::Quadrature;
use super::{BasisRepr, EigenBasis, Method};
use crate::embed::Embedding;
use crate::error::{Error, Result};
use crate::polytope::ConvexPolytope;
use crate::quotient::QuotientContext;

/// Quadrature cells per centre spacing.
pub const DEFAULT_QUADRATURE_DENSITY: usize = 4;
/// RBF width as a multiple of the median nearest-neighbour distance of embedded centres.
/// Much wider RBFs make the constant nearly a combination of the others and the mass
/// matrix numerically singular.
pub const DEFAULT_WIDTH_FACTOR: f64 = 1.2;
const MASS_SHIFT: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct GalerkinConfig {
    pub centers: Vec<DVector<f64>>,
    pub width: f64,
    pub quadrature: Quadrature,
    /// Central finite-difference step for gradients.
    pub fd_step: f64,
}

impl GalerkinConfig {
    /// At least `m` centres, default quadrature and width.
    pub fn new(ctx: &QuotientContext, emb: &Embedding, m: usize) -> Result<Self> {
        Self::with_resolution(ctx, emb, m, DEFAULT_QUADRATURE_DENSITY, DEFAULT_WIDTH_FACTOR)
    }

    /// `density` quadrature cells per centre spacing; the RBF width is `width_factor` times
    /// the median nearest-neighbour distance of the embedded centres.
    pub fn with_resolution(ctx: &QuotientContext, emb: &Embedding, m: usize, density: usize, width_factor: f64) -> Result<Self> {
        let poly = &ctx.polytope;
        let mut h = (poly.volume() / m.max(1) as f64).powf(1.0 / poly.dim() as f64);
        let (centers, nn) = loop {
            let grid = center_grid(poly, h);
            if grid.len() >= m {
                let (kept, nn) = thin_embedded(emb, grid);
                if kept.len() >= m {
                    break (kept, nn);
                }
            }
            h *= 0.97;
        };
        let width = width_factor * nn;
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidArgument("degenerate RBF width; use more centres or a finer embedding".into()));
        }
        let (lo, hi) = poly.bounding_box();
        let cells = ((&hi - &lo).amax() * density.max(1) as f64 / h).ceil() as usize;
        Ok(GalerkinConfig {
            centers,
            width,
            quadrature: Quadrature::tensor(poly, cells.max(1))?,
            fd_step: 1e-4 * poly.diameter(),
        })
    }
}

fn median_nn(points: &[DVector<f64>]) -> f64 {
    let mut nn: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, a)| points.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, b)| (a - b).norm()).fold(f64::INFINITY, f64::min))
        .collect();
    nn.sort_by(f64::total_cmp);
    nn[nn.len() / 2]
}

// Centres whose embedded images nearly coincide (the embedding is smoothed at the net
// scale, so points near cone tips collapse) give duplicate basis functions and a singular
// mass matrix; keep only one of each such group. Returns the kept centres and their
// median nearest-neighbour distance in the embedding.
fn thin_embedded(emb: &Embedding, grid: Vec<DVector<f64>>) -> (Vec<DVector<f64>>, f64) {
    let embedded: Vec<DVector<f64>> = grid.iter().map(|c| emb.rho_smooth(c.as_slice())).collect();
    let cutoff = 0.5 * median_nn(&embedded);
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..grid.len() {
        if kept.iter().all(|&j| (&embedded[i] - &embedded[j]).norm() >= cutoff) {
            kept.push(i);
        }
    }
    let images: Vec<DVector<f64>> = kept.iter().map(|&i| embedded[i].clone()).collect();
    (kept.into_iter().map(|i| grid[i].clone()).collect(), median_nn(&images))
}

/// Cell-centred grid points strictly inside the polytope, refined until there are at
/// least `m` of them; also returns the grid spacing.
pub fn galerkin_centers(poly: &ConvexPolytope, m: usize) -> (Vec<DVector<f64>>, f64) {
    let mut h = (poly.volume() / m.max(1) as f64).powf(1.0 / poly.dim() as f64);
    loop {
        let pts = center_grid(poly, h);
        if pts.len() >= m {
            return (pts, h);
        }
        h *= 0.97;
    }
}

fn center_grid(poly: &ConvexPolytope, h: f64) -> Vec<DVector<f64>> {
    let n = poly.dim();
    let (lo, hi) = poly.bounding_box();
    let counts: Vec<usize> = (0..n).map(|k| ((hi[k] - lo[k]) / h).ceil().max(1.0) as usize).collect();
    let mut pts = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let p = DVector::from_fn(n, |k, _| {
            // Centre the grid within the bounding box.
            let slack = counts[k] as f64 * h - (hi[k] - lo[k]);
            lo[k] - 0.5 * slack + (idx[k] as f64 + 0.5) * h
        });
        if poly.contains(p.as_slice(), -1e-9) {
            pts.push(p);
        }
        let mut k = 0;
        loop {
            if k == n {
                return pts;
            }
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Basis-function values at an embedded point: the constant, then one RBF per centre.
pub(crate) fn features(r: &DVector<f64>, centers: &[DVector<f64>], width: f64) -> DVector<f64> {
    let s = 2.0 * width * width;
    let mut out = DVector::zeros(centers.len() + 1);
    out[0] = 1.0;
    for (i, c) in centers.iter().enumerate() {
        out[i + 1] = (-(r - c).norm_squared() / s).exp();
    }
    out
}

/// The `k` lowest eigenpairs of Ac = λBc, with A the energy form ∫∇χ_i·∇χ_j and B the L2
/// product of the basis functions over the quadrature, B shifted by 1e-10·I.
pub fn eigenbasis_galerkin(ctx: &QuotientContext, emb: &Embedding, cfg: &GalerkinConfig, k: usize) -> Result<EigenBasis> {
    let n = ctx.dim();
    let embedded: Vec<DVector<f64>> = cfg.centers.iter().map(|c| emb.rho_smooth(c.as_slice())).collect();
    if embedded.iter().any(|e| e.len() != emb.dim()) {
        return Err(Error::Shape("centre embedding does not match the embedding dimension".into()));
    }
    let size = embedded.len() + 1;
    if k > size {
        return Err(Error::TooManyEigenpairs { requested: k, available: size });
    }
    let q = &cfg.quadrature;
    let h = cfg.fd_step;
    let rows: Vec<(DVector<f64>, Vec<DVector<f64>>)> = (0..q.len())
        .into_par_iter()
        .map(|t| {
            let x = &q.nodes[t];
            let sw = q.weights[t].sqrt();
            let value = features(&emb.rho_smooth(x.as_slice()), &embedded, cfg.width) * sw;
            let grads = (0..n)
                .map(|a| {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[a] += h;
                    xm[a] -= h;
                    let fp = features(&emb.rho_smooth(xp.as_slice()), &embedded, cfg.width);
                    let fm = features(&emb.rho_smooth(xm.as_slice()), &embedded, cfg.width);
                    (fp - fm) * (sw / (2.0 * h))
                })
                .collect();
            (value, grads)
        })
        .collect();
    let mut phi = DMatrix::zeros(q.len(), size);
    let mut grad = DMatrix::zeros(q.len() * n, size);
    for (t, (v, g)) in rows.iter().enumerate() {
        phi.set_row(t, &v.transpose());
        for (a, ga) in g.iter().enumerate() {
            grad.set_row(t * n + a, &ga.transpose());
        }
    }
    let mass = phi.tr_mul(&phi);
    let a = grad.tr_mul(&grad);
    let mut b = mass.clone();
    for i in 0..size {
        b[(i, i)] += MASS_SHIFT;
    }
    let chol = b.cholesky().ok_or(Error::SingularMass)?;
    let l = chol.l();
    let x = l.solve_lower_triangular(&a).ok_or(Error::SingularMass)?;
    let c = l.solve_lower_triangular(&x.transpose()).ok_or(Error::SingularMass)?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let lt = l.transpose();
    let mut eigenvalues = Vec::with_capacity(k);
    let mut coefficients = Vec::with_capacity(k);
    let mut spurious = 0;
    for &idx in &order {
        if eigenvalues.len() == k {
            break;
        }
        let y = eig.eigenvectors.column(idx).into_owned();
        let mut coef = lt.solve_upper_triangular(&y).ok_or(Error::SingularMass)?;
        // Directions where the shift dominates the mass are artefacts of the regularization.
        if coef.dot(&(&mass * &coef)) < 0.99 {
            spurious += 1;
            continue;
        }
        if coef[coef.iamax()] < 0.0 {
            coef.neg_mut();
        }
        eigenvalues.push(eig.eigenvalues[idx]);
        coefficients.push(coef);
    }
    if spurious > 0 {
        log::warn!("discarded {spurious} Galerkin eigenpairs carried by the mass regularization; consider narrower RBFs");
    }
    if eigenvalues.len() < k {
        return Err(Error::SingularMass);
    }
    let repr = BasisRepr::Galerkin { centers: cfg.centers.clone(), embedded_centers: embedded, width: cfg.width, coefficients };
    Ok(EigenBasis::new(Method::Galerkin, eigenvalues.clone(), eigenvalues, 1.0, repr))
}
