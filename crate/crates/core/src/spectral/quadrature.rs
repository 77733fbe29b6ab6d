//! Quadrature over the fundamental polytope and its boundary.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::serde_points;
use crate::polytope::{halfspace_intersection, ConvexPolytope, Halfspace};
use crate::quotient::QuotientContext;

/// Nodes and positive weights approximating integrals over a polytope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    #[serde(with = "serde_points")]
    pub nodes: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// Tensor grid with `cells` cells along the longest bounding-box axis. Cells inside the
    /// polytope contribute their centre; cells crossing the boundary are clipped exactly
    /// and contribute the centroid and volume of the clipped piece.
    pub fn tensor(poly: &ConvexPolytope, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidArgument("quadrature needs at least one cell".into()));
        }
        let n = poly.dim();
        let (lo, hi) = poly.bounding_box();
        let longest = (0..n).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        let h = longest / cells as f64;
        let counts: Vec<usize> = (0..n).map(|k| ((hi[k] - lo[k]) / h - 1e-9).ceil().max(1.0) as usize).collect();
        let steps: Vec<f64> = (0..n).map(|k| (hi[k] - lo[k]) / counts[k] as f64).collect();
        let cell_volume: f64 = steps.iter().product();

        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![0usize; n];
        let mut corner = vec![0.0; n];
        'cells: loop {
            let a: Vec<f64> = (0..n).map(|k| lo[k] + idx[k] as f64 * steps[k]).collect();
            let mut inside = 0;
            let mut outside_all = vec![true; poly.halfspaces().len()];
            for c in 0..(1usize << n) {
                for k in 0..n {
                    corner[k] = a[k] + if c >> k & 1 == 1 { steps[k] } else { 0.0 };
                }
                if poly.contains(&corner, 1e-12) {
                    inside += 1;
                }
                for (o, hs) in outside_all.iter_mut().zip(poly.halfspaces()) {
                    *o &= hs.slack(&corner) <= 1e-12;
                }
            }
            if inside == 1 << n {
                nodes.push(DVector::from_fn(n, |k, _| a[k] + 0.5 * steps[k]));
                weights.push(cell_volume);
            } else if !outside_all.iter().any(|&o| o) {
                let mut hs: Vec<Halfspace> = poly.halfspaces().to_vec();
                for k in 0..n {
                    let mut e = DVector::zeros(n);
                    e[k] = 1.0;
                    hs.push(Halfspace::new(e.clone(), a[k] + steps[k]));
                    hs.push(Halfspace::new(-e, -a[k]));
                }
                if let Ok(piece) = halfspace_intersection(&hs) {
                    let (vol, centroid) = piece.volume_and_centroid();
                    if vol > 1e-12 * cell_volume {
                        nodes.push(centroid);
                        weights.push(vol);
                    }
                }
            }
            let mut k = 0;
            loop {
                if k == n {
                    break 'cells;
                }
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
        Ok(Quadrature { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(order);
    let mut ws = Vec::with_capacity(order);
    for i in 1..=order {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (order as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=order {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else { p1 };
            dp = order as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        xs.push(0.5 * (1.0 - x));
        ws.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (xs, ws)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FluxReport {
    /// ∮ Fᵀ N over the polytope boundary.
    pub flux: f64,
    /// ∮ |F| over the boundary, the natural scale for the flux.
    pub abs_integral: f64,
}

/// Outward flux of a vector field through the boundary of the context's polytope, using
/// composite Gauss–Legendre rules with `pieces` subdivisions per facet direction.
pub fn boundary_flux(ctx: &QuotientContext, field: impl Fn(&DVector<f64>) -> DVector<f64>, pieces: usize) -> FluxReport {
    let poly = &ctx.polytope;
    let (gx, gw) = gauss_legendre(8);
    let pieces = pieces.max(1);
    let mut flux = 0.0;
    let mut abs = 0.0;
    let mut add = |x: &DVector<f64>, normal: &DVector<f64>, w: f64| {
        let f = field(x);
        flux += w * f.dot(normal);
        abs += w * f.norm();
    };
    for (k, &face) in poly.facet_faces().iter().enumerate() {
        let normal = &poly.halfspaces()[k].normal;
        let verts: Vec<&DVector<f64>> = poly.face(face).vertices.iter().map(|&i| &poly.vertices()[i]).collect();
        match poly.dim() {
            1 => add(verts[0], normal, 1.0),
            2 => {
                let (a, b) = (verts[0], verts[1]);
                let len = (b - a).norm() / pieces as f64;
                for p in 0..pieces {
                    for (t, w) in gx.iter().zip(&gw) {
                        let s = (p as f64 + t) / pieces as f64;
                        add(&(a + (b - a) * s), normal, w * len);
                    }
                }
            }
            _ => {
                let loop_ = poly.face_polygon(face);
                for t in 1..loop_.len() - 1 {
                    let (a, b, c) = (&loop_[0], &loop_[t], &loop_[t + 1]);
                    let area2 = (b - a).cross(&(c - a)).norm();
                    // Collapsed (Duffy) tensor rule on a subdivided unit square.
                    for pu in 0..pieces {
                        for pv in 0..pieces {
                            for (tu, wu) in gx.iter().zip(&gw) {
                                for (tv, wv) in gx.iter().zip(&gw) {
                                    let u = (pu as f64 + tu) / pieces as f64;
                                    let v = (pv as f64 + tv) / pieces as f64;
                                    let x = a + (b - a) * (u * (1.0 - v)) + (c - a) * (u * v);
                                    let w = wu * wv * u * area2 / (pieces * pieces) as f64;
                                    add(&x, normal, w);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    FluxReport { flux, abs_integral: abs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(15)).sum();
        assert!((i - 1.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn clipped_weights_sum_to_volume() {
        for name in ["p1", "p3", "p6", "cm", "I23"] {
            let ctx = QuotientContext::new(registry::builtin(name).unwrap()).unwrap();
            let cells = if ctx.dim() == 3 { 8 } else { 17 };
            let q = Quadrature::tensor(&ctx.polytope, cells).unwrap();
            let vol = ctx.polytope.volume();
            assert!((q.total_weight() - vol).abs() < 1e-9 * vol, "{name}");
            assert!(q.weights.iter().all(|w| *w > 0.0));
            assert!(q.nodes.iter().all(|x| ctx.polytope.contains(x.as_slice(), 1e-9)));
        }
    }

    #[test]
    fn divergence_of_identity_field() {
        for name in ["p1", "p6", "P1"] {
            let ctx = QuotientContext::new(registry::builtin(name).unwrap()).unwrap();
            let r = boundary_flux(&ctx, |x| x.clone(), 2);
            let expected = ctx.dim() as f64 * ctx.polytope.volume();
            assert!((r.flux - expected).abs() < 1e-10, "{name}: {} vs {expected}", r.flux);
            let c = boundary_flux(&ctx, |x| DVector::from_element(x.len(), 1.0), 2);
            assert!(c.flux.abs() < 1e-12);
        }
    }
}
