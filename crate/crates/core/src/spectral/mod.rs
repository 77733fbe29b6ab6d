//! The invariant Fourier basis: G-eigenfunctions of the Laplacian, computed either from
//! the orbit-graph Laplacian or by a Galerkin method on the fundamental polytope.

mod galerkin;
mod quadrature;

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{idw, Embedding};
use crate::error::{Error, Result};
use crate::geometry::serde_points;
use crate::orbitgraph::{NetIndex, OrbitGraph};
use crate::quotient::QuotientContext;

pub use galerkin::{eigenbasis_galerkin, galerkin_centers, GalerkinConfig, DEFAULT_QUADRATURE_DENSITY, DEFAULT_WIDTH_FACTOR};
pub use quadrature::{boundary_flux, gauss_legendre, FluxReport, Quadrature};

/// Relative gap below which neighbouring eigenvalues form one multiplicity cluster.
pub const CLUSTER_GAP: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Spectral,
    Galerkin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BasisRepr {
    /// Values of every eigenfunction at the orbit-graph vertices.
    Net {
        #[serde(with = "serde_points")]
        vertices: Vec<DVector<f64>>,
        /// Per vertex, the values of the k eigenfunctions.
        #[serde(with = "serde_points")]
        values: Vec<DVector<f64>>,
        spacing: f64,
    },
    /// Coefficients over a constant plus RBFs centred at embedded points.
    Galerkin {
        #[serde(with = "serde_points")]
        centers: Vec<DVector<f64>>,
        #[serde(with = "serde_points")]
        embedded_centers: Vec<DVector<f64>>,
        width: f64,
        /// One coefficient vector (constant term first) per eigenfunction.
        #[serde(with = "serde_points")]
        coefficients: Vec<DVector<f64>>,
    },
}

/// Approximate G-eigenpairs, eigenvalues ascending.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenBasis {
    pub method: Method,
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues before scaling (graph route) or equal to `eigenvalues` (Galerkin).
    pub raw_eigenvalues: Vec<f64>,
    pub scale: f64,
    pub clusters: Vec<Vec<usize>>,
    pub repr: BasisRepr,
    #[serde(skip)]
    index: OnceLock<NetIndex>,
}

impl PartialEq for EigenBasis {
    fn eq(&self, other: &Self) -> bool {
        self.method == other.method
            && self.eigenvalues == other.eigenvalues
            && self.raw_eigenvalues == other.raw_eigenvalues
            && self.scale == other.scale
            && self.clusters == other.clusters
            && self.repr == other.repr
    }
}

impl EigenBasis {
    fn new(method: Method, eigenvalues: Vec<f64>, raw: Vec<f64>, scale: f64, repr: BasisRepr) -> Self {
        let clusters = clusters(&eigenvalues);
        EigenBasis { method, eigenvalues, raw_eigenvalues: raw, scale, clusters, repr, index: OnceLock::new() }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    /// All eigenfunctions at `x` (any point of R^n). Galerkin bases need the embedding
    /// they were built with.
    pub fn evaluate(&self, ctx: &QuotientContext, emb: Option<&Embedding>, x: &DVector<f64>) -> Result<DVector<f64>> {
        let p = ctx.project(x)?;
        self.evaluate_projected(ctx, emb, p.as_slice())
    }

    /// As [`EigenBasis::evaluate`] for a point already in the polytope.
    pub fn evaluate_projected(&self, ctx: &QuotientContext, emb: Option<&Embedding>, p: &[f64]) -> Result<DVector<f64>> {
        match &self.repr {
            BasisRepr::Net { vertices, values, spacing } => {
                let index = self.index.get_or_init(|| NetIndex::new(vertices, *spacing));
                Ok(idw(index, ctx, p, values))
            }
            BasisRepr::Galerkin { embedded_centers, width, coefficients, .. } => {
                let emb = emb.ok_or_else(|| Error::InvalidArgument("Galerkin basis evaluation needs its embedding".into()))?;
                let features = galerkin::features(&emb.rho_smooth(p), embedded_centers, *width);
                Ok(DVector::from_iterator(coefficients.len(), coefficients.iter().map(|c| c.dot(&features))))
            }
        }
    }
}

/// Groups ascending eigenvalues whose relative gap is below [`CLUSTER_GAP`].
pub fn clusters(eigenvalues: &[f64]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in eigenvalues.iter().enumerate() {
        match out.last_mut() {
            Some(last) => {
                let prev = eigenvalues[*last.last().unwrap()];
                if (v - prev).abs() < CLUSTER_GAP * v.abs().max(prev.abs()) {
                    last.push(i);
                } else {
                    out.push(vec![i]);
                }
            }
            None => out.push(vec![i]),
        }
    }
    out
}

/// Edge weights exp(−d²/(2ε²)) and the random-walk Laplacian L = I − D⁻¹W.
pub fn laplacian(graph: &OrbitGraph) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = graph.len();
    let mut w = DMatrix::zeros(m, m);
    let s = 2.0 * graph.epsilon * graph.epsilon;
    for &(i, j, d) in &graph.edges {
        let v = (-d * d / s).exp();
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    let mut l = DMatrix::identity(m, m);
    for i in 0..m {
        let deg = w.row(i).sum();
        if deg <= 0.0 {
            return Err(Error::IsolatedVertex(i));
        }
        for j in 0..m {
            l[(i, j)] -= w[(i, j)] / deg;
        }
    }
    Ok((l, w))
}

// Classes of vertices representing the same orbit point (zero-distance edges and
// reflection constraints).
fn merge_classes(graph: &OrbitGraph) -> (Vec<usize>, usize) {
    let m = graph.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for (a, b) in graph.glued_pairs() {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut label = HashMap::new();
    let mut class_of = vec![0; m];
    for i in 0..m {
        let r = find(&mut parent, i);
        let next = label.len();
        class_of[i] = *label.entry(r).or_insert(next);
    }
    (class_of, label.len())
}

/// Volume of the quotient-metric Voronoi cell of each class, by assigning the nodes of a
/// fine quadrature to their nearest vertex.
fn voronoi_volumes(ctx: &QuotientContext, graph: &OrbitGraph, class_of: &[usize], classes: usize) -> Result<Vec<f64>> {
    let (lo, hi) = ctx.polytope.bounding_box();
    let longest = (&hi - &lo).amax();
    let per_axis = (4.0 * longest / graph.spacing).ceil() as usize;
    let cap = match ctx.dim() {
        1 => 100_000,
        2 => 400,
        _ => 60,
    };
    let quad = Quadrature::tensor(&ctx.polytope, per_axis.clamp(1, cap))?;
    let index = NetIndex::new(&graph.vertices, graph.spacing);
    let vol = (0..quad.len())
        .into_par_iter()
        .fold(
            || vec![0.0; classes],
            |mut acc, q| {
                let near = index.quotient_knn(ctx, quad.nodes[q].as_slice(), 1);
                acc[class_of[near[0].0]] += quad.weights[q];
                acc
            },
        )
        .reduce(|| vec![0.0; classes], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    Ok(vol)
}

/// Eigenpairs of the orbit-graph Laplacian. Vertices identified by zero-distance edges or
/// reflection constraints are merged first; the symmetric form I − D^{-1/2}WD^{-1/2} is
/// diagonalised and eigenvectors are mapped back by D^{-1/2} and normalised in the discrete
/// L2 norm with Voronoi-cell weights. Eigenvalues are scaled by 2/M₂, where M₂ is the
/// per-axis second moment of the edge-weight distribution (the median over vertices); M₂
/// plays the role of the kernel bandwidth ε in the continuum limit.
pub fn eigenbasis_spectral(ctx: &QuotientContext, graph: &OrbitGraph, k: usize) -> Result<EigenBasis> {
    let (class_of, c) = merge_classes(graph);
    if k > c {
        return Err(Error::TooManyEigenpairs { requested: k, available: c });
    }
    let mut dmin: HashMap<(usize, usize), f64> = HashMap::new();
    for &(i, j, d) in &graph.edges {
        let (a, b) = (class_of[i], class_of[j]);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        let e = dmin.entry(key).or_insert(d);
        *e = e.min(d);
    }
    let s = 2.0 * graph.epsilon * graph.epsilon;
    let mut w = DMatrix::zeros(c, c);
    let mut moment = vec![0.0; c];
    for (&(a, b), &d) in &dmin {
        let v = (-d * d / s).exp();
        w[(a, b)] = v;
        w[(b, a)] = v;
        moment[a] += v * d * d;
        moment[b] += v * d * d;
    }
    let deg: Vec<f64> = (0..c).map(|i| w.row(i).sum()).collect();
    if let Some(i) = deg.iter().position(|d| *d <= 0.0) {
        return Err(Error::IsolatedVertex(class_of.iter().position(|&x| x == i).unwrap_or(i)));
    }
    let n = ctx.dim() as f64;
    let mut m2: Vec<f64> = (0..c).map(|i| moment[i] / (n * deg[i])).collect();
    m2.sort_by(f64::total_cmp);
    let m2 = m2[c / 2];
    let scale = 2.0 / m2;

    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let sym = DMatrix::from_fn(c, c, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - inv_sqrt[i] * w[(i, j)] * inv_sqrt[j]
    });
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let vol = voronoi_volumes(ctx, graph, &class_of, c)?;
    let mut raw = Vec::with_capacity(k);
    let mut funcs: Vec<DVector<f64>> = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        raw.push(eig.eigenvalues[idx].max(0.0));
        let mut f = DVector::from_fn(c, |i, _| eig.eigenvectors[(i, idx)] * inv_sqrt[i]);
        let norm = (0..c).map(|i| vol[i] * f[i] * f[i]).sum::<f64>().sqrt();
        f /= norm;
        if f[f.iamax()] < 0.0 {
            f.neg_mut();
        }
        funcs.push(f);
    }
    let values: Vec<DVector<f64>> =
        (0..graph.len()).map(|v| DVector::from_iterator(k, funcs.iter().map(|f| f[class_of[v]]))).collect();
    let eigenvalues: Vec<f64> = raw.iter().map(|l| l * scale).collect();
    let repr = BasisRepr::Net { vertices: graph.vertices.clone(), values, spacing: graph.spacing };
    Ok(EigenBasis::new(Method::Spectral, eigenvalues, raw, scale, repr))
}

/// e_i(x) for a graph-based basis: projection followed by inverse-distance weighting over
/// the eight nearest vertices in the quotient metric.
pub fn interpolate(ctx: &QuotientContext, basis: &EigenBasis, i: usize, x: &DVector<f64>) -> Result<f64> {
    if i >= basis.len() {
        return Err(Error::TooManyEigenpairs { requested: i + 1, available: basis.len() });
    }
    Ok(basis.evaluate(ctx, None, x)?[i])
}

/// max |Gram − I| of the basis functions under the given quadrature.
pub fn orthonormality_check(ctx: &QuotientContext, basis: &EigenBasis, emb: Option<&Embedding>, quad: &Quadrature) -> Result<f64> {
    let values: Vec<DVector<f64>> = quad
        .nodes
        .par_iter()
        .map(|x| basis.evaluate_projected(ctx, emb, x.as_slice()))
        .collect::<Result<_>>()?;
    let k = basis.len();
    let mut gram = DMatrix::<f64>::zeros(k, k);
    for (v, w) in values.iter().zip(&quad.weights) {
        gram.syger(*w, v, v, 1.0);
    }
    gram.fill_lower_triangle_with_upper_triangle();
    Ok((gram - DMatrix::identity(k, k)).amax())
}
