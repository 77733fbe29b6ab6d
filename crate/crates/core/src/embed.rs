//! The computational orbifold map: geodesic distances on the orbit graph, classical
//! multidimensional scaling, and interpolation of the resulting vertex coordinates.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::serde_points;
use crate::group::stabilizer;
use crate::orbitgraph::{build_orbit_graph, mirror_augment, NetIndex, OrbitGraph};
use crate::quotient::QuotientContext;

/// Neighbours used by inverse-distance interpolation.
pub const IDW_NEIGHBORS: usize = 8;

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([HeapItem(0.0, source)]);
    while let Some(HeapItem(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapItem(nd, v));
            }
        }
    }
    dist
}

/// Squared shortest-path lengths between all vertex pairs.
pub fn geodesic_distances(graph: &OrbitGraph) -> Result<DMatrix<f64>> {
    let m = graph.len();
    let adj = graph.adjacency();
    let rows: Vec<Vec<f64>> = (0..m).into_par_iter().map(|s| dijkstra(&adj, s)).collect();
    if rows.first().is_some_and(|r| r.iter().any(|d| d.is_infinite())) {
        return Err(Error::Disconnected(graph.components()));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| {
        let d = rows[i][j].min(rows[j][i]);
        d * d
    }))
}

#[derive(Clone, Debug)]
pub struct MdsResult {
    /// Row i holds the coordinates of point i.
    pub coords: DMatrix<f64>,
    pub dim: usize,
    /// Retained (positive) eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Leading eigenvalues of the centred matrix, descending, including non-positive ones.
    pub spectrum: Vec<f64>,
    /// Relative stress of the embedding truncated to 1, 2, … dimensions.
    pub stress_by_dim: Vec<f64>,
    /// Fraction of the absolute spectrum carried by negative eigenvalues.
    pub negative_mass: f64,
}

/// Relative stress ‖chordal − geodesic‖_F / ‖geodesic‖_F of point coordinates (rows)
/// against squared geodesic distances.
pub fn stress(coords: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
    let m = coords.nrows();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..m {
        for j in i + 1..m {
            let chord = (coords.row(i) - coords.row(j)).norm();
            let geo = r[(i, j)].max(0.0).sqrt();
            num += (chord - geo).powi(2);
            den += geo * geo;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Classical MDS of squared distances. The dimension is the smallest one whose relative
/// stress is at most `stress_tol`; when none qualifies, the one with least stress. At most
/// `max_dim`, and at least `min_dim` when that many positive eigenvalues exist.
pub fn classical_mds(r: &DMatrix<f64>, max_dim: usize, min_dim: usize, stress_tol: f64) -> Result<MdsResult> {
    let m = r.nrows();
    if m == 0 || r.ncols() != m {
        return Err(Error::Shape(format!("distance matrix must be square, got {}x{}", m, r.ncols())));
    }
    let row_mean: Vec<f64> = (0..m).map(|i| r.row(i).sum() / m as f64).collect();
    let total = row_mean.iter().sum::<f64>() / m as f64;
    let b = DMatrix::from_fn(m, m, |i, j| -0.5 * (r[(i, j)] - row_mean[i] - row_mean[j] + total));
    let eig = b.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));

    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let positive: Vec<usize> = order.iter().copied().filter(|&k| eig.eigenvalues[k] > 1e-12 * scale).collect();
    if positive.is_empty() {
        return Err(Error::DegenerateMds);
    }
    let abs_total: f64 = eig.eigenvalues.iter().map(|v| v.abs()).sum();
    let negative_mass = eig.eigenvalues.iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>() / abs_total;

    let cap = max_dim.max(1).min(positive.len());
    let mut full = DMatrix::zeros(m, cap);
    for (c, &k) in positive.iter().take(cap).enumerate() {
        let s = eig.eigenvalues[k].sqrt();
        let mut col = eig.eigenvectors.column(k).into_owned();
        // Deterministic sign: largest-magnitude entry positive.
        if col[col.iamax()] < 0.0 {
            col.neg_mut();
        }
        full.set_column(c, &(col * s));
    }

    // Squared chordal distances accumulated one dimension at a time.
    let geo: Vec<f64> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).map(|(i, j)| r[(i, j)].max(0.0).sqrt()).collect();
    let den: f64 = geo.iter().map(|g| g * g).sum();
    let mut chord2 = vec![0.0; geo.len()];
    let mut stress_by_dim = Vec::with_capacity(cap);
    for c in 0..cap {
        let col = full.column(c);
        let mut t = 0;
        let mut num = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                let d = col[i] - col[j];
                chord2[t] += d * d;
                num += (chord2[t].sqrt() - geo[t]).powi(2);
                t += 1;
            }
        }
        stress_by_dim.push(if den == 0.0 { 0.0 } else { (num / den).sqrt() });
    }

    let dim = match stress_by_dim.iter().position(|s| *s <= stress_tol) {
        Some(p) => p + 1,
        None => {
            let best = (0..cap).min_by(|&a, &c| stress_by_dim[a].total_cmp(&stress_by_dim[c])).unwrap_or(0);
            best + 1
        }
    };
    let dim = dim.max(min_dim.min(cap));
    let spectrum: Vec<f64> = order.iter().take((2 * max_dim).max(dim)).map(|&k| eig.eigenvalues[k]).collect();
    Ok(MdsResult {
        coords: full.columns(0, dim).into_owned(),
        dim,
        eigenvalues: positive.iter().take(dim).map(|&k| eig.eigenvalues[k]).collect(),
        spectrum,
        stress_by_dim,
        negative_mass,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub stress_tol: f64,
    pub max_dim: usize,
    /// Embed a non-exact polytope as is instead of re-basing onto a Dirichlet domain.
    pub bypass_exactness: bool,
}

impl EmbedConfig {
    pub fn new(epsilon: f64) -> Self {
        EmbedConfig { epsilon, delta: None, stress_tol: 0.05, max_dim: 10, bypass_exactness: false }
    }
}

/// Serializable part of an embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingData {
    pub dim: usize,
    #[serde(with = "serde_points")]
    pub vertices: Vec<DVector<f64>>,
    #[serde(with = "serde_points")]
    pub coords: Vec<DVector<f64>>,
    pub mds_eigenvalues: Vec<f64>,
    pub spectrum: Vec<f64>,
    pub stress: f64,
    pub stress_by_dim: Vec<f64>,
    pub gluing_residual: f64,
    pub negative_mass: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub spacing: f64,
    pub rebased: bool,
    #[serde(with = "serde_points")]
    pub polytope_vertices: Vec<DVector<f64>>,
}

/// Vertex embedding ρ̂ plus its extension to all of R^n through the projector.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub context: Arc<QuotientContext>,
    pub data: EmbeddingData,
    index: NetIndex,
    smooth_index: NetIndex,
    sigma: f64,
}

impl Embedding {
    /// Rebuilds the interpolation structures around stored data.
    pub fn from_data(context: Arc<QuotientContext>, data: EmbeddingData) -> Result<Self> {
        if data.vertices.is_empty() || data.vertices.len() != data.coords.len() {
            return Err(Error::Shape("embedding needs one coordinate vector per vertex".into()));
        }
        let sigma = data.spacing;
        let index = NetIndex::new(&data.vertices, data.spacing);
        let smooth_index = NetIndex::new(&data.vertices, 4.0 * sigma);
        Ok(Embedding { context, data, index, smooth_index, sigma })
    }

    pub fn dim(&self) -> usize {
        self.data.dim
    }

    /// ρ(x): projection, then inverse-distance weighting (power 2) over the nearest vertices
    /// in the quotient metric. Exactly G-invariant; exact at vertices.
    pub fn rho(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let p = self.context.project(x)?;
        Ok(self.rho_projected(p.as_slice()))
    }

    /// As [`Embedding::rho`] for a point already in the polytope.
    pub fn rho_projected(&self, p: &[f64]) -> DVector<f64> {
        idw(&self.index, &self.context, p, &self.data.coords)
    }

    /// Smooth invariant interpolant: Nadaraya–Watson average of vertex coordinates over all
    /// group images with a compactly supported Gaussian weight. `x` should lie in or near
    /// the polytope.
    pub fn rho_smooth(&self, x: &[f64]) -> DVector<f64> {
        let radius = 4.0 * self.sigma;
        let n = x.len();
        let mut img = [0.0; 3];
        let mut acc = DVector::zeros(self.data.dim);
        let mut total = 0.0;
        for phi in &self.context.local_group.elements {
            phi.image_into(x, &mut img[..n]);
            self.smooth_index.for_each_within(&img[..n], radius, |j, d2| {
                let t = 1.0 - d2 / (radius * radius);
                let w = (-d2 / (2.0 * self.sigma * self.sigma)).exp() * t * t * t;
                acc.axpy(w, &self.data.coords[j], 1.0);
                total += w;
            });
        }
        if total > 0.0 {
            acc / total
        } else {
            self.rho_projected(x)
        }
    }

    pub fn smoothing_width(&self) -> f64 {
        self.sigma
    }
}

/// Inverse-distance-weighted average of per-vertex values at a projected point.
pub(crate) fn idw(index: &NetIndex, ctx: &QuotientContext, p: &[f64], values: &[DVector<f64>]) -> DVector<f64> {
    let near = index.quotient_knn(ctx, p, IDW_NEIGHBORS);
    if near[0].1 <= 1e-9 {
        return values[near[0].0].clone();
    }
    let mut acc = DVector::zeros(values[0].len());
    let mut total = 0.0;
    for &(j, d) in &near {
        let w = 1.0 / (d * d);
        acc.axpy(w, &values[j], 1.0);
        total += w;
    }
    acc / total
}

/// Largest Euclidean distance between embedded copies of the same orbit point.
pub fn gluing_residual(graph: &OrbitGraph, coords: &[DVector<f64>]) -> f64 {
    graph.glued_pairs().iter().map(|&(i, j)| (&coords[i] - &coords[j]).norm()).fold(0.0, f64::max)
}

/// Orbit graph (mirror-augmented if the group has reflections), geodesics and MDS. Non-exact
/// polytopes are re-based onto a Dirichlet domain unless the bypass flag is set.
pub fn build_embedding(ctx: &QuotientContext, cfg: &EmbedConfig) -> Result<(Embedding, OrbitGraph)> {
    let ctx = if ctx.is_exact() || cfg.bypass_exactness {
        ctx.clone()
    } else {
        log::warn!("polytope of {} is not exact; re-basing onto a Dirichlet domain", ctx.group.name);
        ctx.clone().rebased()?
    };
    let base = build_orbit_graph(&ctx, cfg.epsilon, cfg.delta)?;
    let graph = mirror_augment(&ctx, &base)?;
    let r = geodesic_distances(&graph)?;
    let n = ctx.dim();
    let mds = classical_mds(&r, cfg.max_dim, n, cfg.stress_tol)?;
    let coords: Vec<DVector<f64>> = (0..graph.len()).map(|i| mds.coords.row(i).transpose()).collect();
    let residual = gluing_residual(&graph, &coords);

    let max_stab = ctx
        .polytope
        .vertices()
        .iter()
        .map(|v| stabilizer(&ctx.local_group, v, 1e-9).len())
        .chain((0..ctx.polytope.faces().len()).map(|f| stabilizer(&ctx.local_group, &ctx.polytope.face_centroid(f), 1e-9).len()))
        .max()
        .unwrap_or(1);
    if mds.dim >= 2 * (n + max_stab) {
        log::info!("embedding dimension {} exceeds the bound 2(n + max|Stab|) = {}", mds.dim, 2 * (n + max_stab));
    }

    // Mirror twins duplicate original vertices and are left out of the interpolation data.
    let keep = base.len();
    let data = EmbeddingData {
        dim: mds.dim,
        vertices: graph.vertices[..keep].to_vec(),
        coords: coords[..keep].to_vec(),
        mds_eigenvalues: mds.eigenvalues.clone(),
        spectrum: mds.spectrum.clone(),
        stress: mds.stress_by_dim[mds.dim - 1],
        stress_by_dim: mds.stress_by_dim.clone(),
        gluing_residual: residual,
        negative_mass: mds.negative_mass,
        epsilon: graph.epsilon,
        delta: graph.delta,
        spacing: graph.spacing,
        rebased: ctx.is_rebased(),
        polytope_vertices: ctx.polytope.vertices().to_vec(),
    };
    let emb = Embedding::from_data(Arc::new(ctx), data)?;
    Ok((emb, graph))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistortionReport {
    pub stress: f64,
    pub max_gluing_residual: f64,
    /// Share of the absolute MDS spectrum per retained dimension.
    pub eigenvalue_mass: Vec<f64>,
    pub discarded_negative_mass: f64,
}

/// Stress and gluing residual of an embedding measured against the graph it came from.
pub fn embedding_distortion(emb: &Embedding, graph: &OrbitGraph) -> Result<DistortionReport> {
    let r = geodesic_distances(graph)?;
    let coords: Vec<DVector<f64>> =
        graph.vertices.iter().map(|v| emb.rho(v)).collect::<Result<_>>()?;
    let mat = DMatrix::from_fn(coords.len(), emb.dim(), |i, j| coords[i][j]);
    let abs_total: f64 = emb.data.spectrum.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    Ok(DistortionReport {
        stress: stress(&mat, &r),
        max_gluing_residual: gluing_residual(graph, &coords),
        eigenvalue_mass: emb.data.mds_eigenvalues.iter().map(|v| v / abs_total).collect(),
        discarded_negative_mass: emb.data.negative_mass,
    })
}
