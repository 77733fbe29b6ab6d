//! ε-nets in the fundamental polytope and orbit graphs: the discrete stand-in for the
//! quotient space, with edges weighted by the quotient metric.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist2, nearest_in_hull, serde_points};
use crate::polytope::ConvexPolytope;
use crate::quotient::QuotientContext;

/// Uniform spatial hash over a fixed point set.
#[derive(Clone, Debug)]
pub struct NetIndex {
    dim: usize,
    cell: f64,
    coords: Vec<f64>,
    buckets: HashMap<[i64; 3], Vec<usize>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl NetIndex {
    pub fn new(points: &[DVector<f64>], cell: f64) -> Self {
        assert!(cell > 0.0);
        let dim = points.first().map_or(1, |p| p.len());
        let mut index = NetIndex {
            dim,
            cell,
            coords: Vec::with_capacity(points.len() * dim),
            buckets: HashMap::new(),
            lo: vec![f64::INFINITY; dim],
            hi: vec![f64::NEG_INFINITY; dim],
        };
        for (i, p) in points.iter().enumerate() {
            index.coords.extend(p.iter());
            for k in 0..dim {
                index.lo[k] = index.lo[k].min(p[k]);
                index.hi[k] = index.hi[k].max(p[k]);
            }
            let key = index.key(p.as_slice());
            index.buckets.entry(key).or_default().push(i);
        }
        index
    }

    fn key(&self, x: &[f64]) -> [i64; 3] {
        let mut k = [0i64; 3];
        for (slot, v) in k.iter_mut().zip(x) {
            *slot = (v / self.cell).floor() as i64;
        }
        k
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Squared distance from `x` to the bounding box of the indexed points.
    pub fn box_dist2(&self, x: &[f64]) -> f64 {
        let mut d = 0.0;
        for k in 0..self.dim {
            let e = (self.lo[k] - x[k]).max(x[k] - self.hi[k]).max(0.0);
            d += e * e;
        }
        d
    }

    /// Calls `f(i, d²)` for every indexed point with d(x, point) ≤ r.
    pub fn for_each_within(&self, x: &[f64], r: f64, mut f: impl FnMut(usize, f64)) {
        let r2 = r * r;
        if self.box_dist2(x) > r2 {
            return;
        }
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for k in 0..self.dim {
            lo[k] = ((x[k] - r).max(self.lo[k]) / self.cell).floor() as i64;
            hi[k] = ((x[k] + r).min(self.hi[k]) / self.cell).floor() as i64;
        }
        let mut key = lo;
        loop {
            if let Some(bucket) = self.buckets.get(&key) {
                for &i in bucket {
                    let d = dist2(x, self.point(i));
                    if d <= r2 {
                        f(i, d);
                    }
                }
            }
            let mut k = 0;
            loop {
                if k == self.dim {
                    return;
                }
                key[k] += 1;
                if key[k] <= hi[k] {
                    break;
                }
                key[k] = lo[k];
                k += 1;
            }
        }
    }

    /// Indexed points within quotient distance `r` of `x`, each with its quotient distance,
    /// sorted by index. `x` should lie in or near the polytope and `r` within the
    /// local-group radius.
    pub fn quotient_neighbors(&self, ctx: &QuotientContext, x: &[f64], r: f64) -> Vec<(usize, f64)> {
        let mut found: Vec<(usize, f64)> = Vec::new();
        let mut img = [0.0; 3];
        let n = self.dim;
        for phi in &ctx.local_group.elements {
            phi.image_into(x, &mut img[..n]);
            self.for_each_within(&img[..n], r, |i, d2| found.push((i, d2)));
        }
        found.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        found.dedup_by_key(|e| e.0);
        for e in &mut found {
            e.1 = e.1.sqrt();
        }
        found
    }

    /// The `k` indexed points nearest to `x` in the quotient metric, nearest first.
    pub fn quotient_knn(&self, ctx: &QuotientContext, x: &[f64], k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.len());
        let mut r = self.cell;
        loop {
            let mut found = self.quotient_neighbors(ctx, x, r);
            if found.len() >= k || r > 2.0 * ctx.local_group.radius {
                found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                found.truncate(k);
                return found;
            }
            r *= 2.0;
        }
    }
}

/// Grid spacing used by [`build_net`] (the largest per-axis spacing).
pub fn net_spacing(poly: &ConvexPolytope, epsilon: f64) -> f64 {
    let n = poly.dim();
    if epsilon >= poly.diameter() {
        return poly.diameter();
    }
    let target = epsilon / (n as f64).sqrt();
    let (lo, hi) = poly.bounding_box();
    (0..n)
        .map(|k| {
            let len = hi[k] - lo[k];
            len / (len / target).ceil().max(1.0)
        })
        .fold(0.0, f64::max)
}

/// Axis-aligned ε-net of the polytope: a grid of spacing at most ε/√n over the bounding box,
/// the points inside the polytope, exterior grid points within ε/4 snapped onto the boundary,
/// and the polytope's vertices.
pub fn build_net(poly: &ConvexPolytope, epsilon: f64) -> Result<Vec<DVector<f64>>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::EmptyNet(epsilon));
    }
    if epsilon >= poly.diameter() {
        return Ok(vec![poly.centroid()]);
    }
    let n = poly.dim();
    let target = epsilon / (n as f64).sqrt();
    let (lo, hi) = poly.bounding_box();
    let counts: Vec<usize> = (0..n).map(|k| ((hi[k] - lo[k]) / target).ceil().max(1.0) as usize).collect();
    let steps: Vec<f64> = (0..n).map(|k| (hi[k] - lo[k]) / counts[k] as f64).collect();
    let snap = epsilon / 4.0;

    let mut points: Vec<DVector<f64>> = Vec::new();
    let mut seen: HashMap<Vec<i64>, ()> = HashMap::new();
    let mut push = |p: DVector<f64>, points: &mut Vec<DVector<f64>>| {
        let key: Vec<i64> = p.iter().map(|v| (v * 1e8).round() as i64).collect();
        if seen.insert(key, ()).is_none() {
            points.push(p);
        }
    };

    let mut idx = vec![0usize; n];
    loop {
        let p = DVector::from_fn(n, |k, _| if idx[k] == counts[k] { hi[k] } else { lo[k] + idx[k] as f64 * steps[k] });
        if poly.contains(p.as_slice(), 1e-9) {
            push(p, &mut points);
        } else if poly.exterior_distance_bound(p.as_slice()) <= snap {
            let q = nearest_in_hull(poly.vertices(), &p);
            if (&q - &p).norm() <= snap {
                push(q, &mut points);
            }
        }
        let mut k = 0;
        loop {
            if k == n {
                for v in poly.vertices() {
                    push(v.clone(), &mut points);
                }
                if points.is_empty() {
                    return Err(Error::EmptyNet(epsilon));
                }
                return Ok(points);
            }
            idx[k] += 1;
            if idx[k] <= counts[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// The orbit graph: net vertices joined when their quotient distance is below δ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitGraph {
    #[serde(with = "serde_points")]
    pub vertices: Vec<DVector<f64>>,
    /// Undirected edges (i < j) with their quotient distance.
    pub edges: Vec<(usize, usize, f64)>,
    pub epsilon: f64,
    pub delta: f64,
    pub spacing: f64,
    /// Vertices identified by a reflection (original, mirrored twin).
    pub constraint_pairs: Vec<(usize, usize)>,
}

impl OrbitGraph {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &(i, j, w) in &self.edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        adj
    }

    /// Number of connected components.
    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut count = self.vertices.len();
        for &(i, j, _) in &self.edges {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a] = b;
                count -= 1;
            }
        }
        count
    }

    /// Pairs of distinct vertices representing the same orbit: zero-weight edges and
    /// reflection constraints.
    pub fn glued_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> =
            self.edges.iter().filter(|e| e.2 <= 1e-9).map(|e| (e.0, e.1)).collect();
        pairs.extend(self.constraint_pairs.iter().filter(|p| p.0 != p.1).copied());
        pairs
    }

    pub fn to_off(&self) -> String {
        let pts: Vec<&[f64]> = self.vertices.iter().map(|v| v.as_slice()).collect();
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.0, e.1)).collect();
        off_mesh(&pts, &edges)
    }
}

/// OFF text with the first three coordinates of each point (zero-padded) and every edge
/// written as a degenerate triangle.
pub fn off_mesh(points: &[&[f64]], edges: &[(usize, usize)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "OFF\n{} {} 0", points.len(), edges.len());
    for p in points {
        let c: Vec<f64> = (0..3).map(|k| p.get(k).copied().unwrap_or(0.0)).collect();
        let _ = writeln!(out, "{} {} {}", c[0], c[1], c[2]);
    }
    for (i, j) in edges {
        let _ = writeln!(out, "3 {i} {j} {i}");
    }
    out
}

fn quotient_edges(ctx: &QuotientContext, vertices: &[DVector<f64>], delta: f64, cell: f64) -> Vec<(usize, usize, f64)> {
    let index = NetIndex::new(vertices, cell);
    let per_vertex: Vec<Vec<(usize, usize, f64)>> = (0..vertices.len())
        .into_par_iter()
        .map(|i| {
            index
                .quotient_neighbors(ctx, vertices[i].as_slice(), delta)
                .into_iter()
                .filter(|&(j, d)| j > i && d < delta)
                .map(|(j, d)| (i, j, d))
                .collect()
        })
        .collect();
    per_vertex.into_iter().flatten().collect()
}

/// Orbit graph on the ε-net of the context's polytope; `delta = None` uses 1.5 × the grid
/// spacing.
pub fn build_orbit_graph(ctx: &QuotientContext, epsilon: f64, delta: Option<f64>) -> Result<OrbitGraph> {
    let vertices = build_net(&ctx.polytope, epsilon)?;
    let spacing = net_spacing(&ctx.polytope, epsilon);
    let delta = delta.unwrap_or(1.5 * spacing);
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let edges = quotient_edges(ctx, &vertices, delta, delta.max(spacing));
    let graph = OrbitGraph { vertices, edges, epsilon, delta, spacing, constraint_pairs: Vec::new() };
    check_connected(&graph)?;
    Ok(graph)
}

fn check_connected(graph: &OrbitGraph) -> Result<()> {
    match graph.components() {
        1 => Ok(()),
        c => Err(Error::Disconnected(c)),
    }
}

/// Adds the mirror image of every vertex within δ of a mirror facet, records each
/// (vertex, image) pair as a constraint and recomputes the edges. A no-op without mirrors.
pub fn mirror_augment(ctx: &QuotientContext, graph: &OrbitGraph) -> Result<OrbitGraph> {
    let mirrors = ctx.mirror_facets();
    if mirrors.is_empty() {
        return Ok(graph.clone());
    }
    let mut vertices = graph.vertices.clone();
    let mut pairs = graph.constraint_pairs.clone();
    for (i, x) in graph.vertices.iter().enumerate() {
        for &(facet, phi) in &mirrors {
            if ctx.polytope.halfspaces()[facet].slack(x.as_slice()) <= graph.delta {
                pairs.push((i, vertices.len()));
                vertices.push(ctx.local_group.elements[phi].image(x));
            }
        }
    }
    let edges = quotient_edges(ctx, &vertices, graph.delta, graph.delta.max(graph.spacing));
    let out = OrbitGraph { vertices, edges, constraint_pairs: pairs, ..graph.clone() };
    check_connected(&out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;

    fn ctx(name: &str) -> QuotientContext {
        QuotientContext::new(registry::builtin(name).unwrap()).unwrap()
    }

    #[test]
    fn square_net_counts() {
        let c = ctx("p1");
        let net = build_net(&c.polytope, 0.5).unwrap();
        assert_eq!(net.len(), 16);
        assert!((net_spacing(&c.polytope, 0.5) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(build_net(&c.polytope, 10.0).unwrap().len(), 1);
        assert!(build_net(&c.polytope, 0.0).is_err());
    }

    #[test]
    fn interval_net_gaps() {
        let c = ctx("line-p1");
        let mut net: Vec<f64> = build_net(&c.polytope, 0.3).unwrap().iter().map(|p| p[0]).collect();
        net.sort_by(f64::total_cmp);
        assert_eq!(net[0], 0.0);
        assert_eq!(*net.last().unwrap(), 1.0);
        assert!(net.windows(2).all(|w| w[1] - w[0] <= 0.3 + 1e-12));
    }

    #[test]
    fn interval_cycle_edges() {
        let c = ctx("line-p1");
        let g = build_orbit_graph(&c, 0.25, Some(0.3)).unwrap();
        assert_eq!(g.len(), 5);
        let xs: Vec<f64> = g.vertices.iter().map(|v| v[0]).collect();
        let mut expected = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                let d = (xs[i] - xs[j]).abs();
                let d = d.min(1.0 - d);
                if d < 0.3 {
                    expected.push((i, j, d));
                }
            }
        }
        assert_eq!(g.edges.len(), expected.len());
        assert_eq!(g.edges.len(), 7);
        for (e, f) in g.edges.iter().zip(&expected) {
            assert_eq!((e.0, e.1), (f.0, f.1));
            assert!((e.2 - f.2).abs() < 1e-12);
        }
        let zero = g.edges.iter().find(|e| e.2 < 1e-12).unwrap();
        assert_eq!(xs[zero.0].min(xs[zero.1]), 0.0);
        assert_eq!(xs[zero.0].max(xs[zero.1]), 1.0);
    }

    #[test]
    fn square_boundary_twins() {
        let c = ctx("p1");
        let g = build_orbit_graph(&c, 0.5, Some(0.4)).unwrap();
        for (i, v) in g.vertices.iter().enumerate() {
            if v[0] == 0.0 {
                let twin = g.vertices.iter().position(|w| w[0] == 1.0 && (w[1] - v[1]).abs() < 1e-12).unwrap();
                let (a, b) = (i.min(twin), i.max(twin));
                assert!(g.edges.iter().any(|e| e.0 == a && e.1 == b && e.2 == 0.0));
            }
        }
        let centre = g.vertices.iter().position(|v| (v[0] - 1.0 / 3.0).abs() < 1e-12 && (v[1] - 1.0 / 3.0).abs() < 1e-12).unwrap();
        // Four grid neighbours as orbits; two of them also appear as boundary twins.
        let mut orbits: Vec<DVector<f64>> = Vec::new();
        for e in g.edges.iter().filter(|e| e.0 == centre || e.1 == centre) {
            let p = c.project(&g.vertices[e.0 + e.1 - centre]).unwrap();
            if !orbits.iter().any(|q| (q - &p).norm() < 1e-9) {
                orbits.push(p);
            }
        }
        assert_eq!(orbits.len(), 4);
    }

    #[test]
    fn knn_matches_brute_force() {
        let c = ctx("p4");
        let net = build_net(&c.polytope, 0.1).unwrap();
        let index = NetIndex::new(&net, 0.05);
        let x = DVector::from_column_slice(&[0.02, 0.47]);
        let got = index.quotient_knn(&c, x.as_slice(), 8);
        let mut brute: Vec<(usize, f64)> = net.iter().enumerate().map(|(j, y)| (j, c.quotient_distance(&x, y))).collect();
        brute.sort_by(|a, b| a.1.total_cmp(&b.1));
        for (g, b) in got.iter().zip(&brute) {
            assert!((g.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn mirror_augment_pm() {
        let c = ctx("pm");
        let g = build_orbit_graph(&c, 0.2, None).unwrap();
        let same = mirror_augment(&ctx("p1"), &build_orbit_graph(&ctx("p1"), 0.2, None).unwrap()).unwrap();
        assert!(same.constraint_pairs.is_empty());
        let aug = mirror_augment(&c, &g).unwrap();
        assert!(aug.len() > g.len());
        for &(i, j) in &aug.constraint_pairs {
            let x = &aug.vertices[i];
            let y = &aug.vertices[j];
            assert!(c.quotient_distance(x, y) < 1e-12);
            let near = c.mirror_facets().iter().any(|&(f, _)| c.polytope.halfspaces()[f].slack(x.as_slice()) <= g.delta);
            assert!(near);
        }
    }

    #[test]
    fn off_export() {
        let c = ctx("line-p1");
        let g = build_orbit_graph(&c, 0.25, Some(0.3)).unwrap();
        let off = g.to_off();
        assert!(off.starts_with("OFF\n5 7 0\n"));
        assert_eq!(off.lines().count(), 2 + 5 + 7);
    }
}
