//! Convex fundamental polytopes: face lattices, vertex enumeration, transversals,
//! exactness and Dirichlet domains. Everything here is exhaustive combinatorics and
//! therefore restricted to n <= 3.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{affine_rank, lex_cmp};
use crate::group::{stabilizer, Isometry, LocalGroup};

/// A point lies on a face if it is this close to the face's affine hull.
pub const BOUNDARY_TOL: f64 = 1e-7;
const VERTEX_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: DVector<f64>, offset: f64) -> Self {
        let norm = normal.norm();
        Halfspace { normal: normal / norm, offset: offset / norm }
    }

    pub fn slack(&self, x: &[f64]) -> f64 {
        self.offset - self.normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Face {
    pub dim: usize,
    pub vertices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ConvexPolytope {
    dim: usize,
    vertices: Vec<DVector<f64>>,
    halfspaces: Vec<Halfspace>,
    faces: Vec<Face>,
    facet_face: Vec<usize>,
    lookup: HashMap<Vec<usize>, usize>,
}

impl ConvexPolytope {
    pub fn from_vertices(points: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidPolytope("no vertices".into()));
        };
        let n = first.len();
        if n == 0 || n > 3 {
            return Err(Error::UnsupportedDimension(n));
        }
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: p.len() });
        }
        let mut pts: Vec<DVector<f64>> = Vec::new();
        for p in points {
            if !pts.iter().any(|q| (q - &p).amax() < VERTEX_TOL) {
                pts.push(p);
            }
        }
        let refs: Vec<_> = pts.iter().collect();
        if affine_rank(&refs, 1e-9) != n {
            return Err(Error::InvalidPolytope("vertices are not full-dimensional".into()));
        }

        let (mut poly, extreme) = Self::build(n, pts.clone())?;
        if extreme.len() < pts.len() {
            let kept: Vec<_> = extreme.into_iter().map(|i| poly.vertices[i].clone()).collect();
            poly = Self::build(n, kept)?.0;
        }
        Ok(poly)
    }

    fn build(n: usize, mut pts: Vec<DVector<f64>>) -> Result<(Self, Vec<usize>)> {
        if n == 2 {
            order_ccw(&mut pts);
        }
        let extent = pts.iter().map(|p| p.amax()).fold(1.0, f64::max);
        let tol = VERTEX_TOL * extent;

        let mut halfspaces: Vec<Halfspace> = Vec::new();
        let mut facet_sets: Vec<Vec<usize>> = Vec::new();
        for subset in combinations(pts.len(), n) {
            let Some((normal, offset)) = hyperplane_through(&subset.iter().map(|&i| &pts[i]).collect::<Vec<_>>()) else {
                continue;
            };
            let s: Vec<f64> = pts.iter().map(|p| normal.dot(p) - offset).collect();
            let sign = if s.iter().all(|v| *v <= tol) {
                1.0
            } else if s.iter().all(|v| *v >= -tol) {
                -1.0
            } else {
                continue;
            };
            let on: Vec<usize> = (0..pts.len()).filter(|&i| s[i].abs() <= tol).collect();
            if facet_sets.contains(&on) {
                continue;
            }
            let refs: Vec<_> = on.iter().map(|&i| &pts[i]).collect();
            if affine_rank(&refs, 1e-9) != n - 1 {
                continue;
            }
            halfspaces.push(Halfspace::new(normal * sign, offset * sign));
            facet_sets.push(on);
        }

        let mut family: Vec<Vec<usize>> = facet_sets.clone();
        let mut changed = true;
        while changed {
            changed = false;
            let len = family.len();
            for a in 0..len {
                for b in (a + 1)..len {
                    let c: Vec<usize> = family[a].iter().filter(|i| family[b].contains(i)).copied().collect();
                    if !c.is_empty() && !family.contains(&c) {
                        family.push(c);
                        changed = true;
                    }
                }
            }
        }
        let all: Vec<usize> = (0..pts.len()).collect();
        let extreme: Vec<usize> = if n == 1 {
            facet_sets.iter().flatten().copied().collect()
        } else {
            family.iter().filter(|s| s.len() == 1).map(|s| s[0]).collect()
        };
        family.push(all);

        let mut faces: Vec<Face> = family
            .into_iter()
            .map(|vs| {
                let refs: Vec<_> = vs.iter().map(|&i| &pts[i]).collect();
                Face { dim: affine_rank(&refs, 1e-9), vertices: vs }
            })
            .collect();
        faces.sort_by(|a, b| a.dim.cmp(&b.dim).then_with(|| a.vertices.cmp(&b.vertices)));
        let lookup: HashMap<Vec<usize>, usize> =
            faces.iter().enumerate().map(|(i, f)| (f.vertices.clone(), i)).collect();
        let facet_face = facet_sets.iter().map(|s| lookup[s]).collect();

        Ok((
            ConvexPolytope { dim: n, vertices: pts, halfspaces, faces, facet_face, lookup },
            extreme,
        ))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, id: usize) -> &Face {
        &self.faces[id]
    }

    /// Face index of each facet, in halfspace order.
    pub fn facet_faces(&self) -> &[usize] {
        &self.facet_face
    }

    pub fn face_by_vertices(&self, vertices: &[usize]) -> Option<usize> {
        self.lookup.get(vertices).copied()
    }

    pub fn faces_of_dim(&self, k: usize) -> impl Iterator<Item = (usize, &Face)> {
        self.faces.iter().enumerate().filter(move |(_, f)| f.dim == k)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Average of the vertices.
    pub fn centroid(&self) -> DVector<f64> {
        self.face_centroid(self.faces.len() - 1)
    }

    pub fn face_centroid(&self, id: usize) -> DVector<f64> {
        let vs = &self.faces[id].vertices;
        let mut c = DVector::zeros(self.dim);
        for &i in vs {
            c += &self.vertices[i];
        }
        c / vs.len() as f64
    }

    pub fn bounding_box(&self) -> (DVector<f64>, DVector<f64>) {
        let mut lo = self.vertices[0].clone();
        let mut hi = self.vertices[0].clone();
        for v in &self.vertices {
            for k in 0..self.dim {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.slack(x) >= -tol)
    }

    /// Largest constraint violation (0 inside).
    pub fn exterior_distance_bound(&self, x: &[f64]) -> f64 {
        self.halfspaces.iter().map(|h| (-h.slack(x)).max(0.0)).fold(0.0, f64::max)
    }

    /// The face whose relative interior contains `x`.
    pub fn classify(&self, x: &[f64], tol: f64) -> Option<usize> {
        if !self.contains(x, tol) {
            return None;
        }
        let mut set: Vec<usize> = (0..self.vertices.len()).collect();
        for (k, h) in self.halfspaces.iter().enumerate() {
            if h.slack(x).abs() <= tol {
                let facet = &self.faces[self.facet_face[k]].vertices;
                set.retain(|i| facet.contains(i));
            }
        }
        self.face_by_vertices(&set)
    }

    /// Ordered vertex loop of a 2-face in R^3 (or of the whole polygon in R^2).
    pub fn face_polygon(&self, id: usize) -> Vec<DVector<f64>> {
        let mut pts: Vec<DVector<f64>> = self.faces[id].vertices.iter().map(|&i| self.vertices[i].clone()).collect();
        if self.dim == 2 {
            return pts;
        }
        let c = self.face_centroid(id);
        let u = (&pts[0] - &c).normalize();
        let normal = (&pts[0] - &c).cross(&(&pts[1] - &c));
        let normal = if normal.norm() > 1e-12 {
            normal.normalize()
        } else {
            (&pts[0] - &c).cross(&(&pts[2] - &c)).normalize()
        };
        let w = normal.cross(&u);
        pts.sort_by(|a, b| {
            let ta = (a - &c).dot(&w).atan2((a - &c).dot(&u));
            let tb = (b - &c).dot(&w).atan2((b - &c).dot(&u));
            ta.total_cmp(&tb)
        });
        pts
    }

    /// (n-1)-dimensional measure of a facet.
    pub fn facet_measure(&self, facet: usize) -> f64 {
        let id = self.facet_face[facet];
        let vs = &self.faces[id].vertices;
        match self.dim {
            1 => 1.0,
            2 => (&self.vertices[vs[0]] - &self.vertices[vs[1]]).norm(),
            _ => {
                let poly = self.face_polygon(id);
                let mut area = 0.0;
                for k in 1..poly.len() - 1 {
                    area += 0.5 * (&poly[k] - &poly[0]).cross(&(&poly[k + 1] - &poly[0])).norm();
                }
                area
            }
        }
    }

    pub fn volume(&self) -> f64 {
        self.volume_and_centroid().0
    }

    /// Volume and centre of mass.
    pub fn volume_and_centroid(&self) -> (f64, DVector<f64>) {
        match self.dim {
            1 => {
                let a = self.vertices[0][0];
                let b = self.vertices[1][0];
                ((a - b).abs(), DVector::from_element(1, 0.5 * (a + b)))
            }
            2 => {
                let p = &self.vertices;
                let mut area = 0.0;
                let mut cx = 0.0;
                let mut cy = 0.0;
                for i in 0..p.len() {
                    let a = &p[i];
                    let b = &p[(i + 1) % p.len()];
                    let cr = a[0] * b[1] - b[0] * a[1];
                    area += cr;
                    cx += (a[0] + b[0]) * cr;
                    cy += (a[1] + b[1]) * cr;
                }
                area *= 0.5;
                (area.abs(), DVector::from_vec(vec![cx / (6.0 * area), cy / (6.0 * area)]))
            }
            _ => {
                let apex = self.centroid();
                let mut vol = 0.0;
                let mut moment = DVector::zeros(3);
                for k in 0..self.halfspaces.len() {
                    let poly = self.face_polygon(self.facet_face[k]);
                    for t in 1..poly.len() - 1 {
                        let a = &poly[0] - &apex;
                        let b = &poly[t] - &apex;
                        let c = &poly[t + 1] - &apex;
                        let v = a.dot(&b.cross(&c)).abs() / 6.0;
                        vol += v;
                        moment += (&poly[0] + &poly[t] + &poly[t + 1] + &apex) * (v / 4.0);
                    }
                }
                (vol, moment / vol)
            }
        }
    }
}

impl PartialEq for ConvexPolytope {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
    }
}

#[derive(Serialize, Deserialize)]
struct PolytopeRepr {
    vertices: Vec<Vec<f64>>,
    #[serde(default)]
    halfspaces: Vec<Halfspace>,
    #[serde(default)]
    faces: Vec<Face>,
}

impl Serialize for ConvexPolytope {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolytopeRepr {
            vertices: self.vertices.iter().map(|v| v.iter().copied().collect()).collect(),
            halfspaces: self.halfspaces.clone(),
            faces: self.faces.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConvexPolytope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PolytopeRepr::deserialize(d)?;
        ConvexPolytope::from_vertices(repr.vertices.into_iter().map(DVector::from_vec).collect())
            .map_err(serde::de::Error::custom)
    }
}

fn order_ccw(pts: &mut [DVector<f64>]) {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let first = pts[0].clone();
    let angle = |p: &DVector<f64>| (p[1] - cy).atan2(p[0] - cx);
    pts.sort_by(|a, b| angle(a).total_cmp(&angle(b)));
    if let Some(pos) = pts.iter().position(|p| *p == first) {
        pts.rotate_left(pos);
    }
}

fn hyperplane_through(pts: &[&DVector<f64>]) -> Option<(DVector<f64>, f64)> {
    let n = pts[0].len();
    let normal = match n {
        1 => DVector::from_element(1, 1.0),
        2 => {
            let d = pts[1] - pts[0];
            DVector::from_vec(vec![-d[1], d[0]])
        }
        3 => {
            let a = pts[1] - pts[0];
            let b = pts[2] - pts[0];
            a.cross(&b)
        }
        _ => return None,
    };
    let norm = normal.norm();
    if norm < 1e-12 {
        return None;
    }
    let normal = normal / norm;
    let offset = normal.dot(pts[0]);
    Some((normal, offset))
}

pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Vertex enumeration of a bounded intersection of half-spaces.
pub fn halfspace_intersection(halfspaces: &[Halfspace]) -> Result<ConvexPolytope> {
    let Some(first) = halfspaces.first() else {
        return Err(Error::Unbounded);
    };
    let n = first.normal.len();
    if n == 0 || n > 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    const BOX: f64 = 1e6;
    let mut all: Vec<Halfspace> = halfspaces.to_vec();
    for k in 0..n {
        let mut e = DVector::zeros(n);
        e[k] = 1.0;
        all.push(Halfspace { normal: e.clone(), offset: BOX });
        all.push(Halfspace { normal: -e, offset: BOX });
    }
    let scale = halfspaces.iter().map(|h| h.offset.abs()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;

    let mut verts: Vec<DVector<f64>> = Vec::new();
    for subset in combinations(all.len(), n) {
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (r, &i) in subset.iter().enumerate() {
            a.set_row(r, &all[i].normal.transpose());
            b[r] = all[i].offset;
        }
        if a.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(x) = a.lu().solve(&b) else { continue };
        if all.iter().all(|h| h.slack(x.as_slice()) >= -tol) && !verts.iter().any(|v| (v - &x).amax() < 1e-8 * scale) {
            verts.push(x);
        }
    }
    if verts.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    if verts.iter().any(|v| v.amax() > 0.5 * BOX) {
        return Err(Error::Unbounded);
    }
    let refs: Vec<_> = verts.iter().collect();
    if affine_rank(&refs, 1e-9) < n {
        return Err(Error::EmptyIntersection);
    }
    ConvexPolytope::from_vertices(verts)
}

/// For each local-group element, the index of the polytope vertex hit by each vertex image.
fn vertex_images(poly: &ConvexPolytope, local: &LocalGroup) -> Vec<Vec<Option<usize>>> {
    let tol = BOUNDARY_TOL * poly.diameter().max(1.0);
    local
        .elements
        .iter()
        .map(|phi| {
            poly.vertices
                .iter()
                .map(|v| {
                    let w = phi.image(v);
                    poly.vertices.iter().position(|u| (u - &w).amax() <= tol)
                })
                .collect()
        })
        .collect()
}

fn face_image(poly: &ConvexPolytope, images: &[Option<usize>], face: usize) -> Option<usize> {
    let mut mapped = Vec::with_capacity(poly.faces[face].vertices.len());
    for &v in &poly.faces[face].vertices {
        mapped.push(images[v]?);
    }
    mapped.sort_unstable();
    poly.face_by_vertices(&mapped)
}

/// One face per equivalence class of faces under the group, plus the bookkeeping the
/// projector needs to move any face onto its class representative.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transversal {
    pub selected_faces: Vec<usize>,
    /// Class index of every face.
    pub class_of: Vec<usize>,
    /// Local-group index of an element mapping each face onto its representative.
    pub to_representative: Vec<usize>,
    /// Setwise stabilizer (local-group indices) of each representative.
    pub stabilizers: Vec<Vec<usize>>,
}

impl Transversal {
    pub fn representative(&self, face: usize) -> usize {
        self.selected_faces[self.class_of[face]]
    }

    pub fn is_selected(&self, face: usize) -> bool {
        self.selected_faces.contains(&face)
    }

    /// Canonical point of the orbit of `x` (which must lie in the relative interior of a
    /// representative face) among the images under that face's stabilizer.
    pub fn canonicalize(&self, local: &LocalGroup, face: usize, x: &DVector<f64>) -> DVector<f64> {
        let class = self.class_of[face];
        let mut best = x.clone();
        for &s in &self.stabilizers[class] {
            let y = local.elements[s].image(x);
            if lex_cmp(y.as_slice(), best.as_slice(), 1e-9) == std::cmp::Ordering::Less {
                best = y;
            }
        }
        best
    }

    /// Whether `x` (in the polytope) is the transversal's representative of its orbit.
    pub fn contains(&self, poly: &ConvexPolytope, local: &LocalGroup, x: &DVector<f64>) -> bool {
        match poly.classify(x.as_slice(), BOUNDARY_TOL) {
            Some(face) if self.is_selected(face) => {
                let c = self.canonicalize(local, face, x);
                (c - x).amax() <= 1e-9
            }
            _ => false,
        }
    }
}

pub fn compute_transversal(poly: &ConvexPolytope, local: &LocalGroup) -> Result<Transversal> {
    let nf = poly.faces.len();
    let images = vertex_images(poly, local);

    let mut parent: Vec<usize> = (0..nf).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for img in &images {
        for f in 0..nf {
            if let Some(g) = face_image(poly, img, f) {
                let (a, b) = (find(&mut parent, f), find(&mut parent, g));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }

    let mut roots: Vec<usize> = Vec::new();
    let mut class_of = vec![0; nf];
    for f in 0..nf {
        let r = find(&mut parent, f);
        let c = match roots.iter().position(|&x| x == r) {
            Some(c) => c,
            None => {
                roots.push(r);
                roots.len() - 1
            }
        };
        class_of[f] = c;
    }

    let centroids: Vec<DVector<f64>> = (0..nf).map(|f| poly.face_centroid(f)).collect();
    let mut selected = vec![usize::MAX; roots.len()];
    for f in 0..nf {
        let c = class_of[f];
        if selected[c] == usize::MAX
            || lex_cmp(centroids[f].as_slice(), centroids[selected[c]].as_slice(), 1e-9) == std::cmp::Ordering::Less
        {
            selected[c] = f;
        }
    }

    let mut to_rep = vec![usize::MAX; nf];
    for f in 0..nf {
        let rep = selected[class_of[f]];
        to_rep[f] = images
            .iter()
            .position(|img| face_image(poly, img, f) == Some(rep))
            .ok_or_else(|| Error::LocalGroupTooSmall(format!("face {f} has no direct map to its representative")))?;
    }
    let stabilizers = selected
        .iter()
        .map(|&rep| (0..images.len()).filter(|&i| face_image(poly, &images[i], rep) == Some(rep)).collect())
        .collect();

    Ok(Transversal { selected_faces: selected, class_of, to_representative: to_rep, stabilizers })
}

/// Exactness test: every facet S must equal Π ∩ φΠ for some φ. Returns the witness
/// (local-group index) for each facet, `None` where no witness exists.
pub fn exactness_witnesses(poly: &ConvexPolytope, local: &LocalGroup) -> Vec<Option<usize>> {
    let tol = BOUNDARY_TOL * poly.diameter().max(1.0);
    let tiles: Vec<Vec<DVector<f64>>> =
        local.elements.iter().map(|phi| poly.vertices.iter().map(|v| phi.image(v)).collect()).collect();
    (0..poly.halfspaces.len())
        .map(|k| {
            let h = &poly.halfspaces[k];
            let facet = &poly.faces[poly.facet_face[k]].vertices;
            (0..local.elements.len()).find(|&i| {
                if local.elements[i].is_identity(1e-9) {
                    return false;
                }
                let tile = &tiles[i];
                let outside = tile.iter().all(|w| h.slack(w.as_slice()) <= tol);
                outside && facet.iter().all(|&v| in_tile(poly, &local.elements[i], &poly.vertices[v], tol))
            })
        })
        .collect()
}

fn in_tile(poly: &ConvexPolytope, phi: &Isometry, x: &DVector<f64>, tol: f64) -> bool {
    let pre = phi.inverse().image(x);
    poly.contains(pre.as_slice(), tol)
}

pub fn is_exact(poly: &ConvexPolytope, local: &LocalGroup) -> bool {
    exactness_witnesses(poly, local).iter().all(Option::is_some)
}

/// Dirichlet domain of the orbit of `x`: the cell of points at least as close to `x` as to
/// any other orbit point.
pub fn dirichlet_domain(local: &LocalGroup, x: &DVector<f64>) -> Result<ConvexPolytope> {
    if stabilizer(local, x, 1e-9).len() > 1 {
        return Err(Error::FixedPoint(x.iter().copied().collect()));
    }
    let mut orbit: Vec<(f64, DVector<f64>)> = local
        .elements
        .iter()
        .filter(|phi| !phi.is_identity(1e-9))
        .map(|phi| {
            let y = phi.image(x);
            ((&y - x).norm(), y)
        })
        .collect();
    orbit.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nearest = orbit.first().map(|o| o.0).ok_or(Error::Unbounded)?;

    let bisector = |y: &DVector<f64>| {
        let d = y - x;
        Halfspace::new(d.clone(), 0.5 * (y.norm_squared() - x.norm_squared()))
    };
    let mut reach = 3.0 * nearest;
    loop {
        let hs: Vec<Halfspace> = orbit.iter().filter(|o| o.0 <= reach).map(|o| bisector(&o.1)).collect();
        let cell = match halfspace_intersection(&hs) {
            Ok(c) => c,
            Err(Error::Unbounded) if reach < orbit.last().unwrap().0 => {
                reach *= 2.0;
                continue;
            }
            Err(e) => return Err(e),
        };
        let circumradius = cell.vertices.iter().map(|v| (v - x).norm()).fold(0.0, f64::max);
        if 2.0 * circumradius <= reach + 1e-12 {
            if 2.0 * circumradius > local.radius + 1e-9 {
                return Err(Error::LocalGroupTooSmall(format!(
                    "Dirichlet cell needs orbit points up to distance {:.3}, local group covers {:.3}",
                    2.0 * circumradius,
                    local.radius
                )));
            }
            return Ok(cell);
        }
        reach = 2.0 * circumradius + 1e-9;
    }
}
