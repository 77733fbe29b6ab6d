//! The computational quotient space R^n/G: quotient metric, orbit equivalence and the
//! projector onto a transversal of the fundamental polytope.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{dist2, lex_cmp};
use crate::group::{enumerate_local_group, enumerate_within, stabilizer, CrystalGroup, LocalGroup};
use crate::polytope::{compute_transversal, dirichlet_domain, exactness_witnesses, ConvexPolytope, Transversal, BOUNDARY_TOL};

pub const EQUIVALENCE_TOL: f64 = 1e-7;

// Projected points are snapped to this dyadic grid so that every point of an orbit maps to a
// bitwise identical representative despite rounding in the lattice reduction.
const SNAP: f64 = 4294967296.0;

#[derive(Clone, Debug)]
pub struct QuotientContext {
    pub group: CrystalGroup,
    pub polytope: ConvexPolytope,
    pub local_group: LocalGroup,
    pub transversal: Transversal,
    /// Columns are the lattice basis (shift coordinates → standard coordinates).
    pub basis_change: DMatrix<f64>,
    pub basis_change_inv: DMatrix<f64>,
    /// Facet witnesses of exactness; `None` where a facet is not of the form Π ∩ φΠ.
    pub exactness_witnesses: Vec<Option<usize>>,
    /// The declared polytope when this context was re-based onto a Dirichlet domain.
    pub rebased_from: Option<ConvexPolytope>,
    cell_origin: DVector<f64>,
}

impl QuotientContext {
    /// Context on the group's declared polytope.
    pub fn new(group: CrystalGroup) -> Result<Self> {
        let poly = group.polytope.clone();
        Self::with_polytope(group, poly, 0.0)
    }

    /// Context on the declared polytope, re-based onto a Dirichlet domain if that polytope
    /// is not exact.
    pub fn exact(group: CrystalGroup) -> Result<Self> {
        Self::new(group)?.rebased()
    }

    pub fn with_polytope(group: CrystalGroup, polytope: ConvexPolytope, margin: f64) -> Result<Self> {
        if polytope.dim() != group.dimension {
            return Err(Error::DimensionMismatch { expected: group.dimension, got: polytope.dim() });
        }
        let basis_change = group.basis_matrix();
        let basis_change_inv = basis_change
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidGroup("singular lattice basis".into()))?;
        let n = group.dimension;
        let half = DVector::from_element(n, 0.5);
        let cell_origin = polytope.centroid() - &basis_change * &half;

        // The reduced cell must be covered by tiles of the local group.
        let mut half_diagonal: f64 = 0.0;
        for corner in 0..(1usize << n) {
            let s = DVector::from_fn(n, |k, _| if corner >> k & 1 == 1 { 0.5 } else { -0.5 });
            half_diagonal = half_diagonal.max((&basis_change * s).norm());
        }
        let radius = (polytope.diameter() * (1.0 + margin)).max(half_diagonal);
        let local_group = enumerate_within(&group, &polytope, radius, crate::group::DEFAULT_MAX_WORD)?;
        let transversal = compute_transversal(&polytope, &local_group)?;
        let exactness_witnesses = exactness_witnesses(&polytope, &local_group);
        Ok(QuotientContext {
            group,
            polytope,
            local_group,
            transversal,
            basis_change,
            basis_change_inv,
            exactness_witnesses,
            rebased_from: None,
            cell_origin,
        })
    }

    pub fn dim(&self) -> usize {
        self.group.dimension
    }

    pub fn is_exact(&self) -> bool {
        self.exactness_witnesses.iter().all(Option::is_some)
    }

    pub fn is_rebased(&self) -> bool {
        self.rebased_from.is_some()
    }

    /// This context if its polytope is exact, otherwise one on the Dirichlet domain of the
    /// polytope centroid (nudged off any fixed point).
    pub fn rebased(self) -> Result<Self> {
        if self.is_exact() {
            return Ok(self);
        }
        let wide = enumerate_local_group(&self.group, &self.polytope, 1.0)?;
        let c = self.polytope.centroid();
        let diam = self.polytope.diameter();
        let mut x = c.clone();
        let mut k = 1.0;
        while stabilizer(&wide, &x, 1e-9).len() > 1 {
            let nudge = DVector::from_fn(c.len(), |i, _| ((k * (i as f64 + 1.0) * 0.618_033_988_7) % 1.0) - 0.5);
            x = &c + nudge * (0.02 * diam);
            k += 1.0;
        }
        let domain = dirichlet_domain(&wide, &x)?;
        let original = self.polytope.clone();
        let mut ctx = Self::with_polytope(self.group, domain, 0.0)?;
        if !ctx.is_exact() {
            log::warn!("Dirichlet domain failed the exactness test");
        }
        ctx.rebased_from = Some(original);
        Ok(ctx)
    }

    /// Reduce modulo the lattice into the cell centred on the polytope centroid.
    pub fn reduce(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut s = &self.basis_change_inv * (x - &self.cell_origin);
        for v in s.iter_mut() {
            *v -= v.floor();
            if *v >= 1.0 {
                *v = 0.0;
            }
        }
        &self.cell_origin + &self.basis_change * s
    }

    /// The unique point of the orbit of `x` in the transversal.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let y = self.reduce(x);
        let mut buf = vec![0.0; self.dim()];
        for phi in &self.local_group.elements {
            phi.image_into(y.as_slice(), &mut buf);
            if !self.polytope.contains(&buf, BOUNDARY_TOL) {
                continue;
            }
            let Some(face) = self.polytope.classify(&buf, BOUNDARY_TOL) else { continue };
            let z = DVector::from_column_slice(&buf);
            let to_rep = &self.local_group.elements[self.transversal.to_representative[face]];
            let z = to_rep.image(&z);
            let rep = self.transversal.representative(face);
            if self.polytope.face(rep).dim == 0 {
                // Vertex coordinates are fixed values; snapping could straddle a grid midpoint.
                let v = self.polytope.vertices()[self.polytope.face(rep).vertices[0]].clone();
                return Ok(if self.is_exact() { v } else { self.orbit_minimum(&v) });
            }
            let mut z = self.transversal.canonicalize(&self.local_group, rep, &z);
            if !self.is_exact() && self.polytope.face(rep).dim < self.dim() {
                z = self.orbit_minimum(&z);
            }
            return Ok(z.map(|v| (v * SNAP).round() / SNAP));
        }
        Err(Error::ProjectionFailed(x.iter().copied().collect()))
    }

    // Without a face-to-face tiling a boundary face can meet its own orbit (the glide of pg
    // slides the edge along itself), so face classes alone do not pick one point; take the
    // lexicographically least orbit point in the polytope instead.
    fn orbit_minimum(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut best = z.clone();
        for phi in &self.local_group.elements {
            let y = phi.image(z);
            if self.polytope.contains(y.as_slice(), BOUNDARY_TOL) && lex_cmp(y.as_slice(), best.as_slice(), 1e-9).is_lt() {
                best = y;
            }
        }
        best
    }

    /// Whether `x` is the transversal's representative of its orbit (up to the 1e-9
    /// arithmetic tolerance).
    pub fn in_transversal(&self, x: &DVector<f64>) -> bool {
        if self.is_exact() {
            return self.transversal.contains(&self.polytope, &self.local_group, x);
        }
        self.polytope.contains(x.as_slice(), BOUNDARY_TOL) && (self.orbit_minimum(x) - x).amax() <= 1e-9
    }

    /// min over the local group of d(x, φy); both points should already lie in (or near) Π.
    pub fn quotient_distance(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.quotient_distance_slice(x.as_slice(), y.as_slice())
    }

    pub fn quotient_distance_slice(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut buf = [0.0; 3];
        let n = x.len();
        let mut best = f64::INFINITY;
        for phi in &self.local_group.elements {
            phi.image_into(y, &mut buf[..n]);
            let d = dist2(x, &buf[..n]);
            if d < best {
                best = d;
            }
        }
        best.sqrt()
    }

    pub fn equivalent(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<bool> {
        let px = self.project(x)?;
        let py = self.project(y)?;
        Ok(self.quotient_distance(&px, &py) <= EQUIVALENCE_TOL)
    }

    /// Local-group indices of reflections fixing each facet pointwise (mirror facets).
    pub fn mirror_facets(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, &face) in self.polytope.facet_faces().iter().enumerate() {
            let verts = &self.polytope.face(face).vertices;
            for (i, phi) in self.local_group.elements.iter().enumerate() {
                if phi.det() > 0.0 {
                    continue;
                }
                let fixes = verts.iter().all(|&v| {
                    let p = &self.polytope.vertices()[v];
                    (phi.image(p) - p).norm() <= 1e-9
                });
                if fixes {
                    out.push((k, i));
                    break;
                }
            }
        }
        out
    }
}
