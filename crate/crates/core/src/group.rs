//! Euclidean isometries, crystallographic groups given by generators, and enumeration of
//! the finite set of elements whose tiles lie near the fundamental polytope.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::ConvexPolytope;

/// Absolute tolerance for comparing isometries entrywise.
pub const ISOMETRY_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_WORD: usize = 32;

/// x ↦ Ax + b with A orthogonal. `word` records the generator product that produced the
/// element: entry `k` means generator `k-1`, `-k` its inverse, applied right to left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Isometry {
    pub matrix: DMatrix<f64>,
    pub translation: DVector<f64>,
    #[serde(default)]
    pub word: Vec<i32>,
}

impl Isometry {
    pub fn new(matrix: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        let n = translation.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.nrows() });
        }
        let gram = matrix.transpose() * &matrix;
        let dev = (gram - DMatrix::identity(n, n)).amax();
        if dev > ISOMETRY_TOL {
            return Err(Error::InvalidGroup(format!("matrix is not orthogonal (deviation {dev:.2e})")));
        }
        Ok(Isometry { matrix, translation, word: Vec::new() })
    }

    pub fn identity(n: usize) -> Self {
        Isometry { matrix: DMatrix::identity(n, n), translation: DVector::zeros(n), word: Vec::new() }
    }

    pub fn shift(b: DVector<f64>) -> Self {
        let n = b.len();
        Isometry { matrix: DMatrix::identity(n, n), translation: b, word: Vec::new() }
    }

    /// Rotation (or any orthogonal map) `a` about the point `c`.
    pub fn about(a: DMatrix<f64>, c: &DVector<f64>) -> Result<Self> {
        let b = c - &a * c;
        Isometry::new(a, b)
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn det(&self) -> f64 {
        self.matrix.determinant()
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.image(x))
    }

    /// Unchecked `apply`.
    pub fn image(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x + &self.translation
    }

    /// `apply` on raw slices without allocation.
    #[inline]
    pub fn image_into(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let a = self.matrix.as_slice();
        for i in 0..n {
            let mut s = self.translation[i];
            for j in 0..n {
                s += a[i + j * n] * x[j];
            }
            out[i] = s;
        }
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Isometry) -> Result<Isometry> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let mut word = self.word.clone();
        word.extend_from_slice(&other.word);
        Ok(Isometry {
            matrix: &self.matrix * &other.matrix,
            translation: &self.matrix * &other.translation + &self.translation,
            word,
        })
    }

    pub fn inverse(&self) -> Isometry {
        let at = self.matrix.transpose();
        let b = -(&at * &self.translation);
        Isometry { matrix: at, translation: b, word: self.word.iter().rev().map(|g| -g).collect() }
    }

    pub fn approx_eq(&self, other: &Isometry, tol: f64) -> bool {
        self.dim() == other.dim()
            && (&self.matrix - &other.matrix).amax() <= tol
            && (&self.translation - &other.translation).amax() <= tol
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.approx_eq(&Isometry::identity(self.dim()), tol)
    }

    pub fn is_shift(&self, tol: f64) -> bool {
        (&self.matrix - DMatrix::identity(self.dim(), self.dim())).amax() <= tol
    }

    fn key(&self) -> Vec<i64> {
        self.matrix.iter().chain(self.translation.iter()).map(|v| (v * 1e7).round() as i64).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrystalGroup {
    pub name: String,
    pub dimension: usize,
    pub generators: Vec<Isometry>,
    pub lattice_basis: Vec<DVector<f64>>,
    pub polytope: ConvexPolytope,
    pub tolerance: f64,
}

impl CrystalGroup {
    pub fn new(
        name: impl Into<String>,
        generators: Vec<Isometry>,
        lattice_basis: Vec<DVector<f64>>,
        polytope: ConvexPolytope,
    ) -> Result<Self> {
        let name = name.into();
        let n = polytope.dim();
        if lattice_basis.len() != n {
            return Err(Error::InvalidGroup(format!(
                "{name}: expected {n} lattice basis vectors, got {}",
                lattice_basis.len()
            )));
        }
        for g in &generators {
            if g.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: g.dim() });
            }
        }
        for b in &lattice_basis {
            if b.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: b.len() });
            }
        }
        let basis = DMatrix::from_columns(&lattice_basis);
        if basis.determinant().abs() <= 1e-12 {
            return Err(Error::InvalidGroup(format!("{name}: lattice basis is linearly dependent")));
        }
        let mut generators = generators;
        for (k, g) in generators.iter_mut().enumerate() {
            g.word = vec![k as i32 + 1];
        }
        let group = CrystalGroup { name, dimension: n, generators, lattice_basis, polytope, tolerance: ISOMETRY_TOL };
        group.check_lattice_reachable()?;
        Ok(group)
    }

    fn check_lattice_reachable(&self) -> Result<()> {
        let longest = self.lattice_basis.iter().map(|b| b.norm()).fold(0.0, f64::max);
        let c = self.polytope.centroid();
        let radius = 2.0 * (longest + self.polytope.diameter());
        let elements = bfs(&self.generators, &c, radius, DEFAULT_MAX_WORD, self.tolerance)?;
        for b in &self.lattice_basis {
            let target = Isometry::shift(b.clone());
            if !elements.iter().any(|e| e.approx_eq(&target, 1e-7)) {
                return Err(Error::InvalidGroup(format!(
                    "{}: lattice vector {:?} is not a product of the generators",
                    self.name,
                    b.as_slice()
                )));
            }
        }
        Ok(())
    }

    /// Columns are the lattice basis vectors.
    pub fn basis_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.lattice_basis)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalGroup {
    pub elements: Vec<Isometry>,
    pub radius: f64,
}

impl LocalGroup {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn index_of(&self, phi: &Isometry, tol: f64) -> Option<usize> {
        self.elements.iter().position(|e| e.approx_eq(phi, tol))
    }
}

// Breadth-first search over generator words; elements whose image of `center` leaves the
// ball of the given radius are pruned.
fn bfs(generators: &[Isometry], center: &DVector<f64>, radius: f64, max_word: usize, tol: f64) -> Result<Vec<Isometry>> {
    let n = center.len();
    let mut steps: Vec<Isometry> = Vec::with_capacity(2 * generators.len());
    for g in generators {
        steps.push(g.clone());
        steps.push(g.inverse());
    }
    let mut seen: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mut elements = vec![Isometry::identity(n)];
    seen.insert(elements[0].key(), vec![0]);
    let mut frontier: VecDeque<usize> = VecDeque::from([0]);
    let mut depth = 0;
    while !frontier.is_empty() {
        if depth >= max_word {
            return Err(Error::WordLengthExceeded(max_word));
        }
        let mut next = VecDeque::new();
        for &idx in &frontier {
            for s in &steps {
                let cand = s.compose(&elements[idx])?;
                if (cand.image(center) - center).norm() > radius + 1e-9 {
                    continue;
                }
                let key = cand.key();
                let bucket = seen.entry(key).or_default();
                if bucket.iter().any(|&i| elements[i].approx_eq(&cand, tol)) {
                    continue;
                }
                bucket.push(elements.len());
                next.push_back(elements.len());
                elements.push(cand);
            }
        }
        frontier = next;
        depth += 1;
    }
    Ok(elements)
}

/// All group elements whose tile φΠ lies within diam(Π)·(1+margin) of Π (the identity first).
pub fn enumerate_local_group(group: &CrystalGroup, poly: &ConvexPolytope, margin: f64) -> Result<LocalGroup> {
    let radius = poly.diameter() * (1.0 + margin);
    enumerate_within(group, poly, radius, DEFAULT_MAX_WORD)
}

/// Like [`enumerate_local_group`] with an explicit tile-distance bound.
pub fn enumerate_within(group: &CrystalGroup, poly: &ConvexPolytope, radius: f64, max_word: usize) -> Result<LocalGroup> {
    let c = poly.centroid();
    let candidates = bfs(&group.generators, &c, 2.0 * radius, max_word, group.tolerance)?;
    let verts = poly.vertices();
    let mut elements: Vec<Isometry> = candidates
        .into_iter()
        .filter(|phi| {
            let img: Vec<DVector<f64>> = verts.iter().map(|v| phi.image(v)).collect();
            crate::geometry::hull_distance(verts, &img) <= radius + 1e-9
        })
        .collect();
    let missing: Vec<Isometry> = elements
        .iter()
        .map(|e| e.inverse())
        .filter(|inv| !elements.iter().any(|e| e.approx_eq(inv, group.tolerance)))
        .collect();
    elements.extend(missing);
    Ok(LocalGroup { elements, radius })
}

/// Elements of `local` fixing `x` within `tol`.
pub fn stabilizer(local: &LocalGroup, x: &DVector<f64>, tol: f64) -> Vec<Isometry> {
    let stab: Vec<Isometry> =
        local.elements.iter().filter(|phi| (phi.image(x) - x).norm() <= tol).cloned().collect();
    debug_assert!(stab.iter().all(|a| stab.iter().all(|b| {
        let ab = a.compose(b).unwrap();
        stab.iter().any(|c| c.approx_eq(&ab, 1e-7))
    })));
    stab
}
