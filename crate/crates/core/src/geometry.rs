//! Small dense-geometry helpers shared by the polytope and group code.

use nalgebra::{DMatrix, DVector};

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lexicographic comparison that treats coordinates within `tol` as equal.
pub fn lex_cmp(a: &[f64], b: &[f64], tol: f64) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > tol {
            return x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal);
        }
    }
    std::cmp::Ordering::Equal
}

/// Dimension of the affine hull of a point set.
pub fn affine_rank(points: &[&DVector<f64>], tol: f64) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let n = points[0].len();
    let m = points.len() - 1;
    let mut d = DMatrix::zeros(n, m);
    for (j, p) in points[1..].iter().enumerate() {
        d.set_column(j, &(*p - points[0]));
    }
    let sv = d.singular_values();
    let scale = sv.max().max(1.0);
    sv.iter().filter(|s| **s > tol * scale).count()
}

/// Minimum-norm point of the convex hull of `points` (Wolfe's algorithm).
pub fn min_norm_point(points: &[DVector<f64>]) -> DVector<f64> {
    assert!(!points.is_empty());
    let scale = points.iter().map(|p| p.norm_squared()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-12 * scale;

    let start = (0..points.len())
        .min_by(|&a, &b| points[a].norm_squared().total_cmp(&points[b].norm_squared()))
        .unwrap();
    let mut set = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points[start].clone();

    for _ in 0..1000 {
        let (j, best) = (0..points.len())
            .map(|j| (j, x.dot(&points[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if x.norm_squared() - best <= tol || set.contains(&j) {
            return x;
        }
        set.push(j);
        lambda.push(0.0);

        loop {
            let alpha = affine_minimizer(points, &set);
            if alpha.iter().all(|&a| a > 1e-14) {
                lambda = alpha;
                x = combine(points, &set, &lambda);
                break;
            }
            let mut theta = 1.0f64;
            for (l, a) in lambda.iter().zip(&alpha) {
                if *a <= 1e-14 {
                    let t = l / (l - a);
                    if t < theta {
                        theta = t;
                    }
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * a;
            }
            let mut k = 0;
            while k < set.len() {
                if lambda[k] <= 1e-14 {
                    set.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
            x = combine(points, &set, &lambda);
            if set.len() <= 1 {
                break;
            }
        }
    }
    x
}

fn combine(points: &[DVector<f64>], set: &[usize], w: &[f64]) -> DVector<f64> {
    let mut x = DVector::zeros(points[0].len());
    for (i, wi) in set.iter().zip(w) {
        x.axpy(*wi, &points[*i], 1.0);
    }
    x
}

// Minimiser of |x| over the affine hull of the selected points.
fn affine_minimizer(points: &[DVector<f64>], set: &[usize]) -> Vec<f64> {
    let k = set.len();
    let mut m = DMatrix::zeros(k + 1, k + 1);
    for a in 0..k {
        for b in 0..k {
            m[(a, b)] = points[set[a]].dot(&points[set[b]]);
        }
        m[(a, k)] = 1.0;
        m[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    match m.clone().lu().solve(&rhs) {
        Some(sol) => sol.rows(0, k).iter().copied().collect(),
        None => {
            let pinv = m.pseudo_inverse(1e-12).expect("pseudo-inverse");
            let sol = pinv * rhs;
            sol.rows(0, k).iter().copied().collect()
        }
    }
}

/// Euclidean distance between the convex hulls of two point sets.
pub fn hull_distance(p: &[DVector<f64>], q: &[DVector<f64>]) -> f64 {
    let mut diff = Vec::with_capacity(p.len() * q.len());
    for a in p {
        for b in q {
            diff.push(a - b);
        }
    }
    min_norm_point(&diff).norm()
}

/// Nearest point of conv(points) to `x`.
pub fn nearest_in_hull(points: &[DVector<f64>], x: &DVector<f64>) -> DVector<f64> {
    let shifted: Vec<_> = points.iter().map(|p| p - x).collect();
    min_norm_point(&shifted) + x
}

/// Serde adapter storing `Vec<DVector<f64>>` as plain nested arrays.
pub mod serde_points {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(points: &[DVector<f64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DVector<f64>>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        Ok(rows.into_iter().map(DVector::from_vec).collect())
    }
}
