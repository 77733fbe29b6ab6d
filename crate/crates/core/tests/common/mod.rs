#![allow(dead_code)]

use crystalfold::polytope::{dirichlet_domain, exactness_witnesses, ConvexPolytope};
use crystalfold::rng::stream_rng;
use crystalfold::{registry, QuotientContext};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

pub fn ctx(name: &str) -> QuotientContext {
    QuotientContext::new(registry::builtin(name).unwrap()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    stream_rng(seed, 99)
}

/// Uniform point in the polytope's bounding box grown by `pad` on every side.
pub fn random_near(poly: &ConvexPolytope, pad: f64, rng: &mut ChaCha20Rng) -> DVector<f64> {
    let (lo, hi) = poly.bounding_box();
    DVector::from_fn(lo.len(), |k, _| rng.gen_range(lo[k] - pad..hi[k] + pad))
}

pub fn random_inside(poly: &ConvexPolytope, rng: &mut ChaCha20Rng) -> DVector<f64> {
    loop {
        let x = random_near(poly, 0.0, rng);
        if poly.contains(x.as_slice(), 0.0) {
            return x;
        }
    }
}

/// Random point in the relative interior of a uniformly chosen face of any dimension.
pub fn random_on_face(poly: &ConvexPolytope, rng: &mut ChaCha20Rng) -> DVector<f64> {
    let face = &poly.faces()[rng.gen_range(0..poly.faces().len())];
    let w: Vec<f64> = face.vertices.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut x = DVector::zeros(poly.dim());
    for (&v, wi) in face.vertices.iter().zip(&w) {
        x.axpy(wi / total, &poly.vertices()[v], 1.0);
    }
    x
}

fn brute_distance(ctx: &QuotientContext, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    ctx.local_group.elements.iter().map(|phi| (phi.image(y) - x).norm()).fold(f64::INFINITY, f64::min)
}

/// Non-negativity, symmetry and the triangle inequality on projected random triples, plus
/// invariance under local-group elements and agreement with direct minimization.
pub fn check_metric_axioms(ctx: &QuotientContext, triples: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let pad = ctx.polytope.diameter();
    let elems = &ctx.local_group.elements;
    for t in 0..triples {
        let raw: Vec<DVector<f64>> = (0..3).map(|_| random_near(&ctx.polytope, pad, &mut r)).collect();
        let p: Vec<DVector<f64>> = raw.iter().map(|x| ctx.project(x)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let d = |a: usize, b: usize| ctx.quotient_distance(&p[a], &p[b]);
        let (xy, yz, xz) = (d(0, 1), d(1, 2), d(0, 2));
        if xy < 0.0 || d(0, 0) > 1e-9 {
            return Err(format!("triple {t}: non-metric value"));
        }
        if (xy - d(1, 0)).abs() > 1e-9 {
            return Err(format!("triple {t}: asymmetric {xy} vs {}", d(1, 0)));
        }
        if xz > xy + yz + 1e-9 {
            return Err(format!("triple {t}: triangle inequality fails, {xz} > {xy} + {yz}"));
        }
        if (xy - brute_distance(ctx, &p[0], &p[1])).abs() > 1e-9 {
            return Err(format!("triple {t}: distance differs from direct minimization"));
        }
        let phi = &elems[r.gen_range(0..elems.len())];
        let moved = ctx.project(&phi.image(&raw[0])).map_err(|e| e.to_string())?;
        if (ctx.quotient_distance(&moved, &p[1]) - xy).abs() > 1e-9 {
            return Err(format!("triple {t}: distance not invariant"));
        }
    }
    Ok(())
}

/// project(φx) = project(x) and project(project(x)) = project(x), bitwise.
pub fn check_projector(ctx: &QuotientContext, samples: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let pad = ctx.polytope.diameter();
    let elems = &ctx.local_group.elements;
    for s in 0..samples {
        let x = if s % 2 == 0 { random_near(&ctx.polytope, pad, &mut r) } else { random_on_face(&ctx.polytope, &mut r) };
        let p = ctx.project(&x).map_err(|e| e.to_string())?;
        if ctx.project(&p).map_err(|e| e.to_string())? != p {
            return Err(format!("not idempotent at {:?}", x.as_slice()));
        }
        let phi = &elems[r.gen_range(0..elems.len())];
        if ctx.project(&phi.image(&x)).map_err(|e| e.to_string())? != p {
            return Err(format!("not invariant at {:?}", x.as_slice()));
        }
    }
    Ok(())
}

/// Each sampled orbit has exactly one point of the polytope that the transversal accepts,
/// and it is the projection. Half the samples lie on lower-dimensional faces.
pub fn check_transversal(ctx: &QuotientContext, samples: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let poly = &ctx.polytope;
    for s in 0..samples {
        let x = if s % 2 == 0 { random_inside(poly, &mut r) } else { random_on_face(poly, &mut r) };
        let mut orbit: Vec<DVector<f64>> = Vec::new();
        for phi in &ctx.local_group.elements {
            let y = phi.image(&x);
            if poly.contains(y.as_slice(), 1e-9) && !orbit.iter().any(|o| (o - &y).amax() <= 1e-7) {
                orbit.push(y);
            }
        }
        let hits: Vec<&DVector<f64>> =
            orbit.iter().filter(|y| ctx.in_transversal(y)).collect();
        if hits.len() != 1 {
            return Err(format!("{} transversal points in the orbit of {:?}", hits.len(), x.as_slice()));
        }
        let p = ctx.project(&x).map_err(|e| e.to_string())?;
        if (&p - hits[0]).amax() > 1e-7 {
            return Err(format!("projection of {:?} is not the transversal point", x.as_slice()));
        }
    }
    Ok(())
}

/// The Dirichlet domain of a generic point is exact, and its facet witnesses are closed
/// under inversion.
pub fn check_dirichlet(name: &str, seed: u64) -> Result<ConvexPolytope, String> {
    let c = ctx(name);
    let mut r = rng(seed);
    let wide = crystalfold::group::enumerate_local_group(&c.group, &c.polytope, 1.0).map_err(|e| e.to_string())?;
    let x = random_inside(&c.polytope, &mut r);
    let domain = dirichlet_domain(&wide, &x).map_err(|e| e.to_string())?;
    let dctx = QuotientContext::with_polytope(c.group.clone(), domain.clone(), 0.0).map_err(|e| e.to_string())?;
    let witnesses = exactness_witnesses(&dctx.polytope, &dctx.local_group);
    if witnesses.iter().any(Option::is_none) {
        return Err(format!("{name}: Dirichlet domain is not exact"));
    }
    let elems = &dctx.local_group.elements;
    for w in witnesses.iter().flatten() {
        let inv = elems[*w].inverse();
        if !witnesses.iter().flatten().any(|&v| elems[v].approx_eq(&inv, 1e-7)) {
            return Err(format!("{name}: witness without inverse partner"));
        }
    }
    Ok(domain)
}

/// A smooth invariant function: a compactly supported bump summed over the local group.
/// Exact where no group element outside the local group can reach the support.
pub struct SymmetrizedBump<'a> {
    pub ctx: &'a QuotientContext,
    pub centre: DVector<f64>,
    pub radius: f64,
}

impl SymmetrizedBump<'_> {
    // ψ(s) = exp(−1/(1−s)) for s = |y|²/R² < 1.
    fn bump(&self, y: &DVector<f64>) -> (f64, DVector<f64>) {
        let s = y.norm_squared() / (self.radius * self.radius);
        if s >= 1.0 {
            return (0.0, DVector::zeros(y.len()));
        }
        let v = (-1.0 / (1.0 - s)).exp();
        let ds = -v / ((1.0 - s) * (1.0 - s));
        (v, y * (2.0 * ds / (self.radius * self.radius)))
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.ctx.local_group.elements.iter().map(|phi| self.bump(&(phi.image(x) - &self.centre)).0).sum()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for phi in &self.ctx.local_group.elements {
            let (_, d) = self.bump(&(phi.image(x) - &self.centre));
            g += phi.matrix.transpose() * d;
        }
        g
    }
}

// Accelerated projected gradient ascent on the SVM dual; the projection onto
// {0 ≤ α ≤ C, yᵀα = 0} solves for the multiplier by bisection.
pub fn qp_oracle(q: &DMatrix<f64>, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let project = |v: &DVector<f64>| {
        let at = |mu: f64| DVector::from_fn(n, |i, _| (v[i] - mu * y[i]).clamp(0.0, c));
        let balance = |mu: f64| at(mu).iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>();
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if balance(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi))
    };
    let step = 1.0 / q.symmetric_eigenvalues().max();
    let objective = |a: &DVector<f64>| a.sum() - 0.5 * a.dot(&(q * a));
    let mut a = DVector::zeros(n);
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..50_000 {
        let grad = DVector::from_element(n, 1.0) - q * &z;
        let next = project(&(&z + grad * step));
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + (&next - &a) * ((t - 1.0) / tn);
        a = next;
        t = tn;
    }
    objective(&a)
}

