//! Kernel machines, Gaussian-process samples and networks that see a point only through
//! the embedding ρ, and are therefore invariant under the group.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::embed::Embedding;
use crate::error::{Error, Result};
use crate::geometry::serde_points;
use crate::rng::stream_rng;

const SMO_TOL: f64 = 1e-3;
const SMO_MAX_PASSES: usize = 10_000;
const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaseKernel {
    Rbf { lengthscale: f64 },
}

impl BaseKernel {
    pub fn rbf(lengthscale: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::InvalidArgument(format!("length-scale must be positive, got {lengthscale}")));
        }
        Ok(BaseKernel::Rbf { lengthscale })
    }

    pub fn eval(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match *self {
            BaseKernel::Rbf { lengthscale } => (-(a - b).norm_squared() / (2.0 * lengthscale * lengthscale)).exp(),
        }
    }
}

/// κ(x, y) = κ̂(ρ(x), ρ(y)).
#[derive(Clone, Copy)]
pub struct InvariantKernel<'a> {
    pub embedding: &'a Embedding,
    pub base: BaseKernel,
}

impl<'a> InvariantKernel<'a> {
    pub fn rbf(embedding: &'a Embedding, lengthscale: f64) -> Result<Self> {
        Ok(InvariantKernel { embedding, base: BaseKernel::rbf(lengthscale)? })
    }

    pub fn embed_all(&self, points: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        points.par_iter().map(|x| self.embedding.rho(x)).collect()
    }
}

pub fn kernel_eval(k: &InvariantKernel, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    Ok(k.base.eval(&k.embedding.rho(x)?, &k.embedding.rho(y)?))
}

fn gram_embedded(base: &BaseKernel, r: &[DVector<f64>]) -> DMatrix<f64> {
    let n = r.len();
    let entries: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|t| {
            let (i, j) = (t / n, t % n);
            if i <= j {
                base.eval(&r[i], &r[j])
            } else {
                base.eval(&r[j], &r[i])
            }
        })
        .collect();
    DMatrix::from_row_slice(n, n, &entries)
}

pub fn gram(k: &InvariantKernel, points: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    Ok(gram_embedded(&k.base, &k.embed_all(points)?))
}

/// Random-feature Gaussian-process sampler, F(x) = √(2/m) Σ w_j cos(ω_jᵀρ(x) + b_j), with
/// ω_j ~ N(0, I/ℓ²), b_j ~ U[0, 2π) and w_j ~ N(0, 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GPSampler {
    pub lengthscale: f64,
    pub frequencies: DMatrix<f64>,
    pub phases: DVector<f64>,
    pub weights: DVector<f64>,
    pub seed: u64,
}

impl GPSampler {
    pub fn new(embedding_dim: usize, lengthscale: f64, features: usize, seed: u64) -> Result<Self> {
        BaseKernel::rbf(lengthscale)?;
        if features == 0 || embedding_dim == 0 {
            return Err(Error::InvalidArgument("random features need m > 0 and a non-empty embedding".into()));
        }
        let normal = Normal::new(0.0, 1.0 / lengthscale).expect("positive scale");
        let mut rng = stream_rng(seed, 0);
        let frequencies = DMatrix::from_fn(features, embedding_dim, |_, _| normal.sample(&mut rng));
        let mut rng = stream_rng(seed, 1);
        let phase = Uniform::new(0.0, 2.0 * PI);
        let phases = DVector::from_fn(features, |_, _| phase.sample(&mut rng));
        let mut rng = stream_rng(seed, 2);
        let weights = DVector::from_fn(features, |_, _| StandardNormal.sample(&mut rng));
        Ok(GPSampler { lengthscale, frequencies, phases, weights, seed })
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// √(2/m) cos(Ωr + b); inner products of feature vectors approximate the RBF kernel.
    pub fn feature_map(&self, r: &DVector<f64>) -> Result<DVector<f64>> {
        if r.len() != self.frequencies.ncols() {
            return Err(Error::DimensionMismatch { expected: self.frequencies.ncols(), got: r.len() });
        }
        let scale = (2.0 / self.len() as f64).sqrt();
        Ok((&self.frequencies * r + &self.phases).map(|t| scale * t.cos()))
    }

    pub fn sample_embedded(&self, r: &DVector<f64>) -> Result<f64> {
        Ok(self.feature_map(r)?.dot(&self.weights))
    }
}

pub fn gp_sample(sampler: &GPSampler, emb: &Embedding, x: &DVector<f64>) -> Result<f64> {
    sampler.sample_embedded(&emb.rho(x)?)
}

pub fn gp_sample_grid(sampler: &GPSampler, emb: &Embedding, raster: &[DVector<f64>]) -> Result<Vec<f64>> {
    raster.par_iter().map(|x| gp_sample(sampler, emb, x)).collect()
}

/// Soft-margin kernel SVM. Only support vectors (α > 0) are kept; `coefficients` holds α_i·y_i.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SVMModel {
    #[serde(with = "serde_points")]
    pub support: Vec<DVector<f64>>,
    #[serde(with = "serde_points")]
    pub support_embedded: Vec<DVector<f64>>,
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub kernel: BaseKernel,
    pub converged: bool,
    pub iterations: usize,
}

impl SVMModel {
    pub fn decision_embedded(&self, r: &DVector<f64>) -> f64 {
        self.support_embedded.iter().zip(&self.coefficients).map(|(s, a)| a * self.kernel.eval(s, r)).sum::<f64>() + self.bias
    }

    /// Σα − ½ Σ α_i α_j y_i y_j κ(x_i, x_j).
    pub fn dual_objective(&self) -> f64 {
        let k = gram_embedded(&self.kernel, &self.support_embedded);
        let a = DVector::from_column_slice(&self.coefficients);
        a.iter().map(|v| v.abs()).sum::<f64>() - 0.5 * a.dot(&(&k * &a))
    }
}

/// SMO with maximal-violating-pair selection on
/// min ½αᵀQα − Σα, Q_ij = y_i y_j κ(x_i, x_j), 0 ≤ α ≤ C, yᵀα = 0.
pub fn svm_train(k: &InvariantKernel, x: &[DVector<f64>], y: &[f64], c: f64) -> Result<SVMModel> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidArgument("labels must be +1 or -1".into()));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::InvalidArgument("both classes must be present".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {c}")));
    }
    let r = k.embed_all(x)?;
    let kmat = gram_embedded(&k.base, &r);
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * kmat[(i, j)]);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let max_iter = SMO_MAX_PASSES * n.max(1);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut gmin) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if up(alpha[t], y[t]) && v > gmax {
                (i, gmax) = (t, v);
            }
            if low(alpha[t], y[t]) && v < gmin {
                (j, gmin) = (t, v);
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin <= SMO_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let (ai, aj) = (alpha[i], alpha[j]);
        let quad = (q[(i, i)] + q[(j, j)] - 2.0 * y[i] * y[j] * q[(i, j)]).max(TAU);
        // Move along y_i Δα_i = −y_j Δα_j by the unconstrained optimum, then clip to the box.
        let step = (gmax - gmin) / quad;
        let sum = y[i] * ai + y[j] * aj;
        let mut ni = (ai + y[i] * step).clamp(0.0, c);
        let mut nj = y[j] * (sum - y[i] * ni);
        if !(0.0..=c).contains(&nj) {
            nj = nj.clamp(0.0, c);
            ni = y[i] * (sum - y[j] * nj);
        }
        let (di, dj) = (ni - ai, nj - aj);
        alpha[i] = ni;
        alpha[j] = nj;
        for t in 0..n {
            grad[t] += q[(t, i)] * di + q[(t, j)] * dj;
        }
    }
    if !converged {
        log::warn!("SMO stopped after {iterations} iterations without meeting the KKT tolerance");
    }

    // Bias from free vectors, or the midpoint of the feasible interval.
    let free: Vec<usize> = (0..n).filter(|&t| alpha[t] > 1e-12 && alpha[t] < c - 1e-12).collect();
    let rho = if free.is_empty() {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        for t in 0..n {
            let v = y[t] * grad[t];
            let at_upper = alpha[t] >= c - 1e-12;
            let at_lower = alpha[t] <= 1e-12;
            if (at_upper && y[t] < 0.0) || (at_lower && y[t] > 0.0) {
                ub = ub.min(v);
            } else {
                lb = lb.max(v);
            }
        }
        0.5 * (ub + lb)
    } else {
        free.iter().map(|&t| y[t] * grad[t]).sum::<f64>() / free.len() as f64
    };

    let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(SVMModel {
        support: sv.iter().map(|&t| x[t].clone()).collect(),
        support_embedded: sv.iter().map(|&t| r[t].clone()).collect(),
        coefficients: sv.iter().map(|&t| alpha[t] * y[t]).collect(),
        bias: -rho,
        c,
        kernel: k.base,
        converged,
        iterations,
    })
}

pub fn svm_predict(model: &SVMModel, emb: &Embedding, x: &DVector<f64>) -> Result<f64> {
    Ok(model.decision_embedded(&emb.rho(x)?))
}

/// Labelled points for the SVM demo. Candidates are drawn uniformly over the polytope's
/// bounding box grown by one diameter on every side and labelled by the sign of a seeded GP
/// sample minus its median; candidates within a quarter standard deviation of the median
/// are rejected so the classes are separated by a margin.
pub fn gp_labelled_points(emb: &Embedding, lengthscale: f64, count: usize, seed: u64) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    let poly = &emb.context.polytope;
    let (lo, hi) = poly.bounding_box();
    let pad = poly.diameter();
    let mut rng = stream_rng(seed, 3);
    let candidates: Vec<DVector<f64>> = (0..4 * count)
        .map(|_| DVector::from_fn(lo.len(), |k, _| rng.gen_range(lo[k] - pad..hi[k] + pad)))
        .collect();
    let sampler = GPSampler::new(emb.dim(), lengthscale, 512, seed)?;
    let values = gp_sample_grid(&sampler, emb, &candidates)?;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
    let (points, labels): (Vec<_>, Vec<_>) = candidates
        .into_iter()
        .zip(values)
        .filter(|(_, v)| (v - median).abs() >= 0.25 * sd)
        .take(count)
        .map(|(x, v)| (x, if v > median { 1.0 } else { -1.0 }))
        .unzip();
    if points.len() < count {
        return Err(Error::InvalidArgument("GP sample too flat to label the requested number of points".into()));
    }
    Ok((points, labels))
}

pub const MLP_HIDDEN: [usize; 3] = [10, 10, 10];

/// Dense layers N̂→10→10→10→1; ReLU on hidden layers, linear output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub layers: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl MlpWeights {
    fn shapes(input: usize) -> Vec<(usize, usize)> {
        let mut dims = vec![input];
        dims.extend(MLP_HIDDEN);
        dims.push(1);
        dims.windows(2).map(|w| (w[1], w[0])).collect()
    }

    pub fn zeros(input: usize) -> Self {
        MlpWeights { layers: Self::shapes(input).into_iter().map(|(r, c)| (DMatrix::zeros(r, c), DVector::zeros(r))).collect() }
    }

    /// He-initialized weights, zero biases.
    pub fn random(input: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 4);
        let layers = Self::shapes(input)
            .into_iter()
            .map(|(r, c)| {
                let normal = Normal::new(0.0, (2.0 / c as f64).sqrt()).expect("positive scale");
                (DMatrix::from_fn(r, c, |_, _| normal.sample(&mut rng)), DVector::zeros(r))
            })
            .collect();
        MlpWeights { layers }
    }

    fn check(&self, input: usize) -> Result<()> {
        let want = Self::shapes(input);
        if self.layers.len() != want.len() {
            return Err(Error::Shape(format!("expected {} layers, got {}", want.len(), self.layers.len())));
        }
        for (l, ((w, b), (r, c))) in self.layers.iter().zip(want).enumerate() {
            if w.shape() != (r, c) || b.len() != r {
                return Err(Error::Shape(format!("layer {l}: expected {r}x{c} weights and {r} biases, got {}x{} and {}", w.nrows(), w.ncols(), b.len())));
            }
        }
        Ok(())
    }

    pub fn forward_embedded(&self, r: &DVector<f64>) -> Result<f64> {
        self.check(r.len())?;
        let last = self.layers.len() - 1;
        let mut h = r.clone();
        for (l, (w, b)) in self.layers.iter().enumerate() {
            h = w * h + b;
            if l < last {
                h.apply(|v| *v = v.max(0.0));
            }
        }
        Ok(h[0])
    }
}

pub fn mlp_forward(emb: &Embedding, weights: &MlpWeights, x: &DVector<f64>) -> Result<f64> {
    weights.forward_embedded(&emb.rho(x)?)
}

/// μ∘ρ and κ̂∘(ρ⊗ρ): the mean and covariance of a distributionally invariant GP on Rⁿ.
#[allow(clippy::type_complexity)]
pub fn gp_distributional_params<'a, M>(
    emb: &'a Embedding,
    mean: M,
    base: BaseKernel,
) -> (impl Fn(&DVector<f64>) -> Result<f64> + 'a, impl Fn(&DVector<f64>, &DVector<f64>) -> Result<f64> + 'a)
where
    M: Fn(&DVector<f64>) -> f64 + 'a,
{
    let m = move |x: &DVector<f64>| Ok(mean(&emb.rho(x)?));
    let k = move |x: &DVector<f64>, y: &DVector<f64>| Ok(base.eval(&emb.rho(x)?, &emb.rho(y)?));
    (m, k)
}
