mod common;

use common::*;
use crystalfold::embed::{build_embedding, EmbedConfig, Embedding};
use crystalfold::ml::*;
use crystalfold::registry;
use nalgebra::{DMatrix, DVector};


fn embedding(name: &str, eps_fraction: f64) -> Embedding {
    let c = ctx(name);
    let eps = eps_fraction * c.polytope.diameter();
    build_embedding(&c, &EmbedConfig::new(eps)).unwrap().0
}

#[test]
fn gram_is_psd_for_every_builtin_group() {
    for (i, name) in registry::builtin_names().iter().enumerate() {
        let emb = embedding(name, 0.2);
        let mut r = rng(800 + i as u64);
        let pts: Vec<DVector<f64>> = (0..50).map(|_| random_near(&emb.context.polytope, 1.0, &mut r)).collect();
        let k = InvariantKernel::rbf(&emb, 0.5).unwrap();
        let g = gram(&k, &pts).unwrap();
        assert_eq!(g, g.transpose(), "{name}");
        assert!(g.symmetric_eigenvalues().min() >= -1e-8, "{name}");
    }
}

#[test]
fn gp_covariance_matches_kernel() {
    let emb = embedding("p4", 0.06);
    let k = InvariantKernel::rbf(&emb, 0.4).unwrap();
    let (x, y) = (DVector::from_column_slice(&[0.2, 0.1]), DVector::from_column_slice(&[0.35, 0.3]));
    let target = kernel_eval(&k, &x, &y).unwrap();
    let products: Vec<f64> = (0..200u64)
        .map(|seed| {
            let s = GPSampler::new(emb.dim(), 0.4, 256, seed).unwrap();
            gp_sample(&s, &emb, &x).unwrap() * gp_sample(&s, &emb, &y).unwrap()
        })
        .collect();
    let n = products.len() as f64;
    let mean = products.iter().sum::<f64>() / n;
    let sd = (products.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - target).abs() <= 3.0 * sd / n.sqrt(), "{mean} vs {target} (se {})", sd / n.sqrt());
}

#[test]
fn svm_matches_qp_oracle_and_is_invariant() {
    let emb = embedding("p3", 0.06);
    let (x, y) = gp_labelled_points(&emb, 0.3, 40, 17).unwrap();
    assert!(y.contains(&1.0) && y.contains(&-1.0));
    let k = InvariantKernel::rbf(&emb, 0.25).unwrap();
    let c = 10.0;
    let model = svm_train(&k, &x, &y, c).unwrap();
    assert!(model.converged);
    for (xi, yi) in x.iter().zip(&y) {
        assert!(svm_predict(&model, &emb, xi).unwrap() * yi > 0.0, "training point misclassified");
    }
    assert!(model.coefficients.iter().all(|a| a.abs() <= c + 1e-12));
    assert!(model.coefficients.iter().sum::<f64>().abs() <= 1e-6);

    let g = gram(&k, &x).unwrap();
    let q = DMatrix::from_fn(x.len(), x.len(), |i, j| y[i] * y[j] * g[(i, j)]);
    let oracle = qp_oracle(&q, &y, c);
    assert!((model.dual_objective() - oracle).abs() <= 1e-3, "{} vs {oracle}", model.dual_objective());

    let mut r = rng(3);
    for _ in 0..10 {
        let p = random_near(&emb.context.polytope, 1.0, &mut r);
        let f = svm_predict(&model, &emb, &p).unwrap();
        for phi in &emb.context.local_group.elements {
            assert_eq!(svm_predict(&model, &emb, &phi.image(&p)).unwrap().to_bits(), f.to_bits());
        }
    }
}

#[test]
fn serialized_models_round_trip() {
    let emb = embedding("p2", 0.1);
    let s = GPSampler::new(emb.dim(), 0.3, 64, 5).unwrap();
    let back: GPSampler = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(back, s);
    let w = MlpWeights::random(emb.dim(), 1);
    let back: MlpWeights = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
    assert_eq!(back, w);
    let (x, y) = gp_labelled_points(&emb, 0.3, 12, 2).unwrap();
    let m = svm_train(&InvariantKernel::rbf(&emb, 0.3).unwrap(), &x, &y, 1.0).unwrap();
    let back: SVMModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(back, m);
}
