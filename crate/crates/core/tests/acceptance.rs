//! Acceptance run: one PASS/FAIL line per criterion. Set CRYSTALFOLD_STRICT_ACCEPTANCE=1 to
//! turn any failure into a non-zero exit status.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use common::*;
use crystalfold::embed::{build_embedding, EmbedConfig, Embedding};
use crystalfold::ml::*;
use crystalfold::orbitgraph::build_orbit_graph;
use crystalfold::registry::{self, WALLPAPER};
use crystalfold::spectral::*;
use nalgebra::{DMatrix, DVector};

type Outcome = Result<String, String>;

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value / target - 1.0).abs() <= rel
}

fn fmt(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", ")
}

fn embed(name: &str, eps: f64) -> Result<Embedding, String> {
    let c = ctx(name);
    build_embedding(&c, &EmbedConfig::new(eps)).map(|(e, _)| e).map_err(|e| e.to_string())
}

fn galerkin(emb: &Embedding, centres: usize, density: usize, k: usize) -> Result<(EigenBasis, GalerkinConfig), String> {
    let ctx = &emb.context;
    let cfg = GalerkinConfig::with_resolution(ctx, emb, centres, density, DEFAULT_WIDTH_FACTOR).map_err(|e| e.to_string())?;
    let basis = eigenbasis_galerkin(ctx, emb, &cfg, k).map_err(|e| e.to_string())?;
    Ok((basis, cfg))
}

fn fourier_p1() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    pool.install(|| {
        let start = Instant::now();
        let emb = embed("p1", 0.05)?;
        let (basis, cfg) = galerkin(&emb, 200, DEFAULT_QUADRATURE_DENSITY, 6)?;
        let secs = start.elapsed().as_secs_f64();
        let l = &basis.eigenvalues;
        let ok = l[1..5].iter().all(|&v| within(v, 4.0 * PI * PI, 0.05)) && within(l[5], 8.0 * PI * PI, 0.05) && secs < 60.0;
        let msg = format!("{} centres, λ2..λ6 = [{}], {secs:.1} s on one thread", cfg.centers.len(), fmt(&l[1..6]));
        if ok { Ok(msg) } else { Err(msg) }
    })
}

fn interval() -> Outcome {
    let c = ctx("line-p1");
    let g = build_orbit_graph(&c, 0.01, None).map_err(|e| e.to_string())?;
    let basis = eigenbasis_spectral(&c, &g, 5).map_err(|e| e.to_string())?;
    let l = &basis.eigenvalues;
    let sizes = basis.cluster_sizes();
    let ok = within(l[1], 4.0 * PI * PI, 0.1) && within(l[2], 4.0 * PI * PI, 0.1) && sizes.get(1) == Some(&2);
    let msg = format!("λ2, λ3 = {:.2}, {:.2} (target {:.2}), cluster sizes {sizes:?}", l[1], l[2], 4.0 * PI * PI);
    if ok { Ok(msg) } else { Err(msg) }
}

fn p6_values() -> Outcome {
    let emb = embed("p6", 0.03)?;
    let (basis, _) = galerkin(&emb, 200, DEFAULT_QUADRATURE_DENSITY, 3)?;
    let l = &basis.eigenvalues;
    let ok = within(l[1], 52.62, 0.1) && within(l[2], 157.87, 0.1);
    let msg = format!("λ2, λ3 = {:.2}, {:.2} (targets 52.62, 157.87)", l[1], l[2]);
    if ok { Ok(msg) } else { Err(msg) }
}

fn property_suite() -> Outcome {
    let mut failures = Vec::new();
    for (i, name) in WALLPAPER.iter().enumerate() {
        let c = ctx(name);
        let seed = 1000 + i as u64;
        for result in [check_metric_axioms(&c, 200, seed), check_projector(&c, 1000, seed), check_transversal(&c, 1000, seed)] {
            if let Err(e) = result {
                failures.push(format!("{name}: {e}"));
            }
        }
    }
    if failures.is_empty() {
        Ok("metric axioms, projector invariance/idempotence and transversal uniqueness hold for all 17 groups".into())
    } else {
        Err(failures.join("; "))
    }
}

fn flux() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut control = Vec::new();
    for name in ["p1", "p2"] {
        let c = ctx(name);
        let mut r = rng(77);
        for _ in 0..4 {
            let diam = c.polytope.diameter();
            let f = SymmetrizedBump { ctx: &c, centre: random_on_face(&c.polytope, &mut r), radius: 0.35 * diam };
            let h = SymmetrizedBump { ctx: &c, centre: random_on_face(&c.polytope, &mut r), radius: 0.45 * diam };
            let rep = boundary_flux(&c, |x| f.gradient(x) * h.value(x), 24);
            if rep.abs_integral <= 0.0 {
                return Err(format!("{name}: field vanishes on the boundary"));
            }
            worst = worst.max(rep.flux.abs() / rep.abs_integral);
        }
        let expected = c.dim() as f64 * c.polytope.volume();
        let rep = boundary_flux(&c, |x| x.clone(), 8);
        control.push((rep.flux / expected - 1.0).abs());
    }
    let ctrl = control.iter().cloned().fold(0.0, f64::max);
    let msg = format!("max |flux|/∮|F| = {worst:.2e}, control F(x)=x off by {:.2e}", ctrl);
    if worst <= 1e-3 && ctrl <= 0.01 { Ok(msg) } else { Err(msg) }
}

fn orthonormality() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, eps, centres) in [("p1", 0.05, 200), ("p6", 0.03, 200)] {
        let emb = embed(name, eps)?;
        let ctx = &emb.context;
        let reference = Quadrature::tensor(&ctx.polytope, 200).map_err(|e| e.to_string())?;
        let (coarse, _) = galerkin(&emb, centres, DEFAULT_QUADRATURE_DENSITY, 8)?;
        let (fine, _) = galerkin(&emb, centres, 2 * DEFAULT_QUADRATURE_DENSITY, 8)?;
        let d1 = orthonormality_check(ctx, &coarse, Some(&emb), &reference).map_err(|e| e.to_string())?;
        let d2 = orthonormality_check(ctx, &fine, Some(&emb), &reference).map_err(|e| e.to_string())?;
        ok &= d1 <= 0.05 && d2 < d1;
        lines.push(format!("{name} Galerkin {d1:.2e} -> {d2:.2e}"));
    }
    let c = ctx("p1");
    let (emb, graph) = build_embedding(&c, &EmbedConfig::new(0.05)).map_err(|e| e.to_string())?;
    let spectral = eigenbasis_spectral(&emb.context, &graph, 8).map_err(|e| e.to_string())?;
    let quad = Quadrature::tensor(&emb.context.polytope, 120).map_err(|e| e.to_string())?;
    let ds = orthonormality_check(&emb.context, &spectral, None, &quad).map_err(|e| e.to_string())?;
    ok &= ds <= 0.05;
    lines.push(format!("p1 spectral {ds:.2e}"));
    let msg = format!("Gram deviation, default -> 2x quadrature: {}", lines.join(", "));
    if ok { Ok(msg) } else { Err(msg) }
}

fn embedding() -> Outcome {
    let mut ok = true;
    let eps = 0.05;
    let p1 = ctx("p1");
    let (emb, _) = build_embedding(&p1, &EmbedConfig::new(eps)).map_err(|e| e.to_string())?;
    let residual = emb.data.gluing_residual;
    ok &= residual <= 0.1 * eps && emb.dim() == 4;
    let line = ctx("line-p1");
    let (circle, _) = build_embedding(&line, &EmbedConfig::new(0.01)).map_err(|e| e.to_string())?;
    ok &= circle.data.stress <= 0.05;
    let pg = ctx("pg");
    let (rebased, _) = build_embedding(&pg, &EmbedConfig::new(0.05)).map_err(|e| e.to_string())?;
    let pg_ok = rebased.context.is_rebased() && rebased.context.is_exact();
    ok &= pg_ok;
    let msg = format!(
        "p1 residual {residual:.1e} (bound {:.1e}), N̂ = {}; interval N̂ = {}, stress {:.3} (bound 0.05); pg rebased and exact: {pg_ok}",
        0.1 * eps,
        emb.dim(),
        circle.dim(),
        circle.data.stress
    );
    if ok { Ok(msg) } else { Err(msg) }
}

fn exactness() -> Outcome {
    let mut mismatches = Vec::new();
    for name in WALLPAPER {
        let expected = !matches!(name, "pg" | "p3");
        if ctx(name).is_exact() != expected {
            mismatches.push(format!("{name} is_exact = {}", !expected));
        }
    }
    if mismatches.is_empty() {
        Ok("pg and p3 non-exact, all other shipped polytopes exact".into())
    } else {
        Err(mismatches.join(", "))
    }
}

fn machine_learning() -> Outcome {
    let mut min_eig = f64::INFINITY;
    for (i, name) in registry::builtin_names().iter().enumerate() {
        let c = ctx(name);
        let emb = build_embedding(&c, &EmbedConfig::new(0.2 * c.polytope.diameter())).map_err(|e| e.to_string())?.0;
        let mut r = rng(2000 + i as u64);
        let pts: Vec<DVector<f64>> = (0..50).map(|_| random_near(&emb.context.polytope, 1.0, &mut r)).collect();
        let g = gram(&InvariantKernel::rbf(&emb, 0.5).map_err(|e| e.to_string())?, &pts).map_err(|e| e.to_string())?;
        min_eig = min_eig.min(g.symmetric_eigenvalues().min());
    }

    let emb = embed("p3", 0.06)?;
    let ctx = &emb.context;
    let mut r = rng(5);
    let pts: Vec<DVector<f64>> = (0..12).map(|_| random_near(&ctx.polytope, 1.0, &mut r)).collect();
    let sampler = GPSampler::new(emb.dim(), 0.5, 4096, 9).map_err(|e| e.to_string())?;
    let again = GPSampler::new(emb.dim(), 0.5, 4096, 9).map_err(|e| e.to_string())?;
    let mut gp_ok = sampler == again;
    for p in &pts {
        let f = gp_sample(&sampler, &emb, p).map_err(|e| e.to_string())?;
        gp_ok &= gp_sample(&again, &emb, p).map_err(|e| e.to_string())?.to_bits() == f.to_bits();
        for phi in &ctx.local_group.elements {
            gp_ok &= gp_sample(&sampler, &emb, &phi.image(p)).map_err(|e| e.to_string())?.to_bits() == f.to_bits();
        }
    }
    let k = InvariantKernel::rbf(&emb, 0.5).map_err(|e| e.to_string())?;
    let feats: Vec<DVector<f64>> =
        pts.iter().map(|p| sampler.feature_map(&emb.rho(p).unwrap()).unwrap()).collect();
    let exact = gram(&k, &pts).map_err(|e| e.to_string())?;
    let approx = DMatrix::from_fn(pts.len(), pts.len(), |i, j| feats[i].dot(&feats[j]));
    let rff_err = (approx - exact).amax();

    let (x, y) = gp_labelled_points(&emb, 0.3, 40, 17).map_err(|e| e.to_string())?;
    let ks = InvariantKernel::rbf(&emb, 0.25).map_err(|e| e.to_string())?;
    let c = 10.0;
    let model = svm_train(&ks, &x, &y, c).map_err(|e| e.to_string())?;
    let g = gram(&ks, &x).map_err(|e| e.to_string())?;
    let q = DMatrix::from_fn(x.len(), x.len(), |i, j| y[i] * y[j] * g[(i, j)]);
    let gap = (model.dual_objective() - qp_oracle(&q, &y, c)).abs();
    let mut svm_inv = true;
    for p in &pts {
        let f = svm_predict(&model, &emb, p).map_err(|e| e.to_string())?;
        for phi in &ctx.local_group.elements {
            svm_inv &= svm_predict(&model, &emb, &phi.image(p)).map_err(|e| e.to_string())?.to_bits() == f.to_bits();
        }
    }
    let ok = min_eig >= -1e-8 && gp_ok && rff_err <= 0.05 && gap <= 1e-3 && svm_inv;
    let msg = format!(
        "min Gram eigenvalue {min_eig:.1e}; GP invariant and reproducible: {gp_ok}; feature kernel error {rff_err:.3}; SVM dual gap {gap:.1e}, decision invariant: {svm_inv}"
    );
    if ok { Ok(msg) } else { Err(msg) }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("p1 Fourier basis (Galerkin)", fourier_p1),
        ("interval spectrum", interval),
        ("p6 eigenvalues", p6_values),
        ("quotient property suite", property_suite),
        ("flux cancellation", flux),
        ("orthonormality", orthonormality),
        ("embedding", embedding),
        ("exactness classification", exactness),
        ("invariant kernels, GP, SVM", machine_learning),
    ];
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {} PASS  {title}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} FAIL  {title}: {msg} [{secs:.1}s]", i + 1)
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var("CRYSTALFOLD_STRICT_ACCEPTANCE").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
