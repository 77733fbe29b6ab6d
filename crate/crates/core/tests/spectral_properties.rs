mod common;

use common::*;
use crystalfold::embed::{build_embedding, EmbedConfig};
use crystalfold::orbitgraph::{build_orbit_graph, mirror_augment};
use crystalfold::spectral::*;
use nalgebra::DVector;
use std::f64::consts::PI;

fn flux_ratio(name: &str, seed: u64) -> (f64, f64) {
    let c = ctx(name);
    let mut r = rng(seed);
    let diam = c.polytope.diameter();
    let f = SymmetrizedBump { ctx: &c, centre: random_on_face(&c.polytope, &mut r), radius: 0.35 * diam };
    let h = SymmetrizedBump { ctx: &c, centre: random_on_face(&c.polytope, &mut r), radius: 0.45 * diam };
    let report = boundary_flux(&c, |x| f.gradient(x) * (1.0 + h.value(x)), 24);
    (report.flux, report.abs_integral)
}

#[test]
fn invariant_fields_have_no_net_flux() {
    for name in ["p1", "p2"] {
        for seed in 0..4 {
            let (flux, abs) = flux_ratio(name, 700 + seed);
            assert!(abs > 1e-6, "{name}: field vanishes on the boundary");
            assert!(flux.abs() <= 1e-3 * abs, "{name}: flux {flux} vs {abs}");
        }
    }
}

#[test]
fn constant_field_has_no_flux() {
    for name in ["p6", "I23"] {
        let c = ctx(name);
        let v = DVector::from_fn(c.dim(), |k, _| 0.3 + k as f64);
        let rep = boundary_flux(&c, |_| v.clone(), 4);
        assert!(rep.flux.abs() < 1e-10 * rep.abs_integral, "{name}");
    }
}

#[test]
fn spectral_and_galerkin_agree_on_p1() {
    let c = ctx("p1");
    let (emb, graph) = build_embedding(&c, &EmbedConfig::new(0.05)).unwrap();
    let spectral = eigenbasis_spectral(&emb.context, &graph, 7).unwrap();
    let cfg = GalerkinConfig::new(&emb.context, &emb, 200).unwrap();
    let galerkin = eigenbasis_galerkin(&emb.context, &emb, &cfg, 7).unwrap();
    for i in 1..7 {
        let (a, b) = (spectral.eigenvalues[i], galerkin.eigenvalues[i]);
        assert!((a / b - 1.0).abs() <= 0.15, "λ_{}: {a} vs {b}", i + 1);
    }
    assert_eq!(spectral.cluster_sizes()[..2], [1, 4]);
    assert!(spectral.eigenvalues[0].abs() <= 1e-6 * spectral.eigenvalues[1]);
    assert!(spectral.eigenvalues.iter().all(|&l| l >= -1e-9));
    // The first eigenfunction is constant.
    if let BasisRepr::Net { values, .. } = &spectral.repr {
        let first: Vec<f64> = values.iter().map(|v| v[0]).collect();
        let mean = first.iter().sum::<f64>() / first.len() as f64;
        assert!(first.iter().all(|v| (v - mean).abs() <= 1e-6 * mean.abs()));
    } else {
        panic!("spectral basis should live on the net");
    }
    let quad = Quadrature::tensor(&emb.context.polytope, 80).unwrap();
    assert!(orthonormality_check(&emb.context, &spectral, Some(&emb), &quad).unwrap() <= 0.05);
    let constant = eigenbasis_spectral(&emb.context, &graph, 1).unwrap();
    assert!(orthonormality_check(&emb.context, &constant, None, &quad).unwrap() <= 1e-6);
}

#[test]
fn eigenfunctions_are_invariant() {
    let c = ctx("p4mm");
    let (emb, graph) = build_embedding(&c, &EmbedConfig::new(0.06)).unwrap();
    let ctx = &emb.context;
    let net = eigenbasis_spectral(ctx, &graph, 4).unwrap();
    let cfg = GalerkinConfig::new(ctx, &emb, 80).unwrap();
    let gal = eigenbasis_galerkin(ctx, &emb, &cfg, 4).unwrap();
    let mut r = rng(31);
    for _ in 0..25 {
        let x = random_near(&ctx.polytope, 1.0, &mut r);
        let a = net.evaluate(ctx, None, &x).unwrap();
        let b = gal.evaluate(ctx, Some(&emb), &x).unwrap();
        for phi in ctx.local_group.elements.iter().step_by(3) {
            let y = phi.image(&x);
            assert_eq!(net.evaluate(ctx, None, &y).unwrap(), a);
            assert_eq!(gal.evaluate(ctx, Some(&emb), &y).unwrap(), b);
            assert_eq!(interpolate(ctx, &net, 2, &y).unwrap(), a[2]);
        }
    }
}

#[test]
fn p2mm_eigenfunctions_satisfy_neumann_condition() {
    let c = ctx("p2mm");
    let (emb, _) = build_embedding(&c, &EmbedConfig::new(0.03)).unwrap();
    let ctx = &emb.context;
    let cfg = GalerkinConfig::new(ctx, &emb, 120).unwrap();
    let basis = eigenbasis_galerkin(ctx, &emb, &cfg, 3).unwrap();
    let e2 = |x: &DVector<f64>| basis.evaluate(ctx, Some(&emb), x).unwrap()[1];
    let h = 1e-4 * ctx.polytope.diameter();
    let mut max_grad: f64 = 0.0;
    for x in cfg.quadrature.nodes.iter().step_by(5) {
        let g = DVector::from_fn(2, |k, _| {
            let mut d = DVector::zeros(2);
            d[k] = h;
            (e2(&(x + &d)) - e2(&(x - &d))) / (2.0 * h)
        });
        max_grad = max_grad.max(g.norm());
    }
    assert!(max_grad > 1.0);
    let mirrors = ctx.mirror_facets();
    assert!(!mirrors.is_empty());
    for &(facet, _) in &mirrors {
        let face = ctx.polytope.facet_faces()[facet];
        let m = ctx.polytope.face_centroid(face);
        let normal = &ctx.polytope.halfspaces()[facet].normal;
        // One-sided difference from inside; a central one would vanish by symmetry alone.
        let dn = (e2(&m) - e2(&(&m - normal * h))) / h;
        assert!(dn.abs() <= 0.05 * max_grad, "facet {facet}: {dn} vs {max_grad}");
    }
}

#[test]
fn mirror_augmentation_keeps_spectrum() {
    let c = ctx("pm");
    let g = build_orbit_graph(&c, 0.08, None).unwrap();
    let aug = mirror_augment(&c, &g).unwrap();
    let a = eigenbasis_spectral(&c, &g, 4).unwrap();
    let b = eigenbasis_spectral(&c, &aug, 4).unwrap();
    for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
        assert!((x - y).abs() <= 0.05 * y.max(1.0), "{x} vs {y}");
    }
}

#[test]
fn interval_spectrum() {
    let c = ctx("line-p1");
    let g = build_orbit_graph(&c, 0.02, None).unwrap();
    let basis = eigenbasis_spectral(&c, &g, 5).unwrap();
    let target = 4.0 * PI * PI;
    for i in [1, 2] {
        assert!((basis.eigenvalues[i] / target - 1.0).abs() <= 0.1, "{:?}", basis.eigenvalues);
    }
    assert!((basis.eigenvalues[3] / (4.0 * target) - 1.0).abs() <= 0.1, "{:?}", basis.eigenvalues);
}
