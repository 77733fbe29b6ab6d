use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use crystalfold::embed::{build_embedding, embedding_distortion, EmbedConfig, Embedding};
use crystalfold::ml::{gp_labelled_points, gp_sample_grid, svm_predict, svm_train, GPSampler, InvariantKernel};
use crystalfold::orbitgraph::{build_orbit_graph, off_mesh};
use crystalfold::polytope::is_exact;
use crystalfold::spectral::{eigenbasis_galerkin, eigenbasis_spectral, EigenBasis, GalerkinConfig};
use crystalfold::{registry, QuotientContext};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "crystalfold", version, about = "Smooth functions invariant under crystallographic groups")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, env = "CRYSTALFOLD_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Builtin group registry.
    Groups {
        #[command(subcommand)]
        action: GroupsAction,
    },
    /// Quotient distance between two points.
    Distance {
        #[command(flatten)]
        group: GroupArg,
        #[arg(short = 'x', value_parser = parse_point, allow_hyphen_values = true)]
        x: Point,
        #[arg(short = 'y', value_parser = parse_point, allow_hyphen_values = true)]
        y: Point,
    },
    /// Representative of a point's orbit in the transversal.
    Project {
        #[command(flatten)]
        group: GroupArg,
        #[arg(short = 'x', value_parser = parse_point, allow_hyphen_values = true)]
        x: Point,
    },
    /// Orbit graph as JSON and OFF.
    Orbitgraph {
        #[command(flatten)]
        group: GroupArg,
        #[command(flatten)]
        net: NetArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Orbifold embedding: JSON, vertex CSV, OFF mesh and distortion report.
    Embed {
        #[command(flatten)]
        group: GroupArg,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 0.05)]
        stress_tol: f64,
        #[arg(long, default_value_t = 10)]
        max_dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Invariant eigenbasis: JSON, eigenvalue CSV and optionally a raster of eigenfunctions.
    Basis {
        #[command(flatten)]
        group: GroupArg,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Spectral)]
        method: MethodArg,
        #[arg(short = 'k', default_value_t = 6)]
        k: usize,
        /// Galerkin centres (at least this many).
        #[arg(long, default_value_t = 200)]
        centers: usize,
        /// Raster points per axis; 0 skips the raster.
        #[arg(long, default_value_t = 0)]
        raster: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random invariant function drawn from a Gaussian process, rasterized to CSV.
    GpSample {
        #[command(flatten)]
        group: GroupArg,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 0.1)]
        lengthscale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1024)]
        features: usize,
        /// Raster points per axis (default 1024, 256 or 32 by dimension).
        #[arg(long)]
        raster: Option<usize>,
        /// CSV file; the run configuration goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Invariant kernel SVM; writes the decision function as a CSV raster and the model as JSON.
    Svm {
        #[command(flatten)]
        group: GroupArg,
        #[command(flatten)]
        net: NetArgs,
        /// CSV with columns x, y[, z], label (±1). Without it, points are labelled by a seeded GP sample.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long = "C", default_value_t = 10.0)]
        c: f64,
        #[arg(long, default_value_t = 0.25)]
        lengthscale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generated training points when no data file is given.
        #[arg(long, default_value_t = 40)]
        points: usize,
        /// Raster points per axis (default 1024, 256 or 32 by dimension).
        #[arg(long)]
        raster: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum GroupsAction {
    List,
}

#[derive(Args, Clone)]
struct GroupArg {
    /// Builtin group name or path to a group-definition JSON file.
    #[arg(long)]
    group: String,
}

#[derive(Args, Clone)]
struct NetArgs {
    /// Net resolution; defaults to 5% of the polytope diameter (20% in three dimensions).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Edge threshold, a number or "auto" (1.5 × grid spacing).
    #[arg(long, default_value = "auto")]
    delta: String,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Spectral,
    Galerkin,
}

/// Resolved configuration, written next to every artifact.
#[derive(Serialize, Default)]
struct RunConfig {
    command: String,
    group: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<MethodArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    raster: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lengthscale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    centers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    features: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<String>,
    outputs: Vec<String>,
    version: &'static str,
}

/// Comma-separated coordinates.
#[derive(Clone, Debug)]
struct Point(Vec<f64>);

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"))).collect::<std::result::Result<_, _>>().map(Point)
}

// Nine decimals hide the 2^-32 snapping of projected points; trailing zeros trimmed.
fn fmt_num(v: f64) -> String {
    let s = format!("{v:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn context(group: &GroupArg) -> Result<QuotientContext> {
    let g = registry::resolve(&group.group)?;
    Ok(QuotientContext::new(g)?)
}

fn epsilon(ctx: &QuotientContext, net: &NetArgs) -> f64 {
    let fraction = if ctx.dim() >= 3 { 0.2 } else { 0.05 };
    net.epsilon.unwrap_or(fraction * ctx.polytope.diameter())
}

fn delta(net: &NetArgs) -> Result<Option<f64>> {
    if net.delta == "auto" {
        return Ok(None);
    }
    let d: f64 = net.delta.parse().with_context(|| format!("delta must be a number or \"auto\", got '{}'", net.delta))?;
    Ok(Some(d))
}

fn embed(ctx: &QuotientContext, net: &NetArgs) -> Result<(Embedding, crystalfold::orbitgraph::OrbitGraph)> {
    let mut cfg = EmbedConfig::new(epsilon(ctx, net));
    cfg.delta = delta(net)?;
    Ok(build_embedding(ctx, &cfg)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

// Sidecar for a single-file artifact: field.csv -> field.run.json.
fn sidecar(file: &Path, suffix: &str) -> PathBuf {
    let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    file.with_file_name(format!("{stem}.{suffix}"))
}

fn names(paths: &[&Path]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

/// Regular grid over the polytope's bounding box grown by one diameter on every side,
/// first axis varying fastest.
fn raster_points(ctx: &QuotientContext, per_axis: usize) -> Vec<DVector<f64>> {
    let (lo, hi) = ctx.polytope.bounding_box();
    let pad = ctx.polytope.diameter();
    let n = lo.len();
    let m = per_axis.max(2);
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut t| {
            DVector::from_fn(n, |k, _| {
                let i = t % m;
                if k + 1 < n {
                    t /= m;
                }
                let (a, b) = (lo[k] - pad, hi[k] + pad);
                a + (b - a) * i as f64 / (m - 1) as f64
            })
        })
        .collect()
}

fn raster_size(ctx: &QuotientContext, requested: Option<usize>) -> usize {
    requested.unwrap_or(match ctx.dim() {
        1 => 1024,
        2 => 256,
        _ => 32,
    })
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn write_raster(path: &Path, points: &[DVector<f64>], columns: &[String], values: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let n = points.first().map_or(0, |p| p.len());
    let mut header: Vec<String> = AXES[..n].iter().map(|s| s.to_string()).collect();
    header.extend(columns.iter().cloned());
    w.write_record(&header)?;
    for (p, row) in points.iter().zip(values) {
        let rec: Vec<String> = p.iter().chain(row.iter()).map(|v| v.to_string()).collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn read_labelled(path: &Path, dim: usize) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim + 1 {
            bail!("{}: row {} has {} columns, expected {}", path.display(), line + 1, rec.len(), dim + 1);
        }
        let vals: Vec<f64> = rec.iter().map(|t| t.trim().parse::<f64>()).collect::<std::result::Result<_, _>>()?;
        x.push(DVector::from_column_slice(&vals[..dim]));
        y.push(vals[dim]);
    }
    Ok((x, y))
}

fn groups_list() -> Result<()> {
    println!("{:<8} {:>3} {:>10} {:>6}", "name", "dim", "generators", "exact");
    for name in registry::builtin_names() {
        let g = registry::builtin(name)?;
        let ctx = QuotientContext::new(g)?;
        let exact = is_exact(&ctx.polytope, &ctx.local_group);
        println!("{:<8} {:>3} {:>10} {:>6}", name, ctx.dim(), ctx.group.generators.len(), exact);
    }
    Ok(())
}

fn check_dim(ctx: &QuotientContext, p: &[f64]) -> Result<DVector<f64>> {
    if p.len() != ctx.dim() {
        bail!("point has {} coordinates, group acts on R^{}", p.len(), ctx.dim());
    }
    Ok(DVector::from_column_slice(p))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Groups { action: GroupsAction::List } => groups_list(),
        Command::Distance { group, x, y } => {
            let ctx = context(&group)?;
            let (x, y) = (check_dim(&ctx, &x.0)?, check_dim(&ctx, &y.0)?);
            let d = ctx.quotient_distance(&ctx.reduce(&x), &ctx.reduce(&y));
            println!("{}", fmt_num(d));
            Ok(())
        }
        Command::Project { group, x } => {
            let ctx = context(&group)?;
            let p = ctx.project(&check_dim(&ctx, &x.0)?)?;
            println!("{}", p.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(","));
            Ok(())
        }
        Command::Orbitgraph { group, net, out } => {
            let ctx = context(&group)?;
            let eps = epsilon(&ctx, &net);
            let graph = build_orbit_graph(&ctx, eps, delta(&net)?)?;
            out_dir(&out)?;
            let (json, off, run) = (out.join("orbitgraph.json"), out.join("orbitgraph.off"), out.join("run.json"));
            write_json(&json, &graph)?;
            fs::write(&off, graph.to_off())?;
            let cfg = RunConfig {
                command: "orbitgraph".into(),
                group: group.group,
                epsilon: Some(eps),
                delta: Some(net.delta),
                outputs: names(&[&json, &off]),
                version: env!("CARGO_PKG_VERSION"),
                ..Default::default()
            };
            write_json(&run, &cfg)?;
            println!("{} vertices, {} edges", graph.len(), graph.edges.len());
            Ok(())
        }
        Command::Embed { group, net, stress_tol, max_dim, out } => {
            let ctx = context(&group)?;
            let eps = epsilon(&ctx, &net);
            let mut cfg = EmbedConfig::new(eps);
            cfg.delta = delta(&net)?;
            cfg.stress_tol = stress_tol;
            cfg.max_dim = max_dim;
            let (emb, graph) = build_embedding(&ctx, &cfg)?;
            out_dir(&out)?;
            let paths = [out.join("embedding.json"), out.join("embedding.csv"), out.join("embedding.off"), out.join("distortion.json")];
            write_json(&paths[0], &emb.data)?;
            let n = ctx.dim();
            let mut w = csv::Writer::from_path(&paths[1])?;
            let mut header: Vec<String> = AXES[..n].iter().map(|s| s.to_string()).collect();
            header.extend((1..=emb.dim()).map(|k| format!("rho{k}")));
            w.write_record(&header)?;
            for (v, c) in emb.data.vertices.iter().zip(&emb.data.coords) {
                w.write_record(v.iter().chain(c.iter()).map(|t| t.to_string()))?;
            }
            w.flush()?;
            let pts: Vec<&[f64]> = emb.data.coords.iter().map(|c| c.as_slice()).collect();
            let edges: Vec<(usize, usize)> =
                graph.edges.iter().filter(|e| e.0 < pts.len() && e.1 < pts.len()).map(|e| (e.0, e.1)).collect();
            fs::write(&paths[2], off_mesh(&pts, &edges))?;
            write_json(&paths[3], &embedding_distortion(&emb, &graph)?)?;
            let run = RunConfig {
                command: "embed".into(),
                group: group.group,
                epsilon: Some(eps),
                delta: Some(net.delta),
                outputs: names(&paths.iter().map(|p| p.as_path()).collect::<Vec<_>>()),
                version: env!("CARGO_PKG_VERSION"),
                ..Default::default()
            };
            write_json(&out.join("run.json"), &run)?;
            println!("embedding dimension {}, stress {:.4}", emb.dim(), emb.data.stress);
            Ok(())
        }
        Command::Basis { group, net, method, k, centers, raster, out } => {
            let ctx = context(&group)?;
            let eps = epsilon(&ctx, &net);
            let (emb, graph) = embed(&ctx, &net)?;
            let qctx = emb.context.clone();
            let basis: EigenBasis = match method {
                MethodArg::Spectral => eigenbasis_spectral(&qctx, &graph, k)?,
                MethodArg::Galerkin => {
                    let cfg = GalerkinConfig::new(&qctx, &emb, centers)?;
                    eigenbasis_galerkin(&qctx, &emb, &cfg, k)?
                }
            };
            out_dir(&out)?;
            let mut paths = vec![out.join("basis.json"), out.join("eigenvalues.csv")];
            write_json(&paths[0], &basis)?;
            let mut w = csv::Writer::from_path(&paths[1])?;
            w.write_record(["index", "eigenvalue", "cluster"])?;
            let clusters = crystalfold::spectral::clusters(&basis.eigenvalues);
            for (i, l) in basis.eigenvalues.iter().enumerate() {
                let c = clusters.iter().position(|c| c.contains(&i)).unwrap_or(0);
                w.write_record([(i + 1).to_string(), l.to_string(), (c + 1).to_string()])?;
            }
            w.flush()?;
            if raster > 0 {
                let pts = raster_points(&qctx, raster);
                let emb_ref = matches!(method, MethodArg::Galerkin).then_some(&emb);
                let values: Vec<Vec<f64>> = pts
                    .par_iter()
                    .map(|p| basis.evaluate(&qctx, emb_ref, p).map(|v| v.iter().copied().collect()))
                    .collect::<crystalfold::Result<_>>()?;
                let cols: Vec<String> = (1..=basis.len()).map(|i| format!("e{i}")).collect();
                let path = out.join("raster.csv");
                write_raster(&path, &pts, &cols, &values)?;
                paths.push(path);
            }
            let run = RunConfig {
                command: "basis".into(),
                group: group.group,
                epsilon: Some(eps),
                delta: Some(net.delta),
                method: Some(method),
                k: Some(k),
                centers: matches!(method, MethodArg::Galerkin).then_some(centers),
                raster: (raster > 0).then_some(raster),
                outputs: names(&paths.iter().map(|p| p.as_path()).collect::<Vec<_>>()),
                version: env!("CARGO_PKG_VERSION"),
                ..Default::default()
            };
            write_json(&out.join("run.json"), &run)?;
            let shown: Vec<String> = basis.eigenvalues.iter().map(|l| format!("{l:.4}")).collect();
            println!("{}", shown.join(" "));
            Ok(())
        }
        Command::GpSample { group, net, lengthscale, seed, features, raster, out } => {
            let ctx = context(&group)?;
            let eps = epsilon(&ctx, &net);
            let (emb, _) = embed(&ctx, &net)?;
            let raster = raster_size(&ctx, raster);
            let sampler = GPSampler::new(emb.dim(), lengthscale, features, seed)?;
            let pts = raster_points(&emb.context, raster);
            let values = gp_sample_grid(&sampler, &emb, &pts)?;
            let rows: Vec<Vec<f64>> = values.into_iter().map(|v| vec![v]).collect();
            write_raster(&out, &pts, &["value".to_string()], &rows)?;
            let run = RunConfig {
                command: "gp-sample".into(),
                group: group.group,
                epsilon: Some(eps),
                delta: Some(net.delta),
                seed: Some(seed),
                raster: Some(raster),
                lengthscale: Some(lengthscale),
                features: Some(features),
                outputs: names(&[&out]),
                version: env!("CARGO_PKG_VERSION"),
                ..Default::default()
            };
            write_json(&sidecar(&out, "run.json"), &run)?;
            Ok(())
        }
        Command::Svm { group, net, data, c, lengthscale, seed, points, raster, out } => {
            let ctx = context(&group)?;
            let eps = epsilon(&ctx, &net);
            let (emb, _) = embed(&ctx, &net)?;
            let (x, y) = match &data {
                Some(path) => read_labelled(path, ctx.dim())?,
                None => gp_labelled_points(&emb, lengthscale, points, seed)?,
            };
            let raster = raster_size(&ctx, raster);
            let kernel = InvariantKernel::rbf(&emb, lengthscale)?;
            let model = svm_train(&kernel, &x, &y, c)?;
            if !model.converged {
                eprintln!("warning: SMO did not reach the KKT tolerance; the model is the last iterate");
            }
            let pts = raster_points(&emb.context, raster);
            let rows: Vec<Vec<f64>> = pts
                .par_iter()
                .map(|p| svm_predict(&model, &emb, p).map(|v| vec![v]))
                .collect::<crystalfold::Result<_>>()?;
            write_raster(&out, &pts, &["value".to_string()], &rows)?;
            let model_path = sidecar(&out, "model.json");
            write_json(&model_path, &model)?;
            let run = RunConfig {
                command: "svm".into(),
                group: group.group,
                epsilon: Some(eps),
                delta: Some(net.delta),
                seed: Some(seed),
                raster: Some(raster),
                lengthscale: Some(lengthscale),
                c: Some(c),
                data: data.map(|d| d.display().to_string()),
                outputs: names(&[&out, &model_path]),
                version: env!("CARGO_PKG_VERSION"),
                ..Default::default()
            };
            write_json(&sidecar(&out, "run.json"), &run)?;
            let correct = x.iter().zip(&y).filter(|(p, l)| svm_predict(&model, &emb, p).map(|f| f * **l > 0.0).unwrap_or(false)).count();
            println!("{} support vectors, training accuracy {}/{}", model.support.len(), correct, x.len());
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("warning: could not configure {t} threads: {e}");
        }
    }
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
