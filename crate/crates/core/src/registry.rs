//! Group-definition files and the builtin group registry.
//!
//! Files are JSON objects `{"name", "dimension", "generators": [{"matrix", "translation"}],
//! "lattice_basis", "polytope_vertices"}` with row-major matrices. Any number may be written
//! as a string token such as `"1/2"`, `"-sqrt3/2"` or `"2*sqrt(2)/3"`. Instead of
//! `polytope_vertices` a file may give `dirichlet_base_point`, in which case the fundamental
//! polytope is the Dirichlet domain of that point.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{enumerate_within, CrystalGroup, Isometry, DEFAULT_MAX_WORD};
use crate::polytope::{dirichlet_domain, ConvexPolytope};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Float(f64),
    Token(String),
}

impl Number {
    pub fn value(&self) -> Result<f64> {
        match self {
            Number::Float(v) => Ok(*v),
            Number::Token(s) => parse_number(s),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub matrix: Vec<Number>,
    pub translation: Vec<Number>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupFile {
    pub name: String,
    pub dimension: usize,
    pub generators: Vec<GeneratorSpec>,
    pub lattice_basis: Vec<Vec<Number>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polytope_vertices: Option<Vec<Vec<Number>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet_base_point: Option<Vec<Number>>,
}

/// Parse a numeric token: products and quotients of decimals and `sqrtN` / `sqrt(expr)`.
pub fn parse_number(token: &str) -> Result<f64> {
    let chars: Vec<char> = token.chars().filter(|c| !c.is_whitespace()).collect();
    let mut pos = 0;
    let v = parse_expr(&chars, &mut pos).ok_or_else(|| Error::ParseNumber(token.to_string()))?;
    if pos != chars.len() || !v.is_finite() {
        return Err(Error::ParseNumber(token.to_string()));
    }
    Ok(v)
}

fn parse_expr(c: &[char], pos: &mut usize) -> Option<f64> {
    let mut sign = 1.0;
    while *pos < c.len() && (c[*pos] == '-' || c[*pos] == '+') {
        if c[*pos] == '-' {
            sign = -sign;
        }
        *pos += 1;
    }
    let mut v = parse_factor(c, pos)?;
    while *pos < c.len() && (c[*pos] == '*' || c[*pos] == '/') {
        let op = c[*pos];
        *pos += 1;
        let rhs = parse_factor(c, pos)?;
        v = if op == '*' { v * rhs } else { v / rhs };
    }
    Some(sign * v)
}

fn parse_factor(c: &[char], pos: &mut usize) -> Option<f64> {
    let rest: String = c[*pos..].iter().collect();
    if rest.starts_with("sqrt") {
        *pos += 4;
        if *pos < c.len() && c[*pos] == '(' {
            *pos += 1;
            let v = parse_expr(c, pos)?;
            if *pos >= c.len() || c[*pos] != ')' {
                return None;
            }
            *pos += 1;
            return Some(v.sqrt());
        }
        return parse_literal(c, pos).map(f64::sqrt);
    }
    if *pos < c.len() && c[*pos] == '(' {
        *pos += 1;
        let v = parse_expr(c, pos)?;
        if *pos >= c.len() || c[*pos] != ')' {
            return None;
        }
        *pos += 1;
        return Some(v);
    }
    parse_literal(c, pos)
}

fn parse_literal(c: &[char], pos: &mut usize) -> Option<f64> {
    let start = *pos;
    while *pos < c.len() && (c[*pos].is_ascii_digit() || c[*pos] == '.' || c[*pos] == 'e' || c[*pos] == 'E') {
        // allow a signed exponent
        if (c[*pos] == 'e' || c[*pos] == 'E') && *pos + 1 < c.len() && (c[*pos + 1] == '-' || c[*pos + 1] == '+') {
            *pos += 1;
        }
        *pos += 1;
    }
    let s: String = c[start..*pos].iter().collect();
    s.parse().ok()
}

fn values(v: &[Number]) -> Result<Vec<f64>> {
    v.iter().map(Number::value).collect()
}

impl GroupFile {
    pub fn build(&self) -> Result<CrystalGroup> {
        let n = self.dimension;
        let mut generators = Vec::with_capacity(self.generators.len());
        for g in &self.generators {
            let m = values(&g.matrix)?;
            let t = values(&g.translation)?;
            if m.len() != n * n || t.len() != n {
                return Err(Error::InvalidGroup(format!(
                    "{}: generator has {} matrix and {} translation entries for dimension {n}",
                    self.name,
                    m.len(),
                    t.len()
                )));
            }
            generators.push(Isometry::new(DMatrix::from_row_slice(n, n, &m), DVector::from_vec(t))?);
        }
        let basis: Vec<DVector<f64>> =
            self.lattice_basis.iter().map(|b| values(b).map(DVector::from_vec)).collect::<Result<_>>()?;

        match (&self.polytope_vertices, &self.dirichlet_base_point) {
            (Some(vs), _) => {
                let verts: Vec<DVector<f64>> = vs.iter().map(|v| values(v).map(DVector::from_vec)).collect::<Result<_>>()?;
                CrystalGroup::new(self.name.clone(), generators, basis, ConvexPolytope::from_vertices(verts)?)
            }
            (None, Some(p)) => {
                let x = DVector::from_vec(values(p)?);
                if x.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: x.len() });
                }
                // A lattice cell around the base point stands in while the local group is built.
                let mut corners = Vec::new();
                for mask in 0..(1usize << n) {
                    let mut c = x.clone();
                    for (k, b) in basis.iter().enumerate() {
                        c += b * if mask >> k & 1 == 1 { 0.5 } else { -0.5 };
                    }
                    corners.push(c);
                }
                let proxy = ConvexPolytope::from_vertices(corners)?;
                let mut group = CrystalGroup::new(self.name.clone(), generators, basis, proxy.clone())?;
                let reach = 2.0 * group.lattice_basis.iter().map(|b| b.norm()).fold(0.0, f64::max);
                let local = enumerate_within(&group, &proxy, reach, DEFAULT_MAX_WORD)?;
                group.polytope = dirichlet_domain(&local, &x)?;
                Ok(group)
            }
            (None, None) => Err(Error::InvalidGroup(format!("{}: no polytope given", self.name))),
        }
    }
}

pub fn parse_group_json(text: &str) -> Result<CrystalGroup> {
    let file: GroupFile = serde_json::from_str(text)?;
    file.build()
}

pub fn load_group_file(path: impl AsRef<Path>) -> Result<CrystalGroup> {
    parse_group_json(&std::fs::read_to_string(path)?)
}

const BUILTIN: &[(&str, &str)] = &[
    ("p1", include_str!("../groups/p1.json")),
    ("p2", include_str!("../groups/p2.json")),
    ("pm", include_str!("../groups/pm.json")),
    ("pg", include_str!("../groups/pg.json")),
    ("cm", include_str!("../groups/cm.json")),
    ("p2mm", include_str!("../groups/p2mm.json")),
    ("p2mg", include_str!("../groups/p2mg.json")),
    ("p2gg", include_str!("../groups/p2gg.json")),
    ("c2mm", include_str!("../groups/c2mm.json")),
    ("p4", include_str!("../groups/p4.json")),
    ("p4mm", include_str!("../groups/p4mm.json")),
    ("p4gm", include_str!("../groups/p4gm.json")),
    ("p3", include_str!("../groups/p3.json")),
    ("p3m1", include_str!("../groups/p3m1.json")),
    ("p31m", include_str!("../groups/p31m.json")),
    ("p6", include_str!("../groups/p6.json")),
    ("p6mm", include_str!("../groups/p6mm.json")),
    ("line-p1", include_str!("../groups/line-p1.json")),
    ("line-pm", include_str!("../groups/line-pm.json")),
    ("P1", include_str!("../groups/P1.json")),
    ("I23", include_str!("../groups/I23.json")),
];

const ALIASES: &[(&str, &str)] = &[
    ("pmm", "p2mm"),
    ("pmg", "p2mg"),
    ("pgg", "p2gg"),
    ("cmm", "c2mm"),
    ("p4m", "p4mm"),
    ("p4g", "p4gm"),
    ("p4mg", "p4gm"),
    ("p6m", "p6mm"),
];

pub const WALLPAPER: [&str; 17] = [
    "p1", "p2", "pm", "pg", "cm", "p2mm", "p2mg", "p2gg", "c2mm", "p4", "p4mm", "p4gm", "p3", "p3m1", "p31m", "p6",
    "p6mm",
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

pub fn canonical_name(name: &str) -> Option<&'static str> {
    if let Some((n, _)) = BUILTIN.iter().find(|(n, _)| *n == name) {
        return Some(n);
    }
    ALIASES.iter().find(|(a, _)| *a == name).map(|(_, n)| *n)
}

pub fn builtin(name: &str) -> Result<CrystalGroup> {
    let canon = canonical_name(name).ok_or_else(|| Error::UnknownGroup {
        name: name.to_string(),
        valid: builtin_names().join(", "),
    })?;
    let text = BUILTIN.iter().find(|(n, _)| *n == canon).map(|(_, t)| *t).unwrap();
    parse_group_json(text)
}

/// A builtin name or a path to a group-definition file.
pub fn resolve(name_or_path: &str) -> Result<CrystalGroup> {
    if canonical_name(name_or_path).is_some() {
        return builtin(name_or_path);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return load_group_file(path);
    }
    builtin(name_or_path)
}
