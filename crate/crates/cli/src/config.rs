//! Scenario files.
//!
//! A scenario is a small TOML document with the sections `[scenario]`,
//! `[lattice]`, `[charges]`, `[string]`, `[couplings]`, `[time]` and an
//! optional `[output]`. Couplings are in units of kappa. `mass`, `efield`
//! and `plaq` take a number or a list; lists expand into a sweep.

use std::fmt;
use std::path::PathBuf;

use gaugestring::{Boundary, Coord, Geometry, StringShape};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    U1Square,
    U1Hex,
    Z2Square,
    Z2Hex,
    Qlm1d,
    MinimalModel,
}

impl ModelChoice {
    pub fn name(self) -> &'static str {
        match self {
            ModelChoice::U1Square => "u1_square",
            ModelChoice::U1Hex => "u1_hex",
            ModelChoice::Z2Square => "z2_square",
            ModelChoice::Z2Hex => "z2_hex",
            ModelChoice::Qlm1d => "qlm1d",
            ModelChoice::MinimalModel => "minimal_model",
        }
    }

    /// The geometry a full-ED model runs on; `None` for the minimal model,
    /// which takes it from `[lattice]`.
    fn implied_geometry(self) -> Option<Geometry> {
        match self {
            ModelChoice::U1Square | ModelChoice::Z2Square => Some(Geometry::Square),
            ModelChoice::U1Hex | ModelChoice::Z2Hex => Some(Geometry::Hexagonal),
            ModelChoice::Qlm1d => Some(Geometry::Chain),
            ModelChoice::MinimalModel => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagatorChoice {
    Auto,
    Dense,
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum GeometryName {
    Square,
    Hexagonal,
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BoundaryName {
    Open,
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ShapeName {
    LShaped,
    Diagonal,
    Straight,
    SShapedHex,
    Explicit,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    scenario: RawScenario,
    lattice: RawLattice,
    charges: RawCharges,
    string: RawString,
    couplings: RawCouplings,
    time: RawTime,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    model: ModelChoice,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLattice {
    geometry: Option<GeometryName>,
    extent_x: usize,
    extent_y: Option<usize>,
    boundary: Option<BoundaryName>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCharges {
    source: [i64; 2],
    sink: [i64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawString {
    shape: ShapeName,
    path: Option<Vec<[i64; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCouplings {
    kappa: Option<f64>,
    mass: OneOrMany,
    efield: OneOrMany,
    plaq: Option<OneOrMany>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    t_max: f64,
    n_points: usize,
    krylov_tol: Option<f64>,
    propagator: Option<PropagatorChoice>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

/// A fully resolved scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub model: ModelChoice,
    pub geometry: Geometry,
    pub extent_x: usize,
    pub extent_y: usize,
    pub boundary: Boundary,
    pub source: Coord,
    pub sink: Coord,
    pub shape: StringShape,
    pub mass: Vec<f64>,
    pub efield: Vec<f64>,
    pub plaq: Vec<f64>,
    pub t_max: f64,
    pub n_points: usize,
    pub krylov_tol: f64,
    pub propagator: PropagatorChoice,
    pub out_dir: Option<PathBuf>,
}

/// One member of a coupling sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub mass: f64,
    pub efield: f64,
    pub plaq: f64,
}

impl Job {
    /// File stem suffix, e.g. `_m12_g24_J1`.
    pub fn suffix(&self) -> String {
        format!("_m{}_g{}_J{}", self.mass, self.efield, self.plaq)
    }
}

impl Scenario {
    /// Sweep members, mass outermost and plaquette coupling innermost.
    pub fn jobs(&self) -> Vec<Job> {
        let mut out = Vec::new();
        for &mass in &self.mass {
            for &efield in &self.efield {
                for &plaq in &self.plaq {
                    out.push(Job { mass, efield, plaq });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of `key` inside `[section]`, if it is written out.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
        } else if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse(text: &str) -> Result<Scenario, ConfigError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    let at = |section: &str, key: &str, message: String| ConfigError { line: locate(text, section, key), message };

    let name = raw.scenario.name;
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
        return Err(at(
            "scenario",
            "name",
            format!("name {name:?} must be non-empty and use only letters, digits, '-', '_' or '.'"),
        ));
    }
    let model = raw.scenario.model;

    let given = raw.lattice.geometry.map(|g| match g {
        GeometryName::Square => Geometry::Square,
        GeometryName::Hexagonal => Geometry::Hexagonal,
        GeometryName::Chain => Geometry::Chain,
    });
    let geometry = match (model.implied_geometry(), given) {
        (Some(implied), None) => implied,
        (Some(implied), Some(g)) if g == implied => g,
        (Some(implied), Some(g)) => {
            return Err(at("lattice", "geometry", format!("model {} runs on a {implied} lattice, not {g}", model.name())));
        }
        (None, Some(Geometry::Chain)) => {
            return Err(at(
                "lattice",
                "geometry",
                "minimal_model needs a square or hexagonal lattice; use model = \"qlm1d\" for a chain".into(),
            ));
        }
        (None, Some(g)) => g,
        (None, None) => {
            return Err(at("lattice", "extent_x", "minimal_model needs [lattice] geometry = \"square\" or \"hexagonal\"".into()))
        }
    };
    let boundary = match raw.lattice.boundary {
        None | Some(BoundaryName::Open) => Boundary::Open,
        Some(BoundaryName::Cylinder) => Boundary::CylinderPeriodicY,
    };
    let extent_y = match (geometry, raw.lattice.extent_y) {
        (Geometry::Chain, None | Some(1)) => 1,
        (Geometry::Chain, Some(_)) => return Err(at("lattice", "extent_y", "a chain has extent_y = 1".into())),
        (_, Some(y)) => y,
        (_, None) => return Err(at("lattice", "extent_x", "[lattice] extent_y is required".into())),
    };
    if geometry == Geometry::Chain && boundary != Boundary::Open {
        return Err(at("lattice", "boundary", "a chain is always open".into()));
    }

    let coord = |c: [i64; 2]| Coord::new(c[0], c[1]);
    let shape = match (raw.string.shape, raw.string.path) {
        (ShapeName::Explicit, Some(path)) => StringShape::Explicit(path.into_iter().map(coord).collect()),
        (ShapeName::Explicit, None) => return Err(at("string", "shape", "shape = \"explicit\" needs a path".into())),
        (_, Some(_)) => return Err(at("string", "path", "path is only read with shape = \"explicit\"".into())),
        (ShapeName::LShaped, None) => StringShape::LShaped,
        (ShapeName::Diagonal, None) => StringShape::Diagonal,
        (ShapeName::Straight, None) => StringShape::Straight,
        (ShapeName::SShapedHex, None) => StringShape::SShapedHex,
    };

    if let Some(k) = raw.couplings.kappa {
        if k != 1.0 {
            return Err(at("couplings", "kappa", format!("couplings are in units of kappa, so kappa must be 1 (got {k})")));
        }
    }
    let mut lists = Vec::new();
    for (key, list) in [
        ("mass", raw.couplings.mass.into_vec()),
        ("efield", raw.couplings.efield.into_vec()),
        ("plaq", raw.couplings.plaq.map_or(vec![0.0], OneOrMany::into_vec)),
    ] {
        if list.is_empty() {
            return Err(at("couplings", key, format!("{key} needs at least one value")));
        }
        if let Some(v) = list.iter().find(|v| !v.is_finite()) {
            return Err(at("couplings", key, format!("{key} value {v} is not finite")));
        }
        lists.push(list);
    }
    let plaq = lists.pop().unwrap();
    let efield = lists.pop().unwrap();
    let mass = lists.pop().unwrap();

    let t = raw.time;
    if !(t.t_max.is_finite() && t.t_max > 0.0) {
        return Err(at("time", "t_max", format!("t_max must be positive and finite (got {})", t.t_max)));
    }
    if t.n_points < 2 {
        return Err(at("time", "n_points", format!("n_points must be at least 2 (got {})", t.n_points)));
    }
    let krylov_tol = t.krylov_tol.unwrap_or(gaugestring::dynamics::DEFAULT_KRYLOV_TOL);
    if !(krylov_tol.is_finite() && krylov_tol > 0.0) {
        return Err(at("time", "krylov_tol", format!("krylov_tol must be positive (got {krylov_tol})")));
    }

    Ok(Scenario {
        name,
        model,
        geometry,
        extent_x: raw.lattice.extent_x,
        extent_y,
        boundary,
        source: coord(raw.charges.source),
        sink: coord(raw.charges.sink),
        shape,
        mass,
        efield,
        plaq,
        t_max: t.t_max,
        n_points: t.n_points,
        krylov_tol,
        propagator: t.propagator.unwrap_or(PropagatorChoice::Auto),
        out_dir: raw.output.and_then(|o| o.dir),
    })
}
