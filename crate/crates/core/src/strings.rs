//! String states, minimal-string closure and the resonant minimal model.
//!
//! A string runs from the source charge (odd/B site, `G = -1`) to the sink
//! (even/A site, `G = +1`). In the U(1) model every string link is raised
//! above the vacuum, which is only possible for steps along `+x` or `+y`, so
//! Gauss-valid strings are monotone staircases. In Z2 a string is the set of
//! links with `sigma^x = -1`.
//!
//! The minimal model keeps the configurations reachable from the minimal
//! strings by hops that leave the diagonal energy unchanged, and takes every
//! matrix element of the full Hamiltonian between them.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{gauss_violations, z2_vertex_eigenvalue, BasisConfig, ChargeLayout, ModelKind};
use crate::error::{Result, StringError};
use crate::lattice::{Boundary, Coord, Direction, Geometry, Lattice, LinkRef, PlaquetteRef};
use crate::models::{Couplings, DenseOperator, EnergyTerms, GaugeHamiltonian, SparseOperator};

/// Default cap on the minimal-model dimension.
pub const DEFAULT_MINIMAL_CAP: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StringShape {
    /// All `x` steps, then all `y` steps.
    LShaped,
    /// Alternating `x` and `y` steps, starting with `x`.
    Diagonal,
    Straight,
    /// The middle one of the monotone hexagonal paths (ordered by where the
    /// first `y` step happens).
    SShapedHex,
    Explicit(Vec<Coord>),
}

impl StringShape {
    pub fn name(&self) -> &'static str {
        match self {
            StringShape::LShaped => "l_shaped",
            StringShape::Diagonal => "diagonal",
            StringShape::Straight => "straight",
            StringShape::SShapedHex => "s_shaped_hex",
            StringShape::Explicit(_) => "explicit",
        }
    }

    pub const NAMES: [&'static str; 4] = ["l_shaped", "diagonal", "straight", "s_shaped_hex"];

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "l_shaped" => StringShape::LShaped,
            "diagonal" => StringShape::Diagonal,
            "straight" => StringShape::Straight,
            "s_shaped_hex" => StringShape::SShapedHex,
            _ => return None,
        })
    }
}

/// Site sequence of a string together with its links.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StringPath {
    sites: Vec<usize>,
    links: Vec<LinkRef>,
}

impl StringPath {
    /// Checks adjacency only; Gauss validity is checked by
    /// [`build_string_state`].
    pub fn from_sites(lattice: &Lattice, sites: Vec<usize>) -> std::result::Result<Self, StringError> {
        let mut links = Vec::with_capacity(sites.len().saturating_sub(1));
        for w in sites.windows(2) {
            let l = lattice.link_between(w[0], w[1]).ok_or(StringError::NotAdjacent(lattice.coord(w[0]), lattice.coord(w[1])))?;
            links.push(l);
        }
        Ok(Self { sites, links })
    }

    pub fn from_coords(lattice: &Lattice, coords: &[Coord]) -> std::result::Result<Self, StringError> {
        let sites = coords
            .iter()
            .map(|&c| lattice.site_at(c).ok_or(StringError::NotAdjacent(c, c)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_sites(lattice, sites)
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn links(&self) -> &[LinkRef] {
        &self.links
    }

    /// Number of links.
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn source(&self) -> usize {
        self.sites[0]
    }

    pub fn sink(&self) -> usize {
        *self.sites.last().unwrap()
    }

    /// The vacuum (or Z2 identity) with every path link toggled.
    pub fn config(&self, lattice: &Lattice, model: ModelKind) -> BasisConfig {
        let base = match model {
            ModelKind::U1Qlm => BasisConfig::u1_vacuum(lattice),
            ModelKind::Z2 => BasisConfig::z2_identity(),
        };
        let mask = self.links.iter().fold(0u128, |m, l| m ^ 1 << l.0);
        base.with_flipped_links(mask)
    }

    /// Reads a string back out of a string configuration.
    pub fn from_config(lattice: &Lattice, model: ModelKind, config: &BasisConfig, source: usize) -> Option<Self> {
        let base = match model {
            ModelKind::U1Qlm => BasisConfig::u1_vacuum(lattice),
            ModelKind::Z2 => BasisConfig::z2_identity(),
        };
        let mut flux = config.link_bits() ^ base.link_bits();
        let mut sites = vec![source];
        let mut links = Vec::new();
        let mut here = source;
        while flux != 0 {
            let next = lattice
                .incident_links(here)
                .iter()
                .copied()
                .find(|&l| flux >> l.0 & 1 == 1 && (model == ModelKind::Z2 || lattice.link(l).tail == here))?;
            flux &= !(1 << next.0);
            let link = lattice.link(next);
            here = if link.tail == here { link.head } else { link.tail };
            sites.push(here);
            links.push(next);
        }
        Some(Self { sites, links })
    }

    pub fn coords(&self, lattice: &Lattice) -> Vec<Coord> {
        self.sites.iter().map(|&s| lattice.coord(s)).collect()
    }
}

/// Numbers of `+x` and `+y` steps from `a` to `b`, if `b` lies up and to
/// the right (around the cylinder, if periodic).
fn monotone_offset(lattice: &Lattice, a: usize, b: usize) -> Option<(usize, usize)> {
    let (ca, cb) = (lattice.coord(a), lattice.coord(b));
    let dx = cb.x - ca.x;
    let mut dy = cb.y - ca.y;
    if lattice.spec().boundary == Boundary::CylinderPeriodicY {
        dy = dy.rem_euclid(lattice.spec().extent_y as i64);
    }
    (dx >= 0 && dy >= 0).then_some((dx as usize, dy as usize))
}

/// Every `+x`/`+y` path from `a` to `b`, in lexicographic order of their
/// step sequences (`x` before `y`).
pub fn monotone_paths(lattice: &Lattice, a: usize, b: usize) -> Vec<StringPath> {
    let Some((dx, dy)) = monotone_offset(lattice, a, b) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut stack = vec![a];
    fn walk(lat: &Lattice, stack: &mut Vec<usize>, rx: usize, ry: usize, out: &mut Vec<StringPath>) {
        let here = *stack.last().unwrap();
        if rx == 0 && ry == 0 {
            out.push(StringPath::from_sites(lat, stack.clone()).expect("steps follow links"));
            return;
        }
        for (dir, left) in [(Direction::X, rx), (Direction::Y, ry)] {
            if left == 0 {
                continue;
            }
            if let Some(l) = lat.link_from(here, dir) {
                stack.push(lat.link(l).head);
                let (nx, ny) = if dir == Direction::X { (rx - 1, ry) } else { (rx, ry - 1) };
                walk(lat, stack, nx, ny, out);
                stack.pop();
            }
        }
    }
    walk(lattice, &mut stack, dx, dy, &mut out);
    out
}

fn shape_path(lattice: &Lattice, shape: &StringShape, a: usize, b: usize) -> std::result::Result<StringPath, StringError> {
    let unavailable = || StringError::ShapeUnavailable { shape: shape.name(), from: lattice.coord(a), to: lattice.coord(b) };
    if let StringShape::Explicit(coords) = shape {
        return StringPath::from_coords(lattice, coords);
    }
    let (dx, dy) = monotone_offset(lattice, a, b).ok_or_else(unavailable)?;
    let steps: Vec<Direction> = match shape {
        StringShape::LShaped => std::iter::repeat_n(Direction::X, dx).chain(std::iter::repeat_n(Direction::Y, dy)).collect(),
        StringShape::Straight if dx == 0 || dy == 0 => {
            std::iter::repeat_n(Direction::X, dx).chain(std::iter::repeat_n(Direction::Y, dy)).collect()
        }
        StringShape::Diagonal => {
            let mut v = Vec::new();
            let (mut rx, mut ry) = (dx, dy);
            while rx + ry > 0 {
                if rx > 0 {
                    v.push(Direction::X);
                    rx -= 1;
                }
                if ry > 0 {
                    v.push(Direction::Y);
                    ry -= 1;
                }
            }
            v
        }
        StringShape::SShapedHex if lattice.geometry() == Geometry::Hexagonal => {
            let mut paths = monotone_paths(lattice, a, b);
            if paths.is_empty() {
                return Err(unavailable());
            }
            // ordered by first y step, latest first; reverse for earliest first
            paths.reverse();
            return Ok(paths.swap_remove(paths.len() / 2));
        }
        _ => return Err(unavailable()),
    };
    let mut sites = vec![a];
    for d in steps {
        let l = lattice.link_from(*sites.last().unwrap(), d).ok_or_else(unavailable)?;
        sites.push(lattice.link(l).head);
    }
    StringPath::from_sites(lattice, sites)
}

/// Sites where the Z2 vertex operator differs from the layout.
fn z2_violations(lattice: &Lattice, config: &BasisConfig, layout: &ChargeLayout) -> Vec<usize> {
    (0..lattice.num_sites()).filter(|&s| z2_vertex_eigenvalue(lattice, config, s) != layout.z2_target(s)).collect()
}

/// Builds the string configuration of `shape` between the layout's charges.
pub fn build_string_state(
    lattice: &Lattice,
    layout: &ChargeLayout,
    shape: &StringShape,
    model: ModelKind,
) -> std::result::Result<(StringPath, BasisConfig), StringError> {
    let (Some(a), Some(b)) = (layout.source(), layout.sink()) else {
        return Err(StringError::EndpointMismatch);
    };
    let path = shape_path(lattice, shape, a, b)?;
    if path.source() != a || path.sink() != b {
        return Err(StringError::EndpointMismatch);
    }
    let config = path.config(lattice, model);
    let bad = match model {
        ModelKind::U1Qlm => gauss_violations(lattice, &config, layout),
        ModelKind::Z2 => z2_violations(lattice, &config, layout),
    };
    if !bad.is_empty() {
        // report in the order the path meets them
        let mut ordered: Vec<usize> = path.sites().iter().copied().filter(|s| bad.contains(s)).collect();
        ordered.dedup();
        ordered.extend(bad.iter().filter(|s| !path.sites().contains(s)));
        return Err(StringError::GaussViolation { sites: ordered.iter().map(|&s| lattice.coord(s)).collect() });
    }
    let distance = lattice.manhattan_distance(a, b);
    if path.len() != distance {
        return Err(StringError::NotMinimal { length: path.len(), distance });
    }
    Ok((path, config))
}

/// Sites of the smallest rectangle spanned by two sites, taken up and to
/// the right of `a`.
pub fn patch_sites(lattice: &Lattice, a: usize, b: usize) -> Vec<usize> {
    let (ca, cb) = (lattice.coord(a), lattice.coord(b));
    let (x0, x1) = (ca.x.min(cb.x), ca.x.max(cb.x));
    let (y0, dy) = match monotone_offset(lattice, a, b) {
        Some((_, dy)) => (ca.y, dy as i64),
        None => (ca.y.min(cb.y), (cb.y - ca.y).abs()),
    };
    let mut out: Vec<usize> =
        (x0..=x1).flat_map(|x| (0..=dy).filter_map(move |k| lattice.site_at(Coord::new(x, y0 + k)))).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Plaquettes whose every corner lies in `sites`.
pub fn patch_plaquettes(lattice: &Lattice, sites: &[usize]) -> Vec<PlaquetteRef> {
    (0..lattice.num_plaquettes())
        .map(PlaquetteRef)
        .filter(|&p| lattice.plaquette_sites(p).iter().all(|s| sites.contains(s)))
        .collect()
}

/// Flippable plaquettes of a U(1) configuration anywhere on the lattice.
pub fn flippable_plaquettes(lattice: &Lattice, config: &BasisConfig) -> Vec<PlaquetteRef> {
    GaugeHamiltonian::new(lattice, ModelKind::U1Qlm, Couplings::new(0.0, 0.0, 0.0, 1.0)).flippable_plaquettes(config)
}

/// Closure of `seed` under plaquette flips inside the charges' patch,
/// keeping minimal strings only. Sorted by configuration.
pub fn enumerate_minimal_strings(lattice: &Lattice, model: ModelKind, seed: &StringPath) -> Vec<StringPath> {
    let (a, b) = (seed.source(), seed.sink());
    let patch = patch_sites(lattice, a, b);
    let plaquettes = patch_plaquettes(lattice, &patch);
    let kernel = GaugeHamiltonian::new(lattice, model, Couplings::new(0.0, 0.0, 0.0, 1.0));
    let start = seed.config(lattice, model);
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        kernel.plaquette_flips(&c, |p, d| {
            if !plaquettes.contains(&p) || seen.contains(&d) {
                return;
            }
            let minimal = StringPath::from_config(lattice, model, &d, a).is_some_and(|s| s.sink() == b && s.len() == seed.len());
            if minimal {
                seen.insert(d);
                queue.push_back(d);
            }
        });
    }
    seen.iter().map(|c| StringPath::from_config(lattice, model, c, a).expect("closure keeps strings")).collect()
}

/// Manifold member: a parent string and the positions (link indices along
/// the string) of its lowered links.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BreakPattern {
    pub string: usize,
    pub broken: Vec<usize>,
}

impl BreakPattern {
    /// Contiguous runs of broken positions.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for &k in &self.broken {
            match out.last_mut() {
                Some(run) if run.1 + 1 == k => run.1 = k,
                _ => out.push((k, k)),
            }
        }
        out
    }
}

/// Labels and configurations of a fixed-energy string manifold.
#[derive(Debug, Clone)]
pub struct MinimalModelBasis {
    pub strings: Vec<StringPath>,
    pub labels: Vec<BreakPattern>,
    pub configs: Vec<BasisConfig>,
    /// False when no hop conserves the energy; only the strings are kept.
    pub resonant: bool,
    /// Broken configurations reached from more than one string.
    pub merged: usize,
    index: HashMap<BasisConfig, usize>,
}

impl MinimalModelBasis {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn index_of(&self, c: &BasisConfig) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Index of the unbroken configuration of each string.
    pub fn string_indices(&self) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, l)| l.broken.is_empty()).map(|(i, _)| i).collect()
    }

    /// Text export, one configuration per line.
    pub fn export(&self, lattice: &Lattice) -> String {
        let (ns, nl) = (lattice.num_sites(), lattice.num_links());
        let mut out =
            format!("# gaugestring manifold v1 sites={ns} links={nl} strings={} dimension={}\n", self.strings.len(), self.len());
        for (label, c) in self.labels.iter().zip(&self.configs) {
            let broken = if label.broken.is_empty() {
                "-".to_string()
            } else {
                label.broken.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
            };
            let bits = c.to_bit_string(ns, nl);
            let (matter, links) = bits.split_once('|').unwrap();
            writeln!(out, "string={} broken={broken} matter={matter} links={links}", label.string).unwrap();
        }
        out
    }
}

/// Configurations reachable from each string by energy-conserving hops on
/// its own links. Energies are compared exactly.
pub fn enumerate_resonant_manifold(lattice: &Lattice, strings: &[StringPath], c: &Couplings) -> MinimalModelBasis {
    let kernel = GaugeHamiltonian::new(lattice, ModelKind::U1Qlm, Couplings { kappa: 1.0, ..*c });
    let mut labels = Vec::new();
    let mut configs = Vec::new();
    let mut index = HashMap::new();
    let mut merged = 0;
    let mut resonant = false;
    for (id, path) in strings.iter().enumerate() {
        let start = path.config(lattice, ModelKind::U1Qlm);
        let reference: EnergyTerms = kernel.energy_terms(&start);
        let target = reference.exact(c);
        let position: HashMap<LinkRef, usize> = path.links().iter().enumerate().map(|(k, &l)| (l, k)).collect();
        let mut local = vec![(start, BreakPattern { string: id, broken: Vec::new() })];
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(cfg) = queue.pop_front() {
            kernel.hops(&cfg, |l, d, _| {
                if !position.contains_key(&l) || seen.contains(&d) {
                    return;
                }
                let terms = kernel.energy_terms(&d);
                if terms != reference && terms.exact(c) != target {
                    return;
                }
                seen.insert(d);
                queue.push_back(d);
                let broken: Vec<usize> =
                    path.links().iter().enumerate().filter(|(_, &l)| d.link(l) != start.link(l)).map(|(k, _)| k).collect();
                local.push((d, BreakPattern { string: id, broken }));
            });
        }
        resonant |= local.len() > 1;
        local.sort_by(|x, y| x.1.cmp(&y.1));
        for (cfg, label) in local {
            if index.contains_key(&cfg) {
                merged += 1;
                continue;
            }
            index.insert(cfg, configs.len());
            configs.push(cfg);
            labels.push(label);
        }
    }
    MinimalModelBasis { strings: strings.to_vec(), labels, configs, resonant, merged, index }
}

/// `P H P` on the manifold with the common diagonal energy removed.
#[derive(Debug, Clone)]
pub struct MinimalModel {
    pub basis: Arc<MinimalModelBasis>,
    pub hamiltonian: DenseOperator,
    /// The diagonal energy that was subtracted.
    pub reference_energy: f64,
}

pub fn build_minimal_model(lattice: &Lattice, basis: Arc<MinimalModelBasis>, c: &Couplings, cap: usize) -> Result<MinimalModel> {
    let n = basis.len();
    if n > cap {
        return Err(StringError::CapExceeded { dimension: n, cap }.into());
    }
    let kernel = GaugeHamiltonian::new(lattice, ModelKind::U1Qlm, *c);
    let reference_energy = basis.configs.first().map(|c0| kernel.diagonal(c0)).unwrap_or(0.0);
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for (i, cfg) in basis.configs.iter().enumerate() {
        m[(i, i)] += Complex64::new(kernel.diagonal(cfg) - reference_energy, 0.0);
        kernel.off_diagonal(cfg, |d, amp| {
            if let Some(j) = basis.index_of(&d) {
                m[(i, j)] += Complex64::new(amp, 0.0);
            }
        });
    }
    let hamiltonian = DenseOperator::new(m)?;
    Ok(MinimalModel { basis, hamiltonian, reference_energy })
}

/// Literal projection of a full-sector operator onto `configs`, shifted by
/// `shift` on the diagonal.
pub fn project_operator(op: &SparseOperator, configs: &[BasisConfig], shift: f64) -> Option<DMatrix<Complex64>> {
    let idx: Vec<usize> = configs.iter().map(|c| op.basis().index_of(c)).collect::<Option<_>>()?;
    let n = idx.len();
    Some(DMatrix::from_fn(n, n, |i, j| {
        let v = op.get(idx[i], idx[j]);
        if i == j {
            v - shift
        } else {
            v
        }
    }))
}
