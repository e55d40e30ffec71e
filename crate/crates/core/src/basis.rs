//! Classical configurations, Gauss's law and sector enumeration.
//!
//! A [`BasisConfig`] packs one matter bit per site and one bit per link. For
//! the U(1) link model a set link bit means `S^z = +1/2` along the link's
//! `+x`/`+y` orientation, a cleared bit `S^z = -1/2`. For the Z2 model a set
//! bit means `sigma^x = -1`.
//!
//! Gauss eigenvalues are measured relative to the staggered vacuum (odd sites
//! filled, every link at `-1/2`):
//!
//! ```text
//! G_j = (n_j - [j odd]) - sum_out b + sum_in b
//! ```
//!
//! On the square lattice this is the lattice Gauss generator with links
//! missing at an open edge held at the vacuum value; on the hexagonal lattice
//! it is the generator minus its staggered `+-1/2` background.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::error::BasisError;
use crate::lattice::{Lattice, LinkRef};

/// Default cap on enumerated sector dimension.
pub const DEFAULT_SECTOR_CAP: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    U1Qlm,
    Z2,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::U1Qlm => "u1_qlm",
            ModelKind::Z2 => "z2",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One classical configuration, bit-packed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BasisConfig {
    matter: u128,
    links: u128,
}

impl BasisConfig {
    pub const fn from_bits(matter: u128, links: u128) -> Self {
        Self { matter, links }
    }

    /// Staggered U(1) vacuum: odd sites occupied, every link at `-1/2`.
    pub fn u1_vacuum(lattice: &Lattice) -> Self {
        let matter = (0..lattice.num_sites()).filter(|&s| !lattice.is_even(s)).fold(0u128, |m, s| m | (1 << s));
        Self { matter, links: 0 }
    }

    /// All `sigma^x = +1`.
    pub fn z2_identity() -> Self {
        Self::default()
    }

    pub fn matter_bits(&self) -> u128 {
        self.matter
    }

    pub fn link_bits(&self) -> u128 {
        self.links
    }

    pub fn occupied(&self, site: usize) -> bool {
        self.matter >> site & 1 == 1
    }

    pub fn link(&self, l: LinkRef) -> bool {
        self.links >> l.0 & 1 == 1
    }

    pub fn set_occupied(&mut self, site: usize, on: bool) {
        if on {
            self.matter |= 1 << site;
        } else {
            self.matter &= !(1 << site);
        }
    }

    pub fn set_link(&mut self, l: LinkRef, on: bool) {
        if on {
            self.links |= 1 << l.0;
        } else {
            self.links &= !(1 << l.0);
        }
    }

    pub fn flip_link(&mut self, l: LinkRef) {
        self.links ^= 1 << l.0;
    }

    pub fn with_flipped_links(mut self, mask: u128) -> Self {
        self.links ^= mask;
        self
    }

    pub fn with_flipped_matter(mut self, mask: u128) -> Self {
        self.matter ^= mask;
        self
    }

    pub fn count_links(&self) -> u32 {
        self.links.count_ones()
    }

    /// `matter|links` as 0/1 strings, site 0 and link 0 first.
    pub fn to_bit_string(&self, n_sites: usize, n_links: usize) -> String {
        let bits = |w: u128, n: usize| (0..n).map(|i| if w >> i & 1 == 1 { '1' } else { '0' }).collect::<String>();
        format!("{}|{}", bits(self.matter, n_sites), bits(self.links, n_links))
    }
}

/// Static charges as Gauss-law targets; every other site targets 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChargeLayout {
    charges: BTreeMap<usize, i8>,
}

impl ChargeLayout {
    pub fn neutral() -> Self {
        Self::default()
    }

    /// A string source (`G = -1`) and sink (`G = +1`).
    pub fn pair(source: usize, sink: usize) -> Self {
        let mut charges = BTreeMap::new();
        charges.insert(source, -1);
        charges.insert(sink, 1);
        Self { charges }
    }

    pub fn from_map(charges: BTreeMap<usize, i32>) -> Result<Self, BasisError> {
        let mut out = BTreeMap::new();
        for (site, value) in charges {
            if !(-1..=1).contains(&value) {
                return Err(BasisError::BadCharge { site, value });
            }
            if value != 0 {
                out.insert(site, value as i8);
            }
        }
        Ok(Self { charges: out })
    }

    pub fn target(&self, site: usize) -> i32 {
        self.charges.get(&site).copied().unwrap_or(0) as i32
    }

    /// Expected vertex operator for Z2: `-1` on charged sites.
    pub fn z2_target(&self, site: usize) -> i8 {
        if self.target(site) != 0 {
            -1
        } else {
            1
        }
    }

    pub fn charges(&self) -> impl Iterator<Item = (usize, i32)> + '_ {
        self.charges.iter().map(|(&s, &v)| (s, v as i32))
    }

    pub fn source(&self) -> Option<usize> {
        self.charges.iter().find(|(_, &v)| v < 0).map(|(&s, _)| s)
    }

    pub fn sink(&self) -> Option<usize> {
        self.charges.iter().find(|(_, &v)| v > 0).map(|(&s, _)| s)
    }
}

/// Gauss eigenvalue of the U(1) link model at `site`.
pub fn gauss_eigenvalue_u1(lattice: &Lattice, config: &BasisConfig, site: usize) -> i32 {
    let mut g = config.occupied(site) as i32 - (!lattice.is_even(site)) as i32;
    for &l in lattice.incident_links(site) {
        if config.link(l) {
            let link = lattice.link(l);
            if link.tail == site {
                g -= 1;
            }
            if link.head == site {
                g += 1;
            }
        }
    }
    g
}

/// Sites where `config` breaks the layout's Gauss constraint.
pub fn gauss_violations(lattice: &Lattice, config: &BasisConfig, layout: &ChargeLayout) -> Vec<usize> {
    (0..lattice.num_sites()).filter(|&s| gauss_eigenvalue_u1(lattice, config, s) != layout.target(s)).collect()
}

pub fn satisfies_gauss(lattice: &Lattice, config: &BasisConfig, layout: &ChargeLayout) -> bool {
    (0..lattice.num_sites()).all(|s| gauss_eigenvalue_u1(lattice, config, s) == layout.target(s))
}

/// Z2 vertex operator: product of `sigma^x` over the links meeting at `site`.
pub fn z2_vertex_eigenvalue(lattice: &Lattice, config: &BasisConfig, site: usize) -> i8 {
    let flips = lattice.incident_links(site).iter().filter(|&&l| config.link(l)).count();
    if flips % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Ordered, duplicate-free list of sector configurations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    n_sites: usize,
    n_links: usize,
    model: ModelKind,
    configs: Vec<BasisConfig>,
}

impl SectorBasis {
    /// Wraps an arbitrary set of configurations, sorting and deduplicating.
    pub fn from_configs(lattice: &Lattice, model: ModelKind, mut configs: Vec<BasisConfig>) -> Self {
        configs.sort_unstable();
        configs.dedup();
        Self { n_sites: lattice.num_sites(), n_links: lattice.num_links(), model, configs }
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn configs(&self) -> &[BasisConfig] {
        &self.configs
    }

    pub fn config(&self, i: usize) -> &BasisConfig {
        &self.configs[i]
    }

    pub fn index_of(&self, c: &BasisConfig) -> Option<usize> {
        self.configs.binary_search(c).ok()
    }

    pub fn check_lattice(&self, lattice: &Lattice) -> Result<(), BasisError> {
        if self.n_sites != lattice.num_sites() || self.n_links != lattice.num_links() {
            return Err(BasisError::LatticeMismatch {
                basis_sites: self.n_sites,
                basis_links: self.n_links,
                lattice_sites: lattice.num_sites(),
                lattice_links: lattice.num_links(),
            });
        }
        Ok(())
    }

    /// Binary dump; see `docs/FORMATS.md`.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(BASIS_MAGIC)?;
        w.write_all(&BASIS_VERSION.to_le_bytes())?;
        let model = match self.model {
            ModelKind::U1Qlm => 0u8,
            ModelKind::Z2 => 1u8,
        };
        w.write_all(&[model, 0, 0, 0])?;
        w.write_all(&(self.n_sites as u32).to_le_bytes())?;
        w.write_all(&(self.n_links as u32).to_le_bytes())?;
        w.write_all(&(self.configs.len() as u64).to_le_bytes())?;
        let (mb, lb) = (self.n_sites.div_ceil(8), self.n_links.div_ceil(8));
        for c in &self.configs {
            w.write_all(&c.matter.to_le_bytes()[..mb])?;
            w.write_all(&c.links.to_le_bytes()[..lb])?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, BasisError> {
        let io = |e: std::io::Error| BasisError::Format(e.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != BASIS_MAGIC {
            return Err(BasisError::Format("bad magic".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(io)?;
        let version = u32::from_le_bytes(word);
        if version != BASIS_VERSION {
            return Err(BasisError::Format(format!("unsupported version {version}")));
        }
        r.read_exact(&mut word).map_err(io)?;
        let model = match word[0] {
            0 => ModelKind::U1Qlm,
            1 => ModelKind::Z2,
            m => return Err(BasisError::Format(format!("unknown model tag {m}"))),
        };
        r.read_exact(&mut word).map_err(io)?;
        let n_sites = u32::from_le_bytes(word) as usize;
        r.read_exact(&mut word).map_err(io)?;
        let n_links = u32::from_le_bytes(word) as usize;
        if n_sites > 128 || n_links > 128 {
            return Err(BasisError::Format("bit counts exceed 128".into()));
        }
        let mut count = [0u8; 8];
        r.read_exact(&mut count).map_err(io)?;
        let count = u64::from_le_bytes(count) as usize;
        let (mb, lb) = (n_sites.div_ceil(8), n_links.div_ceil(8));
        let mut configs = Vec::with_capacity(count.min(1 << 24));
        let mut buf = [0u8; 16];
        for _ in 0..count {
            buf.fill(0);
            r.read_exact(&mut buf[..mb]).map_err(io)?;
            let matter = u128::from_le_bytes(buf);
            buf.fill(0);
            r.read_exact(&mut buf[..lb]).map_err(io)?;
            let links = u128::from_le_bytes(buf);
            configs.push(BasisConfig { matter, links });
        }
        if configs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BasisError::Format("configurations not strictly ordered".into()));
        }
        Ok(Self { n_sites, n_links, model, configs })
    }
}

const BASIS_MAGIC: &[u8; 8] = b"GSBASIS\0";
const BASIS_VERSION: u32 = 1;

/// Enumerates the sector of `model` for the given static charges.
///
/// For the U(1) link model the search assigns each site's matter bit and
/// outgoing links in site order and prunes any branch in which some site can
/// no longer reach its Gauss target. For Z2 the whole link space is returned.
pub fn enumerate_sector(
    lattice: &Lattice,
    layout: &ChargeLayout,
    model: ModelKind,
    cap: usize,
) -> Result<SectorBasis, BasisError> {
    match model {
        ModelKind::Z2 => {
            let n = lattice.num_links();
            let dim = 1u128 << n;
            if dim > cap as u128 {
                return Err(BasisError::CapExceeded { what: "dimension", dimension: dim, cap });
            }
            let configs = (0..dim).map(|links| BasisConfig { matter: 0, links }).collect();
            Ok(SectorBasis { n_sites: lattice.num_sites(), n_links: n, model, configs })
        }
        ModelKind::U1Qlm => {
            let configs = GaussSearch::new(lattice, layout).run(cap)?;
            Ok(SectorBasis::from_configs(lattice, model, configs))
        }
    }
}

struct GaussSearch {
    n: usize,
    /// Target of `n_j - out + in` at every site.
    need: Vec<i32>,
    /// Links owned (tail) by each site: `(link, head)`.
    owned: Vec<Vec<(usize, usize)>>,
    /// Sites whose sum changes at each step.
    affected: Vec<Vec<usize>>,
    /// `lo[s][j]..=hi[s][j]`: contribution still available to site `j`
    /// from steps after `s`.
    lo: Vec<Vec<i32>>,
    hi: Vec<Vec<i32>>,
}

#[derive(Clone)]
struct Partial {
    sums: Vec<i32>,
    config: BasisConfig,
}

impl GaussSearch {
    fn new(lattice: &Lattice, layout: &ChargeLayout) -> Self {
        let n = lattice.num_sites();
        let need = (0..n).map(|s| layout.target(s) + (!lattice.is_even(s)) as i32).collect();
        let mut owned = vec![Vec::new(); n];
        for (i, link) in lattice.links().iter().enumerate() {
            owned[link.tail].push((i, link.head));
        }
        let affected: Vec<Vec<usize>> = (0..n)
            .map(|s| {
                let mut a: Vec<usize> = std::iter::once(s).chain(owned[s].iter().map(|&(_, h)| h)).collect();
                a.sort_unstable();
                a.dedup();
                a
            })
            .collect();
        // remaining[s] covers steps s+1.., filled back to front
        let mut lo = vec![vec![0; n]; n + 1];
        let mut hi = vec![vec![0; n]; n + 1];
        for s in (0..n).rev() {
            let (mut l, mut h) = (lo[s + 1].clone(), hi[s + 1].clone());
            // contributions of step s+1 ... are already in lo[s+1]; add step s+1's own
            if s + 1 < n {
                let t = s + 1;
                h[t] += 1;
                for &(_, head) in &owned[t] {
                    l[t] -= 1;
                    h[head] += 1;
                }
            }
            lo[s] = l;
            hi[s] = h;
        }
        // lo[n] is unused; lo[n-1] is all zeros.
        Self { n, need, owned, affected, lo, hi }
    }

    fn initial_feasible(&self) -> bool {
        // before step 0 every variable is free
        (0..self.n).all(|j| {
            let mut l = self.lo[0][j];
            let mut h = self.hi[0][j];
            if j == 0 {
                h += 1;
            }
            for &(_, head) in &self.owned[0] {
                if j == 0 {
                    l -= 1;
                }
                if head == j {
                    h += 1;
                }
            }
            (l..=h).contains(&self.need[j])
        })
    }

    fn feasible(&self, step: usize, sums: &[i32]) -> bool {
        self.affected[step].iter().all(|&j| {
            let rest = self.need[j] - sums[j];
            rest >= self.lo[step][j] && rest <= self.hi[step][j]
        })
    }

    /// All feasible assignments of `step`'s variables applied to `p`.
    fn expand(&self, step: usize, p: &Partial, mut emit: impl FnMut(Partial)) {
        let owned = &self.owned[step];
        for combo in 0u32..(1 << (owned.len() + 1)) {
            let mut q = p.clone();
            if combo & 1 == 1 {
                q.sums[step] += 1;
                q.config.matter |= 1 << step;
            }
            for (k, &(link, head)) in owned.iter().enumerate() {
                if combo >> (k + 1) & 1 == 1 {
                    q.sums[step] -= 1;
                    q.sums[head] += 1;
                    q.config.links |= 1 << link;
                }
            }
            if self.feasible(step, &q.sums) {
                emit(q);
            }
        }
    }

    fn dfs(&self, step: usize, p: Partial, out: &mut Vec<BasisConfig>, count: &AtomicUsize, cap: usize, abort: &AtomicBool) {
        if abort.load(Ordering::Relaxed) {
            return;
        }
        if step == self.n {
            if count.fetch_add(1, Ordering::Relaxed) >= cap {
                abort.store(true, Ordering::Relaxed);
                return;
            }
            out.push(p.config);
            return;
        }
        self.expand(step, &p, |q| self.dfs(step + 1, q, out, count, cap, abort));
    }

    fn run(&self, cap: usize) -> Result<Vec<BasisConfig>, BasisError> {
        if !self.initial_feasible() {
            return Ok(Vec::new());
        }
        let root = Partial { sums: vec![0; self.n], config: BasisConfig::default() };
        // breadth-first to a frontier wide enough to spread over the pool
        let mut frontier = vec![root];
        let mut depth = 0;
        while depth < self.n && frontier.len() < 256 {
            let mut next = Vec::new();
            for p in &frontier {
                self.expand(depth, p, |q| next.push(q));
            }
            frontier = next;
            depth += 1;
        }
        let count = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let chunks: Vec<Vec<BasisConfig>> = frontier
            .into_par_iter()
            .map(|p| {
                let mut out = Vec::new();
                self.dfs(depth, p, &mut out, &count, cap, &abort);
                out
            })
            .collect();
        if abort.load(Ordering::Relaxed) {
            return Err(BasisError::CapExceeded { what: "dimension", dimension: count.load(Ordering::Relaxed) as u128, cap });
        }
        Ok(chunks.into_iter().flatten().collect())
    }
}
