//! Lattice geometries: square and hexagonal (brick-wall) grids on cylinders
//! or open patches, plus the open chain used as the one-dimensional
//! reference.
//!
//! Sites are indexed row-major (`index = y * extent_x + x`). Every link is a
//! `(tail site, direction)` pair oriented along `+x` or `+y`, including the
//! links that wrap around a periodic `y` boundary. Links are numbered in site
//! order, the `x` link of a site before its `y` link.
//!
//! The hexagonal lattice is embedded as a brick wall: every site has its two
//! horizontal neighbours, and a vertical link joins `(x, y)` to `(x, y + 1)`
//! whenever `x + y` is odd. Even sites (`x + y` even) form the A sublattice
//! and odd sites the B sublattice. A hexagon is a 2x1 brick whose lower left
//! corner is an odd site. Its links are labelled in counter-clockwise order:
//!
//! ```text
//!   (x,y+1) --5-- (x+1,y+1) --4-- (x+2,y+1)
//!      |                              |
//!      6                              3
//!      |                              |
//!   (x,y)  --1--  (x+1,y)   --2-- (x+2,y)
//! ```
//!
//! Links 1, 2, 3 point along the traversal (raising factors) and 4, 5, 6
//! against it (lowering factors).

use std::collections::VecDeque;
use std::fmt;

use crate::error::LatticeError;

/// Maximum number of sites or links a lattice may carry; configurations are
/// packed into 128-bit words.
pub const MAX_PACKED_BITS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Geometry {
    Square,
    Hexagonal,
    /// Open one-dimensional chain (no plaquettes).
    Chain,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Geometry::Square => "square",
            Geometry::Hexagonal => "hexagonal",
            Geometry::Chain => "chain",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Periodic along `y`, open along `x`.
    CylinderPeriodicY,
    Open,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::CylinderPeriodicY => f.write_str("cylinder_periodic_y"),
            Boundary::Open => f.write_str("open"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeSpec {
    pub geometry: Geometry,
    pub extent_x: usize,
    pub extent_y: usize,
    pub boundary: Boundary,
    /// Coordinate of the first column; shifts the parity pattern.
    pub origin_x: i64,
}

impl LatticeSpec {
    pub fn square(extent_x: usize, extent_y: usize, boundary: Boundary) -> Self {
        Self { geometry: Geometry::Square, extent_x, extent_y, boundary, origin_x: 0 }
    }

    pub fn hexagonal(extent_x: usize, extent_y: usize, boundary: Boundary) -> Self {
        Self { geometry: Geometry::Hexagonal, extent_x, extent_y, boundary, origin_x: 0 }
    }

    /// Open chain of `sites` sites whose first site sits at `x = origin_x`.
    pub fn chain(sites: usize, origin_x: i64) -> Self {
        Self { geometry: Geometry::Chain, extent_x: sites, extent_y: 1, boundary: Boundary::Open, origin_x }
    }

    fn validate(&self) -> Result<(), LatticeError> {
        let min_y = if self.geometry == Geometry::Chain { 1 } else { 2 };
        if self.extent_x < 2 || self.extent_y < min_y {
            return Err(LatticeError::TooSmall { geometry: self.geometry, extent_x: self.extent_x, extent_y: self.extent_y });
        }
        if self.geometry == Geometry::Chain && self.extent_y != 1 {
            return Err(LatticeError::Incompatible("a chain has extent_y = 1".into()));
        }
        if self.boundary == Boundary::CylinderPeriodicY {
            if self.geometry == Geometry::Chain {
                return Err(LatticeError::Incompatible("a chain cannot be periodic".into()));
            }
            // Odd circumference breaks the bipartite staggering; 2 doubles links.
            if self.extent_y < 4 || !self.extent_y.is_multiple_of(2) {
                return Err(LatticeError::CylinderDoesNotTile { geometry: self.geometry, extent_y: self.extent_y });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub x: i64,
    pub y: i64,
}

impl Coord {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn parity_even(&self) -> bool {
        (self.x + self.y).rem_euclid(2) == 0
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkRef(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlaquetteRef(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    /// Site the link leaves from.
    pub tail: usize,
    /// Site the link points to.
    pub head: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plaquette {
    /// Lower left corner.
    pub anchor: usize,
    /// Links in traversal order with `+1` for raising and `-1` for lowering.
    pub cycle: Vec<(LinkRef, i8)>,
}

/// Immutable lattice geometry.
#[derive(Debug, Clone)]
pub struct Lattice {
    spec: LatticeSpec,
    coords: Vec<Coord>,
    links: Vec<Link>,
    plaquettes: Vec<Plaquette>,
    /// Links touching each site, outgoing and incoming.
    incident: Vec<Vec<LinkRef>>,
}

impl Lattice {
    pub fn new(spec: LatticeSpec) -> Result<Self, LatticeError> {
        spec.validate()?;
        let (lx, ly) = (spec.extent_x, spec.extent_y);
        let periodic = spec.boundary == Boundary::CylinderPeriodicY;
        let coords: Vec<Coord> =
            (0..ly).flat_map(|y| (0..lx).map(move |x| Coord::new(spec.origin_x + x as i64, y as i64))).collect();
        if coords.len() > MAX_PACKED_BITS {
            return Err(LatticeError::TooManyBits { what: "sites", count: coords.len() });
        }
        let index = |x: usize, y: usize| y * lx + x;

        let has_vertical = |x: usize, y: usize| -> bool {
            match spec.geometry {
                Geometry::Square => true,
                Geometry::Hexagonal => !coords[index(x, y)].parity_even(),
                Geometry::Chain => false,
            }
        };

        let mut links = Vec::new();
        let mut link_at = std::collections::HashMap::new();
        for y in 0..ly {
            for x in 0..lx {
                let tail = index(x, y);
                if x + 1 < lx {
                    link_at.insert((tail, Direction::X), LinkRef(links.len()));
                    links.push(Link { tail, head: index(x + 1, y), direction: Direction::X });
                }
                if has_vertical(x, y) && (y + 1 < ly || periodic) {
                    let head = index(x, (y + 1) % ly);
                    link_at.insert((tail, Direction::Y), LinkRef(links.len()));
                    links.push(Link { tail, head, direction: Direction::Y });
                }
            }
        }
        if links.len() > MAX_PACKED_BITS {
            return Err(LatticeError::TooManyBits { what: "links", count: links.len() });
        }

        let mut plaquettes = Vec::new();
        let rows = if periodic { ly } else { ly - 1 };
        for y in 0..rows {
            let up = (y + 1) % ly;
            for x in 0..lx {
                let l = |tx: usize, ty: usize, d: Direction| link_at.get(&(index(tx, ty), d)).copied();
                let cycle = match spec.geometry {
                    Geometry::Square if x + 1 < lx => vec![
                        (l(x, y, Direction::X), 1),
                        (l(x + 1, y, Direction::Y), 1),
                        (l(x, up, Direction::X), -1),
                        (l(x, y, Direction::Y), -1),
                    ],
                    Geometry::Hexagonal if x + 2 < lx && has_vertical(x, y) => vec![
                        (l(x, y, Direction::X), 1),
                        (l(x + 1, y, Direction::X), 1),
                        (l(x + 2, y, Direction::Y), 1),
                        (l(x + 1, up, Direction::X), -1),
                        (l(x, up, Direction::X), -1),
                        (l(x, y, Direction::Y), -1),
                    ],
                    _ => continue,
                };
                let cycle: Option<Vec<(LinkRef, i8)>> = cycle.into_iter().map(|(link, s)| link.map(|l| (l, s))).collect();
                let cycle = cycle.expect("plaquette links exist by construction");
                plaquettes.push(Plaquette { anchor: index(x, y), cycle });
            }
        }

        let mut incident = vec![Vec::new(); coords.len()];
        for (i, link) in links.iter().enumerate() {
            incident[link.tail].push(LinkRef(i));
            incident[link.head].push(LinkRef(i));
        }

        Ok(Self { spec, coords, links, plaquettes, incident })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn geometry(&self) -> Geometry {
        self.spec.geometry
    }

    pub fn num_sites(&self) -> usize {
        self.coords.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn num_plaquettes(&self) -> usize {
        self.plaquettes.len()
    }

    pub fn coord(&self, site: usize) -> Coord {
        self.coords[site]
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    /// Site index at the given coordinate, if it lies on the lattice.
    pub fn site_at(&self, c: Coord) -> Option<usize> {
        let x = c.x - self.spec.origin_x;
        let mut y = c.y;
        if self.spec.boundary == Boundary::CylinderPeriodicY {
            y = y.rem_euclid(self.spec.extent_y as i64);
        }
        if x < 0 || y < 0 || x >= self.spec.extent_x as i64 || y >= self.spec.extent_y as i64 {
            return None;
        }
        Some(y as usize * self.spec.extent_x + x as usize)
    }

    pub fn link(&self, l: LinkRef) -> &Link {
        &self.links[l.0]
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// The link leaving `site` along `direction`, if present.
    pub fn link_from(&self, site: usize, direction: Direction) -> Option<LinkRef> {
        self.incident[site].iter().copied().find(|&l| self.links[l.0].tail == site && self.links[l.0].direction == direction)
    }

    /// The link joining two sites, in either orientation.
    pub fn link_between(&self, a: usize, b: usize) -> Option<LinkRef> {
        self.incident[a].iter().copied().find(|&l| {
            let link = &self.links[l.0];
            (link.tail == a && link.head == b) || (link.tail == b && link.head == a)
        })
    }

    pub fn incident_links(&self, site: usize) -> &[LinkRef] {
        &self.incident[site]
    }

    pub fn plaquette(&self, p: PlaquetteRef) -> &Plaquette {
        &self.plaquettes[p.0]
    }

    pub fn plaquettes(&self) -> &[Plaquette] {
        &self.plaquettes
    }

    /// Ordered `(link, orientation)` list around a plaquette.
    pub fn plaquette_cycle(&self, p: PlaquetteRef) -> &[(LinkRef, i8)] {
        &self.plaquettes[p.0].cycle
    }

    /// Sites visited by a plaquette cycle, starting at its anchor.
    pub fn plaquette_sites(&self, p: PlaquetteRef) -> Vec<usize> {
        self.plaquettes[p.0]
            .cycle
            .iter()
            .map(|&(l, s)| {
                let link = &self.links[l.0];
                if s > 0 {
                    link.tail
                } else {
                    link.head
                }
            })
            .collect()
    }

    /// Sublattice sign: `(-1)^(x+y)` on the square lattice and chain, `+1` on
    /// A and `-1` on B for the hexagonal lattice. Also the mass staggering.
    pub fn parity(&self, site: usize) -> i8 {
        if self.coords[site].parity_even() {
            1
        } else {
            -1
        }
    }

    pub fn is_even(&self, site: usize) -> bool {
        self.parity(site) == 1
    }

    pub fn mass_sign(&self, site: usize) -> i8 {
        self.parity(site)
    }

    /// Hopping staggering: `+1` on `x` links and `(-1)^x` on `y` links of the
    /// square lattice; `+1` everywhere on the hexagonal lattice and chain.
    pub fn hop_sign(&self, l: LinkRef) -> i8 {
        let link = &self.links[l.0];
        match (self.spec.geometry, link.direction) {
            (Geometry::Square, Direction::Y) => {
                if self.coords[link.tail].x.rem_euclid(2) == 0 {
                    1
                } else {
                    -1
                }
            }
            _ => 1,
        }
    }

    /// Shortest path length on the link graph.
    pub fn manhattan_distance(&self, a: usize, b: usize) -> usize {
        if a == b {
            return 0;
        }
        let mut dist = vec![usize::MAX; self.num_sites()];
        let mut queue = VecDeque::from([a]);
        dist[a] = 0;
        while let Some(s) = queue.pop_front() {
            for &l in &self.incident[s] {
                let link = &self.links[l.0];
                let t = if link.tail == s { link.head } else { link.tail };
                if dist[t] == usize::MAX {
                    dist[t] = dist[s] + 1;
                    if t == b {
                        return dist[t];
                    }
                    queue.push_back(t);
                }
            }
        }
        usize::MAX
    }

    pub fn is_connected(&self) -> bool {
        (1..self.num_sites()).all(|s| self.manhattan_distance(0, s) != usize::MAX)
    }

    /// Human-readable boundary convention for run metadata.
    pub fn boundary_note(&self) -> String {
        match (self.spec.geometry, self.spec.boundary) {
            (Geometry::Chain, _) => "open chain".into(),
            (g, Boundary::CylinderPeriodicY) => {
                format!("{g} cylinder: periodic along y, open along x")
            }
            (g, Boundary::Open) => format!("{g} open patch"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(lx: usize, ly: usize, b: Boundary) -> Lattice {
        Lattice::new(LatticeSpec::square(lx, ly, b)).unwrap()
    }

    /// Counts by walking the coordinate grid directly.
    fn count_square(lx: usize, ly: usize, periodic: bool) -> (usize, usize, usize) {
        let mut x_links = 0;
        let mut y_links = 0;
        let mut plaqs = 0;
        for y in 0..ly {
            for x in 0..lx {
                if x + 1 < lx {
                    x_links += 1;
                }
                if y + 1 < ly || periodic {
                    y_links += 1;
                }
                if x + 1 < lx && (y + 1 < ly || periodic) {
                    plaqs += 1;
                }
            }
        }
        (lx * ly, x_links + y_links, plaqs)
    }

    #[test]
    fn square_cylinder_counts() {
        let lat = sq(7, 6, Boundary::CylinderPeriodicY);
        let expected = count_square(7, 6, true);
        assert_eq!((lat.num_sites(), lat.num_links(), lat.num_plaquettes()), expected);
        assert_eq!(expected, (42, 78, 36));
        let x_links = lat.links().iter().filter(|l| l.direction == Direction::X).count();
        assert_eq!(x_links, 36);
    }

    #[test]
    fn square_single_plaquette() {
        let lat = sq(2, 2, Boundary::Open);
        assert_eq!((lat.num_sites(), lat.num_links(), lat.num_plaquettes()), (4, 4, 1));
    }

    #[test]
    fn hex_single_hexagon() {
        // shifted so the lower left corner is a B site
        let spec = LatticeSpec { origin_x: 1, ..LatticeSpec::hexagonal(3, 2, Boundary::Open) };
        let lat = Lattice::new(spec).unwrap();
        assert_eq!((lat.num_sites(), lat.num_links(), lat.num_plaquettes()), (6, 6, 1));
        let cycle = lat.plaquette_cycle(PlaquetteRef(0));
        let signs: Vec<i8> = cycle.iter().map(|&(_, s)| s).collect();
        assert_eq!(signs, vec![1, 1, 1, -1, -1, -1]);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(Lattice::new(LatticeSpec::square(1, 4, Boundary::Open)).is_err());
        assert!(Lattice::new(LatticeSpec::hexagonal(6, 5, Boundary::CylinderPeriodicY)).is_err());
        assert!(Lattice::new(LatticeSpec::square(4, 2, Boundary::CylinderPeriodicY)).is_err());
        assert!(Lattice::new(LatticeSpec::square(12, 12, Boundary::Open)).is_err());
    }

    #[test]
    fn staggering_signs() {
        let lat = sq(7, 6, Boundary::CylinderPeriodicY);
        let s00 = lat.site_at(Coord::new(0, 0)).unwrap();
        let s10 = lat.site_at(Coord::new(1, 0)).unwrap();
        assert_eq!(lat.mass_sign(s00), 1);
        assert_eq!(lat.mass_sign(s10), -1);
        let y_link = lat.link_from(s10, Direction::Y).unwrap();
        assert_eq!(lat.hop_sign(y_link), -1);
        let x_link = lat.link_from(s10, Direction::X).unwrap();
        assert_eq!(lat.hop_sign(x_link), 1);
    }

    #[test]
    fn square_plaquette_orientation() {
        let lat = sq(3, 3, Boundary::Open);
        let cycle = lat.plaquette_cycle(PlaquetteRef(0));
        let signs: Vec<i8> = cycle.iter().map(|&(_, s)| s).collect();
        assert_eq!(signs, vec![1, 1, -1, -1]);
        let origin = lat.site_at(Coord::new(0, 0)).unwrap();
        assert_eq!(cycle[0].0, lat.link_from(origin, Direction::X).unwrap());
        assert_eq!(cycle[3].0, lat.link_from(origin, Direction::Y).unwrap());
    }

    #[test]
    fn distances() {
        let lat = sq(7, 6, Boundary::Open);
        let a = lat.site_at(Coord::new(0, 0)).unwrap();
        let b = lat.site_at(Coord::new(4, 3)).unwrap();
        assert_eq!(lat.manhattan_distance(a, b), 7);
        assert_eq!(lat.manhattan_distance(b, a), 7);
        assert_eq!(lat.manhattan_distance(a, a), 0);
        let hex = Lattice::new(LatticeSpec::hexagonal(6, 4, Boundary::CylinderPeriodicY)).unwrap();
        for link in hex.links() {
            assert_eq!(hex.manhattan_distance(link.tail, link.head), 1);
        }
    }

    fn all_lattices() -> Vec<Lattice> {
        let mut out = Vec::new();
        for &(lx, ly) in &[(2, 2), (3, 2), (4, 3), (5, 4), (7, 6), (6, 4)] {
            out.push(sq(lx, ly, Boundary::Open));
            if ly % 2 == 0 && ly >= 4 {
                out.push(sq(lx, ly, Boundary::CylinderPeriodicY));
            }
        }
        for &(lx, ly) in &[(3, 2), (5, 3), (8, 4), (6, 6)] {
            out.push(Lattice::new(LatticeSpec::hexagonal(lx, ly, Boundary::Open)).unwrap());
            if ly % 2 == 0 && ly >= 4 {
                out.push(Lattice::new(LatticeSpec::hexagonal(lx, ly, Boundary::CylinderPeriodicY)).unwrap());
            }
        }
        out.push(Lattice::new(LatticeSpec::chain(8, 1)).unwrap());
        out
    }

    #[test]
    fn plaquettes_are_closed_simple_cycles() {
        for lat in all_lattices() {
            let len = match lat.geometry() {
                Geometry::Square => 4,
                Geometry::Hexagonal => 6,
                Geometry::Chain => 0,
            };
            let mut uses = vec![0usize; lat.num_links()];
            for (i, p) in lat.plaquettes().iter().enumerate() {
                assert_eq!(p.cycle.len(), len);
                // each step ends where the next begins
                let sites = lat.plaquette_sites(PlaquetteRef(i));
                for k in 0..len {
                    let (l, s) = p.cycle[k];
                    let link = lat.link(l);
                    let (from, to) = if s > 0 { (link.tail, link.head) } else { (link.head, link.tail) };
                    assert_eq!(from, sites[k]);
                    assert_eq!(to, sites[(k + 1) % len]);
                }
                let mut ls: Vec<_> = p.cycle.iter().map(|c| c.0).collect();
                ls.sort();
                ls.dedup();
                assert_eq!(ls.len(), len);
                for l in ls {
                    uses[l.0] += 1;
                }
            }
            assert!(uses.iter().all(|&u| u <= 2));
        }
    }

    #[test]
    fn bipartite_and_connected() {
        for lat in all_lattices() {
            for link in lat.links() {
                assert_eq!(lat.mass_sign(link.tail) * lat.mass_sign(link.head), -1);
            }
            assert!(lat.is_connected());
        }
    }

    #[test]
    fn cylinder_wrap_gives_every_site_a_y_neighbour() {
        let lat = sq(5, 4, Boundary::CylinderPeriodicY);
        for s in 0..lat.num_sites() {
            assert!(lat.link_from(s, Direction::Y).is_some());
        }
        let hex = Lattice::new(LatticeSpec::hexagonal(6, 4, Boundary::CylinderPeriodicY)).unwrap();
        for s in 0..hex.num_sites() {
            assert_eq!(hex.incident_links(s).iter().filter(|&&l| hex.link(l).direction == Direction::Y).count(), 1);
        }
    }

    #[test]
    fn plaquette_incidence_count() {
        // interior links are shared by two plaquettes, boundary links by one
        let lat = sq(5, 4, Boundary::Open);
        let total: usize = lat.plaquettes().iter().map(|p| p.cycle.len()).sum();
        let interior_x = 4 * 2;
        let interior_y = 3 * 3;
        let boundary = 4 * 2 + 3 * 2;
        assert_eq!(total, 2 * (interior_x + interior_y) + boundary);
    }
}
