use thiserror::Error;

use crate::lattice::{Coord, Geometry};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("{geometry} lattice of extent {extent_x}x{extent_y} is too small")]
    TooSmall { geometry: Geometry, extent_x: usize, extent_y: usize },
    #[error("{geometry} lattice cannot close into a cylinder of circumference {extent_y} (needs an even value >= 4)")]
    CylinderDoesNotTile { geometry: Geometry, extent_y: usize },
    #[error("lattice has {count} {what}, more than the 128 a packed configuration holds")]
    TooManyBits { what: &'static str, count: usize },
    #[error("incompatible lattice: {0}")]
    Incompatible(String),
    #[error("coordinate {0} is not on the lattice")]
    OffLattice(Coord),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BasisError {
    #[error("sector {what} {dimension} exceeds the cap of {cap}")]
    CapExceeded { what: &'static str, dimension: u128, cap: usize },
    #[error("basis was built for {basis_sites} sites/{basis_links} links, lattice has {lattice_sites}/{lattice_links}")]
    LatticeMismatch { basis_sites: usize, basis_links: usize, lattice_sites: usize, lattice_links: usize },
    #[error("basis was enumerated for model {expected}, not {found}")]
    ModelMismatch { expected: &'static str, found: &'static str },
    #[error("configuration is not a member of the basis")]
    NotInBasis,
    #[error("static charge {value} at site {site} is outside {{-1, 0, +1}}")]
    BadCharge { site: usize, value: i32 },
    #[error("malformed basis dump: {0}")]
    Format(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StringError {
    #[error("path violates Gauss's law at {}", fmt_coords(.sites))]
    GaussViolation { sites: Vec<Coord> },
    #[error("path of length {length} is not minimal (distance {distance})")]
    NotMinimal { length: usize, distance: usize },
    #[error("path steps between non-adjacent sites {0} and {1}")]
    NotAdjacent(Coord, Coord),
    #[error("path endpoints do not match the static charges")]
    EndpointMismatch,
    #[error("shape {shape} cannot connect {from} to {to}")]
    ShapeUnavailable { shape: &'static str, from: Coord, to: Coord },
    #[error("minimal-model dimension {dimension} exceeds the cap of {cap}")]
    CapExceeded { dimension: usize, cap: usize },
}

fn fmt_coords(sites: &[Coord]) -> String {
    sites.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("state has dimension {state}, operator {operator}")]
    DimensionMismatch { state: usize, operator: usize },
    #[error(
        "Krylov step failed to converge at t = {time}: error estimate {estimate:e} after {subdivisions} halvings (dt = {dt:e})"
    )]
    NoConvergence { time: f64, dt: f64, estimate: f64, subdivisions: u32 },
    #[error("invalid time grid: {0}")]
    BadGrid(String),
}

/// Crate-level error.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    String(#[from] StringError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
