//! Exact simulation of confining strings in 2+1D lattice gauge theories.
//!
//! The crate builds gauge-invariant bases for the U(1) quantum link model on
//! square and hexagonal lattices and for the Z2 gauge theory, prepares string
//! states between static charges, and evolves them exactly.

pub mod basis;
pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod models;
pub mod strings;

pub use basis::{BasisConfig, ChargeLayout, ModelKind, SectorBasis};
pub use dynamics::{Measurement, ObservableRow, ObservableSeries, StateVector, TimeGrid, Trajectory};
pub use error::{Error, Result};
pub use lattice::{Boundary, Coord, Direction, Geometry, Lattice, LatticeSpec, LinkRef, PlaquetteRef};
pub use models::{Couplings, DenseOperator, EnergyTerms, GaugeHamiltonian, SparseOperator};
pub use strings::{BreakPattern, MinimalModel, MinimalModelBasis, StringPath, StringShape};
