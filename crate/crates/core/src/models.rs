//! Hamiltonians in a sector basis.
//!
//! U(1) link model (square, hexagonal and chain):
//!
//! ```text
//! H = -kappa sum s_link (phi_a^dag U phi_b + h.c.) + m sum s_j n_j
//!     + g sum S^z - J sum (U_plaq + h.c.)
//! ```
//!
//! with the link running `a -> b` and the plaquette product taken around the
//! cycle from [`Lattice::plaquette_cycle`]. Z2 gauge theory, in the
//! `sigma^x` basis:
//!
//! ```text
//! H = -m sum q_r A_r - J sum B_p - kappa sum sigma^z - g sum sigma^x
//! ```
//!
//! where `q_r = -1` on a static charge and `+1` elsewhere, so a string
//! ending on the charges is free of Z2 particles.
//!
//! All matrix elements are real. Diagonal energies are kept as integer
//! combinations of `m/2` and `g/2` ([`EnergyTerms`]) so resonance checks can
//! be exact.

use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVectorView, DVectorViewMut};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;

use crate::basis::{z2_vertex_eigenvalue, BasisConfig, ChargeLayout, ModelKind, SectorBasis};
use crate::error::{BasisError, LatticeError, Result};
use crate::lattice::{Geometry, Lattice, LatticeSpec, LinkRef, PlaquetteRef};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings {
    pub kappa: f64,
    pub mass: f64,
    pub efield: f64,
    pub plaq: f64,
}

impl Couplings {
    pub fn new(kappa: f64, mass: f64, efield: f64, plaq: f64) -> Self {
        Self { kappa, mass, efield, plaq }
    }

    pub fn with_plaq(self, plaq: f64) -> Self {
        Self { plaq, ..self }
    }

    pub fn is_finite(&self) -> bool {
        [self.kappa, self.mass, self.efield, self.plaq].iter().all(|v| v.is_finite())
    }
}

/// Diagonal energy `(m * mass2 + g * field2) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EnergyTerms {
    pub mass2: i64,
    pub field2: i64,
}

impl EnergyTerms {
    pub fn value(&self, c: &Couplings) -> f64 {
        0.5 * (c.mass * self.mass2 as f64 + c.efield * self.field2 as f64)
    }

    /// The same energy evaluated on the exact binary values of `m` and `g`.
    pub fn exact(&self, c: &Couplings) -> BigRational {
        let m = BigRational::from_float(c.mass).expect("finite mass");
        let g = BigRational::from_float(c.efield).expect("finite field coupling");
        (m * BigRational::from_integer(self.mass2.into()) + g * BigRational::from_integer(self.field2.into()))
            / BigRational::from_integer(2.into())
    }

    pub fn minus(&self, other: &EnergyTerms) -> EnergyTerms {
        EnergyTerms { mass2: self.mass2 - other.mass2, field2: self.field2 - other.field2 }
    }
}

/// Row kernel shared by the sparse assembly, the minimal model and the
/// manifold search.
#[derive(Debug, Clone, Copy)]
pub struct GaugeHamiltonian<'a> {
    lattice: &'a Lattice,
    model: ModelKind,
    couplings: Couplings,
    charges: Option<&'a ChargeLayout>,
}

impl<'a> GaugeHamiltonian<'a> {
    pub fn new(lattice: &'a Lattice, model: ModelKind, couplings: Couplings) -> Self {
        Self { lattice, model, couplings, charges: None }
    }

    /// Static Z2 charges: the vertex term on a charged site becomes `-A_r`,
    /// so the charge costs nothing and cannot move. No effect on U(1).
    pub fn with_charges(self, layout: &'a ChargeLayout) -> Self {
        Self { charges: Some(layout), ..self }
    }

    pub fn lattice(&self) -> &'a Lattice {
        self.lattice
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    pub fn energy_terms(&self, c: &BasisConfig) -> EnergyTerms {
        let lat = self.lattice;
        match self.model {
            ModelKind::U1Qlm => {
                let mass2 = (0..lat.num_sites()).filter(|&s| c.occupied(s)).map(|s| 2 * lat.mass_sign(s) as i64).sum();
                let up = c.count_links() as i64;
                EnergyTerms { mass2, field2: 2 * up - lat.num_links() as i64 }
            }
            ModelKind::Z2 => {
                let q = |s| self.charges.map_or(1, |l| l.z2_target(s)) as i64;
                let a: i64 = (0..lat.num_sites()).map(|s| q(s) * z2_vertex_eigenvalue(lat, c, s) as i64).sum();
                let flipped = c.count_links() as i64;
                let sx = lat.num_links() as i64 - 2 * flipped;
                EnergyTerms { mass2: -2 * a, field2: -2 * sx }
            }
        }
    }

    pub fn diagonal(&self, c: &BasisConfig) -> f64 {
        self.energy_terms(c).value(&self.couplings)
    }

    /// Matter-link moves, with the hopping sign (before the `-kappa`).
    pub fn hops(&self, c: &BasisConfig, mut emit: impl FnMut(LinkRef, BasisConfig, i8)) {
        let lat = self.lattice;
        for (i, link) in lat.links().iter().enumerate() {
            let l = LinkRef(i);
            match self.model {
                ModelKind::U1Qlm => {
                    let (a, b) = (link.tail, link.head);
                    let up = c.link(l);
                    let (na, nb) = (c.occupied(a), c.occupied(b));
                    // phi_a^dag U phi_b raises the link; its conjugate lowers it
                    let forward = !up && !na && nb;
                    let backward = up && na && !nb;
                    if forward || backward {
                        let mut d = *c;
                        d.flip_link(l);
                        d.set_occupied(a, forward);
                        d.set_occupied(b, backward);
                        emit(l, d, lat.hop_sign(l));
                    }
                }
                ModelKind::Z2 => {
                    let mut d = *c;
                    d.flip_link(l);
                    emit(l, d, 1);
                }
            }
        }
    }

    /// Plaquette moves allowed from `c`.
    pub fn plaquette_flips(&self, c: &BasisConfig, mut emit: impl FnMut(PlaquetteRef, BasisConfig)) {
        let lat = self.lattice;
        for p in 0..lat.num_plaquettes() {
            let p = PlaquetteRef(p);
            let cycle = lat.plaquette_cycle(p);
            let mask = cycle.iter().fold(0u128, |m, &(l, _)| m | 1 << l.0);
            let flippable = match self.model {
                ModelKind::Z2 => true,
                ModelKind::U1Qlm => {
                    // U_plaq needs raised links down and lowered links up;
                    // its conjugate the reverse
                    let raise_ok = cycle.iter().all(|&(l, s)| c.link(l) == (s < 0));
                    let lower_ok = cycle.iter().all(|&(l, s)| c.link(l) == (s > 0));
                    raise_ok || lower_ok
                }
            };
            if flippable {
                emit(p, c.with_flipped_links(mask));
            }
        }
    }

    pub fn flippable_plaquettes(&self, c: &BasisConfig) -> Vec<PlaquetteRef> {
        let mut out = Vec::new();
        self.plaquette_flips(c, |p, _| out.push(p));
        out
    }

    /// All off-diagonal elements of the row belonging to `c`.
    pub fn off_diagonal(&self, c: &BasisConfig, mut emit: impl FnMut(BasisConfig, f64)) {
        let Couplings { kappa, plaq, .. } = self.couplings;
        if kappa != 0.0 {
            self.hops(c, |_, d, s| emit(d, -kappa * s as f64));
        }
        if plaq != 0.0 {
            self.plaquette_flips(c, |_, d| emit(d, -plaq));
        }
    }
}

/// Sparse Hermitian operator in CSR layout over a sector basis.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    basis: Arc<SectorBasis>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
    diag: Vec<f64>,
}

impl SparseOperator {
    /// Assembles `kernel` over `basis`, one row per configuration.
    pub fn assemble(kernel: &GaugeHamiltonian<'_>, basis: Arc<SectorBasis>) -> Result<Self> {
        basis.check_lattice(kernel.lattice())?;
        if basis.model() != kernel.model() {
            return Err(BasisError::ModelMismatch { expected: basis.model().name(), found: kernel.model().name() }.into());
        }
        let rows: Vec<std::result::Result<(f64, Vec<(usize, Complex64)>), BasisError>> = basis
            .configs()
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let d = kernel.diagonal(c);
                let mut row: Vec<(usize, Complex64)> = Vec::new();
                let mut missing = false;
                kernel.off_diagonal(c, |target, amp| match basis.index_of(&target) {
                    Some(j) => row.push((j, Complex64::new(amp, 0.0))),
                    None => missing = true,
                });
                if missing {
                    return Err(BasisError::NotInBasis);
                }
                if d != 0.0 {
                    row.push((i, Complex64::new(d, 0.0)));
                }
                row.sort_by_key(|&(j, _)| j);
                // several moves can land on one partner (e.g. a Z2 plaquette
                // of a two-site-wide cylinder); sum them
                row.dedup_by(|b, a| {
                    if a.0 == b.0 {
                        a.1 += b.1;
                        true
                    } else {
                        false
                    }
                });
                Ok((d, row))
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(basis.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = Vec::with_capacity(basis.len());
        row_ptr.push(0);
        for r in rows {
            let (d, row) = r?;
            diag.push(d);
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { basis, row_ptr, cols, vals, diag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim()).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => Complex64::zero(),
        }
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, yi)| {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        });
    }

    /// Largest `|H_ij - conj(H_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        self.triplets().map(|(i, j, v)| (v - self.get(j, i).conj()).norm()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DenseOperator {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        DenseOperator { matrix: m }
    }

    /// Diagonal element for a configuration of the basis.
    pub fn diagonal_energy(&self, config: &BasisConfig) -> Result<f64> {
        let i = self.basis.index_of(config).ok_or(BasisError::NotInBasis)?;
        Ok(self.diag[i])
    }

    /// Triplet dump; see the README for the layout.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(OPERATOR_MAGIC)?;
        w.write_all(&OPERATOR_VERSION.to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        w.write_all(&(self.nnz() as u64).to_le_bytes())?;
        for (i, j, v) in self.triplets() {
            w.write_all(&(i as u64).to_le_bytes())?;
            w.write_all(&(j as u64).to_le_bytes())?;
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a triplet dump back onto `basis`.
    pub fn read_from<R: Read>(mut r: R, basis: Arc<SectorBasis>) -> std::result::Result<Self, BasisError> {
        let io = |e: std::io::Error| BasisError::Format(e.to_string());
        let mut b8 = [0u8; 8];
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b8).map_err(io)?;
        if &b8 != OPERATOR_MAGIC {
            return Err(BasisError::Format("bad operator magic".into()));
        }
        r.read_exact(&mut b4).map_err(io)?;
        if u32::from_le_bytes(b4) != OPERATOR_VERSION {
            return Err(BasisError::Format("unsupported operator version".into()));
        }
        r.read_exact(&mut b4).map_err(io)?;
        r.read_exact(&mut b8).map_err(io)?;
        let dim = u64::from_le_bytes(b8) as usize;
        if dim != basis.len() {
            return Err(BasisError::Format(format!("operator dimension {dim} != basis dimension {}", basis.len())));
        }
        r.read_exact(&mut b8).map_err(io)?;
        let nnz = u64::from_le_bytes(b8) as usize;
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        let mut diag = vec![0.0; dim];
        let mut last = None;
        for _ in 0..nnz {
            let mut read_u64 = || -> std::result::Result<u64, BasisError> {
                r.read_exact(&mut b8).map_err(io)?;
                Ok(u64::from_le_bytes(b8))
            };
            let i = read_u64()? as usize;
            let j = read_u64()? as usize;
            let re = f64::from_bits(read_u64()?);
            let im = f64::from_bits(read_u64()?);
            if i >= dim || j >= dim || last.is_some_and(|p| p >= (i, j)) {
                return Err(BasisError::Format("triplets out of range or order".into()));
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            cols.push(j);
            vals.push(Complex64::new(re, im));
            if i == j {
                diag[i] = re;
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { basis, row_ptr, cols, vals, diag })
    }
}

const OPERATOR_MAGIC: &[u8; 8] = b"GSOPER\0\0";
const OPERATOR_VERSION: u32 = 1;

/// Dense Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: DMatrix<Complex64>,
}

/// Elementwise Hermiticity tolerance for dense input.
pub const DENSE_HERMITIAN_TOL: f64 = 1e-12;

impl DenseOperator {
    pub fn new(matrix: DMatrix<Complex64>) -> std::result::Result<Self, crate::error::DynamicsError> {
        assert_eq!(matrix.nrows(), matrix.ncols(), "dense operator must be square");
        let op = Self { matrix };
        let err = op.hermiticity_error();
        if err > DENSE_HERMITIAN_TOL {
            return Err(crate::error::DynamicsError::NotHermitian(err));
        }
        Ok(op)
    }

    pub fn from_real(matrix: DMatrix<f64>) -> std::result::Result<Self, crate::error::DynamicsError> {
        Self::new(matrix.map(|v| Complex64::new(v, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.dim();
        let x = DVectorView::from_slice(x, n);
        let mut y = DVectorViewMut::from_slice(y, n);
        y.gemv(Complex64::new(1.0, 0.0), &self.matrix, &x, Complex64::zero());
    }
}

fn require_geometry(lattice: &Lattice, allowed: &[Geometry], builder: &str) -> Result<()> {
    if !allowed.contains(&lattice.geometry()) {
        return Err(LatticeError::Incompatible(format!("{builder} does not accept a {} lattice", lattice.geometry())).into());
    }
    Ok(())
}

/// U(1) link model on a square lattice.
pub fn build_u1_qlm(lattice: &Lattice, basis: Arc<SectorBasis>, c: Couplings) -> Result<SparseOperator> {
    require_geometry(lattice, &[Geometry::Square], "build_u1_qlm")?;
    SparseOperator::assemble(&GaugeHamiltonian::new(lattice, ModelKind::U1Qlm, c), basis)
}

/// U(1) link model on the hexagonal lattice.
pub fn build_u1_qlm_hex(lattice: &Lattice, basis: Arc<SectorBasis>, c: Couplings) -> Result<SparseOperator> {
    require_geometry(lattice, &[Geometry::Hexagonal], "build_u1_qlm_hex")?;
    SparseOperator::assemble(&GaugeHamiltonian::new(lattice, ModelKind::U1Qlm, c), basis)
}

/// Z2 gauge theory on the full link space of a square or hexagonal lattice,
/// with static charges from `layout` entering the vertex term.
pub fn build_z2(lattice: &Lattice, basis: Arc<SectorBasis>, layout: &ChargeLayout, c: Couplings) -> Result<SparseOperator> {
    require_geometry(lattice, &[Geometry::Square, Geometry::Hexagonal], "build_z2")?;
    SparseOperator::assemble(&GaugeHamiltonian::new(lattice, ModelKind::Z2, c).with_charges(layout), basis)
}

/// The chain used by [`build_qlm_1d`]: `sites` sites with site 0 odd.
pub fn qlm_1d_lattice(sites: usize) -> std::result::Result<Lattice, LatticeError> {
    Lattice::new(LatticeSpec::chain(sites, 1))
}

/// One-dimensional link model on an open chain of `sites` sites, enumerated
/// for `layout`. Returns the chain together with the operator.
pub fn build_qlm_1d(sites: usize, layout: &ChargeLayout, c: Couplings, cap: usize) -> Result<(Lattice, SparseOperator)> {
    let lattice = qlm_1d_lattice(sites)?;
    let basis = crate::basis::enumerate_sector(&lattice, layout, ModelKind::U1Qlm, cap)?;
    let op = SparseOperator::assemble(&GaugeHamiltonian::new(&lattice, ModelKind::U1Qlm, c), Arc::new(basis))?;
    Ok((lattice, op))
}

/// Diagonal matrix element of `op` on `config`.
pub fn diagonal_energy(op: &SparseOperator, config: &BasisConfig) -> Result<f64> {
    op.diagonal_energy(config)
}
