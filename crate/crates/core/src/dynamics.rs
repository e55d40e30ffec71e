//! Exact time evolution and the string observables.
//!
//! Dense operators are exponentiated through one eigendecomposition. Sparse
//! operators use short-iterate Lanczos steps with full reorthogonalization;
//! a step is accepted when `beta_m |[exp(-i T dt) e_1]_m|` is below the
//! tolerance and halved otherwise.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use num_traits::Zero;

use crate::basis::{z2_vertex_eigenvalue, BasisConfig, ChargeLayout};
use crate::error::DynamicsError;
use crate::lattice::Lattice;
use crate::models::{DenseOperator, SparseOperator};

pub const DEFAULT_KRYLOV_TOL: f64 = 1e-10;
pub const KRYLOV_DIM: usize = 30;
pub const MAX_SUBDIVISIONS: u32 = 40;

/// Anything that can act as `y = H x` for a Hermitian `H`.
pub trait HermitianOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
}

impl HermitianOperator for SparseOperator {
    fn dim(&self) -> usize {
        SparseOperator::dim(self)
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        SparseOperator::apply(self, x, y)
    }
}

impl HermitianOperator for DenseOperator {
    fn dim(&self) -> usize {
        DenseOperator::dim(self)
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        DenseOperator::apply(self, x, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

impl StateVector {
    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut amps = vec![Complex64::zero(); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { amps }
    }

    /// Normalizes the given amplitudes.
    pub fn new(amps: Vec<Complex64>) -> Self {
        let mut s = Self { amps };
        s.normalize();
        s
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        dot(&self.amps, &other.amps)
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }

    pub fn expectation(&self, h: &dyn HermitianOperator) -> f64 {
        let mut y = vec![Complex64::zero(); self.dim()];
        h.apply(&self.amps, &mut y);
        dot(&self.amps, &y).re
    }

    pub fn max_deviation(&self, other: &StateVector) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// Uniform grid `t_k = k * t_max / (n_points - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_points: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_points: usize) -> Result<Self, DynamicsError> {
        if !t_max.is_finite() || t_max <= 0.0 {
            return Err(DynamicsError::BadGrid(format!("t_max must be positive and finite, got {t_max}")));
        }
        if n_points < 2 {
            return Err(DynamicsError::BadGrid(format!("n_points must be at least 2, got {n_points}")));
        }
        Ok(Self { t_max, n_points })
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.t_max / (self.n_points - 1) as f64;
        (0..self.n_points).map(|k| if k + 1 == self.n_points { self.t_max } else { k as f64 * dt }).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

fn check_dim(h: usize, psi: &StateVector) -> Result<(), DynamicsError> {
    if h != psi.dim() {
        return Err(DynamicsError::DimensionMismatch { state: psi.dim(), operator: h });
    }
    Ok(())
}

/// Spectral propagator of a dense Hermitian operator.
pub struct DensePropagator {
    vectors: DMatrix<Complex64>,
    values: DVector<f64>,
}

impl DensePropagator {
    pub fn new(h: &DenseOperator) -> Result<Self, DynamicsError> {
        let err = h.hermiticity_error();
        if err > crate::models::DENSE_HERMITIAN_TOL {
            return Err(DynamicsError::NotHermitian(err));
        }
        let eig = SymmetricEigen::new(h.matrix().clone());
        Ok(Self { vectors: eig.eigenvectors, values: eig.eigenvalues })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    /// Coefficients of `psi` in the eigenbasis.
    pub fn project(&self, psi: &StateVector) -> DVector<Complex64> {
        self.vectors.ad_mul(&DVector::from_column_slice(psi.amplitudes()))
    }

    /// `exp(-i H t)` applied to the state with eigenbasis coefficients `c`.
    pub fn at(&self, c: &DVector<Complex64>, t: f64) -> StateVector {
        if t == 0.0 {
            return StateVector { amps: (&self.vectors * c).iter().copied().collect() };
        }
        let phased = DVector::from_iterator(
            c.len(),
            c.iter().zip(self.values.iter()).map(|(&a, &e)| a * Complex64::from_polar(1.0, -e * t)),
        );
        StateVector { amps: (&self.vectors * phased).iter().copied().collect() }
    }
}

/// Dense evolution, calling `each(k, t_k, psi(t_k))` on every grid point.
pub fn evolve_dense_each(
    h: &DenseOperator,
    psi0: &StateVector,
    grid: &TimeGrid,
    mut each: impl FnMut(usize, f64, &StateVector),
) -> Result<(), DynamicsError> {
    check_dim(h.dim(), psi0)?;
    let prop = DensePropagator::new(h)?;
    let c = prop.project(psi0);
    for (k, t) in grid.times().into_iter().enumerate() {
        if k == 0 {
            each(k, t, psi0);
        } else {
            each(k, t, &prop.at(&c, t));
        }
    }
    Ok(())
}

pub fn evolve_dense(h: &DenseOperator, psi0: &StateVector, grid: &TimeGrid) -> Result<Trajectory, DynamicsError> {
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new() };
    evolve_dense_each(h, psi0, grid, |_, t, s| {
        traj.times.push(t);
        traj.states.push(s.clone());
    })?;
    Ok(traj)
}

/// Lanczos workspace reused across steps.
struct Lanczos {
    basis: Vec<Vec<Complex64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Norm of the residual after the last basis vector; 0 once the space
    /// is invariant.
    beta_m: f64,
    nrm: f64,
    work: Vec<Complex64>,
}

impl Lanczos {
    fn new(dim: usize) -> Self {
        Self { basis: Vec::new(), alpha: Vec::new(), beta: Vec::new(), beta_m: 0.0, nrm: 0.0, work: vec![Complex64::zero(); dim] }
    }

    /// Grows the Krylov space of `psi` until a step of `dt` meets `tol` or
    /// `m_max` vectors are reached.
    fn build(&mut self, h: &dyn HermitianOperator, psi: &[Complex64], m_max: usize, dt: f64, tol: f64) {
        let n = psi.len();
        self.basis.clear();
        self.alpha.clear();
        self.beta.clear();
        self.nrm = norm(psi);
        self.basis.push(psi.iter().map(|a| a / self.nrm).collect());
        loop {
            let j = self.basis.len() - 1;
            h.apply(&self.basis[j], &mut self.work);
            self.alpha.push(dot(&self.basis[j], &self.work).re);
            // full reorthogonalization, twice
            for _ in 0..2 {
                for v in &self.basis {
                    let c = dot(v, &self.work);
                    for i in 0..n {
                        self.work[i] -= c * v[i];
                    }
                }
            }
            let b = norm(&self.work);
            let scale = self.alpha.iter().fold(1.0f64, |m, a| m.max(a.abs()));
            self.beta_m = if b <= 1e-14 * scale || self.basis.len() == n { 0.0 } else { b };
            if self.beta_m == 0.0 || self.basis.len() >= m_max || self.coefficients(dt).1 <= tol {
                return;
            }
            self.beta.push(b);
            self.basis.push(self.work.iter().map(|w| w / b).collect());
        }
    }

    /// `exp(-i T dt) e_1` scaled by the input norm, with its error estimate.
    fn coefficients(&self, dt: f64) -> (Vec<Complex64>, f64) {
        let m = self.alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = self.alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = self.beta[i];
                t[(i + 1, i)] = self.beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let q = &eig.eigenvectors;
        let y: Vec<Complex64> = (0..m)
            .map(|i| {
                (0..m).map(|k| q[(i, k)] * q[(0, k)] * Complex64::from_polar(1.0, -eig.eigenvalues[k] * dt)).sum::<Complex64>()
                    * self.nrm
            })
            .collect();
        let error = self.beta_m * y[m - 1].norm();
        (y, error)
    }

    fn combine(&self, y: &[Complex64]) -> Vec<Complex64> {
        let n = self.basis[0].len();
        let mut state = vec![Complex64::zero(); n];
        for (v, &c) in self.basis.iter().zip(y) {
            for i in 0..n {
                state[i] += c * v[i];
            }
        }
        state
    }
}

/// Adaptive Krylov evolution, calling `each` on every grid point.
pub fn evolve_krylov_each(
    h: &dyn HermitianOperator,
    psi0: &StateVector,
    grid: &TimeGrid,
    tol: f64,
    mut each: impl FnMut(usize, f64, &StateVector),
) -> Result<(), DynamicsError> {
    check_dim(h.dim(), psi0)?;
    let times = grid.times();
    let mut psi = psi0.clone();
    let mut lz = Lanczos::new(psi.dim());
    each(0, times[0], &psi);
    let mut dt_try = times[1] - times[0];
    for k in 1..times.len() {
        let interval = times[k] - times[k - 1];
        let mut done = 0.0;
        while done < interval {
            let remaining = interval - done;
            // a step within rounding of the remainder finishes the interval
            let mut dt = if dt_try >= remaining * (1.0 - 1e-9) { remaining } else { dt_try };
            lz.build(h, psi.amplitudes(), KRYLOV_DIM, dt, tol);
            let mut halvings = 0;
            let y = loop {
                let (y, error) = lz.coefficients(dt);
                if error <= tol {
                    break y;
                }
                halvings += 1;
                if halvings > MAX_SUBDIVISIONS {
                    return Err(DynamicsError::NoConvergence {
                        time: times[k - 1] + done,
                        dt,
                        estimate: error,
                        subdivisions: halvings - 1,
                    });
                }
                dt *= 0.5;
            };
            psi = StateVector::new(lz.combine(&y));
            done = if dt == remaining { interval } else { done + dt };
            dt_try = if halvings == 0 { (2.0 * dt).min(interval) } else { dt };
        }
        each(k, times[k], &psi);
    }
    Ok(())
}

pub fn evolve_krylov(
    h: &dyn HermitianOperator,
    psi0: &StateVector,
    grid: &TimeGrid,
    tol: f64,
) -> Result<Trajectory, DynamicsError> {
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new() };
    evolve_krylov_each(h, psi0, grid, tol, |_, t, s| {
        traj.times.push(t);
        traj.states.push(s.clone());
    })?;
    Ok(traj)
}

/// Patch occupation of a U(1) configuration: sites whose occupation differs
/// from the staggered vacuum.
pub fn staggered_occupation(lattice: &Lattice, config: &BasisConfig, patch: &[usize]) -> u32 {
    patch.iter().filter(|&&s| config.occupied(s) == lattice.is_even(s)).count() as u32
}

/// Z2 analogue: patch vertices whose `A_r` differs from the charge layout.
pub fn z2_occupation(lattice: &Lattice, config: &BasisConfig, patch: &[usize], layout: &ChargeLayout) -> u32 {
    patch.iter().filter(|&&s| z2_vertex_eigenvalue(lattice, config, s) != layout.z2_target(s)).count() as u32
}

/// What to measure on each state: the initial basis state, the other bare
/// string configurations and a diagonal occupation per basis state.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub initial: usize,
    pub other_strings: Vec<usize>,
    pub occupation: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableRow {
    pub t: f64,
    pub fidelity: f64,
    pub overlap_other_strings: f64,
    pub matter_occupation: f64,
    pub energy: f64,
    pub norm_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ObservableSeries {
    pub rows: Vec<ObservableRow>,
}

impl Measurement {
    pub fn sample(&self, h: &dyn HermitianOperator, t: f64, psi: &StateVector) -> Result<ObservableRow, DynamicsError> {
        check_dim(self.occupation.len(), psi)?;
        let fidelity = psi.probability(self.initial);
        let overlap_other_strings = self.other_strings.iter().map(|&i| psi.probability(i)).sum();
        let matter_occupation = psi.amplitudes().iter().zip(&self.occupation).map(|(a, n)| a.norm_sqr() * n).sum();
        Ok(ObservableRow {
            t,
            fidelity,
            overlap_other_strings,
            matter_occupation,
            energy: psi.expectation(h),
            norm_error: (psi.norm() - 1.0).abs(),
        })
    }
}

/// Observables along a stored trajectory.
pub fn measure(h: &dyn HermitianOperator, traj: &Trajectory, m: &Measurement) -> Result<ObservableSeries, DynamicsError> {
    let rows = traj.times.iter().zip(&traj.states).map(|(&t, s)| m.sample(h, t, s)).collect::<Result<_, _>>()?;
    Ok(ObservableSeries { rows })
}

impl ObservableSeries {
    pub fn column(&self, f: impl Fn(&ObservableRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    /// Trapezoidal time average over the whole series.
    pub fn time_average(&self, f: impl Fn(&ObservableRow) -> f64) -> f64 {
        let r = &self.rows;
        if r.len() < 2 {
            return r.first().map(&f).unwrap_or(0.0);
        }
        let area: f64 = r.windows(2).map(|w| 0.5 * (f(&w[0]) + f(&w[1])) * (w[1].t - w[0].t)).sum();
        area / (r.last().unwrap().t - r[0].t)
    }

    /// Largest `|E(t) - E(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.rows.first().map(|r| r.energy).unwrap_or(0.0);
        self.rows.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max)
    }

    pub fn max_norm_error(&self) -> f64 {
        self.rows.iter().map(|r| r.norm_error).fold(0.0, f64::max)
    }
}
