//! Building, evolving and writing one scenario.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use gaugestring::basis::enumerate_sector;
use gaugestring::dynamics::{evolve_dense_each, evolve_krylov_each, staggered_occupation, z2_occupation, HermitianOperator};
use gaugestring::error::{BasisError, DynamicsError, StringError};
use gaugestring::strings::{
    build_minimal_model, build_string_state, enumerate_minimal_strings, enumerate_resonant_manifold, patch_sites,
};
use gaugestring::{
    ChargeLayout, Couplings, DenseOperator, Error, GaugeHamiltonian, Geometry, Lattice, LatticeSpec, Measurement,
    MinimalModelBasis, ModelKind, ObservableRow, SectorBasis, SparseOperator, StateVector, StringPath, TimeGrid,
};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error as ThisError;

use crate::config::{ConfigError, Job, ModelChoice, PropagatorChoice, Scenario};

pub const CSV_HEADER: &str = "t,fidelity,overlap_other_strings,matter_occupation,energy,norm_error";

/// Largest full-ED sector that `propagator = "dense"` will diagonalize.
const DENSE_FULL_ED_LIMIT: usize = 6000;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Cap(String),
    #[error("{0}")]
    NoConvergence(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Cap(_) => 4,
            CliError::NoConvergence(_) => 5,
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Lattice(_) => CliError::Infeasible(msg),
            Error::String(StringError::CapExceeded { .. }) | Error::Basis(BasisError::CapExceeded { .. }) => CliError::Cap(msg),
            Error::String(_) => CliError::Infeasible(msg),
            Error::Dynamics(DynamicsError::NoConvergence { .. }) => CliError::NoConvergence(msg),
            Error::Basis(_) | Error::Dynamics(_) => CliError::Other(msg),
        }
    }
}

fn lift<E: Into<Error>>(e: E) -> CliError {
    CliError::from(e.into())
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out_dir: Option<PathBuf>,
    /// Cap on the basis dimension; the library defaults apply when `None`.
    pub max_dim: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

impl Options {
    fn sector_cap(&self) -> usize {
        self.max_dim.unwrap_or(gaugestring::basis::DEFAULT_SECTOR_CAP)
    }

    fn minimal_cap(&self) -> usize {
        self.max_dim.unwrap_or(gaugestring::strings::DEFAULT_MINIMAL_CAP)
    }

    pub fn output_dir(&self, s: &Scenario) -> PathBuf {
        self.out_dir.clone().or_else(|| s.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."))
    }
}

fn model_kind(m: ModelChoice) -> ModelKind {
    match m {
        ModelChoice::Z2Square | ModelChoice::Z2Hex => ModelKind::Z2,
        _ => ModelKind::U1Qlm,
    }
}

/// Lattice, charges and the minimal strings shared by every sweep member.
pub struct Setup {
    pub lattice: Lattice,
    pub layout: ChargeLayout,
    pub kind: ModelKind,
    pub seed: StringPath,
    pub strings: Vec<StringPath>,
    pub patch: Vec<usize>,
    /// Full-ED sector, absent for the minimal model.
    pub sector: Option<Sector>,
}

pub struct Sector {
    pub basis: Arc<SectorBasis>,
    pub measurement: Measurement,
    pub cache: &'static str,
}

pub fn setup(s: &Scenario, opts: &Options) -> Result<Setup, CliError> {
    let spec = match s.geometry {
        Geometry::Chain => LatticeSpec::chain(s.extent_x, 1),
        g => LatticeSpec { geometry: g, extent_x: s.extent_x, extent_y: s.extent_y, boundary: s.boundary, origin_x: 0 },
    };
    let lattice = Lattice::new(spec).map_err(lift)?;
    let site = |c| lattice.site_at(c).ok_or_else(|| CliError::Infeasible(format!("charge at {c} is not on the lattice")));
    let (a, b) = (site(s.source)?, site(s.sink)?);
    if a == b {
        return Err(CliError::Infeasible("source and sink coincide".into()));
    }
    let layout = ChargeLayout::pair(a, b);
    let kind = model_kind(s.model);
    let (seed, _) = build_string_state(&lattice, &layout, &s.shape, kind).map_err(lift)?;
    let strings = enumerate_minimal_strings(&lattice, kind, &seed);
    let patch = patch_sites(&lattice, a, b);
    let sector = if s.model == ModelChoice::MinimalModel {
        None
    } else {
        let (basis, cache) = load_sector(&lattice, &layout, kind, opts)?;
        let index = |p: &StringPath| {
            basis
                .index_of(&p.config(&lattice, kind))
                .ok_or_else(|| CliError::Other("string state missing from its sector".into()))
        };
        let initial = index(&seed)?;
        let mut other_strings = Vec::new();
        for p in &strings {
            let i = index(p)?;
            if i != initial {
                other_strings.push(i);
            }
        }
        let occupation = basis
            .configs()
            .iter()
            .map(|c| match kind {
                ModelKind::U1Qlm => staggered_occupation(&lattice, c, &patch) as f64,
                ModelKind::Z2 => z2_occupation(&lattice, c, &patch, &layout) as f64,
            })
            .collect();
        Some(Sector { basis, measurement: Measurement { initial, other_strings, occupation }, cache })
    };
    Ok(Setup { lattice, layout, kind, seed, strings, patch, sector })
}

fn cache_file(dir: &Path, lattice: &Lattice, layout: &ChargeLayout, kind: ModelKind) -> PathBuf {
    let spec = lattice.spec();
    let charges = match kind {
        ModelKind::Z2 => "all".to_string(),
        ModelKind::U1Qlm => layout.charges().map(|(s, q)| format!("{s}q{q}")).collect::<Vec<_>>().join("-"),
    };
    dir.join(format!(
        "{}-{}-{}x{}-{}-o{}-{}.basis",
        kind.name(),
        spec.geometry,
        spec.extent_x,
        spec.extent_y,
        spec.boundary,
        spec.origin_x,
        charges
    ))
}

/// Sector basis, read from the cache directory when a dump is there.
fn load_sector(
    lattice: &Lattice,
    layout: &ChargeLayout,
    kind: ModelKind,
    opts: &Options,
) -> Result<(Arc<SectorBasis>, &'static str), CliError> {
    let cap = opts.sector_cap();
    let path = opts.cache_dir.as_deref().map(|d| cache_file(d, lattice, layout, kind));
    if let Some(path) = &path {
        if let Ok(f) = fs::File::open(path) {
            match SectorBasis::read_from(BufReader::new(f)) {
                Ok(b) if b.model() == kind && b.check_lattice(lattice).is_ok() => {
                    if b.len() > cap {
                        return Err(lift(BasisError::CapExceeded { what: "dimension", dimension: b.len() as u128, cap }));
                    }
                    return Ok((Arc::new(b), "hit"));
                }
                _ => eprintln!("warning: ignoring unreadable cache entry {}", path.display()),
            }
        }
    }
    let basis = enumerate_sector(lattice, layout, kind, cap).map_err(lift)?;
    let Some(path) = path else {
        return Ok((Arc::new(basis), "off"));
    };
    if let Err(e) = store(&path, &basis) {
        eprintln!("warning: could not write cache entry {}: {e}", path.display());
    }
    Ok((Arc::new(basis), "miss"))
}

fn store(path: &Path, basis: &SectorBasis) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut w = BufWriter::new(fs::File::create(&tmp)?);
    basis.write_to(&mut w)?;
    w.flush()?;
    drop(w);
    fs::rename(&tmp, path)
}

fn couplings(job: &Job) -> Couplings {
    Couplings::new(1.0, job.mass, job.efield, job.plaq)
}

pub fn manifold(setup: &Setup, job: &Job, opts: &Options) -> Result<Arc<MinimalModelBasis>, CliError> {
    let mf = enumerate_resonant_manifold(&setup.lattice, &setup.strings, &couplings(job));
    let cap = opts.minimal_cap();
    if mf.len() > cap {
        return Err(lift(StringError::CapExceeded { dimension: mf.len(), cap }));
    }
    Ok(Arc::new(mf))
}

/// Formats a value with 12 significant digits; `-0` prints as `0`.
pub fn format_value(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.11e}")
}

pub fn csv_text(rows: &[ObservableRow]) -> String {
    let mut out = String::with_capacity(96 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let cols = [r.t, r.fidelity, r.overlap_other_strings, r.matter_occupation, r.energy, r.norm_error];
        out.push_str(&cols.map(format_value).join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
struct LatticeMeta {
    geometry: String,
    extent_x: usize,
    extent_y: usize,
    boundary: String,
    boundary_note: String,
    sites: usize,
    links: usize,
    plaquettes: usize,
}

#[derive(Debug, Serialize)]
struct CouplingMeta {
    kappa: f64,
    mass: f64,
    efield: f64,
    plaq: f64,
}

#[derive(Debug, Serialize)]
struct TimeMeta {
    t_max: f64,
    n_points: usize,
    krylov_tol: f64,
}

#[derive(Debug, Serialize)]
struct RunMeta {
    scenario: String,
    model: ModelChoice,
    method: &'static str,
    dimension: usize,
    resonant: Option<bool>,
    merged_configurations: Option<usize>,
    sector_cache: &'static str,
    lattice: LatticeMeta,
    source: [i64; 2],
    sink: [i64; 2],
    string_shape: &'static str,
    string_length: usize,
    minimal_strings: usize,
    patch_sites: usize,
    couplings: CouplingMeta,
    time: TimeMeta,
    propagator: &'static str,
    energy_reference: f64,
    max_norm_error: f64,
    energy_drift: f64,
    csv: String,
    code_version: &'static str,
    wall_time_seconds: f64,
}

/// What one sweep member produced.
#[derive(Debug)]
pub struct JobOutput {
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub dimension: usize,
}

enum Operator {
    Dense(DenseOperator),
    Sparse(SparseOperator),
}

fn evolve(
    op: &Operator,
    m: &Measurement,
    grid: &TimeGrid,
    tol: f64,
    dense: bool,
    shift: f64,
) -> Result<Vec<ObservableRow>, CliError> {
    let h: &dyn HermitianOperator = match op {
        Operator::Dense(d) => d,
        Operator::Sparse(s) => s,
    };
    let psi0 = StateVector::basis_state(h.dim(), m.initial);
    let mut rows = Vec::with_capacity(grid.n_points);
    let mut failure = None;
    let mut record = |_: usize, t: f64, psi: &StateVector| match m.sample(h, t, psi) {
        Ok(mut r) => {
            r.energy += shift;
            rows.push(r);
        }
        Err(e) => failure = Some(e),
    };
    match (op, dense) {
        (Operator::Dense(d), true) => evolve_dense_each(d, &psi0, grid, &mut record),
        _ => evolve_krylov_each(h, &psi0, grid, tol, &mut record),
    }
    .map_err(lift)?;
    if let Some(e) = failure {
        return Err(lift(e));
    }
    Ok(rows)
}

pub fn run_job(s: &Scenario, setup: &Setup, job: &Job, opts: &Options, dir: &Path) -> Result<JobOutput, CliError> {
    let start = Instant::now();
    let c = couplings(job);
    let grid = TimeGrid::new(s.t_max, s.n_points).map_err(lift)?;
    let lat = &setup.lattice;
    let (op, measurement, dimension, shift, resonant, merged, cache) = match &setup.sector {
        None => {
            let mf = manifold(setup, job, opts)?;
            let mm = build_minimal_model(lat, mf.clone(), &c, opts.minimal_cap()).map_err(CliError::from)?;
            let initial = mf
                .index_of(&setup.seed.config(lat, ModelKind::U1Qlm))
                .ok_or_else(|| CliError::Other("initial string missing from the manifold".into()))?;
            let m = Measurement {
                initial,
                other_strings: mf.string_indices().into_iter().filter(|&i| i != initial).collect(),
                occupation: mf.configs.iter().map(|cfg| staggered_occupation(lat, cfg, &setup.patch) as f64).collect(),
            };
            (Operator::Dense(mm.hamiltonian), m, mf.len(), mm.reference_energy, Some(mf.resonant), Some(mf.merged), "n/a")
        }
        Some(sector) => {
            let kernel = GaugeHamiltonian::new(lat, setup.kind, c).with_charges(&setup.layout);
            let op = SparseOperator::assemble(&kernel, sector.basis.clone()).map_err(CliError::from)?;
            let op = if s.propagator == PropagatorChoice::Dense {
                if op.dim() > DENSE_FULL_ED_LIMIT {
                    return Err(CliError::Cap(format!(
                        "sector dimension {} is above {DENSE_FULL_ED_LIMIT}, too large for the dense propagator",
                        op.dim()
                    )));
                }
                Operator::Dense(op.to_dense())
            } else {
                Operator::Sparse(op)
            };
            (op, sector.measurement.clone(), sector.basis.len(), 0.0, None, None, sector.cache)
        }
    };
    let dense = match s.propagator {
        PropagatorChoice::Auto => setup.sector.is_none(),
        PropagatorChoice::Dense => true,
        PropagatorChoice::Krylov => false,
    };
    let rows = evolve(&op, &measurement, &grid, s.krylov_tol, dense, shift)?;

    let stem = format!("{}{}", s.name, job.suffix());
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&csv, csv_text(&rows)).map_err(|e| CliError::io(&csv, e))?;

    let e0 = rows[0].energy;
    let meta = RunMeta {
        scenario: s.name.clone(),
        model: s.model,
        method: if setup.sector.is_none() { "minimal_model" } else { "full_ed" },
        dimension,
        resonant,
        merged_configurations: merged,
        sector_cache: cache,
        lattice: LatticeMeta {
            geometry: lat.geometry().to_string(),
            extent_x: lat.spec().extent_x,
            extent_y: lat.spec().extent_y,
            boundary: lat.spec().boundary.to_string(),
            boundary_note: lat.boundary_note(),
            sites: lat.num_sites(),
            links: lat.num_links(),
            plaquettes: lat.num_plaquettes(),
        },
        source: [s.source.x, s.source.y],
        sink: [s.sink.x, s.sink.y],
        string_shape: s.shape.name(),
        string_length: setup.seed.len(),
        minimal_strings: setup.strings.len(),
        patch_sites: setup.patch.len(),
        couplings: CouplingMeta { kappa: 1.0, mass: job.mass, efield: job.efield, plaq: job.plaq },
        time: TimeMeta { t_max: s.t_max, n_points: s.n_points, krylov_tol: s.krylov_tol },
        propagator: if dense { "dense_spectral" } else { "krylov" },
        energy_reference: shift,
        max_norm_error: rows.iter().map(|r| r.norm_error).fold(0.0, f64::max),
        energy_drift: rows.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max),
        csv: format!("{stem}.csv"),
        code_version: env!("CARGO_PKG_VERSION"),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let meta_path = dir.join(format!("{stem}.meta.json"));
    let json = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Other(e.to_string()))?;
    fs::write(&meta_path, json + "\n").map_err(|e| CliError::io(&meta_path, e))?;
    Ok(JobOutput { csv, meta: meta_path, dimension })
}

/// Runs every sweep member on the current rayon pool. Results come back in
/// sweep order; the first failure in that order is reported.
pub fn run_scenario(s: &Scenario, opts: &Options) -> Result<Vec<JobOutput>, CliError> {
    let setup = setup(s, opts)?;
    let dir = opts.output_dir(s);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let results: Vec<_> = s.jobs().par_iter().map(|job| run_job(s, &setup, job, opts, &dir)).collect();
    results.into_iter().collect()
}

/// Resolved dimensions per distinct `(mass, efield)` pair, without evolving.
pub fn dimensions(s: &Scenario, setup: &Setup, opts: &Options) -> Result<Vec<(f64, f64, usize)>, CliError> {
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for job in s.jobs() {
        if out.iter().any(|&(m, g, _)| m == job.mass && g == job.efield) {
            continue;
        }
        let dim = match &setup.sector {
            Some(sector) => sector.basis.len(),
            None => manifold(setup, &job, opts)?.len(),
        };
        out.push((job.mass, job.efield, dim));
    }
    Ok(out)
}

/// Writes the manifold of each distinct `(mass, efield)` pair.
pub fn export_manifolds(s: &Scenario, opts: &Options) -> Result<Vec<PathBuf>, CliError> {
    if s.model != ModelChoice::MinimalModel {
        return Err(CliError::Config(ConfigError {
            line: None,
            message: format!("export-manifold needs model = \"minimal_model\", not {:?}", s.model.name()),
        }));
    }
    let setup = setup(s, opts)?;
    let dir = opts.output_dir(s);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut written = Vec::new();
    for (mass, efield, _) in dimensions(s, &setup, opts)? {
        let job = Job { mass, efield, plaq: 0.0 };
        let mf = manifold(&setup, &job, opts)?;
        let path = dir.join(format!("{}_m{mass}_g{efield}.manifold", s.name));
        fs::write(&path, mf.export(&setup.lattice)).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_have_twelve_significant_digits() {
        assert_eq!(format_value(1.0), "1.00000000000e0");
        assert_eq!(format_value(-0.0), "0.00000000000e0");
        assert_eq!(format_value(-2.5e-13), "-2.50000000000e-13");
        assert_eq!(format_value(1.0 / 3.0), "3.33333333333e-1");
    }

    #[test]
    fn error_codes_are_distinct() {
        let codes = [
            CliError::Config(ConfigError { line: Some(1), message: String::new() }).exit_code(),
            CliError::Infeasible(String::new()).exit_code(),
            CliError::Cap(String::new()).exit_code(),
            CliError::NoConvergence(String::new()).exit_code(),
        ];
        assert_eq!(codes, [2, 3, 4, 5]);
        let cap: CliError = Error::from(BasisError::CapExceeded { what: "dimension", dimension: 9, cap: 1 }).into();
        assert_eq!(cap.exit_code(), 4);
    }
}
