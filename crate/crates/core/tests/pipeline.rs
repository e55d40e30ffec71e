use std::sync::Arc;

use gaugestring::basis::{enumerate_sector, DEFAULT_SECTOR_CAP};
use gaugestring::dynamics::{evolve_dense, evolve_krylov, measure, staggered_occupation, TimeGrid, DEFAULT_KRYLOV_TOL};
use gaugestring::models::build_u1_qlm_hex;
use gaugestring::strings::{
    build_minimal_model, build_string_state, enumerate_minimal_strings, enumerate_resonant_manifold, patch_sites,
    DEFAULT_MINIMAL_CAP,
};
use gaugestring::{
    Boundary, ChargeLayout, Coord, Couplings, Lattice, LatticeSpec, Measurement, ModelKind, SectorBasis, SparseOperator,
    StateVector, StringShape,
};

fn hex() -> Lattice {
    Lattice::new(LatticeSpec::hexagonal(8, 4, Boundary::CylinderPeriodicY)).unwrap()
}

#[test]
fn hex_string_moves_only_with_plaquettes() {
    let lat = hex();
    let at = |x, y| lat.site_at(Coord::new(x, y)).unwrap();
    let layout = ChargeLayout::pair(at(1, 0), at(5, 1));
    let (seed, _) = build_string_state(&lat, &layout, &StringShape::SShapedHex, ModelKind::U1Qlm).unwrap();
    let strings = enumerate_minimal_strings(&lat, ModelKind::U1Qlm, &seed);
    let patch = patch_sites(&lat, seed.source(), seed.sink());
    let mut p_max = Vec::new();
    for j in [0.0, 1.0] {
        let c = Couplings::new(1.0, 2.0, 4.0, j);
        let mf = Arc::new(enumerate_resonant_manifold(&lat, &strings, &c));
        let mm = build_minimal_model(&lat, mf.clone(), &c, DEFAULT_MINIMAL_CAP).unwrap();
        let initial = mf.index_of(&seed.config(&lat, ModelKind::U1Qlm)).unwrap();
        let m = Measurement {
            initial,
            other_strings: mf.string_indices().into_iter().filter(|&i| i != initial).collect(),
            occupation: mf.configs.iter().map(|cfg| staggered_occupation(&lat, cfg, &patch) as f64).collect(),
        };
        let grid = TimeGrid::new(10.0, 101).unwrap();
        let traj = evolve_dense(&mm.hamiltonian, &StateVector::basis_state(mf.len(), initial), &grid).unwrap();
        let series = measure(&mm.hamiltonian, &traj, &m).unwrap();
        p_max.push(series.column(|r| r.overlap_other_strings).into_iter().fold(0.0, f64::max));
    }
    assert!(p_max[0] <= 1e-12);
    assert!(p_max[1] > 1e-2);
}

#[test]
fn dumped_sector_rebuilds_the_same_operator() {
    let lat = Lattice::new(LatticeSpec::hexagonal(5, 3, Boundary::Open)).unwrap();
    let at = |x, y| lat.site_at(Coord::new(x, y)).unwrap();
    let layout = ChargeLayout::pair(at(1, 0), at(3, 1));
    let basis = enumerate_sector(&lat, &layout, ModelKind::U1Qlm, DEFAULT_SECTOR_CAP).unwrap();
    let mut bytes = Vec::new();
    basis.write_to(&mut bytes).unwrap();
    let back = SectorBasis::read_from(bytes.as_slice()).unwrap();
    back.check_lattice(&lat).unwrap();
    let c = Couplings::new(1.0, 0.8, 1.1, 0.6);
    let a = build_u1_qlm_hex(&lat, Arc::new(basis), c).unwrap();
    let b = build_u1_qlm_hex(&lat, Arc::new(back), c).unwrap();
    assert_eq!(a.triplets().collect::<Vec<_>>(), b.triplets().collect::<Vec<_>>());

    let mut op_bytes = Vec::new();
    a.write_to(&mut op_bytes).unwrap();
    let reread = SparseOperator::read_from(op_bytes.as_slice(), a.basis().clone()).unwrap();
    let grid = TimeGrid::new(3.0, 31).unwrap();
    let psi = StateVector::basis_state(a.dim(), 0);
    let x = evolve_krylov(&a, &psi, &grid, DEFAULT_KRYLOV_TOL).unwrap();
    let y = evolve_krylov(&reread, &psi, &grid, DEFAULT_KRYLOV_TOL).unwrap();
    assert_eq!(x.states.last().unwrap().amplitudes(), y.states.last().unwrap().amplitudes());
}
