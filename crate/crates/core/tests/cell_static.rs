use thinlayer::cell_static::*;
use thinlayer::mesh::{CellMeshSpec, FaceTag, Hole};
use thinlayer::tensor::Material;

fn model(d: usize, r: usize, hole: Hole, lambda: f64, mu: f64) -> CellModel {
    CellModel::new(&CellMeshSpec::new(d, r, hole), &Material::isotropic(lambda, mu, 1.0, d).unwrap()).unwrap()
}

fn rel_err(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax()
}

#[test]
fn plane_stress_recovered_in_3d() {
    let (l, m) = (2.0, 1.0);
    let cell = model(3, 4, Hole::None, l, m);
    let set = solve_static_correctors(&cell).unwrap();
    let eff = assemble_effective_tensors(&set, &cell, Normalization::VolumeNormalized).unwrap();
    let oracle = plane_stress_tensor(l, m, 2).unwrap();
    assert!(rel_err(eff.a_star.voigt(), oracle.voigt()) < 1e-10);
    assert!(eff.b_plate.amax() < 1e-10);
    let one_sided = a_star_one_sided(&set, &cell).unwrap();
    assert!(rel_err(&one_sided, eff.a_star.voigt()) < 1e-9);
}

#[test]
fn bending_corrector_quadratic_profile() {
    let (l, m) = (1.0, 1.0);
    let cell = model(2, 16, Hole::None, l, m);
    let chi = solve_bending_corrector(&cell, (1, 1)).unwrap();
    let g = cell.mesh.grid();
    let k = l / (l + 2.0 * m);
    // analytic profile with zero mean: k (y1^2/2 - 1/24)
    let mut max_err: f64 = 0.0;
    for n in 0..g.num_nodes() {
        let y1 = g.node_coord(n)[0];
        max_err = max_err.max((chi[2 * n] - k * (y1 * y1 / 2.0 - 1.0 / 24.0)).abs());
        assert!(chi[2 * n + 1].abs() < 1e-10);
    }
    assert!(max_err < 2e-3, "{max_err}");
}

#[test]
fn plate_bending_converges_to_twelfth() {
    let (l, m) = (2.0, 1.0);
    let oracle = plane_stress_tensor(l, m, 1).unwrap().voigt()[(0, 0)] / 12.0;
    let errs: Vec<f64> = [4, 8]
        .iter()
        .map(|&r| {
            let cell = model(2, r, Hole::None, l, m);
            let set = solve_static_correctors(&cell).unwrap();
            let eff = assemble_effective_tensors(&set, &cell, Normalization::VolumeNormalized).unwrap();
            (eff.c_plate.voigt()[(0, 0)] - oracle).abs() / oracle
        })
        .collect();
    assert!(errs[1] < errs[0]);
    assert!((errs[0] / errs[1]).log2() > 1.8, "{errs:?}");
}

#[test]
fn jump_correctors_closed_form_and_reciprocity() {
    let (l, m) = (2.0, 1.0);
    let cell = model(2, 4, Hole::None, l, m);
    let set = solve_static_correctors(&cell).unwrap();
    let g = cell.mesh.grid();
    for n in 0..g.num_nodes() {
        let y1 = g.node_coord(n)[0];
        assert!((set.eta[0][2 * n] - y1 / (l + 2.0 * m)).abs() < 1e-10);
        assert!(set.eta[0][2 * n + 1].abs() < 1e-10);
        assert!((set.eta[1][2 * n + 1] - y1 / m).abs() < 1e-10);
    }
    for j in 0..2 {
        for k in 0..2 {
            let e = energy_pairing(&cell, &set.eta[j], &set.eta[k]);
            let (p, q) = face_values(&cell, &set.eta[j], k);
            assert!((e - (p - q)).abs() < 1e-10);
        }
    }
    let r = cell.stiffness.matvec(&set.eta[0]);
    assert!((cell.face_reaction(&r, FaceTag::SPlus)[0] - 1.0).abs() < 1e-10);
}

#[test]
fn unnormalized_mode_scales_by_measure() {
    let hole = Hole::Box { center: vec![0.0, 0.5], half_widths: vec![0.125, 0.125] };
    let cell = model(2, 8, hole, 1.0, 1.0);
    let set = solve_static_correctors(&cell).unwrap();
    let a = assemble_effective_tensors(&set, &cell, Normalization::VolumeNormalized).unwrap();
    let b = assemble_effective_tensors(&set, &cell, Normalization::Unnormalized).unwrap();
    assert!((a.c_plate.voigt()[(0, 0)] * cell.mesh.measure() - b.c_plate.voigt()[(0, 0)]).abs() < 1e-14);
    assert_eq!(a.a_star, b.a_star);
    assert!((b.rho_bar - 0.9375).abs() < 1e-14);
}
