use nalgebra::DMatrix;
use proptest::prelude::*;

use thinlayer::cell_dynamic::TimeGrid;
use thinlayer::cell_static::*;
use thinlayer::fem::CsrMatrix;
use thinlayer::macro_interface::*;
use thinlayer::mesh::{CellMeshSpec, Hole};
use thinlayer::micro_direct::*;
use thinlayer::newmark::{step_work, Newmark};
use thinlayer::tensor::{voigt_pairs, voigt_size, ElasticTensor4, SymMat};

fn sym_mat(dim: usize, v: &[f64]) -> SymMat {
    let rows: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| v[i.min(j) * 3 + i.max(j)]).collect()).collect();
    SymMat::from_rows(&rows).unwrap()
}

fn spd_tensor(dim: usize, v: &[f64]) -> ElasticTensor4 {
    let n = voigt_size(dim);
    let b = DMatrix::from_fn(n, n, |i, j| v[i * 6 + j]);
    ElasticTensor4::from_voigt(dim, &b * b.transpose() + DMatrix::identity(n, n)).unwrap()
}

proptest! {
    #[test]
    fn voigt_round_trip(dim in 1usize..=3, v in prop::collection::vec(-5.0f64..5.0, 9)) {
        let m = sym_mat(dim, &v);
        let back = SymMat::from_voigt_strain(dim, &m.to_voigt_strain());
        let back2 = SymMat::from_voigt_stress(dim, &m.to_voigt_stress());
        for i in 0..dim {
            for j in 0..dim {
                prop_assert!((back.get(i, j) - m.get(i, j)).abs() < 1e-14);
                prop_assert!((back2.get(i, j) - m.get(i, j)).abs() < 1e-14);
            }
        }
        // strain and stress forms pair to the Frobenius product
        let s: f64 = m.to_voigt_strain().iter().zip(m.to_voigt_stress()).map(|(a, b)| a * b).sum();
        prop_assert!((s - m.ddot(&m)).abs() < 1e-12 * (1.0 + s.abs()));
    }

    #[test]
    fn tensors_have_major_and_minor_symmetry(dim in 2usize..=3, v in prop::collection::vec(-2.0f64..2.0, 36), e in prop::collection::vec(-1.0f64..1.0, 18)) {
        let c = spd_tensor(dim, &v);
        prop_assert!(c.asymmetry() < 1e-15);
        for &(i, j) in voigt_pairs(dim) {
            for &(k, l) in voigt_pairs(dim) {
                let x = c.component(i, j, k, l);
                prop_assert_eq!(x, c.component(k, l, i, j));
                prop_assert_eq!(x, c.component(j, i, k, l));
                prop_assert_eq!(x, c.component(i, j, l, k));
            }
        }
        let (e1, e2) = (sym_mat(dim, &e[..9]), sym_mat(dim, &e[9..]));
        let (a, b) = (c.energy(&e1, &e2).unwrap(), c.energy(&e2, &e1).unwrap());
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        prop_assert!(c.energy(&e1, &e1).unwrap() >= 0.0);
    }

    #[test]
    fn tensor_action_is_linear(v in prop::collection::vec(-2.0f64..2.0, 36), e in prop::collection::vec(-1.0f64..1.0, 18), s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let c = spd_tensor(3, &v);
        let (e1, e2) = (sym_mat(3, &e[..9]), sym_mat(3, &e[9..]));
        let lhs = c.apply(&e1.scaled(s).add(&e2.scaled(t))).unwrap();
        let rhs = c.apply(&e1).unwrap().scaled(s).add(&c.apply(&e2).unwrap().scaled(t));
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((lhs.get(i, j) - rhs.get(i, j)).abs() < 1e-12 * (1.0 + rhs.get(i, j).abs()));
            }
        }
    }

    #[test]
    fn newmark_energy_identity(k in prop::collection::vec(0.1f64..3.0, 4), f in prop::collection::vec(-1.0f64..1.0, 12), dt in 0.01f64..0.5) {
        // 4-dof chain with random springs and unit masses
        let mut trips = Vec::new();
        for (e, &ke) in k.iter().enumerate() {
            let (a, b) = (e, e + 1);
            trips.push((a, a, ke));
            if b < 4 {
                trips.extend([(b, b, ke), (a, b, -ke), (b, a, -ke)]);
            }
        }
        let kmat = CsrMatrix::from_triplets(4, 4, trips);
        let nm = Newmark::new(CsrMatrix::identity(4), kmat, dt).unwrap();
        let load = |n: usize| -> Vec<f64> { (0..4).map(|i| f[(n * 4 + i) % 12] * (n as f64 * dt).sin()).collect() };
        let mut s = nm.init(vec![0.1, 0.0, -0.2, 0.0], vec![0.0; 4], &load(0));
        let e0 = nm.energy(&s);
        let mut work = 0.0;
        for n in 1..=30 {
            let next = nm.step(&s, &load(n));
            work += step_work(&s.u, &next.u, &load(n - 1), &load(n));
            s = next;
        }
        prop_assert!((nm.energy(&s) - e0 - work).abs() < 1e-11 * (1.0 + e0 + work.abs()));
    }
}

fn micro_cfg(amplitude: f64) -> MicroConfig {
    let mut m = MacroConfig::normal_1d(-1, BulkMaterial { lambda: 2.0, mu: 1.0, rho: 1.0 }, 0.5, 8, TimeGrid::new(0.5, 20).unwrap());
    m.mode = MacroMode::Plane2d;
    m.width = 1.0;
    m.elements_y = 8;
    m.traction = Pulse::HannSine { amplitude: vec![amplitude, 0.5 * amplitude], frequency: 2.0, cycles: 1.0, delay: 0.0 };
    let spec = CellMeshSpec::new(2, 4, Hole::Box { center: vec![0.0, 0.5], half_widths: vec![0.25, 0.25] });
    MicroConfig::from_macro(&m, 0.25, spec, BulkMaterial { lambda: 1.0, mu: 0.5, rho: 2.0 }, 0.125).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn effective_tensors_scale_with_the_material(s in 0.2f64..5.0) {
        let spec = CellMeshSpec::new(2, 8, Hole::Ellipsoid { center: vec![0.0, 0.5], half_axes: vec![0.3, 0.2] });
        let run = |scale: f64| {
            let cell = CellModel::new(&spec, &thinlayer::tensor::Material::isotropic(2.0 * scale, scale, 1.0, 2).unwrap()).unwrap();
            assemble_effective_tensors(&solve_static_correctors(&cell).unwrap(), &cell, Normalization::VolumeNormalized).unwrap()
        };
        let (a, b) = (run(1.0), run(s));
        for (x, y) in [(a.a_star.voigt(), b.a_star.voigt()), (a.c_plate.voigt(), b.c_plate.voigt())] {
            prop_assert!((y - x * s).amax() < 1e-9 * s * x.amax());
        }
        prop_assert_eq!(a.rho_bar, b.rho_bar);
    }

    #[test]
    fn micro_response_is_linear_in_the_data(s in -3.0f64..3.0) {
        let one = solve_micro(&micro_cfg(1.0)).unwrap();
        let scaled = solve_micro(&micro_cfg(s)).unwrap();
        let (u1, us) = (&one.final_snapshot().u, &scaled.final_snapshot().u);
        let scale = u1.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(scale > 0.0);
        for (a, b) in u1.iter().zip(us) {
            prop_assert!((b - s * a).abs() < 1e-10 * scale * (1.0 + s.abs()));
        }
    }

    #[test]
    fn unfolding_is_an_isometry(seed in 0u64..1_000_000) {
        let mesh = build_micro_mesh(&micro_cfg(1.0)).unwrap();
        let n = 2 * mesh.grid.num_nodes();
        let u: Vec<f64> = (0..n as u64).map(|i| (((i + 1) * (seed + 7919)) % 2003) as f64 / 1001.0 - 1.0).collect();
        let (lhs, rhs) = unfolding_norms(&mesh, &u).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
    }
}
