use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thinlayer::cell_dynamic::*;
use thinlayer::cell_static::CellModel;
use thinlayer::fem::sparse::norm;
use thinlayer::mesh::{CellMeshSpec, FaceTag, Hole};
use thinlayer::tensor::Material;

fn model(res: usize, hole: Hole, lambda: f64, mu: f64, rho: f64) -> CellModel {
    CellModel::new(&CellMeshSpec::new(2, res, hole), &Material::isotropic(lambda, mu, rho, 2).unwrap()).unwrap()
}

fn holed(res: usize) -> CellModel {
    model(res, Hole::Box { center: vec![0.0, 0.5], half_widths: vec![0.25, 0.25] }, 2.0, 1.0, 1.0)
}

fn dense(a: &thinlayer::fem::CsrMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for (r, c, v) in a.iter() {
        m[(r, c)] += v;
    }
    m
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn theta_conserves_energy_and_matches_modal_superposition() {
    let cell = holed(8);
    let grid = TimeGrid::new(1.0, 2000).unwrap();
    let op = DynamicCellOperator::new(&cell, grid).unwrap();
    let sol = op.solve(DynamicKind::Theta, None, 0, Lifting::Linear, None, 1).unwrap();
    assert!(sol.max_energy_drift() < 1e-8, "{}", sol.max_energy_drift());

    let dm = op.dofmap();
    let m = dense(op.integrator().mass());
    let k = dense(op.integrator().stiffness());
    let l = m.clone().cholesky().unwrap();
    let linv = l.l().try_inverse().unwrap();
    let eig = SymmetricEigen::new(&linv * &k * linv.transpose());
    let modes = linv.transpose() * &eig.eigenvectors;
    let v0 = DVector::from_vec(dm.gather(&sol.v[0]));
    let amp = modes.transpose() * &m * &v0;
    let (mut err, mut refn) = (0.0, 0.0);
    for n in 0..=grid.steps {
        let t = grid.time(n);
        let coeff = DVector::from_fn(amp.len(), |j, _| {
            let w = eig.eigenvalues[j].sqrt();
            amp[j] * (w * t).sin() / w
        });
        let exact = &modes * coeff;
        let num = DVector::from_vec(dm.gather(&sol.u[n]));
        err += (&num - &exact).norm_squared();
        refn += exact.norm_squared();
    }
    let rel = (err / refn).sqrt();
    assert!(rel < 1e-4, "{rel}");
}

#[test]
fn eta_linearity_and_superposition() {
    let cell = holed(4);
    let grid = TimeGrid::new(0.5, 50).unwrap();
    let op = DynamicCellOperator::new(&cell, grid).unwrap();
    let eta = op.solve(DynamicKind::Eta, Some(Face::Plus), 1, Lifting::Linear, None, 1).unwrap();
    let phi = boundary_lifting(&cell, 1, Face::Plus);
    let zero = vec![0.0; phi.len()];
    let v2: Vec<f64> = phi.iter().map(|x| -2.0 * x).collect();
    let eta2 = op.run(DynamicKind::Eta, Some(Face::Plus), 1, &zero, &v2, None, None, None, 1).unwrap();
    for n in 0..=grid.steps {
        let scaled: Vec<f64> = eta.u[n].iter().map(|x| 2.0 * x).collect();
        assert!(max_diff(&scaled, &eta2.u[n]) < 1e-12);
    }

    let a = op.solve(DynamicKind::Chi, Some(Face::Plus), 0, Lifting::Linear, None, 1).unwrap();
    let b = op.solve(DynamicKind::Chi, Some(Face::Minus), 1, Lifting::Linear, None, 1).unwrap();
    let sum: Vec<f64> = boundary_lifting(&cell, 0, Face::Plus)
        .iter()
        .zip(boundary_lifting(&cell, 1, Face::Minus))
        .map(|(x, y)| x + y)
        .collect();
    let fixed = op.face_part(&sum);
    let motion = move |_n: usize| (fixed.clone(), vec![0.0; fixed.len()]);
    let c = op.run(DynamicKind::Chi, None, 0, &sum, &zero, None, Some(&motion), None, 1).unwrap();
    for n in 0..=grid.steps {
        let s: Vec<f64> = a.u[n].iter().zip(&b.u[n]).map(|(x, y)| x + y).collect();
        assert!(max_diff(&s, &c.u[n]) < 1e-12);
    }
    assert!(c.max_energy_drift() < 1e-10);
}

#[test]
fn kernel_invariants() {
    let cell = model(4, Hole::None, 2.0, 1.0, 1.0);
    let grid = TimeGrid::new(0.5, 100).unwrap();
    let set = solve_cell_solution_set(&cell, grid, Lifting::Linear, false, 1).unwrap();
    let table = extract_kernels(&set).unwrap();
    assert_eq!(table.max_abs_f0(), 0.0);

    // G(0) equals the static reaction of the lifting.
    for alpha in Face::BOTH {
        for i in 0..2 {
            let r = cell.stiffness.matvec(&boundary_lifting(&cell, i, alpha));
            for beta in Face::BOTH {
                let react = cell.face_reaction(&r, beta.tag());
                for j in 0..2 {
                    assert!((table.g(0, alpha, beta, j, i) - react[j]).abs() < 1e-10);
                }
            }
        }
    }

    // Reflection y1 -> -y1 flips the thickness component.
    let s = [-1.0, 1.0];
    let scale = table.norm_g();
    for n in 0..=grid.steps {
        for j in 0..2 {
            for i in 0..2 {
                let pp = table.g(n, Face::Plus, Face::Plus, j, i);
                let mm = table.g(n, Face::Minus, Face::Minus, j, i);
                assert!((mm - s[j] * s[i] * pp).abs() < 1e-10 * scale);
                let pm = table.g(n, Face::Plus, Face::Minus, j, i);
                let mp = table.g(n, Face::Minus, Face::Plus, j, i);
                assert!((mp - s[j] * s[i] * pm).abs() < 1e-10 * scale);
            }
        }
    }

    let csv = table.to_csv();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4 * 4 * (grid.steps + 1));
}

#[test]
fn kernels_scale_linearly_with_coefficients() {
    let grid = TimeGrid::new(0.2, 20).unwrap();
    let k1 = extract_kernels(&solve_cell_solution_set(&holed(4), grid, Lifting::Linear, false, 1).unwrap()).unwrap();
    let c3 = model(4, Hole::Box { center: vec![0.0, 0.5], half_widths: vec![0.25, 0.25] }, 6.0, 3.0, 3.0);
    let k3 = extract_kernels(&solve_cell_solution_set(&c3, grid, Lifting::Linear, false, 1).unwrap()).unwrap();
    let s = k1.scaled(3.0);
    for n in 0..=grid.steps {
        for a in Face::BOTH {
            for b in Face::BOTH {
                assert!((k3.g_matrix(n, a, b) - s.g_matrix(n, a, b)).amax() < 1e-9 * k3.norm_g());
                assert!((k3.f_matrix(n, a, b) - s.f_matrix(n, a, b)).amax() < 1e-9 * k3.norm_f());
            }
        }
    }
}

#[test]
fn surface_and_volume_forms_agree_with_lifting_test_field() {
    let cell = holed(4);
    let grid = TimeGrid::new(0.5, 100).unwrap();
    let set = solve_cell_solution_set(&cell, grid, Lifting::Linear, false, 1).unwrap();
    let table = extract_kernels(&set).unwrap();
    for alpha in Face::BOTH {
        for beta in Face::BOTH {
            for i in 0..2 {
                for j in 0..2 {
                    for n in 0..=grid.steps {
                        let vol = kernel_volume_diagnostic(
                            &cell,
                            &set.chi[alpha.index()][i],
                            &set.chi[beta.index()][j],
                            grid.time(n),
                            0.0,
                            SecondDerivative::Newmark,
                        )
                        .unwrap();
                        let surf = table.g(n, alpha, beta, j, i);
                        assert!((vol - surf).abs() <= 1e-8 * table.norm_g().max(1.0), "{vol} {surf}");
                    }
                }
            }
        }
    }
    assert!(kernel_volume_diagnostic(&cell, &set.chi[0][0], &set.chi[0][0], 0.0025, 0.0, SecondDerivative::Newmark).is_err());
}

#[test]
fn step_trace_response_is_lifting_independent() {
    let cell = holed(4);
    let grid = TimeGrid::new(0.5, 100).unwrap();
    let lin = extract_kernels(&solve_cell_solution_set(&cell, grid, Lifting::Linear, false, 1).unwrap()).unwrap();
    let ela = extract_kernels(&solve_cell_solution_set(&cell, grid, Lifting::Elastostatic, false, 1).unwrap()).unwrap();
    let (a, b) = (lin.step_trace_response(), ela.step_trace_response());
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    assert!(norm(&diff) <= 1e-6 * norm(&a), "{}", norm(&diff) / norm(&a));
    // individual kernels do depend on the lifting
    assert!((lin.g_matrix(0, Face::Plus, Face::Plus) - ela.g_matrix(0, Face::Plus, Face::Plus)).amax() > 1e-6 * lin.norm_g());
}

#[test]
fn representation_matches_direct_time_stepping() {
    let cell = holed(4);
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let set = solve_cell_solution_set(&cell, grid, Lifting::Linear, true, 1).unwrap();
    let op = DynamicCellOperator::new(&cell, grid).unwrap();
    let up = |t: f64| [0.3 * (2.0 * t).sin(), 0.1 * t * t];
    let vp = |t: f64| [0.6 * (2.0 * t).cos(), 0.2 * t];
    let ap = |t: f64| [-1.2 * (2.0 * t).sin(), 0.2];
    let um = |t: f64| [0.2 * t, -0.05 * (3.0 * t).sin()];
    let vm = |t: f64| [0.2, -0.15 * (3.0 * t).cos()];
    let am = |t: f64| [0.0, 0.45 * (3.0 * t).sin()];
    let sample = |f: &dyn Fn(f64) -> [f64; 2]| -> Vec<Vec<f64>> { (0..=grid.steps).map(|n| f(grid.time(n)).to_vec()).collect() };
    let traces = InterfaceTraces { v: [sample(&vp), sample(&vm)], a: [sample(&ap), sample(&am)] };
    let force = sample(&|t: f64| [t.cos(), 0.5]);
    let rep = represent_layer_displacement(&set, &traces, &LayerSources { force: Some(&force), ..Default::default() }, None).unwrap();
    let direct = solve_layer_direct(&op, &[sample(&up), sample(&um)], &traces, None, None, Some(&force)).unwrap();
    let scale = direct.u.iter().map(|u| norm(u)).fold(0.0, f64::max);
    let err = (0..=grid.steps).map(|n| max_diff(&rep[n], &direct.u[n])).fold(0.0, f64::max);
    assert!(err <= 1e-6 * scale, "{}", err / scale);

    // zero data gives zero
    let zero = InterfaceTraces { v: [vec![vec![0.0; 2]; 1001], vec![vec![0.0; 2]; 1001]], a: [vec![vec![0.0; 2]; 1001], vec![vec![0.0; 2]; 1001]] };
    let z = represent_layer_displacement(&set, &zero, &LayerSources::default(), Some(&[0, 500, 1000])).unwrap();
    assert!(z.iter().all(|u| u.iter().all(|&x| x == 0.0)));

    // the trace on S+ reproduces u+(t) - u+(0)
    let n = 700;
    let node = cell.mesh.nodes_with_tag(FaceTag::SPlus)[0];
    let t = grid.time(n);
    assert!((rep[n][2 * node] - up(t)[0]).abs() < 1e-5);
}

#[test]
fn missing_solutions_are_reported() {
    let cell = holed(4);
    let grid = TimeGrid::new(0.1, 10).unwrap();
    let mut set = solve_cell_solution_set(&cell, grid, Lifting::Linear, false, 1).unwrap();
    set.eta[1].pop();
    assert!(extract_kernels(&set).is_err());
    let op = DynamicCellOperator::new(&cell, grid).unwrap();
    assert!(op.solve(DynamicKind::U1Tilde, None, 0, Lifting::Linear, None, 1).is_err());
    assert!(op.solve(DynamicKind::Chi, None, 0, Lifting::Linear, None, 1).is_err());
}

#[test]
fn face_mass_shrinks_with_mesh_size() {
    let grid = TimeGrid::new(0.1, 10).unwrap();
    let m: Vec<f64> = [4, 8]
        .iter()
        .map(|&r| {
            let set = solve_cell_solution_set(&holed(r), grid, Lifting::Linear, false, 1).unwrap();
            extract_kernels(&set).unwrap().face_mass(Face::Minus, Face::Minus, 0, 0)
        })
        .collect();
    assert!(m[0] > 0.0 && m[1] > 0.0);
    assert!(m[1] / m[0] < 0.6, "{m:?}");
    let set = solve_cell_solution_set(&holed(4), grid, Lifting::Elastostatic, false, 1).unwrap();
    assert!((extract_kernels(&set).unwrap().face_mass(Face::Minus, Face::Minus, 0, 0) - m[0]).abs() < 1e-10);
}
