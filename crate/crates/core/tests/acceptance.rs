//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use thinlayer::cell_dynamic::*;
use thinlayer::cell_static::*;
use thinlayer::harness::{emit_report, run_stages, Command, ReportFormat, RunConfig};
use thinlayer::macro_interface::*;
use thinlayer::mesh::{CellMeshSpec, Hole};
use thinlayer::micro_direct::*;
use thinlayer::tensor::{Material, SymMat};

const PLANE_STRESS_TOL: f64 = 1e-8;
const PLANE_STRESS_TIME: Duration = Duration::from_secs(10);
const B_STAR_TOL: f64 = 1e-10;
const C_STAR_TOL: f64 = 0.02;
const C_STAR_MIN_ORDER: f64 = 1.8;
const JUMP_TOL: f64 = 1e-8;
const RECIPROCITY_TOL: f64 = 1e-9;
const ENERGY_DRIFT_TOL: f64 = 1e-8;
const MODAL_TOL: f64 = 1e-4;
const SURFACE_VOLUME_TOL: f64 = 1e-8;
const LIFTING_TOL: f64 = 1e-6;
const CROSS_SOLVER_TOL: f64 = 1e-3;
const CROSS_SOLVER_TIME: Duration = Duration::from_secs(120);
const TRANSMISSION_TOL: f64 = 0.01;
const BEAM_TOL: f64 = 0.01;
const ISOMETRY_TOL: f64 = 1e-12;
const MONITOR_FACTOR: f64 = 2.0;
const LADDER_TIME: Duration = Duration::from_secs(600);

const LAMBDA: f64 = 2.0;
const MU: f64 = 1.0;
const STEEL: BulkMaterial = BulkMaterial { lambda: 2.0, mu: 1.0, rho: 1.0 };

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("{} criterion {id} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn cell(d: usize, r: usize, hole: Hole) -> CellModel {
    CellModel::new(&CellMeshSpec::new(d, r, hole), &Material::isotropic(LAMBDA, MU, 1.0, d).unwrap()).unwrap()
}

fn box_hole(d: usize, half: f64) -> Hole {
    let mut center = vec![0.5; d];
    center[0] = 0.0;
    Hole::Box { center, half_widths: vec![half; d] }
}

fn holed_2d(r: usize) -> CellModel {
    cell(2, r, box_hole(2, 0.25))
}

fn effective(c: &CellModel) -> EffectiveCoefficients {
    assemble_effective_tensors(&solve_static_correctors(c).unwrap(), c, Normalization::VolumeNormalized).unwrap()
}

fn rel_max(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax()
}

#[test]
fn criterion_01_plane_stress_recovery() {
    let start = Instant::now();
    let eff = effective(&cell(3, 8, Hole::None));
    let elapsed = start.elapsed();
    // λ* = 2λμ/(λ+2μ) on the two in-plane directions
    let ls = 2.0 * LAMBDA * MU / (LAMBDA + 2.0 * MU);
    let oracle = DMatrix::from_row_slice(3, 3, &[ls + 2.0 * MU, ls, 0.0, ls, ls + 2.0 * MU, 0.0, 0.0, 0.0, MU]);
    let err = rel_max(eff.a_star.voigt(), &oracle);
    report(1, "plane-stress recovery", err <= PLANE_STRESS_TOL && elapsed < PLANE_STRESS_TIME, format!("rel err {err:.2e}, {elapsed:.2?}"));
}

#[test]
fn criterion_02_plate_constants() {
    let ls = 2.0 * LAMBDA * MU / (LAMBDA + 2.0 * MU);
    let oracle = DMatrix::from_row_slice(3, 3, &[ls + 2.0 * MU, ls, 0.0, ls, ls + 2.0 * MU, 0.0, 0.0, 0.0, MU]) / 12.0;
    let runs: Vec<EffectiveCoefficients> = [8, 16].iter().map(|&r| effective(&cell(3, r, Hole::None))).collect();
    let b_max = runs.iter().map(|e| e.b_plate.amax()).fold(0.0, f64::max);
    let errs: Vec<f64> = runs.iter().map(|e| rel_max(e.c_plate.voigt(), &oracle)).collect();
    let order = (errs[0] / errs[1]).log2();
    let pass = b_max <= B_STAR_TOL && errs[1] <= C_STAR_TOL && order >= C_STAR_MIN_ORDER;
    report(2, "plate constants", pass, format!("max|b*| {b_max:.2e}, c* err res8 {:.3e} res16 {:.3e}, order {order:.2}", errs[0], errs[1]));
}

#[test]
fn criterion_03_jump_correctors() {
    let c = cell(3, 4, Hole::None);
    let set = solve_static_correctors(&c).unwrap();
    let g = c.mesh.grid();
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for n in 0..g.num_nodes() {
        let y1 = g.node_coord(n)[0];
        for k in 0..3 {
            let modulus = if k == 0 { LAMBDA + 2.0 * MU } else { MU };
            for comp in 0..3 {
                let exact = if comp == k { y1 / modulus } else { 0.0 };
                err = err.max((set.eta[k][3 * n + comp] - exact).abs());
                scale = scale.max(exact.abs());
            }
        }
    }
    let rel = err / scale;
    // ∫ A e(η⁽ʲ⁾):e(η⁽ᵏ⁾) equals the jump of η⁽ʲ⁾ₖ across the cell
    let mut recip = 0.0f64;
    for j in 0..3 {
        for k in 0..3 {
            let e = energy_pairing(&c, &set.eta[j], &set.eta[k]);
            let (p, m) = face_values(&c, &set.eta[j], k);
            recip = recip.max((e - (p - m)).abs());
        }
    }
    report(3, "jump correctors", rel <= JUMP_TOL && recip <= RECIPROCITY_TOL, format!("closed-form rel err {rel:.2e}, reciprocity {recip:.2e}"));
}

#[test]
fn criterion_04_perforation_monotonicity() {
    let forms: Vec<[f64; 3]> = [0.125, 0.25, 0.375]
        .iter()
        .map(|&h| {
            let a = effective(&cell(3, 8, box_hole(3, h))).a_star;
            let m = [SymMat::basis(2, 0, 0), SymMat::basis(2, 0, 1), SymMat::basis(2, 1, 1)];
            [0, 1, 2].map(|i| a.energy(&m[i], &m[i]).unwrap())
        })
        .collect();
    let pass = (0..3).all(|i| forms[0][i] > forms[1][i] && forms[1][i] > forms[2][i]);
    report(4, "perforation monotonicity", pass, format!("M22/M23/M33 forms {forms:.4?}"));
}

fn dense(a: &thinlayer::fem::CsrMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for (r, c, v) in a.iter() {
        m[(r, c)] += v;
    }
    m
}

#[test]
fn criterion_05_dynamic_conservation() {
    let c = holed_2d(8);
    let grid = TimeGrid::new(1.0, 2000).unwrap();
    let op = DynamicCellOperator::new(&c, grid).unwrap();
    let sol = op.solve(DynamicKind::Theta, None, 0, Lifting::Linear, None, 1).unwrap();
    let drift = sol.max_energy_drift();

    let dm = op.dofmap();
    let m = dense(op.integrator().mass());
    let k = dense(op.integrator().stiffness());
    let linv = m.clone().cholesky().unwrap().l().try_inverse().unwrap();
    let eig = SymmetricEigen::new(&linv * &k * linv.transpose());
    let modes = linv.transpose() * &eig.eigenvectors;
    let amp = modes.transpose() * &m * DVector::from_vec(dm.gather(&sol.v[0]));
    let (mut err, mut refn) = (0.0, 0.0);
    for n in 0..=grid.steps {
        let t = grid.time(n);
        let coeff = DVector::from_fn(amp.len(), |j, _| {
            let w = eig.eigenvalues[j].sqrt();
            amp[j] * (w * t).sin() / w
        });
        let exact = &modes * coeff;
        err += (DVector::from_vec(dm.gather(&sol.u[n])) - &exact).norm_squared();
        refn += exact.norm_squared();
    }
    let modal = (err / refn).sqrt();
    report(5, "dynamic conservation", drift <= ENERGY_DRIFT_TOL && modal <= MODAL_TOL, format!("energy drift {drift:.2e}, modal L2 err {modal:.2e}"));
}

#[test]
fn criterion_06_kernel_sanity() {
    let c = holed_2d(4);
    let grid = TimeGrid::new(0.5, 100).unwrap();
    let set = solve_cell_solution_set(&c, grid, Lifting::Linear, false, 1).unwrap();
    let table = extract_kernels(&set).unwrap();
    let f0 = table.max_abs_f0();
    let mut sv = 0.0f64;
    for alpha in Face::BOTH {
        for beta in Face::BOTH {
            for i in 0..2 {
                for j in 0..2 {
                    for n in 0..=grid.steps {
                        let vol = kernel_volume_diagnostic(&c, &set.chi[alpha.index()][i], &set.chi[beta.index()][j], grid.time(n), 0.0, SecondDerivative::Newmark)
                            .unwrap();
                        sv = sv.max((vol - table.g(n, alpha, beta, j, i)).abs() / table.norm_g());
                    }
                }
            }
        }
    }
    let ela = extract_kernels(&solve_cell_solution_set(&c, grid, Lifting::Elastostatic, false, 1).unwrap()).unwrap();
    let (a, b) = (table.step_trace_response(), ela.step_trace_response());
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let lift = norm(&diff) / norm(&a);
    let pass = f0 == 0.0 && sv <= SURFACE_VOLUME_TOL && lift <= LIFTING_TOL;
    report(6, "kernel sanity", pass, format!("max|F(0)| {f0:e}, surface-volume {sv:.2e}, lifting {lift:.2e}"));
}

fn rel_l2(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let (mut e, mut r) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        for (p, q) in x.iter().zip(y) {
            e += (p - q) * (p - q);
            r += q * q;
        }
    }
    (e / r).sqrt()
}

#[test]
fn criterion_07_gamma1_cross_solver() {
    let start = Instant::now();
    let c = holed_2d(4);
    let grid = TimeGrid::new(2.0, 4000).unwrap();
    let table = extract_kernels(&solve_cell_solution_set(&c, grid, Lifting::Linear, false, 1).unwrap()).unwrap();
    let mut cfg = MacroConfig::normal_1d(1, STEEL, 1.5, 60, grid);
    cfg.traction = Pulse::HannSine { amplitude: vec![1.0, 0.4], frequency: 1.0, cycles: 2.0, delay: 0.0 };
    let kern = solve_macro_gamma1(&cfg, &table).unwrap();
    let (reference, _) = solve_two_scale_reference(&cfg, &c).unwrap();
    let err = Face::BOTH.iter().map(|f| rel_l2(&kern.interface.u[f.index()], &reference.interface.u[f.index()])).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    report(7, "gamma=1 cross-solver", err <= CROSS_SOLVER_TOL && elapsed < CROSS_SOLVER_TIME, format!("trace rel L2 {err:.2e}, {elapsed:.2?}"));
}

fn dft_amplitude(signal: &[f64], dt: f64, f: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (n, s) in signal.iter().enumerate() {
        let w = 2.0 * PI * f * n as f64 * dt;
        re += s * w.cos();
        im += s * w.sin();
    }
    (re * re + im * im).sqrt() * dt
}

#[test]
fn criterion_08_mass_interface_transmission() {
    let coeffs = effective(&holed_2d(4));
    let mass = coeffs.rho_bar;
    let grid = TimeGrid::new(10.0, 2000).unwrap();
    let run = |m: f64| {
        let mut c = coeffs.clone();
        c.rho_bar = m;
        let mut cfg = MacroConfig::normal_1d(-1, STEEL, 8.0, 800, grid);
        cfg.components = 1;
        cfg.traction = Pulse::Ricker { amplitude: vec![1.0], frequency: 1.0, delay: 1.2 };
        cfg.probes = vec![Probe { label: "t".into(), x: [2.0, 0.0], side: None }];
        let sol = solve_macro_gamma_minus1(&cfg, &c).unwrap();
        sol.probe("t").unwrap().u.iter().map(|u| u[0]).collect::<Vec<f64>>()
    };
    let (loaded, bare) = (run(mass), run(0.0));
    let z = STEEL.impedance();
    let mut worst = 0.0f64;
    for f in [0.5, 0.75, 1.0, 1.25, 1.5] {
        let w = 2.0 * PI * f;
        // transfer-matrix coefficient of a point mass between equal half-spaces
        let oracle = 2.0 * z / (4.0 * z * z + w * w * mass * mass).sqrt();
        let ratio = dft_amplitude(&loaded, grid.dt(), f) / dft_amplitude(&bare, grid.dt(), f);
        worst = worst.max((ratio - oracle).abs() / oracle);
    }
    report(8, "gamma=-1 transmission", worst <= TRANSMISSION_TOL, format!("worst rel deviation {worst:.2e} over 5 frequencies"));
}

#[test]
fn criterion_09_beam_check() {
    let coeffs = effective(&holed_2d(4));
    let (a, b, d) = (coeffs.a_plate.voigt()[(0, 0)], coeffs.b_plate[(0, 0)], coeffs.c_plate.voigt()[(0, 0)]);
    let (p, l) = (1.3, 2.0);
    let s = clamped_beam_static(a, b, d, l, 8, p).unwrap();
    let oracle = p * l.powi(4) / (384.0 * d);
    let beam_err = (s.midpoint - oracle).abs() / oracle;

    let mut cfg = MacroConfig::normal_1d(-3, STEEL, 1.0, 16, TimeGrid::new(1.5, 300).unwrap());
    cfg.mode = MacroMode::Plane2d;
    cfg.width = 1.0;
    cfg.elements_y = 8;
    cfg.traction = Pulse::HannSine { amplitude: vec![1.0, 0.3], frequency: 1.0, cycles: 2.0, delay: 0.0 };
    cfg.profile = Profile::HalfSine;
    let sol = solve_macro_gamma_minus3(&cfg, &coeffs).unwrap();
    let tangential = Face::BOTH.iter().flat_map(|f| sol.interface.u[f.index()].iter().map(|u| u[1].abs())).fold(0.0, f64::max);
    report(9, "gamma=-3 beam", beam_err <= BEAM_TOL && tangential == 0.0, format!("midpoint rel err {beam_err:.2e}, max tangential trace {tangential:e}"));
}

#[test]
fn criterion_10_micro_macro_ladder() {
    let start = Instant::now();
    let spec = CellMeshSpec::new(2, 4, box_hole(2, 0.25));
    let coeffs = effective(&CellModel::new(&spec, &Material::isotropic(LAMBDA, MU, 1.0, 2).unwrap()).unwrap());
    let mut m = MacroConfig::normal_1d(-1, STEEL, 1.0, 32, TimeGrid::new(1.0, 200).unwrap());
    m.mode = MacroMode::Plane2d;
    m.width = 1.0;
    m.elements_y = 32;
    m.traction = Pulse::HannSine { amplitude: vec![1.0, 0.3], frequency: 1.0, cycles: 2.0, delay: 0.0 };
    m.profile = Profile::HalfSine;
    let mac = solve_macro_gamma_minus1(&m, &coeffs).unwrap();
    let base = MicroConfig::from_macro(&m, 0.25, spec, STEEL, 1.0 / 32.0).unwrap();
    let rows = run_ladder(&base, &[0.25, 0.125, 0.0625], &mac).unwrap();
    let elapsed = start.elapsed();
    let decreasing = rows.windows(2).all(|w| w[1].bulk_l2 < w[0].bulk_l2);
    let iso = rows.iter().map(|r| r.unfolding_isometry).fold(0.0, f64::max);
    let monitor = rows.iter().map(|r| r.apriori_monitor / rows[0].apriori_monitor).fold(0.0, f64::max);
    let errs: Vec<String> = rows.iter().map(|r| format!("{:.3e}", r.bulk_l2)).collect();
    let pass = decreasing && iso <= ISOMETRY_TOL && monitor <= MONITOR_FACTOR && elapsed < LADDER_TIME;
    report(10, "micro-macro ladder", pass, format!("bulk L2 [{}], isometry {iso:.1e}, monitor ratio {monitor:.3}, {elapsed:.2?}", errs.join(", ")));
}

#[test]
fn criterion_11_determinism() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for name in ["tensors_2d.json", "kernels_1d.json", "membrane_ladder.json"] {
        let cfg = RunConfig::from_path(&configs.join(name)).unwrap();
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            let r = run_stages(&cfg, &Command::Report.stages(&cfg)).unwrap();
            emit_report(&r, ReportFormat::CsvBundle, d.path()).unwrap();
        }
        for entry in std::fs::read_dir(dirs[0].path()).unwrap() {
            let file = entry.unwrap().file_name();
            compared += 1;
            if std::fs::read(dirs[0].path().join(&file)).unwrap() != std::fs::read(dirs[1].path().join(&file)).unwrap() {
                mismatched.push(format!("{name}:{}", file.to_string_lossy()));
            }
        }
    }
    report(11, "determinism", mismatched.is_empty() && compared > 0, format!("{compared} files compared, mismatches {mismatched:?}"));
}
