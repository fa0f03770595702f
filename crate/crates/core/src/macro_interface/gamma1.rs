//! γ = 1: bulk waves coupled through memory-kernel interface tractions
//! `Hᵝ_j(t) = Σ_α Σ_i ∫₀ᵗ ∂ₜu^α_i(s) G^{αβ}_{ji}(t−s) + ∂ₜₜu^α_i(s) F^{αβ}_{ji}(t−s) ds + ∂ₜu^α_i(0) F^{αβ}_{ji}(t)`
//! plus the instantaneous face-mass term `m^{αβ}_{ji} ∂ₜₜu^α_i(t)`, carried by the mass matrix.

use super::{dot, EndCondition, MacroConfig, MacroSolution, Recorder};
use crate::cell_dynamic::{Face, MemoryKernelTable};
use crate::error::{Error, Result};
use crate::fem::{CsrMatrix, DofMapBuilder, DofTarget, Lu};
use crate::newmark::{BETA, GAMMA};

fn compatible_kernels(kernels: &MemoryKernelTable, cfg: &MacroConfig) -> Result<MemoryKernelTable> {
    if kernels.dim != cfg.ncomp() {
        return Err(Error::GridMismatch(format!(
            "kernel table has {} components, bulk has {}",
            kernels.dim,
            cfg.ncomp()
        )));
    }
    let ratio = cfg.time.dt() / kernels.dt();
    let r = ratio.round();
    if r < 1.0 || (ratio - r).abs() > 1e-9 * ratio {
        return Err(Error::GridMismatch(format!(
            "solver dt {} is not an integer multiple of kernel dt {}",
            cfg.time.dt(),
            kernels.dt()
        )));
    }
    let table = if r > 1.0 { kernels.subsample(r as usize)? } else { kernels.clone() };
    if table.steps() < cfg.time.steps {
        return Err(Error::GridMismatch(format!(
            "kernels cover {} steps, solver needs {}",
            table.steps(),
            cfg.time.steps
        )));
    }
    Ok(table)
}

pub fn solve_macro_gamma1(cfg: &MacroConfig, kernels: &MemoryKernelTable) -> Result<MacroSolution> {
    cfg.validate()?;
    if cfg.gamma != 1 {
        return Err(Error::InvalidParameter(format!("kernel solver needs gamma = 1, got {}", cfg.gamma)));
    }
    if !cfg.layer.is_zero() {
        return Err(Error::InvalidParameter(
            "the kernel-based interface law assumes vanishing layer data; use solve_two_scale_reference for nonzero u0M, u1M or fM".into(),
        ));
    }
    let table = compatible_kernels(kernels, cfg)?;
    let bulk = cfg.build_bulk()?;
    let nc = bulk.ncomp;
    let mut b = DofMapBuilder::new(bulk.num_nodes, nc);
    if cfg.right_end == EndCondition::Clamped {
        b = b.dirichlet_nodes(&bulk.right_end, |_, _| 0.0);
    }
    if cfg.lateral == EndCondition::Clamped {
        b = b.dirichlet_nodes(&bulk.lateral, |_, _| 0.0);
    }
    let dm = b.build()?;
    let np = bulk.interface_x2.len();
    let mut mt: Vec<(usize, usize, f64)> = bulk.mass.iter().collect();
    for p in 0..np {
        let w = bulk.interface_weights[p];
        for alpha in Face::BOTH {
            for beta in Face::BOTH {
                for j in 0..nc {
                    for i in 0..nc {
                        let r = bulk.interface[beta.index()][p] * nc + j;
                        let c = bulk.interface[alpha.index()][p] * nc + i;
                        mt.push((r, c, w * table.face_mass(alpha, beta, j, i)));
                    }
                }
            }
        }
    }
    let n_full = bulk.num_dofs();
    let m = dm.reduce_matrix(&CsrMatrix::from_triplets(n_full, n_full, mt));
    let k = dm.reduce_matrix(&bulk.stiffness);
    let nf = dm.num_free();
    let dt = cfg.time.dt();
    let free = |node: usize, c: usize| match dm.target(node * nc + c) {
        DofTarget::Free(r) => Some(r),
        _ => None,
    };

    // coupling C: force on bulk β from the implicit lag-zero term is −w G^{αβ}(0) · ½dt v^α
    let mut ct = Vec::new();
    for p in 0..np {
        let w = bulk.interface_weights[p];
        for alpha in Face::BOTH {
            for beta in Face::BOTH {
                for j in 0..nc {
                    for i in 0..nc {
                        let g = table.g(0, alpha, beta, j, i);
                        if let (Some(r), Some(c)) = (free(bulk.interface[beta.index()][p], j), free(bulk.interface[alpha.index()][p], i)) {
                            if g != 0.0 {
                                ct.push((r, c, w * g));
                            }
                        }
                    }
                }
            }
        }
    }
    let cmat = CsrMatrix::from_triplets(nf, nf, ct);
    let a_eff = m.linear_combination(1.0, &k, BETA * dt * dt).linear_combination(1.0, &cmat, 0.5 * dt * GAMMA * dt);
    let lu = Lu::new(&a_eff)?;
    let mchol = crate::fem::Cholesky::new(&m)?;

    let (u0f, v0f) = cfg.initial_fields(&bulk);
    let mut u = dm.gather(&u0f);
    let mut v = dm.gather(&v0f);
    let ext = |n: usize| dm.restrict(&cfg.bulk_load(&bulk, cfg.time.time(n)));
    // interface histories [p][side][step][comp]
    let mut vh: Vec<[Vec<Vec<f64>>; 2]> = vec![[Vec::new(), Vec::new()]; np];
    let mut ah: Vec<[Vec<Vec<f64>>; 2]> = vec![[Vec::new(), Vec::new()]; np];
    let trace = |x: &[f64], node: usize| -> Vec<f64> { (0..nc).map(|c| free(node, c).map_or(0.0, |r| x[r])).collect() };

    // memory part of H at step n (all lags with stored history, implicit lag-zero G term excluded)
    let memory = |n: usize, vh: &Vec<[Vec<Vec<f64>>; 2]>, ah: &Vec<[Vec<Vec<f64>>; 2]>| -> Vec<f64> {
        let mut f = vec![0.0; bulk.num_dofs()];
        for p in 0..np {
            let w = bulk.interface_weights[p];
            for beta in Face::BOTH {
                let node = bulk.interface[beta.index()][p];
                for alpha in Face::BOTH {
                    let (vs, as_) = (&vh[p][alpha.index()], &ah[p][alpha.index()]);
                    for j in 0..nc {
                        let mut h = 0.0;
                        for i in 0..nc {
                            for mm in 0..n.min(vs.len()) {
                                let wm = if mm == 0 { 0.5 } else { 1.0 };
                                h += dt * wm * (vs[mm][i] * table.g(n - mm, alpha, beta, j, i) + as_[mm][i] * table.f(n - mm, alpha, beta, j, i));
                            }
                            if !vs.is_empty() {
                                h += vs[0][i] * table.f(n, alpha, beta, j, i);
                            }
                        }
                        f[node * nc + j] -= w * h;
                    }
                }
            }
        }
        dm.restrict(&f)
    };

    let mut rec = Recorder::new(cfg, &bulk)?;
    let f0 = ext(0);
    let ku = k.matvec(&u);
    let mut a = mchol.solve(&(0..nf).map(|r| f0[r] - ku[r]).collect::<Vec<_>>());
    let push_hist = |vh: &mut Vec<[Vec<Vec<f64>>; 2]>, ah: &mut Vec<[Vec<Vec<f64>>; 2]>, v: &[f64], a: &[f64]| {
        for p in 0..np {
            for s in Face::BOTH {
                let node = bulk.interface[s.index()][p];
                vh[p][s.index()].push(trace(v, node));
                ah[p][s.index()].push(trace(a, node));
            }
        }
    };
    push_hist(&mut vh, &mut ah, &v, &a);
    let energy = |u: &[f64], v: &[f64]| 0.5 * dot(v, &m.matvec(v)) + 0.5 * dot(u, &k.matvec(u));
    let full = |x: &[f64], s: f64| dm.expand_with(x, s);
    rec.record(0, &full(&u, 1.0), &full(&v, 0.0), &full(&a, 0.0), energy(&u, &v), &u, &f0)?;
    for n in 1..=cfg.time.steps {
        let hist = memory(n, &vh, &ah);
        let fe = ext(n);
        let pred: Vec<f64> = (0..nf).map(|r| u[r] + dt * v[r] + (0.5 - BETA) * dt * dt * a[r]).collect();
        let vpred: Vec<f64> = (0..nf).map(|r| v[r] + (1.0 - GAMMA) * dt * a[r]).collect();
        let kp = k.matvec(&pred);
        let cv = cmat.matvec(&vpred);
        let rhs: Vec<f64> = (0..nf).map(|r| fe[r] + hist[r] - kp[r] - 0.5 * dt * cv[r]).collect();
        let a_new = lu.solve(&rhs);
        u = (0..nf).map(|r| pred[r] + BETA * dt * dt * a_new[r]).collect();
        v = (0..nf).map(|r| vpred[r] + GAMMA * dt * a_new[r]).collect();
        a = a_new;
        push_hist(&mut vh, &mut ah, &v, &a);
        let cvn = cmat.matvec(&v);
        let f_tot: Vec<f64> = (0..nf).map(|r| fe[r] + hist[r] - 0.5 * dt * cvn[r]).collect();
        rec.record(n, &full(&u, 1.0), &full(&v, 0.0), &full(&a, 0.0), energy(&u, &v), &u, &f_tot)?;
    }
    Ok(rec.finish())
}
