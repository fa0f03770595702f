//! γ = −1 (membrane interface) and γ = −3 (plate interface) with continuous
//! displacement across ω: interface nodes of both bulk sides share their unknowns.

use super::beam::HermiteBeam;
use super::{integrate_spd, BeamSeries, BulkSystem, EndCondition, MacroConfig, MacroMode, MacroSolution, Recorder};
use crate::cell_dynamic::Face;
use crate::cell_static::EffectiveCoefficients;
use crate::error::{Error, Result};
use crate::fem::{CsrMatrix, DofMapBuilder};

fn check_layer(cfg: &MacroConfig, gamma: i32) -> Result<()> {
    cfg.validate()?;
    if cfg.gamma != gamma {
        return Err(Error::InvalidParameter(format!("solver for gamma = {gamma} called with gamma = {}", cfg.gamma)));
    }
    if cfg.layer.initial_displacement.iter().chain(&cfg.layer.initial_velocity).any(|&x| x != 0.0) {
        return Err(Error::InvalidParameter(
            "layer initial data are the bulk traces for continuous-displacement interfaces; set them through the bulk initial data".into(),
        ));
    }
    Ok(())
}

fn shared_builder(cfg: &MacroConfig, bulk: &BulkSystem, extra_nodes: usize) -> DofMapBuilder {
    let pairs: Vec<(usize, usize)> = bulk.interface[Face::Minus.index()]
        .iter()
        .zip(&bulk.interface[Face::Plus.index()])
        .map(|(&m, &p)| (m, p))
        .collect();
    let mut b = DofMapBuilder::new(bulk.num_nodes + extra_nodes, bulk.ncomp).periodic(&pairs);
    if cfg.right_end == EndCondition::Clamped {
        b = b.dirichlet_nodes(&bulk.right_end, |_, _| 0.0);
    }
    if cfg.lateral == EndCondition::Clamped {
        b = b.dirichlet_nodes(&bulk.lateral, |_, _| 0.0);
    }
    b
}

fn resized(a: &CsrMatrix, n: usize, extra: Vec<(usize, usize, f64)>) -> CsrMatrix {
    let mut t: Vec<(usize, usize, f64)> = a.iter().collect();
    t.extend(extra);
    CsrMatrix::from_triplets(n, n, t)
}

/// Line mass (consistent, linear elements) on component `c` of the interface masters.
fn line_mass(bulk: &BulkSystem, rho: f64, comps: &[usize]) -> Vec<(usize, usize, f64)> {
    let nc = bulk.ncomp;
    let nodes = &bulk.interface[Face::Minus.index()];
    let mut t = Vec::new();
    if bulk.mode == MacroMode::Normal1d {
        for &c in comps {
            t.push((nodes[0] * nc + c, nodes[0] * nc + c, rho));
        }
        return t;
    }
    let x = &bulk.interface_x2;
    for e in 0..x.len() - 1 {
        let h = x[e + 1] - x[e];
        for (i, j, w) in [(e, e, 2.0), (e, e + 1, 1.0), (e + 1, e, 1.0), (e + 1, e + 1, 2.0)] {
            for &c in comps {
                t.push((nodes[i] * nc + c, nodes[j] * nc + c, rho * h * w / 6.0));
            }
        }
    }
    t
}

pub fn solve_macro_gamma_minus1(cfg: &MacroConfig, coeffs: &EffectiveCoefficients) -> Result<MacroSolution> {
    check_layer(cfg, -1)?;
    let bulk = cfg.build_bulk()?;
    let nc = bulk.ncomp;
    let n = bulk.num_dofs();
    let rho = coeffs.rho_bar;
    let all: Vec<usize> = (0..nc).collect();
    let mut m_extra = line_mass(&bulk, rho, &all);
    let mut k_extra = Vec::new();
    let mut b = shared_builder(cfg, &bulk, 0);
    if bulk.mode == MacroMode::Plane2d {
        let a_m = coeffs.a_star.voigt()[(0, 0)];
        let nodes = &bulk.interface[Face::Minus.index()];
        let x = &bulk.interface_x2;
        for e in 0..x.len() - 1 {
            let h = x[e + 1] - x[e];
            for (i, j, s) in [(e, e, 1.0), (e, e + 1, -1.0), (e + 1, e, -1.0), (e + 1, e + 1, 1.0)] {
                k_extra.push((nodes[i] * nc + 1, nodes[j] * nc + 1, s * a_m / h));
            }
        }
        let ends = [nodes[0], nodes[nodes.len() - 1], bulk.interface[0][0], bulk.interface[0][nodes.len() - 1]];
        b = b.dirichlet_nodes(&ends, |_, _| 0.0);
    }
    let dm = b.build()?;
    let m_full = resized(&bulk.mass, n, std::mem::take(&mut m_extra));
    let layer_mass = resized(&CsrMatrix::from_triplets(n, n, vec![]), n, line_mass(&bulk, rho, &all));
    let k_full = resized(&bulk.stiffness, n, k_extra);
    let (u0, v0) = cfg.initial_fields(&bulk);
    let load = |step: usize| {
        let t = cfg.time.time(step);
        let mut f = cfg.bulk_load(&bulk, t);
        if !cfg.layer.force.is_zero() {
            let fm = cfg.layer.force.value(t, nc);
            let field = interface_field(&bulk, &fm);
            for (fi, li) in f.iter_mut().zip(layer_mass.matvec(&field)) {
                *fi += li;
            }
        }
        f
    };
    let mut rec = Recorder::new(cfg, &bulk)?;
    integrate_spd(&dm, &m_full, &k_full, cfg.time, &u0, &v0, &load, &mut |s, u, v, a, e, ur, fr| rec.record(s, u, v, a, e, ur, fr))?;
    Ok(rec.finish())
}

fn interface_field(bulk: &BulkSystem, value: &[f64]) -> Vec<f64> {
    let nc = bulk.ncomp;
    let mut field = vec![0.0; bulk.num_dofs()];
    for &node in &bulk.interface[Face::Minus.index()] {
        for c in 0..nc.min(value.len()) {
            field[node * nc + c] = value[c];
        }
    }
    field
}

/// Scalar plate coefficients (x₂x₂ entries) with the symmetry check on b*.
fn plate_scalars(coeffs: &EffectiveCoefficients) -> Result<(f64, f64, f64)> {
    let b = &coeffs.b_plate;
    let scale = b.amax().max(coeffs.c_plate.voigt().amax());
    if b.nrows() > 1 && (b - b.transpose()).amax() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidParameter(format!(
            "b* is not symmetric (asymmetry {:e}); the plate interface needs a symmetric coupling",
            (b - b.transpose()).amax()
        )));
    }
    Ok((coeffs.a_plate.voigt()[(0, 0)], b[(0, 0)], coeffs.c_plate.voigt()[(0, 0)]))
}

pub fn solve_macro_gamma_minus3(cfg: &MacroConfig, coeffs: &EffectiveCoefficients) -> Result<MacroSolution> {
    check_layer(cfg, -3)?;
    let (a, bc, c) = plate_scalars(coeffs)?;
    let bulk = cfg.build_bulk()?;
    let nc = bulk.ncomp;
    let rho = coeffs.rho_bar;
    let minus = bulk.interface[Face::Minus.index()].clone();
    let plus = bulk.interface[Face::Plus.index()].clone();
    let tangential: Vec<usize> = (1..nc).collect();
    let np = minus.len();
    let extra = if bulk.mode == MacroMode::Plane2d { np } else { 0 };
    let n_nodes = bulk.num_nodes + extra;
    let n = n_nodes * nc;
    let mut b = shared_builder(cfg, &bulk, extra);
    for &node in minus.iter().chain(&plus) {
        for &t in &tangential {
            b = b.dirichlet(node, t, 0.0);
        }
    }
    let mut m_extra = Vec::new();
    let mut k_extra = Vec::new();
    let mut recover = None;
    let mut layer_load = vec![0.0; n];
    let slope_node = |p: usize| bulk.num_nodes + p;
    match bulk.mode {
        MacroMode::Normal1d => {
            m_extra = line_mass(&bulk, rho, &[0]);
            layer_load[minus[0] * nc] = rho;
        }
        MacroMode::Plane2d => {
            let beam = HermiteBeam::new(bulk.interface_x2.clone(), a, bc, c, rho)?;
            let cb = beam.condensed()?;
            // beam dof 2p ↔ (minus node p, normal component), 2p+1 ↔ (slope node p, component 0)
            let dof = |k: usize| if k % 2 == 0 { minus[k / 2] * nc } else { slope_node(k / 2) * nc };
            for i in 0..2 * np {
                for j in 0..2 * np {
                    if cb.stiffness[(i, j)] != 0.0 {
                        k_extra.push((dof(i), dof(j), cb.stiffness[(i, j)]));
                    }
                    if cb.mass[(i, j)] != 0.0 {
                        m_extra.push((dof(i), dof(j), cb.mass[(i, j)]));
                    }
                }
            }
            let unit = beam.uniform_load(rho);
            for i in 0..2 * np {
                layer_load[dof(i)] += unit[i];
            }
            for p in 0..np {
                b = b.dirichlet(slope_node(p), 1, 0.0);
            }
            for p in [0, np - 1] {
                b = b.dirichlet(minus[p], 0, 0.0).dirichlet(plus[p], 0, 0.0).dirichlet(slope_node(p), 0, 0.0);
            }
            recover = Some(cb.recover);
        }
    }
    let dm = b.build()?;
    let m_full = resized(&bulk.mass, n, m_extra);
    let k_full = resized(&bulk.stiffness, n, k_extra);
    let (mut u0, mut v0) = cfg.initial_fields(&bulk);
    u0.resize(n, 0.0);
    v0.resize(n, 0.0);
    let nb = bulk.num_dofs();
    let load = |step: usize| {
        let t = cfg.time.time(step);
        let mut f = cfg.bulk_load(&bulk, t);
        f.resize(n, 0.0);
        let f1 = cfg.layer.force.value(t, nc)[0];
        if f1 != 0.0 {
            for (fi, li) in f.iter_mut().zip(&layer_load) {
                *fi += f1 * li;
            }
        }
        f
    };
    let mut rec = Recorder::new(cfg, &bulk)?;
    let mut series = BeamSeries::default();
    integrate_spd(&dm, &m_full, &k_full, cfg.time, &u0, &v0, &load, &mut |s, u, v, acc, e, ur, fr| {
        if let Some(r) = &recover {
            let w: Vec<f64> = minus.iter().map(|&m| u[m * nc]).collect();
            let th: Vec<f64> = (0..np).map(|p| u[slope_node(p) * nc]).collect();
            let wt = nalgebra::DVector::from_fn(2 * np, |k, _| if k % 2 == 0 { w[k / 2] } else { th[k / 2] });
            series.u_hat.push((r * wt).iter().copied().collect());
            series.w.push(w);
            series.slope.push(th);
        } else {
            series.w.push(vec![u[minus[0] * nc]]);
        }
        rec.record(s, &u[..nb], &v[..nb], &acc[..nb], e, ur, fr)
    })?;
    let mut sol = rec.finish();
    sol.beam = Some(series);
    Ok(sol)
}
