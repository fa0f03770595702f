//! Monolithic two-scale reference for γ = 1 in normal-incidence mode: both bulk bars
//! and one resolved cell whose faces S± are tied to the bulk interface nodes.

use super::{integrate_spd, EndCondition, MacroConfig, MacroMode, MacroSolution, Recorder};
use crate::cell_static::{face_values, CellModel, StaticCorrectorSet};
use crate::error::{Error, Result};
use crate::fem::{sparse, CsrMatrix, DofMapBuilder};
use crate::cell_dynamic::Face;
use crate::mesh::FaceTag;

/// Cell fields per step (cell node numbering) and the layer force used.
#[derive(Clone, Debug, Default)]
pub struct ReferenceLayer {
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub force: Vec<Vec<f64>>,
}

fn stack(n: usize, a: &CsrMatrix, b: &CsrMatrix, off_b: usize) -> CsrMatrix {
    let mut t: Vec<(usize, usize, f64)> = a.iter().collect();
    t.extend(b.iter().map(|(r, c, v)| (r + off_b, c + off_b, v)));
    CsrMatrix::from_triplets(n, n, t)
}

pub fn solve_two_scale_reference(cfg: &MacroConfig, cell: &CellModel) -> Result<(MacroSolution, ReferenceLayer)> {
    cfg.validate()?;
    if cfg.mode != MacroMode::Normal1d {
        return Err(Error::InvalidParameter("the monolithic reference solver supports normal_1d only".into()));
    }
    if cfg.gamma != 1 {
        return Err(Error::InvalidParameter(format!("the two-scale reference is the gamma = 1 model, got {}", cfg.gamma)));
    }
    if cfg.layer.initial_displacement.iter().any(|&x| x != 0.0) {
        return Err(Error::InvalidParameter("nonzero u0M is not supported by the reference solver".into()));
    }
    let bulk = cfg.build_bulk()?;
    let nc = bulk.ncomp;
    if nc != cell.dim() {
        return Err(Error::DimensionMismatch { expected: cell.dim(), got: nc });
    }
    let nb = bulk.num_nodes;
    let ncell = cell.mesh.grid().num_nodes();
    let n_nodes = nb + ncell;
    let mut active = vec![true; nb];
    active.extend_from_slice(cell.mesh.active_nodes());
    let pairs: Vec<(usize, usize)> = cell.mesh.periodic_pairs().iter().map(|&(m, s)| (m + nb, s + nb)).collect();
    let group = |side: Face, tag: FaceTag| -> Vec<usize> {
        let mut g = vec![bulk.interface[side.index()][0]];
        g.extend(cell.mesh.nodes_with_tag(tag).into_iter().map(|n| n + nb));
        g
    };
    let mut b = DofMapBuilder::new(n_nodes, nc)
        .active(&active)
        .periodic(&pairs)
        .face_group(&group(Face::Plus, FaceTag::SPlus))
        .face_group(&group(Face::Minus, FaceTag::SMinus));
    if cfg.right_end == EndCondition::Clamped {
        b = b.dirichlet_nodes(&bulk.right_end, |_, _| 0.0);
    }
    let dm = b.build()?;
    let n = n_nodes * nc;
    let off = nb * nc;
    let m_full = stack(n, &bulk.mass, &cell.mass, off);
    let k_full = stack(n, &bulk.stiffness, &cell.stiffness, off);

    let cell_field = |vec: &[f64]| -> Vec<f64> {
        let mut f = vec![0.0; ncell * nc];
        for (node, &act) in cell.mesh.active_nodes().iter().enumerate() {
            if act {
                for c in 0..nc.min(vec.len()) {
                    f[node * nc + c] = vec[c];
                }
            }
        }
        f
    };
    let layer_force = |t: f64| cfg.layer.force.value(t, nc);
    let load = |step: usize| {
        let t = cfg.time.time(step);
        let mut f = cfg.bulk_load(&bulk, t);
        let fm = layer_force(t);
        if fm.iter().any(|&x| x != 0.0) {
            f.extend(cell.mass.matvec(&cell_field(&fm)));
        } else {
            f.resize(n, 0.0);
        }
        f
    };
    let (mut u0, mut v0) = cfg.initial_fields(&bulk);
    u0.resize(n, 0.0);
    v0.extend(cell_field(&cfg.layer.initial_velocity));

    let mut rec = Recorder::new(cfg, &bulk)?;
    let mut layer = ReferenceLayer::default();
    integrate_spd(&dm, &m_full, &k_full, cfg.time, &u0, &v0, &load, &mut |step, u, v, a, e, ur, fr| {
        layer.u.push(u[off..].to_vec());
        layer.v.push(v[off..].to_vec());
        layer.a.push(a[off..].to_vec());
        layer.force.push(layer_force(cfg.time.time(step)));
        rec.record(step, &u[..off], &v[..off], &a[..off], e, ur, fr)
    })?;
    Ok((rec.finish(), layer))
}

/// Jump conditions evaluated from a layer field series.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JumpSeries {
    /// `η⁽ᵏ⁾ · K u^M` per step and component.
    pub displacement_formula: Vec<Vec<f64>>,
    /// `u^M|S+ − u^M|S−`.
    pub displacement_direct: Vec<Vec<f64>>,
    /// `∫ ρ (f^M − ∂ₜₜu^M)`.
    pub stress_formula: Vec<Vec<f64>>,
    /// Sum of the interface forces on both bulk sides.
    pub stress_direct: Vec<Vec<f64>>,
}

impl JumpSeries {
    fn rel(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let scale = a.iter().chain(b).flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max) / scale
    }

    pub fn displacement_error(&self) -> f64 {
        Self::rel(&self.displacement_formula, &self.displacement_direct)
    }

    pub fn stress_error(&self) -> f64 {
        Self::rel(&self.stress_formula, &self.stress_direct)
    }
}

pub fn jump_diagnostics(cell: &CellModel, correctors: &StaticCorrectorSet, layer: &ReferenceLayer, macro_run: Option<&MacroSolution>) -> Result<JumpSeries> {
    let d = cell.dim();
    if correctors.eta.len() != d {
        return Err(Error::Missing("jump correctors for every component".into()));
    }
    if correctors.spec_hash != cell.mesh.spec().hash() {
        return Err(Error::GridMismatch("correctors were computed on a different cell".into()));
    }
    let k_eta: Vec<Vec<f64>> = correctors.eta.iter().map(|e| cell.stiffness.matvec(e)).collect();
    let mut out = JumpSeries::default();
    for n in 0..layer.u.len() {
        let u = &layer.u[n];
        out.displacement_formula.push(k_eta.iter().map(|ke| sparse::dot(ke, u)).collect());
        out.displacement_direct.push((0..d).map(|c| {
            let (p, m) = face_values(cell, u, c);
            p - m
        }).collect());
        let mut field = vec![0.0; u.len()];
        for (node, &act) in cell.mesh.active_nodes().iter().enumerate() {
            if act {
                for c in 0..d {
                    field[node * d + c] = layer.force.get(n).and_then(|f| f.get(c)).copied().unwrap_or(0.0) - layer.a[n][node * d + c];
                }
            }
        }
        let mf = cell.mass.matvec(&field);
        out.stress_formula.push((0..d).map(|c| (0..cell.mesh.grid().num_nodes()).map(|node| mf[node * d + c]).sum()).collect());
        if let Some(m) = macro_run {
            let tr = &m.interface.traction;
            out.stress_direct.push((0..d).map(|c| tr[0][n][c] + tr[1][n][c]).collect());
        }
    }
    Ok(out)
}
