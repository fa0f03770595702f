//! ε-resolved plane-strain solver of the layered problem and its comparison with the
//! homogenized interface models.
//!
//! The domain is `(−L, L) × (0, W)` with the layer `|x₁| < ε/2` tiled by `W/ε` scaled
//! copies of the 2D reference cell. Bulk elements along x₁ grow geometrically away from
//! the layer; x₂ spacing is the cell spacing `ε/r` everywhere, which keeps the mesh
//! conforming across S_ε±.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::cell_dynamic::{Face, TimeGrid};
use crate::error::{Error, Result};
use crate::fem::{sparse, CsrMatrix, Discretization, DofMapBuilder};
use crate::grid::{shape_values, Grid};
use crate::macro_interface::{BulkMaterial, BulkSystem, EndCondition, InitialBulk, LayerData, MacroConfig, MacroMode, MacroSolution, Profile, Pulse};
use crate::mesh::{CellMeshSpec, PeriodicCellMesh};
use crate::newmark::{step_work, Newmark};
use crate::tensor::Material;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Minus,
    Layer,
    Plus,
}

fn default_grading() -> f64 {
    1.25
}

fn default_true() -> bool {
    true
}

fn default_stride() -> usize {
    1
}

fn default_scaling_constant() -> f64 {
    10.0
}

fn free_end() -> EndCondition {
    EndCondition::Free
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroConfig {
    pub epsilon: f64,
    pub gamma: i32,
    pub minus: BulkMaterial,
    pub plus: BulkMaterial,
    /// Isotropic layer material before the ε-scalings.
    pub layer_material: BulkMaterial,
    /// Reference cell (2D); its resolution is the number of elements per cell edge.
    pub cell: CellMeshSpec,
    pub length: f64,
    pub width: f64,
    /// Largest bulk element size along x₁.
    pub bulk_h: f64,
    /// Growth factor of consecutive bulk element sizes away from the layer.
    #[serde(default = "default_grading")]
    pub grading: f64,
    #[serde(default)]
    pub traction: Pulse,
    #[serde(default)]
    pub profile: Profile,
    #[serde(default)]
    pub right_end: EndCondition,
    /// Bulk condition on x₂ ∈ {0, W}.
    #[serde(default = "free_end")]
    pub lateral: EndCondition,
    #[serde(default)]
    pub bulk_force: Pulse,
    #[serde(default)]
    pub layer: LayerData,
    #[serde(default)]
    pub initial: InitialBulk,
    pub time: TimeGrid,
    /// Apply `ε^γ` to the layer stiffness and `1/ε` to its density.
    #[serde(default = "default_true")]
    pub scale_layer: bool,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    /// C in the layer force bound `‖f^M‖ ≤ C √ε`; larger data produce a warning.
    #[serde(default = "default_scaling_constant")]
    pub scaling_constant: f64,
}

impl MicroConfig {
    /// Micro scenario with the data of a plane macro configuration.
    pub fn from_macro(m: &MacroConfig, epsilon: f64, cell: CellMeshSpec, layer_material: BulkMaterial, bulk_h: f64) -> Result<Self> {
        if m.mode != MacroMode::Plane2d {
            return Err(Error::InvalidParameter("micro runs need a plane_2d macro configuration".into()));
        }
        Ok(MicroConfig {
            epsilon,
            gamma: m.gamma,
            minus: m.minus,
            plus: m.plus,
            layer_material,
            cell,
            length: m.length,
            width: m.width,
            bulk_h,
            grading: default_grading(),
            traction: m.traction.clone(),
            profile: m.profile,
            right_end: m.right_end,
            lateral: m.lateral,
            bulk_force: m.bulk_force.clone(),
            layer: m.layer.clone(),
            initial: m.initial.clone(),
            time: m.time,
            scale_layer: true,
            snapshot_stride: m.snapshot_stride,
            scaling_constant: default_scaling_constant(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if ![1, -1, -3].contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!("gamma must be 1, -1 or -3, got {}", self.gamma)));
        }
        self.minus.validate()?;
        self.plus.validate()?;
        self.layer_material.validate()?;
        self.time.validate()?;
        if self.cell.dimension != 2 {
            return Err(Error::InvalidParameter("micro runs use a 2D cell".into()));
        }
        if !(self.epsilon > 0.0) || !(self.width > 0.0) || !(self.length > 0.5 * self.epsilon) {
            return Err(Error::InvalidParameter("need epsilon > 0, width > 0 and length > epsilon/2".into()));
        }
        if !(self.bulk_h > 0.0) || !(self.grading >= 1.0) {
            return Err(Error::InvalidParameter("bulk_h must be positive and grading at least 1".into()));
        }
        if self.gamma != 1 && !self.layer.initial_displacement.iter().chain(&self.layer.initial_velocity).all(|&x| x == 0.0) {
            return Err(Error::InvalidParameter("layer initial data are the bulk traces for gamma = -1, -3".into()));
        }
        Ok(())
    }

    /// Number of cells along ω.
    pub fn cells(&self) -> Result<usize> {
        let n = self.width / self.epsilon;
        let k = n.round();
        if k < 1.0 || (n - k).abs() > 1e-9 * n {
            return Err(Error::Geometry(format!(
                "the layer of width {} is not a whole number of cells of size {} (ratio {n})",
                self.width, self.epsilon
            )));
        }
        Ok(k as usize)
    }
}

/// Conforming voxel mesh of Ω_ε.
#[derive(Clone, Debug)]
pub struct MicroMesh {
    pub epsilon: f64,
    pub cells: usize,
    pub resolution: usize,
    pub grid: Grid,
    pub region: Vec<Region>,
    pub solid: Vec<bool>,
    /// First x₁ element index of the layer band.
    pub layer_start: usize,
    pub cell_mesh: PeriodicCellMesh,
}

fn graded(start: f64, end: f64, h0: f64, factor: f64, h_max: f64) -> Vec<f64> {
    let mut pts = vec![start];
    let mut p = start;
    let mut h = h0.min(h_max);
    loop {
        if p + h >= end - 0.5 * h {
            pts.push(end);
            return pts;
        }
        p += h;
        pts.push(p);
        h = (h * factor).min(h_max);
    }
}

pub fn build_micro_mesh(cfg: &MicroConfig) -> Result<MicroMesh> {
    cfg.validate()?;
    let cells = cfg.cells()?;
    let cell_mesh = PeriodicCellMesh::build(&cfg.cell)?;
    let r = cfg.cell.resolution;
    let eps = cfg.epsilon;
    let h0 = eps / r as f64;
    let plus = graded(0.5 * eps, cfg.length, h0, cfg.grading, cfg.bulk_h);
    let mut x1: Vec<f64> = plus.iter().rev().map(|x| -x).collect();
    x1.pop();
    x1.extend((0..r).map(|a| -0.5 * eps + eps * a as f64 / r as f64));
    x1.extend(plus);
    let ny = cells * r;
    let x2: Vec<f64> = (0..=ny).map(|j| cfg.width * j as f64 / ny as f64).collect();
    let layer_start = x1.iter().position(|&x| x == -0.5 * eps).expect("layer face on the axis");
    let grid = Grid::new(vec![x1, x2]);
    let cg = cell_mesh.grid();
    let mut region = Vec::with_capacity(grid.num_elements());
    let mut solid = Vec::with_capacity(grid.num_elements());
    for e in 0..grid.num_elements() {
        let m = grid.element_multi(e);
        if m[0] < layer_start {
            region.push(Region::Minus);
            solid.push(true);
        } else if m[0] < layer_start + r {
            region.push(Region::Layer);
            solid.push(cell_mesh.solid()[cg.element_index([m[0] - layer_start, m[1] % r, 0])]);
        } else {
            region.push(Region::Plus);
            solid.push(true);
        }
    }
    Ok(MicroMesh { epsilon: eps, cells, resolution: r, grid, region, solid, layer_start, cell_mesh })
}

impl MicroMesh {
    pub fn node(&self, i: usize, j: usize) -> usize {
        self.grid.node_index([i, j, 0])
    }

    pub fn num_removed(&self) -> usize {
        self.solid.iter().filter(|&&s| !s).count()
    }

    pub fn num_layer_elements(&self) -> usize {
        self.region.iter().filter(|&&r| r == Region::Layer).count()
    }

    fn ny(&self) -> usize {
        self.grid.n_el(1)
    }

    /// Nodes on S_ε± ordered by x₂.
    pub fn face_nodes(&self, face: Face) -> Vec<usize> {
        let i = match face {
            Face::Minus => self.layer_start,
            Face::Plus => self.layer_start + self.resolution,
        };
        (0..=self.ny()).map(|j| self.node(i, j)).collect()
    }

    pub fn left_nodes(&self) -> Vec<usize> {
        (0..=self.ny()).map(|j| self.node(0, j)).collect()
    }

    pub fn right_nodes(&self) -> Vec<usize> {
        let i = self.grid.n_el(0);
        (0..=self.ny()).map(|j| self.node(i, j)).collect()
    }

    /// Nodes on x₂ ∈ {0, W} that belong to the bulk (interface nodes excluded).
    pub fn lateral_bulk_nodes(&self) -> Vec<usize> {
        let (a, b) = (self.layer_start, self.layer_start + self.resolution);
        (0..=self.grid.n_el(0))
            .filter(|&i| i < a || i > b)
            .flat_map(|i| [self.node(i, 0), self.node(i, self.ny())])
            .collect()
    }

    /// Layer nodes on x₂ ∈ {0, W}, including the ends of S_ε±.
    pub fn lateral_layer_nodes(&self) -> Vec<usize> {
        (self.layer_start..=self.layer_start + self.resolution)
            .flat_map(|i| [self.node(i, 0), self.node(i, self.ny())])
            .collect()
    }

    /// Cell index of a layer element.
    pub fn cell_of(&self, e: usize) -> usize {
        self.grid.element_multi(e)[1] / self.resolution
    }

    /// Micro node of cell node `(a, b)` in cell `k`.
    pub fn layer_node(&self, k: usize, a: usize, b: usize) -> usize {
        self.node(self.layer_start + a, k * self.resolution + b)
    }

    fn discretization(&self, mats: [Option<Material>; 3]) -> Result<Discretization> {
        let mut used = Vec::new();
        let mut slot = [None; 3];
        for (k, m) in mats.into_iter().enumerate() {
            if let Some(m) = m {
                slot[k] = Some(used.len());
                used.push(m);
            }
        }
        let ids = (0..self.grid.num_elements())
            .map(|e| {
                if !self.solid[e] {
                    return None;
                }
                slot[self.region[e] as usize]
            })
            .collect();
        Discretization::new(self.grid.clone(), ids, used)
    }

    /// Plain-text dump: nodes, then elements with region and solid flag.
    pub fn export_text(&self) -> String {
        let mut s = format!(
            "# micro mesh epsilon={} cells={} resolution={} nodes={} elements={} removed={}\n",
            self.epsilon,
            self.cells,
            self.resolution,
            self.grid.num_nodes(),
            self.grid.num_elements(),
            self.num_removed()
        );
        s.push_str("nodes\n");
        for n in 0..self.grid.num_nodes() {
            let x = self.grid.node_coord(n);
            let _ = writeln!(s, "{n} {:e} {:e}", x[0], x[1]);
        }
        s.push_str("elements\n");
        for e in 0..self.grid.num_elements() {
            let nd = self.grid.element_nodes(e);
            let _ = writeln!(s, "{e} {} {} {} {} {:?} {}", nd[0], nd[1], nd[2], nd[3], self.region[e], self.solid[e] as u8);
        }
        s
    }

    /// Field value at `x` (None outside the mesh or inside a removed element).
    pub fn evaluate(&self, u: &[f64], x: &[f64; 2]) -> Option<[f64; 2]> {
        let (e, xi) = self.grid.locate(x)?;
        if !self.solid[e] {
            return None;
        }
        let n = shape_values(2, &xi);
        let nodes = self.grid.element_nodes(e);
        let mut out = [0.0; 2];
        for a in 0..4 {
            for c in 0..2 {
                out[c] += n[a] * u[nodes[a] * 2 + c];
            }
        }
        Some(out)
    }
}

/// Unfolded layer field: per cell, a nodal field on the reference cell grid.
pub fn unfold(mesh: &MicroMesh, u: &[f64]) -> Vec<Vec<f64>> {
    let r = mesh.resolution;
    let cg = mesh.cell_mesh.grid();
    (0..mesh.cells)
        .map(|k| {
            let mut out = vec![0.0; cg.num_nodes() * 2];
            for a in 0..=r {
                for b in 0..=r {
                    let cn = cg.node_index([a, b, 0]);
                    let mn = mesh.layer_node(k, a, b);
                    out[cn * 2] = u[mn * 2];
                    out[cn * 2 + 1] = u[mn * 2 + 1];
                }
            }
            out
        })
        .collect()
}

/// `(‖φ‖²_{L²(Ω_εᴹ)}, ε ‖𝒯_ε φ‖²_{L²(ω×Y₀)})`.
pub fn unfolding_norms(mesh: &MicroMesh, u: &[f64]) -> Result<(f64, f64)> {
    let unit = Material::isotropic(1.0, 1.0, 1.0, 2)?;
    let layer = mesh.discretization([None, Some(unit.clone()), None])?.assemble_mass();
    let lhs = sparse::dot(u, &layer.matvec(u));
    let cell = Discretization::for_cell(&mesh.cell_mesh, &unit)?.assemble_mass();
    let eps = mesh.epsilon;
    let rhs: f64 = unfold(mesh, u).iter().map(|t| eps * sparse::dot(t, &cell.matvec(t))).sum::<f64>() * eps;
    Ok((lhs, rhs))
}

/// Cell averages `(1/|Y₀|) ∫_{Y₀} 𝒯_ε(u)(x′, y) dy` per cell.
pub fn unfolded_cell_averages(mesh: &MicroMesh, u: &[f64]) -> Vec<[f64; 2]> {
    let mut sum = vec![[0.0; 2]; mesh.cells];
    let mut area = vec![0.0; mesh.cells];
    for e in 0..mesh.grid.num_elements() {
        if mesh.region[e] != Region::Layer || !mesh.solid[e] {
            continue;
        }
        let k = mesh.cell_of(e);
        let vol = mesh.grid.element_volume(e);
        area[k] += vol;
        for &n in &mesh.grid.element_nodes(e)[..4] {
            for c in 0..2 {
                sum[k][c] += 0.25 * vol * u[n * 2 + c];
            }
        }
    }
    sum.iter().zip(&area).map(|(s, a)| [s[0] / a, s[1] / a]).collect()
}

/// L∞-in-time norms entering the a priori estimate.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AprioriMonitor {
    /// `max_t ‖∂ₜu‖_{L²(Ω_ε±)}`, indexed like [`Face`].
    pub bulk_velocity: [f64; 2],
    pub layer_velocity: f64,
    pub layer_strain: f64,
    /// `Σ± bulk + ε^{-1/2} layer_velocity + ε^{γ/2} layer_strain`.
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct MicroSnapshot {
    pub step: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MicroSolution {
    pub config: MicroConfig,
    pub mesh: MicroMesh,
    pub snapshots: Vec<MicroSnapshot>,
    pub energy: Vec<f64>,
    pub work: Vec<f64>,
    pub monitor: AprioriMonitor,
    /// Largest relative mismatch of the bulk and layer reactions on S_ε±.
    pub traction_jump: f64,
    pub warnings: Vec<String>,
}

impl MicroSolution {
    pub fn energy_balance_error(&self) -> f64 {
        let scale = self.energy.iter().chain(&self.work).fold(0.0f64, |m, &e| m.max(e.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let e0 = self.energy[0];
        self.energy.iter().zip(&self.work).map(|(e, w)| (e - e0 - w).abs()).fold(0.0, f64::max) / scale
    }

    pub fn snapshot(&self, step: usize) -> Option<&MicroSnapshot> {
        self.snapshots.iter().find(|s| s.step == step)
    }

    pub fn final_snapshot(&self) -> &MicroSnapshot {
        self.snapshots.last().expect("final snapshot always stored")
    }
}

struct Operators {
    k: CsrMatrix,
    m: CsrMatrix,
    /// Region operators `[minus, layer, plus]` with physical materials.
    k_region: Vec<CsrMatrix>,
    m_region: Vec<CsrMatrix>,
    /// Unit-density region masses for the monitor.
    unit_mass: Vec<CsrMatrix>,
    layer: Discretization,
}

fn operators(cfg: &MicroConfig, mesh: &MicroMesh) -> Result<Operators> {
    let eps = cfg.epsilon;
    let (ks, rs) = if cfg.scale_layer { (eps.powi(cfg.gamma), 1.0 / eps) } else { (1.0, 1.0) };
    let lm = cfg.layer_material;
    let layer_mat = Material::isotropic(ks * lm.lambda, ks * lm.mu, rs * lm.rho, 2)?;
    let mats = [Some(cfg.minus.plane_strain()?), Some(layer_mat), Some(cfg.plus.plane_strain()?)];
    let full = mesh.discretization(mats.clone())?;
    let mut k_region = Vec::new();
    let mut m_region = Vec::new();
    let mut unit_mass = Vec::new();
    let unit = Material::isotropic(1.0, 1.0, 1.0, 2)?;
    let mut layer = None;
    for r in 0..3 {
        let mut only: [Option<Material>; 3] = [None, None, None];
        only[r] = mats[r].clone();
        let d = mesh.discretization(only)?;
        k_region.push(d.assemble_stiffness());
        m_region.push(d.assemble_mass());
        if r == 1 {
            layer = Some(d);
        }
        let mut u: [Option<Material>; 3] = [None, None, None];
        u[r] = Some(unit.clone());
        unit_mass.push(mesh.discretization(u)?.assemble_mass());
    }
    Ok(Operators {
        k: full.assemble_stiffness(),
        m: full.assemble_mass(),
        k_region,
        m_region,
        unit_mass,
        layer: layer.expect("layer region built"),
    })
}

pub fn solve_micro(cfg: &MicroConfig) -> Result<MicroSolution> {
    let mesh = build_micro_mesh(cfg)?;
    let ops = operators(cfg, &mesh)?;
    let eps = cfg.epsilon;
    let nn = mesh.grid.num_nodes();
    let ndof = 2 * nn;
    let mut b = DofMapBuilder::new(nn, 2).active(ops.layer_active_union(&mesh)?.as_slice());
    if cfg.right_end == EndCondition::Clamped {
        b = b.dirichlet_nodes(&mesh.right_nodes(), |_, _| 0.0);
    }
    if cfg.lateral == EndCondition::Clamped {
        b = b.dirichlet_nodes(&mesh.lateral_bulk_nodes(), |_, _| 0.0);
        if cfg.gamma == 1 {
            b = b.dirichlet_nodes(&mesh.lateral_layer_nodes(), |_, _| 0.0);
        }
    }
    if cfg.gamma != 1 {
        b = b.dirichlet_nodes(&mesh.lateral_layer_nodes(), |_, _| 0.0);
    }
    let dm = b.build()?;

    // per-component load patterns
    let unit_field = |pred: &dyn Fn(usize) -> bool, c: usize| -> Vec<f64> {
        let mut f = vec![0.0; ndof];
        for n in 0..nn {
            if pred(n) {
                f[n * 2 + c] = 1.0;
            }
        }
        f
    };
    let left = mesh.left_nodes();
    let x2 = mesh.grid.axis(1).to_vec();
    let traction_pattern: Vec<Vec<f64>> = (0..2)
        .map(|c| {
            let mut f = vec![0.0; ndof];
            for (j, &node) in left.iter().enumerate() {
                let lo = if j > 0 { x2[j] - x2[j - 1] } else { 0.0 };
                let hi = if j + 1 < x2.len() { x2[j + 1] - x2[j] } else { 0.0 };
                f[node * 2 + c] = 0.5 * (lo + hi) * cfg.profile.value(x2[j], cfg.width);
            }
            f
        })
        .collect();
    let all = |_: usize| true;
    let bulk_pattern: Vec<Vec<f64>> = (0..2)
        .map(|c| {
            let e = unit_field(&all, c);
            let a = ops.m_region[0].matvec(&e);
            let b = ops.m_region[2].matvec(&e);
            a.iter().zip(&b).map(|(x, y)| x + y).collect()
        })
        .collect();
    let layer_pattern: Vec<Vec<f64>> = (0..2).map(|c| ops.m_region[1].matvec(&unit_field(&all, c))).collect();
    let load_parts = |t: f64| -> (Vec<f64>, Vec<f64>) {
        let mut fb = vec![0.0; ndof];
        let mut fl = vec![0.0; ndof];
        let g = cfg.traction.value(t, 2);
        let bf = cfg.bulk_force.value(t, 2);
        let lf = cfg.layer.force.value(t, 2);
        for c in 0..2 {
            for i in 0..ndof {
                fb[i] += g[c] * traction_pattern[c][i] + bf[c] * bulk_pattern[c][i];
                fl[i] += lf[c] * layer_pattern[c][i];
            }
        }
        (fb, fl)
    };
    let load = |n: usize| {
        let (fb, fl) = load_parts(cfg.time.time(n));
        fb.iter().zip(&fl).map(|(a, b)| a + b).collect::<Vec<f64>>()
    };

    // initial data
    let half = 0.5 * eps;
    let mut u0 = vec![0.0; ndof];
    let mut v0 = vec![0.0; ndof];
    for n in 0..nn {
        let x = mesh.grid.node_coord(n);
        let inside = x[0].abs() < half * (1.0 - 1e-12);
        for (field, gauss, layer) in [
            (&mut u0, &cfg.initial.displacement, &cfg.layer.initial_displacement),
            (&mut v0, &cfg.initial.velocity, &cfg.layer.initial_velocity),
        ] {
            let val: Vec<f64> = if inside && cfg.gamma == 1 {
                layer.clone()
            } else if inside {
                gauss.as_ref().map_or(vec![], |g| g.value(0.0))
            } else {
                gauss.as_ref().map_or(vec![], |g| g.value(x[0]))
            };
            for c in 0..2.min(val.len()) {
                field[n * 2 + c] = val[c];
            }
        }
    }
    let fixed = dm.fixed_values();
    if fixed.iter().any(|&v| v != 0.0) {
        return Err(Error::InvalidParameter("only homogeneous Dirichlet data are supported".into()));
    }

    let mut warnings = Vec::new();
    let layer_area: f64 = ops.layer.solid_volume();
    let fm_norm = (0..=cfg.time.steps)
        .map(|n| {
            let f = cfg.layer.force.value(cfg.time.time(n), 2);
            cfg.time.dt() * (f[0] * f[0] + f[1] * f[1]) * layer_area
        })
        .sum::<f64>()
        .sqrt();
    if fm_norm > cfg.scaling_constant * eps.sqrt() {
        warnings.push(format!(
            "layer force violates the scaling bound: ||f^M|| = {fm_norm:.3e} > C sqrt(eps) = {:.3e}",
            cfg.scaling_constant * eps.sqrt()
        ));
    }

    let nm = Newmark::new(dm.reduce_matrix(&ops.m), dm.reduce_matrix(&ops.k), cfg.time.dt())?;
    let f0 = dm.restrict(&load(0));
    let mut s = nm.init(dm.gather(&u0), dm.gather(&v0), &f0);
    let mut sol = MicroSolution {
        config: cfg.clone(),
        mesh: mesh.clone(),
        snapshots: Vec::new(),
        energy: Vec::new(),
        work: Vec::new(),
        monitor: AprioriMonitor::default(),
        traction_jump: 0.0,
        warnings,
    };
    let faces: Vec<usize> = Face::BOTH
        .iter()
        .flat_map(|&f| mesh.face_nodes(f))
        .filter(|&n| (0..2).all(|c| matches!(dm.target(n * 2 + c), crate::fem::DofTarget::Free(_))))
        .collect();
    let norm = |m: &CsrMatrix, x: &[f64]| sparse::dot(x, &m.matvec(x)).max(0.0).sqrt();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let stride = cfg.snapshot_stride;
    for n in 0..=cfg.time.steps {
        let f = if n == 0 { f0.clone() } else { dm.restrict(&load(n)) };
        if n > 0 {
            s = nm.step(&s, &f);
        }
        let u = dm.expand_with(&s.u, 1.0);
        let v = dm.expand_with(&s.v, 0.0);
        sol.energy.push(nm.energy(&s));
        let w = match &prev {
            None => 0.0,
            Some((u_old, f_old)) => sol.work.last().copied().unwrap_or(0.0) + step_work(u_old, &s.u, f_old, &f),
        };
        sol.work.push(w);
        prev = Some((s.u.clone(), f));
        let mon = &mut sol.monitor;
        mon.bulk_velocity[Face::Minus.index()] = mon.bulk_velocity[Face::Minus.index()].max(norm(&ops.unit_mass[0], &v));
        mon.bulk_velocity[Face::Plus.index()] = mon.bulk_velocity[Face::Plus.index()].max(norm(&ops.unit_mass[2], &v));
        mon.layer_velocity = mon.layer_velocity.max(norm(&ops.unit_mass[1], &v));
        mon.layer_strain = mon.layer_strain.max(ops.layer.strain_norm_sq(&u).sqrt());
        let keep = (stride > 0 && n % stride == 0) || n == cfg.time.steps;
        if keep {
            let a = dm.expand_with(&s.a, 0.0);
            let (fb, fl) = load_parts(cfg.time.time(n));
            let react = |r: usize, fx: &[f64]| -> Vec<f64> {
                let ku = ops.k_region[r].matvec(&u);
                let ma = ops.m_region[r].matvec(&a);
                (0..ndof).map(|i| ku[i] + ma[i] - fx[i]).collect()
            };
            let zero = vec![0.0; ndof];
            let rm = react(0, &fb);
            let rp = react(2, &zero);
            let rl = react(1, &fl);
            let (mut mismatch, mut scale) = (0.0f64, 0.0f64);
            for &node in &faces {
                for c in 0..2 {
                    let i = node * 2 + c;
                    let bulk = rm[i] + rp[i];
                    mismatch = mismatch.max((bulk + rl[i]).abs());
                    scale = scale.max(bulk.abs());
                }
            }
            if scale > 0.0 {
                sol.traction_jump = sol.traction_jump.max(mismatch / scale);
            }
            sol.snapshots.push(MicroSnapshot { step: n, u, v });
        }
    }
    let m = &mut sol.monitor;
    m.total = m.bulk_velocity[0] + m.bulk_velocity[1] + m.layer_velocity / eps.sqrt() + eps.powf(0.5 * cfg.gamma as f64) * m.layer_strain;
    Ok(sol)
}

impl Operators {
    fn layer_active_union(&self, mesh: &MicroMesh) -> Result<Vec<bool>> {
        let mut active = vec![false; mesh.grid.num_nodes()];
        for e in (0..mesh.grid.num_elements()).filter(|&e| mesh.solid[e]) {
            for &n in &mesh.grid.element_nodes(e)[..4] {
                active[n] = true;
            }
        }
        Ok(active)
    }
}

/// Relative errors of a micro run against a matched macro run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MicroMacroError {
    pub epsilon: f64,
    pub gamma: i32,
    pub bulk_l2: f64,
    pub trace_l2: f64,
    /// Cell-averaged unfolded layer field against u^M (absent for γ = 1).
    pub layer_unfolded: Option<f64>,
    pub apriori_monitor: f64,
    /// Relative defect of the unfolding isometry on the final layer field.
    pub unfolding_isometry: f64,
    pub traction_jump: f64,
    pub energy_balance: f64,
}

impl MicroMacroError {
    pub const CSV_HEADER: &'static str = "epsilon,gamma,bulk_L2_err,trace_L2_err,layer_unfolded_err,apriori_monitor";

    pub fn csv_row(&self) -> String {
        let layer = self.layer_unfolded.map_or("nan".to_string(), |v| format!("{v:e}"));
        format!("{:e},{},{:e},{:e},{},{:e}", self.epsilon, self.gamma, self.bulk_l2, self.trace_l2, layer, self.apriori_monitor)
    }
}

pub fn errors_csv(rows: &[MicroMacroError]) -> String {
    let mut s = String::from(MicroMacroError::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// `(∫ |u_micro − u_macro|², ∫ |u_macro|²)` over the macro bulk mesh, skipping points
/// inside the layer band.
pub fn bulk_difference(mesh: &MicroMesh, u_micro: &[f64], bulk: &BulkSystem, u_macro: &[f64]) -> Result<(f64, f64)> {
    let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let (mut err, mut refn) = (0.0, 0.0);
    for side in Face::BOTH {
        let s = &bulk.sides[side.index()];
        for e in 0..s.grid.num_elements() {
            let o = s.grid.element_origin(e);
            let h = s.grid.element_size(e);
            let w = 0.25 * h[0] * h[1];
            for gx in gauss {
                for gy in gauss {
                    let x = [o[0] + gx * h[0], o[1] + gy * h[1]];
                    if x[0].abs() < 0.5 * mesh.epsilon {
                        continue;
                    }
                    let um = bulk.evaluate(u_macro, side, &x)?;
                    let uu = mesh.evaluate(u_micro, &x).ok_or_else(|| Error::GridMismatch(format!("point {x:?} outside the micro mesh")))?;
                    for c in 0..2 {
                        err += w * (uu[c] - um[c]).powi(2);
                        refn += w * um[c] * um[c];
                    }
                }
            }
        }
    }
    Ok((err, refn))
}

fn rel(err: f64, refn: f64) -> f64 {
    if refn == 0.0 {
        if err == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (err / refn).sqrt()
    }
}

pub fn compare_micro_macro(micro: &MicroSolution, macro_run: &MacroSolution, gamma: i32) -> Result<MicroMacroError> {
    if macro_run.mode != MacroMode::Plane2d {
        return Err(Error::GridMismatch("micro comparison needs a plane_2d macro run".into()));
    }
    if macro_run.gamma != gamma || micro.config.gamma != gamma {
        return Err(Error::InvalidParameter(format!(
            "gamma mismatch: micro {}, macro {}, requested {gamma}",
            micro.config.gamma, macro_run.gamma
        )));
    }
    if macro_run.grid != micro.config.time {
        return Err(Error::GridMismatch("micro and macro runs use different time grids".into()));
    }
    let mesh = &micro.mesh;
    let bulk = &macro_run.bulk;
    let steps: Vec<usize> = micro.snapshots.iter().map(|s| s.step).filter(|&n| macro_run.snapshot(n).is_some()).collect();
    if steps.is_empty() {
        return Err(Error::GridMismatch("no common snapshot steps".into()));
    }
    let eps = mesh.epsilon;
    let x2 = mesh.grid.axis(1);
    let (mut be, mut br, mut te, mut tr, mut le, mut lr) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for &n in &steps {
        let um = &micro.snapshot(n).expect("common step").u;
        let u_mac = macro_run.snapshot(n).expect("common step");
        let (e, r) = bulk_difference(mesh, um, bulk, u_mac)?;
        be += e;
        br += r;
        for face in Face::BOTH {
            let nodes = mesh.face_nodes(face);
            for (j, &node) in nodes.iter().enumerate() {
                let lo = if j > 0 { x2[j] - x2[j - 1] } else { 0.0 };
                let hi = if j + 1 < x2.len() { x2[j + 1] - x2[j] } else { 0.0 };
                let w = 0.5 * (lo + hi);
                let mac = bulk.evaluate(u_mac, face, &[0.0, x2[j]])?;
                for c in 0..2 {
                    te += w * (um[node * 2 + c] - mac[c]).powi(2);
                    tr += w * mac[c] * mac[c];
                }
            }
        }
        if gamma != 1 {
            for (k, avg) in unfolded_cell_averages(mesh, um).iter().enumerate() {
                let xc = (k as f64 + 0.5) * eps;
                let mac = bulk.evaluate(u_mac, Face::Minus, &[0.0, xc])?;
                for c in 0..2 {
                    le += eps * (avg[c] - mac[c]).powi(2);
                    lr += eps * mac[c] * mac[c];
                }
            }
        }
    }
    let (lhs, rhs) = unfolding_norms(mesh, &micro.final_snapshot().u)?;
    Ok(MicroMacroError {
        epsilon: eps,
        gamma,
        bulk_l2: rel(be, br),
        trace_l2: rel(te, tr),
        layer_unfolded: (gamma != 1).then(|| rel(le, lr)),
        apriori_monitor: micro.monitor.total,
        unfolding_isometry: if lhs == 0.0 { (lhs - rhs).abs() } else { (lhs - rhs).abs() / lhs },
        traction_jump: micro.traction_jump,
        energy_balance: micro.energy_balance_error(),
    })
}

/// Micro runs for each ε (concurrently) compared with one macro run.
pub fn run_ladder(base: &MicroConfig, epsilons: &[f64], macro_run: &MacroSolution) -> Result<Vec<MicroMacroError>> {
    epsilons
        .par_iter()
        .map(|&eps| {
            let mut cfg = base.clone();
            cfg.epsilon = eps;
            let sol = solve_micro(&cfg)?;
            compare_micro_macro(&sol, macro_run, cfg.gamma)
        })
        .collect()
}
