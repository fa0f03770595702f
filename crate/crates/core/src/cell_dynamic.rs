//! Time-dependent cell problems χᵢ±, ηᵢ±, θᵢ, ũ₁ᴹ on the cell with Dirichlet
//! faces S±, the memory kernels G, F extracted from face reactions, and the
//! convolution representation of the layer displacement.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::cell_static::CellModel;
use crate::error::{Error, Result};
use crate::fem::{sparse, ConstrainedSolver, DofMap, DofMapBuilder, Regularization};
use crate::mesh::FaceTag;
use crate::newmark::{Newmark, State};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_final: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        let g = TimeGrid { t_final, steps };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) || self.steps == 0 {
            return Err(Error::InvalidParameter(format!(
                "time grid needs T > 0 and steps > 0 (T={}, steps={})",
                self.t_final, self.steps
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t_final * n as f64 / self.steps as f64
    }

    /// Step index of time `t`, failing if `t` is not on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = t / self.dt();
        let n = x.round();
        if (x - n).abs() > 1e-9 || n < 0.0 || n as usize > self.steps {
            return Err(Error::GridMismatch(format!("time {t} is not on the grid (dt={})", self.dt())));
        }
        Ok(n as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    Plus,
    Minus,
}

impl Face {
    pub const BOTH: [Face; 2] = [Face::Plus, Face::Minus];

    pub fn index(self) -> usize {
        match self {
            Face::Plus => 0,
            Face::Minus => 1,
        }
    }

    pub fn tag(self) -> FaceTag {
        match self {
            Face::Plus => FaceTag::SPlus,
            Face::Minus => FaceTag::SMinus,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Face::Plus => "plus",
            Face::Minus => "minus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicKind {
    Chi,
    Eta,
    Theta,
    U1Tilde,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Lifting {
    /// `(y₁ + ½) eᵢ` on S+, `(½ − y₁) eᵢ` on S−.
    #[default]
    Linear,
    /// Static elasticity solution with the same face traces.
    Elastostatic,
}

/// Linear-blend lifting with trace `eᵢ` on `face` and zero on the opposite face.
pub fn boundary_lifting(cell: &CellModel, i: usize, face: Face) -> Vec<f64> {
    let d = cell.dim();
    let g = cell.mesh.grid();
    let mut phi = vec![0.0; cell.num_dofs()];
    for (n, &act) in cell.mesh.active_nodes().iter().enumerate() {
        if act {
            let y1 = g.node_coord(n)[0];
            phi[n * d + i] = match face {
                Face::Plus => y1 + 0.5,
                Face::Minus => 0.5 - y1,
            };
        }
    }
    phi
}

fn face_nodes(cell: &CellModel) -> Vec<usize> {
    let mut nodes = cell.mesh.nodes_with_tag(FaceTag::SPlus);
    nodes.extend(cell.mesh.nodes_with_tag(FaceTag::SMinus));
    nodes
}

fn dirichlet_dofmap(cell: &CellModel) -> Result<DofMap> {
    DofMapBuilder::new(cell.mesh.grid().num_nodes(), cell.dim())
        .active(cell.mesh.active_nodes())
        .periodic(cell.mesh.periodic_pairs())
        .dirichlet_nodes(&face_nodes(cell), |_, _| 0.0)
        .build()
}

/// Lifting selected by kind.
pub fn lifting_field(cell: &CellModel, i: usize, face: Face, kind: Lifting) -> Result<Vec<f64>> {
    let lin = boundary_lifting(cell, i, face);
    match kind {
        Lifting::Linear => Ok(lin),
        Lifting::Elastostatic => {
            let d = cell.dim();
            let dm = DofMapBuilder::new(cell.mesh.grid().num_nodes(), d)
                .active(cell.mesh.active_nodes())
                .periodic(cell.mesh.periodic_pairs())
                .dirichlet_nodes(&face_nodes(cell), |n, c| lin[n * d + c])
                .build()?;
            let zero = vec![0.0; cell.num_dofs()];
            Ok(ConstrainedSolver::new(&cell.stiffness, &dm, None, Regularization::Dirichlet)?.solve(&zero)?.u)
        }
    }
}

/// Time series of one dynamic cell problem (full nodal fields).
#[derive(Clone, Debug)]
pub struct DynamicCellSolution {
    pub kind: DynamicKind,
    pub direction: Option<Face>,
    pub component: usize,
    pub grid: TimeGrid,
    pub stride: usize,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    /// Per step and face (plus, minus): summed nodal reaction `K u + M a` per component.
    pub reactions: Vec<[Vec<f64>; 2]>,
    /// Per step: `½ v·M v + ½ u·K u` on the full field.
    pub energy: Vec<f64>,
    pub lifting: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl DynamicCellSolution {
    /// Snapshot index for step `n` (must be a stored step).
    pub fn snapshot(&self, n: usize) -> Result<usize> {
        if n % self.stride != 0 || n > self.grid.steps {
            return Err(Error::GridMismatch(format!("step {n} not stored (stride {})", self.stride)));
        }
        Ok(n / self.stride)
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        let scale = self.energy.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / scale
    }
}

/// Prescribed face motion: full-length `(u_d, a_d)` at step `n`.
pub type BoundaryMotion<'a> = &'a (dyn Fn(usize) -> (Vec<f64>, Vec<f64>) + Sync);

/// Cell operators with S± clamped, factorized once for a time grid.
pub struct DynamicCellOperator<'a> {
    cell: &'a CellModel,
    dofmap: DofMap,
    newmark: Newmark,
    grid: TimeGrid,
    omega_max: f64,
}

impl<'a> DynamicCellOperator<'a> {
    pub fn new(cell: &'a CellModel, grid: TimeGrid) -> Result<Self> {
        grid.validate()?;
        let dofmap = dirichlet_dofmap(cell)?;
        let m = dofmap.reduce_matrix(&cell.mass);
        let k = dofmap.reduce_matrix(&cell.stiffness);
        let newmark = Newmark::new(m, k, grid.dt())?;
        let omega_max = newmark.lanczos_max_eigenvalue(30).sqrt();
        Ok(DynamicCellOperator { cell, dofmap, newmark, grid, omega_max })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn cell(&self) -> &CellModel {
        self.cell
    }

    pub fn dofmap(&self) -> &DofMap {
        &self.dofmap
    }

    pub fn integrator(&self) -> &Newmark {
        &self.newmark
    }

    /// Estimated largest discrete angular frequency.
    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    fn resolution_warning(&self) -> Option<String> {
        let period = 2.0 * std::f64::consts::PI / self.omega_max;
        (self.grid.dt() > 0.5 * period).then(|| {
            format!(
                "dt = {:.3e} exceeds half the smallest discrete period ({:.3e}); high modes are under-resolved",
                self.grid.dt(),
                0.5 * period
            )
        })
    }

    fn full(&self, x: &[f64], fixed: &[f64]) -> Vec<f64> {
        let mut f = self.dofmap.expand_with(x, 0.0);
        for (a, b) in f.iter_mut().zip(fixed) {
            *a += b;
        }
        f
    }

    /// General run: initial full fields, prescribed face motion, optional full body load.
    ///
    /// The free initial velocity is the mass-norm best approximation of `v0` among fields
    /// whose face values equal `face_v0` (zero when absent).
    #[allow(clippy::too_many_arguments)]
    pub fn run(
        &self,
        kind: DynamicKind,
        direction: Option<Face>,
        component: usize,
        u0: &[f64],
        v0: &[f64],
        face_v0: Option<&[f64]>,
        boundary: Option<BoundaryMotion>,
        body: Option<&(dyn Fn(usize) -> Vec<f64> + Sync)>,
        stride: usize,
    ) -> Result<DynamicCellSolution> {
        let cell = self.cell;
        let n_full = cell.num_dofs();
        if u0.len() != n_full || v0.len() != n_full {
            return Err(Error::DimensionMismatch { expected: n_full, got: u0.len() });
        }
        let stride = stride.max(1);
        let zero = vec![0.0; n_full];
        let bc = |n: usize| match boundary {
            Some(b) => b(n),
            None => (zero.clone(), zero.clone()),
        };
        let load = |n: usize, ud: &[f64], ad: &[f64]| -> Vec<f64> {
            let ku = cell.stiffness.matvec(ud);
            let ma = cell.mass.matvec(ad);
            let mut f: Vec<f64> = (0..n_full).map(|i| -ku[i] - ma[i]).collect();
            if let Some(b) = body {
                for (fi, bi) in f.iter_mut().zip(b(n)) {
                    *fi += bi;
                }
            }
            self.dofmap.restrict(&f)
        };
        let record = |sol: &mut DynamicCellSolution, n: usize, s: &State, ud: &[f64], ad: &[f64]| {
            let u = self.full(&s.u, ud);
            let a = self.full(&s.a, ad);
            let mut r = cell.stiffness.matvec(&u);
            let ma = cell.mass.matvec(&a);
            for i in 0..n_full {
                r[i] += ma[i];
            }
            if let Some(b) = body {
                for (ri, bi) in r.iter_mut().zip(b(n)) {
                    *ri -= bi;
                }
            }
            sol.reactions.push([cell.face_reaction(&r, FaceTag::SPlus), cell.face_reaction(&r, FaceTag::SMinus)]);
            let v = self.dofmap.expand_with(&s.v, 0.0);
            let e = 0.5 * sparse::dot(&v, &cell.mass.matvec(&v)) + 0.5 * sparse::dot(&u, &cell.stiffness.matvec(&u));
            sol.energy.push(e);
            if n % stride == 0 {
                sol.u.push(u);
                sol.v.push(v);
                sol.a.push(a);
            }
        };
        let mut sol = DynamicCellSolution {
            kind,
            direction,
            component,
            grid: self.grid,
            stride,
            u: Vec::new(),
            v: Vec::new(),
            a: Vec::new(),
            reactions: Vec::with_capacity(self.grid.steps + 1),
            energy: Vec::with_capacity(self.grid.steps + 1),
            lifting: None,
            warnings: self.resolution_warning().into_iter().collect(),
        };
        for w in &sol.warnings {
            log::warn!("{w}");
        }
        let (ud, ad) = bc(0);
        let f0 = load(0, &ud, &ad);
        let mut mismatch = self.face_part(v0);
        if let Some(fv) = face_v0 {
            for (m, f) in mismatch.iter_mut().zip(self.face_part(fv)) {
                *m -= f;
            }
        }
        let mut vf = self.dofmap.gather(v0);
        if mismatch.iter().any(|&x| x != 0.0) {
            let corr = self.newmark.solve_mass(&self.dofmap.restrict(&cell.mass.matvec(&mismatch)));
            for (v, c) in vf.iter_mut().zip(corr) {
                *v += c;
            }
        }
        let mut state = self.newmark.init(self.dofmap.gather(u0), vf, &f0);
        record(&mut sol, 0, &state, &ud, &ad);
        for n in 1..=self.grid.steps {
            let (ud, ad) = bc(n);
            let f = load(n, &ud, &ad);
            state = self.newmark.step(&state, &f);
            record(&mut sol, n, &state, &ud, &ad);
        }
        Ok(sol)
    }

    /// One of the kinds with its defining data; `lifting` selects φ for chi/eta,
    /// `u1` is the initial velocity for `U1Tilde`.
    pub fn solve(
        &self,
        kind: DynamicKind,
        direction: Option<Face>,
        i: usize,
        lifting: Lifting,
        u1: Option<&[f64]>,
        stride: usize,
    ) -> Result<DynamicCellSolution> {
        let d = self.cell.dim();
        if i >= d {
            return Err(Error::InvalidParameter(format!("component {i} out of range")));
        }
        let n_full = self.cell.num_dofs();
        let zero = vec![0.0; n_full];
        let need_dir = || direction.ok_or_else(|| Error::InvalidParameter(format!("{kind:?} needs a direction")));
        match kind {
            DynamicKind::Chi => {
                let phi = lifting_field(self.cell, i, need_dir()?, lifting)?;
                let fixed = self.face_part(&phi);
                let motion = move |_n: usize| (fixed.clone(), vec![0.0; fixed.len()]);
                let mut s = self.run(kind, direction, i, &phi, &zero, None, Some(&motion), None, stride)?;
                s.lifting = Some(phi);
                Ok(s)
            }
            DynamicKind::Eta => {
                let phi = lifting_field(self.cell, i, need_dir()?, lifting)?;
                let v0: Vec<f64> = phi.iter().map(|x| -x).collect();
                let mut s = self.run(kind, direction, i, &zero, &v0, None, None, None, stride)?;
                s.lifting = Some(phi);
                Ok(s)
            }
            DynamicKind::Theta => {
                let v0: Vec<f64> = (0..n_full).map(|k| if k % d == i && self.cell.mesh.active_nodes()[k / d] { 1.0 } else { 0.0 }).collect();
                self.run(kind, None, i, &zero, &v0, None, None, None, stride)
            }
            DynamicKind::U1Tilde => {
                let v0 = u1.ok_or_else(|| Error::Missing("initial layer velocity u1".into()))?;
                self.run(kind, None, i, &zero, v0, None, None, None, stride)
            }
        }
    }

    /// Restriction of a full field to the Dirichlet face dofs (zero elsewhere).
    pub fn face_part(&self, full: &[f64]) -> Vec<f64> {
        let d = self.cell.dim();
        let mut out = vec![0.0; full.len()];
        for n in face_nodes(self.cell) {
            for c in 0..d {
                out[n * d + c] = full[n * d + c];
            }
        }
        out
    }
}

/// Convenience wrapper factorizing the operator for a single solve.
pub fn solve_dynamic_cell(
    cell: &CellModel,
    kind: DynamicKind,
    direction: Option<Face>,
    i: usize,
    grid: TimeGrid,
) -> Result<DynamicCellSolution> {
    DynamicCellOperator::new(cell, grid)?.solve(kind, direction, i, Lifting::Linear, None, 1)
}

/// χᵢ± and ηᵢ± for all components and faces, plus optionally θᵢ.
#[derive(Clone, Debug)]
pub struct CellSolutionSet {
    pub grid: TimeGrid,
    pub lifting: Lifting,
    /// Indexed `[face][component]`.
    pub chi: [Vec<DynamicCellSolution>; 2],
    pub eta: [Vec<DynamicCellSolution>; 2],
    pub theta: Vec<DynamicCellSolution>,
    /// Face mass block, laid out like one time slice of [`MemoryKernelTable`].
    pub face_mass: Vec<f64>,
    pub spec_hash: String,
}

pub fn solve_cell_solution_set(
    cell: &CellModel,
    grid: TimeGrid,
    lifting: Lifting,
    with_theta: bool,
    stride: usize,
) -> Result<CellSolutionSet> {
    let op = DynamicCellOperator::new(cell, grid)?;
    let d = cell.dim();
    let mut jobs = Vec::new();
    for face in Face::BOTH {
        for i in 0..d {
            jobs.push((DynamicKind::Chi, Some(face), i));
            jobs.push((DynamicKind::Eta, Some(face), i));
        }
    }
    if with_theta {
        for i in 0..d {
            jobs.push((DynamicKind::Theta, None, i));
        }
    }
    let sols = jobs
        .par_iter()
        .map(|&(k, f, i)| op.solve(k, f, i, lifting, None, stride))
        .collect::<Result<Vec<_>>>()?;
    let mut chi: [Vec<DynamicCellSolution>; 2] = [Vec::new(), Vec::new()];
    let mut eta: [Vec<DynamicCellSolution>; 2] = [Vec::new(), Vec::new()];
    let mut theta = Vec::new();
    for s in sols {
        match (s.kind, s.direction) {
            (DynamicKind::Chi, Some(f)) => chi[f.index()].push(s),
            (DynamicKind::Eta, Some(f)) => eta[f.index()].push(s),
            _ => theta.push(s),
        }
    }
    let face_mass = face_mass_block(cell, &eta);
    Ok(CellSolutionSet { grid, lifting, chi, eta, theta, face_mass, spec_hash: cell.mesh.spec().hash() })
}

/// `m^{αβ}_{ji}`: reaction on face β, component j, of `M (φ + ∂ₜη(0))` for the lifting
/// φ of face α, direction i. This is the mass Schur complement of the face dofs: a
/// moving trace accelerates the face nodes, which the χ/η reactions do not contain.
/// The block vanishes under mesh refinement.
fn face_mass_block(cell: &CellModel, eta: &[Vec<DynamicCellSolution>; 2]) -> Vec<f64> {
    let d = cell.dim();
    let mut out = vec![0.0; 4 * d * d];
    for alpha in Face::BOTH {
        for (i, e) in eta[alpha.index()].iter().enumerate() {
            let Some(phi) = &e.lifting else { continue };
            let x: Vec<f64> = phi.iter().zip(&e.v[0]).map(|(p, v)| p + v).collect();
            let r = cell.mass.matvec(&x);
            for beta in Face::BOTH {
                let rb = cell.face_reaction(&r, beta.tag());
                for j in 0..d {
                    out[((alpha.index() * 2 + beta.index()) * d + j) * d + i] = rb[j];
                }
            }
        }
    }
    out
}

/// Sampled kernels `G^{αβ}_{ji}(τₙ)`, `F^{αβ}_{ji}(τₙ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryKernelTable {
    pub dim: usize,
    pub grid: TimeGrid,
    pub spec_hash: String,
    g: Vec<f64>,
    f: Vec<f64>,
    face_mass: Vec<f64>,
}

impl MemoryKernelTable {
    pub fn zeros(dim: usize, grid: TimeGrid) -> Self {
        let n = (grid.steps + 1) * 4 * dim * dim;
        MemoryKernelTable { dim, grid, spec_hash: String::new(), g: vec![0.0; n], f: vec![0.0; n], face_mass: vec![0.0; 4 * dim * dim] }
    }

    fn idx(&self, n: usize, alpha: Face, beta: Face, j: usize, i: usize) -> usize {
        let d = self.dim;
        (((n * 2 + alpha.index()) * 2 + beta.index()) * d + j) * d + i
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt()
    }

    pub fn steps(&self) -> usize {
        self.grid.steps
    }

    pub fn g(&self, n: usize, alpha: Face, beta: Face, j: usize, i: usize) -> f64 {
        self.g[self.idx(n, alpha, beta, j, i)]
    }

    pub fn f(&self, n: usize, alpha: Face, beta: Face, j: usize, i: usize) -> f64 {
        self.f[self.idx(n, alpha, beta, j, i)]
    }

    /// Instantaneous face mass coupling the trace acceleration on α to the reaction on β.
    pub fn face_mass(&self, alpha: Face, beta: Face, j: usize, i: usize) -> f64 {
        self.face_mass[self.idx(0, alpha, beta, j, i)]
    }

    pub fn set_face_mass(&mut self, alpha: Face, beta: Face, j: usize, i: usize, v: f64) {
        let k = self.idx(0, alpha, beta, j, i);
        self.face_mass[k] = v;
    }

    pub fn set_g(&mut self, n: usize, alpha: Face, beta: Face, j: usize, i: usize, v: f64) {
        let k = self.idx(n, alpha, beta, j, i);
        self.g[k] = v;
    }

    pub fn set_f(&mut self, n: usize, alpha: Face, beta: Face, j: usize, i: usize, v: f64) {
        let k = self.idx(n, alpha, beta, j, i);
        self.f[k] = v;
    }

    /// `d x d` block (row j, column i).
    pub fn g_matrix(&self, n: usize, alpha: Face, beta: Face) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |j, i| self.g(n, alpha, beta, j, i))
    }

    pub fn f_matrix(&self, n: usize, alpha: Face, beta: Face) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |j, i| self.f(n, alpha, beta, j, i))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut t = self.clone();
        t.g.iter_mut().for_each(|v| *v *= c);
        t.f.iter_mut().for_each(|v| *v *= c);
        t.face_mass.iter_mut().for_each(|v| *v *= c);
        t
    }

    /// Same kernels on every `m`-th step (coarser grid).
    pub fn subsample(&self, m: usize) -> Result<Self> {
        if m == 0 || self.grid.steps % m != 0 {
            return Err(Error::GridMismatch(format!("cannot subsample {} steps by {m}", self.grid.steps)));
        }
        let grid = TimeGrid::new(self.grid.t_final, self.grid.steps / m)?;
        let mut t = MemoryKernelTable::zeros(self.dim, grid);
        t.spec_hash = self.spec_hash.clone();
        t.face_mass = self.face_mass.clone();
        let block = 4 * self.dim * self.dim;
        for n in 0..=grid.steps {
            t.g[n * block..(n + 1) * block].copy_from_slice(&self.g[n * m * block..(n * m + 1) * block]);
            t.f[n * block..(n + 1) * block].copy_from_slice(&self.f[n * m * block..(n * m + 1) * block]);
        }
        Ok(t)
    }

    /// Face reactions of the layer response to a unit step in trace velocity on face α,
    /// `∫₀^τ G(s) ds + F(τ)` (trapezoidal), flattened like the table.
    pub fn step_trace_response(&self) -> Vec<f64> {
        let block = 4 * self.dim * self.dim;
        let dt = self.dt();
        let mut acc = vec![0.0; block];
        let mut out = Vec::with_capacity(self.g.len());
        for n in 0..=self.grid.steps {
            if n > 0 {
                for k in 0..block {
                    acc[k] += 0.5 * dt * (self.g[(n - 1) * block + k] + self.g[n * block + k]);
                }
            }
            out.extend((0..block).map(|k| acc[k] + self.f[n * block + k]));
        }
        out
    }

    pub fn max_abs_f0(&self) -> f64 {
        let block = 4 * self.dim * self.dim;
        self.f[..block].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm_g(&self) -> f64 {
        sparse::norm(&self.g)
    }

    pub fn norm_f(&self) -> f64 {
        sparse::norm(&self.f)
    }

    /// Columns `tau, alpha, beta, j, i, G_value, F_value` (indices one-based).
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# kernels dt={:e} T={:e} spec={}\ntau,alpha,beta,j,i,G_value,F_value\n",
            self.dt(),
            self.grid.t_final,
            self.spec_hash
        );
        for n in 0..=self.grid.steps {
            let tau = self.grid.time(n);
            for alpha in Face::BOTH {
                for beta in Face::BOTH {
                    for j in 0..self.dim {
                        for i in 0..self.dim {
                            let _ = writeln!(
                                s,
                                "{:e},{},{},{},{},{:e},{:e}",
                                tau,
                                alpha.name(),
                                beta.name(),
                                j + 1,
                                i + 1,
                                self.g(n, alpha, beta, j, i),
                                self.f(n, alpha, beta, j, i)
                            );
                        }
                    }
                }
            }
        }
        s
    }
}

/// Kernels from the face reactions of the χ (G) and η (F) solutions.
pub fn extract_kernels(set: &CellSolutionSet) -> Result<MemoryKernelTable> {
    let d = set.chi[0].len();
    for face in 0..2 {
        if set.chi[face].len() != d || set.eta[face].len() != d || d == 0 {
            return Err(Error::Missing("chi/eta solutions for every face and component".into()));
        }
    }
    for s in set.chi.iter().chain(set.eta.iter()).flatten() {
        if s.grid != set.grid || s.reactions.len() != set.grid.steps + 1 {
            return Err(Error::GridMismatch("dynamic solutions use different time grids".into()));
        }
    }
    let mut t = MemoryKernelTable::zeros(d, set.grid);
    t.spec_hash = set.spec_hash.clone();
    if set.face_mass.len() == 4 * d * d {
        t.face_mass = set.face_mass.clone();
    }
    for alpha in Face::BOTH {
        for i in 0..d {
            let chi = &set.chi[alpha.index()][i];
            let eta = &set.eta[alpha.index()][i];
            for n in 0..=set.grid.steps {
                for beta in Face::BOTH {
                    for j in 0..d {
                        t.set_g(n, alpha, beta, j, i, chi.reactions[n][beta.index()][j]);
                        t.set_f(n, alpha, beta, j, i, eta.reactions[n][beta.index()][j]);
                    }
                }
            }
        }
    }
    Ok(t)
}

/// Second time derivative used by the volume diagnostic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SecondDerivative {
    /// Integrator accelerations.
    Newmark,
    /// Central differences of the stored velocities.
    CentralDifference,
}

/// `∫ ∂t(ρ ∂t X)(τ) · Y(t) + A e(X)(τ) : e(Y)(t)` for two solution series.
pub fn kernel_volume_diagnostic(
    cell: &CellModel,
    x: &DynamicCellSolution,
    y: &DynamicCellSolution,
    tau: f64,
    t: f64,
    mode: SecondDerivative,
) -> Result<f64> {
    if x.grid != y.grid {
        return Err(Error::GridMismatch("series use different time grids".into()));
    }
    let nt = x.grid.index_of(tau)?;
    let nn = y.grid.index_of(t)?;
    let ux = &x.u[x.snapshot(nt)?];
    let yy = &y.u[y.snapshot(nn)?];
    let ax = match mode {
        SecondDerivative::Newmark => x.a[x.snapshot(nt)?].clone(),
        SecondDerivative::CentralDifference => {
            let dt = x.grid.dt() * x.stride as f64;
            let k = x.snapshot(nt)?;
            let last = x.v.len() - 1;
            let (lo, hi, h) = match k {
                0 => (0, 1.min(last), dt),
                k if k == last => (k - 1, k, dt),
                k => (k - 1, k + 1, 2.0 * dt),
            };
            x.v[hi].iter().zip(&x.v[lo]).map(|(a, b)| (a - b) / h).collect()
        }
    };
    let mut r = cell.stiffness.matvec(ux);
    let ma = cell.mass.matvec(&ax);
    for i in 0..r.len() {
        r[i] += ma[i];
    }
    Ok(sparse::dot(&r, yy))
}

/// Interface traces per face: velocity and acceleration vectors per step.
#[derive(Clone, Debug, Default)]
pub struct InterfaceTraces {
    /// `v[face][n][i]`
    pub v: [Vec<Vec<f64>>; 2],
    /// `a[face][n][i]`
    pub a: [Vec<Vec<f64>>; 2],
}

/// Layer data entering the representation.
#[derive(Default)]
pub struct LayerSources<'a> {
    pub u0: Option<&'a [f64]>,
    pub u1_tilde: Option<&'a DynamicCellSolution>,
    /// `f[n][i]` (x′-independent layer force) convolved with `θᵢ`.
    pub force: Option<&'a [Vec<f64>]>,
}

fn trap_weight(m: usize, n: usize) -> f64 {
    if m == 0 || m == n {
        0.5
    } else {
        1.0
    }
}

/// u^M at the requested steps (all steps when `steps` is `None`), by trapezoidal convolution.
pub fn represent_layer_displacement(
    set: &CellSolutionSet,
    traces: &InterfaceTraces,
    sources: &LayerSources,
    steps: Option<&[usize]>,
) -> Result<Vec<Vec<f64>>> {
    let d = set.chi[0].len();
    let grid = set.grid;
    let dt = grid.dt();
    for face in 0..2 {
        if set.chi[face].len() != d || set.eta[face].len() != d {
            return Err(Error::Missing("chi/eta cell solutions".into()));
        }
        if traces.v[face].len() != grid.steps + 1 || traces.a[face].len() != grid.steps + 1 {
            return Err(Error::GridMismatch("trace history length differs from the cell time grid".into()));
        }
    }
    for s in set.chi.iter().chain(set.eta.iter()).flatten().chain(set.theta.iter()) {
        if s.stride != 1 {
            return Err(Error::GridMismatch("representation needs unthinned snapshots".into()));
        }
    }
    if sources.force.is_some() && set.theta.len() != d {
        return Err(Error::Missing("theta solutions for the layer force term".into()));
    }
    let all: Vec<usize> = (0..=grid.steps).collect();
    let steps = steps.unwrap_or(&all);
    let n_full = set.chi[0][0].u[0].len();
    steps
        .par_iter()
        .map(|&n| {
            if n > grid.steps {
                return Err(Error::GridMismatch(format!("step {n} beyond grid")));
            }
            let mut u = match sources.u0 {
                Some(u0) => u0.to_vec(),
                None => vec![0.0; n_full],
            };
            if let Some(s) = sources.u1_tilde {
                for (a, b) in u.iter_mut().zip(&s.u[n]) {
                    *a += b;
                }
            }
            let mut axpy = |c: f64, x: &[f64]| {
                if c != 0.0 {
                    for (a, b) in u.iter_mut().zip(x) {
                        *a += c * b;
                    }
                }
            };
            for face in 0..2 {
                for i in 0..d {
                    let chi = &set.chi[face][i];
                    let eta = &set.eta[face][i];
                    if n > 0 {
                        for m in 0..=n {
                            let w = trap_weight(m, n) * dt;
                            axpy(w * traces.v[face][m][i], &chi.u[n - m]);
                            axpy(w * traces.a[face][m][i], &eta.u[n - m]);
                        }
                    }
                    axpy(traces.v[face][0][i], &eta.u[n]);
                }
            }
            if let (Some(f), true) = (sources.force, n > 0) {
                for i in 0..d {
                    for m in 0..=n {
                        axpy(trap_weight(m, n) * dt * f[m][i], &set.theta[i].u[n - m]);
                    }
                }
            }
            Ok(u)
        })
        .collect()
}

/// Direct time stepping of the layer field with prescribed face motion `u±(t) − u±(0)`
/// and layer data (oracle for the representation).
pub fn solve_layer_direct(
    op: &DynamicCellOperator,
    trace_u: &[Vec<Vec<f64>>; 2],
    traces: &InterfaceTraces,
    u0: Option<&[f64]>,
    v0: Option<&[f64]>,
    force: Option<&[Vec<f64>]>,
) -> Result<DynamicCellSolution> {
    let cell = op.cell();
    let d = cell.dim();
    let n_full = cell.num_dofs();
    let plus = cell.mesh.nodes_with_tag(FaceTag::SPlus);
    let minus = cell.mesh.nodes_with_tag(FaceTag::SMinus);
    let base = u0.map(|u| op.face_part(u)).unwrap_or_else(|| vec![0.0; n_full]);
    let motion = |n: usize| {
        let mut ud = base.clone();
        let mut ad = vec![0.0; n_full];
        for (face, nodes) in [(0, &plus), (1, &minus)] {
            for &node in nodes.iter() {
                for c in 0..d {
                    ud[node * d + c] += trace_u[face][n][c] - trace_u[face][0][c];
                    ad[node * d + c] = traces.a[face][n][c];
                }
            }
        }
        (ud, ad)
    };
    let zero = vec![0.0; n_full];
    let consistent_body = force.map(|f| {
        let fv = f.to_vec();
        let act = cell.mesh.active_nodes().to_vec();
        move |n: usize| {
            let mut field = vec![0.0; n_full];
            for (node, &a) in act.iter().enumerate() {
                if a {
                    field[node * d..(node + 1) * d].copy_from_slice(&fv[n][..d]);
                }
            }
            cell.mass.matvec(&field)
        }
    });
    let body: Option<&(dyn Fn(usize) -> Vec<f64> + Sync)> = match &consistent_body {
        Some(f) => Some(f),
        None => None,
    };
    let mut start = u0.map(|u| u.to_vec()).unwrap_or_else(|| zero.clone());
    let (ud0, _) = motion(0);
    for n in face_nodes(cell) {
        for c in 0..d {
            start[n * d + c] = ud0[n * d + c];
        }
    }
    let mut face_v0 = vec![0.0; n_full];
    for (face, nodes) in [(0, &plus), (1, &minus)] {
        for &node in nodes.iter() {
            face_v0[node * d..(node + 1) * d].copy_from_slice(&traces.v[face][0][..d]);
        }
    }
    op.run(DynamicKind::U1Tilde, None, 0, &start, v0.unwrap_or(&zero), Some(&face_v0), Some(&motion), body, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{CellMeshSpec, Hole};
    use crate::tensor::Material;

    fn cell() -> CellModel {
        CellModel::new(&CellMeshSpec::new(2, 4, Hole::None), &Material::isotropic(1.0, 1.0, 1.0, 2).unwrap()).unwrap()
    }

    #[test]
    fn lifting_traces() {
        let c = cell();
        let p = boundary_lifting(&c, 1, Face::Plus);
        let m = boundary_lifting(&c, 1, Face::Minus);
        for n in c.mesh.nodes_with_tag(FaceTag::SPlus) {
            assert_eq!((p[2 * n + 1], m[2 * n + 1], p[2 * n]), (1.0, 0.0, 0.0));
        }
        for n in c.mesh.nodes_with_tag(FaceTag::SMinus) {
            assert_eq!((p[2 * n + 1], m[2 * n + 1]), (0.0, 1.0));
        }
    }

    #[test]
    fn chi_initial_acceleration() {
        let c = cell();
        let grid = TimeGrid::new(0.1, 10).unwrap();
        let op = DynamicCellOperator::new(&c, grid).unwrap();
        let s = op.solve(DynamicKind::Chi, Some(Face::Plus), 0, Lifting::Linear, None, 1).unwrap();
        // M a(0) = -K φ on free dofs
        let kphi = c.stiffness.matvec(s.lifting.as_ref().unwrap());
        let ma = c.mass.matvec(&s.a[0]);
        let dm = dirichlet_dofmap(&c).unwrap();
        let r: Vec<f64> = dm.restrict(&kphi.iter().zip(&ma).map(|(a, b)| a + b).collect::<Vec<_>>());
        assert!(sparse::norm(&r) < 1e-12 * sparse::norm(&kphi));
    }

    #[test]
    fn time_grid_lookup() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert_eq!(g.index_of(0.3).unwrap(), 3);
        assert!(g.index_of(0.35).is_err());
        assert!(TimeGrid::new(0.0, 10).is_err());
    }
}
