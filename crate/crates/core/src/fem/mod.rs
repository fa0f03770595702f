//! Finite-element assembly and constrained solves for linear elasticity on voxel grids.

pub mod dofmap;
pub mod element;
pub mod sparse;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::collections::HashMap;

pub use dofmap::{DofMap, DofMapBuilder, DofTarget};
pub use sparse::{conjugate_gradient, Cholesky, CsrMatrix, Lu};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mesh::{FaceTag, PeriodicCellMesh};
use crate::tensor::{Material, SymMat};

/// A grid with one material id per element (`None` = void).
#[derive(Clone, Debug)]
pub struct Discretization {
    grid: Grid,
    elem_material: Vec<Option<usize>>,
    materials: Vec<Material>,
    active: Vec<bool>,
}

type ElementKey = (usize, [u64; 3]);

impl Discretization {
    pub fn new(grid: Grid, elem_material: Vec<Option<usize>>, materials: Vec<Material>) -> Result<Self> {
        if elem_material.len() != grid.num_elements() {
            return Err(Error::DimensionMismatch { expected: grid.num_elements(), got: elem_material.len() });
        }
        for m in &materials {
            if m.tensor.dim() != grid.dim() {
                return Err(Error::DimensionMismatch { expected: grid.dim(), got: m.tensor.dim() });
            }
            if !(m.density > 0.0) {
                return Err(Error::InvalidParameter(format!("density bound violated: {}", m.density)));
            }
        }
        if let Some(bad) = elem_material.iter().flatten().find(|&&id| id >= materials.len()) {
            return Err(Error::InvalidParameter(format!("unknown material id {bad}")));
        }
        let mut active = vec![false; grid.num_nodes()];
        for (e, m) in elem_material.iter().enumerate() {
            if m.is_some() {
                for &n in &grid.element_nodes(e)[..grid.nodes_per_element()] {
                    active[n] = true;
                }
            }
        }
        Ok(Discretization { grid, elem_material, materials, active })
    }

    /// One material on every solid element of a cell mesh.
    pub fn for_cell(mesh: &PeriodicCellMesh, material: &Material) -> Result<Self> {
        Self::for_cell_field(mesh, |e| mesh.solid()[e].then(|| material.clone()))
    }

    /// Per-element materials; assigning one to a removed element is an error.
    pub fn for_cell_field(mesh: &PeriodicCellMesh, field: impl Fn(usize) -> Option<Material>) -> Result<Self> {
        let mut materials: Vec<Material> = Vec::new();
        let mut ids = Vec::with_capacity(mesh.num_elements());
        for e in 0..mesh.num_elements() {
            match (field(e), mesh.solid()[e]) {
                (Some(_), false) => {
                    return Err(Error::InvalidParameter(format!("material assigned to removed element {e}")))
                }
                (None, true) => return Err(Error::InvalidParameter(format!("solid element {e} has no material"))),
                (None, false) => ids.push(None),
                (Some(m), true) => {
                    let id = match materials.iter().position(|x| x.tensor == m.tensor && x.density == m.density) {
                        Some(i) => i,
                        None => {
                            materials.push(m);
                            materials.len() - 1
                        }
                    };
                    ids.push(Some(id));
                }
            }
        }
        Self::new(mesh.grid().clone(), ids, materials)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn num_dofs(&self) -> usize {
        self.grid.num_nodes() * self.dim()
    }

    pub fn active_nodes(&self) -> &[bool] {
        &self.active
    }

    pub fn element_material(&self, e: usize) -> Option<&Material> {
        self.elem_material[e].map(|id| &self.materials[id])
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn element_material_ids(&self) -> &[Option<usize>] {
        &self.elem_material
    }

    pub fn element_dofs(&self, e: usize) -> Vec<usize> {
        let d = self.dim();
        let nodes = self.grid.element_nodes(e);
        let mut v = Vec::with_capacity(self.grid.nodes_per_element() * d);
        for &n in &nodes[..self.grid.nodes_per_element()] {
            for c in 0..d {
                v.push(n * d + c);
            }
        }
        v
    }

    fn key(&self, e: usize, id: usize) -> ElementKey {
        let h = self.grid.element_size(e);
        (id, [h[0].to_bits(), h[1].to_bits(), h[2].to_bits()])
    }

    fn assemble_cached(&self, make: impl Fn(&Material, &[f64; 3]) -> DMatrix<f64> + Sync) -> CsrMatrix {
        let mut cache: HashMap<ElementKey, DMatrix<f64>> = HashMap::new();
        for e in 0..self.grid.num_elements() {
            if let Some(id) = self.elem_material[e] {
                let key = self.key(e, id);
                cache.entry(key).or_insert_with(|| make(&self.materials[id], &self.grid.element_size(e)));
            }
        }
        let elements: Vec<usize> = (0..self.grid.num_elements()).collect();
        let chunks: Vec<Vec<(usize, usize, f64)>> = elements
            .par_chunks(256)
            .map(|chunk| {
                let mut t = Vec::new();
                for &e in chunk {
                    let Some(id) = self.elem_material[e] else { continue };
                    let ke = &cache[&self.key(e, id)];
                    let dofs = self.element_dofs(e);
                    for (a, &ra) in dofs.iter().enumerate() {
                        for (b, &cb) in dofs.iter().enumerate() {
                            let v = ke[(a, b)];
                            if v != 0.0 {
                                t.push((ra, cb, v));
                            }
                        }
                    }
                }
                t
            })
            .collect();
        let n = self.num_dofs();
        CsrMatrix::from_triplets(n, n, chunks.into_iter().flatten().collect())
    }

    pub fn assemble_stiffness(&self) -> CsrMatrix {
        let d = self.dim();
        self.assemble_cached(|m, h| element::stiffness(d, h, &m.tensor))
    }

    pub fn assemble_mass(&self) -> CsrMatrix {
        let d = self.dim();
        self.assemble_cached(|m, h| element::mass(d, h, m.density))
    }

    /// Row sums of the consistent mass matrix.
    pub fn assemble_lumped_mass(&self) -> Vec<f64> {
        let m = self.assemble_mass();
        (0..m.nrows()).map(|r| m.row(r).map(|(_, v)| v).sum()).collect()
    }

    /// `f_v = -∫ C e0 : e(v)`.
    pub fn assemble_prestrain(&self, e0: &(dyn Fn(usize, &[f64; 3]) -> SymMat + Sync)) -> Vec<f64> {
        let d = self.dim();
        let mut f = vec![0.0; self.num_dofs()];
        for e in 0..self.grid.num_elements() {
            let Some(m) = self.element_material(e) else { continue };
            let fe = element::prestrain_load(
                d,
                &self.grid.element_origin(e),
                &self.grid.element_size(e),
                &m.tensor,
                &|x| e0(e, x),
            );
            for (a, dof) in self.element_dofs(e).into_iter().enumerate() {
                f[dof] += fe[a];
            }
        }
        f
    }

    /// Consistent load of a constant traction `g` on the listed element faces.
    pub fn assemble_face_load(&self, faces: &[(usize, usize, usize)], g: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut f = vec![0.0; self.num_dofs()];
        for &(e, axis, side) in faces {
            let h = self.grid.element_size(e);
            let area: f64 = (0..d).filter(|&k| k != axis).map(|k| h[k]).product();
            let local = self.grid.face_local_nodes(axis, side);
            let share = area / local.len() as f64;
            let nodes = self.grid.element_nodes(e);
            for a in local {
                for c in 0..d {
                    f[nodes[a] * d + c] += g[c] * share;
                }
            }
        }
        f
    }

    /// `∫ N_a` over the solid region per node.
    pub fn node_volume_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.grid.num_nodes()];
        let nn = self.grid.nodes_per_element();
        for e in 0..self.grid.num_elements() {
            if self.elem_material[e].is_none() {
                continue;
            }
            let share = self.grid.element_volume(e) / nn as f64;
            for &n in &self.grid.element_nodes(e)[..nn] {
                w[n] += share;
            }
        }
        w
    }

    pub fn solid_volume(&self) -> f64 {
        (0..self.grid.num_elements())
            .filter(|&e| self.elem_material[e].is_some())
            .map(|e| self.grid.element_volume(e))
            .sum()
    }

    /// `∫ ρ` over the solid region.
    pub fn total_mass(&self) -> f64 {
        (0..self.grid.num_elements())
            .filter_map(|e| self.element_material(e).map(|m| m.density * self.grid.element_volume(e)))
            .sum()
    }

    /// `∫ C(e(u) + a) : (e(v) + b)` by Gauss quadrature with optional affine offsets.
    pub fn energy_product(
        &self,
        u: &[f64],
        a: &(dyn Fn(&[f64; 3]) -> SymMat + Sync),
        v: &[f64],
        b: &(dyn Fn(&[f64; 3]) -> SymMat + Sync),
    ) -> f64 {
        let d = self.dim();
        let mut total = 0.0;
        for e in 0..self.grid.num_elements() {
            let Some(m) = self.element_material(e) else { continue };
            let dofs = self.element_dofs(e);
            let ue: Vec<f64> = dofs.iter().map(|&i| u[i]).collect();
            let ve: Vec<f64> = dofs.iter().map(|&i| v[i]).collect();
            let h = self.grid.element_size(e);
            let o = self.grid.element_origin(e);
            let vol = self.grid.element_volume(e);
            for (xi, w) in element::gauss_points(d) {
                let mut x = [0.0; 3];
                for k in 0..d {
                    x[k] = o[k] + xi[k] * h[k];
                }
                let eu = element::strain_at(d, &xi, &h, &ue).add(&a(&x));
                let ev = element::strain_at(d, &xi, &h, &ve).add(&b(&x));
                let s = m.tensor.voigt() * DVector::from_vec(eu.to_voigt_strain());
                total += w * vol * s.dot(&DVector::from_vec(ev.to_voigt_strain()));
            }
        }
        total
    }

    /// `∫ e(u) : e(u)` (unweighted strain norm squared).
    pub fn strain_norm_sq(&self, u: &[f64]) -> f64 {
        let d = self.dim();
        let mut total = 0.0;
        for e in 0..self.grid.num_elements() {
            if self.elem_material[e].is_none() {
                continue;
            }
            let ue: Vec<f64> = self.element_dofs(e).iter().map(|&i| u[i]).collect();
            let h = self.grid.element_size(e);
            let vol = self.grid.element_volume(e);
            for (xi, w) in element::gauss_points(d) {
                let s = element::strain_at(d, &xi, &h, &ue);
                total += w * vol * s.ddot(&s);
            }
        }
        total
    }
}

/// Cell-mesh element faces with a tag, as `(element, axis, side)`.
pub fn tagged_faces(mesh: &PeriodicCellMesh, tag: FaceTag) -> Vec<(usize, usize, usize)> {
    mesh.boundary_faces().iter().filter(|f| f.tag == tag).map(|f| (f.element, f.axis, f.side)).collect()
}

/// Constraint class used to remove the rigid-translation kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regularization {
    ZeroMean,
    Dirichlet,
    FaceGroup,
}

#[derive(Clone, Debug)]
pub struct ConstrainedSolution {
    pub u: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub residual: f64,
}

/// Factorized constrained system, reusable for several right-hand sides.
pub struct ConstrainedSolver {
    dofmap: DofMap,
    k_full: CsrMatrix,
    k_red: CsrMatrix,
    chol: Cholesky,
    mean: Option<MeanConstraint>,
}

struct MeanConstraint {
    /// Reduced weight vectors `B_c` (component c).
    weights: Vec<Vec<f64>>,
    pinned: Vec<usize>,
}

impl ConstrainedSolver {
    /// `node_weights` (∫ N_a per node) is required for zero-mean constraints.
    pub fn new(k_full: &CsrMatrix, dofmap: &DofMap, node_weights: Option<&[f64]>, reg: Regularization) -> Result<Self> {
        match reg {
            Regularization::Dirichlet if !dofmap.has_dirichlet() => {
                return Err(Error::Singular(
                    "no Dirichlet dofs present: rigid translations not removed (add dirichlet constraints or zero_mean multipliers)".into(),
                ))
            }
            Regularization::FaceGroup if dofmap.num_face_groups() == 0 => {
                return Err(Error::Singular("face_group regularization requested but no face-equality groups defined".into()))
            }
            Regularization::FaceGroup | Regularization::ZeroMean if !dofmap.zero_mean() => {
                return Err(Error::Singular("rigid translations not removed: zero_mean multipliers missing".into()))
            }
            Regularization::ZeroMean | Regularization::FaceGroup if dofmap.has_dirichlet() => {
                return Err(Error::InvalidParameter("zero_mean multipliers combined with Dirichlet dofs".into()))
            }
            _ => {}
        }
        let k_red = dofmap.reduce_matrix(k_full);
        let n = k_red.nrows();
        let nc = dofmap.ncomp();
        let mean = if dofmap.zero_mean() {
            let w = node_weights.ok_or_else(|| Error::Missing("node volume weights for zero-mean constraint".into()))?;
            let mut weights = vec![vec![0.0; n]; nc];
            for dof in 0..dofmap.num_full() {
                if let DofTarget::Free(r) = dofmap.target(dof) {
                    weights[dof % nc][r] += w[dof / nc];
                }
            }
            let scale = k_red.max_abs();
            let mut pinned = Vec::with_capacity(nc);
            for c in 0..nc {
                let t: Vec<f64> = (0..n).map(|r| if dofmap.comp_of_free(r) == c { 1.0 } else { 0.0 }).collect();
                let kt = k_red.matvec(&t);
                if sparse::norm(&kt) > 1e-9 * scale * (n as f64).sqrt() {
                    return Err(Error::Singular(format!(
                        "zero_mean requested but translations in component {c} are not in the kernel of the operator"
                    )));
                }
                pinned.push((0..n).find(|&r| dofmap.comp_of_free(r) == c).ok_or_else(|| {
                    Error::Singular(format!("no free dof in component {c}"))
                })?);
            }
            Some(MeanConstraint { weights, pinned })
        } else {
            None
        };
        let to_factor = match &mean {
            Some(mc) => {
                let t: Vec<_> = k_red
                    .iter()
                    .filter(|(r, c, _)| !mc.pinned.contains(r) && !mc.pinned.contains(c))
                    .chain(mc.pinned.iter().map(|&p| (p, p, 1.0)))
                    .collect();
                CsrMatrix::from_triplets(n, n, t)
            }
            None => k_red.clone(),
        };
        let chol = Cholesky::new(&to_factor).map_err(|e| match e {
            Error::Singular(msg) => Error::Singular(format!(
                "{msg}; constraint set leaves a kernel (check Dirichlet coverage or add zero_mean multipliers)"
            )),
            other => other,
        })?;
        Ok(ConstrainedSolver { dofmap: dofmap.clone(), k_full: k_full.clone(), k_red, chol, mean })
    }

    pub fn dofmap(&self) -> &DofMap {
        &self.dofmap
    }

    pub fn reduced_matrix(&self) -> &CsrMatrix {
        &self.k_red
    }

    /// Solves `K u = f` in the constrained space (`f` is a full-length load).
    pub fn solve(&self, f_full: &[f64]) -> Result<ConstrainedSolution> {
        let f = self.dofmap.reduce_rhs(&self.k_full, f_full);
        let n = f.len();
        let (x, lambda) = match &self.mean {
            None => (self.chol.solve(&f), Vec::new()),
            Some(mc) => {
                let nc = mc.weights.len();
                let mut lambda = vec![0.0; nc];
                let mut fp = f.clone();
                for c in 0..nc {
                    let (mut tf, mut tb) = (0.0, 0.0);
                    for r in 0..n {
                        if self.dofmap.comp_of_free(r) == c {
                            tf += f[r];
                            tb += mc.weights[c][r];
                        }
                    }
                    lambda[c] = tf / tb;
                    for r in 0..n {
                        fp[r] -= lambda[c] * mc.weights[c][r];
                    }
                }
                for &p in &mc.pinned {
                    fp[p] = 0.0;
                }
                let mut x = self.chol.solve(&fp);
                for c in 0..nc {
                    let bu = sparse::dot(&mc.weights[c], &x);
                    let bt: f64 = (0..n).filter(|&r| self.dofmap.comp_of_free(r) == c).map(|r| mc.weights[c][r]).sum();
                    let shift = bu / bt;
                    for r in 0..n {
                        if self.dofmap.comp_of_free(r) == c {
                            x[r] -= shift;
                        }
                    }
                }
                (x, lambda)
            }
        };
        let mut res = self.k_red.matvec(&x);
        for r in 0..n {
            res[r] -= f[r];
        }
        if let Some(mc) = &self.mean {
            for (c, l) in lambda.iter().enumerate() {
                for r in 0..n {
                    res[r] += l * mc.weights[c][r];
                }
            }
        }
        let scale = sparse::norm(&f).max(self.k_red.max_abs() * sparse::norm(&x)).max(f64::MIN_POSITIVE);
        let residual = sparse::norm(&res) / scale;
        if residual > 1e-10 {
            return Err(Error::Solver(format!("constrained residual {residual:e} exceeds 1e-10")));
        }
        Ok(ConstrainedSolution { u: self.dofmap.expand(&x), multipliers: lambda, residual })
    }
}

/// One-shot constrained solve.
pub fn solve_constrained(
    k_full: &CsrMatrix,
    f_full: &[f64],
    dofmap: &DofMap,
    node_weights: Option<&[f64]>,
    reg: Regularization,
) -> Result<ConstrainedSolution> {
    ConstrainedSolver::new(k_full, dofmap, node_weights, reg)?.solve(f_full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{CellMeshSpec, Hole};

    fn cell(d: usize, r: usize, hole: Hole) -> (PeriodicCellMesh, Discretization) {
        let mesh = PeriodicCellMesh::build(&CellMeshSpec::new(d, r, hole)).unwrap();
        let disc = Discretization::for_cell(&mesh, &Material::isotropic(1.0, 1.0, 1.0, d).unwrap()).unwrap();
        (mesh, disc)
    }

    #[test]
    fn translations_in_kernel_and_patch_energy() {
        let (_, disc) = cell(3, 3, Hole::None);
        let k = disc.assemble_stiffness();
        for c in 0..3 {
            let t: Vec<f64> = (0..disc.num_dofs()).map(|i| if i % 3 == c { 1.0 } else { 0.0 }).collect();
            assert!(sparse::norm(&k.matvec(&t)) < 1e-12);
        }
        // v(y) = E y
        let e = SymMat::from_rows(&[vec![0.3, 0.1, 0.0], vec![0.1, -0.2, 0.05], vec![0.0, 0.05, 0.7]]).unwrap();
        let g = disc.grid();
        let mut v = vec![0.0; disc.num_dofs()];
        for n in 0..g.num_nodes() {
            let x = g.node_coord(n);
            for i in 0..3 {
                v[n * 3 + i] = (0..3).map(|j| e.get(i, j) * x[j]).sum();
            }
        }
        let kv = k.matvec(&v);
        let energy = sparse::dot(&v, &kv);
        let c = crate::tensor::ElasticTensor4::isotropic(1.0, 1.0, 3).unwrap();
        let want = c.energy(&e, &e).unwrap();
        assert!((energy - want).abs() < 1e-12 * want);
    }

    #[test]
    fn mass_totals() {
        let (_, disc) = cell(2, 4, Hole::None);
        let m = disc.assemble_mass();
        let ones: Vec<f64> = (0..disc.num_dofs()).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        assert!((sparse::dot(&ones, &m.matvec(&ones)) - 1.0).abs() < 1e-14);
        let hole = Hole::Box { center: vec![0.0, 0.5], half_widths: vec![0.125, 0.125] };
        let mesh = PeriodicCellMesh::build(&CellMeshSpec::new(2, 8, hole)).unwrap();
        let disc = Discretization::for_cell(&mesh, &Material::isotropic(1.0, 1.0, 2.0, 2).unwrap()).unwrap();
        assert!((disc.total_mass() - 2.0 * 0.9375).abs() < 1e-14);
        let lumped = disc.assemble_lumped_mass();
        assert!((lumped.iter().sum::<f64>() - 2.0 * 2.0 * 0.9375).abs() < 1e-13);
    }

    #[test]
    fn material_on_removed_element_rejected() {
        let hole = Hole::Box { center: vec![0.0, 0.5], half_widths: vec![0.125, 0.125] };
        let mesh = PeriodicCellMesh::build(&CellMeshSpec::new(2, 8, hole)).unwrap();
        let m = Material::isotropic(1.0, 1.0, 1.0, 2).unwrap();
        assert!(Discretization::for_cell_field(&mesh, |_| Some(m.clone())).is_err());
    }

    #[test]
    fn face_load_partition_of_unity() {
        let (mesh, disc) = cell(2, 4, Hole::None);
        let f_plus = disc.assemble_face_load(&tagged_faces(&mesh, FaceTag::SPlus), &[1.0, 0.0]);
        let f_minus = disc.assemble_face_load(&tagged_faces(&mesh, FaceTag::SMinus), &[-1.0, 0.0]);
        let plus_nodes = mesh.nodes_with_tag(FaceTag::SPlus);
        let s: f64 = plus_nodes.iter().map(|&n| f_plus[2 * n] + f_minus[2 * n]).sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn prestrain_equals_minus_k_affine() {
        let (_, disc) = cell(2, 4, Hole::None);
        let k = disc.assemble_stiffness();
        let m22 = SymMat::basis(2, 1, 1);
        let f = disc.assemble_prestrain(&|_, _| m22);
        let g = disc.grid();
        let v: Vec<f64> = (0..disc.num_dofs()).map(|i| if i % 2 == 1 { g.node_coord(i / 2)[1] } else { 0.0 }).collect();
        let kv = k.matvec(&v);
        for i in 0..f.len() {
            assert!((f[i] + kv[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_mean_solution_has_zero_mean() {
        let (mesh, disc) = cell(2, 6, Hole::None);
        let k = disc.assemble_stiffness();
        let w = disc.node_volume_weights();
        let dm = DofMapBuilder::new(disc.grid().num_nodes(), 2)
            .active(mesh.active_nodes())
            .periodic(mesh.periodic_pairs())
            .zero_mean(true)
            .build()
            .unwrap();
        let f = disc.assemble_prestrain(&|_, _| SymMat::basis(2, 1, 1));
        let sol = solve_constrained(&k, &f, &dm, Some(&w), Regularization::ZeroMean).unwrap();
        for c in 0..2 {
            let restricted = dm.restrict(&(0..disc.num_dofs()).map(|i| if i % 2 == c { w[i / 2] } else { 0.0 }).collect::<Vec<_>>());
            let m: f64 = sparse::dot(&restricted, &dm.gather(&sol.u));
            assert!(m.abs() < 1e-13, "{m}");
        }
        assert!(sol.multipliers.iter().all(|l| l.abs() < 1e-12));
    }

    #[test]
    fn dirichlet_zero_gives_zero() {
        let (mesh, disc) = cell(2, 4, Hole::None);
        let k = disc.assemble_stiffness();
        let mut nodes = mesh.nodes_with_tag(FaceTag::SPlus);
        nodes.extend(mesh.nodes_with_tag(FaceTag::SMinus));
        let dm = DofMapBuilder::new(disc.grid().num_nodes(), 2)
            .periodic(mesh.periodic_pairs())
            .dirichlet_nodes(&nodes, |_, _| 0.0)
            .build()
            .unwrap();
        let sol = solve_constrained(&k, &vec![0.0; disc.num_dofs()], &dm, None, Regularization::Dirichlet).unwrap();
        assert!(sol.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_constraint_named() {
        let (mesh, disc) = cell(2, 4, Hole::None);
        let k = disc.assemble_stiffness();
        let dm = DofMapBuilder::new(disc.grid().num_nodes(), 2).periodic(mesh.periodic_pairs()).build().unwrap();
        let err = ConstrainedSolver::new(&k, &dm, None, Regularization::Dirichlet).err().unwrap();
        assert!(err.to_string().contains("Dirichlet"));
        let err = ConstrainedSolver::new(&k, &dm, None, Regularization::ZeroMean).err().unwrap();
        assert!(err.to_string().contains("zero_mean"));
        let err = ConstrainedSolver::new(&k, &dm, None, Regularization::FaceGroup).err().unwrap();
        assert!(err.to_string().contains("face-equality"));
    }
}
