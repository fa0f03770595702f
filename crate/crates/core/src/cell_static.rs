//! Static cell problems (membrane corrector χᴬ, bending corrector χᴮ, jump
//! corrector η⁽ᵏ⁾) and the effective coefficients A*, a*, b*, c*, ρ̄.
//!
//! The thickness coordinate is y₁ (index 0); in-plane pairs use indices `1..d`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fem::{tagged_faces, ConstrainedSolver, CsrMatrix, Discretization, DofMap, DofMapBuilder, Regularization};
use crate::mesh::{CellMeshSpec, FaceTag, PeriodicCellMesh};
use crate::tensor::{voigt_pairs, ElasticTensor4, Material, SymMat};

/// A cell mesh with its material field and assembled operators.
pub struct CellModel {
    pub mesh: PeriodicCellMesh,
    pub disc: Discretization,
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub node_weights: Vec<f64>,
}

impl CellModel {
    pub fn new(spec: &CellMeshSpec, material: &Material) -> Result<Self> {
        let mesh = PeriodicCellMesh::build(spec)?;
        let disc = Discretization::for_cell(&mesh, material)?;
        Ok(Self::from_parts(mesh, disc))
    }

    /// Element-wise material field (piecewise constant).
    pub fn with_field(spec: &CellMeshSpec, field: impl Fn(usize) -> Option<Material>) -> Result<Self> {
        let mesh = PeriodicCellMesh::build(spec)?;
        let disc = Discretization::for_cell_field(&mesh, field)?;
        Ok(Self::from_parts(mesh, disc))
    }

    fn from_parts(mesh: PeriodicCellMesh, disc: Discretization) -> Self {
        let stiffness = disc.assemble_stiffness();
        let mass = disc.assemble_mass();
        let node_weights = disc.node_volume_weights();
        CellModel { mesh, disc, stiffness, mass, node_weights }
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn num_dofs(&self) -> usize {
        self.disc.num_dofs()
    }

    fn builder(&self) -> DofMapBuilder {
        DofMapBuilder::new(self.mesh.grid().num_nodes(), self.dim())
            .active(self.mesh.active_nodes())
            .periodic(self.mesh.periodic_pairs())
    }

    /// Periodic space with zero-mean multipliers.
    pub fn periodic_dofmap(&self) -> Result<DofMap> {
        self.builder().zero_mean(true).build()
    }

    /// Periodic space, constant on each of S±, zero mean.
    pub fn jump_dofmap(&self) -> Result<DofMap> {
        self.builder()
            .face_group(&self.mesh.nodes_with_tag(FaceTag::SPlus))
            .face_group(&self.mesh.nodes_with_tag(FaceTag::SMinus))
            .zero_mean(true)
            .build()
    }

    /// Per-component sum of the nodal reaction `K u` over the nodes carrying `tag`.
    pub fn face_reaction(&self, r_full: &[f64], tag: FaceTag) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for n in self.mesh.nodes_with_tag(tag) {
            for c in 0..d {
                out[c] += r_full[n * d + c];
            }
        }
        out
    }

    /// Per-component mean `∫ u_c / |Y0|`.
    pub fn mean(&self, u: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d];
        for (n, w) in self.node_weights.iter().enumerate() {
            for c in 0..d {
                m[c] += w * u[n * d + c];
            }
        }
        let vol = self.mesh.measure();
        m.iter().map(|v| v / vol).collect()
    }
}

/// In-plane index pairs `(α, β)`, `1 <= α <= β < d`, in Voigt order of the in-plane space.
pub fn in_plane_pairs(dim: usize) -> Vec<(usize, usize)> {
    voigt_pairs(dim - 1).iter().map(|&(a, b)| (a + 1, b + 1)).collect()
}

fn check_pair(dim: usize, pair: (usize, usize)) -> Result<(usize, usize)> {
    let (a, b) = if pair.0 <= pair.1 { pair } else { (pair.1, pair.0) };
    if a == 0 || b >= dim {
        return Err(Error::InvalidParameter(format!("({}, {}) is not an in-plane index pair", pair.0, pair.1)));
    }
    Ok((a, b))
}

fn membrane_load(cell: &CellModel, pair: (usize, usize)) -> Vec<f64> {
    let m = SymMat::basis(cell.dim(), pair.0, pair.1);
    cell.disc.assemble_prestrain(&|_, _| m)
}

fn bending_load(cell: &CellModel, pair: (usize, usize)) -> Vec<f64> {
    let m = SymMat::basis(cell.dim(), pair.0, pair.1);
    cell.disc.assemble_prestrain(&|_, x| m.scaled(-x[0]))
}

fn jump_load(cell: &CellModel, k: usize) -> Vec<f64> {
    let d = cell.dim();
    let mut g = vec![0.0; d];
    g[k] = 1.0;
    let mut f = cell.disc.assemble_face_load(&tagged_faces(&cell.mesh, FaceTag::SPlus), &g);
    g[k] = -1.0;
    let fm = cell.disc.assemble_face_load(&tagged_faces(&cell.mesh, FaceTag::SMinus), &g);
    for (a, b) in f.iter_mut().zip(fm) {
        *a += b;
    }
    f
}

fn periodic_solver(cell: &CellModel) -> Result<ConstrainedSolver> {
    ConstrainedSolver::new(&cell.stiffness, &cell.periodic_dofmap()?, Some(&cell.node_weights), Regularization::ZeroMean)
}

fn jump_solver(cell: &CellModel) -> Result<ConstrainedSolver> {
    ConstrainedSolver::new(&cell.stiffness, &cell.jump_dofmap()?, Some(&cell.node_weights), Regularization::FaceGroup)
}

/// χᴬ for the pair `(α, β)`: `-∇·(A(e(χ) + M_αβ)) = 0`, periodic, zero mean.
pub fn solve_membrane_corrector(cell: &CellModel, pair: (usize, usize)) -> Result<Vec<f64>> {
    let pair = check_pair(cell.dim(), pair)?;
    Ok(periodic_solver(cell)?.solve(&membrane_load(cell, pair))?.u)
}

/// χᴮ for the pair `(α, β)`: `-∇·(A(e(χ) - y₁ M_αβ)) = 0`, periodic, zero mean.
pub fn solve_bending_corrector(cell: &CellModel, pair: (usize, usize)) -> Result<Vec<f64>> {
    let pair = check_pair(cell.dim(), pair)?;
    Ok(periodic_solver(cell)?.solve(&bending_load(cell, pair))?.u)
}

/// η⁽ᵏ⁾ (zero-based `k`): constant on S±, zero mean, unit jump load `e_k`.
pub fn solve_jump_corrector(cell: &CellModel, k: usize) -> Result<Vec<f64>> {
    if k >= cell.dim() {
        return Err(Error::InvalidParameter(format!("jump direction {k} out of range")));
    }
    Ok(jump_solver(cell)?.solve(&jump_load(cell, k))?.u)
}

#[derive(Clone, Debug)]
pub struct StaticCorrectorSet {
    pub chi_a: BTreeMap<(usize, usize), Vec<f64>>,
    pub chi_b: BTreeMap<(usize, usize), Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    pub spec_hash: String,
}

impl StaticCorrectorSet {
    pub fn chi_a(&self, pair: (usize, usize)) -> Option<&Vec<f64>> {
        self.chi_a.get(&(pair.0.min(pair.1), pair.0.max(pair.1)))
    }

    pub fn chi_b(&self, pair: (usize, usize)) -> Option<&Vec<f64>> {
        self.chi_b.get(&(pair.0.min(pair.1), pair.0.max(pair.1)))
    }
}

/// All static correctors, sharing one factorization per constraint space.
pub fn solve_static_correctors(cell: &CellModel) -> Result<StaticCorrectorSet> {
    let d = cell.dim();
    let pairs = in_plane_pairs(d);
    let per = periodic_solver(cell)?;
    let jump = jump_solver(cell)?;
    let chi_a = pairs
        .par_iter()
        .map(|&p| Ok((p, per.solve(&membrane_load(cell, p))?.u)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let chi_b = pairs
        .par_iter()
        .map(|&p| Ok((p, per.solve(&bending_load(cell, p))?.u)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let eta = (0..d)
        .into_par_iter()
        .map(|k| Ok(jump.solve(&jump_load(cell, k))?.u))
        .collect::<Result<Vec<_>>>()?;
    Ok(StaticCorrectorSet { chi_a, chi_b, eta, spec_hash: cell.mesh.spec().hash() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Plate coefficients divided by |Y0|.
    #[default]
    VolumeNormalized,
    /// Plate coefficients as raw integrals over Y0.
    Unnormalized,
}

#[derive(Clone, Debug)]
pub struct EffectiveCoefficients {
    /// In-plane tensor, literal integral over Y0 (no normalization).
    pub a_star: ElasticTensor4,
    pub a_plate: ElasticTensor4,
    /// In-plane Voigt matrix; row = χᴮ pair, column = χᴬ pair.
    pub b_plate: DMatrix<f64>,
    pub c_plate: ElasticTensor4,
    pub rho_bar: f64,
    pub cell_measure: f64,
    pub normalization: Normalization,
    pub spec_hash: String,
    pub resolution: usize,
}

type Offset<'a> = Box<dyn Fn(&[f64; 3]) -> SymMat + Sync + 'a>;

fn membrane_offset(d: usize, p: (usize, usize)) -> Offset<'static> {
    let m = SymMat::basis(d, p.0, p.1);
    Box::new(move |_| m)
}

fn bending_offset(d: usize, p: (usize, usize)) -> Offset<'static> {
    let m = SymMat::basis(d, p.0, p.1);
    Box::new(move |x| m.scaled(-x[0]))
}

fn zero_offset(d: usize) -> Offset<'static> {
    Box::new(move |_| SymMat::zeros(d))
}

/// Assembles A*, a*, b*, c* and ρ̄ from solved correctors.
pub fn assemble_effective_tensors(
    set: &StaticCorrectorSet,
    cell: &CellModel,
    normalization: Normalization,
) -> Result<EffectiveCoefficients> {
    let d = cell.dim();
    let pairs = in_plane_pairs(d);
    let n = pairs.len();
    let get = |map: &BTreeMap<(usize, usize), Vec<f64>>, p: (usize, usize), name: &str| {
        map.get(&p).cloned().ok_or_else(|| Error::Missing(format!("{name} corrector for pair {p:?}")))
    };
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    let mut c = DMatrix::zeros(n, n);
    for (i, &pi) in pairs.iter().enumerate() {
        let ai = get(&set.chi_a, pi, "membrane")?;
        let bi = get(&set.chi_b, pi, "bending")?;
        for (j, &pj) in pairs.iter().enumerate() {
            let aj = get(&set.chi_a, pj, "membrane")?;
            let bj = get(&set.chi_b, pj, "bending")?;
            a[(i, j)] = cell.disc.energy_product(&aj, &*membrane_offset(d, pj), &ai, &*membrane_offset(d, pi));
            b[(i, j)] = cell.disc.energy_product(&bi, &*bending_offset(d, pi), &aj, &*membrane_offset(d, pj));
            c[(i, j)] = cell.disc.energy_product(&bj, &*bending_offset(d, pj), &bi, &*bending_offset(d, pi));
        }
    }
    let measure = cell.mesh.measure();
    let scale = match normalization {
        Normalization::VolumeNormalized => 1.0 / measure,
        Normalization::Unnormalized => 1.0,
    };
    let p = d - 1;
    let a_star = ElasticTensor4::from_voigt(p, (&a + a.transpose()) * 0.5)?;
    Ok(EffectiveCoefficients {
        a_plate: a_star.scaled(scale),
        a_star,
        b_plate: b * scale,
        c_plate: ElasticTensor4::from_voigt(p, (&c + c.transpose()) * 0.5 * scale)?,
        rho_bar: cell.disc.total_mass(),
        cell_measure: measure,
        normalization,
        spec_hash: set.spec_hash.clone(),
        resolution: cell.mesh.resolution(),
    })
}

/// A* via the one-sided form `∫ A(M_J + e(χ_J)) : M_I` (Galerkin orthogonality).
pub fn a_star_one_sided(set: &StaticCorrectorSet, cell: &CellModel) -> Result<DMatrix<f64>> {
    let d = cell.dim();
    let pairs = in_plane_pairs(d);
    let zero = vec![0.0; cell.num_dofs()];
    let mut a = DMatrix::zeros(pairs.len(), pairs.len());
    for (i, &pi) in pairs.iter().enumerate() {
        for (j, &pj) in pairs.iter().enumerate() {
            let chi = set.chi_a(pj).ok_or_else(|| Error::Missing(format!("membrane corrector {pj:?}")))?;
            a[(i, j)] = cell.disc.energy_product(chi, &*membrane_offset(d, pj), &zero, &*membrane_offset(d, pi));
        }
    }
    Ok(a)
}

/// `∫ A e(u) : e(v)` without offsets.
pub fn energy_pairing(cell: &CellModel, u: &[f64], v: &[f64]) -> f64 {
    let d = cell.dim();
    cell.disc.energy_product(u, &*zero_offset(d), v, &*zero_offset(d))
}

/// Nodal values of component `c` of a trace on S± as `(S+ value, S- value)` (constant faces).
pub fn face_values(cell: &CellModel, u: &[f64], c: usize) -> (f64, f64) {
    let d = cell.dim();
    let p = cell.mesh.nodes_with_tag(FaceTag::SPlus)[0];
    let m = cell.mesh.nodes_with_tag(FaceTag::SMinus)[0];
    (u[p * d + c], u[m * d + c])
}

/// Closed-form plane-stress in-plane tensor with `λ* = 2λμ/(λ+2μ)`.
pub fn plane_stress_tensor(lambda: f64, mu: f64, in_plane_dim: usize) -> Result<ElasticTensor4> {
    let ls = 2.0 * lambda * mu / (lambda + 2.0 * mu);
    let dl = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    ElasticTensor4::from_components(in_plane_dim, |i, j, k, l| ls * dl(i, j) * dl(k, l) + mu * (dl(i, k) * dl(j, l) + dl(i, l) * dl(j, k)))
}

impl EffectiveCoefficients {
    /// CSV text: A*, a*, b*, c* blocks followed by scalars.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.a_star.to_csv("A_star"));
        s.push_str(&self.a_plate.to_csv("a_star"));
        s.push_str(&format!(
            "# b_star dimension={} convention={}\n",
            self.a_star.dim(),
            crate::tensor::VOIGT_TAG
        ));
        for i in 0..self.b_plate.nrows() {
            let row: Vec<String> = (0..self.b_plate.ncols()).map(|j| format!("{:e}", self.b_plate[(i, j)])).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s.push_str(&self.c_plate.to_csv("c_star"));
        s.push_str("# scalars\nname,value\n");
        s.push_str(&format!("rho_bar,{:e}\ncell_measure,{:e}\n", self.rho_bar, self.cell_measure));
        s
    }
}
