//! Bulk half-spaces Ω⁻ = (−L, 0) and Ω⁺ = (0, L): 1D normal-incidence bars carrying
//! all displacement components, or 2D plane-strain strips of width W.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cell_dynamic::Face;
use crate::error::{Error, Result};
use crate::fem::{element, CsrMatrix, Discretization};
use crate::grid::{shape_values, Grid};
use crate::tensor::{ElasticTensor4, Material};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BulkMaterial {
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
}

impl BulkMaterial {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !(self.lambda + self.mu > 0.0) || !(self.rho > 0.0) {
            return Err(Error::InvalidParameter(format!("bulk material not coercive or density not positive: {self:?}")));
        }
        Ok(())
    }

    /// `Q_kl = A_{k0l0}` for an isotropic material.
    pub fn acoustic(&self, ncomp: usize) -> DMatrix<f64> {
        DMatrix::from_fn(ncomp, ncomp, |k, l| match (k, l) {
            (0, 0) => self.lambda + 2.0 * self.mu,
            (k, l) if k == l => self.mu,
            _ => 0.0,
        })
    }

    /// Longitudinal impedance `√(ρ (λ + 2μ))`.
    pub fn impedance(&self) -> f64 {
        (self.rho * (self.lambda + 2.0 * self.mu)).sqrt()
    }

    pub fn p_wave_speed(&self) -> f64 {
        ((self.lambda + 2.0 * self.mu) / self.rho).sqrt()
    }

    pub fn plane_strain(&self) -> Result<Material> {
        Ok(Material { tensor: ElasticTensor4::isotropic(self.lambda, self.mu, 2)?, density: self.rho })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroMode {
    #[serde(rename = "normal_1d")]
    Normal1d,
    #[serde(rename = "plane_2d")]
    Plane2d,
}

/// One half-space: its grid and the offset of its first node in the combined numbering.
#[derive(Clone, Debug)]
pub struct BulkSide {
    pub grid: Grid,
    pub offset: usize,
    pub material: BulkMaterial,
}

#[derive(Clone, Debug)]
pub struct BulkSystem {
    pub mode: MacroMode,
    pub ncomp: usize,
    /// Indexed like [`Face`]: plus side (x₁ > 0) first.
    pub sides: [BulkSide; 2],
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub num_nodes: usize,
    /// Interface nodes per side, ordered by x₂.
    pub interface: [Vec<usize>; 2],
    pub interface_x2: Vec<f64>,
    /// Interface length associated with each interface node (1 in 1D).
    pub interface_weights: Vec<f64>,
    /// Nodes at x₁ = −L with their edge weights.
    pub left_end: Vec<usize>,
    pub left_weights: Vec<f64>,
    pub left_x2: Vec<f64>,
    /// Nodes at x₁ = +L.
    pub right_end: Vec<usize>,
    /// Nodes on x₂ = 0 or x₂ = W (2D only).
    pub lateral: Vec<usize>,
    pub width: f64,
}

fn block_diag(n: usize, a: &CsrMatrix, off_a: usize, b: &CsrMatrix, off_b: usize) -> CsrMatrix {
    let mut t: Vec<(usize, usize, f64)> = a.iter().map(|(r, c, v)| (r + off_a, c + off_a, v)).collect();
    t.extend(b.iter().map(|(r, c, v)| (r + off_b, c + off_b, v)));
    CsrMatrix::from_triplets(n, n, t)
}

fn bar(mat: &BulkMaterial, coords: &[f64], ncomp: usize) -> (CsrMatrix, CsrMatrix) {
    let q = mat.acoustic(ncomp);
    let nn = coords.len();
    let n = nn * ncomp;
    let (mut kt, mut mt) = (Vec::new(), Vec::new());
    for e in 0..nn - 1 {
        let h = coords[e + 1] - coords[e];
        for (a, sa) in [(e, 1.0), (e + 1, -1.0)] {
            for (b, sb) in [(e, 1.0), (e + 1, -1.0)] {
                let same = a == b;
                for k in 0..ncomp {
                    for l in 0..ncomp {
                        let v = sa * sb * q[(k, l)] / h;
                        if v != 0.0 {
                            kt.push((a * ncomp + k, b * ncomp + l, v));
                        }
                    }
                    let m = mat.rho * h / 6.0 * if same { 2.0 } else { 1.0 };
                    mt.push((a * ncomp + k, b * ncomp + k, m));
                }
            }
        }
    }
    (CsrMatrix::from_triplets(n, n, kt), CsrMatrix::from_triplets(n, n, mt))
}

fn uniform_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

impl BulkSystem {
    /// Two bars of length `length` with `elements` elements each and `ncomp` components.
    pub fn normal_1d(minus: BulkMaterial, plus: BulkMaterial, length: f64, elements: usize, ncomp: usize) -> Result<Self> {
        Self::normal_1d_axes(minus, plus, &uniform_axis(-length, 0.0, elements), &uniform_axis(0.0, length, elements), ncomp)
    }

    /// Bars on explicit node coordinates (minus axis ends at 0, plus axis starts at 0).
    pub fn normal_1d_axes(minus: BulkMaterial, plus: BulkMaterial, xm: &[f64], xp: &[f64], ncomp: usize) -> Result<Self> {
        minus.validate()?;
        plus.validate()?;
        if !(1..=3).contains(&ncomp) {
            return Err(Error::InvalidParameter(format!("components must be 1..=3, got {ncomp}")));
        }
        check_axes(xm, xp)?;
        let (kp, mp) = bar(&plus, xp, ncomp);
        let (km, mm) = bar(&minus, xm, ncomp);
        let np = xp.len();
        let n_nodes = np + xm.len();
        let n = n_nodes * ncomp;
        Ok(BulkSystem {
            mode: MacroMode::Normal1d,
            ncomp,
            sides: [
                BulkSide { grid: Grid::new(vec![xp.to_vec()]), offset: 0, material: plus },
                BulkSide { grid: Grid::new(vec![xm.to_vec()]), offset: np, material: minus },
            ],
            stiffness: block_diag(n, &kp, 0, &km, np * ncomp),
            mass: block_diag(n, &mp, 0, &mm, np * ncomp),
            num_nodes: n_nodes,
            interface: [vec![0], vec![np + xm.len() - 1]],
            interface_x2: vec![0.0],
            interface_weights: vec![1.0],
            left_end: vec![np],
            left_weights: vec![1.0],
            left_x2: vec![0.0],
            right_end: vec![np - 1],
            lateral: Vec::new(),
            width: 1.0,
        })
    }

    /// Two plane-strain strips `(−L,0)×(0,W)` and `(0,L)×(0,W)`.
    pub fn plane_2d(minus: BulkMaterial, plus: BulkMaterial, length: f64, width: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::plane_2d_axes(minus, plus, &uniform_axis(-length, 0.0, nx), &uniform_axis(0.0, length, nx), &uniform_axis(0.0, width, ny))
    }

    pub fn plane_2d_axes(minus: BulkMaterial, plus: BulkMaterial, xm: &[f64], xp: &[f64], y: &[f64]) -> Result<Self> {
        check_axes(xm, xp)?;
        let gp = Grid::new(vec![xp.to_vec(), y.to_vec()]);
        let gm = Grid::new(vec![xm.to_vec(), y.to_vec()]);
        let dp = Discretization::new(gp.clone(), vec![Some(0); gp.num_elements()], vec![plus.plane_strain()?])?;
        let dm = Discretization::new(gm.clone(), vec![Some(0); gm.num_elements()], vec![minus.plane_strain()?])?;
        let np = gp.num_nodes();
        let n_nodes = np + gm.num_nodes();
        let n = 2 * n_nodes;
        let (nxp, nxm) = (xp.len() - 1, xm.len() - 1);
        let ny = y.len() - 1;
        let col = |g: &Grid, i: usize, off: usize| -> Vec<usize> { (0..=ny).map(|j| off + g.node_index([i, j, 0])).collect() };
        let mut weights = vec![0.0; ny + 1];
        for j in 0..ny {
            let h = y[j + 1] - y[j];
            weights[j] += 0.5 * h;
            weights[j + 1] += 0.5 * h;
        }
        let mut lateral = Vec::new();
        for (g, off) in [(&gp, 0), (&gm, np)] {
            for i in 0..g.axis(0).len() {
                lateral.push(off + g.node_index([i, 0, 0]));
                lateral.push(off + g.node_index([i, ny, 0]));
            }
        }
        Ok(BulkSystem {
            mode: MacroMode::Plane2d,
            ncomp: 2,
            sides: [
                BulkSide { grid: gp.clone(), offset: 0, material: plus },
                BulkSide { grid: gm.clone(), offset: np, material: minus },
            ],
            stiffness: block_diag(n, &dp.assemble_stiffness(), 0, &dm.assemble_stiffness(), 2 * np),
            mass: block_diag(n, &dp.assemble_mass(), 0, &dm.assemble_mass(), 2 * np),
            num_nodes: n_nodes,
            interface: [col(&gp, 0, 0), col(&gm, nxm, np)],
            interface_x2: y.to_vec(),
            interface_weights: weights.clone(),
            left_end: col(&gm, 0, np),
            left_weights: weights,
            left_x2: y.to_vec(),
            right_end: col(&gp, nxp, 0),
            lateral,
            width: y[ny] - y[0],
        })
    }

    pub fn num_dofs(&self) -> usize {
        self.num_nodes * self.ncomp
    }

    /// Index of the interface node closest to mid-width.
    pub fn mid_interface(&self) -> usize {
        let mid = 0.5 * (self.interface_x2[0] + self.interface_x2[self.interface_x2.len() - 1]);
        (0..self.interface_x2.len())
            .min_by(|&a, &b| (self.interface_x2[a] - mid).abs().total_cmp(&(self.interface_x2[b] - mid).abs()))
            .unwrap_or(0)
    }

    /// Side holding point `x` (x₁ = 0 is assigned to `tie`).
    pub fn side_of(&self, x1: f64, tie: Face) -> Face {
        if x1 > 0.0 {
            Face::Plus
        } else if x1 < 0.0 {
            Face::Minus
        } else {
            tie
        }
    }

    fn locate(&self, side: Face, x: &[f64; 2]) -> Result<(usize, [f64; 3], &BulkSide)> {
        let s = &self.sides[side.index()];
        let dim = s.grid.dim();
        s.grid
            .locate(&x[..dim])
            .map(|(e, xi)| (e, xi, s))
            .ok_or_else(|| Error::InvalidParameter(format!("point {x:?} outside the {} bulk", side.name())))
    }

    /// Displacement at `x` on `side` by interpolation of the full bulk field.
    pub fn evaluate(&self, u: &[f64], side: Face, x: &[f64; 2]) -> Result<Vec<f64>> {
        let (e, xi, s) = self.locate(side, x)?;
        let dim = s.grid.dim();
        let n = shape_values(dim, &xi);
        let nodes = s.grid.element_nodes(e);
        let mut out = vec![0.0; self.ncomp];
        for a in 0..(1 << dim) {
            let node = s.offset + nodes[a];
            for c in 0..self.ncomp {
                out[c] += n[a] * u[node * self.ncomp + c];
            }
        }
        Ok(out)
    }

    /// Traction `σ e₁` at `x` on `side`.
    pub fn traction(&self, u: &[f64], side: Face, x: &[f64; 2]) -> Result<Vec<f64>> {
        let (e, xi, s) = self.locate(side, x)?;
        let nodes = s.grid.element_nodes(e);
        let h = s.grid.element_size(e);
        match self.mode {
            MacroMode::Normal1d => {
                let q = s.material.acoustic(self.ncomp);
                let du: Vec<f64> = (0..self.ncomp)
                    .map(|c| (u[(s.offset + nodes[1]) * self.ncomp + c] - u[(s.offset + nodes[0]) * self.ncomp + c]) / h[0])
                    .collect();
                Ok((0..self.ncomp).map(|k| (0..self.ncomp).map(|l| q[(k, l)] * du[l]).sum()).collect())
            }
            MacroMode::Plane2d => {
                let ue: Vec<f64> = (0..4).flat_map(|a| (0..2).map(move |c| (a, c))).map(|(a, c)| u[(s.offset + nodes[a]) * 2 + c]).collect();
                let eps = element::strain_at(2, &xi, &h, &ue);
                let sig = s.material.plane_strain()?.tensor.apply(&eps)?;
                Ok(vec![sig.get(0, 0), sig.get(1, 0)])
            }
        }
    }

    /// Consistent nodal load of a traction `g(x₂)` on the left end.
    pub fn left_end_load(&self, g: impl Fn(f64) -> Vec<f64>) -> Vec<f64> {
        let mut f = vec![0.0; self.num_dofs()];
        for (k, &node) in self.left_end.iter().enumerate() {
            let gv = g(self.left_x2[k]);
            for c in 0..self.ncomp.min(gv.len()) {
                f[node * self.ncomp + c] += self.left_weights[k] * gv[c];
            }
        }
        f
    }

    /// `M · b` for a spatially uniform body force density `b` (per unit mass).
    pub fn body_load(&self, b: &[f64]) -> Vec<f64> {
        let mut field = vec![0.0; self.num_dofs()];
        for n in 0..self.num_nodes {
            for c in 0..self.ncomp.min(b.len()) {
                field[n * self.ncomp + c] = b[c];
            }
        }
        self.mass.matvec(&field)
    }

    /// Nodal field from a function of position (x₁, x₂).
    pub fn nodal_field(&self, f: impl Fn(f64, f64) -> Vec<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.num_dofs()];
        for s in &self.sides {
            for n in 0..s.grid.num_nodes() {
                let x = s.grid.node_coord(n);
                let v = f(x[0], if s.grid.dim() > 1 { x[1] } else { 0.0 });
                let node = s.offset + n;
                for c in 0..self.ncomp.min(v.len()) {
                    out[node * self.ncomp + c] = v[c];
                }
            }
        }
        out
    }

    /// Internal force `K u + M a` at the interface nodes of `side`, per unit interface length.
    pub fn interface_force(&self, u: &[f64], a: &[f64], side: Face, k: usize) -> Vec<f64> {
        let node = self.interface[side.index()][k];
        let w = self.interface_weights[k];
        let d = self.ncomp;
        (0..d)
            .map(|c| {
                let r = node * d + c;
                let ku: f64 = self.stiffness.row(r).map(|(j, v)| v * u[j]).sum();
                let ma: f64 = self.mass.row(r).map(|(j, v)| v * a[j]).sum();
                (ku + ma) / w
            })
            .collect()
    }
}

fn check_axes(xm: &[f64], xp: &[f64]) -> Result<()> {
    if xm.len() < 2 || xp.len() < 2 || xm[xm.len() - 1] != 0.0 || xp[0] != 0.0 {
        return Err(Error::InvalidParameter("bulk axes must meet at x1 = 0".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bar_rigid_modes_and_mass() {
        let m = BulkMaterial { lambda: 1.0, mu: 2.0, rho: 3.0 };
        let b = BulkSystem::normal_1d(m, m, 2.0, 8, 2).unwrap();
        let ones = vec![1.0; b.num_dofs()];
        assert!(b.stiffness.matvec(&ones).iter().all(|v| v.abs() < 1e-12));
        let total: f64 = b.mass.matvec(&ones).iter().sum();
        assert!((total - 2.0 * 2.0 * 3.0 * 2.0).abs() < 1e-12);
        assert_eq!(b.evaluate(&ones, Face::Minus, &[-1.3, 0.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn strip_traction_of_affine_field() {
        let m = BulkMaterial { lambda: 1.0, mu: 1.0, rho: 1.0 };
        let b = BulkSystem::plane_2d(m, m, 1.0, 0.5, 4, 2).unwrap();
        let u = b.nodal_field(|x1, _| vec![0.1 * x1, 0.0]);
        let t = b.traction(&u, Face::Plus, &[0.3, 0.2]).unwrap();
        assert!((t[0] - 0.3).abs() < 1e-12 && t[1].abs() < 1e-12);
        let f = b.left_end_load(|_| vec![1.0, 0.0]);
        assert!((f.iter().sum::<f64>() - 0.5).abs() < 1e-14);
    }
}
