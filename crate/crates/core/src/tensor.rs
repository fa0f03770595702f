//! Symmetric matrices, fourth-order elasticity tensors in Voigt storage, and the
//! strain basis `M_ij`.
//!
//! Voigt convention: engineering shears. A strain `E` maps to the vector
//! `[E11, E22, E33, 2E23, 2E13, 2E12]` (d = 3), `[E11, E22, 2E12]` (d = 2) or
//! `[E11]` (d = 1); stresses map without the factor 2. The Voigt matrix entry
//! `C[I][J]` is the tensor component `C_ijkl` with `I ~ (i,j)`, `J ~ (k,l)`, so
//! `E : C E = e^T C e` holds for the engineering vector `e`.
//!
//! Indices are zero-based throughout the crate: index 0 is the thickness
//! direction, indices `1..d` are in-plane.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VOIGT_TAG: &str = "voigt-engineering-shear";

/// Index pairs for the Voigt ordering of a `dim`-dimensional symmetric matrix.
pub fn voigt_pairs(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        1 => &[(0, 0)],
        2 => &[(0, 0), (1, 1), (0, 1)],
        3 => &[(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)],
        _ => panic!("unsupported dimension {dim}"),
    }
}

pub fn voigt_size(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Voigt position of the pair `(i, j)` (order irrelevant).
pub fn voigt_index(dim: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    voigt_pairs(dim)
        .iter()
        .position(|&p| p == (a, b))
        .expect("index out of range")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMat {
    dim: usize,
    e: [[f64; 3]; 3],
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "unsupported dimension {dim}");
        SymMat { dim, e: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.e[i][i] = 1.0;
        }
        m
    }

    /// Builds from a full matrix, symmetrizing. Fails if the input is not symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if !(1..=3).contains(&dim) || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParameter("expected a square matrix of size 1..3".into()));
        }
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let (a, b) = (rows[i][j], rows[j][i]);
                if (a - b).abs() > 1e-14 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidParameter(format!("matrix not symmetric at ({i},{j})")));
                }
                m.e[i][j] = 0.5 * (a + b);
            }
        }
        Ok(m)
    }

    /// The strain basis `M_ij = (e_i ⊗ e_j + e_j ⊗ e_i) / 2`.
    pub fn basis(dim: usize, i: usize, j: usize) -> Self {
        StrainBasis { i, j }.matrix(dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.e[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.e[i][j] = v;
        self.e[j][i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.e[i][i]).sum()
    }

    pub fn ddot(&self, other: &SymMat) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.e[i][j] * other.e[i][j];
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut m = *self;
        for row in m.e.iter_mut() {
            for v in row.iter_mut() {
                *v *= c;
            }
        }
        m
    }

    pub fn add(&self, other: &SymMat) -> Self {
        let mut m = *self;
        for i in 0..3 {
            for j in 0..3 {
                m.e[i][j] += other.e[i][j];
            }
        }
        m
    }

    /// Engineering-strain Voigt vector.
    pub fn to_voigt_strain(&self) -> Vec<f64> {
        voigt_pairs(self.dim)
            .iter()
            .map(|&(i, j)| if i == j { self.e[i][i] } else { 2.0 * self.e[i][j] })
            .collect()
    }

    /// Stress Voigt vector (no shear factor).
    pub fn to_voigt_stress(&self) -> Vec<f64> {
        voigt_pairs(self.dim).iter().map(|&(i, j)| self.e[i][j]).collect()
    }

    pub fn from_voigt_strain(dim: usize, v: &[f64]) -> Self {
        let mut m = Self::zeros(dim);
        for (k, &(i, j)) in voigt_pairs(dim).iter().enumerate() {
            m.set(i, j, if i == j { v[k] } else { 0.5 * v[k] });
        }
        m
    }

    pub fn from_voigt_stress(dim: usize, v: &[f64]) -> Self {
        let mut m = Self::zeros(dim);
        for (k, &(i, j)) in voigt_pairs(dim).iter().enumerate() {
            m.set(i, j, v[k]);
        }
        m
    }
}

/// Index pair of a strain basis matrix (zero-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StrainBasis {
    pub i: usize,
    pub j: usize,
}

impl StrainBasis {
    pub fn matrix(&self, dim: usize) -> SymMat {
        assert!(self.i < dim && self.j < dim, "basis index out of range");
        let mut m = SymMat::zeros(dim);
        if self.i == self.j {
            m.e[self.i][self.i] = 1.0;
        } else {
            m.e[self.i][self.j] = 0.5;
            m.e[self.j][self.i] = 0.5;
        }
        m
    }
}

/// Rank-4 elasticity tensor with minor and major symmetries, stored as a
/// symmetric Voigt matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ElasticTensor4 {
    dim: usize,
    voigt: DMatrix<f64>,
}

/// Outcome of [`ElasticTensor4::verify_class`].
#[derive(Clone, Debug, PartialEq)]
pub struct ClassCheck {
    pub ok: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub report: String,
}

impl ElasticTensor4 {
    /// Wraps a symmetric Voigt matrix (engineering-shear convention).
    pub fn from_voigt(dim: usize, voigt: DMatrix<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("unsupported dimension {dim}")));
        }
        let n = voigt_size(dim);
        if voigt.nrows() != n || voigt.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: voigt.nrows() });
        }
        let scale = voigt.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..i {
                if (voigt[(i, j)] - voigt[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter("Voigt matrix not symmetric".into()));
                }
            }
        }
        let sym = (&voigt + voigt.transpose()) * 0.5;
        Ok(ElasticTensor4 { dim, voigt: sym })
    }

    /// Builds from a component function `c(i,j,k,l)`, reading one representative
    /// per Voigt pair.
    pub fn from_components(dim: usize, c: impl Fn(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let pairs = voigt_pairs(dim);
        let n = pairs.len();
        let mut v = DMatrix::zeros(n, n);
        for (a, &(i, j)) in pairs.iter().enumerate() {
            for (b, &(k, l)) in pairs.iter().enumerate() {
                v[(a, b)] = c(i, j, k, l);
            }
        }
        let v = (&v + v.transpose()) * 0.5;
        Self::from_voigt(dim, v)
    }

    pub fn isotropic(lambda: f64, mu: f64, dim: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("isotropic tensor needs dimension 2 or 3, got {dim}")));
        }
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!("shear modulus must be positive, got {mu}")));
        }
        if !(lambda + 2.0 * mu / dim as f64 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bulk modulus condition lambda + 2 mu / d > 0 violated (lambda={lambda}, mu={mu})"
            )));
        }
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        Self::from_components(dim, |i, j, k, l| {
            lambda * d(i, j) * d(k, l) + mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k))
        })
    }

    pub fn zeros(dim: usize) -> Self {
        let n = voigt_size(dim);
        ElasticTensor4 { dim, voigt: DMatrix::zeros(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn voigt(&self) -> &DMatrix<f64> {
        &self.voigt
    }

    pub fn component(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.voigt[(voigt_index(self.dim, i, j), voigt_index(self.dim, k, l))]
    }

    pub fn scaled(&self, c: f64) -> Self {
        ElasticTensor4 { dim: self.dim, voigt: &self.voigt * c }
    }

    pub fn apply(&self, e: &SymMat) -> Result<SymMat> {
        if e.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: e.dim() });
        }
        let s = &self.voigt * DVector::from_vec(e.to_voigt_strain());
        Ok(SymMat::from_voigt_stress(self.dim, s.as_slice()))
    }

    /// `C E1 : E2`.
    pub fn energy(&self, e1: &SymMat, e2: &SymMat) -> Result<f64> {
        Ok(self.apply(e1)?.ddot(e2))
    }

    /// Symmetric matrix whose spectrum is that of `m ↦ C m` on symmetric
    /// matrices with the Frobenius inner product.
    pub fn mandel(&self) -> DMatrix<f64> {
        let pairs = voigt_pairs(self.dim);
        let w: Vec<f64> = pairs
            .iter()
            .map(|&(i, j)| if i == j { 1.0 } else { std::f64::consts::SQRT_2 })
            .collect();
        let n = pairs.len();
        DMatrix::from_fn(n, n, |a, b| w[a] * self.voigt[(a, b)] * w[b])
    }

    /// Checks `alpha |m|^2 <= C m : m` and `|C m| <= beta |m|` for all symmetric `m`.
    pub fn verify_class(&self, alpha: f64, beta: f64) -> ClassCheck {
        let eig = self.mandel().symmetric_eigen().eigenvalues;
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_abs = eig.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let mut report = Vec::new();
        if !(alpha > 0.0 && alpha < beta) {
            report.push(format!("bounds must satisfy 0 < alpha < beta (alpha={alpha}, beta={beta})"));
        }
        if !(min >= alpha) {
            report.push(format!("coercivity violated: smallest eigenvalue {min} < alpha {alpha}"));
        }
        if !(max_abs <= beta) {
            report.push(format!("boundedness violated: operator norm {max_abs} > beta {beta}"));
        }
        ClassCheck { ok: report.is_empty(), min_eigenvalue: min, max_eigenvalue: max_abs, report: report.join("; ") }
    }

    /// Largest violation of major symmetry relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.voigt.amax().max(f64::MIN_POSITIVE);
        (&self.voigt - self.voigt.transpose()).amax() / scale
    }

    /// CSV text: a header line then one row per Voigt row.
    pub fn to_csv(&self, label: &str) -> String {
        let mut s = format!("# {label} dimension={} convention={VOIGT_TAG}\n", self.dim);
        for i in 0..self.voigt.nrows() {
            let row: Vec<String> = (0..self.voigt.ncols()).map(|j| format!("{:e}", self.voigt[(i, j)])).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Element-wise tensor assignment: piecewise constant over mesh elements.
#[derive(Clone, Debug)]
pub struct Material {
    pub tensor: ElasticTensor4,
    pub density: f64,
}

impl Material {
    pub fn isotropic(lambda: f64, mu: f64, density: f64, dim: usize) -> Result<Self> {
        if !(density > 0.0) {
            return Err(Error::InvalidParameter(format!("density must be positive, got {density}")));
        }
        Ok(Material { tensor: ElasticTensor4::isotropic(lambda, mu, dim)?, density })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_apply(c: &ElasticTensor4, e: &SymMat) -> SymMat {
        let d = c.dim();
        let mut s = SymMat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let mut v = 0.0;
                for k in 0..d {
                    for l in 0..d {
                        v += c.component(i, j, k, l) * e.get(k, l);
                    }
                }
                s.e[i][j] = v;
            }
        }
        s
    }

    #[test]
    fn isotropic_identity_strain() {
        let c = ElasticTensor4::isotropic(1.0, 1.0, 3).unwrap();
        let s = c.apply(&SymMat::identity(3)).unwrap();
        assert_eq!(s, SymMat::identity(3).scaled(5.0));
    }

    #[test]
    fn isotropic_pure_shear_2d() {
        let c = ElasticTensor4::isotropic(0.0, 1.0, 2).unwrap();
        let m = SymMat::basis(2, 0, 1);
        assert_eq!(c.apply(&m).unwrap(), m.scaled(2.0));
    }

    #[test]
    fn isotropic_uniaxial() {
        let c = ElasticTensor4::isotropic(2.0, 1.0, 3).unwrap();
        let s = c.apply(&SymMat::basis(3, 0, 0)).unwrap();
        let mut want = SymMat::zeros(3);
        want.set(0, 0, 4.0);
        want.set(1, 1, 2.0);
        want.set(2, 2, 2.0);
        assert_eq!(s, want);
    }

    #[test]
    fn zero_strain_and_shear() {
        let c = ElasticTensor4::isotropic(1.0, 1.0, 3).unwrap();
        assert_eq!(c.apply(&SymMat::zeros(3)).unwrap(), SymMat::zeros(3));
        let m = SymMat::basis(3, 1, 2);
        assert_eq!(c.apply(&m).unwrap(), m.scaled(2.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ElasticTensor4::isotropic(1.0, 0.0, 3).is_err());
        assert!(ElasticTensor4::isotropic(1.0, -1.0, 2).is_err());
        assert!(ElasticTensor4::isotropic(-1.0, 1.0, 3).is_err());
        let c = ElasticTensor4::isotropic(1.0, 1.0, 3).unwrap();
        assert!(matches!(c.apply(&SymMat::zeros(2)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn class_check() {
        let c = ElasticTensor4::isotropic(1.0, 1.0, 3).unwrap();
        // Dense eigen-oracle on the 3x3x3x3 operator acting on all 9 matrix entries.
        let mut big = DMatrix::zeros(9, 9);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        big[(3 * i + j, 3 * k + l)] = c.component(i, j, k, l);
                    }
                }
            }
        }
        // Restrict to the symmetric subspace with an orthonormal basis.
        let mut basis = Vec::new();
        for i in 0..3 {
            for j in i..3 {
                let mut v = DVector::zeros(9);
                if i == j {
                    v[3 * i + i] = 1.0;
                } else {
                    let w = 1.0 / std::f64::consts::SQRT_2;
                    v[3 * i + j] = w;
                    v[3 * j + i] = w;
                }
                basis.push(v);
            }
        }
        let q = DMatrix::from_columns(&basis);
        let eig = (q.transpose() * big * &q).symmetric_eigen().eigenvalues;
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min - 2.0).abs() < 1e-12);
        assert!(c.verify_class(1.9, 10.0).ok);
        let bad = c.verify_class(5.0, 10.0);
        assert!(!bad.ok);
        assert!(bad.report.contains("coercivity"));
        assert!(!ElasticTensor4::zeros(3).verify_class(0.1, 1.0).ok);
    }

    #[test]
    fn strain_basis_norms() {
        for d in 2..=3 {
            for i in 0..d {
                for j in 0..d {
                    let n2 = SymMat::basis(d, i, j).ddot(&SymMat::basis(d, i, j));
                    let want = if i == j { 1.0 } else { 0.5 };
                    assert_eq!(n2, want);
                }
            }
        }
    }

    #[test]
    fn apply_matches_four_index_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for trial in 0..100 {
            let d = 2 + trial % 2;
            let n = voigt_size(d);
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let spd = &a * a.transpose() + DMatrix::identity(n, n);
            let c = ElasticTensor4::from_voigt(d, spd).unwrap();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let e = SymMat::from_voigt_strain(d, &v);
            let s1 = c.apply(&e).unwrap();
            let s2 = brute_apply(&c, &e);
            for i in 0..d {
                for j in 0..d {
                    let scale = s2.get(i, j).abs().max(1.0);
                    assert!((s1.get(i, j) - s2.get(i, j)).abs() <= 1e-14 * scale * 10.0);
                }
            }
        }
    }

    #[test]
    fn csv_header() {
        let c = ElasticTensor4::isotropic(1.0, 1.0, 2).unwrap();
        let csv = c.to_csv("A");
        assert!(csv.starts_with("# A dimension=2 convention=voigt-engineering-shear"));
        assert_eq!(csv.lines().count(), 4);
    }
}
