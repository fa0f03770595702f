//! Multilinear voxel elements (bar, quad, hex) with 2-point Gauss quadrature per direction.
//!
//! Element dof `a * d + c` is component `c` of local node `a`.

use nalgebra::{DMatrix, DVector};

use crate::tensor::{voigt_pairs, ElasticTensor4, SymMat};

const G: f64 = 0.211_324_865_405_187_1; // (1 - 1/sqrt(3)) / 2

/// Gauss points on `[0,1]^d` (local coordinates) with weights summing to 1.
pub fn gauss_points(dim: usize) -> Vec<([f64; 3], f64)> {
    let pts = [G, 1.0 - G];
    let n = 1 << dim;
    (0..n)
        .map(|p| {
            let mut xi = [0.0; 3];
            for k in 0..dim {
                xi[k] = pts[(p >> k) & 1];
            }
            (xi, 1.0 / n as f64)
        })
        .collect()
}

/// Physical gradients `dN_a/dx_k` at local coordinates `xi` for an element of size `h`.
pub fn shape_gradients(dim: usize, xi: &[f64; 3], h: &[f64; 3]) -> [[f64; 3]; 8] {
    let mut g = [[0.0; 3]; 8];
    for (a, ga) in g.iter_mut().enumerate().take(1 << dim) {
        for k in 0..dim {
            let mut p = 1.0;
            for m in 0..dim {
                let hi = (a >> m) & 1 == 1;
                p *= if m == k {
                    if hi { 1.0 / h[k] } else { -1.0 / h[k] }
                } else if hi {
                    xi[m]
                } else {
                    1.0 - xi[m]
                };
            }
            ga[k] = p;
        }
    }
    g
}

/// Strain-displacement matrix (engineering Voigt rows).
pub fn b_matrix(dim: usize, grads: &[[f64; 3]; 8]) -> DMatrix<f64> {
    let pairs = voigt_pairs(dim);
    let nn = 1 << dim;
    let mut b = DMatrix::zeros(pairs.len(), nn * dim);
    for (row, &(i, j)) in pairs.iter().enumerate() {
        for a in 0..nn {
            if i == j {
                b[(row, a * dim + i)] = grads[a][i];
            } else {
                b[(row, a * dim + i)] += grads[a][j];
                b[(row, a * dim + j)] += grads[a][i];
            }
        }
    }
    b
}

fn volume(dim: usize, h: &[f64; 3]) -> f64 {
    h[..dim].iter().product()
}

pub fn stiffness(dim: usize, h: &[f64; 3], c: &ElasticTensor4) -> DMatrix<f64> {
    assert_eq!(c.dim(), dim);
    let vol = volume(dim, h);
    let nd = (1 << dim) * dim;
    let mut k = DMatrix::zeros(nd, nd);
    for (xi, w) in gauss_points(dim) {
        let b = b_matrix(dim, &shape_gradients(dim, &xi, h));
        k += b.transpose() * c.voigt() * &b * (w * vol);
    }
    (&k + k.transpose()) * 0.5
}

pub fn mass(dim: usize, h: &[f64; 3], rho: f64) -> DMatrix<f64> {
    let vol = volume(dim, h);
    let nn = 1 << dim;
    let mut m = DMatrix::zeros(nn * dim, nn * dim);
    for (xi, w) in gauss_points(dim) {
        let n = crate::grid::shape_values(dim, &xi);
        for a in 0..nn {
            for b in 0..nn {
                let v = rho * n[a] * n[b] * w * vol;
                for c in 0..dim {
                    m[(a * dim + c, b * dim + c)] += v;
                }
            }
        }
    }
    m
}

/// `-∫ B^T C e0(x)` with `e0` evaluated at the Gauss points (`origin` is the low corner).
pub fn prestrain_load(
    dim: usize,
    origin: &[f64; 3],
    h: &[f64; 3],
    c: &ElasticTensor4,
    e0: &dyn Fn(&[f64; 3]) -> SymMat,
) -> DVector<f64> {
    let vol = volume(dim, h);
    let mut f = DVector::zeros((1 << dim) * dim);
    for (xi, w) in gauss_points(dim) {
        let mut x = [0.0; 3];
        for k in 0..dim {
            x[k] = origin[k] + xi[k] * h[k];
        }
        let b = b_matrix(dim, &shape_gradients(dim, &xi, h));
        let s = c.voigt() * DVector::from_vec(e0(&x).to_voigt_strain());
        f -= b.transpose() * s * (w * vol);
    }
    f
}

/// `∫ C e(u) : e(u)`-style strain at local coordinates from element nodal values.
pub fn strain_at(dim: usize, xi: &[f64; 3], h: &[f64; 3], ue: &[f64]) -> SymMat {
    let b = b_matrix(dim, &shape_gradients(dim, xi, h));
    let e = b * DVector::from_column_slice(ue);
    SymMat::from_voigt_strain(dim, e.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_stiffness_matches_quadrature_oracle() {
        // Oracle: 3x3 Gauss (over-integrated) quadrature of the bilinear stiffness with
        // the textbook isoparametric gradients on [-1,1]^2 mapped to the unit square.
        let c = ElasticTensor4::isotropic(1.0, 1.0, 2).unwrap();
        let k = stiffness(2, &[1.0, 1.0, 1.0], &c);
        let pts = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
        let wts = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let corners = [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)];
        let d = c.voigt();
        let mut oracle = DMatrix::<f64>::zeros(8, 8);
        for (i, &s) in pts.iter().enumerate() {
            for (j, &t) in pts.iter().enumerate() {
                let mut b = DMatrix::<f64>::zeros(3, 8);
                for (a, &(sa, ta)) in corners.iter().enumerate() {
                    // dN/dx = 2 dN/ds on the unit square
                    let dx = 2.0 * 0.25 * sa * (1.0 + ta * t);
                    let dy = 2.0 * 0.25 * ta * (1.0 + sa * s);
                    b[(0, 2 * a)] = dx;
                    b[(1, 2 * a + 1)] = dy;
                    b[(2, 2 * a)] = dy;
                    b[(2, 2 * a + 1)] = dx;
                }
                oracle += b.transpose() * d * &b * (wts[i] * wts[j] * 0.25);
            }
        }
        assert!((k - oracle).amax() < 1e-13);
    }

    #[test]
    fn rigid_modes_in_kernel() {
        let c = ElasticTensor4::isotropic(2.0, 0.7, 3).unwrap();
        let k = stiffness(3, &[0.5, 0.25, 1.0], &c);
        for comp in 0..3 {
            let t = DVector::from_fn(24, |i, _| if i % 3 == comp { 1.0 } else { 0.0 });
            assert!((&k * t).amax() < 1e-12);
        }
    }

    #[test]
    fn mass_rows_sum_to_lumped() {
        let m = mass(2, &[0.5, 0.25, 1.0], 2.0);
        let total: f64 = m.iter().sum();
        assert!((total - 2.0 * 0.125 * 2.0).abs() < 1e-14);
        for r in 0..8 {
            let s: f64 = m.row(r).iter().sum();
            assert!((s - 2.0 * 0.125 / 4.0).abs() < 1e-14);
        }
    }
}
