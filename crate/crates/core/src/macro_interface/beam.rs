//! Clamped interface beam for γ = −3 along x₂: Hermite cubics for the deflection
//! w = [u^M]₁, linear elements for the in-plane field û, with û condensed out of
//! the quasi-static balance `(a û' + b w'')' = 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct HermiteBeam {
    pub x: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rho: f64,
}

/// Operators on beam dofs ordered `(w₀, θ₀, w₁, θ₁, …)`.
#[derive(Clone, Debug)]
pub struct CondensedBeam {
    pub stiffness: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    /// `û = recover · (w, θ)` at the interface nodes.
    pub recover: DMatrix<f64>,
}

impl HermiteBeam {
    pub fn new(x: Vec<f64>, a: f64, b: f64, c: f64, rho: f64) -> Result<Self> {
        if x.len() < 2 || !x.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter("beam nodes must increase".into()));
        }
        if !(c > 0.0) || a < 0.0 || (a == 0.0 && b != 0.0) || rho < 0.0 {
            return Err(Error::InvalidParameter(format!("beam coefficients not admissible: a={a}, b={b}, c={c}, rho={rho}")));
        }
        Ok(HermiteBeam { x, a, b, c, rho })
    }

    pub fn num_nodes(&self) -> usize {
        self.x.len()
    }

    fn element_bending(h: f64) -> [[f64; 4]; 4] {
        let (h2, h3) = (h * h, h * h * h);
        [
            [12.0 / h3, 6.0 / h2, -12.0 / h3, 6.0 / h2],
            [6.0 / h2, 4.0 / h, -6.0 / h2, 2.0 / h],
            [-12.0 / h3, -6.0 / h2, 12.0 / h3, -6.0 / h2],
            [6.0 / h2, 2.0 / h, -6.0 / h2, 4.0 / h],
        ]
    }

    fn element_mass(h: f64) -> [[f64; 4]; 4] {
        let s = h / 420.0;
        let h2 = h * h;
        [
            [156.0 * s, 22.0 * h * s, 54.0 * s, -13.0 * h * s],
            [22.0 * h * s, 4.0 * h2 * s, 13.0 * h * s, -3.0 * h2 * s],
            [54.0 * s, 13.0 * h * s, 156.0 * s, -22.0 * h * s],
            [-13.0 * h * s, -3.0 * h2 * s, -22.0 * h * s, 4.0 * h2 * s],
        ]
    }

    /// Consistent load of a uniform line load `p` on beam dofs.
    pub fn uniform_load(&self, p: f64) -> DVector<f64> {
        let n = self.num_nodes();
        let mut f = DVector::zeros(2 * n);
        for e in 0..n - 1 {
            let h = self.x[e + 1] - self.x[e];
            let fe = [p * h / 2.0, p * h * h / 12.0, p * h / 2.0, -p * h * h / 12.0];
            for a in 0..4 {
                f[2 * e + a] += fe[a];
            }
        }
        f
    }

    /// Stiffness with û eliminated (û clamped at both ends) and consistent mass.
    pub fn condensed(&self) -> Result<CondensedBeam> {
        let n = self.num_nodes();
        let mut kww = DMatrix::zeros(2 * n, 2 * n);
        let mut mww = DMatrix::zeros(2 * n, 2 * n);
        let mut kuu = DMatrix::zeros(n, n);
        let mut kuw = DMatrix::zeros(n, 2 * n);
        for e in 0..n - 1 {
            let h = self.x[e + 1] - self.x[e];
            let kb = Self::element_bending(h);
            let me = Self::element_mass(h);
            for i in 0..4 {
                for j in 0..4 {
                    kww[(2 * e + i, 2 * e + j)] += self.c * kb[i][j];
                    mww[(2 * e + i, 2 * e + j)] += self.rho * me[i][j];
                }
            }
            let dn = [-1.0 / h, 1.0 / h];
            // ∫ H_j'' = [0, −1, 0, 1]
            let ih = [0.0, -1.0, 0.0, 1.0];
            for i in 0..2 {
                for j in 0..2 {
                    kuu[(e + i, e + j)] += self.a * dn[i] * dn[j] * h;
                }
                for j in 0..4 {
                    kuw[(e + i, 2 * e + j)] += self.b * dn[i] * ih[j];
                }
            }
        }
        let mut recover = DMatrix::zeros(n, 2 * n);
        let mut stiffness = kww;
        if self.a > 0.0 && n > 2 {
            let inner: Vec<usize> = (1..n - 1).collect();
            let kii: DMatrix<f64> = DMatrix::from_fn(inner.len(), inner.len(), |i, j| kuu[(inner[i], inner[j])]);
            let kiw: DMatrix<f64> = DMatrix::from_fn(inner.len(), 2 * n, |i, j| kuw[(inner[i], j)]);
            let chol = kii.cholesky().ok_or_else(|| Error::Singular("in-plane beam operator".into()))?;
            let sol = chol.solve(&kiw);
            stiffness -= kiw.transpose() * &sol;
            for (r, &i) in inner.iter().enumerate() {
                for j in 0..2 * n {
                    recover[(i, j)] = -sol[(r, j)];
                }
            }
        }
        Ok(CondensedBeam { stiffness, mass: mww, recover })
    }
}

#[derive(Clone, Debug)]
pub struct BeamStatic {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub slope: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub midpoint: f64,
}

/// Clamped–clamped beam of length ℓ under uniform load p (both ends: w = w' = û = 0).
pub fn clamped_beam_static(a: f64, b: f64, c: f64, length: f64, elements: usize, p: f64) -> Result<BeamStatic> {
    if elements < 2 || elements % 2 != 0 {
        return Err(Error::InvalidParameter("static beam needs an even number of elements".into()));
    }
    let x: Vec<f64> = (0..=elements).map(|i| length * i as f64 / elements as f64).collect();
    let beam = HermiteBeam::new(x.clone(), a, b, c, 0.0)?;
    let cb = beam.condensed()?;
    let f = beam.uniform_load(p);
    let n = x.len();
    let free: Vec<usize> = (2..2 * n - 2).collect();
    let kff = DMatrix::from_fn(free.len(), free.len(), |i, j| cb.stiffness[(free[i], free[j])]);
    let ff = DVector::from_fn(free.len(), |i, _| f[free[i]]);
    let sol = kff.cholesky().ok_or_else(|| Error::Singular("beam stiffness".into()))?.solve(&ff);
    let mut full = DVector::zeros(2 * n);
    for (i, &k) in free.iter().enumerate() {
        full[k] = sol[i];
    }
    let u_hat = &cb.recover * &full;
    let w: Vec<f64> = (0..n).map(|i| full[2 * i]).collect();
    Ok(BeamStatic {
        midpoint: w[elements / 2],
        slope: (0..n).map(|i| full[2 * i + 1]).collect(),
        u_hat: u_hat.iter().copied().collect(),
        x,
        w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_mass_integrates_density() {
        let beam = HermiteBeam::new(vec![0.0, 0.3, 1.0], 0.0, 0.0, 1.0, 2.0).unwrap();
        let cb = beam.condensed().unwrap();
        // translation (w = 1, θ = 0): total mass ρ ℓ
        let t = DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert!(((t.transpose() * &cb.mass * &t)[(0, 0)] - 2.0).abs() < 1e-13);
        // rigid motions carry no bending energy
        let r = DVector::from_vec(vec![0.0, 1.0, 0.3, 1.0, 1.0, 1.0]);
        assert!((&cb.stiffness * &r).amax() < 1e-12);
    }
}
