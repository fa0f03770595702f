//! Average-acceleration Newmark integration (β = 1/4, γ = 1/2) of `M a + K u = f(t)`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fem::{sparse, Cholesky, CsrMatrix};

pub const BETA: f64 = 0.25;
pub const GAMMA: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

pub struct Newmark {
    m: CsrMatrix,
    k: CsrMatrix,
    dt: f64,
    keff: Cholesky,
    mchol: Cholesky,
}

impl Newmark {
    pub fn new(m: CsrMatrix, k: CsrMatrix, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let keff = Cholesky::new(&m.linear_combination(1.0, &k, BETA * dt * dt))?;
        let mchol = Cholesky::new(&m)?;
        Ok(Newmark { m, k, dt, keff, mchol })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.m
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.k
    }

    /// Initial state with `M a0 = f0 - K u0`.
    pub fn init(&self, u0: Vec<f64>, v0: Vec<f64>, f0: &[f64]) -> State {
        let ku = self.k.matvec(&u0);
        let rhs: Vec<f64> = f0.iter().zip(&ku).map(|(f, k)| f - k).collect();
        let a = self.mchol.solve(&rhs);
        State { u: u0, v: v0, a }
    }

    pub fn step(&self, s: &State, f_next: &[f64]) -> State {
        let dt = self.dt;
        let n = s.u.len();
        let pred: Vec<f64> = (0..n).map(|i| s.u[i] + dt * s.v[i] + (0.5 - BETA) * dt * dt * s.a[i]).collect();
        let kp = self.k.matvec(&pred);
        let rhs: Vec<f64> = (0..n).map(|i| f_next[i] - kp[i]).collect();
        let a = self.keff.solve(&rhs);
        let u: Vec<f64> = (0..n).map(|i| pred[i] + BETA * dt * dt * a[i]).collect();
        let v: Vec<f64> = (0..n).map(|i| s.v[i] + dt * ((1.0 - GAMMA) * s.a[i] + GAMMA * a[i])).collect();
        State { u, v, a }
    }

    /// `M⁻¹ r`.
    pub fn solve_mass(&self, r: &[f64]) -> Vec<f64> {
        self.mchol.solve(r)
    }

    /// `½ v·M v + ½ u·K u`.
    pub fn energy(&self, s: &State) -> f64 {
        0.5 * sparse::dot(&s.v, &self.m.matvec(&s.v)) + 0.5 * sparse::dot(&s.u, &self.k.matvec(&s.u))
    }

    /// Largest eigenvalue of `K x = λ M x` estimated by `iters` Lanczos steps.
    pub fn lanczos_max_eigenvalue(&self, iters: usize) -> f64 {
        lanczos_max(&self.k, &self.m, &self.mchol, iters)
    }
}

/// Work of the external force over one step, `½ (u1 - u0)·(f0 + f1)`.
pub fn step_work(u0: &[f64], u1: &[f64], f0: &[f64], f1: &[f64]) -> f64 {
    (0..u0.len()).map(|i| 0.5 * (u1[i] - u0[i]) * (f0[i] + f1[i])).sum()
}

pub(crate) fn lanczos_max(k: &CsrMatrix, m: &CsrMatrix, mchol: &Cholesky, iters: usize) -> f64 {
    let n = k.nrows();
    if n == 0 {
        return 0.0;
    }
    let iters = iters.min(n).max(1);
    let mut q: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let nq = sparse::dot(&q, &m.matvec(&q)).sqrt();
    q.iter_mut().for_each(|x| *x /= nq);
    let mut q_prev = vec![0.0; n];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut beta_prev = 0.0;
    for _ in 0..iters {
        let kq = k.matvec(&q);
        let mut w = mchol.solve(&kq);
        let alpha = sparse::dot(&q, &kq);
        for i in 0..n {
            w[i] -= alpha * q[i] + beta_prev * q_prev[i];
        }
        alphas.push(alpha);
        let beta = sparse::dot(&w, &m.matvec(&w)).sqrt();
        if !(beta > 1e-12 * alpha.abs()) {
            break;
        }
        betas.push(beta);
        q_prev = std::mem::replace(&mut q, w.iter().map(|x| x / beta).collect());
        beta_prev = beta;
    }
    let t = alphas.len();
    let mut tri = DMatrix::zeros(t, t);
    for i in 0..t {
        tri[(i, i)] = alphas[i];
        if i + 1 < t {
            tri[(i, i + 1)] = betas[i];
            tri[(i + 1, i)] = betas[i];
        }
    }
    SymmetricEigen::new(tri).eigenvalues.iter().cloned().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_oscillator_energy_and_phase() {
        let m = CsrMatrix::from_triplets(1, 1, vec![(0, 0, 2.0)]);
        let k = CsrMatrix::from_triplets(1, 1, vec![(0, 0, 8.0)]);
        let dt = 0.001;
        let nm = Newmark::new(m, k, dt).unwrap();
        let mut s = nm.init(vec![1.0], vec![0.0], &[0.0]);
        let e0 = nm.energy(&s);
        for _ in 0..1000 {
            s = nm.step(&s, &[0.0]);
        }
        assert!((nm.energy(&s) - e0).abs() < 1e-10 * e0, "{}", nm.energy(&s) - e0);
        assert!((s.u[0] - (2.0f64).cos()).abs() < 1e-5);
        assert!((nm.lanczos_max_eigenvalue(3) - 4.0).abs() < 1e-12);
    }
}
