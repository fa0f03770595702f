//! Degree-of-freedom maps: periodic identification, Dirichlet values, face-equality
//! groups and zero-mean multipliers, reduced to a free-dof system.
//!
//! Overlaps are resolved by precedence Dirichlet > face group > periodic; a periodic
//! slave inherits whatever its master maps to.

use std::collections::BTreeMap;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DofTarget {
    Inactive,
    Free(usize),
    Fixed(f64),
}

#[derive(Clone, Debug, Default)]
pub struct DofMapBuilder {
    num_nodes: usize,
    ncomp: usize,
    active: Option<Vec<bool>>,
    periodic: Vec<(usize, usize)>,
    dirichlet: BTreeMap<usize, f64>,
    face_groups: Vec<Vec<usize>>,
    zero_mean: bool,
}

impl DofMapBuilder {
    pub fn new(num_nodes: usize, ncomp: usize) -> Self {
        DofMapBuilder { num_nodes, ncomp, ..Default::default() }
    }

    pub fn active(mut self, active: &[bool]) -> Self {
        self.active = Some(active.to_vec());
        self
    }

    pub fn periodic(mut self, pairs: &[(usize, usize)]) -> Self {
        self.periodic.extend_from_slice(pairs);
        self
    }

    /// Fixes component `comp` of `node` to `value`.
    pub fn dirichlet(mut self, node: usize, comp: usize, value: f64) -> Self {
        self.dirichlet.insert(node * self.ncomp + comp, value);
        self
    }

    pub fn dirichlet_nodes(mut self, nodes: &[usize], value: impl Fn(usize, usize) -> f64) -> Self {
        for &n in nodes {
            for c in 0..self.ncomp {
                self.dirichlet.insert(n * self.ncomp + c, value(n, c));
            }
        }
        self
    }

    /// All listed nodes share one vector unknown.
    pub fn face_group(mut self, nodes: &[usize]) -> Self {
        self.face_groups.push(nodes.to_vec());
        self
    }

    pub fn zero_mean(mut self, on: bool) -> Self {
        self.zero_mean = on;
        self
    }

    pub fn build(self) -> Result<DofMap> {
        let nc = self.ncomp;
        let ndof = self.num_nodes * nc;
        let active = self.active.unwrap_or_else(|| vec![true; self.num_nodes]);
        let mut group_of = vec![usize::MAX; self.num_nodes];
        for (g, nodes) in self.face_groups.iter().enumerate() {
            for &n in nodes {
                if group_of[n] != usize::MAX && group_of[n] != g {
                    return Err(Error::InvalidParameter(format!("node {n} belongs to two face groups")));
                }
                group_of[n] = g;
            }
        }
        let mut master_of = vec![usize::MAX; self.num_nodes];
        for &(m, s) in &self.periodic {
            master_of[s] = m;
        }
        let mut map = vec![DofTarget::Inactive; ndof];
        let mut comp_of_free = Vec::new();
        let mut group_dofs: Vec<Vec<usize>> = vec![vec![usize::MAX; nc]; self.face_groups.len()];
        for n in 0..self.num_nodes {
            if !active[n] {
                continue;
            }
            for c in 0..nc {
                let dof = n * nc + c;
                if let Some(&v) = self.dirichlet.get(&dof) {
                    map[dof] = DofTarget::Fixed(v);
                } else if group_of[n] != usize::MAX {
                    let slot = &mut group_dofs[group_of[n]][c];
                    if *slot == usize::MAX {
                        *slot = comp_of_free.len();
                        comp_of_free.push(c);
                    }
                    map[dof] = DofTarget::Free(*slot);
                } else if master_of[n] == usize::MAX {
                    map[dof] = DofTarget::Free(comp_of_free.len());
                    comp_of_free.push(c);
                }
            }
        }
        for n in 0..self.num_nodes {
            let m = master_of[n];
            if m == usize::MAX || !active[n] {
                continue;
            }
            if master_of[m] != usize::MAX {
                return Err(Error::InvalidParameter(format!("periodic master {m} is itself a slave")));
            }
            for c in 0..nc {
                let dof = n * nc + c;
                if map[dof] == DofTarget::Inactive {
                    map[dof] = map[m * nc + c];
                }
            }
        }
        Ok(DofMap {
            ncomp: nc,
            map,
            comp_of_free,
            zero_mean: self.zero_mean,
            has_dirichlet: !self.dirichlet.is_empty(),
            group_dofs,
        })
    }
}

#[derive(Clone, Debug)]
pub struct DofMap {
    ncomp: usize,
    map: Vec<DofTarget>,
    comp_of_free: Vec<usize>,
    zero_mean: bool,
    has_dirichlet: bool,
    group_dofs: Vec<Vec<usize>>,
}

impl DofMap {
    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn num_full(&self) -> usize {
        self.map.len()
    }

    pub fn num_free(&self) -> usize {
        self.comp_of_free.len()
    }

    pub fn target(&self, dof: usize) -> DofTarget {
        self.map[dof]
    }

    pub fn comp_of_free(&self, r: usize) -> usize {
        self.comp_of_free[r]
    }

    pub fn zero_mean(&self) -> bool {
        self.zero_mean
    }

    pub fn has_dirichlet(&self) -> bool {
        self.has_dirichlet
    }

    pub fn num_face_groups(&self) -> usize {
        self.group_dofs.len()
    }

    /// Reduced index of component `c` of face group `g`.
    pub fn group_dof(&self, g: usize, c: usize) -> usize {
        self.group_dofs[g][c]
    }

    /// Free-free block `P^T K P`.
    pub fn reduce_matrix(&self, k: &CsrMatrix) -> CsrMatrix {
        let n = self.num_free();
        let t: Vec<_> = k
            .iter()
            .filter_map(|(r, c, v)| match (self.map[r], self.map[c]) {
                (DofTarget::Free(a), DofTarget::Free(b)) => Some((a, b, v)),
                _ => None,
            })
            .collect();
        CsrMatrix::from_triplets(n, n, t)
    }

    /// `P^T (f - K u_fixed)`.
    pub fn reduce_rhs(&self, k: &CsrMatrix, f: &[f64]) -> Vec<f64> {
        let mut out = self.restrict(f);
        if self.has_dirichlet {
            for (r, c, v) in k.iter() {
                if let (DofTarget::Free(a), DofTarget::Fixed(val)) = (self.map[r], self.map[c]) {
                    out[a] -= v * val;
                }
            }
        }
        out
    }

    /// `P^T v` (sums contributions of identified dofs).
    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_free()];
        for (dof, t) in self.map.iter().enumerate() {
            if let DofTarget::Free(a) = t {
                out[*a] += v[dof];
            }
        }
        out
    }

    /// Full field from reduced values; fixed dofs take their prescribed values.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        self.expand_with(x, 1.0)
    }

    /// Full field with fixed values scaled by `fixed_scale` (0 gives the homogeneous lift).
    pub fn expand_with(&self, x: &[f64], fixed_scale: f64) -> Vec<f64> {
        self.map
            .iter()
            .map(|t| match t {
                DofTarget::Free(a) => x[*a],
                DofTarget::Fixed(v) => v * fixed_scale,
                DofTarget::Inactive => 0.0,
            })
            .collect()
    }

    /// Full vector holding only the prescribed values.
    pub fn fixed_values(&self) -> Vec<f64> {
        self.map
            .iter()
            .map(|t| if let DofTarget::Fixed(v) = t { *v } else { 0.0 })
            .collect()
    }

    /// Reduced values of a full field (takes the first occurrence of each free dof).
    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![f64::NAN; self.num_free()];
        for (dof, t) in self.map.iter().enumerate() {
            if let DofTarget::Free(a) = t {
                if out[*a].is_nan() {
                    out[*a] = full[dof];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_periodic_inheritance() {
        // 4 nodes, 1 component: 0-1 periodic pair, 2 fixed, 3 in a group with 1.
        let m = DofMapBuilder::new(4, 1)
            .periodic(&[(0, 1)])
            .dirichlet(2, 0, 3.0)
            .face_group(&[1, 3])
            .build()
            .unwrap();
        assert_eq!(m.target(2), DofTarget::Fixed(3.0));
        assert_eq!(m.target(1), m.target(3));
        assert_ne!(m.target(0), m.target(1));
        assert_eq!(m.num_free(), 2);
        let full = m.expand(&[1.0, 2.0]);
        assert_eq!(full, vec![1.0, 2.0, 3.0, 2.0]);
    }

    #[test]
    fn periodic_slave_follows_master() {
        let m = DofMapBuilder::new(3, 2).periodic(&[(0, 2)]).build().unwrap();
        assert_eq!(m.num_free(), 4);
        assert_eq!(m.target(4), m.target(0));
        assert_eq!(m.target(5), m.target(1));
        assert_eq!(m.restrict(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]), vec![2.0, 0.0, 0.0, 0.0]);
    }
}
