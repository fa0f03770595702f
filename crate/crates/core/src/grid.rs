//! Tensor-product voxel grids (segments, quads, hexes) with arbitrary axis
//! coordinates.
//!
//! Local node `a` of an element sits at the low (bit k = 0) or high (bit k = 1)
//! end of axis `k`.

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    coords: Vec<Vec<f64>>,
}

pub type Idx = [usize; 3];

impl Grid {
    pub fn new(coords: Vec<Vec<f64>>) -> Self {
        let dim = coords.len();
        assert!((1..=3).contains(&dim));
        for c in &coords {
            assert!(c.len() >= 2, "each axis needs at least one element");
            assert!(c.windows(2).all(|w| w[1] > w[0]), "axis coordinates must increase");
        }
        Grid { dim, coords }
    }

    pub fn uniform(dim: usize, lo: &[f64], hi: &[f64], n: &[usize]) -> Self {
        let coords = (0..dim)
            .map(|k| (0..=n[k]).map(|i| lo[k] + (hi[k] - lo[k]) * i as f64 / n[k] as f64).collect())
            .collect();
        Grid::new(coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn axis(&self, k: usize) -> &[f64] {
        &self.coords[k]
    }

    pub fn n_el(&self, k: usize) -> usize {
        self.coords[k].len() - 1
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.iter().map(|c| c.len()).product()
    }

    pub fn num_elements(&self) -> usize {
        (0..self.dim).map(|k| self.n_el(k)).product()
    }

    pub fn nodes_per_element(&self) -> usize {
        1 << self.dim
    }

    pub fn node_index(&self, m: Idx) -> usize {
        let mut idx = 0;
        for k in (0..self.dim).rev() {
            idx = idx * self.coords[k].len() + m[k];
        }
        idx
    }

    pub fn node_multi(&self, mut n: usize) -> Idx {
        let mut m = [0; 3];
        for k in 0..self.dim {
            let len = self.coords[k].len();
            m[k] = n % len;
            n /= len;
        }
        m
    }

    pub fn element_index(&self, m: Idx) -> usize {
        let mut idx = 0;
        for k in (0..self.dim).rev() {
            idx = idx * self.n_el(k) + m[k];
        }
        idx
    }

    pub fn element_multi(&self, mut e: usize) -> Idx {
        let mut m = [0; 3];
        for k in 0..self.dim {
            let len = self.n_el(k);
            m[k] = e % len;
            e /= len;
        }
        m
    }

    pub fn node_coord(&self, n: usize) -> [f64; 3] {
        let m = self.node_multi(n);
        let mut x = [0.0; 3];
        for k in 0..self.dim {
            x[k] = self.coords[k][m[k]];
        }
        x
    }

    /// Node indices of element `e` in local order (first `2^d` entries valid).
    pub fn element_nodes(&self, e: usize) -> [usize; 8] {
        let m = self.element_multi(e);
        let mut out = [0; 8];
        for (a, slot) in out.iter_mut().enumerate().take(self.nodes_per_element()) {
            let mut nm = m;
            for k in 0..self.dim {
                nm[k] += (a >> k) & 1;
            }
            *slot = self.node_index(nm);
        }
        out
    }

    pub fn element_origin(&self, e: usize) -> [f64; 3] {
        let m = self.element_multi(e);
        let mut x = [0.0; 3];
        for k in 0..self.dim {
            x[k] = self.coords[k][m[k]];
        }
        x
    }

    pub fn element_size(&self, e: usize) -> [f64; 3] {
        let m = self.element_multi(e);
        let mut h = [1.0; 3];
        for k in 0..self.dim {
            h[k] = self.coords[k][m[k] + 1] - self.coords[k][m[k]];
        }
        h
    }

    pub fn element_center(&self, e: usize) -> [f64; 3] {
        let o = self.element_origin(e);
        let h = self.element_size(e);
        let mut c = [0.0; 3];
        for k in 0..self.dim {
            c[k] = o[k] + 0.5 * h[k];
        }
        c
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        let h = self.element_size(e);
        h[..self.dim].iter().product()
    }

    /// Neighbor across the face normal to `axis` on `side` (0 low, 1 high).
    pub fn element_neighbor(&self, e: usize, axis: usize, side: usize) -> Option<usize> {
        let mut m = self.element_multi(e);
        if side == 0 {
            if m[axis] == 0 {
                return None;
            }
            m[axis] -= 1;
        } else {
            if m[axis] + 1 == self.n_el(axis) {
                return None;
            }
            m[axis] += 1;
        }
        Some(self.element_index(m))
    }

    /// Local node numbers lying on the face `(axis, side)` of an element.
    pub fn face_local_nodes(&self, axis: usize, side: usize) -> Vec<usize> {
        (0..self.nodes_per_element()).filter(|a| (a >> axis) & 1 == side).collect()
    }

    /// Locates the element containing `x` and its local coordinates in [0,1]^d.
    pub fn locate(&self, x: &[f64]) -> Option<(usize, [f64; 3])> {
        let mut m = [0; 3];
        let mut xi = [0.0; 3];
        for k in 0..self.dim {
            let c = &self.coords[k];
            let (lo, hi) = (c[0], c[c.len() - 1]);
            let tol = 1e-12 * (hi - lo);
            if x[k] < lo - tol || x[k] > hi + tol {
                return None;
            }
            let p = c.partition_point(|&v| v <= x[k]);
            let i = p.saturating_sub(1).min(c.len() - 2);
            m[k] = i;
            xi[k] = ((x[k] - c[i]) / (c[i + 1] - c[i])).clamp(0.0, 1.0);
        }
        Some((self.element_index(m), xi))
    }
}

/// Values of the multilinear shape functions at local coordinates `xi ∈ [0,1]^d`.
pub fn shape_values(dim: usize, xi: &[f64; 3]) -> [f64; 8] {
    let mut n = [0.0; 8];
    for (a, v) in n.iter_mut().enumerate().take(1 << dim) {
        let mut p = 1.0;
        for k in 0..dim {
            p *= if (a >> k) & 1 == 1 { xi[k] } else { 1.0 - xi[k] };
        }
        *v = p;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let g = Grid::uniform(3, &[0.0; 3], &[1.0, 2.0, 3.0], &[2, 3, 4]);
        for n in 0..g.num_nodes() {
            assert_eq!(g.node_index(g.node_multi(n)), n);
        }
        for e in 0..g.num_elements() {
            assert_eq!(g.element_index(g.element_multi(e)), e);
        }
        assert_eq!(g.num_elements(), 24);
        assert_eq!(g.num_nodes(), 60);
    }

    #[test]
    fn locate_and_shape() {
        let g = Grid::uniform(2, &[0.0, 0.0], &[1.0, 1.0], &[4, 4]);
        let (e, xi) = g.locate(&[0.3, 0.9]).unwrap();
        assert_eq!(g.element_multi(e), [1, 3, 0]);
        assert!((xi[0] - 0.2).abs() < 1e-12 && (xi[1] - 0.6).abs() < 1e-12);
        let n = shape_values(2, &xi);
        assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(g.locate(&[1.5, 0.0]).is_none());
    }
}
