//! Voxel mesh of the perforated reference cell `Y0 = Y \ Y1`,
//! `Y = (-1/2, 1/2) x (0, 1)^(d-1)`, with face tags and lateral periodic pairing.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Hole {
    None,
    Ellipsoid { center: Vec<f64>, half_axes: Vec<f64> },
    Box { center: Vec<f64>, half_widths: Vec<f64> },
}

impl Hole {
    /// Strict membership test used on voxel centers.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Hole::None => false,
            Hole::Ellipsoid { center, half_axes } => {
                let r: f64 = center
                    .iter()
                    .zip(half_axes)
                    .zip(x)
                    .map(|((c, a), xi)| ((xi - c) / a).powi(2))
                    .sum();
                r < 1.0
            }
            Hole::Box { center, half_widths } => center
                .iter()
                .zip(half_widths)
                .zip(x)
                .all(|((c, w), xi)| (xi - c).abs() < *w),
        }
    }

    fn extent(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Hole::None => None,
            Hole::Ellipsoid { center, half_axes } => Some((center, half_axes)),
            Hole::Box { center, half_widths } => Some((center, half_widths)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellMeshSpec {
    pub dimension: usize,
    pub resolution: usize,
    #[serde(default = "no_hole")]
    pub hole: Hole,
}

fn no_hole() -> Hole {
    Hole::None
}

impl CellMeshSpec {
    pub fn new(dimension: usize, resolution: usize, hole: Hole) -> Self {
        CellMeshSpec { dimension, resolution, hole }
    }

    /// Short content hash used in provenance headers.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension;
        if !(2..=3).contains(&d) {
            return Err(Error::InvalidParameter(format!("cell dimension must be 2 or 3, got {d}")));
        }
        if self.resolution < 2 {
            return Err(Error::InvalidParameter(format!("resolution must be at least 2, got {}", self.resolution)));
        }
        let Some((center, half)) = self.hole.extent() else { return Ok(()) };
        if center.len() != d || half.len() != d {
            return Err(Error::Geometry(format!("hole center/half sizes must have {d} entries")));
        }
        if half.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::Geometry("hole half sizes must be positive".into()));
        }
        let h = 1.0 / self.resolution as f64;
        for k in 0..d {
            let (lo, hi) = if k == 0 { (-0.5, 0.5) } else { (0.0, 1.0) };
            let (a, b) = (center[k] - half[k], center[k] + half[k]);
            if a <= lo || b >= hi {
                return Err(Error::Geometry(format!(
                    "hole closure touches or crosses the cell boundary along axis {k} ([{a}, {b}] vs ({lo}, {hi}))"
                )));
            }
            let tol = 1e-12;
            if a < lo + h - tol || b > hi - h + tol {
                return Err(Error::Geometry(format!(
                    "resolution {} too coarse to separate the hole from the cell faces along axis {k}",
                    self.resolution
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceTag {
    SPlus,
    SMinus,
    Lateral,
    HoleBoundary,
}

impl FaceTag {
    pub fn name(&self) -> &'static str {
        match self {
            FaceTag::SPlus => "s_plus",
            FaceTag::SMinus => "s_minus",
            FaceTag::Lateral => "lateral",
            FaceTag::HoleBoundary => "hole_boundary",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryFace {
    pub element: usize,
    pub axis: usize,
    pub side: usize,
    pub tag: FaceTag,
}

#[derive(Clone, Debug)]
pub struct PeriodicCellMesh {
    spec: CellMeshSpec,
    grid: Grid,
    solid: Vec<bool>,
    active: Vec<bool>,
    faces: Vec<BoundaryFace>,
    periodic: Vec<(usize, usize)>,
}

impl PeriodicCellMesh {
    pub fn build(spec: &CellMeshSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.dimension;
        let r = spec.resolution;
        let mut lo = vec![0.0; d];
        let mut hi = vec![1.0; d];
        lo[0] = -0.5;
        hi[0] = 0.5;
        let grid = Grid::uniform(d, &lo, &hi, &vec![r; d]);
        let solid: Vec<bool> = (0..grid.num_elements())
            .map(|e| !spec.hole.contains(&grid.element_center(e)[..d]))
            .collect();
        let mut active = vec![false; grid.num_nodes()];
        for e in (0..grid.num_elements()).filter(|&e| solid[e]) {
            for &n in &grid.element_nodes(e)[..grid.nodes_per_element()] {
                active[n] = true;
            }
        }
        let mut faces = Vec::new();
        for e in (0..grid.num_elements()).filter(|&e| solid[e]) {
            for axis in 0..d {
                for side in 0..2 {
                    let tag = match grid.element_neighbor(e, axis, side) {
                        None if axis == 0 => {
                            if side == 1 {
                                FaceTag::SPlus
                            } else {
                                FaceTag::SMinus
                            }
                        }
                        None => FaceTag::Lateral,
                        Some(nb) if !solid[nb] => FaceTag::HoleBoundary,
                        Some(_) => continue,
                    };
                    faces.push(BoundaryFace { element: e, axis, side, tag });
                }
            }
        }
        let mut periodic = Vec::new();
        for n in 0..grid.num_nodes() {
            let m = grid.node_multi(n);
            if (1..d).any(|k| m[k] == r) {
                let mut mm = m;
                for k in 1..d {
                    if mm[k] == r {
                        mm[k] = 0;
                    }
                }
                let master = grid.node_index(mm);
                if !active[n] || !active[master] {
                    return Err(Error::Geometry(format!("unmatched lateral node {n}")));
                }
                periodic.push((master, n));
            }
        }
        Ok(PeriodicCellMesh { spec: spec.clone(), grid, solid, active, faces, periodic })
    }

    pub fn spec(&self) -> &CellMeshSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.spec.dimension
    }

    pub fn resolution(&self) -> usize {
        self.spec.resolution
    }

    pub fn h(&self) -> f64 {
        1.0 / self.spec.resolution as f64
    }

    pub fn solid(&self) -> &[bool] {
        &self.solid
    }

    pub fn active_nodes(&self) -> &[bool] {
        &self.active
    }

    pub fn num_elements(&self) -> usize {
        self.grid.num_elements()
    }

    pub fn num_active_nodes(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn num_removed(&self) -> usize {
        self.solid.iter().filter(|&&s| !s).count()
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.faces
    }

    /// (master, slave) pairs; corner slaves point at the fully reduced master.
    pub fn periodic_pairs(&self) -> &[(usize, usize)] {
        &self.periodic
    }

    pub fn face_nodes(&self, f: &BoundaryFace) -> Vec<usize> {
        let nodes = self.grid.element_nodes(f.element);
        self.grid.face_local_nodes(f.axis, f.side).into_iter().map(|a| nodes[a]).collect()
    }

    /// Sorted, deduplicated nodes on faces carrying `tag`.
    pub fn nodes_with_tag(&self, tag: FaceTag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .faces
            .iter()
            .filter(|f| f.tag == tag)
            .flat_map(|f| self.face_nodes(f))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// |Y0| as the sum of solid voxel volumes.
    pub fn measure(&self) -> f64 {
        let vol = self.h().powi(self.dim() as i32);
        self.solid.iter().filter(|&&s| s).count() as f64 * vol
    }

    /// Every face of a solid element is shared with another solid element or is tagged.
    pub fn is_watertight(&self) -> bool {
        let g = &self.grid;
        let d = self.dim();
        let mut tagged = std::collections::HashSet::new();
        for f in &self.faces {
            tagged.insert((f.element, f.axis, f.side));
        }
        for e in (0..g.num_elements()).filter(|&e| self.solid[e]) {
            for axis in 0..d {
                for side in 0..2 {
                    let ok = match g.element_neighbor(e, axis, side) {
                        Some(nb) if self.solid[nb] => !tagged.contains(&(e, axis, side)),
                        _ => tagged.contains(&(e, axis, side)),
                    };
                    if !ok {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Plain-text node/element listing.
    pub fn export_text(&self) -> String {
        let g = &self.grid;
        let d = self.dim();
        let mut out = String::new();
        let _ = writeln!(out, "# thinlayer cell mesh dimension={d} resolution={} spec={}", self.resolution(), self.spec.hash());
        let _ = writeln!(out, "nodes {}", self.num_active_nodes());
        for n in (0..g.num_nodes()).filter(|&n| self.active[n]) {
            let x = g.node_coord(n);
            let coords: Vec<String> = x[..d].iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{n} {}", coords.join(" "));
        }
        let _ = writeln!(out, "elements {}", g.num_elements());
        let mut tags: Vec<Vec<&str>> = vec![Vec::new(); g.num_elements()];
        for f in &self.faces {
            if !tags[f.element].contains(&f.tag.name()) {
                tags[f.element].push(f.tag.name());
            }
        }
        for e in 0..g.num_elements() {
            let nodes: Vec<String> = g.element_nodes(e)[..g.nodes_per_element()].iter().map(|n| n.to_string()).collect();
            let t = if tags[e].is_empty() { "-".to_string() } else { tags[e].join(",") };
            let _ = writeln!(out, "{e} {} {} {t}", nodes.join(" "), u8::from(self.solid[e]));
        }
        let _ = writeln!(out, "periodic {}", self.periodic.len());
        for (m, s) in &self.periodic {
            let _ = writeln!(out, "{m} {s}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_2d_no_hole() {
        let m = PeriodicCellMesh::build(&CellMeshSpec::new(2, 4, Hole::None)).unwrap();
        assert_eq!(m.num_elements(), 16);
        assert_eq!(m.num_active_nodes(), 25);
        assert_eq!(m.periodic_pairs().len(), 5);
        assert_eq!(m.measure(), 1.0);
        assert!(m.is_watertight());
    }

    #[test]
    fn aligned_box_measure() {
        let hole = Hole::Box { center: vec![0.0, 0.5], half_widths: vec![0.125, 0.125] };
        let m = PeriodicCellMesh::build(&CellMeshSpec::new(2, 8, hole)).unwrap();
        assert_eq!(m.num_removed(), 4);
        assert_eq!(m.measure(), 1.0 - 0.0625);
        assert!(!m.nodes_with_tag(FaceTag::HoleBoundary).is_empty());
        assert!(m.is_watertight());
    }

    #[test]
    fn hole_touching_face_rejected() {
        let hole = Hole::Box { center: vec![0.3, 0.5, 0.5], half_widths: vec![0.2, 0.1, 0.1] };
        assert!(matches!(PeriodicCellMesh::build(&CellMeshSpec::new(3, 4, hole)), Err(Error::Geometry(_))));
        let hole = Hole::Ellipsoid { center: vec![0.0, 0.5], half_axes: vec![0.45, 0.2] };
        let err = PeriodicCellMesh::build(&CellMeshSpec::new(2, 4, hole)).unwrap_err();
        assert!(err.to_string().contains("too coarse"));
    }

    #[test]
    fn corner_chain_3d() {
        let m = PeriodicCellMesh::build(&CellMeshSpec::new(3, 2, Hole::None)).unwrap();
        let g = m.grid();
        for &(master, slave) in m.periodic_pairs() {
            let xm = g.node_coord(master);
            let xs = g.node_coord(slave);
            assert_eq!(xm[0], xs[0]);
            assert!(xm[1] < 1.0 && xm[2] < 1.0);
            for k in 1..3 {
                assert!(xs[k] == xm[k] || (xs[k] == 1.0 && xm[k] == 0.0));
            }
        }
        assert_eq!(m.periodic_pairs().len(), 3 * (9 - 4));
    }

    #[test]
    fn export_lists_everything() {
        let m = PeriodicCellMesh::build(&CellMeshSpec::new(2, 2, Hole::None)).unwrap();
        let txt = m.export_text();
        assert!(txt.contains("nodes 9"));
        assert!(txt.contains("elements 4"));
        assert!(txt.contains("periodic 3"));
    }
}
