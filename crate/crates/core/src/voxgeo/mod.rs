//! Binary voxel geometries on a periodic cube.
//!
//! Voxels are stored with `x` varying fastest, then `y`, then `z`. Every
//! neighbour lookup wraps modulo the extent, so the grid is a discrete torus.

mod io;
mod packing;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{parse_grid, read_grid, render_grid, write_grid};
pub use packing::{generate_packing, PackingParams};

/// Binary fluid/solid image of a cube with `n` voxels per axis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoxelGrid {
    dim: usize,
    n: usize,
    fluid: Vec<bool>,
}

impl VoxelGrid {
    /// Builds a grid from a flat fluid mask (`true` = fluid).
    pub fn new(dim: usize, n: usize, fluid: Vec<bool>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParams(format!("dim must be 2 or 3, got {dim}")));
        }
        if n < 2 {
            return Err(Error::InvalidParams(format!("extent must be >= 2, got {n}")));
        }
        let expected = n.pow(dim as u32);
        if fluid.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: fluid.len(),
            });
        }
        Ok(Self { dim, n, fluid })
    }

    pub fn filled(dim: usize, n: usize, fluid: bool) -> Result<Self> {
        Self::new(dim, n, vec![fluid; n.pow(dim as u32)])
    }

    /// Builds a grid by evaluating `is_fluid` at every voxel coordinate.
    /// Unused trailing coordinates are zero in 2D.
    pub fn from_fn(dim: usize, n: usize, mut is_fluid: impl FnMut([usize; 3]) -> bool) -> Result<Self> {
        let len = n.pow(dim as u32);
        let mut fluid = Vec::with_capacity(len);
        for idx in 0..len {
            fluid.push(is_fluid(coords_of(dim, n, idx)));
        }
        Self::new(dim, n, fluid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.fluid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fluid.is_empty()
    }

    /// Side length of the sample. Always one: permeabilities are reported in
    /// units of the squared sample length.
    pub fn physical_length(&self) -> f64 {
        1.0
    }

    /// Mesh width `1/n`.
    pub fn h(&self) -> f64 {
        self.physical_length() / self.n as f64
    }

    pub fn mask(&self) -> &[bool] {
        &self.fluid
    }

    pub fn is_fluid(&self, idx: usize) -> bool {
        self.fluid[idx]
    }

    pub fn fluid_at(&self, c: [usize; 3]) -> bool {
        self.fluid[self.index(c)]
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        match self.dim {
            2 => c[0] + self.n * c[1],
            _ => c[0] + self.n * (c[1] + self.n * c[2]),
        }
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        coords_of(self.dim, self.n, idx)
    }

    /// Periodic neighbour of `idx` one step along `axis`, forward or backward.
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> usize {
        let mut c = self.coords(idx);
        c[axis] = if forward {
            (c[axis] + 1) % self.n
        } else {
            (c[axis] + self.n - 1) % self.n
        };
        self.index(c)
    }

    pub fn fluid_count(&self) -> usize {
        self.fluid.iter().filter(|&&f| f).count()
    }

    /// Periodic translation: the returned grid's voxel `c + offset` equals
    /// this grid's voxel `c`.
    pub fn translated(&self, offset: [usize; 3]) -> Self {
        let n = self.n;
        let mut out = vec![false; self.len()];
        for (idx, &f) in self.fluid.iter().enumerate() {
            let c = self.coords(idx);
            let mut t = [0; 3];
            for a in 0..self.dim {
                t[a] = (c[a] + offset[a]) % n;
            }
            out[self.index(t)] = f;
        }
        Self {
            dim: self.dim,
            n,
            fluid: out,
        }
    }
}

fn coords_of(dim: usize, n: usize, idx: usize) -> [usize; 3] {
    match dim {
        2 => [idx % n, idx / n, 0],
        _ => [idx % n, (idx / n) % n, idx / (n * n)],
    }
}

/// Counts and ratios describing a geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryStats {
    pub v_fluid: usize,
    /// Solid voxels sharing at least one face with a fluid voxel.
    pub v_surf: usize,
    pub porosity_pct: f64,
    pub stv_pct: f64,
    pub n_components: usize,
}

pub fn stats(grid: &VoxelGrid) -> Result<GeometryStats> {
    let v_fluid = grid.fluid_count();
    if v_fluid == 0 {
        return Err(Error::EmptyFluid);
    }
    let v_surf = surface_voxels(grid).len();
    let total = grid.len();
    Ok(GeometryStats {
        v_fluid,
        v_surf,
        porosity_pct: 100.0 * v_fluid as f64 / total as f64,
        stv_pct: 100.0 * v_surf as f64 / v_fluid as f64,
        n_components: connected_components(grid).count,
    })
}

/// Indices of solid voxels face-adjacent (periodically) to fluid, each listed once.
pub fn surface_voxels(grid: &VoxelGrid) -> Vec<usize> {
    (0..grid.len())
        .filter(|&idx| {
            !grid.is_fluid(idx)
                && (0..grid.dim()).any(|a| {
                    grid.is_fluid(grid.neighbor(idx, a, true)) || grid.is_fluid(grid.neighbor(idx, a, false))
                })
        })
        .collect()
}

/// Face-connected fluid components with periodic wrap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Components {
    /// Component label for every voxel; `None` for solid voxels.
    pub labels: Vec<Option<usize>>,
    /// Voxel count per label.
    pub sizes: Vec<usize>,
    pub count: usize,
}

/// Labels are assigned in order of each component's lowest voxel index.
pub fn connected_components(grid: &VoxelGrid) -> Components {
    let mut labels = vec![None; grid.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..grid.len() {
        if !grid.is_fluid(start) || labels[start].is_some() {
            continue;
        }
        let label = sizes.len();
        let mut size = 0;
        labels[start] = Some(label);
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            size += 1;
            for a in 0..grid.dim() {
                for fwd in [true, false] {
                    let w = grid.neighbor(v, a, fwd);
                    if grid.is_fluid(w) && labels[w].is_none() {
                        labels[w] = Some(label);
                        queue.push_back(w);
                    }
                }
            }
        }
        sizes.push(size);
    }
    let count = sizes.len();
    Components { labels, sizes, count }
}

/// Keeps only the largest fluid component (lowest label on ties) and
/// solidifies the rest. Returns the new grid and the number of voxels removed.
pub fn enforce_connectivity(grid: &VoxelGrid) -> (VoxelGrid, usize) {
    let comps = connected_components(grid);
    if comps.count <= 1 {
        return (grid.clone(), 0);
    }
    let mut keep = 0;
    for (label, &size) in comps.sizes.iter().enumerate() {
        if size > comps.sizes[keep] {
            keep = label;
        }
    }
    let fluid: Vec<bool> = comps.labels.iter().map(|l| *l == Some(keep)).collect();
    let removed = grid.fluid_count() - comps.sizes[keep];
    let out = VoxelGrid {
        dim: grid.dim,
        n: grid.n,
        fluid,
    };
    (out, removed)
}

/// Mirrors the grid across every axis, doubling the extent. The result is
/// periodic by construction: index `i` of the output reads input index
/// `i` for `i < n` and `2n - 1 - i` otherwise.
pub fn periodize(grid: &VoxelGrid) -> VoxelGrid {
    let n = grid.n;
    let mirror = |i: usize| if i < n { i } else { 2 * n - 1 - i };
    let m = 2 * n;
    let dim = grid.dim;
    let len = m.pow(dim as u32);
    let mut fluid = Vec::with_capacity(len);
    for idx in 0..len {
        let c = coords_of(dim, m, idx);
        let mut src = [0; 3];
        for a in 0..dim {
            src[a] = mirror(c[a]);
        }
        fluid.push(grid.fluid_at(src));
    }
    VoxelGrid { dim, n: m, fluid }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slab_grid() -> VoxelGrid {
        // Solid planes at x = 0 and x = 4 split an 8-wide torus into two
        // pockets: x in 1..4 (3 wide) and x in 5..8 (3 wide).
        VoxelGrid::from_fn(2, 8, |c| c[0] != 0 && c[0] != 4).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(VoxelGrid::filled(4, 3, true).is_err());
        assert!(VoxelGrid::filled(2, 1, true).is_err());
        assert!(matches!(
            VoxelGrid::new(2, 3, vec![true; 8]),
            Err(Error::LengthMismatch { expected: 9, got: 8 })
        ));
    }

    #[test]
    fn neighbors_wrap() {
        let g = VoxelGrid::filled(3, 4, true).unwrap();
        let idx = g.index([3, 0, 2]);
        assert_eq!(g.coords(g.neighbor(idx, 0, true)), [0, 0, 2]);
        assert_eq!(g.coords(g.neighbor(idx, 1, false)), [3, 3, 2]);
        assert_eq!(g.coords(g.neighbor(idx, 2, true)), [3, 0, 3]);
    }

    #[test]
    fn all_fluid_stats() {
        let g = VoxelGrid::filled(2, 6, true).unwrap();
        let s = stats(&g).unwrap();
        assert_eq!(s.v_surf, 0);
        assert_eq!(s.porosity_pct, 100.0);
        assert_eq!(s.n_components, 1);
    }

    #[test]
    fn empty_fluid_is_error() {
        let g = VoxelGrid::filled(2, 4, false).unwrap();
        assert_eq!(stats(&g), Err(Error::EmptyFluid));
    }

    #[test]
    fn surface_counts_membership_not_faces() {
        // A single solid voxel touches fluid on four faces but counts once.
        let g = VoxelGrid::from_fn(2, 5, |c| c != [2, 2, 0]).unwrap();
        assert_eq!(stats(&g).unwrap().v_surf, 1);
        // Surface detection wraps around the periodic boundary.
        let g = VoxelGrid::from_fn(2, 5, |c| c[0] == 0).unwrap();
        assert_eq!(stats(&g).unwrap().v_surf, 10);
    }

    #[test]
    fn two_pockets() {
        let g = slab_grid();
        let comps = connected_components(&g);
        assert_eq!(comps.count, 2);
        assert_eq!(comps.sizes, vec![24, 24]);
        assert_eq!(comps.labels[g.index([1, 0, 0])], Some(0));
        assert_eq!(comps.labels[g.index([7, 7, 0])], Some(1));
        assert_eq!(comps.labels[g.index([4, 3, 0])], None);
    }

    #[test]
    fn enforce_keeps_largest() {
        // Pocket sizes 100 and 3 on a 12x12 torus.
        let g = VoxelGrid::from_fn(2, 12, |c| {
            let big = c[0] < 10 && c[1] < 10;
            let small = (c[0] == 11 && c[1] >= 10) || (c[0] == 10 && c[1] == 11);
            big || small
        })
        .unwrap();
        assert_eq!(connected_components(&g).count, 2);
        let (kept, removed) = enforce_connectivity(&g);
        assert_eq!(removed, 3);
        assert_eq!(kept.fluid_count(), 100);
        assert_eq!(connected_components(&kept).count, 1);
    }

    #[test]
    fn enforce_tie_keeps_lowest_label() {
        let g = slab_grid();
        let (kept, removed) = enforce_connectivity(&g);
        assert_eq!(removed, 24);
        assert!(kept.fluid_at([1, 0, 0]));
        assert!(!kept.fluid_at([5, 0, 0]));
        assert_eq!(connected_components(&kept).count, 1);
    }

    #[test]
    fn enforce_on_connected_is_identity() {
        let g = VoxelGrid::from_fn(2, 6, |c| c != [2, 2, 0]).unwrap();
        let (kept, removed) = enforce_connectivity(&g);
        assert_eq!(removed, 0);
        assert_eq!(kept, g);
    }

    #[test]
    fn periodize_mirror_definition() {
        let g = VoxelGrid::from_fn(2, 3, |c| (c[0] + 2 * c[1]) % 3 != 0).unwrap();
        let p = periodize(&g);
        assert_eq!(p.n(), 6);
        let mirror = |i: usize| if i < 3 { i } else { 5 - i };
        for idx in 0..p.len() {
            let c = p.coords(idx);
            assert_eq!(p.is_fluid(idx), g.fluid_at([mirror(c[0]), mirror(c[1]), 0]));
        }
    }

    #[test]
    fn periodize_symmetric_input_tiles() {
        // Symmetric under i -> n-1-i on both axes.
        let g = VoxelGrid::from_fn(2, 4, |c| !(c[0] == 0 || c[0] == 3) || c[1] == 1 || c[1] == 2).unwrap();
        let p = periodize(&g);
        for idx in 0..p.len() {
            let c = p.coords(idx);
            assert_eq!(p.is_fluid(idx), g.fluid_at([c[0] % 4, c[1] % 4, 0]));
        }
    }

    #[test]
    fn periodize_3d_preserves_porosity() {
        let g = VoxelGrid::from_fn(3, 3, |c| (c[0] * 7 + c[1] * 3 + c[2]) % 4 != 0).unwrap();
        let p = periodize(&g);
        assert_eq!(p.len(), 216);
        assert_eq!(stats(&p).unwrap().porosity_pct, stats(&g).unwrap().porosity_pct);
    }
}
