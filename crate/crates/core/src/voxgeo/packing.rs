//! Random packings of square (2D) or cubic (3D) obstacles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::VoxelGrid;
use crate::error::{Error, Result};

/// Parameters of an `N^dim` array of cells, each holding one shifted obstacle.
///
/// Shifts are drawn with [`ChaCha8Rng`] seeded by `seed`, one cell at a time
/// in voxel order (x fastest), one draw per axis in axis order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackingParams {
    pub dim: usize,
    /// Cells per axis.
    pub n_cells: usize,
    /// Cell side in voxels.
    pub cell: usize,
    /// Average channel thickness in voxels.
    pub n_avg: usize,
    /// Minimal channel thickness in voxels.
    pub n_min: usize,
    pub seed: u64,
}

impl PackingParams {
    pub fn new_2d(n_cells: usize, cell: usize, n_avg: usize, n_min: usize, seed: u64) -> Self {
        Self {
            dim: 2,
            n_cells,
            cell,
            n_avg,
            n_min,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if self.dim != 2 && self.dim != 3 {
            return fail(format!("dim must be 2 or 3, got {}", self.dim));
        }
        if self.n_cells == 0 {
            return fail("N must be at least 1".into());
        }
        if self.n_min == 0 {
            return fail("n_min must be at least 1".into());
        }
        if self.n_avg < self.n_min {
            return fail(format!("n_avg ({}) must be >= n_min ({})", self.n_avg, self.n_min));
        }
        if self.cell <= self.n_avg {
            return fail(format!("n_c ({}) must exceed n_avg ({})", self.cell, self.n_avg));
        }
        if self.n_avg % 2 != 0 {
            return fail(format!("n_avg ({}) must be even", self.n_avg));
        }
        if (self.n_avg - self.n_min) % 2 != 0 {
            return fail(format!(
                "n_avg - n_min ({}) must be even",
                self.n_avg - self.n_min
            ));
        }
        if self.extent() < 2 {
            return fail("total extent must be at least 2".into());
        }
        Ok(())
    }

    /// Total extent `N * n_c`.
    pub fn extent(&self) -> usize {
        self.n_cells * self.cell
    }

    pub fn obstacle_side(&self) -> usize {
        self.cell - self.n_avg
    }

    /// Largest absolute shift `(n_avg - n_min) / 2`.
    pub fn max_shift(&self) -> i64 {
        ((self.n_avg - self.n_min) / 2) as i64
    }
}

/// Obstacle placement inside one cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Obstacle {
    /// Cell coordinates.
    pub cell: [usize; 3],
    /// Shift from the centred position, per axis.
    pub shift: [i64; 3],
    /// Lowest solid voxel coordinate, global.
    pub lower: [usize; 3],
}

pub fn obstacles(params: &PackingParams) -> Result<Vec<Obstacle>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let r = params.max_shift();
    let dim = params.dim;
    let n_cells = params.n_cells;
    let total = n_cells.pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    for k in 0..total {
        let cell = [k % n_cells, (k / n_cells) % n_cells, k / (n_cells * n_cells)];
        let mut shift = [0i64; 3];
        let mut lower = [0usize; 3];
        for a in 0..dim {
            shift[a] = rng.gen_range(-r..=r);
            // Centred placement starts n_avg/2 voxels into the cell.
            let local = (params.n_avg / 2) as i64 + shift[a];
            lower[a] = cell[a] * params.cell + local as usize;
        }
        out.push(Obstacle { cell, shift, lower });
    }
    Ok(out)
}

/// Generates the packing. Obstacles never touch their cell border, so the
/// fluid is always a single connected component.
pub fn generate_packing(params: &PackingParams) -> Result<VoxelGrid> {
    let obs = obstacles(params)?;
    let n = params.extent();
    let side = params.obstacle_side();
    let mut grid = VoxelGrid::filled(params.dim, n, true)?;
    for o in &obs {
        let zr = if params.dim == 3 { side } else { 1 };
        for dz in 0..zr {
            for dy in 0..side {
                for dx in 0..side {
                    let c = [o.lower[0] + dx, o.lower[1] + dy, o.lower[2] + dz];
                    let idx = grid.index(c);
                    grid.fluid[idx] = false;
                }
            }
        }
    }
    Ok(grid)
}
