//! Text voxel format.
//!
//! ```text
//! voxgeo 1
//! dim 2
//! size 4
//! 1111
//! 1001
//! 1001
//! 1111
//! ```
//!
//! One line per row of `n` symbols (`1` fluid, `0` solid), `x` along the
//! line, rows ordered by `y` then `z`. Lines end with LF.

use std::fs;
use std::path::Path;

use super::VoxelGrid;
use crate::error::{Error, Result};

const MAGIC: &str = "voxgeo 1";

pub fn render_grid(grid: &VoxelGrid) -> String {
    let n = grid.n();
    let rows = grid.len() / n;
    let mut out = String::with_capacity(32 + rows * (n + 1));
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("dim {}\nsize {}\n", grid.dim(), n));
    for row in grid.mask().chunks(n) {
        out.extend(row.iter().map(|&f| if f { '1' } else { '0' }));
        out.push('\n');
    }
    out
}

pub fn write_grid(grid: &VoxelGrid, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render_grid(grid))?;
    Ok(())
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    parse_grid(&fs::read_to_string(path)?)
}

fn header_value(line: Option<&str>, key: &str, lineno: usize) -> Result<usize> {
    let malformed = || Error::Parse {
        line: lineno,
        msg: format!("malformed header: expected `{key} <int>`"),
    };
    let line = line.ok_or_else(malformed)?;
    let rest = line.strip_prefix(key).and_then(|r| r.strip_prefix(' ')).ok_or_else(malformed)?;
    rest.parse().map_err(|_| malformed())
}

pub fn parse_grid(text: &str) -> Result<VoxelGrid> {
    let mut lines = text.split('\n');
    if lines.next() != Some(MAGIC) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("malformed header: expected `{MAGIC}`"),
        });
    }
    let dim = header_value(lines.next(), "dim", 2)?;
    if dim != 2 && dim != 3 {
        return Err(Error::Parse {
            line: 2,
            msg: format!("malformed header: dim must be 2 or 3, got {dim}"),
        });
    }
    let n = header_value(lines.next(), "size", 3)?;
    if n < 2 {
        return Err(Error::Parse {
            line: 3,
            msg: format!("malformed header: size must be >= 2, got {n}"),
        });
    }
    let rows = n.pow(dim as u32 - 1);
    let mut fluid = Vec::with_capacity(rows * n);
    let mut body: Vec<&str> = lines.collect();
    // A trailing LF leaves one empty piece behind.
    if body.last() == Some(&"") {
        body.pop();
    }
    for (k, line) in body.iter().enumerate() {
        let lineno = k + 4;
        for (col, ch) in line.chars().enumerate() {
            match ch {
                '1' => fluid.push(true),
                '0' => fluid.push(false),
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("non-binary voxel {other:?} at offset {col}"),
                    })
                }
            }
        }
        if line.len() != n {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("size mismatch: row has {} symbols, expected {n}", line.len()),
            });
        }
    }
    if body.len() != rows {
        return Err(Error::Parse {
            line: body.len() + 4,
            msg: format!("size mismatch: {} rows, expected {rows}", body.len()),
        });
    }
    VoxelGrid::new(dim, n, fluid)
}
