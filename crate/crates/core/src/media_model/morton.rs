//! Morton (Z-order) coding of 3D tile coordinates.
//!
//! Lane convention: bit b of x lands on code bit 3b, y on 3b+1, z on 3b+2,
//! so x is the fastest-varying axis along the curve.

use crate::error::{Error, Result};

/// Maximum supported tile tree depth (coordinates up to 10 bits each).
pub const MAX_TILE_DEPTH: u32 = 10;

/// Spread the low 10 bits of `v` so bit b lands on bit 3b.
fn spread_bits(v: u32) -> u32 {
    let mut x = v & 0x3ff;
    x = (x | (x << 16)) & 0x030000ff;
    x = (x | (x << 8)) & 0x0300f00f;
    x = (x | (x << 4)) & 0x030c30c3;
    x = (x | (x << 2)) & 0x09249249;
    x
}

/// Inverse of [`spread_bits`].
fn compact_bits(v: u32) -> u32 {
    let mut x = v & 0x09249249;
    x = (x | (x >> 2)) & 0x030c30c3;
    x = (x | (x >> 4)) & 0x0300f00f;
    x = (x | (x >> 8)) & 0x030000ff;
    x = (x | (x >> 16)) & 0x000003ff;
    x
}

/// Interleave (x, y, z) tile coordinates into a Morton code.
///
/// Coordinates must be below `2^tile_depth` with `tile_depth <= 10`.
pub fn morton_encode(x: u32, y: u32, z: u32, tile_depth: u32) -> Result<u32> {
    if tile_depth > MAX_TILE_DEPTH {
        return Err(Error::OutOfRange {
            what: "tileDepth",
            value: tile_depth as u64,
            max: MAX_TILE_DEPTH as u64,
        });
    }
    let limit = 1u32 << tile_depth;
    for (what, v) in [("x", x), ("y", y), ("z", z)] {
        if v >= limit {
            return Err(Error::OutOfRange {
                what: match what {
                    "x" => "tile x",
                    "y" => "tile y",
                    _ => "tile z",
                },
                value: v as u64,
                max: (limit - 1) as u64,
            });
        }
    }
    Ok(spread_bits(x) | (spread_bits(y) << 1) | (spread_bits(z) << 2))
}

/// Recover (x, y, z) from a Morton code.
pub fn morton_decode(code: u32, tile_depth: u32) -> Result<(u32, u32, u32)> {
    let cells = 1u64 << (3 * tile_depth.min(MAX_TILE_DEPTH));
    if tile_depth > MAX_TILE_DEPTH || (code as u64) >= cells {
        return Err(Error::OutOfRange {
            what: "mortonCode",
            value: code as u64,
            max: cells - 1,
        });
    }
    Ok((compact_bits(code), compact_bits(code >> 1), compact_bits(code >> 2)))
}
