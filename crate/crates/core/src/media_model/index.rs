//! Binary segment-index codec.
//!
//! One index file accompanies each segment and covers all of its
//! representations. Layout (little-endian):
//!
//! ```text
//! "HVRI" | version u16 | representationCount u16 | gofCount u32
//! per GOF:
//!   startTime u32 | duration u32 | frameCount u32 | tileCount u32
//!   tileCount  x { mortonCode u32 | normalCode u32 }
//!   repCount   x { gofByteOffsetInSegment u32 | gofHeaderByteCount u32
//!                  | tileCount x byteCount u32 }
//! ```

use byteorder::{ByteOrder, LittleEndian};

use crate::error::{Error, Result};

pub const INDEX_MAGIC: [u8; 4] = *b"HVRI";
pub const INDEX_VERSION: u16 = 1;

/// One occupied tile of a GOF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileIndexEntry {
    pub morton_code: u32,
    /// Dominant normal direction: 0..5 = +x, -x, +y, -y, +z, -z.
    pub normal_code: u32,
    /// Payload bytes for this tile, one entry per representation.
    pub byte_count: Vec<u32>,
}

/// Per-representation placement of a GOF inside its segment file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GofRepInfo {
    pub gof_byte_offset_in_segment: u32,
    pub gof_header_byte_count: u32,
}

/// One group of frames: timing plus its occupied-tile table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GofIndexEntry {
    /// Media ticks.
    pub start_time: u32,
    /// Media ticks.
    pub duration: u32,
    pub frame_count: u32,
    /// Sorted ascending by `morton_code`.
    pub tiles: Vec<TileIndexEntry>,
    pub per_representation: Vec<GofRepInfo>,
}

impl GofIndexEntry {
    pub fn tile_count(&self) -> usize {
        self.tiles.len()
    }

    /// Position of a tile in this GOF's (Morton-sorted) tile table.
    pub fn tile_position(&self, morton_code: u32) -> Option<usize> {
        self.tiles
            .binary_search_by_key(&morton_code, |t| t.morton_code)
            .ok()
    }

    /// Byte offset of a tile's payload inside the segment file for
    /// representation `rep`: GOF offset + header + preceding tiles.
    pub fn tile_byte_offset(&self, tile_idx: usize, rep: usize) -> u64 {
        let info = &self.per_representation[rep];
        let mut off = info.gof_byte_offset_in_segment as u64 + info.gof_header_byte_count as u64;
        for t in &self.tiles[..tile_idx] {
            off += t.byte_count[rep] as u64;
        }
        off
    }
}

/// Index into one segment and all of its representations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentIndex {
    pub representation_count: u16,
    pub gofs: Vec<GofIndexEntry>,
}

impl SegmentIndex {
    pub fn gof_count(&self) -> usize {
        self.gofs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.representation_count as usize;
        for (gi, gof) in self.gofs.iter().enumerate() {
            if gof.per_representation.len() != m {
                return Err(Error::Validation(format!(
                    "GOF {gi}: {} representation entries, expected {m}",
                    gof.per_representation.len()
                )));
            }
            let mut prev: Option<u32> = None;
            for tile in &gof.tiles {
                if tile.byte_count.len() != m {
                    return Err(Error::Validation(format!(
                        "GOF {gi} tile {}: {} byte counts, expected {m}",
                        tile.morton_code,
                        tile.byte_count.len()
                    )));
                }
                if let Some(p) = prev {
                    if tile.morton_code <= p {
                        return Err(Error::Validation(format!(
                            "GOF {gi}: tiles not in strictly increasing Morton order \
                             ({} after {p})",
                            tile.morton_code
                        )));
                    }
                }
                prev = Some(tile.morton_code);
            }
            if gi > 0 {
                let p = &self.gofs[gi - 1];
                if p.start_time + p.duration != gof.start_time {
                    return Err(Error::Validation(format!(
                        "GOF {gi} not contiguous with its predecessor"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Total payload bytes of representation `rep` across all GOFs.
    pub fn representation_bytes(&self, rep: usize) -> u64 {
        self.gofs
            .iter()
            .flat_map(|g| g.tiles.iter().map(move |t| {
                t.byte_count[rep] as u64
            }))
            .sum::<u64>()
            + self
                .gofs
                .iter()
                .map(|g| g.per_representation[rep].gof_header_byte_count as u64)
                .sum::<u64>()
    }
}

/// Exact encoded size: 12 + per GOF (16 + 8*T + M*(8 + 4*T)).
pub fn serialized_size(index: &SegmentIndex) -> usize {
    let m = index.representation_count as usize;
    12 + index
        .gofs
        .iter()
        .map(|g| {
            let t = g.tile_count();
            16 + 8 * t + m * (8 + 4 * t)
        })
        .sum::<usize>()
}

pub fn serialize_index(index: &SegmentIndex) -> Result<Vec<u8>> {
    index.validate()?;
    let mut out = Vec::with_capacity(serialized_size(index));
    out.extend_from_slice(&INDEX_MAGIC);
    put_u16(&mut out, INDEX_VERSION);
    put_u16(&mut out, index.representation_count);
    put_u32(&mut out, index.gofs.len() as u32);
    for gof in &index.gofs {
        put_u32(&mut out, gof.start_time);
        put_u32(&mut out, gof.duration);
        put_u32(&mut out, gof.frame_count);
        put_u32(&mut out, gof.tiles.len() as u32);
        for tile in &gof.tiles {
            put_u32(&mut out, tile.morton_code);
            put_u32(&mut out, tile.normal_code);
        }
        for (r, info) in gof.per_representation.iter().enumerate() {
            put_u32(&mut out, info.gof_byte_offset_in_segment);
            put_u32(&mut out, info.gof_header_byte_count);
            for tile in &gof.tiles {
                put_u32(&mut out, tile.byte_count[r]);
            }
        }
    }
    debug_assert_eq!(out.len(), serialized_size(index));
    Ok(out)
}

pub fn parse_index(bytes: &[u8]) -> Result<SegmentIndex> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != INDEX_MAGIC {
        return Err(Error::IndexFormat {
            offset: 0,
            reason: "bad magic, expected \"HVRI\"".into(),
        });
    }
    let version = r.u16("version")?;
    if version != INDEX_VERSION {
        return Err(Error::IndexFormat {
            offset: 4,
            reason: format!("unsupported version {version}"),
        });
    }
    let rep_count = r.u16("representationCount")?;
    let gof_count = r.u32("gofCount")?;
    let mut gofs = Vec::with_capacity(gof_count.min(1 << 20) as usize);
    for _ in 0..gof_count {
        let start_time = r.u32("startTime")?;
        let duration = r.u32("duration")?;
        let frame_count = r.u32("frameCount")?;
        let tile_count = r.u32("tileCount")? as usize;
        let mut tiles = Vec::with_capacity(tile_count.min(1 << 20));
        for _ in 0..tile_count {
            let morton_code = r.u32("mortonCode")?;
            let normal_code = r.u32("normalCode")?;
            tiles.push(TileIndexEntry {
                morton_code,
                normal_code,
                byte_count: vec![0; rep_count as usize],
            });
        }
        let mut per_representation = Vec::with_capacity(rep_count as usize);
        for rep in 0..rep_count as usize {
            let gof_byte_offset_in_segment = r.u32("gofByteOffsetInSegment")?;
            let gof_header_byte_count = r.u32("gofHeaderByteCount")?;
            per_representation.push(GofRepInfo {
                gof_byte_offset_in_segment,
                gof_header_byte_count,
            });
            for tile in tiles.iter_mut() {
                tile.byte_count[rep] = r.u32("byteCount")?;
            }
        }
        gofs.push(GofIndexEntry {
            start_time,
            duration,
            frame_count,
            tiles,
            per_representation,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::IndexFormat {
            offset: r.pos,
            reason: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }
    let index = SegmentIndex {
        representation_count: rep_count,
        gofs,
    };
    index.validate()?;
    Ok(index)
}

fn put_u16(out: &mut Vec<u8>, v: u16) {
    let mut buf = [0u8; 2];
    LittleEndian::write_u16(&mut buf, v);
    out.extend_from_slice(&buf);
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    let mut buf = [0u8; 4];
    LittleEndian::write_u32(&mut buf, v);
    out.extend_from_slice(&buf);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::IndexFormat {
                offset: self.pos,
                reason: format!("truncated while reading {field}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, field: &str) -> Result<u16> {
        Ok(LittleEndian::read_u16(self.take(2, field)?))
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(LittleEndian::read_u32(self.take(4, field)?))
    }
}
