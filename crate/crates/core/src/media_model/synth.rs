//! Synthetic content: a sphere-shell occupancy model standing in for real
//! captured objects. Segment payloads are opaque byte runs sized by the
//! segment index; no codec is involved.

use super::{
    morton_decode, tile_bit_count, GofIndexEntry, GofRepInfo, ObjectManifest, SegmentIndex,
    TileIndexEntry,
};
use crate::error::Result;
use crate::geom::Vec3;

/// Hollow sphere in the cube's local meter space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereShell {
    /// Center in local meters; the cube spans [0, maxWidth*scale] per axis.
    pub center: Vec3,
    pub radius: f64,
    pub thickness: f64,
}

impl SphereShell {
    /// Shell centered in the cube with a radius that comfortably fits.
    pub fn default_for(manifest: &ObjectManifest) -> Self {
        let extent = manifest.max_width as f64 * manifest.cube_to_object_scale;
        SphereShell {
            center: Vec3::splat(extent / 2.0),
            radius: extent * 0.4,
            thickness: extent * 0.06,
        }
    }

    /// Does the shell intersect the axis-aligned box [lo, hi]?
    fn intersects_box(&self, lo: Vec3, hi: Vec3) -> bool {
        if self.radius <= 0.0 {
            return false;
        }
        let clamp_axis = |c: f64, l: f64, h: f64| (l - c).max(0.0).max(c - h);
        let far_axis = |c: f64, l: f64, h: f64| (c - l).abs().max((c - h).abs());
        let dmin = Vec3::new(
            clamp_axis(self.center.x, lo.x, hi.x),
            clamp_axis(self.center.y, lo.y, hi.y),
            clamp_axis(self.center.z, lo.z, hi.z),
        )
        .norm();
        let dmax = Vec3::new(
            far_axis(self.center.x, lo.x, hi.x),
            far_axis(self.center.y, lo.y, hi.y),
            far_axis(self.center.z, lo.z, hi.z),
        )
        .norm();
        let half = self.thickness / 2.0;
        dmin <= self.radius + half && dmax >= self.radius - half
    }
}

/// Quantize an outward direction to its dominant axis code (0..5).
fn normal_code_for(dir: Vec3) -> u32 {
    let (ax, ay, az) = (dir.x.abs(), dir.y.abs(), dir.z.abs());
    if ax >= ay && ax >= az {
        if dir.x >= 0.0 {
            0
        } else {
            1
        }
    } else if ay >= az {
        if dir.y >= 0.0 {
            2
        } else {
            3
        }
    } else if dir.z >= 0.0 {
        4
    } else {
        5
    }
}

/// Occupied tiles of the shell at the manifest's tile depth, in Morton
/// order, as (mortonCode, normalCode) pairs.
pub fn occupied_tiles(shape: &SphereShell, manifest: &ObjectManifest) -> Vec<(u32, u32)> {
    let depth = manifest.tile_depth();
    let cells = 1u64 << (3 * depth);
    let cell = manifest.tile_cell_size();
    let mut out = Vec::new();
    for code in 0..cells as u32 {
        let (x, y, z) = morton_decode(code, depth).expect("code in range");
        let lo = Vec3::new(x as f64, y as f64, z as f64) * cell;
        let hi = lo + Vec3::splat(cell);
        if shape.intersects_box(lo, hi) {
            let center = lo + Vec3::splat(cell / 2.0);
            out.push((code, normal_code_for(center - shape.center)));
        }
    }
    out
}

/// Per-GOF occupied tile sets with normal codes and per-representation
/// byte counts. The shell is static, so every GOF shares one tile set;
/// byte counts still vary with each GOF's frame count.
pub fn synth_object(
    shape: &SphereShell,
    manifest: &ObjectManifest,
    gof_count: usize,
) -> Vec<Vec<TileIndexEntry>> {
    let occupied = occupied_tiles(shape, manifest);
    let frames = gof_frame_counts(manifest, manifest.start_number);
    (0..gof_count)
        .map(|g| {
            let frame_count = frames.get(g % frames.len().max(1)).copied().unwrap_or(4);
            tile_entries(&occupied, manifest, frame_count)
        })
        .collect()
}

fn tile_entries(
    occupied: &[(u32, u32)],
    manifest: &ObjectManifest,
    frame_count: u32,
) -> Vec<TileIndexEntry> {
    let n = occupied.len();
    occupied
        .iter()
        .map(|&(morton_code, normal_code)| TileIndexEntry {
            morton_code,
            normal_code,
            byte_count: manifest
                .representations
                .iter()
                .map(|rep| {
                    let bits = tile_bit_count(rep, frame_count, n.max(1));
                    ((bits / 8.0).round() as u32).max(1)
                })
                .collect(),
        })
        .collect()
}

pub const GOF_FRAMES: u32 = 4;

/// Frame counts of the GOFs inside one segment; the last GOF may be short.
fn gof_frame_counts(manifest: &ObjectManifest, _segment: u32) -> Vec<u32> {
    let frames_total = (manifest.segment_duration * manifest.max_frame_rate).round() as u32;
    let mut out = Vec::new();
    let mut left = frames_total.max(1);
    while left > 0 {
        let n = left.min(GOF_FRAMES);
        out.push(n);
        left -= n;
    }
    out
}

/// Build the segment index for segment `number` of a synthetic object.
pub fn build_segment_index(
    shape: &SphereShell,
    manifest: &ObjectManifest,
    number: u32,
) -> Result<SegmentIndex> {
    let occupied = occupied_tiles(shape, manifest);
    let ticks_per_frame = manifest.timescale as f64 / manifest.max_frame_rate;
    let seg_rel = number - manifest.start_number;
    let seg_base_ticks =
        (seg_rel as f64 * manifest.segment_duration * manifest.timescale as f64).round() as u32;
    let m = manifest.representation_count();

    let mut gofs = Vec::new();
    let mut frame_cursor = 0u32;
    let mut offsets = vec![0u32; m];
    for frame_count in gof_frame_counts(manifest, number) {
        let tiles = tile_entries(&occupied, manifest, frame_count);
        let per_representation = (0..m)
            .map(|r| {
                let info = GofRepInfo {
                    gof_byte_offset_in_segment: offsets[r],
                    gof_header_byte_count: 0,
                };
                offsets[r] += tiles.iter().map(|t| t.byte_count[r]).sum::<u32>();
                info
            })
            .collect();
        gofs.push(GofIndexEntry {
            start_time: seg_base_ticks + (frame_cursor as f64 * ticks_per_frame).round() as u32,
            duration: (frame_count as f64 * ticks_per_frame).round() as u32,
            frame_count,
            tiles,
            per_representation,
        });
        frame_cursor += frame_count;
    }
    let index = SegmentIndex {
        representation_count: m as u16,
        gofs,
    };
    index.validate()?;
    Ok(index)
}

/// Size in bytes of the payload file for one representation of a segment.
pub fn payload_size(index: &SegmentIndex, rep: usize) -> u64 {
    index.representation_bytes(rep)
}

/// Opaque payload bytes consistent with the index's offsets and counts.
pub fn write_payload(index: &SegmentIndex, rep: usize) -> Vec<u8> {
    let size = payload_size(index, rep) as usize;
    (0..size).map(|i| (i % 251) as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::super::{morton_encode, synth_manifest};
    use super::*;

    #[test]
    fn depth_zero_has_exactly_one_tile_with_code_zero() {
        let m = synth_manifest("t", 0, 2.0);
        let shape = SphereShell::default_for(&m);
        let tiles = occupied_tiles(&shape, &m);
        assert_eq!(tiles.len(), 1);
        assert_eq!(tiles[0].0, 0);
    }

    #[test]
    fn degenerate_radius_yields_no_tiles() {
        let m = synth_manifest("t", 2, 2.0);
        let mut shape = SphereShell::default_for(&m);
        shape.radius = 0.0;
        assert!(occupied_tiles(&shape, &m).is_empty());
        let per_gof = synth_object(&shape, &m, 3);
        assert!(per_gof.iter().all(|g| g.is_empty()));
    }

    #[test]
    fn shell_inside_one_octant_stays_in_that_octant() {
        let m = synth_manifest("t", 1, 2.0);
        let cell = m.tile_cell_size(); // 0.512 m at depth 1
        let shape = SphereShell {
            center: Vec3::splat(cell * 1.5), // center of the (1,1,1) octant
            radius: cell * 0.2,
            thickness: cell * 0.05,
        };
        let tiles = occupied_tiles(&shape, &m);
        let expect = morton_encode(1, 1, 1, 1).unwrap();
        assert!(!tiles.is_empty());
        assert!(tiles.iter().all(|&(c, _)| c == expect));
    }

    #[test]
    fn occupied_sets_match_across_representations() {
        // The structure (tile list) is shared; only byte counts differ.
        let m = synth_manifest("t", 2, 2.0);
        let shape = SphereShell::default_for(&m);
        let idx = build_segment_index(&shape, &m, 0).unwrap();
        for gof in &idx.gofs {
            for tile in &gof.tiles {
                assert_eq!(tile.byte_count.len(), m.representation_count());
                assert!(tile.byte_count.iter().all(|&b| b > 0));
                // Higher rungs never shrink a tile.
                for w in tile.byte_count.windows(2) {
                    assert!(w[1] >= w[0]);
                }
            }
        }
    }

    #[test]
    fn segment_gof_structure_covers_one_second() {
        let m = synth_manifest("t", 1, 5.0);
        let shape = SphereShell::default_for(&m);
        let idx = build_segment_index(&shape, &m, 0).unwrap();
        // 30 frames at 4 per GOF: seven full GOFs plus a 2-frame tail.
        assert_eq!(idx.gof_count(), 8);
        assert_eq!(idx.gofs[7].frame_count, 2);
        let total_ticks: u32 = idx.gofs.iter().map(|g| g.duration).sum();
        assert_eq!(total_ticks, 90_000);
        idx.validate().unwrap();
    }

    #[test]
    fn payload_matches_index_accounting() {
        let m = synth_manifest("t", 1, 2.0);
        let shape = SphereShell::default_for(&m);
        let idx = build_segment_index(&shape, &m, 0).unwrap();
        for rep in 0..m.representation_count() {
            let bytes = write_payload(&idx, rep);
            assert_eq!(bytes.len() as u64, payload_size(&idx, rep));
            // The last tile of the last GOF ends exactly at EOF.
            let g = idx.gofs.last().unwrap();
            let last = g.tile_count() - 1;
            let end = g.tile_byte_offset(last, rep) + g.tiles[last].byte_count[rep] as u64;
            assert_eq!(end, bytes.len() as u64);
        }
    }

    #[test]
    fn normal_codes_point_outward() {
        let m = synth_manifest("t", 1, 2.0);
        let shape = SphereShell::default_for(&m);
        for (code, normal) in occupied_tiles(&shape, &m) {
            let center = m.tile_local_center(code).unwrap();
            let radial = center - shape.center;
            let axis = match normal {
                0 => Vec3::new(1.0, 0.0, 0.0),
                1 => Vec3::new(-1.0, 0.0, 0.0),
                2 => Vec3::new(0.0, 1.0, 0.0),
                3 => Vec3::new(0.0, -1.0, 0.0),
                4 => Vec3::new(0.0, 0.0, 1.0),
                _ => Vec3::new(0.0, 0.0, -1.0),
            };
            assert!(radial.dot(axis) >= 0.0);
        }
    }
}
