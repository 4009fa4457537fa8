//! Static media metadata: manifests, representation ladders, tile geometry,
//! the binary segment-index format and synthetic content generation.

mod index;
mod morton;
mod synth;

pub use index::{
    parse_index, serialize_index, serialized_size, GofIndexEntry, GofRepInfo, SegmentIndex,
    TileIndexEntry, INDEX_MAGIC, INDEX_VERSION,
};
pub use morton::{morton_decode, morton_encode, MAX_TILE_DEPTH};
pub use synth::{build_segment_index, payload_size, synth_object, write_payload, SphereShell};

use crate::error::{Error, Result};
use crate::geom::{Quat, Vec3};
use serde::{Deserialize, Serialize};

/// One rung of an object's bitrate/level-of-detail ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub id: String,
    /// Bits per second of media.
    pub bandwidth: f64,
    /// Voxels across the bounding cube at this quality.
    pub width: u32,
    /// Frames per second.
    pub framerate: f64,
}

/// Per-object metadata, mirroring the manifest file on the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ObjectManifest {
    pub max_width: u32,
    pub max_frame_rate: f64,
    /// Meters per voxel.
    pub cube_to_object_scale: f64,
    pub cube_to_object_translation: Vec3,
    pub cube_to_object_rotation: Quat,
    pub object_to_world_translation: Vec3,
    /// Voxels across one tile; must divide `max_width` by a power of two.
    pub tile_width: u32,
    /// Media start time, seconds.
    pub start_time: f64,
    /// Media duration, seconds.
    pub duration: f64,
    /// Seconds of media per segment.
    pub segment_duration: f64,
    pub start_number: u32,
    /// Ticks per second for index timestamps.
    pub timescale: u32,
    /// Segment file template with `$bandwidth$_$width$_$framerate$_$number$`
    /// placeholders.
    pub media_template: String,
    pub representations: Vec<Representation>,
}

impl ObjectManifest {
    /// Number of dyadic divisions of the bounding cube into tiles.
    pub fn tile_depth(&self) -> u32 {
        (self.max_width / self.tile_width).trailing_zeros()
    }

    pub fn segment_count(&self) -> u32 {
        (self.duration / self.segment_duration).ceil() as u32
    }

    pub fn representation_count(&self) -> usize {
        self.representations.len()
    }

    /// Check all structural invariants; call after construction or load.
    pub fn validate(&self) -> Result<()> {
        if self.tile_width == 0 || self.max_width % self.tile_width != 0 {
            return Err(Error::Validation(format!(
                "tileWidth {} does not divide maxWidth {}",
                self.tile_width, self.max_width
            )));
        }
        let ratio = self.max_width / self.tile_width;
        if !ratio.is_power_of_two() {
            return Err(Error::Validation(format!(
                "maxWidth/tileWidth = {ratio} is not a power of two"
            )));
        }
        if self.tile_depth() > MAX_TILE_DEPTH {
            return Err(Error::Validation(format!(
                "tileDepth {} exceeds maximum {MAX_TILE_DEPTH}",
                self.tile_depth()
            )));
        }
        if self.segment_duration <= 0.0 || self.duration <= 0.0 {
            return Err(Error::Validation(
                "duration and segmentDuration must be positive".into(),
            ));
        }
        if self.timescale == 0 {
            return Err(Error::Validation("timescale must be positive".into()));
        }
        if self.representations.is_empty() {
            return Err(Error::Validation("representation ladder is empty".into()));
        }
        for (i, rep) in self.representations.iter().enumerate() {
            if rep.bandwidth <= 0.0 {
                return Err(Error::Validation(format!(
                    "representation {} has non-positive bandwidth",
                    rep.id
                )));
            }
            if rep.width > self.max_width {
                return Err(Error::Validation(format!(
                    "representation {} width {} exceeds maxWidth {}",
                    rep.id, rep.width, self.max_width
                )));
            }
            if rep.framerate > self.max_frame_rate {
                return Err(Error::Validation(format!(
                    "representation {} framerate {} exceeds maxFrameRate {}",
                    rep.id, rep.framerate, self.max_frame_rate
                )));
            }
            if i > 0 {
                let prev = &self.representations[i - 1];
                if rep.bandwidth <= prev.bandwidth {
                    return Err(Error::Validation(
                        "ladder bandwidths must be strictly increasing".into(),
                    ));
                }
                if rep.width < prev.width {
                    return Err(Error::Validation(
                        "ladder widths must be non-decreasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: ObjectManifest = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    /// Segment file name for representation `rep` and segment `number`.
    pub fn segment_file_name(&self, rep: &Representation, number: u32) -> String {
        expand_media_template(&self.media_template, rep, number)
    }

    /// World-space center of the tile cell addressed by `code`.
    pub fn tile_world_position(&self, code: u32) -> Result<Vec3> {
        let depth = self.tile_depth();
        let (x, y, z) = morton_decode(code, depth)?;
        let w = self.tile_width as f64;
        let local = Vec3::new(
            (x as f64 + 0.5) * w,
            (y as f64 + 0.5) * w,
            (z as f64 + 0.5) * w,
        ) * self.cube_to_object_scale;
        Ok(self.cube_to_object_rotation.rotate(local)
            + self.cube_to_object_translation
            + self.object_to_world_translation)
    }

    /// Local-space (cube meters) center of the tile cell, before any
    /// object or world transform.
    pub fn tile_local_center(&self, code: u32) -> Result<Vec3> {
        let depth = self.tile_depth();
        let (x, y, z) = morton_decode(code, depth)?;
        let w = self.tile_width as f64 * self.cube_to_object_scale;
        Ok(Vec3::new(
            (x as f64 + 0.5) * w,
            (y as f64 + 0.5) * w,
            (z as f64 + 0.5) * w,
        ))
    }

    /// Edge length of one tile cell in meters.
    pub fn tile_cell_size(&self) -> f64 {
        self.tile_width as f64 * self.cube_to_object_scale
    }
}

/// Replace `$bandwidth$`, `$width$`, `$framerate$` and `$number$`
/// placeholders in a media template.
pub fn expand_media_template(template: &str, rep: &Representation, number: u32) -> String {
    template
        .replace("$bandwidth$", &format_num(rep.bandwidth))
        .replace("$width$", &rep.width.to_string())
        .replace("$framerate$", &format_num(rep.framerate))
        .replace("$number$", &number.to_string())
}

/// Index file name for a segment: `<ObjectName>_<number>.idx`.
pub fn index_file_name(object_name: &str, number: u32) -> String {
    format!("{object_name}_{number}.idx")
}

fn format_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Estimated segment-index bitrate in bits per second for the given tiling
/// and GOF structure: tiles * (32 + reps * 32) * fps / gofFrames.
pub fn index_bitrate(tile_count: u64, rep_count: u64, fps: f64, gof_frames: u32) -> f64 {
    assert!(gof_frames >= 1, "gofFrames must be at least 1");
    tile_count as f64 * (32.0 + rep_count as f64 * 32.0) * fps / gof_frames as f64
}

/// Bits for one occupied tile of a GOF at the given representation:
/// an equal split of the GOF's bit budget across its occupied tiles.
pub fn tile_bit_count(rep: &Representation, frame_count: u32, tile_count: usize) -> f64 {
    assert!(tile_count >= 1, "tile_bit_count requires an occupied GOF");
    rep.bandwidth / rep.framerate * frame_count as f64 / tile_count as f64
}

/// The ladder used by synthetic objects: 4..20 Mbps in 4 Mbps steps.
pub fn default_ladder() -> Vec<Representation> {
    let widths = [128u32, 256, 512, 768, 1024];
    (0..5)
        .map(|i| Representation {
            id: format!("r{}", i + 1),
            bandwidth: 4e6 * (i + 1) as f64,
            width: widths[i],
            framerate: 30.0,
        })
        .collect()
}

/// Manifest for a synthetic object centered at the world origin.
pub fn synth_manifest(name: &str, tile_depth: u32, duration: f64) -> ObjectManifest {
    let max_width = 1024u32;
    let scale = 0.001;
    let half = max_width as f64 * scale / 2.0;
    let m = ObjectManifest {
        max_width,
        max_frame_rate: 30.0,
        cube_to_object_scale: scale,
        cube_to_object_translation: Vec3::splat(-half),
        cube_to_object_rotation: Quat::IDENTITY,
        object_to_world_translation: Vec3::ZERO,
        tile_width: max_width >> tile_depth,
        start_time: 0.0,
        duration,
        segment_duration: 1.0,
        start_number: 0,
        timescale: 90_000,
        media_template: format!("{name}_$bandwidth$_$width$_$framerate$_$number$.hvr"),
        representations: default_ladder(),
    };
    debug_assert!(m.validate().is_ok());
    m
}
