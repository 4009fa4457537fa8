//! Scenario configuration, the end-to-end simulation drivers, metrics and
//! chart emission.

pub mod camera;
pub mod charts;
pub mod metrics;
mod queue_run;
mod wba_run;

pub use camera::{Camera, CameraParams, CameraSpec};
pub use metrics::{BufferTraceRow, MetricsRow, RequestLogRow, Summary};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::client_buffer_manager::{BbaConfig, ObjectContent, ThroughputConfig, WbaConfig};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::media_model::{
    build_segment_index, index_file_name, parse_index, serialize_index, synth_manifest,
    write_payload, ObjectManifest, SphereShell,
};
use crate::network_simulator::{parse_rate_trace, preset, NetworkProfile, SchedulePoint};
use crate::utility_model::PredictorConfig;
use crate::window_buffer::{ContentMap, ObjectWindow, WindowConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "wba")]
    Wba,
    #[serde(rename = "stripped-wba")]
    StrippedWba,
    #[serde(rename = "tba")]
    Tba,
    #[serde(rename = "bba")]
    Bba,
}

impl Default for Algorithm {
    fn default() -> Self {
        Algorithm::Wba
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wba" => Ok(Algorithm::Wba),
            "stripped-wba" => Ok(Algorithm::StrippedWba),
            "tba" => Ok(Algorithm::Tba),
            "bba" => Ok(Algorithm::Bba),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Algorithm::Wba => "wba",
            Algorithm::StrippedWba => "stripped-wba",
            Algorithm::Tba => "tba",
            Algorithm::Bba => "bba",
        };
        f.write_str(s)
    }
}

/// Parameters of a synthetic sphere-shell object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    #[serde(default)]
    pub tile_depth: Option<u32>,
    #[serde(default)]
    pub duration_s: Option<f64>,
    #[serde(default)]
    pub radius_m: Option<f64>,
    #[serde(default)]
    pub thickness_m: Option<f64>,
}

/// One object of a scenario: either synthetic or loaded from packed files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub synth: Option<SynthSpec>,
    #[serde(default)]
    pub manifest_path: Option<String>,
    /// World translation of the object origin.
    #[serde(default)]
    pub placement: Option<[f64; 3]>,
    /// Seek time in media seconds.
    #[serde(default)]
    pub tau0: f64,
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default, rename = "loop")]
    pub looping: bool,
}

fn default_speed() -> f64 {
    1.0
}

impl Default for ObjectSpec {
    fn default() -> Self {
        ObjectSpec {
            name: None,
            synth: Some(SynthSpec::default()),
            manifest_path: None,
            placement: None,
            tau0: 0.0,
            speed: 1.0,
            looping: false,
        }
    }
}

/// Network selection: a preset name, a trace file or an inline schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub trace_path: Option<String>,
    #[serde(default)]
    pub schedule: Option<Vec<SchedulePoint>>,
    #[serde(default)]
    pub repeat_s: Option<f64>,
}

/// Every tunable constant of the pipeline, overridable per scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub window: WindowConfig,
    pub throughput: ThroughputConfig,
    pub predictor: PredictorConfig,
    pub tba_safety: f64,
    pub bba: BbaConfig,
    pub packet_size_bits: f64,
    pub rtt_s: f64,
    pub strict_budget: bool,
    pub camera_params: CameraParams,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides {
            window: WindowConfig::default(),
            throughput: ThroughputConfig::default(),
            predictor: PredictorConfig::default(),
            tba_safety: 0.9,
            bba: BbaConfig::default(),
            packet_size_bits: crate::network_simulator::DEFAULT_PACKET_SIZE_BITS,
            rtt_s: 0.0,
            strict_budget: false,
            camera_params: CameraParams::default(),
        }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default)]
    pub network: NetworkSpec,
    #[serde(default)]
    pub algorithm: Algorithm,
    /// Tile depth for synthetic objects that do not set their own.
    #[serde(default)]
    pub tile_depth: Option<u32>,
    pub duration_user_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub overrides: Overrides,
}

impl Scenario {
    /// A single synthetic object on the default camera and network.
    pub fn single_object(algorithm: Algorithm, duration_user_s: f64, seed: u64) -> Self {
        Scenario {
            objects: vec![ObjectSpec::default()],
            camera: CameraSpec::default(),
            network: NetworkSpec::default(),
            algorithm,
            tile_depth: None,
            duration_user_s,
            seed,
            output_dir: None,
            overrides: Overrides::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::Config("scenario needs at least one object".into()));
        }
        if self.duration_user_s <= 0.0 {
            return Err(Error::Config("duration_user_s must be positive".into()));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.synth.is_some() == o.manifest_path.is_some() {
                return Err(Error::Config(format!(
                    "object {i}: exactly one of synth or manifest_path is required"
                )));
            }
            if o.speed <= 0.0 {
                return Err(Error::Config(format!("object {i}: speed must be positive")));
            }
            if let Some(d) = self.tile_depth.or(o.synth.and_then(|s| s.tile_depth)) {
                if d > 3 {
                    return Err(Error::Config(format!(
                        "object {i}: tile depth {d} outside the supported 0..=3"
                    )));
                }
            }
        }
        self.overrides.predictor.validate()?;
        Ok(())
    }
}

/// Arc of `n` synthetic objects around the origin plus a panning camera
/// whose frustum never covers all of them at once.
pub fn build_multi_object_scene(n: usize) -> (Vec<ObjectSpec>, CameraSpec) {
    assert!(n >= 1);
    let radius = 3.0;
    let half = 80f64.to_radians();
    let objects = (0..n)
        .map(|i| {
            let ang = if n == 1 {
                0.0
            } else {
                -half + 2.0 * half * i as f64 / (n - 1) as f64
            };
            ObjectSpec {
                name: Some(format!("arc{i}")),
                placement: Some([radius * ang.cos(), 0.0, radius * ang.sin()]),
                ..ObjectSpec::default()
            }
        })
        .collect();
    (
        objects,
        CameraSpec::Sweep {
            half_angle_deg: 80.0,
            period_s: 20.0,
        },
    )
}

/// Scenario inputs resolved into concrete simulation state.
pub(crate) struct ResolvedScenario {
    pub objects: Vec<ObjectContent>,
    pub object_windows: Vec<ObjectWindow>,
    pub contents: Vec<ContentMap>,
    /// Serialized manifest size per object, bits.
    pub manifest_bits: Vec<f64>,
    pub network: NetworkProfile,
    pub camera: Camera,
    pub algorithm: Algorithm,
    pub duration_user_s: f64,
    pub seed: u64,
    pub window: WindowConfig,
    pub wba: WbaConfig,
    pub tba_safety: f64,
    pub bba: BbaConfig,
}

pub(crate) fn resolve(scenario: &Scenario) -> Result<ResolvedScenario> {
    scenario.validate()?;
    let mut objects = Vec::new();
    let mut object_windows = Vec::new();
    let mut manifest_bits = Vec::new();
    let mut placements = Vec::new();
    for (i, spec) in scenario.objects.iter().enumerate() {
        let (name, mut manifest, indexes) = match (&spec.synth, &spec.manifest_path) {
            (Some(synth), None) => {
                let name = spec.name.clone().unwrap_or_else(|| format!("obj{i}"));
                let depth = synth.tile_depth.or(scenario.tile_depth).unwrap_or(2);
                let duration = synth.duration_s.unwrap_or_else(|| {
                    (scenario.duration_user_s * spec.speed + 8.0).ceil()
                });
                let manifest = synth_manifest(&name, depth, duration);
                let mut shape = SphereShell::default_for(&manifest);
                if let Some(r) = synth.radius_m {
                    shape.radius = r;
                }
                if let Some(th) = synth.thickness_m {
                    shape.thickness = th;
                }
                let indexes: Vec<_> = (0..manifest.segment_count())
                    .map(|s| build_segment_index(&shape, &manifest, manifest.start_number + s))
                    .collect::<Result<_>>()?;
                (name, manifest, indexes)
            }
            (None, Some(path)) => load_packed_object(Path::new(path))?,
            _ => unreachable!("validated"),
        };
        if let Some(p) = spec.placement {
            manifest.object_to_world_translation = Vec3::from(p);
        }
        placements.push(manifest.object_to_world_translation);
        let clip_end = manifest.start_time + manifest.duration;
        object_windows.push(ObjectWindow {
            tau0: manifest.start_time + spec.tau0,
            speed: spec.speed,
            clip_end,
            looping: spec.looping,
        });
        let json_bits = manifest.to_json()?.len() as f64 * 8.0;
        manifest_bits.push(json_bits);
        objects.push(ObjectContent::new(name, manifest, indexes));
    }

    let contents = objects
        .iter()
        .map(|o| ContentMap::from_indexes(&o.manifest, &o.indexes))
        .collect();

    let mut network = match (
        &scenario.network.preset,
        &scenario.network.trace_path,
        &scenario.network.schedule,
    ) {
        (Some(name), None, None) => preset(name)?,
        (None, Some(path), None) => parse_rate_trace(&std::fs::read_to_string(path)?)?,
        (None, None, Some(schedule)) => {
            let p = NetworkProfile {
                schedule: schedule.clone(),
                repeat_s: scenario.network.repeat_s,
                packet_size_bits: scenario.overrides.packet_size_bits,
                rtt_s: scenario.overrides.rtt_s,
                seed: scenario.seed,
            };
            p.validate()?;
            p
        }
        (None, None, None) => preset("stable")?,
        _ => {
            return Err(Error::Config(
                "network: set exactly one of preset, trace_path or schedule".into(),
            ))
        }
    };
    network.seed = scenario.seed;
    network.packet_size_bits = scenario.overrides.packet_size_bits;
    network.rtt_s = scenario.overrides.rtt_s;

    let centroid = placements
        .iter()
        .fold(Vec3::ZERO, |acc, &p| acc + p)
        * (1.0 / placements.len() as f64);
    let camera_center = match scenario.camera {
        // The pan camera stands at the arc center, not the centroid.
        CameraSpec::Sweep { .. } => Vec3::ZERO,
        _ => centroid,
    };
    let camera = Camera::new(
        scenario.camera.clone(),
        scenario.overrides.camera_params,
        camera_center,
    )?;

    Ok(ResolvedScenario {
        objects,
        object_windows,
        contents,
        manifest_bits,
        network,
        camera,
        algorithm: scenario.algorithm,
        duration_user_s: scenario.duration_user_s,
        seed: scenario.seed,
        window: scenario.overrides.window,
        wba: WbaConfig {
            throughput: scenario.overrides.throughput,
            predictor: scenario.overrides.predictor,
            strict_budget: scenario.overrides.strict_budget,
        },
        tba_safety: scenario.overrides.tba_safety,
        bba: scenario.overrides.bba,
    })
}

/// Load a packed object: the manifest JSON plus its per-segment indexes.
pub fn load_packed_object(
    manifest_path: &Path,
) -> Result<(String, ObjectManifest, Vec<crate::media_model::SegmentIndex>)> {
    let text = std::fs::read_to_string(manifest_path)?;
    let manifest = ObjectManifest::from_json(&text)?;
    let name = manifest_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Config(format!("bad manifest path {manifest_path:?}")))?
        .to_string();
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut indexes = Vec::new();
    for s in 0..manifest.segment_count() {
        let path = dir.join(index_file_name(&name, manifest.start_number + s));
        let bytes = std::fs::read(&path)?;
        indexes.push(parse_index(&bytes)?);
    }
    Ok((name, manifest, indexes))
}

/// Write a synthetic object to disk: manifest, per-segment indexes and
/// payload files laid out exactly as the indexes describe.
pub fn pack_object(
    dir: &Path,
    name: &str,
    tile_depth: u32,
    duration_s: f64,
    radius_m: Option<f64>,
    thickness_m: Option<f64>,
) -> Result<Vec<PathBuf>> {
    let manifest = synth_manifest(name, tile_depth, duration_s);
    let mut shape = SphereShell::default_for(&manifest);
    if let Some(r) = radius_m {
        shape.radius = r;
    }
    if let Some(t) = thickness_m {
        shape.thickness = t;
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let manifest_path = dir.join(format!("{name}.json"));
    std::fs::write(&manifest_path, manifest.to_json()?)?;
    written.push(manifest_path);
    for s in 0..manifest.segment_count() {
        let number = manifest.start_number + s;
        let index = build_segment_index(&shape, &manifest, number)?;
        let idx_path = dir.join(index_file_name(name, number));
        std::fs::write(&idx_path, serialize_index(&index)?)?;
        written.push(idx_path);
        for (r, rep) in manifest.representations.iter().enumerate() {
            let payload = write_payload(&index, r);
            let seg_path = dir.join(manifest.segment_file_name(rep, number));
            std::fs::write(&seg_path, payload)?;
            written.push(seg_path);
        }
    }
    Ok(written)
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub metrics: Vec<MetricsRow>,
    pub request_log: Vec<RequestLogRow>,
    pub buffer_trace: Vec<BufferTraceRow>,
    pub summary: Summary,
    pub flip_report: Option<FlipReport>,
}

/// What happened at a scripted viewpoint flip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipReport {
    /// Trail-zone tiles that the flip made visible.
    pub newly_visible: usize,
    /// How many of them the next plan upgraded.
    pub planned: usize,
    /// Flip-to-first-arrival latency of an upgraded newly-visible tile.
    pub first_arrival_latency_s: Option<f64>,
}

/// Run a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<RunResult> {
    let resolved = resolve(scenario)?;
    let result = match resolved.algorithm {
        Algorithm::Wba => wba_run::run(&resolved)?,
        _ => queue_run::run(&resolved)?,
    };
    if let Some(dir) = &scenario.output_dir {
        write_outputs(&result, Path::new(dir), scenario.duration_user_s)?;
    }
    Ok(result)
}

/// Write metrics.csv, summary.json, request_log.csv, buffer_trace.csv and
/// charts/*.svg under `dir`.
pub fn write_outputs(result: &RunResult, dir: &Path, duration_s: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("metrics.csv"), metrics::metrics_csv(&result.metrics))?;
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&result.summary)?,
    )?;
    std::fs::write(
        dir.join("request_log.csv"),
        metrics::request_log_csv(&result.request_log),
    )?;
    std::fs::write(
        dir.join("buffer_trace.csv"),
        metrics::buffer_trace_csv(&result.buffer_trace),
    )?;
    let charts_dir = dir.join("charts");
    std::fs::create_dir_all(&charts_dir)?;
    for (name, svg) in charts::render_charts(&result.metrics, duration_s) {
        std::fs::write(charts_dir.join(name), svg)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_object_arc_keeps_objects_apart() {
        let (objects, _camera) = build_multi_object_scene(5);
        assert_eq!(objects.len(), 5);
        let pos: Vec<Vec3> = objects
            .iter()
            .map(|o| Vec3::from(o.placement.unwrap()))
            .collect();
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                assert!(pos[i].distance(pos[j]) >= 1.0);
            }
        }
    }

    #[test]
    fn single_object_scene_degenerates() {
        let (objects, _) = build_multi_object_scene(1);
        assert_eq!(objects.len(), 1);
        assert_eq!(Vec3::from(objects[0].placement.unwrap()).x, 3.0);
    }

    #[test]
    fn sweep_camera_always_misses_some_object() {
        let (objects, camera) = build_multi_object_scene(5);
        let scenario = Scenario {
            objects,
            camera,
            duration_user_s: 20.0,
            ..Scenario::single_object(Algorithm::Wba, 20.0, 0)
        };
        let resolved = resolve(&scenario).unwrap();
        for k in 0..40 {
            let t = k as f64 * 0.5;
            let view = resolved.camera.at(t);
            let outside = resolved
                .objects
                .iter()
                .filter(|o| {
                    !crate::view_geometry::in_frustum(
                        o.manifest.object_to_world_translation,
                        &view,
                    )
                })
                .count();
            assert!(outside >= 1, "at t={t} every object was in the frustum");
        }
    }

    #[test]
    fn scenario_json_round_trip_and_validation() {
        let text = r#"{
            "objects": [{"synth": {"tile_depth": 1}, "tau0": 0.0, "speed": 1.0}],
            "camera": {"kind": "path1", "d0_m": 5.0, "d1_m": 0.5, "period_s": 20.0},
            "network": {"preset": "variable"},
            "algorithm": "wba",
            "duration_user_s": 12.0,
            "seed": 7
        }"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.algorithm, Algorithm::Wba);
        assert_eq!(s.seed, 7);
        let back = serde_json::to_string(&s).unwrap();
        let s2 = Scenario::from_json(&back).unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        assert!(Scenario::from_json(r#"{"objects": [], "duration_user_s": 5.0}"#).is_err());
        let both = r#"{
            "objects": [{"synth": {}, "manifest_path": "x.json"}],
            "duration_user_s": 5.0
        }"#;
        assert!(Scenario::from_json(both).is_err());
        let neither = r#"{"objects": [{}], "duration_user_s": 5.0}"#;
        assert!(Scenario::from_json(neither).is_err());
        let bad_field = r#"{"objects": [{"synth": {}}], "duration_user_s": 5.0, "wat": 1}"#;
        assert!(Scenario::from_json(bad_field).is_err());
    }

    #[test]
    fn pack_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let files = pack_object(dir.path(), "Ball", 1, 2.0, None, None).unwrap();
        // Manifest + 2 x (index + 5 payloads).
        assert_eq!(files.len(), 1 + 2 * 6);
        let (name, manifest, indexes) =
            load_packed_object(&dir.path().join("Ball.json")).unwrap();
        assert_eq!(name, "Ball");
        assert_eq!(indexes.len(), manifest.segment_count() as usize);
        // Payload sizes match the index accounting.
        for (s, index) in indexes.iter().enumerate() {
            for (r, rep) in manifest.representations.iter().enumerate() {
                let path = dir
                    .path()
                    .join(manifest.segment_file_name(rep, manifest.start_number + s as u32));
                let len = std::fs::metadata(path).unwrap().len();
                assert_eq!(len, crate::media_model::payload_size(index, r));
            }
        }
    }
}
