//! The window over the media timeline, the tile buffer keyed by
//! (object, segment, GOF, tile), playback release and stall accounting.
//!
//! All objects share one start time t0 and one window-size function; each
//! object has its own seek time and playback speed. Media positions are
//! tracked "unwrapped" (monotone across loop passes) and wrapped onto the
//! clip when addressing content.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media_model::{ObjectManifest, SegmentIndex};
use crate::rate_utility_optimizer::TileKey;

/// Window-size function parameters: grows linearly from `floor_s` to
/// `cap_s` over the first `ramp_end_s` seconds, then stays flat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub floor_s: f64,
    pub cap_s: f64,
    pub ramp_end_s: f64,
    /// Seconds of content prefilled before playback starts.
    pub startup_s: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            floor_s: 1.0,
            cap_s: 5.0,
            ramp_end_s: 4.0,
            startup_s: 1.0,
        }
    }
}

/// Seconds of user time the window spans after `elapsed` seconds of
/// playback.
pub fn window_size(cfg: &WindowConfig, elapsed: f64) -> f64 {
    assert!(elapsed >= 0.0, "elapsed must be non-negative");
    if cfg.ramp_end_s <= 0.0 {
        return cfg.cap_s;
    }
    let ramp = elapsed.min(cfg.ramp_end_s) / cfg.ramp_end_s;
    cfg.floor_s + (cfg.cap_s - cfg.floor_s) * ramp
}

/// Per-object playback parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectWindow {
    /// Seek time: media second where playback of this object starts.
    pub tau0: f64,
    /// Media seconds per user second.
    pub speed: f64,
    /// End of the clip in media seconds.
    pub clip_end: f64,
    pub looping: bool,
}

impl ObjectWindow {
    pub fn span(&self) -> f64 {
        self.clip_end - self.tau0
    }
}

/// Shared playback clock and per-object window edges. Stalls freeze the
/// media clock while wall time keeps running.
#[derive(Debug, Clone)]
pub struct WindowState {
    pub config: WindowConfig,
    pub t0: f64,
    pub objects: Vec<ObjectWindow>,
    paused_total: f64,
}

impl WindowState {
    pub fn new(config: WindowConfig, t0: f64, objects: Vec<ObjectWindow>) -> Self {
        WindowState {
            config,
            t0,
            objects,
            paused_total: 0.0,
        }
    }

    /// Playback seconds elapsed at wall time `t`, net of stall pauses.
    pub fn effective_elapsed(&self, t: f64) -> f64 {
        (t - self.t0 - self.paused_total).max(0.0)
    }

    pub fn delta_w(&self, t: f64) -> f64 {
        window_size(&self.config, self.effective_elapsed(t))
    }

    /// Trailing edge in unwrapped media seconds.
    pub fn w_trail(&self, t: f64, obj: usize) -> f64 {
        let o = &self.objects[obj];
        let u = o.tau0 + o.speed * self.effective_elapsed(t);
        if o.looping {
            u
        } else {
            u.min(o.clip_end)
        }
    }

    /// Leading edge in unwrapped media seconds.
    pub fn w_lead(&self, t: f64, obj: usize) -> f64 {
        let o = &self.objects[obj];
        let lead = self.w_trail(t, obj) + o.speed * self.delta_w(t);
        if o.looping {
            lead
        } else {
            lead.min(o.clip_end)
        }
    }

    fn add_pause(&mut self, seconds: f64) {
        self.paused_total += seconds;
    }

    /// Wall time at which the trailing edge of `obj` reaches the unwrapped
    /// media time `u`, under the pauses accumulated so far.
    fn wall_at_media(&self, obj: usize, u: f64) -> f64 {
        let o = &self.objects[obj];
        self.t0 + self.paused_total + (u - o.tau0) / o.speed
    }
}

/// Time-structure view of one object's content: every GOF in media order.
#[derive(Debug, Clone)]
pub struct ContentMap {
    pub gofs: Vec<GofMeta>,
}

#[derive(Debug, Clone)]
pub struct GofMeta {
    pub segment: u32,
    pub gof: u32,
    pub start_s: f64,
    pub duration_s: f64,
    /// (mortonCode, normalCode) of each occupied tile.
    pub tiles: Vec<(u32, u32)>,
}

impl ContentMap {
    pub fn from_indexes(manifest: &ObjectManifest, indexes: &[SegmentIndex]) -> Self {
        let ts = manifest.timescale as f64;
        let mut gofs = Vec::new();
        for (seg, index) in indexes.iter().enumerate() {
            for (gi, g) in index.gofs.iter().enumerate() {
                gofs.push(GofMeta {
                    segment: manifest.start_number + seg as u32,
                    gof: gi as u32,
                    start_s: g.start_time as f64 / ts,
                    duration_s: g.duration as f64 / ts,
                    tiles: g
                        .tiles
                        .iter()
                        .map(|t| (t.morton_code, t.normal_code))
                        .collect(),
                });
            }
        }
        ContentMap { gofs }
    }
}

/// A buffered tile: its selected representation and when it arrived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferEntry {
    pub n: usize,
    pub received_at: f64,
}

/// One occupied tile of a released GOF, as handed to the playback engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayedTile {
    pub key: TileKey,
    pub normal_code: u32,
    /// Representation at release; 0 means the tile never arrived (a hole).
    pub n: usize,
    /// Unwrapped media time of the GOF.
    pub media_u: f64,
    pub pass: u32,
    /// Wall time of the release.
    pub released_at: f64,
}

/// A tile inside the current window, ready for utility evaluation.
#[derive(Debug, Clone, Copy)]
pub struct WindowTile {
    pub key: TileKey,
    pub normal_code: u32,
    /// Unwrapped media time of the owning GOF.
    pub media_u: f64,
    pub meta_idx: usize,
}

#[derive(Debug, Clone, Copy)]
struct StallContext {
    object: usize,
    meta_idx: usize,
    started_at: f64,
}

/// The buffer as a window: store, release cursors and stall bookkeeping.
#[derive(Debug, Clone)]
pub struct WindowBuffer {
    pub state: WindowState,
    pub contents: Vec<ContentMap>,
    entries: HashMap<TileKey, BufferEntry>,
    pub played_log: Vec<PlayedTile>,
    /// Per object: GOF indices inside the playable clip [tau0, clip_end).
    clip_gofs: Vec<Vec<usize>>,
    /// Per object: position in the unwrapped deadline stream
    /// (pass * clip_len + position-in-clip).
    release_cursor: Vec<usize>,
    stall: Option<StallContext>,
    pub stall_count: u64,
    pub stall_seconds: f64,
}

impl WindowBuffer {
    pub fn new(state: WindowState, contents: Vec<ContentMap>) -> Self {
        let clip_gofs = contents
            .iter()
            .zip(&state.objects)
            .map(|(map, o)| {
                map.gofs
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| g.start_s >= o.tau0 - 1e-9 && g.start_s < o.clip_end - 1e-9)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        WindowBuffer {
            release_cursor: vec![0; contents.len()],
            state,
            contents,
            entries: HashMap::new(),
            played_log: Vec::new(),
            clip_gofs,
            stall: None,
            stall_count: 0,
            stall_seconds: 0.0,
        }
    }

    pub fn entry_n(&self, key: &TileKey) -> usize {
        self.entries.get(key).map(|e| e.n).unwrap_or(0)
    }

    pub fn entry(&self, key: &TileKey) -> Option<&BufferEntry> {
        self.entries.get(key)
    }

    pub fn is_stalled(&self) -> bool {
        self.stall.is_some()
    }

    /// Record receipt of a tile at representation `n`. A representation
    /// never decreases while buffered; stale lower-quality arrivals are
    /// dropped.
    pub fn insert(&mut self, key: TileKey, n: usize, t: f64) {
        let e = self.entries.entry(key).or_insert(BufferEntry {
            n: 0,
            received_at: t,
        });
        if n > e.n {
            e.n = n;
            e.received_at = t;
        }
    }

    /// Insert unless the tile's GOF already left the window (data that
    /// arrived after its deadline is dropped; the bits were still spent).
    pub fn insert_if_pending(&mut self, key: TileKey, n: usize, t: f64) {
        let obj = key.object as usize;
        if !self.state.objects[obj].looping {
            if let Some(g) = self.contents[obj]
                .gofs
                .iter()
                .find(|g| g.segment == key.segment && g.gof == key.gof)
            {
                if g.start_s < self.state.w_trail(t, obj) - 1e-9 {
                    return;
                }
            }
        }
        self.insert(key, n, t);
    }

    /// Resolve a deadline-stream position to (meta index, pass, unwrapped
    /// media time), or None once the clip is exhausted.
    fn clip_gof(&self, obj: usize, cursor: usize) -> Option<(usize, u32, f64)> {
        let clip = &self.clip_gofs[obj];
        if clip.is_empty() {
            return None;
        }
        let o = &self.state.objects[obj];
        let pass = (cursor / clip.len()) as u32;
        if pass > 0 && !o.looping {
            return None;
        }
        let meta_idx = clip[cursor % clip.len()];
        let g = &self.contents[obj].gofs[meta_idx];
        Some((meta_idx, pass, g.start_s + pass as f64 * o.span()))
    }

    fn gof_has_data(&self, obj: usize, meta_idx: usize) -> bool {
        let g = &self.contents[obj].gofs[meta_idx];
        g.tiles.iter().any(|&(morton, _)| {
            self.entry_n(&TileKey::new(obj as u32, g.segment, g.gof, morton)) > 0
        })
    }

    /// Advance playback to wall time `t`, releasing every GOF whose start
    /// passes the trailing edge. Stops (frozen) at the first GOF that has
    /// received nothing; playback then waits for `on_data`.
    pub fn advance_to(&mut self, t: f64) {
        loop {
            if self.stall.is_some() {
                return;
            }
            // Earliest pending deadline across objects.
            let mut next: Option<(f64, usize, usize, u32, f64)> = None;
            for obj in 0..self.contents.len() {
                if let Some((meta_idx, pass, media_u)) =
                    self.clip_gof(obj, self.release_cursor[obj])
                {
                    let wall = self.state.wall_at_media(obj, media_u);
                    if next.is_none() || wall < next.unwrap().0 {
                        next = Some((wall, obj, meta_idx, pass, media_u));
                    }
                }
            }
            let Some((wall, obj, meta_idx, pass, media_u)) = next else {
                return;
            };
            if wall >= t {
                return;
            }
            let g = &self.contents[obj].gofs[meta_idx];
            if !g.tiles.is_empty() && !self.gof_has_data(obj, meta_idx) {
                self.stall = Some(StallContext {
                    object: obj,
                    meta_idx,
                    started_at: wall,
                });
                self.stall_count += 1;
                return;
            }
            self.release_gof(obj, meta_idx, pass, media_u, wall);
        }
    }

    fn release_gof(&mut self, obj: usize, meta_idx: usize, pass: u32, media_u: f64, at: f64) {
        let g = self.contents[obj].gofs[meta_idx].clone();
        let looping = self.state.objects[obj].looping;
        for (morton, normal_code) in g.tiles {
            let key = TileKey::new(obj as u32, g.segment, g.gof, morton);
            let n = self.entry_n(&key);
            self.played_log.push(PlayedTile {
                key,
                normal_code,
                n,
                media_u,
                pass,
                released_at: at,
            });
            if !looping {
                self.entries.remove(&key);
            }
        }
        self.release_cursor[obj] += 1;
    }

    /// Notify the buffer that data arrived at wall time `t`; resumes a
    /// stalled playback once the blocking GOF has any representation.
    pub fn on_data(&mut self, t: f64) {
        if let Some(ctx) = self.stall {
            if self.gof_has_data(ctx.object, ctx.meta_idx) {
                let pause = t - ctx.started_at;
                self.stall_seconds += pause;
                self.state.add_pause(pause);
                self.stall = None;
                // The blocking GOF releases immediately on resume.
                if let Some((meta_idx, pass, media_u)) =
                    self.clip_gof(ctx.object, self.release_cursor[ctx.object])
                {
                    debug_assert_eq!(meta_idx, ctx.meta_idx);
                    self.release_gof(ctx.object, meta_idx, pass, media_u, t);
                }
                self.advance_to(t);
            }
        }
    }

    /// Close out stall accounting at the end of a run.
    pub fn finish(&mut self, t_end: f64) {
        if let Some(ctx) = self.stall.take() {
            self.stall_seconds += t_end - ctx.started_at;
        }
    }

    /// Every occupied tile of every GOF whose start time lies inside
    /// [w_trail, w_lead) at wall time `t`, across all objects. Fails if a
    /// covered segment's index has not been fetched.
    pub fn tiles_in_window(
        &self,
        t: f64,
        fetched: &[BTreeSet<u32>],
    ) -> Result<Vec<WindowTile>> {
        let mut out = Vec::new();
        for obj in 0..self.contents.len() {
            let (trail, lead) = (self.state.w_trail(t, obj), self.state.w_lead(t, obj));
            let mut cursor = self.release_cursor[obj];
            while let Some((meta_idx, _, media_u)) = self.clip_gof(obj, cursor) {
                if media_u >= lead {
                    break;
                }
                let g = &self.contents[obj].gofs[meta_idx];
                if media_u >= trail {
                    if !fetched[obj].contains(&g.segment) {
                        return Err(Error::MissingIndex {
                            object: obj,
                            segment: g.segment,
                        });
                    }
                    for &(morton, normal_code) in &g.tiles {
                        out.push(WindowTile {
                            key: TileKey::new(obj as u32, g.segment, g.gof, morton),
                            normal_code,
                            media_u,
                            meta_idx,
                        });
                    }
                }
                cursor += 1;
            }
        }
        Ok(out)
    }

    /// Segments whose media interval overlaps [w_trail, w_lead) for each
    /// object; the set the client must hold indexes for.
    pub fn segments_in_window(&self, t: f64) -> Vec<BTreeSet<u32>> {
        let mut out = Vec::new();
        for obj in 0..self.contents.len() {
            let (trail, lead) = (self.state.w_trail(t, obj), self.state.w_lead(t, obj));
            let mut set = BTreeSet::new();
            let mut cursor = self.release_cursor[obj];
            while let Some((meta_idx, _, media_u)) = self.clip_gof(obj, cursor) {
                if media_u >= lead {
                    break;
                }
                let g = &self.contents[obj].gofs[meta_idx];
                if media_u + g.duration_s > trail {
                    set.insert(g.segment);
                }
                cursor += 1;
            }
            out.push(set);
        }
        out
    }

    /// Contiguous fully-received span ahead of the trailing edge, in user
    /// seconds: the largest delta such that every GOF starting within
    /// [w_trail, w_trail + speed * delta) has all its tiles received.
    pub fn occupancy(&self, t: f64, obj: usize) -> f64 {
        let o = self.state.objects[obj];
        let (trail, lead) = (self.state.w_trail(t, obj), self.state.w_lead(t, obj));
        let mut cursor = self.release_cursor[obj];
        let mut covered_to = trail;
        while let Some((meta_idx, _, media_u)) = self.clip_gof(obj, cursor) {
            if media_u >= lead {
                break;
            }
            let g = &self.contents[obj].gofs[meta_idx];
            let full = g.tiles.iter().all(|&(morton, _)| {
                self.entry_n(&TileKey::new(obj as u32, g.segment, g.gof, morton)) > 0
            });
            if media_u >= trail && !full {
                break;
            }
            covered_to = media_u + g.duration_s;
            cursor += 1;
        }
        ((covered_to.min(lead) - trail) / o.speed).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media_model::{build_segment_index, synth_manifest, SphereShell};

    #[test]
    fn window_size_matches_the_ramp() {
        let cfg = WindowConfig::default();
        assert_eq!(window_size(&cfg, 0.0), 1.0);
        assert_eq!(window_size(&cfg, 2.0), 3.0);
        assert_eq!(window_size(&cfg, 4.0), 5.0);
        assert_eq!(window_size(&cfg, 10.0), 5.0);
    }

    fn one_object_state(speed: f64, looping: bool) -> WindowState {
        WindowState::new(
            WindowConfig::default(),
            0.0,
            vec![ObjectWindow {
                tau0: 0.0,
                speed,
                clip_end: 30.0,
                looping,
            }],
        )
    }

    #[test]
    fn window_edges_scale_with_speed() {
        let s = one_object_state(1.0, false);
        assert!((s.w_trail(2.5, 0) - 2.5).abs() < 1e-12);
        assert!((s.w_lead(2.0, 0) - 5.0).abs() < 1e-12);

        let s2 = one_object_state(2.0, false);
        let trail = s2.w_trail(1.0, 0);
        assert!((trail - 2.0).abs() < 1e-12);
        assert!((s2.w_lead(1.0, 0) - (trail + 2.0 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn lead_minus_trail_is_speed_times_window() {
        for speed in [0.5, 1.0, 2.0] {
            let s = one_object_state(speed, true);
            for t in [0.0, 0.7, 2.0, 3.9, 4.0, 9.5] {
                let gap = s.w_lead(t, 0) - s.w_trail(t, 0);
                assert!((gap - speed * s.delta_w(t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lead_clamps_at_clip_end_without_looping() {
        let s = one_object_state(1.0, false);
        assert!((s.w_lead(28.0, 0) - 30.0).abs() < 1e-12);
    }

    fn test_buffer_clipped(depth: u32, looping: bool, clip_end: f64) -> WindowBuffer {
        let manifest = synth_manifest("t", depth, 30.0);
        let shape = SphereShell::default_for(&manifest);
        let indexes: Vec<_> = (0..manifest.segment_count())
            .map(|n| build_segment_index(&shape, &manifest, n).unwrap())
            .collect();
        let map = ContentMap::from_indexes(&manifest, &indexes);
        let mut state = one_object_state(1.0, looping);
        state.objects[0].clip_end = clip_end;
        WindowBuffer::new(state, vec![map])
    }

    fn test_buffer(depth: u32, looping: bool) -> WindowBuffer {
        test_buffer_clipped(depth, looping, 30.0)
    }

    fn fill_gofs(buf: &mut WindowBuffer, until_media: f64, n: usize, t: f64) {
        let gofs = buf.contents[0].gofs.clone();
        for g in gofs {
            if g.start_s < until_media {
                for &(morton, _) in &g.tiles {
                    buf.insert(TileKey::new(0, g.segment, g.gof, morton), n, t);
                }
            }
        }
    }

    #[test]
    fn first_window_covers_eight_gofs() {
        let buf = test_buffer(1, false);
        let fetched = vec![(0..30).collect::<BTreeSet<u32>>()];
        let tiles = buf.tiles_in_window(0.0, &fetched).unwrap();
        let mut gofs: Vec<(u32, u32)> = tiles.iter().map(|t| (t.key.segment, t.key.gof)).collect();
        gofs.dedup();
        // One second of media at 4-frame GOFs and 30 fps.
        assert_eq!(gofs.len(), 8);
        assert!(gofs.iter().all(|&(s, _)| s == 0));
    }

    #[test]
    fn missing_index_is_reported() {
        let buf = test_buffer(1, false);
        let fetched = vec![BTreeSet::new()];
        assert!(matches!(
            buf.tiles_in_window(0.0, &fetched),
            Err(Error::MissingIndex { .. })
        ));
    }

    #[test]
    fn nothing_releases_at_t0() {
        let mut buf = test_buffer(1, false);
        fill_gofs(&mut buf, 2.0, 1, 0.0);
        buf.advance_to(0.0);
        assert!(buf.played_log.is_empty());
    }

    #[test]
    fn releases_cross_the_trailing_edge_in_order() {
        let mut buf = test_buffer(1, false);
        fill_gofs(&mut buf, 3.0, 2, 0.0);
        buf.advance_to(1.0);
        assert!(!buf.played_log.is_empty());
        // 1 second of playback passes 7 GOF starts (the 8th sits at 14/15 s
        // and its deadline triggers strictly after its start time).
        let released: Vec<f64> = buf.played_log.iter().map(|p| p.media_u).collect();
        assert!(released.windows(2).all(|w| w[1] >= w[0]));
        assert!(released.last().unwrap() < &1.0);
        assert!(buf.played_log.iter().all(|p| p.n == 2));
        assert_eq!(buf.stall_count, 0);
    }

    #[test]
    fn empty_gof_at_deadline_stalls_until_data() {
        let mut buf = test_buffer(0, false);
        // Only the first half second is buffered.
        fill_gofs(&mut buf, 0.5, 1, 0.0);
        buf.advance_to(2.0);
        assert!(buf.is_stalled());
        assert_eq!(buf.stall_count, 1);
        // Data for the blocking GOF arrives at t = 2.5.
        let gofs = buf.contents[0].gofs.clone();
        let blocking = gofs.iter().find(|g| g.start_s >= 0.5).unwrap();
        for &(morton, _) in &blocking.tiles {
            buf.insert(TileKey::new(0, blocking.segment, blocking.gof, morton), 1, 2.5);
        }
        buf.on_data(2.5);
        assert!(!buf.is_stalled());
        assert!(buf.stall_seconds > 0.0);
        // The trailing edge was frozen for the stall duration.
        let trail = buf.state.w_trail(2.5, 0);
        assert!(trail < 1.0);
    }

    #[test]
    fn released_n_never_decreases_per_tile_and_entries_leave() {
        let mut buf = test_buffer(1, false);
        fill_gofs(&mut buf, 2.0, 1, 0.0);
        // Upgrade one tile, then make sure a later lower insert is ignored.
        let g0 = buf.contents[0].gofs[0].clone();
        let key = TileKey::new(0, g0.segment, g0.gof, g0.tiles[0].0);
        buf.insert(key, 3, 0.1);
        buf.insert(key, 2, 0.2);
        assert_eq!(buf.entry_n(&key), 3);
        buf.advance_to(0.5);
        assert!(buf.played_log.iter().any(|p| p.key == key && p.n == 3));
        // Released entries leave the store when not looping.
        assert_eq!(buf.entry_n(&key), 0);
    }

    #[test]
    fn looping_retains_entries_across_passes() {
        let mut buf = test_buffer_clipped(0, true, 2.0);
        fill_gofs(&mut buf, 2.0, 1, 0.0);
        buf.advance_to(3.5);
        assert_eq!(buf.stall_count, 0);
        let max_pass = buf.played_log.iter().map(|p| p.pass).max().unwrap();
        assert!(max_pass >= 1, "playback wrapped into a second pass");
        // Second-pass releases reuse the first pass's buffered tiles.
        assert!(buf
            .played_log
            .iter()
            .filter(|p| p.pass == 1)
            .all(|p| p.n == 1));
    }

    #[test]
    fn occupancy_tracks_the_contiguous_received_span() {
        let mut buf = test_buffer(1, false);
        assert_eq!(buf.occupancy(0.0, 0), 0.0);
        fill_gofs(&mut buf, 1.0, 1, 0.0);
        let occ = buf.occupancy(0.0, 0);
        assert!((occ - 1.0).abs() < 1e-9, "startup fill reads {occ}");
        // A hole at the head empties the measure once the trail passes it.
        fill_gofs(&mut buf, 10.0, 1, 0.0);
        let g = buf.contents[0].gofs[40].clone();
        let hole = TileKey::new(0, g.segment, g.gof, g.tiles[0].0);
        buf.entries.remove(&hole);
        let occ_at_hole_start = (g.start_s - buf.state.w_trail(0.0, 0)).min(buf.state.delta_w(0.0));
        assert!((buf.occupancy(0.0, 0) - occ_at_hole_start).abs() < 1e-9);
    }

    #[test]
    fn occupancy_saturates_at_the_window_cap() {
        let mut buf = test_buffer(1, false);
        fill_gofs(&mut buf, 30.0, 1, 0.0);
        buf.advance_to(10.0);
        let occ = buf.occupancy(10.0, 0);
        assert!((occ - 5.0).abs() < 0.2, "steady occupancy reads {occ}");
        assert!(occ <= buf.state.delta_w(10.0) + 1e-9);
    }
}
