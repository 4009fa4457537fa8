//! Scripted camera paths used by the experiments.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geom::Vec3;
use crate::view_geometry::{
    parse_viewpoint_trace, sample_trace, Display, Frustum, TraceRow, Viewpoint,
};

/// Camera script selected by a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CameraSpec {
    /// Fixed position on the +x axis looking at the scene center.
    Static {
        #[serde(default = "default_static_distance")]
        distance_m: f64,
    },
    /// Zoom in and out along the +x axis: distance runs from `d0_m` down
    /// to `d1_m` and back over one period.
    Path1 {
        #[serde(default = "default_d0")]
        d0_m: f64,
        #[serde(default = "default_d1")]
        d1_m: f64,
        #[serde(default = "default_period")]
        period_s: f64,
    },
    /// Circular orbit around the scene center.
    Path2 {
        #[serde(default = "default_orbit_radius")]
        radius_m: f64,
        #[serde(default = "default_period")]
        period_s: f64,
    },
    /// Static view that jumps to the diametrically opposite side at
    /// `flip_at_s` seconds of playback.
    Flip {
        #[serde(default = "default_static_distance")]
        distance_m: f64,
        flip_at_s: f64,
    },
    /// Pan from the scene center across an arc of objects.
    Sweep {
        #[serde(default = "default_sweep_half_angle")]
        half_angle_deg: f64,
        #[serde(default = "default_period")]
        period_s: f64,
    },
    /// Timestamped viewpoint rows from a CSV file.
    Trace { path: String },
}

fn default_static_distance() -> f64 {
    2.0
}
fn default_d0() -> f64 {
    5.0
}
fn default_d1() -> f64 {
    0.5
}
fn default_period() -> f64 {
    20.0
}
fn default_orbit_radius() -> f64 {
    2.0
}
fn default_sweep_half_angle() -> f64 {
    80.0
}

impl Default for CameraSpec {
    fn default() -> Self {
        CameraSpec::Static {
            distance_m: default_static_distance(),
        }
    }
}

/// Display and frustum parameters shared by all scripted cameras.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    pub horz_fov_rad: f64,
    pub aspect: f64,
    pub horz_pixels: f64,
    pub near_m: f64,
    pub far_m: f64,
}

impl Default for CameraParams {
    fn default() -> Self {
        let f = Frustum::default();
        CameraParams {
            horz_fov_rad: f.horz_fov,
            aspect: f.aspect,
            horz_pixels: Display::default().horz_pixels,
            near_m: f.near,
            far_m: f.far,
        }
    }
}

/// A camera script bound to a scene center, sampleable at playback time.
#[derive(Debug, Clone)]
pub struct Camera {
    spec: CameraSpec,
    params: CameraParams,
    center: Vec3,
    trace: Option<Vec<TraceRow>>,
}

impl Camera {
    pub fn new(spec: CameraSpec, params: CameraParams, center: Vec3) -> Result<Self> {
        let trace = match &spec {
            CameraSpec::Trace { path } => {
                let text = std::fs::read_to_string(path)?;
                Some(parse_viewpoint_trace(&text)?)
            }
            _ => None,
        };
        Ok(Camera {
            spec,
            params,
            center,
            trace,
        })
    }

    /// The instant the view jumps, if this script has one.
    pub fn flip_time(&self) -> Option<f64> {
        match self.spec {
            CameraSpec::Flip { flip_at_s, .. } => Some(flip_at_s),
            _ => None,
        }
    }

    fn finish(&self, position: Vec3) -> Viewpoint {
        let mut v = Viewpoint::look_at(position, self.center, Vec3::new(0.0, 1.0, 0.0));
        v.frustum = Frustum {
            horz_fov: self.params.horz_fov_rad,
            aspect: self.params.aspect,
            near: self.params.near_m,
            far: self.params.far_m,
        };
        v.display = Display {
            horz_pixels: self.params.horz_pixels,
        };
        v
    }

    /// Viewpoint at `t` seconds of playback.
    pub fn at(&self, t: f64) -> Viewpoint {
        match &self.spec {
            CameraSpec::Static { distance_m } => {
                self.finish(self.center + Vec3::new(*distance_m, 0.0, 0.0))
            }
            CameraSpec::Path1 {
                d0_m,
                d1_m,
                period_s,
            } => {
                // Triangle wave between the two endpoints.
                let phase = (t / period_s).rem_euclid(1.0);
                let frac = if phase < 0.5 {
                    phase * 2.0
                } else {
                    2.0 - phase * 2.0
                };
                let d = d0_m + (d1_m - d0_m) * frac;
                self.finish(self.center + Vec3::new(d, 0.0, 0.0))
            }
            CameraSpec::Path2 { radius_m, period_s } => {
                let ang = 2.0 * std::f64::consts::PI * t / period_s;
                let p = Vec3::new(radius_m * ang.cos(), 0.0, radius_m * ang.sin());
                self.finish(self.center + p)
            }
            CameraSpec::Flip {
                distance_m,
                flip_at_s,
            } => {
                let side = if t >= *flip_at_s { -1.0 } else { 1.0 };
                self.finish(self.center + Vec3::new(side * distance_m, 0.0, 0.0))
            }
            CameraSpec::Sweep {
                half_angle_deg,
                period_s,
            } => {
                // The camera sits at the scene center and pans; triangle
                // sweep across [-half, +half].
                let half = half_angle_deg.to_radians();
                let phase = (t / period_s).rem_euclid(1.0);
                let frac = if phase < 0.5 {
                    phase * 2.0
                } else {
                    2.0 - phase * 2.0
                };
                let yaw = -half + 2.0 * half * frac;
                let forward = Vec3::new(yaw.cos(), 0.0, yaw.sin());
                let mut v = Viewpoint::look_at(self.center, self.center + forward, Vec3::new(0.0, 1.0, 0.0));
                v.frustum = Frustum {
                    horz_fov: self.params.horz_fov_rad,
                    aspect: self.params.aspect,
                    near: self.params.near_m,
                    far: self.params.far_m,
                };
                v.display = Display {
                    horz_pixels: self.params.horz_pixels,
                };
                v
            }
            CameraSpec::Trace { .. } => {
                let rows = self.trace.as_ref().expect("trace loaded at construction");
                sample_trace(rows, t)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(spec: CameraSpec) -> Camera {
        Camera::new(spec, CameraParams::default(), Vec3::ZERO).unwrap()
    }

    #[test]
    fn path1_hits_its_endpoints_and_repeats() {
        let c = cam(CameraSpec::Path1 {
            d0_m: 5.0,
            d1_m: 0.5,
            period_s: 20.0,
        });
        assert!((c.at(0.0).position.norm() - 5.0).abs() < 1e-12);
        assert!((c.at(10.0).position.norm() - 0.5).abs() < 1e-12);
        assert!((c.at(20.0).position.norm() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn path2_orbits_at_fixed_radius() {
        let c = cam(CameraSpec::Path2 {
            radius_m: 2.0,
            period_s: 20.0,
        });
        for t in [0.0, 3.7, 11.2, 19.9] {
            assert!((c.at(t).position.norm() - 2.0).abs() < 1e-12);
        }
        let full = c.at(20.0);
        let start = c.at(0.0);
        assert!((full.position - start.position).norm() < 1e-9);
        // Doubling the angular speed halves the revolution period.
        let fast = cam(CameraSpec::Path2 {
            radius_m: 2.0,
            period_s: 10.0,
        });
        assert!((fast.at(10.0).position - start.position).norm() < 1e-9);
    }

    #[test]
    fn flip_mirrors_the_position() {
        let c = cam(CameraSpec::Flip {
            distance_m: 2.0,
            flip_at_s: 10.0,
        });
        assert!(c.at(9.99).position.x > 0.0);
        assert!(c.at(10.0).position.x < 0.0);
        // Forward flips too: still looking at the center.
        assert!(c.at(10.0).forward.x > 0.0);
    }

    #[test]
    fn orbit_looks_at_the_center() {
        let c = cam(CameraSpec::Path2 {
            radius_m: 2.0,
            period_s: 20.0,
        });
        for t in [0.0, 2.5, 7.0] {
            let v = c.at(t);
            let to_center = (Vec3::ZERO - v.position).normalized();
            assert!((to_center - v.forward).norm() < 1e-9);
        }
    }
}
