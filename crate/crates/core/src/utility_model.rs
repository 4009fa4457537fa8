//! Expected per-tile utility: a logarithmic quality term per
//! distinguishable voxel, weighted by the best view's level of detail and
//! the probability the tile will still be visible when played.

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::media_model::ObjectManifest;
use crate::view_geometry::{distinguishable_voxels, is_visible, Viewpoint};
use serde::{Deserialize, Serialize};

/// Normalization of the log-utility curve over one object's ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityCoeffs {
    pub alpha: f64,
    /// 1 / (bits/second).
    pub beta: f64,
}

/// Normalize so the lowest rung maps to `alpha` (> 0) and the top rung
/// maps to exactly 1: beta = e/B_1, alpha = 1/(1 + ln(B_M/B_1)).
pub fn normalize_coeffs(ladder: &[f64]) -> UtilityCoeffs {
    assert!(!ladder.is_empty(), "ladder must be non-empty");
    let b1 = ladder[0];
    let bm = *ladder.last().unwrap();
    assert!(b1 > 0.0 && bm >= b1, "ladder must be positive and ascending");
    UtilityCoeffs {
        alpha: 1.0 / (1.0 + (bm / b1).ln()),
        beta: std::f64::consts::E / b1,
    }
}

/// Utility per distinguishable voxel of a representation with bandwidth
/// `b`: 0 at b = 0, else alpha * ln(beta * b), clamped at 0 from below.
pub fn u(b: f64, coeffs: &UtilityCoeffs) -> f64 {
    if b <= 0.0 {
        return 0.0;
    }
    let v = coeffs.alpha * (coeffs.beta * b).ln();
    if v < 0.0 {
        log::warn!("utility clamped to 0 for bandwidth {b} below the ladder floor");
        0.0
    } else {
        v
    }
}

/// How the prediction-error ramp is normalized across the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PErrDenominator {
    /// Divide by the instantaneous window span.
    InstantaneousWindow,
    /// Divide by a fixed number of user seconds.
    FixedSeconds(f64),
}

/// View-prediction error model: a linear ramp from `p_err_min` at the
/// trailing edge to `p_err_min + p_err_slope` at the leading edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub p_err_min: f64,
    pub p_err_slope: f64,
    #[serde(default = "default_denominator")]
    pub denominator: PErrDenominator,
}

fn default_denominator() -> PErrDenominator {
    PErrDenominator::InstantaneousWindow
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            p_err_min: 0.1,
            p_err_slope: 0.3,
            denominator: PErrDenominator::InstantaneousWindow,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_err_min < 0.0 || self.p_err_min + self.p_err_slope > 0.5 {
            return Err(Error::Validation(format!(
                "predictor constants out of range: min {} slope {}",
                self.p_err_min, self.p_err_slope
            )));
        }
        Ok(())
    }
}

/// One object's window edges at a fixed user time, in media seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowView {
    pub trail: f64,
    pub lead: f64,
    /// Media seconds per user second.
    pub speed: f64,
}

/// Probability the current-visibility prediction is wrong by the time the
/// tile at media time `tau` plays; distance is measured from the trailing
/// edge of the window.
pub fn p_err(tau: f64, window: &WindowView, cfg: &PredictorConfig) -> Result<f64> {
    if tau < window.trail - 1e-9 || tau > window.lead + 1e-9 {
        return Err(Error::Domain(format!(
            "media time {tau} outside window [{}, {}]",
            window.trail, window.lead
        )));
    }
    let denom = match cfg.denominator {
        PErrDenominator::InstantaneousWindow => window.lead - window.trail,
        PErrDenominator::FixedSeconds(s) => window.speed * s,
    };
    let frac = if denom <= 0.0 {
        1.0
    } else {
        ((tau - window.trail) / denom).min(1.0)
    };
    Ok(cfg.p_err_min + cfg.p_err_slope * frac)
}

/// Probability the tile is visible at playback given current visibility.
pub fn p_visible(currently_visible: bool, p_err: f64) -> f64 {
    if currently_visible {
        1.0 - p_err
    } else {
        p_err
    }
}

/// Expected utility of representation `rep_idx` (1-based; 0 is the null
/// representation) for a tile at `tile_pos` with dominant normal
/// `normal_code` and media time `tau`.
#[allow(clippy::too_many_arguments)]
pub fn tile_utility(
    rep_idx: usize,
    manifest: &ObjectManifest,
    tile_pos: Vec3,
    normal_code: u32,
    views: &[Viewpoint],
    window: &WindowView,
    tau: f64,
    coeffs: &UtilityCoeffs,
    cfg: &PredictorConfig,
) -> Result<f64> {
    if views.is_empty() {
        return Err(Error::Domain("tile_utility requires at least one view".into()));
    }
    if rep_idx == 0 {
        return Ok(0.0);
    }
    let rep = &manifest.representations[rep_idx - 1];
    let pe = p_err(tau, window, cfg)?;
    let mut best = 0.0f64;
    for view in views {
        let info = distinguishable_voxels(rep, manifest, tile_pos, view);
        let p = p_visible(is_visible(tile_pos, normal_code, view), pe);
        best = best.max(info.lod * p);
    }
    Ok(u(rep.bandwidth, coeffs) * best)
}
