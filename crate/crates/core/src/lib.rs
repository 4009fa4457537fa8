//! Deterministic simulator and library for window-based, rate-utility
//! optimized streaming of tiled volumetric media.
//!
//! The crate models the full client side of a tiled streaming session:
//! media metadata and segment indexes ([`media_model`]), visibility and
//! level-of-detail geometry ([`view_geometry`]), the expected-utility model
//! ([`utility_model`]), the greedy rate-utility allocator
//! ([`rate_utility_optimizer`]), the window buffer ([`window_buffer`]), the
//! client buffer manager and its baseline selectors
//! ([`client_buffer_manager`]), a seeded Poisson network model
//! ([`network_simulator`]) and the experiment driver ([`scenario_harness`]).

pub mod client_buffer_manager;
pub mod error;
pub mod geom;
pub mod media_model;
pub mod network_simulator;
pub mod rate_utility_optimizer;
pub mod scenario_harness;
pub mod utility_model;
pub mod view_geometry;
pub mod window_buffer;

pub use error::{Error, Result};
