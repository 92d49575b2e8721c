//! Downlink simulator for a cooperating group of LEO satellites assisted by a
//! reconfigurable surface carried on a UAV.
//!
//! The crate builds statistical channel state from constellation geometry,
//! evaluates the closed-form approximate ergodic rate (with a Monte-Carlo
//! check), and maximizes the minimum user rate by alternating between
//! satellite beamforming, surface phase shifts and the UAV position.
//!
//! Module map:
//!
//! * [`geometry`]: Walker-Delta constellation, propagation, visibility, angles, scheduling
//! * [`channel`]: array responses, link budget, statistical CSI, channel sampling
//! * [`rate`]: approximate SINR/rate and Monte-Carlo ergodic rate
//! * [`conic`]: Hermitian SDP interior-point solver and eigen utilities
//! * [`beamforming`], [`phase`], [`trajectory`]: the three block updates
//! * [`ao`]: per-slot alternating optimization and the frame loop
//! * [`harness`]: scenario config, experiment presets, CSV/JSON output

pub mod ao;
pub mod beamforming;
pub mod channel;
pub mod conic;
pub mod geometry;
pub mod harness;
pub mod phase;
pub mod rate;
pub mod synthetic;
pub mod trajectory;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
