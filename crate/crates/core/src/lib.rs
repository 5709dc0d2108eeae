//! Human-presence detection for low-resolution thermal frames.
//!
//! Two lightweight detectors run per frame: a background-subtraction
//! movement detector ([`motion`]) and a quadrant region-of-interest detector
//! ([`roi`]). [`hybrid`] ORs their verdicts, [`zones`] turns quadrant
//! occupancy into Run/Slow/Stop safety states, [`eval`] scores detectors
//! against labeled datasets and [`synth`] generates such datasets.

pub mod bench;
pub mod cli;
pub mod error;
pub mod eval;
pub mod frame;
pub mod hybrid;
pub mod motion;
pub mod pgm;
pub mod roi;
pub mod synth;
pub mod zones;

pub use error::{Error, Result};
pub use frame::{abs_diff, frame_mean, split_quadrants, FrameStats, QuadrantId, Rect, ThermalFrame};
pub use hybrid::{hybrid_step, CombineMode, Detection, HybridPipeline};
pub use motion::{motion_init, motion_step, MotionConfig, MotionResult, MotionState};
pub use pgm::{load_pgm, write_pgm};
pub use roi::{roi_analyze, RoiConfig, RoiResult};
pub use zones::{parse_zone_config, zone_update, SafetyState, ZoneClass, ZoneConfig, ZoneEvent, ZoneEventKind, ZoneState};
