//! Per-frame combination of the movement and ROI detectors.
//!
//! A frame is positive when either detector reports a human; only when both
//! are negative is the verdict negative. The movement detector's
//! indeterminate first frame counts as "no movement".

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::ThermalFrame;
use crate::motion::{MotionConfig, MotionResult, MotionState};
use crate::roi::{roi_analyze, RoiConfig, RoiResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CombineMode {
    /// Both detectors run on every frame and their verdicts are ORed.
    #[default]
    ParallelOr,
    /// ROI first; the movement verdict is consulted only when no quadrant
    /// is flagged. The movement detector still sees every frame so its
    /// background stays current.
    SequentialBThenA,
}

impl fmt::Display for CombineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CombineMode::ParallelOr => "parallel",
            CombineMode::SequentialBThenA => "sequential",
        })
    }
}

impl FromStr for CombineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "parallel" | "parallel-or" | "parallelor" => Ok(CombineMode::ParallelOr),
            "sequential" | "sequential-b-then-a" | "sequentialbthena" => Ok(CombineMode::SequentialBThenA),
            other => Err(Error::Config(format!("unknown combine mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame_index: u64,
    pub motion: Option<MotionResult>,
    pub roi: Option<RoiResult>,
    pub verdict: bool,
    pub mode: CombineMode,
    /// Processing wall time, rounded up to whole microseconds (never 0).
    pub elapsed_us: u64,
}

impl Detection {
    pub fn movement(&self) -> bool {
        self.motion.is_some_and(|m| m.movement)
    }

    pub fn roi_any(&self) -> bool {
        self.roi.is_some_and(|r| r.any)
    }
}

pub fn hybrid_step(
    motion_state: &mut MotionState,
    frame: &ThermalFrame,
    roi_config: &RoiConfig,
    mode: CombineMode,
) -> Result<Detection> {
    let start = Instant::now();
    let roi = roi_analyze(frame, roi_config)?;
    let motion = motion_state.step(frame)?;
    let (motion, verdict) = match mode {
        CombineMode::ParallelOr => (Some(motion), roi.any || motion.movement),
        CombineMode::SequentialBThenA if roi.any => (None, true),
        CombineMode::SequentialBThenA => (Some(motion), motion.movement),
    };
    let elapsed_us = micros_ceil(start.elapsed().as_nanos());
    Ok(Detection {
        frame_index: frame.frame_index(),
        motion,
        roi: Some(roi),
        verdict,
        mode,
        elapsed_us,
    })
}

pub(crate) fn micros_ceil(nanos: u128) -> u64 {
    (nanos.div_ceil(1000).max(1)).min(u128::from(u64::MAX)) as u64
}

/// One stream's worth of detector state.
#[derive(Debug, Clone)]
pub struct HybridPipeline {
    motion: MotionState,
    roi_config: RoiConfig,
    mode: CombineMode,
}

impl HybridPipeline {
    pub fn new(motion_config: MotionConfig, roi_config: RoiConfig, mode: CombineMode) -> Result<Self> {
        roi_config.validate()?;
        Ok(Self {
            motion: MotionState::new(motion_config)?,
            roi_config,
            mode,
        })
    }

    pub fn step(&mut self, frame: &ThermalFrame) -> Result<Detection> {
        hybrid_step(&mut self.motion, frame, &self.roi_config, self.mode)
    }

    pub fn motion_state(&self) -> &MotionState {
        &self.motion
    }

    pub fn mode(&self) -> CombineMode {
        self.mode
    }
}
