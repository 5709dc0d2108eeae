//! Movement detection by background subtraction.
//!
//! The first frame of a stream becomes the reference background. Each later
//! frame is differenced against it; a pixel is *active* when its absolute
//! difference reaches `active_pixel_delta`, and movement is declared when at
//! least `active_fraction` of all pixels are active. Frames without movement
//! replace the background, which tracks slow ambient drift. Movement frames
//! leave it untouched so a moving body is not absorbed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::ThermalFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    /// Minimum per-pixel absolute difference, in sensor counts.
    pub active_pixel_delta: u16,
    /// Fraction of the frame's pixels that must be active, in (0, 1].
    pub active_fraction: f64,
    /// Force a background refresh after this many consecutive movement
    /// frames. `None` holds the background indefinitely.
    pub max_hold_frames: Option<u32>,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            active_pixel_delta: 20,
            active_fraction: 0.05,
            max_hold_frames: None,
        }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.active_pixel_delta < 1 {
            return Err(Error::Config("active_pixel_delta must be at least 1".into()));
        }
        if !(self.active_fraction > 0.0 && self.active_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "active_fraction must be in (0, 1], got {}",
                self.active_fraction
            )));
        }
        if self.max_hold_frames == Some(0) {
            return Err(Error::Config("max_hold_frames must be positive when enabled".into()));
        }
        Ok(())
    }

    /// Smallest active-pixel count that counts as movement on a frame of
    /// `pixel_count` pixels: `ceil(active_fraction * pixel_count)`.
    pub fn required_count(&self, pixel_count: usize) -> usize {
        let exact = self.active_fraction * pixel_count as f64;
        let nearest = exact.round();
        // Products such as 0.07 * 100 land a hair above the integer they
        // denote; ceil() would then demand one pixel too many.
        if (exact - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as usize
        } else {
            exact.ceil() as usize
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotionResult {
    pub movement: bool,
    pub active_count: usize,
    pub required_count: usize,
    pub background_updated: bool,
    /// Set only on the first frame of a stream, which has no reference.
    pub indeterminate: bool,
    /// The background was replaced because `max_hold_frames` ran out.
    pub forced_refresh: bool,
}

#[derive(Debug, Clone)]
pub struct MotionState {
    background: Option<ThermalFrame>,
    config: MotionConfig,
    frames_since_update: u32,
}

impl MotionState {
    pub fn new(config: MotionConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            background: None,
            config,
            frames_since_update: 0,
        })
    }

    pub fn config(&self) -> &MotionConfig {
        &self.config
    }

    pub fn background(&self) -> Option<&ThermalFrame> {
        self.background.as_ref()
    }

    pub fn frames_since_update(&self) -> u32 {
        self.frames_since_update
    }

    pub fn step(&mut self, frame: &ThermalFrame) -> Result<MotionResult> {
        let Some(background) = &self.background else {
            self.replace_background(frame);
            return Ok(MotionResult {
                movement: false,
                active_count: 0,
                required_count: self.config.required_count(frame.len()),
                background_updated: true,
                indeterminate: true,
                forced_refresh: false,
            });
        };
        frame.check_dims(background)?;

        let delta = self.config.active_pixel_delta;
        let active_count = frame
            .pixels()
            .iter()
            .zip(background.pixels())
            .filter(|(&p, &b)| p.abs_diff(b) >= delta)
            .count();
        let required_count = self.config.required_count(frame.len());
        let movement = active_count >= required_count;

        let mut forced_refresh = false;
        let background_updated = if movement {
            self.frames_since_update += 1;
            match self.config.max_hold_frames {
                Some(limit) if self.frames_since_update > limit => {
                    forced_refresh = true;
                    self.replace_background(frame);
                    true
                }
                _ => false,
            }
        } else {
            self.replace_background(frame);
            true
        };

        Ok(MotionResult {
            movement,
            active_count,
            required_count,
            background_updated,
            indeterminate: false,
            forced_refresh,
        })
    }

    fn replace_background(&mut self, frame: &ThermalFrame) {
        self.background = Some(frame.clone());
        self.frames_since_update = 0;
    }
}

pub fn motion_init(config: MotionConfig) -> Result<MotionState> {
    MotionState::new(config)
}

pub fn motion_step(state: &mut MotionState, frame: &ThermalFrame) -> Result<MotionResult> {
    state.step(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform(v: u16) -> ThermalFrame {
        ThermalFrame::filled(160, 120, v).unwrap()
    }

    /// Frame equal to `base` except the first `n` pixels raised by `by`.
    fn with_active(base: u16, n: usize, by: u16) -> ThermalFrame {
        let mut px = vec![base; 19200];
        for p in px.iter_mut().take(n) {
            *p += by;
        }
        ThermalFrame::new(160, 120, px).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(motion_init(MotionConfig::default()).is_ok());
        for bad in [0.0, -0.1, 1.5, f64::NAN] {
            let c = MotionConfig { active_fraction: bad, ..Default::default() };
            assert!(motion_init(c).is_err(), "{bad}");
        }
        let c = MotionConfig { active_pixel_delta: 0, ..Default::default() };
        assert!(motion_init(c).is_err());
        let c = MotionConfig { max_hold_frames: Some(0), ..Default::default() };
        assert!(motion_init(c).is_err());
    }

    #[test]
    fn required_count_is_ceiling() {
        let c = MotionConfig::default();
        assert_eq!(c.required_count(19200), 960);
        assert_eq!(c.required_count(16), 1); // 0.8 -> 1
        assert_eq!(c.required_count(100), 5);
        let c = MotionConfig { active_fraction: 0.07, ..Default::default() };
        assert_eq!(c.required_count(100), 7);
        let c = MotionConfig { active_fraction: 1.0, ..Default::default() };
        assert_eq!(c.required_count(19200), 19200);
    }

    #[test]
    fn first_frame_is_indeterminate() {
        let mut s = motion_init(MotionConfig::default()).unwrap();
        let r = s.step(&uniform(100)).unwrap();
        assert!(r.indeterminate && !r.movement && r.background_updated);
        assert_eq!(s.background(), Some(&uniform(100)));
    }

    #[test]
    fn identical_frame_replaces_background() {
        let mut s = motion_init(MotionConfig::default()).unwrap();
        s.step(&uniform(100)).unwrap();
        let f = uniform(100).with_index(1);
        let r = s.step(&f).unwrap();
        assert_eq!(r.active_count, 0);
        assert!(!r.movement && r.background_updated && !r.indeterminate);
        assert_eq!(s.background().unwrap().frame_index(), 1);
    }

    #[test]
    fn boundary_at_960_active_pixels() {
        for (n, expected) in [(960, true), (959, false)] {
            let mut s = motion_init(MotionConfig::default()).unwrap();
            s.step(&uniform(1000)).unwrap();
            let frame = with_active(1000, n, 20);
            let oracle = frame.pixels().iter().filter(|&&p| p >= 1020).count();
            assert_eq!(oracle, n);
            let r = s.step(&frame).unwrap();
            assert_eq!(r.active_count, n);
            assert_eq!(r.required_count, 960);
            assert_eq!(r.movement, expected);
            assert_eq!(r.background_updated, !expected);
        }
    }

    #[test]
    fn delta_is_inclusive() {
        let mut s = motion_init(MotionConfig::default()).unwrap();
        s.step(&uniform(1000)).unwrap();
        assert_eq!(s.step(&with_active(1000, 2000, 19)).unwrap().active_count, 0);
        let mut s = motion_init(MotionConfig::default()).unwrap();
        s.step(&uniform(1000)).unwrap();
        assert_eq!(s.step(&with_active(1000, 2000, 20)).unwrap().active_count, 2000);
    }

    #[test]
    fn movement_keeps_background() {
        let mut s = motion_init(MotionConfig::default()).unwrap();
        s.step(&uniform(1000)).unwrap();
        for i in 1..5 {
            let r = s.step(&with_active(1000, 5000, 100).with_index(i)).unwrap();
            assert!(r.movement && !r.background_updated);
        }
        assert_eq!(s.background().unwrap().frame_index(), 0);
        assert_eq!(s.frames_since_update(), 4);
    }

    #[test]
    fn forced_refresh_after_hold_limit() {
        let c = MotionConfig { max_hold_frames: Some(3), ..Default::default() };
        let mut s = motion_init(c).unwrap();
        s.step(&uniform(1000)).unwrap();
        let hot = with_active(1000, 5000, 100);
        for _ in 0..3 {
            let r = s.step(&hot).unwrap();
            assert!(r.movement && !r.forced_refresh && !r.background_updated);
        }
        let r = s.step(&hot).unwrap();
        assert!(r.movement && r.forced_refresh && r.background_updated);
        assert_eq!(s.frames_since_update(), 0);
        // Rearranged scene is now the reference.
        assert!(!s.step(&hot).unwrap().movement);
    }

    #[test]
    fn dimension_change_is_an_error() {
        let mut s = motion_init(MotionConfig::default()).unwrap();
        s.step(&uniform(1)).unwrap();
        let small = ThermalFrame::filled(80, 60, 1).unwrap();
        assert!(matches!(s.step(&small), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn uniform_drift_below_delta_never_triggers() {
        // Scalar oracle: with a refresh every frame, each diff is one step of drift.
        let mut s = motion_init(MotionConfig::default()).unwrap();
        for t in 0..200u16 {
            let r = s.step(&uniform(1000 + 5 * t)).unwrap();
            assert!(!r.movement);
            if t > 0 {
                assert_eq!(r.active_count, 0);
            }
        }
    }

    fn small_frame(px: Vec<u16>) -> ThermalFrame {
        ThermalFrame::new(8, 6, px).unwrap()
    }

    proptest! {
        #[test]
        fn static_sequence_never_moves(px in proptest::collection::vec(any::<u16>(), 48), n in 2usize..20) {
            let f = small_frame(px);
            let mut s = motion_init(MotionConfig::default()).unwrap();
            for _ in 0..n {
                prop_assert!(!s.step(&f).unwrap().movement);
            }
        }

        #[test]
        fn background_is_fresh_after_non_movement(
            frames in proptest::collection::vec(proptest::collection::vec(0u16..200, 48), 2..12),
        ) {
            let mut s = motion_init(MotionConfig::default()).unwrap();
            let mut s2 = motion_init(MotionConfig::default()).unwrap();
            for (i, px) in frames.into_iter().enumerate() {
                let f = small_frame(px).with_index(i as u64);
                let r = s.step(&f).unwrap();
                prop_assert_eq!(r, s2.step(&f).unwrap());
                prop_assert_eq!(r.movement, !r.indeterminate && r.active_count >= r.required_count);
                if !r.movement {
                    prop_assert_eq!(s.background().unwrap(), &f);
                }
            }
        }

        #[test]
        fn thresholds_are_monotone(
            bg in proptest::collection::vec(0u16..300, 48),
            fr in proptest::collection::vec(0u16..300, 48),
            d1 in 1u16..100, d2 in 1u16..100,
            f1 in 0.01f64..1.0, f2 in 0.01f64..1.0,
        ) {
            let run = |delta: u16, fraction: f64| {
                let mut s = motion_init(MotionConfig {
                    active_pixel_delta: delta,
                    active_fraction: fraction,
                    max_hold_frames: None,
                }).unwrap();
                s.step(&small_frame(bg.clone())).unwrap();
                s.step(&small_frame(fr.clone())).unwrap()
            };
            let (lo, hi) = (d1.min(d2), d1.max(d2));
            prop_assert!(run(hi, 0.05).active_count <= run(lo, 0.05).active_count);
            let (flo, fhi) = (f1.min(f2), f1.max(f2));
            if !run(20, flo).movement {
                prop_assert!(!run(20, fhi).movement);
            }
        }
    }
}
