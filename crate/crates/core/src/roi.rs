//! Quadrant region-of-interest detection.
//!
//! A frame is split into four equal quadrants; a quadrant is flagged when its
//! mean exceeds `ratio` times the whole-frame mean (strictly) and also
//! reaches `min_quadrant_mean`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{QuadrantId, ThermalFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiConfig {
    pub ratio: f64,
    pub min_quadrant_mean: f64,
}

impl Default for RoiConfig {
    fn default() -> Self {
        Self {
            ratio: 1.20,
            min_quadrant_mean: 1.0,
        }
    }
}

impl RoiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio >= 1.0) || !self.ratio.is_finite() {
            return Err(Error::Config(format!("roi ratio must be >= 1, got {}", self.ratio)));
        }
        if !(self.min_quadrant_mean >= 0.0) {
            return Err(Error::Config(format!(
                "min_quadrant_mean must be >= 0, got {}",
                self.min_quadrant_mean
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiResult {
    pub frame_mean: f64,
    /// Indexed by [`QuadrantId::index`].
    pub quadrant_means: [f64; 4],
    pub flags: [bool; 4],
    pub any: bool,
}

impl RoiResult {
    pub fn flagged(&self) -> impl Iterator<Item = QuadrantId> + '_ {
        QuadrantId::ALL.into_iter().filter(|q| self.flags[q.index()])
    }

    pub fn is_flagged(&self, q: QuadrantId) -> bool {
        self.flags[q.index()]
    }
}

pub fn roi_analyze(frame: &ThermalFrame, config: &RoiConfig) -> Result<RoiResult> {
    config.validate()?;
    let (w, h) = (frame.width(), frame.height());
    let (hw, hh) = (w / 2, h / 2);

    // Single pass: each row contributes its left and right halves.
    let mut sums = [0u64; 4];
    for (y, row) in frame.pixels().chunks_exact(w).enumerate() {
        let top = if y < hh { 0 } else { 2 };
        let (left, right) = row.split_at(hw);
        sums[top] += left.iter().map(|&p| u64::from(p)).sum::<u64>();
        sums[top + 1] += right.iter().map(|&p| u64::from(p)).sum::<u64>();
    }
    let total: u64 = sums.iter().sum();
    let frame_mean = total as f64 / frame.len() as f64;
    let quad_area = (hw * hh) as f64;
    let quadrant_means = sums.map(|s| s as f64 / quad_area);
    let threshold = config.ratio * frame_mean;
    let flags = quadrant_means.map(|m| m > threshold && m >= config.min_quadrant_mean);

    Ok(RoiResult {
        frame_mean,
        quadrant_means,
        flags,
        any: flags.iter().any(|&f| f),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{frame_mean, split_quadrants};
    use proptest::prelude::*;

    fn quad_frame(w: usize, h: usize, values: [u16; 4]) -> ThermalFrame {
        ThermalFrame::from_fn(w, h, |x, y| values[QuadrantId::containing(x as f64, y as f64, w, h).index()]).unwrap()
    }

    #[test]
    fn uniform_frame_flags_nothing() {
        let r = roi_analyze(&ThermalFrame::filled(160, 120, 100).unwrap(), &RoiConfig::default()).unwrap();
        assert_eq!(r.frame_mean, 100.0);
        assert_eq!(r.quadrant_means, [100.0; 4]);
        assert!(!r.any);
    }

    #[test]
    fn hand_example_flags_only_q0() {
        let r = roi_analyze(&quad_frame(4, 4, [200, 100, 100, 100]), &RoiConfig::default()).unwrap();
        assert_eq!(r.frame_mean, 125.0);
        assert_eq!(r.quadrant_means, [200.0, 100.0, 100.0, 100.0]);
        assert_eq!(r.flags, [true, false, false, false]);
        assert!(r.any);
        assert_eq!(r.flagged().collect::<Vec<_>>(), vec![QuadrantId::Q0]);
    }

    #[test]
    fn all_zero_frame_is_negative() {
        let r = roi_analyze(&ThermalFrame::filled(4, 4, 0).unwrap(), &RoiConfig::default()).unwrap();
        assert_eq!(r.frame_mean, 0.0);
        assert!(!r.any);
        // Even with ratio 1 the guard keeps it negative.
        let c = RoiConfig { ratio: 1.0, min_quadrant_mean: 1.0 };
        assert!(!roi_analyze(&ThermalFrame::filled(4, 4, 0).unwrap(), &c).unwrap().any);
    }

    #[test]
    fn exact_ratio_is_not_flagged() {
        // Q0 = 1.2 * frame mean exactly: q0 = 6k, others = 4k gives mean 4.5k, 1.2*4.5k = 5.4k.
        // Choose q0 = 135, others = 105 -> mean 112.5, 1.2*112.5 = 135.
        let c = RoiConfig::default();
        let r = roi_analyze(&quad_frame(4, 4, [135, 105, 105, 105]), &c).unwrap();
        assert_eq!(r.frame_mean, 112.5);
        assert_eq!(r.quadrant_means[0], c.ratio * r.frame_mean);
        assert!(!r.flags[0]);
        let r = roi_analyze(&quad_frame(4, 4, [136, 105, 105, 105]), &c).unwrap();
        assert!(r.flags[0]);
    }

    #[test]
    fn min_quadrant_mean_guard() {
        let c = RoiConfig { ratio: 1.2, min_quadrant_mean: 50.0 };
        let r = roi_analyze(&quad_frame(4, 4, [40, 1, 1, 1]), &c).unwrap();
        assert!(!r.any);
        let r = roi_analyze(&quad_frame(4, 4, [60, 1, 1, 1]), &c).unwrap();
        assert!(r.flags[0]);
    }

    #[test]
    fn config_validation() {
        let frame = ThermalFrame::filled(4, 4, 0).unwrap();
        assert!(roi_analyze(&frame, &RoiConfig { ratio: 0.9, ..Default::default() }).is_err());
        assert!(roi_analyze(&frame, &RoiConfig { min_quadrant_mean: -1.0, ..Default::default() }).is_err());
        assert!(roi_analyze(&frame, &RoiConfig { ratio: f64::NAN, ..Default::default() }).is_err());
    }

    proptest! {
        #[test]
        fn matches_rect_based_means(px in proptest::collection::vec(0u16..1000, 8 * 6), ratio in 1.0f64..2.0) {
            let f = ThermalFrame::new(8, 6, px).unwrap();
            let c = RoiConfig { ratio, min_quadrant_mean: 1.0 };
            let r = roi_analyze(&f, &c).unwrap();
            prop_assert!((r.frame_mean - frame_mean(&f)).abs() < 1e-9);
            for (q, rect) in split_quadrants(&f) {
                let m = f.region_mean(rect);
                prop_assert!((r.quadrant_means[q.index()] - m).abs() < 1e-9);
                prop_assert_eq!(r.flags[q.index()], m > ratio * r.frame_mean && m >= 1.0);
            }
            prop_assert_eq!(r.any, r.flags.iter().any(|&b| b));
            prop_assert_eq!(r, roi_analyze(&f, &c).unwrap());
        }

        #[test]
        fn equal_quadrants_never_flag(v in any::<[u16; 4]>(), ratio in 1.0001f64..3.0) {
            let f = quad_frame(6, 4, [v[0]; 4]);
            let c = RoiConfig { ratio, min_quadrant_mean: 0.0 };
            prop_assert!(!roi_analyze(&f, &c).unwrap().any);
        }

        #[test]
        fn flags_are_scale_invariant(values in proptest::array::uniform4(1u16..1000), k in 1u16..60) {
            let c = RoiConfig::default();
            let base = roi_analyze(&quad_frame(4, 4, values), &c).unwrap();
            let scaled = roi_analyze(&quad_frame(4, 4, values.map(|v| v * k)), &c).unwrap();
            prop_assert!((scaled.frame_mean - base.frame_mean * k as f64).abs() < 1e-6);
            for i in 0..4 {
                prop_assert!((scaled.quadrant_means[i] - base.quadrant_means[i] * k as f64).abs() < 1e-6);
            }
            // Integer-valued means make the strict comparison exact in both frames
            // except where floating rounding of ratio*mean sits on the boundary.
            for i in 0..4 {
                let lhs = base.quadrant_means[i] * 5.0;
                let rhs = base.frame_mean * 6.0;
                if lhs != rhs {
                    prop_assert_eq!(scaled.flags[i], base.flags[i]);
                }
            }
        }
    }
}
