//! Per-frame latency measurement for each detector and the hybrid pipeline.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{LatencyStats, Method};
use crate::frame::ThermalFrame;
use crate::hybrid::{CombineMode, HybridPipeline};
use crate::motion::{MotionConfig, MotionState};
use crate::roi::{roi_analyze, RoiConfig};
use crate::synth::{BlobSpec, SceneSpec, Waypoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub iterations: usize,
    pub width: usize,
    pub height: usize,
    pub mode: CombineMode,
    pub latency: BTreeMap<Method, LatencyStats>,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} iterations on {}x{} frames (mode: {})",
            self.iterations, self.width, self.height, self.mode
        )?;
        writeln!(f, "{:<32}{:>12}{:>12}{:>12}", "method", "max us", "mean us", "p99 us")?;
        for (m, s) in &self.latency {
            writeln!(f, "{:<32}{:>12.2}{:>12.2}{:>12.2}", m.title(), s.max_us, s.mean_us, s.p99_us)?;
        }
        Ok(())
    }
}

/// Runs `iterations` frames (cycling through `frames`) through a standalone
/// movement detector, the ROI detector and a hybrid pipeline, timing each.
pub fn run_bench(
    frames: &[ThermalFrame],
    iterations: usize,
    motion_config: MotionConfig,
    roi_config: RoiConfig,
    mode: CombineMode,
) -> Result<BenchReport> {
    let first = frames.first().ok_or(Error::NoFrames)?;
    if iterations == 0 {
        return Err(Error::Config("iterations must be positive".into()));
    }
    if let Some(f) = frames.iter().find(|f| !f.same_dims(first)) {
        f.check_dims(first)?;
    }

    let mut motion = MotionState::new(motion_config)?;
    let mut hybrid = HybridPipeline::new(motion_config, roi_config, mode)?;
    let mut samples: BTreeMap<Method, Vec<f64>> =
        Method::ALL.iter().map(|&m| (m, Vec::with_capacity(iterations))).collect();

    for (i, frame) in frames.iter().cycle().take(iterations).enumerate() {
        let frame = frame.clone().with_index(i as u64);

        let start = Instant::now();
        std::hint::black_box(motion.step(&frame)?);
        let a = start.elapsed();

        let start = Instant::now();
        std::hint::black_box(roi_analyze(&frame, &roi_config)?);
        let b = start.elapsed();

        let start = Instant::now();
        std::hint::black_box(hybrid.step(&frame)?);
        let h = start.elapsed();

        for (m, d) in [(Method::MethodA, a), (Method::MethodB, b), (Method::Hybrid, h)] {
            samples.get_mut(&m).unwrap().push(d.as_secs_f64() * 1e6);
        }
    }

    Ok(BenchReport {
        iterations,
        width: first.width(),
        height: first.height(),
        mode,
        latency: samples
            .into_iter()
            .map(|(m, s)| (m, LatencyStats::from_samples(&s)))
            .collect(),
    })
}

/// A 160×120 scene with one person crossing the frame, used when no input
/// frames are supplied.
pub fn default_bench_frames() -> Vec<ThermalFrame> {
    let spec = SceneSpec {
        frames: 32,
        ambient: 60.0,
        noise_sigma: 1.0,
        seed: 1,
        blobs: vec![BlobSpec {
            amplitude: 150.0,
            sigma: 9.0,
            path: vec![Waypoint { frame: 0, x: 10.0, y: 30.0 }, Waypoint { frame: 31, x: 150.0, y: 90.0 }],
            is_human: true,
        }],
        ..Default::default()
    };
    (0..spec.frames).map(|t| spec.render_frame(t)).collect()
}
