//! Deterministic synthetic thermal scenes with ground-truth labels.
//!
//! Frame `t` at pixel `(x, y)` is
//! `ambient + t * drift + Σ amplitude * exp(-((x-cx)² + (y-cy)²) / (2σ²)) + noise`,
//! rounded to the nearest count and clamped to `0..=65535`. Blob centers are
//! linearly interpolated between waypoints and held at the first/last
//! waypoint outside their span.
//!
//! Noise is zero-mean Gaussian from Box–Muller over SplitMix64. Each frame
//! seeds its own generator with `splitmix64(seed ^ splitmix64(frame_index))`,
//! so frames can be rendered independently and in any order.
//!
//! Scene files are `key=value` lines (`#` comments):
//!
//! ```text
//! width=160
//! height=120
//! frames=400
//! fps=4
//! ambient=60
//! drift=0.02
//! noise=1.0
//! seed=42
//! # blob=<human|equipment> <amplitude> <sigma> <frame:x:y> [<frame:x:y> ...]
//! blob=human 120 10 0:20:30 100:140:90
//! blob=equipment 40 4 0:120:20
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::{write_labels, GroundTruthLabel};
use crate::frame::{QuadrantId, ThermalFrame};
use crate::pgm::write_pgm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub frame: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub amplitude: f64,
    pub sigma: f64,
    pub path: Vec<Waypoint>,
    pub is_human: bool,
}

impl BlobSpec {
    pub fn stationary(amplitude: f64, sigma: f64, x: f64, y: f64, is_human: bool) -> Self {
        Self {
            amplitude,
            sigma,
            path: vec![Waypoint { frame: 0, x, y }],
            is_human,
        }
    }

    pub fn center_at(&self, t: u64) -> (f64, f64) {
        let first = self.path[0];
        if t <= first.frame {
            return (first.x, first.y);
        }
        for pair in self.path.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if t <= b.frame {
                let u = (t - a.frame) as f64 / (b.frame - a.frame) as f64;
                return (a.x + u * (b.x - a.x), a.y + u * (b.y - a.y));
            }
        }
        let last = self.path[self.path.len() - 1];
        (last.x, last.y)
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0) || !(self.sigma > 0.0) {
            return Err(Error::Config("blob amplitude and sigma must be positive".into()));
        }
        if self.path.is_empty() {
            return Err(Error::Config("blob needs at least one waypoint".into()));
        }
        if self.path.windows(2).any(|w| w[1].frame <= w[0].frame) {
            return Err(Error::Config("blob waypoint frames must strictly increase".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: u64,
    pub fps: f64,
    pub ambient: f64,
    pub drift_per_frame: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub blobs: Vec<BlobSpec>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 160,
            height: 120,
            frames: 1,
            fps: 4.0,
            ambient: 0.0,
            drift_per_frame: 0.0,
            noise_sigma: 0.0,
            seed: 0,
            blobs: Vec::new(),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames < 1 {
            return Err(Error::Config("scene needs at least one frame".into()));
        }
        if self.width < 2 || self.height < 2 || !self.width.is_multiple_of(2) || !self.height.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "scene size {}x{} must be even and at least 2x2",
                self.width, self.height
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise sigma must be >= 0".into()));
        }
        if !(self.fps > 0.0) {
            return Err(Error::Config("fps must be positive".into()));
        }
        self.blobs.iter().try_for_each(BlobSpec::validate)
    }

    pub fn render_frame(&self, t: u64) -> ThermalFrame {
        let base = self.ambient + t as f64 * self.drift_per_frame;
        let centers: Vec<_> = self.blobs.iter().map(|b| (b, b.center_at(t))).collect();
        let mut rng = SplitMix64::new(splitmix64(self.seed ^ splitmix64(t)));
        let mut gauss = GaussianSource::default();
        let frame = ThermalFrame::from_fn(self.width, self.height, |x, y| {
            let (x, y) = (x as f64, y as f64);
            let mut v = base;
            for (blob, (cx, cy)) in &centers {
                let r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                v += blob.amplitude * (-r2 / (2.0 * blob.sigma * blob.sigma)).exp();
            }
            if self.noise_sigma > 0.0 {
                v += self.noise_sigma * gauss.sample(&mut rng);
            }
            v.round().clamp(0.0, 65535.0) as u16
        })
        .expect("scene dimensions are validated");
        frame
            .with_index(t)
            .with_timestamp_ms(Some((t as f64 * 1000.0 / self.fps).round() as u64))
    }

    pub fn label(&self, t: u64) -> GroundTruthLabel {
        let mut occupied = BTreeSet::new();
        for blob in self.blobs.iter().filter(|b| b.is_human) {
            let (cx, cy) = blob.center_at(t);
            if cx >= 0.0 && cx < self.width as f64 && cy >= 0.0 && cy < self.height as f64 {
                occupied.insert(QuadrantId::containing(cx, cy, self.width, self.height));
            }
        }
        GroundTruthLabel {
            frame_index: t,
            human_present: !occupied.is_empty(),
            occupied_quadrants: occupied,
        }
    }

    pub fn labels(&self) -> Vec<GroundTruthLabel> {
        (0..self.frames).map(|t| self.label(t)).collect()
    }
}

pub fn parse_scene(text: &str) -> Result<SceneSpec> {
    let mut spec = SceneSpec::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Config(format!("scene line {}: {msg}", lineno + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        fn num<T: std::str::FromStr>(v: &str) -> Option<T> {
            v.parse().ok()
        }
        let bad = || err(format!("bad value `{value}` for `{key}`"));
        match key.as_str() {
            "width" => spec.width = num(value).ok_or_else(bad)?,
            "height" => spec.height = num(value).ok_or_else(bad)?,
            "frames" => spec.frames = num(value).ok_or_else(bad)?,
            "fps" => spec.fps = num(value).ok_or_else(bad)?,
            "ambient" => spec.ambient = num(value).ok_or_else(bad)?,
            "drift" | "drift_per_frame" => spec.drift_per_frame = num(value).ok_or_else(bad)?,
            "noise" | "noise_sigma" => spec.noise_sigma = num(value).ok_or_else(bad)?,
            "seed" => spec.seed = num(value).ok_or_else(bad)?,
            "blob" => {
                let mut parts = value.split_whitespace();
                let is_human = match parts.next().map(str::to_ascii_lowercase).as_deref() {
                    Some("human") => true,
                    Some("equipment") | Some("object") => false,
                    _ => return Err(err("blob kind must be `human` or `equipment`".into())),
                };
                let amplitude = parts.next().and_then(num).ok_or_else(bad)?;
                let sigma = parts.next().and_then(num).ok_or_else(bad)?;
                let path = parts
                    .map(|wp| {
                        let mut f = wp.split(':');
                        match (f.next().and_then(num), f.next().and_then(num), f.next().and_then(num), f.next()) {
                            (Some(frame), Some(x), Some(y), None) => Ok(Waypoint { frame, x, y }),
                            _ => Err(err(format!("bad waypoint `{wp}`, expected frame:x:y"))),
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                spec.blobs.push(BlobSpec {
                    amplitude,
                    sigma,
                    path,
                    is_human,
                });
            }
            _ => return Err(err(format!("unknown key `{key}`"))),
        }
    }
    spec.validate()?;
    Ok(spec)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&text)
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub frames_dir: PathBuf,
    pub frame_paths: Vec<PathBuf>,
    pub labels_path: PathBuf,
    pub labels: Vec<GroundTruthLabel>,
}

impl LabeledDataset {
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| l.human_present).count()
    }
}

pub const LABELS_FILE: &str = "labels.csv";

/// Writes `frame_NNNNN.pgm` files and `labels.csv` into `out_dir`.
pub fn generate(spec: &SceneSpec, out_dir: impl AsRef<Path>) -> Result<LabeledDataset> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let digits = (spec.frames - 1).to_string().len().max(5);
    let mut frame_paths = Vec::with_capacity(spec.frames as usize);
    for t in 0..spec.frames {
        let path = out_dir.join(format!("frame_{t:0digits$}.pgm"));
        write_pgm(&spec.render_frame(t), &path)?;
        frame_paths.push(path);
    }
    let labels = spec.labels();
    let labels_path = out_dir.join(LABELS_FILE);
    write_labels(&labels, &labels_path)?;
    Ok(LabeledDataset {
        frames_dir: out_dir.to_path_buf(),
        frame_paths,
        labels_path,
        labels,
    })
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        let out = splitmix64(self.state);
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        out
    }

    /// Uniform in (0, 1]: top 53 bits, shifted off zero.
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64
    }
}

/// Box–Muller; the second variate of each pair is cached.
#[derive(Debug, Clone, Default)]
struct GaussianSource {
    spare: Option<f64>,
}

impl GaussianSource {
    fn sample(&mut self, rng: &mut SplitMix64) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = rng.next_open01();
        let u2 = rng.next_open01();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}
