//! Thermal frame representation and the pixel primitives shared by both
//! detectors.
//!
//! Pixels are unsigned 16-bit sensor counts stored row-major with the origin
//! at the top-left corner. The counts are not interpreted; 8-bit AGC output
//! and 14-bit radiometric output are both carried as-is.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the four equal quadrants of a frame, indexed row-major from the
/// top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuadrantId {
    Q0,
    Q1,
    Q2,
    Q3,
}

impl QuadrantId {
    pub const ALL: [QuadrantId; 4] = [QuadrantId::Q0, QuadrantId::Q1, QuadrantId::Q2, QuadrantId::Q3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Quadrant containing the point `(x, y)` of a `width`×`height` frame.
    /// Points on a midline belong to the right/bottom quadrant.
    pub fn containing(x: f64, y: f64, width: usize, height: usize) -> Self {
        let right = x >= width as f64 / 2.0;
        let bottom = y >= height as f64 / 2.0;
        match (bottom, right) {
            (false, false) => QuadrantId::Q0,
            (false, true) => QuadrantId::Q1,
            (true, false) => QuadrantId::Q2,
            (true, true) => QuadrantId::Q3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuadrantId::Q0 => "Q0",
            QuadrantId::Q1 => "Q1",
            QuadrantId::Q2 => "Q2",
            QuadrantId::Q3 => "Q3",
        }
    }
}

impl fmt::Display for QuadrantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuadrantId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "Q0" => Ok(QuadrantId::Q0),
            "Q1" => Ok(QuadrantId::Q1),
            "Q2" => Ok(QuadrantId::Q2),
            "Q3" => Ok(QuadrantId::Q3),
            other => Err(Error::Config(format!("unknown quadrant `{other}`"))),
        }
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }
}

/// Splits a `width`×`height` grid into four `(width/2)`×`(height/2)`
/// rectangles, indexed by [`QuadrantId::index`].
pub fn quadrant_rects(width: usize, height: usize) -> Result<[Rect; 4]> {
    if !width.is_multiple_of(2) || !height.is_multiple_of(2) {
        return Err(Error::InvalidFrame(format!(
            "cannot split {width}x{height} into equal quadrants: dimensions must be even"
        )));
    }
    let (hw, hh) = (width / 2, height / 2);
    Ok([
        Rect { x: 0, y: 0, width: hw, height: hh },
        Rect { x: hw, y: 0, width: hw, height: hh },
        Rect { x: 0, y: hh, width: hw, height: hh },
        Rect { x: hw, y: hh, width: hw, height: hh },
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStats {
    pub mean: f64,
    pub min: u16,
    pub max: u16,
}

/// A single thermal image.
///
/// Construction validates the shape: at least 2×2, both dimensions even, and
/// exactly `width * height` pixels. A `ThermalFrame` is immutable afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThermalFrame {
    width: usize,
    height: usize,
    pixels: Vec<u16>,
    frame_index: u64,
    timestamp_ms: Option<u64>,
}

impl ThermalFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u16>) -> Result<Self> {
        validate_dims(width, height)?;
        if pixels.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "{width}x{height} frame needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            frame_index: 0,
            timestamp_ms: None,
        })
    }

    pub fn filled(width: usize, height: usize, value: u16) -> Result<Self> {
        validate_dims(width, height)?;
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u16) -> Result<Self> {
        validate_dims(width, height)?;
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn with_index(mut self, frame_index: u64) -> Self {
        self.frame_index = frame_index;
        self
    }

    pub fn with_timestamp_ms(mut self, timestamp_ms: Option<u64>) -> Self {
        self.timestamp_ms = timestamp_ms;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u16> {
        self.pixels
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn timestamp_ms(&self) -> Option<u64> {
        self.timestamp_ms
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.pixels[y * self.width + x]
    }

    pub fn same_dims(&self, other: &ThermalFrame) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_dims(&self, other: &ThermalFrame) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_width: other.width,
                expected_height: other.height,
                width: self.width,
                height: self.height,
            })
        }
    }

    pub fn quadrants(&self) -> [Rect; 4] {
        quadrant_rects(self.width, self.height).expect("frame dimensions are validated even")
    }

    /// Exact integer sum of the pixels inside `rect`.
    pub fn region_sum(&self, rect: Rect) -> u64 {
        let mut sum = 0u64;
        for y in rect.y..rect.y + rect.height {
            let row = &self.pixels[y * self.width + rect.x..y * self.width + rect.x + rect.width];
            sum += row.iter().map(|&p| u64::from(p)).sum::<u64>();
        }
        sum
    }

    pub fn region_mean(&self, rect: Rect) -> f64 {
        self.region_sum(rect) as f64 / rect.area() as f64
    }

    pub fn stats(&self) -> FrameStats {
        let mut min = u16::MAX;
        let mut max = 0u16;
        for &p in &self.pixels {
            min = min.min(p);
            max = max.max(p);
        }
        FrameStats {
            mean: frame_mean(self),
            min,
            max,
        }
    }
}

fn validate_dims(width: usize, height: usize) -> Result<()> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidFrame(format!(
            "{width}x{height} is too small; both dimensions must be at least 2"
        )));
    }
    if !width.is_multiple_of(2) || !height.is_multiple_of(2) {
        return Err(Error::InvalidFrame(format!(
            "{width}x{height} has an odd dimension; quadrant splitting needs even sizes"
        )));
    }
    Ok(())
}

/// Per-pixel `|a - b|`. The result keeps `a`'s frame index and timestamp.
pub fn abs_diff(a: &ThermalFrame, b: &ThermalFrame) -> Result<ThermalFrame> {
    a.check_dims(b)?;
    let pixels = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&p, &q)| p.abs_diff(q))
        .collect();
    Ok(ThermalFrame {
        width: a.width,
        height: a.height,
        pixels,
        frame_index: a.frame_index,
        timestamp_ms: a.timestamp_ms,
    })
}

/// Arithmetic mean over all pixels, summed exactly in 64-bit integers.
pub fn frame_mean(frame: &ThermalFrame) -> f64 {
    let sum: u64 = frame.pixels.iter().map(|&p| u64::from(p)).sum();
    sum as f64 / frame.pixels.len() as f64
}

/// Quadrant rectangles of `frame`, in [`QuadrantId`] order.
pub fn split_quadrants(frame: &ThermalFrame) -> [(QuadrantId, Rect); 4] {
    let rects = frame.quadrants();
    QuadrantId::ALL.map(|q| (q, rects[q.index()]))
}
