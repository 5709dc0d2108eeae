//! Confusion-matrix evaluation of the detectors against labeled frames.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::QuadrantId;
use crate::hybrid::{micros_ceil, CombineMode, HybridPipeline};
use crate::motion::{MotionConfig, MotionState};
use crate::pgm::load_pgm;
use crate::roi::{roi_analyze, RoiConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn accuracy(&self) -> Result<f64> {
        accuracy(self)
    }
}

/// `(TP + TN) / (TP + TN + FP + FN) * 100`.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok((cm.tp + cm.tn) as f64 / total as f64 * 100.0)
}

/// Rounds a percentage to one decimal place for display.
pub fn round1(pct: f64) -> f64 {
    (pct * 10.0).round() / 10.0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthLabel {
    pub frame_index: u64,
    pub human_present: bool,
    pub occupied_quadrants: BTreeSet<QuadrantId>,
}

impl GroundTruthLabel {
    pub fn new(frame_index: u64, human_present: bool) -> Self {
        Self {
            frame_index,
            human_present,
            occupied_quadrants: BTreeSet::new(),
        }
    }
}

pub fn confusion(predictions: &[bool], labels: &[GroundTruthLabel]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::Labels(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (&p, l)) in predictions.iter().zip(labels).enumerate() {
        if l.frame_index != i as u64 {
            return Err(Error::Labels(format!(
                "label at position {i} is for frame {}",
                l.frame_index
            )));
        }
        cm.record(p, l.human_present);
    }
    Ok(cm)
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    frame: u64,
    present: String,
    quadrants: String,
}

/// Parses the labels CSV (`frame,present,quadrants`) into frame order.
pub fn parse_labels(text: &str) -> Result<Vec<GroundTruthLabel>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Labels(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["frame", "present", "quadrants"] {
        return Err(Error::Labels(format!(
            "expected header `frame,present,quadrants`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut by_frame = BTreeMap::new();
    for row in reader.deserialize::<LabelRow>() {
        let row = row.map_err(|e| Error::Labels(e.to_string()))?;
        let human_present = match row.present.to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" => true,
            "0" | "false" | "no" => false,
            other => return Err(Error::Labels(format!("frame {}: bad present value `{other}`", row.frame))),
        };
        let occupied_quadrants = row
            .quadrants
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<Result<BTreeSet<QuadrantId>>>()
            .map_err(|e| Error::Labels(format!("frame {}: {e}", row.frame)))?;
        if !occupied_quadrants.is_empty() && !human_present {
            return Err(Error::Labels(format!(
                "frame {}: occupied quadrants listed but present is false",
                row.frame
            )));
        }
        let label = GroundTruthLabel {
            frame_index: row.frame,
            human_present,
            occupied_quadrants,
        };
        if by_frame.insert(row.frame, label).is_some() {
            return Err(Error::Labels(format!("duplicate label for frame {}", row.frame)));
        }
    }
    Ok(by_frame.into_values().collect())
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<GroundTruthLabel>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text)
}

pub fn format_labels(labels: &[GroundTruthLabel]) -> String {
    let mut out = String::from("frame,present,quadrants\n");
    for l in labels {
        let qs: Vec<_> = l.occupied_quadrants.iter().map(|q| q.as_str()).collect();
        out.push_str(&format!("{},{},{}\n", l.frame_index, u8::from(l.human_present), qs.join(";")));
    }
    out
}

pub fn write_labels(labels: &[GroundTruthLabel], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_labels(labels)).map_err(|e| Error::io(path, e))
}

/// `*.pgm` files in `dir`, sorted lexicographically by file name.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_pgm = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
        if is_pgm && path.is_file() {
            frames.push(path);
        }
    }
    frames.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(frames)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub max_us: f64,
    pub mean_us: f64,
    pub p99_us: f64,
    pub samples: usize,
}

impl LatencyStats {
    /// Nearest-rank p99 over `samples_us`.
    pub fn from_samples(samples_us: &[f64]) -> Self {
        if samples_us.is_empty() {
            return Self::default();
        }
        let mut sorted = samples_us.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let rank = ((0.99 * n as f64).ceil() as usize).clamp(1, n);
        Self {
            max_us: sorted[n - 1],
            mean_us: sorted.iter().sum::<f64>() / n as f64,
            p99_us: sorted[rank - 1],
            samples: n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    MethodA,
    MethodB,
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::MethodA, Method::MethodB, Method::Hybrid];

    pub fn title(self) -> &'static str {
        match self {
            Method::MethodA => "Method A (movement)",
            Method::MethodB => "Method B (region of interest)",
            Method::Hybrid => "Hybrid (both methods)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: CombineMode,
    pub frames_evaluated: u64,
    pub matrices: BTreeMap<Method, ConfusionMatrix>,
    /// Raw accuracy percentages.
    pub accuracies: BTreeMap<Method, f64>,
    pub latency: BTreeMap<Method, LatencyStats>,
    /// Per-frame verdicts, kept for set-level comparisons between methods.
    #[serde(skip)]
    pub predictions: BTreeMap<Method, Vec<bool>>,
}

impl EvalReport {
    pub fn matrix(&self, m: Method) -> ConfusionMatrix {
        self.matrices[&m]
    }

    pub fn accuracy(&self, m: Method) -> f64 {
        self.accuracies[&m]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "frames evaluated: {} (mode: {})", self.frames_evaluated, self.mode)?;
        for m in Method::ALL {
            writeln!(f)?;
            writeln!(f, "{}", m.title())?;
            write_matrix(f, &self.matrices[&m])?;
            let lat = self.latency[&m];
            writeln!(
                f,
                "  latency: max {:.1} us, mean {:.1} us, p99 {:.1} us",
                lat.max_us, lat.mean_us, lat.p99_us
            )?;
        }
        Ok(())
    }
}

/// Table layout: predicted rows, actual columns, plus accuracy.
pub fn write_matrix(f: &mut impl fmt::Write, cm: &ConfusionMatrix) -> fmt::Result {
    let actual_pos = cm.tp + cm.fn_;
    let actual_neg = cm.fp + cm.tn;
    let pct = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 * 100.0 };
    writeln!(f, "  {:<20}{:>18}{:>18}", "", format!("actual pos ({actual_pos})"), format!("actual neg ({actual_neg})"))?;
    writeln!(
        f,
        "  {:<20}{:>18}{:>18}",
        format!("predicted pos ({})", cm.tp + cm.fp),
        format!("{} TP ({:.1}%)", cm.tp, pct(cm.tp, actual_pos)),
        format!("{} FP ({:.1}%)", cm.fp, pct(cm.fp, actual_neg)),
    )?;
    writeln!(
        f,
        "  {:<20}{:>18}{:>18}",
        format!("predicted neg ({})", cm.fn_ + cm.tn),
        format!("{} FN ({:.1}%)", cm.fn_, pct(cm.fn_, actual_pos)),
        format!("{} TN ({:.1}%)", cm.tn, pct(cm.tn, actual_neg)),
    )?;
    match accuracy(cm) {
        Ok(a) => writeln!(f, "  accuracy: {:.1}% ({a:.4})", round1(a)),
        Err(_) => writeln!(f, "  accuracy: n/a (empty matrix)"),
    }
}

/// Replays every frame of `dataset_dir` through a fresh standalone
/// movement detector, the ROI detector and a hybrid pipeline, scoring each
/// against `labels_path`. The movement detector's first frame is scored as
/// a negative prediction.
pub fn run_eval(
    dataset_dir: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    motion_config: MotionConfig,
    roi_config: RoiConfig,
    mode: CombineMode,
) -> Result<EvalReport> {
    let frames = list_frames(dataset_dir)?;
    let labels = read_labels(labels_path)?;
    align_labels(frames.len(), &labels)?;
    if frames.is_empty() {
        return Err(Error::NoFrames);
    }

    let mut motion = MotionState::new(motion_config)?;
    let mut hybrid = HybridPipeline::new(motion_config, roi_config, mode)?;
    let mut preds: BTreeMap<Method, Vec<bool>> = Method::ALL.iter().map(|&m| (m, Vec::new())).collect();
    let mut timings: BTreeMap<Method, Vec<f64>> = Method::ALL.iter().map(|&m| (m, Vec::new())).collect();
    let mut first: Option<(usize, usize)> = None;

    for (i, path) in frames.iter().enumerate() {
        let frame = load_pgm(path)?.with_index(i as u64);
        match first {
            None => first = Some((frame.width(), frame.height())),
            Some((w, h)) if (w, h) != (frame.width(), frame.height()) => {
                return Err(Error::DimensionMismatch {
                    expected_width: w,
                    expected_height: h,
                    width: frame.width(),
                    height: frame.height(),
                })
            }
            _ => {}
        }

        let start = Instant::now();
        let a = motion.step(&frame)?;
        timings.get_mut(&Method::MethodA).unwrap().push(elapsed_us(start));
        let start = Instant::now();
        let b = roi_analyze(&frame, &roi_config)?;
        timings.get_mut(&Method::MethodB).unwrap().push(elapsed_us(start));
        let d = hybrid.step(&frame)?;
        timings.get_mut(&Method::Hybrid).unwrap().push(d.elapsed_us as f64);

        preds.get_mut(&Method::MethodA).unwrap().push(a.movement);
        preds.get_mut(&Method::MethodB).unwrap().push(b.any);
        preds.get_mut(&Method::Hybrid).unwrap().push(d.verdict);
    }

    let mut matrices = BTreeMap::new();
    let mut accuracies = BTreeMap::new();
    let mut latency = BTreeMap::new();
    for m in Method::ALL {
        let cm = confusion(&preds[&m], &labels)?;
        accuracies.insert(m, accuracy(&cm)?);
        matrices.insert(m, cm);
        latency.insert(m, LatencyStats::from_samples(&timings[&m]));
    }
    Ok(EvalReport {
        mode,
        frames_evaluated: frames.len() as u64,
        matrices,
        accuracies,
        latency,
        predictions: preds,
    })
}

fn elapsed_us(start: Instant) -> f64 {
    micros_ceil(start.elapsed().as_nanos()) as f64
}

fn align_labels(frame_count: usize, labels: &[GroundTruthLabel]) -> Result<()> {
    // `labels` is sorted and duplicate-free, so position i must hold frame i.
    for i in 0..frame_count {
        match labels.get(i) {
            Some(l) if l.frame_index == i as u64 => {}
            _ => return Err(Error::MissingLabel(i as u64)),
        }
    }
    if let Some(extra) = labels.get(frame_count) {
        return Err(Error::Labels(format!(
            "label for frame {} but the dataset has only {frame_count} frames",
            extra.frame_index
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accuracy_examples() {
        let b = ConfusionMatrix::new(1027, 11, 28, 48);
        assert_eq!(b.total(), 1114);
        assert_eq!(round1(accuracy(&b).unwrap()), 96.5);
        let h = ConfusionMatrix::new(1040, 16, 17, 41);
        assert_eq!(round1(accuracy(&h).unwrap()), 97.0);
        assert_eq!(accuracy(&ConfusionMatrix::new(10, 0, 0, 10)).unwrap(), 100.0);
        assert!(matches!(accuracy(&ConfusionMatrix::default()), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn one_of_each() {
        let labels: Vec<_> = [true, false, true, false]
            .iter()
            .enumerate()
            .map(|(i, &p)| GroundTruthLabel::new(i as u64, p))
            .collect();
        let cm = confusion(&[true, true, false, false], &labels).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(1, 1, 1, 1));
        assert!(confusion(&[true], &labels).is_err());
        let mut shifted = labels.clone();
        shifted[2].frame_index = 9;
        assert!(confusion(&[true; 4], &shifted).is_err());
    }

    #[test]
    fn labels_csv() {
        let text = "frame,present,quadrants\n2,0,\n0,1,Q0;Q3\n1,true,\n";
        let labels = parse_labels(text).unwrap();
        assert_eq!(labels.len(), 3);
        assert_eq!(labels[0].occupied_quadrants.len(), 2);
        assert!(labels[1].human_present && labels[1].occupied_quadrants.is_empty());
        assert!(!labels[2].human_present);
        assert_eq!(parse_labels(&format_labels(&labels)).unwrap(), labels);

        assert!(parse_labels("frame,present\n0,1\n").is_err());
        assert!(parse_labels("frame,present,quadrants\n0,0,Q1\n").is_err());
        assert!(parse_labels("frame,present,quadrants\n0,1,Q7\n").is_err());
        assert!(parse_labels("frame,present,quadrants\n0,1,\n0,0,\n").is_err());
        assert!(parse_labels("frame,present,quadrants\n0,maybe,\n").is_err());
    }

    #[test]
    fn alignment_errors_name_the_frame() {
        let labels: Vec<_> = [0, 1, 3].iter().map(|&i| GroundTruthLabel::new(i, false)).collect();
        assert!(matches!(align_labels(4, &labels), Err(Error::MissingLabel(2))));
        assert!(align_labels(2, &labels).is_err());
        assert!(align_labels(2, &labels[..2]).is_ok());
    }

    #[test]
    fn latency_stats() {
        let samples: Vec<f64> = (1..=200).map(f64::from).collect();
        let s = LatencyStats::from_samples(&samples);
        assert_eq!(s.max_us, 200.0);
        assert_eq!(s.mean_us, 100.5);
        assert_eq!(s.p99_us, 198.0);
        assert!(s.max_us >= s.mean_us);
    }

    proptest! {
        #[test]
        fn confusion_matches_tally_oracle(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 100)) {
            let preds: Vec<bool> = pairs.iter().map(|p| p.0).collect();
            let labels: Vec<_> = pairs.iter().enumerate().map(|(i, p)| GroundTruthLabel::new(i as u64, p.1)).collect();
            let cm = confusion(&preds, &labels).unwrap();
            let count = |p: bool, a: bool| pairs.iter().filter(|&&x| x == (p, a)).count() as u64;
            prop_assert_eq!(cm, ConfusionMatrix::new(count(true, true), count(true, false), count(false, true), count(false, false)));
            prop_assert_eq!(cm.total(), 100);
        }

        #[test]
        fn all_correct_predictions(actual in proptest::collection::vec(any::<bool>(), 1..50)) {
            let labels: Vec<_> = actual.iter().enumerate().map(|(i, &a)| GroundTruthLabel::new(i as u64, a)).collect();
            let cm = confusion(&actual, &labels).unwrap();
            prop_assert_eq!(cm.tp + cm.tn, actual.len() as u64);
            prop_assert_eq!(accuracy(&cm).unwrap(), 100.0);
        }
    }
}
