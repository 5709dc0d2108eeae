//! Command-line front end: `detect`, `eval`, `synth` and `bench`.
//!
//! Settings come from defaults, then an optional `key=value` config file
//! (`--config` or `THERMAL_SENTRY_CONFIG`), then flags; later sources win.
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{default_bench_frames, run_bench};
use crate::error::Error;
use crate::eval::{accuracy, list_frames, run_eval, write_matrix, ConfusionMatrix};
use crate::frame::{QuadrantId, ThermalFrame};
use crate::hybrid::{CombineMode, HybridPipeline};
use crate::motion::MotionConfig;
use crate::pgm::load_pgm;
use crate::roi::RoiConfig;
use crate::synth::{generate, load_scene};
use crate::zones::{parse_zone_config, SafetyState, ZoneConfig, ZoneEventKind, ZoneState};

pub const CONFIG_ENV: &str = "THERMAL_SENTRY_CONFIG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "thermal-sentry", version, about = "Human-presence detection on thermal frames")]
pub struct Cli {
    /// key=value config file (keys: mode, active_delta, active_fraction,
    /// max_hold, roi_ratio, min_quadrant_mean, zones)
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run detection over frames and emit NDJSON records
    Detect {
        #[command(flatten)]
        detector: DetectorArgs,
        /// Directory of .pgm frames, replayed in file-name order
        #[arg(long, conflicts_with = "files")]
        input_dir: Option<PathBuf>,
        /// Individual .pgm frames, in order
        files: Vec<PathBuf>,
        /// Zone config file (Qn=ignore|warning|critical, debounce=, clear=)
        #[arg(long)]
        zones: Option<PathBuf>,
        /// Write records here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the detectors against a labeled dataset
    Eval {
        #[command(flatten)]
        detector: DetectorArgs,
        #[arg(long, required_unless_present = "matrix")]
        input_dir: Option<PathBuf>,
        /// Labels CSV (frame,present,quadrants); defaults to <input-dir>/labels.csv
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Score a matrix given directly as TP,FP,FN,TN
        #[arg(long, value_delimiter = ',', value_name = "TP,FP,FN,TN", conflicts_with = "input_dir")]
        matrix: Option<Vec<u64>>,
        /// Also write the report as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a labeled synthetic dataset from a scene file
    Synth {
        scene: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Measure per-frame latency of each method
    Bench {
        #[command(flatten)]
        detector: DetectorArgs,
        /// Frames to cycle through; a built-in 160x120 scene when omitted
        #[arg(long)]
        input_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        /// Also write the report as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct DetectorArgs {
    /// parallel (default) or sequential
    #[arg(long)]
    pub mode: Option<String>,
    /// Per-pixel difference that makes a pixel active [default: 20]
    #[arg(long)]
    pub active_delta: Option<u16>,
    /// Fraction of active pixels that means movement [default: 0.05]
    #[arg(long)]
    pub active_fraction: Option<f64>,
    /// Force a background refresh after this many movement frames [default: off]
    #[arg(long)]
    pub max_hold: Option<u32>,
    /// Quadrant-to-frame mean ratio for a region of interest [default: 1.2]
    #[arg(long)]
    pub roi_ratio: Option<f64>,
    /// Minimum quadrant mean for a region of interest [default: 1]
    #[arg(long)]
    pub min_quadrant_mean: Option<f64>,
}

/// Fully resolved detector settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub motion: MotionConfig,
    pub roi: RoiConfig,
    pub mode: CombineMode,
    pub zones_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            motion: MotionConfig::default(),
            roi: RoiConfig::default(),
            mode: CombineMode::ParallelOr,
            zones_path: None,
        }
    }
}

impl RunConfig {
    pub fn resolve(config_file: Option<&Path>, args: &DetectorArgs, zones: Option<&Path>) -> Result<Self, CliError> {
        let mut run = RunConfig::default();
        if let Some(path) = config_file {
            let text = fs::read_to_string(path).map_err(|e| CliError::Data(Error::io(path, e)))?;
            run.apply_file(&text, path.parent())?;
        }
        let usage = |e: Error| CliError::Usage(e.to_string());
        if let Some(m) = &args.mode {
            run.mode = m.parse().map_err(usage)?;
        }
        if let Some(v) = args.active_delta {
            run.motion.active_pixel_delta = v;
        }
        if let Some(v) = args.active_fraction {
            run.motion.active_fraction = v;
        }
        if let Some(v) = args.max_hold {
            run.motion.max_hold_frames = Some(v);
        }
        if let Some(v) = args.roi_ratio {
            run.roi.ratio = v;
        }
        if let Some(v) = args.min_quadrant_mean {
            run.roi.min_quadrant_mean = v;
        }
        if let Some(z) = zones {
            run.zones_path = Some(z.to_path_buf());
        }
        run.motion.validate().map_err(usage)?;
        run.roi.validate().map_err(usage)?;
        Ok(run)
    }

    fn apply_file(&mut self, text: &str, base: Option<&Path>) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| CliError::Usage(format!("config line {}: {what}", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let (key, value) = (key.trim().to_ascii_lowercase().replace('-', "_"), value.trim());
            let invalid = || bad(&format!("invalid value `{value}` for `{key}`"));
            match key.as_str() {
                "mode" => self.mode = value.parse().map_err(|_| invalid())?,
                "active_delta" => self.motion.active_pixel_delta = value.parse().map_err(|_| invalid())?,
                "active_fraction" => self.motion.active_fraction = value.parse().map_err(|_| invalid())?,
                "max_hold" => {
                    self.motion.max_hold_frames = match value.to_ascii_lowercase().as_str() {
                        "off" | "none" | "" => None,
                        v => Some(v.parse().map_err(|_| invalid())?),
                    }
                }
                "roi_ratio" => self.roi.ratio = value.parse().map_err(|_| invalid())?,
                "min_quadrant_mean" => self.roi.min_quadrant_mean = value.parse().map_err(|_| invalid())?,
                "zones" => {
                    let p = PathBuf::from(value);
                    self.zones_path = Some(match base {
                        Some(b) if p.is_relative() => b.join(p),
                        _ => p,
                    });
                }
                _ => return Err(bad(&format!("unknown key `{key}`"))),
            }
        }
        Ok(())
    }

    pub fn zone_config(&self) -> Result<ZoneConfig, CliError> {
        match &self.zones_path {
            None => Ok(ZoneConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Data(Error::io(p, e)))?;
                parse_zone_config(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(Error::io("<output>", e))
    }
}

/// One NDJSON line of `detect` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Frame(FrameRecord),
    Event(EventRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub frame: u64,
    pub verdict: bool,
    /// Absent when the movement result was not consulted.
    pub movement: Option<bool>,
    pub active_count: Option<usize>,
    pub quadrant_means: [f64; 4],
    pub flags: [bool; 4],
    pub state: SafetyState,
    pub elapsed_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub frame: u64,
    pub kind: ZoneEventKind,
    pub quadrant: Option<QuadrantId>,
    pub from_state: Option<SafetyState>,
    pub to_state: Option<SafetyState>,
}

/// Parses CLI arguments and runs the chosen command. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Detect {
            detector,
            input_dir,
            files,
            zones,
            out,
        } => {
            let run = RunConfig::resolve(config, detector, zones.as_deref())?;
            let inputs = match (input_dir, files.is_empty()) {
                (Some(dir), true) => list_frames(dir)?,
                (None, false) => files.clone(),
                _ => return Err(CliError::Usage("give exactly one input: --input-dir or frame files".into())),
            };
            match out {
                Some(path) => {
                    let file = File::create(path).map_err(|e| Error::io(path, e))?;
                    let mut w = BufWriter::new(file);
                    let res = cmd_detect(&run, &inputs, &mut w);
                    w.flush()?;
                    res
                }
                None => cmd_detect(&run, &inputs, stdout),
            }
        }
        Command::Eval {
            detector,
            input_dir,
            labels,
            matrix,
            out,
        } => {
            if let Some(cells) = matrix {
                if cells.len() != 4 {
                    return Err(CliError::Usage("--matrix takes exactly four counts: TP,FP,FN,TN".into()));
                }
                let cm = ConfusionMatrix::new(cells[0], cells[1], cells[2], cells[3]);
                let mut text = String::new();
                write_matrix(&mut text, &cm).expect("write to string");
                write!(stdout, "{text}")?;
                accuracy(&cm)?;
                return Ok(());
            }
            let run = RunConfig::resolve(config, detector, None)?;
            let dir = input_dir.as_ref().expect("clap requires input_dir without --matrix");
            let labels = labels.clone().unwrap_or_else(|| dir.join(crate::synth::LABELS_FILE));
            let report = run_eval(dir, &labels, run.motion, run.roi, run.mode)?;
            write!(stdout, "{report}")?;
            if let Some(path) = out {
                fs::write(path, report.to_json()).map_err(|e| Error::io(path, e))?;
            }
            Ok(())
        }
        Command::Synth { scene, out_dir } => {
            let spec = load_scene(scene).map_err(|e| match e {
                Error::Config(msg) => CliError::Usage(msg),
                other => CliError::Data(other),
            })?;
            let ds = generate(&spec, out_dir)?;
            let positives = ds.positives();
            writeln!(
                stdout,
                "wrote {} frames to {}: {} with people, {} without",
                ds.labels.len(),
                out_dir.display(),
                positives,
                ds.labels.len() - positives
            )?;
            for q in QuadrantId::ALL {
                let n = ds.labels.iter().filter(|l| l.occupied_quadrants.contains(&q)).count();
                writeln!(stdout, "  {q}: {n} occupied frames")?;
            }
            Ok(())
        }
        Command::Bench {
            detector,
            input_dir,
            iterations,
            out,
        } => {
            let run = RunConfig::resolve(config, detector, None)?;
            if *iterations == 0 {
                return Err(CliError::Usage("--iterations must be positive".into()));
            }
            let frames = match input_dir {
                Some(dir) => list_frames(dir)?
                    .iter()
                    .map(load_pgm)
                    .collect::<Result<Vec<_>, _>>()?,
                None => default_bench_frames(),
            };
            let report = run_bench(&frames, *iterations, run.motion, run.roi, run.mode)?;
            write!(stdout, "{report}")?;
            if let Some(path) = out {
                let json = serde_json::to_string_pretty(&report).expect("report serializes");
                fs::write(path, json).map_err(|e| Error::io(path, e))?;
            }
            Ok(())
        }
    }
}

/// Streams one frame record per input frame, followed by that frame's zone
/// events. Frames are numbered by input position.
pub fn cmd_detect(run: &RunConfig, inputs: &[PathBuf], out: &mut dyn Write) -> Result<(), CliError> {
    let zones = run.zone_config()?;
    let mut pipeline = HybridPipeline::new(run.motion, run.roi, run.mode)?;
    let mut zone_state = ZoneState::new();
    let mut dims: Option<(usize, usize)> = None;

    for (i, path) in inputs.iter().enumerate() {
        let frame: ThermalFrame = load_pgm(path)?.with_index(i as u64);
        match dims {
            None => dims = Some((frame.width(), frame.height())),
            Some((w, h)) if (w, h) != (frame.width(), frame.height()) => {
                return Err(CliError::Data(Error::DimensionMismatch {
                    expected_width: w,
                    expected_height: h,
                    width: frame.width(),
                    height: frame.height(),
                }));
            }
            _ => {}
        }
        let detection = pipeline.step(&frame)?;
        let (state, events) = zone_state.update(&detection, &zones)?;
        let roi = detection.roi.expect("hybrid detections carry an ROI result");
        let record = Record::Frame(FrameRecord {
            frame: detection.frame_index,
            verdict: detection.verdict,
            movement: detection.motion.map(|m| m.movement),
            active_count: detection.motion.map(|m| m.active_count),
            quadrant_means: roi.quadrant_means,
            flags: roi.flags,
            state,
            elapsed_us: detection.elapsed_us,
        });
        write_record(out, &record)?;
        for e in events {
            write_record(
                out,
                &Record::Event(EventRecord {
                    frame: e.frame_index,
                    kind: e.kind,
                    quadrant: e.quadrant,
                    from_state: e.from_state,
                    to_state: e.to_state,
                }),
            )?;
        }
    }
    Ok(())
}

fn write_record(out: &mut dyn Write, record: &Record) -> io::Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("sentry.conf");
        fs::write(&cfg, "mode=sequential\nactive_delta=30\nroi_ratio=1.5\nzones=z.txt\n").unwrap();
        let args = DetectorArgs {
            roi_ratio: Some(1.3),
            ..Default::default()
        };
        let run = RunConfig::resolve(Some(&cfg), &args, None).unwrap();
        assert_eq!(run.mode, CombineMode::SequentialBThenA);
        assert_eq!(run.motion.active_pixel_delta, 30);
        assert_eq!(run.roi.ratio, 1.3);
        assert_eq!(run.zones_path, Some(dir.path().join("z.txt")));
    }

    #[test]
    fn bad_config_values_are_usage_errors() {
        let args = DetectorArgs {
            active_fraction: Some(0.0),
            ..Default::default()
        };
        assert!(matches!(RunConfig::resolve(None, &args, None), Err(CliError::Usage(_))));
        let args = DetectorArgs {
            mode: Some("vote".into()),
            ..Default::default()
        };
        assert!(matches!(RunConfig::resolve(None, &args, None), Err(CliError::Usage(_))));
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c");
        fs::write(&cfg, "colour=blue\n").unwrap();
        assert!(RunConfig::resolve(Some(&cfg), &DetectorArgs::default(), None).is_err());
    }

    #[test]
    fn records_reject_unknown_fields() {
        let line = r#"{"type":"event","frame":3,"kind":"Entered","quadrant":"Q3","from_state":null,"to_state":null}"#;
        let rec: Record = serde_json::from_str(line).unwrap();
        assert!(matches!(rec, Record::Event(EventRecord { frame: 3, .. })));
        let extra = r#"{"type":"event","frame":3,"kind":"Entered","quadrant":"Q3","from_state":null,"to_state":null,"x":1}"#;
        assert!(serde_json::from_str::<Record>(extra).is_err());
    }
}
