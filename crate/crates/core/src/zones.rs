//! Virtual-fence zones and the safety state machine.
//!
//! Each quadrant carries a zone class. A quadrant becomes occupied after its
//! ROI flag has been set for `debounce_frames` consecutive frames and is
//! released after `clear_frames` consecutive unflagged frames. The safety
//! state is the most severe state implied by current occupancy.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::QuadrantId;
use crate::hybrid::Detection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZoneClass {
    #[default]
    Ignore,
    Warning,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum SafetyState {
    #[default]
    Run,
    Slow,
    Stop,
}

impl fmt::Display for SafetyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SafetyState::Run => "Run",
            SafetyState::Slow => "Slow",
            SafetyState::Stop => "Stop",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneConfig {
    /// Indexed by [`QuadrantId::index`].
    pub zone_class: [ZoneClass; 4],
    pub debounce_frames: u32,
    pub clear_frames: u32,
}

impl Default for ZoneConfig {
    fn default() -> Self {
        Self {
            zone_class: [ZoneClass::Ignore; 4],
            debounce_frames: 3,
            clear_frames: 3,
        }
    }
}

impl ZoneConfig {
    pub fn class(&self, q: QuadrantId) -> ZoneClass {
        self.zone_class[q.index()]
    }

    pub fn validate(&self) -> Result<()> {
        if self.debounce_frames < 1 || self.clear_frames < 1 {
            return Err(Error::Config("debounce and clear must be at least 1 frame".into()));
        }
        Ok(())
    }
}

/// Parses the zone text format: `Qn=ignore|warning|critical`,
/// `debounce=<n>`, `clear=<n>`, one per line, `#` starts a comment.
/// Keys and values are case-insensitive; unlisted quadrants are ignored.
pub fn parse_zone_config(text: &str) -> Result<ZoneConfig> {
    let mut config = ZoneConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", lineno + 1)))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_ascii_lowercase();
        match key.as_str() {
            "debounce" | "clear" => {
                let n: u32 = value
                    .parse()
                    .ok()
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| Error::Config(format!("line {}: {key} must be a positive integer", lineno + 1)))?;
                if key == "debounce" {
                    config.debounce_frames = n;
                } else {
                    config.clear_frames = n;
                }
            }
            _ => {
                let q: QuadrantId = key
                    .parse()
                    .map_err(|_| Error::Config(format!("line {}: unknown key `{key}`", lineno + 1)))?;
                config.zone_class[q.index()] = match value.as_str() {
                    "ignore" => ZoneClass::Ignore,
                    "warning" => ZoneClass::Warning,
                    "critical" => ZoneClass::Critical,
                    other => {
                        return Err(Error::Config(format!("line {}: unknown zone class `{other}`", lineno + 1)))
                    }
                };
            }
        }
    }
    Ok(config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZoneEventKind {
    Entered,
    Cleared,
    StateChanged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneEvent {
    pub frame_index: u64,
    pub kind: ZoneEventKind,
    pub quadrant: Option<QuadrantId>,
    pub from_state: Option<SafetyState>,
    pub to_state: Option<SafetyState>,
}

#[derive(Debug, Clone, Copy, Default)]
struct QuadrantTrack {
    occupied: bool,
    flagged_run: u32,
    clear_run: u32,
}

#[derive(Debug, Clone, Default)]
pub struct ZoneState {
    tracks: [QuadrantTrack; 4],
    state: SafetyState,
    // Remaining frames of Slow escalation from unlocalized movement.
    motion_hold: u32,
}

impl ZoneState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&self) -> SafetyState {
        self.state
    }

    pub fn is_occupied(&self, q: QuadrantId) -> bool {
        self.tracks[q.index()].occupied
    }

    pub fn update(&mut self, detection: &Detection, config: &ZoneConfig) -> Result<(SafetyState, Vec<ZoneEvent>)> {
        let roi = detection.roi.ok_or(Error::MissingRoi(detection.frame_index))?;
        let frame_index = detection.frame_index;
        let mut events = Vec::new();

        for q in QuadrantId::ALL {
            if config.class(q) == ZoneClass::Ignore {
                continue;
            }
            let track = &mut self.tracks[q.index()];
            if roi.is_flagged(q) {
                track.flagged_run = track.flagged_run.saturating_add(1);
                track.clear_run = 0;
                if !track.occupied && track.flagged_run >= config.debounce_frames {
                    track.occupied = true;
                    events.push(ZoneEvent {
                        frame_index,
                        kind: ZoneEventKind::Entered,
                        quadrant: Some(q),
                        from_state: None,
                        to_state: None,
                    });
                }
            } else {
                track.flagged_run = 0;
                if track.occupied {
                    track.clear_run += 1;
                    if track.clear_run >= config.clear_frames {
                        track.occupied = false;
                        track.clear_run = 0;
                        events.push(ZoneEvent {
                            frame_index,
                            kind: ZoneEventKind::Cleared,
                            quadrant: Some(q),
                            from_state: None,
                            to_state: None,
                        });
                    }
                }
            }
        }

        // Movement has no quadrant, so it escalates to Slow only.
        if detection.verdict && !roi.any {
            self.motion_hold = config.debounce_frames;
        }
        let motion_active = self.motion_hold > 0;
        self.motion_hold = self.motion_hold.saturating_sub(1);

        let occupied_class = |class: ZoneClass| {
            QuadrantId::ALL
                .into_iter()
                .any(|q| config.class(q) == class && self.tracks[q.index()].occupied)
        };
        let target = if occupied_class(ZoneClass::Critical) {
            SafetyState::Stop
        } else if occupied_class(ZoneClass::Warning) || motion_active {
            SafetyState::Slow
        } else {
            SafetyState::Run
        };

        if target != self.state {
            events.push(ZoneEvent {
                frame_index,
                kind: ZoneEventKind::StateChanged,
                quadrant: None,
                from_state: Some(self.state),
                to_state: Some(target),
            });
            self.state = target;
        }
        Ok((target, events))
    }
}

pub fn zone_update(
    zone_state: &mut ZoneState,
    detection: &Detection,
    config: &ZoneConfig,
) -> Result<(SafetyState, Vec<ZoneEvent>)> {
    zone_state.update(detection, config)
}
