//! End-to-end synthesis: unit selection, scheduling, retiming and additive
//! blending onto a base motion.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::{select_unit, Dictionary, DictionaryError, Selection};
use crate::motion::{additive_blend, time_warp_at, warped_frame_count, MotionClip, MotionError, OffsetLayer, Pose, Warp};
use crate::schedule::{
    resolve_overlaps, schedule_onset, schedule_stroke_aligned, ApexAnchor, Schedule, ScheduleConfig, SkipRecord,
};
use crate::script::{GestureScript, ScriptError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error("base motion: {0}")]
    Base(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseGestureSpec {
    RestPose,
    /// Slow sinusoidal x-sway on the listed joints (all when empty).
    ProceduralSway {
        amplitude: f64,
        frequency_hz: f64,
        #[serde(default)]
        joints: Vec<String>,
    },
    /// A motion clip file. Non-strict mode loops or truncates it to the
    /// required length; strict mode rejects a length mismatch.
    File { path: PathBuf, strict: bool },
}

impl BaseGestureSpec {
    pub fn sway() -> Self {
        BaseGestureSpec::ProceduralSway { amplitude: 0.01, frequency_hz: 0.15, joints: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    Onset,
    StrokeAligned,
}

impl std::str::FromStr for ScheduleMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "onset" => Ok(ScheduleMode::Onset),
            "stroke" | "stroke_aligned" | "stroke-aligned" => Ok(ScheduleMode::StrokeAligned),
            other => Err(format!("unknown schedule mode '{other}' (expected onset or stroke)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub fps: f64,
    pub ramp_s: f64,
    pub mode: ScheduleMode,
    pub seed: u64,
    pub min_gesture_s: f64,
    pub apex_anchor: ApexAnchor,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            fps: 25.0,
            ramp_s: 0.2,
            mode: ScheduleMode::StrokeAligned,
            seed: 0,
            min_gesture_s: 1.5,
            apex_anchor: ApexAnchor::KeywordMidpoint,
        }
    }
}

impl SynthesisConfig {
    fn validate(&self) -> Result<(), SynthError> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(SynthError::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.ramp_s.is_finite() && self.ramp_s >= 0.0) {
            return Err(SynthError::Config(format!("ramp must be nonnegative, got {}", self.ramp_s)));
        }
        if !(self.min_gesture_s.is_finite() && self.min_gesture_s >= 0.0) {
            return Err(SynthError::Config(format!("minimum gesture duration must be nonnegative, got {}", self.min_gesture_s)));
        }
        Ok(())
    }
}

/// Base motion of `warped_frame_count(duration_s, fps)` frames. A zero
/// duration yields a single frame.
pub fn make_base(spec: &BaseGestureSpec, rest: &Pose, duration_s: f64, fps: f64) -> Result<MotionClip, SynthError> {
    if !(duration_s.is_finite() && duration_s >= 0.0) {
        return Err(SynthError::Config(format!("duration must be nonnegative, got {duration_s}")));
    }
    let frames = warped_frame_count(duration_s, fps);
    match spec {
        BaseGestureSpec::RestPose => Ok(MotionClip::constant(rest, fps, frames)?),
        BaseGestureSpec::ProceduralSway { amplitude, frequency_hz, joints } => {
            let unknown: Vec<&String> = joints.iter().filter(|j| !rest.joint_names().contains(j)).collect();
            if !unknown.is_empty() {
                return Err(SynthError::Base(format!("unknown sway joints {unknown:?}")));
            }
            let active: Vec<bool> =
                rest.joint_names().iter().map(|n| joints.is_empty() || joints.contains(n)).collect();
            let mut data = Vec::with_capacity(frames * rest.joint_count());
            for t in 0..frames {
                let dx = amplitude * (2.0 * std::f64::consts::PI * frequency_hz * t as f64 / fps).sin();
                for (p, on) in rest.positions().iter().zip(&active) {
                    data.push(if *on { [p[0] + dx, p[1], p[2]] } else { *p });
                }
            }
            Ok(MotionClip::from_flat(fps, rest.joint_names().to_vec(), data)?)
        }
        BaseGestureSpec::File { path, strict } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| SynthError::Base(format!("cannot read {}: {e}", path.display())))?;
            let clip = MotionClip::from_json(&text)?;
            if clip.fps() != fps {
                return Err(SynthError::Base(format!("base fps {} differs from pipeline fps {fps}", clip.fps())));
            }
            if clip.joint_names() != rest.joint_names() {
                return Err(SynthError::Base("base joint set differs from the dictionary rest pose".into()));
            }
            if clip.frame_count() == frames {
                return Ok(clip);
            }
            if *strict {
                return Err(SynthError::Base(format!(
                    "base has {} frames but {frames} are required",
                    clip.frame_count()
                )));
            }
            let data = (0..frames).flat_map(|t| clip.frame(t % clip.frame_count()).to_vec()).collect();
            Ok(MotionClip::from_flat(fps, clip.joint_names().to_vec(), data)?)
        }
    }
}

/// Rest-relative offsets of `unit` retimed through `warp` to
/// `target_duration_s` and sampled at `fps`.
pub fn unit_to_offsets(
    clip: &MotionClip,
    rest: &Pose,
    warp: &Warp,
    target_duration_s: f64,
    fps: f64,
) -> Result<MotionClip, MotionError> {
    time_warp_at(clip, warp, target_duration_s, fps)?.minus_pose(rest)
}

/// Per-sentence selection seed; independent of other sentences.
pub fn sentence_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntrySummary {
    pub sentence_index: usize,
    pub unit_id: String,
    pub onset_s: f64,
    pub end_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apex_error_s: Option<f64>,
    pub clamped: bool,
    pub compressed: bool,
    pub shifted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub mode: ScheduleMode,
    pub seed: u64,
    pub fps: f64,
    pub duration_s: f64,
    pub entries: Vec<EntrySummary>,
    pub skipped: Vec<SkipRecord>,
    pub dropped: Vec<SkipRecord>,
    pub notes: Vec<String>,
    /// Over entries that were neither clamped, compressed nor shifted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apex_error_max_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apex_error_mean_s: Option<f64>,
}

impl SynthesisReport {
    fn from_schedule(schedule: &Schedule, config: &SynthesisConfig, skipped: Vec<SkipRecord>) -> Self {
        let entries: Vec<EntrySummary> = schedule
            .entries
            .iter()
            .map(|e| EntrySummary {
                sentence_index: e.sentence_index,
                unit_id: e.unit_id.clone(),
                onset_s: e.onset_s,
                end_s: e.end_s,
                apex_error_s: e.apex_error_s,
                clamped: e.clamped,
                compressed: e.compressed,
                shifted: e.shifted,
            })
            .collect();
        let errors: Vec<f64> = entries
            .iter()
            .filter(|e| !(e.clamped || e.compressed || e.shifted))
            .filter_map(|e| e.apex_error_s)
            .collect();
        let max = errors.iter().copied().reduce(f64::max);
        let mean = (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64);
        Self {
            mode: config.mode,
            seed: config.seed,
            fps: schedule.fps,
            duration_s: schedule.total_duration_s,
            entries,
            skipped,
            dropped: schedule.dropped.clone(),
            notes: schedule.notes.clone(),
            apex_error_max_s: max,
            apex_error_mean_s: mean,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mode = match self.mode {
            ScheduleMode::Onset => "onset",
            ScheduleMode::StrokeAligned => "stroke",
        };
        let _ = writeln!(out, "mode {mode}  seed {}  fps {}  duration {:.3}s", self.seed, self.fps, self.duration_s);
        let _ = writeln!(out, "gestures {}", self.entries.len());
        for e in &self.entries {
            let mut flags = Vec::new();
            if e.clamped {
                flags.push("clamped");
            }
            if e.compressed {
                flags.push("compressed");
            }
            if e.shifted {
                flags.push("shifted");
            }
            let apex = e.apex_error_s.map(|a| format!("  apex_error {a:.4}s")).unwrap_or_default();
            let _ = writeln!(
                out,
                "  [{}] {} {:.3}-{:.3}s{apex}{}",
                e.sentence_index,
                e.unit_id,
                e.onset_s,
                e.end_s,
                if flags.is_empty() { String::new() } else { format!("  ({})", flags.join(", ")) }
            );
        }
        for s in &self.skipped {
            let _ = writeln!(out, "skipped {s}");
        }
        for s in &self.dropped {
            let _ = writeln!(out, "dropped {s}");
        }
        for n in &self.notes {
            let _ = writeln!(out, "note {n}");
        }
        if let (Some(max), Some(mean)) = (self.apex_error_max_s, self.apex_error_mean_s) {
            let _ = writeln!(out, "apex_error max {max:.4}s mean {mean:.4}s");
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisOutput {
    pub motion: MotionClip,
    pub schedule: Schedule,
    pub report: SynthesisReport,
    /// Input script with the chosen `gesture_id` filled in.
    pub script: GestureScript,
}

pub fn synthesize(
    script: &GestureScript,
    dict: &Dictionary,
    base: &BaseGestureSpec,
    config: &SynthesisConfig,
) -> Result<SynthesisOutput, SynthError> {
    config.validate()?;
    script.validate()?;
    let mut skipped = Vec::new();
    let selections: Vec<Option<Selection>> = script
        .sentences
        .iter()
        .map(|s| {
            let slot = s.end_s - s.start_s;
            match select_unit(dict, s.intent, s.semantic_tag.as_deref(), slot, sentence_seed(config.seed, s.index)) {
                Ok(sel) => Some(sel),
                Err(e) => {
                    let reason = match e {
                        DictionaryError::NoGestureAvailable { .. } => e.to_string(),
                        other => format!("selection failed: {other}"),
                    };
                    skipped.push(SkipRecord { sentence_index: s.index, reason });
                    None
                }
            }
        })
        .collect();
    let schedule_config =
        ScheduleConfig { fps: config.fps, min_gesture_s: config.min_gesture_s, apex_anchor: config.apex_anchor };
    let schedule = match config.mode {
        ScheduleMode::Onset => schedule_onset(script, &selections, &schedule_config),
        ScheduleMode::StrokeAligned => schedule_stroke_aligned(script, &selections, &schedule_config),
    };
    let mut schedule = resolve_overlaps(schedule, config.min_gesture_s);
    // "no unit selected" records duplicate the selection skips gathered above
    schedule.skipped.retain(|s| !skipped.iter().any(|k| k.sentence_index == s.sentence_index));
    skipped.append(&mut schedule.skipped.clone());
    skipped.sort_by_key(|s| s.sentence_index);
    schedule.skipped = skipped.clone();

    let rest = dict.rest_pose();
    let base_clip = make_base(base, rest, schedule.total_duration_s, config.fps)?;
    let mut layers = Vec::with_capacity(schedule.entries.len());
    for entry in &schedule.entries {
        let unit = dict.unit(&entry.unit_id).expect("scheduled unit comes from the dictionary");
        let offsets =
            unit_to_offsets(&unit.clip, rest, &entry.retime.warp, entry.retime.target_duration_s, config.fps)?;
        layers.push(OffsetLayer { start_frame: entry.start_frame, offsets });
    }
    let motion = additive_blend(&base_clip, &layers, config.ramp_s)?;

    let mut annotated = script.clone();
    for s in annotated.sentences.iter_mut() {
        s.gesture_id = schedule.entries.iter().find(|e| e.sentence_index == s.index).map(|e| e.unit_id.clone());
    }
    let report = SynthesisReport::from_schedule(&schedule, config, skipped);
    Ok(SynthesisOutput { motion, schedule, report, script: annotated })
}
