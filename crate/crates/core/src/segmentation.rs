//! Gesture-unit detection: cut continuous upper-body motion into units at
//! rest segments and annotate each unit's preparation / stroke / hold /
//! retraction stages from its speed profile.
//!
//! Speed sample `t` measures the motion between frames `t` and `t + 1` and
//! is attributed to frame `t`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::canonical;
use std::collections::BTreeMap;

use crate::dictionary::{Dictionary, DictionaryError, DurationVariant, GestureUnit, StageMap};
use crate::script::IntentLabel;
use crate::motion::{norm, sub, MotionClip, MotionError, Pose};

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("invalid detection: {0}")]
    Detection(String),
    #[error("i/o error at {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("labels: {0}")]
    Labels(String),
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    pub smoothing_window_frames: usize,
    /// Rest threshold as a fraction of the 95th-percentile smoothed speed.
    pub rest_speed_fraction: f64,
    pub min_rest_s: f64,
    pub min_unit_s: f64,
    /// Stroke band as a fraction of the unit's peak speed.
    pub stroke_fraction: f64,
    pub min_hold_s: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            smoothing_window_frames: 5,
            rest_speed_fraction: 0.05,
            min_rest_s: 0.3,
            min_unit_s: 0.8,
            stroke_fraction: 0.5,
            min_hold_s: 0.2,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        let bad = |m: &str| Err(SegmentationError::Params(m.to_string()));
        if self.smoothing_window_frames == 0 || self.smoothing_window_frames.is_multiple_of(2) {
            return bad("smoothing window must be a positive odd number of frames");
        }
        for (name, f) in [("rest_speed_fraction", self.rest_speed_fraction), ("stroke_fraction", self.stroke_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(SegmentationError::Params(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        for (name, v) in [("min_rest_s", self.min_rest_s), ("min_unit_s", self.min_unit_s), ("min_hold_s", self.min_hold_s)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SegmentationError::Params(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedSeries {
    pub fps: f64,
    pub values: Vec<f64>,
}

/// Mean joint displacement per frame, smoothed with a centered,
/// edge-truncated moving average.
pub fn compute_speed(clip: &MotionClip, smoothing_window_frames: usize) -> Result<SpeedSeries, SegmentationError> {
    let frames = clip.frame_count();
    if frames < 2 {
        return Err(MotionError::InvalidArgument("speed needs at least 2 frames".into()).into());
    }
    let joints = clip.joint_count() as f64;
    let raw: Vec<f64> = (0..frames - 1)
        .map(|t| clip.frame(t).iter().zip(clip.frame(t + 1)).map(|(a, b)| norm(sub(*b, *a))).sum::<f64>() / joints)
        .collect();
    let half = smoothing_window_frames / 2;
    let n = raw.len();
    let values = (0..n)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(n - 1);
            raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    Ok(SpeedSeries { fps: clip.fps(), values })
}

/// Linear-interpolated percentile, `q` in `[0, 1]`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// A detected unit: inclusive source frame interval plus stages in
/// unit-local frame indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub interval: [usize; 2],
    pub stages: StageMap,
}

/// Rest threshold used by [`detect_units`] for this speed series.
pub fn rest_threshold(speed: &SpeedSeries, params: &SegmentationParams) -> f64 {
    params.rest_speed_fraction * percentile(&speed.values, 0.95)
}

fn min_frames(seconds: f64, fps: f64) -> usize {
    (seconds * fps - 1e-9).ceil().max(1.0) as usize
}

/// Maximal runs `[start, end]` (inclusive sample indices) where `pred` holds.
fn runs(values: &[f64], pred: impl Fn(f64) -> bool) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &v) in values.iter().enumerate() {
        match (pred(v), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push([s, i - 1]);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push([s, values.len() - 1]);
    }
    out
}

pub fn detect_units(clip: &MotionClip, params: &SegmentationParams) -> Result<Vec<Detection>, SegmentationError> {
    params.validate()?;
    if clip.frame_count() < 3 {
        return Err(MotionError::InvalidArgument("detection needs at least 3 frames".into()).into());
    }
    let speed = compute_speed(clip, params.smoothing_window_frames)?;
    let tau = rest_threshold(&speed, params);
    if tau <= 0.0 {
        return Ok(Vec::new());
    }
    let fps = clip.fps();
    let min_rest = min_frames(params.min_rest_s, fps);
    let rests: Vec<[usize; 2]> = runs(&speed.values, |v| v < tau)
        .into_iter()
        .filter(|[a, b]| b - a + 1 >= min_rest)
        .collect();
    let mut out = Vec::new();
    for pair in rests.windows(2) {
        let start = pair[0][1];
        let end = pair[1][0];
        if ((end - start) as f64) < params.min_unit_s * fps - 1e-9 {
            continue;
        }
        let stages = annotate_stages(&speed.values, start, end, tau, params, fps);
        out.push(Detection { interval: [start, end], stages: stages.shifted_back(start) });
    }
    Ok(out)
}

/// Stage map in source frame indices for the unit `[start, end]`.
fn annotate_stages(
    speed: &[f64],
    start: usize,
    end: usize,
    tau: f64,
    params: &SegmentationParams,
    fps: f64,
) -> StageMap {
    // first maximum
    let mut apex = start;
    for t in start..=end {
        if speed[t] > speed[apex] {
            apex = t;
        }
    }
    let band = params.stroke_fraction * speed[apex];
    let mut s0 = apex;
    while s0 > start && speed[s0 - 1] >= band {
        s0 -= 1;
    }
    let mut s1 = apex;
    while s1 < end && speed[s1 + 1] >= band {
        s1 += 1;
    }
    // samples s0..=s1 move frames s0..=s1+1
    let stroke_end = (s1 + 1).min(end);
    let stroke = [s0, stroke_end.max(s0 + 1)];

    let preparation = (stroke[0] > start).then_some([start, stroke[0]]);
    let hold = first_sub_threshold_run(speed, stroke[1], end, tau)
        .filter(|[a, b]| b - a + 1 >= min_frames(params.min_hold_s, fps))
        .map(|[_, b]| [stroke[1], b + 1]);
    let tail_start = hold.map_or(stroke[1], |h| h[1]);
    let retraction = (tail_start < end).then_some([tail_start, end]);
    StageMap { preparation, stroke, stroke_apex: apex, hold, retraction }
}

/// First run of sub-`tau` samples within `[from, end)`.
fn first_sub_threshold_run(speed: &[f64], from: usize, end: usize, tau: f64) -> Option<[usize; 2]> {
    let mut t = from;
    while t < end && speed[t] >= tau {
        t += 1;
    }
    if t >= end {
        return None;
    }
    let a = t;
    while t + 1 < end && speed[t + 1] < tau {
        t += 1;
    }
    Some([a, t])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentUnit {
    pub id: String,
    /// `"UNLABELED"` until a human assigns an intent.
    pub intent: String,
    pub duration_variant_s: DurationVariant,
    pub file: String,
    pub source_interval: [usize; 2],
    pub stages: StageMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFragment {
    pub version: u32,
    pub source_hash: String,
    pub units: Vec<FragmentUnit>,
}

pub const UNLABELED: &str = "UNLABELED";
pub const FRAGMENT_FILE: &str = "fragment.json";

pub fn source_hash(clip: &MotionClip) -> String {
    let digest = Sha256::digest(clip.to_json().as_bytes());
    hex::encode(&digest[..4])
}

/// Writes each detection as its own clip file under `out_dir` plus a
/// `fragment.json` manifest stub awaiting intent labels.
pub fn export_units(
    clip: &MotionClip,
    detections: &[Detection],
    out_dir: &Path,
) -> Result<ManifestFragment, SegmentationError> {
    let io = |path: &Path, e: std::io::Error| SegmentationError::Io { path: path.to_path_buf(), message: e.to_string() };
    std::fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let hash = source_hash(clip);
    let mut units = Vec::with_capacity(detections.len());
    for (k, det) in detections.iter().enumerate() {
        let [a, b] = det.interval;
        let unit_clip = clip
            .slice(a, b)
            .map_err(|e| SegmentationError::Detection(format!("detection {k}: {e}")))?;
        det.stages
            .validate(unit_clip.frame_count())
            .map_err(|e| SegmentationError::Detection(format!("detection {k}: {e}")))?;
        let id = format!("unit_{hash}_{k}");
        let file = format!("{id}.json");
        let path = out_dir.join(&file);
        std::fs::write(&path, unit_clip.to_json()).map_err(|e| io(&path, e))?;
        units.push(FragmentUnit {
            id,
            intent: UNLABELED.into(),
            duration_variant_s: DurationVariant::nearest(unit_clip.duration_s()),
            file,
            source_interval: det.interval,
            stages: det.stages.clone(),
        });
    }
    let fragment = ManifestFragment { version: 1, source_hash: hash, units };
    let path = out_dir.join(FRAGMENT_FILE);
    std::fs::write(&path, canonical::to_string(&fragment)).map_err(|e| io(&path, e))?;
    Ok(fragment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitLabel {
    pub intent: IntentLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_tag: Option<String>,
    /// Overrides the variant inferred from the clip duration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_variant_s: Option<DurationVariant>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitLabels {
    pub labels: BTreeMap<String, UnitLabel>,
}

/// Mean of the first and last frames of every clip.
pub fn mean_endpoint_pose(clips: &[&MotionClip]) -> Result<Pose, SegmentationError> {
    let first = clips.first().ok_or_else(|| SegmentationError::Labels("no units to average".into()))?;
    let mut acc = vec![[0.0; 3]; first.joint_count()];
    for clip in clips {
        if clip.joint_names() != first.joint_names() {
            return Err(SegmentationError::Labels("units have different joint sets".into()));
        }
        for frame in [clip.frame(0), clip.frame(clip.frame_count() - 1)] {
            for (a, p) in acc.iter_mut().zip(frame) {
                for c in 0..3 {
                    a[c] += p[c];
                }
            }
        }
    }
    let n = (2 * clips.len()) as f64;
    let positions = acc.into_iter().map(|a| [a[0] / n, a[1] / n, a[2] / n]).collect();
    Ok(Pose::new(first.joint_names().to_vec(), positions)?)
}

/// Turns an exported fragment plus human labels into a dictionary. Every
/// fragment unit must be labeled; unknown label ids are rejected.
pub fn dictionary_from_fragment(
    fragment_dir: &Path,
    labels: &UnitLabels,
    rest_pose: Option<Pose>,
    rest_tolerance: f64,
) -> Result<Dictionary, SegmentationError> {
    let io = |path: &Path, e: std::io::Error| SegmentationError::Io { path: path.to_path_buf(), message: e.to_string() };
    let path = fragment_dir.join(FRAGMENT_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| io(&path, e))?;
    let fragment: ManifestFragment =
        serde_json::from_str(&text).map_err(|e| SegmentationError::Labels(format!("{}: {e}", path.display())))?;
    let known: Vec<&str> = fragment.units.iter().map(|u| u.id.as_str()).collect();
    let unknown: Vec<&String> = labels.labels.keys().filter(|k| !known.contains(&k.as_str())).collect();
    if !unknown.is_empty() {
        return Err(SegmentationError::Labels(format!("labels for unknown units {unknown:?}")));
    }
    let unlabeled: Vec<&str> = known.iter().copied().filter(|id| !labels.labels.contains_key(*id)).collect();
    if !unlabeled.is_empty() {
        return Err(SegmentationError::Labels(format!("units without labels {unlabeled:?}")));
    }
    let mut units = Vec::with_capacity(fragment.units.len());
    for entry in &fragment.units {
        let label = &labels.labels[&entry.id];
        let clip_path = fragment_dir.join(&entry.file);
        let clip_text = std::fs::read_to_string(&clip_path).map_err(|e| io(&clip_path, e))?;
        let clip = MotionClip::from_json(&clip_text)?;
        units.push(GestureUnit {
            id: entry.id.clone(),
            intent: label.intent,
            semantic_tag: label.semantic_tag.clone(),
            duration_variant: label.duration_variant_s.unwrap_or(entry.duration_variant_s),
            file: format!("units/{}.json", entry.id),
            clip,
            stages: entry.stages.clone(),
        });
    }
    let rest = match rest_pose {
        Some(p) => p,
        None => mean_endpoint_pose(&units.iter().map(|u| &u.clip).collect::<Vec<_>>())?,
    };
    Ok(Dictionary::new(rest, "rest.json", units, rest_tolerance)?)
}
