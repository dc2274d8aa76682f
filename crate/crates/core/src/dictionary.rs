//! The gesture library: staged gesture units indexed by intent and nominal
//! duration, loaded from a JSON manifest that references per-unit clip files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::motion::{MotionClip, Pose};
use crate::script::IntentLabel;

pub const DEFAULT_REST_TOLERANCE: f64 = 0.02;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitIssue {
    pub unit_id: String,
    pub message: String,
}

impl fmt::Display for UnitIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.unit_id, self.message)
    }
}

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{} unit(s) failed validation: {}", .0.len(), join_issues(.0))]
    Validation(Vec<UnitIssue>),
    #[error("no gesture available for intent {intent}{}", .tag.as_ref().map(|t| format!(" with tag {t}")).unwrap_or_default())]
    NoGestureAvailable { intent: IntentLabel, tag: Option<String> },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn join_issues(issues: &[UnitIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Nominal duration bucket of a unit, in whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum DurationVariant {
    Short,
    Medium,
    Long,
}

impl DurationVariant {
    pub const ALL: [DurationVariant; 3] = [DurationVariant::Short, DurationVariant::Medium, DurationVariant::Long];

    pub fn seconds(self) -> u32 {
        match self {
            DurationVariant::Short => 3,
            DurationVariant::Medium => 6,
            DurationVariant::Long => 9,
        }
    }

    /// Bucket closest to `duration_s`.
    pub fn nearest(duration_s: f64) -> Self {
        Self::ALL
            .into_iter()
            .min_by(|a, b| {
                let da = (a.seconds() as f64 - duration_s).abs();
                let db = (b.seconds() as f64 - duration_s).abs();
                da.total_cmp(&db)
            })
            .unwrap()
    }
}

impl TryFrom<u32> for DurationVariant {
    type Error = String;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        match value {
            3 => Ok(DurationVariant::Short),
            6 => Ok(DurationVariant::Medium),
            9 => Ok(DurationVariant::Long),
            other => Err(format!("duration variant must be 3, 6 or 9 seconds, got {other}")),
        }
    }
}

impl From<DurationVariant> for u32 {
    fn from(v: DurationVariant) -> u32 {
        v.seconds()
    }
}

/// Inclusive frame boundaries `[first, last]`; the stage spans the time
/// between those two frames.
pub type FrameInterval = [usize; 2];

/// Kendon-stage annotation of a unit. Present intervals are ordered
/// preparation, stroke, hold, retraction and may share boundary frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageMap {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preparation: Option<FrameInterval>,
    pub stroke: FrameInterval,
    pub stroke_apex: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hold: Option<FrameInterval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retraction: Option<FrameInterval>,
}

impl StageMap {
    pub fn validate(&self, frame_count: usize) -> Result<(), String> {
        let last = frame_count.saturating_sub(1);
        let named = [
            ("preparation", self.preparation),
            ("stroke", Some(self.stroke)),
            ("hold", self.hold),
            ("retraction", self.retraction),
        ];
        let mut prev: Option<(&str, FrameInterval)> = None;
        for (name, interval) in named {
            let Some([a, b]) = interval else { continue };
            if a >= b {
                return Err(format!("{name} interval [{a}, {b}] is empty"));
            }
            if b > last {
                return Err(format!("{name} interval [{a}, {b}] exceeds last frame {last}"));
            }
            if let Some((prev_name, [_, pb])) = prev {
                if a < pb {
                    return Err(format!("{name} starts at {a} before {prev_name} ends at {pb}"));
                }
            }
            prev = Some((name, [a, b]));
        }
        let [s0, s1] = self.stroke;
        if self.stroke_apex < s0 || self.stroke_apex > s1 {
            return Err(format!("stroke_apex {} outside stroke [{s0}, {s1}]", self.stroke_apex));
        }
        Ok(())
    }

    /// Same stages shifted by `-offset` frames.
    pub fn shifted_back(&self, offset: usize) -> StageMap {
        let s = |[a, b]: FrameInterval| [a - offset, b - offset];
        StageMap {
            preparation: self.preparation.map(s),
            stroke: s(self.stroke),
            stroke_apex: self.stroke_apex - offset,
            hold: self.hold.map(s),
            retraction: self.retraction.map(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GestureUnit {
    pub id: String,
    pub intent: IntentLabel,
    pub semantic_tag: Option<String>,
    pub duration_variant: DurationVariant,
    /// Clip path relative to the manifest directory.
    pub file: String,
    pub clip: MotionClip,
    pub stages: StageMap,
}

impl GestureUnit {
    pub fn duration_s(&self) -> f64 {
        self.clip.duration_s()
    }

    /// Time of the stroke apex from the first frame.
    pub fn apex_offset_s(&self) -> f64 {
        self.stages.stroke_apex as f64 / self.clip.fps()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitEntry {
    pub id: String,
    pub intent: IntentLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_tag: Option<String>,
    pub duration_variant_s: DurationVariant,
    pub file: String,
    pub stages: StageMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub rest_pose: String,
    pub units: Vec<UnitEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    rest_pose: Pose,
    rest_pose_file: String,
    units: Vec<GestureUnit>,
    index: BTreeMap<(IntentLabel, DurationVariant), Vec<usize>>,
}

impl Dictionary {
    /// Validates every unit and builds the (intent, variant) index. All
    /// problems are collected before failing.
    pub fn new(
        rest_pose: Pose,
        rest_pose_file: impl Into<String>,
        units: Vec<GestureUnit>,
        rest_tolerance: f64,
    ) -> Result<Self, DictionaryError> {
        let mut issues = Vec::new();
        let mut seen = BTreeSet::new();
        for unit in &units {
            let mut issue = |message: String| issues.push(UnitIssue { unit_id: unit.id.clone(), message });
            if !seen.insert(unit.id.as_str()) {
                issue("duplicate unit id".into());
            }
            if unit.clip.joint_names() != rest_pose.joint_names() {
                issue("clip joints differ from the rest pose joints".into());
                continue;
            }
            if let Err(m) = unit.stages.validate(unit.clip.frame_count()) {
                issue(m);
            }
            if unit.semantic_tag.is_some() && unit.intent != IntentLabel::Semantic {
                issue("semantic_tag set on a non-semantic unit".into());
            }
            let last = unit.clip.frame_count() - 1;
            for (name, frame) in [("first", 0), ("last", last)] {
                let d = rest_pose.mean_joint_distance(unit.clip.frame(frame));
                if d > rest_tolerance {
                    issue(format!("{name} frame is {d:.4} from the rest pose (tolerance {rest_tolerance})"));
                }
            }
        }
        if !issues.is_empty() {
            return Err(DictionaryError::Validation(issues));
        }
        let mut index: BTreeMap<(IntentLabel, DurationVariant), Vec<usize>> = BTreeMap::new();
        for (i, unit) in units.iter().enumerate() {
            index.entry((unit.intent, unit.duration_variant)).or_default().push(i);
        }
        Ok(Self { rest_pose, rest_pose_file: rest_pose_file.into(), units, index })
    }

    pub fn empty(rest_pose: Pose) -> Self {
        Self { rest_pose, rest_pose_file: "rest.json".into(), units: Vec::new(), index: BTreeMap::new() }
    }

    pub fn rest_pose(&self) -> &Pose {
        &self.rest_pose
    }

    pub fn units(&self) -> &[GestureUnit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn unit(&self, id: &str) -> Option<&GestureUnit> {
        self.units.iter().find(|u| u.id == id)
    }

    /// Units declared for `intent` in `variant`, in manifest order.
    pub fn indexed(&self, intent: IntentLabel, variant: DurationVariant) -> impl Iterator<Item = &GestureUnit> {
        self.index.get(&(intent, variant)).into_iter().flatten().map(|&i| &self.units[i])
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            version: 1,
            rest_pose: self.rest_pose_file.clone(),
            units: self
                .units
                .iter()
                .map(|u| UnitEntry {
                    id: u.id.clone(),
                    intent: u.intent,
                    semantic_tag: u.semantic_tag.clone(),
                    duration_variant_s: u.duration_variant,
                    file: u.file.clone(),
                    stages: u.stages.clone(),
                })
                .collect(),
        }
    }

    /// Writes manifest, rest pose and every clip under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), DictionaryError> {
        let write = |rel: &str, text: String| {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
            }
            std::fs::write(&path, text).map_err(|e| io_err(&path, e))
        };
        write(&self.rest_pose_file, self.rest_pose.to_json())?;
        for unit in &self.units {
            write(&unit.file, unit.clip.to_json())?;
        }
        write(MANIFEST_FILE, serialize_manifest(self))
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> DictionaryError {
    DictionaryError::Io { path: path.to_path_buf(), message: e.to_string() }
}

/// Canonical JSON manifest for `dict`.
pub fn serialize_manifest(dict: &Dictionary) -> String {
    canonical::to_string(&dict.manifest())
}

/// Loads a manifest and its clip files. `manifest_path` may be the manifest
/// itself or the directory holding `manifest.json`.
pub fn load_dictionary(manifest_path: &Path, rest_tolerance: f64) -> Result<Dictionary, DictionaryError> {
    let manifest_path = if manifest_path.is_dir() { manifest_path.join(MANIFEST_FILE) } else { manifest_path.to_path_buf() };
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| DictionaryError::Manifest { path: manifest_path.clone(), message: e.to_string() })?;
    if manifest.version != 1 {
        return Err(DictionaryError::Manifest {
            path: manifest_path.clone(),
            message: format!("unsupported version {}", manifest.version),
        });
    }
    let rest_path = base.join(&manifest.rest_pose);
    let rest_text = std::fs::read_to_string(&rest_path).map_err(|e| io_err(&rest_path, e))?;
    let rest_pose = Pose::from_json(&rest_text).map_err(|e| DictionaryError::Manifest { path: rest_path, message: e.to_string() })?;

    let mut units = Vec::with_capacity(manifest.units.len());
    let mut issues = Vec::new();
    for entry in manifest.units {
        let clip_path = base.join(&entry.file);
        let clip_text = std::fs::read_to_string(&clip_path).map_err(|e| io_err(&clip_path, e))?;
        match MotionClip::from_json(&clip_text) {
            Ok(clip) => units.push(GestureUnit {
                id: entry.id,
                intent: entry.intent,
                semantic_tag: entry.semantic_tag,
                duration_variant: entry.duration_variant_s,
                file: entry.file,
                clip,
                stages: entry.stages,
            }),
            Err(e) => issues.push(UnitIssue { unit_id: entry.id, message: e.to_string() }),
        }
    }
    match Dictionary::new(rest_pose, manifest.rest_pose, units, rest_tolerance) {
        Err(DictionaryError::Validation(mut more)) => {
            issues.append(&mut more);
            Err(DictionaryError::Validation(issues))
        }
        Ok(_) if !issues.is_empty() => Err(DictionaryError::Validation(issues)),
        other => other,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Selection<'a> {
    pub unit: &'a GestureUnit,
    /// The chosen variant is longer than the slot.
    pub needs_compression: bool,
}

/// Picks a unit for a sentence slot: the largest duration variant that fits
/// the slot, or the smallest one (flagged for compression) when none fits.
/// Ties inside a variant are broken uniformly at random from `seed`.
pub fn select_unit<'a>(
    dict: &'a Dictionary,
    intent: IntentLabel,
    semantic_tag: Option<&str>,
    slot_duration_s: f64,
    seed: u64,
) -> Result<Selection<'a>, DictionaryError> {
    if !(slot_duration_s.is_finite() && slot_duration_s > 0.0) {
        return Err(DictionaryError::InvalidArgument(format!("slot duration must be positive, got {slot_duration_s}")));
    }
    let matches_tag = |u: &GestureUnit| {
        intent != IntentLabel::Semantic || semantic_tag.is_none() || u.semantic_tag.as_deref() == semantic_tag
    };
    let available: Vec<DurationVariant> = DurationVariant::ALL
        .into_iter()
        .filter(|v| dict.indexed(intent, *v).any(matches_tag))
        .collect();
    let no_gesture = || DictionaryError::NoGestureAvailable { intent, tag: semantic_tag.map(str::to_string) };
    let fitting = available.iter().rev().find(|v| v.seconds() as f64 <= slot_duration_s);
    let (variant, needs_compression) = match fitting {
        Some(v) => (*v, false),
        None => (*available.first().ok_or_else(no_gesture)?, true),
    };
    let mut candidates: Vec<&GestureUnit> = dict.indexed(intent, variant).filter(|u| matches_tag(u)).collect();
    candidates.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = candidates[rng.gen_range(0..candidates.len())];
    Ok(Selection { unit, needs_compression })
}
