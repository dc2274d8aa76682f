//! Placement of selected gesture units on the global timeline.
//!
//! Two placement modes exist: units start at their sentence onset, or units
//! are shifted so that their stroke apex lands on the sentence keyword.
//! Retiming is expressed as a [`RetimePlan`], a list of stage segments with
//! source and target durations, from which the piecewise-linear [`Warp`]
//! follows. The stroke segment keeps its source duration whenever possible.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dictionary::{GestureUnit, Selection, StageMap};
use crate::motion::{warped_frame_count, Warp};
use crate::script::GestureScript;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    /// Everything before the stroke (rest lead-in, preparation).
    Lead,
    Stroke,
    Hold,
    /// Everything after the stroke except the hold (retraction, rest).
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub source_s: f64,
    pub target_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetimePlan {
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpKind {
    Identity,
    Uniform,
    StageAware,
}

impl RetimePlan {
    /// Identity plan for a clip of `frame_count` frames at `fps`.
    pub fn from_stages(stages: &StageMap, fps: f64, frame_count: usize) -> Self {
        let t = |f: usize| f as f64 / fps;
        let end = t(frame_count - 1);
        let mut bounds: Vec<(SegmentKind, f64, f64)> = vec![(SegmentKind::Lead, 0.0, t(stages.stroke[0]))];
        bounds.push((SegmentKind::Stroke, t(stages.stroke[0]), t(stages.stroke[1])));
        let mut cursor = t(stages.stroke[1]);
        if let Some([h0, h1]) = stages.hold {
            bounds.push((SegmentKind::Tail, cursor, t(h0)));
            bounds.push((SegmentKind::Hold, t(h0), t(h1)));
            cursor = t(h1);
        }
        bounds.push((SegmentKind::Tail, cursor, end));
        let segments = bounds
            .into_iter()
            .filter(|(_, a, b)| b > a)
            .map(|(kind, a, b)| Segment { kind, source_s: b - a, target_s: b - a })
            .collect();
        Self { segments }
    }

    pub fn for_unit(unit: &GestureUnit) -> Self {
        Self::from_stages(&unit.stages, unit.clip.fps(), unit.clip.frame_count())
    }

    pub fn source_duration_s(&self) -> f64 {
        self.segments.iter().map(|s| s.source_s).sum()
    }

    pub fn target_duration_s(&self) -> f64 {
        self.segments.iter().map(|s| s.target_s).sum()
    }

    fn total(&self, kind: SegmentKind, target: bool) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.kind == kind)
            .map(|s| if target { s.target_s } else { s.source_s })
            .sum()
    }

    pub fn stroke_target_s(&self) -> f64 {
        self.total(SegmentKind::Stroke, true)
    }

    pub fn is_identity(&self) -> bool {
        self.segments.iter().all(|s| s.source_s == s.target_s)
    }

    fn scale_kinds(&mut self, kinds: &[SegmentKind], factor: f64) {
        for s in self.segments.iter_mut().filter(|s| kinds.contains(&s.kind)) {
            s.target_s *= factor;
        }
    }

    /// Every segment scaled to reach `target_s`.
    pub fn uniform(&self, target_s: f64) -> Self {
        let factor = target_s / self.source_duration_s();
        Self {
            segments: self.segments.iter().map(|s| Segment { target_s: s.source_s * factor, ..*s }).collect(),
        }
    }

    /// Retimes from source durations to `target_s`: the hold absorbs the
    /// change first, then lead and tail scale proportionally; the stroke
    /// keeps its duration. Returns the plan and whether it had to fall back
    /// to uniform scaling.
    pub fn stage_aware(&self, target_s: f64) -> (Self, WarpKind) {
        let src = self.source_duration_s();
        let stroke = self.total(SegmentKind::Stroke, false);
        let hold = self.total(SegmentKind::Hold, false);
        let others = src - stroke - hold;
        if target_s == src {
            let identity = Self {
                segments: self.segments.iter().map(|s| Segment { target_s: s.source_s, ..*s }).collect(),
            };
            return (identity, WarpKind::Identity);
        }
        if target_s < stroke || (hold <= 0.0 && others <= 0.0) {
            return (self.uniform(target_s), WarpKind::Uniform);
        }
        let mut plan = self.uniform(src);
        let delta = target_s - src;
        if delta > 0.0 {
            if hold > 0.0 {
                plan.scale_kinds(&[SegmentKind::Hold], (hold + delta) / hold);
            } else {
                plan.scale_kinds(&[SegmentKind::Lead, SegmentKind::Tail], (others + delta) / others);
            }
        } else {
            let from_hold = hold.min(-delta);
            if hold > 0.0 {
                plan.scale_kinds(&[SegmentKind::Hold], (hold - from_hold) / hold);
            }
            let rest = -delta - from_hold;
            if rest > 0.0 {
                plan.scale_kinds(&[SegmentKind::Lead, SegmentKind::Tail], (others - rest) / others);
            }
        }
        (plan, WarpKind::StageAware)
    }

    /// Time that can be removed after the stroke without touching it.
    pub fn tail_capacity_s(&self) -> f64 {
        self.post_stroke().map(|s| s.target_s).sum()
    }

    fn post_stroke(&self) -> impl Iterator<Item = &Segment> {
        let first = self.segments.iter().position(|s| s.kind == SegmentKind::Stroke).map_or(0, |i| i + 1);
        self.segments[first..].iter()
    }

    /// Removes `amount_s` from the hold, then proportionally from the rest
    /// of the post-stroke segments. `None` if the capacity is insufficient.
    pub fn compress_tail(&self, amount_s: f64) -> Option<Self> {
        let capacity = self.tail_capacity_s();
        if amount_s > capacity + 1e-12 {
            return None;
        }
        let first = self.segments.iter().position(|s| s.kind == SegmentKind::Stroke).map_or(0, |i| i + 1);
        let mut plan = self.clone();
        let hold: f64 = plan.segments[first..].iter().filter(|s| s.kind == SegmentKind::Hold).map(|s| s.target_s).sum();
        let from_hold = hold.min(amount_s);
        let rest = amount_s - from_hold;
        let others = capacity - hold;
        for s in plan.segments[first..].iter_mut() {
            match s.kind {
                SegmentKind::Hold if hold > 0.0 => s.target_s *= (hold - from_hold) / hold,
                SegmentKind::Tail if others > 0.0 && rest > 0.0 => s.target_s *= ((others - rest) / others).max(0.0),
                _ => {}
            }
        }
        Some(plan)
    }

    /// Output-time position of source time `source_t`.
    pub fn map_source_time(&self, source_t: f64) -> f64 {
        let mut src = 0.0;
        let mut dst = 0.0;
        for s in &self.segments {
            if source_t <= src + s.source_s {
                return dst + s.target_s * ((source_t - src) / s.source_s).clamp(0.0, 1.0);
            }
            src += s.source_s;
            dst += s.target_s;
        }
        dst
    }

    /// Normalized warp from output time to source time.
    pub fn warp(&self) -> Warp {
        let src_total = self.source_duration_s();
        let dst_total = self.target_duration_s();
        let mut knots = vec![(0.0, 0.0)];
        let (mut src, mut dst) = (0.0, 0.0);
        for s in &self.segments[..self.segments.len().saturating_sub(1)] {
            src += s.source_s;
            dst += s.target_s;
            knots.push(((dst / dst_total).clamp(0.0, 1.0), (src / src_total).clamp(0.0, 1.0)));
        }
        knots.push((1.0, 1.0));
        // float drift can only break monotonicity by an ulp; repair it
        for i in 1..knots.len() {
            knots[i].0 = knots[i].0.max(knots[i - 1].0);
            knots[i].1 = knots[i].1.max(knots[i - 1].1);
        }
        Warp::from_knots(knots).expect("plan knots are monotone")
    }
}

/// Piecewise-linear warp retiming `unit` to `target_duration_s`, with the
/// kind of retime that was applied.
pub fn stage_aware_warp(unit: &GestureUnit, target_duration_s: f64) -> (Warp, WarpKind) {
    let (plan, kind) = RetimePlan::for_unit(unit).stage_aware(target_duration_s);
    if kind == WarpKind::Uniform && target_duration_s < unit.clip.duration_s() {
        log::info!("unit {}: target {target_duration_s:.3}s shorter than its stroke, compressing uniformly", unit.id);
    }
    (plan.warp(), kind)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retime {
    pub target_duration_s: f64,
    pub warp_kind: WarpKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apex_target_s: Option<f64>,
    pub plan: RetimePlan,
    pub warp: Warp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub sentence_index: usize,
    pub unit_id: String,
    /// Realized start, `start_frame / fps`.
    pub onset_s: f64,
    pub end_s: f64,
    pub start_frame: usize,
    pub frame_count: usize,
    pub retime: Retime,
    /// Source-clip time of the stroke apex.
    pub apex_source_s: f64,
    /// Realized global time of the stroke apex.
    pub apex_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apex_error_s: Option<f64>,
    /// End of the sentence the entry belongs to; limit for overlap shifts.
    pub slot_end_s: f64,
    pub clamped: bool,
    pub compressed: bool,
    pub shifted: bool,
}

impl ScheduleEntry {
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.frame_count - 1
    }

    fn refresh(&mut self, fps: f64) {
        self.retime.target_duration_s = self.retime.plan.target_duration_s();
        self.retime.warp = self.retime.plan.warp();
        self.frame_count = warped_frame_count(self.retime.target_duration_s, fps);
        self.onset_s = self.start_frame as f64 / fps;
        self.end_s = self.end_frame() as f64 / fps;
        self.apex_time_s = self.onset_s + self.retime.plan.map_source_time(self.apex_source_s);
        self.apex_error_s = self.retime.apex_target_s.map(|t| (self.apex_time_s - t).abs());
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub sentence_index: usize,
    pub reason: String,
}

impl fmt::Display for SkipRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sentence {}: {}", self.sentence_index, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub fps: f64,
    pub total_duration_s: f64,
    pub entries: Vec<ScheduleEntry>,
    pub skipped: Vec<SkipRecord>,
    pub dropped: Vec<SkipRecord>,
    pub notes: Vec<String>,
}

impl Schedule {
    pub fn total_frames(&self) -> usize {
        warped_frame_count(self.total_duration_s, self.fps)
    }

    pub fn to_json(&self) -> String {
        crate::canonical::to_string(self)
    }

    fn finish(&mut self, script_end_s: f64) {
        self.entries.sort_by_key(|e| (e.start_frame, e.sentence_index));
        let script_frames = warped_frame_count(script_end_s, self.fps);
        let last = self.entries.iter().map(|e| e.end_frame() + 1).max().unwrap_or(1);
        self.total_duration_s = (script_frames.max(last) - 1) as f64 / self.fps;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApexAnchor {
    KeywordOnset,
    KeywordMidpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub fps: f64,
    pub min_gesture_s: f64,
    pub apex_anchor: ApexAnchor,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { fps: 25.0, min_gesture_s: 1.5, apex_anchor: ApexAnchor::KeywordMidpoint }
    }
}

fn new_schedule(config: &ScheduleConfig) -> Schedule {
    Schedule {
        fps: config.fps,
        total_duration_s: 0.0,
        entries: Vec::new(),
        skipped: Vec::new(),
        dropped: Vec::new(),
        notes: Vec::new(),
    }
}

fn frame_of(t: f64, fps: f64) -> usize {
    (t * fps).round().max(0.0) as usize
}

#[allow(clippy::too_many_arguments)]
fn make_entry(
    sentence_index: usize,
    unit: &GestureUnit,
    plan: RetimePlan,
    warp_kind: WarpKind,
    start_frame: usize,
    slot_end_s: f64,
    apex_target_s: Option<f64>,
    fps: f64,
) -> ScheduleEntry {
    let mut entry = ScheduleEntry {
        sentence_index,
        unit_id: unit.id.clone(),
        onset_s: 0.0,
        end_s: 0.0,
        start_frame,
        frame_count: 0,
        retime: Retime { target_duration_s: 0.0, warp_kind, apex_target_s, warp: Warp::identity(), plan },
        apex_source_s: unit.apex_offset_s(),
        apex_time_s: 0.0,
        apex_error_s: None,
        slot_end_s,
        clamped: false,
        compressed: warp_kind != WarpKind::Identity,
        shifted: false,
    };
    entry.refresh(fps);
    entry
}

/// Onset-mode retime: identity when the unit fits the sentence, else
/// compression to the sentence span, skipped below `min_gesture_s`.
fn onset_entry(
    index: usize,
    unit: &GestureUnit,
    start_s: f64,
    end_s: f64,
    config: &ScheduleConfig,
) -> Result<ScheduleEntry, SkipRecord> {
    let span = end_s - start_s;
    let base = RetimePlan::for_unit(unit);
    let (plan, kind) = if unit.duration_s() <= span {
        (base, WarpKind::Identity)
    } else if span < config.min_gesture_s {
        return Err(SkipRecord {
            sentence_index: index,
            reason: format!("sentence span {span:.3}s is below the {:.2}s minimum gesture duration", config.min_gesture_s),
        });
    } else {
        (base.uniform(span), WarpKind::Uniform)
    };
    Ok(make_entry(index, unit, plan, kind, frame_of(start_s, config.fps), end_s, None, config.fps))
}

/// Every selected unit starts at its sentence onset.
pub fn schedule_onset(script: &GestureScript, selections: &[Option<Selection>], config: &ScheduleConfig) -> Schedule {
    let mut schedule = new_schedule(config);
    for (sentence, selection) in script.sentences.iter().zip(selections) {
        let Some(selection) = selection else {
            schedule.skipped.push(SkipRecord { sentence_index: sentence.index, reason: "no unit selected".into() });
            continue;
        };
        match onset_entry(sentence.index, selection.unit, sentence.start_s, sentence.end_s, config) {
            Ok(entry) => schedule.entries.push(entry),
            Err(skip) => schedule.skipped.push(skip),
        }
    }
    schedule.finish(script.end_s());
    schedule
}

/// Each unit is placed so its stroke apex lands on the sentence keyword,
/// never earlier than time zero or the previous entry's end.
pub fn schedule_stroke_aligned(
    script: &GestureScript,
    selections: &[Option<Selection>],
    config: &ScheduleConfig,
) -> Schedule {
    let fps = config.fps;
    let mut schedule = new_schedule(config);
    let mut next_free_frame = 0usize;
    for (sentence, selection) in script.sentences.iter().zip(selections) {
        let Some(selection) = selection else {
            schedule.skipped.push(SkipRecord { sentence_index: sentence.index, reason: "no unit selected".into() });
            continue;
        };
        let unit = selection.unit;
        let keyword_ok = sentence.keyword_start_s.is_finite()
            && sentence.keyword_end_s.is_finite()
            && sentence.keyword_end_s > sentence.keyword_start_s;
        if !keyword_ok {
            schedule.notes.push(format!("sentence {}: keyword timing missing, placed at sentence onset", sentence.index));
            match onset_entry(sentence.index, unit, sentence.start_s, sentence.end_s, config) {
                Ok(mut entry) => {
                    if entry.start_frame < next_free_frame {
                        entry.start_frame = next_free_frame;
                        entry.clamped = true;
                        entry.refresh(fps);
                    }
                    next_free_frame = entry.end_frame() + 1;
                    schedule.entries.push(entry);
                }
                Err(skip) => schedule.skipped.push(skip),
            }
            continue;
        }
        let span = sentence.end_s - sentence.start_s;
        let base = RetimePlan::for_unit(unit);
        let (plan, kind) = if !selection.needs_compression {
            (base, WarpKind::Identity)
        } else if span < config.min_gesture_s {
            schedule.skipped.push(SkipRecord {
                sentence_index: sentence.index,
                reason: format!("sentence span {span:.3}s is below the {:.2}s minimum gesture duration", config.min_gesture_s),
            });
            continue;
        } else {
            base.stage_aware(span)
        };
        let apex_target = match config.apex_anchor {
            ApexAnchor::KeywordMidpoint => 0.5 * (sentence.keyword_start_s + sentence.keyword_end_s),
            ApexAnchor::KeywordOnset => sentence.keyword_start_s,
        };
        let ideal_onset = apex_target - plan.map_source_time(unit.apex_offset_s());
        let ideal_frame = (ideal_onset * fps).round();
        let floor = next_free_frame as f64;
        let clamped = ideal_frame < floor;
        let start_frame = ideal_frame.max(floor) as usize;
        let mut entry = make_entry(sentence.index, unit, plan, kind, start_frame, sentence.end_s, Some(apex_target), fps);
        entry.clamped = clamped;
        next_free_frame = entry.end_frame() + 1;
        schedule.entries.push(entry);
    }
    schedule.finish(script.end_s());
    schedule
}

/// Left-to-right sweep making entries frame-disjoint. On a collision the
/// earlier entry's hold and tail are compressed first (never its stroke or
/// below `min_gesture_s`), then the later entry is delayed up to its
/// sentence end; if neither suffices the later entry is dropped.
pub fn resolve_overlaps(mut schedule: Schedule, min_gesture_s: f64) -> Schedule {
    let fps = schedule.fps;
    let mut entries = std::mem::take(&mut schedule.entries);
    entries.sort_by_key(|e| (e.start_frame, e.sentence_index));
    let mut kept: Vec<ScheduleEntry> = Vec::with_capacity(entries.len());
    for mut entry in entries {
        let Some(prev) = kept.last_mut() else {
            kept.push(entry);
            continue;
        };
        let need = (prev.end_frame() + 1).saturating_sub(entry.start_frame);
        if need == 0 {
            kept.push(entry);
            continue;
        }
        let original_prev = prev.clone();
        let floor_s = min_gesture_s.max(prev.retime.plan.stroke_target_s());
        let current = prev.retime.plan.target_duration_s();
        let max_shrink_s = prev.retime.plan.tail_capacity_s().min((current - floor_s).max(0.0));
        let shrink_frames = need.min((max_shrink_s * fps + 1e-9).floor() as usize);
        if shrink_frames > 0 {
            if let Some(plan) = prev.retime.plan.compress_tail(shrink_frames as f64 / fps) {
                prev.retime.plan = plan;
                prev.retime.warp_kind = WarpKind::StageAware;
                prev.compressed = true;
                prev.refresh(fps);
            }
        }
        let remaining = (prev.end_frame() + 1).saturating_sub(entry.start_frame);
        if remaining == 0 {
            kept.push(entry);
            continue;
        }
        let shifted_start = entry.start_frame + remaining;
        if shifted_start as f64 / fps <= entry.slot_end_s + 1e-9 {
            entry.start_frame = shifted_start;
            entry.shifted = true;
            entry.refresh(fps);
            kept.push(entry);
        } else {
            *prev = original_prev;
            schedule.dropped.push(SkipRecord {
                sentence_index: entry.sentence_index,
                reason: format!("collides with sentence {} and cannot be compressed or delayed", prev.sentence_index),
            });
        }
    }
    schedule.entries = kept;
    let end = schedule.total_duration_s;
    schedule.finish(end);
    schedule
}

/// Pairs of sentence indices whose entries share at least one frame.
pub fn overlapping_pairs(schedule: &Schedule) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, a) in schedule.entries.iter().enumerate() {
        for b in &schedule.entries[i + 1..] {
            if a.start_frame <= b.end_frame() && b.start_frame <= a.end_frame() {
                out.push((a.sentence_index, b.sentence_index));
            }
        }
    }
    out
}
