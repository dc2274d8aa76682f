//! Fixed-rate skeletal motion: clips, poses and the numerical operations the
//! rest of the pipeline is built on (resampling, time warping, finite
//! differences, additive layering and the derivative-aware L1 metric).
//!
//! Positions are stored frame-major as `[x, y, z]` triples, so frame `t`,
//! joint `j` lives at index `t * joint_count + j`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("incompatible clips: {0}")]
    IncompatibleClips(String),
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("malformed motion json: {0}")]
    Json(String),
}

pub type Vec3 = [f64; 3];

/// A single skeleton pose, e.g. the dictionary rest pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    joint_names: Vec<String>,
    positions: Vec<Vec3>,
}

impl Pose {
    pub fn new(joint_names: Vec<String>, positions: Vec<Vec3>) -> Result<Self, MotionError> {
        if joint_names.is_empty() {
            return Err(MotionError::InvalidClip("pose has no joints".into()));
        }
        if joint_names.len() != positions.len() {
            return Err(MotionError::InvalidClip(format!(
                "pose has {} joint names but {} positions",
                joint_names.len(),
                positions.len()
            )));
        }
        check_finite(&positions)?;
        Ok(Self { joint_names, positions })
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    /// Mean Euclidean distance between corresponding joints.
    pub fn mean_joint_distance(&self, other: &[Vec3]) -> f64 {
        mean_joint_distance(&self.positions, other)
    }

    pub fn to_json(&self) -> String {
        canonical::to_string(&PoseFile {
            version: 1,
            joints: self.joint_names.clone(),
            positions: self.positions.clone(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, MotionError> {
        let file: PoseFile =
            serde_json::from_str(text).map_err(|e| MotionError::Json(e.to_string()))?;
        if file.version != 1 {
            return Err(MotionError::Json(format!("unsupported pose version {}", file.version)));
        }
        Pose::new(file.joints, file.positions)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseFile {
    version: u32,
    joints: Vec<String>,
    positions: Vec<Vec3>,
}

/// A fixed-rate sequence of skeleton poses.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    fps: f64,
    joint_names: Vec<String>,
    data: Vec<Vec3>,
}

impl MotionClip {
    /// Builds a clip from per-frame joint positions.
    pub fn new(
        fps: f64,
        joint_names: Vec<String>,
        frames: Vec<Vec<Vec3>>,
    ) -> Result<Self, MotionError> {
        let joints = joint_names.len();
        let mut data = Vec::with_capacity(frames.len() * joints);
        for (t, frame) in frames.into_iter().enumerate() {
            if frame.len() != joints {
                return Err(MotionError::InvalidClip(format!(
                    "frame {t} has {} joints, expected {joints}",
                    frame.len()
                )));
            }
            data.extend(frame);
        }
        Self::from_flat(fps, joint_names, data)
    }

    /// Builds a clip from frame-major flat positions.
    pub fn from_flat(
        fps: f64,
        joint_names: Vec<String>,
        data: Vec<Vec3>,
    ) -> Result<Self, MotionError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(MotionError::InvalidClip(format!("fps must be positive, got {fps}")));
        }
        if joint_names.is_empty() {
            return Err(MotionError::InvalidClip("clip has no joints".into()));
        }
        if data.is_empty() || !data.len().is_multiple_of(joint_names.len()) {
            return Err(MotionError::InvalidClip(format!(
                "{} positions do not form whole frames of {} joints",
                data.len(),
                joint_names.len()
            )));
        }
        check_finite(&data)?;
        Ok(Self { fps, joint_names, data })
    }

    /// Every frame set to `pose`.
    pub fn constant(pose: &Pose, fps: f64, frame_count: usize) -> Result<Self, MotionError> {
        if frame_count == 0 {
            return Err(MotionError::InvalidArgument("frame count must be at least 1".into()));
        }
        let mut data = Vec::with_capacity(frame_count * pose.joint_count());
        for _ in 0..frame_count {
            data.extend_from_slice(pose.positions());
        }
        Self::from_flat(fps, pose.joint_names().to_vec(), data)
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    pub fn frame_count(&self) -> usize {
        self.data.len() / self.joint_names.len()
    }

    pub fn duration_s(&self) -> f64 {
        (self.frame_count() - 1) as f64 / self.fps
    }

    pub fn frame(&self, t: usize) -> &[Vec3] {
        let j = self.joint_count();
        &self.data[t * j..(t + 1) * j]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[Vec3]> {
        self.data.chunks_exact(self.joint_count())
    }

    pub fn as_flat(&self) -> &[Vec3] {
        &self.data
    }

    pub fn pose_at(&self, t: usize) -> Pose {
        Pose {
            joint_names: self.joint_names.clone(),
            positions: self.frame(t).to_vec(),
        }
    }

    /// Frames `start..=end`, same fps and joints.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self, MotionError> {
        if start > end || end >= self.frame_count() {
            return Err(MotionError::InvalidArgument(format!(
                "slice [{start}, {end}] outside clip of {} frames",
                self.frame_count()
            )));
        }
        let j = self.joint_count();
        Ok(Self {
            fps: self.fps,
            joint_names: self.joint_names.clone(),
            data: self.data[start * j..(end + 1) * j].to_vec(),
        })
    }

    /// Same clip with every position multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            fps: self.fps,
            joint_names: self.joint_names.clone(),
            data: self.data.iter().map(|p| [p[0] * factor, p[1] * factor, p[2] * factor]).collect(),
        }
    }

    /// Per-frame difference `self[t] - pose`.
    pub fn minus_pose(&self, pose: &Pose) -> Result<Self, MotionError> {
        if pose.joint_names() != self.joint_names() {
            return Err(MotionError::IncompatibleClips("pose joints differ from clip joints".into()));
        }
        let j = self.joint_count();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, p)| sub(*p, pose.positions()[i % j]))
            .collect();
        Ok(Self { fps: self.fps, joint_names: self.joint_names.clone(), data })
    }

    pub fn to_json(&self) -> String {
        canonical::to_string(&self.to_file())
    }

    pub fn to_value(&self) -> serde_json::Value {
        canonical::to_value(&self.to_file())
    }

    fn to_file(&self) -> ClipFile {
        ClipFile {
            version: 1,
            fps: self.fps,
            joints: self.joint_names.clone(),
            frames: self.frames().map(|f| f.to_vec()).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, MotionError> {
        let file: ClipFile =
            serde_json::from_str(text).map_err(|e| MotionError::Json(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, MotionError> {
        let file: ClipFile =
            serde_json::from_value(value).map_err(|e| MotionError::Json(e.to_string()))?;
        Self::from_file(file)
    }

    fn from_file(file: ClipFile) -> Result<Self, MotionError> {
        if file.version != 1 {
            return Err(MotionError::Json(format!("unsupported clip version {}", file.version)));
        }
        Self::new(file.fps, file.joints, file.frames)
    }

    /// `frame,joint,x,y,z` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,joint,x,y,z\n");
        for (t, frame) in self.frames().enumerate() {
            for (name, p) in self.joint_names.iter().zip(frame) {
                out.push_str(&format!("{t},{name},{},{},{}\n", p[0], p[1], p[2]));
            }
        }
        out
    }

    /// Linearly interpolated pose at fractional frame position `pos`, which
    /// must lie in `[0, F-1]`. Positions within 1e-9 of a whole frame return
    /// that frame unchanged.
    fn sample_into(&self, pos: f64, out: &mut Vec<Vec3>) {
        let last = self.frame_count() - 1;
        let pos = pos.clamp(0.0, last as f64);
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-9 {
            out.extend_from_slice(self.frame(nearest as usize));
            return;
        }
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(last);
        let frac = pos - lo as f64;
        for (a, b) in self.frame(lo).iter().zip(self.frame(hi)) {
            out.push(lerp(*a, *b, frac));
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClipFile {
    version: u32,
    fps: f64,
    joints: Vec<String>,
    frames: Vec<Vec<Vec3>>,
}

/// Result of [`derivative_l1_loss`].
///
/// Derivatives are plain frame differences with no fps scaling, so the
/// velocity and acceleration terms are per-frame quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub position_l1: f64,
    pub velocity_l1: f64,
    pub acceleration_l1: f64,
    pub total: f64,
}

impl LossReport {
    /// Arithmetic mean of per-clip reports.
    pub fn mean(reports: &[LossReport]) -> Option<LossReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&LossReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let position_l1 = avg(|r| r.position_l1);
        let velocity_l1 = avg(|r| r.velocity_l1);
        let acceleration_l1 = avg(|r| r.acceleration_l1);
        Some(LossReport {
            position_l1,
            velocity_l1,
            acceleration_l1,
            total: position_l1 + velocity_l1 + acceleration_l1,
        })
    }
}

pub fn resample(clip: &MotionClip, target_fps: f64) -> Result<MotionClip, MotionError> {
    if !(target_fps.is_finite() && target_fps > 0.0) {
        return Err(MotionError::InvalidArgument(format!("target fps must be positive, got {target_fps}")));
    }
    if target_fps == clip.fps {
        return Ok(clip.clone());
    }
    let duration = clip.duration_s();
    let out_frames = (duration * target_fps).round() as usize + 1;
    let last = clip.frame_count() - 1;
    let mut data = Vec::with_capacity(out_frames * clip.joint_count());
    for k in 0..out_frames {
        let pos = if k + 1 == out_frames {
            last as f64
        } else {
            (k as f64 * clip.fps / target_fps).min(last as f64)
        };
        clip.sample_into(pos, &mut data);
    }
    Ok(MotionClip { fps: target_fps, joint_names: clip.joint_names.clone(), data })
}

/// Forward frame difference: `out[t] = in[t+1] - in[t]`.
pub fn derivative(clip: &MotionClip) -> Result<MotionClip, MotionError> {
    let frames = clip.frame_count();
    if frames < 2 {
        return Err(MotionError::InvalidArgument("derivative needs at least 2 frames".into()));
    }
    let j = clip.joint_count();
    let data = (0..(frames - 1) * j).map(|i| sub(clip.data[i + j], clip.data[i])).collect();
    Ok(MotionClip { fps: clip.fps, joint_names: clip.joint_names.clone(), data })
}

/// Mean absolute error on positions plus the same on first and second frame
/// differences. Symmetric in its arguments.
pub fn derivative_l1_loss(
    ground_truth: &MotionClip,
    predicted: &MotionClip,
) -> Result<LossReport, MotionError> {
    ensure_compatible(ground_truth, predicted)?;
    if ground_truth.frame_count() != predicted.frame_count() {
        return Err(MotionError::IncompatibleClips(format!(
            "frame counts differ: {} vs {}",
            ground_truth.frame_count(),
            predicted.frame_count()
        )));
    }
    if ground_truth.frame_count() < 3 {
        return Err(MotionError::IncompatibleClips("loss needs at least 3 frames".into()));
    }
    let position_l1 = mean_abs_diff(&ground_truth.data, &predicted.data);
    let gt_vel = derivative(ground_truth)?;
    let pr_vel = derivative(predicted)?;
    let velocity_l1 = mean_abs_diff(&gt_vel.data, &pr_vel.data);
    let acceleration_l1 = mean_abs_diff(&derivative(&gt_vel)?.data, &derivative(&pr_vel)?.data);
    Ok(LossReport {
        position_l1,
        velocity_l1,
        acceleration_l1,
        total: position_l1 + velocity_l1 + acceleration_l1,
    })
}

/// Piecewise-linear monotone map from normalized output time to normalized
/// source time, both in `[0, 1]`.
///
/// Knots may repeat an output coordinate to express a jump (a source span
/// collapsed to zero output time); evaluation at such a knot takes the later
/// source value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warp {
    knots: Vec<(f64, f64)>,
}

impl Warp {
    pub fn identity() -> Self {
        Self { knots: vec![(0.0, 0.0), (1.0, 1.0)] }
    }

    pub fn from_knots(knots: Vec<(f64, f64)>) -> Result<Self, MotionError> {
        if knots.len() < 2 {
            return Err(MotionError::InvalidArgument("warp needs at least two knots".into()));
        }
        if knots[0] != (0.0, 0.0) || *knots.last().unwrap() != (1.0, 1.0) {
            return Err(MotionError::InvalidArgument("warp must map 0 to 0 and 1 to 1".into()));
        }
        for w in knots.windows(2) {
            let ((u0, v0), (u1, v1)) = (w[0], w[1]);
            if !(u0.is_finite() && v0.is_finite() && u1.is_finite() && v1.is_finite()) {
                return Err(MotionError::InvalidArgument("warp knots must be finite".into()));
            }
            if u1 < u0 || v1 < v0 {
                return Err(MotionError::InvalidArgument(format!(
                    "warp is not monotone between ({u0}, {v0}) and ({u1}, {v1})"
                )));
            }
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn is_identity(&self) -> bool {
        self.knots.iter().all(|(u, v)| u == v)
    }

    /// Source time for output time `u`.
    pub fn eval(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        // last knot with knot.u <= u
        let idx = self.knots.partition_point(|k| k.0 <= u).saturating_sub(1);
        if idx + 1 >= self.knots.len() {
            return self.knots[self.knots.len() - 1].1;
        }
        let (u0, v0) = self.knots[idx];
        let (u1, v1) = self.knots[idx + 1];
        if u1 <= u0 {
            return v1;
        }
        let v = v0 + (v1 - v0) * (u - u0) / (u1 - u0);
        v.clamp(v0, v1)
    }

    /// Earliest output time mapping to source time `v`.
    pub fn inverse(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, 1.0);
        for w in self.knots.windows(2) {
            let ((u0, v0), (u1, v1)) = (w[0], w[1]);
            if v <= v1 {
                if v1 <= v0 {
                    return u0;
                }
                return u0 + (u1 - u0) * (v - v0) / (v1 - v0);
            }
        }
        1.0
    }
}

/// Resamples `clip` so that it spans `target_duration_s` at its own fps, with
/// output time mapped through `warp`.
pub fn time_warp(
    clip: &MotionClip,
    warp: &Warp,
    target_duration_s: f64,
) -> Result<MotionClip, MotionError> {
    time_warp_at(clip, warp, target_duration_s, clip.fps)
}

/// [`time_warp`] sampled at an arbitrary output rate.
pub fn time_warp_at(
    clip: &MotionClip,
    warp: &Warp,
    target_duration_s: f64,
    out_fps: f64,
) -> Result<MotionClip, MotionError> {
    if !(target_duration_s.is_finite() && target_duration_s > 0.0) {
        return Err(MotionError::InvalidArgument(format!(
            "target duration must be positive, got {target_duration_s}"
        )));
    }
    if !(out_fps.is_finite() && out_fps > 0.0) {
        return Err(MotionError::InvalidArgument(format!("fps must be positive, got {out_fps}")));
    }
    // re-validate in case the warp was deserialized
    let warp = Warp::from_knots(warp.knots.clone())?;
    let out_frames = warped_frame_count(target_duration_s, out_fps);
    let last = (clip.frame_count() - 1) as f64;
    let mut data = Vec::with_capacity(out_frames * clip.joint_count());
    for k in 0..out_frames {
        let u = if k + 1 == out_frames {
            1.0
        } else {
            (k as f64 / (out_fps * target_duration_s)).min(1.0)
        };
        clip.sample_into(warp.eval(u) * last, &mut data);
    }
    Ok(MotionClip { fps: out_fps, joint_names: clip.joint_names.clone(), data })
}

/// Number of frames used to render `duration_s` at `fps`.
pub fn warped_frame_count(duration_s: f64, fps: f64) -> usize {
    (duration_s * fps).round() as usize + 1
}

/// An offset clip added onto a base starting at `start_frame`.
#[derive(Debug, Clone)]
pub struct OffsetLayer {
    pub start_frame: usize,
    pub offsets: MotionClip,
}

/// Cubic ease `3u² − 2u³` on `[0, 1]`.
pub fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Blend weight for local frame `j` of a layer of `len` frames.
pub fn layer_weight(j: usize, len: usize, ramp_frames: f64) -> f64 {
    if ramp_frames <= 0.0 {
        return 1.0;
    }
    let head = j as f64 / ramp_frames;
    let tail = (len - 1 - j) as f64 / ramp_frames;
    smoothstep(head.min(tail).min(1.0))
}

/// `out[t] = base[t] + Σ wᵢ(t)·layerᵢ[t − startᵢ]`. Layer frames falling past
/// the end of the base are dropped.
pub fn additive_blend(
    base: &MotionClip,
    layers: &[OffsetLayer],
    ramp_s: f64,
) -> Result<MotionClip, MotionError> {
    if !(ramp_s.is_finite() && ramp_s >= 0.0) {
        return Err(MotionError::InvalidArgument(format!("ramp must be nonnegative, got {ramp_s}")));
    }
    let ramp_frames = ramp_s * base.fps;
    let mut out = base.clone();
    let j = base.joint_count();
    let base_frames = base.frame_count();
    for layer in layers {
        ensure_compatible(base, &layer.offsets)?;
        let len = layer.offsets.frame_count();
        for local in 0..len {
            let t = layer.start_frame + local;
            if t >= base_frames {
                break;
            }
            let w = layer_weight(local, len, ramp_frames);
            if w == 0.0 {
                continue;
            }
            for (dst, off) in out.data[t * j..(t + 1) * j].iter_mut().zip(layer.offsets.frame(local)) {
                for c in 0..3 {
                    dst[c] += w * off[c];
                }
            }
        }
    }
    Ok(out)
}

fn ensure_compatible(a: &MotionClip, b: &MotionClip) -> Result<(), MotionError> {
    if a.fps != b.fps {
        return Err(MotionError::IncompatibleClips(format!("fps differ: {} vs {}", a.fps, b.fps)));
    }
    if a.joint_names != b.joint_names {
        return Err(MotionError::IncompatibleClips("joint sets differ".into()));
    }
    Ok(())
}

fn check_finite(values: &[Vec3]) -> Result<(), MotionError> {
    match values.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
        Some(i) => Err(MotionError::InvalidClip(format!("non-finite position at index {i}"))),
        None => Ok(()),
    }
}

fn mean_abs_diff(a: &[Vec3], b: &[Vec3]) -> f64 {
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| (p[0] - q[0]).abs() + (p[1] - q[1]).abs() + (p[2] - q[2]).abs())
        .sum();
    sum / (a.len() * 3) as f64
}

pub(crate) fn mean_joint_distance(a: &[Vec3], b: &[Vec3]) -> f64 {
    if a.is_empty() || a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(p, q)| norm(sub(*p, *q))).sum::<f64>() / a.len() as f64
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn lerp(a: Vec3, b: Vec3, t: f64) -> Vec3 {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}
