//! Regenerates everything under `fixtures/`: the 42-unit mini dictionary,
//! the demo transcript with synthetic word timings, a continuous clip for
//! segmentation, a replay-cache entry, and the golden pipeline outputs.
//!
//! cargo run -p gesturekit --example build_fixtures

use std::path::{Path, PathBuf};

use gesturekit::dictionary::{Dictionary, DurationVariant, GestureUnit, StageMap, DEFAULT_REST_TOLERANCE};
use gesturekit::intent::{
    build_script, ChatRequest, ChatTransport, Classifier, ClassifierMode, Lexicon, ReplayCache, TransportError,
};
use gesturekit::motion::{smoothstep, MotionClip, Pose};
use gesturekit::script::{segment_sentences, timings_to_json, write_textgrid, IntentLabel, WordTiming};
use gesturekit::segmentation::{detect_units, export_units, SegmentationParams, UnitLabel, UnitLabels};
use gesturekit::synth::{synthesize, BaseGestureSpec, ScheduleMode, SynthesisConfig};

const FPS: f64 = 25.0;

const JOINTS: [&str; 9] =
    ["spine", "neck", "head", "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist"];

const REST: [[f64; 3]; 9] = [
    [0.0, 1.0, 0.0],
    [0.0, 1.45, 0.0],
    [0.0, 1.6, 0.0],
    [0.18, 1.4, 0.0],
    [0.2, 1.12, 0.02],
    [0.22, 0.88, 0.04],
    [-0.18, 1.4, 0.0],
    [-0.2, 1.12, 0.02],
    [-0.22, 0.88, 0.04],
];

pub const TRANSCRIPT: &str = "Hello everyone and welcome to our afternoon session on the future of small robots in everyday homes. \
My name is Dana and I have spent years building machines that talk with their hands. \
Look at the shape of this arm. \
The reason is simple because people read motion before they read words. \
You must never ignore the timing of a gesture. \
The results were awesome. \
Our latest prototype has a massive reach and can lift a whole crate of apples with one hand without any strain at all. \
So the robot waits, then moves exactly when the important word arrives in the sentence. \
Imagine a kitchen where the helper points to the right drawer just as you ask for it, and then quietly steps back out of your way so you can keep cooking without distractions. \
Thank you all for listening and goodbye.";

/// Stage durations in seconds: lead rest, preparation, stroke, hold,
/// retraction, trailing rest.
fn stage_seconds(variant: DurationVariant) -> [f64; 6] {
    match variant {
        DurationVariant::Short => [0.2, 0.6, 0.6, 0.4, 0.8, 0.4],
        DurationVariant::Medium => [0.3, 0.9, 0.8, 2.0, 1.4, 0.6],
        DurationVariant::Long => [0.4, 1.2, 1.0, 3.6, 1.8, 1.0],
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Wrist displacements (stroke start, stroke end) for a gesture family.
fn shape(intent: IntentLabel, k: usize) -> ([f64; 3], [f64; 3]) {
    let flip = if k == 0 { 1.0 } else { -1.0 };
    match intent {
        IntentLabel::Welcome => ([0.05, 0.3, 0.15], [0.3, 0.4, 0.2]),
        IntentLabel::Farewell => ([0.1, 0.5, 0.1], [0.25 * flip, 0.55, 0.1]),
        IntentLabel::Description => ([0.0, 0.25, 0.25], [0.2, 0.2, 0.3]),
        IntentLabel::Explanation => ([0.05, 0.2, 0.2], [-0.05, 0.28, 0.3]),
        IntentLabel::Emphasis => ([0.02, 0.45, 0.2], [0.02, 0.15, 0.25]),
        IntentLabel::SelfReference => ([-0.05, 0.3, 0.1], [-0.18, 0.42, 0.12]),
        IntentLabel::Semantic => ([0.05, 0.3, 0.2], [0.1 + 0.15 * k as f64, 0.4, 0.25]),
    }
}

/// Pose with the wrist displaced by `d` and the elbow by half of it. `side`
/// selects right (0), left (1) or both (2) arms.
fn displaced(d: [f64; 3], side: usize) -> Vec<[f64; 3]> {
    let mut p = REST.to_vec();
    let arms: &[(usize, f64)] = match side {
        0 => &[(6, -1.0)],
        1 => &[(3, 1.0)],
        _ => &[(3, 1.0), (6, -1.0)],
    };
    for &(shoulder, mirror) in arms {
        let v = [d[0] * mirror, d[1], d[2]];
        for c in 0..3 {
            p[shoulder + 1][c] += 0.5 * v[c];
            p[shoulder + 2][c] += v[c];
        }
    }
    p
}

fn lerp_pose(a: &[[f64; 3]], b: &[[f64; 3]], w: f64) -> Vec<[f64; 3]> {
    a.iter().zip(b).map(|(p, q)| [p[0] + (q[0] - p[0]) * w, p[1] + (q[1] - p[1]) * w, p[2] + (q[2] - p[2]) * w]).collect()
}

struct Built {
    clip: MotionClip,
    stages: StageMap,
}

/// Rest, ease to the stroke start, stroke, slow drift through the hold,
/// ease back to rest, rest. Frames at the ends are exactly the rest pose.
fn gesture_clip(seconds: [f64; 6], start: &[[f64; 3]], end: &[[f64; 3]], drift: &[[f64; 3]]) -> Built {
    let f = |t: f64| (t * FPS).round() as usize;
    let mut bounds = [0usize; 7];
    let mut acc = 0.0;
    for (i, s) in seconds.iter().enumerate() {
        acc += s;
        bounds[i + 1] = f(acc);
    }
    let [_, lead, prep, stroke, hold, retr, last] = bounds;
    let rest = REST.to_vec();
    let mut data = Vec::new();
    for t in 0..=last {
        let seg = |a: usize, b: usize| (t - a) as f64 / (b - a) as f64;
        let pose = if t <= lead {
            rest.clone()
        } else if t <= prep {
            lerp_pose(&rest, start, smoothstep(seg(lead, prep)))
        } else if t <= stroke {
            lerp_pose(start, end, smoothstep(seg(prep, stroke)))
        } else if t <= hold {
            lerp_pose(end, drift, seg(stroke, hold))
        } else if t <= retr {
            lerp_pose(drift, &rest, smoothstep(seg(hold, retr)))
        } else {
            rest.clone()
        };
        data.extend(pose.into_iter().map(|p| p.map(round6)));
    }
    let clip = MotionClip::from_flat(FPS, JOINTS.iter().map(|s| s.to_string()).collect(), data).unwrap();
    let has_hold = hold > stroke;
    let stages = StageMap {
        preparation: Some([lead, prep]),
        stroke: [prep, stroke],
        stroke_apex: (prep + stroke) / 2,
        hold: has_hold.then_some([stroke, hold]),
        retraction: Some([hold, retr]),
    };
    Built { clip, stages }
}

fn unit(intent: IntentLabel, k: usize, variant: DurationVariant) -> GestureUnit {
    let (d1, d2) = shape(intent, k);
    let side = match (intent, k) {
        (IntentLabel::Welcome, _) | (IntentLabel::Description, 1) => 2,
        (_, 0) => 0,
        _ => 1,
    };
    let mut seconds = stage_seconds(variant);
    // the second short unit of each family has no hold
    if variant == DurationVariant::Short && k == 1 {
        seconds[4] += seconds[3];
        seconds[3] = 0.0;
    }
    let drift_d = [d2[0] * 0.95, d2[1] * 0.9, d2[2]];
    let built = gesture_clip(seconds, &displaced(d1, side), &displaced(d2, side), &displaced(drift_d, side));
    let semantic_tag = (intent == IntentLabel::Semantic).then(|| if k == 0 { "thumbs_up" } else { "big" }.to_string());
    let id = format!("{}_{}_{}", intent.as_str(), variant.seconds(), k);
    GestureUnit {
        file: format!("units/{id}.json"),
        id,
        intent,
        semantic_tag,
        duration_variant: variant,
        clip: built.clip,
        stages: built.stages,
    }
}

fn rest_pose() -> Pose {
    Pose::new(JOINTS.iter().map(|s| s.to_string()).collect(), REST.to_vec()).unwrap()
}

fn mini_dictionary() -> Dictionary {
    let mut units = Vec::new();
    for intent in IntentLabel::ALL {
        for variant in DurationVariant::ALL {
            for k in 0..2 {
                units.push(unit(intent, k, variant));
            }
        }
    }
    Dictionary::new(rest_pose(), "rest.json", units, DEFAULT_REST_TOLERANCE).unwrap()
}

/// Aligner-style words: punctuation stripped, case kept, duration growing
/// with word length, short gaps between words and longer ones between
/// sentences.
fn synthetic_timings(text: &str) -> Vec<WordTiming> {
    let mut t = 0.3;
    let mut words = Vec::new();
    for sentence in segment_sentences(text).unwrap() {
        for token in &sentence.tokens {
            let word: String = token.trim_matches(|c: char| !(c.is_alphanumeric() || c == '\'')).to_string();
            if word.is_empty() {
                continue;
            }
            let d = 0.08 + 0.05 * word.chars().count() as f64;
            words.push(WordTiming { word, start_s: round6(t), end_s: round6(t + d) });
            t += d + 0.05;
        }
        t += 0.55;
    }
    words
}

/// Continuous performance: several short units separated by rest.
fn performance_clip() -> (MotionClip, Vec<(IntentLabel, Option<String>)>) {
    let order = [(IntentLabel::Welcome, 0), (IntentLabel::Emphasis, 1), (IntentLabel::Explanation, 1)];
    let mut data: Vec<[f64; 3]> = Vec::new();
    let rest_frames = (0.6 * FPS) as usize;
    let push_rest = |data: &mut Vec<[f64; 3]>| {
        for _ in 0..rest_frames {
            data.extend(REST);
        }
    };
    push_rest(&mut data);
    let mut labels = Vec::new();
    for (intent, k) in order {
        let (d1, d2) = shape(intent, k);
        // no hold: a still hold longer than the minimum rest would split the unit
        let built = gesture_clip([0.0, 0.6, 0.6, 0.0, 0.8, 0.0], &displaced(d1, 0), &displaced(d2, 0), &displaced(d2, 0));
        data.extend_from_slice(built.clip.as_flat());
        push_rest(&mut data);
        labels.push((intent, None));
    }
    let clip = MotionClip::from_flat(FPS, JOINTS.iter().map(|s| s.to_string()).collect(), data).unwrap();
    (clip, labels)
}

struct Canned(String);

impl ChatTransport for Canned {
    fn complete(&self, _request: &ChatRequest) -> Result<String, TransportError> {
        Ok(self.0.clone())
    }
}

fn write(path: &Path, text: &str) {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).unwrap();
    }
    std::fs::write(path, text).unwrap();
    println!("wrote {}", path.display());
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dict_dir = root.join("dictionary");
    let _ = std::fs::remove_dir_all(&dict_dir);
    let dict = mini_dictionary();
    dict.write_to(&dict_dir).unwrap();
    println!("wrote {} units to {}", dict.len(), dict_dir.display());

    let timings = synthetic_timings(TRANSCRIPT);
    write(&root.join("talk.txt"), &format!("{TRANSCRIPT}\n"));
    write(&root.join("talk.timings.json"), &timings_to_json(&timings));
    let xmax = timings.last().unwrap().end_s + 0.3;
    write(&root.join("talk.TextGrid"), &write_textgrid(&timings, xmax));

    let golden = root.join("golden");
    let offline = Classifier::offline(Lexicon::builtin());
    let (script, _) = build_script(TRANSCRIPT, &timings, &offline).unwrap();
    write(&golden.join("script.json"), &script.to_json().unwrap());

    let config = SynthesisConfig { seed: 42, mode: ScheduleMode::StrokeAligned, ..SynthesisConfig::default() };
    let out = synthesize(&script, &dict, &BaseGestureSpec::RestPose, &config).unwrap();
    write(&golden.join("motion.json"), &out.motion.to_json());
    write(&golden.join("motion.schedule.json"), &out.schedule.to_json());
    write(&golden.join("motion.report.txt"), &out.report.to_text());
    write(&golden.join("motion.script.json"), &out.script.to_json().unwrap());

    let three = gesturekit::script::GestureScript { version: 1, sentences: script.sentences[..3].to_vec() };
    write(&root.join("three.script.json"), &three.to_json().unwrap());

    // replay cache: the LLM labels the first sentence differently from the lexicon
    let cache_dir = root.join("llm_cache");
    let _ = std::fs::remove_dir_all(&cache_dir);
    let items: Vec<serde_json::Value> = script
        .sentences
        .iter()
        .map(|s| {
            let (intent, keyword) = if s.index == 0 { ("welcome", "everyone") } else { (s.intent.as_str(), s.keyword.as_str()) };
            let mut v = serde_json::json!({ "index": s.index, "intent": intent, "keyword": keyword });
            if let Some(tag) = &s.semantic_tag {
                v["semantic_tag"] = tag.clone().into();
            }
            v
        })
        .collect();
    let mut llm = Classifier::offline(Lexicon::builtin());
    llm.mode = ClassifierMode::Llm;
    llm.cache = Some(ReplayCache::open(&cache_dir).unwrap());
    llm.transport = Some(Box::new(Canned(serde_json::to_string(&items).unwrap())));
    build_script(TRANSCRIPT, &timings, &llm).unwrap();
    println!("wrote replay cache under {}", cache_dir.display());

    let seg_dir = root.join("segmentation");
    let _ = std::fs::remove_dir_all(&seg_dir);
    let (clip, labels) = performance_clip();
    write(&seg_dir.join("performance.json"), &clip.to_json());
    let detections = detect_units(&clip, &SegmentationParams::default()).unwrap();
    assert_eq!(detections.len(), labels.len(), "performance clip segments into its units");
    let tmp = tempfile::tempdir().unwrap();
    let fragment = export_units(&clip, &detections, tmp.path()).unwrap();
    let labels = UnitLabels {
        labels: fragment
            .units
            .iter()
            .zip(labels)
            .map(|(u, (intent, semantic_tag))| (u.id.clone(), UnitLabel { intent, semantic_tag, duration_variant_s: None }))
            .collect(),
    };
    write(&seg_dir.join("labels.json"), &gesturekit::canonical::to_string(&labels));
}
