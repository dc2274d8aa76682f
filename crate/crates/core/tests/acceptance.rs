//! Acceptance checks, one line per criterion. Runs without networking.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gesturekit::dictionary::{
    load_dictionary, select_unit, serialize_manifest, Dictionary, StageMap, DEFAULT_REST_TOLERANCE,
};
use gesturekit::intent::{
    classify_offline, ChatRequest, ChatTransport, Classifier, ClassifierMode, Lexicon, Provenance, TransportError,
};
use gesturekit::motion::{derivative_l1_loss, time_warp_at, MotionClip};
use gesturekit::schedule::RetimePlan;
use gesturekit::script::{keyword_in_sentence, GestureScript, IntentLabel};
use gesturekit::segmentation::{detect_units, SegmentationParams};
use gesturekit::synth::{synthesize, BaseGestureSpec, ScheduleMode, SynthesisConfig};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixture_dict() -> Dictionary {
    load_dictionary(&fixtures().join("dictionary"), DEFAULT_REST_TOLERANCE).expect("fixture dictionary loads")
}

fn fixture_script() -> GestureScript {
    GestureScript::from_json(&std::fs::read_to_string(fixtures().join("golden/script.json")).unwrap()).unwrap()
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s, || format!("took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------------------
// 1. loss metric

/// Straight transcription of the metric over nested vectors.
fn oracle_loss(a: &[Vec<[f64; 3]>], b: &[Vec<[f64; 3]>]) -> [f64; 4] {
    fn diff(x: &[Vec<[f64; 3]>]) -> Vec<Vec<[f64; 3]>> {
        (1..x.len())
            .map(|t| (0..x[t].len()).map(|j| [0, 1, 2].map(|c| x[t][j][c] - x[t - 1][j][c])).collect())
            .collect()
    }
    fn mae(x: &[Vec<[f64; 3]>], y: &[Vec<[f64; 3]>]) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for t in 0..x.len() {
            for j in 0..x[t].len() {
                for c in 0..3 {
                    sum += (x[t][j][c] - y[t][j][c]).abs();
                    n += 1;
                }
            }
        }
        sum / n as f64
    }
    let p = mae(a, b);
    let (va, vb) = (diff(a), diff(b));
    let v = mae(&va, &vb);
    let acc = mae(&diff(&va), &diff(&vb));
    [p, v, acc, p + v + acc]
}

fn nested(rng: &mut ChaCha8Rng, frames: usize, joints: usize) -> Vec<Vec<[f64; 3]>> {
    (0..frames).map(|_| (0..joints).map(|_| [0; 3].map(|_| rng.gen_range(-1.0..1.0))).collect()).collect()
}

fn clip_of(frames: &[Vec<[f64; 3]>]) -> MotionClip {
    let names = (0..frames[0].len()).map(|j| format!("j{j}")).collect();
    MotionClip::new(25.0, names, frames.to_vec()).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = nested(&mut rng, 10, 4);
        let b = nested(&mut rng, 10, 4);
        let r = derivative_l1_loss(&clip_of(&a), &clip_of(&b)).map_err(|e| e.to_string())?;
        let o = oracle_loss(&a, &b);
        for (x, y) in [r.position_l1, r.velocity_l1, r.acceleration_l1, r.total].iter().zip(o) {
            worst = worst.max((x - y).abs());
        }
        let same = derivative_l1_loss(&clip_of(&a), &clip_of(&a)).unwrap();
        check([same.position_l1, same.velocity_l1, same.acceleration_l1, same.total] == [0.0; 4], || {
            format!("identical clips gave {same:?}")
        })?;
        let c: f64 = rng.gen_range(-2.0..2.0);
        let shifted: Vec<Vec<[f64; 3]>> = a.iter().map(|f| f.iter().map(|p| p.map(|x| x + c)).collect()).collect();
        let s = derivative_l1_loss(&clip_of(&a), &clip_of(&shifted)).unwrap();
        let expect = [c.abs(), 0.0, 0.0, c.abs()];
        for (x, y) in [s.position_l1, s.velocity_l1, s.acceleration_l1, s.total].iter().zip(expect) {
            check((x - y).abs() <= 1e-12, || format!("offset {c}: got {s:?}"))?;
        }
    }
    check(worst <= 1e-12, || format!("max deviation from oracle {worst:e}"))?;
    within(start.elapsed(), 1.0)?;
    Ok(format!("max oracle deviation {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// 2. rest base + zero ramp reproduces unit playback

fn criterion_2() -> Outcome {
    let dict = fixture_dict();
    let script = fixture_script();
    let start = Instant::now();
    let config = SynthesisConfig { ramp_s: 0.0, seed: 42, ..SynthesisConfig::default() };
    let out = synthesize(&script, &dict, &BaseGestureSpec::RestPose, &config).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut frames = 0;
    for e in &out.schedule.entries {
        let unit = dict.unit(&e.unit_id).unwrap();
        let warped = time_warp_at(&unit.clip, &e.retime.warp, e.retime.target_duration_s, config.fps).unwrap();
        check(warped.frame_count() == e.frame_count, || format!("entry {} frame count", e.sentence_index))?;
        for j in 0..warped.frame_count() {
            for (p, q) in out.motion.frame(e.start_frame + j).iter().zip(warped.frame(j)) {
                for c in 0..3 {
                    worst = worst.max((p[c] - q[c]).abs());
                }
            }
            frames += 1;
        }
    }
    check(frames > 0, || "no scheduled frames".into())?;
    check(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    within(start.elapsed(), 1.0)?;
    Ok(format!("{} entries, {frames} frames, max deviation {worst:.1e}", out.schedule.entries.len()))
}

// ---------------------------------------------------------------------------
// 3. stroke alignment

fn criterion_3() -> Outcome {
    let dict = fixture_dict();
    let script = fixture_script();
    let start = Instant::now();
    let config = SynthesisConfig { seed: 42, mode: ScheduleMode::StrokeAligned, ..SynthesisConfig::default() };
    let out = synthesize(&script, &dict, &BaseGestureSpec::RestPose, &config).map_err(|e| e.to_string())?;
    let tol = 0.5 / config.fps + 1e-9;
    let mut checked = 0;
    let mut worst = 0.0f64;
    for e in out.schedule.entries.iter().filter(|e| !(e.clamped || e.compressed || e.shifted)) {
        let unit = dict.unit(&e.unit_id).unwrap();
        let s = &script.sentences[e.sentence_index];
        let apex = e.start_frame as f64 / config.fps + unit.stages.stroke_apex as f64 / unit.clip.fps();
        let err = (apex - 0.5 * (s.keyword_start_s + s.keyword_end_s)).abs();
        check(err <= tol, || format!("sentence {}: apex error {err:.4}s", e.sentence_index))?;
        worst = worst.max(err);
        checked += 1;
    }
    check(checked >= 3, || format!("only {checked} unclamped, uncompressed entries"))?;
    let reported = out.report.apex_error_max_s.ok_or("report has no apex statistics")?;
    check((reported - worst).abs() <= 1e-9, || format!("report max {reported} vs recomputed {worst}"))?;
    within(start.elapsed(), 2.0)?;
    Ok(format!("{checked} aligned entries, max apex error {worst:.4}s (limit {:.4}s)", 0.5 / config.fps))
}

// ---------------------------------------------------------------------------
// 4. onset placement and variant selection

fn criterion_4() -> Outcome {
    let dict = fixture_dict();
    let script = fixture_script();
    let config = SynthesisConfig { seed: 42, mode: ScheduleMode::Onset, ..SynthesisConfig::default() };
    let out = synthesize(&script, &dict, &BaseGestureSpec::RestPose, &config).map_err(|e| e.to_string())?;
    let frame = 1.0 / config.fps;
    for e in &out.schedule.entries {
        let s = &script.sentences[e.sentence_index];
        check((e.onset_s - s.start_s).abs() <= frame + 1e-9, || {
            format!("sentence {}: onset {} vs start {}", e.sentence_index, e.onset_s, s.start_s)
        })?;
        let slot = s.end_s - s.start_s;
        let offered: Vec<u32> = dict
            .units()
            .iter()
            .filter(|u| u.intent == s.intent && (s.semantic_tag.is_none() || u.semantic_tag == s.semantic_tag))
            .map(|u| u.duration_variant.seconds())
            .collect();
        let expect = offered.iter().copied().filter(|&v| v as f64 <= slot).max().or(offered.iter().copied().min());
        let got = dict.unit(&e.unit_id).unwrap().duration_variant.seconds();
        check(Some(got) == expect, || format!("sentence {}: variant {got}s, oracle {expect:?}", e.sentence_index))?;
    }
    let placed = out.schedule.entries.len();
    check(placed + out.report.skipped.len() + out.report.dropped.len() == script.sentences.len(), || {
        "entries, skips and drops do not cover every sentence".into()
    })?;
    Ok(format!("{placed} entries within one frame of sentence onset, variants match oracle"))
}

// ---------------------------------------------------------------------------
// 5. segmentation

fn bump_signal(bumps: &[(usize, usize)], total: usize, scale: f64) -> MotionClip {
    let data = (0..total)
        .map(|t| {
            let mut x = 0.0;
            for &(a, len) in bumps {
                if t >= a && t < a + len {
                    let u = (t - a) as f64 / (len - 1) as f64;
                    x += 0.5 * (1.0 - (2.0 * std::f64::consts::PI * u).cos());
                }
            }
            vec![[scale * x, scale * 0.3 * x, 0.0], [0.0, 1.0 * scale, 0.0]]
        })
        .collect();
    MotionClip::new(25.0, vec!["wrist".into(), "head".into()], data).unwrap()
}

/// Independent threshold-crossing segmentation over a plain position list.
fn oracle_intervals(clip: &MotionClip, p: &SegmentationParams) -> (Vec<[usize; 2]>, Vec<f64>, f64) {
    let n = clip.frame_count();
    let joints = clip.joint_count();
    let mut raw = Vec::new();
    for t in 0..n - 1 {
        let mut s = 0.0;
        for j in 0..joints {
            let (a, b) = (clip.frame(t)[j], clip.frame(t + 1)[j]);
            s += ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt();
        }
        raw.push(s / joints as f64);
    }
    let h = p.smoothing_window_frames as i64 / 2;
    let smooth: Vec<f64> = (0..raw.len() as i64)
        .map(|t| {
            let window: Vec<f64> =
                (t - h..=t + h).filter(|i| *i >= 0 && (*i as usize) < raw.len()).map(|i| raw[i as usize]).collect();
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect();
    let mut sorted = smooth.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = 0.95 * (sorted.len() - 1) as f64;
    let p95 = sorted[pos.floor() as usize] + (sorted[pos.ceil() as usize] - sorted[pos.floor() as usize]) * pos.fract();
    let tau = p.rest_speed_fraction * p95;
    let min_rest = (p.min_rest_s * 25.0).round() as usize;
    // rising and falling crossings of tau
    let mut rest_runs = Vec::new();
    let mut run_start: Option<usize> = None;
    for t in 0..=smooth.len() {
        let below = t < smooth.len() && smooth[t] < tau;
        match (below, run_start) {
            (true, None) => run_start = Some(t),
            (false, Some(a)) => {
                if t - a >= min_rest {
                    rest_runs.push((a, t - 1));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    let min_unit = p.min_unit_s * 25.0;
    let units = rest_runs
        .windows(2)
        .map(|w| [w[0].1, w[1].0])
        .filter(|[a, b]| (b - a) as f64 >= min_unit - 1e-9)
        .collect();
    (units, smooth, tau)
}

fn criterion_5() -> Outcome {
    let params = SegmentationParams::default();
    let cases = [("single", vec![(20, 30)], 75), ("double", vec![(20, 30), (75, 40)], 140)];
    let mut summary = Vec::new();
    for (name, bumps, total) in cases {
        let clip = bump_signal(&bumps, total, 1.0);
        let got: Vec<[usize; 2]> = detect_units(&clip, &params).map_err(|e| e.to_string())?.iter().map(|d| d.interval).collect();
        let (expect, speed, tau) = oracle_intervals(&clip, &params);
        check(got == expect, || format!("{name}: detect {got:?} vs oracle {expect:?}"))?;
        check(got.len() == bumps.len(), || format!("{name}: {} units for {} bumps", got.len(), bumps.len()))?;
        for [a, b] in &got {
            check(speed[*a] < tau && speed[*b] < tau, || format!("{name}: endpoint speed not below threshold"))?;
        }
        for lambda in [0.1, 10.0] {
            let scaled: Vec<[usize; 2]> =
                detect_units(&bump_signal(&bumps, total, lambda), &params).unwrap().iter().map(|d| d.interval).collect();
            check(scaled == got, || format!("{name}: scale {lambda} gives {scaled:?}"))?;
        }
        summary.push(format!("{name} {got:?}"));
    }
    Ok(summary.join(", "))
}

// ---------------------------------------------------------------------------
// 6. dictionary

fn criterion_6() -> Outcome {
    let dict = fixture_dict();
    check(dict.len() == 42, || format!("{} units", dict.len()))?;
    let on_disk = std::fs::read_to_string(fixtures().join("dictionary/manifest.json")).unwrap();
    check(serialize_manifest(&dict) == on_disk, || "manifest round trip differs".into())?;
    let renormalized = gesturekit::canonical::normalize(&on_disk).unwrap();
    check(renormalized == on_disk, || "manifest is not in canonical form".into())?;

    let draws = 10_000u64;
    let mut worst = 0.0f64;
    for intent in [IntentLabel::Emphasis, IntentLabel::Welcome] {
        let mut counts = std::collections::BTreeMap::new();
        for seed in 0..draws {
            let s = select_unit(&dict, intent, None, 3.5, seed).map_err(|e| e.to_string())?;
            *counts.entry(s.unit.id.clone()).or_insert(0u64) += 1;
        }
        check(counts.len() == 2, || format!("{intent}: {} candidates drawn", counts.len()))?;
        for (id, n) in &counts {
            let dev = (*n as f64 / draws as f64 - 0.5).abs();
            worst = worst.max(dev);
            check(dev <= 0.02, || format!("{id}: {n} of {draws}"))?;
        }
    }
    Ok(format!("42 units, canonical manifest, max frequency deviation {:.2}%", worst * 100.0))
}

// ---------------------------------------------------------------------------
// 7. golden pipeline through the CLI

fn run(args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gesturekit")).args(args).current_dir(cwd).output().map_err(|e| e.to_string())?;
    check(out.status.success(), || format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
}

fn criterion_7() -> Outcome {
    let fx = fixtures();
    let golden = fx.join("golden");
    let start = Instant::now();
    for _ in 0..2 {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let p = |s: &str| fx.join(s).to_string_lossy().into_owned();
        run(&["parse", "--offline", "--text", &p("talk.txt"), "--timings", &p("talk.timings.json"), "--out", "script.json"], dir)?;
        run(&["synth", "--script", "script.json", "--dict", &p("dictionary"), "--seed", "42", "--mode", "stroke", "--out", "motion.json"], dir)?;
        for name in ["script.json", "motion.json", "motion.schedule.json", "motion.report.txt", "motion.script.json"] {
            let produced = std::fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"))?;
            let expected = std::fs::read(golden.join(name)).unwrap();
            check(produced == expected, || format!("{name} differs from golden"))?;
        }
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!("goldens reproduced twice in {:.2}s", start.elapsed().as_secs_f64()))
}

// ---------------------------------------------------------------------------
// 8. classifier contract

fn corpus(n: usize) -> Vec<String> {
    let lex = Lexicon::builtin();
    let mut vocab: Vec<String> =
        "the a we they robot table plan numbers quickly slowly over under into river data question answer people story"
            .split(' ')
            .map(str::to_string)
            .collect();
    for cue in ["never", "because", "welcome", "thank you", "awesome", "huge", "my", "look", "so that", "goodbye"] {
        assert!(lex.cue(cue).is_some(), "{cue} is a cue");
        vocab.push(cue.to_string());
    }
    let cjk = ["我们一定要准时", "因为天气很好所以出去", "谢谢大家", "这个方案非常棒", "今天我们讨论数据"];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    (0..n)
        .map(|i| {
            if i % 10 == 9 {
                return cjk[rng.gen_range(0..cjk.len())].to_string();
            }
            let len = rng.gen_range(1..12);
            let mut words: Vec<String> = (0..len).map(|_| vocab[rng.gen_range(0..vocab.len())].clone()).collect();
            if rng.gen_bool(0.3) {
                words[0] = format!("\"{}", words[0]);
            }
            let mut s = words.join(" ");
            s.push(['.', '!', '?', ','][rng.gen_range(0..4)]);
            s
        })
        .collect()
}

struct Stub(Vec<&'static str>, std::sync::atomic::AtomicUsize);

impl ChatTransport for Stub {
    fn complete(&self, _request: &ChatRequest) -> Result<String, TransportError> {
        let i = self.1.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        Ok(self.0[i % self.0.len()].to_string())
    }
}

fn criterion_8() -> Outcome {
    let lex = Lexicon::builtin();
    let sentences = corpus(200);
    for s in &sentences {
        let tokens: Vec<String> = s.split_whitespace().map(str::to_string).collect();
        let label = classify_offline(&tokens, &lex);
        check(IntentLabel::ALL.contains(&label.intent), || format!("{s:?}: intent {}", label.intent))?;
        check(keyword_in_sentence(&label.keyword, s), || format!("{s:?}: keyword {:?} not in sentence", label.keyword))?;
    }
    let malformed = vec![
        "sorry, I cannot help with that",
        "[{\"index\": 0, \"intent\": \"welcome\"",
        "[{\"index\": 0, \"intent\": \"waving\", \"keyword\": \"the\"}]",
        "[]",
        "{\"index\": 0, \"intent\": \"welcome\", \"keyword\": \"the\"}",
    ];
    let mut c = Classifier::offline(lex);
    c.mode = ClassifierMode::Llm;
    c.batch_size = 8;
    c.transport = Some(Box::new(Stub(malformed, Default::default())));
    let out = c.classify(&sentences[..40]).map_err(|e| e.to_string())?;
    for (s, l) in sentences.iter().zip(&out) {
        check(l.provenance == Provenance::Fallback, || format!("{s:?}: provenance {}", l.provenance))?;
        check(keyword_in_sentence(&l.keyword, s), || format!("{s:?}: fallback keyword {:?}", l.keyword))?;
    }
    Ok("200 offline labels valid, 40 malformed-reply sentences fell back".into())
}

// ---------------------------------------------------------------------------
// 9. warp properties

fn random_stages(rng: &mut ChaCha8Rng) -> (StageMap, usize) {
    let mut t = 0;
    let lead = rng.gen_range(0..20);
    t += lead;
    let prep_end = if rng.gen_bool(0.8) { t + rng.gen_range(1..30) } else { t };
    let s1 = prep_end + rng.gen_range(1..40);
    let hold_end = if rng.gen_bool(0.6) { s1 + rng.gen_range(1..80) } else { s1 };
    let retr_end = if rng.gen_bool(0.8) { hold_end + rng.gen_range(1..50) } else { hold_end };
    let last = retr_end + rng.gen_range(0..20);
    let stages = StageMap {
        preparation: (prep_end > lead).then_some([lead, prep_end]),
        stroke: [prep_end, s1],
        stroke_apex: rng.gen_range(prep_end..=s1),
        hold: (hold_end > s1).then_some([s1, hold_end]),
        retraction: (retr_end > hold_end).then_some([hold_end, retr_end]),
    };
    (stages, last.max(s1) + 1)
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let fps = 25.0;
    let mut preserved = 0;
    for i in 0..1000 {
        let (stages, frames) = random_stages(&mut rng);
        stages.validate(frames).map_err(|e| format!("generator produced invalid stages: {e}"))?;
        let target = rng.gen_range(1.5..12.0);
        let (plan, _) = RetimePlan::from_stages(&stages, fps, frames).stage_aware(target);
        let warp = plan.warp();
        let knots = warp.knots();
        check(knots.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1), || format!("case {i}: non-monotone"))?;
        check(warp.eval(0.0) == 0.0 && warp.eval(1.0) == 1.0, || format!("case {i}: endpoints"))?;
        let mut prev = 0.0;
        for k in 0..=200 {
            let v = warp.eval(k as f64 / 200.0);
            check(v >= prev, || format!("case {i}: eval decreases"))?;
            prev = v;
        }
        let src = (frames - 1) as f64 / fps;
        let stroke_src = (stages.stroke[1] - stages.stroke[0]) as f64 / fps;
        if target >= stroke_src {
            let u0 = warp.inverse(stages.stroke[0] as f64 / fps / src);
            let u1 = warp.inverse(stages.stroke[1] as f64 / fps / src);
            let out = (u1 - u0) * target;
            check((out - stroke_src).abs() <= 1e-9, || format!("case {i}: stroke {stroke_src} became {out}"))?;
            preserved += 1;
        }
    }
    Ok(format!("1000 warps monotone with exact endpoints, stroke preserved in {preserved}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("loss metric matches brute-force oracle", criterion_1),
        ("rest base with zero ramp equals warped unit playback", criterion_2),
        ("stroke apex lands within half a frame of the keyword", criterion_3),
        ("onset placement and largest-fitting variant", criterion_4),
        ("segmentation matches threshold-crossing oracle", criterion_5),
        ("dictionary integrity and uniform tie-breaking", criterion_6),
        ("deterministic golden pipeline", criterion_7),
        ("classifier output contract and fallback", criterion_8),
        ("warp monotonicity, endpoints and stroke preservation", criterion_9),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("criterion {}: PASS  {name}: {detail}", n + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", n + 1);
            }
            Err(_) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: panicked", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
