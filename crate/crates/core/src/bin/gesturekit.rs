use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gesturekit::dictionary::{load_dictionary, DictionaryError, DEFAULT_REST_TOLERANCE};
use gesturekit::intent::{build_script, Classifier, ClassifierMode, HttpTransport, IntentError, Lexicon, LlmConfig, ReplayCache};
use gesturekit::motion::{derivative_l1_loss, LossReport, MotionClip, MotionError, Pose};
use gesturekit::schedule::ApexAnchor;
use gesturekit::script::{parse_textgrid, parse_timings_json, GestureScript, ScriptError};
use gesturekit::segmentation::{
    detect_units, dictionary_from_fragment, export_units, SegmentationError, SegmentationParams, UnitLabels,
};
use gesturekit::service::{router, serve, AppState};
use gesturekit::synth::{synthesize, BaseGestureSpec, ScheduleMode, SynthError, SynthesisConfig};

#[derive(Parser)]
#[command(name = "gesturekit", version, about = "Co-speech gesture synthesis from text and word timings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Text + word timings -> gesture script JSON
    Parse(ParseArgs),
    /// Gesture script + dictionary -> motion, schedule and report
    Synth(SynthArgs),
    /// Cut a continuous motion clip into gesture units
    Segment(SegmentArgs),
    /// Build a dictionary from a segmentation fragment and labels
    DictBuild(DictBuildArgs),
    /// Validate a dictionary
    DictCheck(DictCheckArgs),
    /// Position/velocity/acceleration L1 between two clips (or directories)
    Eval(EvalArgs),
    /// Run the local HTTP API
    Serve(ServeArgs),
}

#[derive(Args)]
struct ClassifierArgs {
    /// Lexicon classifier only (the default)
    #[arg(long, conflicts_with = "llm")]
    offline: bool,
    /// Classify with the chat-completion LLM, falling back to the lexicon
    #[arg(long)]
    llm: bool,
    /// With --llm, treat transport failures as errors instead of falling back
    #[arg(long, requires = "llm")]
    strict: bool,
    /// Replay cache directory for LLM exchanges
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Custom lexicon JSON
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    api_key_env: Option<String>,
    #[arg(long)]
    max_retries: Option<u32>,
    #[arg(long)]
    timeout_s: Option<f64>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("timing_source").required(true).args(["timings", "textgrid"])))]
struct ParseArgs {
    /// Transcript text file
    #[arg(long)]
    text: PathBuf,
    /// Word timings JSON
    #[arg(long)]
    timings: Option<PathBuf>,
    /// Praat TextGrid (long form) with a word tier
    #[arg(long)]
    textgrid: Option<PathBuf>,
    /// Output file (stdout when omitted)
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    classifier: ClassifierArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Onset,
    Stroke,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnchorArg {
    Midpoint,
    Onset,
}

#[derive(Args)]
struct SynthOptions {
    #[arg(long, value_enum, default_value = "stroke")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 25.0, value_parser = positive_f64)]
    fps: f64,
    /// Blend ramp length in seconds
    #[arg(long, default_value_t = 0.2)]
    ramp: f64,
    #[arg(long, default_value_t = 1.5)]
    min_gesture: f64,
    /// Keyword point the stroke apex is aligned to
    #[arg(long, value_enum, default_value = "midpoint")]
    apex_anchor: AnchorArg,
}

impl SynthOptions {
    fn config(&self) -> SynthesisConfig {
        SynthesisConfig {
            fps: self.fps,
            ramp_s: self.ramp,
            mode: match self.mode {
                ModeArg::Onset => ScheduleMode::Onset,
                ModeArg::Stroke => ScheduleMode::StrokeAligned,
            },
            seed: self.seed,
            min_gesture_s: self.min_gesture,
            apex_anchor: match self.apex_anchor {
                AnchorArg::Midpoint => ApexAnchor::KeywordMidpoint,
                AnchorArg::Onset => ApexAnchor::KeywordOnset,
            },
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    script: PathBuf,
    /// Dictionary directory or manifest
    #[arg(long)]
    dict: PathBuf,
    /// `rest`, `sway`, or `file:PATH` to a motion clip JSON
    #[arg(long, default_value = "rest")]
    base: String,
    /// Reject a base clip whose length differs from the required one
    #[arg(long)]
    strict_base: bool,
    /// Motion JSON output; schedule, report and annotated script are written
    /// next to it as `<stem>.schedule.json`, `<stem>.report.txt` and
    /// `<stem>.script.json`
    #[arg(long, short, default_value = "motion.json")]
    out: PathBuf,
    /// Also write `<stem>.csv`
    #[arg(long)]
    csv: bool,
    #[arg(long, default_value_t = DEFAULT_REST_TOLERANCE)]
    rest_tolerance: f64,
    #[command(flatten)]
    options: SynthOptions,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    rest_fraction: Option<f64>,
    #[arg(long)]
    min_rest: Option<f64>,
    #[arg(long)]
    min_unit: Option<f64>,
    #[arg(long)]
    stroke_fraction: Option<f64>,
    #[arg(long)]
    min_hold: Option<f64>,
}

#[derive(Args)]
struct DictBuildArgs {
    /// Directory written by `segment`
    #[arg(long)]
    fragment: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Rest pose JSON; defaults to the mean of the unit endpoints
    #[arg(long)]
    rest: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_REST_TOLERANCE)]
    rest_tolerance: f64,
}

#[derive(Args)]
struct DictCheckArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REST_TOLERANCE)]
    rest_tolerance: f64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    pred: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long)]
    cors_origin: Option<String>,
    #[arg(long, default_value_t = DEFAULT_REST_TOLERANCE)]
    rest_tolerance: f64,
    #[command(flatten)]
    options: SynthOptions,
    #[command(flatten)]
    classifier: ClassifierArgs,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!("must be positive, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

/// Exit code 1: invalid input or usage. Exit code 2: I/O or transport.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl ToString) -> Self {
        Self { code: 1, message: message.to_string() }
    }

    fn io(message: impl ToString) -> Self {
        Self { code: 2, message: message.to_string() }
    }
}

impl From<ScriptError> for Failure {
    fn from(e: ScriptError) -> Self {
        Failure::invalid(e)
    }
}

impl From<MotionError> for Failure {
    fn from(e: MotionError) -> Self {
        Failure::invalid(e)
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Base(ref m) if m.starts_with("cannot read") => Failure::io(e),
            other => Failure::invalid(other),
        }
    }
}

impl From<DictionaryError> for Failure {
    fn from(e: DictionaryError) -> Self {
        match e {
            DictionaryError::Io { .. } => Failure::io(e),
            other => Failure::invalid(other),
        }
    }
}

impl From<IntentError> for Failure {
    fn from(e: IntentError) -> Self {
        match e {
            IntentError::Transport(_) | IntentError::Cache { .. } => Failure::io(e),
            other => Failure::invalid(other),
        }
    }
}

impl From<SegmentationError> for Failure {
    fn from(e: SegmentationError) -> Self {
        match e {
            SegmentationError::Io { .. } | SegmentationError::Dictionary(DictionaryError::Io { .. }) => Failure::io(e),
            other => Failure::invalid(other),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::io(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

fn classifier(args: &ClassifierArgs) -> Result<Classifier, Failure> {
    let lexicon = match &args.lexicon {
        Some(path) => Lexicon::from_json(&read(path)?)?,
        None => Lexicon::builtin(),
    };
    let mut c = Classifier::offline(lexicon);
    let mut config = LlmConfig::default();
    if let Some(v) = &args.endpoint {
        config.endpoint_url = v.clone();
    }
    if let Some(v) = &args.model {
        config.model_name = v.clone();
    }
    if let Some(v) = &args.api_key_env {
        config.api_key_env_var = v.clone();
    }
    if let Some(v) = args.max_retries {
        config.max_retries = v;
    }
    if let Some(v) = args.timeout_s {
        config.timeout_s = v;
    }
    c.mode = match (args.llm, args.strict) {
        (false, _) => ClassifierMode::Offline,
        (true, false) => ClassifierMode::Llm,
        (true, true) => ClassifierMode::StrictLlm,
    };
    if c.mode != ClassifierMode::Offline {
        match HttpTransport::from_config(&config) {
            Ok(t) => c.transport = Some(Box::new(t)),
            Err(e) if c.mode == ClassifierMode::StrictLlm => return Err(Failure::io(e)),
            Err(e) => log::warn!("{e}; sentences will use the offline lexicon unless cached"),
        }
    }
    if let Some(dir) = &args.cache {
        c.cache = Some(ReplayCache::open(dir)?);
    }
    c.config = config;
    Ok(c)
}

fn parse_cmd(args: ParseArgs) -> Result<(), Failure> {
    let text = read(&args.text)?;
    let timings = match (&args.timings, &args.textgrid) {
        (Some(path), _) => parse_timings_json(&read(path)?)?,
        (None, Some(path)) => parse_textgrid(&read(path)?)?,
        (None, None) => unreachable!("clap requires one timing source"),
    };
    let classifier = classifier(&args.classifier)?;
    let (script, provenance) = build_script(&text, &timings, &classifier)?;
    for (s, p) in script.sentences.iter().zip(&provenance) {
        eprintln!("{:>3}  {:<15} {:<9} {}", s.index, s.intent.to_string(), p.to_string(), s.keyword);
    }
    let json = script.to_json()?;
    match &args.out {
        Some(path) => write(path, &json),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn synth_cmd(args: SynthArgs) -> Result<(), Failure> {
    let script = GestureScript::from_json(&read(&args.script)?)?;
    let dict = load_dictionary(&args.dict, args.rest_tolerance)?;
    let base = match args.base.as_str() {
        "rest" => BaseGestureSpec::RestPose,
        "sway" => BaseGestureSpec::sway(),
        other => match other.strip_prefix("file:") {
            Some(path) => BaseGestureSpec::File { path: PathBuf::from(path), strict: args.strict_base },
            None => return Err(Failure::invalid(format!("unknown base {other:?} (expected rest, sway or file:PATH)"))),
        },
    };
    let out = synthesize(&script, &dict, &base, &args.options.config())?;
    let sibling = |suffix: &str| {
        let stem = args.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "motion".into());
        args.out.with_file_name(format!("{stem}{suffix}"))
    };
    write(&args.out, &out.motion.to_json())?;
    write(&sibling(".schedule.json"), &out.schedule.to_json())?;
    write(&sibling(".report.txt"), &out.report.to_text())?;
    write(&sibling(".script.json"), &out.script.to_json()?)?;
    if args.csv {
        write(&sibling(".csv"), &out.motion.to_csv())?;
    }
    print!("{}", out.report.to_text());
    Ok(())
}

fn segment_cmd(args: SegmentArgs) -> Result<(), Failure> {
    let clip = MotionClip::from_json(&read(&args.input)?)?;
    let mut params = SegmentationParams::default();
    if let Some(v) = args.window {
        params.smoothing_window_frames = v;
    }
    if let Some(v) = args.rest_fraction {
        params.rest_speed_fraction = v;
    }
    if let Some(v) = args.min_rest {
        params.min_rest_s = v;
    }
    if let Some(v) = args.min_unit {
        params.min_unit_s = v;
    }
    if let Some(v) = args.stroke_fraction {
        params.stroke_fraction = v;
    }
    if let Some(v) = args.min_hold {
        params.min_hold_s = v;
    }
    let detections = detect_units(&clip, &params)?;
    let fragment = export_units(&clip, &detections, &args.out)?;
    println!("{} units", fragment.units.len());
    Ok(())
}

fn dict_build_cmd(args: DictBuildArgs) -> Result<(), Failure> {
    let labels: UnitLabels =
        serde_json::from_str(&read(&args.labels)?).map_err(|e| Failure::invalid(format!("labels: {e}")))?;
    let rest = match &args.rest {
        Some(p) => Some(Pose::from_json(&read(p)?)?),
        None => None,
    };
    let dict = dictionary_from_fragment(&args.fragment, &labels, rest, args.rest_tolerance)?;
    dict.write_to(&args.out)?;
    println!("{} units", dict.len());
    Ok(())
}

fn dict_check_cmd(args: DictCheckArgs) -> Result<(), Failure> {
    match load_dictionary(&args.dict, args.rest_tolerance) {
        Ok(dict) => {
            println!("ok {} units", dict.len());
            Ok(())
        }
        Err(DictionaryError::Validation(issues)) => {
            for issue in &issues {
                println!("{issue}");
            }
            Err(Failure::invalid(format!("{} issue(s)", issues.len())))
        }
        Err(e) => Err(e.into()),
    }
}

fn clip_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::io(format!("cannot list {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn eval_cmd(args: EvalArgs) -> Result<(), Failure> {
    let pairs: Vec<(PathBuf, PathBuf)> = if args.reference.is_dir() {
        let refs = clip_files(&args.reference)?;
        if refs.is_empty() {
            return Err(Failure::invalid(format!("no clips in {}", args.reference.display())));
        }
        refs.into_iter()
            .map(|r| {
                let p = args.pred.join(r.file_name().expect("listed files have names"));
                (r, p)
            })
            .collect()
    } else {
        vec![(args.reference.clone(), args.pred.clone())]
    };
    let mut reports = Vec::with_capacity(pairs.len());
    for (r, p) in &pairs {
        let gt = MotionClip::from_json(&read(r)?)?;
        let pred = MotionClip::from_json(&read(p)?)?;
        reports.push(derivative_l1_loss(&gt, &pred).map_err(|e| Failure::invalid(format!("{}: {e}", r.display())))?);
    }
    let m = LossReport::mean(&reports).expect("at least one pair");
    println!("position_l1 {:.6}", m.position_l1);
    println!("velocity_l1 {:.6}", m.velocity_l1);
    println!("acceleration_l1 {:.6}", m.acceleration_l1);
    println!("total {:.6}", m.total);
    Ok(())
}

fn serve_cmd(args: ServeArgs) -> Result<(), Failure> {
    let dict = load_dictionary(&args.dict, args.rest_tolerance)?;
    let state = AppState {
        dictionary: Arc::new(dict),
        classifier: Arc::new(classifier(&args.classifier)?),
        defaults: args.options.config(),
    };
    let app = router(state, args.cors_origin.as_deref()).map_err(Failure::invalid)?;
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::io)?;
    runtime.block_on(serve(SocketAddr::new(args.host, args.port), app)).map_err(Failure::io)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Parse(a) => parse_cmd(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Segment(a) => segment_cmd(a),
        Command::DictBuild(a) => dict_build_cmd(a),
        Command::DictCheck(a) => dict_check_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Serve(a) => serve_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
