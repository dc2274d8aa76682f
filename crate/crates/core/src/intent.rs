//! Sentence intent classification and keyword extraction.
//!
//! Two routes produce the same `(intent, keyword, semantic_tag)` triples: a
//! chat-completion LLM driven by a versioned prompt template, and a
//! deterministic lexicon classifier that serves as the offline default and
//! as the fallback whenever the LLM route fails its reply contract.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::RwLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::canonical;
use crate::script::{
    attach_timings, is_cjk, keyword_in_sentence, normalize_token, segment_sentences, GestureScript, IntentLabel,
    ScriptError, SentenceEntry, TimedSentence, WordTiming,
};

#[derive(Debug, Error)]
pub enum IntentError {
    #[error("no sentences to classify")]
    EmptyInput,
    #[error("malformed reply: {0}")]
    MalformedReply(String),
    #[error("reply violates the output contract: {0}")]
    ContractViolation(String),
    #[error("transport error: {0}")]
    Transport(#[from] TransportError),
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error("replay cache error at {path}: {message}")]
    Cache { path: PathBuf, message: String },
    #[error(transparent)]
    Script(#[from] ScriptError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("api key environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("networking is disabled")]
    Disabled,
    #[error("request failed: {0}")]
    Request(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response body: {0}")]
    Body(String),
}

// ---------------------------------------------------------------------------
// Lexicon

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cue {
    pub intent: IntentLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    version: String,
    cues: BTreeMap<String, Cue>,
    stopwords: BTreeSet<String>,
    default_intent: IntentLabel,
    longest_phrase: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconFile {
    version: String,
    default_intent: IntentLabel,
    cues: BTreeMap<String, Cue>,
    stopwords: Vec<String>,
}

fn cue_key(phrase: &str) -> String {
    phrase.split_whitespace().map(normalize_token).filter(|t| !t.is_empty()).collect::<Vec<_>>().join(" ")
}

const BUILTIN_LEXICON: &str = include_str!("../data/lexicon.json");

impl Lexicon {
    /// The starter lexicon shipped in `data/lexicon.json`.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, IntentError> {
        let file: LexiconFile = serde_json::from_str(text).map_err(|e| IntentError::Lexicon(e.to_string()))?;
        let mut cues = BTreeMap::new();
        for (phrase, cue) in file.cues {
            let key = cue_key(&phrase);
            if key.is_empty() {
                return Err(IntentError::Lexicon(format!("cue {phrase:?} is empty after normalization")));
            }
            if cue.semantic_tag.is_some() && cue.intent != IntentLabel::Semantic {
                return Err(IntentError::Lexicon(format!("cue {phrase:?} has a tag but is not semantic")));
            }
            if cues.insert(key, cue).is_some() {
                return Err(IntentError::Lexicon(format!("duplicate cue {phrase:?}")));
            }
        }
        let longest_phrase = cues.keys().map(|k| k.split(' ').count()).max().unwrap_or(1);
        Ok(Self {
            version: file.version,
            cues,
            stopwords: file.stopwords.iter().map(|s| normalize_token(s)).collect(),
            default_intent: file.default_intent,
            longest_phrase,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn default_intent(&self) -> IntentLabel {
        self.default_intent
    }

    pub fn cue(&self, phrase: &str) -> Option<&Cue> {
        self.cues.get(&cue_key(phrase))
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn cue_count(&self) -> usize {
        self.cues.len()
    }
}

/// Output of the offline classifier for one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfflineLabel {
    pub intent: IntentLabel,
    pub keyword: String,
    pub semantic_tag: Option<String>,
}

/// Strict left-to-right first lexicon hit decides intent and keyword. With
/// no hit the keyword is the longest non-stopword token (earliest on ties).
pub fn classify_offline(tokens: &[String], lexicon: &Lexicon) -> OfflineLabel {
    let norm: Vec<String> = tokens.iter().map(|t| normalize_token(t)).filter(|t| !t.is_empty()).collect();
    for i in 0..norm.len() {
        if norm[i].chars().any(is_cjk) {
            if let Some((phrase, cue)) = first_cjk_cue(&norm[i], lexicon) {
                return hit(phrase, cue);
            }
            continue;
        }
        for len in (1..=lexicon.longest_phrase.min(norm.len() - i)).rev() {
            let phrase = norm[i..i + len].join(" ");
            if let Some(cue) = lexicon.cues.get(&phrase) {
                let keyword = norm[i..i + len]
                    .iter()
                    .find(|t| !lexicon.is_stopword(t))
                    .unwrap_or(&norm[i])
                    .clone();
                return hit(keyword, cue);
            }
        }
    }
    let mut best: Option<&String> = None;
    for t in norm.iter().filter(|t| !lexicon.is_stopword(t)) {
        if best.is_none_or(|b| t.chars().count() > b.chars().count()) {
            best = Some(t);
        }
    }
    let keyword = best
        .or(norm.first())
        .cloned()
        .unwrap_or_else(|| tokens.first().map(|t| t.trim().to_string()).unwrap_or_default());
    OfflineLabel { intent: lexicon.default_intent, keyword, semantic_tag: None }
}

fn hit(keyword: String, cue: &Cue) -> OfflineLabel {
    OfflineLabel { intent: cue.intent, keyword, semantic_tag: cue.semantic_tag.clone() }
}

/// Earliest CJK cue occurring in `token`; longer cues win at equal offsets.
fn first_cjk_cue<'a>(token: &str, lexicon: &'a Lexicon) -> Option<(String, &'a Cue)> {
    lexicon
        .cues
        .iter()
        .filter(|(k, _)| k.chars().any(is_cjk))
        .filter_map(|(k, cue)| token.find(k.as_str()).map(|pos| (pos, k, cue)))
        .min_by(|a, b| a.0.cmp(&b.0).then(b.1.len().cmp(&a.1.len())))
        .map(|(_, k, cue)| (k.clone(), cue))
}

// ---------------------------------------------------------------------------
// Prompting

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub sentence: String,
    pub intent: IntentLabel,
    pub keyword: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub system_text: String,
    pub definitions: Vec<(IntentLabel, String)>,
    pub fewshot_examples: Vec<FewShotExample>,
    /// `{n}` is replaced by the number of sentences.
    pub output_contract: String,
}

impl PromptTemplate {
    pub fn builtin() -> Self {
        let def = |l: IntentLabel, text: &str| (l, text.to_string());
        let ex = |s: &str, intent: IntentLabel, keyword: &str| FewShotExample {
            sentence: s.into(),
            intent,
            keyword: keyword.into(),
        };
        Self {
            template_id: "gesture-intent-v1".into(),
            system_text: "You annotate speech transcripts for a presenter avatar. For every sentence decide which \
                          kind of hand gesture should accompany it and which single word carries the gesture's \
                          stroke."
                .into(),
            definitions: vec![
                def(IntentLabel::Welcome, "greeting the audience or opening the talk"),
                def(IntentLabel::Farewell, "closing the talk, thanking or saying goodbye"),
                def(IntentLabel::Description, "depicting an object, a size, a place or an event"),
                def(IntentLabel::Explanation, "giving reasons, causes or how something works"),
                def(IntentLabel::Emphasis, "stressing a point the speaker insists on"),
                def(IntentLabel::SelfReference, "the speaker talking about themself"),
                def(IntentLabel::Semantic, "a word with a conventional emblem, e.g. a thumbs up for \"awesome\""),
            ],
            fewshot_examples: vec![
                ex("Good evening and welcome to the show.", IntentLabel::Welcome, "welcome"),
                ex("We lost the files because the disk failed.", IntentLabel::Explanation, "because"),
                ex("You must never skip the safety check.", IntentLabel::Emphasis, "never"),
                ex("That result is awesome.", IntentLabel::Semantic, "awesome"),
            ],
            output_contract: "Reply with a JSON array of {n} objects, one per sentence, each of the form \
                              {\"index\": <sentence number>, \"intent\": <one of the labels above>, \
                              \"keyword\": <a word copied verbatim from that sentence>}. \
                              Reply with the array only."
                .into(),
        }
    }

    pub fn definitions_section(&self) -> String {
        let mut out = String::from("Gesture intent labels:\n");
        for (label, text) in &self.definitions {
            out.push_str(&format!("- {label}: {text}\n"));
        }
        out
    }
}

/// Renders the full prompt for one batch of sentences.
pub fn build_prompt(template: &PromptTemplate, sentences: &[String]) -> Result<String, IntentError> {
    if sentences.is_empty() {
        return Err(IntentError::EmptyInput);
    }
    let mut out = String::new();
    out.push_str(&template.system_text);
    out.push_str("\n\n");
    out.push_str(&template.definitions_section());
    out.push_str("\nExamples:\n");
    for ex in &template.fewshot_examples {
        let reply = canonical::to_string(&serde_json::json!({"index": 0, "intent": ex.intent, "keyword": ex.keyword}));
        out.push_str(&format!("Sentence: {}\nAnswer: {reply}\n", ex.sentence));
    }
    out.push_str("\nSentences:\n");
    for (i, s) in sentences.iter().enumerate() {
        out.push_str(&format!("{i}: {}\n", s.replace('\n', " ")));
    }
    out.push('\n');
    out.push_str(&template.output_contract.replace("{n}", &sentences.len().to_string()));
    out.push('\n');
    Ok(out)
}

/// One validated element of an LLM reply.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplyItem {
    pub index: usize,
    pub intent: IntentLabel,
    pub keyword: String,
    pub semantic_tag: Option<String>,
}

/// Extracts the first JSON array in `reply` (surrounding prose and markdown
/// fences are ignored) and checks it against the reply contract.
pub fn parse_llm_response(reply: &str, expected_count: usize) -> Result<Vec<ReplyItem>, IntentError> {
    let array = first_json_array(reply).ok_or_else(|| IntentError::MalformedReply("no JSON array found".into()))?;
    if array.len() != expected_count {
        return Err(IntentError::ContractViolation(format!(
            "expected {expected_count} items, got {}",
            array.len()
        )));
    }
    let mut items: Vec<Option<ReplyItem>> = vec![None; expected_count];
    for (pos, value) in array.iter().enumerate() {
        let violation = |m: &str| IntentError::ContractViolation(format!("item {pos}: {m}"));
        let obj = value.as_object().ok_or_else(|| violation("not an object"))?;
        let index = obj.get("index").and_then(Value::as_u64).ok_or_else(|| violation("missing integer index"))? as usize;
        let intent_name = obj.get("intent").and_then(Value::as_str).ok_or_else(|| violation("missing intent"))?;
        let intent: IntentLabel = intent_name.parse().map_err(|e: String| violation(&e))?;
        let keyword = obj.get("keyword").and_then(Value::as_str).ok_or_else(|| violation("missing keyword"))?;
        let semantic_tag = match obj.get("semantic_tag") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(violation("semantic_tag must be a string")),
        };
        let slot = items.get_mut(index).ok_or_else(|| violation("index out of range"))?;
        if slot.is_some() {
            return Err(violation("duplicate index"));
        }
        *slot = Some(ReplyItem { index, intent, keyword: keyword.to_string(), semantic_tag });
    }
    Ok(items.into_iter().map(|i| i.expect("count and uniqueness imply coverage")).collect())
}

fn first_json_array(reply: &str) -> Option<Vec<Value>> {
    reply.match_indices('[').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&reply[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Array(items))) => Some(items),
            _ => None,
        }
    })
}

// ---------------------------------------------------------------------------
// Transport and replay cache

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub api_key_env_var: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub temperature: f64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o-mini".into(),
            api_key_env_var: "OPENAI_API_KEY".into(),
            timeout_s: 60.0,
            max_retries: 2,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

pub trait ChatTransport: Send + Sync {
    /// Returns the content of the first assistant message.
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Provider-agnostic chat-completion POST over HTTPS with a bearer key.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
}

impl HttpTransport {
    pub fn from_config(config: &LlmConfig) -> Result<Self, TransportError> {
        let api_key = std::env::var(&config.api_key_env_var)
            .map_err(|_| TransportError::MissingApiKey(config.api_key_env_var.clone()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s.max(0.001)))
            .build()
            .map_err(|e| TransportError::Request(e.to_string()))?;
        Ok(Self { client, endpoint: config.endpoint_url.clone(), api_key })
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(request)
            .send()
            .map_err(|e| TransportError::Request(e.to_string()))?;
        let status = response.status();
        let body = response.text().map_err(|e| TransportError::Request(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Status { status: status.as_u16(), body });
        }
        first_assistant_message(&body)
    }
}

/// Pulls `choices[0].message.content` out of a chat-completion body.
pub fn first_assistant_message(body: &str) -> Result<String, TransportError> {
    let value: Value = serde_json::from_str(body).map_err(|e| TransportError::Body(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| TransportError::Body("missing choices[0].message.content".into()))
}

/// Transport used when networking is off; every call fails.
pub struct DisabledTransport;

impl ChatTransport for DisabledTransport {
    fn complete(&self, _request: &ChatRequest) -> Result<String, TransportError> {
        Err(TransportError::Disabled)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedExchange {
    pub key: String,
    pub template_id: String,
    pub request: ChatRequest,
    pub reply: String,
}

/// Content-addressed directory of recorded exchanges, one `<key>.json` per
/// request. Writes go through a temp file and an atomic rename.
pub struct ReplayCache {
    dir: PathBuf,
    lock: RwLock<()>,
}

pub fn cache_key(template_id: &str, prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(template_id.as_bytes());
    hasher.update(b"\n");
    hasher.update(prompt.as_bytes());
    hex::encode(hasher.finalize())
}

impl ReplayCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, IntentError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| IntentError::Cache { path: dir.clone(), message: e.to_string() })?;
        Ok(Self { dir, lock: RwLock::new(()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<CachedExchange> {
        let _guard = self.lock.read().unwrap_or_else(|p| p.into_inner());
        let text = std::fs::read_to_string(self.path_for(key)).ok()?;
        let exchange: CachedExchange = serde_json::from_str(&text).ok()?;
        (exchange.key == key).then_some(exchange)
    }

    pub fn put(&self, exchange: &CachedExchange) -> Result<(), IntentError> {
        let _guard = self.lock.write().unwrap_or_else(|p| p.into_inner());
        let path = self.path_for(&exchange.key);
        let cache_err = |e: &dyn fmt::Display| IntentError::Cache { path: path.clone(), message: e.to_string() };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| cache_err(&e))?;
        std::io::Write::write_all(&mut tmp, canonical::to_string(exchange).as_bytes()).map_err(|e| cache_err(&e))?;
        tmp.persist(&path).map_err(|e| cache_err(&e))?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Offline mode; the lexicon was the only route.
    Offline,
    Llm,
    /// LLM keyword was not in the sentence and was replaced.
    Repaired,
    /// LLM route failed; lexicon result used.
    Fallback,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Offline => "offline",
            Provenance::Llm => "llm",
            Provenance::Repaired => "repaired",
            Provenance::Fallback => "fallback",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub intent: IntentLabel,
    pub keyword: String,
    pub semantic_tag: Option<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierMode {
    Offline,
    /// LLM first, silent lexicon fallback on any failure.
    Llm,
    /// Like `Llm`, but transport failures are errors.
    StrictLlm,
}

pub struct Classifier {
    pub mode: ClassifierMode,
    pub template: PromptTemplate,
    pub config: LlmConfig,
    pub lexicon: Lexicon,
    pub cache: Option<ReplayCache>,
    pub transport: Option<Box<dyn ChatTransport>>,
    /// Sentences per LLM request.
    pub batch_size: usize,
}

impl Classifier {
    pub fn offline(lexicon: Lexicon) -> Self {
        Self {
            mode: ClassifierMode::Offline,
            template: PromptTemplate::builtin(),
            config: LlmConfig::default(),
            lexicon,
            cache: None,
            transport: None,
            batch_size: 32,
        }
    }

    pub fn classify(&self, sentences: &[String]) -> Result<Vec<Classification>, IntentError> {
        if sentences.is_empty() {
            return Err(IntentError::EmptyInput);
        }
        if self.mode == ClassifierMode::Offline {
            return Ok(sentences.iter().map(|s| self.label_offline(s, Provenance::Offline)).collect());
        }
        let mut out = Vec::with_capacity(sentences.len());
        for batch in sentences.chunks(self.batch_size.max(1)) {
            match self.classify_batch_llm(batch)? {
                Some(items) => out.extend(batch.iter().zip(items).map(|(s, item)| self.accept(s, item))),
                None => out.extend(batch.iter().map(|s| self.label_offline(s, Provenance::Fallback))),
            }
        }
        Ok(out)
    }

    fn label_offline(&self, sentence: &str, provenance: Provenance) -> Classification {
        let tokens: Vec<String> = sentence.split_whitespace().map(str::to_string).collect();
        let label = classify_offline(&tokens, &self.lexicon);
        Classification { intent: label.intent, keyword: label.keyword, semantic_tag: label.semantic_tag, provenance }
    }

    fn accept(&self, sentence: &str, item: ReplyItem) -> Classification {
        let (keyword, provenance) = if keyword_in_sentence(&item.keyword, sentence) {
            (item.keyword, Provenance::Llm)
        } else {
            (self.label_offline(sentence, Provenance::Repaired).keyword, Provenance::Repaired)
        };
        let semantic_tag = match item.intent {
            IntentLabel::Semantic => item
                .semantic_tag
                .or_else(|| self.lexicon.cue(&keyword).and_then(|c| c.semantic_tag.clone())),
            _ => None,
        };
        Classification { intent: item.intent, keyword, semantic_tag, provenance }
    }

    /// `Ok(None)` means the batch falls back to the lexicon.
    fn classify_batch_llm(&self, batch: &[String]) -> Result<Option<Vec<ReplyItem>>, IntentError> {
        let prompt = build_prompt(&self.template, batch)?;
        let key = cache_key(&self.template.template_id, &prompt);
        if let Some(cache) = &self.cache {
            if let Some(exchange) = cache.get(&key) {
                match parse_llm_response(&exchange.reply, batch.len()) {
                    Ok(items) => return Ok(Some(items)),
                    Err(e) => log::warn!("ignoring unusable cached reply {key}: {e}"),
                }
            }
        }
        let request = ChatRequest {
            model: self.config.model_name.clone(),
            messages: vec![
                ChatMessage { role: "system".into(), content: self.template.system_text.clone() },
                ChatMessage { role: "user".into(), content: prompt },
            ],
            temperature: self.config.temperature,
        };
        let transport: &dyn ChatTransport = match &self.transport {
            Some(t) => t.as_ref(),
            None => &DisabledTransport,
        };
        let mut last_transport_error = None;
        for attempt in 0..=self.config.max_retries {
            match transport.complete(&request) {
                Ok(reply) => match parse_llm_response(&reply, batch.len()) {
                    Ok(items) => {
                        if let Some(cache) = &self.cache {
                            cache.put(&CachedExchange {
                                key: key.clone(),
                                template_id: self.template.template_id.clone(),
                                request: request.clone(),
                                reply,
                            })?;
                        }
                        return Ok(Some(items));
                    }
                    Err(e) => log::warn!("attempt {attempt}: {e}"),
                },
                Err(e) => {
                    log::warn!("attempt {attempt}: {e}");
                    let fatal = matches!(e, TransportError::Disabled | TransportError::MissingApiKey(_));
                    last_transport_error = Some(e);
                    if fatal {
                        break;
                    }
                }
            }
        }
        match (self.mode, last_transport_error) {
            (ClassifierMode::StrictLlm, Some(e)) => Err(IntentError::Transport(e)),
            _ => Ok(None),
        }
    }
}

// ---------------------------------------------------------------------------
// Script assembly

/// Splits `text`, attaches `timings` and classifies every sentence. Returns
/// the script and the provenance of each sentence's label.
pub fn build_script(
    text: &str,
    timings: &[WordTiming],
    classifier: &Classifier,
) -> Result<(GestureScript, Vec<Provenance>), IntentError> {
    let sentences = segment_sentences(text)?;
    let timed = attach_timings(&sentences, timings)?;
    let texts: Vec<String> = timed.iter().map(|s| s.text.clone()).collect();
    let labels = classifier.classify(&texts)?;
    let mut entries = Vec::with_capacity(timed.len());
    let mut provenance = Vec::with_capacity(timed.len());
    for (sentence, label) in timed.iter().zip(labels) {
        let (keyword, (kw_start, kw_end)) = keyword_timing(sentence, &label.keyword);
        entries.push(SentenceEntry {
            index: sentence.index,
            text: sentence.text.clone(),
            start_s: sentence.start_s,
            end_s: sentence.end_s,
            intent: label.intent,
            keyword,
            keyword_start_s: kw_start,
            keyword_end_s: kw_end,
            gesture_id: None,
            semantic_tag: if label.intent == IntentLabel::Semantic { label.semantic_tag } else { None },
        });
        provenance.push(label.provenance);
    }
    let script = GestureScript { version: 1, sentences: entries };
    script.validate()?;
    Ok((script, provenance))
}

/// Keyword span from the word timings; an unlocatable keyword is replaced by
/// the sentence's first timed word.
fn keyword_timing(sentence: &TimedSentence, keyword: &str) -> (String, (f64, f64)) {
    if let Some(span) = sentence.keyword_span(keyword) {
        return (keyword.to_string(), span);
    }
    let first = &sentence.words[0];
    log::warn!("sentence {}: keyword {keyword:?} has no timing, using {:?}", sentence.index, first.word);
    (normalize_token(&first.word), (first.start_s, first.end_s))
}
