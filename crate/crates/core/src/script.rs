//! The gesture script: per-sentence intent, keyword and timing, plus the
//! text-side plumbing that produces it (sentence splitting, word-timing
//! ingestion from alignment output, and timing attachment).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScriptError {
    #[error("empty input")]
    EmptyInput,
    #[error("alignment mismatch at sentence {sentence}: {detail}")]
    AlignmentMismatch { sentence: usize, detail: String },
    #[error("textgrid format error at line {line}: {message}")]
    TextGrid { line: usize, message: String },
    #[error("invalid timings: {0}")]
    Timings(String),
    #[error("sentence {index}: invalid {field}: {message}")]
    Validation { index: usize, field: &'static str, message: String },
    #[error("malformed script json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentLabel {
    Welcome,
    Farewell,
    Description,
    Explanation,
    Emphasis,
    SelfReference,
    Semantic,
}

impl IntentLabel {
    pub const ALL: [IntentLabel; 7] = [
        IntentLabel::Welcome,
        IntentLabel::Farewell,
        IntentLabel::Description,
        IntentLabel::Explanation,
        IntentLabel::Emphasis,
        IntentLabel::SelfReference,
        IntentLabel::Semantic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IntentLabel::Welcome => "welcome",
            IntentLabel::Farewell => "farewell",
            IntentLabel::Description => "description",
            IntentLabel::Explanation => "explanation",
            IntentLabel::Emphasis => "emphasis",
            IntentLabel::SelfReference => "self_reference",
            IntentLabel::Semantic => "semantic",
        }
    }
}

impl fmt::Display for IntentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IntentLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown intent label {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordTiming {
    pub word: String,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentenceEntry {
    pub index: usize,
    pub text: String,
    pub start_s: f64,
    pub end_s: f64,
    pub intent: IntentLabel,
    pub keyword: String,
    pub keyword_start_s: f64,
    pub keyword_end_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gesture_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GestureScript {
    pub version: u32,
    pub sentences: Vec<SentenceEntry>,
}

impl Default for GestureScript {
    fn default() -> Self {
        Self { version: 1, sentences: Vec::new() }
    }
}

impl GestureScript {
    pub fn validate(&self) -> Result<(), ScriptError> {
        if self.version != 1 {
            return Err(ScriptError::Json(format!("unsupported script version {}", self.version)));
        }
        let mut prev_end: Option<f64> = None;
        for (pos, s) in self.sentences.iter().enumerate() {
            let fail = |field: &'static str, message: String| ScriptError::Validation { index: s.index, field, message };
            if s.index != pos {
                return Err(fail("index", format!("expected contiguous index {pos}")));
            }
            let times = [s.start_s, s.end_s, s.keyword_start_s, s.keyword_end_s];
            if times.iter().any(|t| !t.is_finite()) {
                return Err(fail("start_s", "times must be finite".into()));
            }
            if s.start_s < 0.0 {
                return Err(fail("start_s", "must be nonnegative".into()));
            }
            if s.end_s <= s.start_s {
                return Err(fail("end_s", "must be after start_s".into()));
            }
            if s.keyword_start_s < s.start_s {
                return Err(fail("keyword_start_s", "precedes sentence start".into()));
            }
            if s.keyword_end_s <= s.keyword_start_s {
                return Err(fail("keyword_end_s", "must be after keyword_start_s".into()));
            }
            if s.keyword_end_s > s.end_s {
                return Err(fail("keyword_end_s", "exceeds sentence end".into()));
            }
            if !keyword_in_sentence(&s.keyword, &s.text) {
                return Err(fail("keyword", format!("{:?} does not occur in the sentence", s.keyword)));
            }
            if s.semantic_tag.is_some() && s.intent != IntentLabel::Semantic {
                return Err(fail("semantic_tag", "only allowed for the semantic intent".into()));
            }
            if let Some(prev) = prev_end {
                if s.start_s < prev {
                    return Err(fail("start_s", "overlaps the previous sentence".into()));
                }
            }
            prev_end = Some(s.end_s);
        }
        Ok(())
    }

    /// Canonical JSON (sorted keys, compact).
    pub fn to_json(&self) -> Result<String, ScriptError> {
        self.validate()?;
        Ok(canonical::to_string(self))
    }

    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let script: GestureScript =
            serde_json::from_str(text).map_err(|e| ScriptError::Json(e.to_string()))?;
        script.validate()?;
        Ok(script)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, ScriptError> {
        let script: GestureScript =
            serde_json::from_value(value).map_err(|e| ScriptError::Json(e.to_string()))?;
        script.validate()?;
        Ok(script)
    }

    pub fn end_s(&self) -> f64 {
        self.sentences.last().map_or(0.0, |s| s.end_s)
    }
}

/// Case-insensitive token match for space-delimited text, substring
/// containment for CJK.
pub fn keyword_in_sentence(keyword: &str, sentence: &str) -> bool {
    let kw = normalize_token(keyword);
    if kw.is_empty() {
        return false;
    }
    if kw.chars().any(is_cjk) {
        return normalize_token(&sentence.split_whitespace().collect::<String>()).contains(&kw);
    }
    sentence.split_whitespace().any(|t| normalize_token(t) == kw)
}

/// Lowercases and drops everything but alphanumerics and inner apostrophes.
pub fn normalize_token(token: &str) -> String {
    let kept: String = token
        .chars()
        .filter(|c| c.is_alphanumeric() || *c == '\'' || *c == '’')
        .map(|c| if c == '’' { '\'' } else { c })
        .flat_map(char::to_lowercase)
        .collect();
    kept.trim_matches('\'').to_string()
}

pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF | 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0xAC00..=0xD7AF)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub tokens: Vec<String>,
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '。' | '！' | '？')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '”' | '’' | '」' | '』' | '）')
}

/// Splits on terminal punctuation. A `.` between two digits does not split;
/// abbreviations such as "Mr." do.
pub fn segment_sentences(text: &str) -> Result<Vec<Sentence>, ScriptError> {
    if text.trim().is_empty() {
        return Err(ScriptError::EmptyInput);
    }
    let chars: Vec<char> = text.chars().collect();
    let mut pieces = Vec::new();
    let mut current = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        current.push(c);
        i += 1;
        if !is_terminal(c) {
            continue;
        }
        let decimal = c == '.'
            && i >= 2
            && chars[i - 2].is_ascii_digit()
            && chars.get(i).is_some_and(|n| n.is_ascii_digit());
        if decimal {
            continue;
        }
        while i < chars.len() && (is_terminal(chars[i]) || is_closer(chars[i])) {
            current.push(chars[i]);
            i += 1;
        }
        pieces.push(std::mem::take(&mut current));
    }
    pieces.push(current);
    Ok(pieces
        .into_iter()
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .enumerate()
        .map(|(index, text)| Sentence {
            index,
            tokens: text.split_whitespace().map(str::to_string).collect(),
            text,
        })
        .collect())
}

/// A sentence with its word timings attached but no intent yet.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedSentence {
    pub index: usize,
    pub text: String,
    pub tokens: Vec<String>,
    pub start_s: f64,
    pub end_s: f64,
    pub words: Vec<WordTiming>,
}

impl TimedSentence {
    /// Time span of the first run of timed words covering `keyword`.
    pub fn keyword_span(&self, keyword: &str) -> Option<(f64, f64)> {
        let kw = normalize_token(keyword);
        if kw.is_empty() {
            return None;
        }
        if let Some(w) = self.words.iter().find(|w| normalize_token(&w.word) == kw) {
            return Some((w.start_s, w.end_s));
        }
        for start in 0..self.words.len() {
            let mut joined = String::new();
            for end in start..self.words.len() {
                joined.push_str(&normalize_token(&self.words[end].word));
                if joined.contains(&kw) {
                    return Some((self.words[start].start_s, self.words[end].end_s));
                }
            }
        }
        None
    }
}

fn validate_timings(timings: &[WordTiming]) -> Result<(), ScriptError> {
    let mut prev_end = 0.0_f64;
    for (i, w) in timings.iter().enumerate() {
        if !(w.start_s.is_finite() && w.end_s.is_finite()) || w.start_s < 0.0 || w.end_s <= w.start_s {
            return Err(ScriptError::Timings(format!("word {i} ({:?}) has an invalid interval", w.word)));
        }
        if w.start_s < prev_end - 1e-9 {
            return Err(ScriptError::Timings(format!("word {i} ({:?}) overlaps its predecessor", w.word)));
        }
        prev_end = w.end_s;
    }
    Ok(())
}

/// Greedy left-to-right matching of sentence tokens against timed words,
/// after punctuation stripping and case folding. A token may consume several
/// consecutive timed words whose concatenation spells it (CJK text, split
/// hyphenations).
pub fn attach_timings(
    sentences: &[Sentence],
    timings: &[WordTiming],
) -> Result<Vec<TimedSentence>, ScriptError> {
    validate_timings(timings)?;
    let timed: Vec<(String, &WordTiming)> = timings
        .iter()
        .map(|w| (normalize_token(&w.word), w))
        .filter(|(n, _)| !n.is_empty())
        .collect();
    let mut cursor = 0;
    let mut out = Vec::with_capacity(sentences.len());
    for sentence in sentences {
        let mismatch = |detail: String| ScriptError::AlignmentMismatch { sentence: sentence.index, detail };
        let mut words = Vec::new();
        for token in &sentence.tokens {
            let norm = normalize_token(token);
            if norm.is_empty() {
                continue;
            }
            let mut joined = String::new();
            loop {
                let Some((next, w)) = timed.get(cursor) else {
                    return Err(mismatch(format!("token {token:?} has no remaining timed word")));
                };
                joined.push_str(next);
                words.push((*w).clone());
                cursor += 1;
                if joined == norm {
                    break;
                }
                if !norm.starts_with(&joined) {
                    return Err(mismatch(format!("token {token:?} does not match timed word {:?}", w.word)));
                }
            }
        }
        let (Some(first), Some(last)) = (words.first(), words.last()) else {
            return Err(mismatch("sentence has no alignable tokens".into()));
        };
        out.push(TimedSentence {
            index: sentence.index,
            text: sentence.text.clone(),
            tokens: sentence.tokens.clone(),
            start_s: first.start_s,
            end_s: last.end_s,
            words,
        });
    }
    if let Some((_, w)) = timed.get(cursor) {
        return Err(ScriptError::AlignmentMismatch {
            sentence: sentences.len().saturating_sub(1),
            detail: format!("timed word {:?} is not in the text", w.word),
        });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimingFile {
    words: Vec<WordTiming>,
}

/// Reads `{"words":[{"word","start_s","end_s"},...]}`.
pub fn parse_timings_json(text: &str) -> Result<Vec<WordTiming>, ScriptError> {
    let file: TimingFile = serde_json::from_str(text).map_err(|e| ScriptError::Timings(e.to_string()))?;
    validate_timings(&file.words)?;
    Ok(file.words)
}

pub fn timings_to_json(words: &[WordTiming]) -> String {
    canonical::to_string(&TimingFile { words: words.to_vec() })
}

/// Word intervals from the `"words"` interval tier of a long-form Praat
/// TextGrid. Empty labels (silences) are skipped. Short-form files are not
/// supported.
pub fn parse_textgrid(content: &str) -> Result<Vec<WordTiming>, ScriptError> {
    let err = |line: usize, message: &str| ScriptError::TextGrid { line, message: message.to_string() };
    let lines: Vec<&str> = content.lines().collect();
    let first = lines.iter().position(|l| !l.trim().is_empty()).ok_or_else(|| err(1, "empty file"))?;
    if !lines[first].contains("ooTextFile") {
        return Err(err(first + 1, "missing ooTextFile header"));
    }
    if !lines.iter().any(|l| l.trim_start().starts_with("item [")) {
        return Err(err(first + 1, "short-form TextGrid is not supported"));
    }

    let mut in_item = false;
    let mut is_words = false;
    let mut class_interval = false;
    let mut found = false;
    let mut words = Vec::new();
    let mut pending: Option<(usize, Option<f64>, Option<f64>)> = None;

    for (i, raw) in lines.iter().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.starts_with("item [") && line.ends_with(':') && line != "item []:" {
            if pending.is_some() {
                return Err(err(lineno, "interval block ended before its text field"));
            }
            in_item = true;
            is_words = false;
            class_interval = false;
            continue;
        }
        if !in_item {
            continue;
        }
        if line.starts_with("intervals [") || line.starts_with("points [") {
            if pending.is_some() {
                return Err(err(lineno, "interval block ended before its text field"));
            }
            if is_words && class_interval && line.starts_with("intervals [") {
                pending = Some((lineno, None, None));
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else { continue };
        let (key, value) = (key.trim(), value.trim());
        match (key, pending.as_mut()) {
            ("class", None) => class_interval = unquote(value).as_deref() == Some("IntervalTier"),
            ("name", None) => {
                is_words = unquote(value).as_deref() == Some("words");
                if is_words && class_interval {
                    found = true;
                }
            }
            ("xmin", Some(block)) => {
                block.1 = Some(value.parse().map_err(|_| err(lineno, "xmin is not a number"))?)
            }
            ("xmax", Some(block)) => {
                block.2 = Some(value.parse().map_err(|_| err(lineno, "xmax is not a number"))?)
            }
            ("text", Some(_)) => {
                let (start_line, xmin, xmax) = pending.take().unwrap();
                let (Some(start_s), Some(end_s)) = (xmin, xmax) else {
                    return Err(err(start_line, "interval block is missing xmin or xmax"));
                };
                let text = unquote(value).ok_or_else(|| err(lineno, "text must be a quoted string"))?;
                if end_s < start_s {
                    return Err(err(start_line, "interval xmax precedes xmin"));
                }
                let word = text.trim();
                if !word.is_empty() {
                    words.push(WordTiming { word: word.to_string(), start_s, end_s });
                }
            }
            _ => {}
        }
    }
    if let Some((line, _, _)) = pending {
        return Err(err(line, "interval block is truncated"));
    }
    if !found {
        return Err(err(lines.len(), "no interval tier named \"words\""));
    }
    Ok(words)
}

fn unquote(value: &str) -> Option<String> {
    let inner = value.strip_prefix('"')?.strip_suffix('"')?;
    Some(inner.replace("\"\"", "\""))
}

/// Long-form TextGrid with a single `"words"` tier; gaps become empty
/// intervals.
pub fn write_textgrid(words: &[WordTiming], xmax: f64) -> String {
    let mut intervals: Vec<(f64, f64, &str)> = Vec::new();
    let mut cursor = 0.0;
    for w in words {
        if w.start_s > cursor {
            intervals.push((cursor, w.start_s, ""));
        }
        intervals.push((w.start_s, w.end_s, &w.word));
        cursor = w.end_s;
    }
    if xmax > cursor {
        intervals.push((cursor, xmax, ""));
    }
    let mut out = String::new();
    out.push_str("File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\n");
    out.push_str(&format!("xmin = 0 \nxmax = {xmax} \ntiers? <exists> \nsize = 1 \nitem []: \n"));
    out.push_str("    item [1]:\n        class = \"IntervalTier\" \n        name = \"words\" \n");
    out.push_str(&format!("        xmin = 0 \n        xmax = {xmax} \n        intervals: size = {} \n", intervals.len()));
    for (k, (a, b, text)) in intervals.iter().enumerate() {
        out.push_str(&format!(
            "        intervals [{}]:\n            xmin = {a} \n            xmax = {b} \n            text = \"{}\" \n",
            k + 1,
            text.replace('"', "\"\"")
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(word: &str, a: f64, b: f64) -> WordTiming {
        WordTiming { word: word.into(), start_s: a, end_s: b }
    }

    fn entry(index: usize, text: &str, a: f64, b: f64, kw: &str) -> SentenceEntry {
        SentenceEntry {
            index,
            text: text.into(),
            start_s: a,
            end_s: b,
            intent: IntentLabel::Description,
            keyword: kw.into(),
            keyword_start_s: a,
            keyword_end_s: a + 0.1,
            gesture_id: None,
            semantic_tag: None,
        }
    }

    #[test]
    fn segments_on_terminals() {
        let s = segment_sentences("Hello. Bye!").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].index, s[0].text.as_str()), (0, "Hello."));
        assert_eq!((s[1].index, s[1].text.as_str()), (1, "Bye!"));
    }

    #[test]
    fn no_terminal_gives_single_sentence() {
        let s = segment_sentences("No terminal punctuation").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].text, "No terminal punctuation");
        assert_eq!(s[0].tokens, vec!["No", "terminal", "punctuation"]);
    }

    #[test]
    fn abbreviation_splits() {
        let s = segment_sentences("Today Mr. Smith joins us. He costs 3.5 dollars?! Wow").unwrap();
        let texts: Vec<_> = s.iter().map(|x| x.text.as_str()).collect();
        assert_eq!(texts, vec!["Today Mr.", "Smith joins us.", "He costs 3.5 dollars?!", "Wow"]);
    }

    #[test]
    fn cjk_terminals_split() {
        let s = segment_sentences("大家好。欢迎来到节目！").unwrap();
        let texts: Vec<_> = s.iter().map(|x| x.text.as_str()).collect();
        assert_eq!(texts, vec!["大家好。", "欢迎来到节目！"]);
    }

    #[test]
    fn empty_text_is_an_error() {
        assert_eq!(segment_sentences("  \n "), Err(ScriptError::EmptyInput));
    }

    #[test]
    fn attaches_simple_timings() {
        let s = segment_sentences("hi there").unwrap();
        let t = attach_timings(&s, &[w("hi", 0.0, 0.3), w("there", 0.35, 0.7)]).unwrap();
        assert_eq!((t[0].start_s, t[0].end_s), (0.0, 0.7));
    }

    #[test]
    fn empty_timings_mismatch() {
        let s = segment_sentences("hi there").unwrap();
        assert!(matches!(attach_timings(&s, &[]), Err(ScriptError::AlignmentMismatch { .. })));
    }

    #[test]
    fn hand_aligned_two_sentences_skip_punctuation() {
        // the dash stands alone as a token
        let s = segment_sentences("Well \u{2014} we did it. Thanks, all!").unwrap();
        let timings = [
            w("well", 0.10, 0.40),
            w("we", 0.55, 0.70),
            w("did", 0.70, 0.90),
            w("it", 0.90, 1.05),
            w("thanks", 1.60, 2.00),
            w("all", 2.10, 2.40),
        ];
        let t = attach_timings(&s, &timings).unwrap();
        assert_eq!((t[0].start_s, t[0].end_s), (0.10, 1.05));
        assert_eq!((t[1].start_s, t[1].end_s), (1.60, 2.40));
        assert_eq!(t[1].words.len(), 2);
    }

    #[test]
    fn mismatch_names_divergent_token() {
        let s = segment_sentences("hello brave world").unwrap();
        let err = attach_timings(&s, &[w("hello", 0.0, 0.2), w("new", 0.2, 0.4), w("world", 0.4, 0.6)]).unwrap_err();
        match err {
            ScriptError::AlignmentMismatch { detail, .. } => assert!(detail.contains("\"brave\""), "{detail}"),
            other => panic!("{other:?}"),
        }
        let err = attach_timings(&s, &[w("hello", 0.0, 0.2), w("brave", 0.2, 0.4), w("world", 0.4, 0.6), w("extra", 0.7, 0.8)]);
        assert!(matches!(err, Err(ScriptError::AlignmentMismatch { .. })));
    }

    #[test]
    fn cjk_tokens_consume_several_words() {
        let s = segment_sentences("大家好欢迎。").unwrap();
        let t = attach_timings(&s, &[w("大家", 0.0, 0.3), w("好", 0.3, 0.5), w("欢迎", 0.6, 1.0)]).unwrap();
        assert_eq!((t[0].start_s, t[0].end_s), (0.0, 1.0));
        assert_eq!(t[0].keyword_span("欢迎"), Some((0.6, 1.0)));
        assert_eq!(t[0].keyword_span("家好"), Some((0.0, 0.5)));
    }

    #[test]
    fn rejects_overlapping_timings() {
        let s = segment_sentences("a b").unwrap();
        assert!(matches!(attach_timings(&s, &[w("a", 0.0, 0.5), w("b", 0.4, 0.6)]), Err(ScriptError::Timings(_))));
    }

    const MINIMAL_GRID: &str = r#"File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 0.9
tiers? <exists>
size = 1
item []:
    item [1]:
        class = "IntervalTier"
        name = "words"
        xmin = 0
        xmax = 0.9
        intervals: size = 2
        intervals [1]:
            xmin = 0
            xmax = 0.5
            text = ""
        intervals [2]:
            xmin = 0.5
            xmax = 0.9
            text = "hello"
"#;

    #[test]
    fn textgrid_minimal() {
        assert_eq!(parse_textgrid(MINIMAL_GRID).unwrap(), vec![w("hello", 0.5, 0.9)]);
    }

    #[test]
    fn textgrid_all_empty_and_other_tiers() {
        let grid = MINIMAL_GRID.replace("\"hello\"", "\"\"");
        assert_eq!(parse_textgrid(&grid).unwrap(), vec![]);
        let phones = MINIMAL_GRID.replace("\"words\"", "\"phones\"");
        assert!(matches!(parse_textgrid(&phones), Err(ScriptError::TextGrid { .. })));
    }

    #[test]
    fn textgrid_short_form_rejected() {
        let short = "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\n0\n0.9\n<exists>\n1\n\"IntervalTier\"\n\"words\"\n0\n0.9\n1\n0\n0.9\n\"hello\"\n";
        match parse_textgrid(short) {
            Err(ScriptError::TextGrid { message, .. }) => assert!(message.contains("short-form")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn textgrid_malformed_interval_reports_line() {
        let bad = MINIMAL_GRID.replace("xmax = 0.5", "xmax = zero");
        match parse_textgrid(&bad) {
            Err(ScriptError::TextGrid { line, .. }) => assert_eq!(line, 17),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn textgrid_writer_round_trips() {
        let words = vec![w("hello", 0.5, 0.9), w("\"quoted\"", 1.0, 1.25)];
        assert_eq!(parse_textgrid(&write_textgrid(&words, 2.0)).unwrap(), words);
    }

    #[test]
    fn empty_script_serializes_exactly() {
        let s = GestureScript::default();
        assert_eq!(s.to_json().unwrap(), r#"{"sentences":[],"version":1}"#);
        assert_eq!(GestureScript::from_json(r#"{"version":1,"sentences":[]}"#).unwrap(), s);
    }

    #[test]
    fn unknown_intent_rejected() {
        let text = r#"{"version":1,"sentences":[{"index":0,"text":"hi","start_s":0,"end_s":1,"intent":"waving","keyword":"hi","keyword_start_s":0,"keyword_end_s":0.5}]}"#;
        assert!(matches!(GestureScript::from_json(text), Err(ScriptError::Json(_))));
    }

    #[test]
    fn validation_names_index_and_field() {
        let mut s = GestureScript { version: 1, sentences: vec![entry(0, "hello world", 0.0, 1.0, "hello"), entry(1, "again now", 0.5, 2.0, "again")] };
        assert_eq!(
            s.validate(),
            Err(ScriptError::Validation { index: 1, field: "start_s", message: "overlaps the previous sentence".into() })
        );
        s.sentences[1].start_s = 1.0;
        s.sentences[1].keyword_start_s = 1.0;
        s.sentences[1].keyword_end_s = 1.1;
        s.validate().unwrap();
        s.sentences[1].keyword = "missing".into();
        assert!(matches!(s.validate(), Err(ScriptError::Validation { index: 1, field: "keyword", .. })));
        s.sentences[1].keyword = "again".into();
        s.sentences[1].semantic_tag = Some("thumbs_up".into());
        assert!(matches!(s.validate(), Err(ScriptError::Validation { index: 1, field: "semantic_tag", .. })));
    }

    #[test]
    fn keyword_matching_rules() {
        assert!(keyword_in_sentence("Never", "I will never, ever stop."));
        assert!(keyword_in_sentence("ever", "I will never, ever stop."));
        assert!(!keyword_in_sentence("eve", "I will never, ever stop."));
        assert!(keyword_in_sentence("欢迎", "大家好，欢迎来到节目！"));
    }

    #[test]
    fn intent_labels_parse() {
        for l in IntentLabel::ALL {
            assert_eq!(l.as_str().parse::<IntentLabel>().unwrap(), l);
            assert_eq!(serde_json::to_string(&l).unwrap(), format!("\"{l}\""));
        }
        assert!("greeting".parse::<IntentLabel>().is_err());
    }
}
