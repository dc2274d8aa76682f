//! Intent-driven co-speech gesture synthesis.
//!
//! Speech text is split into sentences, each sentence gets a gesture intent
//! and a keyword (from an LLM or an offline lexicon), a staged gesture unit is
//! picked from a dictionary, placed on the word-timing timeline, and layered
//! additively onto a base motion track.

pub mod canonical;
pub mod dictionary;
pub mod intent;
pub mod motion;
pub mod schedule;
pub mod script;
pub mod segmentation;
pub mod service;
pub mod synth;

pub use dictionary::{Dictionary, GestureUnit, StageMap};
pub use motion::{LossReport, MotionClip, Pose, Warp};
pub use script::{GestureScript, IntentLabel, SentenceEntry, WordTiming};
