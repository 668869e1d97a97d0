//! Affordance reasoning: instruction + image in, (task, object, part,
//! affordance) out, through a pluggable vision-language backend.

mod mock;
mod parse;
mod prompt;
mod remote;

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::ColorImage;

pub use self::mock::{MockBackend, MockRule, MockRules, PartPreference};
pub use self::parse::{format_response, parse_reasoning_response, NO_RELEVANT_OBJECT};
pub use self::prompt::{build_prompt, PromptPayload, OUTPUT_FIELDS, RESPONSE_FORMAT_VERSION};
pub use self::remote::{RemoteReasoningBackend, RemoteReasoningConfig};

/// Longest accepted instruction, in characters.
pub const MAX_INSTRUCTION_CHARS: usize = 2000;
/// Total backend calls per inference, including the first.
pub const DEFAULT_ATTEMPTS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReasoningError {
    #[error("invalid instruction: {0}")]
    InvalidInstruction(String),
    #[error("observation image is empty")]
    EmptyImage,
    #[error("could not parse reasoning response{}: {message} (fragment: {fragment:?})", field.as_ref().map(|f| format!(" field '{f}'")).unwrap_or_default())]
    ParseFailure { field: Option<String>, message: String, fragment: String },
    #[error("backend returned no usable response after {attempts} attempts")]
    MalformedReasoning { attempts: usize, raw: String },
    #[error("reasoning backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no task-relevant object in view")]
    NoRelevantObject { raw: String },
}

/// A natural-language instruction: non-empty after trimming, at most
/// [`MAX_INSTRUCTION_CHARS`] characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Instruction(String);

impl Instruction {
    pub fn new(text: impl Into<String>) -> Result<Self, ReasoningError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ReasoningError::InvalidInstruction("instruction is empty".into()));
        }
        let n = text.chars().count();
        if n > MAX_INSTRUCTION_CHARS {
            return Err(ReasoningError::InvalidInstruction(format!(
                "instruction has {n} characters, limit is {MAX_INSTRUCTION_CHARS}"
            )));
        }
        Ok(Self(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Instruction {
    type Error = ReasoningError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(s)
    }
}

impl From<Instruction> for String {
    fn from(i: Instruction) -> String {
        i.0
    }
}

impl std::fmt::Display for Instruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// The three reasoning steps, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rationale {
    pub task_analysis: String,
    pub object_identification: String,
    pub part_selection: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningAnswer {
    pub task: String,
    pub object: String,
    pub part: String,
    pub affordance: String,
    pub rationale: Rationale,
}

impl ReasoningAnswer {
    /// Checks that every field is non-empty after trimming.
    pub fn check(&self) -> Result<(), String> {
        let r = &self.rationale;
        let fields = [
            ("task", &self.task),
            ("object", &self.object),
            ("part", &self.part),
            ("affordance", &self.affordance),
            ("rationale.task_analysis", &r.task_analysis),
            ("rationale.object_identification", &r.object_identification),
            ("rationale.part_selection", &r.part_selection),
        ];
        match fields.iter().find(|(_, v)| v.trim().is_empty()) {
            Some((name, _)) => Err(name.to_string()),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningResult {
    #[serde(flatten)]
    pub answer: ReasoningAnswer,
    /// Verbatim backend output the answer was parsed from.
    pub raw_response: String,
}

/// A vision-language model that answers a prompt with free text.
pub trait ReasoningBackend: Send + Sync {
    fn complete(&self, prompt: &PromptPayload) -> Result<String, ReasoningError>;
}

impl<B: ReasoningBackend + ?Sized> ReasoningBackend for &B {
    fn complete(&self, prompt: &PromptPayload) -> Result<String, ReasoningError> {
        (**self).complete(prompt)
    }
}

impl<B: ReasoningBackend + ?Sized> ReasoningBackend for Box<B> {
    fn complete(&self, prompt: &PromptPayload) -> Result<String, ReasoningError> {
        (**self).complete(prompt)
    }
}

/// Appended to the user text when a response could not be parsed.
pub const REPAIR_SUFFIX: &str = "\n\nYour previous answer could not be parsed. Reply with exactly one \
fenced ```json block containing the fields task, object, part, affordance and rationale, and nothing else.";

pub fn infer_affordance(
    instr: &Instruction,
    rgb: &ColorImage,
    backend: &dyn ReasoningBackend,
) -> Result<ReasoningResult, ReasoningError> {
    infer_affordance_with(instr, rgb, backend, DEFAULT_ATTEMPTS)
}

/// Calls the backend up to `attempts` times, appending a repair instruction
/// after each unparseable response. Transport errors and an explicit
/// no-relevant-object answer end the loop immediately.
pub fn infer_affordance_with(
    instr: &Instruction,
    rgb: &ColorImage,
    backend: &dyn ReasoningBackend,
    attempts: usize,
) -> Result<ReasoningResult, ReasoningError> {
    let mut prompt = build_prompt(instr, rgb)?;
    let attempts = attempts.max(1);
    let mut last_raw = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            prompt = prompt.with_user_suffix(REPAIR_SUFFIX);
        }
        let raw = backend.complete(&prompt)?;
        match parse_reasoning_response(&raw) {
            Ok(r) => return Ok(r),
            Err(ReasoningError::ParseFailure { .. }) => last_raw = raw,
            Err(e) => return Err(e),
        }
    }
    Err(ReasoningError::MalformedReasoning { attempts, raw: last_raw })
}

/// Memoizes successful backend responses by prompt hash.
pub struct CachingBackend<B> {
    inner: B,
    cache: Mutex<HashMap<[u8; 32], String>>,
}

impl<B: ReasoningBackend> CachingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, cache: Mutex::new(HashMap::new()) }
    }

    pub fn len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<B: ReasoningBackend> ReasoningBackend for CachingBackend<B> {
    fn complete(&self, prompt: &PromptPayload) -> Result<String, ReasoningError> {
        let key: [u8; 32] = Sha256::digest(prompt.to_bytes()).into();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let out = self.inner.complete(prompt)?;
        self.cache.lock().expect("cache lock").insert(key, out.clone());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Scripted {
        replies: Vec<Result<String, ReasoningError>>,
        calls: AtomicUsize,
        prompts: Mutex<Vec<String>>,
    }

    impl Scripted {
        fn new(replies: Vec<Result<String, ReasoningError>>) -> Self {
            Self { replies, calls: AtomicUsize::new(0), prompts: Mutex::new(vec![]) }
        }
    }

    impl ReasoningBackend for Scripted {
        fn complete(&self, prompt: &PromptPayload) -> Result<String, ReasoningError> {
            self.prompts.lock().unwrap().push(prompt.user_text.clone());
            let i = self.calls.fetch_add(1, Ordering::SeqCst);
            self.replies[i.min(self.replies.len() - 1)].clone()
        }
    }

    fn answer() -> ReasoningAnswer {
        ReasoningAnswer {
            task: "scoop".into(),
            object: "spoon".into(),
            part: "handle".into(),
            affordance: "grasp".into(),
            rationale: Rationale {
                task_analysis: "a".into(),
                object_identification: "b".into(),
                part_selection: "c".into(),
            },
        }
    }

    fn image() -> ColorImage {
        ColorImage::new(4, 4)
    }

    #[test]
    fn instruction_limits() {
        assert!(Instruction::new("  \n").is_err());
        assert!(Instruction::new("x".repeat(2000)).is_ok());
        assert!(Instruction::new("é".repeat(2001)).is_err());
    }

    #[test]
    fn three_garbage_replies_are_malformed() {
        let b = Scripted::new(vec![Ok("no idea".into())]);
        let instr = Instruction::new("I am thirsty").unwrap();
        let err = infer_affordance(&instr, &image(), &b).unwrap_err();
        assert!(matches!(err, ReasoningError::MalformedReasoning { attempts: 3, ref raw } if raw == "no idea"));
        assert_eq!(b.calls.load(Ordering::SeqCst), 3);
        let prompts = b.prompts.lock().unwrap();
        assert!(!prompts[0].contains(REPAIR_SUFFIX));
        assert!(prompts[1].ends_with(REPAIR_SUFFIX));
    }

    #[test]
    fn repair_after_one_bad_reply() {
        let good = format_response(&answer());
        let b = Scripted::new(vec![Ok("{".into()), Ok(good.clone())]);
        let instr = Instruction::new("I want to scoop something").unwrap();
        let r = infer_affordance(&instr, &image(), &b).unwrap();
        assert_eq!(r.answer, answer());
        assert_eq!(r.raw_response, good);
        assert_eq!(b.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn transport_failure_is_not_retried() {
        let b = Scripted::new(vec![Err(ReasoningError::BackendUnavailable("down".into()))]);
        let instr = Instruction::new("I am thirsty").unwrap();
        assert!(matches!(infer_affordance(&instr, &image(), &b), Err(ReasoningError::BackendUnavailable(_))));
        assert_eq!(b.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn cache_serves_repeats() {
        let b = CachingBackend::new(Scripted::new(vec![Ok(format_response(&answer()))]));
        let instr = Instruction::new("I want to scoop something").unwrap();
        infer_affordance(&instr, &image(), &b).unwrap();
        infer_affordance(&instr, &image(), &b).unwrap();
        assert_eq!(b.inner.calls.load(Ordering::SeqCst), 1);
        assert_eq!(b.len(), 1);
    }
}
