use serde_json::{Map, Value};

use super::{Rationale, ReasoningAnswer, ReasoningError, ReasoningResult};

/// Value of `"status"` with which a backend declines to pick an object.
pub const NO_RELEVANT_OBJECT: &str = "no_relevant_object";

const MAX_BRACE_STARTS: usize = 64;
const FRAGMENT_CHARS: usize = 160;

/// Serializes an answer in the response block format.
pub fn format_response(answer: &ReasoningAnswer) -> String {
    format!("```json\n{}\n```\n", serde_json::to_string_pretty(answer).expect("answer serializes"))
}

/// Extracts and validates the structured block from a backend reply.
/// Surrounding prose and code fences are tolerated. Never panics.
pub fn parse_reasoning_response(raw: &str) -> Result<ReasoningResult, ReasoningError> {
    let mut first_error = None;
    for candidate in fenced_blocks(raw).into_iter().chain(brace_blocks(raw)) {
        let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(candidate) else { continue };
        if obj.get("status").and_then(Value::as_str) == Some(NO_RELEVANT_OBJECT) {
            return Err(ReasoningError::NoRelevantObject { raw: raw.to_string() });
        }
        match answer_from(&obj) {
            Ok(answer) => return Ok(ReasoningResult { answer, raw_response: raw.to_string() }),
            Err((field, message)) => {
                first_error.get_or_insert(ReasoningError::ParseFailure {
                    field: Some(field),
                    message,
                    fragment: fragment(candidate),
                });
            }
        }
    }
    Err(first_error.unwrap_or_else(|| ReasoningError::ParseFailure {
        field: None,
        message: "no structured block found".into(),
        fragment: fragment(raw),
    }))
}

fn fragment(s: &str) -> String {
    s.chars().take(FRAGMENT_CHARS).collect()
}

fn answer_from(obj: &Map<String, Value>) -> Result<ReasoningAnswer, (String, String)> {
    let text = |o: &Map<String, Value>, key: &str, path: &str| -> Result<String, (String, String)> {
        match o.get(key) {
            None => Err((path.to_string(), "missing".to_string())),
            Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
            Some(_) => Err((path.to_string(), "must be a non-empty string".to_string())),
        }
    };
    let task = text(obj, "task", "task")?;
    let object = text(obj, "object", "object")?;
    let part = text(obj, "part", "part")?;
    let affordance = text(obj, "affordance", "affordance")?;
    let rationale = match obj.get("rationale") {
        None => return Err(("rationale".into(), "missing".into())),
        Some(Value::Object(r)) => Rationale {
            task_analysis: text(r, "task_analysis", "rationale.task_analysis")?,
            object_identification: text(r, "object_identification", "rationale.object_identification")?,
            part_selection: text(r, "part_selection", "rationale.part_selection")?,
        },
        Some(Value::Array(steps)) => {
            let steps: Vec<&str> = steps.iter().filter_map(Value::as_str).filter(|s| !s.trim().is_empty()).collect();
            if steps.len() != 3 {
                return Err(("rationale".into(), "must list exactly three non-empty steps".into()));
            }
            Rationale {
                task_analysis: steps[0].to_string(),
                object_identification: steps[1].to_string(),
                part_selection: steps[2].to_string(),
            }
        }
        Some(_) => return Err(("rationale".into(), "must be an object with one entry per step".into())),
    };
    Ok(ReasoningAnswer { task, object, part, affordance, rationale })
}

/// Contents of ``` fences, skipping an optional language tag.
fn fenced_blocks(raw: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = raw;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let tag = &after[..body_start];
        // a fence opened inline with content ("```{...}```") has no tag line
        let body = if tag.trim().chars().all(|c| c.is_ascii_alphanumeric()) { &after[body_start..] } else { after };
        match body.find("```") {
            Some(close) => {
                out.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => break,
        }
    }
    out
}

/// Balanced `{...}` spans, string-literal aware, from the first few
/// opening braces.
fn brace_blocks(raw: &str) -> Vec<&str> {
    let bytes = raw.as_bytes();
    let mut out = Vec::new();
    for start in raw.match_indices('{').map(|(i, _)| i).take(MAX_BRACE_STARTS) {
        let (mut depth, mut in_str, mut escaped) = (0usize, false, false);
        for (i, &b) in bytes.iter().enumerate().skip(start) {
            if in_str {
                match (escaped, b) {
                    (true, _) => escaped = false,
                    (false, b'\\') => escaped = true,
                    (false, b'"') => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        // '{' and '}' are ASCII, so both ends are char boundaries
                        out.push(&raw[start..=i]);
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    out
}
