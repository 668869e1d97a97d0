use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{format_response, PromptPayload, Rationale, ReasoningAnswer, ReasoningBackend, ReasoningError};
use crate::scene::LabeledObject;

const DEFAULT_RULES: &str = include_str!("rules.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    pub keywords: Vec<String>,
    pub task: String,
    /// Candidate object names, most preferred first.
    pub objects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartPreference {
    pub part: String,
    pub affordance: String,
}

/// Keyword rule table driving [`MockBackend`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRules {
    pub version: u32,
    #[serde(rename = "rule")]
    pub rules: Vec<MockRule>,
    pub preference: PartPreference,
    /// Implicit instruction per object class name.
    #[serde(default)]
    pub canonical: BTreeMap<String, String>,
}

impl Default for MockRules {
    fn default() -> Self {
        Self::from_toml(DEFAULT_RULES).expect("bundled rule table parses")
    }
}

impl MockRules {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let rules: MockRules = toml::from_str(text).map_err(|e| e.to_string())?;
        if rules.version != 1 {
            return Err(format!("unsupported rule table version {}", rules.version));
        }
        Ok(rules)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("rule table serializes")
    }

    pub fn canonical_instruction(&self, class_name: &str) -> Option<&str> {
        self.canonical.get(class_name).map(String::as_str)
    }

    /// Decides the answer for an instruction given the visible objects, or
    /// `None` when no rule finds a visible candidate.
    pub fn decide(&self, instruction: &str, visible: &[LabeledObject]) -> Option<ReasoningAnswer> {
        let words = words(instruction);
        for rule in &self.rules {
            let Some(keyword) = rule.keywords.iter().find(|k| contains_phrase(&words, k)) else { continue };
            for name in &rule.objects {
                let Some(obj) = visible.iter().find(|o| o.class_name.eq_ignore_ascii_case(name)) else { continue };
                let graspable: Vec<_> = obj.parts.iter().filter(|p| p.graspable()).collect();
                let Some(part) = graspable
                    .iter()
                    .find(|p| p.name == self.preference.part)
                    .or_else(|| graspable.first())
                else {
                    continue;
                };
                let part_names: Vec<&str> = obj.parts.iter().map(|p| p.name.as_str()).collect();
                return Some(ReasoningAnswer {
                    task: rule.task.clone(),
                    object: obj.class_name.clone(),
                    part: part.name.clone(),
                    affordance: self.preference.affordance.clone(),
                    rationale: Rationale {
                        task_analysis: format!("The instruction mentions '{keyword}', so the task is to {}.", rule.task),
                        object_identification: format!("The {} in view is the object best suited to {}.", obj.class_name, rule.task),
                        part_selection: format!(
                            "The {} has parts {}; holding the {} keeps the rest free for the task.",
                            obj.class_name,
                            part_names.join(", "),
                            part.name
                        ),
                    },
                });
            }
        }
        None
    }
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

fn contains_phrase(words: &[String], phrase: &str) -> bool {
    let needle = self::words(phrase);
    !needle.is_empty() && words.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// Deterministic stand-in for a vision-language model. It sees the scene
/// through the list of visible labeled objects instead of the image and
/// answers in the same text format a real model would.
#[derive(Debug, Clone)]
pub struct MockBackend {
    rules: MockRules,
    visible: Vec<LabeledObject>,
}

impl MockBackend {
    pub fn new(rules: MockRules, visible: Vec<LabeledObject>) -> Self {
        Self { rules, visible }
    }
}

impl ReasoningBackend for MockBackend {
    fn complete(&self, prompt: &PromptPayload) -> Result<String, ReasoningError> {
        Ok(match self.rules.decide(prompt.instruction_text(), &self.visible) {
            Some(answer) => format!("Here is my step-by-step analysis.\n\n{}", format_response(&answer)),
            None => format!("None of the visible objects fits.\n```json\n{{\"status\": \"{}\"}}\n```\n", super::NO_RELEVANT_OBJECT),
        })
    }
}
