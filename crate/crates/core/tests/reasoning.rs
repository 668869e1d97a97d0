use std::sync::Mutex;

use taskgrasp::geometry::ColorImage;
use taskgrasp::reasoning::{
    build_prompt, format_response, infer_affordance, infer_affordance_with, parse_reasoning_response, Instruction,
    MockBackend, MockRules, PromptPayload, Rationale, ReasoningAnswer, ReasoningBackend, ReasoningError,
};
use taskgrasp::scene::{LabeledObject, ObjectClass};

fn visible(classes: &[ObjectClass]) -> Vec<LabeledObject> {
    classes
        .iter()
        .enumerate()
        .map(|(i, c)| LabeledObject { id: i as u32 + 1, class_name: c.name().into(), parts: c.parts() })
        .collect()
}

fn image() -> ColorImage {
    ColorImage::from_pixel(8, 6, image::Rgb([40, 80, 120]))
}

fn infer(text: &str, classes: &[ObjectClass]) -> Result<ReasoningAnswer, ReasoningError> {
    let backend = MockBackend::new(MockRules::default(), visible(classes));
    infer_affordance(&Instruction::new(text).unwrap(), &image(), &backend).map(|r| r.answer)
}

#[test]
fn scoop_instruction_grasps_the_spoon_handle() {
    let a = infer("I want to scoop something", &[ObjectClass::Mug, ObjectClass::Spoon, ObjectClass::Pan]).unwrap();
    assert_eq!(
        (a.task.as_str(), a.object.as_str(), a.part.as_str(), a.affordance.as_str()),
        ("scoop", "spoon", "handle", "grasp")
    );
    assert!(a.check().is_ok());
}

#[test]
fn thirst_picks_the_mug_handle_next_to_a_hammer() {
    let a = infer("I am thirsty", &[ObjectClass::Hammer, ObjectClass::Mug]).unwrap();
    assert_eq!((a.object.as_str(), a.part.as_str()), ("mug", "handle"));
}

#[test]
fn nothing_relevant_in_view() {
    let err = infer("fly me to the moon", &[ObjectClass::Mug]).unwrap_err();
    assert!(matches!(err, ReasoningError::NoRelevantObject { .. }));
    let err = infer("I want to scoop something", &[ObjectClass::Mug]).unwrap_err();
    assert!(matches!(err, ReasoningError::NoRelevantObject { .. }));
}

#[test]
fn every_canonical_instruction_resolves_to_its_class() {
    let rules = MockRules::default();
    let all = visible(&ObjectClass::ALL);
    for class in ObjectClass::ALL {
        let text = rules.canonical_instruction(class.name()).unwrap();
        let a = rules.decide(text, &all).unwrap();
        assert_eq!(a.object, class.name(), "{text}");
        let only = visible(&[class]);
        assert_eq!(rules.decide(text, &only).unwrap().object, class.name());
    }
}

#[test]
fn prompts_are_pure_and_carry_the_instruction() {
    let text = "I want to scoop something";
    let a = build_prompt(&Instruction::new(text).unwrap(), &image()).unwrap();
    let b = build_prompt(&Instruction::new(text).unwrap(), &image()).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert!(a.user_text.contains(text));
    assert_eq!(a.instruction_text(), text);
    let steps = a.system_text.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count();
    assert_eq!(steps, 3);
    assert_eq!(build_prompt(&Instruction::new(text).unwrap(), &ColorImage::new(0, 0)), Err(ReasoningError::EmptyImage));
}

#[test]
fn instructions_must_have_text() {
    assert!(matches!(Instruction::new("   "), Err(ReasoningError::InvalidInstruction(_))));
    assert!(matches!(Instruction::new("x".repeat(100_000)), Err(ReasoningError::InvalidInstruction(_))));
}

/// Replays a fixed list of replies and records every prompt.
struct Scripted {
    replies: Vec<String>,
    seen: Mutex<Vec<PromptPayload>>,
}

impl Scripted {
    fn new(replies: &[&str]) -> Self {
        Self { replies: replies.iter().map(|s| s.to_string()).collect(), seen: Mutex::new(vec![]) }
    }
}

impl ReasoningBackend for Scripted {
    fn complete(&self, prompt: &PromptPayload) -> Result<String, ReasoningError> {
        let mut seen = self.seen.lock().unwrap();
        let i = seen.len().min(self.replies.len() - 1);
        seen.push(prompt.clone());
        Ok(self.replies[i].clone())
    }
}

fn answer() -> ReasoningAnswer {
    ReasoningAnswer {
        task: "pound".into(),
        object: "hammer".into(),
        part: "handle".into(),
        affordance: "grasp".into(),
        rationale: Rationale {
            task_analysis: "Nails need pounding.".into(),
            object_identification: "A hammer is on the table.".into(),
            part_selection: "Hold the handle, strike with the head.".into(),
        },
    }
}

#[test]
fn three_malformed_replies_give_up() {
    let backend = Scripted::new(&["I think a hammer", "{not json", "```json\n{\"task\": 3}\n```"]);
    let err = infer_affordance(&Instruction::new("pound a nail").unwrap(), &image(), &backend).unwrap_err();
    match err {
        ReasoningError::MalformedReasoning { attempts, raw } => {
            assert_eq!(attempts, 3);
            assert!(raw.contains("\"task\": 3"));
        }
        other => panic!("{other:?}"),
    }
    let seen = backend.seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    // retries ask for a repair without losing the instruction
    assert!(seen[1].user_text.len() > seen[0].user_text.len());
    assert!(seen[2].user_text.contains("pound a nail"));
}

#[test]
fn a_late_valid_reply_is_accepted() {
    let good = format_response(&answer());
    let backend = Scripted::new(&["garbage", &good]);
    let r = infer_affordance_with(&Instruction::new("pound a nail").unwrap(), &image(), &backend, 3).unwrap();
    assert_eq!(r.answer, answer());
    assert_eq!(r.raw_response, good);
    assert_eq!(backend.seen.lock().unwrap().len(), 2);
}

struct Down;

impl ReasoningBackend for Down {
    fn complete(&self, _: &PromptPayload) -> Result<String, ReasoningError> {
        Err(ReasoningError::BackendUnavailable("connection refused".into()))
    }
}

#[test]
fn transport_failures_are_not_retried_as_malformed() {
    let err = infer_affordance(&Instruction::new("I am thirsty").unwrap(), &image(), &Down).unwrap_err();
    assert!(matches!(err, ReasoningError::BackendUnavailable(_)));
}

#[test]
fn prose_and_fences_around_the_block_are_tolerated() {
    let bare = serde_json::to_string(&answer()).unwrap();
    let fenced = format!("Sure! Let me think step by step.\n\n```json\n{bare}\n```\nHope that helps.");
    let a = parse_reasoning_response(&bare).unwrap().answer;
    let b = parse_reasoning_response(&fenced).unwrap().answer;
    assert_eq!(a, b);
    assert_eq!(a, answer());
}

#[test]
fn rationale_may_be_a_list_of_three_steps() {
    let raw = r#"{"task": "pound", "object": "hammer", "part": "handle", "affordance": "grasp",
        "rationale": ["Nails need pounding.", "A hammer is on the table.", "Hold the handle, strike with the head."]}"#;
    assert_eq!(parse_reasoning_response(raw).unwrap().answer, answer());
}

#[test]
fn missing_part_is_named() {
    let mut v = serde_json::to_value(answer()).unwrap();
    v.as_object_mut().unwrap().remove("part");
    match parse_reasoning_response(&format!("```json\n{v}\n```")).unwrap_err() {
        ReasoningError::ParseFailure { field, fragment, .. } => {
            assert_eq!(field.as_deref(), Some("part"));
            assert!(fragment.contains("hammer"));
        }
        other => panic!("{other:?}"),
    }
    match parse_reasoning_response("no braces at all").unwrap_err() {
        ReasoningError::ParseFailure { field, .. } => assert_eq!(field, None),
        other => panic!("{other:?}"),
    }
}

#[test]
fn explicit_decline_is_reported() {
    let err = parse_reasoning_response("Nothing fits.\n```json\n{\"status\": \"no_relevant_object\"}\n```").unwrap_err();
    assert!(matches!(err, ReasoningError::NoRelevantObject { .. }));
}
