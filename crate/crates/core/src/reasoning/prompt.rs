use base64::Engine;
use serde::Serialize;

use super::{Instruction, ReasoningError};
use crate::geometry::{io, ColorImage};

/// Version of the response block format the prompt asks for.
pub const RESPONSE_FORMAT_VERSION: u32 = 1;

/// Fields the response block must contain.
pub const OUTPUT_FIELDS: [&str; 5] = ["task", "object", "part", "affordance", "rationale"];

const SYSTEM_TEXT: &str = "You are the reasoning module of a robot that grasps objects so that a \
human's task can be carried out. You receive an implicit instruction and an image of the scene. \
Work through exactly three steps:\n\
1. Task analysis: extract the explicit task behind the instruction and the functional requirements it implies.\n\
2. Object identification: identify the single object visible in the image that is most relevant to the task.\n\
3. Part selection: decompose that object into its functional parts, name the affordance of each part, \
and select the part the robot should grasp so that the task remains possible.\n\
If no visible object can serve the task, answer with {\"status\": \"no_relevant_object\"} instead.";

const OUTPUT_CONTRACT: &str = "Output format: reply with one fenced ```json block holding an object with \
the string fields \"task\", \"object\", \"part\" and \"affordance\", and a \"rationale\" object with the \
string fields \"task_analysis\", \"object_identification\" and \"part_selection\", one per step.";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptPayload {
    pub system_text: String,
    pub user_text: String,
    #[serde(skip)]
    pub image: ColorImage,
    pub output_schema: Vec<String>,
    pub format_version: u32,
}

impl PromptPayload {
    pub(crate) fn with_user_suffix(mut self, suffix: &str) -> Self {
        self.user_text.push_str(suffix);
        self
    }

    /// Canonical byte form: the JSON text fields followed by the image size
    /// and raw pixels.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(self).expect("payload serializes");
        out.extend_from_slice(&self.image.width().to_le_bytes());
        out.extend_from_slice(&self.image.height().to_le_bytes());
        out.extend_from_slice(self.image.as_raw());
        out
    }

    pub fn image_png(&self) -> Vec<u8> {
        io::encode_rgb_png(&self.image).expect("in-memory PNG encoding")
    }

    pub fn image_data_url(&self) -> String {
        format!("data:image/png;base64,{}", base64::engine::general_purpose::STANDARD.encode(self.image_png()))
    }

    /// The instruction embedded in the user text.
    pub fn instruction_text(&self) -> &str {
        let rest = self.user_text.strip_prefix("Instruction: ").unwrap_or(&self.user_text);
        match rest.rfind("\n\nOutput format:") {
            Some(end) => &rest[..end],
            None => rest,
        }
    }
}

pub fn build_prompt(instr: &Instruction, rgb: &ColorImage) -> Result<PromptPayload, ReasoningError> {
    if rgb.width() == 0 || rgb.height() == 0 {
        return Err(ReasoningError::EmptyImage);
    }
    Ok(PromptPayload {
        system_text: SYSTEM_TEXT.to_string(),
        user_text: format!("Instruction: {}\n\n{OUTPUT_CONTRACT}", instr.as_str()),
        image: rgb.clone(),
        output_schema: OUTPUT_FIELDS.iter().map(|s| s.to_string()).collect(),
        format_version: RESPONSE_FORMAT_VERSION,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img() -> ColorImage {
        ColorImage::from_pixel(3, 2, image::Rgb([1, 2, 3]))
    }

    #[test]
    fn three_numbered_steps() {
        let p = build_prompt(&Instruction::new("I am thirsty").unwrap(), &img()).unwrap();
        let numbered: Vec<_> = p
            .system_text
            .lines()
            .filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit()))
            .collect();
        assert_eq!(numbered.len(), 3);
        for (i, line) in numbered.iter().enumerate() {
            assert!(line.starts_with(&format!("{}. ", i + 1)));
        }
        assert_eq!(p.output_schema, ["task", "object", "part", "affordance", "rationale"]);
    }

    #[test]
    fn instruction_is_embedded_verbatim() {
        let text = "I want to scoop something";
        let p = build_prompt(&Instruction::new(text).unwrap(), &img()).unwrap();
        assert!(p.user_text.contains(text));
        assert_eq!(p.instruction_text(), text);
    }

    #[test]
    fn identical_inputs_give_identical_bytes() {
        let i = Instruction::new("pour me a drink").unwrap();
        let a = build_prompt(&i, &img()).unwrap();
        let b = build_prompt(&i, &img()).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let c = build_prompt(&i, &ColorImage::new(3, 2)).unwrap();
        assert_ne!(a.to_bytes(), c.to_bytes());
    }

    #[test]
    fn empty_image_is_rejected() {
        let i = Instruction::new("x").unwrap();
        assert_eq!(build_prompt(&i, &ColorImage::new(0, 0)), Err(ReasoningError::EmptyImage));
    }
}
