//! Meta-prompt rendering and completion normalization.
//!
//! Templates are stored in the layout they are shown to readers: a preamble
//! paragraph, a placeholder demonstration block, and a final paragraph ending
//! in `<COMPLETE>`. The marker is where the model continues and is never sent.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::example_pool::{ExamplePair, Language};
use crate::sampler::SampleLabel;

pub const COMPLETION_MARKER: &str = "<COMPLETE>";

pub const META_EN: &str = include_str!("../templates/meta_en.txt");
pub const META_DE: &str = include_str!("../templates/meta_de.txt");
pub const META_INSTINDUC_EN: &str = include_str!("../templates/meta_instinduc_en.txt");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetaPromptError {
    #[error("cannot render a meta-prompt without demonstrations")]
    EmptySample,
    #[error("completion is empty after normalization")]
    EmptyCompletion,
    #[error("no {variant} template for language {language}")]
    UnsupportedTemplate {
        variant: Variant,
        language: Language,
    },
    #[error("template layout: {0}")]
    BadLayout(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Sampled candidates from three demonstration subsets, consensus ranked.
    Ours,
    /// Single five-example prompt, single greedy completion.
    #[serde(rename = "instinduc")]
    InstructionInductionBaseline,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Ours => "ours",
            Variant::InstructionInductionBaseline => "instinduc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaPromptTemplate {
    pub language: Language,
    pub variant: Variant,
    pub preamble: String,
    pub completion_stub: String,
}

impl MetaPromptTemplate {
    pub fn builtin(language: Language, variant: Variant) -> Result<Self, MetaPromptError> {
        let layout = match (language, variant) {
            (Language::English, Variant::Ours) => META_EN,
            (Language::German, Variant::Ours) => META_DE,
            (Language::English, Variant::InstructionInductionBaseline) => META_INSTINDUC_EN,
            (language, variant) => {
                return Err(MetaPromptError::UnsupportedTemplate { variant, language })
            }
        };
        Self::from_layout(layout, language, variant)
    }

    /// Parses the three-paragraph layout used by the template files.
    pub fn from_layout(
        layout: &str,
        language: Language,
        variant: Variant,
    ) -> Result<Self, MetaPromptError> {
        let layout = layout.strip_suffix('\n').unwrap_or(layout);
        let paragraphs: Vec<&str> = layout.split("\n\n").collect();
        let [preamble, demos, stub] = paragraphs[..] else {
            return Err(MetaPromptError::BadLayout(format!(
                "expected 3 paragraphs, found {}",
                paragraphs.len()
            )));
        };
        if !demos.starts_with("Input: ") {
            return Err(MetaPromptError::BadLayout(
                "second paragraph is not a demonstration block".into(),
            ));
        }
        let stub = stub
            .strip_suffix(COMPLETION_MARKER)
            .ok_or_else(|| {
                MetaPromptError::BadLayout(format!(
                    "last paragraph must end with {COMPLETION_MARKER}"
                ))
            })?
            .trim_end();
        Ok(Self {
            language,
            variant,
            preamble: preamble.to_string(),
            completion_stub: stub.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedMetaPrompt {
    pub text: String,
    pub sample_label: SampleLabel,
    pub example_ids: Vec<String>,
}

/// Preamble, blank line, one `Input:`/`Output:` pair per example, blank
/// line, completion stub.
pub fn render(
    template: &MetaPromptTemplate,
    examples: &[&ExamplePair],
    label: SampleLabel,
) -> Result<RenderedMetaPrompt, MetaPromptError> {
    if examples.is_empty() {
        return Err(MetaPromptError::EmptySample);
    }
    let mut text = String::with_capacity(
        template.preamble.len()
            + template.completion_stub.len()
            + examples
                .iter()
                .map(|e| e.input_text.len() + e.output_text.len() + 18)
                .sum::<usize>(),
    );
    text.push_str(&template.preamble);
    text.push_str("\n\n");
    for ex in examples {
        text.push_str("Input: ");
        text.push_str(&ex.input_text);
        text.push_str("\nOutput: ");
        text.push_str(&ex.output_text);
        text.push('\n');
    }
    text.push('\n');
    text.push_str(&template.completion_stub);
    Ok(RenderedMetaPrompt {
        text,
        sample_label: label,
        example_ids: examples.iter().map(|e| e.id.clone()).collect(),
    })
}

const QUOTE_PAIRS: &[(char, char)] =
    &[('"', '"'), ('\'', '\''), ('“', '”'), ('‘', '’'), ('`', '`')];
const GERMAN_QUOTE_PAIRS: &[(char, char)] = &[('„', '“'), ('‚', '‘'), ('»', '«'), ('«', '»')];

fn strip_quotes(s: &str, language: Language) -> Option<&str> {
    let extra = match language {
        Language::German => GERMAN_QUOTE_PAIRS,
        Language::English => &[],
    };
    QUOTE_PAIRS.iter().chain(extra).find_map(|&(open, close)| {
        let inner = s.strip_prefix(open)?.strip_suffix(close)?;
        Some(inner)
    })
}

/// Reduces a raw completion to the instruction it proposes.
///
/// Keeps the first paragraph, trims it, and removes enclosing quotes. The
/// result is a fixed point: normalizing it again returns it unchanged.
pub fn assemble_task_prompt(
    completion: &str,
    language: Language,
) -> Result<String, MetaPromptError> {
    let mut text = first_paragraph(completion.trim()).trim();
    while let Some(inner) = strip_quotes(text, language) {
        text = first_paragraph(inner.trim()).trim();
    }
    if text.is_empty() {
        return Err(MetaPromptError::EmptyCompletion);
    }
    Ok(text.to_string())
}

fn first_paragraph(text: &str) -> &str {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if offset > 0 && line.trim().is_empty() {
            return &text[..offset];
        }
        offset += line.len();
    }
    text
}

/// Builds the inference prompt for one task input. With no demonstrations
/// this is the bare instruction followed by the `Input:`/`Output:` frame.
pub fn instantiate(instruction: &str, demonstrations: &[&ExamplePair], task_input: &str) -> String {
    let mut text = String::from(instruction);
    text.push('\n');
    for ex in demonstrations {
        text.push_str("Input: ");
        text.push_str(&ex.input_text);
        text.push_str("\nOutput: ");
        text.push_str(&ex.output_text);
        text.push('\n');
    }
    text.push_str("Input: ");
    text.push_str(task_input);
    text.push_str("\nOutput:");
    text
}
