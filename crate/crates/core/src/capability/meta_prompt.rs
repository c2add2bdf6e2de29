//! Meta-prompt rendering and parsing.
//!
//! The rendered text is the conditioning input of the reformulation model:
//! an `Original prompt:` line followed by the capability template with seven
//! integer slots (original similarity, aesthetic, overall; updated
//! similarity, aesthetic, overall; revised phrase count).

use crate::error::{CaprError, Result};

use super::{CapabilityCondition, ExpectedCapability};
use super::quantize::ScoreBins;

const PREFIX: &str = "Original prompt: ";

/// Literal template pieces surrounding the seven slots.
const PIECES: [&str; 8] = [
    "A text-to-image generation system transforms text prompts into visual images. \
The effectiveness of this conversion depends on the prompt. \
The original prompt leads to images with prompt-image similarity of ",
    ", aesthetic quality of ",
    ", and overall quality of ",
    ". To improve these metrics, new images are generated based on a revised prompt. \
After evaluating the new images for the initial prompt, the updated scores are: \
prompt-image similarity of ",
    ", aesthetic quality of ",
    ", and overall quality of ",
    ". The revised prompt is structured into ",
    " phrases, each separated by a comma. \
Considering the given information, the revised prompt should be:",
];

fn slots(condition: &CapabilityCondition) -> [usize; 7] {
    let i = &condition.initial;
    let e = &condition.expected;
    [
        i.similarity,
        i.aesthetic,
        i.overall,
        e.similarity,
        e.aesthetic,
        e.overall,
        e.phrase_count,
    ]
}

/// Render the meta-prompt for `initial_prompt` under `condition`.
pub fn render_meta_prompt(initial_prompt: &str, condition: &CapabilityCondition) -> String {
    let mut out = String::with_capacity(PREFIX.len() + initial_prompt.len() + 700);
    out.push_str(PREFIX);
    out.push_str(initial_prompt);
    out.push('\n');
    for (piece, value) in PIECES.iter().zip(slots(condition)) {
        out.push_str(piece);
        out.push_str(&value.to_string());
    }
    out.push_str(PIECES[7]);
    out
}

/// Inverse of [`render_meta_prompt`] for prompts without newlines.
pub fn parse_meta_prompt(text: &str) -> Result<(String, CapabilityCondition)> {
    let bad = |why: &str| CaprError::invalid(format!("not a meta-prompt: {why}"));
    let rest = text.strip_prefix(PREFIX).ok_or_else(|| bad("missing prefix"))?;
    let (prompt, mut rest) = rest.split_once('\n').ok_or_else(|| bad("missing newline"))?;
    let mut values = [0usize; 7];
    for (slot, piece) in values.iter_mut().zip(PIECES.iter()) {
        rest = rest.strip_prefix(piece).ok_or_else(|| bad("template text mismatch"))?;
        let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 {
            return Err(bad("slot is not an integer"));
        }
        *slot = rest[..digits].parse().map_err(|_| bad("slot overflow"))?;
        rest = &rest[digits..];
    }
    if rest != PIECES[7] {
        return Err(bad("template tail mismatch"));
    }
    let [is, ia, io, es, ea, eo, n] = values;
    Ok((
        prompt.to_string(),
        CapabilityCondition {
            initial: ScoreBins {
                similarity: is,
                aesthetic: ia,
                overall: io,
            },
            expected: ExpectedCapability {
                similarity: es,
                aesthetic: ea,
                overall: eo,
                phrase_count: n,
            },
        },
    ))
}
