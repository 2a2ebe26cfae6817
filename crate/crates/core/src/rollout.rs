//! Rollout text parsing: `<think>`/`<answer>` section extraction, the binary
//! structure reward, and task-specific answer payload parsing.
//!
//! The structure reward is deliberately strict — exactly one think pair
//! followed by exactly one answer pair, non-empty contents, and nothing but
//! whitespace outside the pairs — because lenient format checks invite
//! reward hacking during RL. Answer payload parsing is tolerant instead
//! (free-form prose around the coordinates is fine); strictness lives in
//! the format check, not the coordinate scan.

use once_cell::sync::Lazy;
use regex::Regex;

use crate::geometry::{BoundingBox, Detection};
use crate::rewards::{TaskPayload, TaskType};

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";
const ALL_TAGS: [&str; 4] = [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE];

static NUMBER_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?").unwrap());

/// One sampled model output with its extracted sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RolloutRecord {
    pub raw_text: String,
    /// Content of the think pair, when one well-formed pair exists.
    pub think_text: Option<String>,
    /// Content of the answer pair, when one well-formed pair exists.
    pub answer_text: Option<String>,
    /// Whether the whole output matches the canonical format.
    pub format_valid: bool,
}

impl RolloutRecord {
    pub fn parse(raw_text: &str) -> Self {
        let (think, answer) = extract_sections(raw_text);
        Self {
            raw_text: raw_text.to_owned(),
            think_text: think.map(str::to_owned),
            answer_text: answer.map(str::to_owned),
            format_valid: is_canonical_format(raw_text),
        }
    }
}

/// Find the content of the first well-formed `open`..`close` pair.
///
/// A pair is rejected when either tag is missing, when the closing tag
/// precedes every opening tag, or when the enclosed content itself contains
/// any tag delimiter (nested or interleaved tags).
fn find_section<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let end = start + text[start..].find(close)?;
    let content = &text[start..end];
    if ALL_TAGS.iter().any(|tag| content.contains(tag)) {
        return None;
    }
    Some(content)
}

/// Extract the think and answer sections independently.
///
/// Absence is encoded as `None`, never as an error: a missing, unclosed, or
/// nested tag pair simply yields no section.
pub fn extract_sections(raw_text: &str) -> (Option<&str>, Option<&str>) {
    (
        find_section(raw_text, THINK_OPEN, THINK_CLOSE),
        find_section(raw_text, ANSWER_OPEN, ANSWER_CLOSE),
    )
}

fn count_occurrences(text: &str, pattern: &str) -> usize {
    text.match_indices(pattern).count()
}

/// Whether the output is exactly `<think>…</think><answer>…</answer>` with
/// non-empty contents and only whitespace outside the two pairs.
pub fn is_canonical_format(raw_text: &str) -> bool {
    if ALL_TAGS.iter().any(|tag| count_occurrences(raw_text, tag) != 1) {
        return false;
    }
    // Single occurrence of each tag is guaranteed, so unwraps are safe.
    let to = raw_text.find(THINK_OPEN).unwrap();
    let tc = raw_text.find(THINK_CLOSE).unwrap();
    let ao = raw_text.find(ANSWER_OPEN).unwrap();
    let ac = raw_text.find(ANSWER_CLOSE).unwrap();
    if !(to < tc && tc < ao && ao < ac) {
        return false;
    }
    let think = &raw_text[to + THINK_OPEN.len()..tc];
    let answer = &raw_text[ao + ANSWER_OPEN.len()..ac];
    if think.trim().is_empty() || answer.trim().is_empty() {
        return false;
    }
    let before = &raw_text[..to];
    let between = &raw_text[tc + THINK_CLOSE.len()..ao];
    let after = &raw_text[ac + ANSWER_CLOSE.len()..];
    before.trim().is_empty() && between.trim().is_empty() && after.trim().is_empty()
}

/// Binary structure reward: 1 iff the output follows the canonical format.
pub fn format_reward(raw_text: &str) -> f64 {
    if is_canonical_format(raw_text) {
        1.0
    } else {
        0.0
    }
}

/// Failure to read a task payload out of an answer section.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnswerParseError {
    #[error("no bracketed group of four finite numbers in answer")]
    MissingBoxGroup,
    #[error("malformed detection list: {0}")]
    MalformedDetections(String),
}

/// Pull the first bracketed group of exactly four finite numbers out of a
/// REC answer and normalize it into a box.
///
/// The scan is tolerant of surrounding prose: every `[` starts a candidate
/// group ending at the next `]`, and the first candidate containing exactly
/// four finite numbers wins.
pub fn parse_rec_answer(answer: &str) -> Result<BoundingBox<f64>, AnswerParseError> {
    for (open, _) in answer.match_indices('[') {
        let span_start = open + 1;
        let Some(rel_close) = answer[span_start..].find(']') else {
            break;
        };
        let span = &answer[span_start..span_start + rel_close];
        let numbers: Vec<f64> = NUMBER_RE
            .find_iter(span)
            .filter_map(|m| m.as_str().parse::<f64>().ok())
            .collect();
        if numbers.len() == 4 && numbers.iter().all(|n| n.is_finite()) {
            return BoundingBox::from_corners(numbers[0], numbers[1], numbers[2], numbers[3])
                .map_err(|_| AnswerParseError::MissingBoxGroup);
        }
    }
    Err(AnswerParseError::MissingBoxGroup)
}

/// Parse an OVD answer as a JSON list of `{"bbox": [...], "label": "..."}`
/// objects. An empty list is a valid result; malformed syntax, a missing
/// field, or an empty label is a parse failure.
pub fn parse_ovd_answer(answer: &str) -> Result<Vec<Detection<f64>>, AnswerParseError> {
    let trimmed = answer.trim();
    let direct: Result<Vec<Detection<f64>>, _> = serde_json::from_str(trimmed);
    match direct {
        Ok(dets) => Ok(dets),
        Err(first_err) => {
            // Tolerate prose around the list: retry on the outermost bracket span.
            let start = trimmed.find('[');
            let end = trimmed.rfind(']');
            if let (Some(s), Some(e)) = (start, end) {
                if s < e {
                    if let Ok(dets) = serde_json::from_str(&trimmed[s..=e]) {
                        return Ok(dets);
                    }
                }
            }
            Err(AnswerParseError::MalformedDetections(first_err.to_string()))
        }
    }
}

/// VQA answers pass through untouched; normalization happens at scoring time.
pub fn parse_vqa_answer(answer: &str) -> &str {
    answer
}

/// Route answer parsing by task, producing the payload scored downstream.
pub fn parse_answer(task: TaskType, answer: &str) -> Result<TaskPayload, AnswerParseError> {
    match task {
        TaskType::Rec => parse_rec_answer(answer).map(TaskPayload::Box),
        TaskType::Ovd => parse_ovd_answer(answer).map(TaskPayload::Detections),
        TaskType::Vqa => Ok(TaskPayload::Text(parse_vqa_answer(answer).to_owned())),
    }
}
