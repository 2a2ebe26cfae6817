//! Task-routed correctness rewards for REC, OVD, and VQA.
//!
//! REC scores the predicted box against ground truth with a piecewise IoU
//! penalty; OVD scores set agreement as the F1 of a matched true-positive
//! total with soft credit for coarse localization; VQA scores exact match
//! after normalization. A routing entry point dispatches on the task type
//! and maps upstream parse failures to zero reward.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{iou, BoundingBox, Detection};
use crate::matching::max_score_assignment;
use crate::scalar::Scalar;

/// The three task families a rollout can be scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskType {
    #[serde(rename = "REC")]
    Rec,
    #[serde(rename = "OVD")]
    Ovd,
    #[serde(rename = "VQA")]
    Vqa,
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskType::Rec => f.write_str("REC"),
            TaskType::Ovd => f.write_str("OVD"),
            TaskType::Vqa => f.write_str("VQA"),
        }
    }
}

impl FromStr for TaskType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "REC" => Ok(TaskType::Rec),
            "OVD" => Ok(TaskType::Ovd),
            "VQA" => Ok(TaskType::Vqa),
            other => Err(format!("unknown task type `{other}` (expected REC, OVD, or VQA)")),
        }
    }
}

/// A parsed answer or ground-truth payload for one of the three tasks.
///
/// Serializes untagged: a box is a four-number array, detections are a list
/// of `{"bbox", "label"}` objects, and a VQA answer is a bare string.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TaskPayload {
    Box(BoundingBox<f64>),
    Detections(Vec<Detection<f64>>),
    Text(String),
}

impl TaskPayload {
    /// The task family this payload shape belongs to.
    pub fn task(&self) -> TaskType {
        match self {
            TaskPayload::Box(_) => TaskType::Rec,
            TaskPayload::Detections(_) => TaskType::Ovd,
            TaskPayload::Text(_) => TaskType::Vqa,
        }
    }

    /// Deserialize the payload shape expected for `task` from a JSON value.
    pub fn from_value(task: TaskType, value: serde_json::Value) -> Result<Self, serde_json::Error> {
        match task {
            TaskType::Rec => serde_json::from_value(value).map(TaskPayload::Box),
            TaskType::Ovd => serde_json::from_value(value).map(TaskPayload::Detections),
            TaskType::Vqa => serde_json::from_value(value).map(TaskPayload::Text),
        }
    }
}

/// REC reward shape: IoU above `full_threshold` passes through, IoU in
/// `[partial_threshold, full_threshold)` is scaled by `partial_factor`,
/// anything lower scores zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecParams<S> {
    pub full_threshold: S,
    pub partial_threshold: S,
    pub partial_factor: S,
}

impl<S: Scalar> Default for RecParams<S> {
    fn default() -> Self {
        Self {
            full_threshold: S::lit(0.5),
            partial_threshold: S::lit(0.3),
            partial_factor: S::lit(0.8),
        }
    }
}

/// How predictions are paired with ground truths when totalling OVD true
/// positives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MatchingPolicy {
    /// Exact maximum-score assignment with each prediction and each ground
    /// truth used at most once. The default: it prevents duplicate-box
    /// reward farming.
    #[default]
    #[serde(rename = "one_to_one")]
    OneToOne,
    /// Per-prediction best match with no one-to-one constraint; a single
    /// ground truth may back any number of predictions.
    #[serde(rename = "literal")]
    LiteralPerPred,
}

impl FromStr for MatchingPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "one_to_one" => Ok(MatchingPolicy::OneToOne),
            "literal" | "literal_per_pred" => Ok(MatchingPolicy::LiteralPerPred),
            other => Err(format!(
                "unknown matching policy `{other}` (expected one_to_one or literal)"
            )),
        }
    }
}

/// OVD matching shape: full credit above `full_threshold`, `soft_score`
/// credit in `[soft_threshold, full_threshold)` when labels agree.
///
/// The thresholds default to the same values as [`RecParams`] but are
/// configured independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OvdParams<S> {
    pub full_threshold: S,
    pub soft_threshold: S,
    pub soft_score: S,
    pub policy: MatchingPolicy,
}

impl<S: Scalar> Default for OvdParams<S> {
    fn default() -> Self {
        Self {
            full_threshold: S::lit(0.5),
            soft_threshold: S::lit(0.3),
            soft_score: S::lit(0.5),
            policy: MatchingPolicy::OneToOne,
        }
    }
}

/// Reward-shape configuration for the task router.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskRewardConfig {
    pub rec: RecParams<f64>,
    pub ovd: OvdParams<f64>,
}

/// One chosen prediction/ground-truth pair and its match score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Assignment<S> {
    pub pred: usize,
    pub gt: usize,
    pub score: S,
}

/// Outcome of matching a prediction set against a ground-truth set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult<S> {
    pub assignments: Vec<Assignment<S>>,
    pub tp_total: S,
    pub precision: S,
    pub recall: S,
    pub f1: S,
}

/// Piecewise REC localization reward.
pub fn rec_reward<S: Scalar>(
    pred: &BoundingBox<S>,
    gt: &BoundingBox<S>,
    params: &RecParams<S>,
) -> S {
    let overlap = iou(pred, gt);
    if overlap >= params.full_threshold {
        overlap
    } else if overlap >= params.partial_threshold {
        params.partial_factor * overlap
    } else {
        S::zero()
    }
}

/// Match score for one prediction/ground-truth pair: 1 for a label match
/// with high overlap, the soft score for a label match with coarse overlap,
/// 0 otherwise (a label mismatch scores 0 regardless of overlap).
pub fn match_score<S: Scalar>(p: &Detection<S>, g: &Detection<S>, params: &OvdParams<S>) -> S {
    if !p.labels_match(g) {
        return S::zero();
    }
    let overlap = iou(&p.bbox, &g.bbox);
    if overlap >= params.full_threshold {
        S::one()
    } else if overlap >= params.soft_threshold {
        params.soft_score
    } else {
        S::zero()
    }
}

/// Match a prediction set against a ground-truth set under the configured
/// policy and total the true-positive score.
///
/// Precision divides by the prediction count and recall by the ground-truth
/// count, each defined as 0 over an empty set.
pub fn match_sets<S: Scalar>(
    preds: &[Detection<S>],
    gts: &[Detection<S>],
    params: &OvdParams<S>,
) -> MatchResult<S> {
    let scores: Vec<Vec<S>> = preds
        .iter()
        .map(|p| gts.iter().map(|g| match_score(p, g, params)).collect())
        .collect();

    let assignments: Vec<Assignment<S>> = match params.policy {
        MatchingPolicy::OneToOne => max_score_assignment(&scores)
            .into_iter()
            .map(|(pred, gt)| Assignment {
                pred,
                gt,
                score: scores[pred][gt],
            })
            .collect(),
        MatchingPolicy::LiteralPerPred => scores
            .iter()
            .enumerate()
            .filter_map(|(pred, row)| {
                let (gt, &score) = row
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite match scores"))?;
                (score > S::zero()).then_some(Assignment { pred, gt, score })
            })
            .collect(),
    };

    let tp_total: S = assignments.iter().map(|a| a.score).sum();
    let precision = if preds.is_empty() {
        S::zero()
    } else {
        tp_total / S::from_count(preds.len())
    };
    // The literal policy can total more true positives than there are ground
    // truths; recall saturates at 1 so the reward stays in [0, 1].
    let recall = if gts.is_empty() {
        S::zero()
    } else {
        (tp_total / S::from_count(gts.len())).min(S::one())
    };
    let denom = precision + recall;
    let f1 = if denom > S::zero() {
        S::lit(2.0) * precision * recall / denom
    } else {
        S::zero()
    };

    MatchResult {
        assignments,
        tp_total,
        precision,
        recall,
        f1,
    }
}

/// OVD set reward: the matched F1, with two empty sets scoring 1 (perfect
/// agreement is the only defensible reading of the 0/0 case).
pub fn ovd_reward<S: Scalar>(
    preds: &[Detection<S>],
    gts: &[Detection<S>],
    params: &OvdParams<S>,
) -> S {
    if preds.is_empty() && gts.is_empty() {
        return S::one();
    }
    match_sets(preds, gts, params).f1
}

/// Canonical answer form: case-fold, trim, collapse internal whitespace runs
/// to single spaces, and strip terminal sentence punctuation (`.` `!` `?`).
pub fn normalize_answer(answer: &str) -> String {
    let folded = answer.to_lowercase();
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(['.', '!', '?'])
        .trim_end()
        .to_string()
}

/// Strict VQA reward: 1 iff the normalized answers are identical.
pub fn vqa_reward<S: Scalar>(pred: &str, gt: &str) -> S {
    if normalize_answer(pred) == normalize_answer(gt) {
        S::one()
    } else {
        S::zero()
    }
}

/// Ground-truth payload shape disagrees with the requested task — a caller
/// configuration bug, not a rollout fault.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("ground truth payload is {found} but task is {expected}")]
pub struct TaskMismatch {
    pub expected: TaskType,
    pub found: TaskType,
}

/// Dispatch the correctness reward by task type.
///
/// A missing parse (`None`) or a parsed payload of the wrong shape scores 0;
/// a ground truth of the wrong shape is an error.
pub fn route_reward(
    task: TaskType,
    parsed: Option<&TaskPayload>,
    gt: &TaskPayload,
    cfg: &TaskRewardConfig,
) -> Result<f64, TaskMismatch> {
    if gt.task() != task {
        return Err(TaskMismatch {
            expected: task,
            found: gt.task(),
        });
    }
    let Some(parsed) = parsed else {
        return Ok(0.0);
    };
    Ok(match (task, parsed, gt) {
        (TaskType::Rec, TaskPayload::Box(p), TaskPayload::Box(g)) => rec_reward(p, g, &cfg.rec),
        (TaskType::Ovd, TaskPayload::Detections(p), TaskPayload::Detections(g)) => {
            ovd_reward(p, g, &cfg.ovd)
        }
        (TaskType::Vqa, TaskPayload::Text(p), TaskPayload::Text(g)) => vqa_reward(p, g),
        // Parsed payload shape disagrees with the task: zero, like any
        // unusable answer.
        _ => 0.0,
    })
}
