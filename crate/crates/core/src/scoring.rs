//! Stateless group scoring: raw rollout texts in, per-rollout reward
//! breakdowns and group-relative advantages out.
//!
//! This is the composition the scoring service and the offline `score`
//! command both call, so service responses are identical to direct library
//! use by construction. Everything is deterministic for a fixed
//! configuration; responses carry no timestamps or latency fields.

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::evolution::{
    evolution_rewards, EligibilityGate, Embedder, EmbedderConfig, GroupSample, HashedTokenEmbedder,
};
use crate::grpo::{aggregate_reward, GroupScore, GrpoConfig, RewardWeights};
use crate::rewards::{route_reward, TaskPayload, TaskRewardConfig, TaskType};
use crate::rollout::{parse_answer, RolloutRecord};

/// One group of rollouts to score against a single ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRequest {
    pub request_id: String,
    pub task: TaskType,
    /// Original query; echoed for logging only.
    pub query: Option<String>,
    pub ground_truth: TaskPayload,
    pub rollouts: Vec<String>,
    /// Per-request weight override for ablation runs.
    pub weights: Option<RewardWeights<f64>>,
    /// Per-request advantage-normalization override.
    pub grpo: Option<GrpoConfig<f64>>,
}

impl Serialize for ScoreRequest {
    fn serialize<T: Serializer>(&self, serializer: T) -> Result<T::Ok, T::Error> {
        let mut s = serializer.serialize_struct("ScoreRequest", 7)?;
        s.serialize_field("request_id", &self.request_id)?;
        s.serialize_field("task", &self.task)?;
        s.serialize_field("query", &self.query)?;
        s.serialize_field("ground_truth", &self.ground_truth)?;
        s.serialize_field("rollouts", &self.rollouts)?;
        s.serialize_field("weights", &self.weights)?;
        s.serialize_field("grpo", &self.grpo)?;
        s.end()
    }
}

impl ScoreRequest {
    /// Parse a request from JSON, validating the ground-truth payload shape
    /// against the task.
    pub fn from_json(body: &str) -> Result<Self, ScoreError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wire {
            request_id: String,
            task: TaskType,
            #[serde(default)]
            query: Option<String>,
            ground_truth: serde_json::Value,
            rollouts: Vec<String>,
            #[serde(default)]
            weights: Option<RewardWeights<f64>>,
            #[serde(default)]
            grpo: Option<GrpoConfig<f64>>,
        }
        let wire: Wire =
            serde_json::from_str(body).map_err(|e| ScoreError::InvalidRequest(e.to_string()))?;
        let ground_truth = TaskPayload::from_value(wire.task, wire.ground_truth)
            .map_err(|e| ScoreError::InvalidRequest(format!("ground_truth: {e}")))?;
        Ok(Self {
            request_id: wire.request_id,
            task: wire.task,
            query: wire.query,
            ground_truth,
            rollouts: wire.rollouts,
            weights: wire.weights,
            grpo: wire.grpo,
        })
    }
}

/// Scores for one rollout within its group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutScore {
    pub format_valid: bool,
    pub r_srar: f64,
    pub r_rpcr: f64,
    pub r_evol: f64,
    pub total: f64,
    pub advantage: f64,
    /// Whether the rollout entered the evolution-reward pool.
    pub eligible: bool,
}

/// Group-level summary statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub mean: f64,
    pub std: f64,
    pub eligible_count: usize,
}

/// Scoring output for one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub request_id: String,
    pub per_rollout: Vec<RolloutScore>,
    pub group: GroupSummary,
}

/// Scoring failure, mapped onto the wire error codes.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("task mismatch: {0}")]
    TaskMismatch(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ScoreError {
    /// Stable machine-readable code for the wire error body.
    pub fn code(&self) -> &'static str {
        match self {
            ScoreError::InvalidRequest(_) => "INVALID_REQUEST",
            ScoreError::TaskMismatch(_) => "TASK_MISMATCH",
            ScoreError::Internal(_) => "INTERNAL",
        }
    }
}

/// Immutable scoring configuration plus the embedder instance.
pub struct ScoringEngine {
    weights: RewardWeights<f64>,
    grpo: GrpoConfig<f64>,
    task_rewards: TaskRewardConfig,
    gate: EligibilityGate<f64>,
    embedder: Box<dyn Embedder<f64>>,
}

impl ScoringEngine {
    /// Engine with the reference embedder.
    pub fn new(
        weights: RewardWeights<f64>,
        grpo: GrpoConfig<f64>,
        task_rewards: TaskRewardConfig,
        embedder_config: EmbedderConfig,
    ) -> Self {
        Self {
            weights,
            grpo,
            task_rewards,
            gate: EligibilityGate::default(),
            embedder: Box::new(HashedTokenEmbedder::new(embedder_config)),
        }
    }

    /// Engine with an injected embedder.
    pub fn with_embedder(
        weights: RewardWeights<f64>,
        grpo: GrpoConfig<f64>,
        task_rewards: TaskRewardConfig,
        embedder: Box<dyn Embedder<f64>>,
    ) -> Self {
        Self {
            weights,
            grpo,
            task_rewards,
            gate: EligibilityGate::default(),
            embedder,
        }
    }

    pub fn weights(&self) -> &RewardWeights<f64> {
        &self.weights
    }

    /// Score one rollout group.
    ///
    /// Reward components are independent: a format-invalid rollout can still
    /// earn correctness credit from a parseable answer, and vice versa; the
    /// eligibility gate is what couples them for the evolution reward.
    pub fn handle_score(&self, req: &ScoreRequest) -> Result<ScoreResponse, ScoreError> {
        if req.rollouts.is_empty() {
            return Err(ScoreError::InvalidRequest(
                "rollouts must be non-empty".into(),
            ));
        }
        if req.ground_truth.task() != req.task {
            return Err(ScoreError::TaskMismatch(format!(
                "ground truth payload is {} but task is {}",
                req.ground_truth.task(),
                req.task
            )));
        }
        if let Some(grpo) = &req.grpo {
            grpo.validate()
                .map_err(|e| ScoreError::InvalidRequest(format!("grpo override: {e}")))?;
        }
        let weights = req.weights.unwrap_or(self.weights);
        let grpo_cfg = req.grpo.unwrap_or(self.grpo);

        let records: Vec<RolloutRecord> = req
            .rollouts
            .iter()
            .map(|text| RolloutRecord::parse(text))
            .collect();

        let srar: Vec<f64> = records
            .iter()
            .map(|r| if r.format_valid { 1.0 } else { 0.0 })
            .collect();

        let rpcr: Vec<f64> = records
            .iter()
            .map(|r| {
                let parsed = r
                    .answer_text
                    .as_deref()
                    .and_then(|answer| parse_answer(req.task, answer).ok());
                route_reward(req.task, parsed.as_ref(), &req.ground_truth, &self.task_rewards)
                    .map_err(|e| ScoreError::TaskMismatch(e.to_string()))
            })
            .collect::<Result<_, _>>()?;

        let group: Vec<GroupSample<'_, f64>> = records
            .iter()
            .zip(srar.iter().zip(&rpcr))
            .map(|(record, (&r_srar, &r_rpcr))| GroupSample {
                think_text: record.think_text.as_deref().unwrap_or(""),
                r_srar,
                r_rpcr,
            })
            .collect();
        let evolution = evolution_rewards(self.embedder.as_ref(), &group, &self.gate);

        let totals: Vec<f64> = (0..records.len())
            .map(|i| aggregate_reward(srar[i], rpcr[i], evolution.rewards[i], &weights).total)
            .collect();
        let score = GroupScore::compute(totals, &grpo_cfg);

        let per_rollout: Vec<RolloutScore> = (0..records.len())
            .map(|i| RolloutScore {
                format_valid: records[i].format_valid,
                r_srar: srar[i],
                r_rpcr: rpcr[i],
                r_evol: evolution.rewards[i],
                total: score.rewards[i],
                advantage: score.advantages[i],
                eligible: evolution.eligible[i],
            })
            .collect();

        Ok(ScoreResponse {
            request_id: req.request_id.clone(),
            per_rollout,
            group: GroupSummary {
                mean: score.mean,
                std: score.std,
                eligible_count: evolution.similarity.k,
            },
        })
    }
}

impl Default for ScoringEngine {
    fn default() -> Self {
        Self::new(
            RewardWeights::default(),
            GrpoConfig::default(),
            TaskRewardConfig::default(),
            EmbedderConfig::default(),
        )
    }
}
