//! Verifiable reward engine and evaluation toolkit for remote-sensing
//! vision-language rollouts.
//!
//! The crate scores sampled model outputs for three task families —
//! referring expression comprehension (REC), open-vocabulary detection
//! (OVD), and visual question answering (VQA) — with a hybrid reward:
//!
//! * a binary **structure reward** (`r_srar`) that verifies the
//!   `<think>`/`<answer>` output format,
//! * a task-routed **correctness reward** (`r_rpcr`) built on IoU,
//!   set matching, and normalized answer equality,
//! * a **path-evolution reward** (`r_evol`) that pays samples for being
//!   semantically dissimilar from the rest of their rollout group.
//!
//! On top of the per-rollout rewards it provides group-relative advantage
//! normalization and the clipped-surrogate/KL objective terms used by
//! group-relative policy optimization, plus an evaluation harness
//! (Acc@t, COCO-style mAP, Pass@1), a stateless scoring composition for
//! serving, and a small template-policy simulator that demonstrates the
//! diversity reward preventing collapse onto a single reasoning template.
//!
//! The numeric kernels are generic over the scalar type via [`scalar::Scalar`]
//! (`f32` or `f64`); the crate root re-exports concrete `f64` aliases which
//! the parsing, serving, and evaluation layers use throughout.

pub mod config;
pub mod eval;
pub mod evolution;
pub mod geometry;
pub mod grpo;
pub mod matching;
pub mod rewards;
pub mod rollout;
pub mod scalar;
pub mod scoring;
pub mod sim;

pub use scalar::Scalar;

/// Axis-aligned box in the common double-precision configuration.
pub type BoundingBox = geometry::BoundingBox<f64>;
/// Labeled detection in the common double-precision configuration.
pub type Detection = geometry::Detection<f64>;
/// Set-matching outcome in the common double-precision configuration.
pub type MatchResult = rewards::MatchResult<f64>;
/// Reward component weights in the common double-precision configuration.
pub type RewardWeights = grpo::RewardWeights<f64>;
/// Weighted reward components in the common double-precision configuration.
pub type RewardBreakdown = grpo::RewardBreakdown<f64>;
/// Group scoring configuration in the common double-precision configuration.
pub type GrpoConfig = grpo::GrpoConfig<f64>;
/// Group rewards plus advantages in the common double-precision configuration.
pub type GroupScore = grpo::GroupScore<f64>;
/// Sequence log-probabilities in the common double-precision configuration.
pub type PolicyLogProbs = grpo::PolicyLogProbs<f64>;
/// Token-hash embedding in the common double-precision configuration.
pub type EmbeddingVector = evolution::EmbeddingVector<f64>;
