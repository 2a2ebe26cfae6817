//! Desk-scale group-relative policy simulation over a fixed set of
//! reasoning templates.
//!
//! The world has M templates, each a short think text with a deterministic
//! correctness score; exactly one "salient" template is strictly best. A
//! categorical policy over templates is trained with the score-function
//! estimator and group-relative advantages. With the diversity reward
//! disabled the policy collapses onto the salient template (entropy falls
//! toward zero); with it enabled, samples that pick what everyone else is
//! picking lose diversity credit, which keeps the policy spread out. The
//! acceptance suite checks exactly this gap.
//!
//! Template think texts are built from disjoint token vocabularies whose
//! hash buckets do not collide under the default embedder, so same-template
//! pairs have cosine similarity exactly 1 and cross-template pairs exactly
//! 0 — the diversity reward's effect stays analytically legible.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::evolution::{
    evolution_rewards_from_embeddings, EligibilityGate, Embedder, EmbeddingVector,
    HashedTokenEmbedder,
};
use crate::grpo::{aggregate_reward, group_advantages, surrogate_term, GrpoConfig, PolicyLogProbs, RewardWeights};

/// Think texts for the built-in template bank. Token sets are pairwise
/// disjoint and bucket-collision-free under the default embedder
/// (dimension 256, seed 0); `TemplateWorld::new` re-checks this.
pub const DEFAULT_THINK_TEXTS: [&str; 8] = [
    "scan harbor piers moored vessels",
    "trace runway parked aircraft hangar",
    "inspect rooftops courtyards urban blocks",
    "follow rivers bridges banks channels",
    "furrows crops fields orchards pastures",
    "examine forests canopy clearings groves",
    "review highways junctions lanes overpasses",
    "observe storage depots yards silage",
];

const DEFAULT_SALIENT_CORRECTNESS: f64 = 0.95;
const DEFAULT_OTHER_CORRECTNESS: f64 = 0.90;

/// One reasoning template: a think text and the correctness reward earned
/// when a rollout picks it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub think_text: String,
    pub correctness: f64,
}

/// The template bank plus pre-computed embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateWorld {
    templates: Vec<Template>,
    embeddings: Vec<EmbeddingVector<f64>>,
    salient: usize,
}

/// Invalid simulation input.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("world needs at least two templates")]
    TooFewTemplates,
    #[error("template correctness must lie in (0.8, 1.0] so gating passes, got {0}")]
    CorrectnessOutOfRange(f64),
    #[error("default template bank has {available} templates, {requested} requested")]
    BankExhausted { available: usize, requested: usize },
    #[error("config m = {config} does not match world size {world}")]
    WorldSizeMismatch { config: usize, world: usize },
    #[error("steps must be at least 1")]
    NoSteps,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

impl TemplateWorld {
    /// Build a world, validating the gating bound and (in debug builds)
    /// embedding orthogonality.
    ///
    /// The built-in [`TemplateWorld::default_world`] always has exactly one
    /// strictly-best template; custom worlds may tie correctness values,
    /// which is what the equal-correctness no-drift property needs.
    pub fn new(templates: Vec<Template>, embedder: &dyn Embedder<f64>) -> Result<Self, SimError> {
        if templates.len() < 2 {
            return Err(SimError::TooFewTemplates);
        }
        for t in &templates {
            if !(t.correctness > 0.8 && t.correctness <= 1.0) {
                return Err(SimError::CorrectnessOutOfRange(t.correctness));
            }
        }
        let mut salient = 0;
        for (i, t) in templates.iter().enumerate() {
            if t.correctness > templates[salient].correctness {
                salient = i;
            }
        }
        let embeddings: Vec<EmbeddingVector<f64>> = templates
            .iter()
            .map(|t| embedder.embed(&t.think_text))
            .collect();
        #[cfg(debug_assertions)]
        for i in 0..embeddings.len() {
            for j in (i + 1)..embeddings.len() {
                debug_assert!(
                    embeddings[i].cosine(&embeddings[j]).abs() < 1e-9,
                    "template texts {i} and {j} are not embedding-orthogonal"
                );
            }
        }
        Ok(Self {
            templates,
            embeddings,
            salient,
        })
    }

    /// The built-in world: `m` templates (2..=8), salient first at
    /// correctness 0.95, the rest at 0.90.
    pub fn default_world(m: usize) -> Result<Self, SimError> {
        if m > DEFAULT_THINK_TEXTS.len() {
            return Err(SimError::BankExhausted {
                available: DEFAULT_THINK_TEXTS.len(),
                requested: m,
            });
        }
        let templates: Vec<Template> = DEFAULT_THINK_TEXTS[..m]
            .iter()
            .enumerate()
            .map(|(i, text)| Template {
                think_text: (*text).to_string(),
                correctness: if i == 0 {
                    DEFAULT_SALIENT_CORRECTNESS
                } else {
                    DEFAULT_OTHER_CORRECTNESS
                },
            })
            .collect();
        Self::new(templates, &HashedTokenEmbedder::default())
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    /// Index of the highest-correctness template (lowest index on ties).
    pub fn salient_index(&self) -> usize {
        self.salient
    }
}

/// Simulation configuration. `m` must match the world size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub m: usize,
    pub group_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub weights: RewardWeights<f64>,
    pub seed: u64,
    /// Draw correctness as a coin flip at the template's rate instead of
    /// paying it deterministically.
    pub stochastic_correctness: bool,
    /// Route the update scale through the clipped surrogate (a no-op at the
    /// single-policy ratio of 1, kept for parity with the trainer objective).
    pub clipped_update: bool,
    pub epsilon_std: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            m: 8,
            group_size: 15,
            steps: 300,
            learning_rate: 0.1,
            weights: RewardWeights::default(),
            seed: 0,
            stochastic_correctness: false,
            clipped_update: false,
            epsilon_std: 1e-8,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.steps == 0 {
            return Err(SimError::NoSteps);
        }
        if self.m < 2 {
            return Err(SimError::TooFewTemplates);
        }
        if self.group_size == 0 {
            return Err(SimError::InvalidConfig("group_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(SimError::InvalidConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Per-step trajectory record. Entropy and the top template probability are
/// measured on the policy the step sampled from (pre-update); rewards are
/// the step's realized group values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub entropy: f64,
    pub mean_reward: f64,
    pub mean_evol: f64,
    pub top_template_prob: f64,
    /// How many of the step's samples chose each template.
    pub visits: Vec<u32>,
}

/// Full simulation output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrajectory {
    pub steps: Vec<StepRecord>,
    /// Entropy of the policy after the final update.
    pub final_entropy: f64,
    pub final_top_prob: f64,
    pub final_probs: Vec<f64>,
    /// Total visits per template across the run.
    pub visits_total: Vec<u64>,
}

impl SimTrajectory {
    /// Plot-ready CSV: one row per step.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,entropy,mean_reward,mean_evol,top_template_prob")?;
        for s in &self.steps {
            writeln!(
                w,
                "{},{},{},{},{}",
                s.step, s.entropy, s.mean_reward, s.mean_evol, s.top_template_prob
            )?;
        }
        Ok(())
    }

    /// JSON summary of the run under the given config.
    pub fn summary(&self, cfg: &SimConfig) -> SimSummary {
        SimSummary {
            seed: cfg.seed,
            m: cfg.m,
            group_size: cfg.group_size,
            steps: cfg.steps,
            weights: cfg.weights,
            final_entropy: self.final_entropy,
            final_top_prob: self.final_top_prob,
            mean_reward_first: self.steps.first().map_or(0.0, |s| s.mean_reward),
            mean_reward_last: self.steps.last().map_or(0.0, |s| s.mean_reward),
            visits_total: self.visits_total.clone(),
        }
    }
}

/// Compact run summary, emitted as JSON by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub seed: u64,
    pub m: usize,
    pub group_size: usize,
    pub steps: usize,
    pub weights: RewardWeights<f64>,
    pub final_entropy: f64,
    pub final_top_prob: f64,
    pub mean_reward_first: f64,
    pub mean_reward_last: f64,
    pub visits_total: Vec<u64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Shannon entropy, in nats, of the softmax distribution over `logits`.
pub fn policy_entropy(logits: &[f64]) -> f64 {
    softmax(logits)
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

fn sample_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    probs.len() - 1
}

/// Run one simulation. Identical `(world, cfg)` pairs produce identical
/// trajectories.
pub fn simulate(world: &TemplateWorld, cfg: &SimConfig) -> Result<SimTrajectory, SimError> {
    cfg.validate()?;
    if cfg.m != world.len() {
        return Err(SimError::WorldSizeMismatch {
            config: cfg.m,
            world: world.len(),
        });
    }

    let m = world.len();
    let g = cfg.group_size;
    let gate = EligibilityGate::<f64>::default();
    let grpo_cfg = GrpoConfig {
        epsilon_std: cfg.epsilon_std,
        ..GrpoConfig::default()
    };
    let unit_ratio = PolicyLogProbs {
        logp_new: 0.0,
        logp_old: 0.0,
        logp_ref: 0.0,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut logits = vec![0.0f64; m];
    let mut steps = Vec::with_capacity(cfg.steps);
    let mut visits_total = vec![0u64; m];

    for step in 1..=cfg.steps {
        let probs = softmax(&logits);
        let entropy = policy_entropy(&logits);
        let top_prob = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let choices: Vec<usize> = (0..g).map(|_| sample_index(&probs, &mut rng)).collect();
        let mut visits = vec![0u32; m];
        for &c in &choices {
            visits[c] += 1;
            visits_total[c] += 1;
        }

        let rpcr: Vec<f64> = choices
            .iter()
            .map(|&c| {
                let rate = world.templates[c].correctness;
                if cfg.stochastic_correctness {
                    if rng.gen::<f64>() < rate {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    rate
                }
            })
            .collect();

        let eligible: Vec<bool> = rpcr.iter().map(|&r| gate.is_eligible(1.0, r)).collect();
        let embeddings: Vec<EmbeddingVector<f64>> = choices
            .iter()
            .map(|&c| world.embeddings[c].clone())
            .collect();
        let evolution = evolution_rewards_from_embeddings(&embeddings, &eligible);

        let totals: Vec<f64> = (0..g)
            .map(|i| aggregate_reward(1.0, rpcr[i], evolution.rewards[i], &cfg.weights).total)
            .collect();
        let advantages = group_advantages(&totals, &grpo_cfg);
        let scales: Vec<f64> = if cfg.clipped_update {
            advantages
                .iter()
                .map(|&a| surrogate_term(&unit_ratio, a, &grpo_cfg))
                .collect()
        } else {
            advantages.clone()
        };

        // Score-function update: each sample pushes its chosen template up
        // by (1 - p) and every other template down by p, scaled by its
        // advantage.
        let scale_sum: f64 = scales.iter().sum();
        let mut chosen_sum = vec![0.0f64; m];
        for (i, &c) in choices.iter().enumerate() {
            chosen_sum[c] += scales[i];
        }
        for t in 0..m {
            logits[t] += cfg.learning_rate * (chosen_sum[t] - probs[t] * scale_sum);
        }

        steps.push(StepRecord {
            step,
            entropy,
            mean_reward: totals.iter().sum::<f64>() / g as f64,
            mean_evol: evolution.rewards.iter().sum::<f64>() / g as f64,
            top_template_prob: top_prob,
            visits,
        });
    }

    let final_probs = softmax(&logits);
    Ok(SimTrajectory {
        final_entropy: policy_entropy(&logits),
        final_top_prob: final_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        final_probs,
        visits_total,
        steps,
    })
}
