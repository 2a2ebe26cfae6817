//! Reward aggregation, group-relative advantages, and the clipped
//! surrogate / KL objective terms.
//!
//! This module computes objective values only: gradient propagation belongs
//! to the simulator or an external trainer. Advantages normalize each
//! reward against its group's mean and population standard deviation, with
//! a degenerate-group guard that returns all-zero advantages instead of
//! dividing by a vanishing spread.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Trade-off weights for the three reward components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights<S> {
    pub srar: S,
    pub rpcr: S,
    pub evol: S,
}

impl<S: Scalar> Default for RewardWeights<S> {
    fn default() -> Self {
        Self {
            srar: S::lit(0.1),
            rpcr: S::lit(0.7),
            evol: S::lit(0.2),
        }
    }
}

impl<S: Scalar> RewardWeights<S> {
    pub fn new(srar: S, rpcr: S, evol: S) -> Self {
        Self { srar, rpcr, evol }
    }

    /// Weights with the diversity component removed, for ablation runs.
    pub fn without_evolution(mut self) -> Self {
        self.evol = S::zero();
        self
    }
}

/// Per-rollout reward components and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RewardBreakdown<S> {
    pub r_srar: S,
    pub r_rpcr: S,
    pub r_evol: S,
    pub total: S,
}

/// Weighted sum of the three reward components.
pub fn aggregate_reward<S: Scalar>(
    r_srar: S,
    r_rpcr: S,
    r_evol: S,
    weights: &RewardWeights<S>,
) -> RewardBreakdown<S> {
    RewardBreakdown {
        r_srar,
        r_rpcr,
        r_evol,
        total: weights.srar * r_srar + weights.rpcr * r_rpcr + weights.evol * r_evol,
    }
}

/// Which estimator the KL penalty uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlEstimator {
    /// Signed log-ratio `logp_new - logp_ref` on the sampled sequence;
    /// unbiased but may be negative per sample.
    ExactRatio,
    /// `r - log r - 1` with `r = exp(logp_ref - logp_new)`; non-negative
    /// pointwise and zero iff the policies agree on the sample.
    #[default]
    UnbiasedK3,
}

impl std::str::FromStr for KlEstimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "exact_ratio" => Ok(KlEstimator::ExactRatio),
            "k3" | "unbiased_k3" => Ok(KlEstimator::UnbiasedK3),
            other => Err(format!("unknown KL estimator `{other}` (expected exact or k3)")),
        }
    }
}

/// Group scoring configuration.
///
/// The clip width and KL coefficient defaults are conventional values, not
/// reported numbers; both are expected to come from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrpoConfig<S> {
    pub epsilon_clip: S,
    pub beta_kl: S,
    pub kl_estimator: KlEstimator,
    /// Spread below which a group counts as degenerate.
    pub epsilon_std: S,
}

impl<S: Scalar> Default for GrpoConfig<S> {
    fn default() -> Self {
        Self {
            epsilon_clip: S::lit(0.2),
            beta_kl: S::lit(0.04),
            kl_estimator: KlEstimator::default(),
            epsilon_std: S::lit(1e-8),
        }
    }
}

/// Invalid group scoring configuration.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrpoConfigError {
    #[error("epsilon_clip must lie in (0, 1)")]
    ClipOutOfRange,
    #[error("beta_kl must be non-negative and finite")]
    InvalidBeta,
    #[error("epsilon_std must be a tiny positive number")]
    InvalidEpsilonStd,
}

impl<S: Scalar> GrpoConfig<S> {
    pub fn validate(&self) -> Result<(), GrpoConfigError> {
        if !(self.epsilon_clip > S::zero() && self.epsilon_clip < S::one()) {
            return Err(GrpoConfigError::ClipOutOfRange);
        }
        if !(self.beta_kl >= S::zero() && self.beta_kl.is_finite()) {
            return Err(GrpoConfigError::InvalidBeta);
        }
        if !(self.epsilon_std > S::zero() && self.epsilon_std.is_finite()) {
            return Err(GrpoConfigError::InvalidEpsilonStd);
        }
        Ok(())
    }
}

/// Group-relative advantages: `(r_i - mean) / std` with the population
/// standard deviation. Degenerate groups (std at or below `epsilon_std`)
/// yield all-zero advantages.
pub fn group_advantages<S: Scalar>(rewards: &[S], cfg: &GrpoConfig<S>) -> Vec<S> {
    let n = rewards.len();
    if n == 0 {
        return Vec::new();
    }
    let count = S::from_count(n);
    let mean = rewards.iter().copied().sum::<S>() / count;
    let variance = rewards
        .iter()
        .map(|&r| {
            let d = r - mean;
            d * d
        })
        .sum::<S>()
        / count;
    let std = variance.sqrt();
    if std <= cfg.epsilon_std {
        return vec![S::zero(); n];
    }
    rewards.iter().map(|&r| (r - mean) / std).collect()
}

/// Rewards and advantages for one rollout group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupScore<S> {
    pub rewards: Vec<S>,
    pub advantages: Vec<S>,
    pub mean: S,
    pub std: S,
}

impl<S: Scalar> GroupScore<S> {
    pub fn compute(rewards: Vec<S>, cfg: &GrpoConfig<S>) -> Self {
        let advantages = group_advantages(&rewards, cfg);
        let (mean, std) = if rewards.is_empty() {
            (S::zero(), S::zero())
        } else {
            let count = S::from_count(rewards.len());
            let mean = rewards.iter().copied().sum::<S>() / count;
            let variance = rewards
                .iter()
                .map(|&r| {
                    let d = r - mean;
                    d * d
                })
                .sum::<S>()
                / count;
            (mean, variance.sqrt())
        };
        Self {
            rewards,
            advantages,
            mean,
            std,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Sequence log-probabilities under the new, sampling, and reference
/// policies. All must be finite and non-positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyLogProbs<S> {
    pub logp_new: S,
    pub logp_old: S,
    pub logp_ref: S,
}

/// Clipped surrogate term `min(rho * adv, clip(rho, 1 - eps, 1 + eps) * adv)`
/// with `rho = exp(logp_new - logp_old)`.
pub fn surrogate_term<S: Scalar>(lp: &PolicyLogProbs<S>, advantage: S, cfg: &GrpoConfig<S>) -> S {
    let ratio = (lp.logp_new - lp.logp_old).exp();
    let clipped = ratio
        .max(S::one() - cfg.epsilon_clip)
        .min(S::one() + cfg.epsilon_clip);
    (ratio * advantage).min(clipped * advantage)
}

/// Per-sample KL penalty under the configured estimator.
pub fn kl_penalty<S: Scalar>(lp: &PolicyLogProbs<S>, cfg: &GrpoConfig<S>) -> S {
    match cfg.kl_estimator {
        KlEstimator::ExactRatio => lp.logp_new - lp.logp_ref,
        KlEstimator::UnbiasedK3 => {
            let log_r = lp.logp_ref - lp.logp_new;
            let r = log_r.exp();
            r - log_r - S::one()
        }
    }
}

/// Group objective: mean over rollouts of the surrogate term minus the
/// KL penalty scaled by `beta_kl`.
pub fn grpo_objective<S: Scalar>(group: &[(PolicyLogProbs<S>, S)], cfg: &GrpoConfig<S>) -> S {
    if group.is_empty() {
        return S::zero();
    }
    let total: S = group
        .iter()
        .map(|(lp, adv)| surrogate_term(lp, *adv, cfg) - cfg.beta_kl * kl_penalty(lp, cfg))
        .sum();
    total / S::from_count(group.len())
}
