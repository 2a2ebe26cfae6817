//! Path-evolution reward: pays each eligible rollout for being semantically
//! dissimilar from the other eligible rollouts in its group.
//!
//! Eligibility gates the reward to samples that already pass the structure
//! check and clear a high correctness bar, so a rollout cannot farm the
//! diversity bonus with ungrounded free-form text. Eligible reasoning texts
//! are embedded, an intra-group cosine similarity matrix with a zero
//! diagonal is formed over the eligible subset only, and each eligible
//! sample earns `1 - mean similarity to the other eligible samples`,
//! clamped to `[0, 1]`.
//!
//! The reference embedder is a hashed token-frequency vector: deterministic,
//! dependency-free, and sufficient for the ordinal structure the diversity
//! signal needs. The trait boundary admits learned embedders, as long as
//! they stay deterministic for a fixed configuration.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Fixed-dimension embedding of a reasoning text.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector<S> {
    components: Vec<S>,
}

impl<S: Scalar> EmbeddingVector<S> {
    pub fn new(components: Vec<S>) -> Self {
        Self { components }
    }

    /// The all-zero vector marking a degenerate (token-less) input.
    pub fn zero(dimension: usize) -> Self {
        Self {
            components: vec![S::zero(); dimension],
        }
    }

    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[S] {
        &self.components
    }

    pub fn norm(&self) -> S {
        self.components
            .iter()
            .map(|&c| c * c)
            .sum::<S>()
            .sqrt()
    }

    /// Degenerate vectors have zero norm and similarity 0 against everything.
    pub fn is_degenerate(&self) -> bool {
        self.norm() == S::zero()
    }

    /// Cosine similarity; 0 when either vector is degenerate.
    ///
    /// Dimension mismatch is a caller error.
    pub fn cosine(&self, other: &Self) -> S {
        assert_eq!(
            self.dimension(),
            other.dimension(),
            "cosine of mismatched embedding dimensions"
        );
        let dot: S = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(&a, &b)| a * b)
            .sum();
        let denom = self.norm() * other.norm();
        if denom == S::zero() {
            S::zero()
        } else {
            dot / denom
        }
    }
}

/// Deterministic text embedder. Implementations must be safe for concurrent
/// use and must return the same vector for the same text and configuration.
pub trait Embedder<S: Scalar>: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> EmbeddingVector<S>;
}

/// Configuration for the reference hashed-token embedder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub dimension: usize,
    pub seed: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            dimension: 256,
            seed: 0,
        }
    }
}

/// Reference embedder: unit-normalized hashed token frequencies.
///
/// The text is case-folded and split on runs of non-alphanumeric characters;
/// each token is hashed with 64-bit FNV-1a over the seed's little-endian
/// bytes followed by the token's UTF-8 bytes, and the hash modulo the
/// dimension selects the bucket whose count it increments. The count vector
/// is scaled to unit Euclidean norm; a token-less text embeds to the zero
/// vector, flagged degenerate.
#[derive(Debug, Clone)]
pub struct HashedTokenEmbedder {
    config: EmbedderConfig,
}

impl HashedTokenEmbedder {
    pub fn new(config: EmbedderConfig) -> Self {
        assert!(config.dimension > 0, "embedder dimension must be positive");
        Self { config }
    }

    /// Bucket index a token maps to under this configuration.
    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a64(self.config.seed, token.as_bytes()) % self.config.dimension as u64) as usize
    }
}

impl Default for HashedTokenEmbedder {
    fn default() -> Self {
        Self::new(EmbedderConfig::default())
    }
}

const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over the seed's little-endian bytes followed by `bytes`.
fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET_BASIS;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

impl<S: Scalar> Embedder<S> for HashedTokenEmbedder {
    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed(&self, text: &str) -> EmbeddingVector<S> {
        let mut counts = vec![0u64; self.config.dimension];
        let folded = text.to_lowercase();
        let mut any = false;
        for token in folded.split(|c: char| !c.is_alphanumeric()) {
            if token.is_empty() {
                continue;
            }
            counts[self.bucket(token)] += 1;
            any = true;
        }
        if !any {
            return EmbeddingVector::zero(self.config.dimension);
        }
        let mut components: Vec<S> = counts
            .into_iter()
            .map(|c| S::from_u64(c).expect("token count representable"))
            .collect();
        let norm = components.iter().map(|&c| c * c).sum::<S>().sqrt();
        for c in &mut components {
            *c = *c / norm;
        }
        EmbeddingVector::new(components)
    }
}

/// Intra-group cosine similarity matrix with a zero diagonal.
///
/// Entries involving a degenerate vector are 0. All vectors must share one
/// dimension.
pub fn similarity_matrix<S: Scalar>(vectors: &[EmbeddingVector<S>]) -> Vec<Vec<S>> {
    let k = vectors.len();
    let mut matrix = vec![vec![S::zero(); k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let s = vectors[i].cosine(&vectors[j]);
            matrix[i][j] = s;
            matrix[j][i] = s;
        }
    }
    matrix
}

/// Eligibility gate for the evolution reward: strict format pass and a high
/// correctness bar, both exclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EligibilityGate<S> {
    pub min_srar: S,
    pub min_rpcr: S,
}

impl<S: Scalar> Default for EligibilityGate<S> {
    fn default() -> Self {
        Self {
            min_srar: S::lit(0.99),
            min_rpcr: S::lit(0.80),
        }
    }
}

impl<S: Scalar> EligibilityGate<S> {
    pub fn is_eligible(&self, r_srar: S, r_rpcr: S) -> bool {
        r_srar > self.min_srar && r_rpcr > self.min_rpcr
    }
}

/// One group member's inputs to the evolution reward.
#[derive(Debug, Clone, Copy)]
pub struct GroupSample<'a, S> {
    pub think_text: &'a str,
    pub r_srar: S,
    pub r_rpcr: S,
}

/// Similarity statistics over the eligible subset of a group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSimilarity<S> {
    /// k-by-k cosine matrix over eligible samples, zero diagonal.
    pub matrix: Vec<Vec<S>>,
    /// Group indices of the eligible samples, in group order.
    pub eligible_indices: Vec<usize>,
    /// Mean similarity of each eligible sample to the other eligible ones;
    /// 0 when there are no peers.
    pub mean_similarity: Vec<S>,
    /// Eligible sample count.
    pub k: usize,
}

/// Evolution rewards for a whole group, with the similarity detail.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionOutcome<S> {
    /// Per-member reward in `[0, 1]`; ineligible members get exactly 0.
    pub rewards: Vec<S>,
    /// Per-member eligibility flags.
    pub eligible: Vec<bool>,
    pub similarity: GroupSimilarity<S>,
}

/// Score a group from pre-computed embeddings and eligibility flags.
///
/// `embeddings` and `eligible` run over the whole group in order. Ineligible
/// members get reward 0 and do not enter the similarity matrix. A sole
/// eligible member gets reward 1 — with no peer to resemble, being the only
/// valid sample keeps its full incentive.
pub fn evolution_rewards_from_embeddings<S: Scalar>(
    embeddings: &[EmbeddingVector<S>],
    eligible: &[bool],
) -> EvolutionOutcome<S> {
    assert_eq!(
        embeddings.len(),
        eligible.len(),
        "one eligibility flag per embedding"
    );
    let eligible_indices: Vec<usize> = eligible
        .iter()
        .enumerate()
        .filter_map(|(i, &e)| e.then_some(i))
        .collect();
    let k = eligible_indices.len();

    let mut rewards = vec![S::zero(); embeddings.len()];
    let eligible_vecs: Vec<EmbeddingVector<S>> = eligible_indices
        .iter()
        .map(|&i| embeddings[i].clone())
        .collect();
    let matrix = similarity_matrix(&eligible_vecs);

    let mut mean_similarity = Vec::with_capacity(k);
    if k == 1 {
        mean_similarity.push(S::zero());
        rewards[eligible_indices[0]] = S::one();
    } else if k > 1 {
        let peers = S::from_count(k - 1);
        for (row, &group_idx) in eligible_indices.iter().enumerate() {
            let mean = matrix[row].iter().copied().sum::<S>() / peers;
            mean_similarity.push(mean);
            rewards[group_idx] = (S::one() - mean).max(S::zero()).min(S::one());
        }
    }

    EvolutionOutcome {
        rewards,
        eligible: eligible.to_vec(),
        similarity: GroupSimilarity {
            matrix,
            eligible_indices,
            mean_similarity,
            k,
        },
    }
}

/// Gate, embed, and score a group of reasoning texts.
pub fn evolution_rewards<S: Scalar>(
    embedder: &dyn Embedder<S>,
    group: &[GroupSample<'_, S>],
    gate: &EligibilityGate<S>,
) -> EvolutionOutcome<S> {
    let eligible: Vec<bool> = group
        .iter()
        .map(|s| gate.is_eligible(s.r_srar, s.r_rpcr))
        .collect();
    // Only eligible texts are embedded; ineligible slots get a placeholder
    // zero vector that never enters the matrix.
    let embeddings: Vec<EmbeddingVector<S>> = group
        .iter()
        .zip(&eligible)
        .map(|(s, &e)| {
            if e {
                embedder.embed(s.think_text)
            } else {
                EmbeddingVector::zero(embedder.dimension())
            }
        })
        .collect();
    evolution_rewards_from_embeddings(&embeddings, &eligible)
}
