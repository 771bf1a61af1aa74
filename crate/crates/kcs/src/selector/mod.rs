//! Hierarchical sentence selector: context encoder layers, a per-sentence
//! question-worthiness classifier, classification-probability key infusion,
//! and an autoregressive decoder that scores composition steps, plus the
//! contrastive training objectives.

pub mod checkpoint;
pub mod losses;
pub mod model;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::error::{KcsError, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use losses::{cls_loss_scalar, seq_loss_scalar, total_loss};
pub use model::{EncodedContext, SelectorForward, SelectorModel};
pub use train::{train, TrainConfig, TrainReport};

/// Similarity used to score a candidate sentence against the prefix
/// representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MiFn {
    /// Cosine of the two vectors (normalized dot product).
    Cosine,
    /// Raw dot product.
    Dot,
}

/// How classification probabilities reach the decoder's cross-attention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Infusion {
    /// Keys become H + delta W_delta with delta_i = [1 - z_i, z_i].
    Key,
    /// Keys are H unchanged (classify-and-generate variant).
    None,
}

/// Where the answer representation joins the context representations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConcatMode {
    /// Classifier sees concat(h_i, x_a) after the encoder layers.
    Post,
    /// Each encoder input row is concat(x_i, x_a), projected back to d.
    Pre,
}

/// Contrastive denominator convention for the sequential loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denominator {
    /// Positive included in the normalizer (standard NCE form, default).
    IncludePositive,
    /// Positive removed from the normalizer (literal "s != f_k" sum).
    ExcludePositive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectorConfig {
    pub d: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    /// Weight on the sequential contrastive loss.
    pub lambda: f64,
    pub mi_fn: MiFn,
    pub temperature: f64,
    pub infusion: Infusion,
    pub concat: ConcatMode,
    pub denominator: Denominator,
    pub dropout: f64,
    pub max_sentences: usize,
    /// Learned absolute positions over the sentence sequence (and prefix).
    pub use_positions: bool,
    /// Parameter-initialization seed.
    pub seed: u64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            d: 768,
            n_layers: 2,
            n_heads: 4,
            lambda: 1.0,
            mi_fn: MiFn::Cosine,
            temperature: 1.0,
            infusion: Infusion::Key,
            concat: ConcatMode::Post,
            denominator: Denominator::IncludePositive,
            dropout: 0.1,
            max_sentences: 128,
            use_positions: true,
            seed: 0,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n_layers == 0 || self.n_heads == 0 {
            return Err(KcsError::Config(
                "selector d, n_layers and n_heads must be positive".into(),
            ));
        }
        if self.d % self.n_heads != 0 {
            return Err(KcsError::Config(format!(
                "selector d ({}) must be divisible by n_heads ({})",
                self.d, self.n_heads
            )));
        }
        if self.lambda < 0.0 {
            return Err(KcsError::Config("lambda must be non-negative".into()));
        }
        if self.temperature <= 0.0 {
            return Err(KcsError::Config("temperature must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(KcsError::Config("dropout must lie in [0, 1)".into()));
        }
        if self.max_sentences == 0 {
            return Err(KcsError::Config("max_sentences must be positive".into()));
        }
        Ok(())
    }
}

/// Probabilities over candidate next sentences, aligned with global
/// sentence order. Already-selected positions are exactly 0; the rest sum
/// to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionDistribution {
    pub probs: Vec<f64>,
}

impl SelectionDistribution {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the highest-probability candidate; ties break toward the
    /// lower index, matching ascending sentence order.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}
