//! Binary-classification top-K selection: a pairwise cross-encoding of the
//! answer with each sentence feeds a small trainable head, and the K
//! sentences with the highest positive-class probability are selected.
//!
//! [`SentenceScorer`] is the pluggable scoring interface — dense retrievers
//! or external services can implement it without touching the selection
//! logic.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{KnowledgeComposition, Sample};
use crate::encoder::{Encoder, EncoderSpec};
use crate::error::{KcsError, Result};
use crate::nn::tape::NodeId;
use crate::nn::{warmup_linear, AdamW, AdamWConfig, Graph, Linear, ParamSet};
use crate::rng::derive_rng;
use crate::selector::losses::cls_loss_node;

/// Anything that can assign a question-worthiness probability to every
/// sentence of a sample, in (doc_idx, sent_idx) order.
pub trait SentenceScorer {
    fn positive_probs(&self, sample: &Sample) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClsConfig {
    pub encoder: EncoderSpec,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for ClsConfig {
    fn default() -> Self {
        ClsConfig { encoder: EncoderSpec::default(), hidden: 128, seed: 0 }
    }
}

impl ClsConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.hidden == 0 {
            return Err(KcsError::Config("classifier hidden width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClsTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub clip_norm: Option<f64>,
    pub warmup_ratio: f64,
    pub seed: u64,
}

impl Default for ClsTrainConfig {
    fn default() -> Self {
        ClsTrainConfig {
            epochs: 8,
            batch_size: 8,
            lr: 1e-2,
            weight_decay: 0.01,
            clip_norm: Some(1.0),
            warmup_ratio: 0.1,
            seed: 0,
        }
    }
}

impl ClsTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(KcsError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(KcsError::Config("batch size must be at least 1".into()));
        }
        if self.lr <= 0.0 {
            return Err(KcsError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClsTrainReport {
    pub epochs_run: usize,
    pub steps: u64,
    pub loss_curve: Vec<f64>,
}

/// Answer⊕sentence cross-encoder: concat(x_a, x_i) -> hidden -> 2 logits.
pub struct PairClassifier {
    pub config: ClsConfig,
    pub params: ParamSet,
    encoder: Encoder,
    proj_in: Linear,
    proj_out: Linear,
    trained: bool,
}

impl PairClassifier {
    pub fn new(config: ClsConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ParamSet::new();
        let encoder = Encoder::new(config.encoder.clone(), &mut params, None)?;
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        let d = config.encoder.d;
        let proj_in = Linear::new(&mut params, "cls.in", 2 * d, config.hidden, true, &mut rng);
        let proj_out = Linear::new(&mut params, "cls.out", config.hidden, 2, true, &mut rng);
        Ok(PairClassifier { config, params, encoder, proj_in, proj_out, trained: false })
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    #[cfg(test)]
    pub(crate) fn assume_trained(&mut self) {
        self.trained = true;
    }

    /// (M x 2) pair logits for every sentence of the sample.
    fn logits_graph(&self, g: &mut Graph, sample: &Sample) -> Result<NodeId> {
        let (x, xa, _) = self.encoder.encode_sample_graph(g, &self.params, sample)?;
        let m = g.tape.value(x).nrows();
        let xa_rows = g.tape.broadcast_row(xa, m);
        let pairs = g.tape.concat_cols(&[xa_rows, x]);
        let h = self.proj_in.forward(g, pairs);
        let h = g.tape.gelu(h);
        Ok(self.proj_out.forward(g, h))
    }

    /// Fit on per-sentence binary labels (supporting fact or not).
    pub fn train(&mut self, samples: &[Sample], cfg: &ClsTrainConfig) -> Result<ClsTrainReport> {
        cfg.validate()?;
        if samples.is_empty() {
            return Err(KcsError::Data("empty classifier training set".into()));
        }
        let steps_per_epoch = samples.len().div_ceil(cfg.batch_size) as u64;
        let total_steps = steps_per_epoch * cfg.epochs as u64;
        let mut opt = AdamW::new(
            &self.params,
            AdamWConfig {
                lr: cfg.lr,
                weight_decay: cfg.weight_decay,
                clip_norm: cfg.clip_norm,
                ..Default::default()
            },
        );
        let mut loss_curve = Vec::with_capacity(total_steps as usize);
        for epoch in 0..cfg.epochs {
            let mut order: Vec<usize> = (0..samples.len()).collect();
            let mut rng = derive_rng(cfg.seed, &["cls-order", &epoch.to_string()]);
            for i in (1..order.len()).rev() {
                let j = rand::Rng::random_range(&mut rng, 0..=i);
                order.swap(i, j);
            }
            for chunk in order.chunks(cfg.batch_size) {
                let mut grads: Vec<Array2<f64>> = self
                    .params
                    .ids()
                    .map(|id| Array2::zeros(self.params.value(id).raw_dim()))
                    .collect();
                let mut batch_loss = 0.0;
                for &idx in chunk {
                    let sample = &samples[idx];
                    let mut g = Graph::new(&self.params);
                    let logits = self.logits_graph(&mut g, sample)?;
                    let loss = cls_loss_node(&mut g, logits, &sample.labels);
                    let value = g.tape.scalar(loss);
                    if !value.is_finite() {
                        return Err(KcsError::Diverged(format!(
                            "non-finite classifier loss on sample {}",
                            sample.id
                        )));
                    }
                    batch_loss += value;
                    for (acc, grad) in grads.iter_mut().zip(g.param_grads(loss)) {
                        *acc += &grad;
                    }
                }
                let scale = 1.0 / chunk.len() as f64;
                for grad in &mut grads {
                    *grad *= scale;
                }
                let lr_scale = warmup_linear(opt.steps_taken(), total_steps, cfg.warmup_ratio);
                opt.step(&mut self.params, &mut grads, lr_scale);
                loss_curve.push(batch_loss * scale);
            }
        }
        self.trained = true;
        Ok(ClsTrainReport { epochs_run: cfg.epochs, steps: opt.steps_taken(), loss_curve })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| KcsError::io(dir, e))?;
        let meta = ClsCheckpointMeta {
            version: 1,
            config: self.config.clone(),
            layout: self.params.layout(),
        };
        let meta_path = dir.join("classifier.json");
        let text = serde_json::to_string_pretty(&meta)
            .map_err(|e| KcsError::Data(format!("serializing classifier metadata: {e}")))?;
        fs::write(&meta_path, text).map_err(|e| KcsError::io(&meta_path, e))?;
        let flat = self.params.to_flat();
        let mut bytes = Vec::with_capacity(flat.len() * 8);
        for v in flat {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let weights_path = dir.join("weights.bin");
        fs::write(&weights_path, bytes).map_err(|e| KcsError::io(&weights_path, e))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("classifier.json");
        let text =
            fs::read_to_string(&meta_path).map_err(|e| KcsError::io(&meta_path, e))?;
        let meta: ClsCheckpointMeta = serde_json::from_str(&text)
            .map_err(|e| KcsError::Data(format!("malformed classifier metadata: {e}")))?;
        if meta.version != 1 {
            return Err(KcsError::Data(format!(
                "unsupported classifier checkpoint version {}",
                meta.version
            )));
        }
        let mut model = PairClassifier::new(meta.config)?;
        if model.params.layout() != meta.layout {
            return Err(KcsError::Data(
                "classifier checkpoint layout does not match its config".into(),
            ));
        }
        let weights_path = dir.join("weights.bin");
        let bytes = fs::read(&weights_path).map_err(|e| KcsError::io(&weights_path, e))?;
        if bytes.len() % 8 != 0 {
            return Err(KcsError::Data("weights.bin is not a whole number of f64s".into()));
        }
        let flat: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        model.params.load_flat(&flat).map_err(KcsError::Data)?;
        model.trained = true;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ClsCheckpointMeta {
    version: u32,
    config: ClsConfig,
    layout: Vec<(String, usize, usize)>,
}

impl SentenceScorer for PairClassifier {
    fn positive_probs(&self, sample: &Sample) -> Result<Vec<f64>> {
        if !self.trained {
            return Err(KcsError::Config(
                "pair classifier is untrained; train it or load a checkpoint first".into(),
            ));
        }
        let mut g = Graph::eval(&self.params);
        let logits = self.logits_graph(&mut g, sample)?;
        let m = g.tape.value(logits).nrows();
        let mask = Array2::from_elem((m, 2), true);
        let probs = g.tape.softmax_rows_masked(logits, &mask);
        Ok(g.tape.value(probs).column(1).to_vec())
    }
}

/// Top-K sentences by positive-class probability, descending, ties broken
/// by ascending sentence reference.
pub fn cls_topk(
    sample: &Sample,
    scorer: &dyn SentenceScorer,
    k: usize,
) -> Result<KnowledgeComposition> {
    let probs = scorer.positive_probs(sample)?;
    if probs.len() != sample.n_sentences() {
        return Err(KcsError::Shape(format!(
            "scorer returned {} probabilities for {} sentences",
            probs.len(),
            sample.n_sentences()
        )));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
    order.truncate(k.min(probs.len()));
    Ok(KnowledgeComposition {
        answer: sample.answer.clone(),
        refs: order.into_iter().map(|i| sample.ref_at(i)).collect(),
    })
}
