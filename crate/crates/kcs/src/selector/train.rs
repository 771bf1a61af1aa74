//! Selector training: AdamW with linear warmup/decay, teacher forcing on
//! gold compositions, per-epoch reshuffling (data order and the `shuffle`
//! arrangement), dev-set greedy F1@K model selection, and hard failure on
//! divergence.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_gold_composition, Arrangement, Sample};
use crate::decoding::greedy_decode;
use crate::error::{KcsError, Result};
use crate::metrics::composition_prf;
use crate::nn::{warmup_linear, AdamW, AdamWConfig};
use crate::rng::derive_rng;

use super::losses::{cls_loss_node, seq_loss_node};
use super::model::SelectorModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Samples per optimizer step (gradient accumulation count).
    pub batch_size: usize,
    pub lr: f64,
    pub warmup_ratio: f64,
    pub weight_decay: f64,
    pub clip_norm: Option<f64>,
    pub seed: u64,
    /// Ordering rule for gold compositions during training.
    pub arrangement: Arrangement,
    /// Composition length for dev-set greedy evaluation.
    pub eval_k: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 8,
            lr: 3e-5,
            warmup_ratio: 0.1,
            weight_decay: 0.01,
            clip_norm: Some(1.0),
            seed: 0,
            arrangement: Arrangement::Document,
            eval_k: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.eval_k == 0 {
            return Err(KcsError::Config(
                "epochs, batch_size and eval_k must be positive".into(),
            ));
        }
        if self.lr <= 0.0 {
            return Err(KcsError::Config("learning rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.warmup_ratio) {
            return Err(KcsError::Config("warmup_ratio must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub steps: u64,
    /// (classification, sequential) loss per optimizer step.
    pub loss_curve: Vec<(f64, f64)>,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
}

/// Mean greedy F1@K over a sample set.
fn greedy_f1(model: &SelectorModel, samples: &[Sample], k: usize) -> Result<f64> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for s in samples {
        let trace = greedy_decode(model, s, k)?;
        let (_, _, f1) = composition_prf(&trace.composition.refs, &s.supporting_facts)?;
        total += f1;
    }
    Ok(total / samples.len() as f64)
}

/// Train in place; the model ends at the best-dev-F1 parameters (or the
/// final step when `dev` is empty). Deterministic for a fixed config.
pub fn train(
    model: &mut SelectorModel,
    train_set: &[Sample],
    dev: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(KcsError::Data("empty training set".into()));
    }
    let steps_per_epoch = train_set.len().div_ceil(cfg.batch_size) as u64;
    let total_steps = steps_per_epoch * cfg.epochs as u64;
    let mut opt = AdamW::new(
        &model.params,
        AdamWConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            clip_norm: cfg.clip_norm,
            ..Default::default()
        },
    );
    let mut loss_curve = Vec::with_capacity(total_steps as usize);
    let mut best: Option<(usize, f64, Vec<f64>)> = None;

    for epoch in 0..cfg.epochs {
        // Epoch-specific data order and arrangement randomness.
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut order_rng = derive_rng(cfg.seed, &["train-order", &epoch.to_string()]);
        for i in (1..order.len()).rev() {
            let j = rand::Rng::random_range(&mut order_rng, 0..=i);
            order.swap(i, j);
        }
        let arrangement_seed = cfg.seed.wrapping_add(epoch as u64);

        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads: Vec<Array2<f64>> = model
                .params
                .ids()
                .map(|id| Array2::zeros(model.params.value(id).raw_dim()))
                .collect();
            let mut cls_total = 0.0;
            let mut seq_total = 0.0;
            for &idx in chunk {
                let sample = &train_set[idx];
                let (gold, _) =
                    build_gold_composition(sample, cfg.arrangement, arrangement_seed)?;
                let dropout_rng = derive_rng(
                    cfg.seed,
                    &["dropout", &epoch.to_string(), &batch_no.to_string(), &sample.id],
                );
                let (mut g, nodes) =
                    model.forward_train(sample, &gold.refs, Some(dropout_rng))?;
                let cls = cls_loss_node(&mut g, nodes.cls_logits, &sample.labels);
                let seq =
                    seq_loss_node(&mut g, nodes.logits, &nodes.gold_idx, model.config.denominator)?;
                let total = g.tape.add_scaled(cls, seq, model.config.lambda);
                let (cls_v, seq_v) = (g.tape.scalar(cls), g.tape.scalar(seq));
                if !g.tape.scalar(total).is_finite() {
                    return Err(KcsError::Diverged(format!(
                        "non-finite loss at epoch {epoch}, sample {} (cls {cls_v}, seq {seq_v})",
                        sample.id
                    )));
                }
                cls_total += cls_v;
                seq_total += seq_v;
                for (acc, g) in grads.iter_mut().zip(g.param_grads(total)) {
                    *acc += &g;
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            for g in &mut grads {
                *g *= scale;
            }
            let lr_scale = warmup_linear(opt.steps_taken(), total_steps, cfg.warmup_ratio);
            opt.step(&mut model.params, &mut grads, lr_scale);
            let n = chunk.len() as f64;
            log::debug!(
                "epoch {epoch} step {} cls {:.6} seq {:.6}",
                opt.steps_taken(),
                cls_total / n,
                seq_total / n
            );
            loss_curve.push((cls_total / n, seq_total / n));
        }

        let dev_f1 = greedy_f1(model, dev, cfg.eval_k)?;
        log::info!("epoch {epoch}: dev F1@{} = {dev_f1:.4}", cfg.eval_k);
        let improved = match &best {
            Some((_, best_f1, _)) => dev.is_empty() || dev_f1 > *best_f1,
            None => true,
        };
        if improved {
            best = Some((epoch, dev_f1, model.params.to_flat()));
        }
    }

    let (best_epoch, best_dev_f1, weights) = best.expect("at least one epoch ran");
    model.params.load_flat(&weights).map_err(KcsError::Data)?;
    Ok(TrainReport {
        epochs_run: cfg.epochs,
        steps: opt.steps_taken(),
        loss_curve,
        best_epoch,
        best_dev_f1,
    })
}
