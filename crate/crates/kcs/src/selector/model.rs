//! The selector network and its forward passes.
//!
//! Context side: encoder layers produce hidden states H from the sentence
//! latents X; a linear head over (h_i, x_a) yields per-sentence
//! question-worthiness probabilities Z; the decoder's cross-attention keys
//! are infused with Z via K~ = H + delta W_delta (delta_i = [1-z_i, z_i])
//! while values stay H. Prefix side: a causal decoder consumes the latents
//! of previously selected sentences (answer first) and emits a prediction
//! representation per step, scored against every sentence latent.

use ndarray::{Array2, Axis};
use rand_chacha::ChaCha12Rng;

use crate::corpus::{Sample, SentenceRef};
use crate::encoder::{EncodeFlags, Encoder, EncoderSpec};
use crate::error::{KcsError, Result};
use crate::nn::tape::NodeId;
use crate::nn::{
    causal_mask, normal_init, DecoderLayer, EncoderLayer, Graph, Linear, ParamId, ParamSet,
};
use crate::rng::derive_rng;

use super::{ConcatMode, Infusion, MiFn, SelectionDistribution, SelectorConfig};

pub struct SelectorModel {
    pub config: SelectorConfig,
    pub params: ParamSet,
    pub encoder: Encoder,
    enc_layers: Vec<EncoderLayer>,
    dec_layers: Vec<DecoderLayer>,
    /// Projects concat(x_i, x_a) back to d when concat = pre.
    input_proj: Option<Linear>,
    cls_head: Linear,
    w_delta: ParamId,
    enc_pos: ParamId,
    dec_pos: ParamId,
}

/// Tape handles for one training forward pass.
pub struct TrainNodes {
    pub x: NodeId,
    pub x_a: NodeId,
    pub h: NodeId,
    pub cls_logits: NodeId,
    pub z: NodeId,
    pub k_tilde: NodeId,
    pub e: NodeId,
    /// Temperature-scaled similarity of each step representation against
    /// every sentence latent, K x M.
    pub logits: NodeId,
    pub gold_idx: Vec<usize>,
    pub m: usize,
    pub flags: EncodeFlags,
}

/// Teacher-forced forward pass materialized as matrices.
pub struct SelectorForward {
    pub h: Array2<f64>,
    pub z: Array2<f64>,
    pub k_tilde: Array2<f64>,
    pub e: Array2<f64>,
    pub logits: Array2<f64>,
    pub gold_idx: Vec<usize>,
}

/// Context-side state reused across decode steps of one sample.
pub struct EncodedContext {
    pub m: usize,
    pub x: Array2<f64>,
    pub x_a: Array2<f64>,
    pub h: Array2<f64>,
    pub z: Array2<f64>,
    pub k_tilde: Array2<f64>,
    pub flags: EncodeFlags,
}

impl SelectorModel {
    pub fn new(
        config: SelectorConfig,
        encoder_spec: EncoderSpec,
        cache_dir: Option<&std::path::Path>,
    ) -> Result<Self> {
        config.validate()?;
        encoder_spec.validate()?;
        if config.d != encoder_spec.d {
            return Err(KcsError::Config(format!(
                "selector d ({}) must equal encoder d ({})",
                config.d, encoder_spec.d
            )));
        }
        let d = config.d;
        let mut params = ParamSet::new();
        let encoder = Encoder::new(encoder_spec, &mut params, cache_dir)?;
        let mut rng = derive_rng(config.seed, &["selector-init"]);
        let enc_pos = params.add("pos.enc", normal_init(&mut rng, config.max_sentences, d, 0.02));
        let dec_pos =
            params.add("pos.dec", normal_init(&mut rng, config.max_sentences + 1, d, 0.02));
        let input_proj = match config.concat {
            ConcatMode::Pre => {
                Some(Linear::new(&mut params, "input_proj", 2 * d, d, true, &mut rng))
            }
            ConcatMode::Post => None,
        };
        let enc_layers = (0..config.n_layers)
            .map(|i| EncoderLayer::new(&mut params, &format!("enc{i}"), d, config.n_heads, &mut rng))
            .collect();
        let cls_in = match config.concat {
            ConcatMode::Post => 2 * d,
            ConcatMode::Pre => d,
        };
        let cls_head = Linear::new(&mut params, "cls", cls_in, 2, true, &mut rng);
        let w_delta = params.add("w_delta", normal_init(&mut rng, 2, d, 0.02));
        let dec_layers = (0..config.n_layers)
            .map(|i| DecoderLayer::new(&mut params, &format!("dec{i}"), d, config.n_heads, &mut rng))
            .collect();
        Ok(SelectorModel {
            config,
            params,
            encoder,
            enc_layers,
            dec_layers,
            input_proj,
            cls_head,
            w_delta,
            enc_pos,
            dec_pos,
        })
    }

    fn check_m(&self, sample: &Sample) -> Result<usize> {
        let m = sample.n_sentences();
        if m == 0 {
            return Err(KcsError::Data(format!("sample {} has an empty context", sample.id)));
        }
        if m > self.config.max_sentences {
            return Err(KcsError::Data(format!(
                "sample {} has {m} sentences, above max_sentences {}",
                sample.id, self.config.max_sentences
            )));
        }
        Ok(m)
    }

    /// Context half of the forward pass: H, classifier logits, Z and the
    /// infused cross-attention keys.
    fn context_nodes(
        &self,
        g: &mut Graph,
        x: NodeId,
        x_a: NodeId,
        m: usize,
    ) -> (NodeId, NodeId, NodeId, NodeId) {
        let mut h = match &self.input_proj {
            Some(proj) => {
                let xa_rows = g.tape.broadcast_row(x_a, m);
                let cat = g.tape.concat_cols(&[x, xa_rows]);
                proj.forward(g, cat)
            }
            None => x,
        };
        if self.config.use_positions {
            let pos = g.param(self.enc_pos);
            let pos_m = g.tape.gather_rows(pos, &(0..m).collect::<Vec<_>>());
            h = g.tape.add(h, pos_m);
        }
        let allowed = Array2::from_elem((m, m), true);
        for layer in &self.enc_layers {
            h = layer.forward(g, h, &allowed);
        }
        let cls_in = match self.config.concat {
            ConcatMode::Post => {
                let xa_rows = g.tape.broadcast_row(x_a, m);
                g.tape.concat_cols(&[h, xa_rows])
            }
            ConcatMode::Pre => h,
        };
        let cls_logits = self.cls_head.forward(g, cls_in);
        let z = g.tape.softmax_rows_masked(cls_logits, &Array2::from_elem((m, 2), true));
        let k_tilde = match self.config.infusion {
            Infusion::Key => {
                let w = g.param(self.w_delta);
                let shift = g.tape.matmul(z, w);
                g.tape.add(h, shift)
            }
            Infusion::None => h,
        };
        (h, cls_logits, z, k_tilde)
    }

    /// Causal decoder over the prefix rows; output row t is the prediction
    /// representation after consuming prefix positions 0..=t.
    fn decoder_nodes(
        &self,
        g: &mut Graph,
        prefix: NodeId,
        k_tilde: NodeId,
        h: NodeId,
        m: usize,
        k_len: usize,
    ) -> NodeId {
        let mut e = prefix;
        if self.config.use_positions {
            let pos = g.param(self.dec_pos);
            let pos_k = g.tape.gather_rows(pos, &(0..k_len).collect::<Vec<_>>());
            e = g.tape.add(e, pos_k);
        }
        let self_allowed = causal_mask(k_len);
        let cross_allowed = Array2::from_elem((k_len, m), true);
        for layer in &self.dec_layers {
            e = layer.forward(g, e, k_tilde, h, &self_allowed, &cross_allowed);
        }
        e
    }

    /// Temperature-scaled similarity of each prediction row against every
    /// sentence latent.
    fn mi_logits(&self, g: &mut Graph, e: NodeId, x: NodeId) -> NodeId {
        let scores = match self.config.mi_fn {
            MiFn::Cosine => {
                let en = g.tape.normalize_rows(e, 1e-12);
                let xn = g.tape.normalize_rows(x, 1e-12);
                let xt = g.tape.transpose(xn);
                g.tape.matmul(en, xt)
            }
            MiFn::Dot => {
                let xt = g.tape.transpose(x);
                g.tape.matmul(e, xt)
            }
        };
        g.tape.scale(scores, 1.0 / self.config.temperature)
    }

    fn gold_indices(&self, sample: &Sample, gold: &[SentenceRef]) -> Result<Vec<usize>> {
        if gold.is_empty() {
            return Err(KcsError::Data(format!("sample {}: empty gold composition", sample.id)));
        }
        let m = sample.n_sentences();
        gold.iter()
            .map(|&r| {
                if r.doc_idx >= sample.documents.len()
                    || r.sent_idx >= sample.documents[r.doc_idx].sentences.len()
                {
                    return Err(KcsError::Data(format!(
                        "sample {}: gold ref ({}, {}) outside context of {m} sentences",
                        sample.id, r.doc_idx, r.sent_idx
                    )));
                }
                Ok(sample.global_index(r))
            })
            .collect()
    }

    /// Recording forward pass, teacher-forced on `gold`. The prefix at step
    /// k is the answer followed by gold selections before k.
    pub fn forward_train<'a>(
        &'a self,
        sample: &Sample,
        gold: &[SentenceRef],
        dropout_rng: Option<ChaCha12Rng>,
    ) -> Result<(Graph<'a>, TrainNodes)> {
        let m = self.check_m(sample)?;
        let gold_idx = self.gold_indices(sample, gold)?;
        let mut g = Graph::new(&self.params);
        if let Some(rng) = dropout_rng {
            g = g.with_dropout(self.config.dropout, rng);
        }
        let (x, x_a, flags) = self.encoder.encode_sample_graph(&mut g, &self.params, sample)?;
        let (h, cls_logits, z, k_tilde) = self.context_nodes(&mut g, x, x_a, m);
        // Prefix rows: x_a then the latents of gold selections 0..K-1.
        let k_steps = gold_idx.len();
        let mut prefix_parts = vec![x_a];
        if k_steps > 1 {
            prefix_parts.push(g.tape.gather_rows(x, &gold_idx[..k_steps - 1]));
        }
        let prefix = g.tape.concat_rows(&prefix_parts);
        let e = self.decoder_nodes(&mut g, prefix, k_tilde, h, m, k_steps);
        let logits = self.mi_logits(&mut g, e, x);
        let nodes =
            TrainNodes { x, x_a, h, cls_logits, z, k_tilde, e, logits, gold_idx, m, flags };
        Ok((g, nodes))
    }

    /// Deterministic teacher-forced forward pass (no dropout), returning
    /// plain matrices.
    pub fn forward_teacher_forced(
        &self,
        sample: &Sample,
        gold: &[SentenceRef],
    ) -> Result<SelectorForward> {
        let m = self.check_m(sample)?;
        let gold_idx = self.gold_indices(sample, gold)?;
        let mut g = Graph::eval(&self.params);
        let (x, x_a, _) = self.encoder.encode_sample_graph(&mut g, &self.params, sample)?;
        let (h, _, z, k_tilde) = self.context_nodes(&mut g, x, x_a, m);
        let k_steps = gold_idx.len();
        let mut prefix_parts = vec![x_a];
        if k_steps > 1 {
            prefix_parts.push(g.tape.gather_rows(x, &gold_idx[..k_steps - 1]));
        }
        let prefix = g.tape.concat_rows(&prefix_parts);
        let e = self.decoder_nodes(&mut g, prefix, k_tilde, h, m, k_steps);
        let logits = self.mi_logits(&mut g, e, x);
        Ok(SelectorForward {
            h: g.tape.value(h).clone(),
            z: g.tape.value(z).clone(),
            k_tilde: g.tape.value(k_tilde).clone(),
            e: g.tape.value(e).clone(),
            logits: g.tape.value(logits).clone(),
            gold_idx,
        })
    }

    /// Run the context half once per sample; decode steps reuse the result.
    pub fn encode_context(&self, sample: &Sample) -> Result<EncodedContext> {
        let m = self.check_m(sample)?;
        let mut g = Graph::eval(&self.params);
        let (x, x_a, flags) = self.encoder.encode_sample_graph(&mut g, &self.params, sample)?;
        let (h, _, z, k_tilde) = self.context_nodes(&mut g, x, x_a, m);
        Ok(EncodedContext {
            m,
            x: g.tape.value(x).clone(),
            x_a: g.tape.value(x_a).clone(),
            h: g.tape.value(h).clone(),
            z: g.tape.value(z).clone(),
            k_tilde: g.tape.value(k_tilde).clone(),
            flags,
        })
    }

    /// Prediction representation after consuming the answer plus the given
    /// selected prefix (possibly empty).
    pub fn prefix_representation(
        &self,
        sample: &Sample,
        ctx: &EncodedContext,
        prefix: &[SentenceRef],
    ) -> Result<Vec<f64>> {
        let idx = prefix.iter().map(|&r| sample.global_index(r)).collect::<Vec<_>>();
        let k_len = idx.len() + 1;
        let mut rows = Array2::zeros((k_len, self.config.d));
        rows.row_mut(0).assign(&ctx.x_a.index_axis(Axis(0), 0));
        for (t, &i) in idx.iter().enumerate() {
            rows.row_mut(t + 1).assign(&ctx.x.index_axis(Axis(0), i));
        }
        let mut g = Graph::eval(&self.params);
        let prefix_node = g.tape.leaf(rows);
        let k_tilde = g.tape.leaf(ctx.k_tilde.clone());
        let h = g.tape.leaf(ctx.h.clone());
        let e = self.decoder_nodes(&mut g, prefix_node, k_tilde, h, ctx.m, k_len);
        Ok(g.tape.value(e).row(k_len - 1).to_vec())
    }

    /// Distribution over candidate next sentences given a prediction
    /// representation. `selected[i]` marks already-chosen global indices,
    /// which get probability exactly 0.
    pub fn selection_distribution(
        &self,
        ctx: &EncodedContext,
        e: &[f64],
        selected: &[bool],
    ) -> Result<SelectionDistribution> {
        score_distribution(&ctx.x, e, selected, self.config.mi_fn, self.config.temperature)
    }
}

/// Softmax over MI(x_i, e)/temperature restricted to non-selected
/// sentences.
pub fn score_distribution(
    x: &Array2<f64>,
    e: &[f64],
    selected: &[bool],
    mi_fn: MiFn,
    temperature: f64,
) -> Result<SelectionDistribution> {
    let m = x.nrows();
    assert_eq!(selected.len(), m, "selected mask length must equal M");
    assert_eq!(e.len(), x.ncols(), "prediction dimension must equal d");
    if selected.iter().all(|&s| s) {
        return Err(KcsError::Data("all sentences already selected".into()));
    }
    let e_norm = e.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    let mut scores = Vec::with_capacity(m);
    for i in 0..m {
        let row = x.row(i);
        let dot: f64 = row.iter().zip(e).map(|(&a, &b)| a * b).sum();
        let s = match mi_fn {
            MiFn::Cosine => {
                let xn = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                dot / (xn * e_norm)
            }
            MiFn::Dot => dot,
        };
        scores.push(s / temperature);
    }
    let max = scores
        .iter()
        .zip(selected)
        .filter(|(_, &s)| !s)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut probs = vec![0.0; m];
    let mut denom = 0.0;
    for i in 0..m {
        if !selected[i] {
            let e = (scores[i] - max).exp();
            probs[i] = e;
            denom += e;
        }
    }
    for p in &mut probs {
        *p /= denom;
    }
    Ok(SelectionDistribution { probs })
}
