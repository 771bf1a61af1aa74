//! Greedy and sentence-level nucleus decoding over a trained selector:
//! at each of K steps the selector yields a distribution over remaining
//! sentences; nucleus decoding truncates it to the smallest top-p mass,
//! rescales, and samples, producing N_q diverse compositions per sample.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{KnowledgeComposition, Sample, SentenceRef};
use crate::error::{KcsError, Result};
use crate::rng::derive_rng;
use crate::selector::{SelectionDistribution, SelectorModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeStrategy {
    Greedy,
    Nucleus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeConfig {
    pub strategy: DecodeStrategy,
    /// Nucleus mass threshold p.
    pub top_p: f64,
    /// Composition length K.
    pub k: usize,
    /// Number of sampled compositions per sample.
    pub n_q: usize,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { strategy: DecodeStrategy::Nucleus, top_p: 0.95, k: 3, n_q: 5, seed: 0 }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(KcsError::Config(format!(
                "top_p must lie in (0, 1], got {}",
                self.top_p
            )));
        }
        if self.k == 0 {
            return Err(KcsError::Config("decode k must be positive".into()));
        }
        if self.n_q == 0 {
            return Err(KcsError::Config("decode n_q must be positive".into()));
        }
        Ok(())
    }
}

/// One decoded composition with its per-step sampling evidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionTrace {
    pub sample_id: String,
    pub draw_idx: usize,
    pub composition: KnowledgeComposition,
    /// The sentence chosen at each step with its (rescaled) probability.
    pub step_probs: Vec<(SentenceRef, f64)>,
    /// Nucleus cutoff size at each step.
    pub nucleus_sizes: Vec<usize>,
    /// Set when K exceeded the number of available sentences.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

/// Smallest probability-descending prefix whose mass reaches `p` (ties by
/// ascending index), plus the distribution rescaled onto that prefix.
/// Zero-probability entries (already-selected positions) never enter the
/// nucleus.
pub fn top_p_truncate(dist: &SelectionDistribution, p: f64) -> (Vec<usize>, SelectionDistribution) {
    debug_assert!(p > 0.0 && p <= 1.0);
    let mut order: Vec<usize> =
        (0..dist.probs.len()).filter(|&i| dist.probs[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        dist.probs[b].partial_cmp(&dist.probs[a]).expect("finite probabilities").then(a.cmp(&b))
    });
    let mut nucleus = Vec::new();
    let mut mass = 0.0;
    for &i in &order {
        nucleus.push(i);
        mass += dist.probs[i];
        if mass >= p {
            break;
        }
    }
    let mut rescaled = vec![0.0; dist.probs.len()];
    for &i in &nucleus {
        rescaled[i] = dist.probs[i] / mass;
    }
    (nucleus, SelectionDistribution { probs: rescaled })
}

/// Draw one index from the rescaled nucleus distribution. `nucleus` must
/// be in the descending-probability order produced by [`top_p_truncate`];
/// walking it in that fixed order keeps draws platform-stable.
pub fn sample_nucleus(
    nucleus: &[usize],
    rescaled: &SelectionDistribution,
    rng: &mut impl Rng,
) -> usize {
    debug_assert!(!nucleus.is_empty());
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for &i in nucleus {
        cum += rescaled.probs[i];
        if u < cum {
            return i;
        }
    }
    *nucleus.last().expect("nucleus is non-empty")
}

fn decode_one(
    model: &SelectorModel,
    sample: &Sample,
    ctx: &crate::selector::EncodedContext,
    k: usize,
    draw_idx: usize,
    mut rng: Option<&mut rand_chacha::ChaCha12Rng>,
    top_p: f64,
) -> Result<CompositionTrace> {
    let steps = k.min(ctx.m);
    let truncated = k > ctx.m;
    let mut selected = vec![false; ctx.m];
    let mut refs: Vec<SentenceRef> = Vec::with_capacity(steps);
    let mut step_probs = Vec::with_capacity(steps);
    let mut nucleus_sizes = Vec::with_capacity(steps);
    for _ in 0..steps {
        let e = model.prefix_representation(sample, ctx, &refs)?;
        let dist = model.selection_distribution(ctx, &e, &selected)?;
        let global = match rng.as_deref_mut() {
            Some(rng) => {
                let (nucleus, rescaled) = top_p_truncate(&dist, top_p);
                nucleus_sizes.push(nucleus.len());
                let g = sample_nucleus(&nucleus, &rescaled, rng);
                step_probs.push((sample.ref_at(g), rescaled.probs[g]));
                g
            }
            None => {
                // Greedy: the argmax is the p -> 0+ nucleus of size one.
                let g = dist.argmax();
                nucleus_sizes.push(1);
                step_probs.push((sample.ref_at(g), dist.probs[g]));
                g
            }
        };
        selected[global] = true;
        refs.push(sample.ref_at(global));
    }
    Ok(CompositionTrace {
        sample_id: sample.id.clone(),
        draw_idx,
        composition: KnowledgeComposition { answer: sample.answer.clone(), refs },
        step_probs,
        nucleus_sizes,
        truncated,
    })
}

/// Deterministic argmax decoding, used for evaluation.
pub fn greedy_decode(model: &SelectorModel, sample: &Sample, k: usize) -> Result<CompositionTrace> {
    let ctx = model.encode_context(sample)?;
    decode_one(model, sample, &ctx, k, 0, None, 1.0)
}

/// N_q independent nucleus draws; draw i uses an RNG stream derived from
/// (seed, sample id, i), so results are stable under parallel scheduling.
pub fn nucleus_decode(
    model: &SelectorModel,
    sample: &Sample,
    config: &DecodeConfig,
) -> Result<Vec<CompositionTrace>> {
    config.validate()?;
    let ctx = model.encode_context(sample)?;
    let mut traces = Vec::with_capacity(config.n_q);
    for draw in 0..config.n_q {
        let mut rng = derive_rng(config.seed, &["nucleus", &sample.id, &draw.to_string()]);
        traces.push(decode_one(
            model,
            sample,
            &ctx,
            config.k,
            draw,
            Some(&mut rng),
            config.top_p,
        )?);
    }
    Ok(traces)
}

pub fn write_traces(path: &Path, traces: &[CompositionTrace]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| KcsError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for t in traces {
        let line = serde_json::to_string(t)
            .map_err(|e| KcsError::Data(format!("serializing trace: {e}")))?;
        writeln!(w, "{line}").map_err(|e| KcsError::io(path, e))?;
    }
    w.flush().map_err(|e| KcsError::io(path, e))
}

pub fn read_traces(path: &Path) -> Result<Vec<CompositionTrace>> {
    let file = fs::File::open(path).map_err(|e| KcsError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut traces = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| KcsError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: CompositionTrace = serde_json::from_str(&line).map_err(|e| KcsError::Parse {
            index: i,
            message: format!("trace line: {e}"),
        })?;
        traces.push(t);
    }
    Ok(traces)
}
