//! Reference selectors bracketing and contextualizing the trained model:
//! Random and MAX bounds, binary-classification top-K, BM25 lexical
//! retrieval (single-shot and step-by-step), and sentence-graph random
//! walks. Every baseline emits the same trace records as the decoder so
//! one evaluation path serves all selectors.

pub mod bm25;
pub mod cls;
pub mod graph;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bm25::{lexical_retrieve, Bm25Index, Bm25Params};
pub use cls::{cls_topk, ClsConfig, ClsTrainConfig, PairClassifier, SentenceScorer};
pub use graph::{entity_graph, graph_walk, similarity_graph, GraphMode, SentenceGraph};

use crate::corpus::{KnowledgeComposition, Sample, SentenceRef};
use crate::decoding::CompositionTrace;
use crate::encoder::{Encoder, EncoderSpec};
use crate::error::{KcsError, Result};
use crate::nn::ParamSet;
use crate::rng::derive_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Random,
    Max,
    ClsTopk,
    Bm25,
    Bm25Step,
    GraphEntity,
    GraphSimilarity,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 7] = [
        BaselineKind::Random,
        BaselineKind::Max,
        BaselineKind::ClsTopk,
        BaselineKind::Bm25,
        BaselineKind::Bm25Step,
        BaselineKind::GraphEntity,
        BaselineKind::GraphSimilarity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineKind::Random => "random",
            BaselineKind::Max => "max",
            BaselineKind::ClsTopk => "cls_topk",
            BaselineKind::Bm25 => "bm25",
            BaselineKind::Bm25Step => "bm25_step",
            BaselineKind::GraphEntity => "graph_entity",
            BaselineKind::GraphSimilarity => "graph_similarity",
        }
    }

    /// Parameter keys this kind accepts in [`BaselineSpec::params`].
    fn allowed_params(&self) -> &'static [&'static str] {
        match self {
            BaselineKind::Random | BaselineKind::Max | BaselineKind::GraphEntity => &[],
            BaselineKind::ClsTopk => &["classifier"],
            BaselineKind::Bm25 | BaselineKind::Bm25Step => &["k1", "b"],
            BaselineKind::GraphSimilarity => &["threshold"],
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = KcsError;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = BaselineKind::ALL.iter().map(|k| k.as_str()).collect();
                KcsError::Config(format!(
                    "unknown baseline kind `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// A fully specified baseline run: which selector, how many sentences,
/// the seed for the stochastic kinds, and kind-specific parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    pub k: usize,
    pub seed: u64,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

fn parse_param<T: FromStr>(
    params: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T> {
    match params.get(key) {
        None => Ok(default),
        Some(raw) => raw.parse().map_err(|_| {
            KcsError::Config(format!("baseline param `{key}` has invalid value `{raw}`"))
        }),
    }
}

impl BaselineSpec {
    pub fn new(
        kind: BaselineKind,
        k: usize,
        seed: u64,
        params: BTreeMap<String, String>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(KcsError::Config("baseline K must be at least 1".into()));
        }
        let allowed = kind.allowed_params();
        for key in params.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(KcsError::Config(format!(
                    "baseline kind `{kind}` does not accept param `{key}`"
                )));
            }
        }
        // Parse numeric params eagerly so bad values fail at construction.
        match kind {
            BaselineKind::Bm25 | BaselineKind::Bm25Step => {
                let k1: f64 = parse_param(&params, "k1", 1.5)?;
                let b: f64 = parse_param(&params, "b", 0.75)?;
                if k1 <= 0.0 || !(0.0..=1.0).contains(&b) {
                    return Err(KcsError::Config(format!(
                        "BM25 params out of range: k1={k1} (must be > 0), b={b} (must be in [0, 1])"
                    )));
                }
            }
            BaselineKind::GraphSimilarity => {
                let threshold: f64 = parse_param(&params, "threshold", 0.5)?;
                if !(-1.0..=1.0).contains(&threshold) {
                    return Err(KcsError::Config(format!(
                        "similarity threshold must lie in [-1, 1], got {threshold}"
                    )));
                }
            }
            _ => {}
        }
        Ok(BaselineSpec { kind, k, seed, params })
    }
}

/// K distinct sentences drawn uniformly without replacement.
pub fn random_select(sample: &Sample, k: usize, seed: u64) -> KnowledgeComposition {
    random_steps(sample, k, seed).0
}

fn random_steps(
    sample: &Sample,
    k: usize,
    seed: u64,
) -> (KnowledgeComposition, Vec<(SentenceRef, f64)>, Vec<usize>) {
    let m = sample.n_sentences();
    let mut rng = derive_rng(seed, &["baseline-random", &sample.id]);
    let mut pool: Vec<usize> = (0..m).collect();
    let take = k.min(m);
    let mut refs = Vec::with_capacity(take);
    let mut probs = Vec::with_capacity(take);
    let mut sizes = Vec::with_capacity(take);
    for _ in 0..take {
        let left = pool.len();
        let idx = pool.swap_remove(rand::Rng::random_range(&mut rng, 0..left));
        let r = sample.ref_at(idx);
        refs.push(r);
        probs.push((r, 1.0 / left as f64));
        sizes.push(left);
    }
    (KnowledgeComposition { answer: sample.answer.clone(), refs }, probs, sizes)
}

/// Oracle upper bound: the supporting facts themselves, in contextual
/// order, truncated to K or padded with the lexically-first non-gold
/// sentences when K exceeds the gold set.
pub fn max_oracle(sample: &Sample, k: usize) -> KnowledgeComposition {
    let mut refs: Vec<SentenceRef> = sample.supporting_facts.clone();
    refs.sort();
    refs.truncate(k);
    if refs.len() < k {
        let gold: HashSet<SentenceRef> = sample.supporting_facts.iter().copied().collect();
        let mut fillers: Vec<(&str, SentenceRef)> = sample
            .sentences()
            .filter(|(r, _)| !gold.contains(r))
            .map(|(r, t)| (t, r))
            .collect();
        fillers.sort();
        refs.extend(fillers.into_iter().take(k - refs.len()).map(|(_, r)| r));
    }
    KnowledgeComposition { answer: sample.answer.clone(), refs }
}

/// A constructed baseline, ready to run over samples. Stateless per sample.
pub struct BaselineRunner {
    pub spec: BaselineSpec,
    bm25: Bm25Params,
    threshold: f64,
    classifier: Option<PairClassifier>,
    sim_encoder: Option<(Encoder, ParamSet)>,
}

impl BaselineRunner {
    /// Build a runner. `classifier` supplies a trained model for
    /// `cls_topk` directly; otherwise the spec's `classifier` param names
    /// a checkpoint directory. `encoder_spec` is only consulted for
    /// similarity-graph embeddings.
    pub fn new(
        spec: BaselineSpec,
        encoder_spec: &EncoderSpec,
        classifier: Option<PairClassifier>,
    ) -> Result<Self> {
        let bm25 = Bm25Params {
            k1: parse_param(&spec.params, "k1", 1.5)?,
            b: parse_param(&spec.params, "b", 0.75)?,
        };
        let threshold = parse_param(&spec.params, "threshold", 0.5)?;
        let classifier = match (spec.kind, classifier) {
            (BaselineKind::ClsTopk, Some(c)) => {
                if !c.is_trained() {
                    return Err(KcsError::Config(
                        "cls_topk requires a trained classifier".into(),
                    ));
                }
                Some(c)
            }
            (BaselineKind::ClsTopk, None) => match spec.params.get("classifier") {
                Some(path) => Some(PairClassifier::load(Path::new(path))?),
                None => {
                    return Err(KcsError::Config(
                        "cls_topk requires a trained classifier: pass one in or set the \
                         `classifier` param to a checkpoint directory"
                            .into(),
                    ))
                }
            },
            _ => None,
        };
        let sim_encoder = if spec.kind == BaselineKind::GraphSimilarity {
            let mut params = ParamSet::new();
            let encoder = Encoder::new(encoder_spec.clone(), &mut params, None)?;
            Some((encoder, params))
        } else {
            None
        };
        Ok(BaselineRunner { spec, bm25, threshold, classifier, sim_encoder })
    }

    pub fn run(&self, sample: &Sample) -> Result<CompositionTrace> {
        let k = self.spec.k;
        let seed = self.spec.seed;
        let (composition, step_probs, nucleus_sizes) = match self.spec.kind {
            BaselineKind::Random => random_steps(sample, k, seed),
            BaselineKind::Max => deterministic_steps(max_oracle(sample, k)),
            BaselineKind::ClsTopk => {
                let scorer = self.classifier.as_ref().expect("validated at construction");
                deterministic_steps(cls_topk(sample, scorer, k)?)
            }
            BaselineKind::Bm25 => {
                deterministic_steps(lexical_retrieve(sample, k, false, self.bm25))
            }
            BaselineKind::Bm25Step => {
                deterministic_steps(lexical_retrieve(sample, k, true, self.bm25))
            }
            BaselineKind::GraphEntity | BaselineKind::GraphSimilarity => {
                let g = match self.spec.kind {
                    BaselineKind::GraphEntity => entity_graph(sample),
                    _ => {
                        let (encoder, params) =
                            self.sim_encoder.as_ref().expect("built at construction");
                        let mut embeds = Vec::with_capacity(sample.n_sentences());
                        for (_, text) in sample.sentences() {
                            embeds.push(encoder.encode_text(params, text)?.0);
                        }
                        similarity_graph(&embeds, self.threshold)?
                    }
                };
                let t = graph::walk(&g, sample, k, seed)?;
                if t.flags.degenerate || t.flags.random_start {
                    log::debug!(
                        "sample {}: graph walk flags random_start={} degenerate={}",
                        sample.id,
                        t.flags.random_start,
                        t.flags.degenerate
                    );
                }
                (
                    KnowledgeComposition { answer: sample.answer.clone(), refs: t.refs },
                    t.step_probs,
                    t.candidate_counts,
                )
            }
        };
        Ok(CompositionTrace {
            sample_id: sample.id.clone(),
            draw_idx: 0,
            truncated: composition.len() < k,
            composition,
            step_probs,
            nucleus_sizes,
        })
    }
}

/// Deterministic selectors pick one argmax per step: probability 1 over a
/// candidate pool of size 1, mirroring greedy decoding's trace shape.
fn deterministic_steps(
    comp: KnowledgeComposition,
) -> (KnowledgeComposition, Vec<(SentenceRef, f64)>, Vec<usize>) {
    let probs: Vec<(SentenceRef, f64)> = comp.refs.iter().map(|&r| (r, 1.0)).collect();
    let sizes = vec![1; comp.refs.len()];
    (comp, probs, sizes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ContextDocument;
    use crate::metrics::{aggregate_selection, composition_prf};

    fn sample_with(
        id: &str,
        n_sentences: usize,
        gold: &[usize],
        answer_at: usize,
    ) -> Sample {
        let sentences: Vec<String> = (0..n_sentences)
            .map(|i| {
                if i == answer_at {
                    format!("sentence {i} names Omega Point here.")
                } else if gold.contains(&i) {
                    format!("sentence {i} supports the Omega Point story.")
                } else {
                    format!("sentence {i} is ordinary noise text.")
                }
            })
            .collect();
        Sample::new(
            id.into(),
            "Omega Point".into(),
            "q?".into(),
            vec![ContextDocument { title: "T".into(), sentences }],
            gold.iter().map(|&i| SentenceRef::new(0, i)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn kind_strings_round_trip() {
        for kind in BaselineKind::ALL {
            assert_eq!(kind.as_str().parse::<BaselineKind>().unwrap(), kind);
        }
        assert!(matches!("dense".parse::<BaselineKind>(), Err(KcsError::Config(_))));
    }

    #[test]
    fn spec_rejects_bad_construction() {
        let no_params = BTreeMap::new;
        assert!(BaselineSpec::new(BaselineKind::Random, 0, 0, no_params()).is_err());
        let mut stray = no_params();
        stray.insert("k1".into(), "1.5".into());
        assert!(BaselineSpec::new(BaselineKind::Random, 2, 0, stray).is_err());
        let mut bad_b = no_params();
        bad_b.insert("b".into(), "1.5".into());
        assert!(BaselineSpec::new(BaselineKind::Bm25, 2, 0, bad_b).is_err());
        let mut not_a_number = no_params();
        not_a_number.insert("threshold".into(), "high".into());
        assert!(BaselineSpec::new(BaselineKind::GraphSimilarity, 2, 0, not_a_number).is_err());
        let mut fine = no_params();
        fine.insert("threshold".into(), "0.3".into());
        assert!(BaselineSpec::new(BaselineKind::GraphSimilarity, 2, 0, fine).is_ok());
    }

    #[test]
    fn random_select_draws_distinct_and_reproducible() {
        let sample = sample_with("r", 8, &[1, 2], 1);
        let a = random_select(&sample, 3, 42);
        let b = random_select(&sample, 3, 42);
        assert_eq!(a, b);
        let mut refs = a.refs.clone();
        refs.sort();
        refs.dedup();
        assert_eq!(refs.len(), 3);
    }

    #[test]
    fn random_select_with_k_equal_m_takes_everything() {
        let sample = sample_with("r", 4, &[0], 0);
        let comp = random_select(&sample, 4, 7);
        let mut refs = comp.refs.clone();
        refs.sort();
        assert_eq!(refs, (0..4).map(|i| SentenceRef::new(0, i)).collect::<Vec<_>>());
    }

    #[test]
    fn max_oracle_is_exact_at_gold_size() {
        let sample = sample_with("m", 6, &[2, 4], 2);
        let comp = max_oracle(&sample, 2);
        let (p, r, f1) = composition_prf(&comp.refs, &sample.supporting_facts).unwrap();
        assert_eq!((p, r, f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn max_oracle_pads_beyond_gold_with_lexically_first() {
        let sample = Sample::new(
            "pad".into(),
            "ans".into(),
            "q?".into(),
            vec![ContextDocument {
                title: "T".into(),
                sentences: vec![
                    "zebra filler.".into(),
                    "gold ans fact one.".into(),
                    "gold fact two.".into(),
                    "aardvark filler.".into(),
                ],
            }],
            vec![SentenceRef::new(0, 1), SentenceRef::new(0, 2)],
        )
        .unwrap();
        let comp = max_oracle(&sample, 3);
        // Gold first in contextual order, then "aardvark..." before "zebra...".
        assert_eq!(
            comp.refs,
            vec![SentenceRef::new(0, 1), SentenceRef::new(0, 2), SentenceRef::new(0, 3)]
        );
        let (p, r, _) = composition_prf(&comp.refs, &sample.supporting_facts).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r, 1.0);
    }

    #[test]
    fn runner_emits_decoder_shaped_traces() {
        let sample = sample_with("t", 6, &[1, 3], 1);
        for kind in [
            BaselineKind::Random,
            BaselineKind::Max,
            BaselineKind::Bm25,
            BaselineKind::Bm25Step,
            BaselineKind::GraphEntity,
            BaselineKind::GraphSimilarity,
        ] {
            let spec = BaselineSpec::new(kind, 3, 5, BTreeMap::new()).unwrap();
            let runner = BaselineRunner::new(
                spec,
                &EncoderSpec { d: 16, vocab_buckets: 64, ..Default::default() },
                None,
            )
            .unwrap();
            let trace = runner.run(&sample).unwrap();
            assert_eq!(trace.sample_id, "t");
            assert_eq!(trace.draw_idx, 0);
            assert_eq!(trace.composition.len(), 3, "{kind}");
            assert_eq!(trace.step_probs.len(), 3, "{kind}");
            assert_eq!(trace.nucleus_sizes.len(), 3, "{kind}");
            assert!(!trace.truncated);
            let mut refs = trace.composition.refs.clone();
            refs.sort();
            refs.dedup();
            assert_eq!(refs.len(), 3, "{kind}: distinct refs");
        }
    }

    #[test]
    fn runner_flags_truncation_when_k_exceeds_m() {
        let sample = sample_with("short", 2, &[0], 0);
        let spec = BaselineSpec::new(BaselineKind::Random, 5, 1, BTreeMap::new()).unwrap();
        let runner = BaselineRunner::new(spec, &EncoderSpec::default(), None).unwrap();
        let trace = runner.run(&sample).unwrap();
        assert_eq!(trace.composition.len(), 2);
        assert!(trace.truncated);
    }

    #[test]
    fn cls_runner_requires_a_classifier() {
        let spec =
            BaselineSpec::new(BaselineKind::ClsTopk, 2, 0, BTreeMap::new()).unwrap();
        match BaselineRunner::new(spec, &EncoderSpec::default(), None) {
            Err(KcsError::Config(_)) => {}
            other => panic!("expected a config error, got {:?}", other.err()),
        }
    }

    #[test]
    fn max_oracle_dominates_other_baselines() {
        let corpus: Vec<Sample> = (0..10)
            .map(|i| {
                let gold = [(i % 3) + 1, (i % 3) + 3];
                sample_with(&format!("s{i}"), 7, &gold, gold[0])
            })
            .collect();
        let encoder = EncoderSpec { d: 16, vocab_buckets: 64, ..Default::default() };
        for k in [2usize, 3] {
            let report_for = |kind: BaselineKind| {
                let spec = BaselineSpec::new(kind, k, 3, BTreeMap::new()).unwrap();
                let runner = BaselineRunner::new(spec, &encoder, None).unwrap();
                let per: Vec<(f64, f64, f64)> = corpus
                    .iter()
                    .map(|s| {
                        let t = runner.run(s).unwrap();
                        composition_prf(&t.composition.refs, &s.supporting_facts).unwrap()
                    })
                    .collect();
                aggregate_selection(&per).unwrap()
            };
            let (max_p, max_r, max_f1) = report_for(BaselineKind::Max);
            for kind in [
                BaselineKind::Random,
                BaselineKind::Bm25,
                BaselineKind::Bm25Step,
                BaselineKind::GraphEntity,
            ] {
                let (p, r, f1) = report_for(kind);
                assert!(max_p >= p && max_r >= r && max_f1 >= f1, "{kind} at K={k}");
            }
        }
    }
}
