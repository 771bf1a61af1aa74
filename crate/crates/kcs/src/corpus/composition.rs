//! Gold knowledge compositions: orderings of a sample's supporting facts
//! used as the sequence-prediction target during training.

use serde::{Deserialize, Serialize};

use crate::corpus::{Sample, SentenceRef};
use crate::error::{KcsError, Result};
use crate::rng::derive_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arrangement {
    /// Dataset order of the supporting facts.
    Original,
    /// Re-randomized per epoch; the caller supplies the epoch seed.
    Shuffle,
    /// Contextual order: (doc_idx, sent_idx).
    Sorted,
    /// Consecutive in-document sentences grouped, answer cluster first.
    Cluster,
    /// Cluster order truncated to at most 2 sentences.
    Cropping,
    /// Answer document first, split at the answer sentence.
    Document,
}

impl std::str::FromStr for Arrangement {
    type Err = KcsError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "original" => Ok(Arrangement::Original),
            "shuffle" => Ok(Arrangement::Shuffle),
            "sorted" => Ok(Arrangement::Sorted),
            "cluster" => Ok(Arrangement::Cluster),
            "cropping" => Ok(Arrangement::Cropping),
            "document" => Ok(Arrangement::Document),
            other => Err(KcsError::Config(format!("unknown arrangement: {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldComposition {
    pub arrangement: Arrangement,
    pub refs: Vec<SentenceRef>,
}

/// An ordered selection of K context sentences conditioned on an answer
/// (the answer acts as step zero of the sequence).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeComposition {
    pub answer: String,
    pub refs: Vec<SentenceRef>,
}

impl KnowledgeComposition {
    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }
}

/// Whether the arrangement rule applied cleanly or fell back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositionFlag {
    Clean,
    /// `document` arrangement could not locate the answer in any
    /// supporting-fact sentence; fell back to contextual order.
    AnswerNotFound,
}

/// Order the sample's supporting facts per the arrangement. `seed` is only
/// consumed by [`Arrangement::Shuffle`], which mixes it with the sample id
/// so epochs reshuffle but parallel workers stay deterministic.
pub fn build_gold_composition(
    sample: &Sample,
    arrangement: Arrangement,
    seed: u64,
) -> Result<(GoldComposition, CompositionFlag)> {
    if sample.supporting_facts.is_empty() {
        return Err(KcsError::Data(format!(
            "sample {}: no supporting facts to compose",
            sample.id
        )));
    }

    let mut flag = CompositionFlag::Clean;
    let refs = match arrangement {
        Arrangement::Original => sample.supporting_facts.clone(),
        Arrangement::Shuffle => {
            let mut refs = sorted_facts(sample);
            let mut rng = derive_rng(seed, &["shuffle", &sample.id]);
            use rand::seq::SliceRandom;
            refs.shuffle(&mut rng);
            refs
        }
        Arrangement::Sorted => sorted_facts(sample),
        Arrangement::Cluster => cluster_order(sample),
        Arrangement::Cropping => {
            let mut refs = cluster_order(sample);
            refs.truncate(2);
            refs
        }
        Arrangement::Document => match sample.answer_sentence {
            Some(ans) => document_order(sample, ans),
            None => {
                flag = CompositionFlag::AnswerNotFound;
                sorted_facts(sample)
            }
        },
    };

    Ok((GoldComposition { arrangement, refs }, flag))
}

fn sorted_facts(sample: &Sample) -> Vec<SentenceRef> {
    let mut refs = sample.supporting_facts.clone();
    refs.sort();
    refs
}

/// Group contextually-sorted facts into runs of consecutive sentence
/// indices within one document; put the answer-containing cluster first,
/// the rest in contextual order.
fn cluster_order(sample: &Sample) -> Vec<SentenceRef> {
    let sorted = sorted_facts(sample);
    let mut clusters: Vec<Vec<SentenceRef>> = Vec::new();
    for r in sorted {
        match clusters.last_mut() {
            Some(cluster) => {
                let last = *cluster.last().unwrap();
                if last.doc_idx == r.doc_idx && last.sent_idx + 1 == r.sent_idx {
                    cluster.push(r);
                } else {
                    clusters.push(vec![r]);
                }
            }
            None => clusters.push(vec![r]),
        }
    }
    if let Some(ans) = sample.answer_sentence {
        if let Some(pos) = clusters.iter().position(|c| c.contains(&ans)) {
            let answer_cluster = clusters.remove(pos);
            clusters.insert(0, answer_cluster);
        }
    }
    clusters.into_iter().flatten().collect()
}

/// Answer document's facts first, split at the answer sentence into two
/// contextually-ordered runs with the answer's run leading, then the
/// remaining documents' facts in contextual order.
fn document_order(sample: &Sample, ans: SentenceRef) -> Vec<SentenceRef> {
    let sorted = sorted_facts(sample);
    let mut at_or_after = Vec::new();
    let mut before = Vec::new();
    let mut others = Vec::new();
    for r in sorted {
        if r.doc_idx == ans.doc_idx {
            if r.sent_idx >= ans.sent_idx {
                at_or_after.push(r);
            } else {
                before.push(r);
            }
        } else {
            others.push(r);
        }
    }
    at_or_after.extend(before);
    at_or_after.extend(others);
    at_or_after
}
