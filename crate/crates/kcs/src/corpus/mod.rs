//! Dataset ingestion, sentence indexing, gold-composition construction,
//! and train/dev/test splitting.

mod composition;
mod interchange;
mod load;
mod splits;

pub use composition::{
    build_gold_composition, Arrangement, CompositionFlag, GoldComposition, KnowledgeComposition,
};
pub use interchange::{read_jsonl, write_jsonl};
pub use load::{load_dataset, parse_records, DatasetFormat, LoadReport};
pub use splits::{filter_answerable, make_splits, DatasetSplit, DEV_SIZE};

use serde::{Deserialize, Serialize};

use crate::error::{KcsError, Result};
use crate::text::contains_ci;

/// Stable address of a sentence inside a sample's multi-document context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "(usize, usize)", from = "(usize, usize)")]
pub struct SentenceRef {
    pub doc_idx: usize,
    pub sent_idx: usize,
}

impl SentenceRef {
    pub fn new(doc_idx: usize, sent_idx: usize) -> Self {
        Self { doc_idx, sent_idx }
    }
}

impl From<SentenceRef> for (usize, usize) {
    fn from(r: SentenceRef) -> Self {
        (r.doc_idx, r.sent_idx)
    }
}

impl From<(usize, usize)> for SentenceRef {
    fn from((doc_idx, sent_idx): (usize, usize)) -> Self {
        Self { doc_idx, sent_idx }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextDocument {
    pub title: String,
    pub sentences: Vec<String>,
}

/// One QA instance: answer, gold question, multi-document context and the
/// supporting-fact sentences annotated for the gold question.
///
/// `supporting_facts` keeps the dataset's listed order (needed by the
/// `original` arrangement) but is a set logically: refs are distinct.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub answer: String,
    pub gold_question: String,
    pub documents: Vec<ContextDocument>,
    pub supporting_facts: Vec<SentenceRef>,
    /// Earliest supporting-fact sentence containing the answer, if any.
    pub answer_sentence: Option<SentenceRef>,
    /// labels[i] = 1 iff context sentence i (global order) is a supporting fact.
    pub labels: Vec<u8>,
    pub gold_composition: Option<GoldComposition>,
    /// Cumulative sentence counts per document; maps refs to global indices.
    doc_offsets: Vec<usize>,
}

impl Sample {
    /// Validates refs, derives labels, offsets and the answer sentence.
    pub fn new(
        id: String,
        answer: String,
        gold_question: String,
        documents: Vec<ContextDocument>,
        supporting_facts: Vec<SentenceRef>,
    ) -> Result<Self> {
        let mut doc_offsets = Vec::with_capacity(documents.len());
        let mut total = 0usize;
        for doc in &documents {
            doc_offsets.push(total);
            total += doc.sentences.len();
        }

        let mut seen = std::collections::HashSet::new();
        let mut facts = Vec::with_capacity(supporting_facts.len());
        for r in supporting_facts {
            if r.doc_idx >= documents.len() || r.sent_idx >= documents[r.doc_idx].sentences.len() {
                return Err(KcsError::Data(format!(
                    "sample {id}: supporting fact ({}, {}) out of range",
                    r.doc_idx, r.sent_idx
                )));
            }
            if seen.insert(r) {
                facts.push(r);
            }
        }

        let mut labels = vec![0u8; total];
        for r in &facts {
            labels[doc_offsets[r.doc_idx] + r.sent_idx] = 1;
        }

        let mut sample = Sample {
            id,
            answer,
            gold_question,
            documents,
            supporting_facts: facts,
            answer_sentence: None,
            labels,
            gold_composition: None,
            doc_offsets,
        };
        sample.answer_sentence = sample.locate_answer_sentence();
        Ok(sample)
    }

    /// Total number of context sentences M.
    pub fn n_sentences(&self) -> usize {
        self.labels.len()
    }

    /// Global index of a sentence in (doc_idx, sent_idx) order.
    pub fn global_index(&self, r: SentenceRef) -> usize {
        self.doc_offsets[r.doc_idx] + r.sent_idx
    }

    /// Inverse of [`global_index`].
    pub fn ref_at(&self, global: usize) -> SentenceRef {
        let doc_idx = match self.doc_offsets.binary_search(&global) {
            Ok(i) => {
                // Offsets of empty documents collide; take the last doc
                // actually holding this index.
                let mut i = i;
                while i + 1 < self.doc_offsets.len() && self.doc_offsets[i + 1] == global {
                    i += 1;
                }
                i
            }
            Err(i) => i - 1,
        };
        SentenceRef::new(doc_idx, global - self.doc_offsets[doc_idx])
    }

    pub fn sentence(&self, r: SentenceRef) -> &str {
        &self.documents[r.doc_idx].sentences[r.sent_idx]
    }

    /// All sentences in global order.
    pub fn sentences(&self) -> impl Iterator<Item = (SentenceRef, &str)> {
        self.documents.iter().enumerate().flat_map(|(d, doc)| {
            doc.sentences
                .iter()
                .enumerate()
                .map(move |(s, text)| (SentenceRef::new(d, s), text.as_str()))
        })
    }

    pub fn is_yes_no(&self) -> bool {
        let a = self.answer.trim().to_lowercase();
        a == "yes" || a == "no"
    }

    /// Earliest (contextual order) supporting-fact sentence containing the
    /// answer as a case-insensitive substring.
    fn locate_answer_sentence(&self) -> Option<SentenceRef> {
        let mut facts: Vec<SentenceRef> = self.supporting_facts.clone();
        facts.sort();
        facts
            .into_iter()
            .find(|&r| contains_ci(self.sentence(r), &self.answer))
    }
}
