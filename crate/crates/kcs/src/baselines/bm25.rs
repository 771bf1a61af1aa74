//! Sentence-level BM25 retrieval over a sample's own context, used by the
//! lexical-retrieval reference selectors (single-shot and step-by-step).

use std::collections::{HashMap, HashSet};

use crate::corpus::{KnowledgeComposition, Sample};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.5, b: 0.75 }
    }
}

/// An inverted-statistics view of one sample's sentences. Documents are
/// individual sentences; the corpus is the sample's own context.
pub struct Bm25Index {
    params: Bm25Params,
    docs: Vec<Vec<String>>,
    df: HashMap<String, usize>,
    avgdl: f64,
}

impl Bm25Index {
    pub fn build(sentences: &[&str], params: Bm25Params) -> Self {
        let docs: Vec<Vec<String>> = sentences.iter().map(|s| tokenize(s)).collect();
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in &docs {
            let mut seen = HashSet::new();
            for t in doc {
                if seen.insert(t.as_str()) {
                    *df.entry(t.clone()).or_insert(0) += 1;
                }
            }
        }
        let total: usize = docs.iter().map(|d| d.len()).sum();
        let avgdl =
            if docs.is_empty() { 0.0 } else { total as f64 / docs.len() as f64 };
        Bm25Index { params, docs, df, avgdl }
    }

    pub fn for_sample(sample: &Sample, params: Bm25Params) -> Self {
        let sentences: Vec<&str> = sample.sentences().map(|(_, t)| t).collect();
        Self::build(&sentences, params)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Non-negative IDF: ln(1 + (N - df + 0.5) / (df + 0.5)). The classic
    /// Robertson form goes negative once a term appears in more than half
    /// the documents, which tiny per-sample corpora hit constantly.
    fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.df.get(term).copied().unwrap_or(0) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25 score of sentence `idx` against the query. Each distinct query
    /// term contributes once (query-side term frequency is ignored).
    pub fn score(&self, query: &str, idx: usize) -> f64 {
        let doc = &self.docs[idx];
        let len = doc.len() as f64;
        let mut tf: HashMap<&str, usize> = HashMap::new();
        for t in doc {
            *tf.entry(t.as_str()).or_insert(0) += 1;
        }
        let mut terms = tokenize(query);
        terms.sort();
        terms.dedup();
        let Bm25Params { k1, b } = self.params;
        terms
            .iter()
            .map(|t| {
                let f = tf.get(t.as_str()).copied().unwrap_or(0) as f64;
                if f == 0.0 {
                    return 0.0;
                }
                let norm = k1 * (1.0 - b + b * len / self.avgdl);
                self.idf(t) * f * (k1 + 1.0) / (f + norm)
            })
            .sum()
    }

    /// All sentence indices ranked by descending score, ties by ascending
    /// index so ranking is total and deterministic.
    pub fn rank(&self, query: &str) -> Vec<(usize, f64)> {
        let mut scored: Vec<(usize, f64)> =
            (0..self.docs.len()).map(|i| (i, self.score(query, i))).collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scored
    }
}

/// BM25 selection of up to K sentences conditioned on the answer.
///
/// All-at-once: one ranking against the answer, take the top K. Step by
/// step: after each pick the query grows by the retrieved sentence's text
/// and the remaining sentences are re-ranked for the next single pick.
pub fn lexical_retrieve(
    sample: &Sample,
    k: usize,
    step_by_step: bool,
    params: Bm25Params,
) -> KnowledgeComposition {
    let index = Bm25Index::for_sample(sample, params);
    let m = index.len();
    let take = k.min(m);
    let picked: Vec<usize> = if step_by_step {
        let mut query = sample.answer.clone();
        let mut chosen: Vec<usize> = Vec::with_capacity(take);
        for _ in 0..take {
            let best = index
                .rank(&query)
                .into_iter()
                .find(|(i, _)| !chosen.contains(i))
                .map(|(i, _)| i)
                .expect("fewer picks than sentences");
            chosen.push(best);
            query.push(' ');
            query.push_str(sample.sentence(sample.ref_at(best)));
        }
        chosen
    } else {
        index.rank(&sample.answer).into_iter().take(take).map(|(i, _)| i).collect()
    };
    KnowledgeComposition {
        answer: sample.answer.clone(),
        refs: picked.into_iter().map(|i| sample.ref_at(i)).collect(),
    }
}
