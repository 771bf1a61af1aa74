//! Sentence-graph construction and the random-walk reference selector.
//!
//! Nodes are a sample's context sentences. Edges come from either shared
//! surface entities (capitalized token spans and document-title mentions)
//! or embedding cosine similarity above a threshold. Selection walks the
//! graph from an answer-bearing sentence.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{KnowledgeComposition, Sample, SentenceRef};
use crate::error::{KcsError, Result};
use crate::rng::derive_rng;
use crate::text::contains_ci;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMode {
    Entity,
    Similarity,
}

/// Undirected sentence graph as sorted adjacency lists (no self-loops).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceGraph {
    pub adj: Vec<Vec<usize>>,
}

impl SentenceGraph {
    fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for neighbors in &mut adj {
            neighbors.sort_unstable();
            neighbors.dedup();
        }
        SentenceGraph { adj }
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(|n| n.len()).sum::<usize>() / 2
    }

    pub fn is_edgeless(&self) -> bool {
        self.n_edges() == 0
    }
}

/// Cased alphanumeric tokens (the cased twin of [`crate::text::tokenize`]),
/// each flagged when punctuation — not just whitespace — separates it from
/// the preceding token, so entity spans can break at commas and periods.
fn cased_tokens(text: &str) -> Vec<(String, bool)> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut cur_after_punct = false;
    let mut punct_seen = false;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if cur.is_empty() {
                cur_after_punct = punct_seen;
                punct_seen = false;
            }
            cur.push(ch);
        } else {
            if !cur.is_empty() {
                tokens.push((std::mem::take(&mut cur), cur_after_punct));
            }
            if !ch.is_whitespace() {
                punct_seen = true;
            }
        }
    }
    if !cur.is_empty() {
        tokens.push((cur, cur_after_punct));
    }
    tokens
}

/// Surface entities of one sentence, lowercased for comparison:
/// - every capitalized token except the sentence-initial one (English
///   capitalizes the first word regardless of entityhood);
/// - every maximal run of two or more capitalized tokens, as one span;
/// - any document title the sentence mentions.
///
/// The single-token entries make matching robust when a sentence-initial
/// word glues onto a following name ("Later Marie Curie..." still shares
/// "marie"/"curie" with "Marie Curie was...").
pub fn sentence_entities(sentence: &str, titles: &[&str]) -> BTreeSet<String> {
    fn flush_run(run: &mut Vec<&str>, entities: &mut BTreeSet<String>) {
        if run.len() >= 2 {
            entities.insert(run.join(" ").to_lowercase());
        }
        run.clear();
    }
    let tokens = cased_tokens(sentence);
    let mut entities = BTreeSet::new();
    let mut run: Vec<&str> = Vec::new();
    for (idx, (tok, after_punct)) in tokens.iter().enumerate() {
        let capitalized = tok.chars().next().is_some_and(|c| c.is_uppercase());
        if capitalized {
            if *after_punct {
                flush_run(&mut run, &mut entities);
            }
            if idx > 0 {
                entities.insert(tok.to_lowercase());
            }
            run.push(tok);
        } else {
            flush_run(&mut run, &mut entities);
        }
    }
    flush_run(&mut run, &mut entities);
    for title in titles {
        if contains_ci(sentence, title) {
            entities.insert(title.to_lowercase());
        }
    }
    entities
}

/// Edge (i, j) iff sentences i and j share at least one surface entity.
pub fn entity_graph(sample: &Sample) -> SentenceGraph {
    let titles: Vec<&str> = sample.documents.iter().map(|d| d.title.as_str()).collect();
    let entities: Vec<BTreeSet<String>> = sample
        .sentences()
        .map(|(_, text)| sentence_entities(text, &titles))
        .collect();
    let mut edges = Vec::new();
    for i in 0..entities.len() {
        for j in (i + 1)..entities.len() {
            if !entities[i].is_disjoint(&entities[j]) {
                edges.push((i, j));
            }
        }
    }
    SentenceGraph::from_edges(entities.len(), &edges)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Edge (i, j) iff cosine(e_i, e_j) exceeds `threshold`. Zero-norm
/// vectors have no defined direction and never connect.
pub fn similarity_graph(embeddings: &[Vec<f64>], threshold: f64) -> Result<SentenceGraph> {
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(KcsError::Config(format!(
            "similarity threshold must lie in [-1, 1], got {threshold}"
        )));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut edges = Vec::new();
    for i in 0..embeddings.len() {
        for j in (i + 1)..embeddings.len() {
            if norm(&embeddings[i]) == 0.0 || norm(&embeddings[j]) == 0.0 {
                continue;
            }
            if cosine(&embeddings[i], &embeddings[j]) > threshold {
                edges.push((i, j));
            }
        }
    }
    Ok(SentenceGraph::from_edges(embeddings.len(), &edges))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WalkFlags {
    /// No sentence contained the answer; the walk started anywhere.
    pub random_start: bool,
    /// The walk ran out of reachable nodes and filled with uniform draws.
    pub degenerate: bool,
}

/// One completed walk, with per-step selection odds for trace emission.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkTrace {
    pub refs: Vec<SentenceRef>,
    /// Uniform probability of each chosen node among that step's candidates.
    pub step_probs: Vec<(SentenceRef, f64)>,
    /// Candidate-pool size at each step.
    pub candidate_counts: Vec<usize>,
    pub flags: WalkFlags,
}

/// Random walk of up to K nodes. Starts from a uniformly chosen
/// answer-bearing sentence (uniform over all sentences when none contains
/// the answer, flagged). Each step moves to a uniform unvisited neighbor;
/// at a dead end the step restarts from a uniformly chosen visited node
/// that still has unvisited neighbors; when none exists the walk is
/// degenerate and fills from the unvisited remainder uniformly.
pub fn walk(graph: &SentenceGraph, sample: &Sample, k: usize, seed: u64) -> Result<WalkTrace> {
    let m = sample.n_sentences();
    if m == 0 {
        return Err(KcsError::Data(format!("sample {} has no sentences", sample.id)));
    }
    assert_eq!(graph.n_nodes(), m, "graph must cover every sentence");
    let mut rng = derive_rng(seed, &["graph-walk", &sample.id]);
    let mut flags = WalkFlags::default();

    let starts: Vec<usize> = sample
        .sentences()
        .enumerate()
        .filter(|(_, (_, text))| contains_ci(text, &sample.answer))
        .map(|(i, _)| i)
        .collect();
    let (start, start_pool) = if starts.is_empty() {
        flags.random_start = true;
        (rng.random_range(0..m), m)
    } else {
        (starts[rng.random_range(0..starts.len())], starts.len())
    };

    let mut visited = vec![start];
    let mut step_probs = vec![(sample.ref_at(start), 1.0 / start_pool as f64)];
    let mut candidate_counts = vec![start_pool];
    let mut current = start;
    let take = k.min(m);
    while visited.len() < take {
        let unvisited_neighbors = |node: usize| -> Vec<usize> {
            graph.adj[node].iter().copied().filter(|n| !visited.contains(n)).collect()
        };
        let mut candidates = unvisited_neighbors(current);
        if candidates.is_empty() {
            let holders: Vec<usize> = visited
                .iter()
                .copied()
                .filter(|&v| !unvisited_neighbors(v).is_empty())
                .collect();
            match holders.len() {
                0 => {
                    // Nothing reachable is left: uniform fill, flagged.
                    flags.degenerate = true;
                    let pool: Vec<usize> =
                        (0..m).filter(|i| !visited.contains(i)).collect();
                    let pick = pool[rng.random_range(0..pool.len())];
                    step_probs.push((sample.ref_at(pick), 1.0 / pool.len() as f64));
                    candidate_counts.push(pool.len());
                    visited.push(pick);
                    current = pick;
                    continue;
                }
                n => current = holders[rng.random_range(0..n)],
            }
            candidates = unvisited_neighbors(current);
        }
        let pick = candidates[rng.random_range(0..candidates.len())];
        step_probs.push((sample.ref_at(pick), 1.0 / candidates.len() as f64));
        candidate_counts.push(candidates.len());
        visited.push(pick);
        current = pick;
    }

    Ok(WalkTrace {
        refs: visited.iter().map(|&i| sample.ref_at(i)).collect(),
        step_probs,
        candidate_counts,
        flags,
    })
}

/// Entity-mode convenience wrapper: build the graph and walk it.
pub fn graph_walk(
    sample: &Sample,
    k: usize,
    mode: GraphMode,
    seed: u64,
    embeddings: Option<&[Vec<f64>]>,
    threshold: f64,
) -> Result<(KnowledgeComposition, WalkFlags)> {
    let graph = match mode {
        GraphMode::Entity => entity_graph(sample),
        GraphMode::Similarity => {
            let embeds = embeddings.ok_or_else(|| {
                KcsError::Config("similarity-mode walk requires sentence embeddings".into())
            })?;
            similarity_graph(embeds, threshold)?
        }
    };
    let trace = walk(&graph, sample, k, seed)?;
    Ok((
        KnowledgeComposition { answer: sample.answer.clone(), refs: trace.refs.clone() },
        trace.flags,
    ))
}
