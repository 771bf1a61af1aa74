//! Evaluation metrics: selection P/R/F1@K against supporting facts,
//! pairwise BLEU over generated question sets (lower = more diverse), and
//! SQuAD-style answer EM/F1.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::SentenceRef;
use crate::error::{KcsError, Result};
use crate::text::ws_tokens;

/// Per-K corpus selection metrics, in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// K -> (precision, recall, f1), each macro-averaged x 100.
    pub per_k: BTreeMap<usize, (f64, f64, f64)>,
    pub n_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub pairwise_bleu: f64,
    pub n_questions_per_sample: usize,
}

/// Set-overlap precision/recall/F1 of a predicted composition against the
/// full supporting-fact set. F1 is 0 when the overlap is empty.
pub fn composition_prf(pred: &[SentenceRef], gold_sf: &[SentenceRef]) -> Result<(f64, f64, f64)> {
    if pred.is_empty() {
        return Err(KcsError::Data("empty predicted composition".into()));
    }
    if gold_sf.is_empty() {
        return Err(KcsError::Data("empty supporting-fact set".into()));
    }
    let pred_set: BTreeSet<SentenceRef> = pred.iter().copied().collect();
    let gold_set: BTreeSet<SentenceRef> = gold_sf.iter().copied().collect();
    let overlap = pred_set.intersection(&gold_set).count() as f64;
    let p = overlap / pred_set.len() as f64;
    let r = overlap / gold_set.len() as f64;
    let f1 = if overlap == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    Ok((p, r, f1))
}

/// Macro-average per-sample (P, R, F1) triples into percentages.
pub fn aggregate_selection(per_sample: &[(f64, f64, f64)]) -> Result<(f64, f64, f64)> {
    if per_sample.is_empty() {
        return Err(KcsError::Data("no samples to aggregate".into()));
    }
    let n = per_sample.len() as f64;
    let (mut p, mut r, mut f1) = (0.0, 0.0, 0.0);
    for &(sp, sr, sf) in per_sample {
        p += sp;
        r += sr;
        f1 += sf;
    }
    Ok((100.0 * p / n, 100.0 * r / n, 100.0 * f1 / n))
}

/// Evaluate predicted compositions at several prefix lengths K: the @K
/// prediction is the first K selections of the trace.
pub fn selection_report(
    predictions: &[(Vec<SentenceRef>, Vec<SentenceRef>)],
    ks: &[usize],
) -> Result<SelectionReport> {
    if predictions.is_empty() {
        return Err(KcsError::Data("no predictions to evaluate".into()));
    }
    let mut per_k = BTreeMap::new();
    for &k in ks {
        let mut rows = Vec::with_capacity(predictions.len());
        for (pred, gold) in predictions {
            let cut = &pred[..k.min(pred.len())];
            rows.push(composition_prf(cut, gold)?);
        }
        per_k.insert(k, aggregate_selection(&rows)?);
    }
    Ok(SelectionReport { per_k, n_samples: predictions.len() })
}

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], usize> {
    let mut counts: HashMap<&[&str], usize> = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence-level BLEU-4 of `hyp` against one reference, with add-one
/// smoothing on the n >= 2 precisions and the standard brevity penalty.
pub fn sentence_bleu(hyp: &str, reference: &str) -> f64 {
    let h = ws_tokens(hyp);
    let r = ws_tokens(reference);
    if h.is_empty() || r.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4usize {
        let hc = ngram_counts(&h, n);
        let rc = ngram_counts(&r, n);
        let total: usize = hc.values().sum();
        let matched: usize =
            hc.iter().map(|(gram, &c)| c.min(rc.get(gram).copied().unwrap_or(0))).sum();
        let (num, den) = if n == 1 {
            (matched as f64, total as f64)
        } else {
            // Add-one smoothing keeps higher orders finite on short texts.
            (matched as f64 + 1.0, total as f64 + 1.0)
        };
        if num == 0.0 || den == 0.0 {
            return 0.0;
        }
        log_sum += (num / den).ln();
    }
    let precision_term = (log_sum / 4.0).exp();
    let bp = if h.len() >= r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / h.len() as f64).exp()
    };
    bp * precision_term
}

/// Mean smoothed BLEU over all ordered pairs (i, j), i != j, x 100.
/// Lower values mean a more diverse question set.
pub fn pairwise_bleu(questions: &[String]) -> Result<f64> {
    if questions.len() < 2 {
        return Err(KcsError::Data(format!(
            "pairwise BLEU needs at least 2 questions, got {}",
            questions.len()
        )));
    }
    let n = questions.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += sentence_bleu(&questions[i], &questions[j]);
            }
        }
    }
    Ok(100.0 * total / (n * (n - 1)) as f64)
}

/// SQuAD-style answer normalization: lowercase, drop punctuation and
/// articles, collapse whitespace.
pub fn normalize_answer(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let no_punct: String =
        lowered.chars().map(|c| if c.is_alphanumeric() { c } else { ' ' }).collect();
    no_punct
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .map(|t| t.to_string())
        .collect()
}

/// Exact match plus token-multiset precision/recall/F1 over normalized
/// answers.
pub fn answer_em_f1(pred: &str, gold: &str) -> (f64, f64, f64, f64) {
    let p = normalize_answer(pred);
    let g = normalize_answer(gold);
    let em = if !p.is_empty() && p == g { 1.0 } else { 0.0 };
    if p.is_empty() || g.is_empty() {
        return (em, 0.0, 0.0, 0.0);
    }
    let mut gold_counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *gold_counts.entry(t).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for t in &p {
        if let Some(c) = gold_counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return (em, 0.0, 0.0, 0.0);
    }
    let precision = overlap as f64 / p.len() as f64;
    let recall = overlap as f64 / g.len() as f64;
    let f1 = 2.0 * precision * recall / (precision + recall);
    (em, precision, recall, f1)
}
