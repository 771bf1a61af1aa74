//! Parsing of HotpotQA-style distractor JSON into [`Sample`]s.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::corpus::{ContextDocument, Sample, SentenceRef};
use crate::error::{KcsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Hotpotqa,
    #[serde(rename = "2wiki")]
    TwoWiki,
}

impl std::str::FromStr for DatasetFormat {
    type Err = KcsError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "hotpotqa" | "hotpot" => Ok(DatasetFormat::Hotpotqa),
            "2wiki" | "2wikimultihopqa" => Ok(DatasetFormat::TwoWiki),
            other => Err(KcsError::Config(format!("unknown dataset format: {other}"))),
        }
    }
}

/// Raw record shape shared by HotpotQA and 2WikiMultihopQA distractor files.
/// Extra fields (`type`, `level`, `evidences`, ...) are ignored.
#[derive(Deserialize)]
struct RawRecord {
    #[serde(rename = "_id")]
    id: String,
    answer: String,
    question: String,
    /// [[title, [sentence, ...]], ...]
    context: Vec<(String, Vec<String>)>,
    /// [[title, sent_idx], ...]
    supporting_facts: Vec<(String, usize)>,
}

/// Counts of records dropped during loading, by reason.
#[derive(Debug, Default, Clone)]
pub struct LoadReport {
    pub loaded: usize,
    pub dropped_unresolvable: usize,
    pub dropped_duplicate_title: usize,
}

impl LoadReport {
    pub fn dropped(&self) -> usize {
        self.dropped_unresolvable + self.dropped_duplicate_title
    }
}

/// Load a dataset file (a JSON array of records). Records whose supporting
/// facts cannot be resolved against the context are dropped and counted.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<(Vec<Sample>, LoadReport)> {
    let bytes = std::fs::read(path).map_err(|e| KcsError::io(path, e))?;
    let raw: Vec<serde_json::Value> = serde_json::from_slice(&bytes)
        .map_err(|e| KcsError::Data(format!("malformed JSON in {}: {e}", path.display())))?;
    parse_records(raw, format)
}

/// Parse already-deserialized records. Split out of [`load_dataset`] so the
/// JSONL interchange path and tests can share it.
pub fn parse_records(
    raw: Vec<serde_json::Value>,
    _format: DatasetFormat,
) -> Result<(Vec<Sample>, LoadReport)> {
    let mut samples = Vec::with_capacity(raw.len());
    let mut report = LoadReport::default();

    for (index, value) in raw.into_iter().enumerate() {
        let record: RawRecord =
            serde_json::from_value(value).map_err(|e| KcsError::Parse {
                index,
                message: e.to_string(),
            })?;

        let documents: Vec<ContextDocument> = record
            .context
            .into_iter()
            .map(|(title, sentences)| ContextDocument { title, sentences })
            .collect();

        let mut title_to_doc: HashMap<&str, usize> = HashMap::new();
        let mut duplicate_title = false;
        for (i, doc) in documents.iter().enumerate() {
            if title_to_doc.insert(doc.title.as_str(), i).is_some() {
                duplicate_title = true;
            }
        }
        if duplicate_title {
            report.dropped_duplicate_title += 1;
            log::warn!("record {index} ({}): duplicate document titles, dropped", record.id);
            continue;
        }

        let mut facts = Vec::with_capacity(record.supporting_facts.len());
        let mut resolvable = true;
        for (title, sent_idx) in &record.supporting_facts {
            match title_to_doc.get(title.as_str()) {
                Some(&doc_idx) if *sent_idx < documents[doc_idx].sentences.len() => {
                    facts.push(SentenceRef::new(doc_idx, *sent_idx));
                }
                _ => {
                    resolvable = false;
                    break;
                }
            }
        }
        if !resolvable || facts.is_empty() {
            report.dropped_unresolvable += 1;
            log::warn!("record {index} ({}): unresolvable supporting fact, dropped", record.id);
            continue;
        }

        samples.push(Sample::new(
            record.id,
            record.answer,
            record.question,
            documents,
            facts,
        )?);
        report.loaded += 1;
    }

    Ok((samples, report))
}
