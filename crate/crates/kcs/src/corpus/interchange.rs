//! JSONL interchange format: one sample per line with fields
//! id/answer/question/documents/supporting_facts/composition. Streamable,
//! diff-able, and byte-stable under load -> serialize -> load.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{ContextDocument, GoldComposition, Sample, SentenceRef};
use crate::error::{KcsError, Result};

#[derive(Serialize, Deserialize)]
struct InterchangeRecord {
    id: String,
    answer: String,
    question: String,
    documents: Vec<ContextDocument>,
    supporting_facts: Vec<SentenceRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    composition: Option<GoldComposition>,
}

impl From<&Sample> for InterchangeRecord {
    fn from(s: &Sample) -> Self {
        InterchangeRecord {
            id: s.id.clone(),
            answer: s.answer.clone(),
            question: s.gold_question.clone(),
            documents: s.documents.clone(),
            supporting_facts: s.supporting_facts.clone(),
            composition: s.gold_composition.clone(),
        }
    }
}

pub fn write_jsonl(path: &Path, samples: &[Sample]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| KcsError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for sample in samples {
        let record = InterchangeRecord::from(sample);
        let line = serde_json::to_string(&record)
            .map_err(|e| KcsError::Data(format!("serialize {}: {e}", sample.id)))?;
        writeln!(w, "{line}").map_err(|e| KcsError::io(path, e))?;
    }
    w.flush().map_err(|e| KcsError::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<Sample>> {
    let file = std::fs::File::open(path).map_err(|e| KcsError::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut samples = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| KcsError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: InterchangeRecord =
            serde_json::from_str(&line).map_err(|e| KcsError::Parse {
                index,
                message: e.to_string(),
            })?;
        let mut sample = Sample::new(
            record.id,
            record.answer,
            record.question,
            record.documents,
            record.supporting_facts,
        )?;
        sample.gold_composition = record.composition;
        samples.push(sample);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::tiny_sample;
    use crate::corpus::{build_gold_composition, Arrangement};

    #[test]
    fn jsonl_round_trips_bit_identically() {
        let mut sample = tiny_sample();
        sample.gold_composition =
            Some(build_gold_composition(&sample, Arrangement::Document, 0).unwrap().0);
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("a.jsonl");
        let second = dir.path().join("b.jsonl");

        write_jsonl(&first, &[sample]).unwrap();
        let loaded = read_jsonl(&first).unwrap();
        write_jsonl(&second, &loaded).unwrap();

        let a = std::fs::read(&first).unwrap();
        let b = std::fs::read(&second).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn derived_fields_are_recomputed_on_load() {
        let sample = tiny_sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        write_jsonl(&path, &[sample.clone()]).unwrap();
        let loaded = read_jsonl(&path).unwrap();
        assert_eq!(loaded[0].labels, sample.labels);
        assert_eq!(loaded[0].answer_sentence, sample.answer_sentence);
    }
}
