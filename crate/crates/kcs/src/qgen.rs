//! Question generation over sampled knowledge compositions, and the
//! end-to-end dataset-augmentation pipeline: sample N_q compositions per
//! answer, turn each into a generator input, and emit one augmented
//! record per generated question.
//!
//! Two backends: a deterministic template stub (dependency-free test
//! double, also used for pipeline determinism checks) and an external
//! line-protocol command wrapping a fine-tuned seq2seq model (one input
//! line in, one question line out, per record).

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{KnowledgeComposition, Sample, SentenceRef};
use crate::decoding::{nucleus_decode, CompositionTrace, DecodeConfig};
use crate::error::{KcsError, Result};
use crate::selector::SelectorModel;
use crate::text::normalize_ws;

pub const INPUT_SEPARATOR: &str = " [SEP] ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorBackend {
    /// Deterministic question-shaped output built from the input itself.
    TemplateStub,
    /// External command speaking the line protocol; `model_id` holds the
    /// command line (whitespace-split, no shell quoting).
    Seq2seqFinetuned,
}

impl fmt::Display for GeneratorBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorBackend::TemplateStub => write!(f, "template-stub"),
            GeneratorBackend::Seq2seqFinetuned => write!(f, "seq2seq-finetuned"),
        }
    }
}

impl FromStr for GeneratorBackend {
    type Err = KcsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "template-stub" => Ok(GeneratorBackend::TemplateStub),
            "seq2seq-finetuned" => Ok(GeneratorBackend::Seq2seqFinetuned),
            other => Err(KcsError::Config(format!(
                "unknown generator backend `{other}` (expected `template-stub` or \
                 `seq2seq-finetuned`)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorSpec {
    pub backend: GeneratorBackend,
    /// For the seq2seq backend: the generator command line (for example
    /// `python3 scripts/generate_questions.py --model <dir>`). Unused by
    /// the template stub.
    pub model_id: String,
    pub max_input_tokens: usize,
    pub beam_size: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            backend: GeneratorBackend::TemplateStub,
            model_id: String::new(),
            max_input_tokens: 512,
            beam_size: 4,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.backend == GeneratorBackend::Seq2seqFinetuned && self.model_id.is_empty() {
            return Err(KcsError::Config(
                "seq2seq backend needs a generator command in model_id".into(),
            ));
        }
        if self.max_input_tokens == 0 {
            return Err(KcsError::Config("max_input_tokens must be positive".into()));
        }
        if self.beam_size == 0 {
            return Err(KcsError::Config("beam_size must be positive".into()));
        }
        Ok(())
    }
}

/// Serialize (composition, answer) for the generator: the answer, then
/// each composition sentence in composition order prefixed by its
/// document title, all separated by [`INPUT_SEPARATOR`]. Titles carry the
/// entity anchors multi-hop questions bridge through.
pub fn build_generator_input(
    composition: &KnowledgeComposition,
    answer: &str,
    sample: &Sample,
) -> Result<String> {
    if composition.is_empty() {
        return Err(KcsError::Data(format!(
            "sample {}: cannot build generator input from an empty composition",
            sample.id
        )));
    }
    let mut parts = vec![normalize_ws(answer)];
    for &r in &composition.refs {
        if r.doc_idx >= sample.documents.len()
            || r.sent_idx >= sample.documents[r.doc_idx].sentences.len()
        {
            return Err(KcsError::Data(format!(
                "sample {}: composition reference ({}, {}) does not resolve",
                sample.id, r.doc_idx, r.sent_idx
            )));
        }
        let title = normalize_ws(&sample.documents[r.doc_idx].title);
        let sentence = normalize_ws(sample.sentence(r));
        parts.push(format!("{title}: {sentence}"));
    }
    Ok(parts.join(INPUT_SEPARATOR))
}

/// Keep at most `max_tokens` whitespace tokens of the serialized input.
fn truncate_tokens(input: &str, max_tokens: usize) -> String {
    let tokens: Vec<&str> = input.split_whitespace().collect();
    if tokens.len() <= max_tokens {
        input.to_string()
    } else {
        tokens[..max_tokens].join(" ")
    }
}

/// A configured question generator. The seq2seq backend holds one child
/// process for the whole run; the stub is pure computation.
pub struct Generator {
    spec: GeneratorSpec,
    external: Option<ExternalProcess>,
}

struct ExternalProcess {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl Generator {
    pub fn new(spec: GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        let external = match spec.backend {
            GeneratorBackend::TemplateStub => None,
            GeneratorBackend::Seq2seqFinetuned => Some(Self::spawn(&spec)?),
        };
        Ok(Generator { spec, external })
    }

    fn spawn(spec: &GeneratorSpec) -> Result<ExternalProcess> {
        let mut words = spec.model_id.split_whitespace();
        let program = words.next().expect("validated non-empty");
        let mut child = Command::new(program)
            .args(words)
            .env("KCS_BEAM_SIZE", spec.beam_size.to_string())
            .env("KCS_MAX_INPUT_TOKENS", spec.max_input_tokens.to_string())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| {
                KcsError::Config(format!(
                    "generator command `{}` could not start: {e}",
                    spec.model_id
                ))
            })?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalProcess { child, stdin, stdout })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    /// One question for one serialized input.
    pub fn generate(&mut self, input: &str) -> Result<String> {
        let input = truncate_tokens(input, self.spec.max_input_tokens);
        let question = match &mut self.external {
            None => template_stub_question(&input)?,
            Some(proc) => {
                let exchange = writeln!(proc.stdin, "{input}")
                    .and_then(|_| proc.stdin.flush())
                    .and_then(|_| {
                        let mut line = String::new();
                        proc.stdout.read_line(&mut line).map(|n| (n, line))
                    });
                match exchange {
                    Ok((n, line)) if n > 0 => line.trim_end_matches(['\n', '\r']).to_string(),
                    Ok(_) => {
                        return Err(KcsError::Generation {
                            message: "generator closed its output stream".into(),
                            input,
                        })
                    }
                    Err(e) => {
                        return Err(KcsError::Generation {
                            message: format!("generator pipe failed: {e}"),
                            input,
                        })
                    }
                }
            }
        };
        if question.trim().is_empty() {
            return Err(KcsError::Generation {
                message: "generator produced an empty question".into(),
                input,
            });
        }
        Ok(question)
    }

    /// Close the backend and surface a nonzero exit as an error.
    pub fn finish(mut self) -> Result<()> {
        if let Some(mut proc) = self.external.take() {
            drop(proc.stdin);
            let status = proc.child.wait().map_err(|e| KcsError::Generation {
                message: format!("generator did not exit cleanly: {e}"),
                input: String::new(),
            })?;
            if !status.success() {
                return Err(KcsError::Generation {
                    message: format!("generator exited with {status}"),
                    input: String::new(),
                });
            }
        }
        Ok(())
    }
}

impl Drop for Generator {
    fn drop(&mut self) {
        if let Some(mut proc) = self.external.take() {
            drop(proc.stdin);
            let _ = proc.child.kill();
            let _ = proc.child.wait();
        }
    }
}

/// Deterministic question-shaped output: mentions the answer and every
/// distinct composition title, in input order.
fn template_stub_question(input: &str) -> Result<String> {
    let mut parts = input.split(INPUT_SEPARATOR.trim_end());
    let answer = parts.next().unwrap_or("").trim();
    let mut titles: Vec<&str> = Vec::new();
    let mut any_segment = false;
    for part in parts {
        any_segment = true;
        let title = part.split(':').next().unwrap_or("").trim();
        if !title.is_empty() && !titles.contains(&title) {
            titles.push(title);
        }
    }
    if answer.is_empty() || !any_segment {
        return Err(KcsError::Generation {
            message: "input lacks an answer or composition segments".into(),
            input: input.to_string(),
        });
    }
    let joined = match titles.len() {
        0 => "the given passages".to_string(),
        1 => titles[0].to_string(),
        _ => format!(
            "{} and {}",
            titles[..titles.len() - 1].join(", "),
            titles[titles.len() - 1]
        ),
    };
    Ok(format!("What connects {joined} to the answer \"{answer}\"?"))
}

/// One generated question tied back to the composition that produced it.
/// The full context for downstream QA fine-tuning is recovered by joining
/// `sample_id` against the source dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedRecord {
    pub sample_id: String,
    pub draw_idx: usize,
    pub composition_refs: Vec<SentenceRef>,
    pub composition_texts: Vec<String>,
    pub answer: String,
    pub generated_question: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub n_samples: usize,
    pub n_records: usize,
    /// Records lost to logged per-record failures; `n_records +
    /// n_failures` equals the number of attempted generations.
    pub n_failures: usize,
}

fn record_for(
    sample: &Sample,
    trace: &CompositionTrace,
    generator: &mut Generator,
) -> Result<AugmentedRecord> {
    let input = build_generator_input(&trace.composition, &sample.answer, sample)?;
    let question = generator.generate(&input)?;
    let texts = trace
        .composition
        .refs
        .iter()
        .map(|&r| sample.sentence(r).to_string())
        .collect();
    Ok(AugmentedRecord {
        sample_id: sample.id.clone(),
        draw_idx: trace.draw_idx,
        composition_refs: trace.composition.refs.clone(),
        composition_texts: texts,
        answer: sample.answer.clone(),
        generated_question: question,
    })
}

/// Generate questions for precomputed traces, in trace order. Every trace
/// must reference a sample in `samples`.
pub fn generate_records(
    samples: &[Sample],
    traces: &[CompositionTrace],
    generator: &mut Generator,
    out: &mut impl Write,
) -> Result<AugmentReport> {
    let by_id: std::collections::HashMap<&str, &Sample> =
        samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut report = AugmentReport { n_samples: samples.len(), ..Default::default() };
    for trace in traces {
        let sample = by_id.get(trace.sample_id.as_str()).copied().ok_or_else(|| {
            KcsError::Data(format!(
                "trace references unknown sample id `{}`",
                trace.sample_id
            ))
        })?;
        match record_for(sample, trace, generator) {
            Ok(record) => {
                write_record(out, &record)?;
                report.n_records += 1;
            }
            Err(e) => {
                log::warn!("sample {} draw {}: {e}", trace.sample_id, trace.draw_idx);
                report.n_failures += 1;
            }
        }
    }
    Ok(report)
}

/// The full augmentation pipeline: for each sample, N_q nucleus-sampled
/// compositions, one generated question each. Sample order and draw order
/// are preserved; per-record failures (including a failed decode, which
/// costs that sample's N_q records) are logged and skipped.
pub fn augment_dataset(
    samples: &[Sample],
    model: &SelectorModel,
    decode: &DecodeConfig,
    generator: &mut Generator,
    out: &mut impl Write,
) -> Result<AugmentReport> {
    decode.validate()?;
    let mut report = AugmentReport { n_samples: samples.len(), ..Default::default() };
    for sample in samples {
        let traces = match nucleus_decode(model, sample, decode) {
            Ok(traces) => traces,
            Err(e) => {
                log::warn!("sample {}: decode failed, skipping: {e}", sample.id);
                report.n_failures += decode.n_q;
                continue;
            }
        };
        for trace in &traces {
            match record_for(sample, trace, generator) {
                Ok(record) => {
                    write_record(out, &record)?;
                    report.n_records += 1;
                }
                Err(e) => {
                    log::warn!("sample {} draw {}: {e}", sample.id, trace.draw_idx);
                    report.n_failures += 1;
                }
            }
        }
    }
    Ok(report)
}

fn write_record(out: &mut impl Write, record: &AugmentedRecord) -> Result<()> {
    let line = serde_json::to_string(record)
        .map_err(|e| KcsError::Data(format!("serializing augmented record: {e}")))?;
    writeln!(out, "{line}")
        .map_err(|e| KcsError::Data(format!("writing augmented record: {e}")))
}

pub fn read_records(path: &std::path::Path) -> Result<Vec<AugmentedRecord>> {
    let file = std::fs::File::open(path).map_err(|e| KcsError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| KcsError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: AugmentedRecord = serde_json::from_str(&line).map_err(|e| KcsError::Parse {
            index: i,
            message: format!("augmented record: {e}"),
        })?;
        records.push(r);
    }
    Ok(records)
}
