//! Sentence encoder: maps each context sentence and the answer to a fixed
//! d-dimensional vector.
//!
//! Two backends:
//! - `hash`: feature-hashed bag of tokens over a trainable embedding table.
//!   Self-contained, deterministic, and trainable end-to-end with the
//!   selector. The default.
//! - `precomputed`: frozen vectors produced offline (e.g. by a large
//!   pretrained encoder on a GPU box) and served from the on-disk cache;
//!   missing entries are an error pointing at the precompute step.
//!
//! Frozen encoders read and populate a content-addressed cache keyed by
//! (model id, pooling, normalized text).

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Sample;
use crate::error::{KcsError, Result};
use crate::nn::tape::NodeId;
use crate::nn::{normal_init, Graph, ParamId, ParamSet};
use crate::text::{fnv1a, normalize_ws, tokenize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    FirstToken,
    Mean,
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pooling::FirstToken => write!(f, "first-token"),
            Pooling::Mean => write!(f, "mean"),
        }
    }
}

impl FromStr for Pooling {
    type Err = KcsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first-token" => Ok(Pooling::FirstToken),
            "mean" => Ok(Pooling::Mean),
            other => Err(KcsError::Config(format!(
                "unknown pooling `{other}` (expected `first-token` or `mean`)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Hash,
    Precomputed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSpec {
    pub kind: BackendKind,
    /// For `precomputed`: the upstream model that produced the vectors.
    /// For `hash`: a label folded into the cache key.
    pub model_id: String,
    pub d: usize,
    pub pooling: Pooling,
    pub max_tokens: usize,
    /// Train the embedding table jointly with the selector (hash backend
    /// only; `precomputed` is always frozen).
    pub trainable: bool,
    pub vocab_buckets: usize,
    pub seed: u64,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec {
            kind: BackendKind::Hash,
            model_id: "hash".to_string(),
            d: 768,
            pooling: Pooling::FirstToken,
            max_tokens: 64,
            trainable: true,
            vocab_buckets: 32_768,
            seed: 0,
        }
    }
}

impl EncoderSpec {
    /// Identifier baked into cache keys; for the hash backend it includes
    /// everything that changes the produced vectors.
    pub fn cache_model_id(&self) -> String {
        match self.kind {
            BackendKind::Hash => format!(
                "{}-b{}-d{}-s{}",
                self.model_id, self.vocab_buckets, self.d, self.seed
            ),
            BackendKind::Precomputed => self.model_id.clone(),
        }
    }

    pub fn frozen(&self) -> bool {
        match self.kind {
            BackendKind::Hash => !self.trainable,
            BackendKind::Precomputed => true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(KcsError::Config("encoder d must be positive".into()));
        }
        if self.max_tokens == 0 {
            return Err(KcsError::Config("encoder max_tokens must be positive".into()));
        }
        if self.kind == BackendKind::Hash && self.vocab_buckets == 0 {
            return Err(KcsError::Config("encoder vocab_buckets must be positive".into()));
        }
        Ok(())
    }
}

/// Per-sample encode diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EncodeFlags {
    /// Some sentence exceeded `max_tokens` and was truncated.
    pub truncated: bool,
}

/// Content-addressed store of embedding vectors: one little-endian f64
/// blob per key, sharded by key prefix. Writes go through a temp file and
/// rename, so concurrent writers of the same key are last-write-wins with
/// identical content.
pub struct EmbeddingCache {
    dir: PathBuf,
}

impl EmbeddingCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| KcsError::io(&dir, e))?;
        Ok(EmbeddingCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(model_id: &str, pooling: Pooling, text: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(model_id.as_bytes());
        hasher.update([0x1f]);
        hasher.update(pooling.to_string().as_bytes());
        hasher.update([0x1f]);
        hasher.update(normalize_ws(text).as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{}.vec", &key[2..]))
    }

    pub fn load(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(KcsError::io(&path, e)),
        };
        if bytes.len() % 8 != 0 {
            return Err(KcsError::Data(format!(
                "corrupt embedding blob {} ({} bytes)",
                path.display(),
                bytes.len()
            )));
        }
        Ok(Some(
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        ))
    }

    pub fn store(&self, key: &str, vector: &[f64]) -> Result<()> {
        let path = self.path_for(key);
        let parent = path.parent().expect("sharded path has a parent");
        fs::create_dir_all(parent).map_err(|e| KcsError::io(parent, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| KcsError::io(parent, e))?;
        for v in vector {
            tmp.write_all(&v.to_le_bytes()).map_err(|e| KcsError::io(&path, e))?;
        }
        tmp.persist(&path).map_err(|e| KcsError::io(&path, e.error))?;
        Ok(())
    }
}

pub struct Encoder {
    spec: EncoderSpec,
    /// Hash-backend embedding table, registered in the shared parameter set.
    table: Option<ParamId>,
    cache: Option<EmbeddingCache>,
}

impl Encoder {
    /// Register backend parameters into `params` and open the cache if a
    /// directory is supplied. The cache is consulted only for frozen specs.
    pub fn new(
        spec: EncoderSpec,
        params: &mut ParamSet,
        cache_dir: Option<&Path>,
    ) -> Result<Self> {
        spec.validate()?;
        let table = match spec.kind {
            BackendKind::Hash => {
                let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
                Some(params.add(
                    "encoder.table",
                    normal_init(&mut rng, spec.vocab_buckets, spec.d, 0.02),
                ))
            }
            BackendKind::Precomputed => None,
        };
        let cache = match cache_dir {
            Some(dir) => Some(EmbeddingCache::open(dir)?),
            None => None,
        };
        if spec.kind == BackendKind::Precomputed && cache.is_none() {
            return Err(KcsError::Config(
                "precomputed encoder backend requires a cache directory".into(),
            ));
        }
        Ok(Encoder { spec, table, cache })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    fn token_buckets(&self, text: &str) -> (Vec<usize>, bool) {
        let mut tokens = tokenize(text);
        if tokens.is_empty() {
            // Whitespace/punctuation-only sentences map to a reserved token
            // so encoding stays total and deterministic.
            tokens.push("<empty>".to_string());
        }
        let truncated = tokens.len() > self.spec.max_tokens;
        tokens.truncate(self.spec.max_tokens);
        let buckets = tokens
            .iter()
            .map(|t| (fnv1a(t.as_bytes()) % self.spec.vocab_buckets as u64) as usize)
            .collect();
        (buckets, truncated)
    }

    fn hash_vector(&self, params: &ParamSet, text: &str) -> (Vec<f64>, bool) {
        let table = params.value(self.table.expect("hash backend has a table"));
        let (buckets, truncated) = self.token_buckets(text);
        let v = match self.spec.pooling {
            Pooling::FirstToken => table.row(buckets[0]).to_vec(),
            Pooling::Mean => {
                let mut acc = vec![0.0; self.spec.d];
                for &b in &buckets {
                    for (slot, &x) in acc.iter_mut().zip(table.row(b).iter()) {
                        *slot += x;
                    }
                }
                let n = buckets.len() as f64;
                acc.iter_mut().for_each(|x| *x /= n);
                acc
            }
        };
        (v, truncated)
    }

    /// Encode one text span to a d-vector (inference path, cache-aware for
    /// frozen specs). Returns the vector and a truncation flag.
    pub fn encode_text(&self, params: &ParamSet, text: &str) -> Result<(Vec<f64>, bool)> {
        let use_cache = self.spec.frozen();
        let key = if use_cache && self.cache.is_some() {
            Some(EmbeddingCache::key(&self.spec.cache_model_id(), self.spec.pooling, text))
        } else {
            None
        };
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(v) = cache.load(key)? {
                if v.len() != self.spec.d {
                    return Err(KcsError::Data(format!(
                        "cached embedding has dimension {}, expected {}",
                        v.len(),
                        self.spec.d
                    )));
                }
                return Ok((v, false));
            }
        }
        match self.spec.kind {
            BackendKind::Hash => {
                let (v, truncated) = self.hash_vector(params, text);
                if let (Some(cache), Some(key)) = (&self.cache, &key) {
                    cache.store(key, &v)?;
                }
                Ok((v, truncated))
            }
            BackendKind::Precomputed => Err(KcsError::Data(format!(
                "no precomputed embedding for `{}` under model `{}`; run the embedding \
                 precompute script over the corpus first",
                normalize_ws(text),
                self.spec.model_id
            ))),
        }
    }

    /// Inference-path encode of a full sample: X (M x d, rows in
    /// (doc_idx, sent_idx) order) and the answer vector x_a (1 x d).
    pub fn encode_sample(
        &self,
        params: &ParamSet,
        sample: &Sample,
    ) -> Result<(Array2<f64>, Array2<f64>, EncodeFlags)> {
        let m = sample.n_sentences();
        if m == 0 {
            return Err(KcsError::Data(format!("sample {} has no sentences", sample.id)));
        }
        let mut x = Array2::zeros((m, self.spec.d));
        let mut flags = EncodeFlags::default();
        for (i, (_, text)) in sample.sentences().enumerate() {
            let (v, truncated) = self.encode_text(params, text)?;
            flags.truncated |= truncated;
            for (j, &val) in v.iter().enumerate() {
                x[[i, j]] = val;
            }
        }
        let (va, truncated) = self.encode_text(params, &sample.answer)?;
        flags.truncated |= truncated;
        let mut xa = Array2::zeros((1, self.spec.d));
        for (j, &val) in va.iter().enumerate() {
            xa[[0, j]] = val;
        }
        Ok((x, xa, flags))
    }

    /// Training-path encode: builds X and x_a as tape nodes. For a
    /// trainable hash table the rows are gathered from the table leaf so
    /// gradients reach it; frozen specs contribute constant leaves.
    pub fn encode_sample_graph(
        &self,
        g: &mut Graph,
        params: &ParamSet,
        sample: &Sample,
    ) -> Result<(NodeId, NodeId, EncodeFlags)> {
        if self.spec.frozen() || self.table.is_none() {
            let (x, xa, flags) = self.encode_sample(params, sample)?;
            return Ok((g.tape.leaf(x), g.tape.leaf(xa), flags));
        }
        let m = sample.n_sentences();
        if m == 0 {
            return Err(KcsError::Data(format!("sample {} has no sentences", sample.id)));
        }
        let table = g.param(self.table.unwrap());
        let mut flags = EncodeFlags::default();
        let encode_one = |g: &mut Graph, text: &str, flags: &mut EncodeFlags| -> NodeId {
            let (buckets, truncated) = self.token_buckets(text);
            flags.truncated |= truncated;
            match self.spec.pooling {
                Pooling::FirstToken => g.tape.gather_rows(table, &buckets[..1]),
                Pooling::Mean => {
                    let rows = g.tape.gather_rows(table, &buckets);
                    g.tape.mean_rows(rows)
                }
            }
        };
        let mut sentence_nodes = Vec::with_capacity(m);
        for (_, text) in sample.sentences() {
            sentence_nodes.push(encode_one(g, text, &mut flags));
        }
        let x = g.tape.concat_rows(&sentence_nodes);
        let xa = encode_one(g, &sample.answer, &mut flags);
        Ok((x, xa, flags))
    }
}
