//! Text embeddings for posts and thread summaries.
//!
//! [`HashingEncoder`] is the deterministic offline default: signed feature
//! hashing of lowercase alphanumeric tokens followed by L2 normalization.
//! [`ExternalEncoder`] posts batches to an embedding service speaking
//! `{"texts": [..]}` -> `{"vectors": [[..], ..]}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::EncoderError;
use crate::thread_model::{Stance, Thread};

/// Separator placed between texts of a combined thread summary.
pub const SEPARATOR: &str = " [SEP] ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn zeros(dim: usize) -> Self {
        Embedding {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Hashing,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub dim: usize,
    pub seed: u64,
    pub endpoint: Option<String>,
    pub batch_size: usize,
    pub timeout_secs: f64,
    /// Upper bound on concurrent in-flight requests to the service.
    pub max_in_flight: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            kind: EncoderKind::Hashing,
            dim: 256,
            seed: 0,
            endpoint: None,
            batch_size: 32,
            timeout_secs: 30.0,
            max_in_flight: 4,
        }
    }
}

impl EncoderConfig {
    pub fn hashing(dim: usize, seed: u64) -> Self {
        EncoderConfig {
            dim,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.dim == 0 {
            return Err(EncoderError::Config("dim must be positive".into()));
        }
        if self.batch_size == 0 || self.max_in_flight == 0 {
            return Err(EncoderError::Config(
                "batch_size and max_in_flight must be positive".into(),
            ));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(EncoderError::Config("timeout must be positive".into()));
        }
        if self.kind == EncoderKind::External && self.endpoint.is_none() {
            return Err(EncoderError::Config(
                "external encoder needs an endpoint".into(),
            ));
        }
        Ok(())
    }
}

/// Anything that maps text to fixed-dimension vectors.
pub trait TextEncoder: Send + Sync {
    fn dim(&self) -> usize;

    fn encode(&self, text: &str) -> Result<Embedding, EncoderError>;

    /// Encodes many texts, preserving order.
    fn encode_many(&self, texts: &[String]) -> Result<Vec<Embedding>, EncoderError> {
        texts.iter().map(|t| self.encode(t)).collect()
    }
}

/// Builds the encoder described by `cfg`.
pub fn build_encoder(cfg: &EncoderConfig) -> Result<Box<dyn TextEncoder>, EncoderError> {
    cfg.validate()?;
    Ok(match cfg.kind {
        EncoderKind::Hashing => Box::new(HashingEncoder::new(cfg.dim, cfg.seed)),
        EncoderKind::External => Box::new(ExternalEncoder::new(cfg.clone())?),
    })
}

/// 64-bit FNV-1a over the seed's little-endian bytes followed by `bytes`,
/// finished with the murmur3 `fmix64` avalanche so high bits are usable.
pub fn seeded_hash(seed: u64, bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = seed
        .to_le_bytes()
        .iter()
        .chain(bytes)
        .fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME));
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

/// Lowercases and splits on any non-alphanumeric character.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Signed hashing encoder. A token with hash `h` adds `+1` to bucket
/// `h mod dim` when the top bit of `h` is clear and `-1` otherwise.
///
/// If the signed contributions of a non-empty token set cancel exactly, the
/// unsigned counts are used instead, so only token-free text maps to zero.
#[derive(Debug, Clone)]
pub struct HashingEncoder {
    dim: usize,
    seed: u64,
}

impl HashingEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "hashing encoder needs a positive dimension");
        HashingEncoder { dim, seed }
    }
}

impl TextEncoder for HashingEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Embedding, EncoderError> {
        let hashes: Vec<u64> = tokenize(text)
            .map(|t| seeded_hash(self.seed, t.as_bytes()))
            .collect();
        let mut values = vec![0.0; self.dim];
        for &h in &hashes {
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            values[(h % self.dim as u64) as usize] += sign;
        }
        if !hashes.is_empty() && values.iter().all(|&v| v == 0.0) {
            for &h in &hashes {
                values[(h % self.dim as u64) as usize] += 1.0;
            }
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(Embedding { values })
    }
}

/// Encoder that carries no information; every text maps to zeros.
#[derive(Debug, Clone)]
pub struct ZeroEncoder(pub usize);

impl TextEncoder for ZeroEncoder {
    fn dim(&self) -> usize {
        self.0
    }

    fn encode(&self, _text: &str) -> Result<Embedding, EncoderError> {
        Ok(Embedding::zeros(self.0))
    }
}

/// The text summarizing a thread: the source followed by every support, deny
/// and query reply in chronological order, joined by [`SEPARATOR`].
pub fn combined_text(t: &Thread) -> String {
    let mut parts = vec![t.source.text.as_str()];
    parts.extend(
        t.replies
            .iter()
            .filter(|r| matches!(r.stance, Stance::Support | Stance::Deny | Stance::Query))
            .map(|r| r.text.as_str()),
    );
    parts.join(SEPARATOR)
}

pub fn encode_combined(t: &Thread, encoder: &dyn TextEncoder) -> Result<Embedding, EncoderError> {
    encoder.encode(&combined_text(t))
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for an HTTP embedding service.
pub struct ExternalEncoder {
    cfg: EncoderConfig,
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl ExternalEncoder {
    pub fn new(cfg: EncoderConfig) -> Result<Self, EncoderError> {
        let endpoint = cfg
            .endpoint
            .clone()
            .ok_or_else(|| EncoderError::Config("external encoder needs an endpoint".into()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| EncoderError::Config(e.to_string()))?;
        Ok(ExternalEncoder {
            cfg,
            endpoint,
            client,
        })
    }

    fn post_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, EncoderError> {
        let resp = self
            .client
            .post(&self.endpoint)
            .json(&EmbedRequest { texts })
            .send()
            .map_err(classify)?;
        let status = resp.status();
        if status != reqwest::StatusCode::OK {
            return Err(EncoderError::Status(status.as_u16()));
        }
        let body = resp.bytes().map_err(classify)?;
        let parsed: EmbedResponse =
            serde_json::from_slice(&body).map_err(|e| EncoderError::Malformed(e.to_string()))?;
        if parsed.vectors.len() != texts.len() {
            return Err(EncoderError::CountMismatch {
                expected: texts.len(),
                got: parsed.vectors.len(),
            });
        }
        parsed
            .vectors
            .into_iter()
            .map(|values| {
                if values.len() != self.cfg.dim {
                    Err(EncoderError::DimMismatch {
                        expected: self.cfg.dim,
                        got: values.len(),
                    })
                } else if values.iter().any(|v| !v.is_finite()) {
                    Err(EncoderError::Malformed("non-finite embedding value".into()))
                } else {
                    Ok(Embedding { values })
                }
            })
            .collect()
    }
}

fn classify(e: reqwest::Error) -> EncoderError {
    if e.is_timeout() {
        EncoderError::Timeout
    } else {
        EncoderError::Network(e.to_string())
    }
}

impl TextEncoder for ExternalEncoder {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn encode(&self, text: &str) -> Result<Embedding, EncoderError> {
        let mut out = self.post_batch(&[text.to_string()])?;
        Ok(out.remove(0))
    }

    fn encode_many(&self, texts: &[String]) -> Result<Vec<Embedding>, EncoderError> {
        encode_batch_external(self, texts)
    }
}

/// Splits `texts` into `batch_size` chunks and sends up to `max_in_flight`
/// of them concurrently. Results come back in input order; an empty input
/// makes no request.
pub fn encode_batch_external(
    enc: &ExternalEncoder,
    texts: &[String],
) -> Result<Vec<Embedding>, EncoderError> {
    let chunks: Vec<&[String]> = texts.chunks(enc.cfg.batch_size).collect();
    let mut out = Vec::with_capacity(texts.len());
    for wave in chunks.chunks(enc.cfg.max_in_flight) {
        let results: Vec<Result<Vec<Embedding>, EncoderError>> = std::thread::scope(|s| {
            let handles: Vec<_> = wave
                .iter()
                .map(|chunk| s.spawn(move || enc.post_batch(chunk)))
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(EncoderError::Network("worker panicked".into())))
                })
                .collect()
        });
        for r in results {
            out.extend(r?);
        }
    }
    Ok(out)
}
