//! Pluggable feature backends for the grounding scorer.
//!
//! Real deployments feed GloVe vectors and ViT region features. The hashed
//! backends derive fixed pseudo-random vectors from a SHA-256 digest of the
//! input, so every score is reproducible without model downloads.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::{RegionPayload, RegionProposal};
use crate::{Error, Result};

/// Word-vector width used for noun mentions (GloVe 300d).
pub const WORD_DIM: usize = 300;
/// Region feature width of a `vit-base-patch16-224` backbone.
pub const VISION_DIM: usize = 768;

/// Deterministic vector in `[-1, 1)^dim` keyed by `domain` and `key`.
pub fn hashed_vector(domain: &str, key: &[u8], dim: usize) -> Vec<f64> {
    let mut h = Sha256::new();
    h.update(domain.as_bytes());
    h.update([0u8]);
    h.update(key);
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(seed);
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub trait WordVectors: Send + Sync {
    fn dim(&self) -> usize;
    fn vector(&self, token: &str) -> Option<Vec<f64>>;
}

/// Mean of the available token vectors of a space-separated phrase.
pub fn phrase_vector(words: &dyn WordVectors, phrase: &str) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; words.dim()];
    let mut n = 0usize;
    for tok in phrase.split_whitespace() {
        if let Some(v) = words.vector(tok) {
            for (s, x) in sum.iter_mut().zip(&v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::OutOfVocabulary(phrase.to_string()));
    }
    Ok(sum.into_iter().map(|s| s / n as f64).collect())
}

/// Every token maps to a hashed vector, except tokens explicitly marked
/// out-of-vocabulary.
#[derive(Debug, Clone)]
pub struct HashedWordVectors {
    dim: usize,
    oov: HashSet<String>,
}

impl HashedWordVectors {
    pub fn new(dim: usize) -> Self {
        HashedWordVectors {
            dim,
            oov: HashSet::new(),
        }
    }

    pub fn with_oov<S: Into<String>>(mut self, tokens: impl IntoIterator<Item = S>) -> Self {
        self.oov.extend(tokens.into_iter().map(Into::into));
        self
    }
}

impl Default for HashedWordVectors {
    fn default() -> Self {
        Self::new(WORD_DIM)
    }
}

impl WordVectors for HashedWordVectors {
    fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, token: &str) -> Option<Vec<f64>> {
        if self.oov.contains(token) {
            return None;
        }
        Some(hashed_vector("word", token.as_bytes(), self.dim))
    }
}

/// Vectors read from a GloVe-style text file: `token v1 v2 ... vd` per line.
#[derive(Debug, Clone)]
pub struct GloveVectors {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl GloveVectors {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut table = HashMap::new();
        let mut dim = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let v: Vec<f64> = parts
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::schema(path, i + 1, token, format!("{e}")))?;
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::schema(
                        path,
                        i + 1,
                        token,
                        format!("expected {d} components, found {}", v.len()),
                    ))
                }
                _ => {}
            }
            table.insert(token.to_lowercase(), v);
        }
        let dim = dim.ok_or(Error::Empty("word vector file"))?;
        Ok(GloveVectors { dim, table })
    }
}

impl WordVectors for GloveVectors {
    fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, token: &str) -> Option<Vec<f64>> {
        self.table.get(token).cloned()
    }
}

/// Image feature extractor for region crops.
pub trait VisionBackend: Send + Sync {
    fn feature_dim(&self) -> usize;
    fn features(&self, crop: &Path) -> Result<Vec<f64>>;
}

/// Hashes the crop file's bytes into a feature vector. Unreadable or empty
/// files are treated as undecodable.
#[derive(Debug, Clone)]
pub struct HashedVision {
    dim: usize,
}

impl HashedVision {
    pub fn new(dim: usize) -> Self {
        HashedVision { dim }
    }
}

impl Default for HashedVision {
    fn default() -> Self {
        Self::new(VISION_DIM)
    }
}

impl VisionBackend for HashedVision {
    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn features(&self, crop: &Path) -> Result<Vec<f64>> {
        let bytes = std::fs::read(crop)
            .map_err(|e| Error::Backend(format!("cannot decode crop {}: {e}", crop.display())))?;
        if bytes.is_empty() {
            return Err(Error::Backend(format!(
                "cannot decode crop {}: empty file",
                crop.display()
            )));
        }
        Ok(hashed_vector("crop", &bytes, self.dim))
    }
}

/// Features for a region: precomputed vectors are used as-is, crops go
/// through the backend.
pub fn region_features(region: &RegionProposal, vision: &dyn VisionBackend) -> Result<Vec<f64>> {
    match &region.payload {
        RegionPayload::Features(f) => Ok(f.clone()),
        RegionPayload::Crop(path) => vision.features(path),
    }
}
