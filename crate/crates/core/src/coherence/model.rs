use std::fmt;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::encoder::{backend_from_config, format_pair, PairEncoder, PairSequence};
use crate::corpus::Story;
use crate::{Error, Result};

/// Probabilities are clamped to `[ε, 1 − ε]` before taking logs.
pub const PROB_EPSILON: f64 = 1e-7;

const FORMAT: &str = "rovist-coherence";
const VERSION: u32 = 1;

/// Linear layer over the pooled vector. Row 0 scores "in order", row 1
/// "swapped".
#[derive(Debug, Clone, PartialEq)]
pub struct SopHead {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl SopHead {
    pub fn zeros(pooled_dim: usize) -> Self {
        SopHead {
            weight: Array2::zeros((2, pooled_dim)),
            bias: Array1::zeros(2),
        }
    }

    pub fn init(pooled_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (pooled_dim.max(1) as f64).sqrt();
        SopHead {
            weight: Array2::from_shape_simple_fn((2, pooled_dim), || rng.gen_range(-bound..bound)),
            bias: Array1::from_shape_simple_fn(2, || rng.gen_range(-bound..bound)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn logits(&self, pooled: &[f64]) -> Result<[f64; 2]> {
        if pooled.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "pooled representation",
                expected: self.input_dim(),
                found: pooled.len(),
            });
        }
        let z = self.weight.dot(&Array1::from(pooled.to_vec())) + &self.bias;
        Ok([z[0], z[1]])
    }

    /// Softmax over the two classes.
    pub fn probabilities(&self, pooled: &[f64]) -> Result<[f64; 2]> {
        let [a, b] = self.logits(pooled)?;
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        Ok([ea / (ea + eb), eb / (ea + eb)])
    }
}

/// A pair encoder with its classification head.
pub struct CoherenceModel {
    pub encoder: Box<dyn PairEncoder>,
    pub head: SopHead,
}

impl fmt::Debug for CoherenceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoherenceModel")
            .field("encoder", &self.encoder.name())
            .field("pooled_dim", &self.encoder.pooled_dim())
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
struct Artifact {
    format: String,
    version: u32,
    backend: BackendEntry,
    pooled_dim: usize,
    head: HeadEntry,
}

#[derive(Serialize, Deserialize)]
struct BackendEntry {
    name: String,
    config: Value,
    weights: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct HeadEntry {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl CoherenceModel {
    pub fn new(encoder: Box<dyn PairEncoder>, head: SopHead) -> Result<Self> {
        if head.input_dim() != encoder.pooled_dim() {
            return Err(Error::Dimension {
                context: "head input",
                expected: encoder.pooled_dim(),
                found: head.input_dim(),
            });
        }
        Ok(CoherenceModel { encoder, head })
    }

    pub fn pooled_dim(&self) -> usize {
        self.encoder.pooled_dim()
    }

    pub fn format(&self, prev: &str, next: &str) -> Result<PairSequence> {
        format_pair(prev, next, self.encoder.max_len())
    }

    /// Writes the JSON artifact: format tag and version, backend name,
    /// configuration and weight reference, then the head.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let artifact = Artifact {
            format: FORMAT.into(),
            version: VERSION,
            backend: BackendEntry {
                name: self.encoder.name().into(),
                config: self.encoder.config(),
                weights: self.encoder.weights_ref(),
            },
            pooled_dim: self.pooled_dim(),
            head: HeadEntry {
                weight: self.head.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
                bias: self.head.bias.to_vec(),
            },
        };
        let mut text = serde_json::to_string_pretty(&artifact).expect("artifact serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bad = |message: String| Error::Artifact {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let a: Artifact = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if a.format != FORMAT {
            return Err(bad(format!("format `{}` is not `{FORMAT}`", a.format)));
        }
        if a.version != VERSION {
            return Err(bad(format!("unsupported version {}", a.version)));
        }
        if a.head.weight.len() != 2 || a.head.bias.len() != 2 {
            return Err(bad("head must have exactly two output rows".into()));
        }
        if a.head.weight.iter().any(|r| r.len() != a.pooled_dim) {
            return Err(bad(format!("head rows must have {} columns", a.pooled_dim)));
        }
        let encoder = backend_from_config(&a.backend.name, &a.backend.config)?;
        let flat: Vec<f64> = a.head.weight.concat();
        let head = SopHead {
            weight: Array2::from_shape_vec((2, a.pooled_dim), flat).expect("checked shape"),
            bias: Array1::from(a.head.bias),
        };
        CoherenceModel::new(encoder, head).map_err(|e| bad(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairProbability {
    /// Probability that the second sentence follows the first.
    pub p_hat: f64,
    pub pair_index: usize,
}

/// In-order probability for one sentence pair.
pub fn sop_predict(model: &CoherenceModel, prev: &str, next: &str) -> Result<PairProbability> {
    let seq = model.format(prev, next)?;
    let pooled = model.encoder.encode(&seq)?;
    let [p_hat, _] = model.head.probabilities(&pooled)?;
    Ok(PairProbability { p_hat, pair_index: 0 })
}

/// Binary cross-entropy of an in-order probability against a 0/1 label.
pub fn bce_loss(p_hat: f64, label: u8) -> f64 {
    let p = p_hat.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    let y = f64::from(label);
    -y * p.ln() - (1.0 - y) * (1.0 - p).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceScore {
    /// Mean in-order probability over adjacent pairs.
    pub score: f64,
    pub pairs: Vec<PairProbability>,
    /// Set for single-sentence stories, which score 1.0.
    pub degenerate: bool,
}

impl CoherenceScore {
    /// Averages pair probabilities; an empty list is the degenerate 1.0 case.
    pub fn from_pairs(pairs: Vec<PairProbability>) -> Self {
        if pairs.is_empty() {
            return CoherenceScore {
                score: 1.0,
                pairs,
                degenerate: true,
            };
        }
        let score = pairs.iter().map(|p| p.p_hat).sum::<f64>() / pairs.len() as f64;
        CoherenceScore {
            score,
            pairs,
            degenerate: false,
        }
    }
}

pub fn coherence_score(story: &Story, model: &CoherenceModel) -> Result<CoherenceScore> {
    let pairs = story
        .sentences
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            sop_predict(model, &w[0], &w[1]).map(|p| PairProbability {
                pair_index: i,
                ..p
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoherenceScore::from_pairs(pairs))
}
