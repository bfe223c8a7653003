use std::fmt;
use std::ops::Range;

use serde_json::{json, Value};

use crate::backend::hashed_vector;
use crate::text::tokenize;
use crate::{Error, Result};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// `[CLS] first [SEP] second [SEP]` with the token range of each sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSequence {
    pub tokens: Vec<String>,
    pub first: Range<usize>,
    pub second: Range<usize>,
}

impl PairSequence {
    pub fn first_tokens(&self) -> &[String] {
        &self.tokens[self.first.clone()]
    }

    pub fn second_tokens(&self) -> &[String] {
        &self.tokens[self.second.clone()]
    }
}

impl fmt::Display for PairSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

/// Builds the classifier input for a sentence pair. When the sequence would
/// exceed `max_len` tokens, tokens are dropped from the end of the longer
/// sentence (the second one on ties) until it fits.
pub fn format_pair(prev: &str, next: &str, max_len: usize) -> Result<PairSequence> {
    if max_len < 5 {
        return Err(Error::Config(format!(
            "maximum sequence length {max_len} cannot hold two sentences"
        )));
    }
    let mut a = tokenize(prev);
    let mut b = tokenize(next);
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("sentence"));
    }
    while a.len() + b.len() + 3 > max_len {
        if a.len() > b.len() {
            a.pop();
        } else {
            b.pop();
        }
    }
    let first = 1..1 + a.len();
    let second = first.end + 1..first.end + 1 + b.len();
    let mut tokens = Vec::with_capacity(second.end + 1);
    tokens.push(CLS.to_string());
    tokens.extend(a);
    tokens.push(SEP.to_string());
    tokens.extend(b);
    tokens.push(SEP.to_string());
    Ok(PairSequence {
        tokens,
        first,
        second,
    })
}

/// Produces the pooled representation of a formatted pair.
pub trait PairEncoder: Send + Sync {
    /// Identifier recorded in model artifacts.
    fn name(&self) -> &str;
    fn max_len(&self) -> usize;
    fn pooled_dim(&self) -> usize;
    fn encode(&self, input: &PairSequence) -> Result<Vec<f64>>;
    /// Configuration needed to rebuild this backend from an artifact.
    fn config(&self) -> Value;
    /// Location of backend weights, when they live outside the artifact.
    fn weights_ref(&self) -> Option<String> {
        None
    }
    /// Fine-tuning hook: receives the loss gradient with respect to the
    /// pooled output. Weight-free backends ignore it.
    fn backward(&mut self, _input: &PairSequence, _grad: &[f64], _lr: f64) -> Result<()> {
        Ok(())
    }
}

/// Weight-free encoder: the pooled vector is the mean hashed token vector of
/// the first sentence followed by that of the second sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashedBagEncoder {
    segment_dim: usize,
    max_len: usize,
}

impl HashedBagEncoder {
    pub const NAME: &'static str = "hashed-bag";

    pub fn new(segment_dim: usize, max_len: usize) -> Self {
        HashedBagEncoder {
            segment_dim,
            max_len,
        }
    }

    fn mean(&self, tokens: &[String]) -> Vec<f64> {
        let mut acc = vec![0.0; self.segment_dim];
        for t in tokens {
            for (a, v) in acc.iter_mut().zip(hashed_vector("sop-token", t.as_bytes(), self.segment_dim)) {
                *a += v;
            }
        }
        let n = tokens.len().max(1) as f64;
        acc.into_iter().map(|a| a / n).collect()
    }
}

impl Default for HashedBagEncoder {
    /// 1024-dim pooled output, 128-token sequences.
    fn default() -> Self {
        Self::new(512, 128)
    }
}

impl PairEncoder for HashedBagEncoder {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn max_len(&self) -> usize {
        self.max_len
    }

    fn pooled_dim(&self) -> usize {
        2 * self.segment_dim
    }

    fn encode(&self, input: &PairSequence) -> Result<Vec<f64>> {
        let mut out = self.mean(input.first_tokens());
        out.extend(self.mean(input.second_tokens()));
        Ok(out)
    }

    fn config(&self) -> Value {
        json!({ "segment_dim": self.segment_dim, "max_len": self.max_len })
    }
}

/// Rebuilds a backend from the name and configuration stored in an artifact.
pub fn backend_from_config(name: &str, config: &Value) -> Result<Box<dyn PairEncoder>> {
    match name {
        HashedBagEncoder::NAME => {
            let field = |k: &str| {
                config
                    .get(k)
                    .and_then(Value::as_u64)
                    .map(|v| v as usize)
                    .ok_or_else(|| Error::Backend(format!("{name}: missing `{k}`")))
            };
            Ok(Box::new(HashedBagEncoder::new(field("segment_dim")?, field("max_len")?)))
        }
        other => Err(Error::Backend(format!("unsupported pair encoder `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template() {
        let p = format_pair("a.", "b.", 64).unwrap();
        assert_eq!(p.to_string(), "[CLS] a . [SEP] b . [SEP]");
        assert_eq!(p.first_tokens(), ["a", "."]);
        assert_eq!(p.second_tokens(), ["b", "."]);
    }

    #[test]
    fn truncation_trims_longer_sentence() {
        let p = format_pair("one two three four five six", "x y", 8).unwrap();
        assert_eq!(p.tokens.len(), 8);
        assert_eq!(p.to_string(), "[CLS] one two three [SEP] x y [SEP]");
        let p = format_pair("a b c", "d e f", 7).unwrap();
        assert_eq!(p.to_string(), "[CLS] a b [SEP] d e [SEP]");
        assert_eq!(p.tokens.iter().filter(|t| *t == SEP).count(), 2);
    }

    #[test]
    fn empty_sentence_rejected() {
        assert!(format_pair("", "b.", 16).is_err());
        assert!(format_pair("a", "  ", 16).is_err());
        assert!(format_pair("a", "b", 4).is_err());
    }

    #[test]
    fn hashed_bag_is_order_sensitive() {
        let e = HashedBagEncoder::new(6, 32);
        let ab = e.encode(&format_pair("first we ate", "then we slept", 32).unwrap()).unwrap();
        let ba = e.encode(&format_pair("then we slept", "first we ate", 32).unwrap()).unwrap();
        assert_eq!(ab.len(), 12);
        assert_ne!(ab, ba);
        assert_eq!(ab[..6], ba[6..]);
    }

    #[test]
    fn rebuild_from_config() {
        let e = HashedBagEncoder::new(3, 20);
        let b = backend_from_config(e.name(), &e.config()).unwrap();
        assert_eq!(b.pooled_dim(), 6);
        assert_eq!(b.max_len(), 20);
        assert!(backend_from_config("albert-large-v1", &Value::Null).is_err());
    }
}
