//! Non-redundancy: Jaccard overlap between sentences and between consecutive
//! n-grams inside sentences.
//!
//! Words are lowercased tokens with punctuation removed. Sentence pairs are
//! visited as `(i, j)` with `i < j` in lexicographic order, and n-gram pairs
//! sentence by sentence; means are accumulated in that order.

use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::corpus::Story;
use crate::text::{split_ngrams, word_tokens};

pub const DEFAULT_NGRAM: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyBreakdown {
    pub inter: f64,
    pub intra: f64,
    pub final_score: f64,
    /// Jaccard value per sentence pair `(i, j)`, `i < j`.
    pub pair_scores: Vec<((usize, usize), f64)>,
    /// Jaccard value per `(sentence, k)`: n-gram `k` against n-gram `k + 1`.
    pub intra_scores: Vec<((usize, usize), f64)>,
    /// Set when the story has a single sentence, so `inter` is 0 by convention.
    pub no_sentence_pairs: bool,
    /// Set when no sentence has two or more n-grams, so `intra` is 0.
    pub no_ngram_pairs: bool,
}

/// `|A ∩ B| / |A ∪ B|` over the unique elements of each side; 0 when both
/// are empty.
pub fn jaccard<T: Eq + Hash>(a: &[T], b: &[T]) -> f64 {
    let a: HashSet<&T> = a.iter().collect();
    let b: HashSet<&T> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn sentence_pairs(words: &[Vec<String>]) -> Vec<((usize, usize), f64)> {
    let mut out = Vec::new();
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            out.push(((i, j), jaccard(&words[i], &words[j])));
        }
    }
    out
}

fn ngram_pairs(words: &[Vec<String>], n: usize) -> Vec<((usize, usize), f64)> {
    let mut out = Vec::new();
    for (s, tokens) in words.iter().enumerate() {
        let grams = split_ngrams(tokens, n);
        for (k, w) in grams.windows(2).enumerate() {
            out.push(((s, k), jaccard(w[0], w[1])));
        }
    }
    out
}

fn story_words(story: &Story) -> Vec<Vec<String>> {
    story.sentences.iter().map(|s| word_tokens(s)).collect()
}

/// Mean Jaccard similarity over all unordered sentence pairs; 0 for a
/// single-sentence story.
pub fn inter_sentence_repetition(story: &Story) -> f64 {
    mean(sentence_pairs(&story_words(story)).into_iter().map(|(_, v)| v)).unwrap_or(0.0)
}

/// Mean Jaccard similarity between consecutive non-overlapping n-grams,
/// pooled over every sentence of the story; 0 when no sentence has two
/// n-grams.
///
/// # Panics
/// If `n` is zero.
pub fn intra_sentence_repetition(story: &Story, n: usize) -> f64 {
    mean(ngram_pairs(&story_words(story), n).into_iter().map(|(_, v)| v)).unwrap_or(0.0)
}

/// `1 − (inter + intra) / 2`, with the per-pair values behind both terms.
///
/// # Panics
/// If `n` is zero.
pub fn nr_score(story: &Story, n: usize) -> RedundancyBreakdown {
    let words = story_words(story);
    let pair_scores = sentence_pairs(&words);
    let intra_scores = ngram_pairs(&words, n);
    let inter = mean(pair_scores.iter().map(|p| p.1));
    let intra = mean(intra_scores.iter().map(|p| p.1));
    let (inter_v, intra_v) = (inter.unwrap_or(0.0), intra.unwrap_or(0.0));
    RedundancyBreakdown {
        inter: inter_v,
        intra: intra_v,
        final_score: 1.0 - (inter_v + intra_v) / 2.0,
        pair_scores,
        intra_scores,
        no_sentence_pairs: inter.is_none(),
        no_ngram_pairs: intra.is_none(),
    }
}
