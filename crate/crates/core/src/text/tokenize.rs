use std::collections::HashSet;
use std::sync::OnceLock;

/// Splits a sentence into lowercase tokens.
///
/// Runs of alphanumeric characters form word tokens. An apostrophe (`'` or
/// `’`) directly between two alphanumeric characters stays inside the word,
/// normalized to `'`, so `"Don't"` is the single token `"don't"`. Every other
/// non-whitespace character is its own token.
pub fn tokenize(sentence: &str) -> Vec<String> {
    let chars: Vec<char> = sentence.chars().collect();
    let mut tokens = Vec::new();
    let mut word = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
            continue;
        }
        let joins_word = (c == '\'' || c == '\u{2019}')
            && !word.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if joins_word {
            word.push('\'');
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// True for tokens without any alphanumeric character.
pub fn is_punctuation(token: &str) -> bool {
    !token.chars().any(char::is_alphanumeric)
}

/// Tokens of `sentence` with punctuation removed.
pub fn word_tokens(sentence: &str) -> Vec<String> {
    tokenize(sentence)
        .into_iter()
        .filter(|t| !is_punctuation(t))
        .collect()
}

pub fn is_stopword(token: &str) -> bool {
    static WORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    WORDS
        .get_or_init(|| include_str!("stopwords.txt").lines().collect())
        .contains(token)
}

/// Consecutive non-overlapping windows of `n` tokens. A trailing remainder
/// shorter than `n` is kept as the final window.
///
/// # Panics
/// If `n` is zero.
pub fn split_ngrams<T>(tokens: &[T], n: usize) -> Vec<&[T]> {
    assert!(n >= 1, "n-gram size must be at least 1");
    tokens.chunks(n).collect()
}
