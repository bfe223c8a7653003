//! Text preprocessing shared by the scorers.

mod idf;
mod tagger;
mod tokenize;

pub use idf::{compute_idf, IdfTable};
pub use tagger::{extract_nouns, LexiconTagger, NounMention, PosTag, PosTagger};
pub use tokenize::{is_punctuation, is_stopword, split_ngrams, tokenize, word_tokens};
