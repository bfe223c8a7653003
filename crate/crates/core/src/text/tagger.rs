use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::tokenize::{is_punctuation, is_stopword, tokenize};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PosTag {
    Noun,
    ProperNoun,
    Verb,
    Auxiliary,
    Adjective,
    Adverb,
    Pronoun,
    Determiner,
    Adposition,
    Conjunction,
    Numeral,
    Punctuation,
    Other,
}

impl PosTag {
    pub fn is_noun(self) -> bool {
        matches!(self, PosTag::Noun | PosTag::ProperNoun)
    }
}

impl FromStr for PosTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "NOUN" | "NN" | "NNS" => PosTag::Noun,
            "PROPN" | "NNP" | "NNPS" => PosTag::ProperNoun,
            "VERB" => PosTag::Verb,
            "AUX" => PosTag::Auxiliary,
            "ADJ" => PosTag::Adjective,
            "ADV" => PosTag::Adverb,
            "PRON" => PosTag::Pronoun,
            "DET" => PosTag::Determiner,
            "ADP" => PosTag::Adposition,
            "CONJ" | "CCONJ" | "SCONJ" => PosTag::Conjunction,
            "NUM" => PosTag::Numeral,
            "PUNCT" => PosTag::Punctuation,
            "OTHER" | "X" => PosTag::Other,
            other => return Err(format!("unknown tag `{other}`")),
        })
    }
}

/// Part-of-speech backend. Must return exactly one tag per token.
pub trait PosTagger: Send + Sync {
    fn tag(&self, tokens: &[String]) -> Result<Vec<PosTag>>;
}

/// Dictionary tagger. Tokens missing from the lexicon fall back to a few
/// shape rules (punctuation, digits, `-ly`, `-ing`, `-ed`) when enabled, and
/// otherwise to the configured default tag.
#[derive(Debug, Clone)]
pub struct LexiconTagger {
    lexicon: HashMap<String, PosTag>,
    unknown: PosTag,
    shape_rules: bool,
}

impl LexiconTagger {
    /// Exact lookup only; unknown tokens are tagged [`PosTag::Other`].
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = (&'a str, PosTag)>) -> Self {
        LexiconTagger {
            lexicon: entries
                .into_iter()
                .map(|(w, t)| (w.to_lowercase(), t))
                .collect(),
            unknown: PosTag::Other,
            shape_rules: false,
        }
    }

    /// Built-in English closed-class lexicon with common story verbs and
    /// adjectives. Unknown alphabetic words are taken to be nouns.
    pub fn english() -> Self {
        let mut t = Self::parse(include_str!("lexicon.tsv"), Path::new("<builtin lexicon>"))
            .expect("builtin lexicon parses");
        t.unknown = PosTag::Noun;
        t.shape_rules = true;
        t
    }

    /// Reads a `word<TAB>TAG` file on top of the built-in English lexicon.
    pub fn english_with_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let extra = Self::parse(&text, path)?;
        let mut t = Self::english();
        t.lexicon.extend(extra.lexicon);
        Ok(t)
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lexicon = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| Error::schema(path, i + 1, "<line>", "expected word<TAB>tag"))?;
            let tag = tag
                .trim()
                .parse()
                .map_err(|m: String| Error::schema(path, i + 1, "tag", m))?;
            lexicon.insert(word.trim().to_lowercase(), tag);
        }
        Ok(LexiconTagger {
            lexicon,
            unknown: PosTag::Other,
            shape_rules: false,
        })
    }

    fn tag_one(&self, token: &str) -> PosTag {
        if let Some(&t) = self.lexicon.get(token) {
            return t;
        }
        if !self.shape_rules {
            return self.unknown;
        }
        if is_punctuation(token) {
            PosTag::Punctuation
        } else if token.chars().all(|c| c.is_numeric() || c == '\'') {
            PosTag::Numeral
        } else if token.len() > 4 && token.ends_with("ly") {
            PosTag::Adverb
        } else if token.len() > 4 && (token.ends_with("ing") || token.ends_with("ed")) {
            PosTag::Verb
        } else {
            self.unknown
        }
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, tokens: &[String]) -> Result<Vec<PosTag>> {
        Ok(tokens.iter().map(|t| self.tag_one(t)).collect())
    }
}

/// A noun phrase found in one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NounMention {
    /// Space-joined tokens of the mention.
    pub text: String,
    /// Half-open token range in the sentence's [`tokenize`] output.
    pub token_span: (usize, usize),
    pub sentence_index: usize,
}

impl NounMention {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.text.split(' ')
    }
}

impl fmt::Display for NounMention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Maximal runs of adjacent noun tokens that are not stopwords.
pub fn extract_nouns(
    sentence: &str,
    sentence_index: usize,
    tagger: &dyn PosTagger,
) -> Result<Vec<NounMention>> {
    let tokens = tokenize(sentence);
    if tokens.is_empty() {
        return Ok(Vec::new());
    }
    let tags = tagger.tag(&tokens)?;
    if tags.len() != tokens.len() {
        return Err(Error::Backend(format!(
            "tagger returned {} tags for {} tokens",
            tags.len(),
            tokens.len()
        )));
    }
    let mut out = Vec::new();
    let mut start = None;
    for i in 0..=tokens.len() {
        let keep = i < tokens.len() && tags[i].is_noun() && !is_stopword(&tokens[i]);
        match (keep, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(NounMention {
                    text: tokens[s..i].join(" "),
                    token_span: (s, i),
                    sentence_index,
                });
                start = None;
            }
            _ => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stub() -> LexiconTagger {
        LexiconTagger::from_entries([
            ("the", PosTag::Determiner),
            ("dart", PosTag::Noun),
            ("hit", PosTag::Verb),
            ("board", PosTag::Noun),
            ("it", PosTag::Pronoun),
            ("is", PosTag::Auxiliary),
            ("raining", PosTag::Verb),
            ("birthday", PosTag::Noun),
            ("cake", PosTag::Noun),
        ])
    }

    fn texts(sentence: &str, tagger: &dyn PosTagger) -> Vec<String> {
        extract_nouns(sentence, 0, tagger)
            .unwrap()
            .into_iter()
            .map(|m| m.text)
            .collect()
    }

    #[test]
    fn nouns_from_stub_tagger() {
        assert_eq!(texts("the dart hit the board", &stub()), ["dart", "board"]);
        assert!(texts("it is raining", &stub()).is_empty());
        assert!(texts("", &stub()).is_empty());
    }

    #[test]
    fn builtin_tagger_agrees_on_fixed_sentences() {
        let t = LexiconTagger::english();
        assert_eq!(texts("the dart hit the board", &t), ["dart", "board"]);
        assert!(texts("it is raining", &t).is_empty());
        assert_eq!(texts("We finally saw 3 dolphins.", &t), ["dolphins"]);
    }

    #[test]
    fn adjacent_nouns_merge() {
        let m = extract_nouns("the birthday cake hit the board", 2, &stub()).unwrap();
        assert_eq!(m[0].text, "birthday cake");
        assert_eq!(m[0].token_span, (1, 3));
        assert_eq!(m[0].sentence_index, 2);
        assert_eq!(m[1].token_span, (5, 6));
    }

    #[test]
    fn stopword_nouns_are_dropped() {
        let t = LexiconTagger::from_entries([("this", PosTag::Noun), ("dart", PosTag::Noun)]);
        assert_eq!(texts("this dart", &t), ["dart"]);
    }

    struct Broken;
    impl PosTagger for Broken {
        fn tag(&self, _: &[String]) -> Result<Vec<PosTag>> {
            Err(Error::Backend("tagger offline".into()))
        }
    }

    struct Short;
    impl PosTagger for Short {
        fn tag(&self, _: &[String]) -> Result<Vec<PosTag>> {
            Ok(vec![PosTag::Noun])
        }
    }

    #[test]
    fn tagger_failure_surfaces() {
        assert!(matches!(
            extract_nouns("a dart", 0, &Broken),
            Err(Error::Backend(_))
        ));
        assert!(matches!(
            extract_nouns("a dart", 0, &Short),
            Err(Error::Backend(_))
        ));
    }

    #[test]
    fn spans_never_overlap() {
        let t = LexiconTagger::english();
        let m = extract_nouns("dog cat the ball park and sun, moon!", 0, &t).unwrap();
        for w in m.windows(2) {
            assert!(w[0].token_span.1 <= w[1].token_span.0);
        }
        for x in &m {
            assert!(x.token_span.0 < x.token_span.1);
        }
    }
}
