use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize::word_tokens;
use crate::corpus::Story;
use crate::{Error, Result};

/// Story-level document frequencies. `idf(t) = ln(N / (1 + df(t)))`, so
/// tokens present in nearly every story receive negative weight and unseen
/// tokens receive `ln N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    #[serde(rename = "N")]
    story_count: usize,
    df: BTreeMap<String, usize>,
}

impl IdfTable {
    pub fn new(story_count: usize, df: BTreeMap<String, usize>) -> Result<Self> {
        let t = IdfTable { story_count, df };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        if self.story_count == 0 {
            return Err(Error::Empty("idf story count"));
        }
        if let Some((tok, df)) = self.df.iter().find(|(_, &d)| d > self.story_count) {
            return Err(Error::Config(format!(
                "df({tok}) = {df} exceeds story count {}",
                self.story_count
            )));
        }
        Ok(())
    }

    pub fn story_count(&self) -> usize {
        self.story_count
    }

    pub fn doc_freq(&self, token: &str) -> usize {
        self.df.get(token).copied().unwrap_or(0)
    }

    pub fn idf(&self, token: &str) -> f64 {
        (self.story_count as f64 / (1 + self.doc_freq(token)) as f64).ln()
    }

    /// Weight of a possibly multi-token mention: the mean idf of its tokens.
    pub fn phrase_idf(&self, phrase: &str) -> f64 {
        let tokens: Vec<&str> = phrase.split_whitespace().collect();
        if tokens.is_empty() {
            return self.idf("");
        }
        tokens.iter().map(|t| self.idf(t)).sum::<f64>() / tokens.len() as f64
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let t: IdfTable = serde_json::from_str(&text).map_err(|e| Error::Artifact {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        t.validate().map_err(|e| Error::Artifact {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string(self).expect("idf table serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Counts, for each word token, the number of stories containing it.
pub fn compute_idf(stories: &[Story]) -> Result<IdfTable> {
    if stories.is_empty() {
        return Err(Error::Empty("story list"));
    }
    let mut df = BTreeMap::new();
    for story in stories {
        let present: HashSet<String> = story
            .sentences
            .iter()
            .flat_map(|s| word_tokens(s))
            .collect();
        for tok in present {
            *df.entry(tok).or_insert(0) += 1;
        }
    }
    IdfTable::new(stories.len(), df)
}
