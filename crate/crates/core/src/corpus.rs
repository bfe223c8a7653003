//! Line-delimited corpus files: stories, detector regions, entity/region
//! training pairs, sentence-order examples and human judgments.
//!
//! Every loader reads one JSON object per line. Blank lines are skipped;
//! line numbers in errors are 1-based and count blank lines.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::text::{is_stopword, word_tokens};
use crate::{Error, Result};

/// One candidate story: sentences paired with the photo sequence they describe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Story {
    pub story_id: String,
    /// Generating system. Empty when the input does not name one.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub model_id: String,
    pub sentences: Vec<String>,
    pub image_ids: Vec<String>,
}

impl Story {
    pub fn new<S: Into<String>>(story_id: &str, sentences: impl IntoIterator<Item = S>) -> Self {
        Story {
            story_id: story_id.to_string(),
            model_id: String::new(),
            sentences: sentences.into_iter().map(Into::into).collect(),
            image_ids: Vec::new(),
        }
    }

    pub fn with_images<S: Into<String>>(mut self, ids: impl IntoIterator<Item = S>) -> Self {
        self.image_ids = ids.into_iter().map(Into::into).collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionPayload {
    /// Path to an image crop, resolved against the region file's directory.
    Crop(PathBuf),
    /// Precomputed detector/backbone features.
    Features(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionProposal {
    pub image_id: String,
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub payload: RegionPayload,
}

/// Region proposals per image, each list sorted by descending confidence.
pub type RegionIndex = BTreeMap<String, Vec<RegionProposal>>;

#[derive(Debug, Clone, PartialEq)]
pub struct EntityRegionPair {
    /// Noun phrase with stopwords removed.
    pub entity_text: String,
    pub region: RegionProposal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SopExample {
    pub first: String,
    pub second: String,
    /// 1 when `second` follows `first` in the source story, 0 when swapped.
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LikertScale {
    pub min: i64,
    pub max: i64,
}

impl Default for LikertScale {
    fn default() -> Self {
        LikertScale { min: 1, max: 5 }
    }
}

impl LikertScale {
    pub fn new(min: i64, max: i64) -> Result<Self> {
        if min >= max {
            return Err(Error::Config(format!("likert scale {min}..{max} is empty")));
        }
        Ok(LikertScale { min, max })
    }

    pub fn contains(&self, v: i64) -> bool {
        (self.min..=self.max).contains(&v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanJudgment {
    pub story_id: String,
    pub model_id: String,
    pub annotator_id: String,
    pub grounding: i64,
    pub coherence: i64,
    pub non_redundancy: i64,
    pub voted_best: bool,
}

/// Reads `path` line by line, handing each non-blank line's JSON object to `f`.
fn for_each_record(
    path: &Path,
    mut f: impl FnMut(Record<'_>) -> Result<()>,
) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| Error::schema(path, line_no, "<record>", e.to_string()))?;
        let Value::Object(fields) = value else {
            return Err(Error::schema(path, line_no, "<record>", "expected a JSON object"));
        };
        f(Record {
            path,
            line: line_no,
            fields,
        })?;
    }
    Ok(())
}

/// Typed field access with errors that name the field and line.
struct Record<'a> {
    path: &'a Path,
    line: usize,
    fields: Map<String, Value>,
}

impl Record<'_> {
    fn err(&self, field: &str, message: impl Into<String>) -> Error {
        Error::schema(self.path, self.line, field, message)
    }

    fn get(&self, field: &str) -> Result<&Value> {
        self.fields
            .get(field)
            .filter(|v| !v.is_null())
            .ok_or_else(|| self.err(field, "missing"))
    }

    fn has(&self, field: &str) -> bool {
        self.fields.get(field).is_some_and(|v| !v.is_null())
    }

    fn string(&self, field: &str) -> Result<String> {
        match self.get(field)? {
            Value::String(s) if !s.is_empty() => Ok(s.clone()),
            Value::String(_) => Err(self.err(field, "must not be empty")),
            _ => Err(self.err(field, "expected a string")),
        }
    }

    fn opt_string(&self, field: &str) -> Result<Option<String>> {
        if self.has(field) {
            self.string(field).map(Some)
        } else {
            Ok(None)
        }
    }

    fn strings(&self, field: &str) -> Result<Vec<String>> {
        let Value::Array(items) = self.get(field)? else {
            return Err(self.err(field, "expected an array of strings"));
        };
        items
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::String(s) if !s.is_empty() => Ok(s.clone()),
                Value::String(_) => Err(self.err(field, format!("element {i} is empty"))),
                _ => Err(self.err(field, format!("element {i} is not a string"))),
            })
            .collect()
    }

    fn number(&self, field: &str) -> Result<f64> {
        self.get(field)?
            .as_f64()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(field, "expected a finite number"))
    }

    fn numbers(&self, field: &str) -> Result<Vec<f64>> {
        let Value::Array(items) = self.get(field)? else {
            return Err(self.err(field, "expected an array of numbers"));
        };
        items
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.err(field, format!("element {i} is not a finite number")))
            })
            .collect()
    }

    fn integer(&self, field: &str) -> Result<i64> {
        self.get(field)?
            .as_i64()
            .ok_or_else(|| self.err(field, "expected an integer"))
    }

    fn boolean(&self, field: &str) -> Result<bool> {
        self.get(field)?
            .as_bool()
            .ok_or_else(|| self.err(field, "expected true or false"))
    }

    fn region(&self, base_dir: &Path, default_confidence: Option<f64>) -> Result<RegionProposal> {
        let image_id = match default_confidence {
            // entity/region pair files may omit the image id
            Some(_) => self.opt_string("image_id")?.unwrap_or_default(),
            None => self.string("image_id")?,
        };
        let raw = self.numbers("bbox")?;
        let [x, y, width, height] = raw[..] else {
            return Err(self.err("bbox", format!("expected 4 numbers, found {}", raw.len())));
        };
        if width <= 0.0 || height <= 0.0 {
            return Err(self.err("bbox", "width and height must be positive"));
        }
        let confidence = match default_confidence {
            Some(c) if !self.has("confidence") => c,
            _ => self.number("confidence")?,
        };
        if !(0.0..=1.0).contains(&confidence) {
            return Err(self.err("confidence", format!("{confidence} is outside [0, 1]")));
        }
        let payload = match (self.has("crop"), self.has("features")) {
            (true, false) => RegionPayload::Crop(base_dir.join(self.string("crop")?)),
            (false, true) => {
                let f = self.numbers("features")?;
                if f.is_empty() {
                    return Err(self.err("features", "must not be empty"));
                }
                RegionPayload::Features(f)
            }
            (true, true) => {
                return Err(self.err("crop", "both `crop` and `features` are present"))
            }
            (false, false) => {
                return Err(self.err("crop", "one of `crop` or `features` is required"))
            }
        };
        Ok(RegionProposal {
            image_id,
            bbox: BoundingBox {
                x,
                y,
                width,
                height,
            },
            confidence,
            payload,
        })
    }
}

pub fn load_stories(path: impl AsRef<Path>) -> Result<Vec<Story>> {
    let mut out = Vec::new();
    for_each_record(path.as_ref(), |r| {
        let sentences = r.strings("sentences")?;
        if sentences.is_empty() {
            return Err(r.err("sentences", "must contain at least one sentence"));
        }
        out.push(Story {
            story_id: r.string("story_id")?,
            model_id: r.opt_string("model_id")?.unwrap_or_default(),
            sentences,
            image_ids: r.strings("image_ids")?,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_stories(path: impl AsRef<Path>, stories: &[Story]) -> Result<()> {
    write_jsonl(path.as_ref(), stories)
}

/// Loads region proposals grouped by image. Lists are ordered by descending
/// confidence; equal confidences keep file order.
pub fn load_regions(path: impl AsRef<Path>) -> Result<RegionIndex> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut index = RegionIndex::new();
    for_each_record(path, |r| {
        let region = r.region(&base, None)?;
        index.entry(region.image_id.clone()).or_default().push(region);
        Ok(())
    })?;
    for list in index.values_mut() {
        list.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    }
    Ok(index)
}

/// Loads grounding-encoder training pairs. Each record carries `entity` plus
/// the region fields of the region file; `image_id` and `confidence` are
/// optional here.
pub fn load_entity_pairs(path: impl AsRef<Path>) -> Result<Vec<EntityRegionPair>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut out = Vec::new();
    for_each_record(path, |r| {
        let raw = r.string("entity")?;
        let entity_text = word_tokens(&raw)
            .into_iter()
            .filter(|t| !is_stopword(t))
            .collect::<Vec<_>>()
            .join(" ");
        if entity_text.is_empty() {
            return Err(r.err("entity", format!("`{raw}` has no non-stopword token")));
        }
        out.push(EntityRegionPair {
            entity_text,
            region: r.region(&base, Some(1.0))?,
        });
        Ok(())
    })?;
    Ok(out)
}

/// Builds sentence-order examples: every adjacent pair yields the pair in
/// order (label 1) and swapped (label 0). The result is shuffled with
/// ChaCha8 seeded from `seed`, so equal seeds give identical orderings.
pub fn build_sop_dataset(stories: &[Story], seed: u64) -> Vec<SopExample> {
    let mut out = Vec::new();
    for story in stories {
        for pair in story.sentences.windows(2) {
            out.push(SopExample {
                first: pair[0].clone(),
                second: pair[1].clone(),
                label: 1,
            });
            out.push(SopExample {
                first: pair[1].clone(),
                second: pair[0].clone(),
                label: 0,
            });
        }
    }
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

pub fn load_sop(path: impl AsRef<Path>) -> Result<Vec<SopExample>> {
    let mut out = Vec::new();
    for_each_record(path.as_ref(), |r| {
        let label = r.integer("label")?;
        if label != 0 && label != 1 {
            return Err(r.err("label", format!("{label} is not 0 or 1")));
        }
        out.push(SopExample {
            first: r.string("first")?,
            second: r.string("second")?,
            label: label as u8,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_sop(path: impl AsRef<Path>, examples: &[SopExample]) -> Result<()> {
    write_jsonl(path.as_ref(), examples)
}

pub fn load_judgments(path: impl AsRef<Path>, scale: LikertScale) -> Result<Vec<HumanJudgment>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut votes = HashSet::new();
    for_each_record(path.as_ref(), |r| {
        let j = HumanJudgment {
            story_id: r.string("story_id")?,
            model_id: r.string("model_id")?,
            annotator_id: r.string("annotator_id")?,
            grounding: r.integer("grounding")?,
            coherence: r.integer("coherence")?,
            non_redundancy: r.integer("non_redundancy")?,
            voted_best: r.boolean("voted_best")?,
        };
        for (field, v) in [
            ("grounding", j.grounding),
            ("coherence", j.coherence),
            ("non_redundancy", j.non_redundancy),
        ] {
            if !scale.contains(v) {
                return Err(r.err(
                    field,
                    format!("{v} is outside the {}..={} scale", scale.min, scale.max),
                ));
            }
        }
        let triple = (j.annotator_id.clone(), j.story_id.clone(), j.model_id.clone());
        if !seen.insert(triple) {
            return Err(r.err(
                "annotator_id",
                format!(
                    "duplicate judgment (annotator {}, story {}, model {})",
                    j.annotator_id, j.story_id, j.model_id
                ),
            ));
        }
        if j.voted_best && !votes.insert((j.annotator_id.clone(), j.story_id.clone())) {
            return Err(r.err(
                "voted_best",
                format!(
                    "annotator {} voted more than once for story {}",
                    j.annotator_id, j.story_id
                ),
            ));
        }
        out.push(j);
        Ok(())
    })?;
    Ok(out)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
