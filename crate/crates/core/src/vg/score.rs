use log::debug;
use serde::{Deserialize, Serialize};

use super::params::VgEncoderParams;
use crate::backend::{phrase_vector, region_features, VisionBackend, WordVectors};
use crate::corpus::{RegionIndex, Story};
use crate::text::{extract_nouns, IdfTable, PosTagger};
use crate::{Error, Result};

pub const DEFAULT_TOP_REGIONS: usize = 10;

/// Maps a raw grounding score into (−1, 1): `2·sigmoid(raw / 2) − 1`.
pub fn scale_score(raw: f64) -> f64 {
    1.0 / (1.0 + (-0.5 * raw).exp()) * 2.0 - 1.0
}

/// `ln Σ exp(v)`, evaluated with the maximum factored out.
pub fn lse_pool(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NounMatch {
    pub noun: String,
    pub sentence_index: usize,
    /// `image_id#rank`, rank 0 being the most confident region of the image.
    pub region: String,
    pub cosine: f64,
    pub idf: f64,
    /// `idf · cosine`, the term entering the pooled sum.
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingScore {
    pub raw: f64,
    pub scaled: f64,
    pub per_noun: Vec<NounMatch>,
    /// Nouns left out because none of their tokens has a word vector.
    pub skipped_oov: usize,
    /// Set when no noun could be matched; `raw` and `scaled` are then 0.
    pub no_nouns: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VgOptions {
    pub use_idf: bool,
    pub top_regions: usize,
}

impl Default for VgOptions {
    fn default() -> Self {
        VgOptions {
            use_idf: true,
            top_regions: DEFAULT_TOP_REGIONS,
        }
    }
}

/// Trained encoder plus the backends it needs at inference time.
pub struct VgScorer {
    pub params: VgEncoderParams,
    pub words: Box<dyn WordVectors>,
    pub vision: Box<dyn VisionBackend>,
    pub tagger: Box<dyn PosTagger>,
    pub options: VgOptions,
}

impl VgScorer {
    /// Grounding score of one story against the regions of its images.
    ///
    /// `idf` must be present when idf weighting is enabled.
    pub fn score(
        &self,
        story: &Story,
        regions: &RegionIndex,
        idf: Option<&IdfTable>,
    ) -> Result<GroundingScore> {
        let idf = match (self.options.use_idf, idf) {
            (true, None) => return Err(Error::Config("idf weighting enabled without a table".into())),
            (true, Some(t)) => Some(t),
            (false, _) => None,
        };
        if story.image_ids.is_empty() {
            return Err(Error::Empty("image sequence"));
        }
        let missing: Vec<String> = story
            .image_ids
            .iter()
            .filter(|id| regions.get(*id).is_none_or(|r| r.is_empty()))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingRegions(missing));
        }

        let mut pool = Vec::new();
        for id in &story.image_ids {
            for (rank, region) in regions[id].iter().take(self.options.top_regions).enumerate() {
                let emb = self.params.encode_image(&region_features(region, self.vision.as_ref())?)?;
                pool.push((format!("{id}#{rank}"), emb));
            }
        }

        let mut per_noun = Vec::new();
        let mut skipped_oov = 0;
        for (si, sentence) in story.sentences.iter().enumerate() {
            for noun in extract_nouns(sentence, si, self.tagger.as_ref())? {
                let vector = match phrase_vector(self.words.as_ref(), &noun.text) {
                    Ok(v) => v,
                    Err(Error::OutOfVocabulary(_)) => {
                        skipped_oov += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let emb = self.params.encode_text_vector(&vector)?;
                let (region, cos) = pool
                    .iter()
                    .map(|(rid, r)| (rid, cosine(&emb, r)))
                    .fold(None, |best: Option<(&String, f64)>, (rid, c)| match best {
                        Some((_, b)) if b >= c => best,
                        _ => Some((rid, c)),
                    })
                    .expect("region pool is non-empty");
                let w = idf.map_or(1.0, |t| t.phrase_idf(&noun.text));
                per_noun.push(NounMatch {
                    noun: noun.text,
                    sentence_index: si,
                    region: region.clone(),
                    cosine: cos,
                    idf: w,
                    weighted: w * cos,
                });
            }
        }
        if skipped_oov > 0 {
            debug!("{}: {skipped_oov} out-of-vocabulary nouns skipped", story.story_id);
        }
        Ok(GroundingScore::from_matches(per_noun, skipped_oov))
    }
}

impl GroundingScore {
    /// Pools per-noun matches into the final score.
    pub fn from_matches(per_noun: Vec<NounMatch>, skipped_oov: usize) -> Self {
        if per_noun.is_empty() {
            return GroundingScore {
                raw: 0.0,
                scaled: 0.0,
                per_noun,
                skipped_oov,
                no_nouns: true,
            };
        }
        let terms: Vec<f64> = per_noun.iter().map(|m| m.weighted).collect();
        let raw = lse_pool(&terms);
        GroundingScore {
            raw,
            scaled: scale_score(raw),
            per_noun,
            skipped_oov,
            no_nouns: false,
        }
    }
}
