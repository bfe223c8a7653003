use rayon::prelude::*;

use super::report::{Diagnostics, ScoreReport, StoryError};
use crate::coherence::{coherence_score, CoherenceModel};
use crate::corpus::{RegionIndex, Story};
use crate::nr::nr_score;
use crate::text::IdfTable;
use crate::vg::VgScorer;
use crate::{Error, Result};

/// The scorers to run. `None` leaves that component out of the reports.
#[derive(Default)]
pub struct Scorers {
    pub vg: Option<VgScorer>,
    pub coherence: Option<CoherenceModel>,
    /// N-gram size for the non-redundancy scorer.
    pub nr_ngram: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct ScoreOptions {
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
    /// Attach per-noun, per-pair and redundancy breakdowns.
    pub verbose: bool,
    /// Also emit the unscaled grounding score.
    pub raw_vg: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            jobs: 1,
            verbose: false,
            raw_vg: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScoreRun {
    /// In input order.
    pub reports: Vec<ScoreReport>,
    pub errors: Vec<StoryError>,
}

/// Scores one story with every configured scorer.
pub fn score_story(
    story: &Story,
    regions: &RegionIndex,
    scorers: &Scorers,
    idf: Option<&IdfTable>,
    options: &ScoreOptions,
) -> Result<ScoreReport> {
    let grounding = scorers
        .vg
        .as_ref()
        .map(|s| s.score(story, regions, idf))
        .transpose()?;
    let coherence = scorers
        .coherence
        .as_ref()
        .map(|m| coherence_score(story, m))
        .transpose()?;
    let redundancy = scorers.nr_ngram.map(|n| nr_score(story, n));
    let mut report = ScoreReport {
        story_id: story.story_id.clone(),
        model_id: story.model_id.clone(),
        vg_scaled: grounding.as_ref().map(|g| g.scaled),
        vg_raw: grounding.as_ref().filter(|_| options.raw_vg).map(|g| g.raw),
        coherence: coherence.as_ref().map(|c| c.score),
        nr: redundancy.as_ref().map(|r| r.final_score),
        total: 0.0,
        diagnostics: None,
    };
    report.total = report.component_sum();
    if options.verbose {
        report.diagnostics = Some(Diagnostics {
            grounding,
            coherence,
            redundancy,
        });
    }
    Ok(report)
}

/// Scores every story. Failures are collected per story and do not stop the
/// run; report order follows input order for any number of jobs.
pub fn score_dataset(
    stories: &[Story],
    regions: &RegionIndex,
    scorers: &Scorers,
    idf: Option<&IdfTable>,
    options: &ScoreOptions,
) -> Result<ScoreRun> {
    if let Some(n) = scorers.nr_ngram {
        if n == 0 {
            return Err(Error::Config("n-gram size must be at least 1".into()));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<ScoreReport>> = pool.install(|| {
        stories
            .par_iter()
            .map(|s| score_story(s, regions, scorers, idf, options))
            .collect()
    });
    let mut run = ScoreRun::default();
    for (story, result) in stories.iter().zip(results) {
        match result {
            Ok(r) => run.reports.push(r),
            Err(e) => run.errors.push(StoryError {
                story_id: story.story_id.clone(),
                model_id: story.model_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    Ok(run)
}
