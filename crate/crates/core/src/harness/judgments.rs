use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::report::ScoreReport;
use super::stats::{correlate, midranks, CorrelationResult};
use crate::corpus::HumanJudgment;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Grounding,
    Coherence,
    NonRedundancy,
    Overall,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::Grounding,
        Criterion::Coherence,
        Criterion::NonRedundancy,
        Criterion::Overall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Grounding => "grounding",
            Criterion::Coherence => "coherence",
            Criterion::NonRedundancy => "non_redundancy",
            Criterion::Overall => "overall",
        }
    }

    /// The report column measuring this criterion.
    fn metric(self, r: &ScoreReport) -> Option<f64> {
        match self {
            Criterion::Grounding => r.vg_scaled,
            Criterion::Coherence => r.coherence,
            Criterion::NonRedundancy => r.nr,
            Criterion::Overall => Some(r.total),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown criterion `{s}`")))
    }
}

/// Annotator-averaged scores for one (story, model).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumanMeans {
    pub grounding: f64,
    pub coherence: f64,
    pub non_redundancy: f64,
    pub votes: usize,
    pub annotators: usize,
}

impl HumanMeans {
    /// Overall is the sum of the three criterion means.
    pub fn get(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Grounding => self.grounding,
            Criterion::Coherence => self.coherence,
            Criterion::NonRedundancy => self.non_redundancy,
            Criterion::Overall => self.grounding + self.coherence + self.non_redundancy,
        }
    }
}

type Key = (String, String);

/// Mean human scores keyed by (story_id, model_id).
pub fn human_means(judgments: &[HumanJudgment]) -> BTreeMap<Key, HumanMeans> {
    let mut acc: BTreeMap<Key, ([i64; 3], usize, usize)> = BTreeMap::new();
    for j in judgments {
        let e = acc
            .entry((j.story_id.clone(), j.model_id.clone()))
            .or_insert(([0; 3], 0, 0));
        e.0[0] += j.grounding;
        e.0[1] += j.coherence;
        e.0[2] += j.non_redundancy;
        e.1 += 1;
        e.2 += usize::from(j.voted_best);
    }
    acc.into_iter()
        .map(|(k, (s, n, votes))| {
            let d = n as f64;
            (
                k,
                HumanMeans {
                    grounding: s[0] as f64 / d,
                    coherence: s[1] as f64 / d,
                    non_redundancy: s[2] as f64 / d,
                    votes,
                    annotators: n,
                },
            )
        })
        .collect()
}

/// Correlates a metric column with annotator-averaged human scores, joining
/// on (story_id, model_id).
pub fn correlate_with_humans(
    reports: &[ScoreReport],
    judgments: &[HumanJudgment],
    criterion: Criterion,
) -> Result<CorrelationResult> {
    let means = human_means(judgments);
    let mut unmatched = Vec::new();
    let mut metric = Vec::new();
    let mut human = Vec::new();
    for r in reports {
        let Some(m) = means.get(&(r.story_id.clone(), r.model_id.clone())) else {
            unmatched.push(format!("{}/{}", r.story_id, r.model_id));
            continue;
        };
        let value = criterion.metric(r).ok_or_else(|| {
            Error::Config(format!(
                "report {}/{} has no {criterion} score",
                r.story_id, r.model_id
            ))
        })?;
        metric.push(value);
        human.push(m.get(criterion));
    }
    if !unmatched.is_empty() {
        return Err(Error::Join(unmatched));
    }
    correlate(&metric, &human)
}

/// Human criterion scores against vote-share ranks, averaged over photo
/// sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteCorrelation {
    pub criterion: Criterion,
    pub spearman_rho: f64,
    pub pearson_r: f64,
    pub kendall_tau: f64,
    /// Sequences that entered the average.
    pub sequences: usize,
    /// Sequences where a coefficient is undefined (constant scores or votes).
    pub skipped: usize,
}

/// For each photo sequence, ranks the competing models by vote share and
/// correlates the rank with each criterion's mean human score; the
/// coefficients are then averaged across sequences.
pub fn rank_correlation_by_votes(judgments: &[HumanJudgment]) -> Result<Vec<VoteCorrelation>> {
    let mut by_story: BTreeMap<String, Vec<HumanMeans>> = BTreeMap::new();
    for ((story, _), m) in human_means(judgments) {
        by_story.entry(story).or_default().push(m);
    }
    if by_story.is_empty() {
        return Err(Error::Empty("judgment list"));
    }
    let mut ranked = Vec::new();
    for (story, models) in &by_story {
        if models.len() < 2 {
            return Err(Error::Config(format!("story {story} has fewer than 2 models")));
        }
        let total: usize = models.iter().map(|m| m.votes).sum();
        if total == 0 {
            return Err(Error::Config(format!("story {story} received no votes")));
        }
        let shares: Vec<f64> = models.iter().map(|m| m.votes as f64 / total as f64).collect();
        ranked.push((models, midranks(&shares)));
    }

    let mut out = Vec::new();
    for criterion in Criterion::ALL {
        let mut sums = [0.0; 3];
        let mut used = 0;
        let mut skipped = 0;
        for (models, ranks) in &ranked {
            let scores: Vec<f64> = models.iter().map(|m| m.get(criterion)).collect();
            match correlate(&scores, ranks) {
                Ok(c) => {
                    sums[0] += c.spearman_rho;
                    sums[1] += c.pearson_r;
                    sums[2] += c.kendall_tau;
                    used += 1;
                }
                Err(Error::UndefinedCorrelation(_)) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if used == 0 {
            return Err(Error::UndefinedCorrelation(format!(
                "{criterion}: no sequence has a defined correlation"
            )));
        }
        let n = used as f64;
        out.push(VoteCorrelation {
            criterion,
            spearman_rho: sums[0] / n,
            pearson_r: sums[1] / n,
            kendall_tau: sums[2] / n,
            sequences: used,
            skipped,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j(story: &str, model: &str, annotator: &str, g: i64, vote: bool) -> HumanJudgment {
        HumanJudgment {
            story_id: story.into(),
            model_id: model.into(),
            annotator_id: annotator.into(),
            grounding: g,
            coherence: g,
            non_redundancy: g,
            voted_best: vote,
        }
    }

    fn report(story: &str, model: &str, value: f64) -> ScoreReport {
        ScoreReport {
            story_id: story.into(),
            model_id: model.into(),
            vg_scaled: Some(value),
            vg_raw: None,
            coherence: Some(value),
            nr: Some(value),
            total: 3.0 * value,
            diagnostics: None,
        }
    }

    #[test]
    fn means_average_annotators() {
        let js = vec![j("s", "m", "a", 2, false), j("s", "m", "b", 5, true)];
        let m = human_means(&js)[&("s".to_string(), "m".to_string())];
        assert_eq!(m.grounding, 3.5);
        assert_eq!(m.get(Criterion::Overall), 10.5);
        assert_eq!(m.votes, 1);
    }

    #[test]
    fn metric_equal_to_humans_is_perfect() {
        let js: Vec<HumanJudgment> = (1..=4).map(|i| j("s", &format!("m{i}"), "a", i, false)).collect();
        let reports: Vec<ScoreReport> = (1..=4).map(|i| report("s", &format!("m{i}"), i as f64)).collect();
        for c in Criterion::ALL {
            let r = correlate_with_humans(&reports, &js, c).unwrap();
            assert_eq!(r.sample_size, 4);
            assert!((r.spearman_rho - 1.0).abs() < 1e-12);
            assert!((r.pearson_r - 1.0).abs() < 1e-12);
            assert!((r.kendall_tau - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unmatched_reports_are_listed() {
        let js = vec![j("s", "m1", "a", 1, false), j("s", "m2", "a", 2, false)];
        let reports = vec![report("s", "m1", 1.0), report("s", "zz", 2.0)];
        match correlate_with_humans(&reports, &js, Criterion::Overall) {
            Err(Error::Join(keys)) => assert_eq!(keys, ["s/zz"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn absent_component_is_an_error() {
        let js = vec![j("s", "m1", "a", 1, false), j("s", "m2", "a", 2, false)];
        let mut reports = vec![report("s", "m1", 1.0), report("s", "m2", 2.0)];
        reports[0].vg_scaled = None;
        assert!(correlate_with_humans(&reports, &js, Criterion::Grounding).is_err());
        assert!(correlate_with_humans(&reports, &js, Criterion::Coherence).is_ok());
    }

    #[test]
    fn votes_agreeing_with_scores() {
        // m3 gets both votes and the highest score, m1 none and the lowest
        let js = vec![
            j("s", "m1", "a", 1, false),
            j("s", "m2", "a", 2, false),
            j("s", "m3", "a", 3, true),
            j("s", "m1", "b", 1, false),
            j("s", "m2", "b", 3, true),
            j("s", "m3", "b", 5, false),
        ];
        let out = rank_correlation_by_votes(&js).unwrap();
        let g = &out[0];
        assert_eq!(g.criterion, Criterion::Grounding);
        // shares (0, .5, .5) tie m2 and m3, so rho is below 1 here
        assert!(g.spearman_rho > 0.8);
    }

    #[test]
    fn averaging_across_sequences() {
        let js = vec![
            // sequence 1: vote ranking equals score ranking -> rho = 1
            j("s1", "a", "u1", 1, false),
            j("s1", "b", "u1", 2, false),
            j("s1", "c", "u1", 3, true),
            j("s1", "a", "u2", 1, false),
            j("s1", "b", "u2", 2, true),
            j("s1", "c", "u2", 3, false),
            j("s1", "c", "u3", 3, true),
            j("s1", "a", "u3", 1, false),
            j("s1", "b", "u3", 2, false),
            // sequence 2: vote shares 0, 1/3, 2/3 against scores 2, 1, 2 -> rho = 0
            j("s2", "a", "u1", 2, false),
            j("s2", "b", "u1", 1, true),
            j("s2", "c", "u1", 2, false),
            j("s2", "a", "u2", 2, false),
            j("s2", "b", "u2", 1, false),
            j("s2", "c", "u2", 2, true),
            j("s2", "a", "u3", 2, false),
            j("s2", "b", "u3", 1, false),
            j("s2", "c", "u3", 2, true),
        ];
        let out = rank_correlation_by_votes(&js).unwrap();
        assert_eq!(out[0].sequences, 2);
        assert!((out[0].spearman_rho - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sequences_without_votes_fail() {
        let js = vec![j("s", "m1", "a", 1, false), j("s", "m2", "a", 2, false)];
        assert!(rank_correlation_by_votes(&js).is_err());
    }

    #[test]
    fn criterion_names() {
        for c in Criterion::ALL {
            assert_eq!(c.name().parse::<Criterion>().unwrap(), c);
        }
        assert!("fluency".parse::<Criterion>().is_err());
    }
}
