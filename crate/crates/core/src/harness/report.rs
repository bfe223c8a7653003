use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::coherence::CoherenceScore;
use crate::nr::RedundancyBreakdown;
use crate::vg::GroundingScore;
use crate::{Error, Result};

/// Sum of the three sub-scores.
pub fn rovist_total(vg: f64, coherence: f64, nr: f64) -> f64 {
    vg + coherence + nr
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounding: Option<GroundingScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence: Option<CoherenceScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redundancy: Option<RedundancyBreakdown>,
}

/// Scores for one story. Components that were not run are `null`; `total`
/// sums the components that are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub story_id: String,
    #[serde(default)]
    pub model_id: String,
    pub vg_scaled: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vg_raw: Option<f64>,
    pub coherence: Option<f64>,
    pub nr: Option<f64>,
    pub total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

impl ScoreReport {
    pub fn component_sum(&self) -> f64 {
        rovist_total(
            self.vg_scaled.unwrap_or(0.0),
            self.coherence.unwrap_or(0.0),
            self.nr.unwrap_or(0.0),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryError {
    pub story_id: String,
    #[serde(default)]
    pub model_id: String,
    pub error: String,
}

/// Final line of a report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub stories: usize,
    pub scored: usize,
    pub failed: usize,
    pub mean_vg_scaled: Option<f64>,
    pub mean_coherence: Option<f64>,
    pub mean_nr: Option<f64>,
    pub mean_total: Option<f64>,
    pub errors: Vec<StoryError>,
}

impl ReportSummary {
    pub fn new(reports: &[ScoreReport], errors: &[StoryError]) -> Self {
        let mean = |f: &dyn Fn(&ScoreReport) -> Option<f64>| {
            let vals: Vec<f64> = reports.iter().filter_map(f).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        ReportSummary {
            stories: reports.len() + errors.len(),
            scored: reports.len(),
            failed: errors.len(),
            mean_vg_scaled: mean(&|r| r.vg_scaled),
            mean_coherence: mean(&|r| r.coherence),
            mean_nr: mean(&|r| r.nr),
            mean_total: mean(&|r| Some(r.total)),
            errors: errors.to_vec(),
        }
    }
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    summary: &'a ReportSummary,
}

/// One JSON line per report followed by `{"summary": {...}}`.
pub fn write_report(
    mut w: impl Write,
    reports: &[ScoreReport],
    errors: &[StoryError],
) -> std::io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    let summary = ReportSummary::new(reports, errors);
    serde_json::to_writer(&mut w, &SummaryLine { summary: &summary })?;
    w.write_all(b"\n")?;
    w.flush()
}

/// Reads the report lines of a report file, skipping the summary.
pub fn load_reports(path: impl AsRef<Path>) -> Result<Vec<ScoreReport>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line)
            .map_err(|e| Error::schema(path, i + 1, "<record>", e.to_string()))?;
        if v.get("summary").is_some() {
            continue;
        }
        out.push(
            serde_json::from_value(v)
                .map_err(|e| Error::schema(path, i + 1, "<record>", e.to_string()))?,
        );
    }
    Ok(out)
}

pub(crate) fn write_report_file(
    path: &Path,
    reports: &[ScoreReport],
    errors: &[StoryError],
) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_report(BufWriter::new(f), reports, errors).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(id: &str, vg: Option<f64>, c: f64, nr: f64) -> ScoreReport {
        let mut r = ScoreReport {
            story_id: id.into(),
            model_id: "m".into(),
            vg_scaled: vg,
            vg_raw: None,
            coherence: Some(c),
            nr: Some(nr),
            total: 0.0,
            diagnostics: None,
        };
        r.total = r.component_sum();
        r
    }

    #[test]
    fn totals() {
        assert_eq!(rovist_total(0.0, 0.0, 0.0), 0.0);
        assert!((rovist_total(0.3, 0.7, 1.0) - 2.0).abs() < 1e-15);
        assert!((rovist_total(-0.1, 0.5, 0.8) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn file_round_trip_skips_summary() {
        let reports = vec![report("a", Some(0.2), 0.5, 0.9), report("b", None, 0.4, 1.0)];
        let errors = vec![StoryError {
            story_id: "c".into(),
            model_id: "m".into(),
            error: "boom".into(),
        }];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_report_file(f.path(), &reports, &errors).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().contains("\"vg_scaled\":null"));
        let summary: Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
        assert_eq!(summary["summary"]["failed"], 1);
        assert_eq!(summary["summary"]["mean_vg_scaled"], 0.2);
        assert_eq!(load_reports(f.path()).unwrap(), reports);
    }
}
