//! The `rovist` command line.
//!
//! Exit status: 0 on success, 1 when some stories failed to score (or a run
//! failed after it started), 2 on usage and configuration errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::backend::{GloveVectors, HashedVision, HashedWordVectors, WordVectors, VISION_DIM};
use crate::coherence::{train_coherence, CoherenceModel, CoherenceTrainConfig, HashedBagEncoder};
use crate::corpus::{self, LikertScale};
use crate::harness::{
    self, correlate_with_humans, rank_correlation_by_votes, score_dataset, Criterion, ScoreOptions,
    Scorers,
};
use crate::nr::DEFAULT_NGRAM;
use crate::text::{compute_idf, IdfTable, LexiconTagger};
use crate::vg::{train_vg, VgEncoderParams, VgOptions, VgScorer, VgTrainConfig, EMBED_DIM};
use crate::Error;

/// Directory searched for backend files given by relative path that do not
/// exist relative to the working directory.
pub const CACHE_DIR_ENV: &str = "ROVIST_CACHE_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "rovist",
    version,
    about = "Reference-free scoring of visual stories",
    args_override_self = true
)]
struct Cli {
    /// Flat `key = value` file of flag defaults; keys are flag names without
    /// the leading dashes. Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score stories and write one report line per story.
    Score(ScoreArgs),
    /// Train the region/noun grounding encoder.
    TrainVg(TrainVgArgs),
    /// Train the sentence-order coherence model.
    TrainC(TrainCArgs),
    /// Compute a story-level idf table from a story file.
    BuildIdf(BuildIdfArgs),
    /// Build sentence-order training pairs from story files.
    BuildSop(BuildSopArgs),
    /// Correlate report scores with human judgments.
    Correlate(CorrelateArgs),
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Line-delimited stories.
    #[arg(long)]
    stories: PathBuf,
    /// Line-delimited region proposals (needed for grounding).
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Trained grounding encoder.
    #[arg(long = "vg", value_name = "PATH")]
    vg_params: Option<PathBuf>,
    /// Trained coherence model.
    #[arg(long = "c", value_name = "PATH")]
    c_model: Option<PathBuf>,
    /// Report destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of `vg,c,nr`. Defaults to nr plus every
    /// scorer whose artifact is given.
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<String>>,
    /// Disable idf weighting of noun similarities.
    #[arg(long, conflicts_with = "idf_table")]
    no_idf: bool,
    /// Prebuilt idf table; by default idf is computed over the scored stories.
    #[arg(long)]
    idf_table: Option<PathBuf>,
    /// Also emit the unscaled grounding score as `vg_raw`.
    #[arg(long)]
    raw_vg: bool,
    /// Regions kept per image, by detector confidence.
    #[arg(long, default_value_t = crate::vg::DEFAULT_TOP_REGIONS)]
    top_regions: usize,
    /// N-gram size for intra-sentence redundancy.
    #[arg(long, default_value_t = DEFAULT_NGRAM)]
    ngram: usize,
    /// GloVe-format word vectors; hashed stub vectors when omitted.
    #[arg(long)]
    word_vectors: Option<PathBuf>,
    /// Extra `word<TAB>TAG` lexicon entries for the noun tagger.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Model id for stories that do not carry one.
    #[arg(long)]
    model_id: Option<String>,
    /// Include per-noun, per-pair and redundancy breakdowns.
    #[arg(long)]
    verbose: bool,
    /// Stories scored in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct TrainVgArgs {
    /// Line-delimited entity/region pairs.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5e-5)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 3)]
    patience: usize,
    #[arg(long, default_value_t = 1e-5)]
    weight_decay: f64,
    /// Fractional learning-rate reduction per epoch.
    #[arg(long, default_value_t = 0.05)]
    lr_decay: f64,
    #[arg(long, default_value_t = 30)]
    max_epochs: usize,
    #[arg(long, default_value_t = EMBED_DIM)]
    embed_dim: usize,
    /// Feature width produced for crop payloads by the stub vision backend.
    #[arg(long, default_value_t = VISION_DIM)]
    vision_dim: usize,
    #[arg(long)]
    word_vectors: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainCArgs {
    /// Line-delimited sentence-order examples.
    #[arg(long)]
    sop: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-5)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, default_value_t = 1e-5)]
    weight_decay: f64,
    #[arg(long, default_value_t = 0.05)]
    lr_decay: f64,
    #[arg(long, default_value_t = 30)]
    max_epochs: usize,
    /// Per-sentence width of the hashed pair encoder (pooled width is twice this).
    #[arg(long, default_value_t = 512)]
    segment_dim: usize,
    /// Maximum formatted pair length in tokens.
    #[arg(long, default_value_t = 128)]
    max_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct BuildIdfArgs {
    #[arg(long)]
    stories: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BuildSopArgs {
    /// Story files; may be repeated.
    #[arg(long, required = true)]
    stories: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    #[arg(long)]
    reports: Option<PathBuf>,
    #[arg(long)]
    judgments: PathBuf,
    /// grounding, coherence, non_redundancy, overall or all.
    #[arg(long, default_value = "overall")]
    criterion: String,
    /// Rank models by vote share per photo sequence instead of joining reports.
    #[arg(long)]
    by_votes: bool,
    #[arg(long, default_value_t = 1)]
    likert_min: i64,
    #[arg(long, default_value_t = 5)]
    likert_max: i64,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Artifact { .. } | Error::Schema { .. } | Error::Dimension { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Run(other.to_string()),
        }
    }
}

const SUBCOMMANDS: [&str; 6] = ["score", "train-vg", "train-c", "build-idf", "build-sop", "correlate"];

/// Splices `key = value` lines from `--config` in front of the user's flags
/// so that command-line values win.
fn expand_config(args: Vec<OsString>) -> std::result::Result<Vec<OsString>, String> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut extra = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key = value", path.display(), n + 1))?;
        let (key, value) = (key.trim().trim_start_matches('-'), value.trim());
        match value {
            "true" => extra.push(OsString::from(format!("--{key}"))),
            "false" => {}
            v => {
                extra.push(OsString::from(format!("--{key}")));
                extra.push(OsString::from(v));
            }
        }
    }
    let Some(at) = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(args);
    };
    let mut out = args[..=at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[at + 1..]);
    Ok(out)
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Score(a) => cmd_score(a),
        Command::TrainVg(a) => cmd_train_vg(a).map(|()| 0),
        Command::TrainC(a) => cmd_train_c(a).map(|()| 0),
        Command::BuildIdf(a) => cmd_build_idf(a).map(|()| 0),
        Command::BuildSop(a) => cmd_build_sop(a).map(|()| 0),
        Command::Correlate(a) => cmd_correlate(a).map(|()| 0),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

fn require_file(path: &Path) -> std::result::Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{}: no such file", path.display())))
    }
}

fn require_out_dir(path: &Path) -> std::result::Result<(), Failure> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(Failure::Usage(format!(
            "{}: output directory does not exist",
            p.display()
        ))),
        _ => Ok(()),
    }
}

/// Resolves a backend file, falling back to the cache directory.
fn backend_path(path: &Path) -> std::result::Result<PathBuf, Failure> {
    if path.is_file() {
        return Ok(path.to_path_buf());
    }
    if path.is_relative() {
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV) {
            let candidate = Path::new(&dir).join(path);
            if candidate.is_file() {
                return Ok(candidate);
            }
        }
    }
    Err(Failure::Usage(format!("{}: no such file", path.display())))
}

fn word_vectors(path: Option<&Path>, dim: usize) -> std::result::Result<Box<dyn WordVectors>, Failure> {
    match path {
        Some(p) => {
            let g = GloveVectors::load(backend_path(p)?)?;
            if g.dim() != dim {
                return Err(Failure::Usage(format!(
                    "word vectors have {} dimensions, the encoder expects {dim}",
                    g.dim()
                )));
            }
            Ok(Box::new(g))
        }
        None => Ok(Box::new(HashedWordVectors::new(dim))),
    }
}

fn cmd_score(a: ScoreArgs) -> std::result::Result<i32, Failure> {
    let only: Option<Vec<&str>> = a.only.as_ref().map(|v| v.iter().map(|s| s.trim()).collect());
    if let Some(o) = &only {
        if let Some(bad) = o.iter().find(|s| !["vg", "c", "nr"].contains(s)) {
            return Err(Failure::Usage(format!("--only: unknown scorer `{bad}`")));
        }
    }
    let wants = |name: &str, have: bool| match &only {
        Some(o) => o.contains(&name),
        None => have,
    };
    let run_vg = wants("vg", a.vg_params.is_some());
    let run_c = wants("c", a.c_model.is_some());
    let run_nr = wants("nr", true);

    require_file(&a.stories)?;
    if let Some(out) = &a.out {
        require_out_dir(out)?;
    }
    if run_vg && a.vg_params.is_none() {
        return Err(Failure::Usage("grounding requested without --vg".into()));
    }
    if run_vg && a.regions.is_none() {
        return Err(Failure::Usage("grounding requested without --regions".into()));
    }
    if run_c && a.c_model.is_none() {
        return Err(Failure::Usage("coherence requested without --c".into()));
    }
    if a.jobs == 0 || a.ngram == 0 || a.top_regions == 0 {
        return Err(Failure::Usage("--jobs, --ngram and --top-regions must be positive".into()));
    }
    for p in [&a.regions, &a.vg_params, &a.c_model, &a.idf_table, &a.lexicon]
        .into_iter()
        .flatten()
    {
        require_file(p)?;
    }

    let mut stories = corpus::load_stories(&a.stories)?;
    if let Some(m) = &a.model_id {
        for s in stories.iter_mut().filter(|s| s.model_id.is_empty()) {
            s.model_id = m.clone();
        }
    }
    let mut scorers = Scorers {
        nr_ngram: run_nr.then_some(a.ngram),
        ..Default::default()
    };
    let mut regions = corpus::RegionIndex::new();
    let mut idf = None;
    if run_vg {
        let params = VgEncoderParams::load(a.vg_params.as_ref().unwrap())?;
        regions = corpus::load_regions(a.regions.as_ref().unwrap())?;
        let tagger = match &a.lexicon {
            Some(p) => LexiconTagger::english_with_file(p)?,
            None => LexiconTagger::english(),
        };
        let words = word_vectors(a.word_vectors.as_deref(), params.text_in())?;
        if !a.no_idf {
            idf = Some(match &a.idf_table {
                Some(p) => IdfTable::load(p)?,
                None => compute_idf(&stories)?,
            });
        }
        scorers.vg = Some(VgScorer {
            vision: Box::new(HashedVision::new(params.image_in())),
            params,
            words,
            tagger: Box::new(tagger),
            options: VgOptions {
                use_idf: !a.no_idf,
                top_regions: a.top_regions,
            },
        });
    }
    if run_c {
        scorers.coherence = Some(CoherenceModel::load(a.c_model.as_ref().unwrap())?);
    }

    let options = ScoreOptions {
        jobs: a.jobs,
        verbose: a.verbose,
        raw_vg: a.raw_vg,
    };
    let run = score_dataset(&stories, &regions, &scorers, idf.as_ref(), &options)?;
    match &a.out {
        Some(p) => harness::write_report_file(p, &run.reports, &run.errors)?,
        None => {
            let stdout = std::io::stdout();
            harness::write_report(stdout.lock(), &run.reports, &run.errors)
                .map_err(|e| Failure::Run(e.to_string()))?;
        }
    }
    for e in &run.errors {
        warn!("story {} failed: {}", e.story_id, e.error);
    }
    info!("scored {} of {} stories", run.reports.len(), stories.len());
    Ok(if run.errors.is_empty() { 0 } else { 1 })
}

fn cmd_train_vg(a: TrainVgArgs) -> std::result::Result<(), Failure> {
    require_file(&a.pairs)?;
    require_out_dir(&a.out)?;
    let config = VgTrainConfig {
        learning_rate: a.lr,
        weight_decay: a.weight_decay,
        lr_decay: a.lr_decay,
        batch_size: a.batch,
        patience: a.patience,
        max_epochs: a.max_epochs,
        embed_dim: a.embed_dim,
        seed: a.seed,
        ..Default::default()
    };
    config.validate()?;
    let words: Box<dyn WordVectors> = match &a.word_vectors {
        Some(p) => Box::new(GloveVectors::load(backend_path(p)?)?),
        None => Box::new(HashedWordVectors::default()),
    };
    let pairs = corpus::load_entity_pairs(&a.pairs)?;
    let out = train_vg(&pairs, words.as_ref(), &HashedVision::new(a.vision_dim), &config)?;
    out.params.save(&a.out)?;
    info!(
        "best epoch {} of {}; train loss {:.6} -> {:.6}",
        out.best_epoch,
        out.history.len(),
        out.initial_train_loss,
        out.final_train_loss
    );
    Ok(())
}

fn cmd_train_c(a: TrainCArgs) -> std::result::Result<(), Failure> {
    require_file(&a.sop)?;
    require_out_dir(&a.out)?;
    let config = CoherenceTrainConfig {
        learning_rate: a.lr,
        weight_decay: a.weight_decay,
        lr_decay: a.lr_decay,
        batch_size: a.batch,
        patience: a.patience,
        max_epochs: a.max_epochs,
        seed: a.seed,
        ..Default::default()
    };
    config.validate()?;
    if a.segment_dim == 0 {
        return Err(Failure::Usage("--segment-dim must be positive".into()));
    }
    let data = corpus::load_sop(&a.sop)?;
    let out = train_coherence(&data, Box::new(HashedBagEncoder::new(a.segment_dim, a.max_len)), &config)?;
    out.model.save(&a.out)?;
    if let Some(best) = out.best() {
        info!(
            "best epoch {}: val loss {:.6}, val accuracy {:.4}",
            best.epoch, best.val_loss, best.val_accuracy
        );
    }
    Ok(())
}

fn cmd_build_idf(a: BuildIdfArgs) -> std::result::Result<(), Failure> {
    require_file(&a.stories)?;
    require_out_dir(&a.out)?;
    let stories = corpus::load_stories(&a.stories)?;
    let table = compute_idf(&stories)?;
    table.save(&a.out)?;
    info!("idf over {} stories", table.story_count());
    Ok(())
}

fn cmd_build_sop(a: BuildSopArgs) -> std::result::Result<(), Failure> {
    for p in &a.stories {
        require_file(p)?;
    }
    require_out_dir(&a.out)?;
    let mut stories = Vec::new();
    for p in &a.stories {
        stories.extend(corpus::load_stories(p)?);
    }
    let data = corpus::build_sop_dataset(&stories, a.seed);
    corpus::write_sop(&a.out, &data)?;
    eprintln!(
        "{} adjacent pairs, {} examples ({} in order, {} swapped)",
        data.len() / 2,
        data.len(),
        data.len() / 2,
        data.len() / 2
    );
    Ok(())
}

fn cmd_correlate(a: CorrelateArgs) -> std::result::Result<(), Failure> {
    require_file(&a.judgments)?;
    let criteria: Vec<Criterion> = if a.criterion == "all" {
        Criterion::ALL.to_vec()
    } else {
        vec![a.criterion.parse()?]
    };
    let scale = LikertScale::new(a.likert_min, a.likert_max)?;
    let judgments = corpus::load_judgments(&a.judgments, scale)?;
    let mut out = std::io::stdout().lock();
    let io = |e: std::io::Error| Failure::Run(e.to_string());
    if a.by_votes {
        let rows = rank_correlation_by_votes(&judgments)?;
        writeln!(out, "{:<16}{:>10}{:>10}{:>10}{:>10}", "criterion", "sequences", "spearman", "pearson", "kendall").map_err(io)?;
        for r in rows.iter().filter(|r| criteria.contains(&r.criterion)) {
            writeln!(
                out,
                "{:<16}{:>10}{:>10.3}{:>10.3}{:>10.3}",
                r.criterion.name(),
                r.sequences,
                r.spearman_rho,
                r.pearson_r,
                r.kendall_tau
            )
            .map_err(io)?;
        }
        return Ok(());
    }
    let Some(reports_path) = &a.reports else {
        return Err(Failure::Usage("--reports is required unless --by-votes is set".into()));
    };
    require_file(reports_path)?;
    let reports = harness::load_reports(reports_path)?;
    writeln!(out, "{:<16}{:>10}{:>10}{:>10}{:>10}", "criterion", "n", "spearman", "pearson", "kendall").map_err(io)?;
    for c in criteria {
        let r = correlate_with_humans(&reports, &judgments, c)?;
        writeln!(
            out,
            "{:<16}{:>10}{:>10.3}{:>10.3}{:>10.3}",
            c.name(),
            r.sample_size,
            r.spearman_rho,
            r.pearson_r,
            r.kendall_tau
        )
        .map_err(io)?;
    }
    Ok(())
}
