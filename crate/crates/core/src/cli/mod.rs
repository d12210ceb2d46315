//! Command implementations behind the `story-events` binary. Each command
//! reads a [`RunConfig`], writes into the fixed [`RunLayout`] and returns what
//! it produced, so the same runs can be driven from code.

mod config;

pub use config::{ModelFamily, RunConfig, RunLayout, SplitConfig, SweepConfig, ECHO_FILE};

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::{
    benchmark_expansion, export_for_review, label_unlabeled, merge_reviewed, read_unlabeled_dir, resolve_overlaps,
    ComparisonReport, EventExtractor, ReviewBatch,
};
use crate::corpus::{
    compute_stats, corpus_from_records, corpus_records, load_brat_dir, read_jsonl, read_split_manifest, seeded_split,
    segment_story, split_corpus, story_id, text_files, validate_brat, write_brat_dir, write_jsonl, AnnotatedSentence,
    Corpus, DatasetStats, EventClass, EventMention, LabelMode, MentionRecord, PredictedMention, Provenance,
    SentenceKey, SentenceRecord, Source, Split, Story, Violation, ViolationKind,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, write_reports, EvalResults, MatchCriterion};
use crate::promptee::{train_prompt_model_with, BackboneRegistry, PromptModel, PROMPT_CHECKPOINT_FORMAT};
use crate::tagging::{train_tagger_with, TaggerModel, TrainingLog, CHECKPOINT_FORMAT};

/// A trained model of either family.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Tagger(TaggerModel),
    Prompt(PromptModel),
}

impl TrainedModel {
    /// Load a checkpoint of either family, recognised by its format string.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(path))?;
        let format = value.get("format").and_then(|f| f.as_str()).unwrap_or_default().to_string();
        let model = if format == CHECKPOINT_FORMAT {
            TaggerModel::from_checkpoint(serde_json::from_value(value)?).map(Self::Tagger)
        } else if format == PROMPT_CHECKPOINT_FORMAT {
            PromptModel::from_checkpoint(&serde_json::from_value(value)?).map(Self::Prompt)
        } else {
            Err(Error::Checkpoint(format!("unrecognised checkpoint format {format:?}")))
        };
        model.map_err(|e| e.in_file(path))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            Self::Tagger(m) => m.save(path),
            Self::Prompt(m) => m.save(path),
        }
    }

    pub fn family(&self) -> ModelFamily {
        match self {
            Self::Tagger(_) => ModelFamily::Tagger,
            Self::Prompt(_) => ModelFamily::Prompt,
        }
    }

    pub fn predict_corpus(
        &self,
        corpus: &Corpus,
        split: Option<Split>,
    ) -> Result<BTreeMap<SentenceKey, Vec<PredictedMention>>> {
        match self {
            Self::Tagger(m) => Ok(m.predict_corpus(corpus, split)),
            Self::Prompt(m) => m.predict_corpus(corpus, split),
        }
    }
}

impl EventExtractor for TrainedModel {
    fn mode(&self) -> LabelMode {
        match self {
            Self::Tagger(m) => m.mode(),
            Self::Prompt(m) => m.config.mode,
        }
    }

    fn extract(&self, sentence: &AnnotatedSentence) -> Result<Vec<PredictedMention>> {
        match self {
            Self::Tagger(m) => Ok(m.predict_tags(sentence)),
            Self::Prompt(m) => m.extract_events(sentence),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

fn write_records(path: &Path, records: &[SentenceRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(BufWriter::new(file), records).map_err(|e| e.in_file(path))
}

pub fn read_jsonl_corpus(path: &Path) -> Result<Corpus> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let records = read_jsonl(BufReader::new(file)).map_err(|e| e.in_file(path))?;
    corpus_from_records(&records).map_err(|e| e.in_file(path))
}

/// A BRAT directory (with its split manifest, if any) or a JSONL file.
pub fn read_corpus(path: &Path) -> Result<Corpus> {
    if !path.is_dir() {
        return read_jsonl_corpus(path);
    }
    let corpus = load_brat_dir(path)?;
    if path.join("train.txt").exists() {
        let (train, dev, test) = read_split_manifest(path)?;
        return split_corpus(corpus, &train, &dev, &test);
    }
    Ok(corpus)
}

/// The configured corpus with splits resolved: an explicit manifest wins,
/// then any split the corpus carries, then the seeded sizes.
pub fn load_corpus(config: &RunConfig) -> Result<Corpus> {
    let path = config.corpus.as_ref().ok_or_else(|| Error::Config("no corpus configured (set `corpus`)".into()))?;
    let corpus = read_corpus(path)?;
    if let Some(dir) = &config.splits {
        let (train, dev, test) = read_split_manifest(dir)?;
        return split_corpus(corpus, &train, &dev, &test);
    }
    if corpus.split.is_empty() && config.split.is_set() {
        let ids: Vec<String> = corpus.stories.iter().map(|s| s.id.clone()).collect();
        let s = &config.split;
        let (train, dev, test) = seeded_split(&ids, s.train, s.dev, s.test, s.seed)?;
        return split_corpus(corpus, &train, &dev, &test);
    }
    Ok(corpus)
}

pub fn backbone_registry(config: &RunConfig) -> Result<BackboneRegistry> {
    let mut registry = BackboneRegistry::default();
    if let Some(path) = &config.backbone_registry {
        registry.load_file(path)?;
    }
    Ok(registry)
}

/// Train the configured family on `corpus` without touching the disk.
pub fn train_model(config: &RunConfig, corpus: &Corpus) -> Result<(TrainedModel, TrainingLog)> {
    let progress = |epoch: usize, log: &TrainingLog| {
        log::info!(
            "epoch {}: loss {:.4}{}",
            epoch + 1,
            log.epoch_losses.last().copied().unwrap_or(f64::NAN),
            log.dev_scores.last().map(|d| format!(", dev {d:.4}")).unwrap_or_default()
        );
    };
    match config.model {
        ModelFamily::Tagger => {
            train_tagger_with(&config.tagger, corpus, progress).map(|(m, log)| (TrainedModel::Tagger(m), log))
        }
        ModelFamily::Prompt => {
            let registry = backbone_registry(config)?;
            let spec = registry.get(&config.prompt.backbone)?;
            train_prompt_model_with(&config.prompt, corpus, spec, progress)
                .map(|(m, log)| (TrainedModel::Prompt(m), log))
        }
    }
}

fn is_fatal(kind: ViolationKind) -> bool {
    matches!(
        kind,
        ViolationKind::Malformed
            | ViolationKind::OffsetOutOfBounds
            | ViolationKind::SurfaceMismatch
            | ViolationKind::UnknownClass
    )
}

/// One violation with the `.ann` file it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileViolation {
    pub file: PathBuf,
    #[serde(flatten)]
    pub violation: Violation,
}

impl std::fmt::Display for FileViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v = &self.violation;
        write!(f, "{}", self.file.display())?;
        if let Some(line) = v.line {
            write!(f, ":{line}")?;
        }
        write!(f, ": {:?}: {}", v.kind, v.message)
    }
}

/// Every violation in a BRAT directory, in file order. A `.txt` without an
/// `.ann` is an unannotated story, not a problem.
pub fn cmd_validate(dir: &Path) -> Result<Vec<FileViolation>> {
    let mut out = Vec::new();
    for txt in text_files(dir)? {
        if crate::corpus::is_manifest(dir, &txt) {
            continue;
        }
        let ann_path = txt.with_extension("ann");
        let text = fs::read_to_string(&txt).map_err(|e| Error::io(&txt, e))?;
        let ann = if ann_path.exists() {
            fs::read_to_string(&ann_path).map_err(|e| Error::io(&ann_path, e))?
        } else {
            String::new()
        };
        out.extend(
            validate_brat(&story_id(&txt), &text, &ann)
                .into_iter()
                .map(|violation| FileViolation { file: ann_path.clone(), violation }),
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub stories: usize,
    pub sentences: usize,
    pub mentions: usize,
    /// Non-fatal violations (duplicates, overlaps, sentence crossings).
    pub warnings: Vec<FileViolation>,
    pub jsonl: PathBuf,
    pub report: PathBuf,
}

pub const INGEST_JSONL: &str = "corpus.jsonl";

/// Parse, validate and align a BRAT directory and write `corpus.jsonl` plus
/// `reports/validation.json` under `out`. Offset, surface, class and syntax
/// problems abort with their file and line, after the report is written.
pub fn cmd_ingest(raw_dir: &Path, out: &Path) -> Result<IngestSummary> {
    let layout = RunLayout::new(out);
    let violations = cmd_validate(raw_dir)?;
    let (fatal, warnings): (Vec<_>, Vec<_>) = violations.into_iter().partition(|v| is_fatal(v.violation.kind));
    let report = layout.reports().join("validation.json");
    #[derive(Serialize)]
    struct Report<'a> {
        errors: &'a [FileViolation],
        warnings: &'a [FileViolation],
    }
    write_json(&report, &Report { errors: &fatal, warnings: &warnings })?;
    if !fatal.is_empty() {
        return Err(Error::Validation(fatal.iter().map(|v| v.to_string()).collect()));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let corpus = read_corpus(raw_dir)?;
    let jsonl = out.join(INGEST_JSONL);
    write_records(&jsonl, &corpus_records(&corpus))?;
    Ok(IngestSummary {
        stories: corpus.stories.len(),
        sentences: corpus.stories.iter().map(|s| s.sentences.len()).sum(),
        mentions: corpus.num_mentions(),
        warnings,
        jsonl,
        report,
    })
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write `stats.json`, `top_triggers.csv`, `sources.csv` and `classes.csv`
/// into `out/reports`.
pub fn cmd_stats(corpus: &Corpus, out: &Path) -> Result<DatasetStats> {
    let stats = compute_stats(corpus)?;
    let dir = RunLayout::new(out).reports();
    write_json(&dir.join("stats.json"), &stats)?;
    write_csv(
        &dir.join("top_triggers.csv"),
        &["surface", "count", "occurrences", "event_rate"],
        stats
            .top_triggers
            .iter()
            .map(|t| [t.surface.clone(), t.count.to_string(), t.occurrences.to_string(), t.event_rate.to_string()]),
    )?;
    write_csv(
        &dir.join("sources.csv"),
        &["source", "stories", "events"],
        stats.per_source.iter().map(|(s, c)| [s.code().to_string(), c.stories.to_string(), c.events.to_string()]),
    )?;
    let split_count = |split: Split, c: EventClass| {
        stats.per_split_class_counts.get(&split).and_then(|m| m.get(&c)).copied().unwrap_or(0).to_string()
    };
    write_csv(
        &dir.join("classes.csv"),
        &["class", "total", "train", "dev", "test"],
        EventClass::ALL.iter().map(|&c| {
            [
                c.code().to_string(),
                stats.per_class_counts.get(&c).copied().unwrap_or(0).to_string(),
                split_count(Split::Train, c),
                split_count(Split::Dev, c),
                split_count(Split::Test, c),
            ]
        }),
    )?;
    Ok(stats)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub log: TrainingLog,
    pub checkpoint: PathBuf,
}

/// Train the configured family and write the checkpoint, `logs/train_log.json`
/// and `logs/losses.csv`.
pub fn cmd_train(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let layout = config.layout();
    layout.prepare(config)?;
    let corpus = load_corpus(config)?;
    if corpus.stories_in(Split::Train).next().is_none() {
        return Err(Error::Split("the corpus has no train split".into()));
    }
    let (model, log) = train_model(config, &corpus)?;
    let checkpoint = layout.checkpoint();
    model.save(&checkpoint)?;
    write_json(&layout.logs().join("train_log.json"), &log)?;
    write_csv(
        &layout.logs().join("losses.csv"),
        &["epoch", "loss"],
        log.epoch_losses.iter().enumerate().map(|(i, l)| [(i + 1).to_string(), l.to_string()]),
    )?;
    Ok(TrainOutcome { model, log, checkpoint })
}

/// The configured criterion plus the detection (span) and classification
/// (span + class) views, all with the criterion's overlap setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub criterion: String,
    pub configured: EvalResults,
    pub detection: EvalResults,
    pub classification: EvalResults,
}

/// Score `predictions` three ways and write `eval`, `eval_detection` and
/// `eval_classification` reports (JSON, text, confusion CSV) into `dir`.
pub fn evaluate_and_report(
    gold: &Corpus,
    predictions: &BTreeMap<SentenceKey, Vec<PredictedMention>>,
    criterion: MatchCriterion,
    dir: &Path,
) -> Result<EvalOutcome> {
    let configured = evaluate(gold, predictions, criterion)?;
    let detection = evaluate(gold, predictions, MatchCriterion::SPAN.with_overlap(criterion.overlap))?;
    let classification = evaluate(gold, predictions, MatchCriterion::SPAN_AND_CLASS.with_overlap(criterion.overlap))?;
    write_reports(&configured, dir, "eval")?;
    write_reports(&detection, dir, "eval_detection")?;
    write_reports(&classification, dir, "eval_classification")?;
    Ok(EvalOutcome { criterion: criterion.to_string(), configured, detection, classification })
}

fn prediction_records(
    corpus: &Corpus,
    predictions: &BTreeMap<SentenceKey, Vec<PredictedMention>>,
) -> Vec<SentenceRecord> {
    let mut records = corpus_records(corpus);
    for r in &mut records {
        let key = SentenceKey { story_id: r.story_id.clone(), sentence: r.sentence_index };
        r.predicted_mentions = Some(predictions.get(&key).into_iter().flatten().map(MentionRecord::from).collect());
    }
    records
}

/// Predict the test split with the configured checkpoint, write
/// `predictions/test.jsonl` and the reports.
pub fn cmd_eval(config: &RunConfig) -> Result<EvalOutcome> {
    let layout = config.layout();
    layout.prepare(config)?;
    let model = TrainedModel::load(&config.checkpoint_path())?;
    let test = load_corpus(config)?.subset(Split::Test);
    if test.stories.is_empty() {
        return Err(Error::Split("the corpus has no test split".into()));
    }
    let predictions = model.predict_corpus(&test, None)?;
    write_records(&layout.predictions().join("test.jsonl"), &prediction_records(&test, &predictions))?;
    evaluate_and_report(&test, &predictions, config.criterion, &layout.reports())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictOutcome {
    pub stories: usize,
    pub mentions: usize,
    pub jsonl: PathBuf,
    /// `None` for detection models: BRAT entities need a class.
    pub brat_dir: Option<PathBuf>,
}

fn read_inputs(input: &Path) -> Result<Vec<Story>> {
    if input.is_dir() {
        return read_unlabeled_dir(input);
    }
    let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let mut story = Story::new(story_id(input), text);
    story.source = Source::infer(input);
    Ok(vec![story])
}

/// Run a model over a `.txt` file or a directory of them. Every prediction
/// goes to `predictions/predictions.jsonl` with its score; classify-mode
/// models also write `predictions/brat/`, with overlapping spans resolved in
/// favour of the higher score so the files re-parse cleanly.
pub fn cmd_predict(config: &RunConfig, input: &Path) -> Result<PredictOutcome> {
    let layout = config.layout();
    layout.prepare(config)?;
    let model = TrainedModel::load(&config.checkpoint_path())?;
    let classify = model.mode() == LabelMode::Classify;
    let mut records = Vec::new();
    let mut labelled = Vec::new();
    let mut mentions = 0;
    for story in read_inputs(input)? {
        let story = segment_story(story)?;
        let mut found = Vec::new();
        for (i, sentence) in story.sentences.iter().enumerate() {
            let predicted = model.extract(sentence)?;
            mentions += predicted.len();
            found.extend(predicted.iter().filter_map(|p| {
                p.event_class.map(|c| (EventMention { span: p.span.clone(), event_class: c }, p.score))
            }));
            records.push(SentenceRecord {
                story_id: story.id.clone(),
                sentence_index: i,
                sentence_text: sentence.text.clone(),
                char_offset: sentence.offset,
                mentions: Vec::new(),
                split: None,
                source: Some(story.source),
                provenance: None,
                predicted_mentions: Some(predicted.iter().map(MentionRecord::from).collect()),
            });
        }
        let mut out = story;
        out.mentions = resolve_overlaps(found).into_iter().map(|(m, _)| m).collect();
        labelled.push(out);
    }
    let jsonl = layout.predictions().join("predictions.jsonl");
    write_records(&jsonl, &records)?;
    let brat_dir = if classify {
        let dir = layout.predictions().join("brat");
        write_brat_dir(&labelled, &dir)?;
        Some(dir)
    } else {
        log::info!("detection model: predictions are written as JSONL only");
        None
    };
    Ok(PredictOutcome { stories: labelled.len(), mentions, jsonl, brat_dir })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentStep {
    Label,
    Export,
    Merge,
    Benchmark,
}

impl FromStr for AugmentStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "label" => Ok(Self::Label),
            "export" => Ok(Self::Export),
            "merge" => Ok(Self::Merge),
            "benchmark" => Ok(Self::Benchmark),
            other => Err(Error::Config(format!("unknown augment step {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AugmentOutcome {
    Labelled { stories: usize, mentions: usize, failures: Vec<(String, String)>, jsonl: PathBuf },
    Exported(ReviewBatch),
    Merged { reviewed: usize, jsonl: PathBuf },
    Benchmarked(ComparisonReport),
}

pub const SYNTHETIC_JSONL: &str = "synthetic.jsonl";
pub const MERGED_JSONL: &str = "merged.jsonl";

/// Where each augment step reads and writes, after defaults.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentPaths {
    pub synthetic: PathBuf,
    pub review: PathBuf,
    pub merged: PathBuf,
    pub pool: PathBuf,
}

impl AugmentPaths {
    pub fn new(config: &RunConfig) -> Self {
        let layout = config.layout();
        let a = &config.augment;
        let synthetic = a.synthetic.clone().unwrap_or_else(|| layout.predictions().join(SYNTHETIC_JSONL));
        let merged = layout.predictions().join(MERGED_JSONL);
        let pool = a.pool.clone().unwrap_or_else(|| if merged.exists() { merged.clone() } else { synthetic.clone() });
        Self { review: a.review.clone().unwrap_or_else(|| config.out.join("review")), synthetic, merged, pool }
    }
}

/// One step of the expansion loop: `label` the unlabelled stories with the
/// checkpoint, `export` them for review, `merge` the reviewed files back, or
/// `benchmark` models trained on synthetic samples against the original.
pub fn cmd_augment(config: &RunConfig, step: AugmentStep) -> Result<AugmentOutcome> {
    let layout = config.layout();
    layout.prepare(config)?;
    let paths = AugmentPaths::new(config);
    match step {
        AugmentStep::Label => {
            let dir =
                config.augment.unlabeled.as_ref().ok_or_else(|| {
                    Error::Config("no unlabelled stories configured (set `augment.unlabeled`)".into())
                })?;
            let model = TrainedModel::load(&config.checkpoint_path())?;
            let stories = read_unlabeled_dir(dir)?;
            let synthetic = label_unlabeled(&model, &stories, config.augment.threshold)?;
            let mut records = corpus_records(&synthetic.corpus);
            for r in &mut records {
                let story = synthetic.corpus.story(&r.story_id).expect("record from this corpus");
                let scores = &synthetic.scores[&r.story_id];
                let scored = r.mentions.iter().map(|m| {
                    let i = story
                        .mentions
                        .iter()
                        .position(|s| s.span.start == m.start && s.span.end == m.end && Some(s.event_class) == m.class)
                        .expect("sentence mention is a story mention");
                    MentionRecord { score: Some(scores[i]), ..m.clone() }
                });
                r.predicted_mentions = Some(scored.collect());
            }
            write_records(&paths.synthetic, &records)?;
            write_json(&layout.logs().join("label_failures.json"), &synthetic.failures)?;
            Ok(AugmentOutcome::Labelled {
                stories: synthetic.corpus.stories.len(),
                mentions: synthetic.corpus.num_mentions(),
                failures: synthetic.failures,
                jsonl: paths.synthetic,
            })
        }
        AugmentStep::Export => {
            let corpus = read_jsonl_corpus(&paths.synthetic)?;
            export_for_review(&corpus, &paths.review).map(AugmentOutcome::Exported)
        }
        AugmentStep::Merge => {
            let original = read_jsonl_corpus(&paths.synthetic)?;
            let merged = merge_reviewed(&original, &paths.review)?;
            write_records(&paths.merged, &corpus_records(&merged))?;
            Ok(AugmentOutcome::Merged {
                reviewed: merged.stories.iter().filter(|s| s.provenance == Provenance::HumanReviewed).count(),
                jsonl: paths.merged,
            })
        }
        AugmentStep::Benchmark => {
            let base = load_corpus(config)?;
            let pool = read_jsonl_corpus(&paths.pool)?;
            let report = benchmark_expansion(&config.augment.benchmark(), &base, &pool, |label, corpus| {
                log::info!("benchmark row {label}: training on {} stories", corpus.ids_in(Split::Train).len());
                let (model, _) = train_model(config, corpus)?;
                Ok(Box::new(model) as Box<dyn EventExtractor>)
            })?;
            report.write(&layout.reports().join("benchmark"))?;
            Ok(AugmentOutcome::Benchmarked(report))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    /// Split the row was scored on: test if present, else dev.
    pub split: Split,
    pub macro_f1: f64,
    pub detection_f1: f64,
    pub best_epoch: Option<usize>,
    pub final_loss: f64,
}

fn dir_name(i: usize, value: &str) -> String {
    let clean: String = value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect();
    format!("{i:02}-{clean}")
}

/// Train once per value of `key` (each run in `out/sweep/NN-value`) and
/// collect span+class macro-F1 per value into `reports/sweep.csv`. Values
/// that set the key to the same effective value are rejected.
pub fn cmd_sweep(config: &RunConfig, key: &str, values: &[String]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("a sweep needs at least one value".into()));
    }
    let mut runs = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, value) in values.iter().enumerate() {
        let mut run = config.clone();
        run.set(key, value.trim())?;
        let effective = run.get(key).unwrap_or_else(|_| value.trim().to_string());
        if !seen.insert(effective.clone()) {
            return Err(Error::Config(format!("duplicate sweep value {value:?} for {key}")));
        }
        run.out = config.out.join("sweep").join(dir_name(i, &effective));
        run.checkpoint = None;
        runs.push((effective, run));
    }
    let layout = config.layout();
    layout.prepare(config)?;
    let corpus = load_corpus(config)?;
    let split = if corpus.stories_in(Split::Test).next().is_some() { Split::Test } else { Split::Dev };
    let held = corpus.subset(split);
    let mut rows = Vec::new();
    for (value, run) in runs {
        log::info!("sweep {key} = {value}");
        let outcome = cmd_train(&run)?;
        let predictions = outcome.model.predict_corpus(&held, None)?;
        let results =
            evaluate(&held, &predictions, MatchCriterion::SPAN_AND_CLASS.with_overlap(config.criterion.overlap))?;
        rows.push(SweepRow {
            value,
            split,
            macro_f1: results.macro_f1,
            detection_f1: results.detection.f1,
            best_epoch: outcome.log.best_epoch,
            final_loss: outcome.log.epoch_losses.last().copied().unwrap_or(f64::NAN),
        });
    }
    write_json(&layout.reports().join("sweep.json"), &rows)?;
    write_csv(
        &layout.reports().join("sweep.csv"),
        &[key, "split", "macro_f1", "detection_f1", "best_epoch", "final_loss"],
        rows.iter().map(|r| {
            [
                r.value.clone(),
                r.split.to_string(),
                r.macro_f1.to_string(),
                r.detection_f1.to_string(),
                r.best_epoch.map(|e| e.to_string()).unwrap_or_default(),
                r.final_loss.to_string(),
            ]
        }),
    )?;
    Ok(rows)
}
