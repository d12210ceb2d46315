//! Model-assisted corpus expansion: label raw stories with a trained model,
//! export them for review as BRAT files, merge the reviewed files back, and
//! compare models trained on synthetic subsets against the original data on
//! the fixed dev/test stories.

pub mod benchmark;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::corpus::{
    parse_brat, segment_story, story_id, text_files, validate_annotations, validate_brat, write_brat_dir,
    AnnotatedSentence, Corpus, EventMention, LabelMode, PredictedMention, Provenance, Source, Story,
};
use crate::error::{Error, Result};
use crate::promptee::PromptModel;
use crate::tagging::TaggerModel;

pub use benchmark::{benchmark_expansion, BenchmarkConfig, ComparisonReport, ComparisonRow};

/// Settings for the expansion loop. The model and output directory come from
/// the surrounding run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Directory of unlabelled `.txt` stories.
    pub unlabeled: Option<PathBuf>,
    /// Minimum mention score kept when labelling.
    pub threshold: f64,
    /// Synthetic corpus (JSONL) written by labelling and read by export.
    pub synthetic: Option<PathBuf>,
    /// Review directory written by export and read by merge.
    pub review: Option<PathBuf>,
    /// Pool for the benchmark; defaults to the merged corpus if present,
    /// else the synthetic one.
    pub pool: Option<PathBuf>,
    pub sample_sizes: Vec<usize>,
    pub seed: u64,
    pub include_baseline: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        let b = BenchmarkConfig::default();
        Self {
            unlabeled: None,
            threshold: 0.0,
            synthetic: None,
            review: None,
            pool: None,
            sample_sizes: b.sample_sizes,
            seed: b.seed,
            include_baseline: b.include_baseline,
        }
    }
}

impl AugmentConfig {
    pub fn benchmark(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            sample_sizes: self.sample_sizes.clone(),
            seed: self.seed,
            include_baseline: self.include_baseline,
        }
    }
}

/// Anything that turns a sentence into scored mentions.
pub trait EventExtractor {
    fn mode(&self) -> LabelMode;
    fn extract(&self, sentence: &AnnotatedSentence) -> Result<Vec<PredictedMention>>;
}

impl EventExtractor for PromptModel {
    fn mode(&self) -> LabelMode {
        self.config.mode
    }

    fn extract(&self, sentence: &AnnotatedSentence) -> Result<Vec<PredictedMention>> {
        self.extract_events(sentence)
    }
}

impl EventExtractor for TaggerModel {
    fn mode(&self) -> LabelMode {
        TaggerModel::mode(self)
    }

    fn extract(&self, sentence: &AnnotatedSentence) -> Result<Vec<PredictedMention>> {
        Ok(self.predict_tags(sentence))
    }
}

/// Output of [`label_unlabeled`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Score of each mention, parallel to `story.mentions`.
    pub scores: BTreeMap<String, Vec<f64>>,
    /// Stories that could not be labelled, with the reason.
    pub failures: Vec<(String, String)>,
}

/// Read every `.txt` under `dir` as an unlabelled story (any `.ann` is
/// ignored).
pub fn read_unlabeled_dir(dir: &Path) -> Result<Vec<Story>> {
    let mut out = Vec::new();
    for txt in text_files(dir)? {
        let text = fs::read_to_string(&txt).map_err(|e| Error::io(&txt, e))?;
        let mut story = Story::new(story_id(&txt), text);
        story.source = Source::infer(&txt);
        out.push(story);
    }
    Ok(out)
}

fn label_story(model: &dyn EventExtractor, story: &Story, threshold: f64) -> Result<(Story, Vec<f64>)> {
    let mut plain = story.clone();
    plain.mentions.clear();
    let plain = segment_story(plain)?;
    let mut found: Vec<(EventMention, f64)> = Vec::new();
    for sentence in &plain.sentences {
        for p in model.extract(sentence)? {
            let class =
                p.event_class.ok_or_else(|| Error::Config("synthetic labelling needs a classify-mode model".into()))?;
            if p.score >= threshold {
                found.push((EventMention { span: p.span, event_class: class }, p.score));
            }
        }
    }
    let kept = resolve_overlaps(found);
    let mut labelled = plain;
    labelled.mentions = kept.iter().map(|(m, _)| m.clone()).collect();
    labelled.provenance = Provenance::Synthetic;
    let labelled = segment_story(labelled)?;
    Ok((labelled, kept.into_iter().map(|(_, s)| s).collect()))
}

/// Drop mentions overlapping a higher-scoring one (different slots can pick
/// overlapping spans) and sort the rest by offset.
pub fn resolve_overlaps(mut found: Vec<(EventMention, f64)>) -> Vec<(EventMention, f64)> {
    found.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.span.start.cmp(&b.0.span.start)));
    let mut kept: Vec<(EventMention, f64)> = Vec::new();
    for (m, s) in found {
        if kept.iter().all(|(k, _)| !k.span.overlaps(&m.span)) {
            kept.push((m, s));
        }
    }
    kept.sort_by_key(|(m, _)| (m.span.start, m.span.end));
    kept
}

/// Label raw stories with `model`, keeping mentions scoring at least
/// `threshold`. A story that fails is logged and skipped.
pub fn label_unlabeled(model: &dyn EventExtractor, stories: &[Story], threshold: f64) -> Result<SyntheticCorpus> {
    if model.mode() != LabelMode::Classify {
        return Err(Error::Config("synthetic labelling needs a classify-mode model".into()));
    }
    let mut labelled = Vec::new();
    let mut scores = BTreeMap::new();
    let mut failures = Vec::new();
    for story in stories {
        match label_story(model, story, threshold) {
            Ok((s, sc)) => {
                scores.insert(s.id.clone(), sc);
                labelled.push(s);
            }
            Err(e) => {
                log::error!("{}: labelling failed: {e}", story.id);
                failures.push((story.id.clone(), e.to_string()));
            }
        }
    }
    Ok(SyntheticCorpus { corpus: Corpus::new(labelled), scores, failures })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub story_id: String,
    pub provenance: Provenance,
    pub files: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BATCH_FILE: &str = "batch.json";

/// One exported review batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewBatch {
    pub story_ids: Vec<String>,
    pub provenance: BTreeMap<String, Provenance>,
    /// Seconds since the Unix epoch.
    pub emitted_at: u64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(&path))
}

/// Write one `.txt`/`.ann` pair per story, plus `manifest.json` (a list of
/// `{story_id, provenance, files}`) and `batch.json`.
pub fn export_for_review(corpus: &Corpus, out_dir: &Path) -> Result<ReviewBatch> {
    let pairs = write_brat_dir(&corpus.stories, out_dir)?;
    let name = |p: &PathBuf| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let manifest: Vec<ManifestEntry> = corpus
        .stories
        .iter()
        .zip(&pairs)
        .map(|(s, (txt, ann))| ManifestEntry {
            story_id: s.id.clone(),
            provenance: s.provenance,
            files: vec![name(txt), name(ann)],
        })
        .collect();
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    let batch = ReviewBatch {
        story_ids: manifest.iter().map(|m| m.story_id.clone()).collect(),
        provenance: manifest.iter().map(|m| (m.story_id.clone(), m.provenance)).collect(),
        emitted_at: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    write_json(&out_dir.join(BATCH_FILE), &batch)?;
    Ok(batch)
}

/// Replace the annotations of every story found in `reviewed_dir` with the
/// reviewed ones and mark those stories human-reviewed. Every problem across
/// the directory is collected into one `Merge` error; nothing is merged
/// unless the whole directory is clean.
pub fn merge_reviewed(original: &Corpus, reviewed_dir: &Path) -> Result<Corpus> {
    let mut problems = Vec::new();
    let mut replacements: BTreeMap<String, Story> = BTreeMap::new();
    let listed: Option<BTreeSet<String>> = match read_manifest(reviewed_dir) {
        Ok(m) => Some(m.into_iter().map(|e| e.story_id).collect()),
        Err(Error::Io { .. }) => None,
        Err(e) => return Err(e),
    };
    for txt in text_files(reviewed_dir)? {
        let id = story_id(&txt);
        if listed.as_ref().is_some_and(|l| !l.contains(&id)) {
            continue;
        }
        let Some(before) = original.story(&id) else {
            problems.push(format!("{id}: not in the original corpus"));
            continue;
        };
        let text = fs::read_to_string(&txt).map_err(|e| Error::io(&txt, e))?;
        let ann_path = txt.with_extension("ann");
        let ann = fs::read_to_string(&ann_path).unwrap_or_default();
        if text != before.text {
            problems.push(format!("{id}: story text was edited during review"));
            continue;
        }
        let violations = validate_brat(&id, &text, &ann);
        if !violations.is_empty() {
            problems.extend(violations.iter().map(|v| v.to_string()));
            continue;
        }
        let mut story = match parse_brat(&id, &text, &ann) {
            Ok(s) => s,
            Err(e) => {
                problems.push(format!("{id}: {e}"));
                continue;
            }
        };
        story.source = before.source;
        story.provenance = Provenance::HumanReviewed;
        let violations = validate_annotations(&story);
        if !violations.is_empty() {
            problems.extend(violations.iter().map(|v| v.to_string()));
            continue;
        }
        match segment_story(story) {
            Ok(s) => {
                replacements.insert(id, s);
            }
            Err(e) => problems.push(format!("{id}: {e}")),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Merge(problems));
    }
    let mut merged = original.clone();
    for story in &mut merged.stories {
        if let Some(r) = replacements.remove(&story.id) {
            *story = r;
        }
    }
    Ok(merged)
}
