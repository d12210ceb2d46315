use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EventExtractor;
use crate::corpus::{Corpus, EventClass, Split, Story};
use crate::error::{Error, Result};
use crate::eval::{evaluate, ClassMetrics, EvalResults, MatchCriterion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    /// Synthetic stories drawn for each comparison row.
    pub sample_sizes: Vec<usize>,
    pub seed: u64,
    /// Also train on the original train split as the reference row.
    pub include_baseline: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self { sample_sizes: vec![120, 500], seed: 42, include_baseline: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    /// Story ids the row was trained on.
    pub train_ids: Vec<String>,
    /// Scores on the untouched test split.
    pub results: EvalResults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub test_ids: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Seeded draw of `n` ids from `pool` (sorted first, so input order does not
/// matter).
pub fn sample_ids(pool: &[String], n: usize, seed: u64) -> Result<Vec<String>> {
    if n > pool.len() {
        return Err(Error::Config(format!("sample of {n} requested from a pool of {} synthetic stories", pool.len())));
    }
    let mut ids = pool.to_vec();
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    ids.truncate(n);
    ids.sort();
    Ok(ids)
}

fn training_corpus(train: Vec<Story>, base: &Corpus) -> Corpus {
    let mut split = BTreeMap::new();
    let mut stories = Vec::new();
    for s in train {
        split.insert(s.id.clone(), Split::Train);
        stories.push(s);
    }
    for held in [Split::Dev, Split::Test] {
        for s in base.stories_in(held) {
            split.insert(s.id.clone(), held);
            stories.push(s.clone());
        }
    }
    Corpus { stories, split }
}

/// Train one model per row with `train` and score each on `base`'s test
/// split. Rows: the original train split (if configured), then one per
/// sample size drawn from `pool`. Pool stories that share an id with a
/// dev or test story abort the run.
pub fn benchmark_expansion(
    config: &BenchmarkConfig,
    base: &Corpus,
    pool: &Corpus,
    mut train: impl FnMut(&str, &Corpus) -> Result<Box<dyn EventExtractor>>,
) -> Result<ComparisonReport> {
    let held: Vec<String> = base.ids_in(Split::Dev).into_iter().chain(base.ids_in(Split::Test)).collect();
    let leaked: Vec<&String> = pool.stories.iter().map(|s| &s.id).filter(|id| held.contains(id)).collect();
    if !leaked.is_empty() {
        return Err(Error::Data(format!("dev/test stories found in the synthetic pool: {leaked:?}")));
    }
    let test = base.subset(Split::Test);
    if test.stories.is_empty() {
        return Err(Error::Config("the base corpus has no test split".into()));
    }
    let pool_ids: Vec<String> = pool.stories.iter().map(|s| s.id.clone()).collect();
    let mut plans: Vec<(String, Vec<Story>)> = Vec::new();
    if config.include_baseline {
        plans.push(("original".into(), base.stories_in(Split::Train).cloned().collect()));
    }
    for &n in &config.sample_sizes {
        let ids = sample_ids(&pool_ids, n, config.seed)?;
        log::info!("synthetic sample of {n} (seed {}): {ids:?}", config.seed);
        let stories = ids.iter().filter_map(|id| pool.story(id).cloned()).collect();
        plans.push((format!("synthetic-{n}"), stories));
    }

    let mut rows = Vec::new();
    for (label, stories) in plans {
        let train_ids: Vec<String> = stories.iter().map(|s| s.id.clone()).collect();
        let corpus = training_corpus(stories, base);
        let model = train(&label, &corpus)?;
        let mut preds = BTreeMap::new();
        for (key, sentence) in test.all_sentences() {
            preds.insert(key, model.extract(sentence)?);
        }
        let results = evaluate(&test, &preds, MatchCriterion::SPAN_AND_CLASS)?;
        rows.push(ComparisonRow { label, train_ids, results });
    }
    Ok(ComparisonReport { test_ids: test.stories.iter().map(|s| s.id.clone()).collect(), rows })
}

impl ComparisonReport {
    /// Detection precision/recall/F1 per row.
    pub fn detection_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<20} {:>9} {:>7} {:>7}", "model", "precision", "recall", "F1");
        for r in &self.rows {
            let d = &r.results.detection;
            let _ = writeln!(
                out,
                "{:<20} {:>9.1} {:>7.1} {:>7.1}",
                r.label,
                100.0 * d.precision,
                100.0 * d.recall,
                100.0 * d.f1
            );
        }
        out
    }

    /// Per-class P/R/F1 rows for each model, classes in prompt order.
    pub fn classification_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<20} {:<5}", "model", "score");
        for c in EventClass::PROMPT_ORDER {
            let _ = write!(out, " {:>6}", c.code());
        }
        let _ = writeln!(out, " {:>6}", "macro");
        for r in &self.rows {
            for name in ["P", "R", "F1"] {
                let pick = |m: &ClassMetrics| match name {
                    "P" => m.precision,
                    "R" => m.recall,
                    _ => m.f1,
                };
                let label = if name == "P" { r.label.as_str() } else { "" };
                let _ = write!(out, "{label:<20} {name:<5}");
                for c in EventClass::PROMPT_ORDER {
                    let v = r.results.per_class.get(&c).map(pick).unwrap_or(0.0);
                    let _ = write!(out, " {:>6.1}", 100.0 * v);
                }
                if name == "F1" {
                    let _ = writeln!(out, " {:>6.1}", 100.0 * r.results.macro_f1);
                } else {
                    let _ = writeln!(out, " {:>6}", "");
                }
            }
        }
        out
    }

    /// Write `comparison.json`, `detection.txt` and `classification.txt`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("comparison.json", serde_json::to_string_pretty(self)?),
            ("detection.txt", self.detection_table()),
            ("classification.txt", self.classification_table()),
        ];
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}
