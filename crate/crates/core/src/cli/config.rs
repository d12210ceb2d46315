//! Run configuration as flat `key = value` text.
//!
//! ```text
//! include = base.cfg
//! model = prompt
//! corpus = data/stories
//! prompt.learning_rate = 4e-5
//! augment.sample_sizes = 120,500
//! ```
//!
//! Keys are the dotted field paths of [`RunConfig`]; anything else is an
//! error. `include` paths are relative to the including file and later lines
//! override earlier ones. Three shorthands fan out to several fields: `mode`
//! (tagger and prompt label mode), `seed` (every seed) and `toy` (selects the
//! toy backbone).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::augment::AugmentConfig;
use crate::corpus::LabelMode;
use crate::error::{Error, Result};
use crate::eval::MatchCriterion;
use crate::promptee::PromptModelConfig;
use crate::tagging::TaggerConfig;

/// Name of the effective-config echo inside an output directory.
pub const ECHO_FILE: &str = "config.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Tagger,
    Prompt,
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tagger" => Ok(Self::Tagger),
            "prompt" => Ok(Self::Prompt),
            other => Err(Error::Config(format!("unknown model family {other:?}"))),
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Tagger => "tagger",
            Self::Prompt => "prompt",
        })
    }
}

/// Seeded train/dev/test sizes, used only when the corpus carries no split
/// and no manifest is given. All zero means "no split".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train: 0, dev: 0, test: 0, seed: 42 }
    }
}

impl SplitConfig {
    pub fn is_set(&self) -> bool {
        self.train + self.dev + self.test > 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub key: String,
    /// Comma-separated.
    pub values: String,
}

impl SweepConfig {
    pub fn value_list(&self) -> Vec<String> {
        split_list(&self.values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelFamily,
    /// BRAT directory or JSONL file.
    pub corpus: Option<PathBuf>,
    /// Directory holding `train.txt`/`dev.txt`/`test.txt`.
    pub splits: Option<PathBuf>,
    pub split: SplitConfig,
    pub out: PathBuf,
    /// Model to load; defaults to the run's own checkpoint.
    pub checkpoint: Option<PathBuf>,
    #[serde(with = "as_string")]
    pub criterion: MatchCriterion,
    /// JSON list of extra backbone specs.
    pub backbone_registry: Option<PathBuf>,
    pub tagger: TaggerConfig,
    pub prompt: PromptModelConfig,
    pub augment: AugmentConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelFamily::Prompt,
            corpus: None,
            splits: None,
            split: SplitConfig::default(),
            out: PathBuf::from("runs/default"),
            checkpoint: None,
            criterion: MatchCriterion::SPAN_AND_CLASS,
            backbone_registry: None,
            tagger: TaggerConfig::default(),
            prompt: PromptModelConfig::default(),
            augment: AugmentConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

mod as_string {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }
}

fn split_list(raw: &str) -> Vec<String> {
    raw.split(',').map(str::trim).filter(|v| !v.is_empty()).map(String::from).collect()
}

fn parse_scalar(like: &Value, raw: &str) -> std::result::Result<Value, String> {
    match like {
        Value::Bool(_) => raw.parse::<bool>().map(Value::Bool).map_err(|_| "expected true or false".into()),
        Value::Number(_) => match serde_json::from_str::<Value>(raw) {
            Ok(v @ Value::Number(_)) => Ok(v),
            _ => Err("expected a number".into()),
        },
        Value::Null if raw.is_empty() => Ok(Value::Null),
        _ => Ok(Value::String(raw.to_string())),
    }
}

fn parse_leaf(existing: &Value, raw: &str) -> std::result::Result<Value, String> {
    match existing {
        Value::Array(items) => {
            // element type follows the current contents; numbers otherwise
            let like = items.first().cloned().unwrap_or(Value::Number(0.into()));
            split_list(raw)
                .iter()
                .map(|v| parse_scalar(&like, v))
                .collect::<std::result::Result<_, _>>()
                .map(Value::Array)
        }
        Value::Object(_) => Err("is a section, not a value".into()),
        other => parse_scalar(other, raw),
    }
}

fn render(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(render).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, map: &Map<String, Value>, out: &mut Vec<(String, String)>) {
    for (k, v) in map {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(inner) => flatten(&key, inner, out),
            leaf => out.push((key, render(leaf))),
        }
    }
}

impl RunConfig {
    /// Defaults overridden by a config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    /// Set one key. Unknown keys and ill-typed values are `Config` errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |msg: String| Error::Config(format!("{key} = {value}: {msg}"));
        match key {
            "mode" => {
                let mode: LabelMode = value.parse().map_err(|e: Error| bad(e.to_string()))?;
                self.tagger.label_scheme = mode;
                self.prompt.mode = mode;
                return Ok(());
            }
            "seed" => {
                let seed: u64 = value.parse().map_err(|_| bad("expected an unsigned integer".into()))?;
                self.tagger.seed = seed;
                self.prompt.seed = seed;
                self.split.seed = seed;
                self.augment.seed = seed;
                return Ok(());
            }
            "toy" => {
                if value.parse::<bool>().map_err(|_| bad("expected true or false".into()))? {
                    self.prompt.backbone = "toy".into();
                }
                return Ok(());
            }
            _ => {}
        }
        let tree = serde_json::to_value(&*self)?;
        let pointer = format!("/{}", key.replace('.', "/"));
        let existing = tree
            .pointer(&pointer)
            .filter(|_| !key.is_empty() && !key.contains('/'))
            .ok_or_else(|| Error::Config(format!("unknown key {key:?}")))?;
        let parsed = parse_leaf(existing, value).map_err(bad)?;
        let with = |v: Value| {
            let mut t = tree.clone();
            *t.pointer_mut(&pointer).expect("pointer found above") = v;
            serde_json::from_value::<RunConfig>(t)
        };
        // an empty value clears an optional field
        if value.is_empty() && parsed.is_string() {
            if let Ok(cleared) = with(Value::Null) {
                *self = cleared;
                return Ok(());
            }
        }
        *self = with(parsed).map_err(|e| bad(e.to_string()))?;
        Ok(())
    }

    /// Apply `key = value` lines; `origin` resolves relative includes.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        self.apply_text_inner(text, origin, &mut Vec::new())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        self.apply_file_inner(path, &mut Vec::new())
    }

    fn apply_file_inner(&mut self, path: &Path, stack: &mut Vec<PathBuf>) -> Result<()> {
        let canonical = fs::canonicalize(path).map_err(|e| Error::io(path, e))?;
        if stack.contains(&canonical) {
            return Err(Error::Config(format!("{}: include cycle", path.display())));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        stack.push(canonical);
        let result = self.apply_text_inner(&text, path, stack);
        stack.pop();
        result
    }

    fn apply_text_inner(&mut self, text: &str, origin: &Path, stack: &mut Vec<PathBuf>) -> Result<()> {
        let at = |line: usize, e: Error| Error::Config(format!("{}:{line}: {e}", origin.display()));
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(at(i + 1, Error::Config("expected `key = value`".into())));
            };
            let (key, value) = (key.trim(), value.trim());
            if key == "include" {
                let target = origin.parent().unwrap_or(Path::new(".")).join(value);
                self.apply_file_inner(&target, stack)?;
            } else {
                self.set(key, value).map_err(|e| at(i + 1, e))?;
            }
        }
        Ok(())
    }

    /// Every key with its effective value, in a stable order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let tree = serde_json::to_value(self).expect("config serializes");
        let mut out = Vec::new();
        if let Value::Object(map) = tree {
            flatten("", &map, &mut out);
        }
        out
    }

    /// The effective config as text that parses back to `self`.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Read the current value of a key as its config-text rendering.
    pub fn get(&self, key: &str) -> Result<String> {
        self.entries()
            .into_iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::Config(format!("unknown key {key:?}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.tagger.validate()?;
        self.prompt.validate()
    }

    pub fn layout(&self) -> RunLayout {
        RunLayout::new(&self.out)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.layout().checkpoint())
    }
}

/// Fixed output-directory layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn predictions(&self) -> PathBuf {
        self.root.join("predictions")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn logs(&self) -> PathBuf {
        self.root.join("logs")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.checkpoints().join("model.json")
    }

    pub fn echo(&self) -> PathBuf {
        self.root.join(ECHO_FILE)
    }

    /// Create every directory and write the config echo.
    pub fn prepare(&self, config: &RunConfig) -> Result<()> {
        for dir in [self.checkpoints(), self.predictions(), self.reports(), self.logs()] {
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        let echo = self.echo();
        fs::write(&echo, config.to_text()).map_err(|e| Error::io(&echo, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_parses_back_to_the_same_config() {
        let mut cfg = RunConfig::default();
        cfg.set("prompt.learning_rate", "3e-5").unwrap();
        cfg.set("augment.sample_sizes", "2, 4").unwrap();
        cfg.set("corpus", "data/x.jsonl").unwrap();
        cfg.set("criterion", "span~overlap").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text(), Path::new("echo")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.augment.sample_sizes, [2, 4]);
    }

    #[test]
    fn defaults_are_the_published_hyperparameters() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.get("prompt.epochs").unwrap(), "1000");
        assert_eq!(cfg.get("prompt.batch_size").unwrap(), "4");
        assert_eq!(cfg.prompt.learning_rate, 4e-5);
        assert_eq!(cfg.prompt.weight_decay, 0.01);
        assert_eq!(cfg.prompt.warmup_fraction, 0.1);
        assert_eq!(cfg.prompt.max_span_length, 10);
        assert_eq!(cfg.prompt.max_grad_norm, 5.0);
        assert_eq!((cfg.prompt.max_encoder_len, cfg.prompt.max_decoder_len), (500, 80));
        assert_eq!(cfg.prompt.seed, 42);
        assert_eq!((cfg.tagger.hidden_dim, cfg.tagger.word_dim, cfg.tagger.batch_size), (100, 100, 16));
        assert_eq!(cfg.tagger.epochs, 1000);
    }

    #[test]
    fn unknown_and_ill_typed_keys_are_rejected() {
        let mut cfg = RunConfig::default();
        for (k, v) in [
            ("prompt.learning_rat", "1"),
            ("prompt", "1"),
            ("prompt.epochs", "many"),
            ("prompt.epochs", "1.5"),
            ("tagger.use_crf", "yes"),
            ("model", "svm"),
            ("prompt.mode", "both"),
        ] {
            assert!(matches!(cfg.set(k, v), Err(Error::Config(_))), "{k} = {v}");
        }
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn shorthands_fan_out() {
        let mut cfg = RunConfig::default();
        cfg.set("seed", "7").unwrap();
        cfg.set("mode", "detect").unwrap();
        assert_eq!((cfg.tagger.seed, cfg.prompt.seed, cfg.split.seed, cfg.augment.seed), (7, 7, 7, 7));
        assert_eq!((cfg.tagger.label_scheme, cfg.prompt.mode), (LabelMode::Detect, LabelMode::Detect));
        cfg.set("prompt.backbone", "small").unwrap();
        cfg.set("toy", "true").unwrap();
        assert_eq!(cfg.prompt.backbone, "toy");
    }

    #[test]
    fn includes_resolve_relative_to_the_file_and_later_lines_win() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("sub/base.cfg"), "prompt.epochs = 3\nprompt.batch_size = 2\n").unwrap();
        fs::write(dir.path().join("run.cfg"), "# comment\ninclude = sub/base.cfg\n\nprompt.epochs = 5\n").unwrap();
        let cfg = RunConfig::from_file(&dir.path().join("run.cfg")).unwrap();
        assert_eq!((cfg.prompt.epochs, cfg.prompt.batch_size), (5, 2));
    }

    #[test]
    fn include_cycles_and_bad_lines_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.cfg");
        fs::write(&a, "include = b.cfg\n").unwrap();
        fs::write(dir.path().join("b.cfg"), "include = a.cfg\n").unwrap();
        assert!(RunConfig::from_file(&a).unwrap_err().to_string().contains("cycle"));
        let c = dir.path().join("c.cfg");
        fs::write(&c, "prompt.epochs = 2\nnonsense\n").unwrap();
        let msg = RunConfig::from_file(&c).unwrap_err().to_string();
        assert!(msg.contains("c.cfg:2"), "{msg}");
        fs::write(&c, "prompt.epoch = 2\n").unwrap();
        let msg = RunConfig::from_file(&c).unwrap_err().to_string();
        assert!(msg.contains("c.cfg:1") && msg.contains("unknown key"), "{msg}");
    }

    #[test]
    fn optional_paths_clear_with_an_empty_value() {
        let mut cfg = RunConfig::default();
        cfg.set("tagger.embeddings", "vec.txt").unwrap();
        assert_eq!(cfg.tagger.embeddings, Some(PathBuf::from("vec.txt")));
        cfg.set("tagger.embeddings", "").unwrap();
        assert_eq!(cfg.tagger.embeddings, None);
    }

    #[test]
    fn layout_has_fixed_names() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { out: dir.path().join("run"), ..RunConfig::default() };
        cfg.layout().prepare(&cfg).unwrap();
        for name in ["checkpoints", "predictions", "reports", "logs", ECHO_FILE] {
            assert!(cfg.out.join(name).exists(), "{name}");
        }
        assert_eq!(cfg.checkpoint_path(), cfg.out.join("checkpoints/model.json"));
    }
}
