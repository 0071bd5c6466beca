//! Run configuration (`key = value` text with environment overrides) and
//! the run manifest written next to every run's artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::encoders::VisualMix;
use crate::eval::{ExperimentConfig, PipelineConfig, Variant};
use crate::graphbuild::{DEFAULT_CROP_HALF_SIZE, DEFAULT_SIMILARITY_THRESHOLD};
use crate::model::ModelConfig;
use crate::seed;
use crate::world::DatasetConfig;

/// Prefix of environment variables that override config keys, e.g.
/// `GAZEGRAPH_EPOCHS=5`.
pub const ENV_PREFIX: &str = "GAZEGRAPH_";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub dataset: DatasetConfig,
    pub crop_half_size: f64,
    pub threshold: f64,
    pub detector_accuracy: f64,
    pub visual_mix: VisualMix,
    /// Evaluation input fraction.
    pub fraction: f64,
    pub train_fractions: Vec<f64>,
    pub variant: Variant,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::full_size(crate::world::action_vocab().size()),
            dataset: DatasetConfig::default(),
            crop_half_size: DEFAULT_CROP_HALF_SIZE,
            threshold: DEFAULT_SIMILARITY_THRESHOLD,
            detector_accuracy: crate::encoders::DEFAULT_DETECTOR_ACCURACY,
            visual_mix: VisualMix::default(),
            fraction: 0.7,
            train_fractions: vec![0.5, 0.7, 0.9],
            variant: Variant::Full,
            seed: 0,
            out_dir: PathBuf::from("runs"),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{v}` for {key}")))
}

fn fraction_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| num(key, x)).collect()
}

impl RunConfig {
    /// Desk-scale ablation setup: `ExperimentConfig::small` on
    /// `DatasetConfig::experiment`.
    pub fn small() -> Self {
        let e = ExperimentConfig::small(crate::world::action_vocab().size());
        RunConfig {
            model: e.model,
            dataset: DatasetConfig::experiment(),
            visual_mix: e.pipeline.visual_mix,
            ..RunConfig::default()
        }
    }

    /// Sets one key from its text form; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key == "preset" {
            let (seed, out_dir) = (self.seed, self.out_dir.clone());
            *self = match value.trim() {
                "full" => RunConfig::default(),
                "small" => RunConfig::small(),
                other => return Err(Error::Config(format!("unknown preset `{other}` (full, small)"))),
            };
            (self.seed, self.out_dir) = (seed, out_dir);
            return Ok(());
        }
        let d = &mut self.dataset;
        match key {
            "activities" => d.activities = num(key, value)?,
            "cameras_per_activity" => d.cameras_per_activity = num(key, value)?,
            "test_cameras_per_activity" => d.test_cameras_per_activity = num(key, value)?,
            "videos_per_pair" => d.videos_per_pair = num(key, value)?,
            "detour_min" => d.detour_min = num(key, value)?,
            "detour_max" => d.detour_max = num(key, value)?,
            "fps" => d.fps = num(key, value)?,
            "crop_half_size" => self.crop_half_size = num(key, value)?,
            "threshold" => self.threshold = num(key, value)?,
            "detector_accuracy" => self.detector_accuracy = num(key, value)?,
            "visual_object" => self.visual_mix.object = num(key, value)?,
            "visual_cell" => self.visual_mix.cell = num(key, value)?,
            "visual_noise" => self.visual_mix.noise = num(key, value)?,
            "fraction" => self.fraction = num(key, value)?,
            "train_fractions" => self.train_fractions = fraction_list(key, value)?,
            "variant" => self.variant = value.trim().parse()?,
            "seed" => self.seed = num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            "action_vocab" => {
                return Err(Error::Config("action_vocab is fixed by the action inventory".into()));
            }
            _ => self
                .model
                .set(key, value)
                .map_err(|e| match e {
                    Error::Config(m) if m.starts_with("unknown model key") => {
                        Error::Config(format!("unknown config key `{key}`"))
                    }
                    other => other,
                })?,
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                location: format!("config line {}", n + 1),
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            c.set(k.trim(), v.trim()).map_err(|e| Error::Format {
                location: format!("config line {}", n + 1),
                message: e.to_string(),
            })?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Applies `GAZEGRAPH_<KEY>` variables; other variables are ignored.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut found: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| {
                k.as_ref()
                    .strip_prefix(ENV_PREFIX)
                    .map(|key| (key.to_ascii_lowercase(), v.as_ref().to_string()))
            })
            .collect();
        // A preset replaces everything, so it goes first.
        found.sort_by_key(|(k, _)| (k != "preset", k.clone()));
        for (k, v) in found {
            self.set(&k, &v)
                .map_err(|e| Error::Config(format!("{ENV_PREFIX}{}: {e}", k.to_ascii_uppercase())))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.experiment().validate()?;
        if !self.model.edge_dim.is_multiple_of(2) {
            return Err(Error::Config("edge_dim must be even (two label embeddings)".into()));
        }
        if !(0.0..=1.0).contains(&self.detector_accuracy) {
            return Err(Error::Config(format!("detector accuracy {} outside [0, 1]", self.detector_accuracy)));
        }
        if self.crop_half_size <= 0.0 {
            return Err(Error::Config("crop_half_size must be positive".into()));
        }
        Ok(())
    }

    /// Every key with its resolved value, one per line; parses back to
    /// the same config.
    pub fn to_text(&self) -> String {
        let d = &self.dataset;
        let fr: Vec<String> = self.train_fractions.iter().map(f64::to_string).collect();
        let mut pairs: Vec<(String, String)> = vec![
            ("activities".into(), d.activities.to_string()),
            ("cameras_per_activity".into(), d.cameras_per_activity.to_string()),
            ("test_cameras_per_activity".into(), d.test_cameras_per_activity.to_string()),
            ("videos_per_pair".into(), d.videos_per_pair.to_string()),
            ("detour_min".into(), d.detour_min.to_string()),
            ("detour_max".into(), d.detour_max.to_string()),
            ("fps".into(), d.fps.to_string()),
            ("crop_half_size".into(), self.crop_half_size.to_string()),
            ("threshold".into(), self.threshold.to_string()),
            ("detector_accuracy".into(), self.detector_accuracy.to_string()),
            ("visual_object".into(), self.visual_mix.object.to_string()),
            ("visual_cell".into(), self.visual_mix.cell.to_string()),
            ("visual_noise".into(), self.visual_mix.noise.to_string()),
            ("fraction".into(), self.fraction.to_string()),
            ("train_fractions".into(), fr.join(",")),
            ("variant".into(), self.variant.tag().into()),
            ("seed".into(), self.seed.to_string()),
            ("out_dir".into(), self.out_dir.display().to_string()),
        ];
        pairs.extend(self.model.to_pairs().into_iter().filter(|(k, _)| k != "action_vocab"));
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn dataset_seed(&self) -> u64 {
        seed::derive(self.seed, "dataset", 0)
    }

    /// Visual and semantic widths follow the model's node and edge widths.
    pub fn experiment(&self) -> ExperimentConfig {
        let mut model = self.model.clone();
        model.action_vocab = crate::world::action_vocab().size();
        ExperimentConfig {
            pipeline: PipelineConfig {
                crop_half_size: self.crop_half_size,
                threshold: self.threshold,
                detector_accuracy: self.detector_accuracy,
                visual_dim: self.model.node_dim,
                semantic_dim: self.model.edge_dim / 2,
                visual_mix: self.visual_mix,
                ..PipelineConfig::default()
            },
            model,
            train_fractions: self.train_fractions.clone(),
            eval_fraction: self.fraction,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Command, resolved config and content hashes of a run's artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    /// `(path relative to the output directory, sha256)`
    pub artifacts: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        RunManifest {
            command: command.to_string(),
            config: config.clone(),
            artifacts: Vec::new(),
        }
    }

    pub fn record(&mut self, relative: &str, bytes: &[u8]) {
        self.artifacts.push((relative.to_string(), sha256_hex(bytes)));
    }

    /// Config lines first, so the manifest itself loads as a config.
    pub fn to_text(&self) -> String {
        let mut out = format!("# command {}\n", self.command);
        out.push_str(&self.config.to_text());
        for (path, hash) in &self.artifacts {
            let _ = writeln!(out, "# artifact {hash} {path}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut command = String::new();
        let mut artifacts = Vec::new();
        for line in text.lines() {
            if let Some(c) = line.strip_prefix("# command ") {
                command = c.to_string();
            } else if let Some(a) = line.strip_prefix("# artifact ") {
                let (hash, path) = a.split_once(' ').ok_or_else(|| Error::Format {
                    location: "manifest".into(),
                    message: format!("bad artifact line `{line}`"),
                })?;
                artifacts.push((path.to_string(), hash.to_string()));
            }
        }
        Ok(RunManifest {
            command,
            config: RunConfig::parse(text)?,
            artifacts,
        })
    }
}
