//! Flat `key = value` run configuration.
//!
//! Values come from the config file, then `WCF_<KEY>` environment variables,
//! then `--set key=value` flags, later sources winning.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use wavelet_cf::eval::EvalOptions;
use wavelet_cf::ingest::Delimiter;
use wavelet_cf::model::ModelConfig;
use wavelet_cf::pipeline::PipelineConfig;
use wavelet_cf::spectral::FilterOptions;
use wavelet_cf::synthetic::BlockConfig;
use wavelet_cf::train::{TrainConfig, DEFAULT_LR_GRID, DEFAULT_T_GRID};

use crate::CliError;

pub const ENV_PREFIX: &str = "WCF_";

/// Every accepted key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "root seed every stage seed is derived from"),
    (
        "threads",
        "0",
        "worker threads, 0 for one per core; 1 is bitwise reproducible",
    ),
    ("scalar", "f64", "floating point type, f64 or f32"),
    ("input", "", "raw interaction log read by ingest"),
    ("delimiter", "auto", "auto, tab, comma or doublecolon"),
    ("min_user_interactions", "5", "users with fewer distinct items are dropped"),
    ("min_item_interactions", "5", "items with fewer distinct users are dropped"),
    ("dataset", "dataset.wcf", "canonical dataset file"),
    ("spectral_cache", "spectral.wcf", "eigendecomposition cache"),
    ("checkpoint", "model.ckpt", "trained model"),
    ("train_log", "train.log", "per-epoch training log"),
    ("train_state", "train.state", "resumable training state"),
    ("train_fraction", "0.8", "per-user share of interactions used for training"),
    ("per_user_cap", "", "cold-start cap on training items per user"),
    (
        "validation_fraction",
        "0.1",
        "share of each user's training items held out for early stopping",
    ),
    ("q", "", "retained eigenpairs, empty for min(N, max(64, ceil(0.02 N)))"),
    ("lanczos_tol", "", "eigen residual tolerance, empty for the scalar default"),
    ("drop_threshold", "1e-7", "wavelet entries below this magnitude are dropped"),
    ("layers", "3", "propagation layers"),
    ("width", "64", "embedding width per layer"),
    ("t", "1.0", "wavelet scale"),
    ("eta", "1e-4", "regularization weight"),
    (
        "materialize_wavelets",
        "false",
        "propagate through explicit sparse wavelet matrices",
    ),
    ("exponent_mode", "power", "power or boxcox"),
    ("inverse_mode", "reciprocal", "reciprocal or negated"),
    ("batch_size", "1024", "triples per optimizer step"),
    ("learning_rate", "0.01", "Adam step size"),
    ("adam_beta1", "0.9", "Adam first moment decay"),
    ("adam_beta2", "0.999", "Adam second moment decay"),
    ("adam_eps", "1e-8", "Adam denominator offset"),
    ("max_epochs", "200", "epoch limit"),
    ("patience", "10", "epochs without validation improvement before stopping"),
    ("k_values", "20", "comma separated ranking cutoffs"),
    ("cohort_bounds", "25,50,100", "training-count boundaries of the user cohorts"),
    ("grid_learning_rates", "", "comma separated rates searched by train --grid"),
    ("grid_t", "", "comma separated scales searched by train --grid"),
    ("cold_start_caps", "3,5,7,9,12", "caps run by cold-start"),
    ("synth_users", "300", "synthetic users"),
    ("synth_items", "200", "synthetic items"),
    ("synth_blocks", "2", "synthetic communities"),
    ("synth_per_user", "16", "interactions per synthetic user"),
    ("synth_window", "20", "width of each user's preferred item window"),
    ("synth_noise", "0.05", "share of interactions drawn uniformly"),
];

/// Raw layered key/value pairs, before typing.
#[derive(Clone, Debug, Default)]
pub struct Layers {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> Result<(), CliError> {
    if KEYS.iter().any(|(k, _, _)| *k == key) {
        Ok(())
    } else {
        Err(CliError::config(format!(
            "unknown config key {key:?}; run `wavelet-cf config` for the list"
        )))
    }
}

fn split_pair(text: &str) -> Option<(String, String)> {
    let (k, v) = text.split_once('=')?;
    Some((k.trim().to_string(), v.trim().to_string()))
}

impl Layers {
    pub fn defaults() -> Self {
        let values = KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect();
        Self { values }
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_pair(line)
                .ok_or_else(|| CliError::config(format!("{}:{}: expected key = value", path.display(), n + 1)))?;
            known(&k).map_err(|e| CliError::config(format!("{}:{}: {e}", path.display(), n + 1)))?;
            self.values.insert(k, v);
        }
        Ok(())
    }

    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), CliError> {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            known(&key).map_err(|e| CliError::config(format!("environment variable {name}: {e}")))?;
            self.values.insert(key, value.trim().to_string());
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, sets: &[String]) -> Result<(), CliError> {
        for s in sets {
            let (k, v) = split_pair(s).ok_or_else(|| CliError::config(format!("--set expects key=value, got {s:?}")))?;
            known(&k)?;
            self.values.insert(k, v);
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.into(), value.into());
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("every key has a default")
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| CliError::config(format!("{key} = {raw:?} is invalid: {e}")))
    }

    fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.parse(key).map(Some)
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|e| CliError::config(format!("{key}: {s:?} is invalid: {e}")))
            })
            .collect()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        let raw = self.raw(key);
        (!raw.is_empty()).then(|| PathBuf::from(raw))
    }

    /// `key=value` lines in key order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, _, _) in KEYS {
            let _ = writeln!(out, "{k}={}", self.raw(k));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarKind {
    F64,
    F32,
}

#[derive(Clone, Debug)]
pub struct Paths {
    pub input: Option<PathBuf>,
    pub dataset: PathBuf,
    pub spectral_cache: PathBuf,
    pub checkpoint: PathBuf,
    pub train_log: PathBuf,
    pub train_state: PathBuf,
}

/// Typed, validated configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub threads: usize,
    pub scalar: ScalarKind,
    pub delimiter: Option<Delimiter>,
    pub min_user: usize,
    pub min_item: usize,
    pub paths: Paths,
    pub pipeline: PipelineConfig,
    pub grid_learning_rates: Vec<f64>,
    pub grid_t: Vec<f64>,
    pub cold_start_caps: Vec<usize>,
    pub synth: BlockConfig,
    /// Echo of the effective key/value pairs.
    pub rendered: String,
}

fn required_path(layers: &Layers, key: &str) -> Result<PathBuf, CliError> {
    layers
        .path(key)
        .ok_or_else(|| CliError::config(format!("{key} must name a file")))
}

impl RunConfig {
    pub fn from_layers(layers: &Layers) -> Result<Self, CliError> {
        let scalar = match layers.raw("scalar") {
            "f64" => ScalarKind::F64,
            "f32" => ScalarKind::F32,
            other => return Err(CliError::config(format!("scalar must be f64 or f32, got {other:?}"))),
        };
        let delimiter = match layers.raw("delimiter") {
            "auto" => None,
            "tab" => Some(Delimiter::Tab),
            "comma" => Some(Delimiter::Comma),
            "doublecolon" => Some(Delimiter::DoubleColon),
            other => {
                return Err(CliError::config(format!(
                    "delimiter must be auto, tab, comma or doublecolon, got {other:?}"
                )))
            }
        };
        let seed: u64 = layers.parse("seed")?;
        let model = ModelConfig {
            layers: layers.parse("layers")?,
            width: layers.parse("width")?,
            t: layers.parse("t")?,
            eta: layers.parse("eta")?,
            seed: 0,
            materialize_wavelets: layers.parse("materialize_wavelets")?,
            drop_threshold: layers.parse("drop_threshold")?,
            filter: FilterOptions {
                exponent_mode: layers.parse("exponent_mode")?,
                inverse_mode: layers.parse("inverse_mode")?,
            },
        };
        let train = TrainConfig {
            batch_size: layers.parse("batch_size")?,
            learning_rate: layers.parse("learning_rate")?,
            adam_beta1: layers.parse("adam_beta1")?,
            adam_beta2: layers.parse("adam_beta2")?,
            adam_eps: layers.parse("adam_eps")?,
            max_epochs: layers.parse("max_epochs")?,
            patience: layers.parse("patience")?,
            seed: 0,
        };
        let pipeline = PipelineConfig {
            seed,
            train_fraction: layers.parse("train_fraction")?,
            per_user_cap: layers.optional("per_user_cap")?,
            validation_fraction: layers.parse("validation_fraction")?,
            q: layers.optional("q")?,
            lanczos_tol: layers.optional("lanczos_tol")?,
            model,
            train,
            eval: EvalOptions {
                k_values: layers.list("k_values")?,
                cohort_bounds: layers.list("cohort_bounds")?,
            },
        };
        pipeline.validate()?;
        // shape checks need the dataset; the scalar ones can run now
        pipeline.model.validate(usize::MAX, usize::MAX)?;
        let cfg = Self {
            threads: layers.parse("threads")?,
            scalar,
            delimiter,
            min_user: layers.parse("min_user_interactions")?,
            min_item: layers.parse("min_item_interactions")?,
            paths: Paths {
                input: layers.path("input"),
                dataset: required_path(layers, "dataset")?,
                spectral_cache: required_path(layers, "spectral_cache")?,
                checkpoint: required_path(layers, "checkpoint")?,
                train_log: required_path(layers, "train_log")?,
                train_state: required_path(layers, "train_state")?,
            },
            pipeline,
            grid_learning_rates: layers.list("grid_learning_rates")?,
            grid_t: layers.list("grid_t")?,
            cold_start_caps: layers.list("cold_start_caps")?,
            synth: BlockConfig {
                users: layers.parse("synth_users")?,
                items: layers.parse("synth_items")?,
                blocks: layers.parse("synth_blocks")?,
                per_user: layers.parse("synth_per_user")?,
                window: layers.parse("synth_window")?,
                noise: layers.parse("synth_noise")?,
                seed,
            },
            rendered: layers.render(),
        };
        if cfg.min_user == 0 || cfg.min_item == 0 {
            return Err(CliError::config(
                "min_user_interactions and min_item_interactions must be at least 1",
            ));
        }
        if cfg.cold_start_caps.is_empty() || cfg.cold_start_caps.contains(&0) {
            return Err(CliError::config("cold_start_caps must list positive integers"));
        }
        cfg.synth.validate()?;
        Ok(cfg)
    }

    /// Grid lists, falling back to the built-in grids for empty keys.
    pub fn grid(&self) -> (Vec<f64>, Vec<f64>) {
        let or = |v: &Vec<f64>, d: &[f64]| if v.is_empty() { d.to_vec() } else { v.clone() };
        (
            or(&self.grid_learning_rates, &DEFAULT_LR_GRID),
            or(&self.grid_t, &DEFAULT_T_GRID),
        )
    }
}
