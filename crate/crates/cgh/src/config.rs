//! Flat key=value run configuration: known keys with defaults, config-file
//! loading, flag overrides, and an exact echo for reproducibility.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{CghError, Result};
use crate::marketing::{CodePolicy, Metric};
use crate::mf::MfConfig;
use crate::model::ModelShape;
use crate::train::{CodeMode, TrainConfig, TrainMode};

/// Every known key with its default value.
pub const KNOWN_KEYS: &[(&str, &str)] = &[
    ("seed", "42"),
    ("threads", "1"),
    ("r", "50"),
    ("ingest.d_u", "8000"),
    ("ingest.d_v", "8000"),
    ("split.cold_threshold", "5"),
    ("split.warm_test_frac", "0.2"),
    ("mf.a", "1.0"),
    ("mf.b", "0.01"),
    ("mf.reg", "0.1"),
    ("mf.iters", "15"),
    ("enc.hidden", "512,256"),
    ("prior.rho", "0.5"),
    ("train.mode", "warm"),
    ("train.lambda_u", "1.0"),
    ("train.lambda_v", "1.0"),
    ("train.a", "1.0"),
    ("train.b", "0.3"),
    ("train.kl_weight", "1.0"),
    ("train.reg_weight", "1e-4"),
    ("train.lr", "0.01"),
    ("train.momentum", "0.9"),
    ("train.batch", "256"),
    ("train.epochs", "100"),
    ("train.corruption", "0.3"),
    ("train.negatives", "5"),
    ("train.binarize", "sample"),
    ("eval.negatives", "1000"),
    ("eval.ks", "1,5,10,50,100"),
    ("eval.scorer", "hamming"),
    ("knn.metric", "euclidean"),
    ("mine.policy", "mirror"),
    ("bench.sizes", "80000,320000,1280000"),
    ("bench.k", "10"),
    ("bench.r", "50"),
    ("bench.trials", "5"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: KNOWN_KEYS
                .iter()
                .map(|&(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with a key=value file. Unknown keys are rejected.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let text = fs::read_to_string(path)?;
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| CghError::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "expected key=value".into(),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.iter().any(|&(k, _)| k == key) {
            return Err(CghError::Config(format!("unknown config key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("unknown config key `{key}`"))
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        self.get(key)
            .parse()
            .map_err(|e| CghError::Config(format!("{key}: {e}")))
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        self.get(key)
            .parse()
            .map_err(|e| CghError::Config(format!("{key}: {e}")))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        self.get(key)
            .parse()
            .map_err(|e| CghError::Config(format!("{key}: {e}")))
    }

    pub fn get_usize_list(&self, key: &str) -> Result<Vec<usize>> {
        let raw = self.get(key).trim();
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|e| CghError::Config(format!("{key}: {e}")))
            })
            .collect()
    }

    /// Sorted key=value echo; re-loading it reproduces this config exactly.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn mf_config(&self) -> Result<MfConfig> {
        Ok(MfConfig {
            r: self.get_usize("r")?,
            a: self.get_f64("mf.a")?,
            b: self.get_f64("mf.b")?,
            reg: self.get_f64("mf.reg")?,
            iters: self.get_usize("mf.iters")?,
            seed: self.get_u64("seed")?,
        })
    }

    pub fn model_shape(&self) -> Result<ModelShape> {
        Ok(ModelShape {
            r: self.get_usize("r")?,
            hidden: self.get_usize_list("enc.hidden")?,
            rho: self.get_f64("prior.rho")?,
            lambda_u: self.get_f64("train.lambda_u")?,
            lambda_v: self.get_f64("train.lambda_v")?,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let binarize = match self.get("train.binarize") {
            "sample" => CodeMode::Sample,
            "threshold" => CodeMode::Threshold,
            other => {
                return Err(CghError::Config(format!(
                    "train.binarize must be sample or threshold, got `{other}`"
                )))
            }
        };
        Ok(TrainConfig {
            mode: TrainMode::parse(self.get("train.mode"))?,
            shape: self.model_shape()?,
            a: self.get_f64("train.a")?,
            b: self.get_f64("train.b")?,
            kl_weight: self.get_f64("train.kl_weight")?,
            reg_weight: self.get_f64("train.reg_weight")?,
            learning_rate: self.get_f64("train.lr")?,
            momentum: self.get_f64("train.momentum")?,
            batch_size: self.get_usize("train.batch")?,
            epochs: self.get_usize("train.epochs")?,
            corruption: self.get_f64("train.corruption")?,
            negatives_per_positive: self.get_usize("train.negatives")?,
            code_mode: binarize,
            seed: self.get_u64("seed")?,
        })
    }

    pub fn mine_policy(&self) -> Result<CodePolicy> {
        CodePolicy::parse(self.get("mine.policy"))
    }

    pub fn knn_metric(&self) -> Result<Metric> {
        Metric::parse(self.get("knn.metric"))
    }
}
