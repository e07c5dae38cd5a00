//! Flat key-value pipeline configuration with `WARNTRIAGE_`-prefixed
//! environment overrides. Unknown keys are rejected.

use std::path::PathBuf;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Git repository to mine and to read sources/diffs from.
    pub repo: Option<PathBuf>,
    /// Refs or commit ids whose ancestries are mined.
    pub branch_tips: Vec<String>,
    /// Replay directory of per-commit `<id>.jsonl` warning files.
    pub replay_dir: Option<PathBuf>,
    /// Directory of `<id>.msg` / `<id>.diff` files, an alternative to
    /// `repo` for the label stage.
    pub commit_info_dir: Option<PathBuf>,
    pub build_cmd: String,
    pub infer_cmd: String,
    pub flawfinder_cmd: String,
    pub build_timeout_secs: f64,
    pub two_year_days: i64,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub encoder_dim: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub oversample: usize,
    pub eval_samples: usize,
    pub eval_sample_size: usize,
    pub eval_min_awhb: usize,
    pub ndcg_ks: Vec<u32>,
    pub recall_percents: Vec<u32>,
    /// Graded relevance gains (VTB=3, LTB=2) instead of binary.
    pub graded_gains: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            repo: None,
            branch_tips: vec!["HEAD".to_string()],
            replay_dir: None,
            commit_info_dir: None,
            build_cmd: String::new(),
            infer_cmd: String::new(),
            flawfinder_cmd: String::new(),
            build_timeout_secs: 1800.0,
            two_year_days: 730,
            out_dir: PathBuf::from("out"),
            seed: 42,
            encoder_dim: 4096,
            hidden: 128,
            learning_rate: 0.05,
            epochs: 10,
            batch_size: 32,
            oversample: 10,
            eval_samples: 100,
            eval_sample_size: 1000,
            eval_min_awhb: 5,
            ndcg_ks: vec![1, 3, 5],
            recall_percents: vec![1, 5, 10, 20, 50],
            graded_gains: false,
        }
    }
}

const KEYS: [&str; 23] = [
    "repo",
    "branch_tips",
    "replay_dir",
    "commit_info_dir",
    "build_cmd",
    "infer_cmd",
    "flawfinder_cmd",
    "build_timeout_secs",
    "two_year_days",
    "out_dir",
    "seed",
    "encoder_dim",
    "hidden",
    "learning_rate",
    "epochs",
    "batch_size",
    "oversample",
    "eval_samples",
    "eval_sample_size",
    "eval_min_awhb",
    "ndcg_ks",
    "recall_percents",
    "graded_gains",
];

fn bad(key: &str, value: &str, want: &str) -> CliError {
    CliError::Config(format!("key {key:?}: cannot parse {value:?} as {want}"))
}

impl PipelineConfig {
    /// Parse the flat `key = value` format. `#` starts a comment; unknown
    /// keys are errors.
    pub fn parse(text: &str) -> Result<PipelineConfig, CliError> {
        let mut config = PipelineConfig::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected `key = value`, got {raw:?}",
                    no + 1
                )));
            };
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    /// Load a config file, then apply `WARNTRIAGE_*` environment overrides.
    pub fn load(path: &std::path::Path) -> Result<PipelineConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = PipelineConfig::parse(&text)?;
        config.apply_env_overrides()?;
        Ok(config)
    }

    pub fn apply_env_overrides(&mut self) -> Result<(), CliError> {
        for key in KEYS {
            let var = format!("WARNTRIAGE_{}", key.to_uppercase());
            if let Ok(value) = std::env::var(&var) {
                self.set(key, &value)?;
            }
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let list = |v: &str| -> Vec<String> {
            v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
        };
        let nums = |v: &str, key: &str| -> Result<Vec<u32>, CliError> {
            list(v)
                .iter()
                .map(|s| s.parse().map_err(|_| bad(key, v, "a comma-separated u32 list")))
                .collect()
        };
        match key {
            "repo" => self.repo = Some(PathBuf::from(value)),
            "branch_tips" => self.branch_tips = list(value),
            "replay_dir" => self.replay_dir = Some(PathBuf::from(value)),
            "commit_info_dir" => self.commit_info_dir = Some(PathBuf::from(value)),
            "build_cmd" => self.build_cmd = value.to_string(),
            "infer_cmd" => self.infer_cmd = value.to_string(),
            "flawfinder_cmd" => self.flawfinder_cmd = value.to_string(),
            "build_timeout_secs" => {
                self.build_timeout_secs =
                    value.parse().map_err(|_| bad(key, value, "a number"))?
            }
            "two_year_days" => {
                self.two_year_days = value.parse().map_err(|_| bad(key, value, "an integer"))?
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|_| bad(key, value, "a u64"))?,
            "encoder_dim" => {
                let dim: usize = value.parse().map_err(|_| bad(key, value, "a usize"))?;
                if dim < 2 || !dim.is_multiple_of(2) {
                    return Err(CliError::Config(format!(
                        "encoder_dim must be even and >= 2, got {dim}"
                    )));
                }
                self.encoder_dim = dim;
            }
            "hidden" => self.hidden = value.parse().map_err(|_| bad(key, value, "a usize"))?,
            "learning_rate" => {
                self.learning_rate = value.parse().map_err(|_| bad(key, value, "a number"))?
            }
            "epochs" => self.epochs = value.parse().map_err(|_| bad(key, value, "a usize"))?,
            "batch_size" => {
                self.batch_size = value.parse().map_err(|_| bad(key, value, "a usize"))?
            }
            "oversample" => {
                self.oversample = value.parse().map_err(|_| bad(key, value, "a usize"))?
            }
            "eval_samples" => {
                self.eval_samples = value.parse().map_err(|_| bad(key, value, "a usize"))?
            }
            "eval_sample_size" => {
                self.eval_sample_size = value.parse().map_err(|_| bad(key, value, "a usize"))?
            }
            "eval_min_awhb" => {
                self.eval_min_awhb = value.parse().map_err(|_| bad(key, value, "a usize"))?
            }
            "ndcg_ks" => self.ndcg_ks = nums(value, key)?,
            "recall_percents" => {
                let ps = nums(value, key)?;
                if ps.iter().any(|&p| p == 0 || p > 100) {
                    return Err(CliError::Config("recall_percents must be in 1..=100".into()));
                }
                self.recall_percents = ps;
            }
            "graded_gains" => {
                self.graded_gains = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(bad(key, value, "a boolean")),
                }
            }
            other => {
                return Err(CliError::Config(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    pub fn hyperparams(&self) -> warntriage_core::reranker::Hyperparams {
        warntriage_core::reranker::Hyperparams {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            oversample: self.oversample,
        }
    }
}
