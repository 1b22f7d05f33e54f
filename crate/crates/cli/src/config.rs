use anyhow::{Context, Result};
use floodecho::train::TrainConfig;
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Experiment config file. Every key is optional; flags override it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub task: Option<String>,
    pub model: Option<String>,
    pub mode: Option<String>,
    pub phases: Option<usize>,
    pub hidden: Option<usize>,
    pub layers: Option<usize>,
    pub layer_norm: Option<bool>,
    pub final_update: Option<bool>,
    pub seed: Option<u64>,
    pub sizes: Option<Vec<usize>>,
    pub instances: Option<usize>,
    pub repetitions: Option<usize>,
    pub jobs: Option<usize>,
    pub train: Option<TrainConfig>,
    pub paths: Option<Paths>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub data_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| {
            let msg = e.message().replace('\n', " ");
            anyhow::anyhow!("config {}: {}", path.display(), msg.trim())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("task = \"distance\"\nbogus = 1").is_err());
        assert!(toml::from_str::<FileConfig>("[train]\nlearning_rate = 1.0").is_err());
        let c: FileConfig = toml::from_str("task = \"distance\"\n[train]\nlr = 0.01").unwrap();
        assert_eq!(c.train.unwrap().lr, 0.01);
    }
}
