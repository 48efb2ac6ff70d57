//! Versioned run configuration: a JSON file plus flag overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use pap_core::bench::{heuristic_registry, PlannerKind, HH_BUDGET, IQA_BUDGET};
use pap_core::env::PerceptionNoise;
use pap_core::planner::PlannerModel;
use pap_core::reactors::{ReactorModels, Registry};
use serde::{Deserialize, Serialize};

pub const RUN_CONFIG_VERSION: &str = "config/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReactorConfig {
    Oracle,
    /// Oracle classifiers whose answers are corrupted with probability `eps`;
    /// detections dropped with probability `mu`.
    Noisy { eps: f64, #[serde(default)] mu: f64 },
    /// Training-free heuristics over a detector with class-flip rate `eps`
    /// and miss rate `mu`.
    Heuristic { eps: f64, #[serde(default)] mu: f64 },
    /// Learned classifiers saved by `train reactors`.
    Learned { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlannerConfig {
    Rule,
    Learned { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: String,
    pub seed: u64,
    /// Library bundle id or directory; `auto` = household ∪ question-answering.
    pub library: String,
    pub reactors: ReactorConfig,
    pub planner: PlannerConfig,
    pub hh_budget: usize,
    pub iqa_budget: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: RUN_CONFIG_VERSION.into(),
            seed: 0,
            library: "auto".into(),
            reactors: ReactorConfig::Oracle,
            planner: PlannerConfig::Rule,
            hh_budget: HH_BUDGET,
            iqa_budget: IQA_BUDGET,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != RUN_CONFIG_VERSION {
            bail!("unsupported config version {:?} (expected {RUN_CONFIG_VERSION:?})", self.version);
        }
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(anyhow::anyhow!("{name} must lie in [0, 1], got {v}"))
            }
        };
        match &self.reactors {
            ReactorConfig::Noisy { eps, mu } | ReactorConfig::Heuristic { eps, mu } => {
                unit("eps", *eps)?;
                unit("mu", *mu)?;
            }
            ReactorConfig::Learned { path } => exists(path)?,
            ReactorConfig::Oracle => {}
        }
        if let PlannerConfig::Learned { path } = &self.planner {
            exists(path)?;
        }
        Ok(())
    }

    pub fn noise(&self) -> PerceptionNoise {
        match self.reactors {
            ReactorConfig::Noisy { mu, .. } => PerceptionNoise { class_flip: 0.0, miss_rate: mu },
            ReactorConfig::Heuristic { eps, mu } => PerceptionNoise { class_flip: eps, miss_rate: mu },
            _ => PerceptionNoise::default(),
        }
    }

    pub fn registry(&self) -> Result<Registry> {
        Ok(match &self.reactors {
            ReactorConfig::Oracle => Registry::oracle(),
            ReactorConfig::Noisy { eps, .. } => Registry::noisy(*eps),
            ReactorConfig::Heuristic { .. } => heuristic_registry(),
            ReactorConfig::Learned { path } => {
                let text = read(path)?;
                ReactorModels::from_json(&text).with_context(|| format!("loading reactors {}", path.display()))?.registry(Registry::oracle())
            }
        })
    }

    pub fn planner(&self) -> Result<PlannerKind> {
        Ok(match &self.planner {
            PlannerConfig::Rule => PlannerKind::Rule,
            PlannerConfig::Learned { path } => {
                let text = read(path)?;
                PlannerKind::Learned(Arc::new(
                    PlannerModel::from_json(&text).with_context(|| format!("loading planner {}", path.display()))?,
                ))
            }
        })
    }
}

fn exists(path: &Path) -> Result<()> {
    if !path.exists() {
        bail!("referenced path {} does not exist", path.display());
    }
    Ok(())
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Write via a sibling temp file and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}
