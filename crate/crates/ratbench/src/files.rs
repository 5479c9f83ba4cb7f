//! JSON file formats read and written by the CLI and the service.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context as _;
use ratbench_core::energy::{fit_power_profiles, FitNote, FittedModel};
use ratbench_core::reference::measured_table;
use ratbench_core::rng::stream_key;
use ratbench_core::sim::{run_campaign, CampaignOutput};
use ratbench_core::{AggregateCell, CampaignConfig, LinkSettings, Metric, Models, Scenario, SimError, Technology};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Lane used to derive per-campaign seeds from the command-line seed.
const LANE_CONFIG: u64 = 0x30;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// The measured delivery/energy table as fit targets. Counts are zero: the
/// values are published aggregates, not sums over stored records.
pub fn builtin_targets() -> Vec<AggregateCell> {
    measured_table()
        .into_iter()
        .map(|c| AggregateCell {
            technology: c.technology,
            bucket: c.bucket,
            scenario: c.scenario,
            pdr_pct: c.pdr_pct,
            eb_uwh_per_byte: c.eb_uwh_per_byte,
            n_sent: 0,
            n_received: 0,
            energy_uwh_sum: 0.0,
            bytes_sum: 0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRms {
    pub technology: Technology,
    pub scenario: Scenario,
    pub base_residual_rms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<FitNote>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    /// Target cells carrying an energy value.
    pub targets_used: usize,
    pub residual_rms: Vec<ResidualRms>,
    pub created_unix_ms: u64,
}

/// `model.json`: fitted parameter blocks plus fit metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub metadata: FitMetadata,
    pub model: FittedModel,
}

impl ModelFile {
    pub fn fit(targets: &[AggregateCell], link: &LinkSettings) -> anyhow::Result<ModelFile> {
        let model = fit_power_profiles(targets, link)?;
        let residual_rms = model
            .entries
            .iter()
            .map(|e| ResidualRms {
                technology: e.technology,
                scenario: e.scenario,
                base_residual_rms: e.base_residual_rms,
                note: e.note,
            })
            .collect();
        let created_unix_ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        let targets_used = targets.iter().filter(|c| matches!(c.eb_uwh_per_byte, Metric::Value(_))).count();
        Ok(ModelFile { metadata: FitMetadata { targets_used, residual_rms, created_unix_ms }, model })
    }

    pub fn models(&self) -> Models {
        Models::fitted(self.model.clone())
    }
}

/// Measured tables by default, or the fitted energy model in `path`.
pub fn load_models(path: Option<&Path>) -> anyhow::Result<Models> {
    match path {
        Some(p) => Ok(read_json::<ModelFile>(p)?.models()),
        None => Ok(Models::measured()),
    }
}

/// Simulation config: one campaign or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SimulateConfig {
    Many { campaigns: Vec<CampaignConfig> },
    One(CampaignConfig),
}

impl SimulateConfig {
    /// Campaigns with seeds taken from `seed`. A single campaign uses it
    /// as is; in a list each campaign gets its own derived seed so record
    /// ids never collide.
    pub fn campaigns(&self, seed: u64) -> Vec<CampaignConfig> {
        match self {
            SimulateConfig::One(c) => vec![CampaignConfig { seed, ..c.clone() }],
            SimulateConfig::Many { campaigns } => campaigns
                .iter()
                .enumerate()
                .map(|(i, c)| CampaignConfig { seed: stream_key(seed, LANE_CONFIG, i as u64), ..c.clone() })
                .collect(),
        }
    }

    pub fn run(&self, seed: u64, models: &Models) -> Result<Vec<CampaignOutput>, SimError> {
        self.campaigns(seed).iter().map(|c| run_campaign(c, models)).collect()
    }
}
