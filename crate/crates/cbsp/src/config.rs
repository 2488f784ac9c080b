//! Run manifest. Paths are relative to the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use cbsp_core::controllability::MetricKind;
use cbsp_core::hydraulics::{peak_demand_steps, HydraulicProfile};
use cbsp_core::network::{NodeId, Topology};
use cbsp_core::placement::{CriticalSteps, PlacementConfig};
use cbsp_core::wq::{InputScaling, PacingFlow, WqParams, DEFAULT_MAX_SEGMENTS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub id: String,
    pub hydraulics: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    /// Candidate nodes; empty means every node.
    #[serde(default)]
    pub include: Vec<NodeId>,
    #[serde(default)]
    pub exclude: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CriticalSpec {
    None,
    /// Steps whose total demand reaches this percentile of the day.
    PeakPercentile(f64),
    Steps(BTreeSet<usize>),
}

impl Default for CriticalSpec {
    fn default() -> Self {
        CriticalSpec::PeakPercentile(90.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackupSpec {
    pub fixed: Vec<NodeId>,
    pub failed: NodeId,
    /// s
    pub t_fail: f64,
    /// s
    pub horizon: f64,
}

fn default_metrics() -> Vec<MetricKind> {
    vec![MetricKind::Trace, MetricKind::LogDet]
}

fn default_max_segments() -> usize {
    DEFAULT_MAX_SEGMENTS
}

fn default_balance_tolerance() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topology: PathBuf,
    pub scenarios: Vec<ScenarioFile>,
    /// Defaults to `out` next to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Δt_WQ, s.
    pub wq_step: f64,
    /// Δt_H, s; checked against the hydraulics when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hydraulic_step: Option<f64>,
    pub stations: usize,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricKind>,
    /// Extra weighting coefficients reported next to the three presets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<[f64; 4]>,
    #[serde(default)]
    pub pool: PoolSpec,
    #[serde(default)]
    pub critical: CriticalSpec,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// CSV `node,district`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PathBuf>,
    #[serde(default)]
    pub scaling: InputScaling,
    /// Injection flow behind paced input columns.
    #[serde(default)]
    pub pacing: PacingFlow,
    /// Also weigh sets by mean dimsrs / n_x.
    #[serde(default)]
    pub dimsrs_weighting: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backup: Option<BackupSpec>,
    #[serde(default = "default_max_segments")]
    pub max_segments: usize,
    #[serde(default)]
    pub stagnant_velocity: f64,
    /// Relative junction imbalance accepted by `validate`.
    #[serde(default = "default_balance_tolerance")]
    pub balance_tolerance: f64,
}

/// A config plus the directory its paths are relative to.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(self.config.output.as_deref().unwrap_or(Path::new("out")))
    }

    /// Checks numeric ranges and that every referenced file exists.
    pub fn check(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(c.wq_step.is_finite() && c.wq_step > 0.0) {
            return bad(format!("wq_step must be positive, got {}", c.wq_step));
        }
        if let Some(h) = c.hydraulic_step {
            if !(h.is_finite() && h > 0.0) {
                return bad(format!("hydraulic_step must be positive, got {h}"));
            }
        }
        if c.stations == 0 {
            return bad("stations must be at least 1".into());
        }
        if c.metrics.is_empty() {
            return bad("at least one metric is required".into());
        }
        if c.scenarios.is_empty() {
            return bad("at least one scenario is required".into());
        }
        if c.max_segments == 0 {
            return bad("max_segments must be positive".into());
        }
        if !(c.stagnant_velocity.is_finite() && c.stagnant_velocity >= 0.0) {
            return bad("stagnant_velocity must be non-negative".into());
        }
        if let Some(mu) = c.mu {
            if mu.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
                return bad("mu entries must be finite and non-negative".into());
            }
        }
        if let CriticalSpec::PeakPercentile(p) = c.critical {
            if !(0.0..=100.0).contains(&p) {
                return bad(format!("peak percentile must be within 0..100, got {p}"));
            }
        }
        let mut ids = BTreeSet::new();
        for s in &c.scenarios {
            if !ids.insert(&s.id) {
                return bad(format!("duplicate scenario id `{}`", s.id));
            }
        }
        let mut files = vec![&c.topology];
        files.extend(c.scenarios.iter().map(|s| &s.hydraulics));
        files.extend(c.partition.iter());
        for f in files {
            let p = self.resolve(f);
            if !p.is_file() {
                return bad(format!("missing file {}", p.display()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of everything except the output path.
    pub fn hash(&self) -> String {
        let mut c = self.config.clone();
        c.output = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn wq_params(&self) -> WqParams {
        let mut p = WqParams::new(self.config.wq_step);
        p.max_segments = self.config.max_segments;
        p.stagnant_velocity = self.config.stagnant_velocity;
        p.pacing = self.config.pacing;
        p
    }

    /// Candidate pool after include/exclude; `None` when it is every node.
    pub fn pool(&self, topology: &Topology) -> Result<Option<Vec<NodeId>>, ConfigError> {
        let spec = &self.config.pool;
        for n in spec.include.iter().chain(&spec.exclude) {
            if topology.node_index(n.as_str()).is_none() {
                return Err(ConfigError::Invalid(format!("pool names unknown node `{n}`")));
            }
        }
        if spec.include.is_empty() && spec.exclude.is_empty() {
            return Ok(None);
        }
        let base: Vec<NodeId> = if spec.include.is_empty() {
            topology.nodes().iter().map(|n| n.id.clone()).collect()
        } else {
            spec.include.clone()
        };
        let mut pool: Vec<NodeId> = base.into_iter().filter(|n| !spec.exclude.contains(n)).collect();
        pool.sort();
        pool.dedup();
        Ok(Some(pool))
    }

    pub fn placement(&self, topology: &Topology, metric: MetricKind) -> Result<PlacementConfig, ConfigError> {
        Ok(PlacementConfig {
            stations: self.config.stations,
            metric,
            pool: self.pool(topology)?,
            wq: self.wq_params(),
            scaling: self.config.scaling,
        })
    }

    pub fn critical_steps(&self, profiles: &[HydraulicProfile]) -> CriticalSteps {
        match &self.config.critical {
            CriticalSpec::None => CriticalSteps::None,
            CriticalSpec::Steps(s) => CriticalSteps::Steps(s.clone()),
            CriticalSpec::PeakPercentile(p) => {
                CriticalSteps::PerScenario(profiles.iter().map(|prof| peak_demand_steps(prof, *p)).collect())
            }
        }
    }
}

/// Reads a `node,district` CSV.
pub fn read_partition(path: &Path) -> Result<BTreeMap<NodeId, String>, ConfigError> {
    #[derive(Deserialize)]
    struct Row {
        node: String,
        district: String,
    }
    let invalid = |e: csv::Error| ConfigError::Invalid(format!("partition {}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path).map_err(invalid)?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: Row = row.map_err(invalid)?;
        if out.insert(NodeId::new(row.node.clone()), row.district).is_some() {
            return Err(ConfigError::Invalid(format!("partition lists node `{}` twice", row.node)));
        }
    }
    Ok(out)
}
