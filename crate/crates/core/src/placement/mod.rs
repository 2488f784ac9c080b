//! Booster station placement: per-step forward greedy, scenario weighting,
//! baselines, partitioned solving and backup re-placement.

mod backup;
mod compare;
mod greedy;
mod objective;
mod partition;
mod weighting;

pub use backup::{backup_replacement, BackupReport, BackupStep};
pub use compare::{compare_step, compare_strategies, ComparisonRow, Strategy};
pub use greedy::{greedy_step, solve_step, solve_step_scoped, solve_timeline, GreedyPick, PlacementTimeline, StepPlacement};
pub use objective::StepProblem;
pub use partition::{district_masks, partition_solve};
pub use weighting::{weigh_sets, weigh_sets_by_dimsrs, CriticalSteps, SetWeight, WeightPreset, WeightReport};

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::controllability::{ControllabilityError, MetricKind};
use crate::network::{NodeId, Topology};
use crate::wq::{InputScaling, WqError, WqParams};

/// Relative tolerance under which two objective values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum PlacementError {
    #[error(transparent)]
    Wq(#[from] WqError),
    #[error(transparent)]
    Controllability(#[from] ControllabilityError),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` is not part of the modelled network")]
    OutOfScope(String),
    #[error("station count must be at least 1")]
    NoStations,
    #[error("candidate pool has {pool} nodes but {stations} stations are requested")]
    PoolTooSmall { pool: usize, stations: usize },
    #[error("no candidates left to choose from")]
    EmptyPool,
    #[error("timelines disagree on {0}")]
    InconsistentTimelines(&'static str),
    #[error("no timelines to weigh")]
    NoTimelines,
    #[error("partition does not assign node `{0}`")]
    PartitionMissing(String),
    #[error("district `{0}` has no states")]
    EmptyDistrict(String),
    #[error("failed station `{0}` is not among the fixed stations")]
    FailedNotFixed(String),
    #[error("failed station `{0}` may not be in the replacement pool")]
    FailedInPool(String),
    #[error("failure time {t} s is outside the simulated period")]
    FailureOutOfRange { t: f64 },
    #[error("horizon must be non-negative, got {0} s")]
    InvalidHorizon(f64),
    #[error("weighting coefficients must be finite and non-negative")]
    InvalidWeights,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementConfig {
    /// n_s, stations per hydraulic step.
    pub stations: usize,
    pub metric: MetricKind,
    /// Candidate nodes; `None` means every node.
    #[serde(default)]
    pub pool: Option<Vec<NodeId>>,
    pub wq: WqParams,
    #[serde(default)]
    pub scaling: InputScaling,
}

impl PlacementConfig {
    pub fn new(stations: usize, metric: MetricKind, wq_step: f64) -> Self {
        Self { stations, metric, pool: None, wq: WqParams::new(wq_step), scaling: InputScaling::Unit }
    }
}

/// Resolves candidate names to node indices, ordered by node name.
pub fn resolve_pool(topology: &Topology, pool: Option<&[NodeId]>) -> Result<Vec<usize>, PlacementError> {
    let mut out: Vec<usize> = match pool {
        None => (0..topology.nodes().len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| topology.node_index(n.as_str()).ok_or_else(|| PlacementError::UnknownNode(n.as_str().into())))
            .collect::<Result<_, _>>()?,
    };
    sort_by_name(topology, &mut out);
    Ok(out)
}

pub(crate) fn sort_by_name(topology: &Topology, nodes: &mut Vec<usize>) {
    nodes.sort_by(|a, b| topology.node(*a).id.cmp(&topology.node(*b).id));
    nodes.dedup();
}
