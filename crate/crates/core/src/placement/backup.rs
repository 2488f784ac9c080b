use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::greedy::step_problem;
use super::{greedy_step, resolve_pool, PlacementConfig, PlacementError};
use crate::hydraulics::HydraulicProfile;
use crate::network::{NodeId, Topology};
use crate::wq::Scope;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackupStep {
    pub step: usize,
    pub time: f64,
    pub node: NodeId,
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackupReport {
    pub failed: NodeId,
    pub fixed: Vec<NodeId>,
    pub steps: Vec<BackupStep>,
    /// Most frequent per-step replacement; ties go to the smaller name.
    pub replacement: Option<NodeId>,
}

/// Re-runs one greedy iteration per affected step after station `failed`
/// stops at `t_fail`. The surviving stations stay in place and candidates
/// exclude every fixed station. A step is affected when its interval
/// `[t_k, t_k + Δt_H)` overlaps `[t_fail, t_fail + horizon)`.
pub fn backup_replacement(
    topology: &Topology,
    profile: &HydraulicProfile,
    config: &PlacementConfig,
    fixed: &[NodeId],
    failed: &NodeId,
    t_fail: f64,
    horizon: f64,
) -> Result<BackupReport, PlacementError> {
    if !fixed.contains(failed) {
        return Err(PlacementError::FailedNotFixed(failed.as_str().into()));
    }
    if let Some(pool) = &config.pool {
        if pool.contains(failed) {
            return Err(PlacementError::FailedInPool(failed.as_str().into()));
        }
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(PlacementError::InvalidHorizon(horizon));
    }
    let start = profile.start_time();
    if !(t_fail >= start && t_fail <= start + profile.duration()) {
        return Err(PlacementError::FailureOutOfRange { t: t_fail });
    }
    let fixed_idx = resolve_pool(topology, Some(fixed))?;
    let failed_idx = topology.node_index(failed.as_str()).expect("failed is among the resolved fixed nodes");
    let surviving: Vec<usize> = fixed_idx.iter().copied().filter(|&n| n != failed_idx).collect();
    let pool: Vec<usize> = resolve_pool(topology, config.pool.as_deref())?
        .into_iter()
        .filter(|n| !fixed_idx.contains(n))
        .collect();

    let mut fixed_sorted: Vec<NodeId> = fixed.to_vec();
    fixed_sorted.sort();
    fixed_sorted.dedup();
    let mut report = BackupReport { failed: failed.clone(), fixed: fixed_sorted, steps: Vec::new(), replacement: None };
    let dt = profile.step();
    let affected: Vec<usize> = (0..profile.step_count())
        .filter(|&k| {
            let t = profile.snapshot(k).time();
            t < t_fail + horizon && t + dt > t_fail
        })
        .collect();
    if affected.is_empty() {
        return Ok(report);
    }
    if pool.is_empty() {
        return Err(PlacementError::EmptyPool);
    }

    let mut universe = surviving.clone();
    universe.extend(&pool);
    let mut counts: BTreeMap<NodeId, usize> = BTreeMap::new();
    for k in affected {
        let problem = step_problem(topology, profile, k, config, &Scope::whole(), &universe)?;
        let to_local = |nodes: &[usize]| -> Vec<usize> {
            (0..problem.len()).filter(|&i| nodes.contains(&problem.node(i))).collect()
        };
        let pick = greedy_step(&problem, &to_local(&surviving), &to_local(&pool))?;
        *counts.entry(pick.node.clone()).or_default() += 1;
        report.steps.push(BackupStep { step: k, time: problem.space().time(), node: pick.node, gain: pick.gain });
    }
    // BTreeMap order makes the first maximum the smallest name.
    let mut best: Option<(&NodeId, usize)> = None;
    for (node, &c) in &counts {
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((node, c));
        }
    }
    report.replacement = best.map(|(n, _)| n.clone());
    Ok(report)
}
