use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{resolve_pool, PlacementConfig, PlacementError, StepProblem, TIE_TOLERANCE};
use crate::controllability::MetricKind;
use crate::hydraulics::HydraulicProfile;
use crate::network::{NodeId, Topology};
use crate::wq::{build_state_space_at, Scope};

/// One greedy selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyPick {
    pub node: NodeId,
    /// Index into the step problem's candidate list.
    #[serde(skip)]
    pub candidate: usize,
    /// f(S ∪ {α}) − f(S).
    pub gain: f64,
    /// f(S ∪ {α}).
    pub value: f64,
    /// Structural controllability of the prefix ending with this pick.
    pub sc: bool,
}

/// True when `a` beats `b` by more than the tie tolerance.
pub(crate) fn strictly_better(a: f64, b: f64) -> bool {
    a - b > TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Picks the candidate in `pool ∖ already` with the largest marginal gain.
/// Candidates are scanned in name order and a later one only wins if it is
/// strictly better, so ties go to the lexicographically smallest name.
pub fn greedy_step(problem: &StepProblem, already: &[usize], pool: &[usize]) -> Result<GreedyPick, PlacementError> {
    let mut order: Vec<usize> = pool.iter().copied().filter(|c| !already.contains(c)).collect();
    order.sort_unstable();
    order.dedup();
    if order.is_empty() {
        return Err(PlacementError::EmptyPool);
    }
    let mut best: Option<(usize, f64, f64)> = None;
    match problem.metric() {
        MetricKind::Trace => {
            let current = problem.value(already)?;
            for &c in &order {
                let gain = problem.single_trace(c);
                if best.is_none_or(|(_, g, _)| strictly_better(gain, g)) {
                    best = Some((c, gain, current + gain));
                }
            }
        }
        MetricKind::LogDet => {
            let base = problem.base_gramian(already);
            let current = problem.logdet(&base, None)?;
            for &c in &order {
                let value = problem.logdet(&base, Some(c))?;
                let gain = value - current;
                if best.is_none_or(|(_, g, _)| strictly_better(gain, g)) {
                    best = Some((c, gain, value));
                }
            }
        }
    }
    let (candidate, gain, value) = best.expect("pool is non-empty");
    let mut prefix = already.to_vec();
    prefix.push(candidate);
    Ok(GreedyPick { node: problem.names()[candidate].clone(), candidate, gain, value, sc: problem.sc(&prefix) })
}

/// Greedy result of one hydraulic step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPlacement {
    pub step: usize,
    pub time: f64,
    pub n_states: usize,
    /// Picks in greedy order.
    pub picks: Vec<GreedyPick>,
    /// dimsrs of the full selection.
    pub dimsrs: usize,
    pub epsilon: Option<f64>,
}

impl StepPlacement {
    /// Selected nodes sorted by name.
    pub fn set(&self) -> Vec<NodeId> {
        let mut s: Vec<NodeId> = self.picks.iter().map(|p| p.node.clone()).collect();
        s.sort();
        s
    }

    /// sc flag of the full selection.
    pub fn sc(&self) -> bool {
        self.picks.last().is_some_and(|p| p.sc)
    }

    pub fn value(&self) -> f64 {
        self.picks.last().map_or(0.0, |p| p.value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementTimeline {
    pub scenario: String,
    pub metric: MetricKind,
    pub stations: usize,
    pub hydraulic_step: f64,
    pub steps: Vec<StepPlacement>,
}

/// Runs `stations` greedy iterations on an already built problem.
pub(crate) fn run_greedy(problem: &StepProblem, stations: usize) -> Result<(Vec<GreedyPick>, usize), PlacementError> {
    let pool: Vec<usize> = (0..problem.len()).collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(stations);
    let mut picks = Vec::with_capacity(stations);
    for _ in 0..stations {
        let pick = greedy_step(problem, &chosen, &pool)?;
        chosen.push(pick.candidate);
        picks.push(pick);
    }
    Ok((picks, problem.dimsrs(&chosen)))
}

pub(crate) fn check_stations(stations: usize, pool: usize) -> Result<(), PlacementError> {
    if stations == 0 {
        return Err(PlacementError::NoStations);
    }
    if pool < stations {
        return Err(PlacementError::PoolTooSmall { pool, stations });
    }
    Ok(())
}

/// Builds the model of one step (restricted to `scope`) and its problem.
pub(crate) fn step_problem(
    topology: &Topology,
    profile: &HydraulicProfile,
    step: usize,
    config: &PlacementConfig,
    scope: &Scope,
    candidates: &[usize],
) -> Result<StepProblem, PlacementError> {
    let horizon = config.wq.horizon(profile.step())?;
    if step >= profile.step_count() {
        return Err(crate::wq::WqError::StepOutOfRange { step, count: profile.step_count() }.into());
    }
    let t = profile.snapshot(step).time();
    let space = build_state_space_at(topology, profile, step, t, &config.wq, scope)?;
    StepProblem::new(topology, space, candidates, config.metric, config.scaling, horizon)
}

/// Greedy placement for one hydraulic step of the whole network.
pub fn solve_step(
    topology: &Topology,
    profile: &HydraulicProfile,
    step: usize,
    config: &PlacementConfig,
) -> Result<StepPlacement, PlacementError> {
    let pool = resolve_pool(topology, config.pool.as_deref())?;
    solve_step_scoped(topology, profile, step, config, &Scope::whole(), &pool)
}

/// Greedy placement for one step of a district with an explicit pool.
pub fn solve_step_scoped(
    topology: &Topology,
    profile: &HydraulicProfile,
    step: usize,
    config: &PlacementConfig,
    scope: &Scope,
    pool: &[usize],
) -> Result<StepPlacement, PlacementError> {
    check_stations(config.stations, pool.len())?;
    let problem = step_problem(topology, profile, step, config, scope, pool)?;
    let (picks, dimsrs) = run_greedy(&problem, config.stations)?;
    Ok(StepPlacement {
        step,
        time: problem.space().time(),
        n_states: problem.space().n_states(),
        picks,
        dimsrs,
        epsilon: problem.epsilon(),
    })
}

/// Greedy placement at every hydraulic step of a profile.
pub fn solve_timeline(
    topology: &Topology,
    profile: &HydraulicProfile,
    config: &PlacementConfig,
) -> Result<PlacementTimeline, PlacementError> {
    let pool = resolve_pool(topology, config.pool.as_deref())?;
    check_stations(config.stations, pool.len())?;
    let steps = (0..profile.step_count())
        .map(|k| solve_step_scoped(topology, profile, k, config, &Scope::whole(), &pool))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PlacementTimeline {
        scenario: profile.scenario_id().into(),
        metric: config.metric,
        stations: config.stations,
        hydraulic_step: profile.step(),
        steps,
    })
}
