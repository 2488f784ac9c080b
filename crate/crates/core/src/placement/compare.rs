use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::greedy::{check_stations, run_greedy, step_problem};
use super::{resolve_pool, PlacementConfig, PlacementError, StepProblem};
use crate::controllability::MetricKind;
use crate::hydraulics::HydraulicProfile;
use crate::network::Topology;
use crate::wq::Scope;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Greedy,
    Random,
    Uniform,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
            Strategy::Random => "random",
            Strategy::Uniform => "uniform",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub step: usize,
    pub strategy: Strategy,
    pub seed: Option<u64>,
    pub metric: MetricKind,
    pub value: f64,
    /// 100 · f(S) / f(pool); zero when the pool value is not positive.
    pub relative_pct: f64,
}

/// Greedy, one uniformly random n_s-subset per seed, and the whole pool for
/// one built step problem. The random draw for `(seed, step)` comes from
/// ChaCha8 seeded with `seed` on stream `step`, so steps can be evaluated
/// in any order.
pub fn compare_step(
    problem: &StepProblem,
    step: usize,
    stations: usize,
    seeds: &[u64],
) -> Result<Vec<ComparisonRow>, PlacementError> {
    check_stations(stations, problem.len())?;
    let metric = problem.metric();
    let all: Vec<usize> = (0..problem.len()).collect();
    let uniform = problem.value(&all)?;
    let pct = |v: f64| if uniform > 0.0 { 100.0 * v / uniform } else { 0.0 };
    let (picks, _) = run_greedy(problem, stations)?;
    let greedy = picks.last().map_or(0.0, |p| p.value);

    let mut rows = Vec::with_capacity(seeds.len() + 2);
    rows.push(ComparisonRow { step, strategy: Strategy::Greedy, seed: None, metric, value: greedy, relative_pct: pct(greedy) });
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(step as u64);
        let set = rand::seq::index::sample(&mut rng, problem.len(), stations).into_vec();
        let value = problem.value(&set)?;
        rows.push(ComparisonRow { step, strategy: Strategy::Random, seed: Some(seed), metric, value, relative_pct: pct(value) });
    }
    rows.push(ComparisonRow { step, strategy: Strategy::Uniform, seed: None, metric, value: uniform, relative_pct: 100.0 * f64::from(u8::from(uniform > 0.0)) });
    Ok(rows)
}

/// [`compare_step`] over every hydraulic step of a profile.
pub fn compare_strategies(
    topology: &Topology,
    profile: &HydraulicProfile,
    config: &PlacementConfig,
    seeds: &[u64],
) -> Result<Vec<ComparisonRow>, PlacementError> {
    let pool = resolve_pool(topology, config.pool.as_deref())?;
    check_stations(config.stations, pool.len())?;
    let mut rows = Vec::new();
    for k in 0..profile.step_count() {
        let problem = step_problem(topology, profile, k, config, &Scope::whole(), &pool)?;
        rows.extend(compare_step(&problem, k, config.stations, seeds)?);
    }
    Ok(rows)
}
