use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::greedy::strictly_better;
use super::{PlacementError, PlacementTimeline};
use crate::network::NodeId;

/// Steps counted as critical for the fourth weighting term.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalSteps {
    #[default]
    None,
    /// The same step indices in every scenario.
    Steps(BTreeSet<usize>),
    /// One set of step indices per scenario, in timeline order.
    PerScenario(Vec<BTreeSet<usize>>),
}

impl CriticalSteps {
    pub fn is_critical(&self, scenario: usize, step: usize) -> bool {
        match self {
            CriticalSteps::None => false,
            CriticalSteps::Steps(s) => s.contains(&step),
            CriticalSteps::PerScenario(v) => v.get(scenario).is_some_and(|s| s.contains(&step)),
        }
    }
}

/// Named coefficient sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WeightPreset {
    /// All terms but the critical-step term.
    Ws1,
    /// Structural controllability excluded.
    Ws2,
    /// Member frequency only.
    Ws3,
}

impl WeightPreset {
    pub const ALL: [WeightPreset; 3] = [WeightPreset::Ws1, WeightPreset::Ws2, WeightPreset::Ws3];

    pub fn mu(&self) -> [f64; 4] {
        match self {
            WeightPreset::Ws1 => [1.0, 1.0, 1.0, 0.0],
            WeightPreset::Ws2 => [1.0, 0.0, 1.0, 0.0],
            WeightPreset::Ws3 => [0.0, 0.0, 1.0, 0.0],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightPreset::Ws1 => "WS1",
            WeightPreset::Ws2 => "WS2",
            WeightPreset::Ws3 => "WS3",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetWeight {
    /// Members sorted by name.
    pub set: Vec<NodeId>,
    pub appearances: usize,
    /// Frequency, structural term, member frequency, critical-step flag.
    pub terms: [f64; 4],
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub mu: [f64; 4],
    pub scenarios: usize,
    pub steps: usize,
    /// Every distinct set, in lexicographic set order.
    pub sets: Vec<SetWeight>,
    pub winner: Vec<NodeId>,
    /// Fraction of (scenario, step) pairs whose selection contains the node.
    pub node_frequency: BTreeMap<NodeId, f64>,
}

impl WeightReport {
    pub fn winner_weight(&self) -> &SetWeight {
        self.sets.iter().find(|s| s.set == self.winner).expect("winner is one of the sets")
    }
}

#[derive(Clone, Copy)]
enum StructuralTerm {
    Flag,
    Dimsrs,
}

/// Weights every distinct selected set:
/// term 1 = appearances / (N_HP · T), term 2 = share of appearances with a
/// structurally controllable selection, term 3 = Σ member appearances /
/// (n_s · N_HP · T), term 4 = 1 if the set was ever chosen at a critical
/// step. The winner maximizes Σ μ_i term_i, then term 1, then comes first in
/// lexicographic set order.
pub fn weigh_sets(
    timelines: &[PlacementTimeline],
    mu: [f64; 4],
    critical: &CriticalSteps,
) -> Result<WeightReport, PlacementError> {
    weigh(timelines, mu, critical, StructuralTerm::Flag)
}

/// As [`weigh_sets`] with term 2 replaced by the mean of dimsrs / n_x over
/// the set's appearances.
pub fn weigh_sets_by_dimsrs(
    timelines: &[PlacementTimeline],
    mu: [f64; 4],
    critical: &CriticalSteps,
) -> Result<WeightReport, PlacementError> {
    weigh(timelines, mu, critical, StructuralTerm::Dimsrs)
}

#[derive(Default)]
struct Tally {
    appearances: usize,
    structural: f64,
    critical: bool,
}

fn weigh(
    timelines: &[PlacementTimeline],
    mu: [f64; 4],
    critical: &CriticalSteps,
    term2: StructuralTerm,
) -> Result<WeightReport, PlacementError> {
    if mu.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(PlacementError::InvalidWeights);
    }
    let first = timelines.first().ok_or(PlacementError::NoTimelines)?;
    let stations = first.stations;
    let steps = first.steps.len();
    if steps == 0 {
        return Err(PlacementError::NoTimelines);
    }
    for t in timelines {
        if t.stations != stations {
            return Err(PlacementError::InconsistentTimelines("station count"));
        }
        if t.steps.len() != steps {
            return Err(PlacementError::InconsistentTimelines("step count"));
        }
        if (t.hydraulic_step - first.hydraulic_step).abs() > 1e-9 * first.hydraulic_step {
            return Err(PlacementError::InconsistentTimelines("hydraulic step"));
        }
    }

    let mut tallies: BTreeMap<Vec<NodeId>, Tally> = BTreeMap::new();
    let mut node_count: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (s, timeline) in timelines.iter().enumerate() {
        for (k, step) in timeline.steps.iter().enumerate() {
            let set = step.set();
            for node in &set {
                *node_count.entry(node.clone()).or_default() += 1;
            }
            let tally = tallies.entry(set).or_default();
            tally.appearances += 1;
            tally.structural += match term2 {
                StructuralTerm::Flag => f64::from(u8::from(step.sc())),
                StructuralTerm::Dimsrs if step.n_states == 0 => 1.0,
                StructuralTerm::Dimsrs => step.dimsrs as f64 / step.n_states as f64,
            };
            tally.critical |= critical.is_critical(s, k);
        }
    }

    let total = (timelines.len() * steps) as f64;
    let sets: Vec<SetWeight> = tallies
        .into_iter()
        .map(|(set, t)| {
            let member: usize = set.iter().map(|n| node_count[n]).sum();
            let terms = [
                t.appearances as f64 / total,
                t.structural / t.appearances as f64,
                member as f64 / (stations as f64 * total),
                f64::from(u8::from(t.critical)),
            ];
            let weight = (0..4).map(|i| mu[i] * terms[i]).sum();
            SetWeight { set, appearances: t.appearances, terms, weight }
        })
        .collect();

    // `sets` is already in lexicographic order, so the first of a tie wins.
    let mut best = 0;
    for (i, s) in sets.iter().enumerate().skip(1) {
        let b = &sets[best];
        let better = if strictly_better(s.weight, b.weight) {
            true
        } else if strictly_better(b.weight, s.weight) {
            false
        } else {
            strictly_better(s.terms[0], b.terms[0])
        };
        if better {
            best = i;
        }
    }
    let winner = sets[best].set.clone();
    let node_frequency = node_count.into_iter().map(|(n, c)| (n, c as f64 / total)).collect();
    Ok(WeightReport { mu, scenarios: timelines.len(), steps, sets, winner, node_frequency })
}
