//! Time-varying hydraulic data for one or more scenarios.
//!
//! Flows are piecewise-constant over a hydraulic step; tank volumes are
//! piecewise-linear between snapshots. A negative link flow means water moves
//! against the link's declared direction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::network::{LinkKind, NodeId, NodeKind, Topology};

/// Flows below this magnitude (m³/s) are treated as no flow.
pub const FLOW_EPSILON: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum HydraulicsError {
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("element `{element}` cannot carry a {kind} series")]
    WrongElementKind { element: String, kind: QuantityKind },
    #[error("missing {kind} for `{element}` at t = {time} s")]
    MissingSeries { element: String, kind: QuantityKind, time: f64 },
    #[error("duplicate {kind} record for `{element}` at t = {time} s")]
    DuplicateRecord { element: String, kind: QuantityKind, time: f64 },
    #[error("timestamps are not uniformly spaced (expected step {expected} s, found {found} s)")]
    NonUniformTimestamps { expected: f64, found: f64 },
    #[error("a single snapshot needs an explicit hydraulic step")]
    UnknownStep,
    #[error("hydraulic step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("profile has no snapshots")]
    Empty,
    #[error("invalid value {value} for {kind} of `{element}`")]
    InvalidValue { element: String, kind: QuantityKind, value: f64 },
    #[error("snapshot vector length does not match the topology")]
    ShapeMismatch,
    #[error("`{0}` is not a tank")]
    NotATank(String),
    #[error("time {t} s lies outside the simulated period [{start}, {end}] s")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("scenarios disagree on {0}")]
    InconsistentScenarios(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantityKind {
    Flow,
    Demand,
    Volume,
}

impl core::fmt::Display for QuantityKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            QuantityKind::Flow => "flow",
            QuantityKind::Demand => "demand",
            QuantityKind::Volume => "volume",
        })
    }
}

/// One row of a hydraulics table: `time_s,element,kind,value`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HydraulicRecord {
    pub time_s: f64,
    pub element: String,
    pub kind: QuantityKind,
    pub value: f64,
}

/// Network hydraulic state at one instant; vectors are indexed like the
/// topology's node and link lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    time: f64,
    flow: Vec<f64>,
    velocity: Vec<f64>,
    demand: Vec<f64>,
    volume: Vec<f64>,
    net_inflow: Vec<f64>,
}

impl Snapshot {
    /// Builds a snapshot, deriving pipe velocities `|q| / (π r²)` and the net
    /// inflow of every node. `demand` is read for junctions and `volume` for
    /// tanks; other entries are ignored and stored as zero.
    pub fn new(
        topology: &Topology,
        time: f64,
        flow: Vec<f64>,
        demand: Vec<f64>,
        volume: Vec<f64>,
    ) -> Result<Self, HydraulicsError> {
        let n_nodes = topology.nodes().len();
        let n_links = topology.links().len();
        if flow.len() != n_links || demand.len() != n_nodes || volume.len() != n_nodes {
            return Err(HydraulicsError::ShapeMismatch);
        }
        let invalid = |element: &NodeId, kind, value| HydraulicsError::InvalidValue {
            element: element.as_str().into(),
            kind,
            value,
        };
        let mut demand = demand;
        let mut volume = volume;
        for (i, node) in topology.nodes().iter().enumerate() {
            match node.kind {
                NodeKind::Junction => {
                    if !(demand[i].is_finite() && demand[i] >= 0.0) {
                        return Err(invalid(&node.id, QuantityKind::Demand, demand[i]));
                    }
                    volume[i] = 0.0;
                }
                NodeKind::Tank => {
                    if !(volume[i].is_finite() && volume[i] > 0.0) {
                        return Err(invalid(&node.id, QuantityKind::Volume, volume[i]));
                    }
                    demand[i] = 0.0;
                }
                NodeKind::Reservoir => {
                    demand[i] = 0.0;
                    volume[i] = 0.0;
                }
            }
        }
        let mut velocity = vec![0.0; n_links];
        let mut net_inflow = vec![0.0; n_nodes];
        for (i, link) in topology.links().iter().enumerate() {
            let q = flow[i];
            if !q.is_finite() {
                return Err(HydraulicsError::InvalidValue {
                    element: link.id.as_str().into(),
                    kind: QuantityKind::Flow,
                    value: q,
                });
            }
            if let (LinkKind::Pipe, Some(p)) = (link.kind, &link.pipe) {
                velocity[i] = q.abs() / p.area();
            }
            let (from, to) = topology.endpoints(i);
            net_inflow[to] += q;
            net_inflow[from] -= q;
        }
        Ok(Self { time, flow, velocity, demand, volume, net_inflow })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Signed flow of a link (m³/s).
    pub fn flow(&self, link: usize) -> f64 {
        self.flow[link]
    }

    /// Mean velocity of a pipe (m/s, non-negative); zero for pumps and valves.
    pub fn velocity(&self, link: usize) -> f64 {
        self.velocity[link]
    }

    /// Consumer withdrawal at a junction (m³/s); zero for other nodes.
    pub fn demand(&self, node: usize) -> f64 {
        self.demand[node]
    }

    /// Water volume of a tank (m³); zero for other nodes.
    pub fn volume(&self, node: usize) -> f64 {
        self.volume[node]
    }

    /// Σ inflow − Σ outflow through the links touching `node` (m³/s).
    pub fn net_inflow(&self, node: usize) -> f64 {
        self.net_inflow[node]
    }

    pub fn flows(&self) -> &[f64] {
        &self.flow
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.iter().sum()
    }
}

/// Snapshots of one hydraulic scenario at a uniform hydraulic step.
#[derive(Clone, Debug, PartialEq)]
pub struct HydraulicProfile {
    scenario_id: String,
    step: f64,
    snapshots: Vec<Snapshot>,
}

impl HydraulicProfile {
    pub fn new(scenario_id: impl Into<String>, step: f64, snapshots: Vec<Snapshot>) -> Result<Self, HydraulicsError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(HydraulicsError::InvalidStep(step));
        }
        if snapshots.is_empty() {
            return Err(HydraulicsError::Empty);
        }
        let tol = 1e-9 * step.max(1.0);
        for pair in snapshots.windows(2) {
            let found = pair[1].time - pair[0].time;
            if (found - step).abs() > tol {
                return Err(HydraulicsError::NonUniformTimestamps { expected: step, found });
            }
        }
        Ok(Self { scenario_id: scenario_id.into(), step, snapshots })
    }

    pub fn scenario_id(&self) -> &str {
        &self.scenario_id
    }

    /// Hydraulic time-step Δt_H (s).
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn snapshot(&self, step: usize) -> &Snapshot {
        &self.snapshots[step]
    }

    pub fn step_count(&self) -> usize {
        self.snapshots.len()
    }

    pub fn start_time(&self) -> f64 {
        self.snapshots[0].time
    }

    /// Total simulated period T_s = count × Δt_H (s).
    pub fn duration(&self) -> f64 {
        self.snapshots.len() as f64 * self.step
    }

    /// Index of the hydraulic step covering time `t`.
    pub fn step_at(&self, t: f64) -> Result<usize, HydraulicsError> {
        let start = self.start_time();
        let end = start + self.duration();
        let slack = 1e-9 * self.step;
        if !(t >= start - slack && t <= end + slack) {
            return Err(HydraulicsError::OutOfRange { t, start, end });
        }
        let k = libm::floor((t - start) / self.step + 1e-12) as isize;
        Ok(k.clamp(0, self.snapshots.len() as isize - 1) as usize)
    }

    /// Tank volume at time `t`, linear between the bounding snapshots. Past
    /// the last snapshot the last step's net inflow is extrapolated.
    pub fn tank_volume_at(&self, topology: &Topology, tank: usize, t: f64) -> Result<f64, HydraulicsError> {
        let node = topology.node(tank);
        if node.kind != NodeKind::Tank {
            return Err(HydraulicsError::NotATank(node.id.as_str().into()));
        }
        let k = self.step_at(t)?;
        let snap = &self.snapshots[k];
        let dt = t - snap.time;
        if dt == 0.0 {
            return Ok(snap.volume[tank]);
        }
        match self.snapshots.get(k + 1) {
            Some(next) => {
                let frac = dt / self.step;
                Ok(snap.volume[tank] + frac * (next.volume[tank] - snap.volume[tank]))
            }
            None => Ok(snap.volume[tank] + snap.net_inflow[tank] * dt),
        }
    }
}

/// Assembles a profile from flat records. Every pipe needs a flow and every
/// tank a volume at every timestamp; missing junction demands and missing
/// pump/valve flows are zero. `step` is required when only one timestamp is
/// present and otherwise checked against the observed spacing.
pub fn load_profile(
    topology: &Topology,
    scenario_id: impl Into<String>,
    records: &[HydraulicRecord],
    step: Option<f64>,
) -> Result<HydraulicProfile, HydraulicsError> {
    let mut times: BTreeMap<u64, f64> = BTreeMap::new();
    for r in records {
        if !r.time_s.is_finite() {
            return Err(HydraulicsError::InvalidValue {
                element: r.element.clone(),
                kind: r.kind,
                value: r.time_s,
            });
        }
        times.insert(time_key(r.time_s), r.time_s);
    }
    if times.is_empty() {
        return Err(HydraulicsError::Empty);
    }
    let instants: Vec<f64> = times.values().copied().collect();
    let step = match (step, instants.len()) {
        (Some(s), _) => s,
        (None, 1) => return Err(HydraulicsError::UnknownStep),
        (None, _) => instants[1] - instants[0],
    };
    if !(step.is_finite() && step > 0.0) {
        return Err(HydraulicsError::InvalidStep(step));
    }
    let slot: BTreeMap<u64, usize> = times.keys().enumerate().map(|(i, k)| (*k, i)).collect();

    let n_nodes = topology.nodes().len();
    let n_links = topology.links().len();
    let mut flow = vec![vec![None; n_links]; instants.len()];
    let mut demand = vec![vec![0.0; n_nodes]; instants.len()];
    let mut volume = vec![vec![None; n_nodes]; instants.len()];
    let mut seen_demand: BTreeSet<(usize, usize)> = BTreeSet::new();

    for r in records {
        let s = slot[&time_key(r.time_s)];
        let duplicate = || HydraulicsError::DuplicateRecord {
            element: r.element.clone(),
            kind: r.kind,
            time: r.time_s,
        };
        let wrong_kind = || HydraulicsError::WrongElementKind { element: r.element.clone(), kind: r.kind };
        match r.kind {
            QuantityKind::Flow => {
                let link = topology
                    .link_index(&r.element)
                    .ok_or_else(|| unknown(topology, &r.element, r.kind))?;
                if flow[s][link].replace(r.value).is_some() {
                    return Err(duplicate());
                }
            }
            QuantityKind::Demand => {
                let node = topology
                    .node_index(&r.element)
                    .ok_or_else(|| unknown(topology, &r.element, r.kind))?;
                if topology.node(node).kind != NodeKind::Junction {
                    return Err(wrong_kind());
                }
                if !seen_demand.insert((s, node)) {
                    return Err(duplicate());
                }
                demand[s][node] = r.value;
            }
            QuantityKind::Volume => {
                let node = topology
                    .node_index(&r.element)
                    .ok_or_else(|| unknown(topology, &r.element, r.kind))?;
                if topology.node(node).kind != NodeKind::Tank {
                    return Err(wrong_kind());
                }
                if volume[s][node].replace(r.value).is_some() {
                    return Err(duplicate());
                }
            }
        }
    }

    let mut snapshots = Vec::with_capacity(instants.len());
    for (s, &t) in instants.iter().enumerate() {
        let mut q = Vec::with_capacity(n_links);
        for (i, link) in topology.links().iter().enumerate() {
            match (flow[s][i], link.kind) {
                (Some(v), _) => q.push(v),
                (None, LinkKind::Pipe) => {
                    return Err(HydraulicsError::MissingSeries {
                        element: link.id.as_str().into(),
                        kind: QuantityKind::Flow,
                        time: t,
                    })
                }
                (None, _) => q.push(0.0),
            }
        }
        let mut v = vec![0.0; n_nodes];
        for (i, node) in topology.nodes().iter().enumerate() {
            if node.kind == NodeKind::Tank {
                v[i] = volume[s][i].ok_or_else(|| HydraulicsError::MissingSeries {
                    element: node.id.as_str().into(),
                    kind: QuantityKind::Volume,
                    time: t,
                })?;
            }
        }
        snapshots.push(Snapshot::new(topology, t, q, core::mem::take(&mut demand[s]), v)?);
    }
    HydraulicProfile::new(scenario_id, step, snapshots)
}

fn unknown(topology: &Topology, element: &str, kind: QuantityKind) -> HydraulicsError {
    let exists = topology.node_index(element).is_some() || topology.link_index(element).is_some();
    if exists {
        HydraulicsError::WrongElementKind { element: element.into(), kind }
    } else {
        HydraulicsError::UnknownElement(element.into())
    }
}

/// Timestamps are bucketed to the microsecond so records written with
/// slightly different float formatting land in the same snapshot.
fn time_key(t: f64) -> u64 {
    (libm::round(t * 1e6) as i64 as u64) ^ (1 << 63)
}

/// One junction exceeding the mass-balance tolerance at one snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassBalanceViolation {
    pub time: f64,
    pub junction: NodeId,
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MassBalanceReport {
    pub violations: Vec<MassBalanceViolation>,
}

impl MassBalanceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relative residual floor that keeps an all-zero junction from dividing by zero.
const BALANCE_SCALE_FLOOR: f64 = 1e-12;

/// Relative junction imbalance `|Σq_in − q_D − Σq_out| / max(floor, Σ|q|)`
/// where the sum in the denominator runs over the junction's links.
pub fn junction_residual(topology: &Topology, snapshot: &Snapshot, junction: usize) -> f64 {
    let mut scale = 0.0;
    for link in topology.incident(junction) {
        scale += snapshot.flow(link).abs();
    }
    let imbalance = snapshot.net_inflow(junction) - snapshot.demand(junction);
    imbalance.abs() / scale.max(BALANCE_SCALE_FLOOR)
}

/// Flags every (snapshot, junction) whose relative residual exceeds `tol_rel`.
pub fn validate_mass_balance(topology: &Topology, profile: &HydraulicProfile, tol_rel: f64) -> MassBalanceReport {
    let mut violations = Vec::new();
    for snap in profile.snapshots() {
        for (i, node) in topology.nodes().iter().enumerate() {
            if node.kind != NodeKind::Junction {
                continue;
            }
            let residual = junction_residual(topology, snap, i);
            if residual > tol_rel {
                violations.push(MassBalanceViolation { time: snap.time(), junction: node.id.clone(), residual });
            }
        }
    }
    MassBalanceReport { violations }
}

/// Steps whose total junction demand reaches the `percentile` (0–100,
/// nearest-rank) of all step totals.
pub fn peak_demand_steps(profile: &HydraulicProfile, percentile: f64) -> BTreeSet<usize> {
    let totals: Vec<f64> = profile.snapshots().iter().map(Snapshot::total_demand).collect();
    let mut sorted = totals.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = libm::ceil(percentile.clamp(0.0, 100.0) / 100.0 * n as f64) as usize;
    let threshold = sorted[rank.clamp(1, n) - 1];
    totals.iter().enumerate().filter(|(_, t)| **t >= threshold).map(|(k, _)| k).collect()
}

/// Profiles sharing one topology, hydraulic step and step count.
#[derive(Clone, Debug)]
pub struct ScenarioSet {
    profiles: Vec<HydraulicProfile>,
}

impl ScenarioSet {
    pub fn new(topology: &Topology, profiles: Vec<HydraulicProfile>) -> Result<Self, HydraulicsError> {
        let Some(first) = profiles.first() else {
            return Err(HydraulicsError::Empty);
        };
        for p in &profiles {
            if (p.step() - first.step()).abs() > 1e-9 * first.step() {
                return Err(HydraulicsError::InconsistentScenarios("hydraulic step"));
            }
            if p.step_count() != first.step_count() {
                return Err(HydraulicsError::InconsistentScenarios("simulation period"));
            }
            let snap = p.snapshot(0);
            if snap.flow.len() != topology.links().len() || snap.demand.len() != topology.nodes().len() {
                return Err(HydraulicsError::InconsistentScenarios("element sets"));
            }
        }
        Ok(Self { profiles })
    }

    pub fn profiles(&self) -> &[HydraulicProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}
