//! Discretized water-quality dynamics: one linear update `x ← A x + B u`
//! per water-quality step, held fixed across a hydraulic step.
//!
//! State layout: one state per node in topology order, then one per pump
//! or valve in link order, then the segments of each pipe in link order.
//! Segment ordinal 0 sits at the upstream end of the current flow.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::hydraulics::{HydraulicProfile, HydraulicsError, Snapshot, FLOW_EPSILON};
use crate::network::{LinkId, LinkKind, NodeId, NodeKind, Topology};
use crate::sparse::{CsrMatrix, SparseColumn};

pub const DEFAULT_MAX_SEGMENTS: usize = 5000;

/// Denominators below this are treated as a stagnant junction.
const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum WqError {
    #[error("water-quality step must be positive, got {0} s")]
    InvalidStep(f64),
    #[error("water-quality step {wq} s does not divide the hydraulic step {hydraulic} s")]
    StepNotDivisor { wq: f64, hydraulic: f64 },
    #[error("pipe `{pipe}`: v·Δt = {travel} m exceeds its length {length} m; use a smaller water-quality step")]
    Courant { pipe: LinkId, travel: f64, length: f64 },
    #[error("tank `{tank}` has non-positive volume {volume} m³ at t = {time} s")]
    TankVolume { tank: NodeId, volume: f64, time: f64 },
    #[error("time {time} s is outside hydraulic step {step}")]
    TimeOutsideStep { time: f64, step: usize },
    #[error("hydraulic step {step} out of range ({count} steps)")]
    StepOutOfRange { step: usize, count: usize },
    #[error("state spaces describe different networks")]
    TopologyMismatch,
    #[error("state vector has length {found}, expected {expected}")]
    StateLength { expected: usize, found: usize },
    #[error("district mask covers {found} nodes, topology has {expected}")]
    ScopeMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Hydraulics(#[from] HydraulicsError),
}

/// Injection flow q^B assumed for junction and tank boosters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacingFlow {
    /// `max(fraction × throughput, floor)` in m³/s.
    Relative { fraction: f64, floor: f64 },
    Fixed(f64),
}

impl Default for PacingFlow {
    fn default() -> Self {
        PacingFlow::Relative { fraction: 0.01, floor: 1e-6 }
    }
}

impl PacingFlow {
    pub fn flow(&self, throughput: f64) -> f64 {
        match *self {
            PacingFlow::Relative { fraction, floor } => (fraction * throughput).max(floor),
            PacingFlow::Fixed(q) => q,
        }
    }
}

/// Magnitude given to candidate input columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScaling {
    /// Unit entry at the node's row.
    #[default]
    Unit,
    /// Physical booster coefficient from the pacing flow.
    Paced,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WqParams {
    /// Δt_WQ in seconds.
    pub wq_step: f64,
    #[serde(default)]
    pub pacing: PacingFlow,
    /// Upper bound on segments per pipe; slow pipes get fewer, longer
    /// segments (λ < 1) instead of unbounded state growth.
    #[serde(default = "default_max_segments")]
    pub max_segments: usize,
    /// Pipes at or below this velocity (m/s) are treated as stagnant.
    #[serde(default)]
    pub stagnant_velocity: f64,
}

fn default_max_segments() -> usize {
    DEFAULT_MAX_SEGMENTS
}

impl WqParams {
    pub fn new(wq_step: f64) -> Self {
        Self { wq_step, pacing: PacingFlow::default(), max_segments: DEFAULT_MAX_SEGMENTS, stagnant_velocity: 0.0 }
    }

    /// Checks Δt_WQ > 0 and that it divides Δt_H; returns N_p = Δt_H / Δt_WQ.
    pub fn horizon(&self, hydraulic_step: f64) -> Result<usize, WqError> {
        if !(self.wq_step.is_finite() && self.wq_step > 0.0) {
            return Err(WqError::InvalidStep(self.wq_step));
        }
        let ratio = hydraulic_step / self.wq_step;
        let n = libm::round(ratio);
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(WqError::StepNotDivisor { wq: self.wq_step, hydraulic: hydraulic_step });
        }
        Ok(n as usize)
    }
}

/// Upwind discretization of one pipe at one velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub segments: usize,
    /// Δx in m.
    pub segment_length: f64,
    /// Courant number λ = v Δt / Δx; zero for a stagnant pipe.
    pub courant: f64,
}

impl Segmentation {
    pub fn is_stagnant(&self) -> bool {
        self.courant == 0.0
    }
}

/// Error returned by [`segmentize`]: water would cross the whole pipe in one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CourantViolation {
    pub travel: f64,
    pub length: f64,
}

/// `n = ⌊L / (v Δt)⌋` segments (capped at `max_segments`), `Δx = L / n`.
pub fn segmentize(length: f64, velocity: f64, params: &WqParams) -> Result<Segmentation, CourantViolation> {
    let travel = velocity * params.wq_step;
    if velocity <= params.stagnant_velocity || travel <= 0.0 {
        return Ok(Segmentation { segments: 1, segment_length: length, courant: 0.0 });
    }
    if travel > length {
        return Err(CourantViolation { travel, length });
    }
    // The relative nudge keeps exact ratios such as 1000 / (0.1 · 10) from
    // losing a segment to rounding in v = q / (π r²).
    let raw = libm::floor(length / travel * (1.0 + 1e-12));
    let segments = (raw as usize).clamp(1, params.max_segments.max(1));
    let segment_length = length / segments as f64;
    let courant = (travel / segment_length).min(1.0);
    Ok(Segmentation { segments, segment_length, courant })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateKind {
    Node { node: usize },
    Link { link: usize },
    Segment { pipe: usize, ordinal: usize },
}

/// Where one pipe's segments live in the state vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipeLayout {
    pub offset: usize,
    pub segmentation: Segmentation,
    /// True when the current flow runs against the declared direction.
    pub reversed: bool,
}

impl PipeLayout {
    pub fn state(&self, ordinal: usize) -> usize {
        debug_assert!(ordinal < self.segmentation.segments);
        self.offset + ordinal
    }

    pub fn first(&self) -> usize {
        self.offset
    }

    pub fn last(&self) -> usize {
        self.offset + self.segmentation.segments - 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateIndex {
    kinds: Vec<StateKind>,
    labels: Vec<String>,
    node_state: Vec<Option<usize>>,
    link_state: Vec<Option<usize>>,
    pipes: Vec<Option<PipeLayout>>,
}

impl StateIndex {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, state: usize) -> StateKind {
        self.kinds[state]
    }

    pub fn kinds(&self) -> &[StateKind] {
        &self.kinds
    }

    /// Node or link name, with `[k]` appended for pipe segments.
    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn node_state(&self, node: usize) -> Option<usize> {
        self.node_state[node]
    }

    /// State of a pump or valve.
    pub fn link_state(&self, link: usize) -> Option<usize> {
        self.link_state[link]
    }

    pub fn pipe(&self, link: usize) -> Option<&PipeLayout> {
        self.pipes[link].as_ref()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn node_count(&self) -> usize {
        self.node_state.iter().flatten().count()
    }

    pub fn link_state_count(&self) -> usize {
        self.link_state.iter().flatten().count()
    }

    pub fn segment_count(&self) -> usize {
        self.pipes.iter().flatten().map(|p| p.segmentation.segments).sum()
    }
}

/// Part of the network to model: everything, or the nodes of one district
/// plus the links with both ends inside it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scope {
    nodes: Option<Vec<bool>>,
}

impl Scope {
    pub fn whole() -> Self {
        Self { nodes: None }
    }

    pub fn district(mask: Vec<bool>) -> Self {
        Self { nodes: Some(mask) }
    }

    pub fn is_whole(&self) -> bool {
        self.nodes.is_none()
    }

    pub fn contains_node(&self, node: usize) -> bool {
        self.nodes.as_ref().is_none_or(|m| m[node])
    }

    pub fn contains_link(&self, topology: &Topology, link: usize) -> bool {
        let (a, b) = topology.endpoints(link);
        self.contains_node(a) && self.contains_node(b)
    }
}

/// Column for water imported across a district boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct ExogenousInput {
    pub link: LinkId,
    pub node: NodeId,
    pub column: SparseColumn,
}

/// Linear water-quality model of one hydraulic step.
#[derive(Clone, Debug)]
pub struct StateSpace {
    a: CsrMatrix,
    index: StateIndex,
    wq_step: f64,
    step: usize,
    time: f64,
    /// Per node: `(row, paced coefficient)` of a booster at that node.
    booster: Vec<Option<(usize, f64)>>,
    exogenous: Vec<ExogenousInput>,
    storage: Vec<f64>,
    storage_next: Vec<f64>,
    transit: Vec<f64>,
}

impl StateSpace {
    pub fn a(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn index(&self) -> &StateIndex {
        &self.index
    }

    pub fn n_states(&self) -> usize {
        self.index.len()
    }

    pub fn wq_step(&self) -> f64 {
        self.wq_step
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Input column b_α for a booster at `node`; `None` outside the scope.
    pub fn input_column(&self, node: usize, scaling: InputScaling) -> Option<SparseColumn> {
        let (row, paced) = self.booster.get(node).copied().flatten()?;
        let value = match scaling {
            InputScaling::Unit => 1.0,
            InputScaling::Paced => paced,
        };
        Some(SparseColumn::new(self.n_states(), vec![(row, value)]))
    }

    /// Physical booster column per the mixing equations.
    pub fn candidate_column(&self, node: usize) -> Option<SparseColumn> {
        self.input_column(node, InputScaling::Paced)
    }

    pub fn exogenous_inputs(&self) -> &[ExogenousInput] {
        &self.exogenous
    }

    /// Water volume held by each state at the start of the step: tank
    /// volume, segment volume π r² Δx, zero for junctions, pumps and valves.
    pub fn storage_volumes(&self) -> &[f64] {
        &self.storage
    }

    /// As [`Self::storage_volumes`] one water-quality step later.
    pub fn storage_volumes_next(&self) -> &[f64] {
        &self.storage_next
    }

    /// Water passing through each junction, pump or valve state during one
    /// water-quality step (throughput × Δt); zero for other states.
    pub fn transit_volumes(&self) -> &[f64] {
        &self.transit
    }
}

/// Builds the model for hydraulic step `step`, evaluated at its start.
pub fn build_state_space(
    topology: &Topology,
    profile: &HydraulicProfile,
    step: usize,
    params: &WqParams,
) -> Result<StateSpace, WqError> {
    check_step(profile, step)?;
    let t = profile.snapshot(step).time();
    build_state_space_at(topology, profile, step, t, params, &Scope::whole())
}

fn check_step(profile: &HydraulicProfile, step: usize) -> Result<(), WqError> {
    if step >= profile.step_count() {
        return Err(WqError::StepOutOfRange { step, count: profile.step_count() });
    }
    Ok(())
}

/// Flow through a link after zeroing negligible and stagnant flows.
fn effective_flow(topology: &Topology, snap: &Snapshot, link: usize, params: &WqParams) -> f64 {
    let q = snap.flow(link);
    if q.abs() < FLOW_EPSILON {
        return 0.0;
    }
    if topology.link(link).kind == LinkKind::Pipe && snap.velocity(link) <= params.stagnant_velocity {
        return 0.0;
    }
    q
}

/// Builds the model at an arbitrary time inside hydraulic step `step`.
/// Tank coefficients use the interpolated volumes at `time` and
/// `time + Δt_WQ`; everything else comes from the step's snapshot.
pub fn build_state_space_at(
    topology: &Topology,
    profile: &HydraulicProfile,
    step: usize,
    time: f64,
    params: &WqParams,
    scope: &Scope,
) -> Result<StateSpace, WqError> {
    check_step(profile, step)?;
    if let Some(mask) = &scope.nodes {
        if mask.len() != topology.nodes().len() {
            return Err(WqError::ScopeMismatch { expected: topology.nodes().len(), found: mask.len() });
        }
    }
    params.horizon(profile.step())?;
    let snap = profile.snapshot(step);
    let t0 = snap.time();
    let slack = 1e-9 * profile.step();
    if time < t0 - slack || time > t0 + profile.step() + slack {
        return Err(WqError::TimeOutsideStep { time, step });
    }
    let dt = params.wq_step;
    let n_nodes = topology.nodes().len();
    let n_links = topology.links().len();
    let flow: Vec<f64> = (0..n_links).map(|l| effective_flow(topology, snap, l, params)).collect();

    // State layout.
    let mut kinds = Vec::new();
    let mut labels = Vec::new();
    let mut node_state = vec![None; n_nodes];
    for (i, node) in topology.nodes().iter().enumerate() {
        if scope.contains_node(i) {
            node_state[i] = Some(kinds.len());
            kinds.push(StateKind::Node { node: i });
            labels.push(String::from(node.id.as_str()));
        }
    }
    let mut link_state = vec![None; n_links];
    for (l, link) in topology.links().iter().enumerate() {
        if link.kind != LinkKind::Pipe && scope.contains_link(topology, l) {
            link_state[l] = Some(kinds.len());
            kinds.push(StateKind::Link { link: l });
            labels.push(String::from(link.id.as_str()));
        }
    }
    let mut pipes = vec![None; n_links];
    for (l, link) in topology.links().iter().enumerate() {
        let Some(props) = link.pipe.as_ref() else { continue };
        if !scope.contains_link(topology, l) {
            continue;
        }
        let velocity = if flow[l] == 0.0 { 0.0 } else { snap.velocity(l) };
        let segmentation = segmentize(props.length, velocity, params).map_err(|v| WqError::Courant {
            pipe: link.id.clone(),
            travel: v.travel,
            length: v.length,
        })?;
        let offset = kinds.len();
        for k in 0..segmentation.segments {
            kinds.push(StateKind::Segment { pipe: l, ordinal: k });
            labels.push(format!("{}[{}]", link.id, k));
        }
        pipes[l] = Some(PipeLayout { offset, segmentation, reversed: flow[l] < 0.0 });
    }
    let index = StateIndex { kinds, labels, node_state, link_state, pipes };
    let n = index.len();

    // State whose concentration leaves link `l` at its downstream end.
    let outlet = |l: usize| -> Option<usize> {
        match &index.pipes[l] {
            Some(p) => Some(p.last()),
            None => index.link_state[l],
        }
    };
    let upstream_node = |l: usize| -> usize {
        let (from, to) = topology.endpoints(l);
        if flow[l] >= 0.0 {
            from
        } else {
            to
        }
    };

    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut booster = vec![None; n_nodes];
    let mut exogenous: Vec<ExogenousInput> = Vec::new();
    let mut storage = vec![0.0; n];
    let mut storage_next = vec![0.0; n];
    let mut transit = vec![0.0; n];
    let bulk = topology.bulk_rate();

    for (i, node) in topology.nodes().iter().enumerate() {
        let Some(row) = index.node_state[i] else { continue };
        // Split incident links into inflows (towards i) and outflows.
        let mut inflows: Vec<(usize, f64)> = Vec::new();
        let mut outflow = 0.0;
        for l in topology.incident(i) {
            let q = flow[l];
            if q == 0.0 {
                continue;
            }
            if upstream_node(l) == i {
                outflow += q.abs();
            } else {
                inflows.push((l, q.abs()));
            }
        }
        let mut boundary = |l: usize, coefficient: f64| {
            exogenous.push(ExogenousInput {
                link: topology.link(l).id.clone(),
                node: node.id.clone(),
                column: SparseColumn::new(n, vec![(row, coefficient)]),
            });
        };
        match node.kind {
            NodeKind::Reservoir => {
                triplets.push((row, row, 1.0));
                booster[i] = Some((row, 1.0));
            }
            NodeKind::Junction => {
                let denom = snap.demand(i) + outflow;
                transit[row] = denom * dt;
                if denom < DENOMINATOR_FLOOR {
                    triplets.push((row, row, 1.0));
                } else {
                    for &(l, q) in &inflows {
                        match outlet(l).filter(|_| scope.contains_link(topology, l)) {
                            Some(col) => triplets.push((row, col, q / denom)),
                            None => boundary(l, q / denom),
                        }
                    }
                }
                let q_b = params.pacing.flow(denom);
                booster[i] = Some((row, q_b / denom.max(q_b)));
            }
            NodeKind::Tank => {
                let v_now = profile.tank_volume_at(topology, i, time)?;
                let v_next = profile.tank_volume_at(topology, i, time + dt)?;
                for (v, t) in [(v_now, time), (v_next, time + dt)] {
                    if !(v > 0.0) {
                        return Err(WqError::TankVolume { tank: node.id.clone(), volume: v, time: t });
                    }
                }
                storage[row] = v_now;
                storage_next[row] = v_next;
                triplets.push((row, row, (v_now - outflow * dt - v_now * bulk * dt) / v_next));
                for &(l, q) in &inflows {
                    match outlet(l).filter(|_| scope.contains_link(topology, l)) {
                        Some(col) => triplets.push((row, col, q * dt / v_next)),
                        None => boundary(l, q * dt / v_next),
                    }
                }
                let throughput = outflow + inflows.iter().map(|e| e.1).sum::<f64>();
                let q_b = params.pacing.flow(throughput);
                booster[i] = Some((row, q_b * dt / v_next));
            }
        }
    }

    for (l, link) in topology.links().iter().enumerate() {
        if let Some(row) = index.link_state[l] {
            if flow[l] == 0.0 {
                triplets.push((row, row, 1.0));
            } else {
                let up = index.node_state[upstream_node(l)].expect("pump endpoints are in scope");
                triplets.push((row, up, 1.0));
                transit[row] = flow[l].abs() * dt;
            }
        }
        let Some(layout) = index.pipes[l] else { continue };
        let props = link.pipe.as_ref().expect("pipe layout implies pipe properties");
        let decay = props.decay_rate(bulk) * dt;
        let seg = layout.segmentation;
        let volume = props.area() * seg.segment_length;
        let up = index.node_state[upstream_node(l)].expect("pipe endpoints are in scope");
        for k in 0..seg.segments {
            let row = layout.state(k);
            storage[row] = volume;
            storage_next[row] = volume;
            triplets.push((row, row, 1.0 - seg.courant - decay));
            if seg.courant > 0.0 {
                let col = if k == 0 { up } else { row - 1 };
                triplets.push((row, col, seg.courant));
            }
        }
    }

    Ok(StateSpace {
        a: CsrMatrix::from_triplets(n, n, &triplets),
        index,
        wq_step: dt,
        step,
        time,
        booster,
        exogenous,
        storage,
        storage_next,
        transit,
    })
}

/// Carries a state vector across a change of model. Node, pump and valve
/// states are copied. Pipe segments are put in declared order, resampled by
/// length-weighted averaging over normalized pipe length, then reoriented.
pub fn remap_state(prev: &StateSpace, next: &StateSpace, x_prev: &[f64]) -> Result<Vec<f64>, WqError> {
    let (pi, ni) = (&prev.index, &next.index);
    if x_prev.len() != pi.len() {
        return Err(WqError::StateLength { expected: pi.len(), found: x_prev.len() });
    }
    if pi.node_state.len() != ni.node_state.len()
        || pi.link_state.len() != ni.link_state.len()
        || pi.node_state.iter().zip(&ni.node_state).any(|(a, b)| a.is_some() != b.is_some())
        || pi.link_state.iter().zip(&ni.link_state).any(|(a, b)| a.is_some() != b.is_some())
        || pi.pipes.iter().zip(&ni.pipes).any(|(a, b)| a.is_some() != b.is_some())
    {
        return Err(WqError::TopologyMismatch);
    }
    let mut x = vec![0.0; ni.len()];
    for (a, b) in pi.node_state.iter().zip(&ni.node_state).chain(pi.link_state.iter().zip(&ni.link_state)) {
        if let (Some(a), Some(b)) = (a, b) {
            x[*b] = x_prev[*a];
        }
    }
    for (a, b) in pi.pipes.iter().zip(&ni.pipes) {
        let (Some(a), Some(b)) = (a, b) else { continue };
        let mut old: Vec<f64> = x_prev[a.offset..a.offset + a.segmentation.segments].to_vec();
        if a.reversed {
            old.reverse();
        }
        let mut new = resample(&old, b.segmentation.segments);
        if b.reversed {
            new.reverse();
        }
        x[b.offset..b.offset + new.len()].copy_from_slice(&new);
    }
    Ok(x)
}

/// Length-weighted average of a piecewise-constant profile onto `m` equal cells.
fn resample(values: &[f64], m: usize) -> Vec<f64> {
    let n = values.len();
    if n == m {
        return values.to_vec();
    }
    let mut out = vec![0.0; m];
    // Work in units of 1/(n m) so cell boundaries are integers.
    for (j, slot) in out.iter_mut().enumerate() {
        let (lo, hi) = (j * n, (j + 1) * n);
        let mut acc = 0.0;
        let mut i = lo / m;
        while i < n && i * m < hi {
            let overlap = hi.min((i + 1) * m) - lo.max(i * m);
            acc += values[i] * overlap as f64;
            i += 1;
        }
        *slot = acc / n as f64;
    }
    out
}
