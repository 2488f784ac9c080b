//! Test networks with hydraulics synthesized by mass balance: junction
//! demands and tank fill rates are chosen, a few loop-closing ("chord")
//! flows are fixed, and every other link flow follows from the spanning
//! tree rooted at the source.

use std::collections::VecDeque;

use cbsp_core::hydraulics::{HydraulicProfile, Snapshot};
use cbsp_core::network::{Link, Node, NodeId, NodeKind, PipeProperties, Topology};

use crate::config::{BackupSpec, RunConfig, ScenarioFile};
use crate::inp::{parse_inp, write_inp};
use crate::records::{profile_records, write_csv};

pub const HOUR: f64 = 3600.0;

pub const THREE_NODE_INP: &str = include_str!("../../../fixtures/three_node.inp");
pub const NET1_LIKE_INP: &str = include_str!("../../../fixtures/net1_like.inp");

/// A network, its scenarios and the water-quality step it was sized for.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub topology: Topology,
    pub profiles: Vec<HydraulicProfile>,
    pub wq_step: f64,
    /// Candidate pool used by the shipped run configuration; `None` is every node.
    pub pool: Option<Vec<NodeId>>,
}

/// Link flows satisfying `need` at every non-source node. `need` is the
/// demand of a junction or the fill rate of a tank; the source absorbs the
/// balance. Links listed in `chords` carry the given flow, and the remaining
/// links must form a spanning tree.
///
/// Panics when the non-chord links do not form a spanning tree.
pub fn balance_flows(topology: &Topology, source: usize, need: &[f64], chords: &[(usize, f64)]) -> Vec<f64> {
    let n = topology.nodes().len();
    let m = topology.links().len();
    let mut flow = vec![0.0; m];
    let mut excess = need.to_vec();
    excess[source] = 0.0;
    let mut is_chord = vec![false; m];
    for &(l, q) in chords {
        is_chord[l] = true;
        flow[l] = q;
        let (from, to) = topology.endpoints(l);
        excess[from] += q;
        excess[to] -= q;
    }

    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([source]);
    seen[source] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for l in topology.incident(u) {
            if is_chord[l] {
                continue;
            }
            let (a, b) = topology.endpoints(l);
            let v = if a == u { b } else { a };
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(l);
                queue.push_back(v);
            }
        }
    }
    let tree_links = m - chords.len();
    assert!(order.len() == n && tree_links == n - 1, "non-chord links must form a spanning tree");

    // Leaves first: each tree link carries the excess of the subtree below it.
    for &v in order.iter().skip(1).rev() {
        let l = parent[v].expect("non-root nodes have a parent link");
        let (a, b) = topology.endpoints(l);
        let u = if a == v { b } else { a };
        flow[l] = if b == v { excess[v] } else { -excess[v] };
        excess[u] += excess[v];
    }
    flow
}

/// One hour of synthetic operation: node needs plus chord flows.
struct Hour {
    need: Vec<f64>,
    chords: Vec<(usize, f64)>,
}

/// Integrates tank fill rates hour by hour. Tanks start at `initial`, or,
/// when it is `None`, at the lowest level that keeps 5% of capacity in
/// reserve over the whole day.
fn assemble(topology: &Topology, scenario: &str, source: usize, hours: &[Hour], initial: Option<&[f64]>) -> HydraulicProfile {
    let n = topology.nodes().len();
    let mut volume = vec![0.0; n];
    for (i, node) in topology.nodes().iter().enumerate() {
        let Some(geom) = node.tank else { continue };
        volume[i] = match initial {
            Some(v) => v[i],
            None => {
                let mut level = 0.0_f64;
                let mut lowest = 0.0_f64;
                for h in hours {
                    level += h.need[i] * HOUR;
                    lowest = lowest.min(level);
                }
                geom.min_volume + 0.05 * (geom.max_volume - geom.min_volume) - lowest
            }
        };
    }
    let mut snapshots = Vec::with_capacity(hours.len());
    for (k, h) in hours.iter().enumerate() {
        let flow = balance_flows(topology, source, &h.need, &h.chords);
        let demand: Vec<f64> = (0..n)
            .map(|i| if topology.node(i).kind == NodeKind::Junction { h.need[i] } else { 0.0 })
            .collect();
        snapshots.push(Snapshot::new(topology, k as f64 * HOUR, flow, demand, volume.clone()).expect("synthetic snapshot"));
        for (i, node) in topology.nodes().iter().enumerate() {
            if let Some(geom) = node.tank {
                volume[i] += h.need[i] * HOUR;
                assert!(
                    volume[i] >= geom.min_volume && volume[i] <= geom.max_volume,
                    "{scenario}: tank {} leaves its operating range",
                    node.id
                );
            }
        }
    }
    HydraulicProfile::new(scenario, HOUR, snapshots).expect("synthetic profile")
}

fn index(topology: &Topology, id: &str) -> usize {
    topology.node_index(id).unwrap_or_else(|| panic!("fixture node {id}"))
}

fn link(topology: &Topology, id: &str) -> usize {
    topology.link_index(id).unwrap_or_else(|| panic!("fixture link {id}"))
}

/// Hours 7 to 16 fill the tank through the pump; the rest of the day the
/// pump is off and the tank alone feeds J1 back through P1.
pub fn three_node() -> Fixture {
    let topology = parse_inp(THREE_NODE_INP).expect("bundled three-node network").topology;
    let (j1, tk1, r1) = (index(&topology, "J1"), index(&topology, "TK1"), index(&topology, "R1"));
    let hours: Vec<Hour> = (0..24)
        .map(|h| {
            let mut need = vec![0.0; 3];
            if (7..17).contains(&h) {
                need[j1] = 0.03;
                need[tk1] = 0.07;
            } else {
                need[j1] = 0.04;
                need[tk1] = -0.04;
            }
            Hour { need, chords: Vec::new() }
        })
        .collect();
    let mut initial = vec![0.0; 3];
    initial[tk1] = 1600.0;
    let profile = assemble(&topology, "three_node", r1, &hours, Some(&initial));
    Fixture { name: "three_node".into(), topology, profiles: vec![profile], wq_step: 60.0, pool: None }
}

pub const NET1_CASES: usize = 4;

const DIURNAL: [f64; 24] = [
    0.6, 0.5, 0.5, 0.5, 0.6, 0.8, 1.1, 1.4, 1.5, 1.3, 1.1, 1.0, 1.0, 1.0, 0.9, 0.9, 1.0, 1.2, 1.4, 1.5, 1.3, 1.0, 0.8, 0.7,
];
const FLAT: [f64; 24] = [
    0.9, 0.85, 0.8, 0.8, 0.85, 0.9, 1.0, 1.1, 1.15, 1.2, 1.15, 1.1, 1.05, 1.05, 1.0, 1.0, 1.05, 1.1, 1.2, 1.15, 1.1, 1.0,
    0.95, 0.9,
];

struct Net1Case {
    scale: f64,
    pattern: [f64; 24],
    /// L/s for J1..J9.
    base: [f64; 9],
    /// Hours with the pump running.
    pump_on: &'static [std::ops::Range<usize>],
    /// Shares of total demand carried by P9, P10 and P12.
    chords: [f64; 3],
}

fn net1_case(case: usize) -> Net1Case {
    const BASE_A: [f64; 9] = [0.0, 6.0, 6.0, 4.0, 6.0, 8.0, 4.0, 5.0, 4.0];
    const BASE_B: [f64; 9] = [0.0, 4.0, 8.0, 5.0, 4.0, 6.0, 6.0, 4.0, 6.0];
    let mut night = DIURNAL;
    night.reverse();
    let mut step = [0.7; 24];
    step[12..].fill(1.3);
    match case {
        1 => Net1Case { scale: 1.0, pattern: DIURNAL, base: BASE_A, pump_on: &[0..9, 12..18], chords: [0.10, 0.05, 0.04] },
        2 => Net1Case { scale: 1.3, pattern: FLAT, base: BASE_A, pump_on: &[0..6, 10..16, 20..24], chords: [-0.10, 0.05, -0.04] },
        3 => Net1Case { scale: 0.8, pattern: night, base: BASE_A, pump_on: &[3..11, 14..22], chords: [0.12, -0.04, 0.06] },
        4 => Net1Case { scale: 1.0, pattern: step, base: BASE_B, pump_on: &[6..21], chords: [-0.06, -0.05, 0.15] },
        _ => panic!("net1-like cases are 1 to {NET1_CASES}"),
    }
}

/// The looped network in one of four demand scenarios. When the pump runs
/// it delivers 1.6 times the demand and the surplus fills TK1; otherwise
/// TK1 supplies everything.
pub fn net1_like(case: usize) -> Fixture {
    let spec = net1_case(case);
    let topology = parse_inp(NET1_LIKE_INP).expect("bundled net1-like network").topology;
    let source = index(&topology, "R1");
    let tank = index(&topology, "TK1");
    let junctions: Vec<usize> = (1..=9).map(|j| index(&topology, &format!("J{j}"))).collect();
    let chords = [link(&topology, "P9"), link(&topology, "P10"), link(&topology, "P12")];
    let hours: Vec<Hour> = (0..24)
        .map(|h| {
            let mut need = vec![0.0; topology.nodes().len()];
            let mut total = 0.0;
            for (j, &node) in junctions.iter().enumerate() {
                need[node] = spec.base[j] * 1e-3 * spec.scale * spec.pattern[h];
                total += need[node];
            }
            let pumping = spec.pump_on.iter().any(|r| r.contains(&h));
            need[tank] = if pumping { 0.6 * total } else { -total };
            let chords = chords.iter().zip(spec.chords).map(|(&l, share)| (l, share * total)).collect();
            Hour { need, chords }
        })
        .collect();
    let name = format!("net1_like_case{case}");
    let profile = assemble(&topology, &name, source, &hours, None);
    Fixture { name: "net1_like".into(), topology, profiles: vec![profile], wq_step: 15.0, pool: None }
}

/// All four scenarios of the looped network.
pub fn net1_like_all() -> Fixture {
    let mut fixture = net1_like(1);
    for case in 2..=NET1_CASES {
        fixture.profiles.extend(net1_like(case).profiles);
    }
    fixture
}

pub const GRID_ROWS: usize = 5;
pub const GRID_COLS: usize = 6;
const GRID_WQ_STEP: f64 = 30.0;
const GRID_SEGMENTS: f64 = 20.0;

/// A 5 × 6 grid of junctions fed by a pumped reservoir at one corner.
/// Pipes are sized for about 0.8 m/s and about 20 segments at mean demand,
/// which gives roughly a thousand states.
pub fn grid() -> Fixture {
    let name = |r: usize, c: usize| format!("J{r}{c}");
    let mut nodes = vec![Node::reservoir("R1", 50.0)];
    for r in 1..=GRID_ROWS {
        for c in 1..=GRID_COLS {
            nodes.push(Node::junction(name(r, c), 0.0));
        }
    }
    // Tree: every row plus the first column. Chords: the other columns.
    let mut ends: Vec<(String, String, String, bool)> = Vec::new();
    for r in 1..=GRID_ROWS {
        for c in 1..GRID_COLS {
            ends.push((format!("H{r}{c}"), name(r, c), name(r, c + 1), false));
        }
    }
    for r in 1..GRID_ROWS {
        for c in 1..=GRID_COLS {
            ends.push((format!("V{r}{c}"), name(r, c), name(r + 1, c), c > 1));
        }
    }
    let mut links = vec![Link::pump("PU1", "R1", name(1, 1))];
    for (id, from, to, _) in &ends {
        links.push(Link::pipe(id.as_str(), from.as_str(), to.as_str(), PipeProperties::new(1.0, 0.1)));
    }
    let sketch = Topology::new(nodes.clone(), links.clone(), 0.0).expect("grid sketch");

    let base = |r: usize, c: usize| (0.5 + ((7 * r + 3 * c) % 5) as f64 * 0.25) * 1e-3;
    let hour = |topology: &Topology, factor: f64| -> Hour {
        let mut need = vec![0.0; topology.nodes().len()];
        let mut total = 0.0;
        for r in 1..=GRID_ROWS {
            for c in 1..=GRID_COLS {
                let d = base(r, c) * factor;
                need[index(topology, &name(r, c))] = d;
                total += d;
            }
        }
        let chords = ends
            .iter()
            .filter(|e| e.3)
            .enumerate()
            .map(|(k, e)| (link(topology, &e.0), if k % 2 == 0 { 0.02 } else { -0.02 } * total))
            .collect();
        Hour { need, chords }
    };

    // Size every pipe from its mean flow.
    let mean = hour(&sketch, 1.0);
    let q = balance_flows(&sketch, 0, &mean.need, &mean.chords);
    for (l, link) in links.iter_mut().enumerate() {
        let Some(props) = link.pipe.as_mut() else { continue };
        let diameter_mm = ((4.0 * q[l].abs() / (std::f64::consts::PI * 0.8)).sqrt() * 1e3 / 10.0).ceil().max(5.0) * 10.0;
        let radius = diameter_mm / 2e3;
        let velocity = q[l].abs() / (std::f64::consts::PI * radius * radius);
        props.radius = radius;
        props.length = (GRID_SEGMENTS * velocity * GRID_WQ_STEP / 10.0).round().max(1.0) * 10.0;
    }
    let topology = Topology::new(nodes, links, 0.5 / 86_400.0).expect("grid network");
    let hours: Vec<Hour> = FLAT.iter().map(|&f| hour(&topology, f)).collect();
    let profile = assemble(&topology, "grid_s1", 0, &hours, None);
    let pool = topology.nodes().iter().filter(|n| n.kind == NodeKind::Junction).map(|n| n.id.clone()).collect();
    Fixture { name: "grid".into(), topology, profiles: vec![profile], wq_step: GRID_WQ_STEP, pool: Some(pool) }
}

/// The three shipped bundles.
pub fn all() -> Vec<Fixture> {
    vec![three_node(), net1_like_all(), grid()]
}

/// Run manifest shipped with a fixture.
pub fn run_config(f: &Fixture) -> RunConfig {
    let mut config: RunConfig = serde_json::from_value(serde_json::json!({
        "topology": format!("{}.inp", f.name),
        "scenarios": [],
        "output": format!("out/{}", f.name),
        "wq_step": f.wq_step,
        "hydraulic_step": HOUR,
        "stations": 1,
    }))
    .expect("manifest skeleton");
    config.scenarios = f
        .profiles
        .iter()
        .map(|p| ScenarioFile { id: p.scenario_id().into(), hydraulics: format!("{}.csv", p.scenario_id()).into() })
        .collect();
    match f.name.as_str() {
        "net1_like" => {
            config.stations = 3;
            config.seeds = (1..=25).collect();
            config.backup = Some(BackupSpec {
                fixed: ["J3", "J5", "J6"].into_iter().map(NodeId::new).collect(),
                failed: NodeId::new("J5"),
                t_fail: 12.0 * HOUR,
                horizon: 12.0 * HOUR,
            });
        }
        "grid" => {
            config.stations = 5;
            config.metrics = vec![cbsp_core::controllability::MetricKind::Trace];
            config.pool.include = f.pool.clone().unwrap_or_default();
        }
        _ => {}
    }
    config
}

/// File name and contents of everything shipped for a fixture: the INP
/// network, one hydraulics CSV per scenario and the run manifest.
pub fn bundle_files(f: &Fixture) -> Vec<(String, String)> {
    let inp = match f.name.as_str() {
        "three_node" => THREE_NODE_INP.to_string(),
        "net1_like" => NET1_LIKE_INP.to_string(),
        _ => write_inp(&f.topology),
    };
    let mut files = vec![(format!("{}.inp", f.name), inp)];
    for p in &f.profiles {
        let mut csv = Vec::new();
        let header = format!("# synthetic hydraulics for {}, flows in m3/s, volumes in m3\n", f.name);
        write_csv(&mut csv, &header, &profile_records(&f.topology, p)).expect("writing to memory");
        files.push((format!("{}.csv", p.scenario_id()), String::from_utf8(csv).expect("utf-8")));
    }
    let manifest = serde_json::to_string_pretty(&run_config(f)).expect("manifest serializes") + "\n";
    files.push((format!("{}.json", f.name), manifest));
    files
}
