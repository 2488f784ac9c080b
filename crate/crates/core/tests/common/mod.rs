#![allow(dead_code)]

use cbsp_core::hydraulics::{HydraulicProfile, Snapshot};
use cbsp_core::network::{Link, Node, NodeId, PipeProperties, Topology};

pub const HOUR: f64 = 3600.0;

/// Small tree network: reservoir R1 pumps into J1, junctions J2.. hang off
/// earlier junctions, and optionally a tank TK1 hangs off the last one.
/// `parents[i]` is the parent of junction i + 2 (an index into J1..); `flip`
/// reverses the declared direction of that pipe. `demand[k][j]` is the
/// demand of junction j + 1 in hour k; `fill[k]` is the tank's fill rate.
#[derive(Clone, Debug)]
pub struct Tree {
    pub parents: Vec<usize>,
    pub flip: Vec<bool>,
    pub lengths: Vec<f64>,
    pub radii: Vec<f64>,
    pub demand: Vec<Vec<f64>>,
    pub fill: Option<Vec<f64>>,
    pub bulk: f64,
}

impl Tree {
    pub fn build(&self) -> (Topology, HydraulicProfile) {
        let nj = self.parents.len() + 1;
        let mut nodes = vec![Node::reservoir("R1", 0.0)];
        nodes.extend((1..=nj).map(|j| Node::junction(format!("J{j}"), 0.0)));
        let mut links = vec![Link::pump("PU1", "R1", "J1")];
        // (parent, child) junction numbers per pipe.
        let ends: Vec<(usize, usize)> = self.parents.iter().enumerate().map(|(i, &p)| (p + 1, i + 2)).collect();
        let tank_parent = nj;
        if self.fill.is_some() {
            nodes.push(Node::tank("TK1", 0.0, 1.0, 1e5));
        }
        for (i, &(parent, child)) in ends.iter().enumerate() {
            let (a, b) = (format!("J{parent}"), format!("J{child}"));
            let (from, to) = if self.flip[i] { (b, a) } else { (a, b) };
            let props = PipeProperties::new(self.lengths[i], self.radii[i]);
            links.push(Link::pipe(format!("P{}", i + 1), NodeId::new(from), NodeId::new(to), props));
        }
        if self.fill.is_some() {
            links.push(Link::pipe("PT", NodeId::new(format!("J{tank_parent}")), "TK1", PipeProperties::new(300.0, 0.1)));
        }
        let topo = Topology::new(nodes, links, self.bulk).unwrap();

        let hours = self.demand.len();
        let mut volume = 5000.0;
        let mut snaps = Vec::new();
        for k in 0..hours {
            let fill = self.fill.as_ref().map_or(0.0, |f| f[k]);
            // Subtree totals, children after parents so walk backwards.
            let mut sub: Vec<f64> = self.demand[k].clone();
            if self.fill.is_some() {
                sub[tank_parent - 1] += fill;
            }
            for &(parent, child) in ends.iter().rev() {
                sub[parent - 1] += sub[child - 1];
            }
            let mut flow = vec![sub[0]];
            for (i, &(_, child)) in ends.iter().enumerate() {
                let q = sub[child - 1];
                flow.push(if self.flip[i] { -q } else { q });
            }
            if self.fill.is_some() {
                flow.push(fill);
            }
            let mut demand = vec![0.0];
            demand.extend(&self.demand[k]);
            let mut vol = vec![0.0; nj + 1];
            if self.fill.is_some() {
                demand.push(0.0);
                vol.push(volume);
            }
            snaps.push(Snapshot::new(&topo, k as f64 * HOUR, flow, demand, vol).unwrap());
            volume += fill * HOUR;
        }
        (topo, HydraulicProfile::new("tree", HOUR, snaps).unwrap())
    }
}

/// R1 → PU1 → J1 → P1 → J2 → P2 → J3 with demand only at J3.
pub fn chain(q: f64, hours: usize) -> (Topology, HydraulicProfile) {
    Tree {
        parents: vec![0, 1],
        flip: vec![false, false],
        lengths: vec![200.0, 300.0],
        radii: vec![0.1, 0.1],
        demand: vec![vec![0.0, 0.0, q]; hours],
        fill: None,
        bulk: 0.0,
    }
    .build()
}

/// Random trees with 2..=6 junctions, mixed pipe orientation, demands that
/// switch on and off, and an optional tank that fills or drains.
pub fn tree() -> impl proptest::strategy::Strategy<Value = Tree> {
    use proptest::prelude::*;
    (1usize..=5, 2usize..=4, any::<bool>(), 0.0f64..2e-5).prop_flat_map(|(extra, hours, tank, bulk)| {
        let parents: Vec<BoxedStrategy<usize>> = (0..extra).map(|i| (0..=i).boxed()).collect();
        (
            parents,
            proptest::collection::vec(any::<bool>(), extra),
            proptest::collection::vec(100.0f64..900.0, extra),
            proptest::collection::vec(0.05f64..0.2, extra),
            proptest::collection::vec(
                proptest::collection::vec(prop_oneof![Just(0.0), 1e-3f64..2e-2], extra + 1),
                hours,
            ),
            proptest::collection::vec(-5e-3f64..5e-3, hours).prop_map(move |f| tank.then_some(f)),
            Just(bulk),
        )
            .prop_map(|(parents, flip, lengths, radii, demand, fill, bulk)| Tree {
                parents,
                flip,
                lengths,
                radii,
                demand,
                fill,
                bulk,
            })
    })
}

/// Proptest settings without on-disk regression files.
pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config { cases: n, failure_persistence: None, ..Default::default() }
}
