//! Water network graph: junctions, reservoirs and tanks joined by pipes,
//! pumps and valves. All physical quantities are SI (m, m³, s).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

macro_rules! name_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(name: impl Into<String>) -> Self {
                Self(name.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.into())
            }
        }

        impl core::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

name_type!(
    /// Name of a junction, reservoir or tank as written in the input file.
    NodeId
);
name_type!(
    /// Name of a pipe, pump or valve as written in the input file.
    LinkId
);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Junction,
    Reservoir,
    Tank,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TankGeometry {
    pub min_volume: f64,
    pub max_volume: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub elevation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tank: Option<TankGeometry>,
}

impl Node {
    pub fn junction(id: impl Into<NodeId>, elevation: f64) -> Self {
        Self { id: id.into(), kind: NodeKind::Junction, elevation, tank: None }
    }

    pub fn reservoir(id: impl Into<NodeId>, elevation: f64) -> Self {
        Self { id: id.into(), kind: NodeKind::Reservoir, elevation, tank: None }
    }

    pub fn tank(id: impl Into<NodeId>, elevation: f64, min_volume: f64, max_volume: f64) -> Self {
        Self {
            id: id.into(),
            kind: NodeKind::Tank,
            elevation,
            tank: Some(TankGeometry { min_volume, max_volume }),
        }
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

impl From<String> for LinkId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Pipe,
    Pump,
    Valve,
}

/// Geometry and reaction constants carried only by pipes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipeProperties {
    /// m
    pub length: f64,
    /// m
    pub radius: f64,
    /// Wall reaction rate constant k_w (m/s).
    #[serde(default)]
    pub wall_coefficient: f64,
    /// Bulk-to-wall mass transfer coefficient k_f (m/s).
    #[serde(default)]
    pub mass_transfer: f64,
}

impl PipeProperties {
    pub fn new(length: f64, radius: f64) -> Self {
        Self { length, radius, wall_coefficient: 0.0, mass_transfer: 0.0 }
    }

    pub fn area(&self) -> f64 {
        core::f64::consts::PI * self.radius * self.radius
    }

    /// First-order decay rate `k_b + 2 k_w k_f / (r (k_w + k_f))` in 1/s.
    pub fn decay_rate(&self, bulk_rate: f64) -> f64 {
        let kw = self.wall_coefficient;
        let kf = self.mass_transfer;
        let wall = if kw + kf > 0.0 { 2.0 * kw * kf / (self.radius * (kw + kf)) } else { 0.0 };
        bulk_rate + wall
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub kind: LinkKind,
    pub from: NodeId,
    pub to: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipe: Option<PipeProperties>,
}

impl Link {
    pub fn pipe(
        id: impl Into<LinkId>,
        from: impl Into<NodeId>,
        to: impl Into<NodeId>,
        properties: PipeProperties,
    ) -> Self {
        Self { id: id.into(), kind: LinkKind::Pipe, from: from.into(), to: to.into(), pipe: Some(properties) }
    }

    pub fn pump(id: impl Into<LinkId>, from: impl Into<NodeId>, to: impl Into<NodeId>) -> Self {
        Self { id: id.into(), kind: LinkKind::Pump, from: from.into(), to: to.into(), pipe: None }
    }

    pub fn valve(id: impl Into<LinkId>, from: impl Into<NodeId>, to: impl Into<NodeId>) -> Self {
        Self { id: id.into(), kind: LinkKind::Valve, from: from.into(), to: to.into(), pipe: None }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),
    #[error("duplicate link id `{0}`")]
    DuplicateLink(LinkId),
    #[error("link `{link}` references unknown node `{node}`")]
    UnknownNode { link: LinkId, node: NodeId },
    #[error("pipe `{link}`: {reason}")]
    InvalidPipe { link: LinkId, reason: &'static str },
    #[error("link `{0}` is not a pipe but carries pipe properties")]
    UnexpectedPipeProperties(LinkId),
    #[error("tank `{node}`: {reason}")]
    InvalidTank { node: NodeId, reason: &'static str },
    #[error("bulk reaction rate must be finite and non-negative, got {0}")]
    InvalidBulkRate(f64),
}

/// Per-kind component counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySummary {
    pub junctions: usize,
    pub reservoirs: usize,
    pub tanks: usize,
    pub pipes: usize,
    pub pumps: usize,
    pub valves: usize,
}

impl TopologySummary {
    pub fn nodes(&self) -> usize {
        self.junctions + self.reservoirs + self.tanks
    }

    pub fn links(&self) -> usize {
        self.pipes + self.pumps + self.valves
    }
}

#[derive(Serialize, Deserialize)]
struct TopologyData {
    bulk_rate: f64,
    nodes: Vec<Node>,
    links: Vec<Link>,
}

/// Validated, immutable network graph with resolved endpoints and an
/// incoming/outgoing link index per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyData", into = "TopologyData")]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    /// k_b in 1/s.
    bulk_rate: f64,
    node_lookup: BTreeMap<NodeId, usize>,
    link_lookup: BTreeMap<LinkId, usize>,
    endpoints: Vec<(usize, usize)>,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
}

impl TryFrom<TopologyData> for Topology {
    type Error = NetworkError;

    fn try_from(data: TopologyData) -> Result<Self, Self::Error> {
        Topology::new(data.nodes, data.links, data.bulk_rate)
    }
}

impl From<Topology> for TopologyData {
    fn from(t: Topology) -> Self {
        TopologyData { bulk_rate: t.bulk_rate, nodes: t.nodes, links: t.links }
    }
}

impl Topology {
    pub fn new(nodes: Vec<Node>, links: Vec<Link>, bulk_rate: f64) -> Result<Self, NetworkError> {
        if !bulk_rate.is_finite() || bulk_rate < 0.0 {
            return Err(NetworkError::InvalidBulkRate(bulk_rate));
        }
        let mut node_lookup = BTreeMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if node_lookup.insert(node.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateNode(node.id.clone()));
            }
            match (node.kind, &node.tank) {
                (NodeKind::Tank, Some(g)) => {
                    if !(g.min_volume >= 0.0 && g.max_volume > 0.0 && g.min_volume <= g.max_volume) {
                        return Err(NetworkError::InvalidTank {
                            node: node.id.clone(),
                            reason: "volume bounds must satisfy 0 <= min <= max, max > 0",
                        });
                    }
                }
                (NodeKind::Tank, None) => {
                    return Err(NetworkError::InvalidTank { node: node.id.clone(), reason: "missing geometry" })
                }
                (_, Some(_)) => {
                    return Err(NetworkError::InvalidTank {
                        node: node.id.clone(),
                        reason: "tank geometry on a non-tank node",
                    })
                }
                (_, None) => {}
            }
        }

        let mut link_lookup = BTreeMap::new();
        let mut endpoints = Vec::with_capacity(links.len());
        let mut incoming = vec![Vec::new(); nodes.len()];
        let mut outgoing = vec![Vec::new(); nodes.len()];
        for (i, link) in links.iter().enumerate() {
            if link_lookup.insert(link.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateLink(link.id.clone()));
            }
            let resolve = |node: &NodeId| {
                node_lookup
                    .get(node)
                    .copied()
                    .ok_or_else(|| NetworkError::UnknownNode { link: link.id.clone(), node: node.clone() })
            };
            let from = resolve(&link.from)?;
            let to = resolve(&link.to)?;
            validate_link(link)?;
            endpoints.push((from, to));
            outgoing[from].push(i);
            incoming[to].push(i);
        }

        Ok(Self { nodes, links, bulk_rate, node_lookup, link_lookup, endpoints, incoming, outgoing })
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new(), 0.0).expect("empty topology is valid")
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, index: usize) -> &Node {
        &self.nodes[index]
    }

    pub fn link(&self, index: usize) -> &Link {
        &self.links[index]
    }

    pub fn bulk_rate(&self) -> f64 {
        self.bulk_rate
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_lookup.get(id).copied()
    }

    pub fn link_index(&self, id: &str) -> Option<usize> {
        self.link_lookup.get(id).copied()
    }

    /// `(from, to)` node indices of a link in its declared direction.
    pub fn endpoints(&self, link: usize) -> (usize, usize) {
        self.endpoints[link]
    }

    /// Links whose declared `to` end is `node`.
    pub fn incoming(&self, node: usize) -> &[usize] {
        &self.incoming[node]
    }

    /// Links whose declared `from` end is `node`.
    pub fn outgoing(&self, node: usize) -> &[usize] {
        &self.outgoing[node]
    }

    /// All links touching `node`, incoming first.
    pub fn incident(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.incoming[node].iter().chain(self.outgoing[node].iter()).copied()
    }

    pub fn summary(&self) -> TopologySummary {
        let mut s = TopologySummary::default();
        for node in &self.nodes {
            match node.kind {
                NodeKind::Junction => s.junctions += 1,
                NodeKind::Reservoir => s.reservoirs += 1,
                NodeKind::Tank => s.tanks += 1,
            }
        }
        for link in &self.links {
            match link.kind {
                LinkKind::Pipe => s.pipes += 1,
                LinkKind::Pump => s.pumps += 1,
                LinkKind::Valve => s.valves += 1,
            }
        }
        s
    }

    /// Number of weakly connected components (0 for an empty graph).
    pub fn component_count(&self) -> usize {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = n;
        for &(a, b) in &self.endpoints {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                components -= 1;
            }
        }
        components
    }

    pub fn is_weakly_connected(&self) -> bool {
        self.component_count() <= 1
    }
}

fn validate_link(link: &Link) -> Result<(), NetworkError> {
    match (link.kind, &link.pipe) {
        (LinkKind::Pipe, Some(p)) => {
            let bad = |reason| Err(NetworkError::InvalidPipe { link: link.id.clone(), reason });
            if !(p.length.is_finite() && p.length > 0.0) {
                return bad("length must be positive");
            }
            if !(p.radius.is_finite() && p.radius > 0.0) {
                return bad("diameter must be positive");
            }
            if !(p.wall_coefficient.is_finite() && p.wall_coefficient >= 0.0) {
                return bad("wall coefficient must be non-negative");
            }
            if !(p.mass_transfer.is_finite() && p.mass_transfer >= 0.0) {
                return bad("mass transfer coefficient must be non-negative");
            }
            Ok(())
        }
        (LinkKind::Pipe, None) => {
            Err(NetworkError::InvalidPipe { link: link.id.clone(), reason: "missing length and diameter" })
        }
        (_, Some(_)) => Err(NetworkError::UnexpectedPipeProperties(link.id.clone())),
        (_, None) => Ok(()),
    }
}
