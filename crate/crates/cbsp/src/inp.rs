//! Reader and writer for the subset of the EPANET INP format used here:
//! junctions, reservoirs, tanks, pipes, pumps, valves, the flow-units
//! option and first-order reaction coefficients.
//!
//! Reaction coefficients are written per day, negative for decay, as in
//! EPANET. Two extension keywords carry the bulk-to-wall mass-transfer
//! coefficient (length per day): `Global MassTransfer <k>` and
//! `MassTransfer <pipe> <k>`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use cbsp_core::network::{
    Link, LinkKind, NetworkError, Node, NodeKind, PipeProperties, TankGeometry, Topology,
};

const SECONDS_PER_DAY: f64 = 86_400.0;
const FT: f64 = 0.3048;
const INCH: f64 = 0.0254;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct InpError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, InpError> {
    Err(InpError { line, message: message.into() })
}

/// Parsed topology plus anything that was skipped.
#[derive(Clone, Debug)]
pub struct ParsedInp {
    pub topology: Topology,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitSystem {
    /// Feet, inches for pipe diameters.
    Us,
    /// Metres, millimetres for pipe diameters.
    Si,
}

impl UnitSystem {
    fn from_flow_units(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "CFS" | "GPM" | "MGD" | "IMGD" | "AFD" => Some(UnitSystem::Us),
            "LPS" | "LPM" | "MLD" | "CMH" | "CMD" => Some(UnitSystem::Si),
            _ => None,
        }
    }

    fn length(self) -> f64 {
        match self {
            UnitSystem::Us => FT,
            UnitSystem::Si => 1.0,
        }
    }

    fn diameter(self) -> f64 {
        match self {
            UnitSystem::Us => INCH,
            UnitSystem::Si => 1e-3,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Section {
    Junctions,
    Reservoirs,
    Tanks,
    Pipes,
    Pumps,
    Valves,
    Options,
    Reactions,
    End,
    Other,
}

fn section(name: &str) -> Section {
    match name.to_ascii_uppercase().as_str() {
        "JUNCTIONS" => Section::Junctions,
        "RESERVOIRS" => Section::Reservoirs,
        "TANKS" => Section::Tanks,
        "PIPES" => Section::Pipes,
        "PUMPS" => Section::Pumps,
        "VALVES" => Section::Valves,
        "OPTIONS" => Section::Options,
        "REACTIONS" => Section::Reactions,
        "END" => Section::End,
        _ => Section::Other,
    }
}

struct Line<'a> {
    number: usize,
    fields: Vec<&'a str>,
}

impl Line<'_> {
    fn need(&self, n: usize, what: &str) -> Result<(), InpError> {
        if self.fields.len() < n {
            return err(self.number, format!("{what} needs at least {n} fields, found {}", self.fields.len()));
        }
        Ok(())
    }

    fn number(&self, i: usize, what: &str) -> Result<f64, InpError> {
        let raw = self.fields[i];
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => err(self.number, format!("malformed {what} `{raw}`")),
        }
    }

    fn optional(&self, i: usize, what: &str) -> Result<f64, InpError> {
        if i < self.fields.len() {
            self.number(i, what)
        } else {
            Ok(0.0)
        }
    }
}

pub fn parse_inp(text: &str) -> Result<ParsedInp, InpError> {
    let mut warnings = Vec::new();
    let mut lines: Vec<(Section, Line)> = Vec::new();
    let mut current: Option<Section> = None;
    let mut skipped: BTreeMap<String, usize> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let content = raw.split(';').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return err(number, format!("malformed section header `{content}`"));
            };
            let s = section(name.trim());
            if s == Section::End {
                break;
            }
            if s == Section::Other {
                skipped.entry(name.trim().to_ascii_uppercase()).or_insert(number);
            }
            current = Some(s);
            continue;
        }
        match current {
            None => return err(number, "data before the first section header"),
            Some(Section::Other) => {}
            Some(s) => lines.push((s, Line { number, fields: content.split_whitespace().collect() })),
        }
    }
    for (name, line) in skipped {
        warnings.push(format!("line {line}: skipped unsupported section [{name}]"));
    }

    let mut units = UnitSystem::Us;
    for (s, line) in &lines {
        if *s == Section::Options && line.fields[0].eq_ignore_ascii_case("UNITS") {
            line.need(2, "Units option")?;
            units = UnitSystem::from_flow_units(line.fields[1])
                .ok_or_else(|| InpError { line: line.number, message: format!("unknown flow units `{}`", line.fields[1]) })?;
        }
    }
    let len = units.length();
    let vol = len * len * len;

    let mut nodes: Vec<Node> = Vec::new();
    let mut node_line: HashMap<String, usize> = HashMap::new();
    let mut links: Vec<Link> = Vec::new();
    let mut link_line: HashMap<String, usize> = HashMap::new();
    let mut add_node = |node: Node, line: usize| -> Result<(), InpError> {
        if let Some(prev) = node_line.insert(node.id.as_str().to_string(), line) {
            return err(line, format!("duplicate node id `{}` (first declared on line {prev})", node.id));
        }
        nodes.push(node);
        Ok(())
    };

    for (s, line) in &lines {
        let id = line.fields[0];
        match s {
            Section::Junctions => {
                line.need(2, "junction")?;
                add_node(Node::junction(id, line.number(1, "elevation")? * len), line.number)?;
            }
            Section::Reservoirs => {
                line.need(2, "reservoir")?;
                add_node(Node::reservoir(id, line.number(1, "head")? * len), line.number)?;
            }
            Section::Tanks => {
                line.need(6, "tank")?;
                let elevation = line.number(1, "elevation")? * len;
                let min_level = line.number(3, "minimum level")?;
                let max_level = line.number(4, "maximum level")?;
                let diameter = line.number(5, "tank diameter")?;
                let min_vol = line.optional(6, "minimum volume")?;
                if diameter <= 0.0 || max_level < min_level || min_level < 0.0 {
                    return err(line.number, format!("tank `{id}` has invalid geometry"));
                }
                let area = std::f64::consts::PI * diameter * diameter / 4.0;
                let vmin = if min_vol > 0.0 { min_vol } else { area * min_level };
                let vmax = vmin + area * (max_level - min_level);
                if vmax <= 0.0 {
                    return err(line.number, format!("tank `{id}` has zero capacity"));
                }
                add_node(Node::tank(id, elevation, vmin * vol, vmax * vol), line.number)?;
            }
            _ => {}
        }
    }

    let mut bulk_per_day = 0.0;
    let mut global_wall = 0.0;
    let mut global_transfer = 0.0;
    let mut wall: HashMap<String, (f64, usize)> = HashMap::new();
    let mut transfer: HashMap<String, (f64, usize)> = HashMap::new();
    for (s, line) in &lines {
        if *s != Section::Reactions {
            continue;
        }
        let key = line.fields[0].to_ascii_uppercase();
        match key.as_str() {
            "GLOBAL" => {
                line.need(3, "global reaction")?;
                let v = line.number(2, "reaction coefficient")?;
                match line.fields[1].to_ascii_uppercase().as_str() {
                    "BULK" => bulk_per_day = v,
                    "WALL" => global_wall = v,
                    "MASSTRANSFER" => global_transfer = v,
                    other => warnings.push(format!("line {}: ignored global reaction `{other}`", line.number)),
                }
            }
            "WALL" | "MASSTRANSFER" => {
                line.need(3, "pipe reaction")?;
                let v = line.number(2, "reaction coefficient")?;
                let map = if key == "WALL" { &mut wall } else { &mut transfer };
                map.insert(line.fields[1].to_string(), (v, line.number));
            }
            _ => warnings.push(format!("line {}: ignored reaction option `{}`", line.number, line.fields[0])),
        }
    }
    if bulk_per_day > 0.0 {
        warnings.push("bulk growth is not modelled; treating the bulk coefficient as decay".into());
    }
    let bulk_rate = bulk_per_day.abs() / SECONDS_PER_DAY;

    for (s, line) in &lines {
        let id = line.fields[0];
        let kind = match s {
            Section::Pipes => LinkKind::Pipe,
            Section::Pumps => LinkKind::Pump,
            Section::Valves => LinkKind::Valve,
            _ => continue,
        };
        line.need(3, "link")?;
        for end in &line.fields[1..3] {
            if !node_line.contains_key(*end) {
                return err(line.number, format!("link `{id}` references unknown node `{end}`"));
            }
        }
        if let Some(prev) = link_line.insert(id.to_string(), line.number) {
            return err(line.number, format!("duplicate link id `{id}` (first declared on line {prev})"));
        }
        let (from, to) = (line.fields[1], line.fields[2]);
        let link = match kind {
            LinkKind::Pipe => {
                line.need(5, "pipe")?;
                let length = line.number(3, "pipe length")?;
                let diameter = line.number(4, "pipe diameter")?;
                if length <= 0.0 {
                    return err(line.number, format!("pipe `{id}` has non-positive length {length}"));
                }
                if diameter <= 0.0 {
                    return err(line.number, format!("pipe `{id}` has non-positive diameter {diameter}"));
                }
                let mut props = PipeProperties::new(length * len, diameter * units.diameter() / 2.0);
                let kw = wall.get(id).map_or(global_wall, |w| w.0);
                let kf = transfer.get(id).map_or(global_transfer, |t| t.0);
                props.wall_coefficient = kw.abs() * len / SECONDS_PER_DAY;
                if kf < 0.0 {
                    return err(line.number, format!("pipe `{id}` has negative mass-transfer coefficient"));
                }
                props.mass_transfer = kf * len / SECONDS_PER_DAY;
                Link::pipe(id, from, to, props)
            }
            LinkKind::Pump => Link::pump(id, from, to),
            LinkKind::Valve => Link::valve(id, from, to),
        };
        links.push(link);
    }
    for (pipe, (_, line)) in wall.iter().chain(transfer.iter()) {
        let is_pipe = links.iter().any(|l| l.id.as_str() == pipe && l.kind == LinkKind::Pipe);
        if !is_pipe {
            return err(*line, format!("reaction coefficient for unknown pipe `{pipe}`"));
        }
    }

    let topology = Topology::new(nodes, links, bulk_rate).map_err(|e| {
        let line = match &e {
            NetworkError::DuplicateNode(id) | NetworkError::InvalidTank { node: id, .. } => node_line.get(id.as_str()),
            NetworkError::DuplicateLink(id)
            | NetworkError::UnknownNode { link: id, .. }
            | NetworkError::InvalidPipe { link: id, .. }
            | NetworkError::UnexpectedPipeProperties(id) => link_line.get(id.as_str()),
            _ => None,
        };
        InpError { line: line.copied().unwrap_or(0), message: e.to_string() }
    })?;
    if !topology.is_weakly_connected() {
        warnings.push(format!("network has {} disconnected components", topology.component_count()));
    }
    Ok(ParsedInp { topology, warnings })
}

/// Writes SI units (CMH, metres, millimetre diameters). Tanks are written
/// with a unit-area diameter so levels equal volumes.
pub fn write_inp(topology: &Topology) -> String {
    let mut out = String::new();
    let _ = write_sections(topology, &mut out);
    out
}

fn write_sections(t: &Topology, out: &mut String) -> fmt::Result {
    let unit_area_diameter = 2.0 / std::f64::consts::PI.sqrt();
    writeln!(out, "[JUNCTIONS]")?;
    for n in t.nodes().iter().filter(|n| n.kind == NodeKind::Junction) {
        writeln!(out, "{} {:?}", n.id, n.elevation)?;
    }
    writeln!(out, "\n[RESERVOIRS]")?;
    for n in t.nodes().iter().filter(|n| n.kind == NodeKind::Reservoir) {
        writeln!(out, "{} {:?}", n.id, n.elevation)?;
    }
    writeln!(out, "\n[TANKS]")?;
    for n in t.nodes().iter().filter(|n| n.kind == NodeKind::Tank) {
        let g: TankGeometry = n.tank.expect("tank geometry");
        let span = g.max_volume - g.min_volume;
        writeln!(out, "{} {:?} 0 0 {:?} {:?} {:?}", n.id, n.elevation, span, unit_area_diameter, g.min_volume)?;
    }
    writeln!(out, "\n[PIPES]")?;
    for l in t.links().iter().filter(|l| l.kind == LinkKind::Pipe) {
        let p = l.pipe.expect("pipe properties");
        writeln!(out, "{} {} {} {:?} {:?} 100 0 Open", l.id, l.from, l.to, p.length, p.radius * 2000.0)?;
    }
    writeln!(out, "\n[PUMPS]")?;
    for l in t.links().iter().filter(|l| l.kind == LinkKind::Pump) {
        writeln!(out, "{} {} {} POWER 1", l.id, l.from, l.to)?;
    }
    writeln!(out, "\n[VALVES]")?;
    for l in t.links().iter().filter(|l| l.kind == LinkKind::Valve) {
        writeln!(out, "{} {} {} 300 TCV 0 0", l.id, l.from, l.to)?;
    }
    writeln!(out, "\n[REACTIONS]")?;
    writeln!(out, "Global Bulk {:?}", -t.bulk_rate() * SECONDS_PER_DAY)?;
    for l in t.links().iter().filter(|l| l.kind == LinkKind::Pipe) {
        let p = l.pipe.expect("pipe properties");
        if p.wall_coefficient != 0.0 {
            writeln!(out, "Wall {} {:?}", l.id, -p.wall_coefficient * SECONDS_PER_DAY)?;
        }
        if p.mass_transfer != 0.0 {
            writeln!(out, "MassTransfer {} {:?}", l.id, p.mass_transfer * SECONDS_PER_DAY)?;
        }
    }
    writeln!(out, "\n[OPTIONS]\nUnits CMH\n\n[END]")
}
