//! Hydraulic record tables: CSV `time_s,element,kind,value` or a JSON array
//! of the same records.

use std::io::{Read, Write};
use std::path::Path;

use cbsp_core::hydraulics::{HydraulicProfile, HydraulicRecord, QuantityKind};
use cbsp_core::network::{LinkKind, NodeKind, Topology};

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<HydraulicRecord>, RecordError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn read_json<R: Read>(reader: R) -> Result<Vec<HydraulicRecord>, RecordError> {
    Ok(serde_json::from_reader(reader)?)
}

/// Picks the reader by file extension (`.json`, anything else is CSV).
pub fn read_path(path: &Path) -> Result<Vec<HydraulicRecord>, RecordError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => read_json(reader),
        _ => read_csv(reader),
    }
}

/// Flat records for a profile: pipe and pump/valve flows, junction
/// demands and tank volumes at every snapshot.
pub fn profile_records(topology: &Topology, profile: &HydraulicProfile) -> Vec<HydraulicRecord> {
    let mut out = Vec::new();
    for snap in profile.snapshots() {
        let t = snap.time();
        for (l, link) in topology.links().iter().enumerate() {
            if link.kind != LinkKind::Pipe && snap.flow(l) == 0.0 {
                continue;
            }
            out.push(HydraulicRecord { time_s: t, element: link.id.to_string(), kind: QuantityKind::Flow, value: snap.flow(l) });
        }
        for (i, node) in topology.nodes().iter().enumerate() {
            let (kind, value) = match node.kind {
                NodeKind::Junction => (QuantityKind::Demand, snap.demand(i)),
                NodeKind::Tank => (QuantityKind::Volume, snap.volume(i)),
                NodeKind::Reservoir => continue,
            };
            out.push(HydraulicRecord { time_s: t, element: node.id.to_string(), kind, value });
        }
    }
    out
}

/// CSV with an optional leading `#` comment block. Values are written with
/// the shortest representation that reads back bit-for-bit.
pub fn write_csv<W: Write>(mut w: W, header: &str, records: &[HydraulicRecord]) -> std::io::Result<()> {
    w.write_all(header.as_bytes())?;
    writeln!(w, "time_s,element,kind,value")?;
    for r in records {
        writeln!(w, "{:?},{},{},{:?}", r.time_s, r.element, r.kind, r.value)?;
    }
    Ok(())
}
