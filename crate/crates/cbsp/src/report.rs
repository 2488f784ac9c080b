//! Output tables. Every table starts with a `#` comment block naming the
//! tool version, the config hash and the regularization values used.

use std::io::{self, Write};

use cbsp_core::placement::{BackupReport, ComparisonRow, PlacementTimeline};
use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 12 significant digits in scientific notation.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        // Avoid "-0.00000000000e0".
        return format!("{:.11e}", 0.0);
    }
    format!("{x:.11e}")
}

pub struct Header<'a> {
    pub config_hash: &'a str,
    pub epsilon: Vec<(String, Option<f64>)>,
}

impl Header<'_> {
    pub fn write<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "# cbsp {VERSION}")?;
        writeln!(w, "# config sha256 {}", self.config_hash)?;
        if self.epsilon.iter().all(|(_, e)| e.is_none()) {
            writeln!(w, "# epsilon none")?;
        }
        for (label, eps) in &self.epsilon {
            if let Some(e) = eps {
                writeln!(w, "# epsilon {label} {}", fmt_float(*e))?;
            }
        }
        Ok(())
    }
}

/// ε per (scenario, step) of a set of timelines.
pub fn timeline_epsilons(timelines: &[&PlacementTimeline]) -> Vec<(String, Option<f64>)> {
    timelines
        .iter()
        .flat_map(|t| t.steps.iter().map(move |s| (format!("{} step {}", t.scenario, s.step), s.epsilon)))
        .collect()
}

/// One row per pick: `scenario,step,time_s,rank,node,gain,sc_prefix,dimsrs`.
pub fn write_timeline_csv<W: Write>(w: &mut W, header: &Header, timelines: &[&PlacementTimeline]) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "scenario,step,time_s,rank,node,gain,sc_prefix,dimsrs")?;
    for t in timelines {
        for s in &t.steps {
            for (rank, p) in s.picks.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    t.scenario,
                    s.step,
                    fmt_float(s.time),
                    rank + 1,
                    p.node,
                    fmt_float(p.gain),
                    u8::from(p.sc),
                    s.dimsrs
                )?;
            }
        }
    }
    Ok(())
}

/// `step,strategy,seed,metric,value,relative_pct`; the seed is empty for
/// the greedy and uniform rows. With several scenarios a leading
/// `scenario` column is added.
pub fn write_comparison_csv<W: Write>(w: &mut W, header: &Header, rows: &[(String, Vec<ComparisonRow>)]) -> io::Result<()> {
    header.write(w)?;
    let multi = rows.len() > 1;
    if multi {
        write!(w, "scenario,")?;
    }
    writeln!(w, "step,strategy,seed,metric,value,relative_pct")?;
    for (scenario, rows) in rows {
        for r in rows {
            if multi {
                write!(w, "{scenario},")?;
            }
            let seed = r.seed.map(|s| s.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.step,
                r.strategy.name(),
                seed,
                r.metric,
                fmt_float(r.value),
                fmt_float(r.relative_pct)
            )?;
        }
    }
    Ok(())
}

/// `step,time_s,node,gain` followed by the overall replacement.
pub fn write_backup_csv<W: Write>(w: &mut W, header: &Header, report: &BackupReport) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "# failed {}", report.failed)?;
    if let Some(r) = &report.replacement {
        writeln!(w, "# replacement {r}")?;
    }
    writeln!(w, "step,time_s,node,gain")?;
    for s in &report.steps {
        writeln!(w, "{},{},{},{}", s.step, fmt_float(s.time), s.node, fmt_float(s.gain))?;
    }
    Ok(())
}

/// JSON document with the header fields carried as a `meta` object.
#[derive(Serialize)]
pub struct Document<'a, T: Serialize> {
    pub meta: Meta<'a>,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Serialize)]
pub struct Meta<'a> {
    pub version: &'a str,
    pub config_sha256: &'a str,
}

pub fn write_json<W: Write, T: Serialize>(w: &mut W, config_hash: &str, body: T) -> io::Result<()> {
    let doc = Document { meta: Meta { version: VERSION, config_sha256: config_hash }, body };
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_float(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt_float(-0.0), "0.00000000000e0");
        assert_eq!(fmt_float(3600.0), "3.60000000000e3");
    }

    #[test]
    fn header_lists_epsilons() {
        let h = Header { config_hash: "abc", epsilon: vec![("s step 0".into(), Some(0.5)), ("s step 1".into(), None)] };
        let mut out = Vec::new();
        h.write(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("# config sha256 abc\n"));
        assert!(text.contains("# epsilon s step 0 5.00000000000e-1\n"));
        assert!(!text.contains("step 1"));
    }
}
