//! File formats at the tool boundary.
//!
//! CSV layouts (headers are part of the contract):
//!
//! - trajectory: `t,machine_id,delta_deg,domega_pu,pm_pu,pe_pu`
//! - measurement stream: `t,machine_id,delta_deg,freq_hz,pm_pu,pe_pu`
//! - derived stream: `t,machine_id,delta_deg,domega_pu,dp_pu`
//! - group assignment: `t,generator_id,group`
//! - equivalent: `t,mode_id,delta_eq_deg,domega_eq_pu,m_eq,dp_eq_pu`
//! - detection: `t,mode_id,c,tau,mu,gated,verdict`
//! - benchmark: `n,p,t_direct_ms,t_twolayer_ms,speedup,msgs_direct,msgs_twolayer`
//!
//! Angles cross this boundary in degrees; everything internal is radians.
//! Unavailable values are written as empty cells, mode ids as 16-digit
//! lowercase hex. Floats use the shortest round-trip decimal form.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::BenchRow;
use crate::detector::Verdict;
use crate::error::{Result, SwingError};
use crate::pmu::{DerivedStream, PmuStream};
use crate::scheme::{FleetMachine, FrameOutput, RunReport};
use crate::simulator::Trajectory;
use crate::util::{deg_to_rad, rad_to_deg};

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn mode_hex(id: u64) -> String {
    format!("{id:016x}")
}

pub fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Stable => "stable",
        Verdict::Unstable => "unstable",
        Verdict::Indeterminate => "indeterminate",
    }
}

pub fn write_trajectory_csv<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "machine_id", "delta_deg", "domega_pu", "pm_pu", "pe_pu"])?;
    for k in 0..traj.len() {
        for (i, id) in traj.machine_ids.iter().enumerate() {
            out.write_record([
                fmt(traj.t[k]),
                id.clone(),
                fmt(rad_to_deg(traj.delta[i][k])),
                fmt(traj.domega[i][k]),
                fmt(traj.pm[i][k]),
                fmt(traj.pe[i][k]),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_pmu_csv<W: Write>(w: W, stream: &PmuStream) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "machine_id", "delta_deg", "freq_hz", "pm_pu", "pe_pu"])?;
    for k in 0..stream.t.len() {
        for (i, id) in stream.machine_ids.iter().enumerate() {
            out.write_record([
                fmt(stream.t[k]),
                id.clone(),
                fmt(rad_to_deg(stream.delta[i][k])),
                fmt(stream.f_hz[i][k]),
                fmt(stream.pm[i][k]),
                fmt(stream.pe[i][k]),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_derived_csv<W: Write>(w: W, stream: &DerivedStream) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "machine_id", "delta_deg", "domega_pu", "dp_pu"])?;
    for k in 0..stream.t.len() {
        for (i, id) in stream.machine_ids.iter().enumerate() {
            out.write_record([
                fmt(stream.t[k]),
                id.clone(),
                fmt(rad_to_deg(stream.delta[i][k])),
                fmt(stream.domega[i][k]),
                fmt(stream.dp[i][k]),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

struct LongTable {
    ids: Vec<String>,
    t: Vec<f64>,
    cols: Vec<Vec<Vec<f64>>>, // [value column][machine][frame]
}

/// Parse a frame-major long table (`t,machine_id,<values...>`) back into
/// per-machine series. Every machine must appear in every frame.
fn read_long_table<R: Read>(r: R, value_cols: &[&str]) -> Result<LongTable> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    let pos = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SwingError::InvalidInput(format!("missing column {name}")))
    };
    let t_col = pos("t")?;
    let id_col = pos("machine_id")?;
    let val_pos: Vec<usize> = value_cols
        .iter()
        .map(|c| pos(c))
        .collect::<Result<Vec<_>>>()?;

    let mut ids: Vec<String> = Vec::new();
    let mut t: Vec<f64> = Vec::new();
    let mut cols: Vec<Vec<Vec<f64>>> = vec![Vec::new(); value_cols.len()];
    let mut frame_of_t = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |idx: usize| -> Result<f64> {
            rec.get(idx)
                .ok_or_else(|| SwingError::InvalidInput("short csv record".into()))?
                .parse::<f64>()
                .map_err(|e| SwingError::InvalidInput(format!("bad float in csv: {e}")))
        };
        let tv = parse(t_col)?;
        let id = rec
            .get(id_col)
            .ok_or_else(|| SwingError::InvalidInput("short csv record".into()))?
            .to_string();
        let frame = *frame_of_t.entry(tv.to_bits()).or_insert_with(|| {
            t.push(tv);
            t.len() - 1
        });
        let mi = match ids.iter().position(|x| *x == id) {
            Some(i) => i,
            None => {
                ids.push(id);
                for c in cols.iter_mut() {
                    c.push(Vec::new());
                }
                ids.len() - 1
            }
        };
        for (c, &vp) in val_pos.iter().enumerate() {
            let series = &mut cols[c][mi];
            if series.len() != frame {
                return Err(SwingError::InvalidInput(format!(
                    "csv rows out of order for machine {} at t = {tv}",
                    ids[mi]
                )));
            }
            series.push(parse(vp)?);
        }
    }
    for (mi, id) in ids.iter().enumerate() {
        if cols.iter().any(|c| c[mi].len() != t.len()) {
            return Err(SwingError::InvalidInput(format!(
                "machine {id} is missing frames"
            )));
        }
    }
    if ids.is_empty() {
        return Err(SwingError::InvalidInput("empty stream csv".into()));
    }
    Ok(LongTable { ids, t, cols })
}

/// Read a measurement or derived stream, deciding by header: a `freq_hz`
/// column marks the raw form (slip is then derived from frequency), a
/// `domega_pu` column the derived form.
pub fn read_stream_csv_bytes(bytes: &[u8], f0: f64) -> Result<DerivedStream> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    drop(rdr);
    let raw = header.iter().any(|h| h == "freq_hz");
    let derived = header.iter().any(|h| h == "domega_pu") && header.iter().any(|h| h == "dp_pu");
    if raw {
        let table = read_long_table(bytes, &["delta_deg", "freq_hz", "pm_pu", "pe_pu"])?;
        let [delta, f_hz, pm, pe] = into_array(table.cols);
        let stream = PmuStream {
            machine_ids: table.ids,
            f0,
            t: table.t,
            delta: map_rad(delta),
            f_hz,
            pm,
            pe,
        };
        Ok(crate::pmu::derive(&stream))
    } else if derived {
        let table = read_long_table(bytes, &["delta_deg", "domega_pu", "dp_pu"])?;
        let [delta, domega, dp] = into_array(table.cols);
        Ok(DerivedStream {
            machine_ids: table.ids,
            t: table.t,
            delta: map_rad(delta),
            domega,
            dp,
        })
    } else {
        Err(SwingError::InvalidInput(
            "stream csv has neither freq_hz nor domega_pu/dp_pu columns".into(),
        ))
    }
}

fn into_array<const K: usize>(cols: Vec<Vec<Vec<f64>>>) -> [Vec<Vec<f64>>; K] {
    cols.try_into()
        .unwrap_or_else(|_| unreachable!("column count fixed by caller"))
}

fn map_rad(cols: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    cols.into_iter()
        .map(|series| series.into_iter().map(deg_to_rad).collect())
        .collect()
}

/// Per-frame C/N labels for every reporting machine.
pub fn write_assignment_csv<W: Write>(w: W, ids: &[String], frames: &[FrameOutput]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "generator_id", "group"])?;
    for f in frames {
        for id in ids {
            let group = if f.assignment_cms.contains(id) { "C" } else { "N" };
            out.write_record([fmt(f.t), id.clone(), group.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_equivalent_csv<W: Write>(w: W, frames: &[FrameOutput]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "t",
        "mode_id",
        "delta_eq_deg",
        "domega_eq_pu",
        "m_eq",
        "dp_eq_pu",
    ])?;
    for f in frames {
        if let Some(s) = &f.smib {
            out.write_record([
                fmt(f.t),
                mode_hex(s.mode_id),
                fmt(rad_to_deg(s.delta)),
                fmt(s.domega),
                fmt(s.m),
                fmt(s.dp),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_detection_csv<W: Write>(w: W, frames: &[FrameOutput]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "mode_id", "c", "tau", "mu", "gated", "verdict"])?;
    for f in frames {
        if let Some(d) = &f.detection {
            out.write_record([
                fmt(d.t),
                mode_hex(d.mode_id),
                fmt_opt(d.c),
                fmt_opt(d.tau),
                fmt_opt(d.mu),
                d.gated.to_string(),
                verdict_str(d.verdict).to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_bench_csv<W: Write>(w: W, rows: &[BenchRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "n",
        "p",
        "t_direct_ms",
        "t_twolayer_ms",
        "speedup",
        "msgs_direct",
        "msgs_twolayer",
    ])?;
    for r in rows {
        out.write_record([
            r.n.to_string(),
            r.p.to_string(),
            fmt(r.t_direct_ms),
            fmt(r.t_two_layer_ms),
            fmt(r.speedup),
            r.msgs_direct.to_string(),
            r.msgs_two_layer.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Fleet description consumed by offline detection: base frequency plus the
/// per-machine inertia and reporting area.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetFile {
    pub f0_hz: f64,
    pub machines: Vec<FleetMachine>,
}

impl FleetFile {
    pub fn from_json(s: &str) -> Result<Self> {
        let f: FleetFile = serde_json::from_str(s)?;
        if !(f.f0_hz == 50.0 || f.f0_hz == 60.0) {
            return Err(SwingError::InvalidInput(format!(
                "f0_hz must be 50 or 60, got {}",
                f.f0_hz
            )));
        }
        Ok(f)
    }
}

/// Run-level summary of a closed- or open-loop run.
pub fn run_summary_json(report: &RunReport) -> serde_json::Value {
    serde_json::json!({
        "verdict": verdict_str(report.summary.verdict),
        "t_s_s": report.summary.t_s,
        "delta_s_deg": report.delta_s_deg,
        "mode_history": report
            .summary
            .mode_history
            .iter()
            .map(|m| serde_json::json!({"t_start_s": m.t_start, "mode_id": mode_hex(m.mode_id)}))
            .collect::<Vec<_>>(),
        "actuation_time_s": report.actuation_time,
        "critical_machines": report.cms_at_detection,
        "final_stable": report.final_stable,
        "spread_exceeded_180deg": report.ground_truth_unstable,
        "messages_direct": report.messages_direct,
        "messages_two_layer": report.messages_two_layer,
        "controlled": report.controlled,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// What a command run produced: the invocation, the seed, hashes of every
/// configuration input, and hashes of every file written.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: Option<u64>,
    pub configs: BTreeMap<String, String>,
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: impl Into<String>, seed: Option<u64>) -> Self {
        Manifest {
            command: command.into(),
            seed,
            configs: BTreeMap::new(),
            files: BTreeMap::new(),
        }
    }

    pub fn add_config(&mut self, name: impl Into<String>, content: &[u8]) {
        self.configs.insert(name.into(), sha256_hex(content));
    }

    pub fn add_file(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.files.insert(name, sha256_hex(&bytes));
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Reject non-finite values before they reach an output file.
pub fn assert_finite(label: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for (i, v) in values.into_iter().enumerate() {
        if !v.is_finite() {
            return Err(SwingError::InvalidInput(format!(
                "non-finite value in {label} at index {i}: {v}"
            )));
        }
    }
    Ok(())
}
