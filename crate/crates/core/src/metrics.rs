// SPDX-License-Identifier: Apache-2.0
//! Run reports, derived measurements and their file renderings.
//!
//! All CSV output is a pure function of the report, with floats printed
//! to three decimals, so equal seeds give byte-identical files.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::engine::SimTime;
use crate::fabric::{LinkId, CELL_BITS};
use crate::host::{ConnectionStatus, HostCounters};
use crate::router::RouterCounters;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectionReport {
    pub id: usize,
    pub source: String,
    pub destination: String,
    pub requested_at: SimTime,
    pub established_at: Option<SimTime>,
    pub requested_kbps: u16,
    /// Zero unless established.
    pub granted_kbps: u16,
    pub status: ConnectionStatus,
    pub attempts: u32,
    /// Links from source to destination as traversed by the accepted CACC.
    pub path: Vec<LinkId>,
}

impl ConnectionReport {
    pub fn hops(&self) -> Option<u32> {
        (!self.path.is_empty()).then_some(self.path.len() as u32)
    }
}

/// One flood: a single attempt of a connection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttemptReport {
    pub conn: usize,
    pub attempt: u32,
    pub connection_no: u8,
    pub started_at: SimTime,
    /// Every CREQ cell of this flood, the source's included.
    pub creq_cells: u64,
    /// CREQ cells emitted by routers.
    pub router_creqs: u64,
    /// Times a router re-broadcast after a better copy.
    pub refloods: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkReport {
    pub id: LinkId,
    pub a: String,
    pub b: String,
    pub capacity_kbps: u32,
    pub access: bool,
    pub up: bool,
    pub creq_cells: u64,
    pub cacc_cells: u64,
    pub rel_cells: u64,
    pub lost_cells: u64,
    pub reserved_kbps: u32,
    pub mean_utilization: f64,
    pub peak_utilization: f64,
}

impl LinkReport {
    pub fn signalling_cells(&self) -> u64 {
        self.creq_cells + self.cacc_cells + self.rel_cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditFailure {
    pub at: SimTime,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditSummary {
    pub sweeps: u64,
    pub failures: Vec<AuditFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub t_ns: u64,
    pub event: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub duration: SimTime,
    pub warmup: SimTime,
    pub events_processed: u64,
    pub connections: Vec<ConnectionReport>,
    pub attempts: Vec<AttemptReport>,
    pub links: Vec<LinkReport>,
    pub routers: Vec<(String, RouterCounters)>,
    pub hosts: Vec<(String, HostCounters)>,
    pub audit: AuditSummary,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

impl SimulationReport {
    /// Span over which link cell counters were collected.
    pub fn measured_secs(&self) -> f64 {
        self.duration.checked_sub(self.warmup).unwrap_or(SimTime::ZERO).as_secs_f64()
    }

    pub fn count_status(&self, status: ConnectionStatus) -> usize {
        self.connections.iter().filter(|c| c.status == status).count()
    }
}

/// `(started_at, router_creqs)` for every flood, in start order.
pub fn flood_volume_series(report: &SimulationReport) -> Vec<(SimTime, u64)> {
    report.attempts.iter().map(|a| (a.started_at, a.router_creqs)).collect()
}

fn kbps(cells: u64, secs: f64) -> f64 {
    if secs <= 0.0 {
        0.0
    } else {
        (cells * CELL_BITS) as f64 / secs / 1000.0
    }
}

/// Flooding load on a link in kbps (CREQ cells only, both directions).
pub fn creq_load_kbps(report: &SimulationReport, link: LinkId) -> f64 {
    kbps(report.links[link.0].creq_cells, report.measured_secs())
}

/// All signalling on a link in kbps: CREQ, CACC and REL.
pub fn signalling_load_kbps(report: &SimulationReport, link: LinkId) -> f64 {
    kbps(report.links[link.0].signalling_cells(), report.measured_secs())
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathOptimality {
    NotApplicable,
    Measured {
        compared: usize,
        optimal: usize,
        /// Largest `hops - oracle` over compared connections.
        worst_excess: i64,
    },
}

impl PathOptimality {
    pub fn fraction(&self) -> Option<f64> {
        match self {
            PathOptimality::NotApplicable => None,
            PathOptimality::Measured { compared, optimal, .. } => Some(*optimal as f64 / *compared as f64),
        }
    }
}

/// Compares each established path with `oracle_hops`; connections the
/// oracle returns `None` for are skipped.
pub fn path_optimality(
    report: &SimulationReport,
    mut oracle_hops: impl FnMut(&ConnectionReport) -> Option<u32>,
) -> PathOptimality {
    let mut compared = 0;
    let mut optimal = 0;
    let mut worst = i64::MIN;
    for c in report.connections.iter().filter(|c| c.status.is_established()) {
        let (Some(h), Some(o)) = (c.hops(), oracle_hops(c)) else {
            continue;
        };
        compared += 1;
        if h == o {
            optimal += 1;
        }
        worst = worst.max(h as i64 - o as i64);
    }
    if compared == 0 {
        PathOptimality::NotApplicable
    } else {
        PathOptimality::Measured {
            compared,
            optimal,
            worst_excess: worst,
        }
    }
}

fn fixed3(v: f64) -> String {
    format!("{v:.3}")
}

pub fn connections_csv(report: &SimulationReport) -> String {
    let mut s = String::from(
        "id,source,destination,requested_ns,established_ns,requested_kbps,granted_kbps,status,attempts,hops,path\n",
    );
    for c in &report.connections {
        let path: Vec<String> = c.path.iter().map(|l| l.0.to_string()).collect();
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.id,
            c.source,
            c.destination,
            c.requested_at.as_nanos(),
            c.established_at.map_or(String::new(), |t| t.as_nanos().to_string()),
            c.requested_kbps,
            c.granted_kbps,
            c.status.as_str(),
            c.attempts,
            c.hops().map_or(String::new(), |h| h.to_string()),
            path.join(";"),
        )
        .unwrap();
    }
    s
}

pub fn flood_volume_csv(report: &SimulationReport) -> String {
    let mut s = String::from("conn,attempt,connection_no,started_ns,creq_cells,router_creqs,refloods\n");
    for a in &report.attempts {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            a.conn,
            a.attempt,
            a.connection_no,
            a.started_at.as_nanos(),
            a.creq_cells,
            a.router_creqs,
            a.refloods
        )
        .unwrap();
    }
    s
}

pub fn links_csv(report: &SimulationReport) -> String {
    let mut s = String::from(
        "link,a,b,capacity_kbps,access,up,creq_cells,cacc_cells,rel_cells,lost_cells,\
         creq_kbps,signalling_kbps,reserved_kbps,mean_utilization,peak_utilization\n",
    );
    for l in &report.links {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            l.id.0,
            l.a,
            l.b,
            l.capacity_kbps,
            l.access,
            l.up,
            l.creq_cells,
            l.cacc_cells,
            l.rel_cells,
            l.lost_cells,
            fixed3(creq_load_kbps(report, l.id)),
            fixed3(signalling_load_kbps(report, l.id)),
            l.reserved_kbps,
            fixed3(l.mean_utilization),
            fixed3(l.peak_utilization),
        )
        .unwrap();
    }
    s
}

pub fn trace_jsonl(report: &SimulationReport) -> String {
    let mut s = String::new();
    for r in &report.trace {
        s.push_str(&serde_json::to_string(r).expect("trace records serialize"));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub format: &'static str,
    pub seed: u64,
    pub duration_s: String,
    pub events_processed: u64,
    pub connections: usize,
    pub established: usize,
    pub degraded: usize,
    pub failed: usize,
    pub floods: usize,
    pub mean_router_creqs_per_flood: String,
    pub audit_sweeps: u64,
    pub audit_failures: usize,
    /// SHA-256 over the three CSV files, in the order listed here.
    pub csv_digest: String,
    pub routers: Vec<(String, RouterCounters)>,
    pub hosts: Vec<(String, HostCounters)>,
}

pub fn csv_digest(report: &SimulationReport) -> String {
    let mut h = Sha256::new();
    for part in [connections_csv(report), flood_volume_csv(report), links_csv(report)] {
        h.update(part.as_bytes());
    }
    hex::encode(h.finalize())
}

pub fn summary(report: &SimulationReport) -> Summary {
    let floods = report.attempts.len();
    let mean = if floods == 0 {
        0.0
    } else {
        report.attempts.iter().map(|a| a.router_creqs).sum::<u64>() as f64 / floods as f64
    };
    Summary {
        format: "floodroute-summary-v1",
        seed: report.seed,
        duration_s: fixed3(report.duration.as_secs_f64()),
        events_processed: report.events_processed,
        connections: report.connections.len(),
        established: report.count_status(ConnectionStatus::Established),
        degraded: report.count_status(ConnectionStatus::DegradedEstablished),
        failed: report.count_status(ConnectionStatus::Failed),
        floods,
        mean_router_creqs_per_flood: fixed3(mean),
        audit_sweeps: report.audit.sweeps,
        audit_failures: report.audit.failures.len(),
        csv_digest: csv_digest(report),
        routers: report.routers.clone(),
        hosts: report.hosts.clone(),
    }
}

/// Writes `connections.csv`, `flood_volume.csv`, `links.csv`,
/// `summary.json` and, when traced, `trace.jsonl` into `dir`.
pub fn write_outputs(report: &SimulationReport, dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("connections.csv"), connections_csv(report))?;
    std::fs::write(dir.join("flood_volume.csv"), flood_volume_csv(report))?;
    std::fs::write(dir.join("links.csv"), links_csv(report))?;
    let json = serde_json::to_string_pretty(&summary(report)).map_err(io::Error::other)?;
    std::fs::write(dir.join("summary.json"), json + "\n")?;
    if !report.trace.is_empty() {
        std::fs::write(dir.join("trace.jsonl"), trace_jsonl(report))?;
    }
    Ok(())
}
