// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::traffic::{SimConfig, TrafficModel};
use super::{EventId, Scheduler, SimTime};
use crate::fabric::{Direction, LinkId, NodeId, NodeKind, Topology};
use crate::host::{ConnId, HostAction, HostConfig, HostState};
use crate::metrics::{
    AttemptReport, AuditFailure, AuditSummary, ConnectionReport, LinkReport, SimulationReport, TraceRecord,
};
use crate::router::RouterState;
use crate::wire::{decode_cell, encode_cell, FloodKey, PacketType, QosSpec, SignallingCell, CELL_LEN};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
}

fn config_err(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("no such connection")]
    UnknownConnection,
    #[error("connection is not established")]
    NotEstablished,
    #[error("no circuit entry at node {}", .0 .0)]
    Broken(NodeId),
    #[error("circuit revisits node {}", .0 .0)]
    Loop(NodeId),
    #[error("circuit ends at node {}, not the destination", .0 .0)]
    WrongEndpoint(NodeId),
}

/// Nodes and links a data cell visits from source to destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitWalk {
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
}

/// Damages the CDM byte of the `nth` (0-based) matching transmission
/// without fixing up the checksum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corruption {
    pub link: LinkId,
    pub packet_type: PacketType,
    pub nth: u64,
}

#[derive(Debug, Clone)]
enum Event {
    Cell {
        link: LinkId,
        to: NodeId,
        epoch: u32,
        raw: [u8; CELL_LEN],
    },
    WindowExpiry {
        host: NodeId,
        key: FloodKey,
    },
    RetryTimeout {
        host: NodeId,
        key: FloodKey,
    },
    ScriptedCall(usize),
    PoissonCall,
    LinkChange {
        link: LinkId,
        up: bool,
    },
    ConnectionEnd(ConnId),
    AuditSweep,
}

#[derive(Debug)]
enum NodeState {
    Router(RouterState),
    Host(HostState),
}

#[derive(Debug, Clone)]
struct ResolvedCall {
    source: NodeId,
    destination: NodeId,
    qos: QosSpec,
    hold: Option<SimTime>,
}

#[derive(Debug)]
struct Call {
    spec: ResolvedCall,
    requested_at: SimTime,
    established_at: Option<SimTime>,
    path: Vec<LinkId>,
}

#[derive(Debug, Clone, Default)]
struct LinkStats {
    creq: u64,
    cacc: u64,
    rel: u64,
    lost: u64,
    util_sum: f64,
    util_samples: u64,
    util_peak: f64,
}

pub struct Simulation {
    topo: Topology,
    nodes: Vec<NodeState>,
    sched: Scheduler<Event>,
    cfg: SimConfig,
    window: SimTime,
    retry_timeout: SimTime,
    traffic: TrafficModel,
    scripted: Vec<(SimTime, ResolvedCall)>,
    pairs: Vec<(NodeId, NodeId)>,
    rng: ChaCha8Rng,
    calls: Vec<Call>,
    attempts: Vec<AttemptReport>,
    attempt_of: HashMap<FloodKey, usize>,
    retry_timers: HashMap<FloodKey, EventId>,
    /// Links a CACC has crossed so far, destination first.
    cacc_paths: HashMap<FloodKey, Vec<LinkId>>,
    link_stats: Vec<LinkStats>,
    corruptions: Vec<(Corruption, u64)>,
    flood_seq: u64,
    events: u64,
    audit: AuditSummary,
    trace: Vec<TraceRecord>,
}

impl Simulation {
    pub fn new(topo: Topology, traffic: TrafficModel, cfg: SimConfig) -> Result<Self, SimError> {
        if cfg.flood_queue_capacity == 0 {
            return Err(config_err("flood_queue_capacity must be positive"));
        }
        if cfg.audit_interval == Some(SimTime::ZERO) {
            return Err(config_err("audit interval must be positive"));
        }
        let derived = topo.max_hop_latency() * (2 * topo.diameter_hops().max(1) as u64);
        let window = cfg.window.unwrap_or(derived);
        if window == SimTime::ZERO {
            return Err(config_err("destination window must be positive"));
        }
        let retry_timeout = cfg.retry_timeout.unwrap_or(window * 4);
        if retry_timeout <= window {
            return Err(config_err("retry timeout must exceed the destination window"));
        }
        let host_cfg = HostConfig {
            window,
            retry_timeout,
            max_retries: cfg.max_retries,
            degrade_policy: cfg.degrade_policy,
            reuse_distance: cfg.flood_queue_capacity as u64,
        };
        let nodes = topo
            .nodes()
            .iter()
            .map(|n| match n.kind {
                NodeKind::Router => {
                    NodeState::Router(RouterState::new(&topo, n.id, cfg.metric, cfg.flood_queue_capacity))
                }
                NodeKind::Host => NodeState::Host(HostState::new(&topo, n.id, host_cfg.clone())),
            })
            .collect();

        let host_by_addr = |a: crate::wire::Address| -> Result<NodeId, SimError> {
            topo.node_by_address(a)
                .filter(|&n| topo.node(n).kind == NodeKind::Host)
                .ok_or_else(|| config_err(format!("address {} is not a host", a.0)))
        };
        let check_qos = |q: &QosSpec| {
            if q.bandwidth_kbps == 0 {
                Err(config_err("requested bandwidth must be positive"))
            } else {
                Ok(())
            }
        };
        let mut scripted = Vec::new();
        let mut pairs = Vec::new();
        match &traffic {
            TrafficModel::Idle => {}
            TrafficModel::Scripted(calls) => {
                for c in calls {
                    let (s, d) = (host_by_addr(c.source)?, host_by_addr(c.destination)?);
                    if s == d {
                        return Err(config_err("call source equals destination"));
                    }
                    check_qos(&c.qos)?;
                    scripted.push((
                        c.at,
                        ResolvedCall {
                            source: s,
                            destination: d,
                            qos: c.qos,
                            hold: c.hold,
                        },
                    ));
                }
            }
            TrafficModel::Poisson(p) => {
                if !p.call_rate.is_finite() || p.call_rate < 0.0 {
                    return Err(config_err("call_rate must be a non-negative number"));
                }
                if let Some(m) = p.hold_mean {
                    if !m.is_finite() || m <= 0.0 {
                        return Err(config_err("hold_mean must be positive"));
                    }
                }
                check_qos(&p.qos)?;
                match &p.pairs {
                    Some(list) => {
                        for &(s, d) in list {
                            let (s, d) = (host_by_addr(s)?, host_by_addr(d)?);
                            if s == d {
                                return Err(config_err("call source equals destination"));
                            }
                            pairs.push((s, d));
                        }
                    }
                    None => {
                        let hosts: Vec<NodeId> = topo.hosts().map(|h| h.id).collect();
                        for &s in &hosts {
                            for &d in &hosts {
                                if s != d {
                                    pairs.push((s, d));
                                }
                            }
                        }
                    }
                }
                if p.call_rate > 0.0 && pairs.is_empty() {
                    return Err(config_err("traffic needs at least two hosts"));
                }
            }
        }

        let link_count = topo.links().len();
        let mut sim = Simulation {
            topo,
            nodes,
            sched: Scheduler::new(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            window,
            retry_timeout,
            traffic,
            scripted,
            pairs,
            calls: Vec::new(),
            attempts: Vec::new(),
            attempt_of: HashMap::new(),
            retry_timers: HashMap::new(),
            cacc_paths: HashMap::new(),
            link_stats: vec![LinkStats::default(); link_count],
            corruptions: Vec::new(),
            flood_seq: 0,
            events: 0,
            audit: AuditSummary::default(),
            trace: Vec::new(),
        };
        for i in 0..sim.scripted.len() {
            sim.schedule(sim.scripted[i].0, Event::ScriptedCall(i));
        }
        if let TrafficModel::Poisson(p) = &sim.traffic {
            if let Some(gap) = p.next_gap(&mut sim.rng) {
                sim.schedule(gap, Event::PoissonCall);
            }
        }
        if let Some(iv) = sim.cfg.audit_interval {
            sim.schedule(iv, Event::AuditSweep);
        }
        Ok(sim)
    }

    pub fn window(&self) -> SimTime {
        self.window
    }

    pub fn retry_timeout(&self) -> SimTime {
        self.retry_timeout
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn router(&self, node: NodeId) -> Option<&RouterState> {
        match self.nodes.get(node.0)? {
            NodeState::Router(r) => Some(r),
            NodeState::Host(_) => None,
        }
    }

    pub fn host(&self, node: NodeId) -> Option<&HostState> {
        match self.nodes.get(node.0)? {
            NodeState::Host(h) => Some(h),
            NodeState::Router(_) => None,
        }
    }

    /// Calls placed so far; their ids are `ConnId(0..call_count)`.
    pub fn call_count(&self) -> usize {
        self.calls.len()
    }

    /// Source host of a placed call.
    pub fn call_source(&self, conn: ConnId) -> Option<NodeId> {
        self.calls.get(conn.0).map(|c| c.spec.source)
    }

    pub fn schedule_link_change(&mut self, at: SimTime, link: LinkId, up: bool) -> Result<(), SimError> {
        if link.0 >= self.topo.links().len() {
            return Err(config_err(format!("unknown link {}", link.0)));
        }
        self.sched
            .schedule(at, Event::LinkChange { link, up })
            .map_err(|e| config_err(e.to_string()))?;
        Ok(())
    }

    pub fn inject_corruption(&mut self, c: Corruption) {
        self.corruptions.push((c, 0));
    }

    fn schedule(&mut self, at: SimTime, ev: Event) -> EventId {
        self.sched.schedule(at, ev).expect("events are never scheduled in the past")
    }

    fn trace(&mut self, event: &'static str, node: Option<NodeId>, link: Option<LinkId>, detail: Option<String>) {
        if !self.cfg.trace {
            return;
        }
        self.trace.push(TraceRecord {
            t_ns: self.sched.now().as_nanos(),
            event,
            node: node.map(|n| self.topo.node(n).name.clone()),
            link: link.map(|l| l.0),
            detail,
        });
    }

    /// Processes every event due at or before `until`.
    pub fn run_until(&mut self, until: SimTime) {
        while let Some(t) = self.sched.peek_time() {
            if t > until {
                break;
            }
            let (_, _, ev) = self.sched.pop().expect("peeked");
            self.events += 1;
            self.handle(ev);
        }
    }

    /// Runs to the configured duration and produces the report.
    pub fn finish(mut self) -> SimulationReport {
        if self.cfg.duration > SimTime::ZERO {
            self.run_until(self.cfg.duration);
            self.audit_sweep();
        }
        self.report()
    }

    fn handle(&mut self, ev: Event) {
        match ev {
            Event::Cell { link, to, epoch, raw } => self.on_cell(link, to, epoch, raw),
            Event::WindowExpiry { host, key } => {
                let now = self.now();
                let action = match &mut self.nodes[host.0] {
                    NodeState::Host(h) => h.dest_on_window_expiry(&key, now),
                    NodeState::Router(_) => None,
                };
                self.apply(host, action.into_iter().collect());
            }
            Event::RetryTimeout { host, key } => {
                self.retry_timers.remove(&key);
                let now = self.now();
                let actions = match &mut self.nodes[host.0] {
                    NodeState::Host(h) => h.src_on_retry_timeout(&self.topo, &key, now, self.flood_seq),
                    NodeState::Router(_) => Vec::new(),
                };
                if !actions.is_empty() {
                    self.trace("retry_timeout", Some(host), None, Some(key_str(&key)));
                }
                self.apply(host, actions);
            }
            Event::ScriptedCall(i) => {
                let call = self.scripted[i].1.clone();
                self.place_call(call);
            }
            Event::PoissonCall => {
                let TrafficModel::Poisson(p) = &self.traffic else {
                    return;
                };
                let draw = p.draw(self.pairs.len(), &mut self.rng);
                let qos = p.qos;
                if let Some(gap) = p.next_gap(&mut self.rng) {
                    let at = self.now() + gap;
                    self.schedule(at, Event::PoissonCall);
                }
                let (source, destination) = self.pairs[draw.pair];
                self.place_call(ResolvedCall {
                    source,
                    destination,
                    qos,
                    hold: draw.hold,
                });
            }
            Event::LinkChange { link, up } => {
                self.topo.set_link_state(link, up).expect("validated link");
                self.trace(if up { "link_up" } else { "link_down" }, None, Some(link), None);
            }
            Event::ConnectionEnd(conn) => {
                let src = self.calls[conn.0].spec.source;
                let action = match &mut self.nodes[src.0] {
                    NodeState::Host(h) => h.release(conn).ok().flatten(),
                    NodeState::Router(_) => None,
                };
                self.apply(src, action.into_iter().collect());
            }
            Event::AuditSweep => {
                self.audit_sweep();
                if let Some(iv) = self.cfg.audit_interval {
                    let at = self.now() + iv;
                    self.schedule(at, Event::AuditSweep);
                }
            }
        }
    }

    fn place_call(&mut self, spec: ResolvedCall) {
        let conn = ConnId(self.calls.len());
        let now = self.now();
        let dst = self.topo.node(spec.destination).address;
        let src = spec.source;
        let qos = spec.qos;
        self.calls.push(Call {
            spec,
            requested_at: now,
            established_at: None,
            path: Vec::new(),
        });
        let result = match &mut self.nodes[src.0] {
            NodeState::Host(h) => h.originate(&self.topo, conn, dst, qos, now, self.flood_seq),
            NodeState::Router(_) => unreachable!("calls are placed on hosts"),
        };
        match result {
            Ok(actions) => self.apply(src, actions),
            Err(e) => self.trace("call_rejected", Some(src), None, Some(e.to_string())),
        }
    }

    fn apply(&mut self, host: NodeId, actions: Vec<HostAction>) {
        for a in actions {
            match a {
                HostAction::Send { link, cell } => {
                    if cell.packet_type == PacketType::Cacc {
                        self.cacc_paths.insert(cell.key, Vec::new());
                    }
                    self.transmit(host, link, cell);
                }
                HostAction::FloodStarted { conn, key } => {
                    self.flood_seq += 1;
                    let attempt = self
                        .host(host)
                        .and_then(|h| h.connection(conn))
                        .map_or(0, |r| r.attempts);
                    self.attempt_of.insert(key, self.attempts.len());
                    self.attempts.push(AttemptReport {
                        conn: conn.0,
                        attempt,
                        connection_no: key.connection_no,
                        started_at: self.now(),
                        creq_cells: 0,
                        router_creqs: 0,
                        refloods: 0,
                    });
                    self.trace("flood_start", Some(host), None, Some(key_str(&key)));
                }
                HostAction::OpenWindow { key, deadline } => {
                    self.schedule(deadline, Event::WindowExpiry { host, key });
                }
                HostAction::ArmRetry { key, deadline, .. } => {
                    let id = self.schedule(deadline, Event::RetryTimeout { host, key });
                    self.retry_timers.insert(key, id);
                }
                HostAction::CancelRetry { key } => {
                    if let Some(id) = self.retry_timers.remove(&key) {
                        self.sched.cancel(id);
                    }
                }
                HostAction::Established { conn } => {
                    let now = self.now();
                    let key = self
                        .host(host)
                        .and_then(|h| h.connection(conn))
                        .map(|r| r.key)
                        .expect("established connection exists");
                    let mut path = self.cacc_paths.remove(&key).unwrap_or_default();
                    path.reverse();
                    let call = &mut self.calls[conn.0];
                    call.established_at = Some(now);
                    call.path = path;
                    if let Some(hold) = call.spec.hold {
                        self.schedule(now + hold, Event::ConnectionEnd(conn));
                    }
                    self.trace("established", Some(host), None, Some(key_str(&key)));
                }
                HostAction::Failed { conn } => {
                    self.trace("failed", Some(host), None, Some(format!("conn {}", conn.0)));
                }
            }
        }
    }

    fn counting(&self) -> bool {
        self.now() >= self.cfg.warmup
    }

    fn transmit(&mut self, from: NodeId, link: LinkId, cell: SignallingCell) {
        let now = self.now();
        let counting = self.counting();
        let l = self.topo.link_mut(link);
        if !l.up {
            if counting {
                self.link_stats[link.0].lost += 1;
            }
            return;
        }
        let to = l.other(from);
        let dir = l.direction_from(from);
        let (cell_time, prop, epoch) = (l.cell_time, l.prop_delay, l.epoch);
        let ch = l.channel_mut(dir);
        let start = now.max(ch.busy_until);
        ch.busy_until = start + cell_time;
        let arrive = start + cell_time + prop;

        let mut raw = encode_cell(&cell);
        for (c, seen) in &mut self.corruptions {
            if c.link == link && c.packet_type == cell.packet_type {
                if *seen == c.nth {
                    raw[2] ^= 0x01;
                }
                *seen += 1;
            }
        }
        if counting {
            let s = &mut self.link_stats[link.0];
            match cell.packet_type {
                PacketType::Creq => s.creq += 1,
                PacketType::Cacc => s.cacc += 1,
                PacketType::Rel => s.rel += 1,
            }
        }
        if cell.packet_type == PacketType::Creq {
            if let Some(&i) = self.attempt_of.get(&cell.key) {
                self.attempts[i].creq_cells += 1;
            }
        }
        self.schedule(arrive, Event::Cell { link, to, epoch, raw });
    }

    fn on_cell(&mut self, link: LinkId, to: NodeId, epoch: u32, raw: [u8; CELL_LEN]) {
        let l = self.topo.link(link);
        if !l.up || l.epoch != epoch {
            if self.counting() {
                self.link_stats[link.0].lost += 1;
            }
            return;
        }
        let cell = match decode_cell(&raw) {
            Ok(c) => c,
            Err(e) => {
                match &mut self.nodes[to.0] {
                    NodeState::Router(r) => r.counters.checksum_drops += 1,
                    NodeState::Host(h) => h.counters.checksum_drops += 1,
                }
                self.trace("drop", Some(to), Some(link), Some(e.to_string()));
                return;
            }
        };
        if self.cfg.trace {
            self.trace("rx", Some(to), Some(link), Some(cell_str(&cell)));
        }
        let now = self.now();
        let key = cell.key;
        let mut sends: Vec<(LinkId, SignallingCell)> = Vec::new();
        let mut host_actions = Vec::new();
        match &mut self.nodes[to.0] {
            NodeState::Router(r) => match cell.packet_type {
                PacketType::Creq => {
                    let before = r.counters.creq_refloods;
                    sends = r.on_creq(&self.topo, link, &cell, now);
                    if let Some(&i) = self.attempt_of.get(&key) {
                        self.attempts[i].router_creqs += sends.len() as u64;
                        self.attempts[i].refloods += r.counters.creq_refloods - before;
                    }
                }
                PacketType::Cacc => {
                    let o = r.on_cacc(&mut self.topo, link, &cell, now);
                    if o.relay.is_some() {
                        self.cacc_paths.entry(key).or_default().push(link);
                    } else {
                        self.cacc_paths.remove(&key);
                    }
                    sends.extend(o.relay);
                    sends.extend(o.teardown);
                }
                PacketType::Rel => sends.extend(r.on_rel(&mut self.topo, link, &cell)),
            },
            NodeState::Host(h) => match cell.packet_type {
                PacketType::Creq => host_actions.extend(h.dest_on_creq(link, &cell, now)),
                PacketType::Cacc if key.source == h.address => {
                    self.cacc_paths.entry(key).or_default().push(link);
                    host_actions = h.src_on_cacc(&self.topo, link, &cell, now, self.flood_seq);
                }
                PacketType::Cacc => {}
                PacketType::Rel => h.on_rel(&cell),
            },
        }
        for (l, c) in sends {
            self.transmit(to, l, c);
        }
        if !host_actions.is_empty() {
            self.apply(to, host_actions);
        }
        if cell.packet_type == PacketType::Cacc && self.topo.node(to).kind == NodeKind::Host {
            self.cacc_paths.remove(&key);
        }
    }

    fn audit_sweep(&mut self) {
        self.audit.sweeps += 1;
        for (i, l) in self.topo.links().iter().enumerate() {
            let u = l.utilization();
            let s = &mut self.link_stats[i];
            s.util_sum += u;
            s.util_samples += 1;
            s.util_peak = s.util_peak.max(u);
        }
        let now = self.now();
        for message in self.audit() {
            self.audit.failures.push(AuditFailure { at: now, message });
        }
    }

    /// Cross-checks link reservations and VC allocations against the
    /// routers' circuit tables; returns one message per inconsistency.
    pub fn audit(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut expected = vec![0u64; self.topo.links().len()];
        let mut claims: HashMap<(LinkId, Direction), BTreeMap<u8, FloodKey>> = HashMap::new();
        let mut claim = |problems: &mut Vec<String>, link: LinkId, dir: Direction, vc: u8, key: FloodKey| {
            if claims.entry((link, dir)).or_default().insert(vc, key).is_some() {
                problems.push(format!("link {link} {dir:?}: VC {vc} claimed twice"));
            }
        };
        for node in &self.nodes {
            let NodeState::Router(r) = node else { continue };
            for e in r.vc_entries() {
                for l in &e.reserved_on {
                    expected[l.0] += e.reserved_bw as u64;
                }
                let in_link = self.topo.link(e.in_link);
                claim(&mut problems, e.in_link, in_link.direction_from(in_link.other(r.node)), e.in_vc, e.key);
                if e.owns_out_vc {
                    let dir = self.topo.link(e.out_link).direction_from(r.node);
                    claim(&mut problems, e.out_link, dir, e.out_vc, e.key);
                }
            }
        }
        for l in self.topo.links() {
            if l.reserved() as u64 != expected[l.id.0] {
                problems.push(format!(
                    "link {}: reserved {} kbps but circuits account for {}",
                    l.id,
                    l.reserved(),
                    expected[l.id.0]
                ));
            }
            if l.reserved() > l.capacity_kbps {
                problems.push(format!("link {}: reserved exceeds capacity", l.id));
            }
            for dir in [Direction::AtoB, Direction::BtoA] {
                let allocated: BTreeMap<u8, FloodKey> = l.channel(dir).vcs.iter().collect();
                let claimed = claims.remove(&(l.id, dir)).unwrap_or_default();
                if allocated != claimed {
                    problems.push(format!(
                        "link {} {dir:?}: {} VCs allocated, {} claimed by circuits",
                        l.id,
                        allocated.len(),
                        claimed.len()
                    ));
                }
            }
        }
        problems
    }

    /// Walks the installed circuit of `conn` using only data-plane lookups.
    pub fn follow_circuit(&self, conn: ConnId) -> Result<CircuitWalk, CircuitError> {
        let call = self.calls.get(conn.0).ok_or(CircuitError::UnknownConnection)?;
        let src = call.spec.source;
        let rec = self
            .host(src)
            .and_then(|h| h.connection(conn))
            .ok_or(CircuitError::UnknownConnection)?;
        if !rec.status.is_established() || rec.released {
            return Err(CircuitError::NotEstablished);
        }
        let mut link = rec.access_link.ok_or(CircuitError::NotEstablished)?;
        let first = self.topo.link(link);
        let mut vc = first
            .channel(first.direction_from(src))
            .vcs
            .vc_for(&rec.key)
            .ok_or(CircuitError::Broken(src))?;
        let mut here = src;
        let mut seen = HashSet::from([src]);
        let mut walk = CircuitWalk {
            nodes: vec![src],
            links: Vec::new(),
        };
        loop {
            let next = self.topo.link(link).other(here);
            walk.links.push(link);
            if !seen.insert(next) {
                return Err(CircuitError::Loop(next));
            }
            walk.nodes.push(next);
            match &self.nodes[next.0] {
                NodeState::Host(_) if next == call.spec.destination => return Ok(walk),
                NodeState::Host(_) => return Err(CircuitError::WrongEndpoint(next)),
                NodeState::Router(r) => {
                    let (l, v) = r.lookup_data(link, vc).ok_or(CircuitError::Broken(next))?;
                    link = l;
                    vc = v;
                    here = next;
                }
            }
        }
    }

    fn report(self) -> SimulationReport {
        let names = |n: NodeId| self.topo.node(n).name.clone();
        let connections = self
            .calls
            .iter()
            .enumerate()
            .map(|(i, call)| {
                let rec = self
                    .host(call.spec.source)
                    .and_then(|h| h.connection(ConnId(i)))
                    .expect("every call has a record");
                let granted = if rec.status.is_established() {
                    rec.granted.map_or(0, |q| q.bandwidth_kbps)
                } else {
                    0
                };
                ConnectionReport {
                    id: i,
                    source: names(call.spec.source),
                    destination: names(call.spec.destination),
                    requested_at: call.requested_at,
                    established_at: call.established_at.filter(|_| rec.status.is_established()),
                    requested_kbps: call.spec.qos.bandwidth_kbps,
                    granted_kbps: granted,
                    status: rec.status,
                    attempts: rec.attempts,
                    path: if rec.status.is_established() {
                        call.path.clone()
                    } else {
                        Vec::new()
                    },
                }
            })
            .collect();
        let links = self
            .topo
            .links()
            .iter()
            .zip(&self.link_stats)
            .map(|(l, s)| LinkReport {
                id: l.id,
                a: names(l.endpoints.0),
                b: names(l.endpoints.1),
                capacity_kbps: l.capacity_kbps,
                access: self.topo.is_access_link(l.id),
                up: l.up,
                creq_cells: s.creq,
                cacc_cells: s.cacc,
                rel_cells: s.rel,
                lost_cells: s.lost,
                reserved_kbps: l.reserved(),
                mean_utilization: if s.util_samples == 0 {
                    0.0
                } else {
                    s.util_sum / s.util_samples as f64
                },
                peak_utilization: s.util_peak,
            })
            .collect();
        let mut routers = Vec::new();
        let mut hosts = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                NodeState::Router(r) => routers.push((names(NodeId(i)), r.counters.clone())),
                NodeState::Host(h) => hosts.push((names(NodeId(i)), h.counters.clone())),
            }
        }
        SimulationReport {
            seed: self.cfg.seed,
            duration: self.cfg.duration,
            warmup: self.cfg.warmup,
            events_processed: self.events,
            connections,
            attempts: self.attempts,
            links,
            routers,
            hosts,
            audit: self.audit,
            trace: self.trace,
        }
    }
}

fn key_str(k: &FloodKey) -> String {
    format!("{}>{}#{}", k.source.0, k.destination.0, k.connection_no)
}

fn cell_str(c: &SignallingCell) -> String {
    format!(
        "{} {} cdm={} bw={}",
        c.packet_type.as_str(),
        key_str(&c.key),
        c.cdm,
        c.qos.bandwidth_kbps
    )
}

/// Builds a simulation and runs it to completion.
pub fn run(topo: Topology, traffic: TrafficModel, cfg: SimConfig) -> Result<SimulationReport, SimError> {
    Ok(Simulation::new(topo, traffic, cfg)?.finish())
}
