// SPDX-License-Identifier: Apache-2.0
//! Endpoint state machines.
//!
//! As a source a host hands a CREQ to its first-hop router, waits for the
//! CACC and decides what to do with a degraded grant. As a destination it
//! opens a short window on the first CREQ of a flood, keeps the lowest-CDM
//! arrival, and answers with one CACC when the window closes. Hosts never
//! forward CREQs.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::engine::SimTime;
use crate::fabric::{LinkId, NodeId, Topology};
use crate::metric::Cdm;
use crate::wire::{Address, FloodKey, PacketType, QosSpec, SignallingCell};

/// Engine-assigned identifier of one call (all of its attempts).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ConnId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConnectionStatus {
    Flooding,
    Established,
    DegradedEstablished,
    Failed,
    Retrying,
}

impl ConnectionStatus {
    pub fn is_established(self) -> bool {
        matches!(self, ConnectionStatus::Established | ConnectionStatus::DegradedEstablished)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConnectionStatus::Flooding => "flooding",
            ConnectionStatus::Established => "established",
            ConnectionStatus::DegradedEstablished => "degraded",
            ConnectionStatus::Failed => "failed",
            ConnectionStatus::Retrying => "retrying",
        }
    }
}

/// What the source does when the grant comes back below the request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DegradePolicy {
    AcceptLower,
    RetryOnDegrade,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostConfig {
    pub window: SimTime,
    pub retry_timeout: SimTime,
    pub max_retries: u32,
    pub degrade_policy: DegradePolicy,
    /// Floods that must start network-wide before a connection number is reused.
    pub reuse_distance: u64,
}

#[derive(Debug, Clone)]
pub struct ConnectionRecord {
    pub id: ConnId,
    pub key: FloodKey,
    pub requested: QosSpec,
    pub granted: Option<QosSpec>,
    pub status: ConnectionStatus,
    /// Floods started for this connection.
    pub attempts: u32,
    pub retry_deadline: Option<SimTime>,
    /// Link the CACC arrived on; the circuit's first hop.
    pub access_link: Option<LinkId>,
    pub released: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowState {
    pub key: FloodKey,
    pub best_cdm: Cdm,
    pub best_link: LinkId,
    pub requested: QosSpec,
    pub deadline: SimTime,
    pub closed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HostCounters {
    pub creq_rx: u64,
    pub creq_not_for_us: u64,
    pub late_creq: u64,
    pub cacc_rx: u64,
    pub stale_cacc: u64,
    pub rel_rx: u64,
    pub checksum_drops: u64,
}

/// Side effects requested by a host; the engine turns them into events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HostAction {
    Send { link: LinkId, cell: SignallingCell },
    FloodStarted { conn: ConnId, key: FloodKey },
    OpenWindow { key: FloodKey, deadline: SimTime },
    ArmRetry { conn: ConnId, key: FloodKey, deadline: SimTime },
    CancelRetry { key: FloodKey },
    Established { conn: ConnId },
    Failed { conn: ConnId },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HostError {
    #[error("host has no live access link")]
    NoAccessLink,
    #[error("no reusable connection number toward {0}")]
    NumbersExhausted(Address),
    #[error("unknown connection {0:?}")]
    UnknownConnection(ConnId),
}

const CLOSED_WINDOW_MEMORY: usize = 1 << 16;

#[derive(Debug, Clone)]
struct PairNumbering {
    next: u8,
    last_used: [Option<u64>; 256],
}

impl Default for PairNumbering {
    fn default() -> Self {
        PairNumbering {
            next: 0,
            last_used: [None; 256],
        }
    }
}

impl PairNumbering {
    fn allocate(&mut self, live: impl Fn(u8) -> bool, flood_seq: u64, reuse_distance: u64) -> Option<u8> {
        for off in 0..=u8::MAX {
            let c = self.next.wrapping_add(off);
            let rested = self.last_used[c as usize].is_none_or(|s| flood_seq - s >= reuse_distance);
            if !live(c) && rested {
                self.next = c.wrapping_add(1);
                self.last_used[c as usize] = Some(flood_seq);
                return Some(c);
            }
        }
        None
    }
}

#[derive(Debug, Clone)]
pub struct HostState {
    pub node: NodeId,
    pub address: Address,
    pub links: Vec<LinkId>,
    pub config: HostConfig,
    pub counters: HostCounters,
    connections: HashMap<ConnId, ConnectionRecord>,
    by_key: HashMap<FloodKey, ConnId>,
    live_keys: HashSet<FloodKey>,
    numbering: HashMap<Address, PairNumbering>,
    windows: HashMap<FloodKey, WindowState>,
    closed_windows: VecDeque<FloodKey>,
}

impl HostState {
    pub fn new(topo: &Topology, node: NodeId, config: HostConfig) -> Self {
        let n = topo.node(node);
        HostState {
            node,
            address: n.address,
            links: n.links.clone(),
            config,
            counters: HostCounters::default(),
            connections: HashMap::new(),
            by_key: HashMap::new(),
            live_keys: HashSet::new(),
            numbering: HashMap::new(),
            windows: HashMap::new(),
            closed_windows: VecDeque::new(),
        }
    }

    pub fn connection(&self, id: ConnId) -> Option<&ConnectionRecord> {
        self.connections.get(&id)
    }

    pub fn connections(&self) -> impl Iterator<Item = &ConnectionRecord> {
        self.connections.values()
    }

    pub fn window(&self, key: &FloodKey) -> Option<&WindowState> {
        self.windows.get(key)
    }

    fn live_access_link(&self, topo: &Topology) -> Option<LinkId> {
        self.links.iter().copied().find(|l| topo.link(*l).up)
    }

    /// Starts a new connection toward `dst`. `flood_seq` is the number of
    /// floods started network-wide so far.
    pub fn originate(
        &mut self,
        topo: &Topology,
        conn: ConnId,
        dst: Address,
        qos: QosSpec,
        now: SimTime,
        flood_seq: u64,
    ) -> Result<Vec<HostAction>, HostError> {
        let placeholder = FloodKey::new(self.address, dst, 0);
        self.connections.insert(
            conn,
            ConnectionRecord {
                id: conn,
                key: placeholder,
                requested: qos,
                granted: None,
                status: ConnectionStatus::Flooding,
                attempts: 0,
                retry_deadline: None,
                access_link: None,
                released: false,
            },
        );
        match self.start_attempt(topo, conn, now, flood_seq) {
            Ok(actions) => Ok(actions),
            Err(e) => {
                self.connections.get_mut(&conn).unwrap().status = ConnectionStatus::Failed;
                Err(e)
            }
        }
    }

    fn start_attempt(
        &mut self,
        topo: &Topology,
        conn: ConnId,
        now: SimTime,
        flood_seq: u64,
    ) -> Result<Vec<HostAction>, HostError> {
        let link = self.live_access_link(topo).ok_or(HostError::NoAccessLink)?;
        let (dst, requested) = {
            let r = &self.connections[&conn];
            (r.key.destination, r.requested)
        };
        let src = self.address;
        let live = &self.live_keys;
        let number = self
            .numbering
            .entry(dst)
            .or_default()
            .allocate(
                |c| live.contains(&FloodKey::new(src, dst, c)),
                flood_seq,
                self.config.reuse_distance,
            )
            .ok_or(HostError::NumbersExhausted(dst))?;
        let key = FloodKey::new(src, dst, number);
        let deadline = now + self.config.retry_timeout;
        let rec = self.connections.get_mut(&conn).unwrap();
        rec.key = key;
        rec.status = ConnectionStatus::Flooding;
        rec.attempts += 1;
        rec.retry_deadline = Some(deadline);
        self.by_key.insert(key, conn);
        self.live_keys.insert(key);
        Ok(vec![
            HostAction::FloodStarted { conn, key },
            HostAction::Send {
                link,
                cell: SignallingCell::creq(key, requested),
            },
            HostAction::ArmRetry { conn, key, deadline },
        ])
    }

    fn retry_or_fail(
        &mut self,
        topo: &Topology,
        conn: ConnId,
        now: SimTime,
        flood_seq: u64,
        mut actions: Vec<HostAction>,
    ) -> Vec<HostAction> {
        let rec = self.connections.get_mut(&conn).unwrap();
        self.live_keys.remove(&rec.key);
        rec.retry_deadline = None;
        rec.granted = None;
        if rec.attempts <= self.config.max_retries {
            rec.status = ConnectionStatus::Retrying;
            if let Ok(more) = self.start_attempt(topo, conn, now, flood_seq) {
                actions.extend(more);
                return actions;
            }
        }
        self.connections.get_mut(&conn).unwrap().status = ConnectionStatus::Failed;
        actions.push(HostAction::Failed { conn });
        actions
    }

    pub fn dest_on_creq(
        &mut self,
        arrival: LinkId,
        cell: &SignallingCell,
        now: SimTime,
    ) -> Option<HostAction> {
        debug_assert_eq!(cell.packet_type, PacketType::Creq);
        self.counters.creq_rx += 1;
        if cell.key.destination != self.address {
            self.counters.creq_not_for_us += 1;
            return None;
        }
        // A closed window older than a retry timeout belongs to an earlier
        // use of the same connection number.
        let grace = self.config.retry_timeout;
        let stale = self
            .windows
            .get(&cell.key)
            .is_some_and(|w| w.closed && now > w.deadline.saturating_add(grace));
        if stale {
            self.windows.remove(&cell.key);
        }
        match self.windows.get_mut(&cell.key) {
            None => {
                let deadline = now + self.config.window;
                self.windows.insert(
                    cell.key,
                    WindowState {
                        key: cell.key,
                        best_cdm: cell.cdm,
                        best_link: arrival,
                        requested: cell.qos,
                        deadline,
                        closed: false,
                    },
                );
                Some(HostAction::OpenWindow {
                    key: cell.key,
                    deadline,
                })
            }
            Some(w) if w.closed || now > w.deadline => {
                self.counters.late_creq += 1;
                None
            }
            Some(w) => {
                if cell.cdm < w.best_cdm {
                    w.best_cdm = cell.cdm;
                    w.best_link = arrival;
                }
                None
            }
        }
    }

    /// Closes the window and answers along the best link.
    pub fn dest_on_window_expiry(&mut self, key: &FloodKey, _now: SimTime) -> Option<HostAction> {
        let w = self.windows.get_mut(key).filter(|w| !w.closed)?;
        w.closed = true;
        let cell = SignallingCell::cacc(*key, w.best_cdm, w.requested);
        let link = w.best_link;
        self.closed_windows.push_back(*key);
        if self.closed_windows.len() > CLOSED_WINDOW_MEMORY {
            if let Some(old) = self.closed_windows.pop_front() {
                self.windows.remove(&old);
            }
        }
        Some(HostAction::Send { link, cell })
    }

    pub fn src_on_cacc(
        &mut self,
        topo: &Topology,
        arrival: LinkId,
        cell: &SignallingCell,
        now: SimTime,
        flood_seq: u64,
    ) -> Vec<HostAction> {
        debug_assert_eq!(cell.packet_type, PacketType::Cacc);
        self.counters.cacc_rx += 1;
        let key = cell.key;
        let current = self
            .by_key
            .get(&key)
            .and_then(|c| self.connections.get(c))
            .filter(|r| r.key == key && r.status == ConnectionStatus::Flooding)
            .map(|r| r.id);
        let Some(conn) = current else {
            // A CACC for an attempt we gave up on: release what it installed.
            self.counters.stale_cacc += 1;
            return if cell.qos.bandwidth_kbps > 0 {
                vec![HostAction::Send {
                    link: arrival,
                    cell: SignallingCell::rel(key),
                }]
            } else {
                Vec::new()
            };
        };

        let mut actions = vec![HostAction::CancelRetry { key }];
        let rec = self.connections.get_mut(&conn).unwrap();
        rec.retry_deadline = None;
        let requested = rec.requested.bandwidth_kbps;
        let granted = cell.qos.bandwidth_kbps;
        if granted == 0 {
            return self.retry_or_fail(topo, conn, now, flood_seq, actions);
        }
        if granted >= requested {
            rec.status = ConnectionStatus::Established;
            rec.granted = Some(rec.requested);
            rec.access_link = Some(arrival);
            actions.push(HostAction::Established { conn });
            return actions;
        }
        match self.config.degrade_policy {
            DegradePolicy::AcceptLower => {
                rec.status = ConnectionStatus::DegradedEstablished;
                rec.granted = Some(cell.qos);
                rec.access_link = Some(arrival);
                actions.push(HostAction::Established { conn });
                actions
            }
            DegradePolicy::RetryOnDegrade => {
                actions.push(HostAction::Send {
                    link: arrival,
                    cell: SignallingCell::rel(key),
                });
                self.retry_or_fail(topo, conn, now, flood_seq, actions)
            }
        }
    }

    pub fn src_on_retry_timeout(
        &mut self,
        topo: &Topology,
        key: &FloodKey,
        now: SimTime,
        flood_seq: u64,
    ) -> Vec<HostAction> {
        let conn = match self.by_key.get(key).and_then(|c| self.connections.get(c)) {
            Some(r) if r.key == *key && r.status == ConnectionStatus::Flooding => r.id,
            _ => return Vec::new(),
        };
        self.retry_or_fail(topo, conn, now, flood_seq, Vec::new())
    }

    /// Ends an established connection; returns the REL to send.
    pub fn release(&mut self, conn: ConnId) -> Result<Option<HostAction>, HostError> {
        let rec = self
            .connections
            .get_mut(&conn)
            .ok_or(HostError::UnknownConnection(conn))?;
        if !rec.status.is_established() || rec.released {
            return Ok(None);
        }
        rec.released = true;
        self.live_keys.remove(&rec.key);
        let link = rec.access_link.expect("established connections know their access link");
        Ok(Some(HostAction::Send {
            link,
            cell: SignallingCell::rel(rec.key),
        }))
    }

    pub fn on_rel(&mut self, _cell: &SignallingCell) {
        self.counters.rel_rx += 1;
    }
}
