// SPDX-License-Identifier: Apache-2.0
//! Switching-node state machine.
//!
//! A router keeps no routing table. A CREQ is recorded in the flood queue
//! and re-broadcast on every other link with enough spare bandwidth; a
//! better copy of the same flood repeats the broadcast. A CACC walks back
//! along the recorded arrival links, reserving bandwidth and installing
//! the virtual circuit hop by hop.

use std::collections::HashMap;

use serde::Serialize;

use crate::engine::SimTime;
use crate::fabric::{Direction, LinkId, NodeId, Topology};
use crate::flood_queue::{FloodQueue, Improvement};
use crate::metric::{increment_cdm, Increment, MetricPolicy};
use crate::wire::{Address, FloodKey, PacketType, SignallingCell};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RouterCounters {
    pub creq_rx: u64,
    pub creq_tx: u64,
    pub creq_duplicate_discard: u64,
    pub creq_refloods: u64,
    pub cacc_relayed: u64,
    pub cacc_orphaned: u64,
    pub checksum_drops: u64,
    pub rel_relayed: u64,
    pub data_forwarded: u64,
    pub data_dropped: u64,
}

/// One hop of an installed circuit. Data flows from `in_link` to `out_link`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcTableEntry {
    pub key: FloodKey,
    pub in_link: LinkId,
    pub in_vc: u8,
    pub out_link: LinkId,
    pub out_vc: u8,
    pub reserved_bw: u32,
    /// Links whose pool this hop charged `reserved_bw` against.
    pub reserved_on: Vec<LinkId>,
    /// Whether this router allocated `out_vc` (true only toward a host).
    pub owns_out_vc: bool,
}

pub type Emission = (LinkId, SignallingCell);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CaccOutcome {
    /// CACC continuing toward the source.
    pub relay: Option<Emission>,
    /// REL sent back downstream to undo a partially installed circuit.
    pub teardown: Option<Emission>,
    pub installed: Option<VcTableEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataOutcome<P> {
    Forward { link: LinkId, vc: u8, payload: P },
    Drop,
}

#[derive(Debug, Clone)]
pub struct RouterState {
    pub node: NodeId,
    pub address: Address,
    pub links: Vec<LinkId>,
    pub flood_queue: FloodQueue,
    pub policy: MetricPolicy,
    pub counters: RouterCounters,
    vc_table: HashMap<FloodKey, VcTableEntry>,
    by_input: HashMap<(LinkId, u8), FloodKey>,
}

impl RouterState {
    pub fn new(topo: &Topology, node: NodeId, policy: MetricPolicy, queue_capacity: usize) -> Self {
        let n = topo.node(node);
        RouterState {
            node,
            address: n.address,
            links: n.links.clone(),
            flood_queue: FloodQueue::new(queue_capacity),
            policy,
            counters: RouterCounters::default(),
            vc_table: HashMap::new(),
            by_input: HashMap::new(),
        }
    }

    pub fn vc_entries(&self) -> impl Iterator<Item = &VcTableEntry> {
        self.vc_table.values()
    }

    pub fn vc_entry(&self, key: &FloodKey) -> Option<&VcTableEntry> {
        self.vc_table.get(key)
    }

    pub fn on_creq(
        &mut self,
        topo: &Topology,
        arrival: LinkId,
        cell: &SignallingCell,
        now: SimTime,
    ) -> Vec<Emission> {
        debug_assert_eq!(cell.packet_type, PacketType::Creq);
        self.counters.creq_rx += 1;
        let key = cell.key;
        let flood = match self.flood_queue.lookup(&key) {
            None => {
                self.flood_queue
                    .record_new(key, cell.cdm, arrival, now)
                    .expect("absent key");
                true
            }
            Some(_) => match self.flood_queue.try_improve(&key, cell.cdm, arrival) {
                Ok(Improvement::Improved) => {
                    self.counters.creq_refloods += 1;
                    true
                }
                _ => {
                    self.counters.creq_duplicate_discard += 1;
                    false
                }
            },
        };
        if !flood {
            return Vec::new();
        }
        let needed = cell.qos.bandwidth_kbps as u32;
        let out: Vec<Emission> = self
            .links
            .iter()
            .filter(|&&l| l != arrival)
            .filter_map(|&l| {
                let link = topo.link(l);
                if !link.up || link.available() < needed {
                    return None;
                }
                match increment_cdm(cell.cdm, &self.policy, link) {
                    Increment::Next(cdm) => Some((l, cell.with_cdm(cdm))),
                    Increment::Saturated => None,
                }
            })
            .collect();
        self.counters.creq_tx += out.len() as u64;
        out
    }

    pub fn on_cacc(
        &mut self,
        topo: &mut Topology,
        arrival: LinkId,
        cell: &SignallingCell,
        _now: SimTime,
    ) -> CaccOutcome {
        debug_assert_eq!(cell.packet_type, PacketType::Cacc);
        let key = cell.key;
        let to_host = topo.is_access_link(arrival);
        let undo_downstream = || (!to_host).then(|| (arrival, SignallingCell::rel(key)));

        let upstream = match self.flood_queue.lookup(&key) {
            Some(e) if topo.link(e.arrival_link).up => e.arrival_link,
            // Evicted before the CACC came back, or the path toward the
            // source is gone: the attempt fails and the source retries.
            _ => {
                self.counters.cacc_orphaned += 1;
                return CaccOutcome {
                    teardown: undo_downstream(),
                    ..Default::default()
                };
            }
        };
        self.flood_queue.commit(&key).expect("entry present");
        if self.vc_table.contains_key(&key) {
            return CaccOutcome::default();
        }
        self.counters.cacc_relayed += 1;

        let relay_with = |bw: u32| {
            let qos = cell.qos.with_bandwidth(bw as u16);
            Some((upstream, SignallingCell::cacc(key, cell.cdm, qos)))
        };
        let offered = cell.qos.bandwidth_kbps as u32;
        if offered == 0 {
            return CaccOutcome {
                relay: relay_with(0),
                ..Default::default()
            };
        }

        let mut granted = offered.min(topo.link(upstream).available());
        if to_host {
            granted = granted.min(topo.link(arrival).available());
        }
        let installed = if granted == 0 {
            None
        } else {
            self.install(topo, key, upstream, arrival, to_host, granted)
        };
        match installed {
            Some(entry) => CaccOutcome {
                relay: relay_with(entry.reserved_bw),
                teardown: None,
                installed: Some(entry),
            },
            None => CaccOutcome {
                relay: relay_with(0),
                teardown: undo_downstream(),
                installed: None,
            },
        }
    }

    /// Allocates VC numbers and reserves bandwidth; `None` on VC exhaustion.
    fn install(
        &mut self,
        topo: &mut Topology,
        key: FloodKey,
        upstream: LinkId,
        downstream: LinkId,
        to_host: bool,
        granted: u32,
    ) -> Option<VcTableEntry> {
        let me = self.node;
        let up_dir = inbound_dir(topo, upstream, me);
        let in_vc = topo.link_mut(upstream).channel_mut(up_dir).vcs.allocate(key)?;
        let down_dir = topo.link(downstream).direction_from(me);
        let out_vc = if to_host {
            topo.link_mut(downstream).channel_mut(down_dir).vcs.allocate(key)
        } else {
            // the downstream router numbered this hop when it installed
            topo.link(downstream).channel(down_dir).vcs.vc_for(&key)
        };
        let Some(out_vc) = out_vc else {
            topo.link_mut(upstream).channel_mut(up_dir).vcs.release(in_vc);
            return None;
        };

        let mut reserved_on = vec![upstream];
        if to_host {
            reserved_on.push(downstream);
        }
        for &l in &reserved_on {
            topo.reserve(l, granted).expect("granted is within available");
        }
        let entry = VcTableEntry {
            key,
            in_link: upstream,
            in_vc,
            out_link: downstream,
            out_vc,
            reserved_bw: granted,
            reserved_on,
            owns_out_vc: to_host,
        };
        self.by_input.insert((upstream, in_vc), key);
        self.vc_table.insert(key, entry.clone());
        Some(entry)
    }

    /// Circuit hop a data cell on `(arrival, in_vc)` would take.
    pub fn lookup_data(&self, arrival: LinkId, in_vc: u8) -> Option<(LinkId, u8)> {
        self.by_input
            .get(&(arrival, in_vc))
            .and_then(|k| self.vc_table.get(k))
            .map(|e| (e.out_link, e.out_vc))
    }

    pub fn on_data<P>(&mut self, arrival: LinkId, in_vc: u8, payload: P) -> DataOutcome<P> {
        match self.lookup_data(arrival, in_vc) {
            Some((link, vc)) => {
                self.counters.data_forwarded += 1;
                DataOutcome::Forward { link, vc, payload }
            }
            None => {
                self.counters.data_dropped += 1;
                DataOutcome::Drop
            }
        }
    }

    /// Removes the circuit hop for the cell's key and relays the REL onward.
    pub fn on_rel(
        &mut self,
        topo: &mut Topology,
        arrival: LinkId,
        cell: &SignallingCell,
    ) -> Option<Emission> {
        debug_assert_eq!(cell.packet_type, PacketType::Rel);
        match self.vc_table.get(&cell.key) {
            Some(e) if e.in_link == arrival => {}
            _ => return None,
        }
        let e = self.vc_table.remove(&cell.key).expect("checked above");
        self.by_input.remove(&(e.in_link, e.in_vc));
        for &l in &e.reserved_on {
            topo.release(l, e.reserved_bw).expect("reservation accounted");
        }
        let up_dir = inbound_dir(topo, e.in_link, self.node);
        topo.link_mut(e.in_link).channel_mut(up_dir).vcs.release(e.in_vc);
        if e.owns_out_vc {
            let down_dir = topo.link(e.out_link).direction_from(self.node);
            topo.link_mut(e.out_link).channel_mut(down_dir).vcs.release(e.out_vc);
        }
        self.counters.rel_relayed += 1;
        Some((e.out_link, SignallingCell::rel(cell.key)))
    }
}

/// Direction of cells arriving at `node` over `link`.
fn inbound_dir(topo: &Topology, link: LinkId, node: NodeId) -> Direction {
    let l = topo.link(link);
    l.direction_from(l.other(node))
}
