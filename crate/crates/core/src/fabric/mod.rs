// SPDX-License-Identifier: Apache-2.0
//! Topology graph and link state.
//!
//! A link is full duplex: two directed channels (each with its own
//! transmission queue and VC number space) sharing one bandwidth
//! reservation pool.

mod builtin;
mod parse;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::engine::SimTime;
use crate::wire::{Address, FloodKey, CELL_LEN};

pub use builtin::{builtin, BUILTIN_NAMES};
pub use parse::load_topology;

/// Bits in one signalling cell.
pub const CELL_BITS: u64 = CELL_LEN as u64 * 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LinkId(pub usize);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Router,
    Host,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
    pub address: Address,
    pub links: Vec<LinkId>,
}

/// Direction of travel on a link relative to its declared endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    AtoB,
    BtoA,
}

impl Direction {
    fn index(self) -> usize {
        match self {
            Direction::AtoB => 0,
            Direction::BtoA => 1,
        }
    }
}

/// VC numbers 1..=255 on one directed channel; 0 is signalling.
#[derive(Debug, Clone, Default)]
pub struct VcAllocator {
    used: BTreeMap<u8, FloodKey>,
}

impl VcAllocator {
    pub fn allocate(&mut self, key: FloodKey) -> Option<u8> {
        let vc = (1..=u8::MAX).find(|vc| !self.used.contains_key(vc))?;
        self.used.insert(vc, key);
        Some(vc)
    }

    pub fn release(&mut self, vc: u8) -> Option<FloodKey> {
        self.used.remove(&vc)
    }

    pub fn owner(&self, vc: u8) -> Option<FloodKey> {
        self.used.get(&vc).copied()
    }

    pub fn vc_for(&self, key: &FloodKey) -> Option<u8> {
        self.used.iter().find(|(_, k)| *k == key).map(|(vc, _)| *vc)
    }

    pub fn in_use(&self) -> usize {
        self.used.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u8, FloodKey)> + '_ {
        self.used.iter().map(|(vc, k)| (*vc, *k))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Channel {
    /// When the transmitter becomes free for the next cell.
    pub busy_until: SimTime,
    pub vcs: VcAllocator,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("unknown link {0}")]
    UnknownLink(LinkId),
    #[error("insufficient bandwidth: {available} kbps available")]
    Insufficient { available: u32 },
    #[error("release of {requested} kbps exceeds {reserved} kbps reserved")]
    UnderflowOnRelease { requested: u32, reserved: u32 },
}

#[derive(Debug, Clone)]
pub struct LinkState {
    pub id: LinkId,
    pub endpoints: (NodeId, NodeId),
    pub capacity_kbps: u32,
    reserved_kbps: u32,
    pub prop_delay: SimTime,
    /// Serialization time of one 53-byte cell at link capacity.
    pub cell_time: SimTime,
    pub up: bool,
    /// Bumped on every down transition; cells sent in an older epoch are lost.
    pub epoch: u32,
    channels: [Channel; 2],
}

impl LinkState {
    pub fn new(id: LinkId, a: NodeId, b: NodeId, capacity_kbps: u32, prop_delay: SimTime) -> Self {
        let cell_ns = (CELL_BITS * 1_000_000).div_ceil(capacity_kbps.max(1) as u64);
        LinkState {
            id,
            endpoints: (a, b),
            capacity_kbps,
            reserved_kbps: 0,
            prop_delay,
            cell_time: SimTime::from_nanos(cell_ns),
            up: true,
            epoch: 0,
            channels: Default::default(),
        }
    }

    #[cfg(test)]
    pub(crate) fn new_test(capacity_kbps: u32) -> Self {
        LinkState::new(LinkId(0), NodeId(0), NodeId(1), capacity_kbps, SimTime::from_millis(1))
    }

    pub fn reserved(&self) -> u32 {
        self.reserved_kbps
    }

    pub fn available(&self) -> u32 {
        self.capacity_kbps - self.reserved_kbps
    }

    pub fn utilization(&self) -> f64 {
        self.reserved_kbps as f64 / self.capacity_kbps as f64
    }

    /// One-cell latency on an idle channel.
    pub fn latency(&self) -> SimTime {
        self.prop_delay + self.cell_time
    }

    pub fn reserve(&mut self, kbps: u32) -> Result<(), LinkError> {
        if kbps > self.available() {
            return Err(LinkError::Insufficient {
                available: self.available(),
            });
        }
        self.reserved_kbps += kbps;
        Ok(())
    }

    pub fn release(&mut self, kbps: u32) -> Result<(), LinkError> {
        if kbps > self.reserved_kbps {
            return Err(LinkError::UnderflowOnRelease {
                requested: kbps,
                reserved: self.reserved_kbps,
            });
        }
        self.reserved_kbps -= kbps;
        Ok(())
    }

    pub fn other(&self, node: NodeId) -> NodeId {
        if self.endpoints.0 == node {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }

    pub fn touches(&self, node: NodeId) -> bool {
        self.endpoints.0 == node || self.endpoints.1 == node
    }

    /// Direction of a cell transmitted by `from`.
    pub fn direction_from(&self, from: NodeId) -> Direction {
        if self.endpoints.0 == from {
            Direction::AtoB
        } else {
            Direction::BtoA
        }
    }

    pub fn channel(&self, dir: Direction) -> &Channel {
        &self.channels[dir.index()]
    }

    pub fn channel_mut(&mut self, dir: Direction) -> &mut Channel {
        &mut self.channels[dir.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid topology: {0}")]
    Validation(String),
    #[error("unknown builtin topology `{0}`")]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<LinkState>,
    by_name: HashMap<String, NodeId>,
    by_address: HashMap<Address, NodeId>,
}

/// Incremental, validated construction of a [`Topology`].
#[derive(Debug, Default)]
pub struct TopologyBuilder {
    nodes: Vec<Node>,
    links: Vec<LinkState>,
    by_name: HashMap<String, NodeId>,
}

impl TopologyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&mut self, name: &str, kind: NodeKind) -> Result<NodeId, TopologyError> {
        if self.by_name.contains_key(name) {
            return Err(TopologyError::Validation(format!("duplicate node `{name}`")));
        }
        let addr = u16::try_from(self.nodes.len() + 1)
            .map_err(|_| TopologyError::Validation("more than 65535 nodes".into()))?;
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            id,
            name: name.to_string(),
            kind,
            address: Address(addr),
            links: Vec::new(),
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn link(
        &mut self,
        a: &str,
        b: &str,
        capacity_kbps: u32,
        delay: SimTime,
    ) -> Result<LinkId, TopologyError> {
        let lookup = |n: &str| {
            self.by_name
                .get(n)
                .copied()
                .ok_or_else(|| TopologyError::Validation(format!("link references undefined node `{n}`")))
        };
        let (na, nb) = (lookup(a)?, lookup(b)?);
        if na == nb {
            return Err(TopologyError::Validation(format!("self-loop on `{a}`")));
        }
        if capacity_kbps == 0 {
            return Err(TopologyError::Validation(format!("link {a}-{b} has zero capacity")));
        }
        if self.nodes[na.0].kind == NodeKind::Host && self.nodes[nb.0].kind == NodeKind::Host {
            return Err(TopologyError::Validation(format!("link {a}-{b} joins two hosts")));
        }
        let id = LinkId(self.links.len());
        self.links.push(LinkState::new(id, na, nb, capacity_kbps, delay));
        self.nodes[na.0].links.push(id);
        self.nodes[nb.0].links.push(id);
        Ok(id)
    }

    pub fn build(self) -> Result<Topology, TopologyError> {
        if let Some(h) = self
            .nodes
            .iter()
            .find(|n| n.kind == NodeKind::Host && n.links.is_empty())
        {
            return Err(TopologyError::Validation(format!("host `{}` has no access link", h.name)));
        }
        let by_address = self.nodes.iter().map(|n| (n.address, n.id)).collect();
        Ok(Topology {
            nodes: self.nodes,
            links: self.links,
            by_name: self.by_name,
            by_address,
        })
    }
}

impl Topology {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[LinkState] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn link(&self, id: LinkId) -> &LinkState {
        &self.links[id.0]
    }

    pub fn link_mut(&mut self, id: LinkId) -> &mut LinkState {
        &mut self.links[id.0]
    }

    pub fn try_link(&self, id: LinkId) -> Result<&LinkState, LinkError> {
        self.links.get(id.0).ok_or(LinkError::UnknownLink(id))
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn node_by_address(&self, addr: Address) -> Option<NodeId> {
        self.by_address.get(&addr).copied()
    }

    pub fn hosts(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Host)
    }

    pub fn routers(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Router)
    }

    /// Links joining two routers.
    pub fn trunk_links(&self) -> impl Iterator<Item = &LinkState> {
        self.links.iter().filter(|l| {
            self.nodes[l.endpoints.0 .0].kind == NodeKind::Router
                && self.nodes[l.endpoints.1 .0].kind == NodeKind::Router
        })
    }

    pub fn is_access_link(&self, id: LinkId) -> bool {
        let l = &self.links[id.0];
        self.nodes[l.endpoints.0 .0].kind == NodeKind::Host
            || self.nodes[l.endpoints.1 .0].kind == NodeKind::Host
    }

    /// First live link by declaration order, or any link between `a` and `b`.
    pub fn find_link(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.links_between(a, b).next()
    }

    pub fn links_between(&self, a: NodeId, b: NodeId) -> impl Iterator<Item = LinkId> + '_ {
        self.nodes[a.0]
            .links
            .iter()
            .copied()
            .filter(move |l| self.links[l.0].other(a) == b)
    }

    pub fn set_link_state(&mut self, id: LinkId, up: bool) -> Result<(), LinkError> {
        let link = self.links.get_mut(id.0).ok_or(LinkError::UnknownLink(id))?;
        if link.up && !up {
            link.epoch += 1;
        }
        link.up = up;
        Ok(())
    }

    pub fn reserve(&mut self, id: LinkId, kbps: u32) -> Result<(), LinkError> {
        self.links
            .get_mut(id.0)
            .ok_or(LinkError::UnknownLink(id))?
            .reserve(kbps)
    }

    pub fn release(&mut self, id: LinkId, kbps: u32) -> Result<(), LinkError> {
        self.links
            .get_mut(id.0)
            .ok_or(LinkError::UnknownLink(id))?
            .release(kbps)
    }

    /// Hop distances from `from`, relaying only through routers and live links.
    fn hop_distances(&self, from: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.nodes.len()];
        dist[from.0] = Some(0);
        let mut queue = VecDeque::from([from]);
        while let Some(n) = queue.pop_front() {
            if n != from && self.nodes[n.0].kind == NodeKind::Host {
                continue;
            }
            let d = dist[n.0].unwrap();
            for l in &self.nodes[n.0].links {
                let link = &self.links[l.0];
                if !link.up {
                    continue;
                }
                let m = link.other(n);
                if dist[m.0].is_none() {
                    dist[m.0] = Some(d + 1);
                    queue.push_back(m);
                }
            }
        }
        dist
    }

    /// Largest finite hop distance between any two nodes.
    pub fn diameter_hops(&self) -> u32 {
        (0..self.nodes.len())
            .flat_map(|i| self.hop_distances(NodeId(i)).into_iter().flatten())
            .max()
            .unwrap_or(0)
    }

    pub fn max_hop_latency(&self) -> SimTime {
        self.links.iter().map(LinkState::latency).max().unwrap_or(SimTime::ZERO)
    }
}
