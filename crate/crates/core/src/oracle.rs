// SPDX-License-Identifier: Apache-2.0
//! Reference computations for tests and audits.
//!
//! Nothing here touches the router, flood queue or metric code: the flood
//! replay re-derives hop-count flooding from the topology alone.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::fabric::{LinkId, NodeId, NodeKind, Topology};

pub const BRUTE_FORCE_MAX_NODES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("brute-force flood limited to {BRUTE_FORCE_MAX_NODES} nodes, topology has {0}")]
    TooLarge(usize),
}

fn usable(topo: &Topology, l: LinkId, min_bw: u32) -> bool {
    let link = topo.link(l);
    link.up && link.available() >= min_bw
}

/// Fewest links from `a` to `b` over live links with at least `min_bw`
/// spare, relaying only through routers.
pub fn min_hops(topo: &Topology, a: NodeId, b: NodeId, min_bw: u32) -> Option<u32> {
    let mut dist: Vec<Option<u32>> = vec![None; topo.nodes().len()];
    dist[a.0] = Some(0);
    let mut queue = VecDeque::from([a]);
    while let Some(n) = queue.pop_front() {
        let d = dist[n.0].unwrap();
        if n == b {
            return Some(d);
        }
        if n != a && topo.node(n).kind == NodeKind::Host {
            continue;
        }
        for &l in &topo.node(n).links {
            if !usable(topo, l, min_bw) {
                continue;
            }
            let m = topo.link(l).other(n);
            if dist[m.0].is_none() {
                dist[m.0] = Some(d + 1);
                queue.push_back(m);
            }
        }
    }
    None
}

/// Fixed point of a single hop-count flood.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FloodOracle {
    /// Lowest CDM that reaches `dst` (a router's recorded value, or the
    /// value delivered to a destination host).
    pub min_cdm: Option<u32>,
    /// All CREQ transmissions, including a host source's initial request.
    pub total_transmissions: u64,
    /// Transmissions made by routers only.
    pub router_transmissions: u64,
    pub per_link: Vec<u64>,
    /// Relaxation rounds until no router improved.
    pub rounds: u32,
}

struct Msg {
    to: NodeId,
    via: LinkId,
    cdm: u32,
}

/// Replays one flood from `src` as synchronous rounds: every copy sent in
/// round k arrives in round k+1, each router keeps the lowest CDM it has
/// seen, and re-broadcasts (to every usable link except the one the
/// winning copy came in on) exactly when a round brings a strict
/// improvement. Iterates until no router improves.
pub fn brute_force_flood(
    topo: &Topology,
    src: NodeId,
    dst: NodeId,
    min_bw: u32,
) -> Result<FloodOracle, OracleError> {
    let n = topo.nodes().len();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(OracleError::TooLarge(n));
    }
    let mut best: Vec<Option<u32>> = vec![None; n];
    let mut per_link = vec![0u64; topo.links().len()];
    let mut total = 0u64;
    let mut router_tx = 0u64;
    let mut dst_best: Option<u32> = None;

    let broadcast = |node: NodeId, except: Option<LinkId>, cdm: u32, per_link: &mut Vec<u64>| -> Vec<Msg> {
        let mut out = Vec::new();
        if cdm + 1 > 255 {
            return out;
        }
        for &l in &topo.node(node).links {
            if Some(l) == except || !usable(topo, l, min_bw) {
                continue;
            }
            per_link[l.0] += 1;
            out.push(Msg {
                to: topo.link(l).other(node),
                via: l,
                cdm: cdm + 1,
            });
        }
        out
    };

    let mut inflight: Vec<Msg> = match topo.node(src).kind {
        NodeKind::Host => {
            let first = topo.node(src).links.iter().copied().find(|&l| usable(topo, l, min_bw));
            match first {
                Some(l) => {
                    per_link[l.0] += 1;
                    total += 1;
                    vec![Msg {
                        to: topo.link(l).other(src),
                        via: l,
                        cdm: 0,
                    }]
                }
                None => Vec::new(),
            }
        }
        NodeKind::Router => {
            best[src.0] = Some(0);
            let out = broadcast(src, None, 0, &mut per_link);
            total += out.len() as u64;
            router_tx += out.len() as u64;
            out
        }
    };

    let mut rounds = 0;
    while !inflight.is_empty() {
        rounds += 1;
        // lowest CDM per receiving router this round
        let mut winners: BTreeMap<NodeId, (u32, LinkId)> = BTreeMap::new();
        for m in inflight.drain(..) {
            match topo.node(m.to).kind {
                NodeKind::Host => {
                    if m.to == dst {
                        dst_best = Some(dst_best.map_or(m.cdm, |b| b.min(m.cdm)));
                    }
                }
                NodeKind::Router => {
                    let improves = best[m.to.0].is_none_or(|b| m.cdm < b);
                    let round_best = winners.get(&m.to).is_none_or(|&(c, _)| m.cdm < c);
                    if improves && round_best {
                        winners.insert(m.to, (m.cdm, m.via));
                    }
                }
            }
        }
        for (node, (cdm, via)) in winners {
            best[node.0] = Some(cdm);
            let out = broadcast(node, Some(via), cdm, &mut per_link);
            total += out.len() as u64;
            router_tx += out.len() as u64;
            inflight.extend(out);
        }
    }

    let min_cdm = match topo.node(dst).kind {
        NodeKind::Host => dst_best,
        NodeKind::Router => best[dst.0],
    };
    Ok(FloodOracle {
        min_cdm,
        total_transmissions: total,
        router_transmissions: router_tx,
        per_link,
        rounds,
    })
}
