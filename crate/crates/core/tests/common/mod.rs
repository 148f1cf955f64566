// SPDX-License-Identifier: Apache-2.0
//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::HashSet;

use floodroute::engine::{CallSpec, CircuitError, SimTime, Simulation};
use floodroute::fabric::{LinkId, NodeId, NodeKind, Topology, TopologyBuilder};
use floodroute::host::ConnId;
use floodroute::metrics::SimulationReport;
use floodroute::wire::{Address, QosSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TRUNK_KBPS: u32 = 155_000;

/// Connected random network: a random spanning tree over the routers plus
/// extra chords, and single-homed hosts. At most `max_nodes` nodes total.
pub fn random_topology(seed: u64, max_nodes: usize) -> Topology {
    assert!(max_nodes >= 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let routers = rng.random_range(2..=max_nodes - 2);
    let hosts = rng.random_range(2..=max_nodes - routers);
    let mut b = TopologyBuilder::new();
    for i in 0..routers {
        b.node(&format!("r{i}"), NodeKind::Router).unwrap();
    }
    for i in 0..hosts {
        b.node(&format!("h{i}"), NodeKind::Host).unwrap();
    }
    let delay = SimTime::from_millis(1);
    let mut edges = HashSet::new();
    for i in 1..routers {
        let j = rng.random_range(0..i);
        edges.insert((j, i));
    }
    for i in 0..routers {
        for j in i + 1..routers {
            if rng.random_bool(0.3) {
                edges.insert((i, j));
            }
        }
    }
    let mut edges: Vec<_> = edges.into_iter().collect();
    edges.sort();
    for (i, j) in edges {
        b.link(&format!("r{i}"), &format!("r{j}"), TRUNK_KBPS, delay).unwrap();
    }
    for h in 0..hosts {
        let r = rng.random_range(0..routers);
        b.link(&format!("h{h}"), &format!("r{r}"), TRUNK_KBPS, delay).unwrap();
    }
    b.build().unwrap()
}

pub fn host_addresses(t: &Topology) -> Vec<Address> {
    t.hosts().map(|h| h.address).collect()
}

pub fn addr(t: &Topology, name: &str) -> Address {
    t.node(t.node_by_name(name).unwrap()).address
}

/// One call per ordered host pair, spaced far enough apart that each
/// flood runs on an otherwise idle network.
pub fn sequential_pair_calls(t: &Topology, spacing: SimTime, hold: SimTime, qos: QosSpec) -> Vec<CallSpec> {
    let hosts = host_addresses(t);
    let mut calls = Vec::new();
    for &s in &hosts {
        for &d in &hosts {
            if s != d {
                calls.push(CallSpec {
                    at: spacing * (calls.len() as u64 + 1),
                    source: s,
                    destination: d,
                    qos,
                    hold: Some(hold),
                });
            }
        }
    }
    calls
}

/// Nodes visited by `path` starting at `source`; `None` if a link does
/// not touch the current node.
pub fn path_nodes(t: &Topology, source: NodeId, path: &[LinkId]) -> Option<Vec<NodeId>> {
    let mut nodes = vec![source];
    let mut here = source;
    for &l in path {
        let link = t.link(l);
        if !link.touches(here) {
            return None;
        }
        here = link.other(here);
        nodes.push(here);
    }
    Some(nodes)
}

pub fn is_simple(nodes: &[NodeId]) -> bool {
    let set: HashSet<_> = nodes.iter().collect();
    set.len() == nodes.len()
}

#[derive(Debug, Default)]
pub struct LoopCheck {
    pub circuits_walked: usize,
    pub paths_checked: usize,
    pub violations: Vec<String>,
    /// Data-plane link sequence of each walked connection.
    pub walks: Vec<(usize, Vec<LinkId>)>,
}

impl LoopCheck {
    pub fn merge(&mut self, other: LoopCheck) {
        self.circuits_walked += other.circuits_walked;
        self.paths_checked += other.paths_checked;
        self.violations.extend(other.violations);
        self.walks.extend(other.walks);
    }
}

/// Walks every live circuit through the routers' forwarding tables and
/// requires each to be a simple path ending at the right host.
pub fn walk_circuits(sim: &Simulation) -> LoopCheck {
    let mut check = LoopCheck::default();
    for i in 0..sim.call_count() {
        match sim.follow_circuit(ConnId(i)) {
            Ok(walk) => {
                check.circuits_walked += 1;
                if !is_simple(&walk.nodes) {
                    check.violations.push(format!("conn {i}: circuit revisits a node"));
                }
                check.walks.push((i, walk.links));
            }
            Err(CircuitError::NotEstablished) => {}
            Err(e) => check.violations.push(format!("conn {i}: {e}")),
        }
    }
    check
}

/// Every established path in the report is a simple path.
pub fn check_report_paths(t: &Topology, report: &SimulationReport) -> LoopCheck {
    let mut check = LoopCheck::default();
    for c in report.connections.iter().filter(|c| c.status.is_established()) {
        check.paths_checked += 1;
        let src = t.node_by_name(&c.source).unwrap();
        match path_nodes(t, src, &c.path) {
            Some(nodes) if is_simple(&nodes) && nodes.last() == t.node_by_name(&c.destination).as_ref() => {}
            _ => check.violations.push(format!("conn {}: path {:?} is not a simple source-destination path", c.id, c.path)),
        }
    }
    check
}

/// Runs to `until`, walks live circuits, then finishes the run and checks
/// the reported paths against both the topology and the walks.
pub fn finish_checked(mut sim: Simulation, until: SimTime) -> (SimulationReport, LoopCheck) {
    sim.run_until(until);
    let mut check = walk_circuits(&sim);
    let topo = sim.topology().clone();
    let report = sim.finish();
    for (i, links) in &check.walks {
        if report.connections[*i].path != *links {
            check.violations.push(format!("conn {i}: data path differs from setup path"));
        }
    }
    check.merge(check_report_paths(&topo, &report));
    (report, check)
}
