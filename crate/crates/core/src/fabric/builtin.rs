// SPDX-License-Identifier: Apache-2.0
//! Generated topologies.
//!
//! Router-only families (`line`, `ring`, `grid`, `star`) attach one host
//! `h<i>` to every router `r<i>` so that connections can be placed on them.

use super::{NodeKind, Topology, TopologyBuilder, TopologyError};
use crate::engine::SimTime;

pub const BUILTIN_NAMES: &[&str] = &["paper_sim", "fig6", "line:<n>", "ring:<n>", "grid:<w>x<h>", "star:<n>"];

const TRUNK_KBPS: u32 = 155_000;
const FIG6_KBPS: u32 = 10_000;

fn ms(v: u64) -> SimTime {
    SimTime::from_millis(v)
}

pub fn builtin(spec: &str) -> Result<Topology, TopologyError> {
    let unknown = || TopologyError::UnknownBuiltin(spec.to_string());
    let (family, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let count = |min: usize| -> Result<usize, TopologyError> {
        match arg.parse::<usize>() {
            Ok(n) if n >= min => Ok(n),
            _ => Err(unknown()),
        }
    };
    match family {
        "paper_sim" if arg.is_empty() => paper_sim(),
        "fig6" if arg.is_empty() => fig6(),
        "line" => {
            let n = count(1)?;
            with_hosts(n, (1..n).map(|i| (i - 1, i)))
        }
        "ring" => {
            let n = count(3)?;
            with_hosts(n, (0..n).map(|i| (i, (i + 1) % n)))
        }
        "star" => {
            let n = count(2)?;
            with_hosts(n, (1..n).map(|i| (0, i)))
        }
        "grid" => {
            let (w, h) = arg.split_once('x').ok_or_else(unknown)?;
            let (w, h): (usize, usize) = match (w.parse(), h.parse()) {
                (Ok(w), Ok(h)) if w >= 1 && h >= 1 => (w, h),
                _ => return Err(unknown()),
            };
            let mut edges = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    if x + 1 < w {
                        edges.push((i, i + 1));
                    }
                    if y + 1 < h {
                        edges.push((i, i + w));
                    }
                }
            }
            with_hosts(w * h, edges.into_iter())
        }
        _ => Err(unknown()),
    }
}

fn with_hosts(
    routers: usize,
    edges: impl Iterator<Item = (usize, usize)>,
) -> Result<Topology, TopologyError> {
    let mut b = TopologyBuilder::new();
    for i in 1..=routers {
        b.node(&format!("r{i}"), NodeKind::Router)?;
    }
    for i in 1..=routers {
        b.node(&format!("h{i}"), NodeKind::Host)?;
    }
    for (x, y) in edges {
        b.link(&format!("r{}", x + 1), &format!("r{}", y + 1), TRUNK_KBPS, ms(1))?;
    }
    for i in 1..=routers {
        b.link(&format!("h{i}"), &format!("r{i}"), TRUNK_KBPS, ms(1))?;
    }
    b.build()
}

/// Five switches, nine hosts, sixteen links: a five-switch ring with two
/// chords (seven trunks, every one on a cycle) and nine access links.
fn paper_sim() -> Result<Topology, TopologyError> {
    let mut b = TopologyBuilder::new();
    for i in 1..=5 {
        b.node(&format!("s{i}"), NodeKind::Router)?;
    }
    for i in 1..=9 {
        b.node(&format!("h{i}"), NodeKind::Host)?;
    }
    for (x, y) in [(1, 2), (2, 3), (3, 4), (4, 5), (5, 1), (1, 3), (2, 4)] {
        b.link(&format!("s{x}"), &format!("s{y}"), TRUNK_KBPS, ms(1))?;
    }
    let homes = [1, 1, 2, 2, 3, 3, 4, 4, 5];
    for (h, s) in homes.iter().enumerate() {
        b.link(&format!("h{}", h + 1), &format!("s{s}"), TRUNK_KBPS, ms(1))?;
    }
    b.build()
}

/// Multipath example: subnet 1 router `a` joins `hub` over three parallel
/// links; `hub` reaches subnet 2 router `z` through three exterior routers.
/// Hosts `a1..a3` sit on `a`, `z1..z3` on `z`.
fn fig6() -> Result<Topology, TopologyError> {
    let mut b = TopologyBuilder::new();
    for r in ["a", "hub", "x1", "x2", "x3", "z"] {
        b.node(r, NodeKind::Router)?;
    }
    for h in ["a1", "a2", "a3", "z1", "z2", "z3"] {
        b.node(h, NodeKind::Host)?;
    }
    for _ in 0..3 {
        b.link("a", "hub", FIG6_KBPS, ms(1))?;
    }
    for x in ["x1", "x2", "x3"] {
        b.link("hub", x, FIG6_KBPS, ms(1))?;
        b.link(x, "z", FIG6_KBPS, ms(1))?;
    }
    for h in ["a1", "a2", "a3"] {
        b.link(h, "a", FIG6_KBPS, ms(1))?;
    }
    for h in ["z1", "z2", "z3"] {
        b.link(h, "z", FIG6_KBPS, ms(1))?;
    }
    b.build()
}
