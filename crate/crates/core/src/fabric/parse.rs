// SPDX-License-Identifier: Apache-2.0
//! Line-oriented topology documents.
//!
//! ```text
//! # comment
//! node r1 router
//! node h1 host
//! link h1 r1 capacity_kbps=155000 delay_ms=1
//! ```

use super::{NodeKind, Topology, TopologyBuilder, TopologyError};
use crate::engine::SimTime;

fn parse_err(line: usize, msg: impl Into<String>) -> TopologyError {
    TopologyError::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn load_topology(text: &str) -> Result<Topology, TopologyError> {
    let mut b = TopologyBuilder::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        match words[0] {
            "node" => {
                let [_, name, kind] = words[..] else {
                    return Err(parse_err(line, "expected `node <name> router|host`"));
                };
                let kind = match kind {
                    "router" => NodeKind::Router,
                    "host" => NodeKind::Host,
                    other => return Err(parse_err(line, format!("unknown node kind `{other}`"))),
                };
                b.node(name, kind).map_err(|e| at_line(e, line))?;
            }
            "link" => {
                if words.len() < 3 {
                    return Err(parse_err(
                        line,
                        "expected `link <a> <b> capacity_kbps=<int> delay_ms=<int>`",
                    ));
                }
                let (mut capacity, mut delay) = (None, None);
                for attr in &words[3..] {
                    let (k, v) = attr
                        .split_once('=')
                        .ok_or_else(|| parse_err(line, format!("expected key=value, got `{attr}`")))?;
                    let n: u32 = v
                        .parse()
                        .map_err(|_| parse_err(line, format!("`{k}` must be a non-negative integer")))?;
                    match k {
                        "capacity_kbps" => capacity = Some(n),
                        "delay_ms" => delay = Some(n),
                        _ => return Err(parse_err(line, format!("unknown link attribute `{k}`"))),
                    }
                }
                let capacity = capacity.ok_or_else(|| parse_err(line, "missing capacity_kbps"))?;
                let delay = delay.ok_or_else(|| parse_err(line, "missing delay_ms"))?;
                b.link(words[1], words[2], capacity, SimTime::from_millis(delay as u64))
                    .map_err(|e| at_line(e, line))?;
            }
            other => return Err(parse_err(line, format!("unknown directive `{other}`"))),
        }
    }
    b.build()
}

// Validation errors keep their kind; the line goes into the message.
fn at_line(e: TopologyError, line: usize) -> TopologyError {
    match e {
        TopologyError::Validation(msg) => TopologyError::Validation(format!("line {line}: {msg}")),
        other => other,
    }
}
