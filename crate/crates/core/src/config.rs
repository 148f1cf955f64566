// SPDX-License-Identifier: Apache-2.0
//! Scenario files: `key = value` lines, `#` comments.
//!
//! ```text
//! duration_s = 2000
//! call_rate = 50
//! metric = load:4
//! ```

use std::str::FromStr;

use thiserror::Error;

use crate::engine::{PoissonTraffic, SimConfig, SimTime};
use crate::host::DegradePolicy;
use crate::wire::QosSpec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sim: SimConfig,
    pub traffic: PoissonTraffic,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            sim: SimConfig::default(),
            traffic: PoissonTraffic {
                call_rate: 10.0,
                hold_mean: Some(30.0),
                qos: QosSpec::new(64, 100),
                pairs: None,
            },
        }
    }
}

pub const KEYS: &[&str] = &[
    "duration_s",
    "seed",
    "call_rate",
    "hold_mean_s",
    "qos_bw_kbps",
    "qos_delay_ms",
    "metric",
    "window_tw_ms",
    "retry_timeout_ms",
    "max_retries",
    "degrade_policy",
    "flood_queue_capacity",
    "audit_interval_ms",
    "warmup_s",
];

fn num<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("invalid number {v:?}"))
}

fn non_negative(v: &str) -> Result<f64, String> {
    let x: f64 = num(v)?;
    if x.is_finite() && x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("expected a non-negative number, got {v:?}"))
    }
}

fn millis(v: &str) -> Result<SimTime, String> {
    Ok(SimTime::from_secs_f64(non_negative(v)? / 1e3))
}

/// `auto` leaves the value to be derived from the topology.
fn auto_millis(v: &str) -> Result<Option<SimTime>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        millis(v).map(Some)
    }
}

fn apply(s: &mut Scenario, key: &str, v: &str) -> Result<(), String> {
    match key {
        "duration_s" => s.sim.duration = SimTime::from_secs_f64(non_negative(v)?),
        "seed" => s.sim.seed = num(v)?,
        "call_rate" => s.traffic.call_rate = non_negative(v)?,
        "hold_mean_s" => {
            s.traffic.hold_mean = match v {
                "inf" => None,
                _ => match non_negative(v)? {
                    x if x > 0.0 => Some(x),
                    _ => return Err("hold_mean_s must be positive or inf".into()),
                },
            }
        }
        "qos_bw_kbps" => match num::<u16>(v)? {
            0 => return Err("qos_bw_kbps must be positive".into()),
            bw => s.traffic.qos.bandwidth_kbps = bw,
        },
        "qos_delay_ms" => s.traffic.qos.max_delay_ms = num(v)?,
        "metric" => s.sim.metric = v.parse().map_err(|e| format!("{e}"))?,
        "window_tw_ms" => s.sim.window = auto_millis(v)?,
        "retry_timeout_ms" => s.sim.retry_timeout = auto_millis(v)?,
        "max_retries" => s.sim.max_retries = num(v)?,
        "degrade_policy" => {
            s.sim.degrade_policy = match v {
                "accept" => DegradePolicy::AcceptLower,
                "retry" => DegradePolicy::RetryOnDegrade,
                _ => return Err(format!("degrade_policy must be accept or retry, got {v:?}")),
            }
        }
        "flood_queue_capacity" => match num::<usize>(v)? {
            0 => return Err("flood_queue_capacity must be positive".into()),
            c => s.sim.flood_queue_capacity = c,
        },
        "audit_interval_ms" => {
            s.sim.audit_interval = match v {
                "off" => None,
                _ => match millis(v)? {
                    SimTime::ZERO => return Err("audit_interval_ms must be positive or off".into()),
                    t => Some(t),
                },
            }
        }
        "warmup_s" => s.sim.warmup = SimTime::from_secs_f64(non_negative(v)?),
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let mut s = Scenario::default();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |msg: String| ConfigError::Line { line, msg };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, got {content:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if !seen.insert(k.to_string()) {
            return Err(err(format!("duplicate key {k:?}")));
        }
        apply(&mut s, k, v).map_err(err)?;
    }
    validate(&s)?;
    Ok(s)
}

/// Cross-key checks that no single line can catch.
pub fn validate(s: &Scenario) -> Result<(), ConfigError> {
    if let (Some(w), Some(r)) = (s.sim.window, s.sim.retry_timeout) {
        if r <= w {
            return Err(ConfigError::Invalid(
                "retry_timeout_ms must exceed window_tw_ms".into(),
            ));
        }
    }
    if s.sim.window == Some(SimTime::ZERO) {
        return Err(ConfigError::Invalid("window_tw_ms must be positive".into()));
    }
    if s.sim.warmup > s.sim.duration {
        return Err(ConfigError::Invalid("warmup_s exceeds duration_s".into()));
    }
    Ok(())
}

impl FromStr for Scenario {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_scenario(s)
    }
}
