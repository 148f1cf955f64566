// SPDX-License-Identifier: Apache-2.0
//! Connection difficulty metric (CDM) accumulation policies.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::fabric::LinkState;

/// One-byte accumulated route difficulty. 255 is the ceiling.
pub type Cdm = u8;

/// How much a router adds to the CDM when forwarding on a given link.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MetricPolicy {
    /// Every router hop adds exactly 1.
    #[default]
    HopCount,
    /// Adds `1 + floor(load_scale * utilization)` of the outbound link.
    LoadAware { load_scale: f64 },
}

/// Result of applying one increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Increment {
    Next(Cdm),
    /// The sum would not fit in one byte; the CREQ is not forwarded.
    Saturated,
}

impl MetricPolicy {
    pub fn step(&self, link: &LinkState) -> u32 {
        match *self {
            MetricPolicy::HopCount => 1,
            MetricPolicy::LoadAware { load_scale } => {
                1 + (load_scale * link.utilization()).floor() as u32
            }
        }
    }
}

pub fn increment_cdm(cdm: Cdm, policy: &MetricPolicy, link: &LinkState) -> Increment {
    let next = cdm as u32 + policy.step(link);
    if next > Cdm::MAX as u32 {
        Increment::Saturated
    } else {
        Increment::Next(next as Cdm)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid metric `{0}`: expected `hop` or `load:<scale>`")]
pub struct ParseMetricError(String);

impl FromStr for MetricPolicy {
    type Err = ParseMetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "hop" {
            return Ok(MetricPolicy::HopCount);
        }
        if let Some(scale) = s.strip_prefix("load:") {
            return match scale.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(MetricPolicy::LoadAware { load_scale: v }),
                _ => Err(ParseMetricError(s.to_string())),
            };
        }
        Err(ParseMetricError(s.to_string()))
    }
}

impl fmt::Display for MetricPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricPolicy::HopCount => write!(f, "hop"),
            MetricPolicy::LoadAware { load_scale } => write!(f, "load:{load_scale}"),
        }
    }
}
