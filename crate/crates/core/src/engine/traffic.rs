// SPDX-License-Identifier: Apache-2.0

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::SimTime;
use crate::host::DegradePolicy;
use crate::metric::MetricPolicy;
use crate::wire::{Address, QosSpec};

/// One call placed at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct CallSpec {
    pub at: SimTime,
    pub source: Address,
    pub destination: Address,
    pub qos: QosSpec,
    /// `None` keeps the connection up until the run ends.
    pub hold: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonTraffic {
    /// Calls per second, network-wide.
    pub call_rate: f64,
    /// Mean holding time in seconds; `None` never releases.
    pub hold_mean: Option<f64>,
    pub qos: QosSpec,
    /// Ordered source/destination pairs to draw from uniformly. `None`
    /// means every ordered pair of distinct hosts.
    pub pairs: Option<Vec<(Address, Address)>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum TrafficModel {
    #[default]
    Idle,
    Poisson(PoissonTraffic),
    Scripted(Vec<CallSpec>),
}

pub(crate) struct CallDraw {
    pub pair: usize,
    pub hold: Option<SimTime>,
}

impl PoissonTraffic {
    pub(crate) fn next_gap(&self, rng: &mut impl Rng) -> Option<SimTime> {
        if self.call_rate <= 0.0 {
            return None;
        }
        let exp = Exp::new(self.call_rate).ok()?;
        // a zero gap would stall the clock on one instant; floor at 1 ns
        Some(SimTime::from_secs_f64(exp.sample(rng)).max(SimTime::from_nanos(1)))
    }

    pub(crate) fn draw(&self, pairs: usize, rng: &mut impl Rng) -> CallDraw {
        let pair = rng.random_range(0..pairs);
        let hold = self.hold_mean.map(|mean| {
            let exp = Exp::new(1.0 / mean).expect("validated positive mean");
            SimTime::from_secs_f64(exp.sample(rng))
        });
        CallDraw { pair, hold }
    }
}

/// Protocol and run parameters shared by every node.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub duration: SimTime,
    pub seed: u64,
    pub metric: MetricPolicy,
    /// Destination window; `None` derives it from the topology.
    pub window: Option<SimTime>,
    /// Source retry timeout; `None` is four windows.
    pub retry_timeout: Option<SimTime>,
    pub max_retries: u32,
    pub degrade_policy: DegradePolicy,
    pub flood_queue_capacity: usize,
    /// Period of the consistency audit and utilization sampling.
    pub audit_interval: Option<SimTime>,
    /// Link cell counters ignore transmissions before this time.
    pub warmup: SimTime,
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration: SimTime::from_secs(10),
            seed: 1,
            metric: MetricPolicy::HopCount,
            window: None,
            retry_timeout: None,
            max_retries: 3,
            degrade_policy: DegradePolicy::AcceptLower,
            flood_queue_capacity: crate::flood_queue::DEFAULT_CAPACITY,
            audit_interval: Some(SimTime::from_secs(1)),
            warmup: SimTime::ZERO,
            trace: false,
        }
    }
}
