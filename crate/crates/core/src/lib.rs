// SPDX-License-Identifier: Apache-2.0
//! Flood Routing connection establishment.
//!
//! Routers hold no routing tables. A source floods a connection request
//! (CREQ) whose cumulative distance metric grows hop by hop; the
//! destination answers the best copy with a connection accept (CACC) that
//! retraces the request's path, reserving bandwidth and installing a
//! virtual circuit at every router.

pub mod config;
pub mod engine;
pub mod fabric;
pub mod flood_queue;
pub mod host;
pub mod metric;
pub mod metrics;
pub mod oracle;
pub mod router;
pub mod wire;
