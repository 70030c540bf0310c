//! Analysis toolkit for p,k-Shufflecast fabrics: optical multicast
//! networks that connect top-of-rack switches through passive 1:p
//! splitters in a digit-shift pattern.
//!
//! The crate covers the full pipeline: topology construction and logical
//! id math ([`topology`]), static multicast-aware routing and per-source
//! trees ([`routing`]), rule compilation, group membership and
//! single-relay failure recovery ([`control`]), failure impact / latency /
//! throughput analyses ([`fault`]), power and capital cost comparisons
//! against peer-to-peer chains and packet-switched multicast cores
//! ([`cost`]), and a flow-level max-min fair-share simulator ([`flowsim`]).
//!
//! The `shufflecast` binary wires everything into a CLI that emits JSON
//! and CSV for plotting.
//!
//! ```
//! use shufflecast::control::NetworkState;
//! use shufflecast::routing::multicast_tree;
//! use shufflecast::{Params, Topology};
//!
//! # fn main() -> shufflecast::Result<()> {
//! // A 2,3 fabric: 24 ToRs in 3 columns behind 1:2 splitters.
//! let topo = Topology::new(Params::new(2, 3)?);
//! let tree = multicast_tree(&topo, 0)?;
//! assert_eq!(tree.relays().len(), 12); // k * p^(k-1)
//! assert_eq!(tree.max_depth(), 5); // 2k - 1
//!
//! // Fail a relay, reroute, and check that every ToR is still reached.
//! let mut net = NetworkState::new(topo)?;
//! net.recover_single_failure(8)?;
//! assert_eq!(net.reachable_set(0)?.len(), 24);
//! # Ok(())
//! # }
//! ```

pub mod control;
pub mod cost;
pub mod error;
pub mod fault;
pub mod flowsim;
pub mod routing;
pub mod topology;

pub use error::{Error, Result};
pub use topology::{Params, Topology, TorId};
