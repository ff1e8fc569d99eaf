//! Distributed fault-tolerant formation control with prescribed performance
//! for a heterogeneous UAV-UGV team over a directed communication graph.
//!
//! The crate simulates a virtual leader, quadrotor followers and differential
//! drive ground robots. Each follower runs a distributed leader-state observer
//! whose neighborhood error is confined to a shrinking performance corridor,
//! and a sliding-mode formation controller with a variable corridor that widens
//! under actuator saturation. Communication link weights can be perturbed by
//! seeded, time-windowed faults.
//!
//! Module map:
//! - [`graph`]: directed topology, link-fault injection, faulted Laplacian algebra.
//! - [`ppc`]: performance boundary functions and barrier error transformations.
//! - [`observer`]: distributed leader-state observer and its virtual laws.
//! - [`controller`]: sliding-mode tracking controller, anti-windup auxiliary
//!   system, saturation, and the maps to physical UAV/UGV inputs.
//! - [`dynamics`]: plants (leader, quadrotor, ground robot) and the shared
//!   fixed-step integrator.
//! - [`scenario`]: configuration, orchestration, metrics and trace export.

pub mod controller;
pub mod dynamics;
pub mod graph;
pub mod observer;
pub mod ppc;
pub mod scenario;
