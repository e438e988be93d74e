//! Deterministic hybrid simulator for fully inverter-based islanded microgrids.
//!
//! The plant is a continuous-time electromagnetic model of converter-interfaced
//! generators (CIGs) with LC output filters, RL distribution lines and RL loads,
//! coupled through a virtual-shunt nodal network. On top of it run two
//! controller families:
//!
//! * the tunable scheme: Q-ω droop, pinned distributed secondary frequency
//!   control over periodic messages, dynamic-average-consensus voltage
//!   regulation with a shared discrete PI, and a triggered per-CIG individual
//!   voltage controller (partial or exact mode);
//! * a conventional P-ω / Q-V droop baseline with continuous-communication
//!   secondary layers (`pfqv`).
//!
//! Everything is driven from scenario files by a fixed-step RK4 engine with
//! two discrete clocks (a communication period `t1` and a sampling period
//! `t2`) plus a scheduled event list. Runs are single-threaded and
//! bit-reproducible.

pub mod comm;
pub mod engine;
pub mod error;
pub mod frames;
pub mod freq_control;
pub mod inner_control;
pub mod pfqv;
pub mod plant;
pub mod scenario;
pub mod trace;
pub mod voltage_reg;

pub use error::{ConfigError, SimError};
pub use frames::{FrameAngle, Vec2};
