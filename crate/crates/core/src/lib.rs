//! Pull/push coexistence with content-based wake-up radios.
//!
//! A frame of `L` uplink slots is split into slots reserved for pull nodes
//! (woken by a range query carried in the wake-up signal) and slots shared
//! with push nodes. Everything contends with slotted p-persistent access.
//!
//! - [`model`]: parameters, frame split, observation model.
//! - [`chain`]: absorbing Markov chain of the contention process.
//! - [`metrics`]: closed-form `γ_w`, `γ_u`, `E_tot` and the Round-Robin baseline.
//! - [`sim`]: frame-level Monte Carlo simulator.
//! - [`opt`]: grid searches for the maximum arrival rate and the
//!   energy-optimal split.
//! - [`cli`]: the experiment runner behind the `cowu` binary.

pub mod chain;
mod combin;
pub mod error;
pub mod metrics;
pub mod model;

pub use error::{Error, Result};
pub use model::{make_frame_split, FrameSplit, QueryRange, SystemConfig, SystemParams};
pub mod opt;
pub mod sim;
pub mod cli;
