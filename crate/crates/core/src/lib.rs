//! Distributed shallow water solver on a periodic C-grid.
//!
//! The grid is split into `h × w` rectangular blocks, one per rank. Ranks
//! exchange one-cell halos each half step, either over in-process channels or
//! TCP, and ranks are placed on devices so links are local or remote. Inside a
//! rank, `t` worker threads sweep contiguous row bands. The autotuner searches
//! `(t, h)` for the best throughput on a fixed core budget.

pub mod autotune;
pub mod cli;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod reference;
pub mod runner;
pub mod topology;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{BlockExtent, Field, GridSpec};
pub use kernel::InitialCondition;
pub use topology::{DeviceAssignment, LinkClass, Placement, RankTopology};
pub use transport::fabric::FabricModel;
pub use transport::Backend;
