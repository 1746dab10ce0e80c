//! File formats, capacity sweeps and reports for the `netcournot` tool.

pub mod instance;
pub mod region;
pub mod report;
pub mod sweep;

pub use instance::{Instance, InstanceError, InstanceFile};
