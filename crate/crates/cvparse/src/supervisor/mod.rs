//! Priority-ordered process supervision: config, daemon and control client.

pub mod config;
pub mod ctl;
pub mod daemon;

pub use config::{ProgramSpec, SupervisorConfig};
pub use daemon::{ProgramState, Supervisor, SupervisorError, SupervisorOptions};
