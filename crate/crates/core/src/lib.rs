//! Exact solver for the network migration problem: scheduling circuit
//! upgrades across maintenance windows with region-local technicians at
//! minimum labour cost.

pub mod cli;
pub mod colgen;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod instance;
pub mod lbbd;
pub mod lp;
pub mod mip;
pub mod oracle;
pub mod plan;
pub mod pricing;
pub mod report;

pub use error::{MigrateError, Result};
