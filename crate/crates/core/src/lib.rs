//! Optimal disclosure-incentive mechanisms for a principal and an agent who
//! privately observes the arrival of a better technology.
//!
//! The modules follow the solver pipeline: [`frontier`] holds the utility
//! possibility frontiers and structural constants, [`distribution`] the
//! breakthrough-time laws, [`mechanism`] step mechanisms and their payoffs,
//! [`deadline`] and [`euler`] the two solvers, [`oracle`] a discrete-time
//! brute force, and [`insurance`] the unemployment-insurance application.

pub mod cli;
pub mod config;
pub mod deadline;
pub mod distribution;
pub mod euler;
pub mod fixtures;
pub mod frontier;
pub mod insurance;
pub mod mechanism;
pub mod numeric;
pub mod oracle;
pub mod report;
