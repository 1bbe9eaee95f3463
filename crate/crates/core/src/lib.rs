//! Locomotive planning on a cyclic weekly space-time network.

pub mod instance;
pub mod lighttravel;
pub mod milp;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod solver;
pub mod spacetime;
pub mod sweep;
pub mod table;
