//! Open-world household task planning.

pub mod executor;
pub mod goal;
pub mod kb;
pub mod parser;
pub mod planner;
pub mod service;
pub mod sim;
pub mod trace;
