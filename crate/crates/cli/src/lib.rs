//! HTTP front end and scenario file loading for the `butler` binary.

pub mod files;
pub mod http;
