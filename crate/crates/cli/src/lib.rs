//! Configuration, file formats and experiment pipelines behind the
//! `alphait` binary.

pub mod config;
pub mod experiments;
pub mod io;
