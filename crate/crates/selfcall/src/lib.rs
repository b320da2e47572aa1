//! File formats, service clients, the worker pool and the staged pipeline
//! around [`selfcall_core`].

pub mod config;
pub mod eval;
pub mod formats;
pub mod http;
pub mod manifest;
pub mod models;
pub mod pool;
pub mod stages;

pub use selfcall_core as core;

pub use crate::config::PipelineConfig;
pub use crate::stages::{run_all, run_annotate, run_execute, run_filter_merge};
