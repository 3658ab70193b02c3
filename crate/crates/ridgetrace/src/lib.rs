//! File formats, the HTTP service and command-line plumbing around
//! [`ridgetrace_core`].

pub mod dataset;
pub mod graph_file;
pub mod service;
pub mod slice;
pub mod swc;
pub mod synth;
pub mod volume_file;

pub use ridgetrace_core as core;
