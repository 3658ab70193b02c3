//! Ridge-graph engine for semi-automatic neuron tracing.
//!
//! A 3D intensity volume is denoised, a discrete gradient is built on its
//! cubical complex, and the 2-saddle/maximum arcs of the Morse-Smale complex
//! are extracted, simplified by persistence and turned into an [`MscGraph`]
//! whose every geometry point belongs to one arc. The graph is then indexed
//! for nearest-point and radius queries ([`spatial`]), weighted by image
//! intensity and searched with A* ([`pathing`]), edited through a tracing
//! [`session`], and scored against reference traces ([`metric`]).
//!
//! The crate is `no_std` (with `alloc`). Enable `std` for `std::error::Error`
//! integration, `parallel` for rayon-backed filtering and gradient
//! construction, and `serde` for serializable domain types.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod geom;
pub mod metric;
pub mod morse;
pub mod pathing;
pub mod session;
pub mod spatial;
pub mod volume;

pub use morse::{MscGraph, NodeKind};
pub use pathing::{PathResult, WeightParams, WeightedGraph};
pub use session::{Reconstruction, Session, TracingContext};
pub use spatial::{GraphLocation, KdIndex};
pub use volume::{FilterParams, NormalizedVolume, ScalarVolume};
