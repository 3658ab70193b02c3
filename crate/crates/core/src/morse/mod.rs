//! Discrete Morse theory on voxel grids: gradient, complex, simplification,
//! and the ridge graph built from what survives.

pub mod complex;
pub mod cubical;
pub mod gradient;
pub mod graph;

pub use complex::{MorseComplex, PersistencePair, SimplifyParams};
pub use cubical::{CellId, CubicalGrid};
pub use gradient::{build_gradient, DiscreteGradient};
pub use graph::{build_graph, smooth_polyline, GraphArc, GraphError, GraphNode, MscGraph, NodeKind};

use crate::volume::ScalarVolume;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GraphParams {
    /// Persistence threshold as a fraction of the value range.
    pub persistence: f64,
    pub smooth_iterations: usize,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self { persistence: 0.01, smooth_iterations: 4 }
    }
}

/// Gradient, complex, simplification, graph extraction and smoothing in one
/// call. `v` should already be preprocessed.
pub fn ridge_graph(v: &ScalarVolume, p: &GraphParams) -> MscGraph {
    let g = build_gradient(v);
    let mut mc = MorseComplex::extract(&g);
    drop(g);
    mc.simplify(&SimplifyParams { persistence_threshold: p.persistence });
    build_graph(&mc, v.spacing()).smoothed(p.smooth_iterations)
}
