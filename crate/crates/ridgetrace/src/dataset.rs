//! A loaded volume and graph, ready to serve queries.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use ridgetrace_core::morse::{ridge_graph, GraphParams};
use ridgetrace_core::pathing::{PathError, WeightParams};
use ridgetrace_core::spatial::SpatialError;
use ridgetrace_core::volume::{normalize, preprocess, FilterParams, NormalizedVolume, ScalarVolume};
use ridgetrace_core::TracingContext;

use crate::graph_file::{load_graph, GraphFileError, StoredGraph};
use crate::volume_file::{default_meta_path, load_volume, VolumeFileError};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("volume: {0}")]
    Volume(#[from] VolumeFileError),
    #[error("graph: {0}")]
    Graph(#[from] GraphFileError),
    #[error(transparent)]
    Weights(#[from] PathError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

/// Immutable data shared by every session opened on the same files.
#[derive(Debug)]
pub struct Dataset {
    /// Raw intensities rescaled to [0, 1], for display.
    pub display: NormalizedVolume,
    pub context: Arc<TracingContext>,
}

/// Where a dataset came from; equal sources share one loaded copy.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DatasetSource {
    pub volume: PathBuf,
    pub meta: PathBuf,
    pub graph: PathBuf,
}

impl DatasetSource {
    pub fn new(volume: &Path, meta: Option<&Path>, graph: &Path) -> Self {
        Self {
            volume: volume.to_owned(),
            meta: meta.map_or_else(|| default_meta_path(volume), Path::to_owned),
            graph: graph.to_owned(),
        }
    }
}

impl Dataset {
    /// Weighs `stored` against the preprocessed volume unless it already
    /// carries weights for `wp`.
    pub fn assemble(
        raw: &ScalarVolume,
        stored: StoredGraph,
        filter: &FilterParams,
        wp: &WeightParams,
    ) -> Result<Self, DatasetError> {
        if raw.dims() != stored.graph.dims() {
            return Err(PathError::DimensionMismatch { graph: stored.graph.dims(), volume: raw.dims() }.into());
        }
        let needs_field = !matches!(&stored.weights, Some((eps, _)) if *eps == wp.epsilon);
        let field = if needs_field { normalize(&preprocess(raw, filter)) } else { normalize(raw) };
        let weighted = stored.into_weighted(&field, wp)?;
        Ok(Self { display: normalize(raw), context: Arc::new(TracingContext::new(weighted)?) })
    }

    /// Runs the whole pipeline on a raw volume.
    pub fn build(raw: &ScalarVolume, filter: &FilterParams, gp: &GraphParams, wp: &WeightParams) -> Result<Self, DatasetError> {
        let clean = preprocess(raw, filter);
        let graph = ridge_graph(&clean, gp);
        let weighted = ridgetrace_core::pathing::compute_arc_weights(graph, &normalize(&clean), wp)?;
        Ok(Self { display: normalize(raw), context: Arc::new(TracingContext::new(weighted)?) })
    }

    pub fn open(src: &DatasetSource, filter: &FilterParams, wp: &WeightParams) -> Result<Self, DatasetError> {
        let raw = load_volume(&src.volume, &src.meta)?;
        Self::assemble(&raw, load_graph(&src.graph)?, filter, wp)
    }
}
