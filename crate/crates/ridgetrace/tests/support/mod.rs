//! Datasets shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use ridgetrace::dataset::Dataset;
use ridgetrace::synth::{neurite_volume, TubeParams};
use ridgetrace_core::morse::GraphParams;
use ridgetrace_core::pathing::WeightParams;
use ridgetrace_core::volume::{FilterParams, ScalarVolume};

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// The dataset the golden interaction log was recorded on.
pub fn golden_dataset() -> Dataset {
    let raw = neurite_volume(2024, [64, 64, 40], [0.8, 0.8, 2.0], 3, &TubeParams::default());
    Dataset::build(&raw, &FilterParams::default(), &GraphParams::default(), &WeightParams::default()).unwrap()
}

/// A small anisotropic volume with a few branching neurites.
pub fn small_raw() -> ScalarVolume {
    neurite_volume(5, [40, 36, 20], [1.0, 1.0, 2.0], 2, &TubeParams::default())
}

pub fn small_dataset() -> Dataset {
    Dataset::build(&small_raw(), &FilterParams::default(), &GraphParams::default(), &WeightParams::default()).unwrap()
}
