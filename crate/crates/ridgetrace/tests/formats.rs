//! Volume and graph files on disk, and datasets assembled from them.

mod support;

use ridgetrace::dataset::{Dataset, DatasetError, DatasetSource};
use ridgetrace::graph_file::{decode_graph, encode_graph, load_graph, save_graph, GraphFileError, StoredGraph};
use ridgetrace::synth::noise_volume;
use ridgetrace::volume_file::{default_meta_path, load_volume, save_volume, Dtype, VolumeFileError};
use ridgetrace_core::morse::{ridge_graph, GraphParams};
use ridgetrace_core::pathing::{compute_arc_weights, PathError, WeightParams};
use ridgetrace_core::volume::{normalize, FilterParams, ScalarVolume};
use support::{small_dataset, small_raw};

#[test]
fn ten_thousand_node_graph_round_trips_through_a_file() {
    let v = noise_volume(99, [88, 88, 64], [0.5, 0.5, 1.5]);
    let g = ridge_graph(&v, &GraphParams { persistence: 0.0, smooth_iterations: 2 });
    assert!(g.nodes().len() >= 10_000, "{} nodes", g.nodes().len());
    let wg = compute_arc_weights(g, &normalize(&v), &WeightParams::default()).unwrap();
    let stored = StoredGraph::from_weighted(&wg);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.rtg");
    save_graph(&stored, &path).unwrap();
    let back = load_graph(&path).unwrap();
    assert_eq!(back, stored);
    // bitwise, including every prefix sum
    let bits = |s: &StoredGraph| s.weights.as_ref().unwrap().1.iter().flatten().map(|w| w.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&stored));
    assert_eq!(encode_graph(&back), std::fs::read(&path).unwrap());
}

#[test]
fn damaged_graph_files_are_rejected() {
    let stored = StoredGraph::from_weighted(small_dataset().context.weighted());
    let bytes = encode_graph(&stored);
    assert!(matches!(decode_graph(&bytes[..bytes.len() / 2]), Err(GraphFileError::Corrupt(_))));
    let mut flipped = bytes.clone();
    let mid = flipped.len() / 2;
    flipped[mid] ^= 0x10;
    assert!(matches!(decode_graph(&flipped), Err(GraphFileError::Corrupt(_))));
    assert!(matches!(decode_graph(b"PNG\x89...."), Err(GraphFileError::BadMagic)));
}

#[test]
fn volumes_round_trip_in_every_dtype() {
    let dir = tempfile::tempdir().unwrap();
    let v = ScalarVolume::from_fn([5, 4, 3], [0.25, 0.5, 3.0], |x, y, z| (x * 40 + y * 7 + z * 3) as f64).unwrap();
    for dtype in [Dtype::U8, Dtype::U16, Dtype::F32] {
        let path = dir.path().join(format!("v.{dtype}"));
        save_volume(&v, dtype, &path, &default_meta_path(&path)).unwrap();
        let back = load_volume(&path, &default_meta_path(&path)).unwrap();
        assert_eq!(back.dims(), v.dims());
        assert_eq!(back.spacing(), v.spacing());
        let want: Vec<f64> = v.values().iter().map(|&x| if dtype == Dtype::U8 { x.min(255.0) } else { x }).collect();
        assert_eq!(back.values(), &want[..], "{dtype}");
    }
}

#[test]
fn hand_written_headers_load() {
    let dir = tempfile::tempdir().unwrap();
    let (raw, meta) = (dir.path().join("scan.bin"), dir.path().join("scan.txt"));
    std::fs::write(&meta, "# from a microscope export\ndims: 2x2x2\nspacing: 0.3, 0.3, 1.0\ndtype: uint16\nendian: big\n").unwrap();
    let payload: Vec<u8> = (0..8u16).flat_map(|i| (i * 1000).to_be_bytes()).collect();
    std::fs::write(&raw, &payload).unwrap();
    let v = load_volume(&raw, &meta).unwrap();
    assert_eq!(v.values(), &[0.0, 1000.0, 2000.0, 3000.0, 4000.0, 5000.0, 6000.0, 7000.0]);
    assert_eq!(v.get(1, 1, 1), 7000.0);

    std::fs::write(&raw, &payload[..15]).unwrap();
    assert!(matches!(load_volume(&raw, &meta), Err(VolumeFileError::SizeMismatch { expected: 16, actual: 15 })));
}

#[test]
fn opened_datasets_reuse_stored_weights_and_match_a_fresh_build() {
    let dir = tempfile::tempdir().unwrap();
    let (vol, graph) = (dir.path().join("n.raw"), dir.path().join("n.rtg"));
    save_volume(&small_raw(), Dtype::F32, &vol, &default_meta_path(&vol)).unwrap();
    // build from what is on disk, after the f32 rounding
    let raw = load_volume(&vol, &default_meta_path(&vol)).unwrap();
    let built = Dataset::build(&raw, &FilterParams::default(), &GraphParams::default(), &WeightParams::default()).unwrap();

    // weighted file: prefix sums come straight from disk
    save_graph(&StoredGraph::from_weighted(built.context.weighted()), &graph).unwrap();
    let src = DatasetSource::new(&vol, None, &graph);
    let opened = Dataset::open(&src, &FilterParams::default(), &WeightParams::default()).unwrap();
    assert_eq!(opened.context.weighted().prefixes(), built.context.weighted().prefixes());

    // unweighted file: weights are recomputed from the preprocessed volume
    save_graph(&StoredGraph::unweighted(built.context.graph().clone()), &graph).unwrap();
    let opened = Dataset::open(&src, &FilterParams::default(), &WeightParams::default()).unwrap();
    assert_eq!(opened.context.weighted().prefixes(), built.context.weighted().prefixes());
    assert_eq!(opened.display.values(), built.display.values());

    // a different epsilon ignores the stored sums
    save_graph(&StoredGraph::from_weighted(built.context.weighted()), &graph).unwrap();
    let other = Dataset::open(&src, &FilterParams::default(), &WeightParams { epsilon: 0.5 }).unwrap();
    assert_eq!(other.context.weighted().epsilon(), 0.5);
    assert!(other.context.weighted().arc_weight(0) > built.context.weighted().arc_weight(0));
}

#[test]
fn mismatched_volume_and_graph_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let built = small_dataset();
    let graph = dir.path().join("n.rtg");
    save_graph(&StoredGraph::from_weighted(built.context.weighted()), &graph).unwrap();
    let vol = dir.path().join("other.raw");
    let other = ScalarVolume::new([6, 6, 6], [1.0; 3], vec![1.0; 216]).unwrap();
    save_volume(&other, Dtype::U8, &vol, &default_meta_path(&vol)).unwrap();
    let err = Dataset::open(&DatasetSource::new(&vol, None, &graph), &FilterParams::default(), &WeightParams::default()).unwrap_err();
    assert!(matches!(err, DatasetError::Weights(PathError::DimensionMismatch { volume: [6, 6, 6], .. })), "{err}");
}
