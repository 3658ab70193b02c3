mod common;

use common::{random_graph, random_weights, tree_reference};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ridgetrace_core::geom::Vec3;
use ridgetrace_core::metric::{deviation_map, extract_guide_points, replay, score, MetricError, ScoreParams};
use ridgetrace_core::session::{Reconstruction, TraceKind, TracingContext};

/// Point-to-segment distance by clamped projection, written independently.
fn seg_dist(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab: Vec<f64> = (0..3).map(|i| b[i] - a[i]).collect();
    let ap: Vec<f64> = (0..3).map(|i| p[i] - a[i]).collect();
    let len2: f64 = ab.iter().map(|x| x * x).sum();
    let t = if len2 == 0.0 { 0.0 } else { (ab.iter().zip(&ap).map(|(x, y)| x * y).sum::<f64>() / len2).clamp(0.0, 1.0) };
    (0..3).map(|i| (a[i] + t * ab[i] - p[i]).powi(2)).sum::<f64>().sqrt()
}

fn random_tree(rng: &mut impl Rng, n: usize) -> Reconstruction {
    let mut rec = Reconstruction::new();
    let mut ids = Vec::new();
    for i in 0..n {
        let parent = if i == 0 || rng.gen_bool(0.05) { None } else { Some(ids[rng.gen_range(0..ids.len())]) };
        let p = [rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0), rng.gen_range(0.0..20.0)];
        ids.push(rec.append_chain(parent, &[p], TraceKind::Manual).unwrap()[0]);
    }
    rec
}

/// Root at the origin with eight straight branches of equal length.
fn star() -> Reconstruction {
    let mut r = Reconstruction::new();
    let root = r.append_chain(None, &[[0.0; 3]], TraceKind::Manual).unwrap()[0];
    for b in 0..8 {
        let a = b as f64 * std::f64::consts::TAU / 8.0;
        let pts: Vec<Vec3> = (1..=6).map(|s| [3.0 * s as f64 * a.cos(), 3.0 * s as f64 * a.sin(), 0.0]).collect();
        r.append_chain(Some(root), &pts, TraceKind::Manual).unwrap();
    }
    r
}

#[test]
fn deviation_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10 {
        let reference = random_tree(&mut rng, 80);
        let cand = random_tree(&mut rng, 60);
        let got = deviation_map(&cand, &reference).unwrap();
        assert_eq!(got.len(), cand.len());
        for (id, d) in got {
            let p = cand.node(id).unwrap().position;
            let want = reference
                .nodes()
                .map(|n| {
                    let q = n.parent.map_or(n.position, |par| reference.node(par).unwrap().position);
                    seg_dist(p, q, n.position)
                })
                .fold(f64::INFINITY, f64::min);
            assert!((d - want).abs() <= 1e-6, "{d} vs {want}");
        }
    }
    let r = random_tree(&mut rng, 10);
    assert!(deviation_map(&r, &r).unwrap().iter().all(|&(_, d)| d == 0.0));
    assert_eq!(deviation_map(&r, &Reconstruction::new()), Err(MetricError::EmptyReference));
}

#[test]
fn missing_one_of_eight_branches_scores_seven_eighths() {
    let reference = star();
    let p = ScoreParams::default();
    assert_eq!(score(&reference, &reference, &p).score, 1.0);
    assert_eq!(score(&Reconstruction::new(), &reference, &p).score, 0.0);
    for missing in 0..8u64 {
        let first = 2 + 6 * missing;
        let keep = reference.nodes().filter(|n| !(first..first + 6).contains(&n.id)).cloned().collect();
        let r = score(&Reconstruction::from_nodes(keep).unwrap(), &reference, &p);
        assert!((r.score - 0.875).abs() <= 1e-3, "branch {missing}: {}", r.score);
    }
}

#[test]
fn removing_matched_weight_strictly_lowers_the_score() {
    let reference = star();
    let p = ScoreParams::default();
    let mut last = 1.0;
    for cut in 1..=8u64 {
        let keep = reference.nodes().filter(|n| n.id < 2 || n.id >= 2 + 6 * cut).cloned().collect();
        let s = score(&Reconstruction::from_nodes(keep).unwrap(), &reference, &p).score;
        assert!(s < last, "cut {cut}: {s} !< {last}");
        last = s;
    }
    assert_eq!(last, 0.0);
}

#[test]
fn score_is_reference_anchored_and_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..20 {
        let a = random_tree(&mut rng, 40);
        let b = random_tree(&mut rng, 40);
        let s = score(&a, &b, &ScoreParams::default()).score;
        assert!((0.0..=1.0).contains(&s));
        assert_eq!(score(&a, &a, &ScoreParams::default()).score, 1.0);
    }
}

#[test]
fn guide_segments_cover_every_edge_once() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..10 {
        let r = random_tree(&mut rng, 100);
        let segs = extract_guide_points(&r).unwrap();
        let mut covered = std::collections::BTreeMap::new();
        for s in &segs {
            let mut cur = s.end_node;
            while cur != s.start_node {
                *covered.entry(cur).or_insert(0) += 1;
                cur = r.node(cur).unwrap().parent.expect("segment climbs to its start");
            }
        }
        let edges: Vec<u64> = r.nodes().filter(|n| n.parent.is_some()).map(|n| n.id).collect();
        assert_eq!(covered.keys().copied().collect::<Vec<_>>(), edges);
        assert!(covered.values().all(|&c| c == 1));
    }
}

#[test]
fn replay_of_a_graph_aligned_reference_is_exact_and_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for trial in 0..5 {
        let g = random_graph(&mut rng, 60, 0, 1, [0.5, 0.5, 1.5]);
        let wg = random_weights(&mut rng, g, 1e-3);
        let reference = tree_reference(wg.graph(), trial);
        let ctx = TracingContext::new(wg).unwrap();
        let segs = extract_guide_points(&reference).unwrap();
        let mut t = 0.0;
        let rep = replay(&ctx, &segs, &mut || {
            t += 1.0;
            t
        });
        assert!(rep.failed.is_empty());
        assert_eq!(rep.segment_seconds.len(), segs.len());
        let mut want: Vec<[u64; 3]> = reference.nodes().map(|n| n.position.map(f64::to_bits)).collect();
        let mut got: Vec<[u64; 3]> = rep.reconstruction.nodes().map(|n| n.position.map(f64::to_bits)).collect();
        want.sort_unstable();
        got.sort_unstable();
        assert_eq!(got, want);
        assert_eq!(score(&rep.reconstruction, &reference, &ScoreParams::default()).score, 1.0);
        let again = extract_guide_points(&rep.reconstruction).unwrap();
        let ends = |s: &[ridgetrace_core::metric::GuideSegment]| {
            let mut v: Vec<_> = s.iter().map(|s| (s.start.map(f64::to_bits), s.end.map(f64::to_bits))).collect();
            v.sort_unstable();
            v
        };
        assert_eq!(ends(&again), ends(&segs));
    }
}
