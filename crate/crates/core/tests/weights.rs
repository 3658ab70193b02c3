mod common;

use common::{random_graph, rel_close, trapezoid_oracle};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ridgetrace_core::morse::MscGraph;
use ridgetrace_core::pathing::{compute_arc_weights, WeightParams};
use ridgetrace_core::volume::{normalize, NormalizedVolume, ScalarVolume};

/// Random intensities with one voxel pinned to 0 and one to 1, so
/// normalization leaves the values unchanged.
fn random_volume(rng: &mut impl Rng, g: &MscGraph) -> NormalizedVolume {
    let d = g.dims();
    let mut vals: Vec<f64> = (0..d[0] * d[1] * d[2]).map(|_| rng.gen()).collect();
    vals[0] = 0.0;
    vals[1] = 1.0;
    normalize(&ScalarVolume::new(d, g.spacing(), vals).unwrap())
}

#[test]
fn partial_weights_match_direct_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..4 {
        let g = random_graph(&mut rng, 60, 30, 1, [0.3, 0.3, 1.7]);
        let v = random_volume(&mut rng, &g);
        let eps = 1e-3;
        let wg = compute_arc_weights(g, &v, &WeightParams { epsilon: eps }).unwrap();
        let g = wg.graph();
        for (ai, a) in g.arcs().iter().enumerate() {
            let ai = ai as u32;
            let last = a.points.len() - 1;
            let whole = trapezoid_oracle(&a.points, g.spacing(), v.values(), v.dims(), eps);
            assert!(rel_close(wg.arc_weight(ai), whole, 1e-12));
            for i in 0..=last {
                let left = trapezoid_oracle(&a.points[..=i], g.spacing(), v.values(), v.dims(), eps);
                let right = trapezoid_oracle(&a.points[i..], g.spacing(), v.values(), v.dims(), eps);
                assert!(rel_close(wg.partial_weight(ai, 0, i as u32), left, 1e-12));
                assert!(rel_close(wg.partial_weight(ai, i as u32, last as u32), right, 1e-12));
                // splitting at a sample point adds no error at all
                let split = wg.partial_weight(ai, 0, i as u32) + wg.partial_weight(ai, i as u32, last as u32);
                assert_eq!(split, wg.arc_weight(ai));
                for j in i..=last {
                    let three = wg.partial_weight(ai, 0, i as u32)
                        + wg.partial_weight(ai, i as u32, j as u32)
                        + wg.partial_weight(ai, j as u32, last as u32);
                    assert_eq!(three, wg.arc_weight(ai));
                }
            }
        }
    }
}

#[test]
fn weight_is_at_least_epsilon_times_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g = random_graph(&mut rng, 80, 40, 1, [1.0, 1.0, 4.0]);
    let v = random_volume(&mut rng, &g);
    let wg = compute_arc_weights(g, &v, &WeightParams::default()).unwrap();
    for a in 0..wg.graph().arcs().len() as u32 {
        assert!(wg.arc_weight(a) >= 1e-3 * wg.graph().arc_length(a) * (1.0 - 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn brightening_never_increases_weight(seed in any::<u64>(), bump in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 12, 6, 1, [1.0, 1.0, 2.0]);
        let v = random_volume(&mut rng, &g);
        let mut vals = v.values().to_vec();
        // brighten a block of voxels around a random arc point
        let a = rng.gen_range(0..g.arcs().len());
        let p = g.arcs()[a].points[rng.gen_range(0..g.arcs()[a].points.len())];
        let d = g.dims();
        for z in 0..d[2] {
            for y in 0..d[1] {
                for x in 0..d[0] {
                    let near = (p[0] - x as f64).abs() <= 2.0 && (p[1] - y as f64).abs() <= 2.0 && (p[2] - z as f64).abs() <= 2.0;
                    let i = x + d[0] * (y + d[1] * z);
                    if near && i > 1 {
                        vals[i] = (vals[i] + bump).min(1.0);
                    }
                }
            }
        }
        let brighter = normalize(&ScalarVolume::new(d, g.spacing(), vals).unwrap());
        let before = compute_arc_weights(g.clone(), &v, &WeightParams::default()).unwrap();
        let after = compute_arc_weights(g, &brighter, &WeightParams::default()).unwrap();
        for arc in 0..before.graph().arcs().len() as u32 {
            prop_assert!(after.arc_weight(arc) <= before.arc_weight(arc) + 1e-12);
        }
    }
}
