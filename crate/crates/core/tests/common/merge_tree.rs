//! Elder-rule merge tree of superlevel sets, built with union-find, as an
//! independent check on saddle-maximum persistence pairs.

use ridgetrace_core::morse::MorseComplex;
use ridgetrace_core::ScalarVolume;

pub struct MergeTree {
    /// (saddle key, max key) with keys being vertex ranks; zero pairs dropped.
    pub pairs: Vec<(u32, u32)>,
    /// (max key, persistence in value units) for every component death,
    /// including the instant ones of non-critical 3-cells.
    pub deaths: Vec<(u32, f64)>,
}

/// Elder-rule merge tree of the superlevel sets of the dual graph: 3-cells are
/// vertices, 2-cells are edges, and 2-cells on the domain boundary connect to
/// an extra vertex that exists from the start.
pub fn merge_tree(v: &ScalarVolume) -> MergeTree {
    let [nx, ny, nz] = v.dims();
    let vals = v.values();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let mut rank = vec![0u32; vals.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r as u32;
    }
    let value_of_rank = |r: u32| vals[order[r as usize]];

    let (cx, cy, cz) = (2 * nx - 1, 2 * ny - 1, 2 * nz - 1);
    let key = |a: usize, b: usize, c: usize| -> u32 {
        let span = |t: usize| if t % 2 == 1 { vec![(t - 1) / 2, t.div_ceil(2)] } else { vec![t / 2] };
        let mut k = 0;
        for x in span(a) {
            for y in span(b) {
                for z in span(c) {
                    k = k.max(rank[x + nx * (y + ny * z)]);
                }
            }
        }
        k
    };
    let cube_id = |a: usize, b: usize, c: usize| (a / 2) + (nx - 1) * ((b / 2) + (ny - 1) * (c / 2));
    let ncubes = (nx - 1) * (ny - 1) * (nz - 1);
    let inf = ncubes;

    // (key, is_cube, a, b, c)
    let mut events = Vec::new();
    for c in 0..cz {
        for b in 0..cy {
            for a in 0..cx {
                let odd = (a % 2) + (b % 2) + (c % 2);
                if odd >= 2 {
                    events.push((key(a, b, c), odd == 3, a, b, c));
                }
            }
        }
    }
    events.sort_by(|x, y| y.0.cmp(&x.0).then(y.1.cmp(&x.1)));

    let mut parent: Vec<usize> = (0..=ncubes).collect();
    let mut birth = vec![u32::MAX; ncubes + 1];
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut pairs = Vec::new();
    let mut deaths = Vec::new();
    for (k, is_cube, a, b, c) in events {
        if is_cube {
            birth[cube_id(a, b, c)] = k;
            continue;
        }
        // the even axis of the 2-cell
        let (axis, t, lim) = if a % 2 == 0 {
            (0, a, cx)
        } else if b % 2 == 0 {
            (1, b, cy)
        } else {
            (2, c, cz)
        };
        let side = |d: isize| -> usize {
            let tt = t as isize + d;
            if tt < 0 || tt as usize >= lim {
                return inf;
            }
            let mut p = [a, b, c];
            p[axis] = tt as usize;
            cube_id(p[0], p[1], p[2])
        };
        let (r1, r2) = (find(&mut parent, side(-1)), find(&mut parent, side(1)));
        if r1 == r2 {
            continue;
        }
        let (old, young) = if birth[r1] > birth[r2] || (birth[r1] == birth[r2] && r1 > r2) {
            (r1, r2)
        } else {
            (r2, r1)
        };
        let bk = birth[young];
        deaths.push((bk, value_of_rank(bk) - value_of_rank(k)));
        if bk != k {
            pairs.push((k, bk));
        }
        parent[young] = old;
    }
    pairs.sort_unstable();
    deaths.sort_by_key(|d| d.0);
    MergeTree { pairs, deaths }
}

pub fn implementation_pairs(mc: &MorseComplex) -> Vec<(u32, u32)> {
    let mut out: Vec<(u32, u32)> = mc
        .persistence_pairs()
        .iter()
        .map(|p| {
            let s = &mc.nodes()[mc.node_of(p.saddle).unwrap() as usize];
            let m = &mc.nodes()[mc.node_of(p.max).unwrap() as usize];
            (s.rank, m.rank)
        })
        .filter(|(s, m)| s != m)
        .collect();
    out.sort_unstable();
    out
}
