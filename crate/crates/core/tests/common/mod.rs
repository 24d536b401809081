//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use adrnav_core::detection::DetectorModel;
use adrnav_core::map::{CellCoord, GridMap, VectorGraph, INF};
use adrnav_core::mission::SimConfig;
use adrnav_core::rfid::{encode, TagPlacement};
use rand::Rng;

/// Random symmetric graph: `n` vertices, each pair joined with probability
/// `p` by an integer weight in 1..=10.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> VectorGraph {
    let mut g = VectorGraph::unlabelled(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                g.set_edge(i, j, f64::from(rng.gen_range(1u32..=10))).unwrap();
            }
        }
    }
    g
}

/// Cheapest simple path cost from `s` to `t`, by exhaustive DFS.
pub fn brute_shortest(g: &VectorGraph, s: usize, t: usize) -> f64 {
    fn go(g: &VectorGraph, v: usize, t: usize, seen: &mut Vec<bool>, cost: f64, best: &mut f64) {
        if v == t {
            *best = best.min(cost);
            return;
        }
        for u in 0..g.vertex_count() {
            let w = g.arc(v, u);
            if u != v && w < INF && !seen[u] {
                seen[u] = true;
                go(g, u, t, seen, cost + w, best);
                seen[u] = false;
            }
        }
    }
    let mut seen = vec![false; g.vertex_count()];
    seen[s] = true;
    let mut best = INF;
    go(g, s, t, &mut seen, 0.0, &mut best);
    best
}

/// Window positions of a convolution over the padded input.
pub fn conv_positions(input: usize, pad: usize, dilation: usize, kernel: usize, stride: usize) -> usize {
    let padded = input + 2 * pad;
    let reach = dilation * (kernel - 1) + 1;
    (0..)
        .map(|m| m * stride)
        .take_while(|&start| start + reach <= padded)
        .count()
}

/// Window positions of a ceil-mode pooling: keep sliding while the
/// previous window stopped short of the padded end.
pub fn pool_positions(input: usize, pad: usize, kernel: usize, stride: usize) -> usize {
    let padded = input + 2 * pad;
    if kernel > padded {
        return 0;
    }
    let mut m = 0;
    while m == 0 || (m - 1) * stride + kernel < padded {
        m += 1;
    }
    m
}

pub fn c(row: usize, col: usize) -> CellCoord {
    CellCoord::new(row, col)
}

/// Open 4x4 grid, corner to corner, perfect sensors and tags on both ends.
pub fn open_4x4() -> SimConfig {
    let mut cfg = SimConfig::new(GridMap::open(4, 4, 1.0).unwrap(), c(0, 0), c(3, 3));
    cfg.detector = DetectorModel::new(1.0, 7);
    cfg.read_model.base_read_probability = 1.0;
    cfg.tags = vec![
        TagPlacement::new(c(0, 0), encode(0, 2).unwrap()),
        TagPlacement::new(c(3, 3), encode(1, 2).unwrap()),
    ];
    cfg
}

/// 6x6 grid with three dynamic obstacles near the diagonal.
pub fn dynamic_6x6() -> SimConfig {
    let map = GridMap::new(6, 6, 1.0, vec![c(2, 0)], vec![c(1, 2), c(3, 3), c(4, 1)]).unwrap();
    let mut cfg = SimConfig::new(map, c(0, 0), c(5, 5));
    cfg.tags = vec![
        TagPlacement::new(c(0, 0), encode(0, 3).unwrap()),
        TagPlacement::new(c(2, 3), encode(1, 3).unwrap()),
        TagPlacement::new(c(5, 5), encode(2, 3).unwrap()),
    ];
    cfg
}

/// First safety violation in a mission log: entering a cell that was
/// correctly detected as occupied, or a replanned route through any cell
/// detected occupied earlier.
pub fn replan_violation(log: &adrnav_core::MissionLog) -> Option<String> {
    use adrnav_core::mission::EventKind;
    use std::collections::BTreeSet;
    let mut flagged = BTreeSet::new();
    let mut confirmed = BTreeSet::new();
    for e in &log.events {
        match &e.kind {
            EventKind::Detection { observed: true, truth } => {
                flagged.insert(e.cell);
                if *truth {
                    confirmed.insert(e.cell);
                }
            }
            EventKind::Move { .. } if confirmed.contains(&e.cell) => {
                return Some(format!("entered detected obstacle {}", e.cell));
            }
            EventKind::Replan { path, .. } => {
                if let Some(bad) = path.iter().find(|p| flagged.contains(p)) {
                    return Some(format!("replan at t={} routes through {bad}", e.time));
                }
            }
            _ => {}
        }
    }
    None
}
