//! Helpers shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::Vector3;
use qps_core::dynamics::QpsState;
use qps_core::route::{connectable, neighbors};
use qps_core::terrain::{DiscreteElevationMap, ElevationMap, GridIndex};
use rand::Rng;

/// A state the flat inversion accepts: positive thrust, roll and pitch well
/// inside the tilt limit.
pub fn random_state(rng: &mut impl Rng) -> QpsState {
    let mut v3 = |s: f64| Vector3::new(rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s));
    let position = v3(10.0);
    let velocity = v3(3.0);
    let rates = v3(1.0);
    QpsState {
        position,
        velocity,
        angles: Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-3.0..3.0),
        ),
        rates,
        thrust: rng.gen_range(2.0..20.0),
        thrust_rate: rng.gen_range(-5.0..5.0),
    }
}

/// Random column map on `n × n` columns with levels in `[-1, top]`: mostly open
/// ground with scattered towers and a few walls.
pub fn random_columns(rng: &mut impl Rng, n: usize, top: i64) -> DiscreteElevationMap {
    let mut levels = vec![-1i64; n * n];
    for l in levels.iter_mut() {
        if rng.gen_bool(0.3) {
            *l = rng.gen_range(-1..=top);
        }
    }
    for _ in 0..3 {
        let (i0, j0) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let h = rng.gen_range(top / 2..=top);
        let len = rng.gen_range(3..n / 2);
        let horizontal = rng.gen_bool(0.5);
        for s in 0..len {
            let (i, j) = if horizontal { (i0 + s, j0) } else { (i0, j0 + s) };
            if i < n && j < n {
                levels[j * n + i] = h;
            }
        }
    }
    DiscreteElevationMap::new(1.0, 0, 0, n, n, levels).unwrap()
}

/// A free index in the map at a random height up to `k_max`.
pub fn random_free(rng: &mut impl Rng, map: &DiscreteElevationMap, k_max: i64) -> GridIndex {
    let (i0, i1, j0, j1) = map.bounds();
    loop {
        let idx = GridIndex::new(
            rng.gen_range(i0..=i1),
            rng.gen_range(j0..=j1),
            rng.gen_range(0..=k_max),
        );
        if map.is_free(idx) {
            return idx;
        }
    }
}

/// Exact path cost as counts of axis, face-diagonal and space-diagonal moves.
/// Equal counts ⇔ equal cost, since 1, √2 and √3 are independent over ℚ.
pub type EdgeCounts = [usize; 3];

pub fn counts_cost(c: EdgeCounts) -> f64 {
    c[0] as f64 + c[1] as f64 * 2f64.sqrt() + c[2] as f64 * 3f64.sqrt()
}

/// Plain Dijkstra over free indices joined by connectable 26-neighbor moves,
/// searching every level up to `max_level + 4`. Returns the optimal move counts.
pub fn dijkstra(
    start: GridIndex,
    goal: GridIndex,
    map: &DiscreteElevationMap,
) -> Option<EdgeCounts> {
    let k_top = map.max_level().max(start.k).max(goal.k) + 4;
    let mut best: HashMap<GridIndex, (f64, EdgeCounts)> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let key = |c: f64| Reverse((c * 1e12).round() as i64);
    best.insert(start, (0.0, [0; 3]));
    heap.push((key(0.0), start.i, start.j, start.k));
    while let Some((Reverse(k), i, j, kk)) = heap.pop() {
        let idx = GridIndex::new(i, j, kk);
        let (cost, counts) = best[&idx];
        if key(cost).0 != k {
            continue;
        }
        if idx == goal {
            return Some(counts);
        }
        for nb in neighbors(idx) {
            if nb.k > k_top || !map.is_free(nb) || !connectable(idx, nb, map) {
                continue;
            }
            let class = ((nb.i - i).abs() + (nb.j - j).abs() + (nb.k - kk).abs()) as usize - 1;
            let mut c = counts;
            c[class] += 1;
            let nc = counts_cost(c);
            if best.get(&nb).map_or(true, |(old, _)| nc < *old - 1e-12) {
                best.insert(nb, (nc, c));
                heap.push((key(nc), nb.i, nb.j, nb.k));
            }
        }
    }
    None
}

/// Rolling terrain with a few sharp blocks, `n × n` cells of size `cell`.
pub fn rough_terrain(rng: &mut impl Rng, n: usize, cell: f64) -> ElevationMap {
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(0.3..1.5),
                rng.gen_range(0.05..0.4),
                rng.gen_range(0.05..0.4),
                rng.gen_range(0.0..6.3),
            )
        })
        .collect();
    let blocks: Vec<(usize, usize, usize, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(0..n),
                rng.gen_range(0..n),
                rng.gen_range(1..4),
                rng.gen_range(1.0..5.0),
            )
        })
        .collect();
    ElevationMap::from_fn((0.0, 0.0), cell, n, n, |c, r| {
        let (x, y) = (c as f64 * cell, r as f64 * cell);
        let mut z: f64 = waves
            .iter()
            .map(|&(a, fx, fy, ph)| a * (fx * x + fy * y + ph).sin())
            .sum();
        for &(bc, br, s, h) in &blocks {
            if c >= bc && c < bc + s && r >= br && r < br + s {
                z = z.max(h);
            }
        }
        z
    })
    .unwrap()
}
