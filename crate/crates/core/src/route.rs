//! Spatial planning on the discrete expanded elevation map.
//!
//! The grid is never materialized: nodes are created when first reached, with
//! open and closed sets kept in hash tables. Moves are 26-connected with
//! Euclidean edge costs. A node is admissible when it lies strictly above its
//! column; an edge is admissible when the straight segment between the two
//! nodes is [`connectable`], which rules out cutting past the corner of a
//! column.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::terrain::{index_to_world, DiscreteElevationMap, GridIndex};

/// Search parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    /// Grid resolution Δ, m.
    pub resolution: f64,
    /// Heuristic weight `w >= 1`.
    pub weight: f64,
    /// Expansion budget before giving up.
    pub max_expansions: usize,
    /// Also scale edge costs by `w`, reproducing the pseudocode literally
    /// (which makes `w` cancel out of the ordering).
    pub literal_weighting: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            resolution: 1.0,
            weight: 1.1,
            max_expansions: 10_000_000,
            literal_weighting: false,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(Error::domain(format!(
                "resolution must be positive, got {}",
                self.resolution
            )));
        }
        if !(self.weight.is_finite() && self.weight >= 1.0) {
            return Err(Error::domain(format!(
                "heuristic weight must be >= 1, got {}",
                self.weight
            )));
        }
        Ok(())
    }
}

/// Ordered grid indices from start to goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscretePath {
    pub indices: Vec<GridIndex>,
}

impl DiscretePath {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of edges whose squared length is 1, 2 and 3 grid units.
    ///
    /// Two 26-connected paths have equal length exactly when these counts are
    /// equal, since 1, √2 and √3 are linearly independent over the rationals.
    pub fn edge_class_counts(&self) -> Option<[usize; 3]> {
        let mut counts = [0usize; 3];
        for w in self.indices.windows(2) {
            match sq_dist(w[0], w[1]) {
                c @ 1..=3 => counts[c as usize - 1] += 1,
                _ => return None,
            }
        }
        Some(counts)
    }

    /// Euclidean length in meters at resolution `delta`.
    pub fn length(&self, delta: f64) -> f64 {
        self.indices
            .windows(2)
            .map(|w| (sq_dist(w[0], w[1]) as f64).sqrt() * delta)
            .sum()
    }
}

fn sq_dist(a: GridIndex, b: GridIndex) -> i64 {
    let (di, dj, dk) = (a.i - b.i, a.j - b.j, a.k - b.k);
    di * di + dj * dj + dk * dk
}

fn grid_distance(a: GridIndex, b: GridIndex) -> f64 {
    (sq_dist(a, b) as f64).sqrt()
}

/// The 26 face-, edge- and corner-adjacent indices.
pub fn neighbors(index: GridIndex) -> [GridIndex; 26] {
    let mut out = [index; 26];
    let mut n = 0;
    for di in -1..=1 {
        for dj in -1..=1 {
            for dk in -1..=1 {
                if di == 0 && dj == 0 && dk == 0 {
                    continue;
                }
                out[n] = GridIndex::new(index.i + di, index.j + dj, index.k + dk);
                n += 1;
            }
        }
    }
    out
}

const BOUNDARY_TOL: f64 = 1e-9;

/// Columns whose cell contains horizontal coordinate `x` (grid units); two
/// when `x` sits on a cell boundary.
fn cells_at(x: f64) -> (i64, Option<i64>) {
    let c = (x + 0.5).floor();
    let frac = x + 0.5 - c;
    if frac < BOUNDARY_TOL {
        (c as i64, Some(c as i64 - 1))
    } else if 1.0 - frac < BOUNDARY_TOL {
        (c as i64, Some(c as i64 + 1))
    } else {
        (c as i64, None)
    }
}

fn column_clear(map: &DiscreteElevationMap, i: i64, j: i64, z: f64) -> bool {
    // F(z) > level  <=>  z >= level + 1/2 (grid units).
    map.get(i, j).is_some_and(|level| z >= level as f64 + 0.5)
}

/// True iff the straight segment between two indices keeps `F(point)` above
/// the column level of every column it passes through or touches.
///
/// The horizontal projection is walked exactly: the segment is cut where it
/// crosses column boundaries, each piece is checked against its column with
/// the piece's lowest height, and each cut point is checked against every
/// column that contains it.
pub fn connectable(a: GridIndex, b: GridIndex, map: &DiscreteElevationMap) -> bool {
    let pa = Vector3::new(a.i as f64, a.j as f64, a.k as f64);
    let pb = Vector3::new(b.i as f64, b.j as f64, b.k as f64);
    let d = pb - pa;
    let at = |s: f64| pa + d * s;

    let mut cuts = vec![0.0, 1.0];
    for axis in 0..2 {
        let (lo, hi) = (pa[axis].min(pb[axis]), pa[axis].max(pb[axis]));
        if d[axis] == 0.0 {
            continue;
        }
        let mut h = (lo + 0.5).floor() + 0.5;
        while h < hi {
            if h > lo {
                cuts.push((h - pa[axis]) / d[axis]);
            }
            h += 1.0;
        }
    }
    cuts.sort_by(f64::total_cmp);

    let point_clear = |p: Vector3<f64>| {
        let (i0, i1) = cells_at(p.x);
        let (j0, j1) = cells_at(p.y);
        for i in std::iter::once(i0).chain(i1) {
            for j in std::iter::once(j0).chain(j1) {
                if !column_clear(map, i, j, p.z) {
                    return false;
                }
            }
        }
        true
    };

    for &s in &cuts {
        if !point_clear(at(s)) {
            return false;
        }
    }
    for w in cuts.windows(2) {
        if w[1] - w[0] <= 0.0 {
            continue;
        }
        let mid = at(0.5 * (w[0] + w[1]));
        let (i, j) = ((mid.x + 0.5).floor() as i64, (mid.y + 0.5).floor() as i64);
        let low = at(w[0]).z.min(at(w[1]).z);
        if !column_clear(map, i, j, low) {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy)]
struct Node {
    cost: f64,
    parent: Option<GridIndex>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    f: f64,
    h: f64,
    cost: f64,
    index: GridIndex,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.f
            .total_cmp(&other.f)
            .then(self.h.total_cmp(&other.h))
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Highest level the search may climb to. Nothing above it can shorten a path:
/// every column is clear there and clamping height never lengthens a move.
pub fn search_ceiling(start: GridIndex, goal: GridIndex, map: &DiscreteElevationMap) -> i64 {
    map.max_level().max(start.k).max(goal.k) + 1
}

/// Weighted A* from `start` to `goal`. Ties on `f` go to the smaller heuristic,
/// then to the lexicographically smaller index.
pub fn astar(
    start: GridIndex,
    goal: GridIndex,
    map: &DiscreteElevationMap,
    config: &PlannerConfig,
) -> Result<DiscretePath> {
    config.validate()?;
    if !map.is_free(start) {
        return Err(Error::NoPath(format!(
            "start {start:?} is not above the expanded map"
        )));
    }
    if !map.is_free(goal) {
        return Err(Error::NoPath(format!(
            "goal {goal:?} is inside the expanded obstacle space"
        )));
    }
    let delta = map.delta();
    let w = config.weight;
    let edge_scale = if config.literal_weighting { w } else { 1.0 };
    let ceiling = search_ceiling(start, goal, map);
    let heuristic = |idx: GridIndex| grid_distance(idx, goal) * delta;

    let mut open: HashMap<GridIndex, Node> = HashMap::new();
    let mut closed: HashMap<GridIndex, Node> = HashMap::new();
    let mut queue = BinaryHeap::new();
    open.insert(
        start,
        Node {
            cost: 0.0,
            parent: None,
        },
    );
    let h0 = heuristic(start);
    queue.push(Reverse(Entry {
        f: w * h0,
        h: h0,
        cost: 0.0,
        index: start,
    }));

    let mut expansions = 0usize;
    while !closed.contains_key(&goal) {
        let Some(Reverse(entry)) = queue.pop() else {
            return Err(Error::NoPath(format!(
                "open set exhausted after {expansions} expansions"
            )));
        };
        let picked = entry.index;
        let node = match open.get(&picked) {
            Some(n) if n.cost == entry.cost => *n,
            _ => continue,
        };
        open.remove(&picked);
        closed.insert(picked, node);
        if picked == goal {
            break;
        }
        expansions += 1;
        if expansions > config.max_expansions {
            return Err(Error::NoPath(format!(
                "expansion budget of {} exhausted",
                config.max_expansions
            )));
        }
        for nb in neighbors(picked) {
            if nb.k > ceiling || closed.contains_key(&nb) || !map.is_free(nb) {
                continue;
            }
            if !connectable(picked, nb, map) {
                continue;
            }
            let cost = node.cost + edge_scale * grid_distance(picked, nb) * delta;
            let better = open.get(&nb).map_or(true, |n| cost < n.cost);
            if better {
                open.insert(
                    nb,
                    Node {
                        cost,
                        parent: Some(picked),
                    },
                );
                let h = heuristic(nb);
                queue.push(Reverse(Entry {
                    f: cost + w * h,
                    h,
                    cost,
                    index: nb,
                }));
            }
        }
    }

    let mut indices = vec![goal];
    let mut cursor = closed[&goal].parent;
    while let Some(idx) = cursor {
        indices.push(idx);
        cursor = closed[&idx].parent;
    }
    indices.reverse();
    Ok(DiscretePath { indices })
}

/// Drops intermediate indices that a straight connectable segment can skip.
///
/// From each kept anchor the next kept index is the farthest one along the
/// path that is connectable from it, so the output is a fixed point of this
/// function.
pub fn simplify(path: &DiscretePath, map: &DiscreteElevationMap) -> DiscretePath {
    let p = &path.indices;
    if p.len() <= 2 {
        return path.clone();
    }
    let last = p.len() - 1;
    let mut kept = vec![p[0]];
    let mut anchor = 0;
    while anchor < last {
        let mut next = last;
        while next > anchor + 1 && !connectable(p[anchor], p[next], map) {
            next -= 1;
        }
        kept.push(p[next]);
        anchor = next;
    }
    DiscretePath { indices: kept }
}

/// Piecewise-straight path through waypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPath {
    pub points: Vec<Vector3<f64>>,
}

impl WaypointPath {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("waypoint path needs at least one point"));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

pub fn to_waypoints(path: &DiscretePath, delta: f64) -> Result<WaypointPath> {
    WaypointPath::new(
        path.indices
            .iter()
            .map(|&idx| index_to_world(idx, delta))
            .collect(),
    )
}

/// `p(u)` for `u` in `[1, N]` (1-based waypoint parameter).
pub fn eval_spatial(wp: &WaypointPath, u: f64) -> Result<Vector3<f64>> {
    let n = wp.points.len();
    if !(u >= 1.0 && u <= n as f64) {
        return Err(Error::domain(format!("parameter {u} outside [1, {n}]")));
    }
    if n == 1 {
        return Ok(wp.points[0]);
    }
    if u.fract() == 0.0 {
        // Exactly on a waypoint: no interpolation rounding.
        return Ok(wp.points[u as usize - 1]);
    }
    let seg = u.floor() as usize;
    let t = u - seg as f64;
    let (a, b) = (wp.points[seg - 1], wp.points[seg]);
    Ok(a + (b - a) * t)
}
