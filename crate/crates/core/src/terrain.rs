//! Environment model: an elevation map splitting space into free space above
//! and obstacle space below, its inflation by a safety radius, and the
//! discrete column map used by the grid search.
//!
//! Heights are stored row-major with row 0 at the *smallest* y. The text grid
//! format lists the top row (largest y) first; [`ElevationMap::parse`] and
//! [`ElevationMap::to_grid_string`] handle the flip.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Continuous height field `M(x, y)` sampled at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationMap {
    origin: (f64, f64),
    cell_size: f64,
    width: usize,
    height: usize,
    heights: Vec<f64>,
}

/// Which side of an elevation surface a point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Free,
    Obstacle,
}

/// Bounding-sphere radius, tracking bound and rotor ceiling of a mission.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetyParams {
    /// Radius of the sphere enclosing the vehicle and payload, m.
    pub epsilon: f64,
    /// Allowed tracking error, m.
    pub delta: f64,
    /// Maximum rotor angular speed, rad/s.
    pub s_max: f64,
}

impl Default for SafetyParams {
    fn default() -> Self {
        Self {
            epsilon: 0.65,
            delta: 0.35,
            s_max: 400.0,
        }
    }
}

impl SafetyParams {
    pub fn new(epsilon: f64, delta: f64, s_max: f64) -> Result<Self> {
        let p = Self {
            epsilon,
            delta,
            s_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("delta", self.delta),
            ("s_max", self.s_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Distance the elevation map is inflated by before planning: `epsilon + delta`.
    pub fn inflation_radius(&self) -> f64 {
        self.epsilon + self.delta
    }
}

impl ElevationMap {
    /// Builds a map from south-first row-major heights.
    pub fn new(
        origin: (f64, f64),
        cell_size: f64,
        width: usize,
        height: usize,
        heights: Vec<f64>,
    ) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::domain(format!("cell size must be positive, got {cell_size}")));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(Error::domain("origin must be finite"));
        }
        if width < 2 || height < 2 {
            return Err(Error::domain(format!(
                "grid must be at least 2x2, got {width}x{height}"
            )));
        }
        if heights.len() != width * height {
            return Err(Error::domain(format!(
                "expected {} heights, got {}",
                width * height,
                heights.len()
            )));
        }
        if let Some(pos) = heights.iter().position(|h| !h.is_finite()) {
            return Err(Error::domain(format!("non-finite height at index {pos}")));
        }
        Ok(Self {
            origin,
            cell_size,
            width,
            height,
            heights,
        })
    }

    /// Builds a map by evaluating `f(col, row)` with row 0 at the smallest y.
    pub fn from_fn(
        origin: (f64, f64),
        cell_size: f64,
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut heights = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                heights.push(f(col, row));
            }
        }
        Self::new(origin, cell_size, width, height, heights)
    }

    /// Parses the plain-text grid format.
    pub fn parse(document: &str) -> Result<Self> {
        let mut lines = document.lines().enumerate().map(|(n, l)| (n + 1, l));

        let mut header = |key: &str| -> Result<(usize, String)> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("missing `{key}` header")))?;
            let mut parts = line.split_whitespace();
            let name = parts.next().unwrap_or("");
            if !name.eq_ignore_ascii_case(key) {
                return Err(Error::parse(n, format!("expected `{key}`, found `{name}`")));
            }
            let value = parts
                .next()
                .ok_or_else(|| Error::parse(n, format!("`{key}` has no value")))?;
            if parts.next().is_some() {
                return Err(Error::parse(n, format!("trailing tokens after `{key}`")));
            }
            Ok((n, value.to_string()))
        };

        let (n, v) = header("ncols")?;
        let ncols: usize = v
            .parse()
            .map_err(|_| Error::parse(n, format!("invalid ncols `{v}`")))?;
        let (n, v) = header("nrows")?;
        let nrows: usize = v
            .parse()
            .map_err(|_| Error::parse(n, format!("invalid nrows `{v}`")))?;
        let mut real = |key: &str| -> Result<f64> {
            let (n, v) = header(key)?;
            let x: f64 = v
                .parse()
                .map_err(|_| Error::parse(n, format!("invalid {key} `{v}`")))?;
            if !x.is_finite() {
                return Err(Error::parse(n, format!("{key} must be finite")));
            }
            Ok(x)
        };
        let xll = real("xll")?;
        let yll = real("yll")?;
        let cellsize = real("cellsize")?;
        if cellsize <= 0.0 {
            return Err(Error::parse(5, "cellsize must be positive"));
        }
        if ncols < 2 || nrows < 2 {
            return Err(Error::parse(1, "grid must be at least 2x2"));
        }

        // File rows run north to south.
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(nrows);
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            if rows.len() == nrows {
                return Err(Error::parse(n, format!("more than {nrows} data rows")));
            }
            let mut row = Vec::with_capacity(ncols);
            for tok in line.split_whitespace() {
                let h: f64 = tok
                    .parse()
                    .map_err(|_| Error::parse(n, format!("invalid height `{tok}`")))?;
                if !h.is_finite() {
                    return Err(Error::parse(n, format!("non-finite height `{tok}`")));
                }
                row.push(h);
            }
            if row.len() != ncols {
                return Err(Error::parse(
                    n,
                    format!(
                        "row {} has {} values, expected {ncols}",
                        rows.len() + 1,
                        row.len()
                    ),
                ));
            }
            rows.push(row);
        }
        if rows.len() != nrows {
            return Err(Error::parse(
                document.lines().count(),
                format!("expected {nrows} data rows, found {}", rows.len()),
            ));
        }
        let heights: Vec<f64> = rows.into_iter().rev().flatten().collect();
        Self::new((xll, yll), cellsize, ncols, nrows, heights)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Serializes to the grid format. Values use the shortest round-trip
    /// representation, so `parse(to_grid_string())` is bit-identical.
    pub fn to_grid_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ncols {}", self.width);
        let _ = writeln!(out, "nrows {}", self.height);
        let _ = writeln!(out, "xll {:?}", self.origin.0);
        let _ = writeln!(out, "yll {:?}", self.origin.1);
        let _ = writeln!(out, "cellsize {:?}", self.cell_size);
        for row in (0..self.height).rev() {
            let line: Vec<String> = (0..self.width)
                .map(|col| format!("{:?}", self.height_at(col, row)))
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    /// Stored height of cell `(col, row)`, row 0 at the smallest y.
    pub fn height_at(&self, col: usize, row: usize) -> f64 {
        self.heights[row * self.width + col]
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.origin.0 + (col as f64 + 0.5) * self.cell_size,
            self.origin.1 + (row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Footprint as `(x_min, x_max, y_min, y_max)`.
    pub fn footprint(&self) -> (f64, f64, f64, f64) {
        (
            self.origin.0,
            self.origin.0 + self.width as f64 * self.cell_size,
            self.origin.1,
            self.origin.1 + self.height as f64 * self.cell_size,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, x1, y0, y1) = self.footprint();
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    pub fn max_height(&self) -> f64 {
        self.heights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_height(&self) -> f64 {
        self.heights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Bilinear interpolation of the cell-center heights. Beyond the outermost
    /// centers (the last half cell of the footprint) the edge value is held.
    pub fn sample(&self, x: f64, y: f64) -> Result<f64> {
        if !self.contains(x, y) {
            return Err(Error::domain(format!(
                "({x}, {y}) is outside the map footprint"
            )));
        }
        Ok(self.sample_clamped(x, y))
    }

    pub(crate) fn sample_clamped(&self, x: f64, y: f64) -> f64 {
        let (c0, tx) = Self::locate(
            (x - self.origin.0) / self.cell_size - 0.5,
            self.width,
        );
        let (r0, ty) = Self::locate(
            (y - self.origin.1) / self.cell_size - 0.5,
            self.height,
        );
        let h00 = self.height_at(c0, r0);
        let h10 = self.height_at(c0 + 1, r0);
        let h01 = self.height_at(c0, r0 + 1);
        let h11 = self.height_at(c0 + 1, r0 + 1);
        let bottom = h00 + tx * (h10 - h00);
        let top = h01 + tx * (h11 - h01);
        bottom + ty * (top - bottom)
    }

    /// Lower cell index and fractional offset for a continuous center coordinate.
    fn locate(f: f64, n: usize) -> (usize, f64) {
        let f = f.clamp(0.0, (n - 1) as f64);
        let i = (f.floor() as usize).min(n - 2);
        (i, f - i as f64)
    }

    /// Inflates the map by `radius` using a spherical dilation of the
    /// cell-center columns: every cell takes the highest `M(c') + sqrt(r² - d²)`
    /// over cells `c'` within horizontal distance `d <= r`.
    pub fn expand(&self, radius: f64) -> Result<ElevationMap> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!(
                "expansion radius must be non-negative, got {radius}"
            )));
        }
        if radius == 0.0 {
            return Ok(self.clone());
        }
        let reach = (radius / self.cell_size).floor() as isize;
        let mut offsets = Vec::new();
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let d = self.cell_size * ((dc * dc + dr * dr) as f64).sqrt();
                if d <= radius {
                    offsets.push((dc, dr, (radius * radius - d * d).sqrt()));
                }
            }
        }
        let (w, h) = (self.width as isize, self.height as isize);
        let mut out = Vec::with_capacity(self.heights.len());
        for row in 0..h {
            for col in 0..w {
                let mut best = f64::NEG_INFINITY;
                for &(dc, dr, lift) in &offsets {
                    let (c, r) = (col + dc, row + dr);
                    if c < 0 || r < 0 || c >= w || r >= h {
                        continue;
                    }
                    best = best.max(self.height_at(c as usize, r as usize) + lift);
                }
                out.push(best);
            }
        }
        ElevationMap::new(self.origin, self.cell_size, self.width, self.height, out)
    }

    /// Exact maximum of the interpolated surface over an axis-aligned
    /// rectangle inside the footprint.
    ///
    /// The surface is bilinear between consecutive center lines, so the maximum
    /// is attained at a corner of one of the sub-rectangles cut by those lines.
    /// A 5x5 lattice (3x3 interior plus the corners) is always included.
    pub fn max_over_rect(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let xs = self.breakpoints(x0, x1, self.origin.0, self.width);
        let ys = self.breakpoints(y0, y1, self.origin.1, self.height);
        let mut best = f64::NEG_INFINITY;
        for &y in &ys {
            for &x in &xs {
                best = best.max(self.sample_clamped(x, y));
            }
        }
        best
    }

    fn breakpoints(&self, a: f64, b: f64, origin: f64, n: usize) -> Vec<f64> {
        let mut pts: Vec<f64> = [0.0, 1.0 / 6.0, 0.5, 5.0 / 6.0, 1.0]
            .iter()
            .map(|t| a + t * (b - a))
            .collect();
        let first = ((a - origin) / self.cell_size - 0.5).ceil().max(0.0) as usize;
        for c in first..n {
            let center = origin + (c as f64 + 0.5) * self.cell_size;
            if center > b {
                break;
            }
            if center >= a {
                pts.push(center);
            }
        }
        pts
    }

    /// Obstacle iff `z <= M(x, y)`; the surface itself counts as obstacle.
    pub fn classify(&self, point: &Vector3<f64>) -> Result<Region> {
        let m = self.sample(point.x, point.y)?;
        Ok(if point.z <= m {
            Region::Obstacle
        } else {
            Region::Free
        })
    }

    /// Discretizes this (already expanded) map at resolution `delta`.
    ///
    /// Column `(i, j)` covers `[(i - 1/2)Δ, (i + 1/2)Δ) x [(j - 1/2)Δ, (j + 1/2)Δ)`
    /// clipped to the footprint; only columns whose center lies in the footprint
    /// are kept. The stored level is the F-image of the highest surface point in
    /// the column, so it never underestimates.
    pub fn discretize(&self, delta: f64) -> Result<DiscreteElevationMap> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::domain(format!(
                "resolution must be positive, got {delta}"
            )));
        }
        let (x0, x1, y0, y1) = self.footprint();
        let i_min = (x0 / delta).ceil() as i64;
        let i_max = (x1 / delta).floor() as i64;
        let j_min = (y0 / delta).ceil() as i64;
        let j_max = (y1 / delta).floor() as i64;
        if i_min > i_max || j_min > j_max {
            return Err(Error::domain(format!(
                "footprint holds no column centers at resolution {delta}"
            )));
        }
        let ni = (i_max - i_min + 1) as usize;
        let nj = (j_max - j_min + 1) as usize;
        let mut levels = Vec::with_capacity(ni * nj);
        for j in j_min..=j_max {
            let cy = j as f64 * delta;
            let (ya, yb) = ((cy - 0.5 * delta).max(y0), (cy + 0.5 * delta).min(y1));
            for i in i_min..=i_max {
                let cx = i as f64 * delta;
                let (xa, xb) = ((cx - 0.5 * delta).max(x0), (cx + 0.5 * delta).min(x1));
                let top = self.max_over_rect(xa, xb, ya, yb);
                levels.push(to_level(top, delta));
            }
        }
        DiscreteElevationMap::new(delta, i_min, j_min, ni, nj, levels)
    }
}

/// Integer grid coordinate `(i, j, k)`. Ordering is lexicographic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridIndex {
    pub i: i64,
    pub j: i64,
    pub k: i64,
}

impl GridIndex {
    pub const fn new(i: i64, j: i64, k: i64) -> Self {
        Self { i, j, k }
    }
}

impl From<(i64, i64, i64)> for GridIndex {
    fn from((i, j, k): (i64, i64, i64)) -> Self {
        Self { i, j, k }
    }
}

fn to_level(v: f64, delta: f64) -> i64 {
    (v / delta + 0.5).floor() as i64
}

/// `F`: nearest grid index at resolution `delta`.
pub fn world_to_index(point: &Vector3<f64>, delta: f64) -> GridIndex {
    GridIndex::new(
        to_level(point.x, delta),
        to_level(point.y, delta),
        to_level(point.z, delta),
    )
}

/// `F⁻¹`: world position of a grid index.
pub fn index_to_world(index: GridIndex, delta: f64) -> Vector3<f64> {
    Vector3::new(
        delta * index.i as f64,
        delta * index.j as f64,
        delta * index.k as f64,
    )
}

/// Highest occupied level per `(i, j)` column of the expanded map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteElevationMap {
    delta_bits: u64,
    i_min: i64,
    j_min: i64,
    ni: usize,
    nj: usize,
    levels: Vec<i64>,
}

impl DiscreteElevationMap {
    /// Builds a column map directly; `levels` is row-major in `j` then `i`.
    pub fn new(
        delta: f64,
        i_min: i64,
        j_min: i64,
        ni: usize,
        nj: usize,
        levels: Vec<i64>,
    ) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::domain(format!(
                "resolution must be positive, got {delta}"
            )));
        }
        if ni == 0 || nj == 0 || levels.len() != ni * nj {
            return Err(Error::domain(format!(
                "level grid {ni}x{nj} does not match {} values",
                levels.len()
            )));
        }
        Ok(Self {
            delta_bits: delta.to_bits(),
            i_min,
            j_min,
            ni,
            nj,
            levels,
        })
    }

    pub fn delta(&self) -> f64 {
        f64::from_bits(self.delta_bits)
    }

    /// Inclusive index bounds `(i_min, i_max, j_min, j_max)`.
    pub fn bounds(&self) -> (i64, i64, i64, i64) {
        (
            self.i_min,
            self.i_min + self.ni as i64 - 1,
            self.j_min,
            self.j_min + self.nj as i64 - 1,
        )
    }

    /// Level of column `(i, j)`, or `None` outside the map.
    pub fn get(&self, i: i64, j: i64) -> Option<i64> {
        let (di, dj) = (i - self.i_min, j - self.j_min);
        if di < 0 || dj < 0 || di >= self.ni as i64 || dj >= self.nj as i64 {
            return None;
        }
        Some(self.levels[dj as usize * self.ni + di as usize])
    }

    /// True when the index lies inside the map and strictly above its column.
    pub fn is_free(&self, index: GridIndex) -> bool {
        self.get(index.i, index.j).is_some_and(|top| index.k > top)
    }

    pub fn max_level(&self) -> i64 {
        self.levels.iter().copied().max().unwrap_or(i64::MIN)
    }
}
