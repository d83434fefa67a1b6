//! Seeded synthetic urban terrain: rectangular buildings on gently rolling ground.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::terrain::ElevationMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    /// Lower-left corner of the map, m.
    pub origin: [f64; 2],
    /// Size along x and y, m.
    pub extent: [f64; 2],
    pub cell_size: f64,
    pub seed: u64,
    /// Target fraction of cells covered by buildings, in `[0, 1)`.
    pub density: f64,
    /// Building heights above the local ground, m.
    pub height_range: [f64; 2],
    pub base_height: f64,
    /// Peak deviation of the rolling ground from `base_height`, m.
    pub ground_amplitude: f64,
    /// Building footprint side lengths, m.
    pub footprint_range: [f64; 2],
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            origin: [0.0, 0.0],
            extent: [200.0, 200.0],
            cell_size: 1.0,
            seed: 0,
            density: 0.1,
            height_range: [5.0, 20.0],
            base_height: 0.0,
            ground_amplitude: 0.5,
            footprint_range: [4.0, 12.0],
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("extent[0]", self.extent[0]),
            ("extent[1]", self.extent[1]),
            ("cell_size", self.cell_size),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.density) {
            return Err(Error::domain(format!(
                "density must lie in [0, 1), got {}",
                self.density
            )));
        }
        let [lo, hi] = self.height_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(Error::domain(format!("bad height range [{lo}, {hi}]")));
        }
        let [fl, fh] = self.footprint_range;
        if !(fl.is_finite() && fh.is_finite() && 0.0 < fl && fl <= fh) {
            return Err(Error::domain(format!("bad footprint range [{fl}, {fh}]")));
        }
        let finite = [
            self.origin[0],
            self.origin[1],
            self.base_height,
            self.ground_amplitude,
        ];
        if finite.iter().any(|v| !v.is_finite()) || self.ground_amplitude < 0.0 {
            return Err(Error::domain("origin, base height and ground amplitude must be finite"));
        }
        let (w, h) = self.grid_size();
        if w < 2 || h < 2 {
            return Err(Error::domain("extent must span at least two cells per axis"));
        }
        Ok(())
    }

    /// Cell counts along x and y.
    pub fn grid_size(&self) -> (usize, usize) {
        let n = |e: f64| (e / self.cell_size).round().max(0.0) as usize;
        (n(self.extent[0]), n(self.extent[1]))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Lattice value in `[-1, 1]`, computed from integers only.
fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let h = splitmix64(seed ^ splitmix64((ix as u64) ^ splitmix64(iy as u64).rotate_left(17)));
    // 53 high bits -> [0, 1), exact in f64.
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Cells between ground lattice points.
const GROUND_PERIOD: usize = 16;

fn ground(params: &SynthParams, col: usize, row: usize) -> f64 {
    if params.ground_amplitude == 0.0 {
        return params.base_height;
    }
    let (cx, fx) = (col / GROUND_PERIOD, (col % GROUND_PERIOD) as f64 / GROUND_PERIOD as f64);
    let (cy, fy) = (row / GROUND_PERIOD, (row % GROUND_PERIOD) as f64 / GROUND_PERIOD as f64);
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let (sx, sy) = (smooth(fx), smooth(fy));
    let v = |dx: usize, dy: usize| lattice(params.seed, (cx + dx) as i64, (cy + dy) as i64);
    let bottom = v(0, 0) + (v(1, 0) - v(0, 0)) * sx;
    let top = v(0, 1) + (v(1, 1) - v(0, 1)) * sx;
    params.base_height + params.ground_amplitude * (bottom + (top - bottom) * sy)
}

/// Ground-only heights of the generator (what the map would be with no buildings).
pub fn synth_ground(params: &SynthParams) -> Result<ElevationMap> {
    params.validate()?;
    let (w, h) = params.grid_size();
    ElevationMap::from_fn(
        (params.origin[0], params.origin[1]),
        params.cell_size,
        w,
        h,
        |c, r| ground(params, c, r),
    )
}

/// Places buildings until the covered cell fraction reaches `density`.
pub fn synth_terrain(params: &SynthParams) -> Result<ElevationMap> {
    params.validate()?;
    let (w, h) = params.grid_size();
    let mut heights: Vec<f64> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (c, r)))
        .map(|(c, r)| ground(params, c, r))
        .collect();
    let mut covered = vec![false; w * h];
    let target = (params.density * (w * h) as f64).ceil() as usize;
    let mut n_covered = 0usize;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let cells = |m: f64| ((m / params.cell_size).round() as usize).max(1);
    let (fmin, fmax) = (cells(params.footprint_range[0]), cells(params.footprint_range[1]));
    let [hlo, hhi] = params.height_range;
    let max_attempts = 100 * (w * h).max(1);
    let mut attempts = 0;
    while n_covered < target && attempts < max_attempts {
        attempts += 1;
        let bw = rng.gen_range(fmin..=fmax).min(w);
        let bh = rng.gen_range(fmin..=fmax).min(h);
        let c0 = rng.gen_range(0..=w - bw);
        let r0 = rng.gen_range(0..=h - bh);
        let rise = if hhi > hlo { rng.gen_range(hlo..=hhi) } else { hlo };
        // Roof is flat at the rise above the ground under its lowest corner.
        let floor = (r0..r0 + bh)
            .flat_map(|r| (c0..c0 + bw).map(move |c| (c, r)))
            .map(|(c, r)| ground(params, c, r))
            .fold(f64::INFINITY, f64::min);
        for r in r0..r0 + bh {
            for c in c0..c0 + bw {
                let i = r * w + c;
                heights[i] = heights[i].max(floor + rise);
                if !covered[i] {
                    covered[i] = true;
                    n_covered += 1;
                }
            }
        }
    }
    ElevationMap::new(
        (params.origin[0], params.origin[1]),
        params.cell_size,
        w,
        h,
        heights,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, density: f64) -> SynthParams {
        SynthParams {
            extent: [60.0, 40.0],
            seed,
            density,
            ..SynthParams::default()
        }
    }

    #[test]
    fn zero_density_flat_ground_is_base_height() {
        let p = SynthParams {
            ground_amplitude: 0.0,
            base_height: 3.5,
            ..small(3, 0.0)
        };
        let m = synth_terrain(&p).unwrap();
        assert!(m.heights().iter().all(|&z| z == 3.5));
        assert_eq!((m.width(), m.height()), (60, 40));
    }

    #[test]
    fn zero_density_is_ground_only() {
        let p = small(9, 0.0);
        assert_eq!(synth_terrain(&p).unwrap(), synth_ground(&p).unwrap());
        let m = synth_ground(&p).unwrap();
        assert!(m.heights().iter().all(|z| z.abs() <= 0.5));
        assert!(m.max_height() > m.min_height());
    }

    #[test]
    fn same_seed_same_map() {
        let a = synth_terrain(&small(7, 0.2)).unwrap();
        let b = synth_terrain(&small(7, 0.2)).unwrap();
        assert_eq!(a.to_grid_string(), b.to_grid_string());
        let c = synth_terrain(&small(8, 0.2)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn density_is_reached() {
        let p = small(11, 0.25);
        let m = synth_terrain(&p).unwrap();
        let g = synth_ground(&p).unwrap();
        let built = m
            .heights()
            .iter()
            .zip(g.heights())
            .filter(|(z, g0)| *z > *g0)
            .count();
        let frac = built as f64 / m.heights().len() as f64;
        assert!((0.25..0.35).contains(&frac), "covered fraction {frac}");
    }

    #[test]
    fn rejects_bad_params() {
        assert!(synth_terrain(&small(1, 1.0)).is_err());
        let mut p = small(1, 0.1);
        p.height_range = [10.0, 5.0];
        assert!(synth_terrain(&p).is_err());
        p = small(1, 0.1);
        p.extent = [1.0, 50.0];
        assert!(synth_terrain(&p).is_err());
    }
}
