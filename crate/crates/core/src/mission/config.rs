//! Mission configuration document (TOML).

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{combine_inertia, QpsParams, RigidBody, GRAVITY};
use crate::error::{Error, Result};
use crate::flatness::PoleSets;
use crate::mission::synth::SynthParams;
use crate::route::PlannerConfig;
use crate::tempo::TemporalConfig;
use crate::terrain::{ElevationMap, SafetyParams};

/// Where the elevation map comes from: exactly one of `file` or `synthetic`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainSource {
    /// Grid file, relative to the config file's directory.
    pub file: Option<PathBuf>,
    pub synthetic: Option<SynthParams>,
}

impl TerrainSource {
    pub fn load(&self, base_dir: &Path) -> Result<ElevationMap> {
        match (&self.file, &self.synthetic) {
            (Some(path), None) => ElevationMap::load(base_dir.join(path)),
            (None, Some(params)) => super::synth::synth_terrain(params),
            _ => Err(Error::Config(
                "terrain needs exactly one of `file` or `synthetic`".into(),
            )),
        }
    }
}

/// Vehicle description: either explicit `params`, or a quadcopter/payload pair
/// combined at `separation`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub params: Option<QpsParams>,
    pub quad: Option<RigidBody>,
    pub payload: Option<RigidBody>,
    /// Distance between the two centers of mass, m.
    pub separation: Option<f64>,
    pub thrust_coeff: Option<f64>,
    pub drag_coeff: Option<f64>,
    pub arm_length: Option<f64>,
    pub gravity: Option<f64>,
}

impl VehicleConfig {
    pub fn to_params(&self) -> Result<QpsParams> {
        let params = match self.params {
            Some(p) => {
                let mixed = self.quad.is_some()
                    || self.payload.is_some()
                    || self.separation.is_some()
                    || self.thrust_coeff.is_some()
                    || self.drag_coeff.is_some()
                    || self.arm_length.is_some()
                    || self.gravity.is_some();
                if mixed {
                    return Err(Error::Config(
                        "vehicle.params cannot be combined with other vehicle keys".into(),
                    ));
                }
                p
            }
            None => {
                let defaults = QpsParams::default();
                let quad = self.quad.unwrap_or(RigidBody::REFERENCE_QUAD);
                let payload = self.payload.unwrap_or(RigidBody::REFERENCE_PAYLOAD);
                let d = self.separation.unwrap_or(0.2);
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::Config(format!(
                        "vehicle.separation must be non-negative, got {d}"
                    )));
                }
                let body = combine_inertia(quad, payload, d);
                QpsParams {
                    mass: body.mass,
                    inertia: body.inertia,
                    thrust_coeff: self.thrust_coeff.unwrap_or(defaults.thrust_coeff),
                    drag_coeff: self.drag_coeff.unwrap_or(defaults.drag_coeff),
                    arm_length: self.arm_length.unwrap_or(defaults.arm_length),
                    gravity: self.gravity.unwrap_or(GRAVITY),
                }
            }
        };
        params.validate().map_err(config_error)?;
        Ok(params)
    }
}

fn default_hold() -> f64 {
    2.0
}

/// Full mission description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    pub start: [f64; 3],
    pub goal: [f64; 3],
    pub terrain: TerrainSource,
    #[serde(default)]
    pub safety: SafetyParams,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub tempo: TemporalConfig,
    #[serde(default)]
    pub vehicle: VehicleConfig,
    #[serde(default)]
    pub control: PoleSets,
    /// Seconds simulated past the last arrival time while holding the goal.
    #[serde(default = "default_hold")]
    pub hold: f64,
    /// Directory that relative terrain paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl MissionConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: MissionConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("mission config is always representable")
    }

    /// Checks every parameter that can be checked without the terrain.
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("start", self.start), ("goal", self.goal)] {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        self.safety.validate().map_err(config_error)?;
        self.planner.validate().map_err(config_error)?;
        self.tempo.validate().map_err(config_error)?;
        self.vehicle.to_params()?;
        crate::flatness::design_gains(&self.control).map_err(config_error)?;
        if !(self.hold.is_finite() && self.hold >= 0.0) {
            return Err(Error::Config(format!("hold must be non-negative, got {}", self.hold)));
        }
        match (&self.terrain.file, &self.terrain.synthetic) {
            (Some(_), None) => Ok(()),
            (None, Some(s)) => s.validate().map_err(config_error),
            _ => Err(Error::Config(
                "terrain needs exactly one of `file` or `synthetic`".into(),
            )),
        }
    }

    pub fn start(&self) -> Vector3<f64> {
        Vector3::from(self.start)
    }

    pub fn goal(&self) -> Vector3<f64> {
        Vector3::from(self.goal)
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    }
}
