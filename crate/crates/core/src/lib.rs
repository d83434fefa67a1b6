//! Terrain-aware path planning and tracking control for a quadcopter carrying
//! a rigidly attached payload.
//!
//! The pipeline runs in stages:
//!
//! 1. [`terrain`] loads an elevation map, inflates it by a safety radius and
//!    discretizes it onto a cubic grid.
//! 2. [`route`] searches the grid with weighted A* and simplifies the result
//!    into a short list of waypoints.
//! 3. [`tempo`] assigns each straight segment the shortest duration for which
//!    a simulated tracking run stays within error and rotor-speed limits.
//! 4. [`mission`] flies the timed trajectory with the [`flatness`] controller
//!    acting on the [`dynamics`] model and records a trace.

pub mod dynamics;
pub mod error;
pub mod flatness;
pub mod mission;
pub mod route;
pub mod tempo;
pub mod terrain;

pub use error::{Error, MissionError, MissionPhase, Result};
