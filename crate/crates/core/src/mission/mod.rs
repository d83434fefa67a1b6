//! End-to-end mission: terrain → route → timing → closed-loop simulation.

pub mod config;
pub mod sim;
pub mod synth;
pub mod trace;

use std::fmt::Write as _;
use std::ops::ControlFlow;

use nalgebra::Vector3;

use crate::dynamics::{QpsParams, QpsState};
use crate::error::{Error, MissionError, MissionPhase, Result};
use crate::flatness::{design_gains, GainMatrix};
use crate::route::{astar, simplify, DiscretePath, WaypointPath};
use crate::tempo::{self, TimedTrajectory, TrackingContext};
use crate::terrain::{world_to_index, DiscreteElevationMap, ElevationMap, SafetyParams};

pub use config::{MissionConfig, TerrainSource, VehicleConfig};
pub use sim::{rk4_step, ClosedLoop, StepRecord};
pub use synth::{synth_ground, synth_terrain, SynthParams};
pub use trace::{MissionSummary, MissionTrace, SafetyFlags, TraceRecord};

type PhaseResult<T> = std::result::Result<T, MissionError>;

fn in_phase(phase: MissionPhase) -> impl FnOnce(Error) -> MissionError {
    move |e| MissionError::new(phase, e)
}

/// Terrain-derived state shared by the later stages.
#[derive(Debug, Clone)]
pub struct Mission {
    pub config: MissionConfig,
    pub params: QpsParams,
    pub gains: GainMatrix,
    pub terrain: ElevationMap,
    /// Terrain inflated by `ε`: the vehicle must stay strictly above it.
    pub clearance_map: ElevationMap,
    /// Terrain inflated by `ε + δ`: the planned path must stay strictly above it.
    pub planning_map: ElevationMap,
    pub grid: DiscreteElevationMap,
}

impl Mission {
    /// Loads the terrain, builds the inflated maps and checks that the start
    /// point lies in the restricted free space.
    pub fn prepare(config: MissionConfig) -> PhaseResult<Self> {
        config.validate().map_err(in_phase(MissionPhase::Config))?;
        let params = config
            .vehicle
            .to_params()
            .map_err(in_phase(MissionPhase::Config))?;
        let gains = design_gains(&config.control).map_err(in_phase(MissionPhase::Config))?;
        let terrain = config
            .terrain
            .load(&config.base_dir)
            .map_err(in_phase(MissionPhase::Terrain))?;
        let s = config.safety;
        let clearance_map = terrain
            .expand(s.epsilon)
            .map_err(in_phase(MissionPhase::Terrain))?;
        let planning_map = terrain
            .expand(s.inflation_radius())
            .map_err(in_phase(MissionPhase::Terrain))?;
        let grid = planning_map
            .discretize(config.planner.resolution)
            .map_err(in_phase(MissionPhase::Terrain))?;

        let mission = Self {
            config,
            params,
            gains,
            terrain,
            clearance_map,
            planning_map,
            grid,
        };
        let start = mission.config.start();
        if !mission.grid.is_free(world_to_index(&start, mission.grid.delta())) {
            return Err(MissionError::new(
                MissionPhase::Config,
                Error::Config(format!(
                    "start {:?} is outside the map or inside the expanded obstacle space",
                    mission.config.start
                )),
            ));
        }
        Ok(mission)
    }

    pub fn safety(&self) -> SafetyParams {
        self.config.safety
    }

    pub fn tracking_context(&self) -> TrackingContext {
        TrackingContext {
            params: self.params,
            gains: self.gains,
            safety: self.config.safety,
            dt_sim: self.config.tempo.dt_sim,
        }
    }

    /// Grid path between the cells of the start and goal points.
    pub fn grid_path(&self) -> PhaseResult<DiscretePath> {
        let delta = self.grid.delta();
        let start = world_to_index(&self.config.start(), delta);
        let goal = world_to_index(&self.config.goal(), delta);
        astar(start, goal, &self.grid, &self.config.planner).map_err(in_phase(MissionPhase::Plan))
    }

    /// Simplified route from the exact start to the exact goal.
    ///
    /// The grid path runs between cell centers; the exact end points are
    /// joined to them by short connectors that stay inside their (free) cells.
    pub fn plan_route(&self) -> PhaseResult<WaypointPath> {
        let path = simplify(&self.grid_path()?, &self.grid);
        let delta = self.grid.delta();
        let mut points = vec![self.config.start()];
        points.extend(
            path.indices
                .iter()
                .map(|&idx| crate::terrain::index_to_world(idx, delta)),
        );
        points.push(self.config.goal());
        points.dedup();
        WaypointPath::new(points).map_err(in_phase(MissionPhase::Plan))
    }

    pub fn plan_times(&self, route: &WaypointPath) -> PhaseResult<TimedTrajectory> {
        tempo::plan_times(route, &self.config.tempo, &self.tracking_context())
            .map_err(in_phase(MissionPhase::Time))
    }

    /// Flies `trajectory` from hover at its first waypoint, then holds the last
    /// waypoint for `hold` seconds. Every sample is recorded with its safety flags.
    ///
    /// Segments are flown one after another with the same routine the timing
    /// search used, so a planned trajectory is flown exactly as it was tested.
    pub fn simulate(&self, trajectory: &TimedTrajectory) -> PhaseResult<MissionTrace> {
        let dt = self.config.tempo.dt_sim;
        let s = self.safety();
        let cl = ClosedLoop::new(self.params, self.gains);
        let pts = &trajectory.waypoints().points;
        let times = trajectory.times();
        let mut x = QpsState::hover(pts[0], &self.params);
        let expected = sim::step_count(trajectory.total_time() + self.config.hold, dt) + 1;
        let mut records = Vec::with_capacity(expected);

        let fly = |records: &mut Vec<TraceRecord>, n: usize, x0: QpsState| {
            let t0 = times[n.min(times.len() - 1)];
            let skip_first = !records.is_empty();
            let mut push = |rec: &StepRecord| {
                if !(skip_first && rec.t == 0.0) {
                    let mut rec = *rec;
                    rec.t += t0;
                    records.push(self.trace_record(&rec, &s));
                }
                ControlFlow::Continue(())
            };
            if n + 1 < pts.len() {
                tempo::fly_segment(&cl, x0, &pts[n], &pts[n + 1], times[n + 1] - t0, dt, &mut push)
            } else {
                tempo::fly_hold(&cl, x0, &pts[n], self.config.hold, dt, &mut push)
            }
        };
        for n in 0..pts.len() {
            x = fly(&mut records, n, x).map_err(in_phase(MissionPhase::Simulate))?;
        }
        Ok(MissionTrace {
            trajectory: trajectory.clone(),
            records,
        })
    }

    fn trace_record(&self, rec: &StepRecord, s: &SafetyParams) -> TraceRecord {
        let r = rec.state.position;
        let clearance = self.clearance_map.sample(r.x, r.y).ok().map(|m| r.z - m);
        TraceRecord {
            t: rec.t,
            state: rec.state,
            rotors: rec.rotors,
            desired: rec.desired.position,
            error: rec.error,
            clearance,
            flags: SafetyFlags {
                rotor: rec.rotors.within(s.s_max),
                track: rec.error <= s.delta,
                clear: clearance.is_some_and(|c| c > 0.0),
            },
        }
    }

    /// Plan, time and fly.
    pub fn run(&self) -> PhaseResult<MissionTrace> {
        let route = self.plan_route()?;
        let trajectory = self.plan_times(&route)?;
        self.simulate(&trajectory)
    }
}

/// Runs the whole pipeline for `config`.
pub fn run_mission(config: MissionConfig) -> PhaseResult<MissionTrace> {
    Mission::prepare(config)?.run()
}

/// Waypoint table: `n,x,y,z`.
pub fn waypoint_table_csv(route: &WaypointPath) -> String {
    let mut out = String::from("n,x,y,z\n");
    for (n, p) in route.points.iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{}", n + 1, p.x, p.y, p.z);
    }
    out
}

/// Parses a table written by [`trace::timed_table_csv`].
pub fn parse_timed_table(text: &str) -> Result<TimedTrajectory> {
    let mut points = Vec::new();
    let mut times = Vec::new();
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    match lines.next() {
        Some((_, header)) if header.trim() == "n,x,y,z,t" => {}
        Some((i, _)) => return Err(Error::parse(i + 1, "expected header `n,x,y,z,t`")),
        None => return Err(Error::parse(1, "empty waypoint table")),
    }
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::parse(
                i + 1,
                format!("expected 5 fields, found {}", fields.len()),
            ));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(i + 1, format!("`{s}` is not a number")))
        };
        points.push(Vector3::new(num(fields[1])?, num(fields[2])?, num(fields[3])?));
        times.push(num(fields[4])?);
    }
    TimedTrajectory::new(WaypointPath::new(points)?, times)
}
