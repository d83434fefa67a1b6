//! Mission trace records, CSV output and summary.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::{QpsState, RotorSpeeds};
use crate::tempo::TimedTrajectory;

/// First line of every trace file.
pub const TRACE_VERSION_LINE: &str = "# qps-trace v1";
pub const TRACE_HEADER: &str =
    "t,x,y,z,phi,theta,psi,p,s1,s2,s3,s4,err,flag_rotor,flag_track,flag_clear";

/// Per-condition status at one sample; `true` means the condition holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SafetyFlags {
    /// Every rotor speed exists and is at most `s_max`.
    pub rotor: bool,
    /// Tracking error at most `δ`.
    pub track: bool,
    /// Position strictly above the map inflated by `ε`.
    pub clear: bool,
}

impl SafetyFlags {
    pub fn all(&self) -> bool {
        self.rotor && self.track && self.clear
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub state: QpsState,
    pub rotors: RotorSpeeds,
    pub desired: nalgebra::Vector3<f64>,
    pub error: f64,
    /// Height above the `ε`-inflated map; `None` outside the map footprint.
    pub clearance: Option<f64>,
    pub flags: SafetyFlags,
}

/// Aggregate figures of a simulated mission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    /// Arrival time at the goal, s.
    pub t_n: f64,
    pub waypoints: usize,
    pub samples: usize,
    pub max_tracking_error: f64,
    /// `None` if some rotor would have needed a negative squared speed.
    pub max_rotor_speed: Option<f64>,
    /// `None` if the vehicle left the map footprint.
    pub min_clearance_margin: Option<f64>,
    pub final_error: f64,
    pub rotor_violations: usize,
    pub tracking_violations: usize,
    pub clearance_violations: usize,
    /// `"ok"` or `"safety-violation"`.
    pub exit_category: String,
}

impl MissionSummary {
    pub fn is_safe(&self) -> bool {
        self.rotor_violations == 0 && self.tracking_violations == 0 && self.clearance_violations == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary is always serializable")
    }
}

/// Simulated mission: timed plan plus every sample of the closed loop.
#[derive(Debug, Clone)]
pub struct MissionTrace {
    pub trajectory: TimedTrajectory,
    pub records: Vec<TraceRecord>,
}

impl MissionTrace {
    pub fn summary(&self) -> MissionSummary {
        let mut max_err: f64 = 0.0;
        let mut max_rotor = Some(0.0f64);
        let mut min_clear: Option<f64> = None;
        let mut left_map = false;
        let (mut vr, mut vt, mut vc) = (0, 0, 0);
        for r in &self.records {
            max_err = max_err.max(r.error);
            max_rotor = match (max_rotor, r.rotors.max_speed()) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
            match r.clearance {
                Some(c) => min_clear = Some(min_clear.map_or(c, |m: f64| m.min(c))),
                None => left_map = true,
            }
            vr += usize::from(!r.flags.rotor);
            vt += usize::from(!r.flags.track);
            vc += usize::from(!r.flags.clear);
        }
        let mut summary = MissionSummary {
            t_n: self.trajectory.total_time(),
            waypoints: self.trajectory.waypoints().len(),
            samples: self.records.len(),
            max_tracking_error: max_err,
            max_rotor_speed: max_rotor,
            min_clearance_margin: if left_map { None } else { min_clear },
            final_error: self.records.last().map_or(0.0, |r| r.error),
            rotor_violations: vr,
            tracking_violations: vt,
            clearance_violations: vc,
            exit_category: String::new(),
        };
        summary.exit_category = if summary.is_safe() {
            "ok".into()
        } else {
            "safety-violation".into()
        };
        summary
    }

    /// Trace as CSV, with a version comment line and a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(160 * (self.records.len() + 2));
        out.push_str(TRACE_VERSION_LINE);
        out.push('\n');
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let s = &r.state;
            let [s1, s2, s3, s4] = r.rotors.signed_speeds();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                s.position.x,
                s.position.y,
                s.position.z,
                s.angles.x,
                s.angles.y,
                s.angles.z,
                s.thrust,
                s1,
                s2,
                s3,
                s4,
                r.error,
                u8::from(r.flags.rotor),
                u8::from(r.flags.track),
                u8::from(r.flags.clear),
            );
        }
        out
    }
}

/// Waypoint table with arrival times: `n,x,y,z,t`.
pub fn timed_table_csv(traj: &TimedTrajectory) -> String {
    let mut out = String::from("n,x,y,z,t\n");
    for (n, (p, t)) in traj
        .waypoints()
        .points
        .iter()
        .zip(traj.times())
        .enumerate()
    {
        let _ = writeln!(out, "{},{},{},{},{}", n + 1, p.x, p.y, p.z, t);
    }
    out
}
