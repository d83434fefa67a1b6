//! Time parameterization of a waypoint path.
//!
//! Every waypoint is a full stop (zero velocity, acceleration and jerk), so
//! each straight segment can be timed on its own: a segment's duration is the
//! shortest one, found by bisection, for which a simulated tracking run stays
//! within the rotor-speed and tracking-error limits.

use std::ops::ControlFlow;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{QpsParams, QpsState};
use crate::error::{Error, Result};
use crate::flatness::{FlatState, GainMatrix};
use crate::mission::sim::{step_count, ClosedLoop, StepRecord};
use crate::route::WaypointPath;
use crate::terrain::SafetyParams;

/// `σ₃` and its first three derivatives at `t ∈ [0, 1]`.
pub fn sigma3_eval(t: f64) -> Result<[f64; 4]> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("σ₃ argument {t} outside [0, 1]")));
    }
    Ok(sigma3_unchecked(t))
}

fn sigma3_unchecked(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let s = t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)));
    let d1 = t3 * (140.0 + t * (-420.0 + t * (420.0 - 140.0 * t)));
    let d2 = t2 * (420.0 + t * (-1680.0 + t * (2100.0 - 840.0 * t)));
    let d3 = t * (840.0 + t * (-5040.0 + t * (8400.0 - 4200.0 * t)));
    [s, d1, d2, d3]
}

/// Position and its first three time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub jerk: Vector3<f64>,
}

impl TrajectorySample {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
            jerk: Vector3::zeros(),
        }
    }

    /// Flat reference with zero yaw.
    pub fn to_flat(&self) -> FlatState {
        FlatState {
            position: self.position,
            velocity: self.velocity,
            acceleration: self.acceleration,
            jerk: self.jerk,
            yaw: 0.0,
            yaw_rate: 0.0,
        }
    }
}

/// Sample of the rest-to-rest move from `a` to `b` lasting `duration`, at local time `s`.
fn segment_sample(a: &Vector3<f64>, b: &Vector3<f64>, duration: f64, s: f64) -> TrajectorySample {
    let tau = (s / duration).clamp(0.0, 1.0);
    let [v, d1, d2, d3] = sigma3_unchecked(tau);
    let d = b - a;
    TrajectorySample {
        position: a + d * v,
        velocity: d * (d1 / duration),
        acceleration: d * (d2 / (duration * duration)),
        jerk: d * (d3 / (duration * duration * duration)),
    }
}

/// Waypoints with arrival times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedTrajectory {
    waypoints: WaypointPath,
    times: Vec<f64>,
}

impl TimedTrajectory {
    pub fn new(waypoints: WaypointPath, times: Vec<f64>) -> Result<Self> {
        if waypoints.len() != times.len() {
            return Err(Error::domain(format!(
                "{} waypoints but {} arrival times",
                waypoints.len(),
                times.len()
            )));
        }
        if times.first() != Some(&0.0) {
            return Err(Error::domain("first arrival time must be 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::domain("arrival times must be finite and strictly increasing"));
        }
        Ok(Self { waypoints, times })
    }

    /// Builds arrival times from per-segment durations.
    pub fn from_durations(waypoints: WaypointPath, durations: &[f64]) -> Result<Self> {
        let mut times = Vec::with_capacity(durations.len() + 1);
        times.push(0.0);
        let mut t = 0.0;
        for &d in durations {
            t += d;
            times.push(t);
        }
        Self::new(waypoints, times)
    }

    pub fn waypoints(&self) -> &WaypointPath {
        &self.waypoints
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn durations(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Arrival time at the last waypoint.
    pub fn total_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one waypoint")
    }

    /// Like [`eval_trajectory`] but holds the end points outside the mission window.
    pub fn sample_clamped(&self, t: f64) -> TrajectorySample {
        let pts = &self.waypoints.points;
        if t <= 0.0 || pts.len() == 1 {
            return TrajectorySample::at_rest(pts[0]);
        }
        if t >= self.total_time() {
            return TrajectorySample::at_rest(pts[pts.len() - 1]);
        }
        // Segment n with t_n <= t < t_{n+1}.
        let n = self.times.partition_point(|&tn| tn <= t) - 1;
        let (t0, t1) = (self.times[n], self.times[n + 1]);
        segment_sample(&pts[n], &pts[n + 1], t1 - t0, t - t0)
    }
}

/// Position, velocity, acceleration and jerk at mission time `t`.
pub fn eval_trajectory(traj: &TimedTrajectory, t: f64) -> Result<TrajectorySample> {
    if !(t >= 0.0 && t <= traj.total_time()) {
        return Err(Error::domain(format!(
            "time {t} outside mission window [0, {}]",
            traj.total_time()
        )));
    }
    Ok(traj.sample_clamped(t))
}

/// Bisection and simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporalConfig {
    /// Relative bracket width at which bisection stops.
    pub delta_t: f64,
    /// First duration tried per segment; `None` means segment length / 2 m/s.
    pub initial_guess: Option<f64>,
    /// Integration step, s. Segment durations are rounded up to multiples of it.
    pub dt_sim: f64,
    /// Time each segment from the state the vehicle actually reaches its
    /// first waypoint in, rather than from exact hover.
    pub chained: bool,
    /// Seconds of holding the segment's end point that must also stay within
    /// limits for a duration to count as Valid.
    pub settle: f64,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        Self {
            delta_t: 0.05,
            initial_guess: None,
            dt_sim: 1e-3,
            chained: true,
            settle: 2.0,
        }
    }
}

/// Speed used to turn a segment length into a default initial guess, m/s.
pub const GUESS_SPEED: f64 = 2.0;

impl TemporalConfig {
    /// Segments timed from exact hover with no settle window, independently.
    pub fn independent() -> Self {
        Self {
            chained: false,
            settle: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t.is_finite() && self.delta_t > 0.0) {
            return Err(Error::domain(format!("delta_t must be positive, got {}", self.delta_t)));
        }
        if let Some(g) = self.initial_guess {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::domain(format!("initial guess must be positive, got {g}")));
            }
        }
        if !(self.dt_sim.is_finite() && self.dt_sim > 0.0) {
            return Err(Error::domain(format!("dt_sim must be positive, got {}", self.dt_sim)));
        }
        if !(self.settle.is_finite() && self.settle >= 0.0) {
            return Err(Error::domain(format!("settle must be non-negative, got {}", self.settle)));
        }
        Ok(())
    }

    pub fn guess_for(&self, length: f64) -> f64 {
        self.initial_guess.unwrap_or(length / GUESS_SPEED)
    }
}

/// Everything a segment simulation needs.
#[derive(Debug, Clone, Copy)]
pub struct TrackingContext {
    pub params: QpsParams,
    pub gains: GainMatrix,
    pub safety: SafetyParams,
    pub dt_sim: f64,
}

impl TrackingContext {
    pub fn closed_loop(&self) -> ClosedLoop {
        ClosedLoop::new(self.params, self.gains)
    }

    /// `duration` rounded up to a whole number of integration steps.
    pub fn quantize(&self, duration: f64) -> f64 {
        step_count(duration, self.dt_sim).max(1) as f64 * self.dt_sim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid,
}

impl Verdict {
    pub fn is_valid(self) -> bool {
        self == Verdict::Valid
    }
}

/// Which limit a segment run broke first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    RotorSpeed,
    Tracking,
    Singularity,
    Blowup,
}

/// Outcome of simulating one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentReport {
    pub violation: Option<(f64, Violation)>,
    pub max_error: f64,
    /// Largest rotor speed seen; NaN if a squared speed went negative.
    pub max_rotor_speed: f64,
    /// State on arrival at the end point (before any settle window); only
    /// meaningful when no violation stopped the run early.
    pub end_state: QpsState,
}

impl SegmentReport {
    pub fn verdict(&self) -> Verdict {
        if self.violation.is_none() {
            Verdict::Valid
        } else {
            Verdict::Invalid
        }
    }
}

/// Flies the rest-to-rest move `a → b` lasting `duration` from `x0`, passing
/// every sample (local time) to `visit`. This is the single routine used both
/// for timing segments and for flying missions.
pub fn fly_segment<V>(
    cl: &ClosedLoop,
    x0: QpsState,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    duration: f64,
    dt: f64,
    visit: V,
) -> Result<QpsState>
where
    V: FnMut(&StepRecord) -> ControlFlow<()>,
{
    cl.run(x0, duration, dt, |t| segment_sample(a, b, duration, t).to_flat(), visit)
}

/// Holds `p` for `duration` seconds from `x0`.
pub fn fly_hold<V>(
    cl: &ClosedLoop,
    x0: QpsState,
    p: &Vector3<f64>,
    duration: f64,
    dt: f64,
    visit: V,
) -> Result<QpsState>
where
    V: FnMut(&StepRecord) -> ControlFlow<()>,
{
    let rest = FlatState::at_rest(*p);
    cl.run(x0, duration, dt, |_| rest, visit)
}

/// Simulates `a → b` from `x0` over `duration` rounded up to the step grid,
/// then holds `b` for `settle` seconds, stopping at the first violated limit.
pub fn simulate_segment_from(
    x0: &QpsState,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    duration: f64,
    settle: f64,
    ctx: &TrackingContext,
) -> Result<SegmentReport> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::domain(format!("segment duration must be positive, got {duration}")));
    }
    let duration = ctx.quantize(duration);
    let cl = ctx.closed_loop();
    let mut report = SegmentReport {
        violation: None,
        max_error: 0.0,
        max_rotor_speed: 0.0,
        end_state: *x0,
    };
    let limits = ctx.safety;
    let check = |report: &mut SegmentReport, offset: f64, rec: &StepRecord| {
        report.max_error = report.max_error.max(rec.error);
        let rotor_ok = match rec.rotors.max_speed() {
            Some(s) => {
                report.max_rotor_speed = report.max_rotor_speed.max(s);
                s <= limits.s_max
            }
            None => {
                report.max_rotor_speed = f64::NAN;
                false
            }
        };
        if !rotor_ok {
            report.violation = Some((offset + rec.t, Violation::RotorSpeed));
        } else if rec.error > limits.delta {
            report.violation = Some((offset + rec.t, Violation::Tracking));
        }
        if report.violation.is_some() {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    };
    let mut outcome = fly_segment(&cl, *x0, a, b, duration, ctx.dt_sim, |rec| {
        check(&mut report, 0.0, rec)
    });
    if let Ok(end) = outcome {
        if report.violation.is_none() {
            report.end_state = end;
            if settle > 0.0 {
                outcome = fly_hold(&cl, end, b, ctx.quantize(settle), ctx.dt_sim, |rec| {
                    check(&mut report, duration, rec)
                });
            }
        }
    }
    match outcome {
        Ok(_) => {}
        Err(Error::Singularity(_)) => report.violation = Some((f64::NAN, Violation::Singularity)),
        Err(Error::NumericalBlowup(_)) => report.violation = Some((f64::NAN, Violation::Blowup)),
        Err(e) => return Err(e),
    }
    Ok(report)
}

/// Simulates `a → b` from exact hover at `a` with no settle window.
pub fn simulate_segment(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    duration: f64,
    ctx: &TrackingContext,
) -> Result<SegmentReport> {
    simulate_segment_from(&QpsState::hover(*a, &ctx.params), a, b, duration, 0.0, ctx)
}

/// Valid iff the move from exact hover keeps every rotor speed in `[0, s_max]`
/// and the tracking error within `δ` at every step.
pub fn segment_test(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    duration: f64,
    ctx: &TrackingContext,
) -> Result<Verdict> {
    Ok(simulate_segment(a, b, duration, ctx)?.verdict())
}

/// Doublings allowed before giving up, and halvings allowed in the second
/// phase when nothing below the first valid guess ever fails.
pub const MAX_DOUBLINGS: u32 = 30;
pub const MAX_HALVINGS: u32 = 30;

/// Result of [`bisect_time`] with the final bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    /// Smallest duration verified Valid.
    pub t_max: f64,
    /// Largest duration seen Invalid, or 0 if none was.
    pub t_min: f64,
    /// Midpoint used in the final stopping test.
    pub t_mid: f64,
    pub evaluations: usize,
    /// The bracket never closed because every midpoint was Valid.
    pub hit_floor: bool,
}

impl Bisection {
    pub fn ratio(&self) -> f64 {
        (self.t_max - self.t_min) / self.t_mid
    }
}

/// Two-phase doubling-then-bisection search for the shortest Valid duration.
///
/// Phase one doubles the guess until it is Valid, trailing the lower end on the
/// last Invalid guess. Phase two tests midpoints until
/// `(t_max − t_min) / t_mid ≤ δ_t`, where `t_mid` is the midpoint tested on
/// the previous pass. Returns `t_max`, which is always a tested Valid value.
pub fn bisect_time<F>(mut test: F, initial_guess: f64, delta_t: f64) -> Result<Bisection>
where
    F: FnMut(f64) -> Result<Verdict>,
{
    if !(initial_guess.is_finite() && initial_guess > 0.0) {
        return Err(Error::domain(format!(
            "initial guess must be positive, got {initial_guess}"
        )));
    }
    if !(delta_t.is_finite() && delta_t > 0.0) {
        return Err(Error::domain(format!("delta_t must be positive, got {delta_t}")));
    }
    let mut evaluations = 0;
    let mut t_min = 0.0;
    let mut t_max = initial_guess;
    let mut doublings = 0;
    loop {
        evaluations += 1;
        if test(t_max)?.is_valid() {
            break;
        }
        if doublings == MAX_DOUBLINGS {
            return Err(Error::NoFeasibleTime(format!(
                "no valid duration up to {t_max} s"
            )));
        }
        t_min = t_max;
        t_max *= 2.0;
        doublings += 1;
    }

    let floor = initial_guess * 0.5f64.powi(MAX_HALVINGS as i32);
    let mut t_mid = 0.5 * (t_max + t_min);
    let mut hit_floor = false;
    while (t_max - t_min) / t_mid > delta_t {
        if t_min == 0.0 && t_max <= floor {
            hit_floor = true;
            break;
        }
        t_mid = 0.5 * (t_max + t_min);
        evaluations += 1;
        if test(t_mid)?.is_valid() {
            t_max = t_mid;
        } else {
            t_min = t_mid;
        }
    }
    Ok(Bisection {
        t_max,
        t_min,
        t_mid,
        evaluations,
        hit_floor,
    })
}

fn time_segment(
    n: usize,
    x0: &QpsState,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    config: &TemporalConfig,
    ctx: &TrackingContext,
) -> Result<(f64, QpsState)> {
    let length = (b - a).norm();
    if length == 0.0 {
        return Err(Error::domain(format!("waypoints {} and {} coincide", n + 1, n + 2)));
    }
    let found = bisect_time(
        |t| Ok(simulate_segment_from(x0, a, b, t, config.settle, ctx)?.verdict()),
        config.guess_for(length),
        config.delta_t,
    )
    .map_err(|e| match e {
        Error::NoFeasibleTime(m) => Error::NoFeasibleTime(format!("segment {}: {m}", n + 1)),
        other => other,
    })?;
    let duration = ctx.quantize(found.t_max);
    let end = simulate_segment_from(x0, a, b, duration, 0.0, ctx)?.end_state;
    Ok((duration, end))
}

/// Assigns each segment its shortest Valid duration (rounded up to the
/// integration grid) and chains the durations into arrival times.
///
/// In chained mode segments are timed in order, each from the state the
/// previous one hands over; otherwise every segment starts from exact hover
/// and the searches run in parallel.
pub fn plan_times(
    wp: &WaypointPath,
    config: &TemporalConfig,
    ctx: &TrackingContext,
) -> Result<TimedTrajectory> {
    config.validate()?;
    let ctx = TrackingContext {
        dt_sim: config.dt_sim,
        ..*ctx
    };
    let pts = &wp.points;
    let durations = if config.chained {
        let mut x = QpsState::hover(pts[0], &ctx.params);
        let mut durations = Vec::with_capacity(pts.len().saturating_sub(1));
        for (n, w) in pts.windows(2).enumerate() {
            let (d, end) = time_segment(n, &x, &w[0], &w[1], config, &ctx)?;
            durations.push(d);
            x = end;
        }
        durations
    } else {
        pts.par_windows(2)
            .enumerate()
            .map(|(n, w)| {
                let x0 = QpsState::hover(w[0], &ctx.params);
                time_segment(n, &x0, &w[0], &w[1], config, &ctx).map(|(d, _)| d)
            })
            .collect::<Result<Vec<_>>>()?
    };
    TimedTrajectory::from_durations(wp.clone(), &durations)
}
