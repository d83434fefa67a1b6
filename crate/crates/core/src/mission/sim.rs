//! Fixed-step closed-loop simulation.

use std::ops::ControlFlow;

use nalgebra::Vector3;

use crate::dynamics::{
    body_torque, rotor_squares, state_derivative, ControlInput, QpsParams, QpsState, RotorSpeeds,
};
use crate::error::{Error, Result};
use crate::flatness::{control_step, FlatState, GainMatrix};

/// Classical fourth-order Runge–Kutta step with `u` held over the step.
pub fn rk4_step(x: &QpsState, u: &ControlInput, dt: f64, params: &QpsParams) -> Result<QpsState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::domain(format!("step size must be positive, got {dt}")));
    }
    let f = |s: &QpsState| state_derivative(s, u, params).to_vector();
    let x0 = x.to_vector();
    let k1 = f(x);
    let k2 = f(&QpsState::from_vector(&(x0 + k1 * (dt / 2.0))));
    let k3 = f(&QpsState::from_vector(&(x0 + k2 * (dt / 2.0))));
    let k4 = f(&QpsState::from_vector(&(x0 + k3 * dt)));
    let next = QpsState::from_vector(&(x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)));
    if !next.is_finite() {
        return Err(Error::NumericalBlowup(format!(
            "non-finite state after a {dt} s step from r = {:?}",
            x.position.as_slice()
        )));
    }
    Ok(next)
}

/// What the closed loop did at one sample time.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub t: f64,
    pub state: QpsState,
    pub input: ControlInput,
    pub rotors: RotorSpeeds,
    pub desired: FlatState,
    /// `‖r − p(t)‖`.
    pub error: f64,
}

impl StepRecord {
    pub fn error_vector(&self) -> Vector3<f64> {
        self.state.position - self.desired.position
    }
}

/// Controller plus plant.
#[derive(Debug, Clone, Copy)]
pub struct ClosedLoop {
    pub params: QpsParams,
    pub gains: GainMatrix,
}

impl ClosedLoop {
    pub fn new(params: QpsParams, gains: GainMatrix) -> Self {
        Self { params, gains }
    }

    /// Evaluates the controller and the rotor speeds it implies.
    pub fn record(&self, t: f64, x: &QpsState, desired: FlatState) -> Result<StepRecord> {
        let input = control_step(x, &desired, &self.gains, &self.params)?;
        let torque = body_torque(x, &input, &self.params);
        Ok(StepRecord {
            t,
            state: *x,
            input,
            rotors: rotor_squares(x.thrust, &torque, &self.params),
            desired,
            error: (x.position - desired.position).norm(),
        })
    }

    /// Runs from `x0` over `[0, horizon]`, sampling at `t_k = k·dt`; the last
    /// step is shortened to land exactly on `horizon`. `visit` sees every
    /// sample including the final one and may stop the run early.
    ///
    /// Returns the state at the last visited sample.
    pub fn run<D, V>(
        &self,
        x0: QpsState,
        horizon: f64,
        dt: f64,
        desired: D,
        mut visit: V,
    ) -> Result<QpsState>
    where
        D: Fn(f64) -> FlatState,
        V: FnMut(&StepRecord) -> ControlFlow<()>,
    {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::domain(format!("step size must be positive, got {dt}")));
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::domain(format!("horizon must be non-negative, got {horizon}")));
        }
        let steps = step_count(horizon, dt);
        let mut x = x0;
        for k in 0..=steps {
            let t = if k == steps { horizon } else { k as f64 * dt };
            let rec = self.record(t, &x, desired(t))?;
            if visit(&rec).is_break() || k == steps {
                break;
            }
            let t_next = if k + 1 == steps {
                horizon
            } else {
                (k + 1) as f64 * dt
            };
            x = rk4_step(&x, &rec.input, t_next - t, &self.params)?;
        }
        Ok(x)
    }
}

/// Number of steps of at most `dt` needed to cover `horizon`.
pub fn step_count(horizon: f64, dt: f64) -> usize {
    let n = (horizon / dt).ceil();
    // Guard against a ratio like 3.0000000000000004 adding a sliver step.
    let n = if n > 0.0 && (n - 1.0) * dt >= horizon * (1.0 - 1e-12) {
        n - 1.0
    } else {
        n
    };
    n.max(0.0) as usize
}
