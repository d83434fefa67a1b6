//! Rigid-body model of the quadcopter-payload system (QPS).
//!
//! Attitude follows the 3-2-1 (yaw, pitch, roll) Euler convention. The body
//! axes are the rows of [`rotation_matrix`]; the yaw-only frame `c` and the
//! yaw-pitch frame `d` are the intermediate frames used to write the angular
//! velocity as `ω = ψ̇ ĉ₃ + θ̇ d̂₂ + φ̇ b̂₁`.

use nalgebra::{Matrix3, Matrix4, SVector, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard gravity used throughout, m/s².
pub const GRAVITY: f64 = 9.81;

/// Physical parameters of the combined vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpsParams {
    /// Total mass, kg.
    pub mass: f64,
    /// Diagonal body-frame inertia `(J_x, J_y, J_z)`, kg·m².
    pub inertia: [f64; 3],
    /// Thrust coefficient `b`, N·s²/rad².
    pub thrust_coeff: f64,
    /// Yaw drag coefficient `k`, N·m·s²/rad².
    pub drag_coeff: f64,
    /// Arm length `l`, m.
    pub arm_length: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
}

impl QpsParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("mass", self.mass),
            ("inertia.x", self.inertia[0]),
            ("inertia.y", self.inertia[1]),
            ("inertia.z", self.inertia[2]),
            ("thrust_coeff", self.thrust_coeff),
            ("drag_coeff", self.drag_coeff),
            ("arm_length", self.arm_length),
            ("gravity", self.gravity),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn inertia_vector(&self) -> Vector3<f64> {
        Vector3::from(self.inertia)
    }

    /// Thrust that balances gravity, N.
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }

    /// The 4x4 map from squared rotor speeds to `(p, τ_φ, τ_θ, τ_ψ)`.
    pub fn mixing_matrix(&self) -> Matrix4<f64> {
        let (b, k, l) = (self.thrust_coeff, self.drag_coeff, self.arm_length);
        Matrix4::new(
            b, b, b, b, //
            0.0, -b * l, 0.0, b * l, //
            -b * l, 0.0, b * l, 0.0, //
            -k, k, -k, k,
        )
    }
}

impl Default for QpsParams {
    /// Quadcopter and payload of the reference mission, rigidly joined 0.2 m apart.
    fn default() -> Self {
        let combined = combine_inertia(
            RigidBody::REFERENCE_QUAD,
            RigidBody::REFERENCE_PAYLOAD,
            0.2,
        );
        Self {
            mass: combined.mass,
            inertia: combined.inertia,
            thrust_coeff: 3e-5,
            drag_coeff: 1.1e-6,
            arm_length: 0.25,
            gravity: GRAVITY,
        }
    }
}

/// Mass and diagonal inertia of one body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidBody {
    pub mass: f64,
    pub inertia: [f64; 3],
}

impl RigidBody {
    pub const REFERENCE_QUAD: RigidBody = RigidBody {
        mass: 0.5,
        inertia: [0.0196, 0.0196, 0.0264],
    };
    pub const REFERENCE_PAYLOAD: RigidBody = RigidBody {
        mass: 0.3,
        inertia: [0.005, 0.005, 0.005],
    };
}

/// Result of joining a quadcopter and a payload along the body z axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedBody {
    pub mass: f64,
    pub inertia: [f64; 3],
    /// Distance from the combined center of mass to the quadcopter's, m.
    pub offset: f64,
}

/// Parallel-axis combination of a quadcopter and a payload hung `d` below it.
pub fn combine_inertia(quad: RigidBody, payload: RigidBody, d: f64) -> CombinedBody {
    let mass = quad.mass + payload.mass;
    let offset = d * payload.mass / mass;
    let lever = quad.mass * offset * offset + payload.mass * (d - offset) * (d - offset);
    CombinedBody {
        mass,
        inertia: [
            quad.inertia[0] + payload.inertia[0] + lever,
            quad.inertia[1] + payload.inertia[1] + lever,
            quad.inertia[2] + payload.inertia[2],
        ],
        offset,
    }
}

/// The 14-component state `[r, ṙ, (φ, θ, ψ), (φ̇, θ̇, ψ̇), p, ṗ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpsState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Roll, pitch, yaw (rad).
    pub angles: Vector3<f64>,
    /// Euler angle rates (rad/s).
    pub rates: Vector3<f64>,
    /// Thrust magnitude p (N).
    pub thrust: f64,
    /// Thrust rate ṗ (N/s).
    pub thrust_rate: f64,
}

impl QpsState {
    /// Level hover at `position` with thrust balancing gravity.
    pub fn hover(position: Vector3<f64>, params: &QpsParams) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            angles: Vector3::zeros(),
            rates: Vector3::zeros(),
            thrust: params.hover_thrust(),
            thrust_rate: 0.0,
        }
    }

    pub fn to_vector(&self) -> SVector<f64, 14> {
        let mut v = SVector::<f64, 14>::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.position);
        v.fixed_rows_mut::<3>(3).copy_from(&self.velocity);
        v.fixed_rows_mut::<3>(6).copy_from(&self.angles);
        v.fixed_rows_mut::<3>(9).copy_from(&self.rates);
        v[12] = self.thrust;
        v[13] = self.thrust_rate;
        v
    }

    pub fn from_vector(v: &SVector<f64, 14>) -> Self {
        Self {
            position: v.fixed_rows::<3>(0).into_owned(),
            velocity: v.fixed_rows::<3>(3).into_owned(),
            angles: v.fixed_rows::<3>(6).into_owned(),
            rates: v.fixed_rows::<3>(9).into_owned(),
            thrust: v[12],
            thrust_rate: v[13],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

/// Control input `u = [p̈, φ̈, θ̈, ψ̈]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub thrust_accel: f64,
    pub angular_accel: Vector3<f64>,
}

impl ControlInput {
    pub fn from_vector(u: &Vector4<f64>) -> Self {
        Self {
            thrust_accel: u[0],
            angular_accel: Vector3::new(u[1], u[2], u[3]),
        }
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(
            self.thrust_accel,
            self.angular_accel.x,
            self.angular_accel.y,
            self.angular_accel.z,
        )
    }
}

/// `S(φ, θ, ψ)` for the 3-2-1 convention; rows are the body axes in inertial
/// coordinates.
pub fn rotation_matrix(phi: f64, theta: f64, psi: f64) -> Matrix3<f64> {
    let (sf, cf) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    Matrix3::new(
        ct * cp,
        ct * sp,
        -st,
        sf * st * cp - cf * sp,
        sf * st * sp + cf * cp,
        sf * ct,
        cf * st * cp + sf * sp,
        cf * st * sp - sf * cp,
        cf * ct,
    )
}

/// Body axes plus the intermediate-frame axes that appear in `ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSet {
    pub b1: Vector3<f64>,
    pub b2: Vector3<f64>,
    pub b3: Vector3<f64>,
    pub c3: Vector3<f64>,
    pub d2: Vector3<f64>,
}

pub fn frames(phi: f64, theta: f64, psi: f64) -> FrameSet {
    let s = rotation_matrix(phi, theta, psi);
    let (sp, cp) = psi.sin_cos();
    FrameSet {
        b1: s.row(0).transpose(),
        b2: s.row(1).transpose(),
        b3: s.row(2).transpose(),
        // Yaw about ê₃ leaves the vertical axis fixed.
        c3: Vector3::z(),
        // Pitch does not move the second axis of the yaw frame.
        d2: Vector3::new(-sp, cp, 0.0),
    }
}

fn frames_of(angles: &Vector3<f64>) -> FrameSet {
    frames(angles.x, angles.y, angles.z)
}

/// `ω = ψ̇ ĉ₃ + θ̇ d̂₂ + φ̇ b̂₁` in inertial coordinates.
pub fn angular_velocity(angles: &Vector3<f64>, rates: &Vector3<f64>) -> Vector3<f64> {
    let f = frames_of(angles);
    omega_from_frames(&f, rates)
}

fn omega_from_frames(f: &FrameSet, rates: &Vector3<f64>) -> Vector3<f64> {
    f.c3 * rates.z + f.d2 * rates.y + f.b1 * rates.x
}

/// Terms of `ω̇` that do not depend on the Euler accelerations.
fn omega_dot_residual(f: &FrameSet, rates: &Vector3<f64>) -> Vector3<f64> {
    let (phi_d, theta_d, psi_d) = (rates.x, rates.y, rates.z);
    f.c3.cross(&f.d2) * (theta_d * psi_d) + (f.c3 * psi_d + f.d2 * theta_d).cross(&f.b1) * phi_d
}

/// Angular acceleration in inertial coordinates for Euler accelerations `accels`.
pub fn angular_acceleration(
    angles: &Vector3<f64>,
    rates: &Vector3<f64>,
    accels: &Vector3<f64>,
) -> Vector3<f64> {
    let f = frames_of(angles);
    f.c3 * accels.z + f.d2 * accels.y + f.b1 * accels.x + omega_dot_residual(&f, rates)
}

pub(crate) fn angular_acceleration_residual(
    angles: &Vector3<f64>,
    rates: &Vector3<f64>,
) -> Vector3<f64> {
    omega_dot_residual(&frames_of(angles), rates)
}

/// `ẋ = f(x) + G u`.
pub fn state_derivative(x: &QpsState, u: &ControlInput, params: &QpsParams) -> QpsState {
    let b3 = frames_of(&x.angles).b3;
    QpsState {
        position: x.velocity,
        velocity: b3 * (x.thrust / params.mass) - Vector3::z() * params.gravity,
        angles: x.rates,
        rates: u.angular_accel,
        thrust: x.thrust_rate,
        thrust_rate: u.thrust_accel,
    }
}

/// Body-frame torque required to realize the angular acceleration implied by `u`.
///
/// Both `ω` and `ω̇` are rotated into the body frame, where the inertia is
/// diagonal, and `τ_B = J ω̇_B + ω_B × J ω_B`.
pub fn body_torque(x: &QpsState, u: &ControlInput, params: &QpsParams) -> Vector3<f64> {
    let s = rotation_matrix(x.angles.x, x.angles.y, x.angles.z);
    let omega_b = s * angular_velocity(&x.angles, &x.rates);
    let omega_dot_b = s * angular_acceleration(&x.angles, &x.rates, &u.angular_accel);
    let j = params.inertia_vector();
    j.component_mul(&omega_dot_b) + omega_b.cross(&j.component_mul(&omega_b))
}

/// Squared and actual rotor speeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorSpeeds {
    pub squares: [f64; 4],
}

impl RotorSpeeds {
    /// Rotor speeds in rad/s; an infeasible (negative) square maps to NaN.
    pub fn speeds(&self) -> [f64; 4] {
        self.squares.map(|s2| if s2 >= 0.0 { s2.sqrt() } else { f64::NAN })
    }

    /// Signed square root: negative when the rotor would need a negative square.
    pub fn signed_speeds(&self) -> [f64; 4] {
        self.squares.map(|s2| s2.signum() * s2.abs().sqrt())
    }

    pub fn is_feasible(&self) -> bool {
        self.squares.iter().all(|&s2| s2 >= 0.0)
    }

    /// First rotor (1-based) with a negative square.
    pub fn infeasible_rotor(&self) -> Option<usize> {
        self.squares.iter().position(|&s2| s2 < 0.0).map(|i| i + 1)
    }

    /// Largest rotor speed, or `None` when infeasible.
    pub fn max_speed(&self) -> Option<f64> {
        self.is_feasible()
            .then(|| self.speeds().into_iter().fold(0.0, f64::max))
    }

    /// True iff every rotor speed exists and lies in `[0, s_max]`.
    pub fn within(&self, s_max: f64) -> bool {
        self.max_speed().is_some_and(|m| m <= s_max)
    }
}

/// Solves the mixing system for squared rotor speeds without judging feasibility.
pub fn rotor_squares(thrust: f64, torque: &Vector3<f64>, params: &QpsParams) -> RotorSpeeds {
    let (b, k, l) = (params.thrust_coeff, params.drag_coeff, params.arm_length);
    let collective = thrust / b;
    let yaw = torque.z / k;
    let roll = torque.x / (b * l);
    let pitch = torque.y / (b * l);
    let odd = 0.5 * (collective - yaw);
    let even = 0.5 * (collective + yaw);
    RotorSpeeds {
        squares: [
            0.5 * (odd - pitch),
            0.5 * (even - roll),
            0.5 * (odd + pitch),
            0.5 * (even + roll),
        ],
    }
}

/// Rotor speeds realizing thrust `p` and body torque `τ_B`.
pub fn rotor_speeds(thrust: f64, torque: &Vector3<f64>, params: &QpsParams) -> Result<RotorSpeeds> {
    let rs = rotor_squares(thrust, torque, params);
    match rs.infeasible_rotor() {
        Some(rotor) => Err(Error::InfeasibleThrust {
            rotor,
            square: rs.squares[rotor - 1],
        }),
        None => Ok(rs),
    }
}
