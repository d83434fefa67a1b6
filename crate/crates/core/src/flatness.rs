//! Input-state feedback linearization.
//!
//! The flat state `z = [r, ṙ, r̈, r⃛, ψ, ψ̇]` evolves as four decoupled integrator
//! chains (three of length four for position, one of length two for yaw)
//! driven by `v = [r⁗, ψ̈]`. The physical input `u = [p̈, φ̈, θ̈, ψ̈]` maps to `v`
//! through `v = M u + N`, so the linear law `v = K (z_d - z)` is realized by
//! `u = M⁻¹ (K (z_d - z) - N)`.

use nalgebra::linalg::Schur;
use nalgebra::{Complex, Matrix3, Matrix4, SMatrix, SVector, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    angular_acceleration_residual, angular_velocity, frames, ControlInput, QpsParams, QpsState,
};
use crate::error::{Error, Result};

/// Smallest thrust magnitude (N) at which the flat inversion is attempted.
pub const MIN_THRUST: f64 = 0.1;
/// Largest roll or pitch magnitude (rad) accepted by the controller: 80°.
pub const MAX_TILT: f64 = 80.0 * std::f64::consts::PI / 180.0;

/// Position through jerk plus yaw and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlatState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub jerk: Vector3<f64>,
    pub yaw: f64,
    pub yaw_rate: f64,
}

impl FlatState {
    /// Rest at `position` with zero yaw: the full-stop flat state.
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            ..Self::default()
        }
    }

    /// Flat vector `[x y z ẋ ẏ ż ẍ ÿ z̈ x⃛ y⃛ z⃛ ψ ψ̇]`.
    pub fn to_vector(&self) -> SVector<f64, 14> {
        let mut v = SVector::<f64, 14>::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.position);
        v.fixed_rows_mut::<3>(3).copy_from(&self.velocity);
        v.fixed_rows_mut::<3>(6).copy_from(&self.acceleration);
        v.fixed_rows_mut::<3>(9).copy_from(&self.jerk);
        v[12] = self.yaw;
        v[13] = self.yaw_rate;
        v
    }

    pub fn from_vector(v: &SVector<f64, 14>) -> Self {
        Self {
            position: v.fixed_rows::<3>(0).into_owned(),
            velocity: v.fixed_rows::<3>(3).into_owned(),
            acceleration: v.fixed_rows::<3>(6).into_owned(),
            jerk: v.fixed_rows::<3>(9).into_owned(),
            yaw: v[12],
            yaw_rate: v[13],
        }
    }
}

/// Flat-space acceleration and jerk from the physical state.
pub fn state_to_flat(x: &QpsState, params: &QpsParams) -> FlatState {
    let f = frames(x.angles.x, x.angles.y, x.angles.z);
    let omega = angular_velocity(&x.angles, &x.rates);
    let m = params.mass;
    FlatState {
        position: x.position,
        velocity: x.velocity,
        acceleration: f.b3 * (x.thrust / m) - Vector3::z() * params.gravity,
        jerk: (f.b3 * x.thrust_rate + omega.cross(&f.b3) * x.thrust) / m,
        yaw: x.angles.z,
        yaw_rate: x.rates.z,
    }
}

fn check_attitude(phi: f64, theta: f64) -> Result<()> {
    if phi.abs() >= MAX_TILT || theta.abs() >= MAX_TILT {
        return Err(Error::Singularity(format!(
            "attitude (roll {:.1}°, pitch {:.1}°) exceeds the {:.0}° tilt limit",
            phi.to_degrees(),
            theta.to_degrees(),
            MAX_TILT.to_degrees()
        )));
    }
    Ok(())
}

fn check_thrust(p: f64) -> Result<()> {
    if !(p >= MIN_THRUST) {
        return Err(Error::Singularity(format!(
            "thrust {p:.3e} N is below {MIN_THRUST} N"
        )));
    }
    Ok(())
}

/// Inverse of [`state_to_flat`].
///
/// Thrust direction comes from the required acceleration; roll and pitch are
/// read off that direction in the yaw-aligned frame, and `(ṗ, φ̇, θ̇)` solve the
/// linear jerk relation.
pub fn flat_to_state(z: &FlatState, params: &QpsParams) -> Result<QpsState> {
    let m = params.mass;
    let t = (z.acceleration + Vector3::z() * params.gravity) * m;
    let p = t.norm();
    check_thrust(p)?;
    let b3 = t / p;

    let psi = z.yaw;
    let (sp, cp) = psi.sin_cos();
    let c1 = Vector3::new(cp, sp, 0.0);
    let c2 = Vector3::new(-sp, cp, 0.0);
    // In the yaw frame b̂₃ = (cos φ sin θ, -sin φ, cos φ cos θ).
    let phi = (-c2.dot(&b3)).clamp(-1.0, 1.0).asin();
    let theta = c1.dot(&b3).atan2(b3.z);
    check_attitude(phi, theta)?;

    let f = frames(phi, theta, psi);
    let jac = Matrix3::from_columns(&[
        f.b3 / m,
        -f.b2 * (p / m),
        f.d2.cross(&f.b3) * (p / m),
    ]);
    let rhs = z.jerk - f.c3.cross(&f.b3) * (p / m * z.yaw_rate);
    let sol = jac
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singularity("jerk map is not invertible".into()))?;

    Ok(QpsState {
        position: z.position,
        velocity: z.velocity,
        angles: Vector3::new(phi, theta, psi),
        rates: Vector3::new(sol[1], sol[2], z.yaw_rate),
        thrust: p,
        thrust_rate: sol[0],
    })
}

/// `v = M u + N` at a given state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoupling {
    pub m: Matrix4<f64>,
    pub n: Vector4<f64>,
}

impl Decoupling {
    pub fn apply(&self, u: &ControlInput) -> Vector4<f64> {
        self.m * u.to_vector() + self.n
    }
}

/// Builds `M` and the full drift term `N` of the fourth derivative of position.
///
/// Differentiating `r⃛ = (ṗ/m) b̂₃ + (p/m)(ω × b̂₃)` gives
/// `r⁗ = (p̈/m) b̂₃ + (2ṗ/m)(ω × b̂₃) + (p/m)(ω̇ × b̂₃) + (p/m) ω × (ω × b̂₃)`;
/// every term not multiplied by `u` goes into `N`.
pub fn decoupling(x: &QpsState, params: &QpsParams) -> Result<Decoupling> {
    check_thrust(x.thrust)?;
    check_attitude(x.angles.x, x.angles.y)?;
    let m = params.mass;
    let p = x.thrust;
    let f = frames(x.angles.x, x.angles.y, x.angles.z);
    let k = p / m;

    let cols = [
        f.b3 / m,
        -f.b2 * k,
        f.d2.cross(&f.b3) * k,
        f.c3.cross(&f.b3) * k,
    ];
    let mut mm = Matrix4::zeros();
    for (c, col) in cols.iter().enumerate() {
        mm.fixed_view_mut::<3, 1>(0, c).copy_from(col);
    }
    mm[(3, 3)] = 1.0;

    let omega = angular_velocity(&x.angles, &x.rates);
    let w_b3 = omega.cross(&f.b3);
    let residual = angular_acceleration_residual(&x.angles, &x.rates);
    let drift = w_b3 * (2.0 * x.thrust_rate / m) + (residual.cross(&f.b3) + omega.cross(&w_b3)) * k;
    Ok(Decoupling {
        m: mm,
        n: Vector4::new(drift.x, drift.y, drift.z, 0.0),
    })
}

/// Requested closed-loop poles per integrator chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoleSets {
    pub x: [f64; 4],
    pub y: [f64; 4],
    pub z: [f64; 4],
    pub yaw: [f64; 2],
}

impl Default for PoleSets {
    fn default() -> Self {
        let chain = [-2.0, -2.5, -3.0, -3.5];
        Self {
            x: chain,
            y: chain,
            z: chain,
            yaw: [-3.0, -4.0],
        }
    }
}

/// Coefficients `[c₀, c₁, …, c_{n-1}]` of the monic polynomial `∏(s - λᵢ)`.
pub fn characteristic_coefficients(poles: &[f64]) -> Vec<f64> {
    // Ascending powers, leading 1 implicit at the end.
    let mut coeffs = vec![1.0];
    for &root in poles {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= root * c;
        }
        coeffs = next;
    }
    coeffs.pop();
    coeffs
}

/// Feedback gain `K` (4x14) acting on `z_d - z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainMatrix {
    pub k: SMatrix<f64, 4, 14>,
}

impl GainMatrix {
    /// `A - B K` of the flat dynamics.
    pub fn closed_loop(&self) -> SMatrix<f64, 14, 14> {
        let (a, b) = flat_dynamics();
        a - b * self.k
    }

    /// Eigenvalues of the closed loop, or `None` if the Schur iteration does
    /// not converge (repeated poles make it slow to split blocks).
    pub fn closed_loop_eigenvalues(&self) -> Option<Vec<Complex<f64>>> {
        let schur = Schur::try_new(self.closed_loop(), 1e-12, 100_000)?;
        Some(schur.complex_eigenvalues().iter().copied().collect())
    }

    pub fn is_hurwitz(&self) -> bool {
        self.closed_loop_eigenvalues()
            .is_some_and(|ev| ev.iter().all(|e| e.re < 0.0))
    }
}

/// `(A, B)` of `ż = A z + B v`.
pub fn flat_dynamics() -> (SMatrix<f64, 14, 14>, SMatrix<f64, 14, 4>) {
    let mut a = SMatrix::<f64, 14, 14>::zeros();
    for i in 0..9 {
        a[(i, i + 3)] = 1.0;
    }
    a[(12, 13)] = 1.0;
    let mut b = SMatrix::<f64, 14, 4>::zeros();
    for i in 0..3 {
        b[(9 + i, i)] = 1.0;
    }
    b[(13, 3)] = 1.0;
    (a, b)
}

/// Places the requested poles on each integrator chain.
pub fn design_gains(poles: &PoleSets) -> Result<GainMatrix> {
    let all = poles
        .x
        .iter()
        .chain(&poles.y)
        .chain(&poles.z)
        .chain(&poles.yaw);
    if let Some(bad) = all.copied().find(|p| !(p.is_finite() && *p < 0.0)) {
        return Err(Error::domain(format!("pole {bad} is not strictly negative")));
    }
    let mut k = SMatrix::<f64, 4, 14>::zeros();
    for (axis, chain) in [poles.x, poles.y, poles.z].iter().enumerate() {
        for (order, c) in characteristic_coefficients(chain).into_iter().enumerate() {
            k[(axis, axis + 3 * order)] = c;
        }
    }
    let yaw = characteristic_coefficients(&poles.yaw);
    k[(3, 12)] = yaw[0];
    k[(3, 13)] = yaw[1];
    Ok(GainMatrix { k })
}

/// One evaluation of the tracking law.
pub fn control_step(
    x: &QpsState,
    desired: &FlatState,
    gains: &GainMatrix,
    params: &QpsParams,
) -> Result<ControlInput> {
    let dec = decoupling(x, params)?;
    let z = state_to_flat(x, params);
    let v = gains.k * (desired.to_vector() - z.to_vector());
    let u = dec
        .m
        .lu()
        .solve(&(v - dec.n))
        .ok_or_else(|| Error::Singularity("decoupling matrix is not invertible".into()))?;
    Ok(ControlInput::from_vector(&u))
}
