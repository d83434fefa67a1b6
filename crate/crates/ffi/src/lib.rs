//! C ABI over `qps-core`.
//!
//! Every entry point returns a [`QpsStatus`]; outputs go through pointer
//! arguments. On failure a human-readable message is kept per thread and can be
//! read with [`qps_last_error_message`]. Objects are opaque handles that must be
//! released with their `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use qps_core::dynamics::{self, QpsParams, RigidBody};
use qps_core::mission::{Mission, MissionConfig, MissionSummary, MissionTrace, SynthParams};
use qps_core::terrain::ElevationMap;
use qps_core::{tempo, Error, MissionError};

/// Result code of every `qps_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Domain = 4,
    InfeasibleThrust = 5,
    Singularity = 6,
    NoPath = 7,
    NoFeasibleTime = 8,
    NumericalBlowup = 9,
    Config = 10,
    Io = 11,
    /// The caller's buffer cannot hold the output; the required size was reported.
    BufferTooSmall = 12,
    /// A Rust panic was caught. This is a bug.
    Panic = 13,
}

impl From<&Error> for QpsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parse { .. } => QpsStatus::Parse,
            Error::Domain(_) => QpsStatus::Domain,
            Error::InfeasibleThrust { .. } => QpsStatus::InfeasibleThrust,
            Error::Singularity(_) => QpsStatus::Singularity,
            Error::NoPath(_) => QpsStatus::NoPath,
            Error::NoFeasibleTime(_) => QpsStatus::NoFeasibleTime,
            Error::NumericalBlowup(_) => QpsStatus::NumericalBlowup,
            Error::Config(_) => QpsStatus::Config,
            Error::Io(_) => QpsStatus::Io,
        }
    }
}

/// Opaque elevation map.
pub struct QpsElevationMap(ElevationMap);

/// Opaque result of a simulated mission.
pub struct QpsMission {
    trace: MissionTrace,
    summary: MissionSummary,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpsRigidBody {
    pub mass: f64,
    pub inertia: [f64; 3],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpsCombinedBody {
    pub mass: f64,
    pub inertia: [f64; 3],
    /// Distance of the combined center of mass below the quadcopter's, m.
    pub offset: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpsVehicleParams {
    pub mass: f64,
    pub inertia: [f64; 3],
    pub thrust_coeff: f64,
    pub drag_coeff: f64,
    pub arm_length: f64,
    pub gravity: f64,
}

impl From<QpsParams> for QpsVehicleParams {
    fn from(p: QpsParams) -> Self {
        Self {
            mass: p.mass,
            inertia: p.inertia,
            thrust_coeff: p.thrust_coeff,
            drag_coeff: p.drag_coeff,
            arm_length: p.arm_length,
            gravity: p.gravity,
        }
    }
}

impl From<QpsVehicleParams> for QpsParams {
    fn from(p: QpsVehicleParams) -> Self {
        Self {
            mass: p.mass,
            inertia: p.inertia,
            thrust_coeff: p.thrust_coeff,
            drag_coeff: p.drag_coeff,
            arm_length: p.arm_length,
            gravity: p.gravity,
        }
    }
}

/// Synthetic terrain parameters; start from [`qps_synth_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpsSynthParams {
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    pub cell_size: f64,
    pub seed: u64,
    pub density: f64,
    pub height_range: [f64; 2],
    pub base_height: f64,
    pub ground_amplitude: f64,
    pub footprint_range: [f64; 2],
}

impl From<SynthParams> for QpsSynthParams {
    fn from(p: SynthParams) -> Self {
        Self {
            origin: p.origin,
            extent: p.extent,
            cell_size: p.cell_size,
            seed: p.seed,
            density: p.density,
            height_range: p.height_range,
            base_height: p.base_height,
            ground_amplitude: p.ground_amplitude,
            footprint_range: p.footprint_range,
        }
    }
}

impl From<QpsSynthParams> for SynthParams {
    fn from(p: QpsSynthParams) -> Self {
        Self {
            origin: p.origin,
            extent: p.extent,
            cell_size: p.cell_size,
            seed: p.seed,
            density: p.density,
            height_range: p.height_range,
            base_height: p.base_height,
            ground_amplitude: p.ground_amplitude,
            footprint_range: p.footprint_range,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: &Error) -> QpsStatus {
    set_last_error(format!("{}: {e}", e.category()));
    e.into()
}

fn fail_mission(e: &MissionError) -> QpsStatus {
    set_last_error(format!("{} ({}): {}", e.category(), e.phase.as_str(), e.error));
    (&e.error).into()
}

fn null(what: &str) -> QpsStatus {
    set_last_error(format!("null pointer: {what}"));
    QpsStatus::NullPointer
}

/// Runs `f`, converting panics into [`QpsStatus::Panic`].
fn guard(f: impl FnOnce() -> QpsStatus) -> QpsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            QpsStatus::Panic
        }
    }
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, QpsStatus> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_last_error(format!("{what} is not valid UTF-8"));
        QpsStatus::InvalidUtf8
    })
}

/// Copies `text` plus a NUL into `buf` if it fits. `*len` always receives the
/// text length without the NUL.
///
/// # Safety
/// `buf` must be null or point to at least `cap` writable bytes; `len` must be valid.
unsafe fn write_text(text: &str, buf: *mut c_char, cap: usize, len: *mut usize) -> QpsStatus {
    if len.is_null() {
        return null("len");
    }
    *len = text.len();
    if buf.is_null() || cap < text.len() + 1 {
        set_last_error(format!("buffer too small: need {} bytes", text.len() + 1));
        return QpsStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
    *buf.add(text.len()) = 0;
    QpsStatus::Ok
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next `qps_*` call on the same thread.
#[no_mangle]
pub extern "C" fn qps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code, e.g. `"no-path"`.
#[no_mangle]
pub extern "C" fn qps_status_name(status: QpsStatus) -> *const c_char {
    let name: &'static CStr = match status {
        QpsStatus::Ok => c"ok",
        QpsStatus::NullPointer => c"null-pointer",
        QpsStatus::InvalidUtf8 => c"invalid-utf8",
        QpsStatus::Parse => c"parse",
        QpsStatus::Domain => c"domain",
        QpsStatus::InfeasibleThrust => c"infeasible-thrust",
        QpsStatus::Singularity => c"singularity",
        QpsStatus::NoPath => c"no-path",
        QpsStatus::NoFeasibleTime => c"no-feasible-time",
        QpsStatus::NumericalBlowup => c"numerical-blowup",
        QpsStatus::Config => c"config",
        QpsStatus::Io => c"io",
        QpsStatus::BufferTooSmall => c"buffer-too-small",
        QpsStatus::Panic => c"panic",
    };
    name.as_ptr()
}

// ---------------------------------------------------------------- terrain

/// Parses an elevation grid document.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qps_elevation_map_parse(
    text: *const c_char,
    out: *mut *mut QpsElevationMap,
) -> QpsStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let text = match read_str(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ElevationMap::parse(text) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(QpsElevationMap(m)));
                QpsStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn qps_synth_params_default() -> QpsSynthParams {
    SynthParams::default().into()
}

/// Generates a seeded synthetic urban map.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qps_elevation_map_synth(
    params: *const QpsSynthParams,
    out: *mut *mut QpsElevationMap,
) -> QpsStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            return null("params/out");
        }
        match qps_core::mission::synth_terrain(&(*params).into()) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(QpsElevationMap(m)));
                QpsStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Grid dimensions in cells.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qps_elevation_map_dims(
    map: *const QpsElevationMap,
    width: *mut usize,
    height: *mut usize,
) -> QpsStatus {
    guard(|| {
        if map.is_null() || width.is_null() || height.is_null() {
            return null("map/width/height");
        }
        *width = (*map).0.width();
        *height = (*map).0.height();
        QpsStatus::Ok
    })
}

/// Height of the map at `(x, y)`; a domain error outside the footprint.
///
/// # Safety
/// `map` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qps_elevation_map_sample(
    map: *const QpsElevationMap,
    x: f64,
    y: f64,
    out: *mut f64,
) -> QpsStatus {
    guard(|| {
        if map.is_null() || out.is_null() {
            return null("map/out");
        }
        match (*map).0.sample(x, y) {
            Ok(z) => {
                *out = z;
                QpsStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// New map inflated by `radius`; the input map is left untouched.
///
/// # Safety
/// `map` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qps_elevation_map_expand(
    map: *const QpsElevationMap,
    radius: f64,
    out: *mut *mut QpsElevationMap,
) -> QpsStatus {
    guard(|| {
        if map.is_null() || out.is_null() {
            return null("map/out");
        }
        match (*map).0.expand(radius) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(QpsElevationMap(m)));
                QpsStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Serializes the map as a grid document.
///
/// # Safety
/// `map` and `len` must be valid; `buf` must hold `cap` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn qps_elevation_map_to_text(
    map: *const QpsElevationMap,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> QpsStatus {
    guard(|| {
        if map.is_null() {
            return null("map");
        }
        write_text(&(*map).0.to_grid_string(), buf, cap, len)
    })
}

/// # Safety
/// `map` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qps_elevation_map_free(map: *mut QpsElevationMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

// ---------------------------------------------------------------- vehicle

#[no_mangle]
pub extern "C" fn qps_vehicle_params_default() -> QpsVehicleParams {
    QpsParams::default().into()
}

/// Rigid combination of a quadcopter and a payload hung `separation` below it.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qps_combine_inertia(
    quad: QpsRigidBody,
    payload: QpsRigidBody,
    separation: f64,
    out: *mut QpsCombinedBody,
) -> QpsStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let body = |b: QpsRigidBody| RigidBody {
            mass: b.mass,
            inertia: b.inertia,
        };
        let valid = |b: &QpsRigidBody| {
            b.mass.is_finite() && b.mass > 0.0 && b.inertia.iter().all(|j| j.is_finite() && *j >= 0.0)
        };
        if !(valid(&quad) && valid(&payload) && separation.is_finite() && separation >= 0.0) {
            return fail(&Error::Domain(
                "masses must be positive, inertias and separation non-negative".into(),
            ));
        }
        let c = dynamics::combine_inertia(body(quad), body(payload), separation);
        *out = QpsCombinedBody {
            mass: c.mass,
            inertia: c.inertia,
            offset: c.offset,
        };
        QpsStatus::Ok
    })
}

/// Rotor speeds (rad/s, signed by spin direction) producing `thrust` and body
/// `torque`. `params` may be null for the reference vehicle.
///
/// # Safety
/// `torque` must point to 3 doubles and `out` to 4; `params` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn qps_rotor_speeds(
    params: *const QpsVehicleParams,
    thrust: f64,
    torque: *const f64,
    out: *mut f64,
) -> QpsStatus {
    guard(|| {
        if torque.is_null() || out.is_null() {
            return null("torque/out");
        }
        let params: QpsParams = if params.is_null() {
            QpsParams::default()
        } else {
            (*params).into()
        };
        if let Err(e) = params.validate() {
            return fail(&e);
        }
        let tau = std::slice::from_raw_parts(torque, 3);
        let tau = nalgebra::Vector3::new(tau[0], tau[1], tau[2]);
        match dynamics::rotor_speeds(thrust, &tau, &params) {
            Ok(s) => {
                std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&s.signed_speeds());
                QpsStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// The rest-to-rest blend and its first three derivatives at `t ∈ [0, 1]`.
///
/// # Safety
/// `out` must point to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qps_sigma3(t: f64, out: *mut f64) -> QpsStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match tempo::sigma3_eval(t) {
            Ok(v) => {
                std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&v);
                QpsStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

// ---------------------------------------------------------------- mission

/// Plans, times and flies the mission described by a TOML document.
///
/// Relative terrain paths resolve against `base_dir` (null means the current
/// directory). A mission that completes but breaks a safety condition still
/// returns `Ok`; check [`qps_mission_is_safe`].
///
/// # Safety
/// `config` must be a NUL-terminated string, `base_dir` null or one, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qps_mission_run(
    config: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut QpsMission,
) -> QpsStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let text = match read_str(config, "config") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let dir = if base_dir.is_null() {
            PathBuf::new()
        } else {
            match read_str(base_dir, "base_dir") {
                Ok(d) => PathBuf::from(d),
                Err(s) => return s,
            }
        };
        let mut cfg = match MissionConfig::parse(text) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        cfg.base_dir = dir;
        match Mission::prepare(cfg).and_then(|m| m.run()) {
            Ok(trace) => {
                let summary = trace.summary();
                *out = Box::into_raw(Box::new(QpsMission { trace, summary }));
                QpsStatus::Ok
            }
            Err(e) => fail_mission(&e),
        }
    })
}

/// Whether every sample met all safety conditions. False for a null handle.
///
/// # Safety
/// `mission` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qps_mission_is_safe(mission: *const QpsMission) -> bool {
    !mission.is_null() && (*mission).summary.is_safe()
}

/// Arrival time at the goal, s. NaN for a null handle.
///
/// # Safety
/// `mission` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qps_mission_arrival_time(mission: *const QpsMission) -> f64 {
    if mission.is_null() {
        f64::NAN
    } else {
        (*mission).summary.t_n
    }
}

/// Summary as JSON.
///
/// Text outputs copy the text and a NUL into `buf` when `cap` is large enough,
/// and always store the text length (without the NUL) in `*len`; pass a null
/// buffer to learn the length first.
///
/// # Safety
/// `mission` and `len` must be valid; `buf` must hold `cap` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn qps_mission_summary_json(
    mission: *const QpsMission,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> QpsStatus {
    guard(|| {
        if mission.is_null() {
            return null("mission");
        }
        write_text(&(*mission).summary.to_json(), buf, cap, len)
    })
}

/// Full trace as CSV, same format as the command-line tool writes.
///
/// # Safety
/// `mission` and `len` must be valid; `buf` must hold `cap` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn qps_mission_trace_csv(
    mission: *const QpsMission,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> QpsStatus {
    guard(|| {
        if mission.is_null() {
            return null("mission");
        }
        write_text(&(*mission).trace.to_csv(), buf, cap, len)
    })
}

/// # Safety
/// `mission` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qps_mission_free(mission: *mut QpsMission) {
    if !mission.is_null() {
        drop(Box::from_raw(mission));
    }
}
