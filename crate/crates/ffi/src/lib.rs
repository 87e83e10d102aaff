//! C ABI over the docknav toolkit.
//!
//! Every fallible function returns a [`DknStatus`]; on failure the message is
//! available from [`dkn_last_error`] on the same thread. Objects are opaque
//! handles released with their matching `_free` function. Matrices are
//! row-major and poses are `[tx, ty, tz, qx, qy, qz, qw]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use docknav::calib::{solve_statics, CalibSample};
use docknav::imaging::Image;
use docknav::nn::train::{image_to_input, resize_for_input};
use docknav::nn::{prediction_to_pose, Checkpoint};
use docknav::orbit::{parse_tle, propagate, tle_to_state, SpacecraftProperties, StateVector, TwoLineElements};
use docknav::pose::{
    attitude_error, dcm_to_quat, range_normalized_error, rot6d_to_dcm, Dcm, Pose, Rot6D, UnitQuaternion, Vec3,
};
use nalgebra::Matrix3;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DknStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Numerical = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("interior NULs removed")));
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dkn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

struct Failure(DknStatus, String);

impl Failure {
    fn new(status: DknStatus, msg: impl ToString) -> Self {
        Self(status, msg.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DknStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DknStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DknStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(Failure::new(DknStatus::NullPointer, "null input pointer"));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(Failure::new(DknStatus::NullPointer, "null output pointer"));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::new(DknStatus::NullPointer, "null output pointer"))
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(DknStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(DknStatus::InvalidArgument, "string is not UTF-8"))
}

fn quat(q: &[f64]) -> Result<UnitQuaternion, Failure> {
    UnitQuaternion::new_normalize(q[0], q[1], q[2], q[3]).map_err(|e| Failure::new(DknStatus::InvalidArgument, e))
}

fn pose(a: &[f64]) -> Result<Pose, Failure> {
    Pose::from_slice(a).ok_or_else(|| Failure::new(DknStatus::InvalidArgument, "invalid pose"))
}

fn write_matrix(m: &Matrix3<f64>, out: &mut [f64]) {
    for r in 0..3 {
        for c in 0..3 {
            out[3 * r + c] = m[(r, c)];
        }
    }
}

/// Gram-Schmidt map from a 6D attitude (two stacked columns) to a 3x3 DCM.
///
/// # Safety
/// `r6` must point to 6 doubles and `out_dcm` to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dkn_rot6d_to_dcm(r6: *const f64, out_dcm: *mut f64) -> DknStatus {
    guard(|| {
        let r = slice(r6, 6)?;
        let out = slice_mut(out_dcm, 9)?;
        let dcm = rot6d_to_dcm(&Rot6D(r.try_into().expect("length 6"))).map_err(|e| Failure::new(DknStatus::Numerical, e))?;
        write_matrix(dcm.matrix(), out);
        Ok(())
    })
}

/// # Safety
/// `dcm` must point to 9 doubles and `out_q` to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dkn_dcm_to_quat(dcm: *const f64, out_q: *mut f64) -> DknStatus {
    guard(|| {
        let m = Matrix3::from_row_slice(slice(dcm, 9)?);
        let out = slice_mut(out_q, 4)?;
        let dcm = Dcm::try_from_matrix(m, 1e-6).map_err(|e| Failure::new(DknStatus::InvalidArgument, e))?;
        out.copy_from_slice(&dcm_to_quat(&dcm).to_array());
        Ok(())
    })
}

/// Angle in degrees between two attitudes given as quaternions.
///
/// # Safety
/// `q_hat` and `q` must point to 4 doubles each.
#[no_mangle]
pub unsafe extern "C" fn dkn_attitude_error_deg(q_hat: *const f64, q: *const f64, out_deg: *mut f64) -> DknStatus {
    guard(|| {
        let (a, b) = (quat(slice(q_hat, 4)?)?, quat(slice(q, 4)?)?);
        *out_ref(out_deg)? = attitude_error(&a, &b);
        Ok(())
    })
}

/// Position error divided by the true range.
///
/// # Safety
/// `t_hat` and `t` must point to 3 doubles each.
#[no_mangle]
pub unsafe extern "C" fn dkn_range_normalized_error(t_hat: *const f64, t: *const f64, out_frac: *mut f64) -> DknStatus {
    guard(|| {
        let (a, b) = (Vec3::from_column_slice(slice(t_hat, 3)?), Vec3::from_column_slice(slice(t, 3)?));
        *out_ref(out_frac)? = range_normalized_error(&a, &b).map_err(|e| Failure::new(DknStatus::InvalidArgument, e))?;
        Ok(())
    })
}

/// Parsed two-line element set.
pub struct DknTle(TwoLineElements);

/// # Safety
/// `line1` and `line2` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dkn_tle_parse(line1: *const c_char, line2: *const c_char, out: *mut *mut DknTle) -> DknStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let tle = parse_tle(c_str(line1)?, c_str(line2)?).map_err(|e| Failure::new(DknStatus::Parse, e))?;
        *out = Box::into_raw(Box::new(DknTle(tle)));
        Ok(())
    })
}

/// # Safety
/// `tle` must come from [`dkn_tle_parse`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dkn_tle_free(tle: *mut DknTle) {
    if !tle.is_null() {
        drop(Box::from_raw(tle));
    }
}

/// Propagated states, one per step including the initial one.
pub struct DknEphemeris(Vec<StateVector>);

/// Propagates with the default force model and spacecraft properties.
///
/// # Safety
/// `tle` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dkn_propagate(tle: *const DknTle, duration_s: f64, dt_s: f64, out: *mut *mut DknEphemeris) -> DknStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let tle = tle.as_ref().ok_or_else(|| Failure::new(DknStatus::NullPointer, "null TLE handle"))?;
        let state = tle_to_state(&tle.0).map_err(|e| Failure::new(DknStatus::Numerical, e))?;
        let states = propagate(&state, &SpacecraftProperties::default(), dt_s, duration_s).map_err(|e| Failure::new(DknStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(DknEphemeris(states)));
        Ok(())
    })
}

/// Number of states; 0 for NULL.
///
/// # Safety
/// `eph` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dkn_ephemeris_len(eph: *const DknEphemeris) -> usize {
    eph.as_ref().map_or(0, |e| e.0.len())
}

/// Writes `[rx, ry, rz, vx, vy, vz]` (km, km/s) and seconds since the first state.
///
/// # Safety
/// `eph` must be a live handle, `out_state` must hold 6 doubles, `out_t` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn dkn_ephemeris_state(eph: *const DknEphemeris, index: usize, out_state: *mut f64, out_t: *mut f64) -> DknStatus {
    guard(|| {
        let eph = eph.as_ref().ok_or_else(|| Failure::new(DknStatus::NullPointer, "null ephemeris handle"))?;
        let s = eph.0.get(index).ok_or_else(|| Failure::new(DknStatus::InvalidArgument, format!("index {index} out of range")))?;
        let out = slice_mut(out_state, 6)?;
        out[..3].copy_from_slice(s.position.as_slice());
        out[3..].copy_from_slice(s.velocity.as_slice());
        if let Some(t) = out_t.as_mut() {
            *t = (s.epoch - eph.0[0].epoch).num_microseconds().unwrap_or(0) as f64 * 1e-6;
        }
        Ok(())
    })
}

/// # Safety
/// `eph` must come from [`dkn_propagate`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dkn_ephemeris_free(eph: *mut DknEphemeris) {
    if !eph.is_null() {
        drop(Box::from_raw(eph));
    }
}

/// Trained pose regressor.
pub struct DknModel(Checkpoint);

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dkn_model_load(path: *const c_char, out: *mut *mut DknModel) -> DknStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let ck = Checkpoint::load(Path::new(c_str(path)?)).map_err(|e| {
            let status = if matches!(e, docknav::nn::NnError::Dataset(_)) { DknStatus::Io } else { DknStatus::Parse };
            Failure::new(status, e)
        })?;
        *out = Box::into_raw(Box::new(DknModel(ck)));
        Ok(())
    })
}

/// Network input size in pixels.
///
/// # Safety
/// `model` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dkn_model_input_size(model: *const DknModel, out_width: *mut u32, out_height: *mut u32) -> DknStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| Failure::new(DknStatus::NullPointer, "null model handle"))?;
        *out_ref(out_width)? = m.0.input_width as u32;
        *out_ref(out_height)? = m.0.input_height as u32;
        Ok(())
    })
}

/// Predicts the target pose from an interleaved RGB8 image whose size is an
/// integer multiple of the input size.
///
/// # Safety
/// `rgb` must hold `3 * width * height` bytes and `out_pose` 7 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dkn_model_predict(model: *const DknModel, rgb: *const u8, width: u32, height: u32, out_pose: *mut f64) -> DknStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| Failure::new(DknStatus::NullPointer, "null model handle"))?;
        let n = 3 * width as usize * height as usize;
        let img = Image::from_raw(width, height, slice(rgb, n)?.to_vec()).map_err(|e| Failure::new(DknStatus::InvalidArgument, e))?;
        let out = slice_mut(out_pose, 7)?;
        let input = (m.0.input_width, m.0.input_height);
        let img = resize_for_input(&img, input).map_err(|e| Failure::new(DknStatus::InvalidArgument, e))?;
        let pred = m.0.network.forward(&image_to_input(&img), input.1, input.0).map_err(|e| Failure::new(DknStatus::InvalidArgument, e))?;
        let pose = prediction_to_pose(&pred).map_err(|e| Failure::new(DknStatus::Numerical, e))?;
        out.copy_from_slice(&pose.to_array());
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`dkn_model_load`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dkn_model_free(model: *mut DknModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Solves the mocap statics from `n` samples of 21 doubles each: the poses
/// `T_oi`, `T_os` and `T_cb`. Writes `T_ic` and `T_sb` and, when non-NULL,
/// the RMS residuals in degrees and metres.
///
/// # Safety
/// `samples` must hold `21 * n` doubles; `out_t_ic` and `out_t_sb` 7 writable
/// doubles each; `out_residuals` NULL or 2 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dkn_calibrate(samples: *const f64, n: usize, out_t_ic: *mut f64, out_t_sb: *mut f64, out_residuals: *mut f64) -> DknStatus {
    guard(|| {
        let data = slice(samples, 21 * n)?;
        let parsed = data
            .chunks_exact(21)
            .map(|c| Ok(CalibSample { t_oi: pose(&c[0..7])?, t_os: pose(&c[7..14])?, t_cb: pose(&c[14..21])? }))
            .collect::<Result<Vec<_>, Failure>>()?;
        let (t_ic, t_sb) = (slice_mut(out_t_ic, 7)?, slice_mut(out_t_sb, 7)?);
        let result = solve_statics(&parsed).map_err(|e| Failure::new(DknStatus::InvalidArgument, e))?;
        t_ic.copy_from_slice(&result.t_ic.to_array());
        t_sb.copy_from_slice(&result.t_sb.to_array());
        if !out_residuals.is_null() {
            let r = slice_mut(out_residuals, 2)?;
            r[0] = result.rms_rotation_residual;
            r[1] = result.rms_translation_residual;
        }
        Ok(())
    })
}
