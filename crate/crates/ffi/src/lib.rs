//! C ABI over the `inspiration` crate.
//!
//! Conventions:
//! - Every fallible function returns an [`InspStatus`]; outputs go through
//!   pointer arguments and are written only on success.
//! - Handles are opaque and must be released with the matching `_free`.
//! - On failure, [`insp_last_error`] describes the most recent error on the
//!   calling thread.
//! - Array arguments are `(pointer, length)` pairs. An output buffer that is
//!   too short yields [`InspStatus::BufferTooSmall`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use inspiration::envs::{Env, EnvHandle, StepResult};
use inspiration::io::{self, ParamsFile};
use inspiration::model::grad_check;
use inspiration::rewards::{reward, ScoreVector};
use inspiration::trainer::{kmeans_actions, ActionSpace};
use inspiration::types::{ActionSet, RewardMode, StateVec, Transition};
use inspiration::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InspStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    IoError = 4,
    BufferTooSmall = 5,
    /// The episode has ended; reset before stepping again.
    EpisodeOver = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InspRewardMode {
    Basic = 0,
    Pref = 1,
    Soft = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InspActionKind {
    Primitive = 0,
    Macro = 1,
    /// Raw continuous controls; the point mass only.
    Continuous = 2,
}

/// Saved model parameters with their action space.
pub struct InspModel {
    file: ParamsFile,
}

/// A live environment episode with a fixed discrete action set.
pub struct InspEnv {
    handle: EnvHandle,
    acts: Option<ActionSet>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Fail(InspStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidInput(_) => InspStatus::InvalidArgument,
            Error::Parse { .. } => InspStatus::ParseError,
            Error::File { .. } | Error::Io(_) => InspStatus::IoError,
        };
        Fail(status, e.to_string())
    }
}

fn fail<T>(status: InspStatus, msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(status, msg.into()))
}

/// Runs `f`, turning errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> InspStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            InspStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            InspStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(InspStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len < need {
        return fail(InspStatus::BufferTooSmall, format!("{what} holds {len} values, {need} needed"));
    }
    if p.is_null() {
        return fail(InspStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return fail(InspStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(InspStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return fail(InspStatus::NullPointer, format!("{what} is null"));
    }
    p.write(v);
    Ok(())
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(InspStatus::NullPointer, format!("{what} is null")))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(InspStatus::NullPointer, format!("{what} is null")))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn insp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn insp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ------------------------------------------------------------------ models

/// Loads a parameter file written by the command-line tool.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn insp_model_load(path: *const c_char, out: *mut *mut InspModel) -> InspStatus {
    guard(|| {
        let path = text(path, "path")?;
        let file = io::load_params(Path::new(path))?;
        put(out, Box::into_raw(Box::new(InspModel { file })), "out")
    })
}

/// # Safety
/// `model` must come from [`insp_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn insp_model_free(model: *mut InspModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Observation width and number of policy outputs (actions, or the
/// continuous action dimension).
///
/// # Safety
/// `model` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn insp_model_dims(model: *const InspModel, obs_dim: *mut usize, n_outputs: *mut usize) -> InspStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let n = match &m.file.space {
            ActionSpace::Discrete(a) => a.len(),
            ActionSpace::Continuous { dim } => *dim,
        };
        put(obs_dim, m.file.params.layout().obs_dim, "obs_dim")?;
        put(n_outputs, n, "n_outputs")
    })
}

/// Policy head output (logits or Gaussian means) and state value.
///
/// # Safety
/// `obs` must hold `obs_len` values and `policy_out` `policy_len`.
#[no_mangle]
pub unsafe extern "C" fn insp_model_forward(
    model: *const InspModel,
    obs: *const f64,
    obs_len: usize,
    policy_out: *mut f64,
    policy_len: usize,
    value_out: *mut f64,
) -> InspStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let s = StateVec(slice(obs, obs_len, "obs")?.to_vec());
        if value_out.is_null() {
            return fail(InspStatus::NullPointer, "value_out is null");
        }
        let (out, value) = m.file.params.policy_value(&s)?;
        out_slice(policy_out, policy_len, out.len(), "policy_out")?[..out.len()].copy_from_slice(&out);
        put(value_out, value, "value_out")
    })
}

/// Probability that `s -> s_next` came from the expert. Both states have
/// the model's observation width.
///
/// # Safety
/// `s` and `s_next` must each hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn insp_model_classify(
    model: *const InspModel,
    s: *const f64,
    s_next: *const f64,
    len: usize,
    out: *mut f64,
) -> InspStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let t = Transition::new(StateVec(slice(s, len, "s")?.to_vec()), StateVec(slice(s_next, len, "s_next")?.to_vec()))?;
        put(out, m.file.params.classify(&t)?, "out")
    })
}

// ------------------------------------------------------------ environments

/// Creates an environment from a preset name (`grid7`, `grid4`, `point`) or
/// an environment config file, and resets it.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn insp_env_new(name: *const c_char, kind: InspActionKind, out: *mut *mut InspEnv) -> InspStatus {
    guard(|| {
        let env: Env = io::resolve_env(text(name, "name")?)?;
        let acts = match kind {
            InspActionKind::Primitive => Some(env.primitive_actions()?),
            InspActionKind::Macro => Some(env.macro_actions()?),
            InspActionKind::Continuous if env.continuous_dim().is_some() => None,
            InspActionKind::Continuous => return fail(InspStatus::InvalidArgument, "environment has no continuous controls"),
        };
        let handle = EnvHandle::new(env)?;
        put(out, Box::into_raw(Box::new(InspEnv { handle, acts })), "out")
    })
}

/// # Safety
/// `env` must come from [`insp_env_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn insp_env_free(env: *mut InspEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Observation width and number of discrete actions (the control
/// dimension for continuous environments).
///
/// # Safety
/// `env` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn insp_env_dims(env: *const InspEnv, obs_dim: *mut usize, n_actions: *mut usize) -> InspStatus {
    guard(|| {
        let e = borrow(env, "env")?;
        let n = match &e.acts {
            Some(a) => a.len(),
            None => e.handle.env().continuous_dim().unwrap_or(0),
        };
        put(obs_dim, e.handle.obs_dim(), "obs_dim")?;
        put(n_actions, n, "n_actions")
    })
}

/// Starts a new episode and writes the initial observation.
///
/// # Safety
/// `obs_out` must hold `obs_len` values.
#[no_mangle]
pub unsafe extern "C" fn insp_env_reset(env: *mut InspEnv, seed: u64, obs_out: *mut f64, obs_len: usize) -> InspStatus {
    guard(|| {
        let e = borrow_mut(env, "env")?;
        let dim = e.handle.obs_dim();
        let out = out_slice(obs_out, obs_len, dim, "obs_out")?;
        let s = e.handle.reset(seed);
        out[..dim].copy_from_slice(s.as_slice());
        Ok(())
    })
}

unsafe fn write_step(
    e: &mut InspEnv,
    run: impl FnOnce(&mut EnvHandle) -> inspiration::Result<StepResult>,
    obs_out: *mut f64,
    obs_len: usize,
    reward_out: *mut f64,
    done_out: *mut bool,
) -> Result<(), Fail> {
    let dim = e.handle.obs_dim();
    let out = out_slice(obs_out, obs_len, dim, "obs_out")?;
    if reward_out.is_null() || done_out.is_null() {
        return fail(InspStatus::NullPointer, "reward_out and done_out must be writable");
    }
    if e.handle.is_done() {
        return fail(InspStatus::EpisodeOver, "episode has ended; reset first");
    }
    let r = run(&mut e.handle)?;
    out[..dim].copy_from_slice(r.next.as_slice());
    *reward_out = r.task_reward;
    *done_out = r.done;
    Ok(())
}

/// Executes discrete action `action` (a whole macro for macro sets).
///
/// # Safety
/// `obs_out` must hold `obs_len` values; `reward_out` and `done_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn insp_env_step(
    env: *mut InspEnv,
    action: usize,
    obs_out: *mut f64,
    obs_len: usize,
    reward_out: *mut f64,
    done_out: *mut bool,
) -> InspStatus {
    guard(|| {
        let e = borrow_mut(env, "env")?;
        let Some(acts) = e.acts.clone() else {
            return fail(InspStatus::InvalidArgument, "environment was created for continuous controls");
        };
        let a = acts.get(action)?.clone();
        write_step(e, |h| h.step(&a), obs_out, obs_len, reward_out, done_out)
    })
}

/// Executes a raw continuous control.
///
/// # Safety
/// `control` must hold `control_len` values; other pointers as for [`insp_env_step`].
#[no_mangle]
pub unsafe extern "C" fn insp_env_step_continuous(
    env: *mut InspEnv,
    control: *const f64,
    control_len: usize,
    obs_out: *mut f64,
    obs_len: usize,
    reward_out: *mut f64,
    done_out: *mut bool,
) -> InspStatus {
    guard(|| {
        let e = borrow_mut(env, "env")?;
        if e.acts.is_some() {
            return fail(InspStatus::InvalidArgument, "environment was created for discrete actions");
        }
        let c = slice(control, control_len, "control")?.to_vec();
        write_step(e, |h| h.step_continuous(&c), obs_out, obs_len, reward_out, done_out)
    })
}

/// The state discrete action `action` would lead to from `state`, without
/// touching the episode.
///
/// # Safety
/// `state` must hold `len` values and `out` `len` values.
#[no_mangle]
pub unsafe extern "C" fn insp_env_peek(
    env: *const InspEnv,
    state: *const f64,
    len: usize,
    action: usize,
    out: *mut f64,
) -> InspStatus {
    guard(|| {
        let e = borrow(env, "env")?;
        let Some(acts) = &e.acts else {
            return fail(InspStatus::InvalidArgument, "peek needs a discrete action set");
        };
        let s = StateVec(slice(state, len, "state")?.to_vec());
        let next = e.handle.peek(&s, acts.get(action)?)?;
        let dst = out_slice(out, len, next.len(), "out")?;
        dst[..next.len()].copy_from_slice(next.as_slice());
        Ok(())
    })
}

// --------------------------------------------------------------- utilities

/// Reward of `action` given the classifier scores of all actions. Scores
/// must lie strictly between 0 and 1.
///
/// # Safety
/// `scores` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn insp_reward(
    mode: InspRewardMode,
    scores: *const f64,
    n: usize,
    action: usize,
    out: *mut f64,
) -> InspStatus {
    guard(|| {
        let c = ScoreVector::new(slice(scores, n, "scores")?.to_vec())?;
        let mode = match mode {
            InspRewardMode::Basic => RewardMode::Basic,
            InspRewardMode::Pref => RewardMode::Preferential,
            InspRewardMode::Soft => RewardMode::SoftPreferential,
        };
        put(out, reward(mode, &c, action)?, "out")
    })
}

/// Worst relative error between analytic and central-difference gradients
/// over every head and trunk variant.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn insp_grad_check(seed: u64, epsilon: f64, out: *mut f64) -> InspStatus {
    guard(|| {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return fail(InspStatus::InvalidArgument, "epsilon must be positive");
        }
        put(out, grad_check(seed, epsilon), "out")
    })
}

/// k-means on `n` row-major points of width `dim`. Writes `k * dim`
/// centroid values, sorted lexicographically by row.
///
/// # Safety
/// `points` must hold `n * dim` values and `out` `out_len`.
#[no_mangle]
pub unsafe extern "C" fn insp_kmeans(
    points: *const f64,
    n: usize,
    dim: usize,
    k: usize,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> InspStatus {
    guard(|| {
        let total = n.checked_mul(dim).ok_or_else(|| Fail(InspStatus::InvalidArgument, "n * dim overflows".into()))?;
        if dim == 0 {
            return fail(InspStatus::InvalidArgument, "dim must be positive");
        }
        let rows: Vec<Vec<f64>> = slice(points, total, "points")?.chunks(dim).map(<[f64]>::to_vec).collect();
        let centroids = kmeans_actions(&rows, k, seed)?;
        let dst = out_slice(out, out_len, k * dim, "out")?;
        for (chunk, c) in dst.chunks_mut(dim).zip(&centroids) {
            chunk.copy_from_slice(c);
        }
        Ok(())
    })
}
