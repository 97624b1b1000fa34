//! C interface to `crosslearn`.
//!
//! Objects cross the boundary as opaque handles created by `cl_*_new` style
//! functions and released with the matching `cl_*_free`. Every fallible
//! function returns a [`ClStatus`]; on failure the message is available via
//! [`cl_last_error_message`] on the same thread. Arrays are flat row-major
//! `double` buffers with the layout documented on each function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use crosslearn::apprenticeship::{CostBasis, EnvironmentBundle};
use crosslearn::cal::{project_box_simplex, recover_policies, solve_mccormick, CalInstance, ProjectionStrategy};
use crosslearn::gridworld::WindyGridworld;
use crosslearn::mdp::{occupation_from_policy, policy_from_occupation, Mdp, OccupationMeasure, Policy};
use crosslearn::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    ZeroStateMass = 4,
    Infeasible = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Panic = 8,
    Other = 9,
}

/// Projection strategy used by [`cl_instance_solve`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClStrategy {
    CrossCentered = 0,
    AverageCentered = 1,
}

pub struct ClMdp(Mdp);
pub struct ClPolicy(Policy);
pub struct ClMeasure(OccupationMeasure);
pub struct ClInstance(CalInstance);

pub struct ClSolution {
    lower_bound: f64,
    achieved_objective: f64,
    individual: Vec<Policy>,
    cross: Policy,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> ClStatus {
    match err {
        Error::InvalidModel(_) | Error::EmptyInput(_) | Error::Config(_) => ClStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => ClStatus::DimensionMismatch,
        Error::ZeroStateMass { .. } => ClStatus::ZeroStateMass,
        Error::Infeasible(_) => ClStatus::Infeasible,
        Error::Numerical { .. } | Error::Unbounded(_) => ClStatus::Numerical,
        Error::Stage { source, .. } => status_of(source),
        _ => ClStatus::Other,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), ClStatus>>(f: F) -> ClStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ClStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("panic inside crosslearn".into());
            ClStatus::Panic
        }
    }
}

fn lift<T>(r: crosslearn::Result<T>) -> Result<T, ClStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null_error(what: &str) -> ClStatus {
    set_error(format!("null pointer: {what}"));
    ClStatus::NullPointer
}

unsafe fn read<'a, T>(p: *const T, what: &str) -> Result<&'a T, ClStatus> {
    p.as_ref().ok_or_else(|| null_error(what))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], ClStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null_error(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), ClStatus> {
    if out.is_null() {
        return Err(null_error("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_into(src: &[f64], out: *mut f64, len: usize) -> Result<(), ClStatus> {
    if len < src.len() {
        set_error(format!("buffer holds {len} values, need {}", src.len()));
        return Err(ClStatus::BufferTooSmall);
    }
    if out.is_null() {
        return Err(null_error("output buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// without the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Creates an MDP. `transition` holds `n_states * n_actions` rows of
/// `n_states` probabilities, row `s * n_actions + a`.
///
/// # Safety
/// Buffers must hold the stated number of values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_mdp_new(
    n_states: usize,
    n_actions: usize,
    transition: *const f64,
    discount: f64,
    initial_dist: *const f64,
    out: *mut *mut ClMdp,
) -> ClStatus {
    guard(|| {
        let t = read_slice(transition, n_states * n_actions * n_states, "transition")?;
        let alpha = read_slice(initial_dist, n_states, "initial_dist")?;
        let mdp = lift(Mdp::new(n_states, n_actions, t.to_vec(), discount, alpha.to_vec()))?;
        write_out(out, ClMdp(mdp))
    })
}

/// Windy gridworld with `cols` wind entries and an absorbing goal.
///
/// # Safety
/// `wind` must hold `cols` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_mdp_gridworld(
    rows: usize,
    cols: usize,
    wind: *const u32,
    goal_row: usize,
    goal_col: usize,
    discount: f64,
    out: *mut *mut ClMdp,
) -> ClStatus {
    guard(|| {
        if wind.is_null() && cols > 0 {
            return Err(null_error("wind"));
        }
        let wind = if cols == 0 { Vec::new() } else { slice::from_raw_parts(wind, cols).to_vec() };
        let world = lift(WindyGridworld::new(rows, cols, wind, (goal_row, goal_col)))?;
        let mdp = lift(world.to_mdp(discount))?;
        write_out(out, ClMdp(mdp))
    })
}

/// # Safety
/// `mdp` must be a live handle; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn cl_mdp_dims(mdp: *const ClMdp, n_states: *mut usize, n_actions: *mut usize) -> ClStatus {
    guard(|| {
        let mdp = &read(mdp, "mdp")?.0;
        if !n_states.is_null() {
            *n_states = mdp.n_states();
        }
        if !n_actions.is_null() {
            *n_actions = mdp.n_actions();
        }
        Ok(())
    })
}

/// # Safety
/// `mdp` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cl_mdp_free(mdp: *mut ClMdp) {
    if !mdp.is_null() {
        drop(Box::from_raw(mdp));
    }
}

/// Policy from `n_states` rows of `n_actions` probabilities.
///
/// # Safety
/// `probs` must hold `n_states * n_actions` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_policy_new(
    n_states: usize,
    n_actions: usize,
    probs: *const f64,
    out: *mut *mut ClPolicy,
) -> ClStatus {
    guard(|| {
        let p = read_slice(probs, n_states * n_actions, "probs")?;
        let policy = lift(Policy::new(n_states, n_actions, p.to_vec()))?;
        write_out(out, ClPolicy(policy))
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_policy_uniform(n_states: usize, n_actions: usize, out: *mut *mut ClPolicy) -> ClStatus {
    guard(|| {
        if n_states == 0 || n_actions == 0 {
            set_error("policy needs at least one state and action".into());
            return Err(ClStatus::InvalidArgument);
        }
        write_out(out, ClPolicy(Policy::uniform(n_states, n_actions)))
    })
}

/// Copies the probabilities into `out` (capacity `len`).
///
/// # Safety
/// `policy` must be live; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn cl_policy_probs(policy: *const ClPolicy, out: *mut f64, len: usize) -> ClStatus {
    guard(|| copy_into(read(policy, "policy")?.0.as_slice(), out, len))
}

/// # Safety
/// `policy` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cl_policy_free(policy: *mut ClPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// # Safety
/// `values` must hold `n_states * n_actions` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_measure_new(
    n_states: usize,
    n_actions: usize,
    values: *const f64,
    out: *mut *mut ClMeasure,
) -> ClStatus {
    guard(|| {
        let v = read_slice(values, n_states * n_actions, "values")?;
        let mu = lift(OccupationMeasure::new(n_states, n_actions, v.to_vec()))?;
        write_out(out, ClMeasure(mu))
    })
}

/// # Safety
/// `measure` must be live; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn cl_measure_values(measure: *const ClMeasure, out: *mut f64, len: usize) -> ClStatus {
    guard(|| copy_into(read(measure, "measure")?.0.as_slice(), out, len))
}

/// # Safety
/// `measure` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cl_measure_free(measure: *mut ClMeasure) {
    if !measure.is_null() {
        drop(Box::from_raw(measure));
    }
}

/// Exact discounted occupation measure of `policy` in `mdp`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_occupation_from_policy(
    mdp: *const ClMdp,
    policy: *const ClPolicy,
    out: *mut *mut ClMeasure,
) -> ClStatus {
    guard(|| {
        let mu = lift(occupation_from_policy(&read(mdp, "mdp")?.0, &read(policy, "policy")?.0))?;
        write_out(out, ClMeasure(mu))
    })
}

/// # Safety
/// `measure` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_policy_from_occupation(measure: *const ClMeasure, out: *mut *mut ClPolicy) -> ClStatus {
    guard(|| {
        let pi = lift(policy_from_occupation(&read(measure, "measure")?.0))?;
        write_out(out, ClPolicy(pi))
    })
}

/// Euclidean projection of `v` onto the simplex intersected with the box
/// `[center - epsilon, center + epsilon]`.
///
/// # Safety
/// `v`, `center` and `out` must hold `n` values; `center` must lie on the simplex.
#[no_mangle]
pub unsafe extern "C" fn cl_project_box_simplex(
    v: *const f64,
    center: *const f64,
    n: usize,
    epsilon: f64,
    out: *mut f64,
) -> ClStatus {
    guard(|| {
        let v = read_slice(v, n, "v")?;
        let c = read_slice(center, n, "center")?;
        if n == 0 || !(epsilon >= 0.0) {
            set_error("projection needs n >= 1 and epsilon >= 0".into());
            return Err(ClStatus::InvalidArgument);
        }
        copy_into(&project_box_simplex(v, c, epsilon), out, n)
    })
}

/// Cross-learning instance over `n_envs` environments with the identity
/// cost basis. Handles are copied; the caller keeps ownership.
///
/// # Safety
/// `mdps` and `experts` must each hold `n_envs` live handles.
#[no_mangle]
pub unsafe extern "C" fn cl_instance_new(
    mdps: *const *const ClMdp,
    experts: *const *const ClMeasure,
    n_envs: usize,
    epsilon: f64,
    out: *mut *mut ClInstance,
) -> ClStatus {
    guard(|| {
        if n_envs == 0 {
            set_error("at least one environment is required".into());
            return Err(ClStatus::InvalidArgument);
        }
        if mdps.is_null() || experts.is_null() {
            return Err(null_error("environment arrays"));
        }
        let mut envs = Vec::with_capacity(n_envs);
        for i in 0..n_envs {
            let mdp = read(*mdps.add(i), "mdp")?.0.clone();
            let mu = read(*experts.add(i), "expert measure")?.0.clone();
            envs.push(lift(EnvironmentBundle::new(mdp, mu, format!("env{}", i + 1)))?);
        }
        let basis = CostBasis::identity(envs[0].mdp.n_pairs());
        let instance = lift(CalInstance::new(envs, basis, epsilon))?;
        write_out(out, ClInstance(instance))
    })
}

/// # Safety
/// `instance` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cl_instance_free(instance: *mut ClInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Solves the McCormick relaxation and recovers feasible policies.
///
/// # Safety
/// `instance` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_instance_solve(
    instance: *const ClInstance,
    strategy: ClStrategy,
    out: *mut *mut ClSolution,
) -> ClStatus {
    guard(|| {
        let instance = &read(instance, "instance")?.0;
        let strategy = match strategy {
            ClStrategy::CrossCentered => ProjectionStrategy::CrossCentered,
            ClStrategy::AverageCentered => ProjectionStrategy::AverageCentered,
        };
        let sol = lift(solve_mccormick(instance))?;
        let policies = lift(recover_policies(&sol, instance, strategy))?;
        write_out(
            out,
            ClSolution {
                lower_bound: sol.lower_bound,
                achieved_objective: policies.achieved_objective,
                individual: policies.individual,
                cross: policies.cross,
            },
        )
    })
}

/// # Safety
/// `solution` must be live; out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn cl_solution_values(
    solution: *const ClSolution,
    lower_bound: *mut f64,
    achieved_objective: *mut f64,
    n_envs: *mut usize,
) -> ClStatus {
    guard(|| {
        let sol = read(solution, "solution")?;
        if !lower_bound.is_null() {
            *lower_bound = sol.lower_bound;
        }
        if !achieved_objective.is_null() {
            *achieved_objective = sol.achieved_objective;
        }
        if !n_envs.is_null() {
            *n_envs = sol.individual.len();
        }
        Ok(())
    })
}

/// Policy `index` of the solution; `index == n_envs` selects the
/// cross-learned policy.
///
/// # Safety
/// `solution` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_solution_policy(solution: *const ClSolution, index: usize, out: *mut *mut ClPolicy) -> ClStatus {
    guard(|| {
        let sol = read(solution, "solution")?;
        let policy = match index.cmp(&sol.individual.len()) {
            std::cmp::Ordering::Less => sol.individual[index].clone(),
            std::cmp::Ordering::Equal => sol.cross.clone(),
            std::cmp::Ordering::Greater => {
                set_error(format!("policy index {index} out of range"));
                return Err(ClStatus::InvalidArgument);
            }
        };
        write_out(out, ClPolicy(policy))
    })
}

/// # Safety
/// `solution` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cl_solution_free(solution: *mut ClSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Rollouts from uniform non-goal starts that reach `goal_state` within
/// `max_steps`.
///
/// # Safety
/// Handles must be live; `successes` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_evaluate_success(
    mdp: *const ClMdp,
    goal_state: usize,
    policy: *const ClPolicy,
    n_traj: usize,
    max_steps: usize,
    seed: u64,
    successes: *mut usize,
) -> ClStatus {
    guard(|| {
        if successes.is_null() {
            return Err(null_error("successes"));
        }
        let n = lift(crosslearn::gridworld::evaluate_success(
            &read(mdp, "mdp")?.0,
            goal_state,
            &read(policy, "policy")?.0,
            n_traj,
            max_steps,
            seed,
        ))?;
        *successes = n;
        Ok(())
    })
}
