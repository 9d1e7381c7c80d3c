//! Backward-flow dynamics and first-passage experiments.
//!
//! The backward flow moves a point z in the upper half plane by
//! dz/ds = -2 / (z - W_s). In the driver-relative coordinates
//! (X, Y) = z_s - W_s the squared position (X + iY)^2 moves on a straight
//! line within each constant driver piece, which makes the step map, the
//! accumulated log |f'|, the running height Y, and the log-height passage
//! times gamma_u all closed-form per piece. Driver level changes shift X
//! and touch nothing else.

use crate::error::{Error, Result};
use crate::loewner::{continued_sqrt, Driver};
use crate::report::ExperimentReport;
use crate::rng::PathRng;
use crate::stable::{sample_stable_path, StableParams};
use crate::stats::{mean_and_se, wilson_interval, Z_95};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// Sign of the Loewner vector field: the forward equation repels the real
/// line from the driving point, the backward one attracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDirection {
    Forward,
    Backward,
}

/// Driver-relative position of a point carried by the backward flow.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BackwardFlowState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Accumulated log |f'|: the integral of 2(X^2 - Y^2)/(X^2 + Y^2)^2.
    pub log_deriv: f64,
}

impl BackwardFlowState {
    pub fn start(z: Complex64) -> Self {
        assert!(z.im > 0.0, "backward flow starts strictly inside the half plane");
        Self { t: 0.0, x: z.re, y: z.im, log_deriv: 0.0 }
    }
}

/// Advances the state through one constant piece of length dt, then
/// applies the driver increment dw. dt = 0 encodes a pure driver jump:
/// X moves by -dw while Y and log_deriv stay untouched.
pub fn step_backward_xy(state: &mut BackwardFlowState, dw: f64, dt: f64) {
    assert!(state.y > 0.0, "flow state left the half plane");
    assert!(dt >= 0.0);
    if dt > 0.0 {
        let zeta0 = Complex64::new(state.x, state.y);
        let zeta1 = continued_sqrt(zeta0 * zeta0 - 4.0 * dt, state.x);
        // d log|f'| integrates to log |zeta_0| - log |zeta_1| along the piece.
        state.log_deriv += 0.5 * (zeta0.norm_sqr().ln() - zeta1.norm_sqr().ln());
        state.x = zeta1.re;
        state.y = zeta1.im;
        state.t += dt;
    }
    state.x -= dw;
}

/// First-passage record of the log-height time change: gamma_u is the
/// first time Y reaches Y_0 e^u, infinity when the horizon ran out first.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimeChangeRecord {
    pub u: f64,
    pub gamma_u: f64,
    /// log |f'| accumulated up to gamma_u (up to the horizon if censored).
    pub log_deriv_at_gamma: f64,
    pub censored: bool,
}

/// Full outcome of one backward-flow run.
#[derive(Debug, Clone)]
pub struct BackwardFlowRun {
    pub final_state: BackwardFlowState,
    pub records: Vec<TimeChangeRecord>,
    /// Largest value of log |f'| seen along the whole trajectory.
    pub max_log_deriv: f64,
}

/// Runs the backward flow from z for `t_max` of the driver's span,
/// recording the log-height passages gamma_u for every requested level
/// (nonnegative, ascending). Y is monotone and explicit inside pieces, so
/// each crossing time is solved exactly rather than interpolated.
pub fn run_backward_flow(
    driver: &Driver,
    z: Complex64,
    t_max: f64,
    u_levels: &[f64],
) -> Result<BackwardFlowRun> {
    if t_max > driver.horizon() * (1.0 + 1e-12) {
        return Err(Error::Horizon { requested: t_max, available: driver.horizon() });
    }
    assert!(
        u_levels.windows(2).all(|w| w[1] >= w[0]) && u_levels.iter().all(|&u| u >= 0.0),
        "u levels must be ascending and nonnegative"
    );
    let mut state = BackwardFlowState::start(z);
    let y0 = state.y;
    let mut records = Vec::with_capacity(u_levels.len());
    let mut next_u = 0usize;
    let mut max_log_deriv = 0.0f64;

    let times = driver.times();
    let levels = driver.levels();
    for k in 0..times.len() - 1 {
        if state.t >= t_max {
            break;
        }
        let end = times[k + 1].min(t_max);
        let dt = end - times[k];
        let (a, b) = {
            let z2 = Complex64::new(state.x, state.y) * Complex64::new(state.x, state.y);
            (z2.re, z2.im)
        };
        let norm0_sq = a.hypot(b);

        // Log-height crossings inside this piece: Y^2 as a function of
        // piece time s is ((a - 4s)^2 + b^2)^(1/2) - (a - 4s)) / 2,
        // strictly increasing, so tau = Y*^2 inverts in closed form.
        let y_end_sq = 0.5 * ((a - 4.0 * dt).hypot(b) - (a - 4.0 * dt));
        while next_u < u_levels.len() {
            let target = y0 * (u_levels[next_u]).exp();
            let tau = target * target;
            if tau > y_end_sq {
                break;
            }
            let s = ((a - (b * b - 4.0 * tau * tau) / (4.0 * tau)) / 4.0).clamp(0.0, dt);
            let ld = state.log_deriv + 0.5 * (norm0_sq.ln() - (a - 4.0 * s).hypot(b).ln());
            records.push(TimeChangeRecord {
                u: u_levels[next_u],
                gamma_u: times[k] + s,
                log_deriv_at_gamma: ld,
                censored: false,
            });
            next_u += 1;
        }

        // |zeta| dips lowest where Re zeta^2 crosses zero, which is where
        // log |f'| peaks within the piece.
        let s_peak = (a / 4.0).clamp(0.0, dt);
        let peak = state.log_deriv + 0.5 * (norm0_sq.ln() - (a - 4.0 * s_peak).hypot(b).ln());
        max_log_deriv = max_log_deriv.max(peak);

        // The level change at the piece boundary only applies if the run
        // actually reaches that boundary.
        let dw = if end < times[k + 1] { 0.0 } else { levels[k + 1] - levels[k] };
        step_backward_xy(&mut state, dw, dt);
    }

    for &u in &u_levels[next_u..] {
        records.push(TimeChangeRecord {
            u,
            gamma_u: f64::INFINITY,
            log_deriv_at_gamma: state.log_deriv,
            censored: true,
        });
    }
    Ok(BackwardFlowRun { final_state: state, records, max_log_deriv })
}

/// Trajectory of a real point carried by the forward or backward flow,
/// sampled at the driver breakpoints (values after the level change).
#[derive(Debug, Clone)]
pub struct RealTrajectory {
    pub samples: Vec<(f64, f64)>,
    /// Time at which |X| fell to the absorption tolerance, if it did.
    pub hit_time: Option<f64>,
}

/// Real-line flow X_t = Z_t - W_t with dZ = +-2/(Z - W) dt. Within a
/// piece |X| moves along sqrt(X^2 +- 4s) on its own side of the
/// singularity; the backward sign reaches zero in finite time.
pub fn real_line_flow(
    x0: f64,
    driver: &Driver,
    t_max: f64,
    direction: FlowDirection,
    tol: f64,
) -> RealTrajectory {
    assert!(x0 != 0.0, "the flow is singular at the driving point");
    assert!(tol > 0.0);
    assert!(t_max <= driver.horizon() * (1.0 + 1e-12), "driver span too short");
    let times = driver.times();
    let levels = driver.levels();
    let mut x = x0;
    let mut samples = vec![(0.0, x)];
    for k in 0..times.len() - 1 {
        if times[k] >= t_max {
            break;
        }
        let end = times[k + 1].min(t_max);
        let dt = end - times[k];
        match direction {
            FlowDirection::Forward => {
                x = (x * x + 4.0 * dt).sqrt().copysign(x);
            }
            FlowDirection::Backward => {
                let rem = x * x - 4.0 * dt;
                if rem <= tol * tol {
                    let s = (x * x - tol * tol).max(0.0) / 4.0;
                    samples.push((times[k] + s, tol.copysign(x)));
                    return RealTrajectory { samples, hit_time: Some(times[k] + s) };
                }
                x = rem.sqrt().copysign(x);
            }
        }
        if end == times[k + 1] {
            x -= levels[k + 1] - levels[k];
        }
        samples.push((end, x));
        if x.abs() <= tol {
            return RealTrajectory { samples, hit_time: Some(end) };
        }
    }
    RealTrajectory { samples, hit_time: None }
}

enum ExitOutcome {
    Inner(f64),
    Outer(f64),
    Censored,
}

fn real_exit(driver: &Driver, x0: f64, r: f64, big_r: f64, direction: FlowDirection) -> ExitOutcome {
    let times = driver.times();
    let levels = driver.levels();
    let mut x = x0;
    for k in 0..times.len() - 1 {
        let dt = times[k + 1] - times[k];
        match direction {
            FlowDirection::Forward => {
                // |X| grows within the piece; only the outer barrier is reachable.
                if x * x + 4.0 * dt >= big_r * big_r {
                    return ExitOutcome::Outer(times[k] + (big_r * big_r - x * x) / 4.0);
                }
                x = (x * x + 4.0 * dt).sqrt().copysign(x);
            }
            FlowDirection::Backward => {
                if x * x - 4.0 * dt <= r * r {
                    return ExitOutcome::Inner(times[k] + (x * x - r * r).max(0.0) / 4.0);
                }
                x = (x * x - 4.0 * dt).sqrt().copysign(x);
            }
        }
        if k + 1 < levels.len() {
            x -= levels[k + 1] - levels[k];
        }
        if x.abs() <= r {
            return ExitOutcome::Inner(times[k + 1]);
        }
        if x.abs() >= big_r {
            return ExitOutcome::Outer(times[k + 1]);
        }
    }
    ExitOutcome::Censored
}

/// Monte Carlo estimate of P(|X| reaches r before R) for the real-line
/// flow started at x0 under a stable driver. The report carries the
/// scale-function bound (|x0|/r)^(alpha-1) alongside for comparison; its
/// derivation needs alpha away from 1, so the entry is omitted there.
#[allow(clippy::too_many_arguments)]
pub fn exit_probability_experiment(
    params: &StableParams,
    direction: FlowDirection,
    x0: f64,
    r: f64,
    big_r: f64,
    n_paths: usize,
    t_max: f64,
    n_steps: usize,
    master_seed: u64,
) -> Result<ExperimentReport> {
    if !(0.0 < r && r < x0.abs() && x0.abs() < big_r) {
        return Err(Error::Parameter(format!(
            "need 0 < r < |x0| < R, got r = {r}, x0 = {x0}, R = {big_r}"
        )));
    }
    assert!(n_paths > 0 && n_steps > 0 && t_max > 0.0);
    let outcomes: Vec<ExitOutcome> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = PathRng::new(master_seed, k as u64);
            let path = sample_stable_path(params, t_max, n_steps, &mut rng);
            real_exit(&Driver::from_levy_path(&path), x0, r, big_r, direction)
        })
        .collect();

    let mut inner = 0usize;
    let mut censored = 0usize;
    let mut inner_times = Vec::new();
    let mut outer_times = Vec::new();
    for o in &outcomes {
        match o {
            ExitOutcome::Inner(t) => {
                inner += 1;
                inner_times.push(*t);
            }
            ExitOutcome::Outer(t) => outer_times.push(*t),
            ExitOutcome::Censored => censored += 1,
        }
    }
    let estimate = inner as f64 / n_paths as f64;
    let (ci_low, ci_high) = wilson_interval(inner, n_paths, Z_95);
    let censored_fraction = censored as f64 / n_paths as f64;

    let mut details = BTreeMap::new();
    if params.alpha != 1.0 {
        details.insert(
            "scale_function_bound".into(),
            (x0.abs() / r).powf(params.alpha - 1.0),
        );
    }
    if !inner_times.is_empty() {
        let (m, _) = mean_and_se(&inner_times);
        details.insert("mean_inner_hit_time".into(), m);
    }
    if !outer_times.is_empty() {
        let (m, _) = mean_and_se(&outer_times);
        details.insert("mean_outer_hit_time".into(), m);
    }
    if censored_fraction > 0.1 {
        details.insert("censoring_warning".into(), 1.0);
    }
    Ok(ExperimentReport {
        experiment: format!(
            "exit_probability_{}",
            match direction {
                FlowDirection::Forward => "forward",
                FlowDirection::Backward => "backward",
            }
        ),
        n_paths,
        master_seed,
        estimate,
        std_error: (estimate * (1.0 - estimate) / n_paths as f64).sqrt(),
        ci_low,
        ci_high,
        censored_fraction,
        details,
    })
}

/// Monte Carlo estimate of P(gamma_u < t_max): how often the backward
/// flow gains u units of log-height within the horizon.
pub fn height_reach_experiment(
    params: &StableParams,
    z: Complex64,
    u: f64,
    n_paths: usize,
    t_max: f64,
    n_steps: usize,
    master_seed: u64,
) -> Result<ExperimentReport> {
    if !(u >= 0.0) || z.im <= 0.0 {
        return Err(Error::Parameter("need u >= 0 and Im z > 0".into()));
    }
    assert!(n_paths > 0 && n_steps > 0 && t_max > 0.0);
    let gammas: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = PathRng::new(master_seed, k as u64);
            let path = sample_stable_path(params, t_max, n_steps, &mut rng);
            let run = run_backward_flow(&Driver::from_levy_path(&path), z, t_max, &[u])?;
            Ok(run.records[0].gamma_u)
        })
        .collect::<Result<_>>()?;

    let reached = gammas.iter().filter(|g| g.is_finite()).count();
    let estimate = reached as f64 / n_paths as f64;
    let (ci_low, ci_high) = wilson_interval(reached, n_paths, Z_95);
    let mut details = BTreeMap::new();
    let finite: Vec<f64> = gammas.iter().copied().filter(|g| g.is_finite()).collect();
    if !finite.is_empty() {
        let (m, _) = mean_and_se(&finite);
        details.insert("mean_gamma_u_reached".into(), m);
    }
    let censored_fraction = 1.0 - estimate;
    if censored_fraction > 0.1 {
        details.insert("censoring_warning".into(), 1.0);
    }
    Ok(ExperimentReport {
        experiment: "height_reach".into(),
        n_paths,
        master_seed,
        estimate,
        std_error: (estimate * (1.0 - estimate) / n_paths as f64).sqrt(),
        ci_low,
        ci_high,
        censored_fraction,
        details,
    })
}
