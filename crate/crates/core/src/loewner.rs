//! Chordal Loewner maps for piecewise-constant drivers.
//!
//! With the driver frozen at level w over a piece of length dt, the
//! forward equation dg/dt = 2 / (g - w) integrates in closed form to
//! g(z) = w + sqrt((z - w)^2 + 4 dt), and the matching piece of the
//! inverse is w + sqrt((z - w)^2 - 4 dt). Whole-path maps compose these
//! pieces, so apart from the driver's own discretization the evaluation
//! is exact up to floating point. Swallowing checks are closed-form as
//! well: along a piece (g - w)^2 moves on a straight line, so the
//! minimum distance to the driving point over the piece is available
//! without substepping.

use crate::error::{Error, Result};
use crate::geometry::HullApprox;
use num_complex::Complex64;

/// Default imaginary lift used when tracing the boundary of a hull.
pub const DEFAULT_TRACE_LIFT: f64 = 1e-8;

/// Swallow threshold scaled to the point: |g_t(z) - W_t| at or below this
/// counts as absorbed into the hull.
pub fn swallow_tolerance(z: Complex64) -> f64 {
    1e-9 * (1.0 + z.norm())
}

/// Piecewise-constant driving function on [0, horizon].
///
/// `levels[k]` holds on [times[k], times[k+1]); the final entry is the
/// value at the horizon itself. `jump_times` annotates the breakpoints
/// that carry a retained large jump; each must be one of `times`.
#[derive(Debug, Clone, PartialEq)]
pub struct Driver {
    times: Vec<f64>,
    levels: Vec<f64>,
    jump_times: Vec<f64>,
}

impl Driver {
    pub fn new(times: Vec<f64>, levels: Vec<f64>, jump_times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != levels.len() {
            return Err(Error::Parameter(
                "driver needs matching times and levels with at least two records".into(),
            ));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("driver times must increase strictly from zero".into()));
        }
        if times.iter().chain(levels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("nonfinite entry in driver".into()));
        }
        for jt in &jump_times {
            if times.binary_search_by(|t| t.partial_cmp(jt).unwrap()).is_err() {
                return Err(Error::Parameter(format!("jump time {jt} is not a driver breakpoint")));
            }
        }
        Ok(Self { times, levels, jump_times })
    }

    /// Constant driver, hull a vertical slit at w.
    pub fn constant(w: f64, horizon: f64) -> Self {
        assert!(horizon > 0.0);
        Self { times: vec![0.0, horizon], levels: vec![w, w], jump_times: Vec::new() }
    }

    pub fn from_levy_path(path: &crate::stable::LevyPath) -> Self {
        Self {
            times: path.times.clone(),
            levels: path.values.clone(),
            jump_times: path.large_jumps.iter().map(|j| j.time).collect(),
        }
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    /// Right-continuous lookup of the driver level at t.
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&tk| tk <= t);
        if idx == 0 { self.levels[0] } else { self.levels[idx - 1] }
    }

    pub fn min_level(&self) -> f64 {
        self.levels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_level(&self) -> f64 {
        self.levels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One composition piece: driver frozen at `level` for `dt` capacity time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlitStep {
    pub level: f64,
    pub dt: f64,
}

/// Square root branch that continues z -> z from infinity: the root with
/// positive imaginary part, with real-axis ties broken by the sign of the
/// original offset from the driving point.
pub(crate) fn continued_sqrt(u: Complex64, re_sign: f64) -> Complex64 {
    let s = u.sqrt();
    if s.im < 0.0 || (s.im == 0.0 && re_sign < 0.0) {
        -s
    } else {
        s
    }
}

/// Forward map of one piece: g(z) = w + sqrt((z - w)^2 + 4 dt).
pub fn forward_step(z: Complex64, w: f64, dt: f64) -> Complex64 {
    let zeta = z - w;
    w + continued_sqrt(zeta * zeta + 4.0 * dt, zeta.re)
}

/// Inverse map of one piece: f(z) = w + sqrt((z - w)^2 - 4 dt).
pub fn backward_step(z: Complex64, w: f64, dt: f64) -> Complex64 {
    let zeta = z - w;
    w + continued_sqrt(zeta * zeta - 4.0 * dt, zeta.re)
}

/// Outcome of running one checked forward piece.
enum PieceOutcome {
    /// Point stayed clear; mapped position at the end of the piece.
    Clear(Complex64),
    /// Point entered the swallow disk after this much piece time.
    Absorbed(f64),
}

/// Advances zeta = g(z) - w through one piece, reporting the first time
/// |zeta| falls to `tol`. zeta^2 moves linearly, so both the running
/// minimum of |zeta| and the first crossing are closed-form.
fn advance_piece(zeta: Complex64, dt: f64, tol: f64) -> PieceOutcome {
    let u = zeta * zeta;
    let (a, b) = (u.re, u.im);
    let tol2 = tol * tol;
    let s_min = (-a / 4.0).clamp(0.0, dt);
    let nearest = a + 4.0 * s_min;
    if nearest * nearest + b * b <= tol2 * tol2 {
        let r = (tol2 * tol2 - b * b).max(0.0).sqrt();
        let s_enter = ((-a - r) / 4.0).clamp(0.0, dt);
        return PieceOutcome::Absorbed(s_enter);
    }
    PieceOutcome::Clear(continued_sqrt(u + 4.0 * dt, zeta.re))
}

/// How a tracked point left the evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalKind {
    /// Reached the driving point in the interior of a driver piece.
    SwallowedInterior,
    /// A retained large jump of the driver landed on the point.
    SwallowedAtJump,
    /// Still outside the hull at the horizon.
    Survived,
}

/// Swallowing report: terminal time (the horizon for survivors), how the
/// point was absorbed, and the conformal trajectory g_t(z) recorded at
/// every piece boundary plus the terminal instant.
#[derive(Debug, Clone)]
pub struct SwallowResult {
    pub time: f64,
    pub kind: TerminalKind,
    pub trajectory: Vec<(f64, Complex64)>,
}

/// Composed slit maps of a whole driver.
#[derive(Debug, Clone)]
pub struct MapChain {
    steps: Vec<SlitStep>,
    starts: Vec<f64>,
    total_time: f64,
}

impl MapChain {
    pub fn from_driver(driver: &Driver) -> Self {
        let n = driver.times.len() - 1;
        let mut steps = Vec::with_capacity(n);
        let mut starts = Vec::with_capacity(n);
        for k in 0..n {
            steps.push(SlitStep {
                level: driver.levels[k],
                dt: driver.times[k + 1] - driver.times[k],
            });
            starts.push(driver.times[k]);
        }
        Self { steps, starts, total_time: driver.horizon() }
    }

    pub fn steps(&self) -> &[SlitStep] {
        &self.steps
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    /// Number of steps active before time t and the elapsed part of the
    /// last of them.
    fn prefix(&self, t: f64) -> (usize, f64) {
        assert!((0.0..=self.total_time + 1e-12).contains(&t), "t = {t} outside [0, T]");
        let idx = self.starts.partition_point(|&s| s < t);
        if idx == 0 {
            (0, 0.0)
        } else {
            let last = idx - 1;
            (idx, (t - self.starts[last]).min(self.steps[last].dt))
        }
    }

    /// g_t(z), swallow-checked piece by piece.
    pub fn forward_at(&self, t: f64, z: Complex64) -> Result<Complex64> {
        let tol = swallow_tolerance(z);
        let (count, last_dt) = self.prefix(t);
        let mut cur = z;
        for i in 0..count {
            let step = self.steps[i];
            let dt = if i + 1 == count { last_dt } else { step.dt };
            match advance_piece(cur - step.level, dt, tol) {
                PieceOutcome::Clear(zeta) => cur = step.level + zeta,
                PieceOutcome::Absorbed(s) => {
                    return Err(Error::Swallowed { step: i, time: self.starts[i] + s })
                }
            }
        }
        Ok(cur)
    }

    /// g_T(z) over the full horizon.
    pub fn forward(&self, z: Complex64) -> Result<Complex64> {
        self.forward_at(self.total_time, z)
    }

    /// g_t^{-1}(z): the inverse pieces applied in reverse order.
    pub fn inverse_at(&self, t: f64, z: Complex64) -> Complex64 {
        let (count, last_dt) = self.prefix(t);
        let mut cur = z;
        for i in (0..count).rev() {
            let step = self.steps[i];
            let dt = if i + 1 == count { last_dt } else { step.dt };
            cur = backward_step(cur, step.level, dt);
        }
        cur
    }

    pub fn inverse(&self, z: Complex64) -> Complex64 {
        self.inverse_at(self.total_time, z)
    }
}

/// Tracks z until it is swallowed or the horizon is reached. `tol` is the
/// absorption radius around the driving point, typically
/// [`swallow_tolerance`] of z or a coarser scale chosen by the caller.
pub fn swallow_time(driver: &Driver, z: Complex64, tol: f64) -> SwallowResult {
    assert!(z.im >= 0.0, "swallow tracking starts in the closed upper half plane");
    assert!(tol > 0.0);
    let chain = MapChain::from_driver(driver);
    let mut trajectory = Vec::with_capacity(chain.steps.len() + 2);
    trajectory.push((0.0, z));
    let mut cur = z;
    for (i, step) in chain.steps.iter().enumerate() {
        match advance_piece(cur - step.level, step.dt, tol) {
            PieceOutcome::Clear(zeta) => {
                cur = step.level + zeta;
                trajectory.push((chain.starts[i] + step.dt, cur));
            }
            PieceOutcome::Absorbed(s) => {
                let time = chain.starts[i] + s;
                // Entry right at a retained-jump breakpoint means the
                // driver jumped onto the point.
                let kind = if s == 0.0
                    && driver.jump_times.iter().any(|&jt| jt == chain.starts[i])
                {
                    TerminalKind::SwallowedAtJump
                } else {
                    TerminalKind::SwallowedInterior
                };
                let u = (cur - step.level) * (cur - step.level) + 4.0 * s;
                trajectory.push((time, step.level + continued_sqrt(u, (cur - step.level).re)));
                return SwallowResult { time, kind, trajectory };
            }
        }
    }
    SwallowResult { time: driver.horizon(), kind: TerminalKind::Survived, trajectory }
}

/// Lower bound for the distance from the tracked point to the driving
/// point over the whole run: |Re(g_t(z) - W_t)| never decreases inside a
/// piece, so the minimum over piece starts is a certificate. A positive
/// return guarantees the point survives any swallow threshold below it.
pub fn re_distance_floor(driver: &Driver, z: Complex64) -> f64 {
    let chain = MapChain::from_driver(driver);
    let mut floor = f64::INFINITY;
    let mut cur = z;
    for step in &chain.steps {
        let zeta = cur - step.level;
        floor = floor.min(zeta.re.abs());
        if floor == 0.0 {
            return 0.0;
        }
        cur = step.level + continued_sqrt(zeta * zeta + 4.0 * step.dt, zeta.re);
    }
    floor
}

/// Boundary trace of the hull: gamma(t) = g_t^{-1}(W_t + i lift) at the
/// requested sample times (nondecreasing, within [0, horizon]). Sample
/// intervals containing a retained-jump time are flagged, since the trace
/// point teleports across such an interval.
pub fn compute_trace(driver: &Driver, sample_times: &[f64], lift: f64) -> HullApprox {
    assert!(lift > 0.0, "trace lift must be positive");
    assert!(
        sample_times.windows(2).all(|w| w[1] >= w[0]),
        "sample times must be nondecreasing"
    );
    let chain = MapChain::from_driver(driver);
    let mut points = Vec::with_capacity(sample_times.len());
    let mut jump_flags = Vec::with_capacity(sample_times.len());
    let mut prev_t = 0.0;
    for &t in sample_times {
        let anchor = Complex64::new(driver.value_at(t), lift);
        points.push(chain.inverse_at(t, anchor));
        jump_flags.push(driver.jump_times.iter().any(|&jt| prev_t < jt && jt <= t));
        prev_t = t;
    }
    HullApprox {
        times: sample_times.to_vec(),
        points,
        jump_flags,
        capacity: 2.0 * driver.horizon(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::PathRng;
    use crate::stable::{sample_stable_path, StableParams};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn zero_driver(horizon: f64, n: usize) -> Driver {
        let times: Vec<f64> = (0..=n).map(|k| horizon * k as f64 / n as f64).collect();
        Driver::new(times, vec![0.0; n + 1], vec![]).unwrap()
    }

    #[test]
    fn zero_driver_matches_closed_form() {
        // W = 0 composes to g(z) = sqrt(z^2 + 4T) exactly, step count aside.
        let chain = MapChain::from_driver(&zero_driver(1.0, 137));
        for z in [c(0.3, 1.2), c(-2.0, 0.4), c(0.0, 3.0), c(5.0, 0.0)] {
            let got = chain.forward(z).unwrap();
            let want = continued_sqrt(z * z + 4.0, z.re);
            assert!((got - want).norm() < 1e-12, "z = {z}: {got} vs {want}");
        }
    }

    #[test]
    fn vertical_slit_trace() {
        let driver = zero_driver(1.0, 64);
        let times: Vec<f64> = (1..=100).map(|k| k as f64 / 100.0).collect();
        let hull = compute_trace(&driver, &times, DEFAULT_TRACE_LIFT);
        for (t, p) in hull.times.iter().zip(&hull.points) {
            let want = c(0.0, 2.0 * t.sqrt());
            assert!((p - want).norm() < 1e-6, "t = {t}: {p} vs {want}");
        }
        assert!(hull.jump_flags.iter().all(|f| !f));
        assert!((hull.capacity - 2.0).abs() < 1e-15);
    }

    #[test]
    fn forward_inverse_round_trip() {
        let params = StableParams::standard(1.2).unwrap();
        let path = sample_stable_path(&params, 1.0, 300, &mut PathRng::new(5, 0));
        let chain = MapChain::from_driver(&Driver::from_levy_path(&path));
        for z in [c(0.0, 0.5), c(1.5, 0.2), c(-3.0, 1.0), c(0.7, 4.0)] {
            let back = chain.forward(chain.inverse(z)).unwrap();
            assert!((back - z).norm() < 1e-9 * (1.0 + z.norm()), "z = {z}: {back}");
        }
    }

    #[test]
    fn capacity_probe_at_large_height() {
        // z large enough that the expansion g(z) = z + 2t/z + O(1/z^2)
        // dominates, small enough that the z-amplified rounding of the
        // composed square roots stays below the tolerance.
        let params = StableParams::standard(1.0).unwrap();
        let path = sample_stable_path(&params, 0.7, 200, &mut PathRng::new(6, 3));
        let chain = MapChain::from_driver(&Driver::from_levy_path(&path));
        let z = c(0.0, 1e4);
        let probe = (chain.forward(z).unwrap() - z) * z;
        assert!((probe.re - 2.0 * 0.7).abs() < 1e-3, "probe = {probe}");
    }

    #[test]
    fn swallow_time_of_vertical_slit_points() {
        // Under W = 0 the point iy is absorbed at time y^2 / 4.
        let driver = zero_driver(4.0, 160);
        for y in [0.5, 1.0, 2.0] {
            let z = c(0.0, y);
            let res = swallow_time(&driver, z, swallow_tolerance(z));
            assert_eq!(res.kind, TerminalKind::SwallowedInterior);
            assert!((res.time - y * y / 4.0).abs() < 1e-9, "y = {y}: time {}", res.time);
            let (t_end, g_end) = *res.trajectory.last().unwrap();
            assert_eq!(t_end, res.time);
            assert!(g_end.norm() < 1e-8);
        }
        // A real point off the growth site drifts away and survives:
        // |X_t| = sqrt(x^2 + 4t) is strictly increasing.
        for x in [1.0, -5.0] {
            let res = swallow_time(&driver, c(x, 0.0), swallow_tolerance(c(x, 0.0)));
            assert_eq!(res.kind, TerminalKind::Survived, "x = {x}");
            assert_eq!(res.time, 4.0);
            let (_, g_end) = *res.trajectory.last().unwrap();
            assert!((g_end.re.abs() - (x * x + 16.0).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn jump_landing_on_a_point_is_classified() {
        // Level jumps from 0 to 10 at t = 1; the preimage of 10 under the
        // first piece is sqrt(96), absorbed exactly when the jump lands.
        let x = 96.0f64.sqrt();
        let driver = Driver::new(vec![0.0, 1.0, 2.0], vec![0.0, 10.0, 10.0], vec![1.0]).unwrap();
        let res = swallow_time(&driver, c(x, 0.0), 1e-6);
        assert_eq!(res.kind, TerminalKind::SwallowedAtJump);
        assert_eq!(res.time, 1.0);
    }

    #[test]
    fn re_distance_floor_certifies_survival() {
        let params = StableParams::standard(1.5).unwrap();
        let path = sample_stable_path(&params, 0.5, 100, &mut PathRng::new(7, 1));
        let driver = Driver::from_levy_path(&path);
        let spread = path.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let z = c(spread + 3.0, 0.1);
        let floor = re_distance_floor(&driver, z);
        assert!(floor > 1.0, "floor = {floor}");
        let res = swallow_time(&driver, z, floor / 2.0);
        assert_eq!(res.kind, TerminalKind::Survived);
    }

    #[test]
    fn driver_validation_rejects_bad_breakpoints() {
        assert!(Driver::new(vec![0.0, 1.0, 1.0], vec![0.0; 3], vec![]).is_err());
        assert!(Driver::new(vec![0.5, 1.0], vec![0.0; 2], vec![]).is_err());
        assert!(Driver::new(vec![0.0, 1.0], vec![0.0; 2], vec![0.5]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn forward_stays_in_closed_half_plane(
            seed in 0u64..1000,
            re in -3.0f64..3.0,
            im in 0.01f64..4.0,
        ) {
            let params = StableParams::standard(1.0).unwrap();
            let path = sample_stable_path(&params, 0.8, 60, &mut PathRng::new(seed, 0));
            let chain = MapChain::from_driver(&Driver::from_levy_path(&path));
            if let Ok(g) = chain.forward(c(re, im)) {
                prop_assert!(g.im >= 0.0);
            }
        }

        #[test]
        fn inverse_lifts_and_round_trips(
            seed in 0u64..1000,
            re in -3.0f64..3.0,
            im in 0.05f64..4.0,
        ) {
            let params = StableParams::standard(1.4).unwrap();
            let path = sample_stable_path(&params, 0.6, 60, &mut PathRng::new(seed, 1));
            let chain = MapChain::from_driver(&Driver::from_levy_path(&path));
            let z = c(re, im);
            let f = chain.inverse(z);
            prop_assert!(f.im >= z.im - 1e-12);
            let back = chain.forward(f);
            prop_assert!(back.is_ok(), "image of the inverse was swallowed: {f}");
            let back = back.unwrap();
            prop_assert!((back - z).norm() < 1e-7 * (1.0 + z.norm()),
                "round trip drifted: {z} -> {back}");
        }

        #[test]
        fn prefix_times_compose(
            seed in 0u64..1000,
            split in 0.1f64..0.9,
        ) {
            // g_T = (pieces after t) applied to g_t for breakpoint t.
            let params = StableParams::standard(1.1).unwrap();
            let path = sample_stable_path(&params, 1.0, 40, &mut PathRng::new(seed, 2));
            let driver = Driver::from_levy_path(&path);
            let chain = MapChain::from_driver(&driver);
            let t = (split * 40.0).round() / 40.0;
            prop_assume!(t > 0.0 && t < 1.0);
            let z = c(0.4, 2.5);
            let mid = chain.forward_at(t, z).unwrap();
            // Tail driver restarted at t.
            let idx = driver.times.partition_point(|&tk| tk < t);
            let mut times: Vec<f64> = driver.times[idx..].iter().map(|tk| tk - t).collect();
            let mut levels: Vec<f64> = driver.levels[idx..].to_vec();
            if times.first() != Some(&0.0) {
                times.insert(0, 0.0);
                levels.insert(0, driver.value_at(t));
            }
            let tail = MapChain::from_driver(&Driver::new(times, levels, vec![]).unwrap());
            let via_split = tail.forward(mid).unwrap();
            let direct = chain.forward(z).unwrap();
            prop_assert!((via_split - direct).norm() < 1e-9 * (1.0 + direct.norm()));
        }
    }
}
