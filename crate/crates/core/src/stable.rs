//! Symmetric alpha-stable driver processes.
//!
//! The normalization fixes the characteristic function of the process at
//! time t to exp(-t |theta|^alpha). Under it the Levy measure is
//! c(alpha) |h|^(-1-alpha) dh, alpha = 1 is the standard Cauchy process,
//! and alpha = 2 is Brownian motion with variance 2t. The truncated
//! variant removes all jumps of magnitude above 1 and substitutes the
//! jumps below `small_jump_cutoff` by a Brownian motion of matching
//! variance; large jumps are restored by the recombination sampler.

use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, Quadrature};
use crate::rng::PathRng;
use serde::{Deserialize, Serialize};

/// Magnitude above which jumps are removed from the truncated process.
pub const JUMP_CUTOFF: f64 = 1.0;

/// Stability index and driver speed.
///
/// The driver used by the Loewner modules is W_t = S_(kappa t), so `kappa`
/// rescales process time relative to Loewner capacity time.
#[derive(Debug, Clone, Copy)]
pub struct StableParams {
    pub alpha: f64,
    pub kappa: f64,
    c_alpha: f64,
}

impl StableParams {
    pub fn new(alpha: f64, kappa: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::Parameter(format!("alpha = {alpha} outside (0, 2]")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Parameter(format!("kappa = {kappa} must be positive")));
        }
        let c_alpha = if alpha < 2.0 { levy_constant(alpha) } else { f64::NAN };
        Ok(Self { alpha, kappa, c_alpha })
    }

    /// Unit-speed process (kappa = 1).
    pub fn standard(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0)
    }

    /// Constant of the Levy density c |h|^(-1-alpha). Jump machinery only;
    /// undefined at alpha = 2.
    pub fn levy_constant(&self) -> f64 {
        assert!(self.alpha < 2.0, "no jump component at alpha = 2");
        self.c_alpha
    }

    /// Total mass of jumps above the cutoff, per unit process time.
    pub fn large_jump_rate(&self) -> f64 {
        2.0 * self.levy_constant() / self.alpha
    }

    /// Variance per unit process time of the Brownian stand-in for the
    /// jumps below `cutoff`.
    pub fn small_jump_variance(&self, cutoff: f64) -> f64 {
        2.0 * self.levy_constant() * cutoff.powf(2.0 - self.alpha) / (2.0 - self.alpha)
    }
}

/// Small-jump policy of the truncated sampler.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TruncationConfig {
    /// Jumps with magnitude at or below this level are replaced by the
    /// variance-matched Brownian component. Must lie in (0, 1].
    pub small_jump_cutoff: f64,
}

impl TruncationConfig {
    pub fn new(small_jump_cutoff: f64) -> Result<Self> {
        if !(small_jump_cutoff > 0.0 && small_jump_cutoff <= JUMP_CUTOFF) {
            return Err(Error::Parameter(format!(
                "small_jump_cutoff = {small_jump_cutoff} outside (0, {JUMP_CUTOFF}]"
            )));
        }
        Ok(Self { small_jump_cutoff })
    }
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { small_jump_cutoff: 1e-3 }
    }
}

/// A jump retained with its exact arrival time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    pub size: f64,
}

/// Piecewise record of one driver path.
///
/// `values[k]` is the value at `times[k]`; between record times the path is
/// read as constant (right-continuous), so a value change at `times[k]`
/// happens exactly at `times[k]`. Jumps of magnitude above [`JUMP_CUTOFF`]
/// are listed in `large_jumps` with times that also appear in `times`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub large_jumps: Vec<JumpRecord>,
}

impl LevyPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>, large_jumps: Vec<JumpRecord>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Parameter("times and values must be nonempty and equal length".into()));
        }
        if times[0] != 0.0 || values[0] != 0.0 {
            return Err(Error::Parameter("path must start at (0, 0)".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("times must be strictly increasing".into()));
        }
        if times.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("nonfinite entry in path".into()));
        }
        let horizon = *times.last().unwrap();
        for j in &large_jumps {
            if !(j.time > 0.0 && j.time <= horizon) || !j.size.is_finite() {
                return Err(Error::Parameter("jump record outside path span".into()));
            }
        }
        Ok(Self { times, values, large_jumps })
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Right-continuous lookup: the value at the last record time <= t.
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&tk| tk <= t);
        if idx == 0 { self.values[0] } else { self.values[idx - 1] }
    }

    /// The path reflected through zero. Matches the law of the original.
    pub fn negated(&self) -> LevyPath {
        LevyPath {
            times: self.times.clone(),
            values: self.values.iter().map(|v| -v).collect(),
            large_jumps: self
                .large_jumps
                .iter()
                .map(|j| JumpRecord { time: j.time, size: -j.size })
                .collect(),
        }
    }
}

/// One draw of the standard symmetric stable law with characteristic
/// function exp(-|theta|^alpha), by the Chambers-Mallows-Stuck transform.
pub fn standard_stable(alpha: f64, rng: &mut PathRng) -> f64 {
    let v = std::f64::consts::FRAC_PI_2 * rng.signed_uniform();
    if alpha == 1.0 {
        // Cauchy case of the transform.
        return v.tan();
    }
    let e = rng.exponential(1.0);
    let num = (alpha * v).sin();
    let den = v.cos().powf(1.0 / alpha);
    num / den * (((1.0 - alpha) * v).cos() / e).powf((1.0 - alpha) / alpha)
}

/// Increment of W over a driver-time step dt: (kappa dt)^(1/alpha) times a
/// standard draw.
pub fn sample_stable_increment(params: &StableParams, dt: f64, rng: &mut PathRng) -> f64 {
    assert!(dt > 0.0, "dt must be positive");
    (params.kappa * dt).powf(1.0 / params.alpha) * standard_stable(params.alpha, rng)
}

/// Stable driver path on a uniform grid. Grid increments of magnitude
/// above [`JUMP_CUTOFF`] are recorded as jump proxies at their grid time.
pub fn sample_stable_path(
    params: &StableParams,
    horizon: f64,
    n_steps: usize,
    rng: &mut PathRng,
) -> LevyPath {
    assert!(horizon > 0.0 && n_steps > 0);
    let dt = horizon / n_steps as f64;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut large_jumps = Vec::new();
    times.push(0.0);
    values.push(0.0);
    let mut w = 0.0;
    for k in 1..=n_steps {
        let t = if k == n_steps { horizon } else { k as f64 * dt };
        let inc = sample_stable_increment(params, dt, rng);
        w += inc;
        if inc.abs() > JUMP_CUTOFF {
            large_jumps.push(JumpRecord { time: t, size: inc });
        }
        times.push(t);
        values.push(w);
    }
    LevyPath { times, values, large_jumps }
}

/// Marginal increment of the truncated process over dt, without the time
/// bookkeeping of the path sampler: compound Poisson part plus the
/// Brownian small-jump stand-in.
pub fn sample_truncated_increment(
    params: &StableParams,
    trunc: &TruncationConfig,
    dt: f64,
    rng: &mut PathRng,
) -> Result<f64> {
    let gen = TruncatedGen::new(params, trunc)?;
    assert!(dt > 0.0);
    let effective = params.kappa * dt;
    let count = rng.poisson(gen.cp_rate * effective);
    let mut sum = 0.0;
    for _ in 0..count {
        sum += gen.mid_jump(rng);
    }
    Ok(sum + rng.normal() * (gen.sigma2 * effective).sqrt())
}

/// Truncated driver path on a uniform grid with the retained-jump arrival
/// times inserted exactly (drawn from the exponential clock, not rounded
/// to the grid). `large_jumps` is empty: every jump here is at most 1.
pub fn sample_truncated_path(
    params: &StableParams,
    trunc: &TruncationConfig,
    horizon: f64,
    n_steps: usize,
    rng: &mut PathRng,
) -> Result<LevyPath> {
    let gen = TruncatedGen::new(params, trunc)?;
    assert!(horizon > 0.0 && n_steps > 0);

    // Arrival times of jumps in (cutoff, 1], in driver time.
    let rate = gen.cp_rate * params.kappa;
    let mut jump_times = Vec::new();
    let mut t = rng.exponential(rate);
    while t < horizon {
        jump_times.push(t);
        t += rng.exponential(rate);
    }

    let dt = horizon / n_steps as f64;
    let mut times = Vec::with_capacity(n_steps + 1 + jump_times.len());
    times.push(0.0);
    let mut next_jump = 0usize;
    for k in 1..=n_steps {
        let tk = if k == n_steps { horizon } else { k as f64 * dt };
        while next_jump < jump_times.len() && jump_times[next_jump] < tk {
            times.push(jump_times[next_jump]);
            next_jump += 1;
        }
        // A jump landing exactly on a grid time keeps a single record.
        if times.last() != Some(&tk) {
            times.push(tk);
        }
    }

    let mut values = Vec::with_capacity(times.len());
    values.push(0.0);
    let mut w = 0.0;
    let mut jump_iter = jump_times.iter().peekable();
    for pair in times.windows(2) {
        let span = params.kappa * (pair[1] - pair[0]);
        w += rng.normal() * (gen.sigma2 * span).sqrt();
        if jump_iter.peek() == Some(&&pair[1]) {
            jump_iter.next();
            w += gen.mid_jump(rng);
        }
        values.push(w);
    }
    LevyPath::new(times, values, Vec::new())
}

/// Concatenates truncated segments with the retained large jumps placed at
/// their exact times. Segment k must span exactly the gap between jump k-1
/// and jump k (the final segment runs to the horizon).
pub fn recombine_large_jumps(
    segments: &[LevyPath],
    jump_times: &[f64],
    jump_sizes: &[f64],
) -> Result<LevyPath> {
    if segments.len() != jump_times.len() + 1 || jump_times.len() != jump_sizes.len() {
        return Err(Error::Parameter(format!(
            "mismatched lengths: {} segments, {} jump times, {} jump sizes",
            segments.len(),
            jump_times.len(),
            jump_sizes.len()
        )));
    }
    if jump_times.windows(2).any(|w| !(w[1] > w[0])) || jump_times.iter().any(|&t| t <= 0.0) {
        return Err(Error::Parameter("jump times must be strictly increasing and positive".into()));
    }
    let horizon: f64 = segments.iter().map(|s| s.horizon()).sum();
    let tol = 1e-9 * (1.0 + horizon);
    let mut boundary = 0.0;
    for (k, jt) in jump_times.iter().enumerate() {
        boundary += segments[k].horizon();
        if (boundary - jt).abs() > tol {
            return Err(Error::Parameter(format!(
                "segment spans do not meet jump time {jt} (boundary at {boundary})"
            )));
        }
        // Snap concatenation to the sampled arrival time.
        boundary = *jt;
    }

    let mut times = vec![0.0];
    let mut values = vec![0.0];
    let mut large_jumps = Vec::with_capacity(jump_sizes.len());
    let mut offset_t = 0.0;
    let mut offset_w = 0.0;
    for (k, seg) in segments.iter().enumerate() {
        for i in 1..seg.times.len() {
            times.push(offset_t + seg.times[i]);
            values.push(offset_w + seg.values[i]);
        }
        if k < jump_times.len() {
            offset_t = jump_times[k];
            offset_w += seg.values[seg.times.len() - 1] + jump_sizes[k];
            *times.last_mut().unwrap() = offset_t;
            *values.last_mut().unwrap() = offset_w;
            large_jumps.push(JumpRecord { time: offset_t, size: jump_sizes[k] });
        }
    }
    LevyPath::new(times, values, large_jumps)
}

/// Full reconstruction of the stable driver: truncated segments between
/// Poisson arrivals of the above-cutoff jumps, recombined into one path.
pub fn sample_recombined_path(
    params: &StableParams,
    trunc: &TruncationConfig,
    horizon: f64,
    n_steps: usize,
    rng: &mut PathRng,
) -> Result<LevyPath> {
    TruncatedGen::new(params, trunc)?;
    assert!(horizon > 0.0 && n_steps > 0);
    let rate = params.large_jump_rate() * params.kappa;
    let mut jump_times = Vec::new();
    let mut t = rng.exponential(rate);
    while t < horizon {
        jump_times.push(t);
        t += rng.exponential(rate);
    }

    let mut segments = Vec::with_capacity(jump_times.len() + 1);
    let mut jump_sizes = Vec::with_capacity(jump_times.len());
    let mut start = 0.0;
    for k in 0..=jump_times.len() {
        let end = if k < jump_times.len() { jump_times[k] } else { horizon };
        let span = end - start;
        let steps = ((n_steps as f64 * span / horizon).ceil() as usize).max(1);
        segments.push(sample_truncated_path(params, trunc, span, steps, rng)?);
        if k < jump_times.len() {
            // Density proportional to |h|^(-1-alpha) above the cutoff:
            // magnitude is a Pareto draw, sign rides the mirrored uniform.
            let s = rng.signed_uniform();
            let mag = JUMP_CUTOFF * (1.0 - s.abs()).powf(-1.0 / params.alpha);
            jump_sizes.push(mag.copysign(s));
            start = end;
        }
    }
    recombine_large_jumps(&segments, &jump_times, &jump_sizes)
}

/// Shared constants of the truncated sampler.
struct TruncatedGen {
    alpha: f64,
    cutoff: f64,
    cutoff_pow: f64,
    /// Arrival rate of jumps in (cutoff, 1], per unit process time.
    cp_rate: f64,
    /// Variance per unit process time of the Brownian stand-in.
    sigma2: f64,
}

impl TruncatedGen {
    fn new(params: &StableParams, trunc: &TruncationConfig) -> Result<Self> {
        if params.alpha >= 2.0 {
            return Err(Error::Parameter("truncated sampler requires alpha < 2".into()));
        }
        let c = params.levy_constant();
        let alpha = params.alpha;
        let eps = trunc.small_jump_cutoff;
        let cutoff_pow = eps.powf(-alpha);
        Ok(Self {
            alpha,
            cutoff: eps,
            cutoff_pow,
            cp_rate: 2.0 * c * (cutoff_pow - JUMP_CUTOFF.powf(-alpha)) / alpha,
            sigma2: params.small_jump_variance(eps),
        })
    }

    /// One jump with density proportional to |h|^(-1-alpha) on
    /// cutoff < |h| <= 1, sign taken from the mirrored uniform.
    fn mid_jump(&self, rng: &mut PathRng) -> f64 {
        let s = rng.signed_uniform();
        let u = s.abs();
        let mag = (self.cutoff_pow - u * (self.cutoff_pow - 1.0)).powf(-1.0 / self.alpha);
        debug_assert!(mag >= self.cutoff * 0.999 && mag <= JUMP_CUTOFF * 1.001);
        mag.copysign(s)
    }
}

/// Constant of the Levy density, calibrated so that
/// integral (1 - cos h) c |h|^(-1-alpha) dh = 1.
///
/// The defining integral is evaluated numerically: power series near zero,
/// adaptive Simpson over the oscillatory middle range, and the two-term
/// integration-by-parts expansion for the tail.
pub fn levy_constant(alpha: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 2.0, "alpha = {alpha} outside (0, 2)");
    1.0 / (2.0 * one_minus_cos_moment(alpha))
}

/// integral_0^infinity (1 - cos u) u^(-1-alpha) du.
fn one_minus_cos_moment(alpha: f64) -> f64 {
    const DELTA: f64 = 0.5;
    const FAR: f64 = 200.0;

    // (1 - cos u) expanded at zero; terms fall off like DELTA^2 / (2k)^2.
    let mut series = 0.0;
    let mut factorial = 1.0;
    let mut sign = 1.0;
    for k in 1..=10 {
        factorial *= (2 * k - 1) as f64 * (2 * k) as f64;
        let p = 2.0 * k as f64 - alpha;
        series += sign * DELTA.powf(p) / (factorial * p);
        sign = -sign;
    }

    let middle = adaptive_simpson(
        |u| (1.0 - u.cos()) * u.powf(-1.0 - alpha),
        DELTA,
        FAR,
        1e-11,
    );

    let tail = FAR.powf(-alpha) / alpha - cosine_tail(FAR, 1.0 + alpha);
    series + middle.value + tail
}

/// integral_A^infinity cos(u) u^(-s) du by repeated integration by parts;
/// the dropped remainder is below A^(-s-6) in magnitude.
fn cosine_tail(a: f64, s0: f64) -> f64 {
    let (sin_a, cos_a) = a.sin_cos();
    let mut total = 0.0;
    let mut coeff = 1.0;
    let mut s = s0;
    for _ in 0..3 {
        total += coeff * (-sin_a * a.powf(-s) + s * cos_a * a.powf(-s - 1.0));
        coeff *= -s * (s + 1.0);
        s += 2.0;
    }
    total
}

/// Generator integral of the truncated process applied to `f` at `x`:
///
///   integral_{|h| <= 1} (f(x+h) - f(x) - f'(x) h) c |h|^(-1-alpha) dh.
///
/// Combining the +h and -h contributions cancels the first-order term, so
/// only the symmetric second difference is integrated. The substitution
/// u = h^(2-alpha) removes the endpoint singularity; below `h = 1e-4` the
/// curvature is frozen at its probe value, which keeps floating-point
/// cancellation out of the integrand at a bias well under 1e-8 for smooth
/// integrands.
pub fn truncated_frac_laplacian<F: Fn(f64) -> f64>(
    f: F,
    x: f64,
    alpha: f64,
    quad_tol: f64,
) -> Result<Quadrature> {
    assert!(quad_tol > 0.0);
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} outside (0, 2)")));
    }
    let c = levy_constant(alpha);
    let scale = c / (2.0 - alpha);
    const H_FLOOR: f64 = 1e-4;
    let second_diff = |h: f64| f(x + h) + f(x - h) - 2.0 * f(x);
    let curvature_floor = second_diff(H_FLOOR) / (H_FLOOR * H_FLOOR);
    let exponent = 1.0 / (2.0 - alpha);
    let integrand = |u: f64| {
        let h = u.powf(exponent);
        if h <= H_FLOOR {
            curvature_floor
        } else {
            second_diff(h) / (h * h)
        }
    };
    let q = adaptive_simpson(integrand, 0.0, 1.0, quad_tol / scale * 0.5);
    let floor_drift = (second_diff(4.0 * H_FLOOR) / (16.0 * H_FLOOR * H_FLOOR)
        - curvature_floor)
        .abs();
    let floor_span = H_FLOOR.powf(2.0 - alpha);
    let achieved = scale * (q.error_estimate + floor_drift * floor_span);
    if achieved > quad_tol {
        return Err(Error::Quadrature { requested: quad_tol, achieved });
    }
    Ok(Quadrature { value: scale * q.value, error_estimate: achieved })
}

/// Levy-Khintchine exponent of the truncated process:
/// log E exp(i theta S'_1) = integral_{|h| <= 1} (cos(theta h) - 1) c |h|^(-1-alpha) dh.
pub fn truncated_lk_exponent(theta: f64, alpha: f64, quad_tol: f64) -> Result<f64> {
    Ok(truncated_frac_laplacian(|y| (theta * y).cos(), 0.0, alpha, quad_tol)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALPHA_GRID: [f64; 8] = [0.3, 0.5, 0.8, 1.0, 1.2, 1.5, 1.7, 1.9];

    /// Gamma-function closed form for the calibration constant, used only
    /// as an independent oracle here.
    fn levy_constant_reference(alpha: f64) -> f64 {
        if alpha == 1.0 {
            return std::f64::consts::FRAC_1_PI;
        }
        let gamma = statrs::function::gamma::gamma(2.0 - alpha);
        alpha * (1.0 - alpha) / (2.0 * gamma * (std::f64::consts::PI * alpha / 2.0).cos())
    }

    #[test]
    fn levy_constant_matches_cauchy_value() {
        assert!((levy_constant(1.0) - std::f64::consts::FRAC_1_PI).abs() < 1e-10);
    }

    #[test]
    fn levy_constant_matches_gamma_closed_form() {
        for alpha in ALPHA_GRID {
            let num = levy_constant(alpha);
            let refv = levy_constant_reference(alpha);
            assert!(
                ((num - refv) / refv).abs() < 1e-8,
                "alpha {alpha}: numeric {num} reference {refv}"
            );
        }
    }

    #[test]
    fn moment_integral_matches_cauchy_and_half() {
        // Frozen values: pi/2 at alpha = 1 and sqrt(2 pi) at alpha = 1/2.
        assert!((one_minus_cos_moment(1.0) - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
        assert!((one_minus_cos_moment(0.5) - 2.506_628_274_631_000_2).abs() < 1e-9);
    }

    #[test]
    fn cauchy_quartile_at_unit_time() {
        // At alpha = 1, t = 1 the increment is standard Cauchy: P(X <= 1) = 3/4.
        let params = StableParams::standard(1.0).unwrap();
        let mut rng = PathRng::new(31, 0);
        let n = 100_000;
        let below = (0..n)
            .filter(|_| sample_stable_increment(&params, 1.0, &mut rng) <= 1.0)
            .count();
        let p = below as f64 / n as f64;
        assert!((p - 0.75).abs() < 0.01, "p = {p}");
    }

    #[test]
    fn gaussian_endpoint_variance_is_two() {
        let params = StableParams::standard(2.0).unwrap();
        let mut rng = PathRng::new(32, 0);
        let n = 200_000;
        let mut s2 = 0.0;
        for _ in 0..n {
            let x = sample_stable_increment(&params, 1.0, &mut rng);
            s2 += x * x;
        }
        let var = s2 / n as f64;
        assert!((var - 2.0).abs() < 0.04, "var = {var}");
    }

    #[test]
    fn increments_are_odd_under_mirroring() {
        for alpha in ALPHA_GRID {
            let params = StableParams::standard(alpha).unwrap();
            let mut plain = PathRng::new(77, 5);
            let mut flipped = PathRng::mirrored(77, 5);
            for _ in 0..200 {
                let a = sample_stable_increment(&params, 0.37, &mut plain);
                let b = sample_stable_increment(&params, 0.37, &mut flipped);
                assert_eq!(a, -b, "alpha {alpha}");
            }
        }
    }

    #[test]
    fn stable_path_negates_under_mirroring() {
        let params = StableParams::new(1.3, 0.7).unwrap();
        let a = sample_stable_path(&params, 2.0, 256, &mut PathRng::new(8, 2));
        let b = sample_stable_path(&params, 2.0, 256, &mut PathRng::mirrored(8, 2));
        assert_eq!(a.negated(), b);
    }

    #[test]
    fn increment_scaling_matches_self_similarity() {
        // S_4 against 4^(1/alpha) S_1, two-sample KS at the 1% level.
        let alpha = 1.2;
        let params = StableParams::standard(alpha).unwrap();
        let mut rng = PathRng::new(41, 0);
        let n = 5000;
        let a: Vec<f64> = (0..n).map(|_| sample_stable_increment(&params, 4.0, &mut rng)).collect();
        let s = 4.0f64.powf(1.0 / alpha);
        let b: Vec<f64> =
            (0..n).map(|_| s * sample_stable_increment(&params, 1.0, &mut rng)).collect();
        let d = crate::stats::ks_two_sample(&a, &b);
        let crit = crate::stats::ks_two_sample_critical(n, n, 0.01);
        assert!(d < crit, "d = {d}, crit = {crit}");
    }

    #[test]
    fn truncated_path_has_no_oversized_increment() {
        let params = StableParams::standard(0.8).unwrap();
        let trunc = TruncationConfig::default();
        let path = sample_truncated_path(&params, &trunc, 4.0, 400, &mut PathRng::new(9, 1)).unwrap();
        assert!(path.large_jumps.is_empty());
        let max_inc = path
            .values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0f64, f64::max);
        // A grid increment can stack one jump on the Brownian part.
        assert!(max_inc <= JUMP_CUTOFF + 0.05, "max increment {max_inc}");
    }

    #[test]
    fn truncated_path_negates_under_mirroring() {
        let params = StableParams::new(1.5, 2.0).unwrap();
        let trunc = TruncationConfig::new(1e-2).unwrap();
        let a = sample_truncated_path(&params, &trunc, 1.5, 128, &mut PathRng::new(13, 4)).unwrap();
        let b =
            sample_truncated_path(&params, &trunc, 1.5, 128, &mut PathRng::mirrored(13, 4)).unwrap();
        assert_eq!(a.negated(), b);
    }

    #[test]
    fn truncated_jump_count_tracks_the_clock_rate() {
        let params = StableParams::standard(1.0).unwrap();
        let trunc = TruncationConfig::new(0.05).unwrap();
        // Rate of jumps in (0.05, 1]: 2 c (20 - 1) per unit time.
        let expect = 2.0 * params.levy_constant() * 19.0;
        let mut total = 0usize;
        let n_paths = 400;
        for k in 0..n_paths {
            let p = sample_truncated_path(&params, &trunc, 1.0, 16, &mut PathRng::new(55, k)).unwrap();
            total += p.times.len() - 17;
        }
        let mean = total as f64 / n_paths as f64;
        assert!(
            (mean - expect).abs() < 0.15 * expect,
            "mean inserted times {mean}, expected {expect}"
        );
    }

    #[test]
    fn endpoint_of_truncated_path_matches_marginal_increment() {
        let params = StableParams::standard(1.4).unwrap();
        let trunc = TruncationConfig::default();
        let n = 2000usize;
        let via_path: Vec<f64> = (0..n)
            .map(|k| {
                sample_truncated_path(&params, &trunc, 1.0, 8, &mut PathRng::new(70, k as u64))
                    .unwrap()
                    .values
                    .last()
                    .copied()
                    .unwrap()
            })
            .collect();
        let mut rng = PathRng::new(71, 0);
        let direct: Vec<f64> = (0..n)
            .map(|_| sample_truncated_increment(&params, &trunc, 1.0, &mut rng).unwrap())
            .collect();
        let d = crate::stats::ks_two_sample(&via_path, &direct);
        let crit = crate::stats::ks_two_sample_critical(n, n, 0.01);
        assert!(d < crit, "d = {d}, crit = {crit}");
    }

    #[test]
    fn recombination_validates_structure() {
        let params = StableParams::standard(1.0).unwrap();
        let trunc = TruncationConfig::default();
        let seg = |span: f64, k: u64| {
            sample_truncated_path(&params, &trunc, span, 8, &mut PathRng::new(90, k)).unwrap()
        };
        let err = recombine_large_jumps(&[seg(1.0, 0)], &[0.5, 0.4], &[2.0, -3.0]);
        assert!(matches!(err, Err(Error::Parameter(_))));
        let err = recombine_large_jumps(&[seg(1.0, 0), seg(1.0, 1)], &[0.7], &[2.0]);
        assert!(matches!(err, Err(Error::Parameter(_))), "span mismatch must be rejected");
    }

    #[test]
    fn recombined_path_carries_exact_jumps() {
        let params = StableParams::new(1.0, 1.0).unwrap();
        let trunc = TruncationConfig::default();
        let path =
            sample_recombined_path(&params, &trunc, 6.0, 300, &mut PathRng::new(91, 7)).unwrap();
        for j in &path.large_jumps {
            assert!(j.size.abs() > JUMP_CUTOFF);
            let idx = path.times.iter().position(|&t| t == j.time).expect("jump time on grid");
            let observed = path.values[idx] - path.values[idx - 1];
            // The grid increment at the jump time also carries the final
            // Brownian increment of the preceding segment.
            assert!(
                (observed - j.size).abs() < 0.2,
                "level change {observed} vs jump {}",
                j.size
            );
        }
        let a = sample_recombined_path(&params, &trunc, 6.0, 300, &mut PathRng::mirrored(91, 7))
            .unwrap();
        assert_eq!(path.negated(), a);
    }

    #[test]
    fn frac_laplacian_of_quadratic_is_exact() {
        for alpha in ALPHA_GRID {
            let expect = 2.0 * levy_constant(alpha) / (2.0 - alpha);
            let got = truncated_frac_laplacian(|y| y * y, 3.0, alpha, 1e-6).unwrap();
            // Accuracy is limited by second-difference cancellation noise,
            // about eps_machine |f| / h^2 at the probe scale.
            assert!(
                ((got.value - expect) / expect).abs() < 1e-6,
                "alpha {alpha}: got {} want {expect}",
                got.value
            );
        }
    }

    #[test]
    fn frac_laplacian_kills_affine_functions() {
        let got = truncated_frac_laplacian(|y| 5.0 - 3.0 * y, 0.7, 1.1, 1e-6).unwrap();
        assert!(got.value.abs() < 1e-9, "got {}", got.value);
    }

    #[test]
    fn lk_exponent_small_theta_matches_second_moment() {
        // cos(theta h) - 1 ~ -(theta h)^2 / 2, so psi(theta) ~
        // -theta^2 c / (2 - alpha) for small theta.
        for alpha in [0.6, 1.0, 1.6] {
            let theta = 0.05f64;
            let psi = truncated_lk_exponent(theta, alpha, 1e-8).unwrap();
            let expect = -theta * theta * levy_constant(alpha) / (2.0 - alpha);
            assert!(
                (psi - expect).abs() < 1e-7,
                "alpha {alpha}: psi {psi} vs quadratic {expect}"
            );
        }
    }

    #[test]
    fn small_jump_variance_closed_form_at_cauchy() {
        let params = StableParams::standard(1.0).unwrap();
        let sigma2 = params.small_jump_variance(1e-3);
        assert!((sigma2 - 2.0 * params.levy_constant() * 1e-3).abs() < 1e-15);
    }
}
