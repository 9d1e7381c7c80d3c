//! Hull geometry and the statistical experiments run on it.
//!
//! Everything here consumes traces produced by the Loewner modules:
//! box-counting dimension fits, Hausdorff distances against the ideal
//! slit, confinement certificates, derivative-moment estimates under the
//! truncated driver, Hoelder modulus probes of the backward map, and the
//! RCLL structure of the trace around retained driver jumps.

use crate::error::{Error, Result};
use crate::loewner::{compute_trace, Driver, MapChain, DEFAULT_TRACE_LIFT};
use crate::report::ExperimentReport;
use crate::rng::PathRng;
use crate::stable::{sample_stable_path, sample_truncated_path, StableParams, TruncationConfig};
use crate::stats::{least_squares, mean_and_se, median, Z_95};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};

/// Sampled boundary trace of a hull. `jump_flags[k]` marks sample
/// intervals (times[k-1], times[k]] that contain a retained driver jump;
/// `capacity` is the half-plane capacity 2T of the full hull.
#[derive(Debug, Clone)]
pub struct HullApprox {
    pub times: Vec<f64>,
    pub points: Vec<Complex64>,
    pub jump_flags: Vec<bool>,
    pub capacity: f64,
}

impl HullApprox {
    pub fn max_height(&self) -> f64 {
        self.points.iter().map(|p| p.im).fold(0.0, f64::max)
    }
}

/// Occupied-cell count of the axis-aligned grid of mesh `eps`, anchored
/// at the origin so that halving the mesh refines cells exactly 4-to-1.
pub fn box_count(points: &[Complex64], eps: f64) -> usize {
    assert!(eps > 0.0 && !points.is_empty());
    let mut cells: HashSet<(i64, i64)> = HashSet::with_capacity(points.len());
    for p in points {
        cells.insert(((p.re / eps).floor() as i64, (p.im / eps).floor() as i64));
    }
    cells.len()
}

/// Log-log fit of covering counts against scale.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionFit {
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    /// Fitted d log N / d log(1/eps), regardless of fit quality.
    pub raw_slope: f64,
    pub r2: f64,
    /// Set when consecutive trace points are farther apart than the
    /// smallest scale, where counts start undercounting.
    pub resolution_warning: bool,
}

impl DimensionFit {
    /// The slope, reported only when the fit explains the data.
    pub fn slope(&self) -> Option<f64> {
        (self.r2 >= 0.98).then_some(self.raw_slope)
    }
}

/// Box-counting dimension of a trace over the given scales, which must
/// span at least 1.5 decades.
pub fn dimension_estimate(hull: &HullApprox, scales: &[f64]) -> Result<DimensionFit> {
    if scales.len() < 3 || scales.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Parameter("need at least three positive scales".into()));
    }
    let (lo, hi) = scales
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if hi / lo < 10f64.powf(1.5) {
        return Err(Error::Parameter(format!(
            "scale range {lo}..{hi} spans less than 1.5 decades"
        )));
    }
    let mut sorted: Vec<f64> = scales.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let counts: Vec<usize> = sorted.iter().map(|&e| box_count(&hull.points, e)).collect();
    if counts.iter().all(|&n| n == counts[0]) {
        return Err(Error::DegenerateFit("covering counts do not vary across scales".into()));
    }
    let xs: Vec<f64> = sorted.iter().map(|e| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&n| (n as f64).ln()).collect();
    let fit = least_squares(&xs, &ys)?;

    let mut max_gap = 0.0f64;
    for k in 1..hull.points.len() {
        if !hull.jump_flags[k] {
            max_gap = max_gap.max((hull.points[k] - hull.points[k - 1]).norm());
        }
    }
    Ok(DimensionFit {
        scales: sorted,
        counts,
        raw_slope: fit.slope,
        r2: fit.r2,
        resolution_warning: max_gap > lo,
    })
}

/// Euclidean distance from p to the vertical segment [0, i height].
pub fn distance_to_vertical_segment(p: Complex64, height: f64) -> f64 {
    let dy = if p.im < 0.0 {
        -p.im
    } else if p.im > height {
        p.im - height
    } else {
        0.0
    };
    p.re.hypot(dy)
}

/// max over `from` of the distance to the nearest point of `to`,
/// computed with a cell-bucketed expanding-ring search.
fn directed_hausdorff(from: &[Complex64], to: &[Complex64]) -> f64 {
    let (mut min_re, mut max_re, mut min_im, mut max_im) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in to {
        min_re = min_re.min(p.re);
        max_re = max_re.max(p.re);
        min_im = min_im.min(p.im);
        max_im = max_im.max(p.im);
    }
    let brute = |q: &Complex64| {
        to.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min)
    };
    if to.len() <= 64 {
        return from.iter().map(brute).fold(0.0, f64::max);
    }
    let diam = (max_re - min_re).hypot(max_im - min_im);
    let h = (diam / (to.len() as f64).sqrt()).max(diam * 1e-9).max(1e-12);
    let key = |p: &Complex64| {
        (((p.re - min_re) / h).floor() as i64, ((p.im - min_im) / h).floor() as i64)
    };
    let mut buckets: HashMap<(i64, i64), Vec<Complex64>> = HashMap::new();
    for p in to {
        buckets.entry(key(p)).or_default().push(*p);
    }
    let (bx0, by0) = (0i64, 0i64);
    let bx1 = ((max_re - min_re) / h).floor() as i64;
    let by1 = ((max_im - min_im) / h).floor() as i64;

    let mut worst = 0.0f64;
    for q in from {
        // The expanding-ring lower bound is anchored at the query cell, so
        // a query far outside the grid would walk empty rings; scan those
        // directly instead.
        if q.re < min_re - 2.0 * h
            || q.re > max_re + 2.0 * h
            || q.im < min_im - 2.0 * h
            || q.im > max_im + 2.0 * h
        {
            worst = worst.max(brute(q));
            continue;
        }
        let (ci, cj) = key(q);
        // Every occupied cell is inside the bounding box, so rings past
        // the farthest box corner cannot hold anything.
        let ring_cap = [bx0 - ci, bx1 - ci, by0 - cj, by1 - cj]
            .iter()
            .map(|d| d.abs())
            .max()
            .unwrap()
            + 1;
        let mut best = f64::INFINITY;
        for ring in 0..=ring_cap {
            if ring >= 1 && best <= (ring - 1) as f64 * h {
                break;
            }
            let mut visit = |i: i64, j: i64| {
                if let Some(pts) = buckets.get(&(i, j)) {
                    for p in pts {
                        best = best.min((p - q).norm());
                    }
                }
            };
            if ring == 0 {
                visit(ci, cj);
            } else {
                for di in -ring..=ring {
                    visit(ci + di, cj - ring);
                    visit(ci + di, cj + ring);
                }
                for dj in -(ring - 1)..=(ring - 1) {
                    visit(ci - ring, cj + dj);
                    visit(ci + ring, cj + dj);
                }
            }
        }
        worst = worst.max(best);
    }
    worst
}

/// Hausdorff distance between two nonempty point sets.
pub fn hausdorff_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Distance from a trace to the ideal slit [0, i height]: exact
/// point-to-segment distance one way, a fine segment discretization the
/// other way (spacing height/1000 keeps that error below 2e-3).
pub fn distance_to_slit(points: &[Complex64], height: f64) -> f64 {
    let d1 = points
        .iter()
        .map(|p| distance_to_vertical_segment(*p, height))
        .fold(0.0, f64::max);
    let seg: Vec<Complex64> = (0..=1000)
        .map(|k| Complex64::new(0.0, height * k as f64 / 1000.0))
        .collect();
    d1.max(directed_hausdorff(&seg, points))
}

/// Hull shrinkage under the scaling limit: for each s the hull of the
/// driver run to capacity time s^2 is rescaled by 1/s, which by stable
/// self-similarity is the unit-horizon hull of the driver multiplied by
/// s^((2-alpha)/alpha). Each report carries the distance distribution to
/// the ideal slit [0, 2i] and how often the hull reaches height `eps_h`.
#[allow(clippy::too_many_arguments)]
pub fn rescaled_hull_experiment(
    alpha: f64,
    s_values: &[f64],
    eps_h: f64,
    n_paths: usize,
    n_steps: usize,
    n_samples: usize,
    master_seed: u64,
) -> Result<Vec<ExperimentReport>> {
    if s_values.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Parameter("scale factors must be positive".into()));
    }
    assert!(n_paths > 0 && n_steps > 0 && n_samples > 1);
    let params = StableParams::standard(alpha)?;
    let sample_times: Vec<f64> = (1..=n_samples)
        .map(|j| (j as f64 / n_samples as f64).powi(2))
        .collect();

    let mut reports = Vec::with_capacity(s_values.len());
    for (li, &s) in s_values.iter().enumerate() {
        let factor = s.powf((2.0 - alpha) / alpha);
        let rows: Vec<(f64, f64)> = (0..n_paths)
            .into_par_iter()
            .map(|k| {
                let stream = (li * n_paths + k) as u64;
                let mut rng = PathRng::new(master_seed, stream);
                let path = sample_stable_path(&params, 1.0, n_steps, &mut rng);
                let scaled: Vec<f64> = path.values.iter().map(|v| v * factor).collect();
                let driver = Driver::new(path.times.clone(), scaled, vec![]).expect("valid driver");
                let hull = compute_trace(&driver, &sample_times, DEFAULT_TRACE_LIFT);
                (distance_to_slit(&hull.points, 2.0), hull.max_height())
            })
            .collect();

        let dists: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let reached = rows.iter().filter(|r| r.1 >= eps_h).count();
        let (mean, se) = mean_and_se(&dists);
        let mut details = BTreeMap::new();
        details.insert("s".into(), s);
        details.insert("driver_factor".into(), factor);
        details.insert("median_distance".into(), median(&dists));
        details.insert("reach_frequency".into(), reached as f64 / n_paths as f64);
        details.insert("eps_h".into(), eps_h);
        reports.push(ExperimentReport {
            experiment: "rescaled_hull".into(),
            n_paths,
            master_seed,
            estimate: mean,
            std_error: se,
            ci_low: mean - Z_95 * se,
            ci_high: mean + Z_95 * se,
            censored_fraction: 0.0,
            details,
        });
    }
    Ok(reports)
}

/// Certificate for the hull-confinement lemma. Part (a): the trace stays
/// within the closed range of the driver. Part (b): if the driver spends
/// occupation time tau in the tenfold enlargement of a real interval I,
/// the trace avoids I x [4 sqrt(tau), infinity).
#[derive(Debug, Clone, Serialize)]
pub struct ConfinementCheck {
    pub re_bounds: (f64, f64),
    pub re_ok: bool,
    /// Violating sample as (time, re, im), if any.
    pub re_offender: Option<[f64; 3]>,
    pub interval: Option<(f64, f64)>,
    pub occupation_time: f64,
    pub height_ceiling: f64,
    pub strip_ok: bool,
    pub strip_offender: Option<[f64; 3]>,
}

impl ConfinementCheck {
    pub fn ok(&self) -> bool {
        self.re_ok && self.strip_ok
    }
}

/// Occupation time of the driver in [lo, hi].
fn occupation_time(driver: &Driver, lo: f64, hi: f64) -> f64 {
    let times = driver.times();
    let levels = driver.levels();
    let mut occ = 0.0;
    for k in 0..times.len() - 1 {
        if levels[k] >= lo && levels[k] <= hi {
            occ += times[k + 1] - times[k];
        }
    }
    occ
}

pub fn check_lemma_l1(
    driver: &Driver,
    hull: &HullApprox,
    interval: Option<(f64, f64)>,
    tol: f64,
) -> ConfinementCheck {
    assert!(tol > 0.0);
    let (a, b) = (driver.min_level(), driver.max_level());
    let mut re_ok = true;
    let mut re_offender = None;
    for (t, p) in hull.times.iter().zip(&hull.points) {
        if p.re < a - tol || p.re > b + tol {
            re_ok = false;
            re_offender = Some([*t, p.re, p.im]);
            break;
        }
    }

    let (mut occ, mut ceiling, mut strip_ok, mut strip_offender) = (0.0, 0.0, true, None);
    if let Some((c, d)) = interval {
        assert!(d > c, "interval must be nondegenerate");
        let mid = 0.5 * (c + d);
        let half10 = 5.0 * (d - c);
        occ = occupation_time(driver, mid - half10, mid + half10);
        ceiling = 4.0 * occ.sqrt();
        for (t, p) in hull.times.iter().zip(&hull.points) {
            if p.re >= c && p.re <= d && p.im >= ceiling + tol {
                strip_ok = false;
                strip_offender = Some([*t, p.re, p.im]);
                break;
            }
        }
    }
    ConfinementCheck {
        re_bounds: (a, b),
        re_ok,
        re_offender,
        interval,
        occupation_time: occ,
        height_ceiling: ceiling,
        strip_ok,
        strip_offender,
    }
}

/// Monte Carlo estimate of E[|f'(gamma_u)|^beta; gamma_u finite] for the
/// backward flow under the truncated driver, with the exponential decay
/// bound e^(-(beta-delta) u) |z|^beta / (Im z)^beta reported alongside,
/// plus the tail frequency P(max log|f'| >= (rho - 1) log Im z).
#[allow(clippy::too_many_arguments)]
pub fn derivative_moment_experiment(
    params: &StableParams,
    trunc: &TruncationConfig,
    beta: f64,
    delta: f64,
    z: Complex64,
    u: f64,
    rho: f64,
    n_paths: usize,
    t_max: f64,
    n_steps: usize,
    master_seed: u64,
) -> Result<ExperimentReport> {
    let y = z.im;
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::Parameter(format!("need 0 < Im z < 1, got {y}")));
    }
    if !(u > 0.0 && u <= -y.ln() * (1.0 + 1e-12)) {
        return Err(Error::Parameter(format!("need 0 < u <= -ln(Im z), got u = {u}")));
    }
    if !(beta > 0.0 && beta < 2.0) {
        return Err(Error::Parameter(format!("need 0 < beta < 2, got {beta}")));
    }
    if !(delta > 0.0 && delta < beta) || !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Parameter("need 0 < delta < beta and rho in (0, 1)".into()));
    }
    assert!(n_paths > 0 && n_steps > 0 && t_max > 0.0);

    let tail_level = (rho - 1.0) * y.ln();
    let rows: Vec<Result<(f64, bool, bool)>> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = PathRng::new(master_seed, k as u64);
            let path = sample_truncated_path(params, trunc, t_max, n_steps, &mut rng)?;
            let run = crate::flow::run_backward_flow(&Driver::from_levy_path(&path), z, t_max, &[u])?;
            let rec = run.records[0];
            let weight = if rec.censored { 0.0 } else { (beta * rec.log_deriv_at_gamma).exp() };
            Ok((weight, rec.censored, run.max_log_deriv >= tail_level))
        })
        .collect();

    let mut weights = Vec::with_capacity(n_paths);
    let mut censored = 0usize;
    let mut tail_hits = 0usize;
    for row in rows {
        let (w, c, tail) = row?;
        weights.push(w);
        censored += c as usize;
        tail_hits += tail as usize;
    }
    let (mean, se) = mean_and_se(&weights);
    let bound = (-(beta - delta) * u).exp() * z.norm().powf(beta) / y.powf(beta);
    let censored_fraction = censored as f64 / n_paths as f64;

    let mut details = BTreeMap::new();
    details.insert("moment_bound".into(), bound);
    details.insert("beta".into(), beta);
    details.insert("delta".into(), delta);
    details.insert("u".into(), u);
    details.insert("rho".into(), rho);
    details.insert("tail_frequency".into(), tail_hits as f64 / n_paths as f64);
    details.insert("tail_level_log".into(), tail_level);
    if censored_fraction > 0.1 {
        details.insert("censoring_warning".into(), 1.0);
    }
    Ok(ExperimentReport {
        experiment: "derivative_moment".into(),
        n_paths,
        master_seed,
        estimate: mean,
        std_error: se,
        ci_low: mean - Z_95 * se,
        ci_high: mean + Z_95 * se,
        censored_fraction,
        details,
    })
}

/// Rectangle in the closed upper half plane.
#[derive(Debug, Clone, Copy)]
pub struct Region {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

/// Hoelder probe of the map at one mesh level.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusRow {
    pub gamma: f64,
    /// Fitted constants at mesh, mesh/2, mesh/4.
    pub constants: [f64; 3],
    /// Largest log2 growth of the constant across one refinement.
    pub max_growth: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusReport {
    pub mesh: f64,
    /// Largest exponent whose constant stays stable under refinement.
    pub stable_gamma: f64,
    pub stability_limit: f64,
    pub rows: Vec<ModulusRow>,
}

const MODULUS_STABILITY_LIMIT: f64 = 0.08;

/// Per-bin maxima of log|df| over pair distances, binned by log distance.
fn modulus_envelope(points: &[(Complex64, Complex64)], mesh: f64) -> Vec<Option<(f64, f64)>> {
    const BINS: usize = 96;
    let mut bins: Vec<Option<(f64, f64)>> = vec![None; BINS];
    let cell = 10.0 * mesh;
    let key = |p: Complex64| ((p.re / cell).floor() as i64, (p.im / cell).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (idx, (z, _)) in points.iter().enumerate() {
        buckets.entry(key(*z)).or_default().push(idx);
    }
    let ln10 = 10.0f64.ln();
    for (&(ci, cj), cell_pts) in &buckets {
        for &p in cell_pts {
            for di in 0..=1i64 {
                for dj in -1..=1i64 {
                    if di == 0 && dj < 0 {
                        continue;
                    }
                    let Some(others) = buckets.get(&(ci + di, cj + dj)) else { continue };
                    for &q in others {
                        if (di == 0 && dj == 0 && q <= p) || q == p {
                            continue;
                        }
                        let d = (points[p].0 - points[q].0).norm();
                        if !(mesh * (1.0 - 1e-12)..=10.0 * mesh).contains(&d) {
                            continue;
                        }
                        let df = (points[p].1 - points[q].1).norm();
                        if df <= 0.0 {
                            continue;
                        }
                        let bin = (((d / mesh).ln() / ln10) * BINS as f64)
                            .floor()
                            .clamp(0.0, BINS as f64 - 1.0) as usize;
                        let cand = (d.ln(), df.ln());
                        if bins[bin].map_or(true, |(_, best)| cand.1 > best) {
                            bins[bin] = Some(cand);
                        }
                    }
                }
            }
        }
    }
    bins
}

fn envelope_constant(bins: &[Option<(f64, f64)>], gamma: f64) -> f64 {
    bins.iter()
        .flatten()
        .map(|&(ln_d, ln_df)| ln_df - gamma * ln_d)
        .fold(f64::NEG_INFINITY, f64::max)
        .exp()
}

/// Largest Hoelder exponent gamma for which sup |f(z) - f(z')|/|z - z'|^gamma
/// over nearby mesh pairs stays stable across two dyadic mesh refinements.
/// f is the full backward map of the driver.
pub fn modulus_estimate(driver: &Driver, region: Region, mesh: f64) -> Result<ModulusReport> {
    if !(mesh > 0.0) || region.re.1 - region.re.0 < 8.0 * mesh || region.im.1 - region.im.0 < 8.0 * mesh
    {
        return Err(Error::Parameter(format!(
            "mesh {mesh} does not resolve the region (need 8 cells per side)"
        )));
    }
    if region.im.0 < 0.0 {
        return Err(Error::Parameter("region must sit in the upper half plane".into()));
    }
    let chain = MapChain::from_driver(driver);
    let mut envelopes = Vec::with_capacity(3);
    for level in 0..3u32 {
        let m = mesh / 2f64.powi(level as i32);
        let nx = ((region.re.1 - region.re.0) / m).floor().max(1.0) as usize;
        let ny = ((region.im.1 - region.im.0) / m).floor().max(1.0) as usize;
        let values: Vec<(Complex64, Complex64)> = (0..nx * ny)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx % nx, idx / nx);
                let z = Complex64::new(
                    region.re.0 + (i as f64 + 0.5) * m,
                    region.im.0 + (j as f64 + 0.5) * m,
                );
                (z, chain.inverse(z))
            })
            .collect();
        let env = modulus_envelope(&values, m);
        if env.iter().flatten().count() < 8 {
            return Err(Error::DegenerateFit("too few mesh pairs for a modulus fit".into()));
        }
        envelopes.push(env);
    }

    let mut rows = Vec::new();
    let mut stable_gamma = 0.0f64;
    let mut gamma = 0.05;
    while gamma <= 1.25 + 1e-9 {
        let constants = [
            envelope_constant(&envelopes[0], gamma),
            envelope_constant(&envelopes[1], gamma),
            envelope_constant(&envelopes[2], gamma),
        ];
        let g1 = (constants[1] / constants[0]).log2();
        let g2 = (constants[2] / constants[1]).log2();
        let max_growth = g1.max(g2);
        if max_growth <= MODULUS_STABILITY_LIMIT {
            stable_gamma = gamma;
        }
        rows.push(ModulusRow { gamma, constants, max_growth });
        gamma += 0.05;
    }
    Ok(ModulusReport {
        mesh,
        stable_gamma,
        stability_limit: MODULUS_STABILITY_LIMIT,
        rows,
    })
}

/// Thresholds for the RCLL structure check.
#[derive(Debug, Clone, Copy)]
pub struct RcllOptions {
    /// Retained driver jumps at or above this magnitude must show a trace
    /// discontinuity with a left limit.
    pub jump_threshold: f64,
    /// Sample intervals whose driver oscillation reaches this level are
    /// excluded from the continuity statistics (the trace may genuinely
    /// move with a mid-size compound-Poisson jump).
    pub exclusion_threshold: f64,
    /// Largest trace step allowed over a quiet sample interval.
    pub continuity_cap: f64,
    /// Smallest displacement accepted as a discontinuity at a jump.
    pub min_gap: f64,
    /// Attachment tolerance: the post-jump point must sit this close to
    /// the real axis or to the already-grown trace.
    pub attach_tol: f64,
    /// Number of pre-jump samples whose diameter proxies the left limit.
    pub left_window: usize,
    pub left_diameter_tol: f64,
}

impl Default for RcllOptions {
    fn default() -> Self {
        Self {
            jump_threshold: 0.5,
            exclusion_threshold: 0.05,
            continuity_cap: 0.5,
            min_gap: 1e-3,
            attach_tol: 0.05,
            left_window: 4,
            left_diameter_tol: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpCheck {
    pub time: f64,
    pub size: f64,
    pub gap: f64,
    pub left_diameter: f64,
    pub attach_distance: f64,
    pub discontinuity_ok: bool,
    pub left_limit_ok: bool,
    pub attach_ok: bool,
}

impl JumpCheck {
    pub fn ok(&self) -> bool {
        self.discontinuity_ok && self.left_limit_ok && self.attach_ok
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RcllReport {
    pub continuity_ok: bool,
    pub worst_quiet_step: f64,
    pub n_pairs: usize,
    pub n_excluded: usize,
    /// Fitted time-Hoelder exponent of the trace over quiet intervals.
    pub modulus_exponent: f64,
    pub modulus_r2: f64,
    pub jumps: Vec<JumpCheck>,
}

impl RcllReport {
    pub fn ok(&self) -> bool {
        self.continuity_ok && self.jumps.iter().all(JumpCheck::ok)
    }
}

/// Oscillation (max - min level) of the driver over [t0, t1].
fn driver_oscillation(driver: &Driver, t0: f64, t1: f64) -> f64 {
    let times = driver.times();
    let levels = driver.levels();
    let start = times.partition_point(|&t| t <= t0).saturating_sub(1);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in start..levels.len() {
        if times[k] > t1 {
            break;
        }
        lo = lo.min(levels[k]);
        hi = hi.max(levels[k]);
    }
    if lo > hi { 0.0 } else { hi - lo }
}

/// Structure check of the trace as an RCLL curve: continuity over quiet
/// sample intervals, and at every retained jump a discontinuity, a left
/// limit, and attachment of the new branch to the hull grown so far.
pub fn rcll_check(hull: &HullApprox, driver: &Driver, options: &RcllOptions) -> Result<RcllReport> {
    if hull.points.len() < 2 * options.left_window + 4 {
        return Err(Error::Parameter("trace too short for a structure check".into()));
    }

    let mut worst_quiet_step = 0.0f64;
    let mut n_pairs = 0usize;
    let mut n_excluded = 0usize;
    let mut log_dt = Vec::new();
    let mut log_step = Vec::new();
    let mut continuity_ok = true;
    for k in 1..hull.points.len() {
        let (t0, t1) = (hull.times[k - 1], hull.times[k]);
        let step = (hull.points[k] - hull.points[k - 1]).norm();
        if driver_oscillation(driver, t0, t1) >= options.exclusion_threshold {
            n_excluded += 1;
            continue;
        }
        n_pairs += 1;
        worst_quiet_step = worst_quiet_step.max(step);
        if step > options.continuity_cap {
            continuity_ok = false;
        }
        if step > 0.0 && t1 > t0 {
            log_dt.push((t1 - t0).ln());
            log_step.push(step.ln());
        }
    }
    if log_dt.len() < 8 {
        return Err(Error::DegenerateFit("too few quiet intervals for a modulus fit".into()));
    }
    let fit = least_squares(&log_dt, &log_step)?;

    let mut jumps = Vec::new();
    for &jt in driver.jump_times() {
        let size = driver_jump_size(driver, jt);
        if size.abs() < options.jump_threshold {
            continue;
        }
        let i = hull.times.partition_point(|&t| t < jt);
        if i == 0 || i >= hull.points.len() || i < options.left_window {
            continue;
        }
        let post = hull.points[i];
        let gap = (post - hull.points[i - 1]).norm();
        let window = &hull.points[i - options.left_window..i];
        let mut left_diameter = 0.0f64;
        for a in 0..window.len() {
            for b in a + 1..window.len() {
                left_diameter = left_diameter.max((window[a] - window[b]).norm());
            }
        }
        let attach_distance = hull.points[..i]
            .iter()
            .map(|p| (post - p).norm())
            .fold(post.im.max(0.0), f64::min);
        jumps.push(JumpCheck {
            time: jt,
            size,
            gap,
            left_diameter,
            attach_distance,
            discontinuity_ok: gap >= options.min_gap,
            left_limit_ok: left_diameter <= options.left_diameter_tol,
            attach_ok: attach_distance <= options.attach_tol,
        });
    }
    Ok(RcllReport {
        continuity_ok,
        worst_quiet_step,
        n_pairs,
        n_excluded,
        modulus_exponent: fit.slope,
        modulus_r2: fit.r2,
        jumps,
    })
}

/// Level change of the driver at breakpoint t.
fn driver_jump_size(driver: &Driver, t: f64) -> f64 {
    let times = driver.times();
    let levels = driver.levels();
    match times.binary_search_by(|tk| tk.partial_cmp(&t).unwrap()) {
        Ok(idx) if idx > 0 => levels[idx] - levels[idx - 1],
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loewner::swallow_tolerance;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn segment_cloud(n: usize, height: f64) -> Vec<Complex64> {
        (0..n).map(|k| c(0.0, height * k as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn box_count_basics() {
        assert_eq!(box_count(&[c(0.3, 0.7)], 0.1), 1);
        assert_eq!(box_count(&[c(0.3, 0.7)], 10.0), 1);
        let n = box_count(&segment_cloud(1000, 2.0), 0.1);
        assert!((20..=22).contains(&n), "N = {n}");
    }

    #[test]
    fn dimension_of_straight_segment_is_one() {
        let hull = HullApprox {
            times: (0..10_000).map(|k| k as f64).collect(),
            points: (0..10_000).map(|k| c(1.0, 2.0) * (k as f64 / 9999.0)).collect(),
            jump_flags: vec![false; 10_000],
            capacity: 0.0,
        };
        let scales: Vec<f64> = (0..12).map(|k| 1e-1 * 10f64.powf(-2.0 * k as f64 / 11.0)).collect();
        let fit = dimension_estimate(&hull, &scales).unwrap();
        assert!(!fit.resolution_warning);
        let slope = fit.slope().expect("fit quality");
        assert!((0.95..=1.05).contains(&slope), "slope = {slope}");
        for w in fit.counts.windows(2) {
            assert!(w[1] >= w[0], "counts must grow as scales shrink");
        }
    }

    #[test]
    fn dimension_estimate_rejects_degenerate_input() {
        let hull = HullApprox {
            times: vec![0.0, 1.0],
            points: vec![c(0.0, 0.5), c(1e-6, 0.5)],
            jump_flags: vec![false, false],
            capacity: 0.0,
        };
        let scales = vec![1e-1, 1e-2, 1e-3];
        assert!(matches!(dimension_estimate(&hull, &scales), Err(Error::DegenerateFit(_))));
        let narrow = vec![0.1, 0.09, 0.08];
        assert!(matches!(dimension_estimate(&hull, &narrow), Err(Error::Parameter(_))));
    }

    #[test]
    fn hausdorff_basics() {
        let a = vec![c(0.0, 0.0)];
        let b = vec![c(0.0, 0.0), c(0.0, 2.0)];
        assert_eq!(hausdorff_distance(&a, &a), 0.0);
        assert!((hausdorff_distance(&a, &b) - 2.0).abs() < 1e-15);
        assert_eq!(hausdorff_distance(&a, &b), hausdorff_distance(&b, &a));
    }

    #[test]
    fn bucketed_hausdorff_matches_brute_force() {
        let mut rng = PathRng::new(50, 0);
        for _ in 0..20 {
            let a: Vec<Complex64> = (0..120)
                .map(|_| c(4.0 * rng.signed_uniform(), 2.0 * rng.uniform()))
                .collect();
            let b: Vec<Complex64> = (0..80)
                .map(|_| c(4.0 * rng.signed_uniform(), 2.0 * rng.uniform()))
                .collect();
            let brute = a
                .iter()
                .map(|p| b.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
                .fold(0.0f64, f64::max)
                .max(
                    b.iter()
                        .map(|p| a.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
                        .fold(0.0f64, f64::max),
                );
            let fast = hausdorff_distance(&a, &b);
            assert!((fast - brute).abs() < 1e-12, "{fast} vs {brute}");
        }
    }

    #[test]
    fn rescaled_slit_driver_reproduces_the_segment() {
        // Zero driver: the unit-horizon hull is [0, 2i] exactly; the
        // measured distance is pure sampling resolution.
        let times: Vec<f64> = (0..=64).map(|k| k as f64 / 64.0).collect();
        let driver = Driver::new(times, vec![0.0; 65], vec![]).unwrap();
        let sample_times: Vec<f64> = (1..=1000).map(|j| (j as f64 / 1000.0).powi(2)).collect();
        let hull = compute_trace(&driver, &sample_times, DEFAULT_TRACE_LIFT);
        let d = distance_to_slit(&hull.points, 2.0);
        assert!(d < 3e-3, "distance {d}");
    }

    #[test]
    fn rescaled_hull_report_is_coherent() {
        let reports = rescaled_hull_experiment(1.0, &[0.2, 0.1], 0.5, 6, 400, 200, 77).unwrap();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert!(r.estimate.is_finite() && r.estimate > 0.0);
            assert!(r.ci_low <= r.estimate && r.estimate <= r.ci_high);
            assert!(r.details.contains_key("median_distance"));
        }
        assert_eq!(reports[0].details["driver_factor"], 0.2);
    }

    #[test]
    fn confinement_certificate_on_slit_and_two_level_drivers() {
        let times: Vec<f64> = (0..=32).map(|k| k as f64 / 32.0).collect();
        let driver = Driver::new(times, vec![0.0; 33], vec![]).unwrap();
        let sample_times: Vec<f64> = (1..=100).map(|j| (j as f64 / 100.0).powi(2)).collect();
        let hull = compute_trace(&driver, &sample_times, DEFAULT_TRACE_LIFT);
        let cert = check_lemma_l1(&driver, &hull, Some((5.0, 6.0)), 1e-6);
        assert!(cert.ok(), "{cert:?}");
        assert_eq!(cert.re_bounds, (0.0, 0.0));
        assert_eq!(cert.occupation_time, 0.0);

        let driver = Driver::new(
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            vec![0.0, 5.0, 0.0, 5.0, 5.0],
            vec![],
        )
        .unwrap();
        let hull = compute_trace(&driver, &sample_times, DEFAULT_TRACE_LIFT);
        let cert = check_lemma_l1(&driver, &hull, None, 1e-6);
        assert!(cert.re_ok, "offender: {:?}", cert.re_offender);
        assert_eq!(cert.re_bounds, (0.0, 5.0));
    }

    #[test]
    fn derivative_moment_statistic_is_one_at_tiny_u() {
        let params = StableParams::new(1.0, 0.01).unwrap();
        let trunc = TruncationConfig::default();
        let report = derivative_moment_experiment(
            &params,
            &trunc,
            1.0,
            0.5,
            c(0.2, 0.2),
            1e-12,
            0.5,
            20,
            5.0,
            100,
            3,
        )
        .unwrap();
        assert!((report.estimate - 1.0).abs() < 1e-9, "estimate {}", report.estimate);
        assert_eq!(report.censored_fraction, 0.0);
    }

    #[test]
    fn slit_derivative_at_gamma_matches_closed_form() {
        // W = 0: f(z) = sqrt(z^2 - 4t) gives |f'| = |z| / |z^2 - 4t|^(1/2).
        let driver = Driver::constant(0.0, 5.0);
        let z = c(0.2, 0.2);
        let run = crate::flow::run_backward_flow(&driver, z, 5.0, &[5f64.ln()]).unwrap();
        let rec = run.records[0];
        assert!(!rec.censored);
        let z2 = z * z;
        let zeta_sq = c(z2.re - 4.0 * rec.gamma_u, z2.im);
        let expect = (z.norm() / zeta_sq.norm().sqrt()).ln();
        assert!((rec.log_deriv_at_gamma - expect).abs() < 1e-12);
        // Frozen pilot value of the kappa -> 0 limit of the statistic.
        assert!((rec.log_deriv_at_gamma.exp() - 0.2824).abs() < 5e-4);
    }

    #[test]
    fn modulus_of_smooth_slit_map_region() {
        let driver = Driver::constant(0.0, 1.0);
        let region = Region { re: (0.8, 2.8), im: (0.5, 1.5) };
        let report = modulus_estimate(&driver, region, 1.0 / 16.0).unwrap();
        assert!(
            report.stable_gamma >= 0.9,
            "smooth region reported gamma {}",
            report.stable_gamma
        );
    }

    #[test]
    fn modulus_detects_square_root_singularity() {
        // Region hugging the slit base endpoint +2 of f(z) = sqrt(z^2-4).
        let driver = Driver::constant(0.0, 1.0);
        let region = Region { re: (1.6, 2.4), im: (0.0, 0.4) };
        let report = modulus_estimate(&driver, region, 1.0 / 32.0).unwrap();
        assert!(
            (report.stable_gamma - 0.5).abs() <= 0.15,
            "singular region reported gamma {}",
            report.stable_gamma
        );
    }

    #[test]
    fn modulus_rejects_coarse_mesh() {
        let driver = Driver::constant(0.0, 1.0);
        let region = Region { re: (0.0, 1.0), im: (0.0, 1.0) };
        assert!(matches!(
            modulus_estimate(&driver, region, 0.5),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn rcll_passes_on_continuous_slit_trace() {
        let times: Vec<f64> = (0..=64).map(|k| k as f64 / 64.0).collect();
        let driver = Driver::new(times, vec![0.0; 65], vec![]).unwrap();
        let sample_times: Vec<f64> = (1..=400).map(|j| (j as f64 / 400.0).powi(2)).collect();
        let hull = compute_trace(&driver, &sample_times, DEFAULT_TRACE_LIFT);
        let report = rcll_check(&hull, &driver, &RcllOptions::default()).unwrap();
        assert!(report.ok(), "{report:?}");
        assert!(report.jumps.is_empty());
        assert_eq!(report.n_excluded, 0);
    }

    #[test]
    fn rcll_flags_branch_at_a_big_jump() {
        let driver = Driver::new(
            vec![0.0, 0.5, 1.0],
            vec![0.0, 10.0, 10.0],
            vec![0.5],
        )
        .unwrap();
        let sample_times: Vec<f64> = (1..=600).map(|j| j as f64 / 600.0).collect();
        let hull = compute_trace(&driver, &sample_times, DEFAULT_TRACE_LIFT);
        let report = rcll_check(&hull, &driver, &RcllOptions::default()).unwrap();
        assert_eq!(report.jumps.len(), 1);
        let jc = &report.jumps[0];
        assert!(jc.gap > 1.0, "gap {}", jc.gap);
        assert!(jc.ok(), "{jc:?}");
        assert!(report.continuity_ok);
    }

    #[test]
    fn swallow_tolerance_scales_with_the_point() {
        assert!(swallow_tolerance(c(0.0, 1e6)) > swallow_tolerance(c(0.0, 1.0)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn grid_refinement_bound(seed in 0u64..1000, eps in 0.01f64..0.5) {
            let mut rng = PathRng::new(seed, 1);
            let pts: Vec<Complex64> = (0..200)
                .map(|_| c(3.0 * rng.signed_uniform(), 2.0 * rng.uniform()))
                .collect();
            prop_assert!(box_count(&pts, eps / 2.0) <= 4 * box_count(&pts, eps));
        }

        #[test]
        fn hausdorff_triangle_inequality(seed in 0u64..1000) {
            let mut rng = PathRng::new(seed, 2);
            let mut cloud = |n: usize| -> Vec<Complex64> {
                (0..n).map(|_| c(rng.signed_uniform(), rng.uniform())).collect()
            };
            let a = cloud(40);
            let b = cloud(30);
            let d = cloud(25);
            let ab = hausdorff_distance(&a, &b);
            let bd = hausdorff_distance(&b, &d);
            let ad = hausdorff_distance(&a, &d);
            prop_assert!(ad <= ab + bd + 1e-12);
        }
    }
}
