//! The bound pipeline: fitting MGF envelopes, building the node's weak
//! service curve, checking stability, and turning arrival/service pairs
//! into backlog and delay bounds.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dcf::{impairment_log_mgf, stability_threshold, DcfSolution};
use crate::error::{Error, Result};
use crate::minplus::{convolution_envelope, convolve_bounding, BoundingFunction, RateCurve};
use crate::numeric::{golden_section, log_grid};
use crate::traffic::{
    cbr_arrival_curve, poisson_constraint, vbc_from_constraint, TrafficModel, UpperConstraint,
    VbcArrivalCurve,
};

pub const DEFAULT_FIT_EPSILON: f64 = 1e-5;
pub const DEFAULT_FIT_T_MAX: usize = 500;
pub const DEFAULT_I_MAX: usize = 10_000;

/// Outcome of fitting a line `ρt + σ` over a tabulated `M(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFit {
    pub constraint: UpperConstraint,
    /// Index at which the slope converged (or the last index examined).
    pub t_star: usize,
    pub converged: bool,
}

/// Fits `(σ, ρ)` to a tabulated envelope `M(0..)` with `M(0) = 0`.
///
/// The slope `s(t) = M(t) - M(t-1)` is followed until two consecutive
/// slopes agree within relative tolerance `epsilon`; the line with that
/// slope through `(t*, M(t*))` is then lifted by the largest excess of
/// `M` over it on `[0, t*]`.
pub fn fit_upper_constraint(m: &[f64], theta: f64, epsilon: f64) -> Result<ConstraintFit> {
    if m.len() < 3 {
        return Err(Error::param("m", "need M(0), M(1) and M(2) at least"));
    }
    if m[0] != 0.0 {
        return Err(Error::param("m", "M(0) must be 0"));
    }
    if m.iter().any(|v| !v.is_finite()) || m.windows(2).any(|w| w[1] < w[0] - 1e-12) {
        return Err(Error::param("m", "M must be finite and wide-sense increasing"));
    }
    fit_lazy(|t| m[t], theta, epsilon, m.len() - 1)
}

/// Fits the impairment envelope `(1/θ)·log M_raw(t, θ)` of a solved DCF
/// model, evaluating `M` only as far as needed.
pub fn fit_impairment(
    sol: &DcfSolution,
    theta: f64,
    epsilon: f64,
    t_max: usize,
) -> Result<ConstraintFit> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::param("theta", format!("must be > 0, got {theta}")));
    }
    fit_lazy(
        |t| impairment_log_mgf(t as u32, theta, sol) / theta,
        theta,
        epsilon,
        t_max,
    )
}

fn fit_lazy<F: FnMut(usize) -> f64>(
    mut m_at: F,
    theta: f64,
    epsilon: f64,
    t_max: usize,
) -> Result<ConstraintFit> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::param("epsilon", "must be finite and >= 0"));
    }
    if t_max < 2 {
        return Err(Error::param("t_max", "must be >= 2"));
    }
    let mut m = vec![m_at(0), m_at(1)];
    let mut t_star = t_max;
    let mut converged = false;
    for t in 2..=t_max {
        m.push(m_at(t));
        let prev = m[t - 1] - m[t - 2];
        let cur = m[t] - m[t - 1];
        if (1.0 - epsilon) * prev <= cur && cur <= (1.0 + epsilon) * prev {
            t_star = t;
            converged = true;
            break;
        }
    }
    let rho = m[t_star] - m[t_star - 1];
    let intercept = m[t_star] - rho * t_star as f64;
    let lift = m
        .iter()
        .enumerate()
        .map(|(t, v)| v - (intercept + rho * t as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    let sigma = (intercept + lift).max(0.0);
    Ok(ConstraintFit {
        constraint: UpperConstraint::new(theta, sigma, rho.max(0.0))?,
        t_star,
        converged,
    })
}

/// `S ~ws <g, β>` with `β(t) = (c - r_I)·t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakServiceCurve {
    pub beta: RateCurve,
    pub g: BoundingFunction,
    pub c: f64,
}

impl WeakServiceCurve {
    pub fn rate(&self) -> f64 {
        self.beta.rate().unwrap_or(f64::NAN)
    }
}

/// Service curve from a fitted impairment constraint and an impairment
/// rate `r_I` in `(ρ_I, c)`.
pub fn service_curve_from_constraint(
    impairment: &UpperConstraint,
    r_i: f64,
    c: f64,
) -> Result<WeakServiceCurve> {
    if r_i.is_nan() || r_i >= c {
        return Err(Error::InfeasibleRate { rate: r_i, rho: c });
    }
    let vbc = vbc_from_constraint(impairment, r_i)?;
    Ok(WeakServiceCurve {
        beta: RateCurve::affine(c - r_i, 0.0)?,
        g: vbc.f,
        c,
    })
}

/// Weak service curve of an 802.11 node (`c = 1` packet per slot) at
/// impairment exponent `theta2` and rate `r_i`.
pub fn service_curve(sol: &DcfSolution, theta2: f64, r_i: f64) -> Result<WeakServiceCurve> {
    let fit = fit_impairment(sol, theta2, DEFAULT_FIT_EPSILON, DEFAULT_FIT_T_MAX)?;
    service_curve_from_constraint(&fit.constraint, r_i, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityInput {
    /// Envelope average rate of the arrivals.
    pub a_a: f64,
    /// Envelope average rate of the impairment.
    pub a_i: f64,
    pub c: f64,
}

impl StabilityInput {
    pub fn new(a_a: f64, a_i: f64, c: f64) -> Result<Self> {
        if !(a_a >= 0.0 && a_i >= 0.0 && c >= 0.0) {
            return Err(Error::param("stability", "rates must be nonnegative"));
        }
        if a_i > c {
            return Err(Error::param("a_i", "impairment rate cannot exceed capacity"));
        }
        Ok(StabilityInput { a_a, a_i, c })
    }

    /// An 802.11 node: `c = 1` and `c - a_I` is the stability threshold.
    pub fn for_dcf(traffic: &TrafficModel, sol: &DcfSolution) -> Self {
        StabilityInput {
            a_a: traffic.envelope_rate(),
            a_i: 1.0 - stability_threshold(sol),
            c: 1.0,
        }
    }
}

/// `a_A < c - a_I`.
pub fn check_stability(s: &StabilityInput) -> bool {
    s.a_a < s.c - s.a_i
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub probability: f64,
    pub raw: f64,
    /// False when the arrival rate exceeds the service rate, in which case
    /// only the trivial bound 1 is available.
    pub feasible: bool,
}

/// `inf_{s >= 0} [β(s) - α(s)]` for affine curves; `-inf` when `α`
/// outgrows `β`.
fn affine_slack(alpha: &RateCurve, beta: &RateCurve) -> f64 {
    match (alpha, beta) {
        (
            RateCurve::Affine {
                rate: ra,
                burst: ba,
            },
            RateCurve::Affine {
                rate: rb,
                burst: bb,
            },
        ) => {
            if rb >= ra {
                bb - ba
            } else {
                f64::NEG_INFINITY
            }
        }
        _ => (0..=4096usize)
            .map(|s| beta.eval(s) - alpha.eval(s))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Backlog tail `P{B(t) > x} <= f ⊗ g(x + inf_s [β(s) - α(s)])`.
pub fn backlog_tail(arrival: &VbcArrivalCurve, service: &WeakServiceCurve, x: f64) -> TailBound {
    let slack = affine_slack(&arrival.alpha, &service.beta);
    if slack == f64::NEG_INFINITY {
        return TailBound {
            probability: 1.0,
            raw: f64::INFINITY,
            feasible: false,
        };
    }
    let raw = convolve_bounding(&arrival.f, &service.g, x + slack);
    TailBound {
        probability: raw.clamp(0.0, 1.0),
        raw,
        feasible: true,
    }
}

/// Delay tail straight from the arrival and service curves,
/// `P{D(t) > d} <= f ⊗ g(inf_s [β(s) - α(s - d)])`.
///
/// For the zero-burst affine curves of the DCF model the infimum is 0 at
/// every `d`, so this only ever yields `f ⊗ g(0) >= 1`; the reported delay
/// bounds use [`delay_mean_bound`] and [`delay_tail_bound`] instead.
pub fn curve_delay_tail(arrival: &VbcArrivalCurve, service: &WeakServiceCurve, d: f64) -> TailBound {
    let (RateCurve::Affine { rate: ra, burst: ba }, RateCurve::Affine { rate: rb, burst: bb }) =
        (&arrival.alpha, &service.beta)
    else {
        return TailBound {
            probability: 1.0,
            raw: f64::INFINITY,
            feasible: false,
        };
    };
    if rb < ra {
        return TailBound {
            probability: 1.0,
            raw: f64::INFINITY,
            feasible: false,
        };
    }
    // s < d sees α = 0; s >= d is minimized at s = d.
    let slack = bb.min(bb + rb * d - ba);
    let raw = convolve_bounding(&arrival.f, &service.g, slack);
    TailBound {
        probability: raw.clamp(0.0, 1.0),
        raw,
        feasible: true,
    }
}

/// Controls for the deterministic bound search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchControls {
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_points: usize,
    /// Golden-section iterations for the rate split.
    pub split_iterations: usize,
    /// Stop refining once a sweep improves the best bound by less than
    /// this relative amount.
    pub improvement_tolerance: f64,
    pub max_refinements: usize,
    pub fit_epsilon: f64,
    pub fit_t_max: usize,
}

impl Default for SearchControls {
    fn default() -> Self {
        SearchControls {
            theta_min: 1e-3,
            theta_max: 4.0,
            theta_points: 32,
            split_iterations: 60,
            improvement_tolerance: 1e-3,
            max_refinements: 6,
            fit_epsilon: DEFAULT_FIT_EPSILON,
            fit_t_max: DEFAULT_FIT_T_MAX,
        }
    }
}

impl SearchControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_min > 0.0 && self.theta_max > self.theta_min && self.theta_max.is_finite()) {
            return Err(Error::param("theta range", "need 0 < theta_min < theta_max"));
        }
        if self.theta_points < 2 {
            return Err(Error::param("theta_points", "need at least 2 grid points"));
        }
        if self.split_iterations == 0 {
            return Err(Error::param("split_iterations", "must be > 0"));
        }
        if self.improvement_tolerance.is_nan() || self.improvement_tolerance <= 0.0 {
            return Err(Error::param("improvement_tolerance", "must be > 0"));
        }
        if self.fit_epsilon.is_nan() || self.fit_epsilon < 0.0 || self.fit_t_max < 2 {
            return Err(Error::param("fit", "epsilon >= 0 and t_max >= 2 required"));
        }
        Ok(())
    }
}

/// The optimized bound at one slack value, with everything needed to
/// recompute it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub x: f64,
    /// `min(1, f ⊗ g(x))`.
    pub bound: f64,
    pub raw: f64,
    /// Absent for CBR, whose arrival curve has no exponent.
    pub theta1: Option<f64>,
    pub theta2: f64,
    pub r_a: f64,
    pub r_i: f64,
    pub arrival: VbcArrivalCurve,
    pub service: WeakServiceCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub traffic: TrafficModel,
    pub stable: bool,
    pub feasible: bool,
    /// Parameters chosen at the largest grid slack.
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub r_a: Option<f64>,
    pub r_i: Option<f64>,
    pub points: Vec<TailPoint>,
    /// Clamped tail over the slack grid.
    pub tail: Option<BoundingFunction>,
    pub expected_backlog: Option<f64>,
    /// Search sweeps performed (initial grid plus refinements).
    pub sweeps: usize,
}

impl BoundReport {
    fn empty(traffic: TrafficModel, stable: bool) -> Self {
        BoundReport {
            traffic,
            stable,
            feasible: false,
            theta1: None,
            theta2: None,
            r_a: None,
            r_i: None,
            points: Vec::new(),
            tail: None,
            expected_backlog: None,
            sweeps: 0,
        }
    }

    /// Bound at grid point `x`, if present.
    pub fn bound_at(&self, x: f64) -> Option<f64> {
        self.points.iter().find(|p| p.x == x).map(|p| p.bound)
    }
}

/// Candidate parameters evaluated by the search.
#[derive(Debug, Clone)]
struct Candidate {
    theta1: Option<f64>,
    theta2: f64,
    r_a: f64,
    r_i: f64,
    arrival: VbcArrivalCurve,
    service: WeakServiceCurve,
}

impl Candidate {
    fn raw(&self, x: f64) -> f64 {
        backlog_tail(&self.arrival, &self.service, x).raw
    }
}

/// Impairment fits keyed by the bit pattern of θ₂, shared across slack
/// points and refinement sweeps.
struct FitCache<'a> {
    sol: &'a DcfSolution,
    controls: &'a SearchControls,
    fits: Mutex<HashMap<u64, Option<UpperConstraint>>>,
}

impl<'a> FitCache<'a> {
    fn new(sol: &'a DcfSolution, controls: &'a SearchControls) -> Self {
        FitCache {
            sol,
            controls,
            fits: Mutex::new(HashMap::new()),
        }
    }

    /// Fits all of `thetas` that are not cached yet, in parallel.
    fn prefetch(&self, thetas: &[f64]) {
        let missing: Vec<f64> = {
            let fits = self.fits.lock().expect("fit cache poisoned");
            thetas
                .iter()
                .copied()
                .filter(|t| !fits.contains_key(&t.to_bits()))
                .collect()
        };
        let fitted: Vec<(u64, Option<UpperConstraint>)> = missing
            .par_iter()
            .map(|&theta| {
                let fit = fit_impairment(
                    self.sol,
                    theta,
                    self.controls.fit_epsilon,
                    self.controls.fit_t_max,
                )
                .ok()
                .filter(|f| f.converged)
                .map(|f| f.constraint);
                (theta.to_bits(), fit)
            })
            .collect();
        self.fits.lock().expect("fit cache poisoned").extend(fitted);
    }

    fn get(&self, theta: f64) -> Option<UpperConstraint> {
        self.prefetch(&[theta]);
        self.fits.lock().expect("fit cache poisoned")[&theta.to_bits()]
    }
}

/// Best split of `r_A + r_I = 1` for one `(θ₁, θ₂)` pair at slack `x`.
fn best_poisson_split(
    lambda: f64,
    theta1: f64,
    impairment: &UpperConstraint,
    x: f64,
    iterations: usize,
) -> Option<Candidate> {
    let arrival_c = poisson_constraint(lambda, theta1).ok()?;
    let lo = arrival_c.rho;
    let hi = 1.0 - impairment.rho;
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return None;
    }
    let build = |r_a: f64| -> Option<Candidate> {
        let arrival = vbc_from_constraint(&arrival_c, r_a).ok()?;
        let service = service_curve_from_constraint(impairment, 1.0 - r_a, 1.0).ok()?;
        Some(Candidate {
            theta1: Some(theta1),
            theta2: impairment.theta,
            r_a,
            r_i: 1.0 - r_a,
            arrival,
            service,
        })
    };
    let margin = (hi - lo) * 1e-9;
    let objective = |r_a: f64| build(r_a).map_or(f64::INFINITY, |c| c.raw(x));
    let (r_a, value) = golden_section(objective, lo + margin, hi - margin, iterations);
    if !value.is_finite() {
        return None;
    }
    build(r_a)
}

fn cbr_candidate(lambda: f64, impairment: &UpperConstraint) -> Option<Candidate> {
    let r_i = 1.0 - lambda;
    if r_i.is_nan() || r_i <= impairment.rho {
        return None;
    }
    Some(Candidate {
        theta1: None,
        theta2: impairment.theta,
        r_a: lambda,
        r_i,
        arrival: cbr_arrival_curve(lambda).ok()?,
        service: service_curve_from_constraint(impairment, r_i, 1.0).ok()?,
    })
}

/// Deterministic ordering for candidates with equal value.
fn better(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// One sweep over a `(θ₁, θ₂)` grid at slack `x`.
fn sweep(
    traffic: &TrafficModel,
    theta1s: &[f64],
    theta2s: &[f64],
    cache: &FitCache<'_>,
    x: f64,
    iterations: usize,
) -> Option<(f64, Candidate)> {
    cache.prefetch(theta2s);
    let impairments: Vec<Option<UpperConstraint>> = theta2s.iter().map(|t| cache.get(*t)).collect();
    let lambda = traffic.lambda();
    let pairs: Vec<(usize, usize)> = match traffic {
        TrafficModel::Poisson { .. } => (0..theta1s.len())
            .flat_map(|i| (0..theta2s.len()).map(move |j| (i, j)))
            .collect(),
        TrafficModel::Cbr { .. } => (0..theta2s.len()).map(|j| (0, j)).collect(),
    };
    pairs
        .par_iter()
        .enumerate()
        .filter_map(|(idx, &(i, j))| {
            let imp = impairments[j].as_ref()?;
            let cand = match traffic {
                TrafficModel::Poisson { .. } => {
                    best_poisson_split(lambda, theta1s[i], imp, x, iterations)?
                }
                TrafficModel::Cbr { .. } => cbr_candidate(lambda, imp)?,
            };
            Some((cand.raw(x), idx, cand))
        })
        .reduce_with(|a, b| if better((a.0, a.1), (b.0, b.1)) { a } else { b })
        .map(|(v, _, c)| (v, c))
}

/// Local log grid of `points` values around `center`, spanning one step
/// `ratio` of the previous grid on either side.
fn refine_grid(center: f64, ratio: f64, points: usize, controls: &SearchControls) -> Vec<f64> {
    let lo = (center / ratio).max(controls.theta_min * 1e-3);
    let hi = center * ratio;
    log_grid(lo, hi, points)
}

/// Minimizes `f ⊗ g(x)` over `(θ₁, θ₂, r_A)` with `r_A + r_I = 1` at every
/// slack in `xs`.
///
/// Each slack gets a sweep over a log grid of exponents (golden-section
/// search over the rate split for each pair), followed by local sweeps on
/// progressively finer grids around the incumbent until a sweep improves
/// the bound by less than `improvement_tolerance`. The reported value at
/// each `x` is the smallest bound over every candidate found at any slack,
/// which keeps the tail monotone.
pub fn optimize_backlog_tail(
    traffic: &TrafficModel,
    sol: &DcfSolution,
    xs: &[f64],
    controls: &SearchControls,
) -> Result<BoundReport> {
    controls.validate()?;
    if xs.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::param("xs", "slack grid must be finite and >= 0"));
    }
    let stable = check_stability(&StabilityInput::for_dcf(traffic, sol));
    let mut report = BoundReport::empty(*traffic, stable);
    if !stable {
        return Ok(report);
    }
    let mut xs: Vec<f64> = xs.to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    if traffic.lambda() == 0.0 {
        // A silent source never builds a backlog.
        report.feasible = true;
        report.tail = Some(BoundingFunction::zero());
        report.expected_backlog = Some(0.0);
        return Ok(report);
    }

    let cache = FitCache::new(sol, controls);
    let base = log_grid(controls.theta_min, controls.theta_max, controls.theta_points);
    let ratio = (controls.theta_max / controls.theta_min).powf(1.0 / (controls.theta_points - 1) as f64);
    let mut sweeps = 0;
    let mut found: Vec<Candidate> = Vec::new();
    for &x in &xs {
        sweeps += 1;
        let Some((mut best_v, mut best)) =
            sweep(traffic, &base, &base, &cache, x, controls.split_iterations)
        else {
            continue;
        };
        let mut step = ratio;
        for _ in 0..controls.max_refinements {
            let t1 = best.theta1.map_or_else(|| vec![1.0], |t| refine_grid(t, step, 9, controls));
            let t2 = refine_grid(best.theta2, step, 9, controls);
            sweeps += 1;
            let Some((v, c)) = sweep(traffic, &t1, &t2, &cache, x, controls.split_iterations) else {
                break;
            };
            let improved = v < best_v;
            let rel = if best_v > 0.0 { (best_v - v) / best_v } else { 0.0 };
            if improved {
                best_v = v;
                best = c;
            }
            if !improved || rel < controls.improvement_tolerance {
                break;
            }
            step = step.sqrt();
        }
        found.push(best);
    }
    report.sweeps = sweeps;
    if found.is_empty() {
        return Ok(report);
    }

    for &x in &xs {
        let (raw, cand) = found
            .iter()
            .map(|c| (c.raw(x), c))
            .fold((f64::INFINITY, &found[0]), |acc, (v, c)| if v < acc.0 { (v, c) } else { acc });
        report.points.push(TailPoint {
            x,
            bound: raw.clamp(0.0, 1.0),
            raw,
            theta1: cand.theta1,
            theta2: cand.theta2,
            r_a: cand.r_a,
            r_i: cand.r_i,
            arrival: cand.arrival.clone(),
            service: cand.service.clone(),
        });
    }
    let last = report.points.last().expect("nonempty grid");
    report.theta1 = last.theta1;
    report.theta2 = Some(last.theta2);
    report.r_a = Some(last.r_a);
    report.r_i = Some(last.r_i);
    report.feasible = true;
    report.tail = Some(BoundingFunction::Tabulated {
        points: report.points.iter().map(|p| (p.x, p.bound)).collect(),
    });
    Ok(report)
}

/// Expected backlog bound split into its truncated sum and analytic tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedBacklog {
    pub value: f64,
    pub truncated_sum: f64,
    pub remainder: f64,
}

/// `E B <= Σ_{i>=0} min(1, f ⊗ g(i))·(i + 1)`, summed to `i_max` with an
/// exponential envelope for the rest. At each `i` the smallest bound over
/// the report's parameter choices is used.
pub fn expected_backlog_bound(report: &BoundReport, i_max: usize) -> Result<ExpectedBacklog> {
    if !report.feasible {
        return Err(Error::Infeasible("report has no feasible bound".into()));
    }
    if report.points.is_empty() {
        // Silent source.
        return Ok(ExpectedBacklog {
            value: 0.0,
            truncated_sum: 0.0,
            remainder: 0.0,
        });
    }
    let mut pairs: Vec<(&VbcArrivalCurve, &WeakServiceCurve)> = Vec::new();
    for p in &report.points {
        if !pairs.iter().any(|(a, s)| *a == &p.arrival && *s == &p.service) {
            pairs.push((&p.arrival, &p.service));
        }
    }
    let truncated_sum: f64 = (0..=i_max)
        .into_par_iter()
        .map(|i| {
            let x = i as f64;
            let p = pairs
                .iter()
                .map(|(a, s)| backlog_tail(a, s, x).probability)
                .fold(1.0, f64::min);
            p * (i + 1) as f64
        })
        .sum();
    let m = (i_max + 1) as f64;
    let remainder = pairs
        .iter()
        .filter_map(|(a, s)| {
            let env = convolution_envelope(&a.f, &s.g)?;
            if env.valid_from > m {
                return None;
            }
            if env.coefficient == 0.0 {
                return Some(0.0);
            }
            // Σ_{i>=m} K q^i (i+1) = K q^m ((m+1)(1-q) + q) / (1-q)^2.
            let q = (-env.decay).exp();
            let one_minus_q = -(-env.decay).exp_m1();
            Some(
                env.coefficient * (-env.decay * m).exp() * ((m + 1.0) * one_minus_q + q)
                    / (one_minus_q * one_minus_q),
            )
        })
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
    let Some(remainder) = remainder else {
        return Err(Error::DivergentTail(
            "no parameter choice has an exponential envelope".into(),
        ));
    };
    if remainder > 1e-6 * truncated_sum.max(f64::MIN_POSITIVE) {
        return Err(Error::DivergentTail(format!(
            "remainder {remainder:e} beyond i_max = {i_max} is not negligible"
        )));
    }
    Ok(ExpectedBacklog {
        value: truncated_sum + remainder,
        truncated_sum,
        remainder,
    })
}

/// Little's-law mean delay bound `E B / λ`, in slots.
pub fn delay_mean_bound(expected_backlog: f64, lambda: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be > 0, got {lambda}")));
    }
    Ok(expected_backlog / lambda)
}

/// Markov bound `P{D >= x} <= min(1, E B / (λx))`, `x` in slots.
pub fn delay_tail_bound(expected_backlog: f64, lambda: f64, x: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be > 0, got {lambda}")));
    }
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::param("x", format!("must be > 0, got {x}")));
    }
    Ok((expected_backlog / (lambda * x)).min(1.0))
}
