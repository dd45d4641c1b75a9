//! Discrete-slot min-plus algebra.
//!
//! Time is measured in calculus slots (`usize`) and traffic in packets
//! (`f64`). Rate curves are nonnegative and wide-sense increasing; bounding
//! functions are nonnegative and wide-sense decreasing tail functions of a
//! real slack `x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of subintervals used when a convolution has to be searched
/// numerically.
const GRID_STEPS: usize = 1024;

/// Arrival or service curve over discrete slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateCurve {
    /// `burst + rate * t`.
    Affine { rate: f64, burst: f64 },
    /// Explicit values indexed by slot; held constant past the last entry.
    Tabulated { values: Vec<f64> },
}

impl RateCurve {
    pub fn affine(rate: f64, burst: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::param("rate", format!("must be finite and >= 0, got {rate}")));
        }
        if !(burst.is_finite() && burst >= 0.0) {
            return Err(Error::param("burst", format!("must be finite and >= 0, got {burst}")));
        }
        Ok(RateCurve::Affine { rate, burst })
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param("values", "must be finite and nonnegative"));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("values", "must be wide-sense increasing"));
        }
        Ok(RateCurve::Tabulated { values })
    }

    pub fn eval(&self, t: usize) -> f64 {
        match self {
            RateCurve::Affine { rate, burst } => burst + rate * t as f64,
            RateCurve::Tabulated { values } => match values.get(t) {
                Some(v) => *v,
                None => values.last().copied().unwrap_or(0.0),
            },
        }
    }

    /// Long-run rate for affine curves.
    pub fn rate(&self) -> Option<f64> {
        match self {
            RateCurve::Affine { rate, .. } => Some(*rate),
            RateCurve::Tabulated { .. } => None,
        }
    }
}

/// Tail bounding function `f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundingFunction {
    /// `coefficient * exp(-decay * x)`.
    ScaledExponential { coefficient: f64, decay: f64 },
    /// 1 for `x < threshold`, 0 from `threshold` on.
    Step { threshold: f64 },
    /// Piecewise-linear through `(x, p)` points sorted by `x`; constant
    /// outside the tabulated range.
    Tabulated { points: Vec<(f64, f64)> },
}

impl BoundingFunction {
    pub fn exponential(coefficient: f64, decay: f64) -> Result<Self> {
        if !(coefficient.is_finite() && coefficient >= 0.0) {
            return Err(Error::param(
                "coefficient",
                format!("must be finite and >= 0, got {coefficient}"),
            ));
        }
        if !(decay.is_finite() && decay > 0.0) {
            return Err(Error::param("decay", format!("must be finite and > 0, got {decay}")));
        }
        Ok(BoundingFunction::ScaledExponential { coefficient, decay })
    }

    pub fn step(threshold: f64) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::param("threshold", "must be finite"));
        }
        Ok(BoundingFunction::Step { threshold })
    }

    /// The function that is identically zero.
    pub fn zero() -> Self {
        BoundingFunction::ScaledExponential {
            coefficient: 0.0,
            decay: 1.0,
        }
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::param("points", "at least one point is required"));
        }
        if points
            .iter()
            .any(|(x, p)| !x.is_finite() || !(p.is_finite() && *p >= 0.0))
        {
            return Err(Error::param("points", "x must be finite and p finite and >= 0"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::param("points", "x must be strictly increasing"));
        }
        if points.windows(2).any(|w| w[1].1 > w[0].1) {
            return Err(Error::param("points", "p must be wide-sense decreasing"));
        }
        Ok(BoundingFunction::Tabulated { points })
    }

    /// Raw value, which may exceed 1.
    pub fn value(&self, x: f64) -> f64 {
        match self {
            BoundingFunction::ScaledExponential { coefficient, decay } => {
                if *coefficient == 0.0 {
                    0.0
                } else {
                    coefficient * (-decay * x).exp()
                }
            }
            BoundingFunction::Step { threshold } => {
                if x < *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            BoundingFunction::Tabulated { points } => interpolate(points, x),
        }
    }

    /// Value read as a probability, clamped to `[0, 1]`.
    pub fn probability(&self, x: f64) -> f64 {
        self.value(x).clamp(0.0, 1.0)
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|(px, _)| *px <= x);
    let (x0, p0) = points[i - 1];
    let (x1, p1) = points[i];
    p0 + (p1 - p0) * (x - x0) / (x1 - x0)
}

/// Min-plus convolution of two bounding functions,
/// `inf_{0 <= y <= x} f(y) + g(x - y)`.
///
/// Exponential and step kinds are handled in closed form; anything
/// involving a tabulated function is searched on a grid of `x / 1024`
/// and refined once around the best point. For `x < 0` the result is
/// `f(0) + g(0)`.
pub fn convolve_bounding(f: &BoundingFunction, g: &BoundingFunction, x: f64) -> f64 {
    use BoundingFunction::*;
    if x < 0.0 {
        return f.value(0.0) + g.value(0.0);
    }
    match (f, g) {
        (
            ScaledExponential {
                coefficient: a,
                decay: ta,
            },
            ScaledExponential {
                coefficient: b,
                decay: tb,
            },
        ) => convolve_exponentials(*a, *ta, *b, *tb, x),
        (Step { threshold }, other) | (other, Step { threshold }) => {
            convolve_step(*threshold, other, x)
        }
        _ => grid_convolution(f, g, x),
    }
}

fn convolve_exponentials(a: f64, ta: f64, b: f64, tb: f64, x: f64) -> f64 {
    if a == 0.0 {
        return b * (-tb * x).exp();
    }
    if b == 0.0 {
        return a * (-ta * x).exp();
    }
    // Stationary point of a·e^{-ta·y} + b·e^{-tb·(x-y)}; the objective is
    // convex in y so clamping to [0, x] gives the constrained minimum.
    let y = (((a * ta) / (b * tb)).ln() + tb * x) / (ta + tb);
    let y = y.clamp(0.0, x);
    a * (-ta * y).exp() + b * (-tb * (x - y)).exp()
}

fn convolve_step(threshold: f64, other: &BoundingFunction, x: f64) -> f64 {
    if threshold <= 0.0 {
        return other.value(x);
    }
    // Region y < threshold contributes 1 + other(x - y), smallest at y = 0.
    let below = 1.0 + other.value(x);
    if x >= threshold {
        below.min(other.value(x - threshold))
    } else {
        below
    }
}

fn grid_convolution(f: &BoundingFunction, g: &BoundingFunction, x: f64) -> f64 {
    if x == 0.0 {
        return f.value(0.0) + g.value(0.0);
    }
    let eval = |y: f64| f.value(y) + g.value(x - y);
    let coarse = x / GRID_STEPS as f64;
    let (k_best, mut best) = (0..=GRID_STEPS)
        .map(|k| (k, eval(k as f64 * coarse)))
        .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    let lo = k_best.saturating_sub(1) as f64 * coarse;
    let hi = ((k_best + 1).min(GRID_STEPS)) as f64 * coarse;
    let fine = (hi - lo) / GRID_STEPS as f64;
    for k in 0..=GRID_STEPS {
        let v = eval((lo + k as f64 * fine).min(x));
        if v < best {
            best = v;
        }
    }
    best
}

/// An exponential envelope `K·e^{-κx}` valid for all `x >= valid_from`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialEnvelope {
    pub coefficient: f64,
    pub decay: f64,
    pub valid_from: f64,
}

/// Exponential upper envelope of `f ⊗ g`, if both operands belong to the
/// exponential or step families. Tabulated operands have no envelope.
pub fn convolution_envelope(
    f: &BoundingFunction,
    g: &BoundingFunction,
) -> Option<ExponentialEnvelope> {
    use BoundingFunction::*;
    match (f, g) {
        (
            ScaledExponential {
                coefficient: a,
                decay: ta,
            },
            ScaledExponential {
                coefficient: b,
                decay: tb,
            },
        ) => {
            let env = if *a == 0.0 {
                (*b, *tb)
            } else if *b == 0.0 {
                (*a, *ta)
            } else {
                // Splitting at y = x·tb/(ta+tb) gives (a+b)·e^{-κx}.
                (a + b, ta * tb / (ta + tb))
            };
            Some(ExponentialEnvelope {
                coefficient: env.0,
                decay: env.1,
                valid_from: 0.0,
            })
        }
        (Step { threshold: h1 }, Step { threshold: h2 }) => Some(ExponentialEnvelope {
            coefficient: 0.0,
            decay: 1.0,
            valid_from: h1.max(0.0) + h2.max(0.0),
        }),
        (
            Step { threshold },
            ScaledExponential {
                coefficient,
                decay,
            },
        )
        | (
            ScaledExponential {
                coefficient,
                decay,
            },
            Step { threshold },
        ) => {
            let h = threshold.max(0.0);
            Some(ExponentialEnvelope {
                coefficient: coefficient * (decay * h).exp(),
                decay: *decay,
                valid_from: h,
            })
        }
        _ => None,
    }
}

/// Cumulative traffic `A(t)` sampled at slots `0..=horizon`, `A(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    cumulative: Vec<f64>,
}

impl Trace {
    pub fn new(cumulative: Vec<f64>) -> Result<Self> {
        match cumulative.first() {
            Some(v) if *v == 0.0 => {}
            _ => return Err(Error::param("cumulative", "must start with A(0) = 0")),
        }
        if cumulative.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("cumulative", "values must be finite"));
        }
        if cumulative.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("cumulative", "must be wide-sense increasing"));
        }
        Ok(Trace { cumulative })
    }

    /// Builds a trace from per-slot increments; `increments[i]` is the
    /// traffic in slot `(i, i+1]`.
    pub fn from_increments<I: IntoIterator<Item = f64>>(increments: I) -> Result<Self> {
        let mut cumulative = vec![0.0];
        let mut acc = 0.0;
        for inc in increments {
            if !(inc.is_finite() && inc >= 0.0) {
                return Err(Error::param("increments", "must be finite and >= 0"));
            }
            acc += inc;
            cumulative.push(acc);
        }
        Ok(Trace { cumulative })
    }

    pub fn horizon(&self) -> usize {
        self.cumulative.len() - 1
    }

    pub fn at(&self, t: usize) -> f64 {
        self.cumulative[t]
    }

    /// `A(s, t) = A(t) - A(s)`.
    pub fn window(&self, s: usize, t: usize) -> f64 {
        self.cumulative[t] - self.cumulative[s]
    }

    pub fn values(&self) -> &[f64] {
        &self.cumulative
    }

    fn check_slot(&self, t: usize) -> Result<()> {
        if t > self.horizon() {
            return Err(Error::BeyondHorizon {
                slot: t,
                horizon: self.horizon(),
            });
        }
        Ok(())
    }
}

/// `(A ⊗ β)(t) = min_{0 <= s <= t} A(s) + β(t - s)`.
pub fn convolve_curve(arrival: &Trace, beta: &RateCurve, t: usize) -> Result<f64> {
    arrival.check_slot(t)?;
    Ok((0..=t)
        .map(|s| arrival.at(s) + beta.eval(t - s))
        .fold(f64::INFINITY, f64::min))
}

/// Result of the virtual-delay scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Delay {
    Slots(usize),
    /// The departures never caught up within the trace horizon.
    Censored,
}

impl Delay {
    pub fn slots(self) -> Option<usize> {
        match self {
            Delay::Slots(d) => Some(d),
            Delay::Censored => None,
        }
    }
}

/// An arrival/departure pair that has been checked for causality.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePair {
    arrival: Trace,
    departure: Trace,
}

impl TracePair {
    pub fn new(arrival: Trace, departure: Trace) -> Result<Self> {
        if arrival.horizon() != departure.horizon() {
            return Err(Error::HorizonMismatch {
                arrival: arrival.horizon(),
                departure: departure.horizon(),
            });
        }
        if let Some(slot) = arrival
            .values()
            .iter()
            .zip(departure.values())
            .position(|(a, d)| d > a)
        {
            return Err(Error::CausalityViolation { slot });
        }
        Ok(TracePair { arrival, departure })
    }

    pub fn arrival(&self) -> &Trace {
        &self.arrival
    }

    pub fn departure(&self) -> &Trace {
        &self.departure
    }

    pub fn horizon(&self) -> usize {
        self.arrival.horizon()
    }

    /// `B(t) = A(t) - A*(t)`.
    pub fn backlog(&self, t: usize) -> Result<f64> {
        self.arrival.check_slot(t)?;
        Ok(self.arrival.at(t) - self.departure.at(t))
    }

    /// `D(t) = inf{τ >= 0 : A(t) <= A*(t + τ)}`.
    pub fn delay(&self, t: usize) -> Result<Delay> {
        self.arrival.check_slot(t)?;
        let target = self.arrival.at(t);
        let tail = &self.departure.values()[t..];
        // A* is increasing, so the first slot reaching the target is found
        // by bisection.
        let tau = tail.partition_point(|d| *d < target);
        Ok(if tau < tail.len() {
            Delay::Slots(tau)
        } else {
            Delay::Censored
        })
    }
}

/// Backlog at slot `t`; rejects non-causal pairs.
pub fn backlog_of(arrival: &Trace, departure: &Trace, t: usize) -> Result<f64> {
    TracePair::new(arrival.clone(), departure.clone())?.backlog(t)
}

/// Virtual delay at slot `t`; rejects non-causal pairs.
pub fn delay_of(arrival: &Trace, departure: &Trace, t: usize) -> Result<Delay> {
    TracePair::new(arrival.clone(), departure.clone())?.delay(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exp(a: f64, t: f64) -> BoundingFunction {
        BoundingFunction::exponential(a, t).unwrap()
    }

    /// Dense grid oracle for `inf_y f(y) + g(x - y)`, with the endpoints
    /// always included.
    fn oracle(f: &BoundingFunction, g: &BoundingFunction, x: f64, n: usize) -> f64 {
        (0..=n)
            .map(|k| {
                let y = x * k as f64 / n as f64;
                f.value(y) + g.value(x - y)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Two-level grid: `n` points over `[0, x]`, then `n` more between the
    /// neighbours of the coarse minimiser.
    fn refined_oracle(f: &BoundingFunction, g: &BoundingFunction, x: f64, n: usize) -> f64 {
        let h = |y: f64| f.value(y) + g.value(x - y);
        let step = x / n as f64;
        let best = (0..=n)
            .min_by(|&a, &b| h(a as f64 * step).total_cmp(&h(b as f64 * step)))
            .unwrap_or(0);
        let lo = (best as f64 - 1.0).max(0.0) * step;
        let hi = ((best + 1) as f64 * step).min(x);
        (0..=n)
            .map(|k| h(lo + (hi - lo) * k as f64 / n as f64))
            .fold(h(best as f64 * step), f64::min)
    }

    #[test]
    fn zero_service_bound_is_identity() {
        let f = exp(1.0, 1.0);
        let g = BoundingFunction::zero();
        for x in [0.0, 0.5, 1.0, 3.7, 10.0] {
            assert!((convolve_bounding(&f, &g, x) - (-x).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_decay_exponentials_meet_in_the_middle() {
        let (a, b, theta) = (3.0, 0.5, 0.8);
        let f = exp(a, theta);
        let g = exp(b, theta);
        for x in [4.0, 10.0, 25.0] {
            let closed = 2.0 * (a * b).sqrt() * (-theta * x / 2.0).exp();
            let got = convolve_bounding(&f, &g, x);
            assert!(((got - closed) / closed).abs() < 1e-12, "x={x}");
            let brute = oracle(&f, &g, x, 200_000);
            assert!(((brute - closed) / closed).abs() < 1e-6);
        }
    }

    #[test]
    fn step_with_exponential_shifts_by_threshold() {
        let f = BoundingFunction::step(1.0).unwrap();
        let g = exp(0.3, 1.2);
        for x in [1.0, 1.5, 4.0, 9.0] {
            let got = convolve_bounding(&f, &g, x);
            assert!((got - g.value(x - 1.0)).abs() < 1e-15);
            // grid oracle over y >= 1 region plus the y = 0 branch
            let brute = oracle(&f, &g, x, 100_000).min(g.value(x - 1.0));
            assert!((got - brute).abs() < 1e-12);
        }
        // Symmetric argument order.
        assert_eq!(convolve_bounding(&g, &f, 3.0), convolve_bounding(&f, &g, 3.0));
        // Below the threshold only the f = 1 branch is available.
        assert!((convolve_bounding(&f, &g, 0.5) - (1.0 + g.value(0.5))).abs() < 1e-15);
    }

    #[test]
    fn negative_slack_is_the_sum_at_zero() {
        let f = exp(2.0, 1.0);
        let g = exp(3.0, 0.5);
        assert_eq!(convolve_bounding(&f, &g, -1.0), 5.0);
    }

    #[test]
    fn tabulated_convolution_matches_dense_grid() {
        let f = BoundingFunction::tabulated(
            (0..=40).map(|i| (i as f64 * 0.5, (-(i as f64) * 0.3).exp())).collect(),
        )
        .unwrap();
        let g = exp(1.5, 0.7);
        for x in [0.0, 0.3, 2.0, 7.5, 15.0] {
            let got = convolve_bounding(&f, &g, x);
            let brute = oracle(&f, &g, x, 400_000);
            assert!(((got - brute) / brute).abs() < 1e-3, "x={x} got={got} brute={brute}");
        }
    }

    #[test]
    fn probability_is_clamped_but_value_is_raw() {
        let f = exp(55.6, 1.0);
        assert!(f.value(0.0) > 1.0);
        assert_eq!(f.probability(0.0), 1.0);
        assert!(f.probability(10.0) < 1.0);
    }

    #[test]
    fn constructors_reject_bad_input() {
        assert!(BoundingFunction::exponential(-1.0, 1.0).is_err());
        assert!(BoundingFunction::exponential(1.0, 0.0).is_err());
        assert!(BoundingFunction::tabulated(vec![(0.0, 0.5), (1.0, 0.7)]).is_err());
        assert!(RateCurve::affine(-0.1, 0.0).is_err());
        assert!(RateCurve::tabulated(vec![0.0, 2.0, 1.0]).is_err());
        assert!(Trace::new(vec![1.0, 2.0]).is_err());
        assert!(Trace::new(vec![0.0, 2.0, 1.0]).is_err());
    }

    #[test]
    fn curve_convolution_trivial_cases() {
        let a = Trace::new((0..=20).map(|t| t as f64).collect()).unwrap();
        let zero = RateCurve::affine(0.0, 0.0).unwrap();
        assert_eq!(convolve_curve(&a, &zero, 15).unwrap(), 0.0);
        let fast = RateCurve::affine(2.0, 0.0).unwrap();
        for t in 0..=20 {
            assert_eq!(convolve_curve(&a, &fast, t).unwrap(), t as f64);
        }
        assert!(convolve_curve(&a, &fast, 21).is_err());
    }

    #[test]
    fn backlog_and_delay_examples() {
        let same = Trace::new((0..=12).map(|t| t as f64).collect()).unwrap();
        for t in 0..=12 {
            assert_eq!(backlog_of(&same, &same, t).unwrap(), 0.0);
            assert_eq!(delay_of(&same, &same, t).unwrap(), Delay::Slots(0));
        }
        let a = Trace::new((0..=10).map(|t| 2.0 * t as f64).collect()).unwrap();
        let d = Trace::new((0..=10).map(|t| t as f64).collect()).unwrap();
        assert_eq!(backlog_of(&a, &d, 10).unwrap(), 10.0);

        let a = Trace::new((0..=30).map(|t| t as f64).collect()).unwrap();
        let d = Trace::new((0..=30).map(|t| (t as f64 - 3.0).max(0.0)).collect()).unwrap();
        assert_eq!(delay_of(&a, &d, 10).unwrap(), Delay::Slots(3));
        assert_eq!(delay_of(&a, &d, 28).unwrap(), Delay::Censored);
    }

    #[test]
    fn causality_violation_is_rejected() {
        let a = Trace::new(vec![0.0, 1.0, 1.0]).unwrap();
        let d = Trace::new(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(
            backlog_of(&a, &d, 1),
            Err(Error::CausalityViolation { slot: 2 })
        );
    }

    fn increments() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0u8..4, 1..200).prop_map(|v| v.into_iter().map(f64::from).collect())
    }

    fn bounding() -> impl Strategy<Value = BoundingFunction> {
        prop_oneof![
            (0.0f64..50.0, 0.01f64..3.0).prop_map(|(a, t)| exp(a, t)),
            (0.0f64..3.0).prop_map(|h| BoundingFunction::step(h).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn curve_convolution_matches_exhaustive_split(
            inc in increments(),
            rate in 0.0f64..3.0,
            burst in 0.0f64..5.0,
        ) {
            let trace = Trace::from_increments(inc).unwrap();
            let beta = RateCurve::affine(rate, burst).unwrap();
            for t in 0..=trace.horizon() {
                let mut brute = f64::INFINITY;
                for s in 0..=t {
                    brute = brute.min(trace.at(s) + burst + rate * (t - s) as f64);
                }
                let got = convolve_curve(&trace, &beta, t).unwrap();
                prop_assert!((got - brute).abs() <= 1e-12 * brute.abs().max(1.0));
            }
        }

        #[test]
        fn bounding_convolution_is_symmetric_and_decreasing(
            f in bounding(),
            g in bounding(),
            mut xs in prop::collection::vec(0.0f64..30.0, 2..20),
        ) {
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut prev = f64::INFINITY;
            for x in xs {
                let fg = convolve_bounding(&f, &g, x);
                let gf = convolve_bounding(&g, &f, x);
                prop_assert!((fg - gf).abs() <= 1e-12 * fg.abs().max(1.0));
                prop_assert!(fg <= prev * (1.0 + 1e-12) + 1e-300);
                prev = fg;
            }
        }

        #[test]
        fn exponential_convolution_matches_grid_oracle(
            a in 0.01f64..100.0, ta in 0.05f64..3.0,
            b in 0.01f64..100.0, tb in 0.05f64..3.0,
            x in 0.0f64..20.0,
        ) {
            let f = exp(a, ta);
            let g = exp(b, tb);
            let got = convolve_bounding(&f, &g, x);
            let brute = refined_oracle(&f, &g, x, 20_000);
            prop_assert!(got <= brute * (1.0 + 1e-12));
            prop_assert!((brute - got) / got < 1e-9);
        }

        #[test]
        fn envelope_dominates_convolution(
            f in bounding(), g in bounding(), x in 0.0f64..60.0,
        ) {
            let env = convolution_envelope(&f, &g).unwrap();
            if x >= env.valid_from {
                let bound = env.coefficient * (-env.decay * x).exp();
                prop_assert!(convolve_bounding(&f, &g, x) <= bound * (1.0 + 1e-12) + 1e-300);
            }
        }

        #[test]
        fn backlog_and_delay_are_nonnegative(
            inc in increments(), lag in 0usize..10,
        ) {
            let a = Trace::from_increments(inc.clone()).unwrap();
            let shifted: Vec<f64> = (0..=a.horizon())
                .map(|t| if t >= lag { a.at(t - lag) } else { 0.0 })
                .collect();
            let d = Trace::new(shifted).unwrap();
            let pair = TracePair::new(a.clone(), d.clone()).unwrap();
            for t in 0..=a.horizon() {
                prop_assert!(pair.backlog(t).unwrap() >= 0.0);
                // linear scan oracle
                let target = a.at(t);
                let scan = (0..=a.horizon() - t).find(|tau| d.at(t + tau) >= target);
                let got = pair.delay(t).unwrap();
                match scan {
                    Some(tau) => prop_assert_eq!(got, Delay::Slots(tau)),
                    None => prop_assert_eq!(got, Delay::Censored),
                }
            }
        }
    }
}
