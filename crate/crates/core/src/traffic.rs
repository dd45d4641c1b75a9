//! Arrival characterizations: MGF upper constraints, their conversion into
//! v.b.c arrival curves, and the Poisson and CBR traffic classes.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minplus::{BoundingFunction, RateCurve, Trace};

/// `(σ(θ), ρ(θ))` envelope: `(1/θ)·log E e^{θA(s,t)} <= ρ·(t-s) + σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperConstraint {
    pub theta: f64,
    pub sigma: f64,
    pub rho: f64,
}

impl UpperConstraint {
    pub fn new(theta: f64, sigma: f64, rho: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::param("theta", format!("must be > 0, got {theta}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::param("sigma", format!("must be >= 0, got {sigma}")));
        }
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::param("rho", format!("must be >= 0, got {rho}")));
        }
        Ok(UpperConstraint { theta, sigma, rho })
    }

    /// Envelope value `ρ·t + σ`.
    pub fn envelope(&self, t: f64) -> f64 {
        self.rho * t + self.sigma
    }
}

/// `A ~vb <f, α>`: the worst-window excess over `α` has tail bounded by `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VbcArrivalCurve {
    pub alpha: RateCurve,
    pub f: BoundingFunction,
}

impl VbcArrivalCurve {
    /// Rate of the affine envelope.
    pub fn rate(&self) -> f64 {
        self.alpha.rate().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrafficModel {
    Poisson { lambda: f64 },
    Cbr { lambda: f64 },
}

impl TrafficModel {
    /// A traffic model with mean rate `lambda` packets per slot. A zero rate
    /// is accepted and denotes a silent source.
    pub fn poisson(lambda: f64) -> Result<Self> {
        check_rate(lambda)?;
        Ok(TrafficModel::Poisson { lambda })
    }

    pub fn cbr(lambda: f64) -> Result<Self> {
        check_rate(lambda)?;
        Ok(TrafficModel::Cbr { lambda })
    }

    pub fn lambda(&self) -> f64 {
        match self {
            TrafficModel::Poisson { lambda } | TrafficModel::Cbr { lambda } => *lambda,
        }
    }

    /// Envelope average rate `a_A`, equal to the mean rate for both kinds.
    pub fn envelope_rate(&self) -> f64 {
        self.lambda()
    }

    pub fn name(&self) -> &'static str {
        match self {
            TrafficModel::Poisson { .. } => "poisson",
            TrafficModel::Cbr { .. } => "cbr",
        }
    }

    /// Per-slot arrival counts for `slots` calculus slots.
    ///
    /// Poisson counts are drawn independently per slot. CBR packets arrive
    /// at times `k/λ` for `k >= 0`, and a packet at time `τ` is counted in
    /// the slot ending at `ceil(τ)` (the one at `τ = 0` lands in slot 1).
    pub fn sample_increments<R: Rng + ?Sized>(&self, slots: usize, rng: &mut R) -> Vec<f64> {
        match *self {
            TrafficModel::Poisson { lambda } => {
                if lambda == 0.0 {
                    return vec![0.0; slots];
                }
                let dist = Poisson::new(lambda).expect("lambda validated");
                (0..slots).map(|_| dist.sample(rng)).collect()
            }
            TrafficModel::Cbr { lambda } => {
                let count = |t: usize| -> f64 {
                    if t == 0 || lambda == 0.0 {
                        0.0
                    } else {
                        (lambda * t as f64).ceil()
                    }
                };
                (1..=slots).map(|t| count(t) - count(t - 1)).collect()
            }
        }
    }

    pub fn sample_trace<R: Rng + ?Sized>(&self, slots: usize, rng: &mut R) -> Trace {
        Trace::from_increments(self.sample_increments(slots, rng)).expect("counts are nonnegative")
    }
}

fn check_rate(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param("lambda", format!("must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

/// Poisson traffic is `(0, λ(e^θ - 1)/θ)`-upper constrained.
pub fn poisson_constraint(lambda: f64, theta: f64) -> Result<UpperConstraint> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be > 0, got {lambda}")));
    }
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::param("theta", format!("must be > 0, got {theta}")));
    }
    UpperConstraint::new(theta, 0.0, lambda * theta.exp_m1() / theta)
}

/// CBR arrivals stay within one packet of `λt`, giving a step bounding
/// function at 1.
pub fn cbr_arrival_curve(lambda: f64) -> Result<VbcArrivalCurve> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be > 0, got {lambda}")));
    }
    Ok(VbcArrivalCurve {
        alpha: RateCurve::affine(lambda, 0.0)?,
        f: BoundingFunction::step(1.0)?,
    })
}

/// Converts an MGF constraint into a v.b.c arrival curve of rate `r`:
/// `f(x) = e^{θσ} / (1 - e^{θ(ρ - r)}) · e^{-θx}`.
pub fn vbc_from_constraint(c: &UpperConstraint, r: f64) -> Result<VbcArrivalCurve> {
    if !(r.is_finite() && r > c.rho) {
        return Err(Error::InfeasibleRate { rate: r, rho: c.rho });
    }
    let denominator = -(c.theta * (c.rho - r)).exp_m1();
    let coefficient = (c.theta * c.sigma).exp() / denominator;
    Ok(VbcArrivalCurve {
        alpha: RateCurve::affine(r, 0.0)?,
        f: BoundingFunction::exponential(coefficient, c.theta)?,
    })
}

/// `sup_{0<=s<=t} [A(s,t) - r(t-s)]` for every `t` of the trace.
pub fn worst_window_excess(trace: &Trace, r: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(trace.horizon() + 1);
    let mut w: f64 = 0.0;
    out.push(0.0);
    for t in 1..=trace.horizon() {
        w = (w + trace.window(t - 1, t) - r).max(0.0);
        out.push(w);
    }
    out
}
