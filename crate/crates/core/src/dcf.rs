//! 802.11 DCF analytical model: PHY timing, the attempt/collision fixed
//! point, per-idle-slot event probabilities and the impairment MGF bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ln_binomial, LogSumExp};
use crate::traffic::TrafficModel;

/// 802.11b PHY/MAC parameters. Durations are in microseconds, sizes in
/// bytes, rates in bits per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhyParams {
    pub basic_rate: f64,
    pub data_rate: f64,
    pub phy_header: u32,
    pub ack_header: u32,
    pub mac_header: u32,
    pub sifs: f64,
    pub difs: f64,
    pub idle_slot: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
}

impl Default for PhyParams {
    fn default() -> Self {
        PhyParams {
            basic_rate: 1e6,
            data_rate: 11e6,
            phy_header: 24,
            ack_header: 14,
            mac_header: 28,
            sifs: 10.0,
            difs: 50.0,
            idle_slot: 20.0,
            cw_min: 32,
            cw_max: 1024,
            retry_limit: 6,
        }
    }
}

impl PhyParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("basic_rate", self.basic_rate),
            ("data_rate", self.data_rate),
            ("sifs", self.sifs),
            ("difs", self.difs),
            ("idle_slot", self.idle_slot),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        let counts = [
            ("phy_header", self.phy_header),
            ("ack_header", self.ack_header),
            ("mac_header", self.mac_header),
            ("cw_min", self.cw_min),
            ("retry_limit", self.retry_limit),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::param(name, "must be > 0"));
            }
        }
        if self.cw_max < self.cw_min {
            return Err(Error::param("cw_max", "must be >= cw_min"));
        }
        if self.retry_limit > 30 {
            return Err(Error::param("retry_limit", "must be <= 30"));
        }
        Ok(())
    }

    /// Mean backoff per stage plus one, `b_i = min(2^i·CW_min, CW_max)/2`
    /// for `i = 0..=retry_limit`.
    pub fn backoff_means(&self) -> Vec<f64> {
        (0..=self.retry_limit)
            .map(|i| {
                let cw = (u64::from(self.cw_min) << i).min(u64::from(self.cw_max));
                cw as f64 / 2.0
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: u32,
    pub payload: u32,
    pub phy: PhyParams,
    /// `None` means every node is saturated.
    pub traffic: Option<TrafficModel>,
}

impl Scenario {
    pub fn new(n: u32, payload: u32, phy: PhyParams, traffic: Option<TrafficModel>) -> Result<Self> {
        let s = Scenario {
            n,
            payload,
            phy,
            traffic,
        };
        s.validate()?;
        Ok(s)
    }

    /// Ten saturated nodes with 256-byte payloads on default 802.11b PHY.
    pub fn scenario1() -> Self {
        Scenario {
            n: 10,
            payload: 256,
            phy: PhyParams::default(),
            traffic: None,
        }
    }

    pub fn with_traffic(mut self, traffic: Option<TrafficModel>) -> Self {
        self.traffic = traffic;
        self
    }

    pub fn with_nodes(mut self, n: u32) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n", "at least one node is required"));
        }
        if self.payload == 0 {
            return Err(Error::param("payload", "must be > 0"));
        }
        self.phy.validate()
    }
}

/// Frame durations in idle slots, and the calculus slot length `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotTiming {
    pub data: f64,
    pub ack: f64,
    pub difs: f64,
    pub sifs: f64,
    /// `L = DIFS + DATA + SIFS + ACK` in idle slots.
    pub l: f64,
    /// `L` rounded half-up, used wherever the model needs whole idle slots.
    pub l_int: u32,
    pub idle_slot_us: f64,
}

impl SlotTiming {
    /// Duration of one calculus slot in seconds.
    pub fn slot_seconds(&self) -> f64 {
        self.l * self.idle_slot_us * 1e-6
    }

    pub fn data_us(&self) -> f64 {
        self.data * self.idle_slot_us
    }

    pub fn ack_us(&self) -> f64 {
        self.ack * self.idle_slot_us
    }
}

pub fn slot_length(scenario: &Scenario) -> SlotTiming {
    let phy = &scenario.phy;
    let ack_us = f64::from(phy.phy_header + phy.ack_header) * 8.0 / phy.basic_rate * 1e6;
    let data_us = f64::from(phy.phy_header) * 8.0 / phy.basic_rate * 1e6
        + f64::from(phy.mac_header + scenario.payload) * 8.0 / phy.data_rate * 1e6;
    let slot = phy.idle_slot;
    let (data, ack, difs, sifs) = (data_us / slot, ack_us / slot, phy.difs / slot, phy.sifs / slot);
    let l = difs + data + sifs + ack;
    SlotTiming {
        data,
        ack,
        difs,
        sifs,
        l,
        l_int: (l + 0.5).floor() as u32,
        idle_slot_us: slot,
    }
}

/// Solved MAC quantities for a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcfSolution {
    pub n: u32,
    /// Attempt probability per idle slot.
    pub tau: f64,
    /// Conditional collision probability.
    pub gamma: f64,
    pub p_nt: f64,
    pub p_t: f64,
    pub p_s: f64,
    pub p_o: f64,
    pub l: f64,
    pub l_int: u32,
    pub backoff: Vec<f64>,
}

impl DcfSolution {
    /// Residuals of the two fixed-point equations.
    pub fn residuals(&self) -> (f64, f64) {
        (
            attempt_rate(self.gamma, &self.backoff) - self.tau,
            collision_probability(self.tau, self.n) - self.gamma,
        )
    }
}

/// `τ(γ) = Σ γ^i / Σ γ^i·b_i`.
fn attempt_rate(gamma: f64, backoff: &[f64]) -> f64 {
    let (mut num, mut den, mut pow) = (0.0, 0.0, 1.0);
    for b in backoff {
        num += pow;
        den += pow * b;
        pow *= gamma;
    }
    num / den
}

/// `γ(τ) = 1 - (1 - τ)^{n-1}`.
fn collision_probability(tau: f64, n: u32) -> f64 {
    1.0 - (1.0 - tau).powi(n as i32 - 1)
}

/// Solves the attempt/collision fixed point by bisection on `γ ∈ [0, 1]`.
///
/// `γ ↦ γ(τ(γ)) - γ` is strictly decreasing, nonnegative at 0 and
/// nonpositive at 1, so the root is unique.
pub fn solve_fixed_point(scenario: &Scenario) -> Result<DcfSolution> {
    scenario.validate()?;
    let backoff = scenario.phy.backoff_means();
    let n = scenario.n;
    let gamma = if n == 1 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if collision_probability(attempt_rate(mid, &backoff), n) > mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let tau = attempt_rate(gamma, &backoff);
    // Recompute γ from τ so that P_t − P_s = γ holds as an identity.
    let gamma = collision_probability(tau, n);
    let p_nt = (1.0 - tau).powi(n as i32);
    let p_t = 1.0 - p_nt;
    let p_s = tau * (1.0 - gamma);
    let timing = slot_length(scenario);
    Ok(DcfSolution {
        n,
        tau,
        gamma,
        p_nt,
        p_t,
        p_s,
        p_o: gamma,
        l: timing.l,
        l_int: timing.l_int,
        backoff,
    })
}

/// Natural log of the impairment MGF upper bound `M_raw(t, θ)`.
///
/// Over `t` calculus slots of `L` idle slots each, the first slot is taken
/// as wasted by another node; the remaining `(t-1)L` idle slots hold `i`
/// complete transmissions and possibly an incomplete one covering the last
/// `k` idle slots. Given `i` transmissions the count `j` of the node's own
/// successes is binomial, and the sum over `j` of
/// `C(i,j)(P_s/P_t)^j (P_o/P_t)^{i-j} e^{θ(t-j)}` collapses to
/// `e^{θt}·q^i` with `q = (P_s/P_t)e^{-θ} + P_o/P_t`.
pub fn impairment_log_mgf(t: u32, theta: f64, sol: &DcfSolution) -> f64 {
    if t == 0 {
        return 0.0;
    }
    let l = i64::from(sol.l_int.max(1));
    let t = i64::from(t);
    let ln_pnt = sol.p_nt.ln();
    let ln_pt = sol.p_t.ln();
    let ln_q = ((sol.p_s / sol.p_t) * (-theta).exp() + sol.p_o / sol.p_t).ln();
    let ln_transitions = |idle: i64, i: i64| -> f64 {
        let idle_term = if idle == 0 { 0.0 } else { idle as f64 * ln_pnt };
        let busy_term = if i == 0 { 0.0 } else { i as f64 * (ln_pt + ln_q) };
        ln_binomial((idle + i) as u64, i as u64) + idle_term + busy_term
    };
    let mut acc = LogSumExp::new();
    // Last transmission incomplete, occupying k >= 1 trailing idle slots.
    for k in 1..l {
        for i in 0..=(t - 2) {
            let idle = (t - i - 1) * l - k;
            acc.add(ln_pt + ln_transitions(idle, i));
        }
    }
    // Last transmission complete.
    for i in 0..t {
        let idle = (t - i - 1) * l;
        acc.add(ln_transitions(idle, i));
    }
    acc.value() + theta * t as f64
}

/// Impairment MGF upper bound `M_raw(t, θ)`; `1` for the empty interval.
pub fn impairment_mgf(t: u32, theta: f64, sol: &DcfSolution) -> f64 {
    impairment_log_mgf(t, theta, sol).exp()
}

/// `M(t) = (1/θ)·log M_raw(t, θ)` for `t = 0..=t_max`, in packets.
pub fn impairment_envelope(theta: f64, sol: &DcfSolution, t_max: u32) -> Vec<f64> {
    (0..=t_max)
        .map(|t| impairment_log_mgf(t, theta, sol) / theta)
        .collect()
}

/// Largest arrival rate a node sustains: `P_s·L / (P_nt + P_t·L)`.
pub fn stability_threshold(sol: &DcfSolution) -> f64 {
    sol.p_s * sol.l / (sol.p_nt + sol.p_t * sol.l)
}
