//! One replication of the DCF MAC on a shared channel.
//!
//! Time is kept in half-microsecond ticks. Nodes count down backoff on a
//! grid of idle slots that restarts after every busy period (DIFS after a
//! success, EIFS after a collision). Only grid boundaries are visited, so
//! idle stretches are skipped in one step.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::dcf::{slot_length, Scenario};
use crate::traffic::TrafficModel;

/// Durations of the channel phases in ticks of 0.5 µs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickTiming {
    pub slot: u64,
    pub difs: u64,
    pub sifs: u64,
    pub data: u64,
    pub ack: u64,
}

pub const TICKS_PER_US: f64 = 2.0;

fn ticks(us: f64) -> u64 {
    (us * TICKS_PER_US).round() as u64
}

impl TickTiming {
    pub fn of(scenario: &Scenario) -> Self {
        let t = slot_length(scenario);
        TickTiming {
            slot: ticks(t.idle_slot_us),
            difs: ticks(scenario.phy.difs),
            sifs: ticks(scenario.phy.sifs),
            data: ticks(t.data_us()),
            ack: ticks(t.ack_us()),
        }
    }

    /// Ticks in one calculus slot, `DIFS + DATA + SIFS + ACK`.
    pub fn calculus_slot(&self) -> u64 {
        self.difs + self.data + self.sifs + self.ack
    }

    pub fn success_busy(&self) -> u64 {
        self.data + self.sifs + self.ack
    }

    pub fn eifs(&self) -> u64 {
        self.sifs + self.ack + self.difs
    }
}

/// Where the deterministic CBR arrivals of each node start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CbrPhase {
    /// Every node's first packet arrives at time 0.
    #[default]
    Zero,
    /// Each node starts at an independent uniform offset within one period.
    Random,
}

/// Inputs of one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacParams {
    pub scenario: Scenario,
    pub end_tick: u64,
    pub cbr_phase: CbrPhase,
    /// When set, every backoff draw returns this value (capped at `CW - 1`).
    pub forced_backoff: Option<u32>,
    pub seed: u64,
}

/// One busy period on the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transmission {
    pub start: u64,
    pub end: u64,
    pub transmitters: u32,
}

/// A packet leaving its queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Departure {
    pub at: u64,
    pub arrived: u64,
    /// False for a packet dropped at the retry limit.
    pub delivered: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeLog {
    pub arrivals: Vec<u64>,
    pub departures: Vec<Departure>,
    pub delivered: u64,
    pub dropped: u64,
    pub attempts: u64,
    pub collisions: u64,
    /// Backoff counter steps consumed by attempts: the drawn value plus
    /// one for the attempt itself.
    pub backoff_steps: u64,
    pub queue_at_end: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacRun {
    pub nodes: Vec<NodeLog>,
    pub channel: Vec<Transmission>,
}

struct Node {
    queue: VecDeque<u64>,
    /// Pending backoff as `(first boundary, slots to count)`.
    backoff: Option<(u64, u64)>,
    cw: u32,
    retry: u32,
    /// Value of the last backoff draw.
    drawn: u64,
    next_arrival: u64,
    arrivals: Arrivals,
    arrival_rng: ChaCha8Rng,
    mac_rng: ChaCha8Rng,
    log: NodeLog,
}

enum Arrivals {
    None,
    Saturated,
    Poisson(Exp<f64>),
    Cbr { period: f64, phase: f64, k: u64 },
}

impl Node {
    fn fire_at(&self, slot: u64) -> Option<u64> {
        self.backoff.map(|(start, count)| start + count * slot)
    }

    fn has_packet(&self) -> bool {
        !self.queue.is_empty()
    }

    fn draw(&mut self, forced: Option<u32>) -> u64 {
        let cw = self.cw.max(1);
        let v = match forced {
            Some(v) => v.min(cw - 1),
            None => self.mac_rng.random_range(0..cw),
        };
        self.drawn = u64::from(v);
        self.drawn
    }

    /// Advances the arrival process and returns the time of the next
    /// arrival after the current one, or `u64::MAX`.
    fn advance_arrival(&mut self) -> u64 {
        match &mut self.arrivals {
            Arrivals::None | Arrivals::Saturated => u64::MAX,
            Arrivals::Poisson(exp) => {
                let gap = exp.sample(&mut self.arrival_rng);
                let next = self.next_arrival as f64 + gap;
                // Ceil keeps consecutive arrivals strictly ordered and
                // away from the current one.
                if next >= u64::MAX as f64 / 2.0 {
                    u64::MAX
                } else {
                    (next.ceil() as u64).max(self.next_arrival + 1)
                }
            }
            Arrivals::Cbr { period, phase, k } => {
                *k += 1;
                (*phase + *k as f64 * *period).round() as u64
            }
        }
    }
}

struct Channel {
    timing: TickTiming,
    /// First boundary of the current idle grid.
    origin: u64,
    /// End of the last busy period.
    idle_since: u64,
}

impl Channel {
    /// First grid boundary at or after `t`.
    fn boundary_at_or_after(&self, t: u64) -> u64 {
        if t <= self.origin {
            self.origin
        } else {
            let k = (t - self.origin).div_ceil(self.timing.slot);
            self.origin + k * self.timing.slot
        }
    }
}

fn node_rng(seed: u64, node: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64 * 2 + stream);
    rng
}

/// Runs the MAC from time 0 to `end_tick`.
pub fn simulate(p: &MacParams) -> MacRun {
    let sc = &p.scenario;
    let timing = TickTiming::of(sc);
    let slot = timing.slot;
    let l_ticks = timing.calculus_slot() as f64;
    let cw_min = sc.phy.cw_min;

    let mut nodes: Vec<Node> = (0..sc.n as usize)
        .map(|i| {
            let mut arrival_rng = node_rng(p.seed, i, 0);
            let (arrivals, first) = match sc.traffic {
                None => (Arrivals::Saturated, u64::MAX),
                Some(TrafficModel::Poisson { lambda }) if lambda > 0.0 => {
                    let exp = Exp::new(lambda / l_ticks).expect("positive rate");
                    let first = exp.sample(&mut arrival_rng).ceil() as u64;
                    (Arrivals::Poisson(exp), first)
                }
                Some(TrafficModel::Cbr { lambda }) if lambda > 0.0 => {
                    let period = l_ticks / lambda;
                    let phase = match p.cbr_phase {
                        CbrPhase::Zero => 0.0,
                        CbrPhase::Random => arrival_rng.random::<f64>() * period,
                    };
                    (Arrivals::Cbr { period, phase, k: 0 }, phase.round() as u64)
                }
                Some(_) => (Arrivals::None, u64::MAX),
            };
            Node {
                queue: VecDeque::new(),
                backoff: None,
                cw: cw_min,
                retry: 0,
                drawn: 0,
                next_arrival: first,
                arrivals,
                arrival_rng,
                mac_rng: node_rng(p.seed, i, 1),
                log: NodeLog::default(),
            }
        })
        .collect();

    let mut channel = Channel {
        timing,
        origin: timing.difs,
        idle_since: 0,
    };
    let mut log = Vec::new();

    if sc.traffic.is_none() {
        for node in &mut nodes {
            node.queue.push_back(0);
            node.log.arrivals.push(0);
            let c = node.draw(p.forced_backoff);
            node.backoff = Some((channel.origin, c));
        }
    }

    loop {
        let next_fire = nodes
            .iter()
            .filter(|n| n.has_packet())
            .filter_map(|n| n.fire_at(slot))
            .min()
            .unwrap_or(u64::MAX);
        let (arrival_node, next_arrival) = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, n.next_arrival))
            .min_by_key(|&(i, t)| (t, i))
            .unwrap_or((0, u64::MAX));
        if next_fire.min(next_arrival) >= p.end_tick {
            break;
        }
        if next_arrival <= next_fire {
            arrive(&mut nodes, arrival_node, next_arrival, &mut channel, p.forced_backoff);
        } else {
            fire(&mut nodes, next_fire, &mut channel, &mut log, p);
        }
    }

    for node in &mut nodes {
        node.log.queue_at_end = node.queue.len() as u64;
    }
    MacRun {
        nodes: nodes.into_iter().map(|n| n.log).collect(),
        channel: log,
    }
}

fn arrive(nodes: &mut [Node], i: usize, t: u64, channel: &mut Channel, forced: Option<u32>) {
    let slot = channel.timing.slot;
    let difs = channel.timing.difs;
    // A node idle since before `t` with no backoff left, or whose post-backoff
    // already expired, draws a fresh backoff for the new packet.
    let counting = |n: &Node| n.fire_at(slot).is_some_and(|f| f >= t);
    let node = &nodes[i];
    let needs_backoff = node.queue.is_empty() && !counting(node);
    if needs_backoff {
        let start = if t < channel.idle_since {
            channel.origin
        } else if nodes.iter().any(counting) || t + difs < channel.origin {
            channel.boundary_at_or_after(t + difs)
        } else {
            // Nobody else is counting: the grid starts when this node's
            // DIFS expires.
            channel.origin = t + difs;
            channel.origin
        };
        let node = &mut nodes[i];
        let c = node.draw(forced);
        node.backoff = Some((start, c));
    }
    let node = &mut nodes[i];
    node.queue.push_back(t);
    node.log.arrivals.push(t);
    node.next_arrival = node.advance_arrival();
}

fn fire(nodes: &mut [Node], s: u64, channel: &mut Channel, log: &mut Vec<Transmission>, p: &MacParams) {
    let timing = channel.timing;
    let slot = timing.slot;
    let phy = &p.scenario.phy;
    let saturated = p.scenario.traffic.is_none();

    let transmitters: Vec<usize> = nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.has_packet() && n.fire_at(slot) == Some(s))
        .map(|(i, _)| i)
        .collect();
    let success = transmitters.len() == 1;
    let (busy, defer) = if success {
        (timing.success_busy(), timing.difs)
    } else {
        (timing.data, timing.eifs())
    };
    let end = s + busy;
    log.push(Transmission {
        start: s,
        end,
        transmitters: transmitters.len() as u32,
    });
    channel.idle_since = end;
    channel.origin = end + defer;

    for (i, node) in nodes.iter_mut().enumerate() {
        let Some((start, count)) = node.backoff else {
            continue;
        };
        if transmitters.contains(&i) {
            continue;
        }
        let fire = start + count * slot;
        if start > s {
            // Joined the grid after the transmission began; nothing elapsed.
            node.backoff = Some((channel.origin, count));
        } else if fire > s {
            node.backoff = Some((channel.origin, (fire - s) / slot));
        } else {
            // Post-backoff finished with nothing to send.
            node.backoff = None;
        }
    }

    for &i in &transmitters {
        let node = &mut nodes[i];
        node.log.attempts += 1;
        node.log.backoff_steps += node.drawn + 1;
        let done = if success {
            node.log.delivered += 1;
            true
        } else {
            node.log.collisions += 1;
            node.retry += 1;
            if node.retry > phy.retry_limit {
                node.log.dropped += 1;
                true
            } else {
                node.cw = (node.cw.saturating_mul(2)).min(phy.cw_max);
                false
            }
        };
        if done {
            let arrived = node.queue.pop_front().expect("transmitter has a packet");
            node.log.departures.push(Departure {
                at: end,
                arrived,
                delivered: success,
            });
            node.cw = phy.cw_min;
            node.retry = 0;
            if saturated {
                node.queue.push_back(end);
                node.log.arrivals.push(end);
            }
        }
        let c = node.draw(p.forced_backoff);
        node.backoff = Some((channel.origin, c));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcf::Scenario;

    #[test]
    fn scenario1_ticks() {
        let t = TickTiming::of(&Scenario::scenario1());
        assert_eq!(
            (t.slot, t.difs, t.sifs, t.data, t.ack),
            (40, 100, 20, 797, 608)
        );
        assert_eq!(t.calculus_slot(), 1525);
        // A collision plus EIFS costs one calculus slot too.
        assert_eq!(t.data + t.eifs(), 1525);
    }
}
