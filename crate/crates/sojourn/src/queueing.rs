//! Per-round queueing.
//!
//! Every round, all players enter a single first-come-first-served queue
//! exactly once: the arrival order is a fresh uniform permutation, gaps
//! between consecutive arrivals are Exponential(lambda), and service times
//! are Exponential(mu). A player's wait W, service S, and sojourn T = W + S
//! come out of the Lindley recurrence. As players depart, public goods games
//! fire: a node's own completion can complete its group (self-centered
//! game), and it can be the final member some neighbor's group was waiting
//! on (neighbor-centered game). Each group fires exactly once per round.

use crate::error::{Error, Result};
use crate::topology::{NetworkTopology, NodeId};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp};

#[derive(Debug, Clone, Copy)]
pub struct QueueParams {
    lambda: f64,
    mu: f64,
}

impl QueueParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(
                "lambda",
                format!("arrival rate must be finite and positive, got {lambda}"),
            ));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::invalid(
                "mu",
                format!("service rate must be finite and positive, got {mu}"),
            ));
        }
        Ok(Self { lambda, mu })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Utilization rho = lambda / mu.
    pub fn utilization(&self) -> f64 {
        self.lambda / self.mu
    }
}

/// Completed timing of one round. All per-node vectors are indexed by
/// `NodeId`; the order vectors list nodes by queue position.
#[derive(Debug, Clone)]
pub struct RoundSchedule {
    arrival: Vec<f64>,
    service_start: Vec<f64>,
    service: Vec<f64>,
    departure: Vec<f64>,
    wait: Vec<f64>,
    sojourn: Vec<f64>,
    arrival_order: Vec<NodeId>,
    completion_order: Vec<NodeId>,
}

impl RoundSchedule {
    /// Assemble a schedule from explicit draws: the k-th entries of
    /// `arrival_times` (absolute, nondecreasing) and `service_times` belong
    /// to the k-th arriving node `arrival_order[k]`. Used by the sampler and
    /// by tests that force specific draws.
    pub fn assemble(
        arrival_order: Vec<NodeId>,
        arrival_times: Vec<f64>,
        service_times: Vec<f64>,
    ) -> Result<Self> {
        let n = arrival_order.len();
        if n == 0 {
            return Err(Error::EmptyInput("arrival_order"));
        }
        if arrival_times.len() != n {
            return Err(Error::LengthMismatch {
                what: "arrival_times",
                expected: n,
                actual: arrival_times.len(),
            });
        }
        if service_times.len() != n {
            return Err(Error::LengthMismatch {
                what: "service_times",
                expected: n,
                actual: service_times.len(),
            });
        }
        let mut seen = vec![false; n];
        for node in &arrival_order {
            if node.index() >= n || seen[node.index()] {
                return Err(Error::invalid(
                    "arrival_order",
                    format!("not a permutation of 0..{n} (offending node {node})"),
                ));
            }
            seen[node.index()] = true;
        }
        if !arrival_times.iter().all(|t| t.is_finite())
            || arrival_times.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::invalid(
                "arrival_times",
                "arrival times must be finite and nondecreasing",
            ));
        }
        if !service_times.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::invalid(
                "service_times",
                "draws must be finite and services strictly positive",
            ));
        }

        let mut arrival = vec![0.0; n];
        let mut service_start = vec![0.0; n];
        let mut service = vec![0.0; n];
        let mut departure = vec![0.0; n];
        let mut wait = vec![0.0; n];
        let mut sojourn = vec![0.0; n];
        let mut departure_by_position = vec![0.0; n];
        let mut previous_departure = f64::NEG_INFINITY;
        for (k, &node) in arrival_order.iter().enumerate() {
            let arr = arrival_times[k];
            let start = if previous_departure > arr {
                previous_departure
            } else {
                arr
            };
            let dep = start + service_times[k];
            previous_departure = dep;
            departure_by_position[k] = dep;
            let i = node.index();
            arrival[i] = arr;
            service_start[i] = start;
            service[i] = service_times[k];
            departure[i] = dep;
            wait[i] = start - arr;
            sojourn[i] = dep - arr;
        }

        // FCFS departures already come out nondecreasing; the stable sort is
        // the contract (ties resolve by arrival position) and costs O(n) on
        // sorted input.
        let mut positions: Vec<u32> = (0..n as u32).collect();
        positions.sort_by(|&a, &b| {
            departure_by_position[a as usize].total_cmp(&departure_by_position[b as usize])
        });
        let completion_order = positions
            .into_iter()
            .map(|k| arrival_order[k as usize])
            .collect();

        Ok(Self {
            arrival,
            service_start,
            service,
            departure,
            wait,
            sojourn,
            arrival_order,
            completion_order,
        })
    }

    pub fn n(&self) -> usize {
        self.arrival.len()
    }

    /// Arrival time of each node (indexed by `NodeId`).
    pub fn arrivals(&self) -> &[f64] {
        &self.arrival
    }

    pub fn service_starts(&self) -> &[f64] {
        &self.service_start
    }

    pub fn services(&self) -> &[f64] {
        &self.service
    }

    pub fn departures(&self) -> &[f64] {
        &self.departure
    }

    pub fn waits(&self) -> &[f64] {
        &self.wait
    }

    /// Sojourn time T = W + S of each node (indexed by `NodeId`).
    pub fn sojourns(&self) -> &[f64] {
        &self.sojourn
    }

    pub fn arrival_order(&self) -> &[NodeId] {
        &self.arrival_order
    }

    /// Nodes sorted by departure time, ties by arrival position.
    pub fn completion_order(&self) -> &[NodeId] {
        &self.completion_order
    }
}

/// Draw one round for `n` players. Consumes the stream in a fixed order:
/// arrival permutation, then arrival gaps, then service times.
pub fn draw_round_schedule<R: Rng>(
    params: &QueueParams,
    n: usize,
    rng: &mut R,
) -> Result<RoundSchedule> {
    if n == 0 {
        return Err(Error::EmptyInput("players"));
    }
    let mut order: Vec<NodeId> = (0..n as u32).map(NodeId).collect();
    order.shuffle(rng);
    let gaps = Exp::new(params.lambda).expect("validated rate");
    let mut clock = 0.0;
    let mut arrival_times = Vec::with_capacity(n);
    for _ in 0..n {
        clock += gaps.sample(rng);
        arrival_times.push(clock);
    }
    let services = Exp::new(params.mu).expect("validated rate");
    let service_times: Vec<f64> = (0..n).map(|_| services.sample(rng)).collect();
    RoundSchedule::assemble(order, arrival_times, service_times)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerKind {
    SelfCentered,
    NeighborCentered,
}

impl TriggerKind {
    pub fn label(self) -> &'static str {
        match self {
            TriggerKind::SelfCentered => "self_centered",
            TriggerKind::NeighborCentered => "neighbor_centered",
        }
    }
}

/// One game firing: the group hosted by `focal` became fully departed when
/// `triggered_by` completed service. `game_index` counts from 1 within the
/// round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GameTrigger {
    pub game_index: u32,
    pub focal: NodeId,
    pub triggered_by: NodeId,
    pub kind: TriggerKind,
}

/// Replay the completion order and report every game firing, in order.
/// When a completing node finishes its own group it fires first; then any
/// neighbor groups it completes fire in ascending neighbor order. Exactly
/// one trigger per node comes out.
pub fn trigger_sequence(
    schedule: &RoundSchedule,
    topology: &NetworkTopology,
) -> Result<Vec<GameTrigger>> {
    let n = topology.node_count();
    if schedule.n() != n {
        return Err(Error::LengthMismatch {
            what: "schedule",
            expected: n,
            actual: schedule.n(),
        });
    }
    // remaining[i] = members of group(i) still in the system; a group fires
    // exactly when its counter is decremented to zero.
    let mut remaining: Vec<i32> = (0..n)
        .map(|i| topology.degree(NodeId(i as u32)) as i32 + 1)
        .collect();
    let mut triggers = Vec::with_capacity(n);
    for &completing in schedule.completion_order() {
        remaining[completing.index()] -= 1;
        for &nb in topology.neighbors(completing) {
            remaining[nb.index()] -= 1;
        }
        if remaining[completing.index()] == 0 {
            triggers.push(GameTrigger {
                game_index: triggers.len() as u32 + 1,
                focal: completing,
                triggered_by: completing,
                kind: TriggerKind::SelfCentered,
            });
        }
        for &nb in topology.neighbors(completing) {
            if remaining[nb.index()] == 0 {
                triggers.push(GameTrigger {
                    game_index: triggers.len() as u32 + 1,
                    focal: nb,
                    triggered_by: completing,
                    kind: TriggerKind::NeighborCentered,
                });
            }
        }
    }
    debug_assert!(remaining.iter().all(|&r| r == 0));
    debug_assert_eq!(triggers.len(), n);
    Ok(triggers)
}
