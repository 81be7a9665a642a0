//! Public goods payoffs.
//!
//! Every node hosts one group (itself plus its neighbors) and plays in every
//! group that contains it. Classic mode multiplies the cooperator count:
//! each member of a size-G group with k cooperators receives r*c*k/G, and
//! cooperators pay the contribution c per group. Continuous mode replaces
//! the count with the sum of the cooperators' sojourn times, so a slow trip
//! through the queue enlarges the pot that player feeds. A node's round
//! payoff is the sum over its degree+1 group memberships; payoffs never
//! carry over between rounds.

use crate::error::{Error, Result};
use crate::queueing::RoundSchedule;
use crate::topology::{GameGroup, NetworkTopology, NodeId};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Cooperate,
    Defect,
}

impl Strategy {
    #[inline]
    pub fn is_cooperator(self) -> bool {
        matches!(self, Strategy::Cooperate)
    }

    /// Numeric form used in file output: 1 = cooperator, 0 = defector.
    pub fn as_digit(self) -> u8 {
        self.is_cooperator() as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffMode {
    Classic,
    Continuous,
}

#[derive(Debug, Clone, Copy)]
pub struct GameParams {
    r: f64,
    c: f64,
    mode: PayoffMode,
}

impl GameParams {
    pub fn new(r: f64, c: f64, mode: PayoffMode) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid(
                "r",
                format!("enhancement factor must be finite and positive, got {r}"),
            ));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid(
                "c",
                format!("contribution must be finite and positive, got {c}"),
            ));
        }
        Ok(Self { r, c, mode })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn mode(&self) -> PayoffMode {
        self.mode
    }
}

/// Per-node payoff totals for one round.
#[derive(Debug, Clone)]
pub struct PayoffLedger {
    totals: Vec<f64>,
}

impl PayoffLedger {
    pub fn total(&self, node: NodeId) -> f64 {
        self.totals[node.index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.totals
    }

    pub fn mean(&self) -> f64 {
        self.totals.iter().sum::<f64>() / self.totals.len() as f64
    }
}

fn member_strategy(strategies: &[Strategy], node: NodeId) -> Result<Strategy> {
    strategies
        .get(node.index())
        .copied()
        .ok_or(Error::MissingEntry {
            what: "strategies",
            node: node.0,
            len: strategies.len(),
        })
}

/// Payoffs one classic game hands each group member, aligned with
/// `group.members`.
pub fn group_payoff_classic(
    group: &GameGroup,
    strategies: &[Strategy],
    params: &GameParams,
) -> Result<Vec<f64>> {
    let mut cooperators = 0usize;
    for &m in &group.members {
        cooperators += member_strategy(strategies, m)?.is_cooperator() as usize;
    }
    let share = params.r * params.c * cooperators as f64 / group.members.len() as f64;
    group
        .members
        .iter()
        .map(|&m| Ok(share - params.c * f64::from(strategies[m.index()].is_cooperator() as u8)))
        .collect()
}

/// Payoffs one continuous game hands each member: the pot is the sum of the
/// cooperating members' sojourn times. `sojourns` is indexed by `NodeId`.
pub fn group_payoff_continuous(
    group: &GameGroup,
    strategies: &[Strategy],
    sojourns: &[f64],
    params: &GameParams,
) -> Result<Vec<f64>> {
    let mut pot = 0.0;
    for &m in &group.members {
        if member_strategy(strategies, m)?.is_cooperator() {
            pot += sojourns
                .get(m.index())
                .copied()
                .ok_or(Error::MissingEntry {
                    what: "sojourns",
                    node: m.0,
                    len: sojourns.len(),
                })?;
        }
    }
    let share = params.r * params.c * pot / group.members.len() as f64;
    Ok(group
        .members
        .iter()
        .map(|&m| share - params.c * f64::from(strategies[m.index()].is_cooperator() as u8))
        .collect())
}

/// Total round payoff of every node: each group deposits its share into all
/// of its members, and cooperators pay c once per group they belong to.
/// Groups are processed in ascending focal order so sums are bit-stable.
pub fn accumulate_round(
    topology: &NetworkTopology,
    strategies: &[Strategy],
    schedule: &RoundSchedule,
    params: &GameParams,
) -> Result<PayoffLedger> {
    let n = topology.node_count();
    if strategies.len() != n {
        return Err(Error::LengthMismatch {
            what: "strategies",
            expected: n,
            actual: strategies.len(),
        });
    }
    if schedule.n() != n {
        return Err(Error::LengthMismatch {
            what: "schedule",
            expected: n,
            actual: schedule.n(),
        });
    }
    let sojourns = schedule.sojourns();
    let mut totals = vec![0.0; n];
    for i in 0..n {
        let focal = NodeId(i as u32);
        let nbrs = topology.neighbors(focal);
        let size = (nbrs.len() + 1) as f64;
        let mut pot = 0.0;
        match params.mode {
            PayoffMode::Classic => {
                pot += f64::from(strategies[i].is_cooperator() as u8);
                for &nb in nbrs {
                    pot += f64::from(strategies[nb.index()].is_cooperator() as u8);
                }
            }
            PayoffMode::Continuous => {
                if strategies[i].is_cooperator() {
                    pot += sojourns[i];
                }
                for &nb in nbrs {
                    if strategies[nb.index()].is_cooperator() {
                        pot += sojourns[nb.index()];
                    }
                }
            }
        }
        let share = params.r * params.c * pot / size;
        totals[i] += share - params.c * f64::from(strategies[i].is_cooperator() as u8);
        for &nb in nbrs {
            totals[nb.index()] +=
                share - params.c * f64::from(strategies[nb.index()].is_cooperator() as u8);
        }
    }
    Ok(PayoffLedger { totals })
}
