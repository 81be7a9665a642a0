//! Strategy evolution. Each round couples the queue schedule to payoffs,
//! refreshes reputations from the strategies just played, then runs a
//! synchronous imitation sweep in which players copy a neighbor with a
//! payoff-difference (Fermi) probability. Model choice is optionally
//! biased toward high-reputation neighbors.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::payoff::{accumulate_round, GameParams, PayoffLedger, Strategy};
use crate::queueing::{
    draw_round_schedule, trigger_sequence, GameTrigger, QueueParams, RoundSchedule,
};
use crate::rng;
use crate::topology::{NetworkTopology, NodeId};

/// Reputation gained by one round of cooperation; defection halves the
/// score instead. Scores live in [0, 1].
pub const REPUTATION_INCREMENT: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct EvolutionParams {
    kappa: f64,
    p_r: f64,
    max_steps: u32,
    tail_window: u32,
}

impl EvolutionParams {
    /// `kappa` is the Fermi noise temperature, `p_r` the probability that
    /// model choice follows reputation instead of a uniform draw,
    /// `max_steps` the round budget (0 means observe the initial state
    /// only), and `tail_window` how many final rounds the summary
    /// cooperator share averages over.
    pub fn new(kappa: f64, p_r: f64, max_steps: u32, tail_window: u32) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::invalid(
                "kappa",
                format!("noise temperature must be finite and positive, got {kappa}"),
            ));
        }
        if !(p_r.is_finite() && (0.0..=1.0).contains(&p_r)) {
            return Err(Error::invalid(
                "p_r",
                format!("reputation guidance probability must lie in [0, 1], got {p_r}"),
            ));
        }
        if tail_window == 0 {
            return Err(Error::invalid(
                "tail_window",
                "tail window must be at least 1",
            ));
        }
        if max_steps > 0 && tail_window > max_steps {
            return Err(Error::invalid(
                "tail_window",
                format!("tail window {tail_window} exceeds the step budget {max_steps}"),
            ));
        }
        Ok(Self {
            kappa,
            p_r,
            max_steps,
            tail_window,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn p_r(&self) -> f64 {
        self.p_r
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps
    }

    pub fn tail_window(&self) -> u32 {
        self.tail_window
    }
}

/// Strategies and reputation scores, indexed by node.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub strategies: Vec<Strategy>,
    pub reputations: Vec<f64>,
}

impl Population {
    pub fn new(strategies: Vec<Strategy>, reputations: Vec<f64>) -> Result<Self> {
        if strategies.is_empty() {
            return Err(Error::EmptyInput("strategies"));
        }
        if reputations.len() != strategies.len() {
            return Err(Error::LengthMismatch {
                what: "reputations",
                expected: strategies.len(),
                actual: reputations.len(),
            });
        }
        if reputations.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::invalid(
                "reputations",
                "reputation scores must lie in [0, 1]",
            ));
        }
        Ok(Self {
            strategies,
            reputations,
        })
    }

    pub fn n(&self) -> usize {
        self.strategies.len()
    }

    pub fn cooperator_count(&self) -> usize {
        self.strategies.iter().filter(|s| s.is_cooperator()).count()
    }

    pub fn cooperator_fraction(&self) -> f64 {
        self.cooperator_count() as f64 / self.n() as f64
    }
}

/// Fair strategy coin, then a uniform reputation score, node by node.
pub fn init_population<R: Rng>(n: usize, rng: &mut R) -> Population {
    let mut strategies = Vec::with_capacity(n);
    let mut reputations = Vec::with_capacity(n);
    for _ in 0..n {
        strategies.push(if rng.random_bool(0.5) {
            Strategy::Cooperate
        } else {
            Strategy::Defect
        });
        reputations.push(rng.random());
    }
    Population {
        strategies,
        reputations,
    }
}

/// Cooperation earns a fixed increment (capped at 1), defection halves.
pub fn update_reputation(current: f64, played: Strategy) -> f64 {
    match played {
        Strategy::Cooperate => (current + REPUTATION_INCREMENT).min(1.0),
        Strategy::Defect => current / 2.0,
    }
}

/// Probability that a player with payoff `own` copies a model with payoff
/// `model`: 1 / (1 + exp((own - model) / kappa)). Both branches keep the
/// exponent nonpositive so extreme payoff gaps saturate to 0 or 1 instead
/// of overflowing.
pub fn fermi_adopt_probability(own: f64, model: f64, kappa: f64) -> f64 {
    let x = (own - model) / kappa;
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Pick the neighbor to compare against. With probability `p_r` the
/// highest-reputation neighbor wins (ties split uniformly), otherwise a
/// uniform neighbor. The guidance coin is drawn unconditionally, even at
/// p_r = 0, so runs differing only in p_r share their random numbers.
pub fn select_model_neighbor<R: Rng>(
    focal: NodeId,
    neighbors: &[NodeId],
    reputations: &[f64],
    p_r: f64,
    rng: &mut R,
) -> Result<NodeId> {
    if neighbors.is_empty() {
        return Err(Error::NoNeighbors { node: focal.0 });
    }
    let coin: f64 = rng.random();
    if coin >= p_r {
        return Ok(neighbors[rng.random_range(0..neighbors.len())]);
    }
    let mut best = f64::NEG_INFINITY;
    let mut ties = 0usize;
    let mut sole = neighbors[0];
    for &u in neighbors {
        let rep = reputations[u.index()];
        if rep > best {
            best = rep;
            ties = 1;
            sole = u;
        } else if rep == best {
            ties += 1;
        }
    }
    if ties == 1 {
        return Ok(sole);
    }
    let pick = rng.random_range(0..ties);
    let mut seen = 0usize;
    for &u in neighbors {
        if reputations[u.index()] == best {
            if seen == pick {
                return Ok(u);
            }
            seen += 1;
        }
    }
    unreachable!("tie count out of sync with the reputation table");
}

/// One synchronous imitation sweep: every player chooses a model and rolls
/// the Fermi coin against the pre-sweep state, and all adoptions land at
/// once, so no update feeds into another decision within the sweep.
/// Returns how many players switched strategy.
pub fn synchronous_imitation<R: Rng>(
    topology: &NetworkTopology,
    strategies: &mut [Strategy],
    payoffs: &[f64],
    reputations: &[f64],
    params: &EvolutionParams,
    rng: &mut R,
) -> Result<usize> {
    let n = topology.node_count();
    if strategies.len() != n {
        return Err(Error::LengthMismatch {
            what: "strategies",
            expected: n,
            actual: strategies.len(),
        });
    }
    if payoffs.len() != n {
        return Err(Error::LengthMismatch {
            what: "payoffs",
            expected: n,
            actual: payoffs.len(),
        });
    }
    if reputations.len() != n {
        return Err(Error::LengthMismatch {
            what: "reputations",
            expected: n,
            actual: reputations.len(),
        });
    }
    let mut next = strategies.to_vec();
    for (i, slot) in next.iter_mut().enumerate() {
        let focal = NodeId(i as u32);
        let model = select_model_neighbor(
            focal,
            topology.neighbors(focal),
            reputations,
            params.p_r,
            rng,
        )?;
        let p = fermi_adopt_probability(payoffs[i], payoffs[model.index()], params.kappa);
        if rng.random::<f64>() < p {
            *slot = strategies[model.index()];
        }
    }
    let mut switched = 0;
    for (slot, new) in strategies.iter_mut().zip(next) {
        if *slot != new {
            switched += 1;
        }
        *slot = new;
    }
    Ok(switched)
}

/// Observables of one round, all taken before the imitation sweep moved
/// anything: these describe the population that actually played it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub rho_c: f64,
    pub n_c: usize,
    pub mean_payoff: f64,
    /// The population was uniform this round; the sweep was skipped since
    /// imitation can never leave a uniform state.
    pub absorbed: bool,
}

/// One full round: queue schedule, payoffs, reputation refresh, stats,
/// then the imitation sweep (skipped once the population is uniform).
pub fn step<R: Rng>(
    topology: &NetworkTopology,
    queue: &QueueParams,
    game: &GameParams,
    evo: &EvolutionParams,
    population: &mut Population,
    rng: &mut R,
) -> Result<StepStats> {
    let (stats, _, _) = step_inner(topology, queue, game, evo, population, rng)?;
    Ok(stats)
}

fn step_inner<R: Rng>(
    topology: &NetworkTopology,
    queue: &QueueParams,
    game: &GameParams,
    evo: &EvolutionParams,
    population: &mut Population,
    rng: &mut R,
) -> Result<(StepStats, RoundSchedule, PayoffLedger)> {
    let n = topology.node_count();
    if population.n() != n {
        return Err(Error::LengthMismatch {
            what: "population",
            expected: n,
            actual: population.n(),
        });
    }
    let schedule = draw_round_schedule(queue, n, rng)?;
    let payoffs = accumulate_round(topology, &population.strategies, &schedule, game)?;
    for (rep, &played) in population
        .reputations
        .iter_mut()
        .zip(&population.strategies)
    {
        *rep = update_reputation(*rep, played);
    }
    let n_c = population.cooperator_count();
    let stats = StepStats {
        rho_c: n_c as f64 / n as f64,
        n_c,
        mean_payoff: payoffs.mean(),
        absorbed: n_c == 0 || n_c == n,
    };
    if !stats.absorbed {
        synchronous_imitation(
            topology,
            &mut population.strategies,
            payoffs.as_slice(),
            &population.reputations,
            evo,
            rng,
        )?;
    }
    Ok((stats, schedule, payoffs))
}

/// One trajectory row per round played, recorded before imitation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub step: u32,
    pub rho_c: f64,
    pub n_c: usize,
    pub mean_payoff: f64,
}

/// What to record beyond the per-step trajectory. The default captures
/// nothing extra, which is what parameter sweeps use.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaptureSpec {
    /// Steps at which to snapshot the strategy grid. Step 0 is the initial
    /// state; step t is the state that played round t.
    pub snapshot_steps: Vec<u32>,
    /// Record per-node payoffs for rounds 1..=payoff_window.
    pub payoff_window: u32,
    /// Record queue timings and the game-trigger sequence for rounds
    /// 1..=queue_trace_rounds.
    pub queue_trace_rounds: u32,
    /// Histogram of cooperator counts over this many final trajectory
    /// rows; 0 disables it.
    pub cooperator_histogram_window: u32,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub replicate: u32,
    pub initial_rho_c: f64,
    /// Absorbing value if the run absorbed, initial share if no rounds
    /// were played, otherwise the tail-window average.
    pub summary_rho_c: f64,
    /// Round at which the population went uniform, if it did.
    pub exit_step: Option<u32>,
    pub trajectory: Vec<TrajectoryRow>,
    pub snapshots: Vec<(u32, Vec<Strategy>)>,
    /// (round, strategies played, per-node totals) for captured rounds.
    pub payoff_traces: Vec<(u32, Vec<Strategy>, PayoffLedger)>,
    pub queue_traces: Vec<(u32, RoundSchedule)>,
    pub game_traces: Vec<(u32, Vec<GameTrigger>)>,
    /// (cooperator count, occurrences) over the final window, ascending.
    pub cooperator_histogram: Vec<(usize, u64)>,
}

/// Run one replicate to its step budget or absorption. All randomness is
/// derived from (master_seed, replicate, round), so a replicate is fully
/// reproducible in isolation.
pub fn run(
    topology: &NetworkTopology,
    queue: &QueueParams,
    game: &GameParams,
    evo: &EvolutionParams,
    master_seed: u64,
    replicate: u32,
    capture: &CaptureSpec,
) -> Result<RunOutput> {
    let n = topology.node_count();
    let mut population = init_population(n, &mut rng::init_rng(master_seed, replicate));
    let initial_rho_c = population.cooperator_fraction();

    let mut trajectory = Vec::new();
    let mut snapshots = Vec::new();
    let mut payoff_traces = Vec::new();
    let mut queue_traces = Vec::new();
    let mut game_traces = Vec::new();
    if capture.snapshot_steps.contains(&0) {
        snapshots.push((0, population.strategies.clone()));
    }

    let mut exit_step = None;
    let mut absorbed_at = None;
    for t in 1..=evo.max_steps {
        let want_payoffs = t <= capture.payoff_window;
        let want_snapshot = capture.snapshot_steps.contains(&t);
        // The sweep overwrites strategies, so anything reporting on the
        // round as played needs a copy taken now.
        let played = (want_payoffs || want_snapshot).then(|| population.strategies.clone());

        let mut stream = rng::round_rng(master_seed, replicate, t);
        let (stats, schedule, payoffs) =
            step_inner(topology, queue, game, evo, &mut population, &mut stream)?;
        trajectory.push(TrajectoryRow {
            step: t,
            rho_c: stats.rho_c,
            n_c: stats.n_c,
            mean_payoff: stats.mean_payoff,
        });
        if let Some(played) = played {
            if want_snapshot {
                snapshots.push((t, played.clone()));
            }
            if want_payoffs {
                payoff_traces.push((t, played, payoffs));
            }
        }
        if t <= capture.queue_trace_rounds {
            game_traces.push((t, trigger_sequence(&schedule, topology)?));
            queue_traces.push((t, schedule));
        }
        if stats.absorbed {
            exit_step = Some(t);
            absorbed_at = Some(if stats.n_c == n { 1.0 } else { 0.0 });
            break;
        }
    }

    let summary_rho_c = if let Some(value) = absorbed_at {
        value
    } else if trajectory.is_empty() {
        initial_rho_c
    } else {
        let tail = (evo.tail_window as usize).min(trajectory.len());
        let rows = &trajectory[trajectory.len() - tail..];
        rows.iter().map(|row| row.rho_c).sum::<f64>() / rows.len() as f64
    };

    let mut cooperator_histogram = Vec::new();
    if capture.cooperator_histogram_window > 0 && !trajectory.is_empty() {
        let w = (capture.cooperator_histogram_window as usize).min(trajectory.len());
        let mut counts = BTreeMap::new();
        for row in &trajectory[trajectory.len() - w..] {
            *counts.entry(row.n_c).or_insert(0u64) += 1;
        }
        cooperator_histogram = counts.into_iter().collect();
    }

    Ok(RunOutput {
        replicate,
        initial_rho_c,
        summary_rho_c,
        exit_step,
        trajectory,
        snapshots,
        payoff_traces,
        queue_traces,
        game_traces,
        cooperator_histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::PayoffMode;
    use crate::payoff::Strategy::{Cooperate as C, Defect as D};
    use proptest::prelude::*;

    fn evo(kappa: f64, p_r: f64, max_steps: u32, tail: u32) -> EvolutionParams {
        EvolutionParams::new(kappa, p_r, max_steps, tail).unwrap()
    }

    #[test]
    fn params_reject_bad_values() {
        assert!(EvolutionParams::new(0.0, 0.0, 10, 5).is_err());
        assert!(EvolutionParams::new(f64::NAN, 0.0, 10, 5).is_err());
        assert!(EvolutionParams::new(0.5, -0.1, 10, 5).is_err());
        assert!(EvolutionParams::new(0.5, 1.1, 10, 5).is_err());
        assert!(EvolutionParams::new(0.5, 0.0, 10, 0).is_err());
        assert!(EvolutionParams::new(0.5, 0.0, 10, 11).is_err());
        // A zero step budget places no bound on the tail window.
        assert!(EvolutionParams::new(0.5, 0.0, 0, 500).is_ok());
        assert!(EvolutionParams::new(0.5, 1.0, 10, 10).is_ok());
    }

    #[test]
    fn fermi_matches_hand_computed_values() {
        // Payoff gap of 1 at kappa = 0.5: 1/(1 + e^-2) and 1/(1 + e^2).
        let up = fermi_adopt_probability(1.0, 2.0, 0.5);
        assert!((up - 0.8807970779778823).abs() < 1e-12);
        let down = fermi_adopt_probability(2.0, 1.0, 0.5);
        assert!((down - 0.11920292202211755).abs() < 1e-12);
        assert_eq!(fermi_adopt_probability(3.0, 3.0, 0.5), 0.5);
        assert!((up + down - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fermi_saturates_without_overflow() {
        assert_eq!(fermi_adopt_probability(0.0, 1e6, 0.5), 1.0);
        assert_eq!(fermi_adopt_probability(1e6, 0.0, 0.5), 0.0);
        // Tiny temperature turns the rule into a sharp threshold.
        assert!(fermi_adopt_probability(0.0, 1.0, 1e-9) > 1.0 - 1e-12);
        assert!(fermi_adopt_probability(1.0, 0.0, 1e-9) < 1e-12);
    }

    #[test]
    fn reputation_updates_match_hand_values() {
        assert!((update_reputation(0.3, C) - 0.35).abs() < 1e-12);
        assert_eq!(update_reputation(0.98, C), 1.0);
        assert_eq!(update_reputation(1.0, C), 1.0);
        assert_eq!(update_reputation(0.8, D), 0.4);
        assert_eq!(update_reputation(0.0, D), 0.0);
    }

    #[test]
    fn reputation_saturates_under_sustained_play() {
        let mut rep = 0.0;
        for _ in 0..25 {
            rep = update_reputation(rep, C);
        }
        assert_eq!(rep, 1.0);
        for _ in 0..80 {
            rep = update_reputation(rep, D);
        }
        assert!((0.0..1e-20).contains(&rep));
    }

    #[test]
    fn initial_population_is_balanced_and_in_range() {
        let mut stream = rng::init_rng(7, 0);
        let pop = init_population(10_000, &mut stream);
        assert_eq!(pop.n(), 10_000);
        let share = pop.cooperator_fraction();
        assert!((0.48..=0.52).contains(&share), "share = {share}");
        assert!(pop.reputations.iter().all(|r| (0.0..1.0).contains(r)));
        let mean: f64 = pop.reputations.iter().sum::<f64>() / 10_000.0;
        assert!((mean - 0.5).abs() < 0.02);
    }

    #[test]
    fn initial_population_is_seed_deterministic() {
        let a = init_population(500, &mut rng::init_rng(11, 3));
        let b = init_population(500, &mut rng::init_rng(11, 3));
        assert_eq!(a, b);
        let c = init_population(500, &mut rng::init_rng(11, 4));
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_selection_visits_every_neighbor() {
        let star = NetworkTopology::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let reps = [0.1, 0.9, 0.2, 0.3, 0.4];
        let mut stream = rng::init_rng(5, 0);
        let mut counts = [0usize; 5];
        for _ in 0..4000 {
            let pick = select_model_neighbor(
                NodeId(0),
                star.neighbors(NodeId(0)),
                &reps,
                0.0,
                &mut stream,
            )
            .unwrap();
            counts[pick.index()] += 1;
        }
        assert_eq!(counts[0], 0);
        for &c in &counts[1..] {
            assert!(c > 700, "counts = {counts:?}");
        }
    }

    #[test]
    fn reputation_guided_selection_takes_the_argmax() {
        let star = NetworkTopology::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let reps = [0.95, 0.2, 0.8, 0.3, 0.4];
        let mut stream = rng::init_rng(5, 1);
        for _ in 0..200 {
            let pick = select_model_neighbor(
                NodeId(0),
                star.neighbors(NodeId(0)),
                &reps,
                1.0,
                &mut stream,
            )
            .unwrap();
            // Node 0's own 0.95 never competes; node 2 holds the max.
            assert_eq!(pick, NodeId(2));
        }
    }

    #[test]
    fn reputation_ties_split_uniformly() {
        let star = NetworkTopology::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let reps = [0.0, 1.0, 0.3, 1.0, 1.0];
        let mut stream = rng::init_rng(6, 0);
        let mut counts = [0usize; 5];
        for _ in 0..3000 {
            let pick = select_model_neighbor(
                NodeId(0),
                star.neighbors(NodeId(0)),
                &reps,
                1.0,
                &mut stream,
            )
            .unwrap();
            counts[pick.index()] += 1;
        }
        assert_eq!(counts[2], 0);
        for &c in [counts[1], counts[3], counts[4]].iter() {
            assert!(c > 850, "counts = {counts:?}");
        }
    }

    #[test]
    fn selection_is_invariant_under_monotone_reputation_transforms() {
        let star = NetworkTopology::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let reps = [0.0, 1.0, 0.3, 1.0, 0.25];
        let squeezed: Vec<f64> = reps.iter().map(|r| r / 2.0 + 0.25).collect();
        let base = rng::init_rng(9, 0);
        for trial in 0..300u64 {
            let mut s1 = base.clone();
            let mut s2 = base.clone();
            for _ in 0..trial % 7 {
                let _: f64 = s1.random();
                let _: f64 = s2.random();
            }
            let a =
                select_model_neighbor(NodeId(0), star.neighbors(NodeId(0)), &reps, 0.7, &mut s1)
                    .unwrap();
            let b = select_model_neighbor(
                NodeId(0),
                star.neighbors(NodeId(0)),
                &squeezed,
                0.7,
                &mut s2,
            )
            .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn selection_errors_without_neighbors() {
        let reps = [0.5];
        let mut stream = rng::init_rng(1, 0);
        let err = select_model_neighbor(NodeId(0), &[], &reps, 0.5, &mut stream).unwrap_err();
        assert!(matches!(err, Error::NoNeighbors { node: 0 }));
    }

    #[test]
    fn imitation_sweep_is_synchronous() {
        // Star center 0 between 1 and 2. Payoff gaps are huge, so all
        // Fermi coins are forced: 0 copies the richer 2 (reputation-guided,
        // p_r = 1) and 1 copies 0. Under a sequential sweep 1 would see 0
        // already flipped to Defect and the result would be uniform; the
        // synchronous sweep must hand 1 the strategy 0 actually played.
        let topo = NetworkTopology::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        let mut strategies = vec![C, D, D];
        let payoffs = [1000.0, 0.0, 2000.0];
        let reputations = [0.5, 0.1, 0.9];
        let params = evo(0.5, 1.0, 10, 1);
        let mut stream = rng::round_rng(1, 0, 1);
        let switched = synchronous_imitation(
            &topo,
            &mut strategies,
            &payoffs,
            &reputations,
            &params,
            &mut stream,
        )
        .unwrap();
        assert_eq!(strategies, vec![D, C, D]);
        assert_eq!(switched, 2);
    }

    #[test]
    fn imitation_validates_lengths() {
        let topo = NetworkTopology::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        let params = evo(0.5, 0.0, 10, 1);
        let mut stream = rng::round_rng(1, 0, 1);
        let mut short = vec![C, D];
        let err = synchronous_imitation(
            &topo,
            &mut short,
            &[0.0, 0.0, 0.0],
            &[0.5, 0.5, 0.5],
            &params,
            &mut stream,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::LengthMismatch {
                what: "strategies",
                ..
            }
        ));
        let mut full = vec![C, D, D];
        let err = synchronous_imitation(
            &topo,
            &mut full,
            &[0.0, 0.0],
            &[0.5, 0.5, 0.5],
            &params,
            &mut stream,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::LengthMismatch {
                what: "payoffs",
                ..
            }
        ));
    }

    #[test]
    fn absorbed_populations_skip_the_sweep() {
        let topo = NetworkTopology::lattice(3).unwrap();
        let queue = QueueParams::new(2.0, 3.0).unwrap();
        let game = GameParams::new(4.0, 1.0, PayoffMode::Continuous).unwrap();
        let params = evo(0.5, 0.0, 10, 1);
        for uniform in [C, D] {
            let mut pop = Population::new(vec![uniform; 9], vec![0.5; 9]).unwrap();
            let mut stream = rng::round_rng(3, 0, 1);
            let stats = step(&topo, &queue, &game, &params, &mut pop, &mut stream).unwrap();
            assert!(stats.absorbed);
            assert_eq!(stats.rho_c, if uniform == C { 1.0 } else { 0.0 });
            assert!(pop.strategies.iter().all(|&s| s == uniform));
        }
    }

    #[test]
    fn step_reports_the_round_as_played() {
        let topo = NetworkTopology::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let queue = QueueParams::new(2.0, 3.0).unwrap();
        let game = GameParams::new(4.0, 1.0, PayoffMode::Continuous).unwrap();
        let params = evo(0.5, 0.0, 10, 1);
        let mut pop = Population::new(vec![C, D, C], vec![0.6, 0.6, 0.98]).unwrap();
        let mut stream = rng::round_rng(8, 0, 1);
        let stats = step(&topo, &queue, &game, &params, &mut pop, &mut stream).unwrap();
        // Stats describe the [C, D, C] state even if the sweep then moved.
        assert_eq!(stats.n_c, 2);
        assert!((stats.rho_c - 2.0 / 3.0).abs() < 1e-15);
        assert!(!stats.absorbed);
        // Reputations follow the strategies that played this round.
        assert!((pop.reputations[0] - 0.65).abs() < 1e-12);
        assert!((pop.reputations[1] - 0.3).abs() < 1e-12);
        assert_eq!(pop.reputations[2], 1.0);
    }

    #[test]
    fn runs_are_reproducible_per_seed_and_replicate() {
        let topo = NetworkTopology::lattice(6).unwrap();
        let queue = QueueParams::new(2.0, 2.6).unwrap();
        let game = GameParams::new(3.0, 1.0, PayoffMode::Continuous).unwrap();
        let params = evo(0.5, 0.1, 40, 10);
        let capture = CaptureSpec {
            snapshot_steps: vec![0, 20],
            ..CaptureSpec::default()
        };
        let a = run(&topo, &queue, &game, &params, 99, 2, &capture).unwrap();
        let b = run(&topo, &queue, &game, &params, 99, 2, &capture).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.snapshots, b.snapshots);
        assert_eq!(a.summary_rho_c, b.summary_rho_c);
        let other = run(&topo, &queue, &game, &params, 99, 3, &capture).unwrap();
        assert_ne!(a.trajectory, other.trajectory);
    }

    #[test]
    fn trajectory_counts_cooperators_exactly() {
        let topo = NetworkTopology::lattice(6).unwrap();
        let queue = QueueParams::new(2.0, 2.6).unwrap();
        let game = GameParams::new(3.0, 1.0, PayoffMode::Continuous).unwrap();
        let params = evo(0.5, 0.0, 60, 10);
        let out = run(&topo, &queue, &game, &params, 4, 0, &CaptureSpec::default()).unwrap();
        assert!(!out.trajectory.is_empty());
        for (i, row) in out.trajectory.iter().enumerate() {
            assert_eq!(row.step, i as u32 + 1);
            assert!(row.n_c <= 36);
            assert_eq!(row.rho_c, row.n_c as f64 / 36.0);
            assert!(row.mean_payoff.is_finite());
        }
    }

    // A 10x10 lattice is small enough that sojourn noise lets either
    // strategy fix by fluke, so the directional checks use 20x20.
    #[test]
    fn rich_public_goods_fix_cooperation() {
        let topo = NetworkTopology::lattice(20).unwrap();
        let queue = QueueParams::new(2.0, 3.0).unwrap();
        let game = GameParams::new(6.0, 1.0, PayoffMode::Continuous).unwrap();
        let params = evo(0.5, 0.0, 3000, 100);
        let out = run(&topo, &queue, &game, &params, 0, 0, &CaptureSpec::default()).unwrap();
        assert_eq!(out.summary_rho_c, 1.0);
        let exit = out.exit_step.expect("should absorb at all-cooperate");
        assert_eq!(out.trajectory.len() as u32, exit);
        assert_eq!(out.trajectory.last().unwrap().rho_c, 1.0);
    }

    #[test]
    fn lean_public_goods_erase_cooperation() {
        let topo = NetworkTopology::lattice(20).unwrap();
        let queue = QueueParams::new(2.0, 3.0).unwrap();
        let game = GameParams::new(1.2, 1.0, PayoffMode::Continuous).unwrap();
        let params = evo(0.5, 0.0, 3000, 100);
        let out = run(&topo, &queue, &game, &params, 0, 0, &CaptureSpec::default()).unwrap();
        assert_eq!(out.summary_rho_c, 0.0);
        assert!(out.exit_step.is_some());
        assert_eq!(out.trajectory.last().unwrap().rho_c, 0.0);
    }

    #[test]
    fn zero_step_budget_reports_the_initial_state() {
        let topo = NetworkTopology::lattice(4).unwrap();
        let queue = QueueParams::new(2.0, 3.0).unwrap();
        let game = GameParams::new(4.0, 1.0, PayoffMode::Continuous).unwrap();
        let params = evo(0.5, 0.0, 0, 500);
        let out = run(
            &topo,
            &queue,
            &game,
            &params,
            13,
            0,
            &CaptureSpec::default(),
        )
        .unwrap();
        assert!(out.trajectory.is_empty());
        assert_eq!(out.exit_step, None);
        assert_eq!(out.summary_rho_c, out.initial_rho_c);
    }

    #[test]
    fn captures_fill_the_requested_windows() {
        let topo = NetworkTopology::lattice(8).unwrap();
        let queue = QueueParams::new(2.0, 2.6).unwrap();
        let game = GameParams::new(3.5, 1.0, PayoffMode::Continuous).unwrap();
        let params = evo(0.5, 0.0, 6, 2);
        let capture = CaptureSpec {
            snapshot_steps: vec![0, 2],
            payoff_window: 2,
            queue_trace_rounds: 1,
            cooperator_histogram_window: 5,
        };
        let out = run(&topo, &queue, &game, &params, 30, 0, &capture).unwrap();
        assert!(out.exit_step.is_none(), "absorbed too early for this test");
        assert_eq!(out.snapshots.len(), 2);
        assert_eq!(out.snapshots[0].0, 0);
        assert_eq!(out.snapshots[1].0, 2);
        assert!(out.snapshots.iter().all(|(_, s)| s.len() == 64));
        assert_eq!(out.payoff_traces.len(), 2);
        let (round, played, ledger) = &out.payoff_traces[0];
        assert_eq!(*round, 1);
        assert_eq!(played.len(), 64);
        assert_eq!(ledger.as_slice().len(), 64);
        assert_eq!(out.queue_traces.len(), 1);
        assert_eq!(out.queue_traces[0].1.n(), 64);
        assert_eq!(out.game_traces.len(), 1);
        assert_eq!(out.game_traces[0].1.len(), 64);
        let total: u64 = out.cooperator_histogram.iter().map(|(_, c)| c).sum();
        assert_eq!(total, 5);
        // Snapshot at step 2 is the state that played round 2.
        let played_round2 = &out
            .payoff_traces
            .iter()
            .find(|(r, _, _)| *r == 2)
            .unwrap()
            .1;
        assert_eq!(&out.snapshots[1].1, played_round2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn reputation_stays_bounded_and_ordered(
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
            coop in proptest::bool::ANY,
        ) {
            let played = if coop { C } else { D };
            let (fa, fb) = (update_reputation(a, played), update_reputation(b, played));
            prop_assert!((0.0..=1.0).contains(&fa));
            if a <= b {
                prop_assert!(fa <= fb);
            }
        }

        #[test]
        fn imitation_only_copies_neighbor_strategies(
            side in 3u32..6,
            seed in 0u64..500,
            p_r in 0.0f64..=1.0,
        ) {
            let topo = NetworkTopology::lattice(side).unwrap();
            let n = topo.node_count();
            let mut stream = rng::init_rng(seed, 0);
            let before = init_population(n, &mut stream).strategies;
            let payoffs: Vec<f64> = (0..n).map(|_| stream.random::<f64>() * 10.0).collect();
            let reps: Vec<f64> = (0..n).map(|_| stream.random()).collect();
            let params = EvolutionParams::new(0.5, p_r, 10, 1).unwrap();
            let mut after = before.clone();
            let switched = synchronous_imitation(
                &topo, &mut after, &payoffs, &reps, &params, &mut stream,
            ).unwrap();
            let changed = before.iter().zip(&after).filter(|(x, y)| x != y).count();
            prop_assert_eq!(switched, changed);
            for i in 0..n {
                let ok = after[i] == before[i]
                    || topo
                        .neighbors(NodeId(i as u32))
                        .iter()
                        .any(|u| before[u.index()] == after[i]);
                prop_assert!(ok, "node {} adopted a strategy no neighbor played", i);
            }
        }
    }
}
