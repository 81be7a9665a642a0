//! Closed-form queue analytics and empirical estimators.
//!
//! A round with `N` players behaves like a finite-capacity M/M/1 queue, so
//! the stationary number-in-system distribution is truncated-geometric in
//! the utilization rho = lambda/mu:
//!
//!   P_n = (1 - rho) rho^n / (1 - rho^(N+1)),   n = 0..N
//!
//! with mean queue length
//!
//!   L = rho/(1 - rho) - (N+1) rho^(N+1) / (1 - rho^(N+1))
//!
//! and mean sojourn E(T) = L / lambda. At rho = 1 those expressions take
//! their limits, P_n = 1/(N+1) and L = N/2; inside a narrow window around
//! rho = 1 the limits are substituted to dodge catastrophic cancellation.
//! The expected per-round payoff enhancement a population of cooperators
//! injects is psi = G * r * N_c * E(T) for mean group size G, approaching
//! G * r * N_c / (mu - lambda) on large underloaded systems.

use crate::error::{Error, Result};
use crate::queueing::RoundSchedule;

/// Width of the window around rho = 1 inside which the rho -> 1 limit
/// expressions replace the closed forms.
pub const RHO_UNITY_WINDOW: f64 = 1e-6;

fn check_rates(lambda: f64, mu: f64) -> Result<f64> {
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
    Ok(lambda / mu)
}

/// Stationary distribution of the number in system, `capacity + 1` entries.
pub fn stationary_distribution(lambda: f64, mu: f64, capacity: usize) -> Result<Vec<f64>> {
    let rho = check_rates(lambda, mu)?;
    let states = capacity + 1;
    if (rho - 1.0).abs() < RHO_UNITY_WINDOW {
        return Ok(vec![1.0 / states as f64; states]);
    }
    // Geometric weights normalized by their explicit sum. Anchoring the
    // largest weight at 1 keeps every term in [0, 1] for any rho, so the
    // overloaded case cannot overflow.
    let mut weights = vec![0.0; states];
    if rho < 1.0 {
        let mut w = 1.0;
        for entry in weights.iter_mut() {
            *entry = w;
            w *= rho;
        }
    } else {
        let mut w = 1.0;
        for entry in weights.iter_mut().rev() {
            *entry = w;
            w /= rho;
        }
    }
    let total: f64 = weights.iter().sum();
    for entry in weights.iter_mut() {
        *entry /= total;
    }
    Ok(weights)
}

/// Mean number in system, L.
pub fn mean_queue_length(lambda: f64, mu: f64, capacity: usize) -> Result<f64> {
    let rho = check_rates(lambda, mu)?;
    let n1 = capacity as f64 + 1.0;
    if (rho - 1.0).abs() < RHO_UNITY_WINDOW {
        return Ok(capacity as f64 / 2.0);
    }
    if rho < 1.0 {
        let x = rho.powi(capacity as i32 + 1);
        Ok(rho / (1.0 - rho) - n1 * x / (1.0 - x))
    } else {
        // Divide the tail term through by rho^(N+1) so nothing overflows.
        let y = rho.powi(-(capacity as i32 + 1));
        Ok(rho / (1.0 - rho) + n1 / (1.0 - y))
    }
}

/// Mean sojourn time E(T) = L / lambda.
pub fn mean_sojourn(lambda: f64, mu: f64, capacity: usize) -> Result<f64> {
    Ok(mean_queue_length(lambda, mu, capacity)? / lambda)
}

/// Everything the closed forms say about one parameter set.
#[derive(Debug, Clone)]
pub struct QueueAnalytics {
    pub lambda: f64,
    pub mu: f64,
    pub capacity: usize,
    pub rho: f64,
    pub stationary: Vec<f64>,
    pub mean_in_system: f64,
    pub mean_sojourn: f64,
}

impl QueueAnalytics {
    pub fn compute(lambda: f64, mu: f64, capacity: usize) -> Result<Self> {
        let rho = check_rates(lambda, mu)?;
        Ok(Self {
            lambda,
            mu,
            capacity,
            rho,
            stationary: stationary_distribution(lambda, mu, capacity)?,
            mean_in_system: mean_queue_length(lambda, mu, capacity)?,
            mean_sojourn: mean_sojourn(lambda, mu, capacity)?,
        })
    }
}

/// Forecast of the total per-round payoff enhancement cooperators inject.
/// `psi_limit` is the large-system limit, defined only for rho < 1.
#[derive(Debug, Clone, Copy)]
pub struct EnhancementForecast {
    pub psi: f64,
    pub psi_limit: Option<f64>,
}

/// Forecast with the lattice group size of 5.
pub fn total_enhancement(
    r: f64,
    cooperators: usize,
    lambda: f64,
    mu: f64,
    capacity: usize,
) -> Result<EnhancementForecast> {
    total_enhancement_with_group_size(r, cooperators, 5.0, lambda, mu, capacity)
}

/// Forecast for an arbitrary mean group size (degree-heterogeneous graphs
/// pass `topology.mean_group_size()`).
pub fn total_enhancement_with_group_size(
    r: f64,
    cooperators: usize,
    mean_group_size: f64,
    lambda: f64,
    mu: f64,
    capacity: usize,
) -> Result<EnhancementForecast> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid(
            "r",
            format!("enhancement factor must be finite and positive, got {r}"),
        ));
    }
    if !(mean_group_size.is_finite() && mean_group_size >= 1.0) {
        return Err(Error::invalid(
            "mean_group_size",
            format!("mean group size must be at least 1, got {mean_group_size}"),
        ));
    }
    if cooperators > capacity {
        return Err(Error::invalid(
            "cooperators",
            format!("cooperator count {cooperators} exceeds capacity {capacity}"),
        ));
    }
    let rho = check_rates(lambda, mu)?;
    let et = mean_sojourn(lambda, mu, capacity)?;
    let scale = mean_group_size * r * cooperators as f64;
    let psi_limit = (rho < 1.0).then(|| scale / (mu - lambda));
    Ok(EnhancementForecast {
        psi: scale * et,
        psi_limit,
    })
}

/// Kolmogorov-Smirnov distance of a sample against a reference CDF.
#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub n: usize,
}

impl KsResult {
    /// Asymptotic critical value c(alpha)/sqrt(n), c = sqrt(-ln(alpha/2)/2).
    /// Good for the sample sizes used here (n >> 35).
    pub fn critical_value(&self, alpha: f64) -> f64 {
        ((-(alpha / 2.0).ln()) / 2.0).sqrt() / (self.n as f64).sqrt()
    }

    pub fn passes(&self, alpha: f64) -> bool {
        self.statistic < self.critical_value(alpha)
    }
}

/// KS statistic of `samples` against Exponential(rate).
pub fn ks_exponential(samples: &[f64], rate: f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::invalid(
            "rate",
            format!("rate must be finite and positive, got {rate}"),
        ));
    }
    if samples.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid(
            "samples",
            "samples must be finite and nonnegative",
        ));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut statistic: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let cdf = 1.0 - (-rate * x).exp();
        let below = cdf - i as f64 / n;
        let above = (i as f64 + 1.0) / n - cdf;
        statistic = statistic.max(below).max(above);
    }
    Ok(KsResult {
        statistic,
        n: sorted.len(),
    })
}

/// Empirical aggregates over a batch of simulated rounds.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalQueueStats {
    pub rounds: usize,
    pub samples: usize,
    pub mean_sojourn: f64,
    pub mean_wait: f64,
    pub mean_service: f64,
    /// Time average of the number in system, from explicit step-function
    /// integration over the arrival/departure events of each round.
    pub time_avg_in_system: f64,
    /// Total arrivals divided by total observed span.
    pub effective_arrival_rate: f64,
}

pub fn empirical_queue_stats(schedules: &[RoundSchedule]) -> Result<EmpiricalQueueStats> {
    if schedules.is_empty() {
        return Err(Error::EmptyInput("schedules"));
    }
    let mut samples = 0usize;
    let mut sojourn_sum = 0.0;
    let mut wait_sum = 0.0;
    let mut service_sum = 0.0;
    let mut area = 0.0;
    let mut span = 0.0;
    for schedule in schedules {
        samples += schedule.n();
        sojourn_sum += schedule.sojourns().iter().sum::<f64>();
        wait_sum += schedule.waits().iter().sum::<f64>();
        service_sum += schedule.services().iter().sum::<f64>();

        // Sweep the merged event sequence; arrivals are nondecreasing in
        // arrival order and departures in completion order.
        let arrivals: Vec<f64> = schedule
            .arrival_order()
            .iter()
            .map(|&node| schedule.arrivals()[node.index()])
            .collect();
        let departures: Vec<f64> = schedule
            .completion_order()
            .iter()
            .map(|&node| schedule.departures()[node.index()])
            .collect();
        let mut level = 0i64;
        let mut clock = arrivals[0];
        let (mut ai, mut di) = (0usize, 0usize);
        while di < departures.len() {
            let next_arrival = arrivals.get(ai).copied().unwrap_or(f64::INFINITY);
            let next_departure = departures[di];
            // Arrivals break ties so the level never dips early.
            let event = next_arrival.min(next_departure);
            area += level as f64 * (event - clock);
            clock = event;
            if next_arrival <= next_departure {
                level += 1;
                ai += 1;
            } else {
                level -= 1;
                di += 1;
            }
        }
        debug_assert_eq!(level, 0);
        span += clock - arrivals[0];
    }
    Ok(EmpiricalQueueStats {
        rounds: schedules.len(),
        samples,
        mean_sojourn: sojourn_sum / samples as f64,
        mean_wait: wait_sum / samples as f64,
        mean_service: service_sum / samples as f64,
        time_avg_in_system: area / span,
        effective_arrival_rate: samples as f64 / span,
    })
}
