//! Replicate fan-out and parameter sweeps. Replicates are independent by
//! construction (each derives its streams from its own replicate index),
//! so they run in parallel and collect in index order; results never
//! depend on the thread count.

use rayon::prelude::*;

use crate::config::{Config, SweepParam};
use crate::error::{Error, Result};
use crate::evolution::{self, CaptureSpec, EvolutionParams, RunOutput};
use crate::payoff::GameParams;
use crate::queueing::QueueParams;
use crate::topology::NetworkTopology;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateSummary {
    pub replicate: u32,
    pub rho_c: f64,
    pub exit_step: Option<u32>,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub summaries: Vec<ReplicateSummary>,
    pub mean_rho_c: f64,
    /// Sample standard deviation over replicates; 0 when there is one.
    pub std_rho_c: f64,
    pub runs: Vec<RunOutput>,
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn run_replicates(
    topology: &NetworkTopology,
    queue: &QueueParams,
    game: &GameParams,
    evo: &EvolutionParams,
    master_seed: u64,
    replicates: u32,
    capture: &CaptureSpec,
) -> Result<ExperimentResult> {
    if replicates == 0 {
        return Err(Error::invalid(
            "replicates",
            "at least one replicate is required",
        ));
    }
    let runs: Vec<RunOutput> = (0..replicates)
        .into_par_iter()
        .map(|rep| evolution::run(topology, queue, game, evo, master_seed, rep, capture))
        .collect::<Result<Vec<_>>>()?;
    let summaries: Vec<ReplicateSummary> = runs
        .iter()
        .map(|run| ReplicateSummary {
            replicate: run.replicate,
            rho_c: run.summary_rho_c,
            exit_step: run.exit_step,
        })
        .collect();
    let rho: Vec<f64> = summaries.iter().map(|s| s.rho_c).collect();
    let (mean_rho_c, std_rho_c) = mean_std(&rho);
    Ok(ExperimentResult {
        summaries,
        mean_rho_c,
        std_rho_c,
        runs,
    })
}

/// Run the replicates a config describes, captures included.
pub fn run_experiment(config: &Config) -> Result<ExperimentResult> {
    config.validate()?;
    let topology = config.build_topology()?;
    run_replicates(
        &topology,
        &config.queue_params()?,
        &config.game_params()?,
        &config.evolution_params()?,
        config.run.master_seed,
        config.run.replicates,
        &config.capture_spec(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub axis1: f64,
    pub axis2: Option<f64>,
    pub mean_rho_c: f64,
    pub std_rho_c: f64,
    pub replicate_rho_c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param1: SweepParam,
    pub param2: Option<SweepParam>,
    /// Row-major: axis1 outer, axis2 inner.
    pub cells: Vec<SweepCell>,
}

/// Sweep the grid in the config's [sweep] section. Captures are disabled
/// per cell; only summary statistics are kept. Every cell shares the
/// topology, since none of the sweepable parameters touch the network.
pub fn run_sweep(config: &Config) -> Result<SweepResult> {
    config.validate()?;
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("[sweep] section is required to run a sweep".into()))?
        .clone();
    let replicates = sweep.replicates.unwrap_or(config.run.replicates);
    let axis2_values: Vec<Option<f64>> = match &sweep.axis2 {
        Some(axis) => axis.values.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let topology = config.build_topology()?;
    let mut cells = Vec::with_capacity(sweep.axis1.values.len() * axis2_values.len());
    for &v1 in &sweep.axis1.values {
        for &v2 in &axis2_values {
            let mut cell = config.clone();
            sweep.axis1.param.apply(&mut cell, v1);
            if let (Some(axis), Some(value)) = (&sweep.axis2, v2) {
                axis.param.apply(&mut cell, value);
            }
            cell.run.replicates = replicates;
            cell.validate()?;
            let result = run_replicates(
                &topology,
                &cell.queue_params()?,
                &cell.game_params()?,
                &cell.evolution_params()?,
                cell.run.master_seed,
                replicates,
                &CaptureSpec::default(),
            )?;
            cells.push(SweepCell {
                axis1: v1,
                axis2: v2,
                mean_rho_c: result.mean_rho_c,
                std_rho_c: result.std_rho_c,
                replicate_rho_c: result.summaries.iter().map(|s| s.rho_c).collect(),
            });
        }
    }
    Ok(SweepResult {
        param1: sweep.axis1.param,
        param2: sweep.axis2.as_ref().map(|axis| axis.param),
        cells,
    })
}
