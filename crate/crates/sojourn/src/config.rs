//! TOML experiment configuration. Parsing is strict: unknown and duplicate
//! keys are rejected so a typo cannot silently fall back to a default.
//! `validate` checks cross-field coherence and every error names the
//! section it came from.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::evolution::{CaptureSpec, EvolutionParams};
use crate::payoff::{GameParams, PayoffMode};
use crate::queueing::QueueParams;
use crate::rng;
use crate::topology::NetworkTopology;

pub const DEFAULT_MASTER_SEED: u64 = 42;
pub const DEFAULT_SMALL_WORLD_NODES: u32 = 2500;
pub const DEFAULT_SMALL_WORLD_DEGREE: u32 = 4;
pub const DEFAULT_REWIRE_PROBABILITY: f64 = 0.2;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub network: NetworkConfig,
    pub queue: QueueConfig,
    pub game: GameConfig,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub capture: CaptureConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Lattice,
    SmallWorld,
}

/// Network section. `side` belongs to `kind = "lattice"`; `n`, `k`, `p`
/// belong to `kind = "small_world"` and default to the standard
/// 2500-node, degree-4, p = 0.2 graph when omitted.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub kind: TopologyKind,
    pub side: Option<u32>,
    pub n: Option<u32>,
    pub k: Option<u32>,
    pub p: Option<f64>,
}

/// Network parameters after kind-specific defaults and coherence checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolvedNetwork {
    Lattice { side: u32 },
    SmallWorld { n: u32, k: u32, p: f64 },
}

impl NetworkConfig {
    pub fn lattice(side: u32) -> Self {
        Self {
            kind: TopologyKind::Lattice,
            side: Some(side),
            n: None,
            k: None,
            p: None,
        }
    }

    pub fn small_world(n: u32, k: u32, p: f64) -> Self {
        Self {
            kind: TopologyKind::SmallWorld,
            side: None,
            n: Some(n),
            k: Some(k),
            p: Some(p),
        }
    }

    pub fn resolved(&self) -> Result<ResolvedNetwork> {
        match self.kind {
            TopologyKind::Lattice => {
                if self.n.is_some() || self.k.is_some() || self.p.is_some() {
                    return Err(Error::Config(
                        "[network] n, k and p apply only to kind = \"small_world\"".into(),
                    ));
                }
                let side = self.side.ok_or_else(|| {
                    Error::Config("[network] side is required when kind = \"lattice\"".into())
                })?;
                if side < 2 {
                    return Err(Error::Config(format!(
                        "[network] side must be at least 2, got {side}"
                    )));
                }
                Ok(ResolvedNetwork::Lattice { side })
            }
            TopologyKind::SmallWorld => {
                if self.side.is_some() {
                    return Err(Error::Config(
                        "[network] side applies only to kind = \"lattice\"".into(),
                    ));
                }
                let n = self.n.unwrap_or(DEFAULT_SMALL_WORLD_NODES);
                let k = self.k.unwrap_or(DEFAULT_SMALL_WORLD_DEGREE);
                let p = self.p.unwrap_or(DEFAULT_REWIRE_PROBABILITY);
                if k < 2 || !k.is_multiple_of(2) {
                    return Err(Error::Config(format!(
                        "[network] k must be a positive even degree, got {k}"
                    )));
                }
                if n <= k {
                    return Err(Error::Config(format!(
                        "[network] n must exceed k, got n = {n}, k = {k}"
                    )));
                }
                if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                    return Err(Error::Config(format!(
                        "[network] p must lie in [0, 1], got {p}"
                    )));
                }
                Ok(ResolvedNetwork::SmallWorld { n, k, p })
            }
        }
    }

    pub fn node_count(&self) -> Result<usize> {
        Ok(match self.resolved()? {
            ResolvedNetwork::Lattice { side } => (side as usize) * (side as usize),
            ResolvedNetwork::SmallWorld { n, .. } => n as usize,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueConfig {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub r: f64,
    #[serde(default = "default_cost")]
    pub c: f64,
    #[serde(default = "default_mode")]
    pub mode: PayoffMode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    pub kappa: f64,
    pub p_r: f64,
    pub max_steps: u32,
    pub tail_window: u32,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            p_r: 0.0,
            max_steps: 10_000,
            tail_window: 500,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub replicates: u32,
    pub master_seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            replicates: 10,
            master_seed: DEFAULT_MASTER_SEED,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaptureConfig {
    pub timeseries: bool,
    pub snapshot_steps: Vec<u32>,
    pub payoff_window: u32,
    pub queue_trace_rounds: u32,
    pub cooperator_histogram_window: u32,
    pub edges: bool,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        Self {
            timeseries: true,
            snapshot_steps: Vec::new(),
            payoff_window: 0,
            queue_trace_rounds: 0,
            cooperator_histogram_window: 0,
            edges: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    R,
    Mu,
    Lambda,
    #[serde(rename = "p_r")]
    Pr,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::R => "r",
            SweepParam::Mu => "mu",
            SweepParam::Lambda => "lambda",
            SweepParam::Pr => "p_r",
        }
    }

    pub fn apply(self, config: &mut Config, value: f64) {
        match self {
            SweepParam::R => config.game.r = value,
            SweepParam::Mu => config.queue.mu = value,
            SweepParam::Lambda => config.queue.lambda = value,
            SweepParam::Pr => config.evolution.p_r = value,
        }
    }

    fn check_value(self, value: f64) -> bool {
        match self {
            SweepParam::R | SweepParam::Mu | SweepParam::Lambda => value.is_finite() && value > 0.0,
            SweepParam::Pr => value.is_finite() && (0.0..=1.0).contains(&value),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r" => Ok(SweepParam::R),
            "mu" => Ok(SweepParam::Mu),
            "lambda" => Ok(SweepParam::Lambda),
            "p_r" => Ok(SweepParam::Pr),
            other => Err(Error::Config(format!(
                "unknown sweep parameter {other:?}; expected r, mu, lambda or p_r"
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl SweepAxis {
    fn validate(&self, context: &str) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config(format!(
                "[{context}] values must not be empty"
            )));
        }
        for &v in &self.values {
            if !self.param.check_value(v) {
                return Err(Error::Config(format!(
                    "[{context}] {v} is not a valid value for {}",
                    self.param
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis1: SweepAxis,
    pub axis2: Option<SweepAxis>,
    /// Overrides [run] replicates for sweep cells when set.
    pub replicates: Option<u32>,
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        self.axis1.validate("sweep.axis1")?;
        if let Some(axis2) = &self.axis2 {
            axis2.validate("sweep.axis2")?;
            if axis2.param == self.axis1.param {
                return Err(Error::Config(
                    "[sweep] axis1 and axis2 must vary different parameters".into(),
                ));
            }
        }
        if self.replicates == Some(0) {
            return Err(Error::Config(
                "[sweep] replicates must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn default_lambda() -> f64 {
    2.0
}

fn default_cost() -> f64 {
    1.0
}

fn default_mode() -> PayoffMode {
    PayoffMode::Continuous
}

fn section<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| Error::Config(format!("[{name}] {e}")))
}

impl Config {
    /// Plain lattice run with every optional section at its default.
    pub fn with_lattice(side: u32, mu: f64, r: f64) -> Self {
        Self {
            network: NetworkConfig::lattice(side),
            queue: QueueConfig {
                lambda: default_lambda(),
                mu,
            },
            game: GameConfig {
                r,
                c: default_cost(),
                mode: default_mode(),
            },
            evolution: EvolutionConfig::default(),
            run: RunConfig::default(),
            capture: CaptureConfig::default(),
            sweep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network.resolved()?;
        section("queue", self.queue_params())?;
        section("game", self.game_params())?;
        section("evolution", self.evolution_params())?;
        if self.run.replicates == 0 {
            return Err(Error::Config("[run] replicates must be at least 1".into()));
        }
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        Ok(())
    }

    pub fn queue_params(&self) -> Result<QueueParams> {
        QueueParams::new(self.queue.lambda, self.queue.mu)
    }

    pub fn game_params(&self) -> Result<GameParams> {
        GameParams::new(self.game.r, self.game.c, self.game.mode)
    }

    pub fn evolution_params(&self) -> Result<EvolutionParams> {
        EvolutionParams::new(
            self.evolution.kappa,
            self.evolution.p_r,
            self.evolution.max_steps,
            self.evolution.tail_window,
        )
    }

    /// Build the graph every replicate shares. Small-world wiring draws
    /// from a stream derived from the master seed alone, so the same seed
    /// always produces the same graph no matter how many replicates run.
    pub fn build_topology(&self) -> Result<NetworkTopology> {
        match self.network.resolved()? {
            ResolvedNetwork::Lattice { side } => NetworkTopology::lattice(side),
            ResolvedNetwork::SmallWorld { n, k, p } => {
                NetworkTopology::small_world(n, k, p, &mut rng::topology_rng(self.run.master_seed))
            }
        }
    }

    pub fn capture_spec(&self) -> CaptureSpec {
        CaptureSpec {
            snapshot_steps: self.capture.snapshot_steps.clone(),
            payoff_window: self.capture.payoff_window,
            queue_trace_rounds: self.capture.queue_trace_rounds,
            cooperator_histogram_window: self.capture.cooperator_histogram_window,
        }
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<Config> {
    let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Read, parse and validate a configuration file.
pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
