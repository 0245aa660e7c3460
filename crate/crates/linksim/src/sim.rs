//! Scenario configuration, Monte Carlo execution and result emission.
//!
//! A scenario sweeps the transmitter-to-users distance `L`, running every
//! requested scheme on the *same* per-trial channel draw (paired comparison,
//! which sharpens the scheme-ordering statistics considerably). Seeds are
//! derived hierarchically — master, then (L, trial), then per-link — so any
//! single trial can be replayed in isolation and the full run is bit-stable
//! under any execution order or worker count.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::{
    optimize_active, optimize_passive, random_phase_scheme, wmmse_precoder, BeamformingSolution,
    OptimizerConfig,
};
use crate::channel::{assemble_channels, channel_hash, Position2D, RiceanParams, SystemGeometry};
use crate::error::{Error, Result};
use crate::link::{
    dbm_to_watts, effective_channels, reflect_power, snr_upper_bound_check, NoiseModel,
    PowerBudget, RisState,
};

/// Seed used when neither the config nor the CLI provides one.
pub const DEFAULT_MASTER_SEED: u64 = 5;
/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "RIS_LINKSIM_WORKERS";

const USER_POSITION_TAG: u64 = 0x5553_4552;
const RANDOM_PHASE_TAG: u64 = 0x0052_4E44;

/// The four simulated transmission schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    WithoutRis,
    RandomPhase,
    Passive,
    Active,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::WithoutRis,
        Scheme::RandomPhase,
        Scheme::Passive,
        Scheme::Active,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::WithoutRis => "without_ris",
            Scheme::RandomPhase => "random_phase",
            Scheme::Passive => "passive",
            Scheme::Active => "active",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "without_ris" => Ok(Scheme::WithoutRis),
            "random_phase" => Ok(Scheme::RandomPhase),
            "passive" => Ok(Scheme::Passive),
            "active" => Ok(Scheme::Active),
            other => Err(Error::config(format!(
                "unknown scheme '{other}' (expected without_ris, random_phase, passive or active)"
            ))),
        }
    }
}

/// Result serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::config(format!(
                "unknown format '{other}' (expected csv or json)"
            ))),
        }
    }
}

fn default_bs_position() -> [f64; 2] {
    [0.0, -60.0]
}
fn default_ris_position() -> [f64; 2] {
    [300.0, 10.0]
}
fn default_bs_antennas() -> usize {
    4
}
fn default_ris_elements() -> usize {
    512
}
fn default_users() -> usize {
    4
}
fn default_spacing() -> f64 {
    0.5
}
fn default_kappa() -> f64 {
    1.0
}
fn default_noise_power_dbm() -> f64 {
    -100.0
}
fn default_total_power_dbm() -> f64 {
    10.0
}
fn default_power_split() -> f64 {
    0.5
}
fn default_user_disk_radius() -> f64 {
    5.0
}
fn default_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}
fn default_trials() -> usize {
    1000
}
fn default_master_seed() -> u64 {
    DEFAULT_MASTER_SEED
}
fn default_l_values() -> Vec<f64> {
    vec![150.0, 200.0, 250.0, 300.0]
}

/// Optimizer profile for the reference scenario. The active scheme's
/// alternating ascent needs both a deep iteration budget and several random
/// restarts to escape poor surface basins at N = 512; the tight tolerance
/// keeps the cheap schemes converged well past the paired-ordering margins.
fn reference_optimizer() -> OptimizerConfig {
    OptimizerConfig {
        max_outer_iters: 400,
        convergence_tol: 1e-6,
        restarts: 9,
        ..OptimizerConfig::default()
    }
}

/// Full experimental design for one simulation run. Every field has a
/// default matching the reference urban-cell scenario, so an empty config
/// document reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Base-station position in meters.
    pub bs_position: [f64; 2],
    /// Surface position in meters.
    pub ris_position: [f64; 2],
    pub bs_antennas: usize,
    pub ris_elements: usize,
    pub users: usize,
    /// Antenna spacing in wavelengths.
    pub bs_antenna_spacing: f64,
    /// Element spacing in wavelengths.
    pub ris_element_spacing: f64,
    /// Ricean factor shared by all three sub-links.
    pub kappa: f64,
    /// Receiver noise power in dBm.
    pub noise_power_dbm: f64,
    /// Per-element noise power of an active surface in dBm.
    pub ris_noise_power_dbm: f64,
    /// Total transmit power budget in dBm.
    pub total_power_dbm: f64,
    /// Fraction of the total budget kept at the base station by the active
    /// scheme (the remainder powers the surface). Schemes without an active
    /// surface always use the whole budget at the base station.
    pub power_split: f64,
    /// Users are drawn uniformly from a disk of this radius (meters)
    /// centered at `(L, 0)`.
    pub user_disk_radius: f64,
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub master_seed: u64,
    /// Swept distances `L` in meters.
    pub l_values: Vec<f64>,
    /// Worker threads; `None` uses every available core.
    pub workers: Option<usize>,
    pub optimizer: OptimizerConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            bs_position: default_bs_position(),
            ris_position: default_ris_position(),
            bs_antennas: default_bs_antennas(),
            ris_elements: default_ris_elements(),
            users: default_users(),
            bs_antenna_spacing: default_spacing(),
            ris_element_spacing: default_spacing(),
            kappa: default_kappa(),
            noise_power_dbm: default_noise_power_dbm(),
            ris_noise_power_dbm: default_noise_power_dbm(),
            total_power_dbm: default_total_power_dbm(),
            power_split: default_power_split(),
            user_disk_radius: default_user_disk_radius(),
            schemes: default_schemes(),
            trials: default_trials(),
            master_seed: default_master_seed(),
            l_values: default_l_values(),
            workers: None,
            optimizer: reference_optimizer(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bs_antennas == 0 {
            return Err(Error::config("bs_antennas must be at least 1"));
        }
        if self.users == 0 {
            return Err(Error::config("users must be at least 1"));
        }
        for (name, v) in [
            ("bs_antenna_spacing", self.bs_antenna_spacing),
            ("ris_element_spacing", self.ris_element_spacing),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be positive and finite")));
            }
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::config("kappa must be >= 0 and finite"));
        }
        for (name, v) in [
            ("noise_power_dbm", self.noise_power_dbm),
            ("ris_noise_power_dbm", self.ris_noise_power_dbm),
            ("total_power_dbm", self.total_power_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite")));
            }
        }
        if !(self.power_split > 0.0 && self.power_split <= 1.0) {
            return Err(Error::config("power_split must lie in (0, 1]"));
        }
        if !(self.user_disk_radius >= 0.0) || !self.user_disk_radius.is_finite() {
            return Err(Error::config("user_disk_radius must be >= 0 and finite"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("schemes must be non-empty"));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(Error::config(format!("schemes lists '{s}' more than once")));
            }
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.l_values.is_empty() {
            return Err(Error::config("l_values must be non-empty"));
        }
        for &l in &self.l_values {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::config(
                    "l_values entries must be positive and finite",
                ));
            }
            let cell = Position2D::new(l, 0.0);
            let ris = Position2D::new(self.ris_position[0], self.ris_position[1]);
            let bs = Position2D::new(self.bs_position[0], self.bs_position[1]);
            for (name, device) in [("ris_position", ris), ("bs_position", bs)] {
                if crate::channel::distance(cell, device) <= self.user_disk_radius {
                    return Err(Error::config(format!(
                        "user disk at L={l} reaches {name}; shrink user_disk_radius"
                    )));
                }
            }
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers must be at least 1 when set"));
        }
        self.optimizer
            .validate()
            .map_err(|e| Error::config(format!("optimizer: {e}")))
    }
}

/// Parses a JSON config document; an empty document yields the defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let trimmed = text.trim();
    let cfg: ScenarioConfig = if trimmed.is_empty() {
        ScenarioConfig::default()
    } else {
        serde_json::from_str(trimmed).map_err(|e| Error::config(e.to_string()))?
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Per-trial record: one channel draw shared by every scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial_seed: u64,
    pub channel_hash: u64,
    /// Sum rates aligned with the config's scheme order.
    pub rates: Vec<f64>,
    /// Outer iterations used, aligned with the config's scheme order.
    pub iterations: Vec<usize>,
}

/// One (L, scheme) cell of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub l_m: f64,
    pub scheme: Scheme,
    pub mean_sum_rate_bpshz: f64,
    pub std_err: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Full sweep output plus reproduction metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub config_hash: u64,
    pub master_seed: u64,
    /// Mean outer iterations per scheme, across all distances and trials.
    pub mean_iterations: BTreeMap<String, f64>,
    pub cells: Vec<CellResult>,
}

impl ScenarioResult {
    pub fn cell(&self, l_m: f64, scheme: Scheme) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.l_m == l_m && c.scheme == scheme)
    }
}

/// How trials are executed. The output is bit-identical in every mode; only
/// wall-clock time differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    Sequential,
    /// Worker threads; `None` uses every available core.
    Parallel {
        workers: Option<usize>,
    },
}

impl Default for ExecutionMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecutionMode::Parallel { workers: None }
        } else {
            ExecutionMode::Sequential
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325_u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01B3);
    }
    hash
}

/// Stable hash of the full configuration, recorded in results so a data file
/// can be matched to the exact setup that produced it.
pub fn config_hash(cfg: &ScenarioConfig) -> Result<u64> {
    Ok(fnv1a(&serde_json::to_vec(cfg)?))
}

/// Interprets the worker-count environment variable (`None` = not set).
fn parse_workers_env(value: Option<&str>) -> Result<Option<usize>> {
    match value {
        None => Ok(None),
        Some(raw) => {
            let n: usize = raw.trim().parse().map_err(|_| {
                Error::config(format!(
                    "{WORKERS_ENV} must be a positive integer, got '{raw}'"
                ))
            })?;
            if n == 0 {
                return Err(Error::config(format!("{WORKERS_ENV} must be at least 1")));
            }
            Ok(Some(n))
        }
    }
}

/// Runs one trial: draw user positions and channels from the derived seed,
/// then apply every configured scheme to the same channel set.
pub fn run_trial(
    cfg: &ScenarioConfig,
    l: f64,
    l_index: usize,
    trial_index: usize,
) -> Result<TrialOutcome> {
    let trial_seed = crate::rng::derive_seed(cfg.master_seed, l_index as u64, trial_index as u64);
    let mut pos_rng = crate::rng::stream(crate::rng::derive_seed(trial_seed, USER_POSITION_TAG, 0));
    let user_positions: Vec<Position2D> = (0..cfg.users)
        .map(|_| {
            // Uniform over the disk: radius via sqrt of a uniform draw.
            let radius = cfg.user_disk_radius * pos_rng.gen::<f64>().sqrt();
            let angle = crate::rng::uniform_phase(&mut pos_rng);
            Position2D::new(l + radius * angle.cos(), radius * angle.sin())
        })
        .collect();
    let geometry = SystemGeometry {
        bs_position: Position2D::new(cfg.bs_position[0], cfg.bs_position[1]),
        ris_position: Position2D::new(cfg.ris_position[0], cfg.ris_position[1]),
        user_positions,
        bs_antennas: cfg.bs_antennas,
        ris_elements: cfg.ris_elements,
        bs_antenna_spacing: cfg.bs_antenna_spacing,
        ris_element_spacing: cfg.ris_element_spacing,
    };
    let channels = assemble_channels(&geometry, RiceanParams::new(cfg.kappa)?, trial_seed)?;
    let hash = channel_hash(&channels);
    log::debug!("L={l} trial={trial_index} seed={trial_seed:#018x} channel_hash={hash:#018x}");

    let p_total = dbm_to_watts(cfg.total_power_dbm);
    let sigma_sq = dbm_to_watts(cfg.noise_power_dbm);
    let sigma_v_sq = dbm_to_watts(cfg.ris_noise_power_dbm);

    let mut rates = Vec::with_capacity(cfg.schemes.len());
    let mut iterations = Vec::with_capacity(cfg.schemes.len());
    for &scheme in &cfg.schemes {
        let (solution, budget) = match scheme {
            Scheme::WithoutRis => {
                let budget = PowerBudget::all_at_bs(p_total)?;
                let rows = effective_channels(&channels, &RisState::None)?;
                let sol = wmmse_precoder(&rows, budget.bs_power, sigma_sq, &cfg.optimizer)?;
                (sol, budget)
            }
            Scheme::RandomPhase => {
                let budget = PowerBudget::all_at_bs(p_total)?;
                let noise = NoiseModel::new(sigma_sq, 0.0)?;
                let seed = crate::rng::derive_seed(trial_seed, RANDOM_PHASE_TAG, 0);
                let sol = random_phase_scheme(&channels, &budget, &noise, seed, &cfg.optimizer)?;
                (sol, budget)
            }
            Scheme::Passive => {
                let budget = PowerBudget::all_at_bs(p_total)?;
                let noise = NoiseModel::new(sigma_sq, 0.0)?;
                let sol = optimize_passive(&channels, &budget, &noise, &cfg.optimizer)?;
                (sol, budget)
            }
            Scheme::Active => {
                let budget = PowerBudget::from_split(p_total, cfg.power_split)?;
                let noise = NoiseModel::new(sigma_sq, sigma_v_sq)?;
                let sol = optimize_active(&channels, &budget, &noise, &cfg.optimizer)?;
                (sol, budget)
            }
        };
        enforce_invariants(scheme, &solution, &budget, &channels, trial_seed)?;
        rates.push(solution.achieved_sum_rate);
        iterations.push(solution.iterations_used);
    }
    Ok(TrialOutcome {
        trial_seed,
        channel_hash: hash,
        rates,
        iterations,
    })
}

/// Hard per-trial assertions; a failure carries the trial seed for replay.
fn enforce_invariants(
    scheme: Scheme,
    solution: &BeamformingSolution,
    budget: &PowerBudget,
    channels: &crate::channel::ChannelSet,
    trial_seed: u64,
) -> Result<()> {
    let fail = |msg: String| {
        Err(Error::Invariant(format!(
            "{msg} (scheme {scheme}, trial seed {trial_seed:#018x})"
        )))
    };
    let rate = solution.achieved_sum_rate;
    if !rate.is_finite() || rate < 0.0 {
        return fail(format!("non-finite or negative sum rate {rate}"));
    }
    let used_bs = solution.precoder.frobenius_norm_sq();
    if used_bs > budget.bs_power * (1.0 + 1e-9) {
        return fail(format!(
            "transmit power {used_bs} exceeds budget {}",
            budget.bs_power
        ));
    }
    for pair in solution.rate_trajectory.windows(2) {
        if pair[1] < pair[0] - 1e-6 {
            return fail(format!("trajectory decreased: {} -> {}", pair[0], pair[1]));
        }
    }
    match &solution.ris {
        RisState::None => {}
        RisState::Passive(p) => {
            for (n, c) in p.coefficients().iter().enumerate() {
                if (c.norm_sqr() - 1.0).abs() > 4.0 * f64::EPSILON {
                    return fail(format!("passive coefficient {n} off the unit circle"));
                }
            }
        }
        RisState::Active(a) => {
            let used = reflect_power(a, &channels.g, &solution.precoder, a.ris_noise_power)?;
            if used > budget.ris_power * (1.0 + 1e-9) {
                return fail(format!(
                    "reflect power {used} exceeds budget {}",
                    budget.ris_power
                ));
            }
        }
    }
    if !matches!(solution.ris, RisState::Active(_)) {
        // Energy conservation: without amplification, the users cannot
        // collectively receive more signal power than was transmitted.
        let rows = effective_channels(channels, &solution.ris)?;
        let mut received = 0.0;
        for row in &rows {
            received += row.matmul(&solution.precoder)?.frobenius_norm_sq();
        }
        if !snr_upper_bound_check(received, budget.bs_power) {
            return fail(format!(
                "received signal power {received} exceeds transmitted {}",
                budget.bs_power
            ));
        }
    }
    Ok(())
}

fn run_cell(
    cfg: &ScenarioConfig,
    l: f64,
    l_index: usize,
    mode: ExecutionMode,
    workers: Option<usize>,
) -> Result<Vec<TrialOutcome>> {
    match mode {
        ExecutionMode::Sequential => (0..cfg.trials)
            .map(|t| run_trial(cfg, l, l_index, t))
            .collect(),
        ExecutionMode::Parallel { .. } => run_cell_parallel(cfg, l, l_index, workers),
    }
}

#[cfg(feature = "parallel")]
fn run_cell_parallel(
    cfg: &ScenarioConfig,
    l: f64,
    l_index: usize,
    workers: Option<usize>,
) -> Result<Vec<TrialOutcome>> {
    use rayon::prelude::*;
    let body = || {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, l, l_index, t))
            .collect::<Result<Vec<_>>>()
    };
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("worker pool: {e}")))?
            .install(body),
        None => body(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_cell_parallel(
    cfg: &ScenarioConfig,
    l: f64,
    l_index: usize,
    _workers: Option<usize>,
) -> Result<Vec<TrialOutcome>> {
    (0..cfg.trials)
        .map(|t| run_trial(cfg, l, l_index, t))
        .collect()
}

/// Runs the full sweep with the default execution mode.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    run_scenario_with_mode(cfg, ExecutionMode::default())
}

/// Runs the full sweep. Results are bit-identical across modes and worker
/// counts: trials are collected in index order and reduced sequentially.
pub fn run_scenario_with_mode(cfg: &ScenarioConfig, mode: ExecutionMode) -> Result<ScenarioResult> {
    cfg.validate()?;
    let env_workers = parse_workers_env(std::env::var(WORKERS_ENV).ok().as_deref())?;
    let workers = env_workers.or(cfg.workers).or(match mode {
        ExecutionMode::Parallel { workers } => workers,
        ExecutionMode::Sequential => None,
    });

    let mut cells = Vec::with_capacity(cfg.l_values.len() * cfg.schemes.len());
    let mut iteration_totals = vec![0.0_f64; cfg.schemes.len()];
    let mut total_trials = 0usize;
    for (l_index, &l) in cfg.l_values.iter().enumerate() {
        let outcomes = run_cell(cfg, l, l_index, mode, workers)?;
        debug_assert_eq!(outcomes.len(), cfg.trials);
        total_trials += outcomes.len();
        for (s_index, _) in cfg.schemes.iter().enumerate() {
            for outcome in &outcomes {
                iteration_totals[s_index] += outcome.iterations[s_index] as f64;
            }
        }
        for (s_index, &scheme) in cfg.schemes.iter().enumerate() {
            let mean = outcomes.iter().map(|o| o.rates[s_index]).sum::<f64>() / cfg.trials as f64;
            let std_err = if cfg.trials > 1 {
                let var = outcomes
                    .iter()
                    .map(|o| (o.rates[s_index] - mean).powi(2))
                    .sum::<f64>()
                    / (cfg.trials - 1) as f64;
                (var / cfg.trials as f64).sqrt()
            } else {
                0.0
            };
            if !mean.is_finite() || !std_err.is_finite() {
                return Err(Error::Invariant(format!(
                    "non-finite statistics at L={l} for scheme {scheme}"
                )));
            }
            log::info!(
                "L={l} scheme={scheme}: mean {mean:.4} bps/Hz (std err {std_err:.4}, {} trials)",
                cfg.trials
            );
            cells.push(CellResult {
                l_m: l,
                scheme,
                mean_sum_rate_bpshz: mean,
                std_err,
                trials: cfg.trials,
                seed: cfg.master_seed,
            });
        }
    }
    let mean_iterations = cfg
        .schemes
        .iter()
        .zip(&iteration_totals)
        .map(|(s, &total)| (s.name().to_string(), total / total_trials.max(1) as f64))
        .collect();
    Ok(ScenarioResult {
        config_hash: config_hash(cfg)?,
        master_seed: cfg.master_seed,
        mean_iterations,
        cells,
    })
}

/// Formats a float with at least six significant digits, deterministically.
fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0.000000".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..=8).contains(&exp) {
        return format!("{v:.8e}");
    }
    let decimals = (8 - exp).clamp(0, 14) as usize;
    format!("{v:.decimals$}")
}

/// Renders the result table as CSV with a fixed header.
pub fn csv_string(result: &ScenarioResult) -> String {
    let mut out = String::from("L_m,scheme,mean_sum_rate_bpshz,std_err,trials,seed\n");
    for cell in &result.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_sig(cell.l_m),
            cell.scheme,
            fmt_sig(cell.mean_sum_rate_bpshz),
            fmt_sig(cell.std_err),
            cell.trials,
            cell.seed
        ));
    }
    out
}

/// Renders the result (cells plus metadata) as pretty JSON.
pub fn json_string(result: &ScenarioResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(result)?;
    s.push('\n');
    Ok(s)
}

/// Writes the result table to `destination` in the requested format.
pub fn emit_results(
    result: &ScenarioResult,
    format: OutputFormat,
    destination: &mut dyn Write,
) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => csv_string(result),
        OutputFormat::Json => json_string(result)?,
    };
    destination.write_all(text.as_bytes())?;
    Ok(())
}
