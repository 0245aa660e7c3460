//! Command-line interface: scenario runs, closed-form calculators and a
//! fast self-check suite.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    array_gain_scaling, log_log_slope, path_gain_comparison, required_elements,
    thermal_noise_floor_dbm, DeploymentScenario, UnitPathGains, WavelengthMode,
};
use crate::error::{Error, Result};
use crate::sim::{emit_results, parse_config, run_scenario, OutputFormat, ScenarioConfig, Scheme};

#[derive(Debug, Parser)]
#[command(
    name = "ris-linksim",
    version,
    about = "Link-level simulator for passive and active reconfigurable-surface downlinks"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte Carlo distance sweep and emit the result table.
    Simulate(SimulateArgs),
    /// Closed-form calculators.
    #[command(subcommand)]
    Calc(CalcCommand),
    /// Run the built-in oracle checks and exit nonzero on any failure.
    Selftest,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON config file; omitted keys fall back to the reference scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial-count override.
    #[arg(long)]
    trials: Option<usize>,
    /// Distance sweep override as "start:stop:step" in meters.
    #[arg(long)]
    sweep: Option<String>,
    /// Scheme subset override (comma-separated).
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Debug, Subcommand)]
enum CalcCommand {
    /// Elements needed for a surface-aided hop to keep up with a direct link.
    RequiredElements(RequiredElementsArgs),
    /// Aggregate thermal-noise floor of a bank of active elements.
    NoiseFloor(NoiseFloorArgs),
    /// Multiplicative (reflect) versus additive (relay) path-loss factors.
    PathGain(PathGainArgs),
    /// SNR-versus-N curve and its log-log slope.
    ArrayGainScaling(ArrayGainArgs),
}

#[derive(Debug, Args)]
struct RequiredElementsArgs {
    /// Transmitter-receiver distance in meters.
    #[arg(long)]
    d: f64,
    /// Transmitter-surface distance in meters.
    #[arg(long)]
    dt: f64,
    /// Surface-receiver distance in meters.
    #[arg(long)]
    dr: f64,
    /// Carrier frequency in GHz.
    #[arg(long)]
    freq_ghz: f64,
    /// Element spacing in wavelengths.
    #[arg(long, default_value_t = 0.5)]
    spacing: f64,
    /// Use the round-number wavelength convention (0.3 m / f_GHz) instead of
    /// the exact speed of light.
    #[arg(long)]
    nominal_wavelength: bool,
}

#[derive(Debug, Args)]
struct NoiseFloorArgs {
    /// Bandwidth in MHz.
    #[arg(long)]
    bandwidth_mhz: f64,
    /// Antenna noise temperature in kelvin.
    #[arg(long, default_value_t = 290.0)]
    temperature: f64,
    /// Number of noise-injecting elements.
    #[arg(long, default_value_t = 1)]
    elements: u64,
    /// Extra propagation loss applied after aggregation, in dB.
    #[arg(long, default_value_t = 0.0)]
    path_loss_db: f64,
}

#[derive(Debug, Args)]
struct PathGainArgs {
    /// Transmitter-surface distance in meters.
    #[arg(long)]
    dt: f64,
    /// Surface-receiver distance in meters.
    #[arg(long)]
    dr: f64,
}

#[derive(Debug, Args)]
struct ArrayGainArgs {
    /// Element counts (comma-separated, ascending).
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "100,177,316,562,1000,1778,3162,5623,10000"
    )]
    n: Vec<u64>,
    /// Per-element noise power in watts.
    #[arg(long, default_value_t = 0.0)]
    element_noise: f64,
    /// Receiver noise power in watts.
    #[arg(long, default_value_t = 1e-13)]
    receiver_noise: f64,
    /// Coherent per-element-pair signal power.
    #[arg(long, default_value_t = 1.0)]
    signal_power: f64,
    /// Surface-to-receiver gain on element noise.
    #[arg(long, default_value_t = 1.0)]
    noise_path_gain: f64,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Calc(calc) => match calc {
            CalcCommand::RequiredElements(a) => calc_required_elements(a),
            CalcCommand::NoiseFloor(a) => calc_noise_floor(a),
            CalcCommand::PathGain(a) => calc_path_gain(a),
            CalcCommand::ArrayGainScaling(a) => calc_array_gain(a),
        },
        Command::Selftest => selftest(),
    }
}

/// Expands "start:stop:step" into an inclusive distance grid.
fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::config(format!(
            "sweep must be start:stop:step, got '{text}'"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("sweep component '{p}' is not a number")))
        })
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !start.is_finite() || !stop.is_finite() || !(step > 0.0) || !step.is_finite() {
        return Err(Error::config(
            "sweep needs finite bounds and a positive step",
        ));
    }
    if stop < start {
        return Err(Error::config("sweep stop must not precede start"));
    }
    let mut values = Vec::new();
    let mut i = 0u32;
    loop {
        let v = start + f64::from(i) * step;
        if v > stop + 1e-9 * step {
            break;
        }
        values.push(v);
        i += 1;
    }
    Ok(values)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg: ScenarioConfig = match &args.config {
        Some(path) => parse_config(&fs::read_to_string(path)?)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(sweep) = &args.sweep {
        cfg.l_values = parse_sweep(sweep)?;
    }
    if let Some(schemes) = args.schemes {
        cfg.schemes = schemes;
    }
    cfg.validate()?;

    let result = run_scenario(&cfg)?;
    match &args.out {
        Some(path) => {
            let mut file = fs::File::create(path)?;
            emit_results(&result, args.format, &mut file)?;
            log::info!("wrote {}", path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            emit_results(&result, args.format, &mut stdout)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn calc_required_elements(args: RequiredElementsArgs) -> Result<()> {
    let scenario = DeploymentScenario {
        d: args.d,
        d_t: args.dt,
        d_r: args.dr,
        frequency: args.freq_ghz * 1e9,
        element_spacing: args.spacing,
    };
    let mode = if args.nominal_wavelength {
        WavelengthMode::Nominal
    } else {
        WavelengthMode::ExactC
    };
    println!("{}", required_elements(&scenario, mode)?);
    Ok(())
}

fn calc_noise_floor(args: NoiseFloorArgs) -> Result<()> {
    let floor = thermal_noise_floor_dbm(args.bandwidth_mhz * 1e6, args.temperature, args.elements)?;
    println!("{:.1} dBm", floor - args.path_loss_db);
    Ok(())
}

fn calc_path_gain(args: PathGainArgs) -> Result<()> {
    let c = path_gain_comparison(args.dt, args.dr)?;
    println!("multiplicative: {:e}", c.multiplicative);
    println!("additive: {:e}", c.additive);
    println!("ratio: {}", c.ratio);
    Ok(())
}

fn calc_array_gain(args: ArrayGainArgs) -> Result<()> {
    let gains = UnitPathGains {
        signal_power: args.signal_power,
        noise_path_gain: args.noise_path_gain,
    };
    let curve = array_gain_scaling(&args.n, args.element_noise, args.receiver_noise, gains)?;
    println!("N,snr");
    for (n, snr) in &curve {
        println!("{n},{snr:e}");
    }
    println!("slope: {:.3}", log_log_slope(&curve)?);
    Ok(())
}

fn selftest() -> Result<()> {
    let checks: &[(&str, fn() -> Result<()>)] = &[
        ("linear solve residual", check_solver),
        ("channel determinism", check_channel_determinism),
        ("path loss reference point", check_path_loss),
        ("single-user precoder capacity", check_single_user_capacity),
        ("passive optimizer feasibility", check_passive_feasibility),
        ("active optimizer feasibility", check_active_feasibility),
        ("passive beats 1-bit enumeration", check_oracle_dominance),
        ("element sizing table", check_element_table),
        ("thermal noise floor", check_noise_floor),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("ok - {name}"),
            Err(e) => {
                println!("FAILED - {name}: {e}");
                failures += 1;
            }
        }
    }
    if failures > 0 {
        return Err(Error::Invariant(format!(
            "{failures} selftest check(s) failed"
        )));
    }
    println!("all checks passed");
    Ok(())
}

fn expect(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Invariant(msg.to_string()))
    }
}

fn tiny_channels(elements: usize, users: usize, seed: u64) -> Result<crate::channel::ChannelSet> {
    let geometry = crate::channel::SystemGeometry {
        bs_position: crate::channel::Position2D::new(0.0, -60.0),
        ris_position: crate::channel::Position2D::new(300.0, 10.0),
        user_positions: (0..users)
            .map(|k| crate::channel::Position2D::new(298.0 + k as f64, 2.0))
            .collect(),
        bs_antennas: 2,
        ris_elements: elements,
        bs_antenna_spacing: 0.5,
        ris_element_spacing: 0.5,
    };
    crate::channel::assemble_channels(&geometry, crate::channel::RiceanParams::new(1.0)?, seed)
}

fn check_solver() -> Result<()> {
    use num_complex::Complex64;
    let b = crate::numerics::ComplexMatrix::from_fn(4, 4, |i, j| {
        Complex64::new((i * 7 + j * 3) as f64 * 0.1, (i as f64 - j as f64) * 0.2)
    });
    let a = b.hermitian().matmul(&b)?.shifted(1.0)?;
    let rhs = crate::numerics::ComplexMatrix::from_fn(4, 1, |i, _| Complex64::new(i as f64, 1.0));
    let x = a.solve_hermitian_positive(&rhs)?;
    let residual = a.matmul(&x)?.sub(&rhs)?.frobenius_norm_sq().sqrt();
    expect(residual <= 1e-10, "solve residual above 1e-10")
}

fn check_channel_determinism() -> Result<()> {
    let a = tiny_channels(4, 2, 11)?;
    let b = tiny_channels(4, 2, 11)?;
    let c = tiny_channels(4, 2, 12)?;
    expect(
        crate::channel::channel_hash(&a) == crate::channel::channel_hash(&b),
        "same seed produced different channels",
    )?;
    expect(
        crate::channel::channel_hash(&a) != crate::channel::channel_hash(&c),
        "different seeds produced identical channels",
    )
}

fn check_path_loss() -> Result<()> {
    let pl = crate::channel::path_loss_db(200.0)?;
    expect(
        (pl - 87.92265990460758).abs() < 1e-9,
        "path loss at 200 m off its reference value",
    )
}

fn check_single_user_capacity() -> Result<()> {
    use num_complex::Complex64;
    let row = crate::numerics::ComplexMatrix::from_vec(
        1,
        4,
        vec![
            Complex64::new(1e-4, 2e-5),
            Complex64::new(-3e-5, 1e-4),
            Complex64::new(5e-5, 0.0),
            Complex64::new(0.0, -8e-5),
        ],
    )?;
    let p = 0.01;
    let sigma = 1e-13;
    let sol = crate::beamforming::wmmse_precoder(
        &[row.clone()],
        p,
        sigma,
        &crate::beamforming::OptimizerConfig {
            convergence_tol: 1e-10,
            ..Default::default()
        },
    )?;
    let capacity = (1.0 + p * row.frobenius_norm_sq() / sigma).log2();
    expect(
        (sol.achieved_sum_rate - capacity).abs() < 1e-6 * capacity,
        "single-user rate misses closed-form capacity",
    )
}

fn check_passive_feasibility() -> Result<()> {
    let ch = tiny_channels(6, 2, 21)?;
    let budget = crate::link::PowerBudget::all_at_bs(0.01)?;
    let noise = crate::link::NoiseModel::new(1e-13, 0.0)?;
    let cfg = crate::beamforming::OptimizerConfig::default();
    let sol = crate::beamforming::optimize_passive(&ch, &budget, &noise, &cfg)?;
    expect(
        sol.precoder.frobenius_norm_sq() <= budget.bs_power * (1.0 + 1e-9),
        "passive precoder over power budget",
    )?;
    expect(
        sol.rate_trajectory.windows(2).all(|p| p[1] >= p[0] - 1e-6),
        "passive trajectory not monotone",
    )?;
    let rand = crate::beamforming::random_phase_scheme(&ch, &budget, &noise, 7, &cfg)?;
    expect(
        sol.achieved_sum_rate >= rand.achieved_sum_rate - 1e-9,
        "optimized phases lost to random phases",
    )
}

fn check_active_feasibility() -> Result<()> {
    let ch = tiny_channels(6, 2, 22)?;
    let budget = crate::link::PowerBudget::from_split(0.01, 0.5)?;
    let noise = crate::link::NoiseModel::new(1e-13, 1e-13)?;
    let cfg = crate::beamforming::OptimizerConfig::default();
    let sol = crate::beamforming::optimize_active(&ch, &budget, &noise, &cfg)?;
    expect(
        sol.precoder.frobenius_norm_sq() <= budget.bs_power * (1.0 + 1e-9),
        "active precoder over power budget",
    )?;
    let crate::link::RisState::Active(state) = &sol.ris else {
        return Err(Error::Invariant(
            "active run returned a non-active state".into(),
        ));
    };
    let used =
        crate::link::reflect_power(state, &ch.g, &sol.precoder, noise.ris_element_noise_power)?;
    expect(
        used <= budget.ris_power * (1.0 + 1e-9),
        "active surface over reflect budget",
    )?;
    expect(
        sol.rate_trajectory.windows(2).all(|p| p[1] >= p[0] - 1e-6),
        "active trajectory not monotone",
    )
}

fn check_oracle_dominance() -> Result<()> {
    let ch = tiny_channels(2, 1, 23)?;
    let budget = crate::link::PowerBudget::all_at_bs(0.01)?;
    let noise = crate::link::NoiseModel::new(1e-13, 0.0)?;
    let cfg = crate::beamforming::OptimizerConfig::default();
    let oracle = crate::beamforming::brute_force_oracle(&ch, &budget, &noise, 1, 0)?;
    let cont = crate::beamforming::optimize_passive(&ch, &budget, &noise, &cfg)?;
    expect(
        cont.achieved_sum_rate >= oracle.achieved_sum_rate - 1e-9,
        "continuous optimizer lost to the 1-bit enumeration",
    )
}

fn check_element_table() -> Result<()> {
    for (ghz, expected) in [(5.0, 10_000), (10.0, 20_000), (20.0, 40_000)] {
        let s = DeploymentScenario {
            d: 200.0,
            d_t: 150.0,
            d_r: 200.0,
            frequency: ghz * 1e9,
            element_spacing: 0.5,
        };
        let n = required_elements(&s, WavelengthMode::Nominal)?;
        if n != expected {
            return Err(Error::Invariant(format!(
                "element table at {ghz} GHz: expected {expected}, got {n}"
            )));
        }
    }
    Ok(())
}

fn check_noise_floor() -> Result<()> {
    let single = thermal_noise_floor_dbm(100e6, 290.0, 1)?;
    let bank = thermal_noise_floor_dbm(100e6, 290.0, 10_000)?;
    expect((single + 93.98).abs() < 0.05, "single-element floor off")?;
    expect((bank + 54.0).abs() < 0.1, "10000-element floor off")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_expansion() {
        assert_eq!(
            parse_sweep("150:300:50").unwrap(),
            vec![150.0, 200.0, 250.0, 300.0]
        );
        assert_eq!(parse_sweep("300:300:50").unwrap(), vec![300.0]);
        assert_eq!(
            parse_sweep("100:120:10").unwrap(),
            vec![100.0, 110.0, 120.0]
        );
        assert!(parse_sweep("150:300").is_err());
        assert!(parse_sweep("150:100:50").is_err());
        assert!(parse_sweep("150:300:0").is_err());
        assert!(parse_sweep("a:b:c").is_err());
    }

    #[test]
    fn selftest_passes() {
        selftest().unwrap();
    }

    #[test]
    fn cli_parses_reference_invocations() {
        use clap::Parser;
        Cli::try_parse_from([
            "ris-linksim",
            "calc",
            "required-elements",
            "--d",
            "200",
            "--dt",
            "150",
            "--dr",
            "200",
            "--freq-ghz",
            "5",
            "--nominal-wavelength",
        ])
        .unwrap();
        Cli::try_parse_from([
            "ris-linksim",
            "calc",
            "noise-floor",
            "--bandwidth-mhz",
            "100",
            "--elements",
            "10000",
        ])
        .unwrap();
        Cli::try_parse_from([
            "ris-linksim",
            "simulate",
            "--trials",
            "2",
            "--sweep",
            "200:300:100",
            "--schemes",
            "passive,active",
            "--format",
            "json",
        ])
        .unwrap();
        assert!(Cli::try_parse_from(["ris-linksim", "calc", "noise-floor"]).is_err());
        assert!(Cli::try_parse_from(["ris-linksim", "frobnicate"]).is_err());
    }
}
