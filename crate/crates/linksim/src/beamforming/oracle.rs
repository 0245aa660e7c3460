//! Exhaustive reference optimizer for tiny surfaces.
//!
//! Enumerates every quantized surface configuration, solves the precoder for
//! each with the same WMMSE core the real schemes use, and keeps the best.
//! Exponential in the element count, so the entry point enforces hard limits;
//! it exists purely as a test oracle for the continuous optimizers.

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::link::{
    amplified_noise_power, effective_channels, ActiveRisState, NoiseModel, PassiveRisState,
    PowerBudget, RisState,
};

use super::active::reflect_cap;
use super::passive::co_phasing_init;
use super::wmmse::{best_of_inits, matched_filter_init, standard_inits, wmmse_loop, WmmseOutcome};
use super::{BeamformingSolution, OptimizerConfig};

const MAX_ELEMENTS: usize = 4;
const MAX_PHASE_BITS: u32 = 8;
const MAX_CONFIGURATIONS: u128 = 10_000_000;

/// Number of configurations `brute_force_oracle` would visit: each element
/// takes one of `2^phase_bits` phases and, when `gain_levels >= 1` (active
/// mode), one of `gain_levels` magnitudes.
pub fn enumeration_count(elements: usize, phase_bits: u32, gain_levels: usize) -> u128 {
    let per_element = (1u128 << phase_bits) * gain_levels.max(1) as u128;
    per_element
        .checked_pow(elements as u32)
        .unwrap_or(u128::MAX)
}

/// Exhaustive search over quantized surface configurations.
///
/// `gain_levels == 0` enumerates a passive surface (unit-modulus phases
/// only). `gain_levels >= 1` enumerates an active surface whose per-element
/// magnitude grid spans `(0, cap_n]` in `gain_levels` steps, where `cap_n`
/// saturates the reflect budget on element `n` alone under a matched-filter
/// reference precoder; each candidate's precoder is then solved under the
/// exact reflect-power constraint, so every evaluated configuration is
/// feasible.
pub fn brute_force_oracle(
    channels: &ChannelSet,
    budget: &PowerBudget,
    noise: &NoiseModel,
    phase_bits: u32,
    gain_levels: usize,
) -> Result<BeamformingSolution> {
    let n = channels.ris_elements();
    if channels.users() == 0 {
        return Err(Error::invalid("channel set has no users"));
    }
    if n > MAX_ELEMENTS {
        return Err(Error::invalid(format!(
            "brute force limited to {MAX_ELEMENTS} elements, got {n}"
        )));
    }
    if phase_bits > MAX_PHASE_BITS {
        return Err(Error::invalid(format!(
            "brute force limited to {MAX_PHASE_BITS} phase bits, got {phase_bits}"
        )));
    }
    let count = enumeration_count(n, phase_bits, gain_levels);
    if count > MAX_CONFIGURATIONS {
        return Err(Error::invalid(format!(
            "enumeration budget exceeded: {count} > {MAX_CONFIGURATIONS} configurations"
        )));
    }
    if !(noise.receiver_noise_power > 0.0) {
        return Err(Error::invalid("receiver noise power must be positive"));
    }
    for link in channels.h_d.iter().chain(&channels.f) {
        if !link.is_finite() {
            return Err(Error::invalid("non-finite channel entries"));
        }
    }
    if !channels.g.is_finite() {
        return Err(Error::invalid("non-finite channel entries"));
    }

    let cfg = OptimizerConfig::default();
    let active = gain_levels >= 1;
    if active && !(budget.ris_power > 0.0) {
        return Err(Error::invalid(
            "active enumeration needs a positive surface power budget",
        ));
    }
    let phase_count = 1usize << phase_bits;
    let tau = std::f64::consts::TAU;

    // Per-element magnitude caps for the active grid: spend the whole budget
    // on one element under a matched-filter reference precoder.
    let caps: Vec<f64> = if active {
        let ref_phases = co_phasing_init(channels)?;
        let ref_rows = effective_channels(
            channels,
            &RisState::Passive(PassiveRisState::new(ref_phases)),
        )?;
        let w_ref = matched_filter_init(&ref_rows, budget.bs_power);
        let gw = channels.g.matmul(&w_ref)?;
        (0..n)
            .map(|e| {
                let mut q_ref = noise.ris_element_noise_power;
                for j in 0..channels.users() {
                    q_ref += gw.at(e, j).norm_sqr();
                }
                if q_ref > 0.0 {
                    (budget.ris_power / q_ref).sqrt()
                } else {
                    let g_row: f64 = (0..channels.g.cols())
                        .map(|p| channels.g.at(e, p).norm_sqr())
                        .sum();
                    if g_row > 0.0 {
                        (budget.ris_power / (budget.bs_power * g_row)).sqrt()
                    } else {
                        1.0
                    }
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    let solve =
        |phases: &[f64], coeffs: &[Complex64]| -> Result<Option<(WmmseOutcome, RisState)>> {
            let state = if active {
                RisState::Active(ActiveRisState {
                    coefficients: coeffs.to_vec(),
                    reflect_power_budget: budget.ris_power,
                    ris_noise_power: noise.ris_element_noise_power,
                })
            } else {
                RisState::Passive(PassiveRisState::new(phases.to_vec()))
            };
            let rows = effective_channels(channels, &state)?;
            let nv: Vec<f64> = (0..channels.users())
                .map(|k| noise.receiver_noise_power + amplified_noise_power(&channels.f[k], &state))
                .collect();
            let outcome = if active {
                let mut w = matched_filter_init(&rows, budget.bs_power);
                let coeff_sq: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
                if noise.ris_element_noise_power * coeff_sq > budget.ris_power {
                    // Injected-noise power alone exceeds the budget.
                    return Ok(None);
                }
                let cap = reflect_cap(
                    &channels.g,
                    coeffs,
                    budget.ris_power,
                    noise.ris_element_noise_power,
                );
                // Start inside both constraints so the trajectory stays monotone.
                let qw = cap.q.matmul(&w)?;
                let used = w.inner(&qw)?.re;
                if used > cap.budget {
                    let scale = if cap.budget > 0.0 {
                        (cap.budget / used).sqrt() * (1.0 - 1e-12)
                    } else {
                        0.0
                    };
                    w = w.scaled(Complex64::new(scale, 0.0));
                }
                wmmse_loop(&rows, budget.bs_power, &nv, Some(&cap), &cfg, w)?
            } else {
                let inits = standard_inits(&rows, budget.bs_power, &nv);
                best_of_inits(&rows, budget.bs_power, &nv, None, &cfg, inits)?
            };
            Ok(Some((outcome, state)))
        };

    let mut best: Option<BeamformingSolution> = None;
    let mut digits = vec![0usize; n];
    let radix = phase_count * gain_levels.max(1);
    loop {
        let mut phases = Vec::with_capacity(n);
        let mut coeffs = Vec::with_capacity(n);
        for (e, &d) in digits.iter().enumerate() {
            let phase = tau * (d % phase_count) as f64 / phase_count as f64;
            let magnitude = if active {
                caps[e] * (d / phase_count + 1) as f64 / gain_levels as f64
            } else {
                1.0
            };
            phases.push(phase);
            coeffs.push(Complex64::from_polar(magnitude, phase));
        }
        if let Some((outcome, state)) = solve(&phases, &coeffs)? {
            let rate = *outcome.rates.last().expect("wmmse trajectory is non-empty");
            if best.as_ref().map_or(true, |b| rate > b.achieved_sum_rate) {
                best = Some(BeamformingSolution {
                    precoder: outcome.precoder,
                    ris: state,
                    achieved_sum_rate: rate,
                    iterations_used: outcome.iterations,
                    rate_trajectory: outcome.rates,
                });
            }
        }
        // Odometer step over the mixed-radix configuration index.
        let mut pos = 0;
        loop {
            if pos == n {
                return best.ok_or_else(|| Error::invalid("no feasible configuration enumerated"));
            }
            digits[pos] += 1;
            if digits[pos] < radix {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::{optimize_active, optimize_passive, wmmse_precoder};
    use crate::channel::{assemble_channels, Position2D, RiceanParams, SystemGeometry};
    use crate::numerics::ComplexMatrix;

    fn instance(n: usize, users: usize, seed: u64) -> ChannelSet {
        let geometry = SystemGeometry {
            bs_position: Position2D::new(0.0, -60.0),
            ris_position: Position2D::new(300.0, 10.0),
            user_positions: (0..users)
                .map(|k| Position2D::new(297.0 + 2.0 * k as f64, 1.0 + k as f64))
                .collect(),
            bs_antennas: 2,
            ris_elements: n,
            bs_antenna_spacing: 0.5,
            ris_element_spacing: 0.5,
        };
        assemble_channels(&geometry, RiceanParams::new(1.0).unwrap(), seed).unwrap()
    }

    #[test]
    fn configuration_counts() {
        assert_eq!(enumeration_count(2, 1, 0), 4);
        assert_eq!(enumeration_count(1, 8, 0), 256);
        assert_eq!(enumeration_count(2, 3, 4), 1024);
        assert_eq!(enumeration_count(0, 8, 0), 1);
    }

    #[test]
    fn rejects_oversized_enumerations() {
        let ch = instance(4, 1, 1);
        let budget = PowerBudget::all_at_bs(0.01).unwrap();
        let noise = NoiseModel::new(1e-13, 0.0).unwrap();
        assert!(brute_force_oracle(&ch, &budget, &noise, 8, 4).is_err());
        let ch5 = instance(5, 1, 1);
        assert!(brute_force_oracle(&ch5, &budget, &noise, 1, 0).is_err());
        assert!(brute_force_oracle(&ch, &budget, &noise, 9, 0).is_err());
    }

    #[test]
    fn no_surface_reduces_to_plain_wmmse() {
        let ch = instance(0, 2, 2);
        let budget = PowerBudget::all_at_bs(0.01).unwrap();
        let noise = NoiseModel::new(1e-13, 0.0).unwrap();
        let oracle = brute_force_oracle(&ch, &budget, &noise, 3, 0).unwrap();
        let rows = effective_channels(&ch, &RisState::None).unwrap();
        let plain = wmmse_precoder(
            &rows,
            budget.bs_power,
            noise.receiver_noise_power,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert_eq!(oracle.precoder, plain.precoder);
        assert_eq!(oracle.achieved_sum_rate, plain.achieved_sum_rate);
    }

    #[test]
    fn continuous_passive_dominates_coarse_grid() {
        // 1-bit quantization on N=2: the continuous optimizer's feasible set
        // contains all four enumerated points.
        for seed in 0..4 {
            let mut ch = instance(2, 1, 10 + seed);
            ch.h_d[0] = ComplexMatrix::zeros(2, 1);
            let budget = PowerBudget::all_at_bs(0.01).unwrap();
            let noise = NoiseModel::new(1e-13, 0.0).unwrap();
            let oracle = brute_force_oracle(&ch, &budget, &noise, 1, 0).unwrap();
            let cont = optimize_passive(&ch, &budget, &noise, &OptimizerConfig::default()).unwrap();
            assert!(
                cont.achieved_sum_rate >= oracle.achieved_sum_rate - 1e-9,
                "continuous {} below 1-bit oracle {}",
                cont.achieved_sum_rate,
                oracle.achieved_sum_rate
            );
        }
    }

    #[test]
    fn fine_grid_matches_continuous_passive_single_element() {
        // At 8 bits the grid brackets the continuous optimum; the two must
        // agree to the quantization slack.
        let ch = instance(1, 1, 20);
        let budget = PowerBudget::all_at_bs(0.01).unwrap();
        let noise = NoiseModel::new(1e-13, 0.0).unwrap();
        let oracle = brute_force_oracle(&ch, &budget, &noise, 8, 0).unwrap();
        let cont = optimize_passive(&ch, &budget, &noise, &OptimizerConfig::default()).unwrap();
        assert!(
            (cont.achieved_sum_rate - oracle.achieved_sum_rate).abs() < 1e-3,
            "continuous {} vs 8-bit oracle {}",
            cont.achieved_sum_rate,
            oracle.achieved_sum_rate
        );
    }

    #[test]
    fn active_enumeration_stays_feasible_and_below_optimizer() {
        let mut ch = instance(1, 1, 30);
        ch.h_d[0] = ComplexMatrix::zeros(2, 1);
        let budget = PowerBudget::from_split(0.01, 0.5).unwrap();
        let noise = NoiseModel::new(1e-13, 1e-13).unwrap();
        let oracle = brute_force_oracle(&ch, &budget, &noise, 6, 8).unwrap();
        let RisState::Active(state) = &oracle.ris else {
            panic!("expected an active state")
        };
        let used = crate::link::reflect_power(
            state,
            &ch.g,
            &oracle.precoder,
            noise.ris_element_noise_power,
        )
        .unwrap();
        assert!(used <= budget.ris_power * (1.0 + 1e-9));
        let cfg = OptimizerConfig {
            convergence_tol: 1e-9,
            ..OptimizerConfig::default()
        };
        let cont = optimize_active(&ch, &budget, &noise, &cfg).unwrap();
        assert!(
            cont.achieved_sum_rate >= oracle.achieved_sum_rate - 1e-3,
            "continuous {} vs active oracle {}",
            cont.achieved_sum_rate,
            oracle.achieved_sum_rate
        );
    }
}
