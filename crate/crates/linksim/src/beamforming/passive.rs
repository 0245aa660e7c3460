//! Passive-surface schemes: random phases, and alternating optimization with
//! a closed-form per-element phase pass.

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::link::{effective_channels, NoiseModel, PassiveRisState, PowerBudget, RisState};
use crate::numerics::ComplexMatrix;
use crate::rng;

use super::surrogate::{build_surrogate, RisSurrogate};
use super::wmmse::{
    best_of_inits, matched_filter_init, rate_from_rows, standard_inits, wmmse_loop,
};
use super::{relative_change, BeamformingSolution, OptimizerConfig};

fn validate_passive_inputs(
    channels: &ChannelSet,
    budget: &PowerBudget,
    noise: &NoiseModel,
) -> Result<()> {
    if channels.users() == 0 {
        return Err(Error::invalid("channel set has no users"));
    }
    if channels.h_d.len() != channels.f.len() {
        return Err(Error::DimensionMismatch {
            op: "passive_scheme",
            detail: "h_d and f user counts differ".into(),
        });
    }
    if budget.ris_power != 0.0 {
        return Err(Error::invalid(
            "passive schemes take the whole budget at the transmitter (ris_power must be 0)",
        ));
    }
    if !(noise.receiver_noise_power > 0.0) {
        return Err(Error::invalid("receiver noise power must be positive"));
    }
    Ok(())
}

/// Deterministic starting phases: co-phase every reflected path of the user
/// with the strongest surface-side channel, taking the transmitter direction
/// as that user's matched filter (or the first antenna if the direct link is
/// zero). Phase-aligns the reflected and direct components for that user.
pub fn co_phasing_init(channels: &ChannelSet) -> Result<Vec<f64>> {
    let k_star = (0..channels.users())
        .max_by(|&a, &b| {
            let na = channels.f[a].frobenius_norm_sq();
            let nb = channels.f[b].frobenius_norm_sq();
            na.partial_cmp(&nb).unwrap_or(std::cmp::Ordering::Equal)
        })
        .ok_or_else(|| Error::invalid("channel set has no users"))?;
    let m = channels.bs_antennas();
    let h = &channels.h_d[k_star];
    let norm = h.frobenius_norm_sq().sqrt();
    let dir = if norm > 0.0 {
        h.scaled(Complex64::new(1.0 / norm, 0.0))
    } else {
        ComplexMatrix::from_fn(m, 1, |r, _| {
            if r == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    };
    let gw = channels.g.matmul(&dir)?;
    let f = channels.f[k_star].entries();
    Ok((0..channels.ris_elements())
        .map(|n| {
            let path = f[n].conj() * gw.at(n, 0);
            if path.norm_sqr() > 0.0 {
                (-path.arg()).rem_euclid(std::f64::consts::TAU)
            } else {
                0.0
            }
        })
        .collect())
}

/// Surface phases drawn i.i.d. uniform from `seed`, then plain WMMSE on the
/// induced effective channels.
pub fn random_phase_scheme(
    channels: &ChannelSet,
    budget: &PowerBudget,
    noise: &NoiseModel,
    seed: u64,
    cfg: &OptimizerConfig,
) -> Result<BeamformingSolution> {
    cfg.validate()?;
    validate_passive_inputs(channels, budget, noise)?;
    let mut stream = rng::stream(seed);
    let phases: Vec<f64> = (0..channels.ris_elements())
        .map(|_| rng::uniform_phase(&mut stream))
        .collect();
    let state = PassiveRisState::new(phases);
    let rows = effective_channels(channels, &RisState::Passive(state.clone()))?;
    let mut solution =
        super::wmmse_precoder(&rows, budget.bs_power, noise.receiver_noise_power, cfg)?;
    solution.ris = RisState::Passive(state);
    Ok(solution)
}

/// One full sweep of closed-form per-element phase updates. Each step sets
/// `c_n = -z_n / |z_n|` where `z_n` collects the cross terms of the quadratic
/// surrogate at the current point; a flat objective (`z_n = 0`) keeps the
/// current phase. Maintains `y = U^H c` incrementally, so a sweep costs
/// `O(N K^2)`.
fn phase_pass(sur: &RisSurrogate, phases: &mut [f64], coeffs: &mut [Complex64]) {
    let tau = std::f64::consts::TAU;
    let mut y: Vec<Complex64> = sur
        .u_cols
        .iter()
        .map(|col| {
            col.iter()
                .zip(coeffs.iter())
                .map(|(un, cn)| un.conj() * cn)
                .sum()
        })
        .collect();
    for n in 0..sur.elements() {
        let mut uy = Complex64::new(0.0, 0.0);
        let mut diag = 0.0;
        for (col, yc) in sur.u_cols.iter().zip(&y) {
            uy += col[n] * yc;
            diag += col[n].norm_sqr();
        }
        // The diag(e) part multiplies |c_n|^2 == 1 and drops out on the unit
        // circle, so z only carries the U and b contributions.
        let z = uy - coeffs[n] * diag - sur.b[n];
        if z.norm_sqr() > 0.0 {
            let theta = (-z).arg().rem_euclid(tau);
            let new_c = Complex64::from_polar(1.0, theta);
            let delta = new_c - coeffs[n];
            phases[n] = theta;
            coeffs[n] = new_c;
            for (col, yc) in sur.u_cols.iter().zip(y.iter_mut()) {
                *yc += col[n].conj() * delta;
            }
        }
    }
}

fn optimize_passive_from(
    channels: &ChannelSet,
    budget: &PowerBudget,
    noise: &NoiseModel,
    cfg: &OptimizerConfig,
    mut phases: Vec<f64>,
) -> Result<BeamformingSolution> {
    let p_bs = budget.bs_power;
    let sigma = noise.receiver_noise_power;
    let noise_vec = vec![sigma; channels.users()];

    let mut state = PassiveRisState::new(phases.clone());
    phases = state.phases().to_vec();
    let mut coeffs = state.coefficients();
    let mut rows = effective_channels(channels, &RisState::Passive(state.clone()))?;
    let mut w = matched_filter_init(&rows, p_bs);
    let mut rate = rate_from_rows(&rows, &w, &noise_vec)?;
    let mut trajectory = vec![rate];
    let mut iterations = 0;

    for _ in 0..cfg.max_outer_iters {
        let inner = wmmse_loop(&rows, p_bs, &noise_vec, None, cfg, w)?;
        w = inner.precoder;
        let sur = build_surrogate(channels, &w, &inner.receive_scalars, &inner.weights, 0.0)?;
        phase_pass(&sur, &mut phases, &mut coeffs);
        state = PassiveRisState::new(phases.clone());
        rows = effective_channels(channels, &RisState::Passive(state.clone()))?;
        let new_rate = rate_from_rows(&rows, &w, &noise_vec)?;
        iterations += 1;
        trajectory.push(new_rate);
        let converged = relative_change(new_rate, rate) < cfg.convergence_tol;
        rate = new_rate;
        if converged {
            break;
        }
    }

    // The loop leaves the precoder one surface update behind; re-solve it on
    // the final phases, also trying the cold starts. The warm start is listed
    // first and its trajectory is monotone, so the appended rate never drops.
    let mut inits = vec![w.clone()];
    inits.extend(standard_inits(&rows, p_bs, &noise_vec));
    let polish = best_of_inits(&rows, p_bs, &noise_vec, None, cfg, inits)?;
    w = polish.precoder;
    rate = polish.rates.last().copied().unwrap_or(rate);
    trajectory.push(rate);

    Ok(BeamformingSolution {
        precoder: w,
        ris: RisState::Passive(state),
        achieved_sum_rate: rate,
        iterations_used: iterations,
        rate_trajectory: trajectory,
    })
}

/// Alternating passive-surface optimization: inner WMMSE for the precoder,
/// then one per-element phase sweep on the weighted-MSE surrogate, until the
/// sum rate stops improving.
pub fn optimize_passive(
    channels: &ChannelSet,
    budget: &PowerBudget,
    noise: &NoiseModel,
    cfg: &OptimizerConfig,
) -> Result<BeamformingSolution> {
    cfg.validate()?;
    validate_passive_inputs(channels, budget, noise)?;
    let mut best = optimize_passive_from(channels, budget, noise, cfg, co_phasing_init(channels)?)?;
    if cfg.restarts > 0 {
        for r in 0..cfg.restarts {
            let mut stream = rng::stream(rng::derive_seed(cfg.restart_seed, 0x5253, r as u64));
            let phases: Vec<f64> = (0..channels.ris_elements())
                .map(|_| rng::uniform_phase(&mut stream))
                .collect();
            let cand = optimize_passive_from(channels, budget, noise, cfg, phases)?;
            if cand.achieved_sum_rate > best.achieved_sum_rate {
                best = cand;
            }
        }
    }
    Ok(best)
}
