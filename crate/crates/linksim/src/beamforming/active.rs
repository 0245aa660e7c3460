//! Active-surface scheme: joint precoder / amplify-and-phase optimization.
//!
//! The coefficient block minimizes the same weighted-MSE surrogate as the
//! passive pass, but over unconstrained complex coefficients subject to the
//! reflect-power budget `sum_n s_n |c_n|^2 <= P_A` — a quadratic program with
//! one quadratic constraint. Its KKT system `(A + lambda S) c = b` is solved
//! through the Woodbury identity (A is a diagonal plus K^2 skinny columns),
//! with bisection on the dual `lambda`. The precoder block runs WMMSE under
//! both the transmit budget and the re-radiated power cap induced by the
//! current coefficients, so every block update stays inside the feasible set
//! and the trajectory is monotone.

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::link::{
    amplified_noise_power, effective_channels, ActiveRisState, NoiseModel, PowerBudget, RisState,
};
use crate::numerics::ComplexMatrix;

use super::passive::co_phasing_init;
use super::surrogate::{build_surrogate, RisSurrogate};
use super::wmmse::{
    best_of_inits, matched_filter_init, rate_from_rows, standard_inits, wmmse_loop, QuadraticCap,
};
use super::{relative_change, BeamformingSolution, OptimizerConfig};

const FEAS_SLACK: f64 = 1e-12;
const POWER_RESIDUAL: f64 = 1e-9;

/// `(diag(d) + U U^H) x = b` restricted to rows with `s_n > 0`, where
/// `d_n = e_n + lambda s_n`. Rows with `s_n == 0` carry no power and no
/// objective terms (their `U` and `b` entries vanish); they keep `current`.
/// Rows with `d_n == 0` but `s_n > 0` also have vanishing `U`/`b` entries and
/// take the zero-power limit value 0.
fn solve_dual(
    sur: &RisSurrogate,
    lambda: f64,
    current: &[Complex64],
) -> Result<(Vec<Complex64>, f64)> {
    let n = sur.elements();
    let r = sur.u_cols.len();
    let mut dinv = vec![0.0_f64; n];
    for i in 0..n {
        let d = sur.e_diag[i] + lambda * sur.s_diag[i];
        if d > 0.0 {
            dinv[i] = 1.0 / d;
        }
    }
    // Small system M = I + U^H D^{-1} U, rhs g = U^H D^{-1} b.
    let mut m = ComplexMatrix::identity(r);
    let mut g = ComplexMatrix::zeros(r, 1);
    for c1 in 0..r {
        let col1 = &sur.u_cols[c1];
        let mut gv = Complex64::new(0.0, 0.0);
        for i in 0..n {
            if dinv[i] > 0.0 {
                gv += col1[i].conj() * sur.b[i] * dinv[i];
            }
        }
        g.set(c1, 0, gv);
        for c2 in c1..r {
            let col2 = &sur.u_cols[c2];
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                if dinv[i] > 0.0 {
                    acc += col1[i].conj() * col2[i] * dinv[i];
                }
            }
            let base = m.at(c1, c2);
            m.set(c1, c2, base + acc);
            if c2 != c1 {
                let base = m.at(c2, c1);
                m.set(c2, c1, base + acc.conj());
            }
        }
    }
    let y = m.solve_hermitian_positive(&g)?;
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut power = 0.0;
    for i in 0..n {
        if sur.s_diag[i] == 0.0 {
            x[i] = current[i];
            continue;
        }
        if dinv[i] > 0.0 {
            let mut uy = Complex64::new(0.0, 0.0);
            for (col, yc) in sur.u_cols.iter().zip(y.entries()) {
                uy += col[i] * yc;
            }
            x[i] = (sur.b[i] - uy) * dinv[i];
            power += sur.s_diag[i] * x[i].norm_sqr();
        }
    }
    Ok((x, power))
}

/// Unconstrained minimizer in the noiseless case (`e == 0`), where the
/// quadratic is `||U^H c - m||^2` up to constants: the minimum-`S`-norm
/// solution `c = S^{-1} U (U^H S^{-1} U)^{-1} m`. Fails (returns `None`) when
/// `U` is rank deficient on the powered rows.
fn min_s_norm(sur: &RisSurrogate, current: &[Complex64]) -> Option<(Vec<Complex64>, f64)> {
    let n = sur.elements();
    let r = sur.u_cols.len();
    let mut m = ComplexMatrix::zeros(r, r);
    for c1 in 0..r {
        for c2 in c1..r {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                if sur.s_diag[i] > 0.0 {
                    acc += sur.u_cols[c1][i].conj() * sur.u_cols[c2][i] / sur.s_diag[i];
                }
            }
            m.set(c1, c2, acc);
            if c2 != c1 {
                m.set(c2, c1, acc.conj());
            }
        }
    }
    let rhs = ComplexMatrix::from_fn(r, 1, |i, _| sur.b_coeffs[i]);
    let y = m.solve_hermitian_positive(&rhs).ok()?;
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut power = 0.0;
    for i in 0..n {
        if sur.s_diag[i] == 0.0 {
            x[i] = current[i];
            continue;
        }
        let mut uy = Complex64::new(0.0, 0.0);
        for (col, yc) in sur.u_cols.iter().zip(y.entries()) {
            uy += col[i] * yc;
        }
        x[i] = uy / sur.s_diag[i];
        power += sur.s_diag[i] * x[i].norm_sqr();
    }
    if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some((x, power))
    } else {
        None
    }
}

/// Coefficient block: minimize the surrogate subject to the reflect budget.
fn update_coefficients(
    sur: &RisSurrogate,
    p_a: f64,
    current: &[Complex64],
) -> Result<Vec<Complex64>> {
    let b_norm_sq: f64 = sur.b.iter().map(|z| z.norm_sqr()).sum();
    if b_norm_sq == 0.0 {
        // Objective reduces to c^H A c >= 0: zero every powered element.
        let mut x = current.to_vec();
        for (i, xi) in x.iter_mut().enumerate() {
            if sur.s_diag[i] > 0.0 {
                *xi = Complex64::new(0.0, 0.0);
            }
        }
        return Ok(x);
    }

    // Unconstrained (lambda = 0) attempt, taken when it respects the budget.
    let noiseless = sur.e_diag.iter().all(|&e| e == 0.0);
    let slack = if noiseless {
        min_s_norm(sur, current)
    } else {
        solve_dual(sur, 0.0, current).ok()
    };
    let mut have_slack_bound = false;
    if let Some((x, power)) = slack {
        if power <= p_a * (1.0 + FEAS_SLACK) {
            return Ok(x);
        }
        have_slack_bound = true;
    }

    // Dual bisection. The cap lambda_hi guarantees feasibility:
    // power(lambda) <= (1/lambda^2) * sum |b_n|^2 / s_n.
    let weighted: f64 = sur
        .b
        .iter()
        .zip(&sur.s_diag)
        .filter(|(_, &s)| s > 0.0)
        .map(|(b, &s)| b.norm_sqr() / s)
        .sum();
    let mut lo = 0.0_f64;
    let mut hi = (weighted / p_a).sqrt().max(1e-300);
    let hi0 = hi;
    let (mut x_hi, mut p_hi) = solve_dual(sur, hi, current)?;
    for _ in 0..300 {
        if p_hi >= p_a * (1.0 - POWER_RESIDUAL) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        // Without a verified infeasible lower end, stop before the dual gets
        // so small that the Woodbury cancellation degrades the solve.
        if !have_slack_bound && mid < 1e-12 * hi0 {
            break;
        }
        let (x_mid, p_mid) = solve_dual(sur, mid, current)?;
        if p_mid > p_a {
            lo = mid;
        } else {
            hi = mid;
            x_hi = x_mid;
            p_hi = p_mid;
        }
    }
    Ok(x_hi)
}

/// Re-radiated power cap induced on the precoder by fixed coefficients:
/// `|| diag(c) G W ||_F^2 <= P_A - sigma_v^2 sum |c_n|^2`, written as the
/// quadratic `sum_j w_j^H Q w_j <= budget` with `Q = G^H diag(|c|^2) G`.
pub(crate) fn reflect_cap(
    g: &ComplexMatrix,
    coeffs: &[Complex64],
    p_a: f64,
    sigma_v_sq: f64,
) -> QuadraticCap {
    let coeff_sq: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
    let p_rad = (p_a - sigma_v_sq * coeff_sq).max(0.0);
    let m = g.cols();
    let n = g.rows();
    let mut q = ComplexMatrix::zeros(m, m);
    for e in 0..n {
        let cn_sq = coeffs[e].norm_sqr();
        if cn_sq == 0.0 {
            continue;
        }
        for p in 0..m {
            let gp = g.at(e, p).conj();
            for t in p..m {
                let v = q.at(p, t) + gp * g.at(e, t) * cn_sq;
                q.set(p, t, v);
            }
        }
    }
    for p in 0..m {
        for t in 0..p {
            q.set(p, t, q.at(t, p).conj());
        }
    }
    QuadraticCap { q, budget: p_rad }
}

/// Joint active-surface optimization: alternating WMMSE (under transmit and
/// re-radiated power caps) and dual-bisected coefficient updates.
pub fn optimize_active(
    channels: &ChannelSet,
    budget: &PowerBudget,
    noise: &NoiseModel,
    cfg: &OptimizerConfig,
) -> Result<BeamformingSolution> {
    cfg.validate()?;
    if channels.users() == 0 {
        return Err(Error::invalid("channel set has no users"));
    }
    if !(budget.ris_power > 0.0) {
        return Err(Error::invalid(
            "active scheme needs a positive surface power budget",
        ));
    }
    if !(noise.receiver_noise_power > 0.0) {
        return Err(Error::invalid("receiver noise power must be positive"));
    }
    let mut best = optimize_active_from(channels, budget, noise, cfg, co_phasing_init(channels)?)?;
    if cfg.restarts > 0 {
        for r in 0..cfg.restarts {
            let mut stream =
                crate::rng::stream(crate::rng::derive_seed(cfg.restart_seed, 0x5241, r as u64));
            let phases: Vec<f64> = (0..channels.ris_elements())
                .map(|_| crate::rng::uniform_phase(&mut stream))
                .collect();
            let cand = optimize_active_from(channels, budget, noise, cfg, phases)?;
            if cand.achieved_sum_rate > best.achieved_sum_rate {
                best = cand;
            }
        }
    }
    Ok(best)
}

fn optimize_active_from(
    channels: &ChannelSet,
    budget: &PowerBudget,
    noise: &NoiseModel,
    cfg: &OptimizerConfig,
    init_phases: Vec<f64>,
) -> Result<BeamformingSolution> {
    let p_bs = budget.bs_power;
    let p_a = budget.ris_power;
    let sigma_v_sq = noise.ris_element_noise_power;
    let n = channels.ris_elements();
    let k_users = channels.users();

    // Equal-magnitude start saturating the reflect budget at the initial
    // matched-filter precoder.
    let unit: Vec<Complex64> = init_phases
        .iter()
        .map(|&p| Complex64::from_polar(1.0, p))
        .collect();
    let state = |coeffs: Vec<Complex64>| {
        RisState::Active(ActiveRisState {
            coefficients: coeffs,
            reflect_power_budget: p_a,
            ris_noise_power: sigma_v_sq,
        })
    };
    let rows0 = effective_channels(channels, &state(unit.clone()))?;
    let mut w = matched_filter_init(&rows0, p_bs);
    let gw = channels.g.matmul(&w)?;
    let mut unit_cost = sigma_v_sq * n as f64;
    for e in 0..n {
        for j in 0..k_users {
            unit_cost += gw.at(e, j).norm_sqr();
        }
    }
    let magnitude = if unit_cost > 0.0 {
        (p_a / unit_cost).sqrt()
    } else {
        1.0
    };
    let mut coeffs: Vec<Complex64> = unit.iter().map(|z| z * magnitude).collect();

    let noise_vec = |coeffs: &[Complex64]| -> Vec<f64> {
        let st = state(coeffs.to_vec());
        (0..k_users)
            .map(|k| noise.receiver_noise_power + amplified_noise_power(&channels.f[k], &st))
            .collect()
    };

    let mut rows = effective_channels(channels, &state(coeffs.clone()))?;
    let mut nv = noise_vec(&coeffs);
    let mut rate = rate_from_rows(&rows, &w, &nv)?;
    let mut trajectory = vec![rate];
    let mut iterations = 0;

    for _ in 0..cfg.max_outer_iters {
        let cap = reflect_cap(&channels.g, &coeffs, p_a, sigma_v_sq);
        let inner = wmmse_loop(&rows, p_bs, &nv, Some(&cap), cfg, w)?;
        w = inner.precoder;

        let sur = build_surrogate(
            channels,
            &w,
            &inner.receive_scalars,
            &inner.weights,
            sigma_v_sq,
        )?;
        coeffs = update_coefficients(&sur, p_a, &coeffs)?;

        rows = effective_channels(channels, &state(coeffs.clone()))?;
        nv = noise_vec(&coeffs);
        let new_rate = rate_from_rows(&rows, &w, &nv)?;
        iterations += 1;
        trajectory.push(new_rate);
        let converged = relative_change(new_rate, rate) < cfg.convergence_tol;
        rate = new_rate;
        if converged {
            break;
        }
    }

    // The loop leaves the precoder one coefficient update behind; re-solve it
    // under the final coefficients' cap, also trying the cold starts. The
    // warm start is feasible for this cap (the coefficient step enforced the
    // joint budget) and listed first, so the appended rate never drops.
    let cap = reflect_cap(&channels.g, &coeffs, p_a, sigma_v_sq);
    let mut inits = vec![w.clone()];
    inits.extend(standard_inits(&rows, p_bs, &nv));
    let polish = best_of_inits(&rows, p_bs, &nv, Some(&cap), cfg, inits)?;
    w = polish.precoder;
    rate = polish.rates.last().copied().unwrap_or(rate);
    trajectory.push(rate);

    Ok(BeamformingSolution {
        precoder: w,
        ris: state(coeffs),
        achieved_sum_rate: rate,
        iterations_used: iterations,
        rate_trajectory: trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{assemble_channels, Position2D, RiceanParams, SystemGeometry};
    use crate::link::{effective_channel, reflect_power};

    fn instance(n: usize, users: usize, seed: u64) -> ChannelSet {
        let geometry = SystemGeometry {
            bs_position: Position2D::new(0.0, -60.0),
            ris_position: Position2D::new(300.0, 10.0),
            user_positions: (0..users)
                .map(|k| Position2D::new(296.0 + 3.0 * k as f64, 2.0 - 2.0 * k as f64))
                .collect(),
            bs_antennas: 4,
            ris_elements: n,
            bs_antenna_spacing: 0.5,
            ris_element_spacing: 0.5,
        };
        assemble_channels(&geometry, RiceanParams::new(1.0).unwrap(), seed).unwrap()
    }

    fn split_budget() -> PowerBudget {
        PowerBudget::from_split(0.01, 0.5).unwrap()
    }

    fn active_noise() -> NoiseModel {
        NoiseModel::new(1e-13, 1e-13).unwrap()
    }

    #[test]
    fn monotone_and_feasible_on_random_instances() {
        for seed in 0..5 {
            let ch = instance(16, 4, 60 + seed);
            let budget = split_budget();
            let noise = active_noise();
            let sol = optimize_active(&ch, &budget, &noise, &OptimizerConfig::default()).unwrap();
            for pair in sol.rate_trajectory.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-6, "trajectory decreased: {pair:?}");
            }
            assert!(sol.precoder.frobenius_norm_sq() <= budget.bs_power * (1.0 + 1e-9));
            let RisState::Active(state) = &sol.ris else {
                panic!("expected an active state")
            };
            let used =
                reflect_power(state, &ch.g, &sol.precoder, noise.ris_element_noise_power).unwrap();
            assert!(
                used <= budget.ris_power * (1.0 + 1e-9),
                "reflect power {used} over budget {}",
                budget.ris_power
            );
        }
    }

    #[test]
    fn rejects_zero_surface_budget() {
        let ch = instance(8, 2, 70);
        let budget = PowerBudget::all_at_bs(0.01).unwrap();
        assert!(
            optimize_active(&ch, &budget, &active_noise(), &OptimizerConfig::default()).is_err()
        );
    }

    #[test]
    fn beats_passive_given_headroom() {
        // Noiseless elements and a huge reflect budget: the active feasible
        // set contains every passive configuration, so the achieved rate must
        // not fall below passive's.
        let ch = instance(12, 3, 71);
        let cfg = OptimizerConfig::default();
        let noiseless = NoiseModel::new(1e-13, 0.0).unwrap();
        let passive = super::super::optimize_passive(
            &ch,
            &PowerBudget::all_at_bs(0.005).unwrap(),
            &noiseless,
            &cfg,
        )
        .unwrap();
        let active = optimize_active(
            &ch,
            &PowerBudget::new(0.005, 1e3).unwrap(),
            &noiseless,
            &cfg,
        )
        .unwrap();
        assert!(
            active.achieved_sum_rate >= passive.achieved_sum_rate - 1e-6,
            "active {} vs passive {}",
            active.achieved_sum_rate,
            passive.achieved_sum_rate
        );
    }

    #[test]
    fn single_element_single_user_matches_gain_phase_grid() {
        // K=1, zero direct link, N=1: the optimum pours the whole reflect
        // budget into the lone element; a 2-D (phase, gain) grid must not
        // beat the optimizer by more than the grid resolution.
        let mut ch = instance(1, 1, 72);
        ch.h_d[0] = ComplexMatrix::zeros(4, 1);
        let budget = split_budget();
        let noise = active_noise();
        let cfg = OptimizerConfig {
            convergence_tol: 1e-9,
            ..OptimizerConfig::default()
        };
        let sol = optimize_active(&ch, &budget, &noise, &cfg).unwrap();

        let sigma_v_sq = noise.ris_element_noise_power;
        let mut best = 0.0_f64;
        for gi in 0..=100 {
            for pi in 0..64 {
                let phase = std::f64::consts::TAU * pi as f64 / 64.0;
                // Reference gain ceiling from a matched-filter precoder.
                let w_ref = matched_filter_init(
                    &[effective_channel(
                        &ch.h_d[0],
                        &ch.f[0],
                        &RisState::Passive(crate::link::PassiveRisState::new(vec![phase])),
                        &ch.g,
                    )
                    .unwrap()],
                    budget.bs_power,
                );
                let q1 = ch.g.matmul(&w_ref).unwrap().at(0, 0).norm_sqr();
                let g_max = (budget.ris_power / (q1 + sigma_v_sq)).sqrt();
                let gain = g_max * gi as f64 / 100.0;
                let coeffs = vec![Complex64::from_polar(gain, phase)];
                let st = RisState::Active(ActiveRisState {
                    coefficients: coeffs.clone(),
                    reflect_power_budget: budget.ris_power,
                    ris_noise_power: sigma_v_sq,
                });
                let row = effective_channel(&ch.h_d[0], &ch.f[0], &st, &ch.g).unwrap();
                let nv = noise.receiver_noise_power + amplified_noise_power(&ch.f[0], &st);
                let inner = wmmse_loop(
                    &[row.clone()],
                    budget.bs_power,
                    &[nv],
                    None,
                    &cfg,
                    matched_filter_init(&[row], budget.bs_power),
                )
                .unwrap();
                // Keep only grid points inside the reflect budget.
                let st_inner = ActiveRisState {
                    coefficients: coeffs,
                    reflect_power_budget: budget.ris_power,
                    ris_noise_power: sigma_v_sq,
                };
                let used = reflect_power(&st_inner, &ch.g, &inner.precoder, sigma_v_sq).unwrap();
                if used <= budget.ris_power * (1.0 + 1e-9) {
                    best = best.max(*inner.rates.last().unwrap());
                }
            }
        }
        assert!(
            sol.achieved_sum_rate >= best - 1e-3,
            "optimizer {} vs grid {best}",
            sol.achieved_sum_rate
        );
    }

    #[test]
    fn deterministic_across_runs() {
        let ch = instance(10, 3, 73);
        let budget = split_budget();
        let noise = active_noise();
        let cfg = OptimizerConfig::default();
        let a = optimize_active(&ch, &budget, &noise, &cfg).unwrap();
        let b = optimize_active(&ch, &budget, &noise, &cfg).unwrap();
        assert_eq!(a.precoder, b.precoder);
        assert_eq!(a.ris, b.ris);
        assert_eq!(a.achieved_sum_rate, b.achieved_sum_rate);
    }
}
