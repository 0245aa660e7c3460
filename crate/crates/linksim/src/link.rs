//! Reflection states, power/noise models and link-quality metrics.
//!
//! A surface element multiplies the impinging signal by a complex
//! coefficient: unit-modulus for a passive surface, unconstrained magnitude
//! for an active one. Active elements additionally inject their own thermal
//! noise, which reaches each user through the element-to-user channel and is
//! counted against the reflect-side power budget.

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

/// Passive surface: phase-only control, coefficients `exp(j*phase)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PassiveRisState {
    phases: Vec<f64>,
}

impl PassiveRisState {
    /// Phases are normalized into `[0, 2*pi)`.
    pub fn new(phases: Vec<f64>) -> Self {
        let tau = std::f64::consts::TAU;
        Self {
            phases: phases.into_iter().map(|p| p.rem_euclid(tau)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Unit-modulus reflection coefficients.
    pub fn coefficients(&self) -> Vec<Complex64> {
        self.phases
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect()
    }
}

/// Active surface: per-element complex coefficients plus the power budget and
/// element noise level they were designed against.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveRisState {
    pub coefficients: Vec<Complex64>,
    /// Reflect-side power budget in watts.
    pub reflect_power_budget: f64,
    /// Per-element noise power in watts injected by the active hardware.
    pub ris_noise_power: f64,
}

/// Surface configuration attached to a link computation.
#[derive(Debug, Clone, PartialEq)]
pub enum RisState {
    /// No surface in the loop; only the direct link carries signal.
    None,
    Passive(PassiveRisState),
    Active(ActiveRisState),
}

impl RisState {
    /// Reflection coefficients, if a surface is present.
    pub fn coefficients(&self) -> Option<Vec<Complex64>> {
        match self {
            RisState::None => None,
            RisState::Passive(p) => Some(p.coefficients()),
            RisState::Active(a) => Some(a.coefficients.clone()),
        }
    }

    /// Per-element noise power (zero unless active).
    pub fn element_noise_power(&self) -> f64 {
        match self {
            RisState::Active(a) => a.ris_noise_power,
            _ => 0.0,
        }
    }
}

/// Transmit-side power budgets in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    pub total_power: f64,
    pub bs_power: f64,
    pub ris_power: f64,
}

impl PowerBudget {
    pub fn new(bs_power: f64, ris_power: f64) -> Result<Self> {
        if !(bs_power > 0.0) || !bs_power.is_finite() {
            return Err(Error::invalid("bs_power must be positive and finite"));
        }
        if ris_power < 0.0 || !ris_power.is_finite() {
            return Err(Error::invalid("ris_power must be >= 0 and finite"));
        }
        Ok(Self {
            total_power: bs_power + ris_power,
            bs_power,
            ris_power,
        })
    }

    /// Splits a total budget, giving `bs_fraction` to the transmitter and the
    /// rest to the surface.
    pub fn from_split(total_power: f64, bs_fraction: f64) -> Result<Self> {
        if !(total_power > 0.0) || !total_power.is_finite() {
            return Err(Error::invalid("total_power must be positive and finite"));
        }
        if !(bs_fraction > 0.0 && bs_fraction <= 1.0) {
            return Err(Error::invalid("bs_fraction must lie in (0, 1]"));
        }
        Self::new(total_power * bs_fraction, total_power * (1.0 - bs_fraction))
    }

    /// Entire budget at the transmitter (passive and no-surface schemes).
    pub fn all_at_bs(total_power: f64) -> Result<Self> {
        Self::new(total_power, 0.0)
    }
}

/// Noise powers in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Receiver (user) noise power.
    pub receiver_noise_power: f64,
    /// Per-element noise power of an active surface.
    pub ris_element_noise_power: f64,
}

impl NoiseModel {
    pub fn new(receiver_noise_power: f64, ris_element_noise_power: f64) -> Result<Self> {
        if !(receiver_noise_power > 0.0) || !receiver_noise_power.is_finite() {
            return Err(Error::invalid("receiver noise power must be positive"));
        }
        if ris_element_noise_power < 0.0 || !ris_element_noise_power.is_finite() {
            return Err(Error::invalid("element noise power must be >= 0"));
        }
        Ok(Self {
            receiver_noise_power,
            ris_element_noise_power,
        })
    }
}

fn check_link_dims(
    h_d: &ComplexMatrix,
    f: &ComplexMatrix,
    g: &ComplexMatrix,
    coeff_len: Option<usize>,
) -> Result<()> {
    if h_d.cols() != 1 || f.cols() != 1 {
        return Err(Error::DimensionMismatch {
            op: "effective_channel",
            detail: "h_d and f must be column vectors".into(),
        });
    }
    if g.rows() != f.rows() || g.cols() != h_d.rows() {
        return Err(Error::DimensionMismatch {
            op: "effective_channel",
            detail: format!(
                "g is {}x{}, expected {}x{}",
                g.rows(),
                g.cols(),
                f.rows(),
                h_d.rows()
            ),
        });
    }
    if let Some(len) = coeff_len {
        if len != f.rows() {
            return Err(Error::DimensionMismatch {
                op: "effective_channel",
                detail: format!("{len} coefficients for {} elements", f.rows()),
            });
        }
    }
    Ok(())
}

/// Composite downlink row `h^H = h_d^H + f^H diag(c) G` for one user, as a
/// `1 x bs_antennas` matrix. With [`RisState::None`] the reflected term is
/// omitted entirely.
pub fn effective_channel(
    h_d: &ComplexMatrix,
    f: &ComplexMatrix,
    ris: &RisState,
    g: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let coeffs = ris.coefficients();
    check_link_dims(h_d, f, g, coeffs.as_ref().map(|c| c.len()))?;
    let m = h_d.rows();
    let mut row = vec![Complex64::new(0.0, 0.0); m];
    for (col, r) in row.iter_mut().enumerate() {
        *r = h_d.at(col, 0).conj();
    }
    if let Some(coeffs) = coeffs {
        let g_entries = g.entries();
        for n in 0..f.rows() {
            let fc = f.at(n, 0).conj() * coeffs[n];
            if fc.re == 0.0 && fc.im == 0.0 {
                continue;
            }
            let g_row = &g_entries[n * m..(n + 1) * m];
            for (r, &gv) in row.iter_mut().zip(g_row) {
                *r += fc * gv;
            }
        }
    }
    ComplexMatrix::from_vec(1, m, row)
}

/// Effective rows for every user of a channel set under one surface state.
pub fn effective_channels(channels: &ChannelSet, ris: &RisState) -> Result<Vec<ComplexMatrix>> {
    channels
        .h_d
        .iter()
        .zip(&channels.f)
        .map(|(h_d, f)| effective_channel(h_d, f, ris, &channels.g))
        .collect()
}

/// Noise power forwarded to one user by an active surface:
/// `sigma_v^2 * sum_n |f_n|^2 |c_n|^2`. Zero for passive or absent surfaces.
pub fn amplified_noise_power(f: &ComplexMatrix, ris: &RisState) -> f64 {
    match ris {
        RisState::Active(a) => {
            let s: f64 = f
                .entries()
                .iter()
                .zip(&a.coefficients)
                .map(|(fv, c)| fv.norm_sqr() * c.norm_sqr())
                .sum();
            a.ris_noise_power * s
        }
        _ => 0.0,
    }
}

/// Total effective noise power at user `k` (receiver noise plus any
/// surface-amplified noise).
pub fn user_noise_power(
    channels: &ChannelSet,
    ris: &RisState,
    noise: &NoiseModel,
    k: usize,
) -> f64 {
    noise.receiver_noise_power + amplified_noise_power(&channels.f[k], ris)
}

/// SINR of user `k` under precoder `w` (`bs_antennas x users`, column `j`
/// serving user `j`) and the given surface state.
pub fn sinr(
    k: usize,
    precoder: &ComplexMatrix,
    channels: &ChannelSet,
    ris: &RisState,
    noise: &NoiseModel,
) -> Result<f64> {
    let k_users = channels.users();
    if k >= k_users {
        return Err(Error::invalid(format!("user index {k} out of {k_users}")));
    }
    if precoder.rows() != channels.bs_antennas() || precoder.cols() != k_users {
        return Err(Error::DimensionMismatch {
            op: "sinr",
            detail: format!(
                "precoder is {}x{}, expected {}x{}",
                precoder.rows(),
                precoder.cols(),
                channels.bs_antennas(),
                k_users
            ),
        });
    }
    let row = effective_channel(&channels.h_d[k], &channels.f[k], ris, &channels.g)?;
    let gains = row.matmul(precoder)?;
    let desired = gains.at(0, k).norm_sqr();
    let mut interference = 0.0;
    for j in 0..k_users {
        if j != k {
            interference += gains.at(0, j).norm_sqr();
        }
    }
    Ok(desired / (interference + user_noise_power(channels, ris, noise, k)))
}

/// Sum rate `sum_k log2(1 + sinr_k)` in bps/Hz.
pub fn sum_rate(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|s| (1.0 + s).log2()).sum()
}

/// Power leaving an active surface: re-radiated signal plus injected noise,
/// `||diag(c) G W||_F^2 + sigma_v^2 * sum_n |c_n|^2`.
pub fn reflect_power(
    ris: &ActiveRisState,
    g: &ComplexMatrix,
    precoder: &ComplexMatrix,
    sigma_v_sq: f64,
) -> Result<f64> {
    if ris.coefficients.len() != g.rows() {
        return Err(Error::DimensionMismatch {
            op: "reflect_power",
            detail: format!(
                "{} coefficients for {} surface rows",
                ris.coefficients.len(),
                g.rows()
            ),
        });
    }
    let gw = g.matmul(precoder)?;
    let mut signal = 0.0;
    let mut coeff_sq = 0.0;
    for n in 0..g.rows() {
        let cn = ris.coefficients[n].norm_sqr();
        coeff_sq += cn;
        for j in 0..gw.cols() {
            signal += cn * gw.at(n, j).norm_sqr();
        }
    }
    Ok(signal + sigma_v_sq * coeff_sq)
}

/// Energy-conservation sanity check: received signal power can never exceed
/// the power that was transmitted into the channel.
pub fn snr_upper_bound_check(received_signal_power: f64, transmit_power: f64) -> bool {
    received_signal_power <= transmit_power
}
