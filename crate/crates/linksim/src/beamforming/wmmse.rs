//! Weighted-MMSE precoder engine.
//!
//! Sum-rate maximization is equivalent to minimizing the weighted MSE cost
//! `sum_k rho_k e_k - ln rho_k` over receive scalars, weights and the
//! precoder. Each block minimization is exact, so the cost never increases
//! and the implied sum rate never decreases. The precoder block is a
//! weighted least-squares problem under the transmit power cap (and, for
//! active-surface outer loops, a second quadratic cap on re-radiated power),
//! solved through its KKT system with bisection on the dual variables.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::link::{sum_rate, RisState};
use crate::numerics::ComplexMatrix;

use super::{relative_change, BeamformingSolution, OptimizerConfig};

/// Relative slack accepted when checking a power constraint as satisfied.
const FEAS_SLACK: f64 = 1e-12;
/// Relative band within which a bisected power residual is accepted.
const POWER_RESIDUAL: f64 = 1e-9;

/// Additional quadratic constraint `sum_k w_k^H q w_k <= budget` on the
/// precoder (the active surface's re-radiated signal power).
#[derive(Debug, Clone)]
pub(crate) struct QuadraticCap {
    pub q: ComplexMatrix,
    pub budget: f64,
}

pub(crate) struct WmmseOutcome {
    pub precoder: ComplexMatrix,
    /// Sum rate at the initial point, then after every iteration.
    pub rates: Vec<f64>,
    pub receive_scalars: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub iterations: usize,
}

/// Per-user products `a_kj = h_k^H w_j` as a K x K matrix.
fn cross_gains(rows: &[ComplexMatrix], w: &ComplexMatrix) -> Result<ComplexMatrix> {
    let k = rows.len();
    let mut gains = ComplexMatrix::zeros(k, k);
    for (i, row) in rows.iter().enumerate() {
        let g = row.matmul(w)?;
        for j in 0..k {
            gains.set(i, j, g.at(0, j));
        }
    }
    Ok(gains)
}

fn sinrs_from_gains(gains: &ComplexMatrix, noise: &[f64]) -> Vec<f64> {
    let k = noise.len();
    (0..k)
        .map(|i| {
            let desired = gains.at(i, i).norm_sqr();
            let mut denom = noise[i];
            for j in 0..k {
                if j != i {
                    denom += gains.at(i, j).norm_sqr();
                }
            }
            desired / denom
        })
        .collect()
}

/// MMSE receive scalars `u_k = a_kk / (sum_j |a_kj|^2 + n_k)` and weights
/// `rho_k = 1 / e_k` with `e_k` the resulting minimum MSE.
fn mmse_update(gains: &ComplexMatrix, noise: &[f64]) -> (Vec<Complex64>, Vec<f64>) {
    let k = noise.len();
    let mut u = Vec::with_capacity(k);
    let mut rho = Vec::with_capacity(k);
    for i in 0..k {
        let mut total = noise[i];
        for j in 0..k {
            total += gains.at(i, j).norm_sqr();
        }
        let a = gains.at(i, i);
        let ui = a / total;
        // e = 1 - |a|^2 / total, in (0, 1] since total >= |a|^2 + noise.
        let e = (1.0 - a.norm_sqr() / total).max(1e-300);
        u.push(ui);
        rho.push(1.0 / e);
    }
    (u, rho)
}

struct PrecoderProblem<'a> {
    r: ComplexMatrix,
    b: ComplexMatrix,
    p_bs: f64,
    cap: Option<&'a QuadraticCap>,
}

impl PrecoderProblem<'_> {
    fn solve_at(&self, lambda1: f64, lambda2: f64) -> Result<ComplexMatrix> {
        let mut a = self.r.shifted(lambda1)?;
        if lambda2 != 0.0 {
            if let Some(cap) = self.cap {
                a = a.add(&cap.q.scaled(Complex64::new(lambda2, 0.0)))?;
            }
        }
        a.solve_hermitian_positive(&self.b)
    }

    fn cap_power(&self, w: &ComplexMatrix) -> Result<f64> {
        match self.cap {
            Some(cap) => {
                let qw = cap.q.matmul(w)?;
                Ok(w.inner(&qw)?.re)
            }
            None => Ok(0.0),
        }
    }

    fn bs_ok(&self, w: &ComplexMatrix) -> bool {
        w.frobenius_norm_sq() <= self.p_bs * (1.0 + FEAS_SLACK)
    }

    fn cap_ok(&self, w: &ComplexMatrix) -> Result<bool> {
        match self.cap {
            Some(cap) => Ok(self.cap_power(w)? <= cap.budget * (1.0 + FEAS_SLACK)),
            None => Ok(true),
        }
    }

    /// Largest dual value ever needed for the transmit constraint: with
    /// `lambda1 = ||B||_F / sqrt(p_bs)` the solution power is guaranteed at
    /// or below `p_bs` for any `lambda2 >= 0`, because
    /// `||(R + lambda1 I + lambda2 Q)^-1|| <= 1/lambda1`.
    fn lambda1_cap(&self) -> f64 {
        (self.b.frobenius_norm_sq() / self.p_bs).sqrt().max(1e-300)
    }

    /// Bisection on `lambda1` alone (no quadratic cap), assuming the
    /// unconstrained solution violates the transmit budget.
    fn bisect_bs(&self) -> Result<ComplexMatrix> {
        let mut lo = 0.0_f64;
        let mut hi = self.lambda1_cap();
        let mut w_hi = self.solve_at(hi, 0.0)?;
        for _ in 0..300 {
            if w_hi.frobenius_norm_sq() >= self.p_bs * (1.0 - POWER_RESIDUAL) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match self.solve_at(mid, 0.0) {
                Ok(w_mid) => {
                    if w_mid.frobenius_norm_sq() > self.p_bs {
                        lo = mid;
                    } else {
                        hi = mid;
                        w_hi = w_mid;
                    }
                }
                // Singular only possible at the lambda -> 0 end.
                Err(Error::NotPositiveDefinite { .. }) => lo = mid,
                Err(e) => return Err(e),
            }
        }
        Ok(w_hi)
    }

    /// For a fixed `lambda1`, the smallest `lambda2 >= 0` putting the
    /// quadratic-cap power at (or under) its budget. `None` when no solvable
    /// point was found (possible only at `lambda1 = 0` with a singular `R`).
    fn cap_feasible_at(&self, lambda1: f64) -> Result<Option<ComplexMatrix>> {
        let cap = self.cap.expect("cap_feasible_at requires a cap");
        if let Ok(w) = self.solve_at(lambda1, 0.0) {
            if self.cap_power(&w)? <= cap.budget * (1.0 + FEAS_SLACK) {
                return Ok(Some(w));
            }
        }
        // Bracket a feasible lambda2 by growth, then bisect down.
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        let mut w_hi = None;
        for _ in 0..200 {
            if let Ok(w) = self.solve_at(lambda1, hi) {
                if self.cap_power(&w)? <= cap.budget {
                    w_hi = Some(w);
                    break;
                }
                lo = hi;
            }
            hi *= 8.0;
            if !hi.is_finite() || hi > 1e90 {
                return Ok(None);
            }
        }
        let Some(mut w_hi) = w_hi else {
            return Ok(None);
        };
        for _ in 0..300 {
            if self.cap_power(&w_hi)? >= cap.budget * (1.0 - POWER_RESIDUAL) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match self.solve_at(lambda1, mid) {
                Ok(w_mid) => {
                    if self.cap_power(&w_mid)? > cap.budget {
                        lo = mid;
                    } else {
                        hi = mid;
                        w_hi = w_mid;
                    }
                }
                Err(Error::NotPositiveDefinite { .. }) => lo = mid,
                Err(e) => return Err(e),
            }
        }
        Ok(Some(w_hi))
    }

    /// Full dual search when the quadratic cap is present: outer bisection on
    /// the transmit dual, inner search on the cap dual.
    fn bisect_both(&self) -> Result<ComplexMatrix> {
        if let Some(w) = self.cap_feasible_at(0.0)? {
            if self.bs_ok(&w) {
                return Ok(w);
            }
        }
        let mut lo = 0.0_f64;
        let mut hi = self.lambda1_cap();
        let mut w_hi = self
            .cap_feasible_at(hi)?
            .ok_or_else(|| Error::invalid("precoder dual search failed to bracket"))?;
        for _ in 0..200 {
            if w_hi.frobenius_norm_sq() >= self.p_bs * (1.0 - POWER_RESIDUAL) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match self.cap_feasible_at(mid)? {
                Some(w_mid) => {
                    if w_mid.frobenius_norm_sq() > self.p_bs {
                        lo = mid;
                    } else {
                        hi = mid;
                        w_hi = w_mid;
                    }
                }
                None => lo = mid,
            }
        }
        Ok(w_hi)
    }
}

/// Optimal precoder for fixed receive scalars and weights.
fn precoder_update(
    rows: &[ComplexMatrix],
    u: &[Complex64],
    rho: &[f64],
    p_bs: f64,
    cap: Option<&QuadraticCap>,
    regularization: f64,
) -> Result<ComplexMatrix> {
    let k = rows.len();
    let m = rows[0].cols();
    let mut r = ComplexMatrix::zeros(m, m);
    let mut b = ComplexMatrix::zeros(m, k);
    for i in 0..k {
        let alpha = rho[i] * u[i].norm_sqr();
        let row = rows[i].entries();
        // R += alpha * h h^H with h = row^H; B col = rho u h.
        let bu = rho[i] * u[i];
        for p in 0..m {
            let hp = row[p].conj();
            b.set(p, i, hp * bu);
            if alpha != 0.0 {
                for q in 0..m {
                    let v = r.at(p, q) + hp * row[q] * alpha;
                    r.set(p, q, v);
                }
            }
        }
    }
    if regularization > 0.0 {
        r = r.shifted(regularization)?;
    }
    if b.frobenius_norm_sq() == 0.0 {
        return Ok(ComplexMatrix::zeros(m, k));
    }
    let problem = PrecoderProblem { r, b, p_bs, cap };
    if let Ok(w) = problem.solve_at(0.0, 0.0) {
        if problem.bs_ok(&w) && problem.cap_ok(&w)? {
            return Ok(w);
        }
    }
    match cap {
        None => problem.bisect_bs(),
        Some(_) => problem.bisect_both(),
    }
}

fn validate_rows(rows: &[ComplexMatrix]) -> Result<usize> {
    if rows.is_empty() {
        return Err(Error::invalid("at least one user channel row is required"));
    }
    let m = rows[0].cols();
    for (k, row) in rows.iter().enumerate() {
        if row.rows() != 1 || row.cols() != m {
            return Err(Error::DimensionMismatch {
                op: "wmmse",
                detail: format!("row {k} is {}x{}, expected 1x{m}", row.rows(), row.cols()),
            });
        }
        if !row.is_finite() {
            return Err(Error::invalid(format!(
                "channel row {k} contains non-finite entries"
            )));
        }
    }
    if m == 0 {
        return Err(Error::invalid(
            "channel rows must have at least one antenna",
        ));
    }
    Ok(m)
}

/// Full-power matched-filter starting point: each user gets an equal power
/// share along its own channel direction.
pub(crate) fn matched_filter_init(rows: &[ComplexMatrix], p_bs: f64) -> ComplexMatrix {
    let k = rows.len();
    let m = rows[0].cols();
    let share = (p_bs / k as f64).sqrt();
    let mut w = ComplexMatrix::zeros(m, k);
    for (j, row) in rows.iter().enumerate() {
        let norm = row.frobenius_norm_sq().sqrt();
        if norm > 0.0 {
            for p in 0..m {
                w.set(p, j, row.at(0, p).conj() * (share / norm));
            }
        }
    }
    w
}

/// Regularized zero-forcing starting point: beam directions along
/// `H^H (H H^H + delta I)^{-1}` with MMSE loading `delta = K sigma^2 / p_bs`,
/// each column scaled to an equal power share. `None` when the Gram solve
/// fails. For a single user this reduces to the matched filter.
pub(crate) fn rzf_init(rows: &[ComplexMatrix], p_bs: f64, noise: &[f64]) -> Option<ComplexMatrix> {
    let k = rows.len();
    let m = rows[0].cols();
    let mean_noise = noise.iter().sum::<f64>() / k as f64;
    let delta = (mean_noise * k as f64 / p_bs).max(f64::MIN_POSITIVE);
    let mut gram = ComplexMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in 0..m {
                acc += rows[i].at(0, p) * rows[j].at(0, p).conj();
            }
            gram.set(i, j, acc);
        }
    }
    let shifted = gram.shifted(delta).ok()?;
    let x = shifted
        .solve_hermitian_positive(&ComplexMatrix::identity(k))
        .ok()?;
    let share = (p_bs / k as f64).sqrt();
    let mut w = ComplexMatrix::zeros(m, k);
    for j in 0..k {
        let mut col = vec![Complex64::new(0.0, 0.0); m];
        for i in 0..k {
            let xij = x.at(i, j);
            for (p, slot) in col.iter_mut().enumerate() {
                *slot += rows[i].at(0, p).conj() * xij;
            }
        }
        let norm_sq: f64 = col.iter().map(|z| z.norm_sqr()).sum();
        if norm_sq > 0.0 {
            let scale = share / norm_sq.sqrt();
            for (p, &v) in col.iter().enumerate() {
                w.set(p, j, v * scale);
            }
        }
    }
    if w.is_finite() {
        Some(w)
    } else {
        None
    }
}

/// The deterministic cold starts every plain solve tries: matched filter
/// first, regularized zero-forcing second.
pub(crate) fn standard_inits(
    rows: &[ComplexMatrix],
    p_bs: f64,
    noise: &[f64],
) -> Vec<ComplexMatrix> {
    let mut inits = vec![matched_filter_init(rows, p_bs)];
    if let Some(z) = rzf_init(rows, p_bs, noise) {
        inits.push(z);
    }
    inits
}

/// Runs the loop from each starting point and keeps the outcome with the
/// best final rate. Earlier entries win ties, so a warm start listed first
/// is only ever replaced by a strict improvement.
pub(crate) fn best_of_inits(
    rows: &[ComplexMatrix],
    p_bs: f64,
    noise: &[f64],
    cap: Option<&QuadraticCap>,
    cfg: &OptimizerConfig,
    inits: Vec<ComplexMatrix>,
) -> Result<WmmseOutcome> {
    let mut best: Option<WmmseOutcome> = None;
    for init in inits {
        let out = wmmse_loop(rows, p_bs, noise, cap, cfg, init)?;
        let rate = out.rates.last().copied().unwrap_or(f64::NEG_INFINITY);
        let better = match &best {
            None => true,
            Some(b) => rate > b.rates.last().copied().unwrap_or(f64::NEG_INFINITY),
        };
        if better {
            best = Some(out);
        }
    }
    best.ok_or_else(|| Error::invalid("at least one starting point is required"))
}

/// Sum rate of a fixed precoder on fixed rows with per-user noise powers.
pub(crate) fn rate_from_rows(
    rows: &[ComplexMatrix],
    w: &ComplexMatrix,
    noise: &[f64],
) -> Result<f64> {
    let gains = cross_gains(rows, w)?;
    Ok(sum_rate(&sinrs_from_gains(&gains, noise)))
}

/// Core loop shared by every scheme. `noise` is the per-user total noise
/// power; `cap` carries the active surface's re-radiated power constraint.
pub(crate) fn wmmse_loop(
    rows: &[ComplexMatrix],
    p_bs: f64,
    noise: &[f64],
    cap: Option<&QuadraticCap>,
    cfg: &OptimizerConfig,
    w_init: ComplexMatrix,
) -> Result<WmmseOutcome> {
    let mut w = w_init;
    let gains = cross_gains(rows, &w)?;
    let mut rate = sum_rate(&sinrs_from_gains(&gains, noise));
    let mut rates = vec![rate];
    let mut iterations = 0;
    for _ in 0..cfg.max_wmmse_iters {
        let gains = cross_gains(rows, &w)?;
        let (u, rho) = mmse_update(&gains, noise);
        w = precoder_update(rows, &u, &rho, p_bs, cap, cfg.regularization)?;
        let gains = cross_gains(rows, &w)?;
        let new_rate = sum_rate(&sinrs_from_gains(&gains, noise));
        iterations += 1;
        rates.push(new_rate);
        let converged = relative_change(new_rate, rate) < cfg.convergence_tol;
        rate = new_rate;
        if converged {
            break;
        }
    }
    let gains = cross_gains(rows, &w)?;
    let (receive_scalars, weights) = mmse_update(&gains, noise);
    Ok(WmmseOutcome {
        precoder: w,
        rates,
        receive_scalars,
        weights,
        iterations,
    })
}

/// WMMSE precoding on fixed effective channels (one row per user) with a
/// common receiver noise power. Tries the matched-filter and regularized
/// zero-forcing starting points and keeps the better final rate.
pub fn wmmse_precoder(
    rows: &[ComplexMatrix],
    p_bs: f64,
    sigma_sq: f64,
    cfg: &OptimizerConfig,
) -> Result<BeamformingSolution> {
    cfg.validate()?;
    validate_rows(rows)?;
    if !(p_bs > 0.0) || !p_bs.is_finite() {
        return Err(Error::invalid("p_bs must be positive and finite"));
    }
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return Err(Error::invalid("sigma_sq must be positive and finite"));
    }
    let noise = vec![sigma_sq; rows.len()];
    let inits = standard_inits(rows, p_bs, &noise);
    let out = best_of_inits(rows, p_bs, &noise, None, cfg, inits)?;
    Ok(BeamformingSolution {
        achieved_sum_rate: *out.rates.last().unwrap(),
        precoder: out.precoder,
        ris: RisState::None,
        iterations_used: out.iterations,
        rate_trajectory: out.rates,
    })
}
