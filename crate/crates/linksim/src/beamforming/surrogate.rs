//! Weighted-MSE surrogate as a quadratic form in the reflection coefficients.
//!
//! With receive scalars `u`, weights `rho` and precoder `W` held fixed, the
//! weighted MSE cost is an exact quadratic in the coefficient vector `c`:
//!
//! `F(c) = c^H (U U^H + diag(e)) c - 2 Re(b^H c) + const`
//!
//! where column `(k, j)` of `U` is `sqrt(alpha_k) * t_kj` with
//! `t_kj,n = f_k,n * conj((G w_j)_n)` and `alpha_k = rho_k |u_k|^2`, and
//! `diag(e)` carries the amplified-noise term of an active surface. Keeping
//! `U` in factored form (K^2 skinny columns instead of an N x N matrix) is
//! what makes the per-element passive pass and the Woodbury-based active
//! solve cheap at N = 512.

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

pub(crate) struct RisSurrogate {
    /// `K^2` columns of `U`, each of length N; column index is `k * K + j`.
    pub u_cols: Vec<Vec<Complex64>>,
    /// Coordinates of `b` in the `U` basis: `b = U * b_coeffs` (an algebraic
    /// identity of the construction, used by the unconstrained active solve).
    pub b_coeffs: Vec<Complex64>,
    /// Diagonal `e_n = sigma_v^2 * sum_k alpha_k |f_k,n|^2`.
    pub e_diag: Vec<f64>,
    /// Linear term `b`.
    pub b: Vec<Complex64>,
    /// Reflect-power quadratic diagonal `s_n = q_n + sigma_v^2` with
    /// `q_n = sum_j |(G w_j)_n|^2`.
    pub s_diag: Vec<f64>,
}

pub(crate) fn build_surrogate(
    channels: &ChannelSet,
    w: &ComplexMatrix,
    u: &[Complex64],
    rho: &[f64],
    sigma_v_sq: f64,
) -> Result<RisSurrogate> {
    let n = channels.ris_elements();
    let k_users = channels.users();
    if u.len() != k_users || rho.len() != k_users {
        return Err(Error::DimensionMismatch {
            op: "build_surrogate",
            detail: format!("{} scalars for {k_users} users", u.len()),
        });
    }
    let gw = channels.g.matmul(w)?; // N x K

    let mut u_cols = vec![vec![Complex64::new(0.0, 0.0); n]; k_users * k_users];
    let mut b_coeffs = vec![Complex64::new(0.0, 0.0); k_users * k_users];
    let mut e_diag = vec![0.0; n];
    let mut b = vec![Complex64::new(0.0, 0.0); n];
    let mut s_diag = vec![sigma_v_sq; n];

    for e in 0..n {
        for j in 0..k_users {
            s_diag[e] += gw.at(e, j).norm_sqr();
        }
    }

    for k in 0..k_users {
        let alpha = rho[k] * u[k].norm_sqr();
        let sqrt_alpha = alpha.sqrt();
        let f_k = channels.f[k].entries();
        // d_kj = h_dk^H w_j.
        let d_row = channels.h_d[k].hermitian().matmul(w)?;
        for j in 0..k_users {
            let col = &mut u_cols[k * k_users + j];
            for e in 0..n {
                let t = f_k[e] * gw.at(e, j).conj();
                col[e] = t * sqrt_alpha;
                let mut contrib = -(alpha * d_row.at(0, j)) * t;
                if j == k {
                    contrib += rho[k] * u[k] * t;
                }
                b[e] += contrib;
            }
            if alpha > 0.0 {
                let mut mc = -(alpha * d_row.at(0, j));
                if j == k {
                    mc += rho[k] * u[k];
                }
                b_coeffs[k * k_users + j] = mc / sqrt_alpha;
            }
        }
        if sigma_v_sq > 0.0 && alpha > 0.0 {
            for e in 0..n {
                e_diag[e] += sigma_v_sq * alpha * f_k[e].norm_sqr();
            }
        }
    }

    Ok(RisSurrogate {
        u_cols,
        b_coeffs,
        e_diag,
        b,
        s_diag,
    })
}

impl RisSurrogate {
    pub fn elements(&self) -> usize {
        self.b.len()
    }

    /// `F(c)` up to the constant term; exercised by the surrogate tests.
    #[cfg(test)]
    pub fn cost(&self, c: &[Complex64]) -> f64 {
        let mut quad = 0.0;
        for col in &self.u_cols {
            let y: Complex64 = col.iter().zip(c).map(|(un, cn)| un.conj() * cn).sum();
            quad += y.norm_sqr();
        }
        for (e, cn) in self.e_diag.iter().zip(c) {
            quad += e * cn.norm_sqr();
        }
        let lin: Complex64 = self.b.iter().zip(c).map(|(bn, cn)| bn.conj() * cn).sum();
        quad - 2.0 * lin.re
    }

    /// Reflect power of a coefficient vector under this precoder:
    /// `sum_n s_n |c_n|^2`.
    #[cfg(test)]
    pub fn reflect_power(&self, c: &[Complex64]) -> f64 {
        self.s_diag
            .iter()
            .zip(c)
            .map(|(s, cn)| s * cn.norm_sqr())
            .sum()
    }
}
