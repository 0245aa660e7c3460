//! Closed-form calculators for surface sizing, noise floors and scaling laws.
//!
//! These are the back-of-envelope results the simulator's scenarios are built
//! around: how many elements a surface needs before it competes with a direct
//! link, the thermal noise a bank of active elements injects, how the
//! co-phased array gain scales with element count, and the multiplicative
//! versus additive path-loss structures of reflect- and relay-style hops.

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Relative snap window before taking the ceiling in [`required_elements`]:
/// a ratio this close to an integer is treated as that integer, so nominal
/// round-number wavelengths give round element counts.
const CEIL_SNAP_REL: f64 = 1e-9;

/// Geometry and carrier for a surface-sizing calculation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeploymentScenario {
    /// Transmitter-receiver distance in meters.
    pub d: f64,
    /// Transmitter-surface distance in meters.
    pub d_t: f64,
    /// Surface-receiver distance in meters.
    pub d_r: f64,
    /// Carrier frequency in hertz.
    pub frequency: f64,
    /// Element spacing in wavelengths (0.5 = half-wavelength grid).
    pub element_spacing: f64,
}

/// How the carrier wavelength is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavelengthMode {
    /// `lambda = c / f` with c = 299792458 m/s.
    ExactC,
    /// Round-number radio convention `lambda = 0.3 m / f_GHz`.
    Nominal,
}

impl DeploymentScenario {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d", self.d),
            ("d_t", self.d_t),
            ("d_r", self.d_r),
            ("frequency", self.frequency),
            ("element_spacing", self.element_spacing),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn wavelength(&self, mode: WavelengthMode) -> f64 {
        match mode {
            WavelengthMode::ExactC => SPEED_OF_LIGHT / self.frequency,
            WavelengthMode::Nominal => 3.0e8 / self.frequency,
        }
    }
}

/// Minimum element count for a surface-aided hop to keep up with the direct
/// link: aperture at least `d_t * d_r * lambda / d`, divided by the
/// per-element area `(spacing * lambda)^2`, rounded up.
pub fn required_elements(s: &DeploymentScenario, mode: WavelengthMode) -> Result<u64> {
    s.validate()?;
    let lambda = s.wavelength(mode);
    let aperture = s.d_t * s.d_r * lambda / s.d;
    let element_area = (s.element_spacing * lambda).powi(2);
    let ratio = aperture / element_area;
    let snapped = ratio.round();
    let count = if (ratio - snapped).abs() <= CEIL_SNAP_REL * ratio.abs().max(1.0) {
        snapped
    } else {
        ratio.ceil()
    };
    if !count.is_finite() || count < 0.0 || count > u64::MAX as f64 {
        return Err(Error::invalid(format!(
            "element count {count} out of range"
        )));
    }
    Ok(count as u64)
}

/// Aggregate thermal floor of `elements` independent noise sources of
/// bandwidth `bandwidth` at temperature `temperature`, in dBm.
///
/// Computed as `10 log10(k_B T B / 1 mW) + 10 log10(N)` so that the
/// element-count term decomposes exactly.
pub fn thermal_noise_floor_dbm(bandwidth: f64, temperature: f64, elements: u64) -> Result<f64> {
    for (name, v) in [("bandwidth", bandwidth), ("temperature", temperature)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if elements == 0 {
        return Err(Error::invalid("element count must be positive"));
    }
    let single = BOLTZMANN * temperature * bandwidth / 1e-3;
    Ok(10.0 * (single.log10() + (elements as f64).log10()))
}

/// The two distance proportionality factors of a two-hop link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGainComparison {
    /// Reflect-style product law `(d_t * d_r)^-2`.
    pub multiplicative: f64,
    /// Relay-style sum law `(d_t + d_r)^-2`.
    pub additive: f64,
    /// `additive / multiplicative`, evaluated as `((d_t d_r)/(d_t + d_r))^2`.
    pub ratio: f64,
}

pub fn path_gain_comparison(d_t: f64, d_r: f64) -> Result<PathGainComparison> {
    for (name, v) in [("d_t", d_t), ("d_r", d_r)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    let product = d_t * d_r;
    let sum = d_t + d_r;
    Ok(PathGainComparison {
        multiplicative: 1.0 / (product * product),
        additive: 1.0 / (sum * sum),
        ratio: (product / sum).powi(2),
    })
}

/// Per-element path-gain factors entering the array-gain model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitPathGains {
    /// Coherent per-element-pair signal power at the receiver (the `N^2`
    /// coefficient).
    pub signal_power: f64,
    /// Surface-to-receiver gain applied to each element's own noise.
    pub noise_path_gain: f64,
}

impl Default for UnitPathGains {
    fn default() -> Self {
        Self {
            signal_power: 1.0,
            noise_path_gain: 1.0,
        }
    }
}

/// Ideal co-phased single-user SNR as a function of element count:
/// `snr(N) = N^2 s / (sigma_rx + N sigma_e g)`. With quiet elements the curve
/// is the classic square law; once element noise dominates, the extra factor
/// of `N` in the denominator knocks the growth down to linear.
pub fn array_gain_scaling(
    n_values: &[u64],
    per_element_noise: f64,
    receiver_noise: f64,
    gains: UnitPathGains,
) -> Result<Vec<(u64, f64)>> {
    if n_values.is_empty() {
        return Err(Error::invalid("n_values must be non-empty"));
    }
    if !n_values.windows(2).all(|p| p[0] < p[1]) {
        return Err(Error::invalid("n_values must be strictly ascending"));
    }
    if n_values[0] == 0 {
        return Err(Error::invalid("element counts must be positive"));
    }
    for (name, v) in [
        ("per_element_noise", per_element_noise),
        ("receiver_noise", receiver_noise),
        ("signal_power", gains.signal_power),
        ("noise_path_gain", gains.noise_path_gain),
    ] {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::invalid(format!(
                "{name} must be >= 0 and finite, got {v}"
            )));
        }
    }
    if !(gains.signal_power > 0.0) {
        return Err(Error::invalid("signal_power must be positive"));
    }
    n_values
        .iter()
        .map(|&n| {
            let nf = n as f64;
            let denom = receiver_noise + nf * per_element_noise * gains.noise_path_gain;
            if !(denom > 0.0) {
                return Err(Error::invalid(
                    "noise terms vanish; SNR undefined for this configuration",
                ));
            }
            Ok((n, nf * nf * gains.signal_power / denom))
        })
        .collect()
}

/// Least-squares slope of `ln(y)` against `ln(N)` over a scaling curve.
pub fn log_log_slope(curve: &[(u64, f64)]) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::invalid("slope needs at least two points"));
    }
    let mut xs = Vec::with_capacity(curve.len());
    let mut ys = Vec::with_capacity(curve.len());
    for &(n, v) in curve {
        if n == 0 || !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(
                "slope needs positive counts and positive finite values",
            ));
        }
        xs.push((n as f64).ln());
        ys.push(v.ln());
    }
    let n = xs.len() as f64;
    let mean_x: f64 = xs.iter().sum::<f64>() / n;
    let mean_y: f64 = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::invalid("slope needs at least two distinct counts"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn sizing_scenario(freq_ghz: f64) -> DeploymentScenario {
        DeploymentScenario {
            d: 200.0,
            d_t: 150.0,
            d_r: 200.0,
            frequency: freq_ghz * 1e9,
            element_spacing: 0.5,
        }
    }

    #[test]
    fn element_table_nominal_wavelengths() {
        let table = [(5.0, 10_000), (10.0, 20_000), (20.0, 40_000)];
        for (ghz, expect) in table {
            let n = required_elements(&sizing_scenario(ghz), WavelengthMode::Nominal).unwrap();
            assert_eq!(n, expect, "at {ghz} GHz");
        }
    }

    #[test]
    fn element_table_exact_speed_of_light() {
        let table = [(5.0, 10_007), (10.0, 20_014), (20.0, 40_028)];
        for (ghz, expect) in table {
            let n = required_elements(&sizing_scenario(ghz), WavelengthMode::ExactC).unwrap();
            assert_eq!(n, expect, "at {ghz} GHz");
        }
    }

    #[test]
    fn element_count_scales_linearly_in_frequency() {
        for ghz in [2.4, 3.5, 5.0, 7.0, 28.0] {
            let n1 = required_elements(&sizing_scenario(ghz), WavelengthMode::ExactC).unwrap();
            let n2 =
                required_elements(&sizing_scenario(2.0 * ghz), WavelengthMode::ExactC).unwrap();
            assert!(
                n2 == 2 * n1 || n2 + 1 == 2 * n1 || n2 == 2 * n1 + 1,
                "{ghz} GHz: {n1} vs {n2}"
            );
        }
    }

    #[test]
    fn rejects_degenerate_scenarios() {
        let mut s = sizing_scenario(5.0);
        s.d = 0.0;
        assert!(required_elements(&s, WavelengthMode::Nominal).is_err());
        let mut s = sizing_scenario(5.0);
        s.element_spacing = -0.5;
        assert!(required_elements(&s, WavelengthMode::Nominal).is_err());
    }

    #[test]
    fn single_element_thermal_floor() {
        let dbm = thermal_noise_floor_dbm(100e6, 290.0, 1).unwrap();
        assert_abs_diff_eq!(dbm, -93.97518719422811, epsilon = 1e-9);
    }

    #[test]
    fn large_bank_thermal_floor() {
        let dbm = thermal_noise_floor_dbm(100e6, 290.0, 10_000).unwrap();
        assert_abs_diff_eq!(dbm, -54.0, epsilon = 0.1);
        // 30 dB of propagation loss on top of the bank's floor.
        assert_abs_diff_eq!(dbm - 30.0, -84.0, epsilon = 0.1);
    }

    #[test]
    fn floor_decomposes_in_element_count_exactly() {
        let base = thermal_noise_floor_dbm(100e6, 290.0, 1).unwrap();
        for n in [1_u64, 2, 10, 512, 10_000, 40_000] {
            let total = thermal_noise_floor_dbm(100e6, 290.0, n).unwrap();
            assert_eq!(total, base + 10.0 * (n as f64).log10());
        }
    }

    #[test]
    fn floor_rejects_bad_inputs() {
        assert!(thermal_noise_floor_dbm(0.0, 290.0, 1).is_err());
        assert!(thermal_noise_floor_dbm(100e6, -1.0, 1).is_err());
        assert!(thermal_noise_floor_dbm(100e6, 290.0, 0).is_err());
    }

    #[test]
    fn path_gain_crossover_and_extremes() {
        let c = path_gain_comparison(2.0, 2.0).unwrap();
        assert_eq!(c.multiplicative, 1.0 / 16.0);
        assert_eq!(c.additive, 1.0 / 16.0);

        let near = path_gain_comparison(1.0, 1.0).unwrap();
        assert_eq!(near.multiplicative, 1.0);
        assert_eq!(near.additive, 0.25);
        assert!(near.multiplicative > near.additive);
    }

    #[test]
    fn path_gain_ratio_identity() {
        let c = path_gain_comparison(150.0, 200.0).unwrap();
        assert_eq!(c.ratio, (150.0_f64 * 200.0 / 350.0).powi(2));
        assert_relative_eq!(c.ratio, 7346.938775510203, max_relative = 1e-12);
        assert_relative_eq!(c.additive / c.multiplicative, c.ratio, max_relative = 1e-12);
        assert!(c.additive > c.multiplicative);
    }

    fn decade_counts() -> Vec<u64> {
        (0..=20)
            .map(|i| (100.0 * 10f64.powf(i as f64 / 10.0)).round() as u64)
            .collect()
    }

    #[test]
    fn quiet_elements_give_square_law() {
        let curve =
            array_gain_scaling(&decade_counts(), 0.0, 1e-13, UnitPathGains::default()).unwrap();
        let slope = log_log_slope(&curve).unwrap();
        assert_abs_diff_eq!(slope, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn noisy_elements_collapse_to_linear_law() {
        let curve =
            array_gain_scaling(&decade_counts(), 1e-10, 0.0, UnitPathGains::default()).unwrap();
        let slope = log_log_slope(&curve).unwrap();
        assert_abs_diff_eq!(slope, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn doubling_in_the_ideal_regime_adds_six_db() {
        let curve =
            array_gain_scaling(&[1000, 2000], 0.0, 1e-13, UnitPathGains::default()).unwrap();
        let db = 10.0 * (curve[1].1 / curve[0].1).log10();
        assert_abs_diff_eq!(db, 6.02, epsilon = 0.01);
    }

    #[test]
    fn slope_transitions_monotonically_with_element_noise() {
        let counts = decade_counts();
        let mut last = f64::INFINITY;
        for sigma_e in [0.0, 1e-16, 1e-14, 1e-12, 1e-10, 1e-8] {
            let curve =
                array_gain_scaling(&counts, sigma_e, 1e-13, UnitPathGains::default()).unwrap();
            let slope = log_log_slope(&curve).unwrap();
            assert!(slope <= last + 1e-12, "slope rose: {slope} after {last}");
            assert!((1.0..=2.0 + 1e-9).contains(&slope));
            last = slope;
        }
        assert!(last < 1.05, "noisiest slope should approach 1, got {last}");
    }

    #[test]
    fn scaling_rejects_bad_inputs() {
        let g = UnitPathGains::default();
        assert!(array_gain_scaling(&[], 0.0, 1e-13, g).is_err());
        assert!(array_gain_scaling(&[10, 10], 0.0, 1e-13, g).is_err());
        assert!(array_gain_scaling(&[10, 5], 0.0, 1e-13, g).is_err());
        assert!(array_gain_scaling(&[10, 20], 0.0, 0.0, g).is_err());
        assert!(log_log_slope(&[(10, 1.0)]).is_err());
    }
}
