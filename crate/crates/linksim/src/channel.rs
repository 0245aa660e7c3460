//! Deployment geometry and Ricean channel synthesis.
//!
//! The world is two-dimensional: a base station, a reflecting surface and a
//! set of users, each at a planar position. Every link (base station to
//! surface, surface to user, base station to user) is drawn as a Ricean
//! mixture of a geometric line-of-sight component and i.i.d. Rayleigh
//! scatter, then scaled so the mean squared entry magnitude equals the linear
//! path gain of that link's distance.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;
use crate::rng;

/// Tag mixed into per-link seed derivation (see [`crate::rng::derive_seed`]).
const LINK_STREAM_TAG: u64 = 0x4C49_4E4B; // "LINK"

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position2D {
    pub x: f64,
    pub y: f64,
}

impl Position2D {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Euclidean distance in metres.
pub fn distance(a: Position2D, b: Position2D) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Distance-dependent path loss in dB: `37.3 + 22.0 * log10(d)` for `d` in
/// metres. Errors for non-positive or non-finite distances.
pub fn path_loss_db(d: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::invalid(format!(
            "path loss needs a positive finite distance, got {d}"
        )));
    }
    Ok(37.3 + 22.0 * d.log10())
}

/// Linear power gain `10^(-PL(d)/10)`.
pub fn linear_path_gain(d: f64) -> Result<f64> {
    Ok(10f64.powf(-path_loss_db(d)? / 10.0))
}

/// Uniform linear array steering vector: entry `n` is
/// `exp(j 2 pi spacing n sin(angle))` with `spacing` in wavelengths and
/// `n = 0..num_elements`.
pub fn steering_vector(num_elements: usize, spacing: f64, angle: f64) -> ComplexMatrix {
    let k = std::f64::consts::TAU * spacing * angle.sin();
    ComplexMatrix::from_fn(num_elements, 1, |n, _| {
        Complex64::from_polar(1.0, k * n as f64)
    })
}

/// Ricean K-factor. `kappa = 0` is pure Rayleigh scatter; large `kappa`
/// approaches the deterministic line-of-sight component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiceanParams {
    kappa: f64,
}

impl RiceanParams {
    pub fn new(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::invalid(format!(
                "Ricean kappa must be finite and >= 0, got {kappa}"
            )));
        }
        Ok(Self { kappa })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `(sqrt(kappa/(1+kappa)), sqrt(1/(1+kappa)))` mixing weights.
    fn weights(&self) -> (f64, f64) {
        let los = (self.kappa / (1.0 + self.kappa)).sqrt();
        let nlos = (1.0 / (1.0 + self.kappa)).sqrt();
        (los, nlos)
    }
}

/// Draws one unit-power Ricean channel matrix around the given line-of-sight
/// matrix (whose entries are expected to have unit magnitude):
/// `sqrt(kappa/(1+kappa)) * los + sqrt(1/(1+kappa)) * H_scatter` with
/// `H_scatter` i.i.d. circularly-symmetric complex Gaussian, `E|entry|^2 = 1`.
pub fn generate_ricean(
    rows: usize,
    cols: usize,
    params: RiceanParams,
    los: &ComplexMatrix,
    seed: u64,
) -> Result<ComplexMatrix> {
    if los.rows() != rows || los.cols() != cols {
        return Err(Error::DimensionMismatch {
            op: "generate_ricean",
            detail: format!(
                "los is {}x{}, requested {rows}x{cols}",
                los.rows(),
                los.cols()
            ),
        });
    }
    let (a, b) = params.weights();
    let mut stream = rng::stream(seed);
    Ok(ComplexMatrix::from_fn(rows, cols, |r, c| {
        los.at(r, c) * a + rng::complex_gaussian(&mut stream) * b
    }))
}

/// Static deployment description, prior to any channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemGeometry {
    pub bs_position: Position2D,
    pub ris_position: Position2D,
    pub user_positions: Vec<Position2D>,
    pub bs_antennas: usize,
    pub ris_elements: usize,
    /// Antenna spacing at the base station, in wavelengths.
    pub bs_antenna_spacing: f64,
    /// Element spacing at the surface, in wavelengths.
    pub ris_element_spacing: f64,
}

impl SystemGeometry {
    pub fn users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bs_antennas == 0 {
            return Err(Error::invalid("bs_antennas must be >= 1"));
        }
        if self.user_positions.is_empty() {
            return Err(Error::invalid("at least one user position is required"));
        }
        if !(self.bs_antenna_spacing > 0.0) || !self.bs_antenna_spacing.is_finite() {
            return Err(Error::invalid("bs_antenna_spacing must be positive"));
        }
        if !(self.ris_element_spacing > 0.0) || !self.ris_element_spacing.is_finite() {
            return Err(Error::invalid("ris_element_spacing must be positive"));
        }
        if !self.bs_position.is_finite() || !self.ris_position.is_finite() {
            return Err(Error::invalid("device positions must be finite"));
        }
        if self.user_positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("user positions must be finite"));
        }
        Ok(())
    }
}

/// One realization of every link in the system.
///
/// `g` is `ris_elements x bs_antennas`; `f[k]` is `ris_elements x 1`;
/// `h_d[k]` is `bs_antennas x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub g: ComplexMatrix,
    pub f: Vec<ComplexMatrix>,
    pub h_d: Vec<ComplexMatrix>,
}

impl ChannelSet {
    pub fn ris_elements(&self) -> usize {
        self.g.rows()
    }

    pub fn bs_antennas(&self) -> usize {
        self.g.cols()
    }

    pub fn users(&self) -> usize {
        self.f.len()
    }
}

fn bearing(from: Position2D, to: Position2D) -> f64 {
    (to.y - from.y).atan2(to.x - from.x)
}

/// Draws all links of one trial. Child seeds are derived per link from
/// `seed`, so adding users or reordering draws never perturbs other links.
pub fn assemble_channels(
    geometry: &SystemGeometry,
    params: RiceanParams,
    seed: u64,
) -> Result<ChannelSet> {
    geometry.validate()?;
    let m = geometry.bs_antennas;
    let n = geometry.ris_elements;
    let k_users = geometry.users();

    let d_bs_ris = distance(geometry.bs_position, geometry.ris_position);
    if d_bs_ris == 0.0 {
        return Err(Error::invalid(
            "degenerate geometry: base station and surface are collocated",
        ));
    }

    let link_seed = |id: u64| rng::derive_seed(seed, LINK_STREAM_TAG, id);

    // Base station <-> surface link.
    let a_bs = steering_vector(
        m,
        geometry.bs_antenna_spacing,
        bearing(geometry.bs_position, geometry.ris_position),
    );
    let a_ris = steering_vector(
        n,
        geometry.ris_element_spacing,
        bearing(geometry.ris_position, geometry.bs_position),
    );
    let g_los = ComplexMatrix::from_fn(n, m, |r, c| a_ris.at(r, 0) * a_bs.at(c, 0).conj());
    let g_gain = linear_path_gain(d_bs_ris)?.sqrt();
    let g =
        generate_ricean(n, m, params, &g_los, link_seed(0))?.scaled(Complex64::new(g_gain, 0.0));

    let mut h_d = Vec::with_capacity(k_users);
    let mut f = Vec::with_capacity(k_users);
    for (k, &user) in geometry.user_positions.iter().enumerate() {
        let d_bu = distance(geometry.bs_position, user);
        let d_ru = distance(geometry.ris_position, user);
        if d_bu == 0.0 || d_ru == 0.0 {
            return Err(Error::invalid(format!(
                "degenerate geometry: user {k} is collocated with a device"
            )));
        }

        let h_los = steering_vector(
            m,
            geometry.bs_antenna_spacing,
            bearing(geometry.bs_position, user),
        );
        let h_gain = linear_path_gain(d_bu)?.sqrt();
        h_d.push(
            generate_ricean(m, 1, params, &h_los, link_seed(1 + k as u64))?
                .scaled(Complex64::new(h_gain, 0.0)),
        );

        let f_los = steering_vector(
            n,
            geometry.ris_element_spacing,
            bearing(geometry.ris_position, user),
        );
        let f_gain = linear_path_gain(d_ru)?.sqrt();
        f.push(
            generate_ricean(n, 1, params, &f_los, link_seed(1 + (k_users + k) as u64))?
                .scaled(Complex64::new(f_gain, 0.0)),
        );
    }

    Ok(ChannelSet { g, f, h_d })
}

const FNV_OFFSET: u64 = 0xCBF2_9CE4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01B3;

fn fnv1a_bytes(hash: &mut u64, bytes: &[u8]) {
    for &b in bytes {
        *hash ^= b as u64;
        *hash = hash.wrapping_mul(FNV_PRIME);
    }
}

fn fnv1a_matrix(hash: &mut u64, m: &ComplexMatrix) {
    fnv1a_bytes(hash, &(m.rows() as u64).to_le_bytes());
    fnv1a_bytes(hash, &(m.cols() as u64).to_le_bytes());
    for z in m.entries() {
        fnv1a_bytes(hash, &z.re.to_bits().to_le_bytes());
        fnv1a_bytes(hash, &z.im.to_bits().to_le_bytes());
    }
}

/// FNV-1a digest over the exact bit patterns of every channel entry. Used to
/// log and compare realizations cheaply.
pub fn channel_hash(channels: &ChannelSet) -> u64 {
    let mut h = FNV_OFFSET;
    fnv1a_matrix(&mut h, &channels.g);
    for f in &channels.f {
        fnv1a_matrix(&mut h, f);
    }
    for hd in &channels.h_d {
        fnv1a_matrix(&mut h, hd);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64) -> Position2D {
        Position2D::new(x, y)
    }

    fn square_geometry(user: Position2D) -> SystemGeometry {
        SystemGeometry {
            bs_position: p(0.0, -60.0),
            ris_position: p(300.0, 10.0),
            user_positions: vec![user],
            bs_antennas: 4,
            ris_elements: 16,
            bs_antenna_spacing: 0.5,
            ris_element_spacing: 0.5,
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(p(0.0, 0.0), p(0.0, 0.0)), 0.0);
        assert_eq!(distance(p(5.0, 0.0), p(5.0, 10.0)), 10.0);
        assert_relative_eq!(
            distance(p(0.0, -60.0), p(300.0, 10.0)),
            308.05843601498725,
            max_relative = 1e-12
        );
    }

    #[test]
    fn distance_is_symmetric() {
        let mut rng = crate::rng::stream(3);
        use rand::Rng;
        for _ in 0..100 {
            let a = p(rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3));
            let b = p(rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3));
            assert_eq!(distance(a, b), distance(b, a));
        }
    }

    #[test]
    fn path_loss_examples() {
        assert_eq!(path_loss_db(1.0).unwrap(), 37.3);
        assert_relative_eq!(
            path_loss_db(200.0).unwrap(),
            87.92265990460758,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            path_loss_db(308.05843601498725).unwrap(),
            92.04992833670022,
            max_relative = 1e-9
        );
    }

    #[test]
    fn path_loss_rejects_bad_distances() {
        assert!(path_loss_db(0.0).is_err());
        assert!(path_loss_db(-1.0).is_err());
        assert!(path_loss_db(f64::NAN).is_err());
    }

    #[test]
    fn linear_gain_matches_db() {
        let g = linear_path_gain(200.0).unwrap();
        assert_relative_eq!(-10.0 * g.log10(), 87.92265990460758, max_relative = 1e-9);
    }

    #[test]
    fn steering_broadside_is_all_ones() {
        let v = steering_vector(8, 0.5, 0.0);
        for n in 0..8 {
            assert_eq!(v.at(n, 0), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn steering_single_element_is_one() {
        let v = steering_vector(1, 0.5, 1.234);
        assert_eq!(v.at(0, 0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn steering_endfire_alternates_sign() {
        let v = steering_vector(2, 0.5, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(v.at(1, 0).re, -1.0, epsilon = 1e-12);
        assert!(v.at(1, 0).im.abs() < 1e-12);
    }

    #[test]
    fn steering_entries_have_unit_modulus() {
        let v = steering_vector(64, 0.37, 0.81);
        for z in v.entries() {
            assert!((z.norm_sqr() - 1.0).abs() <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn ricean_large_kappa_approaches_los() {
        let los = steering_vector(16, 0.5, 0.3);
        let los_m = ComplexMatrix::from_fn(16, 2, |r, _| los.at(r, 0));
        let h = generate_ricean(16, 2, RiceanParams::new(1e12).unwrap(), &los_m, 99).unwrap();
        for (a, b) in h.entries().iter().zip(los_m.entries()) {
            assert!((a - b).norm() < 1e-5);
        }
    }

    #[test]
    fn ricean_rayleigh_normalization() {
        let los = ComplexMatrix::from_fn(100, 10, |_, _| Complex64::new(1.0, 0.0));
        let mut power = 0.0;
        let mut count = 0usize;
        for draw in 0..100u64 {
            let h = generate_ricean(100, 10, RiceanParams::new(0.0).unwrap(), &los, 1000 + draw)
                .unwrap();
            power += h.frobenius_norm_sq();
            count += 1000;
        }
        assert_relative_eq!(power / count as f64, 1.0, max_relative = 0.02);
    }

    #[test]
    fn ricean_unit_kappa_splits_power_evenly() {
        // Averaging draws isolates the deterministic component: the squared
        // magnitude of the per-entry mean estimates kappa/(1+kappa) = 0.5
        // (plus a 1/draws scatter bias).
        let rows = 50;
        let cols = 20;
        let draws = 100u64;
        let los = ComplexMatrix::from_fn(rows, cols, |r, c| {
            Complex64::from_polar(1.0, 0.1 * (r * cols + c) as f64)
        });
        let mut mean = ComplexMatrix::zeros(rows, cols);
        let mut power = 0.0;
        for draw in 0..draws {
            let h = generate_ricean(
                rows,
                cols,
                RiceanParams::new(1.0).unwrap(),
                &los,
                5000 + draw,
            )
            .unwrap();
            power += h.frobenius_norm_sq();
            mean = mean.add(&h).unwrap();
        }
        mean = mean.scaled(Complex64::new(1.0 / draws as f64, 0.0));
        let entries = (rows * cols) as f64;
        assert_relative_eq!(power / (draws as f64 * entries), 1.0, max_relative = 0.02);
        let los_power = mean.frobenius_norm_sq() / entries;
        let bias = 0.5 / draws as f64;
        assert!(
            (los_power - (0.5 + bias)).abs() < 0.02,
            "los power {los_power}"
        );
    }

    #[test]
    fn ricean_kappa_validation() {
        assert!(RiceanParams::new(-0.5).is_err());
        assert!(RiceanParams::new(f64::INFINITY).is_err());
        assert!(RiceanParams::new(0.0).is_ok());
    }

    #[test]
    fn assemble_scales_direct_link_to_path_gain() {
        // User 1 m from the base station: mean squared entry magnitude of the
        // direct channel must approach 10^(-3.73).
        let geometry = SystemGeometry {
            bs_position: p(0.0, 0.0),
            ris_position: p(50.0, 50.0),
            user_positions: vec![p(1.0, 0.0)],
            bs_antennas: 4,
            ris_elements: 4,
            bs_antenna_spacing: 0.5,
            ris_element_spacing: 0.5,
        };
        let params = RiceanParams::new(1.0).unwrap();
        let mut power = 0.0;
        let trials = 10_000u64;
        for t in 0..trials {
            let ch = assemble_channels(&geometry, params, t).unwrap();
            power += ch.h_d[0].frobenius_norm_sq();
        }
        let mean = power / (trials * 4) as f64;
        let expected = 10f64.powf(-3.73);
        assert_relative_eq!(mean, expected, max_relative = 0.03);
    }

    #[test]
    fn assemble_scales_ris_user_link_to_path_gain() {
        let geometry = square_geometry(p(300.0, 0.0));
        let params = RiceanParams::new(1.0).unwrap();
        let n = geometry.ris_elements as f64;
        let mut power = 0.0;
        let trials = 4_000u64;
        for t in 0..trials {
            let ch = assemble_channels(&geometry, params, t).unwrap();
            power += ch.f[0].frobenius_norm_sq();
        }
        let mean = power / (trials as f64 * n);
        let expected = linear_path_gain(10.0).unwrap();
        assert_relative_eq!(mean, expected, max_relative = 0.03);
    }

    #[test]
    fn assemble_large_kappa_gives_rank_one_g() {
        let geometry = square_geometry(p(250.0, 0.0));
        let params = RiceanParams::new(1e12).unwrap();
        let ch = assemble_channels(&geometry, params, 17).unwrap();
        let c0 = ch.g.column(0);
        for j in 1..ch.g.cols() {
            let cj = ch.g.column(j);
            let ip = c0.inner(&cj).unwrap().norm();
            let norms = c0.frobenius_norm_sq().sqrt() * cj.frobenius_norm_sq().sqrt();
            assert_relative_eq!(ip, norms, max_relative = 1e-6);
        }
    }

    #[test]
    fn assemble_is_reproducible_and_seed_sensitive() {
        let geometry = square_geometry(p(200.0, 3.0));
        let params = RiceanParams::new(1.0).unwrap();
        let a = assemble_channels(&geometry, params, 42).unwrap();
        let b = assemble_channels(&geometry, params, 42).unwrap();
        let c = assemble_channels(&geometry, params, 43).unwrap();
        assert_eq!(a, b);
        assert_eq!(channel_hash(&a), channel_hash(&b));
        assert_ne!(channel_hash(&a), channel_hash(&c));
    }

    #[test]
    fn assemble_rejects_collocated_devices() {
        let mut geometry = square_geometry(p(200.0, 3.0));
        geometry.ris_position = geometry.bs_position;
        assert!(assemble_channels(&geometry, RiceanParams::new(1.0).unwrap(), 1).is_err());

        let geometry = square_geometry(p(300.0, 10.0)); // on top of the surface
        assert!(assemble_channels(&geometry, RiceanParams::new(1.0).unwrap(), 1).is_err());
    }

    #[test]
    fn geometry_validation_catches_bad_fields() {
        let mut g = square_geometry(p(200.0, 0.0));
        g.bs_antennas = 0;
        assert!(g.validate().is_err());
        let mut g = square_geometry(p(200.0, 0.0));
        g.ris_element_spacing = 0.0;
        assert!(g.validate().is_err());
        let mut g = square_geometry(p(200.0, 0.0));
        g.user_positions.clear();
        assert!(g.validate().is_err());
    }
}
