//! Link-level simulator for multi-user MIMO downlinks aided by a
//! reconfigurable surface, in both passive (phase-only) and active
//! (amplify-and-phase) variants.
//!
//! The crate covers the full experiment pipeline:
//!
//! * [`numerics`] — dense complex matrices and the Hermitian solve that the
//!   optimizers are built on;
//! * [`channel`] — geometry, log-distance path loss and Ricean sub-link
//!   generation with deterministic per-link seeding;
//! * [`link`] — effective channels through a surface, SINR/sum-rate
//!   accounting and the power bookkeeping of active elements;
//! * [`beamforming`] — WMMSE precoding plus the alternating passive/active
//!   surface optimizers and a brute-force test oracle;
//! * [`analysis`] — closed-form surface sizing, noise-floor and scaling-law
//!   calculators;
//! * [`sim`] — scenario configuration, the paired Monte Carlo harness and
//!   CSV/JSON emission;
//! * [`cli`] — the `ris-linksim` command-line front end.
//!
//! Everything is deterministic under a master seed: trials derive their
//! seeds hierarchically, so results are bit-identical across worker counts
//! and any single trial can be replayed in isolation.

pub mod analysis;
pub mod beamforming;
pub mod channel;
pub mod cli;
pub mod error;
pub mod link;
pub mod numerics;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
