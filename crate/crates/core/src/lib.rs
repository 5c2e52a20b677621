//! Qubit and qudit simulation of molecular vibrational dynamics.
//!
//! The crate builds the cubic-anharmonic vibrational Hamiltonian of a
//! polyatomic molecule in a truncated harmonic-oscillator product basis,
//! rewrites it as a weighted sum of generalized Gell-Mann strings under a
//! binary, direct (one-hot) or qudit encoding, and propagates it with a
//! first-order Suzuki-Trotter product under a per-gate depolarizing channel.
//!
//! Units are fixed throughout: energies and Hamiltonian coefficients in
//! cm⁻¹, times in ps. See [`units`] for the single conversion constant.
//!
//! Module map:
//!
//! - [`model`]: vibrational model, exact matrix representation, diagonalization
//!   and Trotter-free reference populations.
//! - [`encoding`]: basis-state to computational-index maps and resource counts.
//! - [`gm`]: generalized Gell-Mann basis, operator decomposition and the encoded
//!   term list.
//! - [`trotter`]: commutator-score ordering, noisy evolution and decay-time model.
//! - [`analysis`]: Fourier spectra, series comparison and decay fits.
//! - [`cli`]: command-line pipelines and artifact writers.

pub mod analysis;
pub mod cli;
pub mod encoding;
mod error;
pub mod gm;
pub mod model;
pub mod trotter;
pub mod units;

pub use error::{Error, Result};

/// Default cap on any dense Hilbert-space dimension the crate will allocate.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Environment variable that overrides [`DEFAULT_DIM_CAP`].
pub const DIM_CAP_ENV: &str = "VIBQUDIT_DIM_CAP";

/// Effective dimension cap, honoring the [`DIM_CAP_ENV`] override.
pub fn dimension_cap() -> usize {
    std::env::var(DIM_CAP_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&c| c > 0)
        .unwrap_or(DEFAULT_DIM_CAP)
}

pub(crate) fn check_cap(what: &'static str, requested: usize, cap: usize) -> Result<()> {
    if requested > cap {
        Err(Error::ResourceLimit {
            what,
            requested,
            cap,
        })
    } else {
        Ok(())
    }
}
