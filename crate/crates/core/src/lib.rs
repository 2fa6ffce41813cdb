//! Steady-state multiphoton coincidence spectra of a multichromatically driven,
//! damped Jaynes-Cummings atom-cavity system.
//!
//! Rates are measured in units of the cavity decay `kappa` and every frequency
//! is stored as an offset in the frame rotating with the first drive tone.
//!
//! The crate is organised bottom-up:
//!
//! * [`basis`] builds the truncated dressed-state basis and its operators.
//! * [`superop`] vectorises commutators and dissipators (column stacking).
//! * [`steady`] solves the Bloch-harmonic system for the periodic steady state.
//! * [`pathway`] estimates peak heights from no-jump amplitude evolution.
//! * [`ensemble`] averages spectra over coupling-strength distributions.
//! * [`oracle`] integrates the full master equation in time for cross-checks.
//! * [`config`], [`output`] and [`commands`] back the `mpcs` command line tool.

pub mod basis;
pub mod commands;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod oracle;
pub mod output;
pub mod params;
pub mod pathway;
pub mod steady;
pub mod superop;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use params::SystemParams;
