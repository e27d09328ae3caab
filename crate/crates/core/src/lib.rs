//! Simulation and analysis toolkit for a pair of capacitively coupled
//! singlet-triplet (ST₀) spin qubits.
//!
//! The crate covers the full chain from the two-qubit Hamiltonian to the
//! figures of merit of a capacitive conditional-phase gate:
//!
//! - [`model`]: exact 4×4 quantum mechanics (Hamiltonian, propagators, gates,
//!   conditional precession frequency, Born probabilities).
//! - [`noise`]: the hidden environment the estimator chases, i.e. drifting
//!   nuclear field gradients and the empirical charge-noise coherence laws.
//! - [`readout`]: single-shot energy-selective-tunneling readout with
//!   visibility and inter-qubit crosstalk.
//! - [`estimator`]: real-time Bayesian estimation of the field gradient on a
//!   discretised posterior, with quantisation and latency accounting.
//! - [`controller`]: probe/herald/operate loops and the Rabi, Ramsey, echo and
//!   conditional exchange experiments.
//! - [`fitting`]: Levenberg–Marquardt curve fitting, FFT spectra and the
//!   sampling-rate uncertainty study.
//! - [`coupling`]: Hund–Mulliken coupling model, coupling extraction and the
//!   power-law analysis.
//! - [`bell`]: echo-like entangling sequence under single-qubit dephasing.
//! - [`io`], [`config`], [`rng`]: trace files, run configuration and
//!   deterministic seeding.
//!
//! # Units
//!
//! Unless a name says otherwise, frequencies are cyclic frequencies in MHz
//! and times are in µs, so that `f * t` is a number of cycles and every
//! evolution phase carries an explicit `2π`. Detunings are in mV. The
//! Hund–Mulliken module works in GHz, as its inputs are quoted that way.

pub mod bell;
pub mod config;
pub mod controller;
pub mod coupling;
pub mod error;
pub mod estimator;
pub mod fitting;
pub mod io;
pub mod model;
pub mod noise;
pub mod readout;
pub mod rng;

pub use error::{Error, Result};
