//! Simulation and analysis toolkit for post-selected multiphoton linear optics.
//!
//! The crate is layered bottom-up:
//!
//! * [`fock`] evolves few-photon Fock superpositions through linear mode
//!   transformations and conditions them on detection patterns.
//! * [`circuits`] builds the dual-rail circuit elements (phase shifters,
//!   couplers, Bell and fusion operators, single-qubit stages).
//! * [`source`] models microring pair sources: spectra, joint spectra,
//!   Schmidt purity, count-rate algebra and curve fits.
//! * [`protocols`] composes sources and circuits into Bell, teleportation,
//!   swapping and GHZ experiments with multi-pair and distinguishability noise.
//! * [`estimation`] turns counts into density matrices, fidelities, witness
//!   values and two-basis entanglement bounds.
//! * [`cli`], [`config`], [`io`] and [`svg`] back the `sim` binary.

pub mod cli;
pub mod circuits;
pub mod config;
pub mod error;
pub mod estimation;
pub mod fock;
pub mod io;
pub mod protocols;
pub mod source;
pub mod svg;

pub use num_complex::Complex64 as C64;
