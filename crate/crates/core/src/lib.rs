//! Analog matching of colored Gaussian sources to colored Gaussian channels.
//!
//! This library implements a semi-analog joint source-channel coding scheme
//! that matches a stationary Gaussian source of arbitrary spectrum to an
//! additive colored-Gaussian-noise channel of arbitrary spectrum (and
//! possibly different bandwidth), using linear prediction and dithered
//! modulo-lattice modulation instead of digital codes.
//!
//! The crate is organized around the processing chain:
//!
//! * [`spectra`] — power spectral densities on a uniform frequency grid,
//!   entropy power, prediction gains, forward/reverse water-filling, and the
//!   `R(D) = C` optimum solver.
//! * [`filters`] — spectral factorization, optimal FIR predictors, pre/post
//!   filter design, and assembly of the full filter set for a system.
//! * [`lattice`] — nearest-neighbor lattice quantizers (scalar, cubic, A2,
//!   D4, E8), modulo-lattice reduction, dither streams, and empirical
//!   decoding-failure probes.
//! * [`channel`] — colored Gaussian noise generation and the ISI-model
//!   front-end conversion.
//! * [`codec`] — the encoder/decoder pair: interleaved modulo-lattice
//!   modulation with source prediction at the decoder and channel
//!   prediction at the encoder, plus the initialization protocol.
//! * [`sim`] — end-to-end Monte Carlo harness and SNR sweeps.
//! * [`robustness`] — unknown-SNR analysis: mismatched Wiener decoders,
//!   distortion spectra under noise mismatch, closed-form comparison
//!   curves, and distortion-slope estimation.
//!
//! For a white source over a white channel the whole analytic chain has
//! closed forms, which makes a compact smoke test of the design path:
//!
//! ```
//! use analog_matching::filters::{design_matching, DesignParams};
//! use analog_matching::spectra::{opta, Spectrum, SystemSpec, DEFAULT_GRID};
//!
//! let m = DEFAULT_GRID;
//! // Unit-variance white source, unit white noise, SNR = 10.
//! let spec = SystemSpec::new(Spectrum::flat(1.0, m), Spectrum::flat(1.0, m), 10.0)?;
//! let best = opta(&spec)?;
//! assert!((best.sdr - 11.0).abs() < 1e-6);
//!
//! let fs = design_matching(&spec, &DesignParams::default())?;
//! // Water level P + N, zoom beta0^2 = (P + N)/Var{S}, scalar filters.
//! assert!((fs.theta_c - 11.0).abs() < 1e-6);
//! assert!((fs.beta0 * fs.beta0 - 11.0).abs() < 1e-5);
//! assert_eq!(fs.f1.taps.len(), 1);
//! # Ok::<(), analog_matching::Error>(())
//! ```

// `!(x > 0.0)` guards are used on purpose: unlike `x <= 0.0` they also
// reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codec;
pub mod error;
pub mod fft;
pub mod filters;
pub mod lattice;
pub mod rng;
pub mod robustness;
pub mod sim;
pub mod spectra;

pub use error::{Error, Result};
pub use filters::{DesignParams, MatchingFilterSet};
pub use lattice::{DitherStream, Lattice, LatticeKind};
pub use sim::{SimOptions, SimReport};
pub use spectra::{Spectrum, SystemSpec, WaterfillKind, WaterfillSolution};
