//! Secrecy-rate design and simulation for a RIS-aided movable-antenna (MA)
//! MIMO downlink with transceiver hardware impairments and bounded CSI error.
//!
//! The library covers the full design loop of such a system:
//!
//! * near-field channel construction over a discrete antenna-position grid
//!   ([`channel`]),
//! * secrecy-sum-rate evaluation with hardware-impairment terms ([`signal`]),
//! * leakage-based transmit beamforming via generalized Rayleigh quotients
//!   ([`grq`]),
//! * incremental RIS phase/amplitude steps posed as small cone programs
//!   ([`phase`]) solved by the bundled interior-point solver ([`conic`]),
//! * antenna-position selection by uniform or sparsity-driven grouping
//!   ([`placement`]),
//! * receive combining and power splitting between confidential beams and
//!   artificial noise ([`receivers`]),
//! * the alternating optimization driver and full pipeline ([`pipeline`]),
//! * independent brute-force / Monte-Carlo reference implementations
//!   ([`oracle`]).
//!
//! All numerics are generic over the real scalar type through [`scalar::Real`];
//! `f64` aliases for the common types live at the crate root.

pub mod channel;
pub mod config;
pub mod conic;
pub mod error;
pub mod grq;
pub mod linalg;
pub mod oracle;
pub mod phase;
pub mod pipeline;
pub mod placement;
pub mod receivers;
pub mod rng;
pub mod scalar;
pub mod signal;

pub use error::Error;
pub use scalar::Real;

use num_complex::Complex;

/// Complex scalar over a generic real type.
pub type Cx<T> = Complex<T>;
/// Complex vector.
pub type CVec<T> = ndarray::Array1<Complex<T>>;
/// Complex matrix.
pub type CMat<T> = ndarray::Array2<Complex<T>>;
/// Real vector.
pub type RVec<T> = ndarray::Array1<T>;
/// Real matrix.
pub type RMat<T> = ndarray::Array2<T>;

/// Double-precision complex scalar.
pub type C64 = Complex<f64>;
/// Double-precision complex vector.
pub type CVec64 = CVec<f64>;
/// Double-precision complex matrix.
pub type CMat64 = CMat<f64>;

/// Double-precision system configuration.
pub type SystemConfig64 = config::SystemConfig<f64>;
/// Double-precision channel set.
pub type ChannelSet64 = channel::ChannelSet<f64>;
/// Double-precision beamformer state.
pub type BeamformerState64 = signal::BeamformerState<f64>;
/// Double-precision rate report.
pub type RateReport64 = signal::RateReport<f64>;
