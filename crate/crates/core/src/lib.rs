//! Real-valued time-delay convolutional neural network (RVTDCNN) behavioral
//! modeling and digital predistortion for wideband power amplifiers.
//!
//! The crate covers the full desk-scale pipeline: OFDM test signals, a
//! synthetic memory-polynomial amplifier with modulator impairments, feature
//! graph datasets, the convolutional model and its two-stage (Adam, then
//! Levenberg-Marquardt) training, polynomial and MLP baselines, spectral
//! metrics, indirect-learning predistortion, complexity calculators and an
//! exact symbolic check of the convolutional filter's basis functions.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod signal;
pub mod pa_sim;
pub mod dataset;
pub mod network;
pub mod training;
pub mod metrics;
pub mod dpd;
pub mod baselines;
pub mod complexity;
pub mod basis_check;
pub mod experiment;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use signal::{generate_ofdm, normalize_peak, papr_db, ComplexSeq, OfdmConfig};
pub use pa_sim::{apply_impairments, default_pa, gain_compression_db, pa_forward, ImpairmentConfig, PolyPaModel, Transmitter};
