//! Certifies the smallest Hilbert-space dimension supporting an unknown
//! quantum state, directly from measurement counts.
//!
//! The pipeline is: fit a maximum-likelihood state for every candidate
//! dimension ([`mle`]), convert the resulting likelihood ladder into
//! relative-belief ratios and posterior credibilities with extended-precision
//! arithmetic ([`xprec`], [`certify`]), and report the smallest dimension the
//! data actually supports alongside AIC/BIC baselines.  Measurement models
//! for temporal-mode tomography ([`simulate`]) and two-arm photon-number
//! polarimetry ([`polarimetry`]) are included so the full chain can be
//! exercised end to end.

pub mod certify;
pub mod io;
pub mod mle;
pub mod polarimetry;
pub mod simulate;
pub mod quantum;
pub mod xprec;
