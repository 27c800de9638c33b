//! Seeded generators for synthetic measurement records: random
//! von-Neumann-basis tomography of single-mode states (with an optional
//! uniform dark-count background) and photon-pair counting through the
//! polarimetry detector chain.
//!
//! Every generator is a deterministic function of an explicit seed or RNG
//! value, so datasets are bit-reproducible within this implementation.
//! Parallel simulation is the caller's job: split seeds, not generators.
//! The RNG family is fixed to ChaCha12 throughout.

use nalgebra::DVector;
use num_complex::Complex;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use thiserror::Error;

use crate::polarimetry::{
    auto_cutoff, response_matrix, source_distribution, PnrdModel, PolarimetryError, TwoModeSource,
};
use crate::quantum::{
    born_probabilities, BasisCounts, CMat, DensityOperator, DiagonalDataset, MeasurementDataset,
    PovmBasis, QuantumError,
};

/// Distributions handed to the samplers must sum to 1 within this.
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation config field {field} is invalid: {value}")]
    BadConfig { field: &'static str, value: String },
    #[error("mode index {n} does not fit in dimension {dim}")]
    ModeOutOfRange { n: usize, dim: usize },
    #[error("dimension must be at least 2, got {0}")]
    BadDimension(usize),
    #[error("dark-count rate must lie in [0, 1), got {0}")]
    BadRate(f64),
    #[error("probabilities must be non-negative and sum to 1, got sum {sum}")]
    BadDistribution { sum: f64 },
    #[error("at least one copy must be sampled")]
    ZeroCopies,
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Polarimetry(#[from] PolarimetryError),
}

/// Knobs of a tomography simulation run.
#[derive(Clone, Copy, Debug)]
pub struct SimConfig {
    /// RNG seed; the run is a deterministic function of it.
    pub seed: u64,
    /// Copies measured in each basis.
    pub copies_per_basis: u64,
    /// Number of independently drawn measurement bases.
    pub num_bases: usize,
    /// Hilbert-space dimension the simulation is embedded in.
    pub dim_max: usize,
    /// Fraction of counts replaced by a uniform background.
    pub dark_rate: f64,
}

impl SimConfig {
    fn validate(&self) -> Result<(), SimError> {
        if self.copies_per_basis == 0 {
            return Err(SimError::BadConfig {
                field: "copies_per_basis",
                value: "0".into(),
            });
        }
        if self.num_bases == 0 {
            return Err(SimError::BadConfig {
                field: "num_bases",
                value: "0".into(),
            });
        }
        if self.dim_max < 2 {
            return Err(SimError::BadConfig {
                field: "dim_max",
                value: self.dim_max.to_string(),
            });
        }
        if !(0.0..1.0).contains(&self.dark_rate) {
            return Err(SimError::BadConfig {
                field: "dark_rate",
                value: self.dark_rate.to_string(),
            });
        }
        Ok(())
    }
}

/// A Haar-random von Neumann basis: projectors `V |j><j| V†` for a
/// Haar-distributed unitary V, obtained by orthonormalizing a complex
/// standard-Gaussian matrix and dividing out the phases of the triangular
/// factor's diagonal.
pub fn haar_basis<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<PovmBasis, SimError> {
    if dim < 2 {
        return Err(SimError::BadDimension(dim));
    }
    let ginibre = CMat::from_fn(dim, dim, |_, _| {
        Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = ginibre.qr();
    let r_diagonal = qr.r().diagonal();
    let q = qr.q();
    let phases = DVector::from_iterator(
        dim,
        r_diagonal.iter().map(|z| {
            if z.norm() == 0.0 {
                Complex::new(1.0, 0.0)
            } else {
                z / z.norm()
            }
        }),
    );
    let unitary = q * CMat::from_diagonal(&phases);
    Ok(PovmBasis::from_unitary_columns(&unitary)?)
}

/// The pure state occupying mode index `n` of a `dim`-level system.
pub fn mode_state(n: usize, dim: usize) -> Result<DensityOperator, SimError> {
    if dim < 2 {
        return Err(SimError::BadDimension(dim));
    }
    if n >= dim {
        return Err(SimError::ModeOutOfRange { n, dim });
    }
    let mut amplitudes = vec![Complex::new(0.0, 0.0); dim];
    amplitudes[n] = Complex::new(1.0, 0.0);
    Ok(DensityOperator::from_pure(&amplitudes)?)
}

fn check_distribution(probabilities: &[f64]) -> Result<(), SimError> {
    let sum: f64 = probabilities.iter().sum();
    if probabilities.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > DISTRIBUTION_SUM_TOL {
        return Err(SimError::BadDistribution { sum });
    }
    Ok(())
}

/// Mix a uniform dark-count background into an outcome distribution:
/// `p' = (1 - rate) p + rate / len`.
pub fn apply_dark_counts(probabilities: &[f64], rate: f64) -> Result<Vec<f64>, SimError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(SimError::BadRate(rate));
    }
    check_distribution(probabilities)?;
    let uniform = rate / probabilities.len() as f64;
    Ok(probabilities
        .iter()
        .map(|&p| (1.0 - rate) * p + uniform)
        .collect())
}

/// One multinomial draw of `n_copies` outcomes, via sequential conditional
/// binomials.
pub fn sample_counts<R: Rng + ?Sized>(
    probabilities: &[f64],
    n_copies: u64,
    rng: &mut R,
) -> Result<Vec<u64>, SimError> {
    if n_copies == 0 {
        return Err(SimError::ZeroCopies);
    }
    check_distribution(probabilities)?;
    let mut counts = vec![0u64; probabilities.len()];
    let mut remaining_copies = n_copies;
    let mut remaining_mass = 1.0;
    for (slot, &p) in counts.iter_mut().zip(probabilities) {
        if remaining_copies == 0 {
            break;
        }
        let conditional = if remaining_mass <= 0.0 {
            1.0
        } else {
            (p / remaining_mass).clamp(0.0, 1.0)
        };
        let draw = if conditional >= 1.0 {
            remaining_copies
        } else {
            Binomial::new(remaining_copies, conditional)
                .expect("conditional probability is in [0, 1]")
                .sample(rng)
        };
        *slot = draw;
        remaining_copies -= draw;
        remaining_mass -= p;
    }
    // Any copies left over by floating-point underflow of the tail mass go
    // to the last outcome so the total is exact.
    if remaining_copies > 0 {
        *counts.last_mut().expect("distribution is non-empty") += remaining_copies;
    }
    Ok(counts)
}

/// Simulate tomography of `mode_state(n)` under `config.num_bases` freshly
/// drawn Haar bases with `config.copies_per_basis` copies each, mixing in
/// dark counts at `config.dark_rate`.
pub fn simulate_temporal(n: usize, config: &SimConfig) -> Result<MeasurementDataset, SimError> {
    config.validate()?;
    if n >= config.dim_max {
        return Err(SimError::ModeOutOfRange {
            n,
            dim: config.dim_max,
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let state = mode_state(n, config.dim_max)?;
    let mut bases = Vec::with_capacity(config.num_bases);
    for _ in 0..config.num_bases {
        let basis = haar_basis(config.dim_max, &mut rng)?;
        // Clip the tiny negatives float arithmetic can leave in Born
        // probabilities, then renormalize.
        let raw = born_probabilities(&state, &basis)?;
        let clipped: Vec<f64> = raw.iter().map(|&p| p.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let normalized: Vec<f64> = clipped.iter().map(|&p| p / total).collect();
        let noisy = apply_dark_counts(&normalized, config.dark_rate)?;
        let counts = sample_counts(&noisy, config.copies_per_basis, &mut rng)?;
        bases.push(BasisCounts { basis, counts });
    }
    Ok(MeasurementDataset::new(config.dim_max, bases)?)
}

/// Outcome distribution of the two-arm photon-pair counting chain: the
/// detector response applied to the (normalized) truncated pair
/// distribution.  Returned alongside the per-mode Fock cutoff used.
pub fn outcome_distribution(
    source: &TwoModeSource,
    model: &PnrdModel,
) -> Result<(Vec<f64>, usize), SimError> {
    let cutoff = auto_cutoff(source);
    let (pairs, _tail) = source_distribution(source, cutoff);
    let response = response_matrix(model, cutoff)?;
    let total = pairs.sum();
    let dim = cutoff + 1;
    let mut flat = DVector::zeros(dim * dim);
    for m in 0..dim {
        for mp in 0..dim {
            flat[m * dim + mp] = pairs[(m, mp)] / total;
        }
    }
    let outcome = &response * flat;
    Ok((outcome.iter().copied().collect(), cutoff))
}

/// Simulate `n_copies` photon pairs counted by a PNRD pair, recording the
/// response matrix alongside the sampled outcome counts.
pub fn simulate_polarimetry<R: Rng + ?Sized>(
    source: &TwoModeSource,
    model: &PnrdModel,
    n_copies: u64,
    rng: &mut R,
) -> Result<DiagonalDataset, SimError> {
    let (outcome, cutoff) = outcome_distribution(source, model)?;
    let counts = sample_counts(&outcome, n_copies, rng)?;
    let response = response_matrix(model, cutoff)?;
    Ok(DiagonalDataset::new(cutoff + 1, response, counts)?)
}
