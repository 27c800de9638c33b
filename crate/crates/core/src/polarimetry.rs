//! Physics of the two-arm polarimetry scenario: imperfect photon-number-
//! resolving detectors (PNRDs), wave-plate unitaries generated by angular-
//! momentum operators, photon-pair statistics of two-mode squeezed sources,
//! and the linear-independence bounds that cap how many state parameters
//! polarimetry can ever probe.
//!
//! The detector model is a bank of `n0` multiplexed on/off detectors with
//! efficiency `eta`: outcome n means "n of the n0 bins clicked".  Its POVM
//! elements are diagonal in the photon-number basis, which is what lets the
//! whole scenario run through [`crate::quantum::DiagonalDataset`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use thiserror::Error;

use crate::quantum::{hermitian_eigen, CMat, HermitianOperator, QuantumError};

/// Diagonal entries of a PNRD POVM element may dip this far below zero from
/// floating-point cancellation in the alternating binomial sum; anything
/// lower is treated as a real error, anything above is clamped to 0.
pub const PNRD_NEGATIVITY_TOL: f64 = -1e-12;

/// Photon-pair distributions are truncated at the smallest cutoff whose
/// tail mass falls below this.
pub const SOURCE_TAIL_TOL: f64 = 1e-12;

/// Hard cap on the per-mode Fock cutoff of a source distribution.
pub const SOURCE_CUTOFF_CAP: usize = 60;

#[derive(Debug, Error)]
pub enum PolarimetryError {
    #[error("detection efficiency must lie in [0, 1], got {0}")]
    BadEfficiency(f64),
    #[error("maximum resolved photon number must be at least 1")]
    BadMaxPhoton,
    #[error("outcome {n} exceeds the maximum resolved photon number {n0}")]
    OutcomeOutOfRange { n: usize, n0: usize },
    #[error("squeezing parameter must be non-negative, got {0}")]
    NegativeSqueezing(f64),
    #[error("squeezing in dB must be non-negative, got {0}")]
    NegativeDb(f64),
    #[error("wave-plate angles must be finite, got {0}")]
    NonFiniteAngle(f64),
    #[error("PNRD diagonal entry {value} is below the negativity tolerance")]
    ExcessNegativity { value: f64 },
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// An imperfect photon-number-resolving detector: `n0` multiplexed bins,
/// each preceded by loss `1 - eta`.
#[derive(Clone, Copy, Debug)]
pub struct PnrdModel {
    eta: f64,
    n0: usize,
}

impl PnrdModel {
    pub fn new(eta: f64, n0: usize) -> Result<Self, PolarimetryError> {
        if !(0.0..=1.0).contains(&eta) || !eta.is_finite() {
            return Err(PolarimetryError::BadEfficiency(eta));
        }
        if n0 == 0 {
            return Err(PolarimetryError::BadMaxPhoton);
        }
        Ok(Self { eta, n0 })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Maximum resolved photon number per detector.
    pub fn n0(&self) -> usize {
        self.n0
    }
}

/// Photon-pair source family.  Both kinds trace out to the same geometric
/// photon-pair law, so `kind` is carried for reporting only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    Bell,
    Tmsv,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Bell => "bell",
            SourceKind::Tmsv => "tmsv",
        }
    }
}

/// A two-mode squeezed source with squeezing parameter `r` (natural units).
#[derive(Clone, Copy, Debug)]
pub struct TwoModeSource {
    kind: SourceKind,
    r: f64,
}

impl TwoModeSource {
    pub fn new(kind: SourceKind, r: f64) -> Result<Self, PolarimetryError> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(PolarimetryError::NegativeSqueezing(r));
        }
        Ok(Self { kind, r })
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

/// Wave-plate angles (radians) for the two arms of a polarimetry setup:
/// per arm, `theta` is the half-wave-plate angle and `phi` the
/// quarter-wave-plate angle.
#[derive(Clone, Copy, Debug)]
pub struct PolarimetrySetting {
    pub theta_a: f64,
    pub phi_a: f64,
    pub theta_b: f64,
    pub phi_b: f64,
}

impl PolarimetrySetting {
    pub fn new(
        theta_a: f64,
        phi_a: f64,
        theta_b: f64,
        phi_b: f64,
    ) -> Result<Self, PolarimetryError> {
        for angle in [theta_a, phi_a, theta_b, phi_b] {
            if !angle.is_finite() {
                return Err(PolarimetryError::NonFiniteAngle(angle));
            }
        }
        Ok(Self {
            theta_a,
            phi_a,
            theta_b,
            phi_b,
        })
    }

    /// (theta, phi) of arm A.
    pub fn arm_a(&self) -> (f64, f64) {
        (self.theta_a, self.phi_a)
    }

    /// (theta, phi) of arm B.
    pub fn arm_b(&self) -> (f64, f64) {
        (self.theta_b, self.phi_b)
    }
}

/// Exact binomial coefficient as f64 (arguments stay far below overflow).
fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut value = 1u128;
    for i in 0..k {
        value = value * (n - i) as u128 / (i + 1) as u128;
    }
    value as f64
}

/// Diagonal `<m| Pi_n |m>` of the PNRD element for outcome `n`, for photon
/// numbers m = 0..=m_max.
///
/// With `n` of `n0` bins clicking, inclusion–exclusion over the non-clicking
/// bins gives
/// `C(n0,n) * sum_k C(n,k) (-1)^k (1 - eta*(n0-n+k)/n0)^m`, with `0^0 = 1`.
/// Tiny negative values from cancellation are clamped to zero; anything
/// below [`PNRD_NEGATIVITY_TOL`] is an error.
pub fn pnrd_diagonal(
    model: &PnrdModel,
    n: usize,
    m_max: usize,
) -> Result<Vec<f64>, PolarimetryError> {
    let n0 = model.n0();
    if n > n0 {
        return Err(PolarimetryError::OutcomeOutOfRange { n, n0 });
    }
    let eta = model.eta();
    let prefactor = binomial(n0, n);
    let mut out = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let mut sum = 0.0;
        for k in 0..=n {
            let base = 1.0 - eta * (n0 - n + k) as f64 / n0 as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += binomial(n, k) * sign * base.powi(m as i32);
        }
        let value = prefactor * sum;
        if value < PNRD_NEGATIVITY_TOL {
            return Err(PolarimetryError::ExcessNegativity { value });
        }
        out.push(value.clamp(0.0, 1.0));
    }
    Ok(out)
}

/// Photon-pair distribution `p(m, m') = sech(r)^4 tanh(r)^(2(m+m'))` on the
/// grid `0..=cutoff` per mode, together with the truncated tail mass.
pub fn source_distribution(source: &TwoModeSource, cutoff: usize) -> (DMatrix<f64>, f64) {
    let t = source.r().tanh().powi(2);
    let sech4 = source.r().cosh().powi(4).recip();
    let p = DMatrix::from_fn(cutoff + 1, cutoff + 1, |m, mp| {
        sech4 * t.powi((m + mp) as i32)
    });
    let tail = 1.0 - p.sum();
    (p, tail)
}

/// Smallest per-mode cutoff whose tail mass is below [`SOURCE_TAIL_TOL`],
/// capped at [`SOURCE_CUTOFF_CAP`].
pub fn auto_cutoff(source: &TwoModeSource) -> usize {
    for cutoff in 0..=SOURCE_CUTOFF_CAP {
        let (_, tail) = source_distribution(source, cutoff);
        if tail < SOURCE_TAIL_TOL {
            return cutoff;
        }
    }
    SOURCE_CUTOFF_CAP
}

/// Convert squeezing quoted in dB into the dimensionless parameter r, via
/// `dB = 10 log10(e^(2r))`, i.e. `r = dB ln(10) / 20`.
pub fn squeezing_db_to_r(db: f64) -> Result<f64, PolarimetryError> {
    if !(db >= 0.0 && db.is_finite()) {
        return Err(PolarimetryError::NegativeDb(db));
    }
    Ok(db * std::f64::consts::LN_10 / 20.0)
}

/// Stochastic response of a pair of PNRDs (one per arm) to a photon pair
/// (m, m'): rows are outcomes (n1, n2) in layout `n1*(n0+1) + n2`, columns
/// are pairs in layout `m*(cutoff+1) + m'`.  Every column sums to 1 (the
/// PNRD outcomes are complete for any incident photon number).
pub fn response_matrix(
    model: &PnrdModel,
    cutoff: usize,
) -> Result<DMatrix<f64>, PolarimetryError> {
    let n0 = model.n0();
    let per_port: Vec<Vec<f64>> = (0..=n0)
        .map(|n| pnrd_diagonal(model, n, cutoff))
        .collect::<Result<_, _>>()?;
    let outcomes = (n0 + 1) * (n0 + 1);
    let pairs = (cutoff + 1) * (cutoff + 1);
    let mut response = DMatrix::zeros(outcomes, pairs);
    for n1 in 0..=n0 {
        for n2 in 0..=n0 {
            let row = n1 * (n0 + 1) + n2;
            for m in 0..=cutoff {
                for mp in 0..=cutoff {
                    response[(row, m * (cutoff + 1) + mp)] = per_port[n1][m] * per_port[n2][mp];
                }
            }
        }
    }
    Ok(response)
}

/// Truncated bosonic annihilation operator on `dim` levels.
fn ladder(dim: usize) -> CMat {
    let mut a = CMat::zeros(dim, dim);
    for k in 1..dim {
        a[(k - 1, k)] = Complex::new((k as f64).sqrt(), 0.0);
    }
    a
}

/// Angular-momentum generators `J2 = i(aV† aH - aH† aV)/2` and
/// `J3 = (aH† aH - aV† aV)/2` on the two-polarization-mode Fock space
/// truncated at `n0` photons per mode (dimension `(n0+1)^2`).
pub fn angular_momentum_ops(
    n0: usize,
) -> Result<(HermitianOperator, HermitianOperator), PolarimetryError> {
    if n0 == 0 {
        return Err(PolarimetryError::BadMaxPhoton);
    }
    let dim = n0 + 1;
    let a = ladder(dim);
    let identity = CMat::identity(dim, dim);
    let a_h = a.kronecker(&identity);
    let a_v = identity.kronecker(&a);
    let i_half = Complex::new(0.0, 0.5);
    let j2 = (a_v.adjoint() * &a_h - a_h.adjoint() * &a_v).map(|z| z * i_half);
    let j3 = (a_h.adjoint() * &a_h - a_v.adjoint() * &a_v).scale(0.5);
    Ok((HermitianOperator::new(j2)?, HermitianOperator::new(j3)?))
}

/// `exp(-i * angle * generator)` via the generator's eigendecomposition.
fn rotation(generator: &HermitianOperator, angle: f64) -> CMat {
    let (eigenvalues, eigenvectors) = hermitian_eigen(generator.matrix());
    let phases = DVector::from_iterator(
        eigenvalues.len(),
        eigenvalues.iter().map(|&w| Complex::from_polar(1.0, -angle * w)),
    );
    &eigenvectors * CMat::from_diagonal(&phases) * eigenvectors.adjoint()
}

/// One arm's wave-plate unitary `U = exp(-i phi J3) exp(-i theta J2)` on the
/// two-polarization-mode space truncated at `n0` photons per mode.  Both
/// generators conserve total photon number, so U is block-diagonal in total
/// photon number and exactly unitary despite the truncation.
pub fn waveplate_unitary(theta: f64, phi: f64, n0: usize) -> Result<CMat, PolarimetryError> {
    for angle in [theta, phi] {
        if !angle.is_finite() {
            return Err(PolarimetryError::NonFiniteAngle(angle));
        }
    }
    let (j2, j3) = angular_momentum_ops(n0)?;
    Ok(rotation(&j3, phi) * rotation(&j2, theta))
}

/// POVM of one arm: both polarization ports measured by PNRDs behind the
/// wave plates, `Pi_(n1,n2) = U (Pi_n1 ⊗ Pi_n2) U†`, with `(n0+1)^2`
/// elements on the `(n0+1)^2`-dimensional two-mode space.
pub fn two_port_povm(
    theta: f64,
    phi: f64,
    model: &PnrdModel,
) -> Result<Vec<HermitianOperator>, PolarimetryError> {
    let n0 = model.n0();
    let u = waveplate_unitary(theta, phi, n0)?;
    let diagonals: Vec<Vec<f64>> = (0..=n0)
        .map(|n| pnrd_diagonal(model, n, n0))
        .collect::<Result<_, _>>()?;
    let mut elements = Vec::with_capacity((n0 + 1) * (n0 + 1));
    for d1 in &diagonals {
        for d2 in &diagonals {
            let joint = DVector::from_iterator(
                d1.len() * d2.len(),
                d1.iter()
                    .flat_map(|&x| d2.iter().map(move |&y| Complex::new(x * y, 0.0))),
            );
            let conjugated = &u * CMat::from_diagonal(&joint) * u.adjoint();
            let symmetrized = (&conjugated + conjugated.adjoint()).scale(0.5);
            elements.push(HermitianOperator::new(symmetrized)?);
        }
    }
    Ok(elements)
}

/// Number of linearly independent POVM elements a single arm's two-port
/// polarimetry can produce when each port resolves at most `n0` photons:
/// `(n0+1)(2 n0^2 + 4 n0 + 3) / 3`.
pub fn dpol_per_port(n0: usize) -> Result<usize, PolarimetryError> {
    if n0 == 0 {
        return Err(PolarimetryError::BadMaxPhoton);
    }
    Ok((n0 + 1) * (2 * n0 * n0 + 4 * n0 + 3) / 3)
}

/// Number of free state parameters probed by polarimetry when the *total*
/// two-port photon number is capped at `2 n0`:
/// `(n0+1)(2 n0+1)(4 n0+3) / 3`.
pub fn dpol_total_photon(n0: usize) -> Result<usize, PolarimetryError> {
    if n0 == 0 {
        return Err(PolarimetryError::BadMaxPhoton);
    }
    Ok((n0 + 1) * (2 * n0 + 1) * (4 * n0 + 3) / 3)
}
