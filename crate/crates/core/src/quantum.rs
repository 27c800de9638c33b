//! States, measurements, count datasets, and the probability rules that
//! connect them.
//!
//! Everything here is plain `f64` linear algebra: solver accuracy, not
//! storage precision, limits how many digits of a likelihood are meaningful.
//! Extended precision is confined to [`crate::xprec`], which only ever sees
//! finished log-likelihood values.
//!
//! All types are immutable after construction and every operation is pure,
//! so values can be shared freely across threads.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use thiserror::Error;

/// Dense complex matrix, the working representation for states and POVM
/// elements.
pub type CMat = DMatrix<Complex<f64>>;

/// Largest entrywise deviation from `A = A†` tolerated when validating a
/// Hermitian operator.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Eigenvalues of states and POVM elements may undershoot zero by at most
/// this much (floating-point noise from eigendecompositions).
pub const EIGENVALUE_NEG_TOL: f64 = 1e-10;

/// Tolerated deviation of a density operator's trace from 1.
pub const UNIT_TRACE_TOL: f64 = 1e-10;

/// Tolerated entrywise deviation of a POVM's element sum from the identity.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// Born probabilities in `[-PROB_CLAMP_TOL, 0)` are clamped to zero; more
/// negative values signal a broken POVM and raise an error.
pub const PROB_CLAMP_TOL: f64 = 1e-12;

/// Tolerated deviation of a complete measurement's probabilities from
/// summing to 1.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Each column of a diagonal-response matrix is a sub-normalized probability
/// distribution; its sum may exceed 1 by at most this much.
pub const RESPONSE_COLUMN_SUM_TOL: f64 = 1e-10;

/// Response-matrix entries are probabilities; they may exceed 1 by at most
/// this much.
pub const RESPONSE_ENTRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("matrix is not Hermitian: max |A - A^H| entry = {max_dev:.3e}")]
    NotHermitian { max_dev: f64 },
    #[error("operator is not positive semidefinite: min eigenvalue = {min_eigenvalue:.3e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("density operator trace is {trace:.12}, expected 1")]
    TraceNotOne { trace: f64 },
    #[error("matrix is not square: {nrows}x{ncols}")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("POVM elements do not sum to the identity: max deviation = {max_dev:.3e}")]
    Incomplete { max_dev: f64 },
    #[error("POVM basis needs at least one element")]
    EmptyBasis,
    #[error("dimension mismatch: state is {state_dim}, measurement is {basis_dim}")]
    DimensionMismatch { state_dim: usize, basis_dim: usize },
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("probability {value:.3e} at index {index} is negative beyond tolerance")]
    NegativeProbability { value: f64, index: usize },
    #[error("probability {value:.6} at index {index} lies outside [0, 1]")]
    ProbabilityOutOfRange { value: f64, index: usize },
    #[error("probabilities sum to {sum:.12}, expected 1")]
    ProbabilitySumNotOne { sum: f64 },
    #[error("cannot embed a dim-{state_dim} state into dim {target_dim}")]
    EmbedIntoSmaller { state_dim: usize, target_dim: usize },
    #[error("truncation dimension {d} is outside 1..={dim}")]
    TruncationOutOfRange { d: usize, dim: usize },
    #[error("distribution entry {value:.3e} at index {index} is negative")]
    NegativeEntry { value: f64, index: usize },
    #[error("distribution sums to {sum:.12}, beyond the sub-normalization tolerance")]
    OverNormalized { sum: f64 },
    #[error("response entry ({row}, {col}) = {value:.3e} is outside [0, 1]")]
    ResponseEntryOutOfRange { row: usize, col: usize, value: f64 },
    #[error("response column {col} sums to {sum:.12}, above 1")]
    ResponseColumnOverflow { col: usize, sum: f64 },
    #[error(
        "response has {ncols} columns; expected dim_max = {dim_max} (single index) \
         or dim_max^2 = {dim_max_sq} (pair index)"
    )]
    ResponseShape { ncols: usize, dim_max: usize, dim_max_sq: usize },
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues (ascending is
/// not guaranteed) and the matching eigenvector columns.
pub(crate) fn hermitian_eigen(matrix: &CMat) -> (DVector<f64>, CMat) {
    let eigen = matrix.clone().symmetric_eigen();
    (eigen.eigenvalues, eigen.eigenvectors)
}

/// Largest entrywise deviation from Hermitian symmetry.
pub(crate) fn hermiticity_deviation(matrix: &CMat) -> f64 {
    let adjoint = matrix.adjoint();
    (matrix - adjoint).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A validated Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: CMat,
}

impl HermitianOperator {
    pub fn new(matrix: CMat) -> Result<Self, QuantumError> {
        if !matrix.is_square() {
            return Err(QuantumError::NotSquare {
                nrows: matrix.nrows(),
                ncols: matrix.ncols(),
            });
        }
        let max_dev = hermiticity_deviation(&matrix);
        if max_dev > HERMITICITY_TOL {
            return Err(QuantumError::NotHermitian { max_dev });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// A validated density operator: Hermitian, positive semidefinite within
/// [`EIGENVALUE_NEG_TOL`], unit trace within [`UNIT_TRACE_TOL`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: CMat,
}

impl DensityOperator {
    pub fn new(matrix: CMat) -> Result<Self, QuantumError> {
        let hermitian = HermitianOperator::new(matrix)?;
        let matrix = hermitian.matrix;
        let (eigenvalues, _) = hermitian_eigen(&matrix);
        let min_eigenvalue = eigenvalues.min();
        if min_eigenvalue < -EIGENVALUE_NEG_TOL {
            return Err(QuantumError::NotPositive { min_eigenvalue });
        }
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > UNIT_TRACE_TOL {
            return Err(QuantumError::TraceNotOne { trace });
        }
        Ok(Self { matrix })
    }

    /// Pure state `|psi><psi|` from an (unnormalized) amplitude vector.
    pub fn from_pure(amplitudes: &[Complex<f64>]) -> Result<Self, QuantumError> {
        let v = DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        let v = v / Complex::new(norm, 0.0);
        Self::new(&v * v.adjoint())
    }

    /// Maximally mixed state `I/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        let matrix = CMat::identity(dim, dim) / Complex::new(dim as f64, 0.0);
        Self { matrix }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Real parts of the diagonal (populations in the computational basis).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }
}

/// A positive-operator-valued measure: elements are PSD within
/// [`EIGENVALUE_NEG_TOL`] and sum to the identity within
/// [`COMPLETENESS_TOL`] entrywise.
#[derive(Clone, Debug, PartialEq)]
pub struct PovmBasis {
    dim: usize,
    elements: Vec<CMat>,
}

impl PovmBasis {
    pub fn new(elements: Vec<CMat>) -> Result<Self, QuantumError> {
        let Some(first) = elements.first() else {
            return Err(QuantumError::EmptyBasis);
        };
        let dim = first.nrows();
        let mut sum = CMat::zeros(dim, dim);
        for element in &elements {
            if element.nrows() != dim || element.ncols() != dim {
                return Err(QuantumError::DimensionMismatch {
                    state_dim: dim,
                    basis_dim: element.nrows(),
                });
            }
            let max_dev = hermiticity_deviation(element);
            if max_dev > HERMITICITY_TOL {
                return Err(QuantumError::NotHermitian { max_dev });
            }
            let (eigenvalues, _) = hermitian_eigen(element);
            let min_eigenvalue = eigenvalues.min();
            if min_eigenvalue < -EIGENVALUE_NEG_TOL {
                return Err(QuantumError::NotPositive { min_eigenvalue });
            }
            sum += element;
        }
        let identity = CMat::identity(dim, dim);
        let max_dev = (sum - identity).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if max_dev > COMPLETENESS_TOL {
            return Err(QuantumError::Incomplete { max_dev });
        }
        Ok(Self { dim, elements })
    }

    /// Projectors onto the columns of a unitary (a von Neumann basis).
    pub fn from_unitary_columns(unitary: &CMat) -> Result<Self, QuantumError> {
        let dim = unitary.nrows();
        let elements = (0..dim)
            .map(|k| {
                let col = unitary.column(k);
                &col * col.adjoint()
            })
            .collect();
        Self::new(elements)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[CMat] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// One measured basis: the POVM together with the observed outcome counts.
#[derive(Clone, Debug)]
pub struct BasisCounts {
    pub basis: PovmBasis,
    pub counts: Vec<u64>,
}

/// Counts collected over several POVM bases on copies of the same state.
#[derive(Clone, Debug)]
pub struct MeasurementDataset {
    dim_max: usize,
    bases: Vec<BasisCounts>,
}

impl MeasurementDataset {
    pub fn new(dim_max: usize, bases: Vec<BasisCounts>) -> Result<Self, QuantumError> {
        if bases.is_empty() {
            return Err(QuantumError::EmptyBasis);
        }
        for entry in &bases {
            if entry.basis.dim() != dim_max {
                return Err(QuantumError::DimensionMismatch {
                    state_dim: dim_max,
                    basis_dim: entry.basis.dim(),
                });
            }
            if entry.counts.len() != entry.basis.len() {
                return Err(QuantumError::LengthMismatch {
                    expected: entry.basis.len(),
                    got: entry.counts.len(),
                });
            }
        }
        Ok(Self { dim_max, bases })
    }

    pub fn dim_max(&self) -> usize {
        self.dim_max
    }

    pub fn bases(&self) -> &[BasisCounts] {
        &self.bases
    }

    /// Total number of recorded events across all bases.
    pub fn total_counts(&self) -> u64 {
        self.bases
            .iter()
            .map(|b| b.counts.iter().sum::<u64>())
            .sum()
    }
}

/// How the columns of a diagonal response matrix are indexed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportIndex {
    /// One column per photon number `m` in `0..dim_max`.
    Single,
    /// One column per photon-number pair `(m, m')`, laid out as
    /// `m * dim_max + m'`.
    Pair,
}

/// Counts from a measurement whose outcome probabilities depend only on the
/// diagonal of the state: `p = response · diag(state)`.
#[derive(Clone, Debug)]
pub struct DiagonalDataset {
    dim_max: usize,
    response: DMatrix<f64>,
    counts: Vec<u64>,
    support: SupportIndex,
}

impl DiagonalDataset {
    pub fn new(
        dim_max: usize,
        response: DMatrix<f64>,
        counts: Vec<u64>,
    ) -> Result<Self, QuantumError> {
        let support = if response.ncols() == dim_max {
            SupportIndex::Single
        } else if response.ncols() == dim_max * dim_max {
            SupportIndex::Pair
        } else {
            return Err(QuantumError::ResponseShape {
                ncols: response.ncols(),
                dim_max,
                dim_max_sq: dim_max * dim_max,
            });
        };
        if counts.len() != response.nrows() {
            return Err(QuantumError::LengthMismatch {
                expected: response.nrows(),
                got: counts.len(),
            });
        }
        for col in 0..response.ncols() {
            let mut sum = 0.0;
            for row in 0..response.nrows() {
                let value = response[(row, col)];
                if !(0.0..=1.0 + RESPONSE_ENTRY_TOL).contains(&value) {
                    return Err(QuantumError::ResponseEntryOutOfRange { row, col, value });
                }
                sum += value;
            }
            if sum > 1.0 + RESPONSE_COLUMN_SUM_TOL {
                return Err(QuantumError::ResponseColumnOverflow { col, sum });
            }
        }
        Ok(Self {
            dim_max,
            response,
            counts,
            support,
        })
    }

    pub fn dim_max(&self) -> usize {
        self.dim_max
    }

    pub fn response(&self) -> &DMatrix<f64> {
        &self.response
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn support(&self) -> SupportIndex {
        self.support
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Response-matrix columns a dimension-`d` state can populate: photon
    /// numbers below `d`, or pairs with both photon numbers below `d`.
    pub fn allowed_columns(&self, d: usize) -> Vec<usize> {
        match self.support {
            SupportIndex::Single => (0..d.min(self.dim_max)).collect(),
            SupportIndex::Pair => {
                let d = d.min(self.dim_max);
                let mut cols = Vec::with_capacity(d * d);
                for m in 0..d {
                    for mp in 0..d {
                        cols.push(m * self.dim_max + mp);
                    }
                }
                cols
            }
        }
    }
}

/// Either kind of dataset the certification pipeline accepts.
#[derive(Clone, Debug)]
pub enum Dataset {
    Povm(MeasurementDataset),
    Diagonal(DiagonalDataset),
}

impl Dataset {
    pub fn dim_max(&self) -> usize {
        match self {
            Dataset::Povm(d) => d.dim_max(),
            Dataset::Diagonal(d) => d.dim_max(),
        }
    }

    pub fn total_counts(&self) -> u64 {
        match self {
            Dataset::Povm(d) => d.total_counts(),
            Dataset::Diagonal(d) => d.total_counts(),
        }
    }
}

/// `Re tr(state · element)` for each element, clamping tiny negative values
/// (within [`PROB_CLAMP_TOL`]) to zero.  No completeness check: callers may
/// pass truncated blocks that do not sum to the identity.
pub fn element_probabilities(state: &CMat, elements: &[CMat]) -> Result<Vec<f64>, QuantumError> {
    let mut probabilities = Vec::with_capacity(elements.len());
    for (index, element) in elements.iter().enumerate() {
        if element.nrows() != state.nrows() {
            return Err(QuantumError::DimensionMismatch {
                state_dim: state.nrows(),
                basis_dim: element.nrows(),
            });
        }
        let mut value = (state * element).trace().re;
        if value < 0.0 {
            if value < -PROB_CLAMP_TOL {
                return Err(QuantumError::NegativeProbability { value, index });
            }
            value = 0.0;
        }
        probabilities.push(value);
    }
    Ok(probabilities)
}

/// Born probabilities `p_j = tr(state · element_j)` of a complete POVM.
///
/// On top of [`element_probabilities`], checks that the vector sums to 1
/// within [`PROB_SUM_TOL`].
pub fn born_probabilities(
    state: &DensityOperator,
    basis: &PovmBasis,
) -> Result<Vec<f64>, QuantumError> {
    if state.dim() != basis.dim() {
        return Err(QuantumError::DimensionMismatch {
            state_dim: state.dim(),
            basis_dim: basis.dim(),
        });
    }
    let probabilities = element_probabilities(state.matrix(), basis.elements())?;
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(QuantumError::ProbabilitySumNotOne { sum });
    }
    Ok(probabilities)
}

/// Multinomial log-likelihood `sum_j n_j ln(p_j)` in natural-log units.
///
/// Uses the convention `0 · ln(0) = 0`; observing an outcome of probability
/// zero returns `-inf`.  The multi-basis likelihood is the sum of this over
/// bases.
pub fn log_likelihood(probabilities: &[f64], counts: &[u64]) -> Result<f64, QuantumError> {
    if probabilities.len() != counts.len() {
        return Err(QuantumError::LengthMismatch {
            expected: probabilities.len(),
            got: counts.len(),
        });
    }
    let mut total = 0.0;
    for (index, (&p, &n)) in probabilities.iter().zip(counts).enumerate() {
        if !(0.0..=1.0 + PROB_SUM_TOL).contains(&p) {
            return Err(QuantumError::ProbabilityOutOfRange { value: p, index });
        }
        if n == 0 {
            continue;
        }
        if p == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += n as f64 * p.ln();
    }
    Ok(total)
}

/// Pad a state with zero rows/columns (computational basis) up to
/// `target_dim`.  The trace is untouched.
pub fn embed(state: &DensityOperator, target_dim: usize) -> Result<DensityOperator, QuantumError> {
    let dim = state.dim();
    if target_dim < dim {
        return Err(QuantumError::EmbedIntoSmaller {
            state_dim: dim,
            target_dim,
        });
    }
    let mut matrix = CMat::zeros(target_dim, target_dim);
    matrix.view_mut((0, 0), (dim, dim)).copy_from(state.matrix());
    Ok(DensityOperator { matrix })
}

/// Restrict every POVM element to its top-left `d x d` block.
///
/// The blocks are returned as-is: they remain PSD, but need not sum to the
/// identity on the smaller space, so downstream likelihoods must consume
/// them without a completeness check.
pub fn truncate_basis(basis: &PovmBasis, d: usize) -> Result<Vec<CMat>, QuantumError> {
    if d == 0 || d > basis.dim() {
        return Err(QuantumError::TruncationOutOfRange {
            d,
            dim: basis.dim(),
        });
    }
    Ok(basis
        .elements()
        .iter()
        .map(|element| element.view((0, 0), (d, d)).into_owned())
        .collect())
}

/// Bhattacharyya fidelity `sum_i sqrt(p_i q_i)` between two (possibly
/// sub-normalized) distributions.
pub fn bhattacharyya_fidelity(p: &[f64], q: &[f64]) -> Result<f64, QuantumError> {
    if p.len() != q.len() {
        return Err(QuantumError::LengthMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    for dist in [p, q] {
        let mut sum = 0.0;
        for (index, &value) in dist.iter().enumerate() {
            if value < 0.0 {
                return Err(QuantumError::NegativeEntry { value, index });
            }
            sum += value;
        }
        if sum > 1.0 + PROB_SUM_TOL {
            return Err(QuantumError::OverNormalized { sum });
        }
    }
    Ok(p.iter().zip(q).map(|(&a, &b)| (a * b).sqrt()).sum())
}

/// Uhlmann fidelity `(tr sqrt(sqrt(a) b sqrt(a)))^2` between two states.
///
/// Symmetric in its arguments; 1 exactly when the states coincide.
pub fn uhlmann_fidelity(
    a: &DensityOperator,
    b: &DensityOperator,
) -> Result<f64, QuantumError> {
    if a.dim() != b.dim() {
        return Err(QuantumError::DimensionMismatch {
            state_dim: a.dim(),
            basis_dim: b.dim(),
        });
    }
    let (eigenvalues, eigenvectors) = hermitian_eigen(a.matrix());
    let sqrt_values = eigenvalues.map(|w| Complex::new(w.max(0.0).sqrt(), 0.0));
    let sqrt_a = &eigenvectors * CMat::from_diagonal(&sqrt_values) * eigenvectors.adjoint();
    let inner = &sqrt_a * b.matrix() * &sqrt_a;
    let (inner_eigenvalues, _) = hermitian_eigen(&inner);
    let root_sum: f64 = inner_eigenvalues.iter().map(|w| w.max(0.0).sqrt()).sum();
    Ok((root_sum * root_sum).min(1.0 + PROB_SUM_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn computational_basis(dim: usize) -> PovmBasis {
        PovmBasis::from_unitary_columns(&CMat::identity(dim, dim)).unwrap()
    }

    /// Random state via A A† / tr(A A†) with A a random complex matrix.
    fn random_state(dim: usize, rng: &mut StdRng) -> DensityOperator {
        let a = CMat::from_fn(dim, dim, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let m = &a * a.adjoint();
        let trace = m.trace().re;
        DensityOperator::new(m / c(trace, 0.0)).unwrap()
    }

    /// Random von Neumann basis from the QR factorization of a random matrix.
    fn random_unitary_basis(dim: usize, rng: &mut StdRng) -> PovmBasis {
        let a = CMat::from_fn(dim, dim, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let q = a.qr().q();
        PovmBasis::from_unitary_columns(&q).unwrap()
    }

    #[test]
    fn validates_density_operator_invariants() {
        // Non-Hermitian.
        let mut m = CMat::identity(2, 2);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(matches!(
            DensityOperator::new(m),
            Err(QuantumError::NotHermitian { .. })
        ));
        // Negative eigenvalue.
        let m = CMat::from_diagonal(&DVector::from_vec(vec![c(1.2, 0.0), c(-0.2, 0.0)]));
        assert!(matches!(
            DensityOperator::new(m),
            Err(QuantumError::NotPositive { .. })
        ));
        // Wrong trace.
        let m = CMat::identity(2, 2);
        assert!(matches!(
            DensityOperator::new(m),
            Err(QuantumError::TraceNotOne { .. })
        ));
        // A valid state passes.
        assert_eq!(DensityOperator::maximally_mixed(3).dim(), 3);
    }

    #[test]
    fn validates_povm_invariants() {
        assert!(matches!(
            PovmBasis::new(vec![]),
            Err(QuantumError::EmptyBasis)
        ));
        // Projectors missing one element are incomplete.
        let id = CMat::identity(3, 3);
        let projectors: Vec<CMat> = (0..2)
            .map(|k| {
                let col = id.column(k);
                &col * col.adjoint()
            })
            .collect();
        assert!(matches!(
            PovmBasis::new(projectors),
            Err(QuantumError::Incomplete { .. })
        ));
        assert_eq!(computational_basis(4).len(), 4);
    }

    #[test]
    fn born_rule_matches_hand_computations() {
        // |0><0| in the computational basis: certain first outcome.
        let ground = DensityOperator::from_pure(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let p = born_probabilities(&ground, &computational_basis(3)).unwrap();
        assert_relative_eq!(p[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(p[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(p[2], 0.0, epsilon = 1e-12);

        // Maximally mixed state in dim 4: uniform under any von Neumann basis.
        let mixed = DensityOperator::maximally_mixed(4);
        let mut rng = StdRng::seed_from_u64(1);
        let basis = random_unitary_basis(4, &mut rng);
        for &p in &born_probabilities(&mixed, &basis).unwrap() {
            assert_relative_eq!(p, 0.25, epsilon = 1e-12);
        }

        // Equal superposition against the computational basis: 50/50.
        let plus = DensityOperator::from_pure(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let p = born_probabilities(&plus, &computational_basis(2)).unwrap();
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(p[1], 0.5, epsilon = 1e-12);

        // Dimension mismatch is rejected.
        assert!(matches!(
            born_probabilities(&plus, &computational_basis(3)),
            Err(QuantumError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn born_probabilities_sum_to_one_for_random_states() {
        let mut rng = StdRng::seed_from_u64(2);
        for trial in 0..1000 {
            let dim = 2 + trial % 7;
            let state = random_state(dim, &mut rng);
            let basis = random_unitary_basis(dim, &mut rng);
            let p = born_probabilities(&state, &basis).unwrap();
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() <= PROB_SUM_TOL);
        }
    }

    #[test]
    fn log_likelihood_follows_multinomial_conventions() {
        let ll = log_likelihood(&[0.5, 0.5], &[1, 1]).unwrap();
        assert_relative_eq!(ll, 2.0 * 0.5f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(ll, -1.3862944, epsilon = 1e-7);
        // Certain outcome: zero log-likelihood, 0 ln 0 dropped.
        assert_eq!(log_likelihood(&[1.0, 0.0], &[3, 0]).unwrap(), 0.0);
        // Impossible outcome observed.
        assert_eq!(
            log_likelihood(&[1.0, 0.0], &[2, 1]).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(matches!(
            log_likelihood(&[0.5, 0.5], &[1]),
            Err(QuantumError::LengthMismatch { .. })
        ));
        assert!(matches!(
            log_likelihood(&[-0.1, 1.1], &[1, 1]),
            Err(QuantumError::ProbabilityOutOfRange { .. })
        ));
    }

    #[test]
    fn log_likelihood_is_maximized_at_empirical_frequencies() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..100 {
            let len = rng.gen_range(2..6);
            let counts: Vec<u64> = (0..len).map(|_| rng.gen_range(0..50)).collect();
            let total: u64 = counts.iter().sum();
            if total == 0 {
                continue;
            }
            let empirical: Vec<f64> =
                counts.iter().map(|&n| n as f64 / total as f64).collect();
            let best = log_likelihood(&empirical, &counts).unwrap();
            for _ in 0..20 {
                let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.01..1.0)).collect();
                let norm: f64 = raw.iter().sum();
                let q: Vec<f64> = raw.iter().map(|x| x / norm).collect();
                assert!(log_likelihood(&q, &counts).unwrap() <= best + 1e-9);
            }
        }
    }

    #[test]
    fn embed_pads_with_zeros() {
        let half = DensityOperator::maximally_mixed(2);
        let padded = embed(&half, 3).unwrap();
        assert_eq!(padded.dim(), 3);
        assert_relative_eq!(padded.matrix()[(0, 0)].re, 0.5);
        assert_relative_eq!(padded.matrix()[(1, 1)].re, 0.5);
        assert_relative_eq!(padded.matrix()[(2, 2)].re, 0.0);

        let same = embed(&half, 2).unwrap();
        assert_eq!(same.matrix(), half.matrix());

        let excited = DensityOperator::from_pure(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let big = embed(&excited, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if (i, j) == (1, 1) { 1.0 } else { 0.0 };
                assert_relative_eq!(big.matrix()[(i, j)].re, expected);
                assert_relative_eq!(big.matrix()[(i, j)].im, 0.0);
            }
        }

        assert!(matches!(
            embed(&big, 2),
            Err(QuantumError::EmbedIntoSmaller { .. })
        ));
    }

    #[test]
    fn truncation_keeps_top_left_blocks() {
        let basis = computational_basis(4);
        let blocks = truncate_basis(&basis, 2).unwrap();
        assert_eq!(blocks.len(), 4);
        assert_relative_eq!(blocks[0][(0, 0)].re, 1.0);
        assert_relative_eq!(blocks[1][(1, 1)].re, 1.0);
        assert_relative_eq!(blocks[2].norm(), 0.0);
        assert_relative_eq!(blocks[3].norm(), 0.0);

        // Full-dimension truncation is the identity operation.
        let full = truncate_basis(&basis, 4).unwrap();
        assert_eq!(&full[..], basis.elements());

        // Completeness of the full basis restricts to any principal block.
        let mut rng = StdRng::seed_from_u64(4);
        let haar = random_unitary_basis(3, &mut rng);
        let blocks = truncate_basis(&haar, 2).unwrap();
        let sum = blocks.iter().fold(CMat::zeros(2, 2), |acc, b| acc + b);
        let dev = (&sum - CMat::identity(2, 2))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-9);

        assert!(matches!(
            truncate_basis(&basis, 0),
            Err(QuantumError::TruncationOutOfRange { .. })
        ));
        assert!(matches!(
            truncate_basis(&basis, 5),
            Err(QuantumError::TruncationOutOfRange { .. })
        ));
    }

    #[test]
    fn truncating_an_embedded_state_preserves_the_likelihood() {
        let mut rng = StdRng::seed_from_u64(5);
        let small = random_state(3, &mut rng);
        let basis = random_unitary_basis(5, &mut rng);
        let counts: Vec<u64> = (0..5).map(|_| rng.gen_range(0..100)).collect();

        let embedded = embed(&small, 5).unwrap();
        let p_full = born_probabilities(&embedded, &basis).unwrap();
        let ll_full = log_likelihood(&p_full, &counts).unwrap();

        let blocks = truncate_basis(&basis, 3).unwrap();
        let p_blocks = element_probabilities(small.matrix(), &blocks).unwrap();
        let ll_blocks = log_likelihood(&p_blocks, &counts).unwrap();

        assert_eq!(ll_full, ll_blocks);
    }

    #[test]
    fn bhattacharyya_matches_hand_values() {
        let uniform = [0.25; 4];
        assert_relative_eq!(
            bhattacharyya_fidelity(&uniform, &uniform).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            bhattacharyya_fidelity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            0.0
        );
        let f = bhattacharyya_fidelity(&[0.5, 0.5], &[0.9, 0.1]).unwrap();
        assert_relative_eq!(f, 0.45f64.sqrt() + 0.05f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(f, 0.8944272, epsilon = 1e-7);
        assert!(matches!(
            bhattacharyya_fidelity(&[-0.1, 1.1], &[0.5, 0.5]),
            Err(QuantumError::NegativeEntry { .. })
        ));
    }

    #[test]
    fn uhlmann_matches_closed_forms() {
        let mut rng = StdRng::seed_from_u64(6);
        let state = random_state(4, &mut rng);
        assert_relative_eq!(uhlmann_fidelity(&state, &state).unwrap(), 1.0, epsilon = 1e-9);

        let ground = DensityOperator::from_pure(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let excited = DensityOperator::from_pure(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_relative_eq!(
            uhlmann_fidelity(&ground, &excited).unwrap(),
            0.0,
            epsilon = 1e-12
        );

        // Pure vs maximally mixed: F = <0| I/2 |0> = 1/2.
        let mixed = DensityOperator::maximally_mixed(2);
        assert_relative_eq!(
            uhlmann_fidelity(&ground, &mixed).unwrap(),
            0.5,
            epsilon = 1e-9
        );
    }

    #[test]
    fn fidelities_are_symmetric() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_state(3, &mut rng);
            let b = random_state(3, &mut rng);
            let ab = uhlmann_fidelity(&a, &b).unwrap();
            let ba = uhlmann_fidelity(&b, &a).unwrap();
            assert_relative_eq!(ab, ba, epsilon = 1e-9);

            let p: Vec<f64> = born_probabilities(&a, &computational_basis(3)).unwrap();
            let q: Vec<f64> = born_probabilities(&b, &computational_basis(3)).unwrap();
            let pq = bhattacharyya_fidelity(&p, &q).unwrap();
            let qp = bhattacharyya_fidelity(&q, &p).unwrap();
            assert_relative_eq!(pq, qp, epsilon = 1e-12);
        }
    }

    #[test]
    fn diagonal_dataset_inference_and_validation() {
        // Single index: identity response on 3 photon numbers.
        let response = DMatrix::<f64>::identity(3, 3);
        let ds = DiagonalDataset::new(3, response, vec![5, 3, 2]).unwrap();
        assert_eq!(ds.support(), SupportIndex::Single);
        assert_eq!(ds.allowed_columns(2), vec![0, 1]);
        assert_eq!(ds.total_counts(), 10);

        // Pair index: 2 outcomes over dim_max = 2 -> 4 columns.
        let response = DMatrix::from_row_slice(2, 4, &[
            0.5, 0.0, 0.0, 0.5, //
            0.5, 1.0, 1.0, 0.5,
        ]);
        let ds = DiagonalDataset::new(2, response, vec![1, 1]).unwrap();
        assert_eq!(ds.support(), SupportIndex::Pair);
        assert_eq!(ds.allowed_columns(1), vec![0]);
        assert_eq!(ds.allowed_columns(2), vec![0, 1, 2, 3]);

        // Shape mismatch.
        let response = DMatrix::<f64>::identity(3, 5);
        assert!(matches!(
            DiagonalDataset::new(3, response, vec![0; 3]),
            Err(QuantumError::ResponseShape { .. })
        ));

        // Column over-normalized.
        let response = DMatrix::from_row_slice(2, 2, &[0.8, 0.0, 0.3, 1.0]);
        assert!(matches!(
            DiagonalDataset::new(2, response, vec![1, 1]),
            Err(QuantumError::ResponseColumnOverflow { .. })
        ));

        // Entry out of range.
        let response = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, -0.5, 1.0]);
        assert!(matches!(
            DiagonalDataset::new(2, response, vec![1, 1]),
            Err(QuantumError::ResponseEntryOutOfRange { .. })
        ));
    }

    #[test]
    fn measurement_dataset_validates_shapes() {
        let basis = computational_basis(3);
        let ok = MeasurementDataset::new(
            3,
            vec![BasisCounts {
                basis: basis.clone(),
                counts: vec![4, 5, 6],
            }],
        )
        .unwrap();
        assert_eq!(ok.total_counts(), 15);
        assert_eq!(ok.dim_max(), 3);

        assert!(matches!(
            MeasurementDataset::new(3, vec![]),
            Err(QuantumError::EmptyBasis)
        ));
        assert!(matches!(
            MeasurementDataset::new(
                3,
                vec![BasisCounts {
                    basis: basis.clone(),
                    counts: vec![1, 2],
                }]
            ),
            Err(QuantumError::LengthMismatch { .. })
        ));
        assert!(matches!(
            MeasurementDataset::new(
                4,
                vec![BasisCounts {
                    basis,
                    counts: vec![1, 2, 3],
                }]
            ),
            Err(QuantumError::DimensionMismatch { .. })
        ));
    }
}
