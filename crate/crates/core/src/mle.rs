//! Per-dimension maximum-likelihood state fits, with the bias-subtraction
//! constraint and the cross-dimension monotonicity rule.
//!
//! Two fitting paths share one interface:
//!
//! * POVM datasets use projected gradient ascent.  The update is
//!   `rho <- project(rho + step * grad)`, where the projection is the
//!   Euclidean (Frobenius) projection onto the set of density operators —
//!   eigenvalue water-filling onto the probability simplex.  That projection
//!   absorbs the identity component of the raw gradient exactly, which makes
//!   every accepted step an ascent step; clipping negative eigenvalues and
//!   renormalizing the trace (the standalone [`project_psd`] operation) does
//!   not have this property and stalls far from the optimum.
//! * Diagonal (photon-number) datasets have a likelihood that is concave in
//!   the diagonal weights, so they use the multiplicative EM fixed point
//!   `q <- q * (R^T (c / (R q))) / N`, which is monotone by construction and
//!   needs neither restarts nor a seed.
//!
//! Likelihood bookkeeping here is plain `f64` natural logs with `-inf`
//! allowed; extended precision takes over downstream in [`crate::certify`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::quantum::{
    embed, hermitian_eigen, truncate_basis, CMat, Dataset, DensityOperator, DiagonalDataset,
    HermitianOperator, MeasurementDataset, QuantumError, SupportIndex,
};

/// Probabilities are floored at this value inside gradient evaluation only,
/// so iterates near the boundary keep a finite ascent direction.  Reported
/// log-likelihoods always use the unfloored values (`-inf` allowed).
pub const GRADIENT_PROBABILITY_FLOOR: f64 = 1e-300;

/// A fit at dimension d whose log-likelihood lands below the d-1 result by
/// more than this is declared a solver failure and replaced by the padded
/// d-1 estimator; smaller dips are clamped to the running maximum.
pub const SWEEP_DIP_TOL: f64 = 1e-9;

/// Step-size bounds for the line search, in units of the base step `1/N`.
/// The upper bound keeps the trial state finite when the gradient blows up
/// near a boundary; reaching the lower bound without improvement is the
/// stationarity stop.
const STEP_MAX_FACTOR: f64 = 1e6;
const STEP_MIN_FACTOR: f64 = 1e-15;

/// Each accepted iterate doubles the step before backtracking again, so the
/// line search adapts in both directions.
const STEP_EXPANSION: f64 = 2.0;

/// Weight of the random rank-1 perturbation added to the maximally mixed
/// start on restarts after the first.
const RESTART_PERTURBATION: f64 = 0.5;

/// Salt XOR-ed into the user seed for the restart RNG stream, so restart
/// starting points are decorrelated from any other use of the same seed.
const RESTART_SEED_SALT: u64 = 0x9E37_79B9;

#[derive(Debug, Error)]
pub enum MleError {
    #[error("fit dimension {d} is outside 2..={dim_max}")]
    DimensionOutOfRange { d: usize, dim_max: usize },
    #[error("sweep range {d_min}..={d_max} is invalid for dim_max {dim_max}")]
    BadSweepRange {
        d_min: usize,
        d_max: usize,
        dim_max: usize,
    },
    #[error("dataset has no counts")]
    EmptyDataset,
    #[error("config field {field} = {value} is outside its valid range")]
    BadConfig { field: &'static str, value: f64 },
    #[error("no positive eigenvalue: cannot normalize to a density operator")]
    NoPositiveEigenvalue,
    #[error("every diagonal entry is below the bias threshold {threshold}")]
    AllDiagonalsBelowThreshold { threshold: f64 },
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// Solver configuration.  `step_size` is in units of `1/N` where `N` is the
/// dataset's total count, so the default behaves uniformly across sample
/// sizes.
#[derive(Clone, Debug)]
pub struct MlConfig {
    pub max_iterations: usize,
    /// Initial gradient step, in units of 1/N.
    pub step_size: f64,
    /// Multiplier applied to the trial step while backtracking, in (0, 1).
    pub backtracking_factor: f64,
    /// Relative log-likelihood change below which the fit stops.
    pub convergence_tol: f64,
    /// Independent starts; the best final likelihood wins.
    pub restarts: usize,
    /// When set, diagonal entries below this are zeroed (with their rows and
    /// columns) after every projection.  Only meaningful for POVM datasets.
    pub bias_threshold: Option<f64>,
}

impl Default for MlConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            step_size: 1.0,
            backtracking_factor: 0.5,
            convergence_tol: 1e-10,
            restarts: 1,
            bias_threshold: None,
        }
    }
}

impl MlConfig {
    /// Default configuration for bias-constrained POVM fits: the constrained
    /// problem is nonconvex, so multiple restarts are used.
    pub fn with_bias(threshold: f64) -> Self {
        Self {
            restarts: 5,
            bias_threshold: Some(threshold),
            ..Self::default()
        }
    }

    /// Default configuration for diagonal datasets.  EM iterations are
    /// cheap, so the fit runs to float-level stationarity; that makes the
    /// likelihood plateau across dimensions land close enough for the sweep
    /// clamp to turn it into exact ties.
    pub fn for_diagonal() -> Self {
        Self {
            max_iterations: 20_000,
            convergence_tol: 1e-14,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), MleError> {
        if self.max_iterations == 0 {
            return Err(MleError::BadConfig {
                field: "max_iterations",
                value: 0.0,
            });
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(MleError::BadConfig {
                field: "step_size",
                value: self.step_size,
            });
        }
        if !(self.backtracking_factor > 0.0 && self.backtracking_factor < 1.0) {
            return Err(MleError::BadConfig {
                field: "backtracking_factor",
                value: self.backtracking_factor,
            });
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol.is_finite()) {
            return Err(MleError::BadConfig {
                field: "convergence_tol",
                value: self.convergence_tol,
            });
        }
        if self.restarts == 0 {
            return Err(MleError::BadConfig {
                field: "restarts",
                value: 0.0,
            });
        }
        if let Some(threshold) = self.bias_threshold {
            if !(0.0..1.0).contains(&threshold) {
                return Err(MleError::BadConfig {
                    field: "bias_threshold",
                    value: threshold,
                });
            }
        }
        Ok(())
    }
}

/// Outcome of one per-dimension fit.
#[derive(Clone, Debug)]
pub struct MlResult {
    pub estimator: DensityOperator,
    /// Natural-log likelihood of the data under `estimator`; may be `-inf`.
    pub log_likelihood_nat: f64,
    pub iterations_used: usize,
    /// Whether the fit stopped at a convergence criterion rather than the
    /// iteration cap.
    pub converged: bool,
    /// Set by the sweep when this dimension's fit was replaced by the padded
    /// previous-dimension estimator.
    pub padded_from_lower_dim: bool,
}

/// Clip negative eigenvalues to zero and renormalize the trace to 1.
///
/// This is the reporting-time normalization for nearly-physical matrices; it
/// is *not* the projection used inside the solver loop (see module docs).
pub fn project_psd(h: &HermitianOperator) -> Result<DensityOperator, MleError> {
    let (eigenvalues, eigenvectors) = hermitian_eigen(h.matrix());
    let clipped = eigenvalues.map(|w| w.max(0.0));
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(MleError::NoPositiveEigenvalue);
    }
    let diagonal = clipped.map(|w| Complex::new(w / total, 0.0));
    let matrix = &eigenvectors * CMat::from_diagonal(&diagonal) * eigenvectors.adjoint();
    Ok(DensityOperator::new(symmetrize(&matrix))?)
}

/// Zero every diagonal entry below `threshold` together with its entire row
/// and column, then renormalize the trace.
///
/// The result is a principal submatrix (embedded back in place) of a PSD
/// matrix, so it stays PSD.  Errors when no diagonal entry reaches the
/// threshold.
pub fn subtract_bias(
    state: &DensityOperator,
    threshold: f64,
) -> Result<DensityOperator, MleError> {
    let keep: Vec<bool> = state.diagonal().iter().map(|&p| p >= threshold).collect();
    if !keep.iter().any(|&k| k) {
        return Err(MleError::AllDiagonalsBelowThreshold { threshold });
    }
    Ok(DensityOperator::new(mask_and_renormalize(
        state.matrix(),
        &keep,
    ))?)
}

/// Euclidean (Frobenius) projection onto the density-operator set: project
/// the eigenvalue vector onto the probability simplex by water-filling and
/// rebuild.  Always succeeds — the simplex projection keeps at least the
/// largest eigenvalue.
fn project_to_density(h: &CMat) -> CMat {
    let sym = symmetrize(h);
    let (eigenvalues, eigenvectors) = hermitian_eigen(&sym);
    let mut sorted: Vec<f64> = eigenvalues.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("eigenvalues are finite"));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &w) in sorted.iter().enumerate() {
        cumulative += w;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if w - candidate > 0.0 {
            theta = candidate;
        }
    }
    let filled = eigenvalues.map(|w| Complex::new((w - theta).max(0.0), 0.0));
    let matrix = &eigenvectors * CMat::from_diagonal(&filled) * eigenvectors.adjoint();
    symmetrize(&matrix)
}

/// In-loop bias constraint: like [`subtract_bias`], but when every diagonal
/// falls below the threshold it keeps the single largest one instead of
/// failing, so the line search can still evaluate (and reject) the iterate.
fn apply_bias(matrix: &CMat, threshold: f64) -> CMat {
    let diagonal: Vec<f64> = (0..matrix.nrows()).map(|i| matrix[(i, i)].re).collect();
    let mut keep: Vec<bool> = diagonal.iter().map(|&p| p >= threshold).collect();
    if !keep.iter().any(|&k| k) {
        let argmax = diagonal
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("diagonals are finite"))
            .map(|(i, _)| i)
            .unwrap_or(0);
        keep[argmax] = true;
    }
    mask_and_renormalize(matrix, &keep)
}

fn mask_and_renormalize(matrix: &CMat, keep: &[bool]) -> CMat {
    let n = matrix.nrows();
    let mut out = matrix.clone();
    for i in 0..n {
        if keep[i] {
            continue;
        }
        for j in 0..n {
            out[(i, j)] = Complex::new(0.0, 0.0);
            out[(j, i)] = Complex::new(0.0, 0.0);
        }
    }
    let trace = out.trace().re;
    out.unscale(trace)
}

fn symmetrize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// `Re tr(a · b)` without forming the product matrix.
fn re_trace_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// Log-likelihood of truncated-POVM data at `rho`, unfloored: observing an
/// outcome whose probability is non-positive yields `-inf`.
fn povm_log_likelihood(rho: &CMat, blocks: &[Vec<CMat>], counts: &[&[u64]]) -> f64 {
    let mut total = 0.0;
    for (basis_blocks, basis_counts) in blocks.iter().zip(counts) {
        for (block, &n) in basis_blocks.iter().zip(*basis_counts) {
            if n == 0 {
                continue;
            }
            let p = re_trace_product(rho, block);
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += n as f64 * p.ln();
        }
    }
    total
}

/// Gradient of the POVM log-likelihood: `sum (n/p) Pi`, with probabilities
/// floored at [`GRADIENT_PROBABILITY_FLOOR`].
fn povm_gradient(rho: &CMat, blocks: &[Vec<CMat>], counts: &[&[u64]]) -> CMat {
    let d = rho.nrows();
    let mut gradient = CMat::zeros(d, d);
    for (basis_blocks, basis_counts) in blocks.iter().zip(counts) {
        for (block, &n) in basis_blocks.iter().zip(*basis_counts) {
            if n == 0 {
                continue;
            }
            let p = re_trace_product(rho, block).max(GRADIENT_PROBABILITY_FLOOR);
            gradient += block.scale(n as f64 / p);
        }
    }
    gradient
}

fn fit_povm(
    dataset: &MeasurementDataset,
    d: usize,
    config: &MlConfig,
    seed: u64,
) -> Result<MlResult, MleError> {
    let blocks: Vec<Vec<CMat>> = dataset
        .bases()
        .iter()
        .map(|entry| truncate_basis(&entry.basis, d))
        .collect::<Result<_, _>>()?;
    let counts: Vec<&[u64]> = dataset
        .bases()
        .iter()
        .map(|entry| entry.counts.as_slice())
        .collect();
    let n_total = dataset.total_counts();
    if n_total == 0 {
        return Err(MleError::EmptyDataset);
    }
    let base_step = config.step_size / n_total as f64;
    let step_max = STEP_MAX_FACTOR / n_total as f64;
    let step_min = STEP_MIN_FACTOR / n_total as f64;

    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ RESTART_SEED_SALT);
    let mut best: Option<(CMat, f64, usize, bool)> = None;

    for restart in 0..config.restarts {
        let mut rho = CMat::identity(d, d).unscale(d as f64);
        if restart > 0 {
            let v = DVector::from_fn(d, |_, _| {
                Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let v = v.unscale(v.norm());
            rho += (&v * v.adjoint()).scale(RESTART_PERTURBATION);
            let trace = rho.trace().re;
            rho = rho.unscale(trace);
        }
        if let Some(threshold) = config.bias_threshold {
            rho = apply_bias(&rho, threshold);
        }
        let mut ll = povm_log_likelihood(&rho, &blocks, &counts);
        let mut step = base_step;
        let mut iterations = 0;
        let mut converged = false;

        for _ in 0..config.max_iterations {
            iterations += 1;
            let gradient = povm_gradient(&rho, &blocks, &counts);
            let mut trial = (step * STEP_EXPANSION).min(step_max);
            let mut accepted = None;
            while trial >= step_min {
                let mut candidate = project_to_density(&(&rho + gradient.scale(trial)));
                if let Some(threshold) = config.bias_threshold {
                    candidate = apply_bias(&candidate, threshold);
                }
                let candidate_ll = povm_log_likelihood(&candidate, &blocks, &counts);
                if candidate_ll > ll {
                    accepted = Some((candidate, candidate_ll, trial));
                    break;
                }
                trial *= config.backtracking_factor;
            }
            let Some((next_rho, next_ll, next_step)) = accepted else {
                // No step of any admissible size improves: stationary.
                converged = true;
                break;
            };
            debug_assert!(next_ll > ll, "accepted iterates must strictly improve");
            let gain = (next_ll - ll) / ll.abs().max(1.0);
            rho = next_rho;
            ll = next_ll;
            step = next_step;
            if gain < config.convergence_tol {
                converged = true;
                break;
            }
        }

        let improves = match &best {
            None => true,
            Some((_, best_ll, _, _)) => ll > *best_ll,
        };
        if improves {
            best = Some((rho, ll, iterations, converged));
        }
    }

    let (rho, ll, iterations, converged) = best.expect("at least one restart runs");
    Ok(MlResult {
        estimator: DensityOperator::new(rho)?,
        log_likelihood_nat: ll,
        iterations_used: iterations,
        converged,
        padded_from_lower_dim: false,
    })
}

/// Log-likelihood of diagonal data: `p = R_support q`, unfloored.
fn diagonal_log_likelihood(q: &DVector<f64>, response: &DMatrix<f64>, counts: &[u64]) -> f64 {
    let p = response * q;
    let mut total = 0.0;
    for (&n, &prob) in counts.iter().zip(p.iter()) {
        if n == 0 {
            continue;
        }
        if prob <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += n as f64 * prob.ln();
    }
    total
}

/// Diagonal density operator on the fitted support.
fn diagonal_estimator(
    q: &DVector<f64>,
    columns: &[usize],
    d: usize,
    dim_max: usize,
    support: SupportIndex,
) -> Result<DensityOperator, MleError> {
    let dim = match support {
        SupportIndex::Single => d,
        SupportIndex::Pair => d * d,
    };
    let mut matrix = CMat::zeros(dim, dim);
    for (&weight, &column) in q.iter().zip(columns) {
        let local = match support {
            SupportIndex::Single => column,
            SupportIndex::Pair => {
                let m = column / dim_max;
                let mp = column % dim_max;
                m * d + mp
            }
        };
        matrix[(local, local)] = Complex::new(weight.max(0.0), 0.0);
    }
    let trace = matrix.trace().re;
    Ok(DensityOperator::new(matrix.unscale(trace))?)
}

fn fit_diagonal(
    dataset: &DiagonalDataset,
    d: usize,
    config: &MlConfig,
) -> Result<MlResult, MleError> {
    let columns = dataset.allowed_columns(d);
    let n_outcomes = dataset.response().nrows();
    let response = dataset.response().select_columns(columns.iter());
    let counts = dataset.counts();
    let n_total = dataset.total_counts();
    if n_total == 0 {
        return Err(MleError::EmptyDataset);
    }

    let uniform = DVector::from_element(columns.len(), 1.0 / columns.len() as f64);

    // Structural impossibility: an observed outcome no state on this support
    // can produce.  Every candidate has likelihood -inf, so return at once.
    for row in 0..n_outcomes {
        if counts[row] == 0 {
            continue;
        }
        if (0..columns.len()).all(|c| response[(row, c)] == 0.0) {
            return Ok(MlResult {
                estimator: diagonal_estimator(
                    &uniform,
                    &columns,
                    d,
                    dataset.dim_max(),
                    dataset.support(),
                )?,
                log_likelihood_nat: f64::NEG_INFINITY,
                iterations_used: 0,
                converged: true,
                padded_from_lower_dim: false,
            });
        }
    }

    let count_vec = DVector::from_iterator(counts.len(), counts.iter().map(|&n| n as f64));
    let mut q = uniform;
    let mut ll = diagonal_log_likelihood(&q, &response, counts);
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..config.max_iterations {
        iterations += 1;
        let p = (&response * &q).map(|v| v.max(GRADIENT_PROBABILITY_FLOOR));
        let ratio = count_vec.component_div(&p);
        let mut next_q = q.component_mul(&(response.transpose() * ratio)) / n_total as f64;
        next_q.iter_mut().for_each(|v| *v = v.max(0.0));
        let norm: f64 = next_q.iter().sum();
        next_q /= norm;
        let next_ll = diagonal_log_likelihood(&next_q, &response, counts);
        if next_ll < ll {
            // Float-level dip at the fixed point: keep the previous iterate
            // so recorded likelihoods never decrease.
            converged = true;
            break;
        }
        debug_assert!(next_ll >= ll, "EM updates never decrease the likelihood");
        let gain = (next_ll - ll) / ll.abs().max(1.0);
        q = next_q;
        ll = next_ll;
        if gain < config.convergence_tol {
            converged = true;
            break;
        }
    }

    Ok(MlResult {
        estimator: diagonal_estimator(&q, &columns, d, dataset.dim_max(), dataset.support())?,
        log_likelihood_nat: ll,
        iterations_used: iterations,
        converged,
        padded_from_lower_dim: false,
    })
}

/// Maximum-likelihood fit of a dimension-`d` state to the dataset.
///
/// POVM datasets run `config.restarts` seeded projected-gradient searches
/// and keep the best; diagonal datasets run the deterministic EM fixed point
/// (the problem is concave, so `seed` and restarts are irrelevant there).
pub fn fit_ml(
    dataset: &Dataset,
    d: usize,
    config: &MlConfig,
    seed: u64,
) -> Result<MlResult, MleError> {
    config.validate()?;
    let dim_max = dataset.dim_max();
    if d < 2 || d > dim_max {
        return Err(MleError::DimensionOutOfRange { d, dim_max });
    }
    match dataset {
        Dataset::Povm(povm) => fit_povm(povm, d, config, seed),
        Dataset::Diagonal(diagonal) => fit_diagonal(diagonal, d, config),
    }
}

/// Fit every dimension in `d_min..=d_max` (in parallel) and enforce the
/// cross-dimension monotonicity rule sequentially:
///
/// * a dip beyond [`SWEEP_DIP_TOL`] marks a failed fit — the previous
///   estimator is zero-padded up, flagged, and its likelihood copied;
/// * smaller dips keep the estimator but clamp the recorded likelihood to
///   the running maximum.
///
/// The returned log-likelihood sequence is therefore exactly non-decreasing.
pub fn sweep_dimensions(
    dataset: &Dataset,
    d_min: usize,
    d_max: usize,
    config: &MlConfig,
    seed: u64,
) -> Result<Vec<MlResult>, MleError> {
    config.validate()?;
    let dim_max = dataset.dim_max();
    if d_min < 2 || d_min > d_max || d_max > dim_max {
        return Err(MleError::BadSweepRange {
            d_min,
            d_max,
            dim_max,
        });
    }
    let mut results: Vec<MlResult> = (d_min..=d_max)
        .into_par_iter()
        .map(|d| fit_ml(dataset, d, config, seed.wrapping_add(d as u64)))
        .collect::<Result<_, _>>()?;

    for i in 1..results.len() {
        let previous_ll = results[i - 1].log_likelihood_nat;
        let current_ll = results[i].log_likelihood_nat;
        if current_ll < previous_ll - SWEEP_DIP_TOL {
            let d = d_min + i;
            results[i] = MlResult {
                estimator: pad_estimator(&results[i - 1].estimator, dataset, d)?,
                log_likelihood_nat: previous_ll,
                iterations_used: results[i].iterations_used,
                converged: results[i].converged,
                padded_from_lower_dim: true,
            };
        } else if current_ll < previous_ll {
            results[i].log_likelihood_nat = previous_ll;
        }
    }
    Ok(results)
}

/// Zero-pad a dimension-(d-1) estimator up to dimension `d`, respecting the
/// dataset's index layout (pair-indexed diagonals interleave, so their
/// entries are remapped rather than block-embedded).
fn pad_estimator(
    previous: &DensityOperator,
    dataset: &Dataset,
    d: usize,
) -> Result<DensityOperator, MleError> {
    match dataset {
        Dataset::Povm(_) => Ok(embed(previous, d)?),
        Dataset::Diagonal(diagonal) => match diagonal.support() {
            SupportIndex::Single => Ok(embed(previous, d)?),
            SupportIndex::Pair => {
                let d_prev = (previous.dim() as f64).sqrt().round() as usize;
                let mut matrix = CMat::zeros(d * d, d * d);
                for m in 0..d_prev {
                    for mp in 0..d_prev {
                        matrix[(m * d + mp, m * d + mp)] =
                            previous.matrix()[(m * d_prev + mp, m * d_prev + mp)];
                    }
                }
                Ok(DensityOperator::new(matrix)?)
            }
        },
    }
}

/// Frobenius norm of `R rho - rho`, where `R = (1/N) sum (n/p) Pi` is the
/// likelihood's fixed-point operator at `rho`.  Zero at an interior maximum.
pub fn stationarity_residual(
    dataset: &MeasurementDataset,
    state: &DensityOperator,
    d: usize,
) -> Result<f64, MleError> {
    let blocks: Vec<Vec<CMat>> = dataset
        .bases()
        .iter()
        .map(|entry| truncate_basis(&entry.basis, d))
        .collect::<Result<_, _>>()?;
    let counts: Vec<&[u64]> = dataset
        .bases()
        .iter()
        .map(|entry| entry.counts.as_slice())
        .collect();
    let n_total = dataset.total_counts() as f64;
    let r = povm_gradient(state.matrix(), &blocks, &counts).unscale(n_total);
    Ok((r * state.matrix() - state.matrix()).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{BasisCounts, PovmBasis};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn diag_matrix(values: &[f64]) -> CMat {
        CMat::from_diagonal(&DVector::from_iterator(
            values.len(),
            values.iter().map(|&v| c(v, 0.0)),
        ))
    }

    fn identity_diagonal_dataset(counts: Vec<u64>) -> Dataset {
        let dim = counts.len();
        Dataset::Diagonal(
            DiagonalDataset::new(dim, DMatrix::identity(dim, dim), counts).unwrap(),
        )
    }

    fn random_unitary(dim: usize, rng: &mut StdRng) -> CMat {
        let a = CMat::from_fn(dim, dim, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        a.qr().q()
    }

    /// Measurement dataset with counts equal to rounded expected counts, so
    /// the generating state is (nearly) the exact ML optimum.
    fn expected_count_dataset(
        truth: &DensityOperator,
        n_bases: usize,
        n_per_basis: f64,
        rng: &mut StdRng,
    ) -> MeasurementDataset {
        let dim = truth.dim();
        let mut entries = Vec::new();
        for _ in 0..n_bases {
            let basis = PovmBasis::from_unitary_columns(&random_unitary(dim, rng)).unwrap();
            let p = crate::quantum::born_probabilities(truth, &basis).unwrap();
            let counts: Vec<u64> = p.iter().map(|&x| (x * n_per_basis).round() as u64).collect();
            entries.push(BasisCounts { basis, counts });
        }
        MeasurementDataset::new(dim, entries).unwrap()
    }

    #[test]
    fn config_validation_rejects_out_of_range_fields() {
        let dataset = identity_diagonal_dataset(vec![1, 1]);
        for config in [
            MlConfig { max_iterations: 0, ..Default::default() },
            MlConfig { step_size: 0.0, ..Default::default() },
            MlConfig { backtracking_factor: 1.0, ..Default::default() },
            MlConfig { convergence_tol: 0.0, ..Default::default() },
            MlConfig { restarts: 0, ..Default::default() },
            MlConfig { bias_threshold: Some(1.0), ..Default::default() },
        ] {
            assert!(matches!(
                fit_ml(&dataset, 2, &config, 0),
                Err(MleError::BadConfig { .. })
            ));
        }
        assert_eq!(MlConfig::with_bias(0.01).restarts, 5);
        assert_eq!(MlConfig::default().restarts, 1);
    }

    #[test]
    fn project_psd_matches_hand_examples() {
        // Already a valid state: unchanged within 1e-12.
        let state = diag_matrix(&[0.6, 0.4]);
        let projected = project_psd(&HermitianOperator::new(state.clone()).unwrap()).unwrap();
        assert!((projected.matrix() - &state).norm() < 1e-12);

        // Clip the negative eigenvalue, renormalize by 1.2.
        let h = HermitianOperator::new(diag_matrix(&[0.8, 0.4, -0.2])).unwrap();
        let projected = project_psd(&h).unwrap();
        assert_relative_eq!(projected.matrix()[(0, 0)].re, 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(projected.matrix()[(1, 1)].re, 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(projected.matrix()[(2, 2)].re, 0.0, epsilon = 1e-12);

        // Nothing positive to keep.
        let h = HermitianOperator::new(diag_matrix(&[-1.0, -2.0])).unwrap();
        assert!(matches!(
            project_psd(&h),
            Err(MleError::NoPositiveEigenvalue)
        ));
    }

    #[test]
    fn subtract_bias_matches_hand_examples() {
        let state = DensityOperator::new(diag_matrix(&[0.995, 0.005])).unwrap();
        let cleaned = subtract_bias(&state, 0.01).unwrap();
        assert_relative_eq!(cleaned.matrix()[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(cleaned.matrix()[(1, 1)].re, 0.0, epsilon = 1e-12);

        // All diagonals above threshold: unchanged.
        let state = DensityOperator::new(diag_matrix(&[0.6, 0.4])).unwrap();
        let same = subtract_bias(&state, 0.01).unwrap();
        assert!((same.matrix() - state.matrix()).norm() < 1e-15);

        // Threshold zero: unchanged for any valid state.
        let same = subtract_bias(&state, 0.0).unwrap();
        assert!((same.matrix() - state.matrix()).norm() < 1e-15);

        let state = DensityOperator::maximally_mixed(4);
        assert!(matches!(
            subtract_bias(&state, 0.5),
            Err(MleError::AllDiagonalsBelowThreshold { .. })
        ));
    }

    #[test]
    fn projections_preserve_state_invariants_on_random_input() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..1000 {
            let dim = rng.gen_range(2..6);
            let raw = CMat::from_fn(dim, dim, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let h = HermitianOperator::new(symmetrize(&raw)).unwrap();
            // project_psd output satisfies the DensityOperator invariants
            // (its constructor checks them) unless the input is degenerate.
            let Ok(projected) = project_psd(&h) else {
                continue;
            };
            // Composing the bias subtraction keeps the state valid.
            if let Ok(cleaned) = subtract_bias(&projected, 0.01) {
                assert_eq!(cleaned.dim(), dim);
            }
            // The solver-internal Euclidean projection also lands on a state.
            let filled = project_to_density(h.matrix());
            DensityOperator::new(filled).unwrap();
        }
    }

    #[test]
    fn diagonal_fit_matches_multinomial_closed_form() {
        let dataset = identity_diagonal_dataset(vec![50, 30, 20]);
        let result = fit_ml(&dataset, 3, &MlConfig::for_diagonal(), 0).unwrap();
        let diag = result.estimator.diagonal();
        let tv: f64 = diag
            .iter()
            .zip([0.5, 0.3, 0.2])
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 1e-6, "total variation {tv} too large");
        assert!(result.converged);
        let expected_ll = 50.0 * 0.5f64.ln() + 30.0 * 0.3f64.ln() + 20.0 * 0.2f64.ln();
        assert_relative_eq!(result.log_likelihood_nat, expected_ll, epsilon = 1e-9);
    }

    #[test]
    fn diagonal_fit_handles_certain_and_impossible_outcomes() {
        let dataset = identity_diagonal_dataset(vec![100, 0]);
        let result = fit_ml(&dataset, 2, &MlConfig::for_diagonal(), 0).unwrap();
        assert_relative_eq!(result.estimator.diagonal()[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(result.estimator.diagonal()[1], 0.0, epsilon = 1e-12);
        assert_eq!(result.log_likelihood_nat, 0.0);

        // Counts observed on photon number 2 cannot come from a dim-2 state.
        let dataset = identity_diagonal_dataset(vec![50, 30, 20]);
        let result = fit_ml(&dataset, 2, &MlConfig::for_diagonal(), 0).unwrap();
        assert_eq!(result.log_likelihood_nat, f64::NEG_INFINITY);
        assert_eq!(result.iterations_used, 0);
    }

    #[test]
    fn fit_rejects_out_of_range_dimensions_and_empty_data() {
        let dataset = identity_diagonal_dataset(vec![1, 2, 3]);
        let config = MlConfig::default();
        assert!(matches!(
            fit_ml(&dataset, 1, &config, 0),
            Err(MleError::DimensionOutOfRange { .. })
        ));
        assert!(matches!(
            fit_ml(&dataset, 4, &config, 0),
            Err(MleError::DimensionOutOfRange { .. })
        ));
        let empty = identity_diagonal_dataset(vec![0, 0, 0]);
        assert!(matches!(
            fit_ml(&empty, 2, &config, 0),
            Err(MleError::EmptyDataset)
        ));
    }

    #[test]
    fn povm_fit_recovers_a_generating_state() {
        let mut rng = StdRng::seed_from_u64(21);
        // A rank-2 mixture, away from the boundary in rank but not support.
        let mut matrix = CMat::zeros(4, 4);
        matrix[(1, 1)] = c(0.7, 0.0);
        matrix[(2, 2)] = c(0.3, 0.0);
        matrix[(1, 2)] = c(0.2, 0.1);
        matrix[(2, 1)] = c(0.2, -0.1);
        let truth = DensityOperator::new(matrix).unwrap();
        let dataset = expected_count_dataset(&truth, 8, 20_000.0, &mut rng);
        let truth_ll: f64 = dataset
            .bases()
            .iter()
            .map(|entry| {
                let p = crate::quantum::born_probabilities(&truth, &entry.basis).unwrap();
                crate::quantum::log_likelihood(&p, &entry.counts).unwrap()
            })
            .sum();

        let config = MlConfig {
            convergence_tol: 1e-13,
            ..MlConfig::default()
        };
        let result = fit_ml(&Dataset::Povm(dataset), 4, &config, 7).unwrap();
        assert!(
            result.log_likelihood_nat >= truth_ll - 1e-4,
            "fit ll {} vs truth ll {}",
            result.log_likelihood_nat,
            truth_ll
        );
        let fidelity = crate::quantum::uhlmann_fidelity(&truth, &result.estimator).unwrap();
        assert!(fidelity > 0.999, "fidelity {fidelity}");
        assert!(result.converged);
    }

    #[test]
    fn interior_fits_reach_stationarity() {
        let mut rng = StdRng::seed_from_u64(22);
        // Dark-count-style mixing keeps every probability interior.
        let mut matrix = CMat::identity(5, 5).unscale(50.0);
        matrix[(2, 2)] += c(0.9, 0.0);
        let truth = DensityOperator::new(matrix).unwrap();
        let dataset = expected_count_dataset(&truth, 6, 100_000.0, &mut rng);

        let config = MlConfig {
            convergence_tol: 1e-13,
            ..MlConfig::default()
        };
        let result = fit_ml(&Dataset::Povm(dataset.clone()), 5, &config, 3).unwrap();
        let residual = stationarity_residual(&dataset, &result.estimator, 5).unwrap();
        assert!(residual <= 1e-5, "stationarity residual {residual}");
    }

    #[test]
    fn sweep_is_monotone_and_pads_on_pure_support() {
        // Counts only on outcome 0: every dimension fits diag(1, 0, ...) and
        // the likelihood plateau is exactly zero.
        let dataset = identity_diagonal_dataset(vec![100, 0, 0, 0]);
        let results =
            sweep_dimensions(&dataset, 2, 4, &MlConfig::for_diagonal(), 0).unwrap();
        for (i, result) in results.iter().enumerate() {
            assert_eq!(result.log_likelihood_nat, 0.0);
            assert_relative_eq!(result.estimator.diagonal()[0], 1.0, epsilon = 1e-12);
            assert_eq!(result.estimator.dim(), 2 + i);
        }
        // Monotone contract on a generic dataset.
        let dataset = identity_diagonal_dataset(vec![40, 25, 20, 15]);
        let results =
            sweep_dimensions(&dataset, 2, 4, &MlConfig::for_diagonal(), 0).unwrap();
        for pair in results.windows(2) {
            assert!(pair[0].log_likelihood_nat <= pair[1].log_likelihood_nat + SWEEP_DIP_TOL);
        }
        assert!(matches!(
            sweep_dimensions(&dataset, 2, 5, &MlConfig::default(), 0),
            Err(MleError::BadSweepRange { .. })
        ));
    }

    #[test]
    fn pair_support_fits_and_pads_with_remapping() {
        // dim_max = 3 photon numbers per arm; identity response over the 9
        // pair outcomes; counts concentrated on pairs within {0,1}.
        let dim_max = 3;
        let response = DMatrix::<f64>::identity(9, 9);
        let mut counts = vec![0u64; 9];
        counts[0] = 40; // (0,0)
        counts[1] = 30; // (0,1)
        counts[3] = 20; // (1,0)
        counts[4] = 10; // (1,1)
        let dataset =
            Dataset::Diagonal(DiagonalDataset::new(dim_max, response, counts).unwrap());

        let results = sweep_dimensions(&dataset, 2, 3, &MlConfig::for_diagonal(), 0).unwrap();
        // d = 2: support covers all counts; optimum is the empirical law.
        let d2 = &results[0];
        assert_eq!(d2.estimator.dim(), 4);
        assert_relative_eq!(d2.estimator.diagonal()[0], 0.4, epsilon = 1e-9);
        assert_relative_eq!(d2.estimator.diagonal()[1], 0.3, epsilon = 1e-9);
        assert_relative_eq!(d2.estimator.diagonal()[2], 0.2, epsilon = 1e-9);
        assert_relative_eq!(d2.estimator.diagonal()[3], 0.1, epsilon = 1e-9);
        // d = 3 reaches the same optimum (plateau), on the 9-dim pair space.
        let d3 = &results[1];
        assert_eq!(d3.estimator.dim(), 9);
        assert_relative_eq!(
            d3.log_likelihood_nat,
            d2.log_likelihood_nat,
            epsilon = 1e-9
        );
        // Local pair layout: (1,0) sits at index 1*3+0 = 3 in the d=3 space.
        assert_relative_eq!(d3.estimator.diagonal()[3], 0.2, epsilon = 1e-6);
    }
}
