//! Dimension certification from a likelihood ladder: priors, posteriors,
//! posterior/prior ratios, the smallest supported dimension with its
//! plausible intervals, and the penalized information-criterion baselines.
//!
//! A dimension d is *supported* when its posterior strictly exceeds its
//! prior, i.e. the data raised our belief in d.  The certified dimension is
//! the smallest supported one; when no dimension qualifies the outcome is a
//! first-class "none" with a warning, not an error.  All belief arithmetic
//! runs in extended precision ([`crate::xprec`]) because the likelihoods
//! span hundreds of millions of orders of magnitude.

use serde_json::{json, Value};
use thiserror::Error;

use crate::mle::{MleError, MlResult};
use crate::quantum::Dataset;
use crate::xprec::{
    dec, log_sum, render_decimal, to_plain_decimal, BigLog, Dec, XprecError, WORKING_DIGITS,
};

/// A ratio counts as "strictly above 1" only when its log10 clears this
/// band.  Extended-precision arithmetic leaves residues around 1e-118 on
/// ratios that are exactly 1 mathematically (equal-likelihood plateaus);
/// the band absorbs those without affecting any genuine ratio, whose log10
/// is never this close to zero.
pub const RB_TIE_BAND_LOG10: &str = "1e-80";

/// Information-criterion values within this absolute distance of the
/// minimum count as tied; ties resolve to the largest tied dimension.
pub const INFO_PLATEAU_TOL: f64 = 1e-9;

/// Interval half-widths reported by default.
pub const DEFAULT_INTERVAL_DELTAS: [usize; 3] = [0, 1, 2];

/// Default significant digits for rendered report columns.
pub const DEFAULT_RENDER_DIGITS: usize = 64;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("prior domain {d_min}..={d_max} must contain at least two dimensions starting at 2")]
    InvalidRange { d_min: usize, d_max: usize },
    #[error("prior weight for dimension {d} is not strictly positive")]
    NonPositiveWeight { d: usize },
    #[error("expected {expected} values over the prior domain, got {got}")]
    DomainMismatch { expected: usize, got: usize },
    #[error("every likelihood is zero; the evidence is empty")]
    AllLikelihoodsZero,
    #[error("interval [{d_rb}, {d_rb} + {delta}] leaves the domain {d_min}..={d_max}")]
    IntervalOutOfDomain {
        d_rb: usize,
        delta: usize,
        d_min: usize,
        d_max: usize,
    },
    #[error("information criterion needs alpha > 0, got {0}")]
    BadAlpha(f64),
    #[error("every log-likelihood is -inf; the criterion is undefined")]
    AllCriteriaInfinite,
    #[error("dataset has no counts, so the BIC penalty is undefined")]
    EmptyDataset,
    #[error(transparent)]
    Xprec(#[from] XprecError),
    #[error(transparent)]
    Mle(#[from] MleError),
}

/// Prior belief over candidate dimensions `d_min..=d_max`, as strictly
/// positive working-precision weights summing to 1.  Dimension 1 is never in
/// the domain: a 1-dimensional state space admits only one state, so the
/// question answered here starts at 2.
#[derive(Clone, Debug)]
pub struct Prior {
    d_min: usize,
    d_max: usize,
    weights: Vec<Dec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorKind {
    Uniform,
    Gaussian { center: i64 },
}

impl Prior {
    /// Equal weight on every dimension in the domain.
    pub fn uniform(d_min: usize, d_max: usize) -> Result<Self, CertifyError> {
        check_range(d_min, d_max)?;
        let count = d_max - d_min + 1;
        let weight = one() / Dec::from(count as u64).with_precision(WORKING_DIGITS).value();
        Ok(Self {
            d_min,
            d_max,
            weights: vec![weight; count],
        })
    }

    /// Weights proportional to `exp(-(d - center)^2)`, normalized over the
    /// domain; the exponentials are evaluated at working precision.
    pub fn gaussian(center: i64, d_min: usize, d_max: usize) -> Result<Self, CertifyError> {
        check_range(d_min, d_max)?;
        let raw: Vec<Dec> = (d_min..=d_max)
            .map(|d| {
                let diff = d as i64 - center;
                let exponent = Dec::from(-(diff * diff)).with_precision(WORKING_DIGITS).value();
                exponent.exp()
            })
            .collect();
        Self::from_weights(d_min, raw)
    }

    /// Normalize explicit weights into a prior.  Every weight must be
    /// strictly positive: a zero weight can never be revised upward by data,
    /// so it would silently exclude that dimension from certification.
    pub fn from_weights(d_min: usize, weights: Vec<Dec>) -> Result<Self, CertifyError> {
        if weights.len() < 2 {
            return Err(CertifyError::InvalidRange {
                d_min,
                d_max: d_min + weights.len().saturating_sub(1),
            });
        }
        let d_max = d_min + weights.len() - 1;
        check_range(d_min, d_max)?;
        for (i, w) in weights.iter().enumerate() {
            if *w <= Dec::ZERO {
                return Err(CertifyError::NonPositiveWeight { d: d_min + i });
            }
        }
        let mut total = Dec::ZERO;
        for w in &weights {
            total += w.clone().with_precision(WORKING_DIGITS).value();
        }
        let weights = weights
            .into_iter()
            .map(|w| w.with_precision(WORKING_DIGITS).value() / &total)
            .collect();
        Ok(Self {
            d_min,
            d_max,
            weights,
        })
    }

    pub fn d_min(&self) -> usize {
        self.d_min
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[Dec] {
        &self.weights
    }

    /// Weight of dimension `d`, or `None` outside the domain.
    pub fn weight(&self, d: usize) -> Option<&Dec> {
        if d < self.d_min || d > self.d_max {
            return None;
        }
        Some(&self.weights[d - self.d_min])
    }
}

fn check_range(d_min: usize, d_max: usize) -> Result<(), CertifyError> {
    if d_min < 2 || d_min >= d_max {
        return Err(CertifyError::InvalidRange { d_min, d_max });
    }
    Ok(())
}

fn one() -> Dec {
    Dec::ONE.with_precision(WORKING_DIGITS).value()
}

/// Build a prior of the given kind over `d_min..=d_max`.
pub fn make_prior(kind: PriorKind, d_min: usize, d_max: usize) -> Result<Prior, CertifyError> {
    match kind {
        PriorKind::Uniform => Prior::uniform(d_min, d_max),
        PriorKind::Gaussian { center } => Prior::gaussian(center, d_min, d_max),
    }
}

/// Likelihoods, posteriors and posterior/prior ratios over one prior domain.
///
/// The ratio of dimension d is `posterior(d)/prior(d)`, equivalently
/// `L_d / sum_d' L_d' pr(d')`; it is bounded above by `1/prior(d)`, so the
/// plain-decimal form always exists.
#[derive(Clone, Debug)]
pub struct DimensionEvidence {
    d_min: usize,
    likelihoods: Vec<BigLog>,
    posterior_logs: Vec<BigLog>,
    rb_logs: Vec<BigLog>,
    posteriors: Vec<Dec>,
    rb_ratios: Vec<Dec>,
}

impl DimensionEvidence {
    pub fn d_min(&self) -> usize {
        self.d_min
    }

    pub fn d_max(&self) -> usize {
        self.d_min + self.likelihoods.len() - 1
    }

    pub fn likelihoods(&self) -> &[BigLog] {
        &self.likelihoods
    }

    /// Posterior probabilities as plain decimals; they sum to 1.
    pub fn posteriors(&self) -> &[Dec] {
        &self.posteriors
    }

    /// Posterior/prior ratios as plain decimals.
    pub fn rb_ratios(&self) -> &[Dec] {
        &self.rb_ratios
    }

    pub(crate) fn posterior_logs(&self) -> &[BigLog] {
        &self.posterior_logs
    }

    pub(crate) fn rb_ratio_logs(&self) -> &[BigLog] {
        &self.rb_logs
    }
}

/// Combine a likelihood ladder with a prior.  Errors if the domain sizes
/// disagree or every likelihood is zero.
pub fn evidence(likelihoods: &[BigLog], prior: &Prior) -> Result<DimensionEvidence, CertifyError> {
    if likelihoods.len() != prior.len() {
        return Err(CertifyError::DomainMismatch {
            expected: prior.len(),
            got: likelihoods.len(),
        });
    }
    if likelihoods.iter().all(BigLog::is_zero) {
        return Err(CertifyError::AllLikelihoodsZero);
    }
    let denominator = log_sum(likelihoods, prior.weights())?;
    let mut posterior_logs = Vec::with_capacity(likelihoods.len());
    let mut rb_logs = Vec::with_capacity(likelihoods.len());
    let mut posteriors = Vec::with_capacity(likelihoods.len());
    let mut rb_ratios = Vec::with_capacity(likelihoods.len());
    for (likelihood, weight) in likelihoods.iter().zip(prior.weights()) {
        let rb = likelihood.div(&denominator)?;
        let posterior = rb.mul(&BigLog::from_plain(weight)?);
        posteriors.push(to_plain_decimal(&posterior)?);
        rb_ratios.push(to_plain_decimal(&rb)?);
        posterior_logs.push(posterior);
        rb_logs.push(rb);
    }
    Ok(DimensionEvidence {
        d_min: prior.d_min(),
        likelihoods: likelihoods.to_vec(),
        posterior_logs,
        rb_logs,
        posteriors,
        rb_ratios,
    })
}

/// Posterior probabilities of each dimension under the prior.
pub fn posterior(likelihoods: &[BigLog], prior: &Prior) -> Result<Vec<Dec>, CertifyError> {
    Ok(evidence(likelihoods, prior)?.posteriors)
}

/// Posterior/prior ratios of each dimension under the prior.
pub fn rb_ratios(likelihoods: &[BigLog], prior: &Prior) -> Result<Vec<Dec>, CertifyError> {
    Ok(evidence(likelihoods, prior)?.rb_ratios)
}

/// The smallest dimension whose posterior/prior ratio strictly exceeds 1
/// (log10 above the tie band), or `None` when no dimension qualifies.
pub fn certify_dimension(evidence: &DimensionEvidence) -> Option<usize> {
    let band = dec(RB_TIE_BAND_LOG10).expect("tie band literal is parseable");
    for (i, rb) in evidence.rb_ratio_logs().iter().enumerate() {
        let Some(log10_mag) = rb.log10_magnitude() else {
            continue;
        };
        if *log10_mag > band {
            return Some(evidence.d_min() + i);
        }
    }
    None
}

/// Credibility of the interval `[d_rb, d_rb + delta]`: the posterior mass it
/// contains.
pub fn plausible_interval_credibility(
    evidence: &DimensionEvidence,
    d_rb: usize,
    delta: usize,
) -> Result<Dec, CertifyError> {
    let d_min = evidence.d_min();
    let d_max = evidence.d_max();
    if d_rb < d_min || d_rb + delta > d_max {
        return Err(CertifyError::IntervalOutOfDomain {
            d_rb,
            delta,
            d_min,
            d_max,
        });
    }
    let start = d_rb - d_min;
    let mut total = Dec::ZERO;
    for p in &evidence.posteriors()[start..=start + delta] {
        total += p;
    }
    Ok(total.with_precision(WORKING_DIGITS).value())
}

/// Which parameter-count family the penalty uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KappaKind {
    /// A full d-dimensional state: d^2 - 1 real parameters.
    FullState,
    /// A diagonal (photon-number) state: d - 1 real parameters.
    Diagonal,
}

impl KappaKind {
    pub fn kappa(self, d: usize) -> usize {
        match self {
            KappaKind::FullState => d * d - 1,
            KappaKind::Diagonal => d - 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KappaKind::FullState => "full_state",
            KappaKind::Diagonal => "diagonal",
        }
    }
}

/// Minimize `alpha * kappa_d - logL_d` over the ladder; ties within
/// [`INFO_PLATEAU_TOL`] resolve to the largest tied dimension.  AIC uses
/// `alpha = 1`; BIC uses `alpha = ln(N)/2`.
pub fn information_criterion(
    log_likelihoods_nat: &[f64],
    d_min: usize,
    alpha: f64,
    kappa_kind: KappaKind,
) -> Result<usize, CertifyError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(CertifyError::BadAlpha(alpha));
    }
    let criteria: Vec<f64> = log_likelihoods_nat
        .iter()
        .enumerate()
        .map(|(i, &ll)| {
            if ll == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                alpha * kappa_kind.kappa(d_min + i) as f64 - ll
            }
        })
        .collect();
    let minimum = criteria.iter().copied().fold(f64::INFINITY, f64::min);
    if minimum == f64::INFINITY {
        return Err(CertifyError::AllCriteriaInfinite);
    }
    let tied = criteria
        .iter()
        .rposition(|&c| c <= minimum + INFO_PLATEAU_TOL)
        .expect("a finite minimum exists");
    Ok(d_min + tied)
}

/// One reported plausible interval.
#[derive(Clone, Debug)]
pub struct IntervalCredibility {
    pub delta: usize,
    /// Upper end of the interval actually summed; equals `d_rb + delta`
    /// unless that leaves the domain, in which case it saturates at D.
    pub d_upper: usize,
    pub credibility: Dec,
}

/// Per-dimension solver diagnostics carried into the report.
#[derive(Clone, Debug)]
pub struct FitDiagnostics {
    pub d: usize,
    pub iterations_used: usize,
    pub converged: bool,
    pub padded_from_lower_dim: bool,
}

/// Message attached to a report whose evidence supports no dimension.
pub const NO_DIMENSION_WARNING: &str = "no dimension supported by data";

/// Everything the certification pipeline reports for one dataset + prior.
#[derive(Clone, Debug)]
pub struct CertificationReport {
    pub d_rb: Option<usize>,
    pub evidence: DimensionEvidence,
    pub intervals: Vec<IntervalCredibility>,
    pub d_aic: usize,
    pub d_bic: usize,
    pub alpha_bic: f64,
    pub kappa_kind: KappaKind,
    pub total_counts: u64,
    pub log_likelihoods_nat: Vec<f64>,
    pub prior_weights: Vec<Dec>,
    pub diagnostics: Vec<FitDiagnostics>,
    pub warning: Option<String>,
}

/// Assemble a report from a completed dimension sweep.
///
/// The sweep must cover exactly the prior's domain, in ascending order.
/// Intervals are requested as half-widths `delta`; an interval that would
/// extend past D is truncated at D (its credibility then saturates at the
/// remaining tail mass), with the truncation visible via
/// [`IntervalCredibility::d_upper`].
pub fn build_report(
    dataset: &Dataset,
    sweep: &[MlResult],
    prior: &Prior,
    interval_deltas: &[usize],
) -> Result<CertificationReport, CertifyError> {
    let log_likelihoods_nat: Vec<f64> = sweep.iter().map(|r| r.log_likelihood_nat).collect();
    let kappa_kind = match dataset {
        Dataset::Povm(_) => KappaKind::FullState,
        Dataset::Diagonal(_) => KappaKind::Diagonal,
    };
    let diagnostics = sweep
        .iter()
        .enumerate()
        .map(|(i, r)| FitDiagnostics {
            d: prior.d_min() + i,
            iterations_used: r.iterations_used,
            converged: r.converged,
            padded_from_lower_dim: r.padded_from_lower_dim,
        })
        .collect();
    let likelihoods: Vec<BigLog> = log_likelihoods_nat
        .iter()
        .map(|&ll| crate::xprec::from_natural_log(ll))
        .collect::<Result<_, _>>()?;
    assemble_report(
        &likelihoods,
        &log_likelihoods_nat,
        prior,
        interval_deltas,
        dataset.total_counts(),
        kappa_kind,
        diagnostics,
    )
}

/// Assemble a report directly from pre-computed likelihood magnitudes (e.g.
/// values published elsewhere), bypassing the fitting stage.
pub fn build_report_from_likelihoods(
    likelihoods: &[BigLog],
    prior: &Prior,
    interval_deltas: &[usize],
    total_counts: u64,
    kappa_kind: KappaKind,
) -> Result<CertificationReport, CertifyError> {
    // The f64 logs feed only the AIC/BIC arithmetic; the belief calculus
    // uses the exact extended-precision likelihoods.
    let log_likelihoods_nat: Vec<f64> = likelihoods
        .iter()
        .map(|l| match crate::xprec::to_natural_log(l) {
            Some(ln) => ln.to_f64().value(),
            None => f64::NEG_INFINITY,
        })
        .collect();
    assemble_report(
        likelihoods,
        &log_likelihoods_nat,
        prior,
        interval_deltas,
        total_counts,
        kappa_kind,
        Vec::new(),
    )
}

fn assemble_report(
    likelihoods: &[BigLog],
    log_likelihoods_nat: &[f64],
    prior: &Prior,
    interval_deltas: &[usize],
    total_counts: u64,
    kappa_kind: KappaKind,
    diagnostics: Vec<FitDiagnostics>,
) -> Result<CertificationReport, CertifyError> {
    if total_counts == 0 {
        return Err(CertifyError::EmptyDataset);
    }
    let evidence = evidence(likelihoods, prior)?;
    let d_rb = certify_dimension(&evidence);
    let mut intervals = Vec::new();
    if let Some(d_rb) = d_rb {
        for &delta in interval_deltas {
            let d_upper = (d_rb + delta).min(evidence.d_max());
            let credibility =
                plausible_interval_credibility(&evidence, d_rb, d_upper - d_rb)?;
            intervals.push(IntervalCredibility {
                delta,
                d_upper,
                credibility,
            });
        }
    }
    let alpha_bic = (total_counts as f64).ln() / 2.0;
    let d_aic = information_criterion(log_likelihoods_nat, prior.d_min(), 1.0, kappa_kind)?;
    let d_bic = information_criterion(log_likelihoods_nat, prior.d_min(), alpha_bic, kappa_kind)?;
    let warning = if d_rb.is_none() {
        Some(NO_DIMENSION_WARNING.to_string())
    } else {
        None
    };
    Ok(CertificationReport {
        d_rb,
        evidence,
        intervals,
        d_aic,
        d_bic,
        alpha_bic,
        kappa_kind,
        total_counts,
        log_likelihoods_nat: log_likelihoods_nat.to_vec(),
        prior_weights: prior.weights().to_vec(),
        diagnostics,
        warning,
    })
}

impl CertificationReport {
    /// JSON form with all extended-precision columns rendered to `digits`
    /// significant digits.
    pub fn to_json(&self, digits: usize) -> Result<Value, CertifyError> {
        let evidence = &self.evidence;
        let render_log =
            |values: &[BigLog]| -> Result<Vec<String>, XprecError> {
                values.iter().map(|v| render_decimal(v, digits)).collect()
            };
        let lls: Vec<Value> = self
            .log_likelihoods_nat
            .iter()
            .map(|&ll| {
                if ll.is_finite() {
                    json!(ll)
                } else {
                    json!("-inf")
                }
            })
            .collect();
        let intervals: Vec<Value> = self
            .intervals
            .iter()
            .map(|interval| {
                Ok(json!({
                    "delta": interval.delta,
                    "d_upper": interval.d_upper,
                    "credibility": render_plain(&interval.credibility, digits)?,
                }))
            })
            .collect::<Result<_, CertifyError>>()?;
        let prior: Vec<String> = self
            .prior_weights
            .iter()
            .map(|w| render_plain(w, digits))
            .collect::<Result<_, _>>()?;
        let diagnostics: Vec<Value> = self
            .diagnostics
            .iter()
            .map(|diag| {
                json!({
                    "d": diag.d,
                    "iterations_used": diag.iterations_used,
                    "converged": diag.converged,
                    "padded_from_lower_dim": diag.padded_from_lower_dim,
                })
            })
            .collect();
        Ok(json!({
            "schema": "rbcert-report-v1",
            "d_min": evidence.d_min(),
            "d_max": evidence.d_max(),
            "d_rb": self.d_rb,
            "warning": self.warning,
            "likelihoods": render_log(evidence.likelihoods())?,
            "posteriors": render_log(evidence.posterior_logs())?,
            "rb_ratios": render_log(evidence.rb_ratio_logs())?,
            "log_likelihoods_nat": lls,
            "intervals": intervals,
            "d_aic": self.d_aic,
            "d_bic": self.d_bic,
            "alpha_bic": self.alpha_bic,
            "kappa_kind": self.kappa_kind.as_str(),
            "total_counts": self.total_counts,
            "prior_weights": prior,
            "diagnostics": diagnostics,
        }))
    }

    /// Aligned text table: one row per dimension with likelihood, posterior
    /// and ratio columns rendered to `digits` significant digits.
    pub fn to_table(&self, digits: usize) -> Result<String, CertifyError> {
        let evidence = &self.evidence;
        let width = digits + 12;
        let mut out = String::new();
        out.push_str(&format!(
            "{:>4}  {:<width$}  {:<width$}  {:<width$}\n",
            "d", "likelihood", "posterior", "rb_ratio",
        ));
        for i in 0..evidence.likelihoods().len() {
            let d = evidence.d_min() + i;
            let marker = if Some(d) == self.d_rb { "*" } else { " " };
            out.push_str(&format!(
                "{:>3}{marker}  {:<width$}  {:<width$}  {:<width$}\n",
                d,
                render_decimal(&evidence.likelihoods()[i], digits)?,
                render_decimal(&evidence.posterior_logs()[i], digits)?,
                render_decimal(&evidence.rb_ratio_logs()[i], digits)?,
            ));
        }
        match self.d_rb {
            Some(d_rb) => {
                out.push_str(&format!("\nd_rb = {d_rb}\n"));
                for interval in &self.intervals {
                    out.push_str(&format!(
                        "C[{}, {}] = {}\n",
                        d_rb,
                        interval.d_upper,
                        render_plain(&interval.credibility, digits)?,
                    ));
                }
            }
            None => {
                out.push_str(&format!(
                    "\nd_rb = none ({})\n",
                    NO_DIMENSION_WARNING
                ));
            }
        }
        out.push_str(&format!(
            "d_aic = {} (alpha = 1), d_bic = {} (alpha = {:.6}), kappa = {}\n",
            self.d_aic,
            self.d_bic,
            self.alpha_bic,
            self.kappa_kind.as_str(),
        ));
        Ok(out)
    }
}

/// Render a plain decimal through the canonical scientific renderer.
fn render_plain(value: &Dec, digits: usize) -> Result<String, CertifyError> {
    Ok(render_decimal(&BigLog::from_plain(value)?, digits)?)
}
