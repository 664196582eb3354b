//! Turns importance weights and source losses into a target-performance
//! estimate, with the diagnostics that qualify it: the largest raw weight,
//! the effective sample size, and a plug-in upper bound on the estimation
//! error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slices::LossVector;
use crate::weights::WeightVector;

/// A weighted performance estimate plus the diagnostics reported with it.
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    /// Estimated target-side mean loss.
    pub value: f64,
    /// Largest raw (pre-normalization) weight.
    pub m_hat: f64,
    /// Effective sample size of the weight vector.
    pub ess: f64,
    /// Population variance of the weights after scaling to mean 1
    /// (scale-invariant; equals n/ess - 1).
    pub weight_variance: f64,
    /// Examples used to fit the weight model.
    pub n_s1: usize,
    /// Examples whose weighted losses form the estimate.
    pub n_s2: usize,
}

/// Combines weights and per-example losses.
///
/// With normalized weights the estimate is the self-normalized form
/// `Σ w_i ℓ_i` (weights sum to one), which keeps the value inside the convex
/// hull of the losses. With raw weights it is the plain average
/// `(1/n) Σ w_i ℓ_i`.
pub fn weighted_estimate(weights: &WeightVector, loss: &LossVector) -> Result<Estimate> {
    if weights.len() != loss.len() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} losses",
            weights.len(),
            loss.len()
        )));
    }
    let n = weights.len();
    let dot: f64 = weights
        .weights()
        .iter()
        .zip(loss.values())
        .map(|(w, l)| w * l)
        .sum();
    let value = if weights.is_normalized() {
        dot
    } else {
        dot / n as f64
    };
    let ess = effective_sample_size(weights)?;
    Ok(Estimate {
        value,
        m_hat: weights.m_hat(),
        ess,
        weight_variance: n as f64 / ess - 1.0,
        n_s1: weights.train_size().unwrap_or(n),
        n_s2: n,
    })
}

/// `(Σw)² / Σw²`: the number of equally-weighted examples carrying the same
/// estimator variance. Scale-invariant, so it is the same for raw and
/// normalized weights.
pub fn effective_sample_size(weights: &WeightVector) -> Result<f64> {
    let sum: f64 = weights.weights().iter().sum();
    let sum_sq: f64 = weights.weights().iter().map(|w| w * w).sum();
    if sum_sq == 0.0 {
        return Err(Error::AllZeroWeights);
    }
    Ok(sum * sum / sum_sq)
}

/// `|estimate - truth| / |source_estimate - truth|`: error relative to doing
/// no reweighting at all. Zero over zero is defined as 0, and a nonzero
/// numerator over zero as +inf.
pub fn relative_error(estimate: f64, source_estimate: f64, truth: f64) -> f64 {
    let num = (estimate - truth).abs();
    let denom = (source_estimate - truth).abs();
    if denom == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / denom
    }
}

/// User-supplied quantities entering the error bound: per-slice relative
/// error bounds on the correction tables (all in [0, 1)), an upper bound on
/// the true density ratio, a bound on the unmodeled-shift total-variation
/// term, a confidence level, and a loss-distribution constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundInputs {
    pub eta_s_min: Vec<f64>,
    pub eta_s_max: Vec<f64>,
    pub eta_t_min: Vec<f64>,
    pub eta_t_max: Vec<f64>,
    /// Upper bound on the true importance ratio; meaningful values are ≥ 1.
    pub m_ratio: f64,
    /// Bound on the estimation error contributed by properties the slices do
    /// not capture. Supplied, never computed.
    pub tv_term: f64,
    /// Confidence level in (0, 1).
    pub epsilon: f64,
    /// Loss-distribution constant; defaults to 1 in the CLI. The bound is a
    /// reporting tool, not a certified guarantee, because this constant and
    /// tv_term are not estimable from data.
    pub c_s_loss: f64,
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        let k = self.eta_s_min.len();
        if self.eta_s_max.len() != k || self.eta_t_min.len() != k || self.eta_t_max.len() != k {
            return Err(Error::InvalidInput(
                "eta vectors must share one length".into(),
            ));
        }
        for eta in [
            &self.eta_s_min,
            &self.eta_s_max,
            &self.eta_t_min,
            &self.eta_t_max,
        ] {
            if let Some(v) = eta.iter().find(|v| !(0.0..1.0).contains(*v)) {
                return Err(Error::InvalidInput(format!(
                    "eta values must lie in [0, 1), got {v}"
                )));
            }
        }
        if !self.m_ratio.is_finite() || self.m_ratio < 0.0 {
            return Err(Error::InvalidInput(format!(
                "ratio bound must be finite and non-negative, got {}",
                self.m_ratio
            )));
        }
        if !self.tv_term.is_finite() || self.tv_term < 0.0 {
            return Err(Error::InvalidInput(format!(
                "tv_term must be finite and non-negative, got {}",
                self.tv_term
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !self.c_s_loss.is_finite() || self.c_s_loss < 0.0 {
            return Err(Error::InvalidInput(format!(
                "c_s_loss must be finite and non-negative, got {}",
                self.c_s_loss
            )));
        }
        Ok(())
    }
}

/// Plug-in error bound
///
/// ```text
/// tv_term
///   + r M Σ_i [ η_t_max(i)/(1 − η_t_min(i)) + η_s_max(i)/(1 − η_s_min(i)) ]
///   + M̂ (c_s_loss + 1) sqrt(log(4/ε) / n_s)
/// ```
///
/// with the total correction ratio `r = Π_i (1 + η_t_max(i))/(1 − η_s_min(i))`.
/// The first term covers unmodeled shift, the second correction-table error,
/// the third finite-sample concentration. Monotone nondecreasing in every
/// eta, in `m_ratio`, and in `tv_term`; decreasing in `n_s`.
pub fn theorem1_bound(inputs: &BoundInputs, n_s: usize, m_hat: f64) -> Result<f64> {
    inputs.validate()?;
    if n_s == 0 {
        return Err(Error::InvalidInput("n_s must be positive".into()));
    }
    if !m_hat.is_finite() || m_hat < 0.0 {
        return Err(Error::InvalidInput(format!(
            "m_hat must be finite and non-negative, got {m_hat}"
        )));
    }
    let mut r = 1.0;
    let mut eta_sum = 0.0;
    for i in 0..inputs.eta_s_min.len() {
        r *= (1.0 + inputs.eta_t_max[i]) / (1.0 - inputs.eta_s_min[i]);
        eta_sum += inputs.eta_t_max[i] / (1.0 - inputs.eta_t_min[i])
            + inputs.eta_s_max[i] / (1.0 - inputs.eta_s_min[i]);
    }
    let concentration =
        m_hat * (inputs.c_s_loss + 1.0) * ((4.0 / inputs.epsilon).ln() / n_s as f64).sqrt();
    Ok(inputs.tv_term + r * inputs.m_ratio * eta_sum + concentration)
}
