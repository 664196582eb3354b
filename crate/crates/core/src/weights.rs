//! Importance-weight vectors shared by the density-ratio fitter and the
//! reference estimators.

use crate::error::{Error, Result};

/// Per-example importance weights over the evaluation split of the source
/// dataset, plus the summary state the estimator needs.
#[derive(Debug, Clone)]
pub struct WeightVector {
    weights: Vec<f64>,
    normalized: bool,
    /// Largest raw weight before any normalization.
    m_hat: f64,
    /// Mean of exp(delta' phi) over the train split: the empirical estimate of
    /// the partition-function ratio that normalizes the fitted density ratio.
    /// `None` for weights that do not come from the ratio model.
    partition_ratio_estimate: Option<f64>,
    /// Size of the train split the denominator was computed on, when the
    /// weights come from a train/eval split.
    train_size: Option<usize>,
}

impl WeightVector {
    /// Wraps raw non-negative weights, optionally dividing by their sum.
    pub fn from_raw(raw: Vec<f64>, normalize: bool) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidInput("weight vector is empty".into()));
        }
        if let Some(w) = raw.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidInput(format!(
                "weights must be finite and non-negative, got {w}"
            )));
        }
        let m_hat = raw.iter().cloned().fold(0.0_f64, f64::max);
        let mut weights = raw;
        if normalize {
            let sum: f64 = weights.iter().sum();
            if sum <= 0.0 {
                return Err(Error::AllZeroWeights);
            }
            for w in &mut weights {
                *w /= sum;
            }
        }
        Ok(Self {
            weights,
            normalized: normalize,
            m_hat,
            partition_ratio_estimate: None,
            train_size: None,
        })
    }

    pub fn with_partition_ratio(mut self, ratio: f64) -> Self {
        self.partition_ratio_estimate = Some(ratio);
        self
    }

    /// Divides the weights by their sum, keeping the raw-weight diagnostics.
    /// No-op on an already normalized vector.
    pub fn into_normalized(mut self) -> Result<Self> {
        if !self.normalized {
            let sum: f64 = self.weights.iter().sum();
            if sum <= 0.0 {
                return Err(Error::AllZeroWeights);
            }
            for w in &mut self.weights {
                *w /= sum;
            }
            self.normalized = true;
        }
        Ok(self)
    }

    pub fn with_train_size(mut self, n: usize) -> Self {
        self.train_size = Some(n);
        self
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Largest raw weight before normalization.
    pub fn m_hat(&self) -> f64 {
        self.m_hat
    }

    pub fn partition_ratio_estimate(&self) -> Option<f64> {
        self.partition_ratio_estimate
    }

    pub fn train_size(&self) -> Option<usize> {
        self.train_size
    }
}
