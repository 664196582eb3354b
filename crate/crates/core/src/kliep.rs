//! Noise-aware density-ratio estimation on slice patterns.
//!
//! The importance weight of a source example is modeled as
//! `p_t(g)/p_s(g) ∝ exp(deltaᵀ phi(g))` over the latent slice labels g, and
//! delta is fit by maximizing a Kullback–Leibler importance-estimation
//! objective. Because g is never observed, each appearance of phi(g) is
//! replaced by its conditional expectation given the observed pattern g̃
//! under the per-slice correction tables; with identity tables the procedure
//! reduces to ordinary likelihood-ratio fitting on the observed patterns.
//!
//! All computation happens on compressed pattern tables: the target sample is
//! traversed exactly once at problem construction, after which optimization
//! touches only per-pattern statistics.

use std::collections::BTreeMap;

use crate::correction::{CorrectionBundle, CorrectionMatrix};
use crate::error::{Error, Result};
use crate::math::{dot, log_sum_exp};
use crate::model::{Component, PotentialMap};
use crate::opt::{maximize, OptimizerConfig, OptimizerStatus};
use crate::slices::SliceRows;
use crate::weights::WeightVector;

/// Multiset of distinct slice patterns with counts, in lexicographic order,
/// plus each original row's pattern index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternTable {
    patterns: Vec<Vec<i8>>,
    counts: Vec<usize>,
    assignments: Vec<usize>,
}

impl PatternTable {
    /// Compresses `rows` in a single pass.
    pub fn from_rows<S: SliceRows + ?Sized>(rows: &S) -> Self {
        let mut ids: BTreeMap<Vec<i8>, usize> = BTreeMap::new();
        let mut counts: Vec<usize> = Vec::new();
        let mut assignments = Vec::with_capacity(rows.n_rows());
        for r in 0..rows.n_rows() {
            let row = rows.row(r);
            let id = match ids.get(row) {
                Some(&id) => id,
                None => {
                    let id = counts.len();
                    ids.insert(row.to_vec(), id);
                    counts.push(0);
                    id
                }
            };
            counts[id] += 1;
            assignments.push(id);
        }
        // Re-index in lexicographic pattern order so the table is independent
        // of row order.
        let mut remap = vec![0usize; counts.len()];
        let mut patterns = Vec::with_capacity(counts.len());
        let mut sorted_counts = vec![0usize; counts.len()];
        for (new_id, (pattern, old_id)) in ids.into_iter().enumerate() {
            remap[old_id] = new_id;
            sorted_counts[new_id] = counts[old_id];
            patterns.push(pattern);
        }
        for a in &mut assignments {
            *a = remap[*a];
        }
        Self {
            patterns,
            counts: sorted_counts,
            assignments,
        }
    }

    /// Number of distinct patterns.
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Number of original rows.
    pub fn n_rows(&self) -> usize {
        self.assignments.len()
    }

    pub fn pattern(&self, idx: usize) -> &[i8] {
        &self.patterns[idx]
    }

    pub fn count(&self, idx: usize) -> usize {
        self.counts[idx]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Pattern index of each original row.
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn index_of(&self, pattern: &[i8]) -> Option<usize> {
        self.patterns
            .binary_search_by(|p| p.as_slice().cmp(pattern))
            .ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[i8], usize)> {
        self.patterns
            .iter()
            .map(Vec::as_slice)
            .zip(self.counts.iter().copied())
    }
}

/// `E[phi(g) | g̃ = pattern]` under the correction tables: within a pattern
/// the latent labels are conditionally independent across slices, so pair
/// features factor into products of per-slice conditional means.
pub fn cond_mean_phi(map: &PotentialMap, corr: &[CorrectionMatrix], pattern: &[i8]) -> Vec<f64> {
    debug_assert_eq!(pattern.len(), map.k());
    let mut out = vec![0.0; map.dim()];
    for comp in map.components() {
        match *comp {
            Component::Single { slice, pos } => {
                out[pos] = corr[slice].conditional_mean(pattern[slice]);
            }
            Component::Pair { i, j, pos, .. } => {
                let mi = corr[i].conditional_mean(pattern[i]);
                let mj = corr[j].conditional_mean(pattern[j]);
                out[pos] = mi;
                out[pos + 1] = mj;
                out[pos + 2] = mi * mj;
            }
        }
    }
    out
}

/// Log of `E[exp(deltaᵀ phi(g)) | g̃ = pattern]` together with the tilted
/// conditional mean of phi (the gradient of the log with respect to delta).
#[derive(Debug, Clone)]
pub struct CondMeanExp {
    pub log_value: f64,
    pub tilted_phi_mean: Vec<f64>,
}

/// Computes [`CondMeanExp`] component by component in the log domain. Zero
/// probability rows of a correction column contribute no term, so with
/// identity tables the log value is exactly `deltaᵀ phi(pattern)`.
pub fn cond_mean_exp(
    map: &PotentialMap,
    corr: &[CorrectionMatrix],
    pattern: &[i8],
    delta: &[f64],
) -> CondMeanExp {
    debug_assert_eq!(pattern.len(), map.k());
    debug_assert_eq!(delta.len(), map.dim());
    let mut log_value = 0.0;
    let mut tilted = vec![0.0; map.dim()];
    for comp in map.components() {
        match *comp {
            Component::Single { slice, pos } => {
                let col = corr[slice].column(pattern[slice]);
                let mut terms: Vec<(f64, f64)> = Vec::with_capacity(2);
                for (p, a) in [(col[0], -1.0), (col[1], 1.0)] {
                    if p > 0.0 {
                        terms.push((p.ln() + delta[pos] * a, a));
                    }
                }
                let lv = log_sum_exp(terms.iter().map(|t| t.0));
                let mut mean = 0.0;
                for (lt, a) in &terms {
                    mean += (lt - lv).exp() * a;
                }
                log_value += lv;
                tilted[pos] = mean;
            }
            Component::Pair { i, j, pos, .. } => {
                let ci = corr[i].column(pattern[i]);
                let cj = corr[j].column(pattern[j]);
                let mut terms: Vec<(f64, f64, f64)> = Vec::with_capacity(4);
                for (pi, ai) in [(ci[0], -1.0), (ci[1], 1.0)] {
                    if pi <= 0.0 {
                        continue;
                    }
                    for (pj, aj) in [(cj[0], -1.0), (cj[1], 1.0)] {
                        if pj <= 0.0 {
                            continue;
                        }
                        let lt = pi.ln()
                            + pj.ln()
                            + delta[pos] * ai
                            + delta[pos + 1] * aj
                            + delta[pos + 2] * ai * aj;
                        terms.push((lt, ai, aj));
                    }
                }
                let lv = log_sum_exp(terms.iter().map(|t| t.0));
                let (mut mi, mut mj, mut mij) = (0.0, 0.0, 0.0);
                for (lt, ai, aj) in &terms {
                    let q = (lt - lv).exp();
                    mi += q * ai;
                    mj += q * aj;
                    mij += q * ai * aj;
                }
                log_value += lv;
                tilted[pos] = mi;
                tilted[pos + 1] = mj;
                tilted[pos + 2] = mij;
            }
        }
    }
    CondMeanExp {
        log_value,
        tilted_phi_mean: tilted,
    }
}

/// Ratio parameters delta, aligned with a [`PotentialMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaParams {
    pub delta: Vec<f64>,
}

/// Solver configuration; the default starts from delta = 0, where the
/// objective is exactly zero.
#[derive(Debug, Clone, Default)]
pub struct SolverConfig {
    pub optimizer: OptimizerConfig,
    pub init: Option<Vec<f64>>,
}

/// Fitted ratio parameters plus optimizer diagnostics.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub delta: DeltaParams,
    pub status: OptimizerStatus,
    pub iterations: usize,
    pub objective: f64,
    pub grad_norm: f64,
    /// Objective value at the start and after each accepted step.
    pub trace: Vec<f64>,
}

/// Precompressed estimation problem. Construction performs the only pass
/// over the target sample; the objective is
///
/// ```text
/// J(delta) = deltaᵀ m_t - log Σ_v c_v E_s[exp(deltaᵀ phi) | g̃ = v] + log n_s1
/// ```
///
/// where `m_t` is the target average of `E_t[phi | g̃]`, the sum runs over
/// distinct source training patterns v with multiplicities c_v, and both
/// conditional expectations use their own side's correction tables. J is
/// concave, J(0) = 0, and its gradient is `m_t` minus the softmax-weighted
/// average of the tilted source means.
#[derive(Debug, Clone)]
pub struct RatioProblem {
    map: PotentialMap,
    source_corr: Vec<CorrectionMatrix>,
    target_mean_phi: Vec<f64>,
    train: PatternTable,
    train_log_counts: Vec<f64>,
    n_train: usize,
}

impl RatioProblem {
    pub fn new<T, S>(
        target: &T,
        source_train: &S,
        map: &PotentialMap,
        corr: &CorrectionBundle,
    ) -> Result<Self>
    where
        T: SliceRows + ?Sized,
        S: SliceRows + ?Sized,
    {
        let k = map.k();
        if target.n_slices() != k || source_train.n_slices() != k {
            return Err(Error::InvalidInput(format!(
                "potential map covers k = {k} slices but target has {} and source {}",
                target.n_slices(),
                source_train.n_slices()
            )));
        }
        if corr.k() != k {
            return Err(Error::InvalidInput(format!(
                "correction bundle covers {} slices but k = {k}",
                corr.k()
            )));
        }
        if target.n_rows() == 0 || source_train.n_rows() == 0 {
            return Err(Error::InvalidInput(
                "both samples must be non-empty".into(),
            ));
        }

        let target_table = PatternTable::from_rows(target);
        let mut target_mean_phi = vec![0.0; map.dim()];
        for (pattern, count) in target_table.iter() {
            let m = cond_mean_phi(map, &corr.target, pattern);
            for (acc, v) in target_mean_phi.iter_mut().zip(&m) {
                *acc += count as f64 * v;
            }
        }
        let n_t = target.n_rows() as f64;
        for v in &mut target_mean_phi {
            *v /= n_t;
        }

        let train = PatternTable::from_rows(source_train);
        let train_log_counts = train.counts().iter().map(|&c| (c as f64).ln()).collect();
        Ok(Self {
            map: map.clone(),
            source_corr: corr.source.clone(),
            target_mean_phi,
            n_train: source_train.n_rows(),
            train,
            train_log_counts,
        })
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn map(&self) -> &PotentialMap {
        &self.map
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn train_patterns(&self) -> &PatternTable {
        &self.train
    }

    /// Target average of the correction-conditional feature means.
    pub fn target_mean_phi(&self) -> &[f64] {
        &self.target_mean_phi
    }

    /// Objective value; `delta` must have length [`Self::dim`].
    pub fn objective(&self, delta: &[f64]) -> f64 {
        let mut scratch = vec![0.0; self.dim()];
        self.objective_and_gradient(delta, &mut scratch)
    }

    /// Gradient of the objective.
    pub fn gradient(&self, delta: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.dim()];
        self.objective_and_gradient(delta, &mut grad);
        grad
    }

    /// Evaluates the objective and writes its gradient in one sweep over the
    /// source training patterns.
    pub fn objective_and_gradient(&self, delta: &[f64], grad: &mut [f64]) -> f64 {
        assert_eq!(delta.len(), self.dim());
        assert_eq!(grad.len(), self.dim());
        let mut scores = Vec::with_capacity(self.train.len());
        let mut tilteds = Vec::with_capacity(self.train.len());
        for (idx, (pattern, _)) in self.train.iter().enumerate() {
            let cme = cond_mean_exp(&self.map, &self.source_corr, pattern, delta);
            scores.push(self.train_log_counts[idx] + cme.log_value);
            tilteds.push(cme.tilted_phi_mean);
        }
        let log_denom = log_sum_exp(scores.iter().copied());
        grad.fill(0.0);
        for (score, tilted) in scores.iter().zip(&tilteds) {
            let p = (score - log_denom).exp();
            for (g, t) in grad.iter_mut().zip(tilted) {
                *g += p * t;
            }
        }
        for (g, t) in grad.iter_mut().zip(&self.target_mean_phi) {
            *g = t - *g;
        }
        dot(delta, &self.target_mean_phi) - log_denom + (self.n_train as f64).ln()
    }

    /// log Σ_v c_v E_s[exp(deltaᵀ phi) | g̃ = v] over source training
    /// patterns — the normalizer of the fitted weights.
    pub fn log_denominator(&self, delta: &[f64]) -> f64 {
        log_sum_exp(self.train.iter().enumerate().map(|(idx, (pattern, _))| {
            self.train_log_counts[idx]
                + cond_mean_exp(&self.map, &self.source_corr, pattern, delta).log_value
        }))
    }

    /// Maximizes the objective.
    pub fn solve(&self, cfg: &SolverConfig) -> Result<SolveResult> {
        let d = self.dim();
        let x0 = match &cfg.init {
            Some(init) if init.len() != d => {
                return Err(Error::InvalidInput(format!(
                    "initial point has {} entries, expected {d}",
                    init.len()
                )));
            }
            Some(init) => init.clone(),
            None => vec![0.0; d],
        };
        let result = maximize(
            |x, g| self.objective_and_gradient(x, g),
            &x0,
            &cfg.optimizer,
        )?;
        Ok(SolveResult {
            delta: DeltaParams { delta: result.x },
            status: result.status,
            iterations: result.iterations,
            objective: result.value,
            grad_norm: result.grad_norm,
            trace: result.trace,
        })
    }

    /// Importance weights for an evaluation sample of source rows:
    /// `w(row) = n_s1 E_s[exp(deltaᵀ phi) | g̃_row] / Σ_v c_v E_s[...| v]`.
    /// The stored m_hat and partition-ratio estimate always refer to the raw
    /// (pre-normalization) weights.
    pub fn weights<E: SliceRows + ?Sized>(
        &self,
        delta: &DeltaParams,
        eval: &E,
        normalize: bool,
    ) -> Result<WeightVector> {
        if eval.n_slices() != self.map.k() {
            return Err(Error::InvalidInput(format!(
                "evaluation rows have {} slices, expected {}",
                eval.n_slices(),
                self.map.k()
            )));
        }
        if delta.delta.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "delta has {} entries, expected {}",
                delta.delta.len(),
                self.dim()
            )));
        }
        if eval.n_rows() == 0 {
            return Err(Error::InvalidInput("evaluation sample is empty".into()));
        }
        let log_denom = self.log_denominator(&delta.delta);
        let log_n = (self.n_train as f64).ln();
        let eval_table = PatternTable::from_rows(eval);
        let pattern_log_w: Vec<f64> = eval_table
            .iter()
            .map(|(pattern, _)| {
                log_n + cond_mean_exp(&self.map, &self.source_corr, pattern, &delta.delta).log_value
                    - log_denom
            })
            .collect();
        let raw: Vec<f64> = eval_table
            .assignments()
            .iter()
            .map(|&id| pattern_log_w[id].exp())
            .collect();
        Ok(WeightVector::from_raw(raw, normalize)?
            .with_partition_ratio((log_denom - log_n).exp())
            .with_train_size(self.n_train))
    }
}
