//! Slice data model: observed slice matrices, the dependency matching between
//! slices, loss vectors, input validation, and inverse-covariance edge
//! selection.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::correction::CorrectionBundle;
use crate::error::{Error, Result};

/// n x k matrix of observed slice values in {-1, 0, +1}; 0 denotes abstain.
/// Column i holds the output of slicing function i. Source and target
/// matrices in one analysis share k and column order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceMatrix {
    values: Vec<i8>, // row-major
    n: usize,
    k: usize,
}

impl SliceMatrix {
    pub fn new(values: Vec<i8>, n: usize, k: usize) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidInput(format!(
                "slice matrix must be non-empty, got {n} x {k}"
            )));
        }
        if values.len() != n * k {
            return Err(Error::InvalidInput(format!(
                "slice matrix shape {n} x {k} needs {} values, got {}",
                n * k,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !matches!(v, -1 | 0 | 1)) {
            return Err(Error::InvalidInput(format!(
                "slice values must be in {{-1, 0, +1}}, got {v}"
            )));
        }
        Ok(Self { values, n, k })
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput("ragged slice rows".into()));
        }
        Self::new(rows.concat(), n, k)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.values[i * self.k + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.values.chunks_exact(self.k)
    }

    pub fn column_has_abstain(&self, j: usize) -> bool {
        (0..self.n).any(|i| self.get(i, j) == 0)
    }

    /// Stacks two matrices with the same column layout (source above target).
    pub fn pooled(&self, other: &SliceMatrix) -> Result<SliceMatrix> {
        if self.k != other.k {
            return Err(Error::InvalidInput(format!(
                "cannot pool slice matrices with k = {} and k = {}",
                self.k, other.k
            )));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        SliceMatrix::new(values, self.n + other.n, self.k)
    }
}

/// Row access used by the pattern-table builders; lets tests count traversals.
pub trait SliceRows {
    fn n_rows(&self) -> usize;
    fn n_slices(&self) -> usize;
    fn row(&self, i: usize) -> &[i8];
}

impl SliceRows for SliceMatrix {
    fn n_rows(&self) -> usize {
        self.n
    }

    fn n_slices(&self) -> usize {
        self.k
    }

    fn row(&self, i: usize) -> &[i8] {
        SliceMatrix::row(self, i)
    }
}

impl<T: SliceRows + ?Sized> SliceRows for &T {
    fn n_rows(&self) -> usize {
        (**self).n_rows()
    }

    fn n_slices(&self) -> usize {
        (**self).n_slices()
    }

    fn row(&self, i: usize) -> &[i8] {
        (**self).row(i)
    }
}

/// A matching on slice indices: each slice participates in at most one edge,
/// edges are stored as (i, j) with i < j, sorted, without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DependencyGraph {
    edges: Vec<(usize, usize)>,
}

impl DependencyGraph {
    pub fn new(edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut normalized: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop ({a}, {b})")));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        let mut seen = BTreeSet::new();
        for &(i, j) in &normalized {
            for idx in [i, j] {
                if !seen.insert(idx) {
                    return Err(Error::InvalidInput(format!("index {idx} in two edges")));
                }
            }
        }
        Ok(Self { edges: normalized })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Largest slice index referenced, if any.
    pub fn max_index(&self) -> Option<usize> {
        self.edges.iter().map(|&(_, j)| j).max()
    }
}

/// Per-example loss values on the labeled source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LossVector {
    values: Vec<f64>,
}

impl LossVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("loss vector is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "loss values must be finite, got {v}"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Selects the rows in `idx` order.
    pub fn subset(&self, idx: &[usize]) -> Result<LossVector> {
        let values = idx
            .iter()
            .map(|&i| {
                self.values.get(i).copied().ok_or_else(|| {
                    Error::InvalidInput(format!("loss index {i} out of range"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LossVector::new(values)
    }
}

/// Everything `validate_inputs` found: hard violations and advisory warnings.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks raw edge pairs against the matching constraint for k slices.
/// Used both by `DependencyGraph::new` callers that want a bulk report and by
/// `validate_inputs`.
pub fn edge_violations(pairs: &[(usize, usize)], k: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut normalized = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        if a == b {
            out.push(format!("self-loop ({a}, {a})"));
            continue;
        }
        if a >= k || b >= k {
            out.push(format!("edge ({a}, {b}) references a slice index >= k = {k}"));
            continue;
        }
        normalized.push((a.min(b), a.max(b)));
    }
    normalized.sort_unstable();
    for w in normalized.windows(2) {
        if w[0] == w[1] {
            out.push(format!("duplicate edge ({}, {})", w[0].0, w[0].1));
        }
    }
    let mut counts = vec![0usize; k];
    for &(i, j) in &normalized {
        counts[i] += 1;
        counts[j] += 1;
    }
    for (idx, c) in counts.iter().enumerate() {
        if *c > 1 {
            out.push(format!("index {idx} in two edges"));
        }
    }
    out
}

/// Cross-checks one analysis's inputs and reports every violation at once
/// rather than failing on the first. Pure and idempotent.
pub fn validate_inputs(
    source: &SliceMatrix,
    target: &SliceMatrix,
    edges: &[(usize, usize)],
    corr: &CorrectionBundle,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let k = source.k();

    if target.k() != k {
        report.violations.push(format!(
            "source has k = {k} slices but target has k = {}",
            target.k()
        ));
        return report;
    }

    report.violations.extend(edge_violations(edges, k));

    for (side, tables) in [("source", &corr.source), ("target", &corr.target)] {
        if tables.len() != k {
            report.violations.push(format!(
                "correction bundle has {} {side} tables for k = {k} slices",
                tables.len()
            ));
            continue;
        }
        for (i, table) in tables.iter().enumerate() {
            for (beta, what) in table.column_violations(1e-9) {
                let beta = match beta {
                    -1 => "-1".to_string(),
                    other => format!("+{other}"),
                };
                report
                    .violations
                    .push(format!("sigma^{i} {side} column for g̃={beta} {what}"));
            }
        }
    }

    for j in 0..k {
        for (side, matrix, tables) in [
            ("source", source, &corr.source),
            ("target", target, &corr.target),
        ] {
            if matrix.column_has_abstain(j) && tables.get(j).is_some_and(|t| t.zero.is_none()) {
                report.warnings.push(format!(
                    "slice {j} abstains on the {side} dataset but sigma^{j} has no abstain \
                     column; (0.5, 0.5) will be used"
                ));
            }
        }
    }

    for j in 0..k {
        let first = source.get(0, j);
        let constant = source.rows().all(|r| r[j] == first)
            && target.rows().all(|r| r[j] == first);
        if constant {
            report.warnings.push(format!(
                "slice {j} is constant ({first}) on both datasets and carries no shift signal"
            ));
        }
    }

    let target_patterns: BTreeSet<&[i8]> = target.rows().collect();
    let mut missing: BTreeSet<&[i8]> = BTreeSet::new();
    for row in source.rows() {
        if !target_patterns.contains(row) {
            missing.insert(row);
        }
    }
    if !missing.is_empty() {
        let shown: Vec<String> = missing
            .iter()
            .take(10)
            .map(|p| format!("{p:?}"))
            .collect();
        let suffix = if missing.len() > 10 {
            format!(" (and {} more)", missing.len() - 10)
        } else {
            String::new()
        };
        report.warnings.push(format!(
            "{} source slice pattern(s) never occur on the target: {}{suffix}",
            missing.len(),
            shown.join(", ")
        ));
    }

    report
}

/// Picks up to `max_edges` slice pairs by inverse-covariance magnitude,
/// greedily and subject to the matching constraint. Abstains enter the
/// covariance as 0. Ties break lexicographically on (i, j), so permuting the
/// columns permutes the selected pairs identically.
pub fn infer_edges(pooled: &SliceMatrix, max_edges: usize) -> Result<DependencyGraph> {
    let (n, k) = (pooled.n(), pooled.k());
    if n < 2 {
        return Err(Error::InvalidInput(
            "edge inference needs at least 2 rows".into(),
        ));
    }
    if max_edges == 0 || k < 2 {
        return Ok(DependencyGraph::empty());
    }

    let mut means = vec![0.0_f64; k];
    for row in pooled.rows() {
        for (m, &v) in means.iter_mut().zip(row) {
            *m += v as f64;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }

    let mut cov = DMatrix::<f64>::zeros(k, k);
    for row in pooled.rows() {
        for a in 0..k {
            let da = row[a] as f64 - means[a];
            for b in a..k {
                let db = row[b] as f64 - means[b];
                cov[(a, b)] += da * db;
            }
        }
    }
    for a in 0..k {
        for b in a..k {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    // Deterministic guard for near-singular matrices.
    for a in 0..k {
        cov[(a, a)] += 1e-8;
    }

    let inv = cov.try_inverse().ok_or(Error::SingularCovariance)?;

    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            let magnitude = (0.5 * (inv[(i, j)] + inv[(j, i)])).abs();
            if !magnitude.is_finite() {
                return Err(Error::SingularCovariance);
            }
            candidates.push((magnitude, i, j));
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite magnitudes")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut used = vec![false; k];
    let mut picked = Vec::new();
    for (_, i, j) in candidates {
        if picked.len() == max_edges {
            break;
        }
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            picked.push((i, j));
        }
    }
    DependencyGraph::new(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correction::CorrectionMatrix;

    fn matrix(rows: &[[i8; 3]]) -> SliceMatrix {
        SliceMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn clean_inputs_produce_an_empty_report() {
        let source = matrix(&[[1, -1, 1], [-1, 1, 1], [1, 1, -1]]);
        let target = matrix(&[[1, -1, 1], [-1, 1, 1], [1, 1, -1]]);
        let corr = CorrectionBundle::identity(3);
        let report = validate_inputs(&source, &target, &[(0, 1)], &corr);
        assert!(report.is_clean(), "{:?}", report.violations);
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    }

    #[test]
    fn matching_violation_is_reported() {
        let source = matrix(&[[1, -1, 1]]);
        let target = matrix(&[[1, -1, 1]]);
        let corr = CorrectionBundle::identity(3);
        let report = validate_inputs(&source, &target, &[(0, 1), (1, 2)], &corr);
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("index 1 in two edges")));
    }

    #[test]
    fn bad_column_sum_is_reported() {
        let source = matrix(&[[1, -1, 1]]);
        let target = matrix(&[[1, -1, 1]]);
        let mut corr = CorrectionBundle::identity(3);
        corr.source[0] = CorrectionMatrix {
            minus: [1.0, 0.0],
            zero: None,
            plus: [0.1, 0.8],
        };
        let report = validate_inputs(&source, &target, &[], &corr);
        assert!(
            report
                .violations
                .iter()
                .any(|v| v.contains("sigma^0 source column for g̃=+1") && v.contains("0.9")),
            "{:?}",
            report.violations
        );
    }

    #[test]
    fn rejects_out_of_range_values() {
        assert!(SliceMatrix::new(vec![2], 1, 1).is_err());
        assert!(SliceMatrix::new(vec![1, -1], 1, 1).is_err());
    }

    #[test]
    fn graph_constructor_enforces_matching() {
        assert!(DependencyGraph::new(vec![(0, 1), (2, 1)]).is_err());
        assert!(DependencyGraph::new(vec![(3, 3)]).is_err());
        let g = DependencyGraph::new(vec![(4, 2), (0, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (2, 4)]);
    }

    #[test]
    fn validate_is_idempotent() {
        let source = matrix(&[[1, 0, 1]]);
        let target = matrix(&[[-1, 1, 1]]);
        let corr = CorrectionBundle::identity(3);
        let a = validate_inputs(&source, &target, &[], &corr);
        let b = validate_inputs(&source, &target, &[], &corr);
        assert_eq!(a.violations, b.violations);
        assert_eq!(a.warnings, b.warnings);
        // Abstain present without an abstain column: warning, not violation.
        assert!(a.is_clean());
        assert!(a.warnings.iter().any(|w| w.contains("abstain")));
    }

    #[test]
    fn edge_inference_trivial_cases() {
        let one = SliceMatrix::new(vec![1, -1, 1, -1], 4, 1).unwrap();
        assert!(infer_edges(&one, 4).unwrap().is_empty());
        let two = matrix(&[[1, -1, 1], [-1, 1, 1]]);
        assert!(infer_edges(&two, 0).unwrap().is_empty());
    }
}
