//! Shared helpers for the integration-test suite: seeded random model
//! instances, brute-force oracles built on explicit enumeration, and error
//! metrics. Everything here is deliberately naive — loops over all latent
//! configurations — so it can serve as an independent reference for the
//! factorized implementations.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sliceweight::correction::{CorrectionBundle, CorrectionMatrix};
use sliceweight::math::{dot, sign_config};
use sliceweight::model::{enumerate_joint, JointModelParams, PotentialMap, ProbabilityTable};
use sliceweight::slices::{DependencyGraph, SliceMatrix};

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Random matching over k slices: shuffle the indices and pair a random
/// prefix.
pub fn random_matching(rng: &mut ChaCha8Rng, k: usize) -> DependencyGraph {
    let mut idx: Vec<usize> = (0..k).collect();
    idx.shuffle(rng);
    let n_edges = if k < 2 { 0 } else { rng.gen_range(0..=k / 2) };
    let edges: Vec<(usize, usize)> = (0..n_edges)
        .map(|e| (idx[2 * e], idx[2 * e + 1]))
        .collect();
    DependencyGraph::new(edges).expect("disjoint pairs form a matching")
}

/// Random joint model with parameters uniform in [-2, 2] and, optionally,
/// each slice given an abstain state with probability 1/2.
pub fn random_joint_params(
    rng: &mut ChaCha8Rng,
    k: usize,
    allow_abstain: bool,
) -> JointModelParams {
    let graph = random_matching(rng, k);
    let singleton = (0..k).map(|_| uniform(rng, -2.0, 2.0)).collect();
    let noise = (0..k).map(|_| uniform(rng, -2.0, 2.0)).collect();
    let abstain = (0..k)
        .map(|_| {
            if allow_abstain && rng.gen::<f64>() < 0.5 {
                Some(uniform(rng, -2.0, 2.0))
            } else {
                None
            }
        })
        .collect();
    let edge = (0..graph.len()).map(|_| uniform(rng, -2.0, 2.0)).collect();
    JointModelParams::new(singleton, noise, abstain, edge, graph).expect("valid random instance")
}

/// Random column-stochastic correction tables. With probability
/// `degenerate_prob` a column is a point mass, exercising the zero-term
/// skipping in the factorized conditional expectations.
pub fn random_correction(
    rng: &mut ChaCha8Rng,
    k: usize,
    zero_column_prob: f64,
    degenerate_prob: f64,
) -> Vec<CorrectionMatrix> {
    let column = |rng: &mut ChaCha8Rng| -> [f64; 2] {
        if rng.gen::<f64>() < degenerate_prob {
            if rng.gen::<bool>() {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            }
        } else {
            let a = rng.gen::<f64>();
            [a, 1.0 - a]
        }
    };
    (0..k)
        .map(|_| {
            let minus = column(rng);
            let plus = column(rng);
            let zero = (rng.gen::<f64>() < zero_column_prob).then(|| column(rng));
            CorrectionMatrix { minus, zero, plus }
        })
        .collect()
}

/// Random observed pattern; abstains appear with probability `abstain_prob`.
pub fn random_pattern(rng: &mut ChaCha8Rng, k: usize, abstain_prob: f64) -> Vec<i8> {
    (0..k)
        .map(|_| {
            if rng.gen::<f64>() < abstain_prob {
                0
            } else if rng.gen::<bool>() {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// Random slice matrix of fully random rows.
pub fn random_slice_matrix(
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
    abstain_prob: f64,
) -> SliceMatrix {
    let mut values = Vec::with_capacity(n * k);
    for _ in 0..n {
        values.extend(random_pattern(rng, k, abstain_prob));
    }
    SliceMatrix::new(values, n, k).expect("values are in range")
}

/// Latent marginal by full joint enumeration, indexed by the sign mask
/// convention of [`ProbabilityTable`].
pub fn brute_marginal(params: &JointModelParams) -> Vec<f64> {
    let mut probs = vec![0.0; 1 << params.k()];
    for config in enumerate_joint(params).expect("within enumeration limit") {
        let mask = ProbabilityTable::mask_of(&config.g).expect("latent labels are signs");
        probs[mask] += config.prob;
    }
    probs
}

/// p(u | pattern) under the correction tables: conditionally independent
/// point estimates per slice.
pub fn pattern_conditional(corr: &[CorrectionMatrix], pattern: &[i8], u: &[i8]) -> f64 {
    u.iter()
        .zip(pattern)
        .enumerate()
        .map(|(i, (&ui, &beta))| corr[i].prob(ui, beta))
        .product()
}

/// Brute-force conditional expectation E[exp(deltaᵀ phi(u)) | pattern] and
/// the matching tilted mean of phi, by enumeration over all 2^k latent
/// configurations.
pub fn brute_cond_exp(
    map: &PotentialMap,
    corr: &[CorrectionMatrix],
    pattern: &[i8],
    delta: &[f64],
) -> (f64, Vec<f64>) {
    let k = map.k();
    let mut value = 0.0;
    let mut tilted = vec![0.0; map.dim()];
    for mask in 0..(1_usize << k) {
        let u = sign_config(mask, k);
        let p = pattern_conditional(corr, pattern, &u);
        if p == 0.0 {
            continue;
        }
        let phi = map.phi(&u);
        let term = p * dot(delta, &phi).exp();
        value += term;
        for (t, f) in tilted.iter_mut().zip(&phi) {
            *t += term * f;
        }
    }
    for t in &mut tilted {
        *t /= value;
    }
    (value, tilted)
}

/// Brute-force target mean of the corrected potentials.
pub fn brute_target_mean_phi(
    map: &PotentialMap,
    corr: &[CorrectionMatrix],
    target: &SliceMatrix,
) -> Vec<f64> {
    let k = map.k();
    let mut mean = vec![0.0; map.dim()];
    for row in target.rows() {
        for mask in 0..(1_usize << k) {
            let u = sign_config(mask, k);
            let p = pattern_conditional(corr, row, &u);
            if p == 0.0 {
                continue;
            }
            let phi = map.phi(&u);
            for (m, f) in mean.iter_mut().zip(&phi) {
                *m += p * f;
            }
        }
    }
    for m in &mut mean {
        *m /= target.n() as f64;
    }
    mean
}

/// Brute-force ratio objective and gradient: every expectation is an
/// explicit enumeration, every sum runs over raw rows.
pub fn brute_objective(
    map: &PotentialMap,
    corr: &CorrectionBundle,
    target: &SliceMatrix,
    train: &SliceMatrix,
    delta: &[f64],
) -> (f64, Vec<f64>) {
    let m_t = brute_target_mean_phi(map, &corr.target, target);
    let mut denom = 0.0;
    let mut tilt_acc = vec![0.0; map.dim()];
    for row in train.rows() {
        let (e, tilted) = brute_cond_exp(map, &corr.source, row, delta);
        denom += e;
        for (acc, t) in tilt_acc.iter_mut().zip(&tilted) {
            *acc += e * t;
        }
    }
    let value = dot(delta, &m_t) - denom.ln() + (train.n() as f64).ln();
    let grad: Vec<f64> = m_t
        .iter()
        .zip(&tilt_acc)
        .map(|(m, t)| m - t / denom)
        .collect();
    (value, grad)
}

/// Direct implementation of point-mass log-linear KLIEP over observed,
/// fully specified patterns (the identity-correction special case).
pub struct DirectKliep {
    map: PotentialMap,
    target_mean_phi: Vec<f64>,
    train_phis: Vec<Vec<f64>>,
}

impl DirectKliep {
    pub fn new(map: &PotentialMap, target: &SliceMatrix, train: &SliceMatrix) -> Self {
        let mut target_mean_phi = vec![0.0; map.dim()];
        for row in target.rows() {
            for (m, f) in target_mean_phi.iter_mut().zip(&map.phi(row)) {
                *m += f;
            }
        }
        for m in &mut target_mean_phi {
            *m /= target.n() as f64;
        }
        let train_phis = train.rows().map(|row| map.phi(row)).collect();
        Self {
            map: map.clone(),
            target_mean_phi,
            train_phis,
        }
    }

    pub fn objective(&self, delta: &[f64]) -> f64 {
        let n = self.train_phis.len() as f64;
        let denom: f64 = self
            .train_phis
            .iter()
            .map(|phi| dot(delta, phi).exp())
            .sum();
        dot(delta, &self.target_mean_phi) - denom.ln() + n.ln()
    }

    pub fn weights(&self, delta: &[f64], eval: &SliceMatrix) -> Vec<f64> {
        let n = self.train_phis.len() as f64;
        let denom: f64 = self
            .train_phis
            .iter()
            .map(|phi| dot(delta, phi).exp())
            .sum();
        eval.rows()
            .map(|row| n * dot(delta, &self.map.phi(row)).exp() / denom)
            .collect()
    }
}

/// Relative disagreement against a reference value.
pub fn rel_to(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}
