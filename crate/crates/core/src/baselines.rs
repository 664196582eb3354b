//! Reference importance-weight estimators operating on real-valued features:
//! a logistic-classifier ratio (CBIW), kernel mean matching (KMM),
//! unconstrained least-squares importance fitting (uLSIF), and the simple
//! slice-frequency ratio. These are the comparison points for the
//! noise-aware slice-based estimator.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kliep::PatternTable;
use crate::math::sigmoid;
use crate::opt::{maximize, OptimizerConfig};
use crate::slices::SliceMatrix;
use crate::weights::WeightVector;

/// Largest source sample KMM accepts; the Gram matrix is materialized, so
/// this is also a memory bound (10000² doubles ≈ 800 MB). Callers with more
/// rows must subsample first.
pub const KMM_MAX_SOURCE_ROWS: usize = 10_000;

/// Feature-count threshold below which the logistic fit uses exact Newton
/// steps; above it, memory and cubic solves favor the quasi-Newton path.
const IRLS_MAX_FEATURES: usize = 200;

/// Logit magnitude at which the classifier is treated as (nearly) separating
/// the samples; weights are still finite but dominated by a few examples.
const SEPARATION_LOGIT: f64 = 30.0;

/// Clamp on classifier logits before exponentiation.
const LOGIT_CLAMP: f64 = 500.0;

/// Dense n x p matrix of finite real features. Source and target matrices in
/// one comparison must agree in p.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "feature matrix must be non-empty, got {} x {}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "feature matrix contains a non-finite value".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput("ragged feature rows".into()));
        }
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput("feature matrix must be non-empty".into()));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    /// Casts slice values in {-1, 0, +1} to reals.
    pub fn from_slices(slices: &SliceMatrix) -> Self {
        Self {
            values: DMatrix::from_fn(slices.n(), slices.k(), |i, j| slices.get(i, j) as f64),
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Selects the rows in `idx` order.
    pub fn subset(&self, idx: &[usize]) -> Result<FeatureMatrix> {
        for &i in idx {
            if i >= self.n() {
                return Err(Error::InvalidInput(format!(
                    "feature row index {i} out of range"
                )));
            }
        }
        if idx.is_empty() {
            return Err(Error::InvalidInput("empty row subset".into()));
        }
        Ok(FeatureMatrix {
            values: DMatrix::from_fn(idx.len(), self.p(), |i, j| self.values[(idx[i], j)]),
        })
    }
}

/// Centers and scales both matrices by per-column mean and standard deviation
/// computed on the pooled rows (population convention). Columns with pooled
/// standard deviation below 1e-12 are left unscaled to avoid amplifying
/// noise.
pub fn standardize_pooled(
    source: &FeatureMatrix,
    target: &FeatureMatrix,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let p = source.p();
    if target.p() != p {
        return Err(Error::InvalidInput(format!(
            "source has {p} features but target has {}",
            target.p()
        )));
    }
    let n = (source.n() + target.n()) as f64;
    let mut mean = vec![0.0; p];
    let mut sq = vec![0.0; p];
    for m in [source, target] {
        for row in m.values.row_iter() {
            for (j, v) in row.iter().enumerate() {
                mean[j] += v;
                sq[j] += v * v;
            }
        }
    }
    let mut std = vec![0.0; p];
    for j in 0..p {
        mean[j] /= n;
        std[j] = (sq[j] / n - mean[j] * mean[j]).max(0.0).sqrt();
        if std[j] < 1e-12 {
            std[j] = 1.0;
        }
    }
    let apply = |m: &FeatureMatrix| FeatureMatrix {
        values: DMatrix::from_fn(m.n(), p, |i, j| (m.values[(i, j)] - mean[j]) / std[j]),
    };
    Ok((apply(source), apply(target)))
}

/// Weights plus any advisory warnings the fit produced.
#[derive(Debug, Clone)]
pub struct WeightOutput {
    pub weights: WeightVector,
    pub warnings: Vec<String>,
}

// ---------------------------------------------------------------------------
// CBIW: classifier-based importance weighting.
// ---------------------------------------------------------------------------

struct LogisticProblem<'a> {
    s: &'a DMatrix<f64>,
    t: &'a DMatrix<f64>,
    c: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticProblem<'_> {
    fn p(&self) -> usize {
        self.s.ncols()
    }

    /// Ridge-penalized negative log-likelihood (to minimize) and its
    /// gradient. The parameter layout is [feature coefficients..., intercept];
    /// the intercept is unpenalized.
    fn eval(&self, w_full: &[f64], grad: &mut [f64]) -> f64 {
        let p = self.p();
        let w = DVector::from_column_slice(&w_full[..p]);
        let b = w_full[p];
        let f_s = (self.s * &w).add_scalar(b);
        let f_t = (self.t * &w).add_scalar(b);
        let mut obj = 0.5 * w.norm_squared();
        // Source rows carry label -1, target rows +1.
        let sig_s = f_s.map(|f| {
            obj += self.c * softplus(f);
            sigmoid(f)
        });
        let sig_t = f_t.map(|f| {
            obj += self.c * softplus(-f);
            sigmoid(-f)
        });
        let g_feat = &w + (self.s.tr_mul(&sig_s) - self.t.tr_mul(&sig_t)) * self.c;
        grad[..p].copy_from_slice(g_feat.as_slice());
        grad[p] = self.c * (sig_s.sum() - sig_t.sum());
        obj
    }

    /// Exact damped Newton iteration; practical for small p.
    fn fit_newton(&self, tol: f64, max_iters: usize) -> (Vec<f64>, bool) {
        let p = self.p();
        let dim = p + 1;
        let aug = |m: &DMatrix<f64>| {
            let mut a = DMatrix::zeros(m.nrows(), dim);
            a.view_mut((0, 0), (m.nrows(), p)).copy_from(m);
            a.column_mut(p).fill(1.0);
            a
        };
        let s_aug = aug(self.s);
        let t_aug = aug(self.t);
        let mut w = vec![0.0; dim];
        let mut grad = vec![0.0; dim];
        let mut obj = self.eval(&w, &mut grad);
        for _ in 0..max_iters {
            if grad.iter().all(|g| g.abs() <= tol) {
                return (w, true);
            }
            let wv = DVector::from_column_slice(&w[..p]);
            let b = w[p];
            let mut hess = DMatrix::<f64>::zeros(dim, dim);
            for (m, aug_m) in [(self.s, &s_aug), (self.t, &t_aug)] {
                let f = (m * &wv).add_scalar(b);
                let mut scaled = aug_m.clone();
                for (i, fi) in f.iter().enumerate() {
                    let r = (sigmoid(*fi) * sigmoid(-*fi)).max(1e-12);
                    scaled.row_mut(i).scale_mut(r);
                }
                hess += aug_m.tr_mul(&scaled) * self.c;
            }
            for j in 0..p {
                hess[(j, j)] += 1.0;
            }
            let g = DVector::from_column_slice(&grad);
            let Some(chol) = nalgebra::Cholesky::new(hess) else {
                return (w, false);
            };
            let step = chol.solve(&g);
            // Backtrack until the objective stops increasing. The slack
            // admits rounding-level increases: near the optimum the true
            // decrease of a full Newton step falls below one ulp of the
            // objective, and rejecting those steps would freeze the gradient
            // around sqrt(eps) instead of letting it reach the tolerance.
            let slack = 1e-12 * obj.abs().max(1.0);
            let mut alpha = 1.0;
            let mut trial = vec![0.0; dim];
            let mut trial_grad = vec![0.0; dim];
            let mut improved = false;
            for _ in 0..40 {
                for i in 0..dim {
                    trial[i] = w[i] - alpha * step[i];
                }
                let trial_obj = self.eval(&trial, &mut trial_grad);
                if trial_obj.is_finite() && trial_obj <= obj + slack {
                    w.copy_from_slice(&trial);
                    grad.copy_from_slice(&trial_grad);
                    obj = trial_obj;
                    improved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !improved {
                return (w, grad.iter().all(|g| g.abs() <= tol));
            }
        }
        let converged = grad.iter().all(|g| g.abs() <= tol);
        (w, converged)
    }

    /// Quasi-Newton fallback for wide feature matrices.
    fn fit_lbfgs(&self, tol: f64, max_iters: usize) -> Result<(Vec<f64>, bool)> {
        let dim = self.p() + 1;
        let cfg = OptimizerConfig {
            max_iters,
            grad_tol: tol,
            ..OptimizerConfig::default()
        };
        let result = maximize(|x, g| {
            let obj = self.eval(x, g);
            for gi in g.iter_mut() {
                *gi = -*gi;
            }
            -obj
        }, &vec![0.0; dim], &cfg)?;
        let mut grad = vec![0.0; dim];
        self.eval(&result.x, &mut grad);
        let converged = grad.iter().all(|g| g.abs() <= tol);
        Ok((result.x, converged))
    }
}

/// Classifier-based importance weighting: fit a ridge-penalized logistic
/// classifier separating source (label 0) from target (label 1) rows on
/// pooled-standardized features, then weight each source example by
/// `(n_s/n_t) exp(logit)`, its estimated target/source odds. `inverse_reg`
/// scales the data term against a fixed 0.5 ||w||² penalty (larger means
/// weaker regularization); the intercept is unpenalized.
///
/// The `n_s/n_t` factor cancels under self-normalization; it is kept so raw
/// weights approximate the density ratio itself.
///
/// Near-separable samples are the known failure mode of this estimator: the
/// weights stay finite under the penalty but concentrate on the few examples
/// the classifier cannot place, and a warning is emitted.
pub fn cbiw_weights(
    source: &FeatureMatrix,
    target: &FeatureMatrix,
    inverse_reg: f64,
    normalize: bool,
) -> Result<WeightOutput> {
    if !(inverse_reg.is_finite() && inverse_reg > 0.0) {
        return Err(Error::InvalidInput(format!(
            "inverse regularization strength must be positive, got {inverse_reg}"
        )));
    }
    let (s, t) = standardize_pooled(source, target)?;
    let problem = LogisticProblem {
        s: s.values(),
        t: t.values(),
        c: inverse_reg,
    };
    let mut warnings = Vec::new();
    let (w_full, converged) = if source.p() <= IRLS_MAX_FEATURES {
        problem.fit_newton(1e-8, 100)
    } else {
        problem.fit_lbfgs(1e-8, 2000)?
    };
    if !converged {
        warnings.push("classifier fit stopped short of gradient tolerance 1e-8".into());
    }

    let p = source.p();
    let w = DVector::from_column_slice(&w_full[..p]);
    let logits = (s.values() * &w).add_scalar(w_full[p]);
    let max_abs_logit = logits.iter().fold(0.0_f64, |m, f| m.max(f.abs()));
    if max_abs_logit >= SEPARATION_LOGIT {
        warnings.push(format!(
            "source and target are (nearly) separable: max |logit| = {max_abs_logit:.1}; \
             weights concentrate on a few examples"
        ));
    }
    let scale = source.n() as f64 / target.n() as f64;
    let raw: Vec<f64> = logits
        .iter()
        .map(|f| scale * f.clamp(-LOGIT_CLAMP, LOGIT_CLAMP).exp())
        .collect();
    Ok(WeightOutput {
        weights: WeightVector::from_raw(raw, normalize)?,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// KMM: kernel mean matching.
// ---------------------------------------------------------------------------

fn gaussian_gram(m: &DMatrix<f64>, width: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let norms: Vec<f64> = m.row_iter().map(|r| r.norm_squared()).collect();
    let mut k = m * m.transpose();
    let inv = 1.0 / (2.0 * width * width);
    for i in 0..n {
        for j in 0..n {
            let d2 = (norms[i] + norms[j] - 2.0 * k[(i, j)]).max(0.0);
            k[(i, j)] = (-d2 * inv).exp();
        }
    }
    k
}

/// Mean kernel value against the target sample, per source row; the target
/// cross-kernel is streamed rather than materialized.
fn target_kernel_mean(s: &DMatrix<f64>, t: &DMatrix<f64>, width: f64) -> DVector<f64> {
    let s_norms: Vec<f64> = s.row_iter().map(|r| r.norm_squared()).collect();
    let inv = 1.0 / (2.0 * width * width);
    let mut acc = DVector::zeros(s.nrows());
    for t_row in t.row_iter() {
        let t_norm = t_row.norm_squared();
        let cross = s * t_row.transpose();
        for i in 0..s.nrows() {
            let d2 = (s_norms[i] + t_norm - 2.0 * cross[i]).max(0.0);
            acc[i] += (-d2 * inv).exp();
        }
    }
    acc / t.nrows() as f64
}

/// Euclidean projection onto `{0 ≤ w ≤ box_max, lo ≤ Σw ≤ hi}` by shifting
/// before clipping: the KKT solution is `clip(v - nu)` with `nu` found by
/// bisection on the monotone sum.
fn project_kmm(v: &mut DVector<f64>, box_max: f64, lo: f64, hi: f64) {
    let clipped_sum = |nu: f64, v: &DVector<f64>| -> f64 {
        v.iter().map(|x| (x - nu).clamp(0.0, box_max)).sum()
    };
    let s0 = clipped_sum(0.0, v);
    let nu = if s0 > hi {
        // Shift down until the sum reaches hi.
        let (mut a, mut b) = (0.0, v.max() + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if clipped_sum(mid, v) > hi {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    } else if s0 < lo {
        // Shift up until the sum reaches lo.
        let (mut a, mut b) = (v.min() - box_max - 1.0, 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if clipped_sum(mid, v) < lo {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    } else {
        0.0
    };
    for x in v.iter_mut() {
        *x = (*x - nu).clamp(0.0, box_max);
    }
}

/// Default slack for the mean constraint of kernel mean matching,
/// `(√n_s - 1)/√n_s`: tight enough to keep the weights centered, loose
/// enough to be satisfiable at small n.
pub fn default_kmm_eps(n_source: usize) -> f64 {
    let root = (n_source as f64).sqrt();
    (root - 1.0) / root
}

/// Kernel mean matching: minimize the RKHS distance between the weighted
/// source kernel mean `(1/n_s) Σ w_i k(x_i, ·)` and the target kernel mean,
/// subject to `0 ≤ w_i ≤ box_max` and `|Σ w_i / n_s - 1| ≤ eps`, by projected
/// gradient descent with a guaranteed-stable step (the Lipschitz constant is
/// bounded by the Gram row-sum norm). Features are pooled-standardized first.
///
/// Weights are returned raw (they average about 1); normalize downstream for
/// the self-normalized estimator.
pub fn kmm_weights(
    source: &FeatureMatrix,
    target: &FeatureMatrix,
    kernel_width: f64,
    box_max: f64,
    eps: f64,
) -> Result<WeightOutput> {
    if source.n() > KMM_MAX_SOURCE_ROWS {
        return Err(Error::InvalidInput(format!(
            "kernel mean matching materializes an n_s x n_s Gram matrix; n_s = {} exceeds \
             the {KMM_MAX_SOURCE_ROWS}-row cap — subsample the source first",
            source.n()
        )));
    }
    if !(kernel_width.is_finite() && kernel_width > 0.0) {
        return Err(Error::InvalidInput(format!(
            "kernel width must be positive, got {kernel_width}"
        )));
    }
    if !(box_max.is_finite() && box_max > 0.0) || !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidInput(
            "box bound must be positive and eps non-negative".into(),
        ));
    }
    let (s, t) = standardize_pooled(source, target)?;
    let n_s = s.n() as f64;
    let k = gaussian_gram(s.values(), kernel_width);
    let kappa = target_kernel_mean(s.values(), t.values(), kernel_width);

    // Objective F(w) = (1/n_s²) w'Kw - (2/(n_s n_t)) w'K_st 1 + const;
    // grad F = (2/n_s²) (Kw - n_s kappa).
    let lipschitz = {
        let max_row_sum = (0..k.nrows())
            .map(|i| k.row(i).iter().sum::<f64>())
            .fold(0.0_f64, f64::max);
        2.0 * max_row_sum / (n_s * n_s)
    };
    let step = 1.0 / lipschitz;
    let (lo, hi) = (n_s * (1.0 - eps), n_s * (1.0 + eps));

    let mut w = DVector::from_element(s.n(), 1.0);
    let mut warnings = Vec::new();
    let mut converged = false;
    for _ in 0..50_000 {
        let grad = (&k * &w - &kappa * n_s) * (2.0 / (n_s * n_s));
        let mut next = &w - grad * step;
        project_kmm(&mut next, box_max, lo, hi);
        let sup_change = (&next - &w).amax();
        w = next;
        if sup_change <= 1e-6 {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(
            "projected gradient did not reach the 1e-6 movement tolerance within 50000 \
             iterations; returning the last iterate"
                .into(),
        );
    }
    Ok(WeightOutput {
        weights: WeightVector::from_raw(w.as_slice().to_vec(), false)?,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// uLSIF: unconstrained least-squares importance fitting.
// ---------------------------------------------------------------------------

/// Median pairwise distance across a bounded seeded subsample of both sides;
/// the conventional kernel-width heuristic. Falls back to 1.0 when the
/// subsample is degenerate.
fn median_heuristic_width(
    s: &DMatrix<f64>,
    t: &DMatrix<f64>,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut rows: Vec<DVector<f64>> = Vec::new();
    for m in [s, t] {
        let take = m.nrows().min(200);
        let idx = rand::seq::index::sample(rng, m.nrows(), take);
        for i in idx {
            rows.push(m.row(i).transpose());
        }
    }
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            dists.push((&rows[i] - &rows[j]).norm());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    match dists.get(dists.len() / 2) {
        Some(&m) if m > 1e-12 => m,
        _ => 1.0,
    }
}

fn gaussian_features(
    m: &DMatrix<f64>,
    centers: &[DVector<f64>],
    width: f64,
) -> DMatrix<f64> {
    // One Gaussian bump per center.
    let inv = 1.0 / (2.0 * width * width);
    let mut phi = DMatrix::zeros(m.nrows(), centers.len());
    for (i, row) in m.row_iter().enumerate() {
        for (c, center) in centers.iter().enumerate() {
            let d2 = row
                .iter()
                .zip(center.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            phi[(i, c)] = (-d2 * inv).exp();
        }
    }
    phi
}

/// Least-squares density-ratio fitting: express the ratio as a combination of
/// Gaussian bumps centered on a seeded subsample of target rows, solve the
/// ridge system `(H + λI) α = h` where `H` is the source second-moment matrix
/// of the basis and `h` the target basis mean, clamp negative coefficients to
/// zero, and evaluate the expansion at the source rows. All basis functions
/// and clamped coefficients are non-negative, so the weights are too; as
/// `λ → ∞` every coefficient shrinks to zero and the raw weights flatten
/// toward a common value.
///
/// A singular system retries with λ ×10 up to 3 times. Weights are returned
/// raw; normalize downstream.
pub fn ulsif_weights(
    source: &FeatureMatrix,
    target: &FeatureMatrix,
    n_basis: usize,
    lambda: f64,
    seed: u64,
) -> Result<WeightOutput> {
    if n_basis == 0 || n_basis > target.n() {
        return Err(Error::InvalidInput(format!(
            "n_basis must lie in [1, n_t = {}], got {n_basis}",
            target.n()
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    let (s, t) = standardize_pooled(source, target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut center_idx: Vec<usize> =
        rand::seq::index::sample(&mut rng, t.n(), n_basis).into_vec();
    center_idx.sort_unstable();
    let centers: Vec<DVector<f64>> = center_idx
        .iter()
        .map(|&i| t.values().row(i).transpose())
        .collect();
    let width = median_heuristic_width(s.values(), t.values(), &mut rng);
    let phi_s = gaussian_features(s.values(), &centers, width);
    let phi_t = gaussian_features(t.values(), &centers, width);
    let dim = centers.len();
    let h_mat = phi_s.tr_mul(&phi_s) / s.n() as f64;
    let h_vec = phi_t.row_sum().transpose() / t.n() as f64;

    let mut warnings = Vec::new();
    let mut lam = lambda;
    let mut alpha = None;
    for attempt in 0..4 {
        let mut system = h_mat.clone();
        for j in 0..dim {
            system[(j, j)] += lam;
        }
        if let Some(chol) = nalgebra::Cholesky::new(system) {
            alpha = Some(chol.solve(&h_vec));
            if attempt > 0 {
                warnings.push(format!(
                    "ridge system was singular; lambda increased to {lam}"
                ));
            }
            break;
        }
        lam *= 10.0;
    }
    let Some(mut alpha) = alpha else {
        return Err(Error::LinearSolve(format!(
            "ridge system stayed singular up to lambda = {lam}"
        )));
    };
    for j in 0..dim {
        if alpha[j] < 0.0 {
            alpha[j] = 0.0;
        }
    }
    let raw: Vec<f64> = (&phi_s * &alpha).iter().copied().collect();
    Ok(WeightOutput {
        weights: WeightVector::from_raw(raw, false)?,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Simple slice-frequency baseline.
// ---------------------------------------------------------------------------

/// Weights each source example by the ratio of its exact slice pattern's
/// target frequency to its source frequency. Patterns absent from the target
/// get weight zero; target patterns absent from the source are reported as a
/// warning because their mass cannot be represented by any reweighting.
/// Returned weights are normalized to sum to one.
pub fn simple_slice_weights(source: &SliceMatrix, target: &SliceMatrix) -> Result<WeightOutput> {
    if source.k() != target.k() {
        return Err(Error::InvalidInput(format!(
            "source has k = {} slices but target has {}",
            source.k(),
            target.k()
        )));
    }
    let src = PatternTable::from_rows(source);
    let tgt = PatternTable::from_rows(target);
    let (n_s, n_t) = (source.n() as f64, target.n() as f64);

    let mut warnings = Vec::new();
    let missing: Vec<String> = tgt
        .iter()
        .filter(|(pattern, _)| src.index_of(pattern).is_none())
        .map(|(pattern, count)| format!("{pattern:?} (target count {count})"))
        .collect();
    if !missing.is_empty() {
        let shown = missing.iter().take(10).cloned().collect::<Vec<_>>().join(", ");
        let suffix = if missing.len() > 10 {
            format!(" (and {} more)", missing.len() - 10)
        } else {
            String::new()
        };
        warnings.push(format!(
            "{} target pattern(s) never occur in the source and their mass cannot be \
             reweighted onto it: {shown}{suffix}",
            missing.len()
        ));
    }

    let ratio_per_pattern: Vec<f64> = (0..src.len())
        .map(|idx| {
            let src_freq = src.count(idx) as f64 / n_s;
            let tgt_freq = tgt
                .index_of(src.pattern(idx))
                .map_or(0.0, |j| tgt.count(j) as f64 / n_t);
            tgt_freq / src_freq
        })
        .collect();
    let raw: Vec<f64> = src
        .assignments()
        .iter()
        .map(|&id| ratio_per_pattern[id])
        .collect();
    Ok(WeightOutput {
        weights: WeightVector::from_raw(raw, true)?,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_features(n: usize) -> FeatureMatrix {
        // Deterministic, well-spread 2-D rows.
        FeatureMatrix::from_rows(
            &(0..n)
                .map(|i| {
                    let x = i as f64 / n as f64;
                    vec![x * 2.0 - 1.0, (7.3 * x).sin()]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn standardize_produces_zero_mean_unit_variance_pooled() {
        let s = grid_features(40);
        let t = grid_features(60);
        let (ss, tt) = standardize_pooled(&s, &t).unwrap();
        for j in 0..2 {
            let vals: Vec<f64> = ss
                .values()
                .column(j)
                .iter()
                .chain(tt.values().column(j).iter())
                .copied()
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn cbiw_identical_samples_give_uniform_weights() {
        let s = grid_features(50);
        let out = cbiw_weights(&s, &s, 1.0, true).unwrap();
        for w in out.weights.weights() {
            assert!((w - 1.0 / 50.0).abs() < 1e-6, "{w}");
        }
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
    }

    #[test]
    fn cbiw_binary_feature_matches_odds_ratio() {
        // Source 25% positive, target 75% positive on one binary feature.
        let mk = |pos: usize, neg: usize| {
            FeatureMatrix::from_rows(
                &std::iter::repeat(vec![1.0])
                    .take(pos)
                    .chain(std::iter::repeat(vec![0.0]).take(neg))
                    .collect::<Vec<_>>(),
            )
            .unwrap()
        };
        let source = mk(500, 1500);
        let target = mk(1500, 500);
        let out = cbiw_weights(&source, &target, 1.0, false).unwrap();
        let w = out.weights.weights();
        let ratio = w[0] / w[1999];
        assert!((ratio - 9.0).abs() / 9.0 < 0.05, "ratio {ratio}");
    }

    #[test]
    fn kmm_identical_samples_give_uniform_weights() {
        let s = grid_features(80);
        let out = kmm_weights(&s, &s, 1.0, 1000.0, 0.1).unwrap();
        for w in out.weights.weights() {
            assert!((w - 1.0).abs() < 1e-3, "{w}");
        }
    }

    #[test]
    fn kmm_respects_constraints() {
        let s = grid_features(60);
        let t = FeatureMatrix::from_rows(
            &(0..90)
                .map(|i| {
                    let x = i as f64 / 90.0;
                    vec![x * 2.0 - 0.2, (5.1 * x).cos()]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let (box_max, eps) = (2.5, 0.05);
        let out = kmm_weights(&s, &t, 1.0, box_max, eps).unwrap();
        let w = out.weights.weights();
        assert!(w.iter().all(|&x| (0.0..=box_max + 1e-12).contains(&x)));
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        assert!((mean - 1.0).abs() <= eps + 1e-9, "mean {mean}");
    }

    #[test]
    fn ulsif_identical_samples_give_near_constant_weights() {
        let s = grid_features(120);
        let out = ulsif_weights(&s, &s, 100, 0.1, 3).unwrap();
        let w = out.weights.weights();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w.len() as f64;
        // Constant up to kernel-approximation slack: low dispersion overall,
        // with only a mild dip allowed at the edges of the support.
        assert!(var.sqrt() / mean < 0.10, "cv {}", var.sqrt() / mean);
        for v in w {
            assert!((v - mean).abs() / mean < 0.25, "{v} vs mean {mean}");
        }
    }

    #[test]
    fn ulsif_infinite_shrinkage_is_uniform() {
        // Every coefficient is crushed toward zero, so the raw weights all
        // collapse to a common (vanishing) value.
        let s = grid_features(50);
        let t = grid_features(70);
        let out = ulsif_weights(&s, &t, 20, 1e12, 5).unwrap();
        let w = out.weights.weights();
        for v in w {
            assert!((v - w[0]).abs() < 1e-9, "{v} vs {}", w[0]);
            assert!(*v < 1e-6, "{v}");
        }
    }

    #[test]
    fn simple_weights_frozen_frequency_ratio() {
        let source = SliceMatrix::from_rows(&[vec![1], vec![-1], vec![-1], vec![-1]]).unwrap();
        let target = SliceMatrix::from_rows(&[vec![1], vec![1], vec![1], vec![-1]]).unwrap();
        let out = simple_slice_weights(&source, &target).unwrap();
        // Raw ratios 3 and 1/3; m_hat records the raw maximum.
        assert!((out.weights.m_hat() - 3.0).abs() < 1e-12);
        let w = out.weights.weights();
        assert!((w[0] - 0.75).abs() < 1e-12);
        for v in &w[1..] {
            assert!((v - 1.0 / 12.0).abs() < 1e-12);
        }
    }

    #[test]
    fn simple_warns_on_unrepresentable_target_pattern() {
        let source = SliceMatrix::from_rows(&[vec![1], vec![1]]).unwrap();
        let target = SliceMatrix::from_rows(&[vec![1], vec![-1]]).unwrap();
        let out = simple_slice_weights(&source, &target).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("[-1]"), "{}", out.warnings[0]);
    }
}
