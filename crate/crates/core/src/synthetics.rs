//! Seeded generators for three synthetic benchmark families: a support-shift
//! problem where a spurious indicator defeats classifier-based weighting, a
//! high-dimensional variant padded with irrelevant features, and a
//! noisy-slices problem drawn from the joint slice model with exact
//! correction tables.
//!
//! Every generator is deterministic in its seed: data flows from stream 0 of
//! a counter-based RNG and the Monte-Carlo truth reference from stream 1, so
//! regenerating a bundle is bit-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::baselines::FeatureMatrix;
use crate::correction::{CorrectionBundle, CorrectionMatrix};
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::model::{enumerate_joint, sample_joint, JointModelParams};
use crate::slices::{DependencyGraph, LossVector, SliceMatrix};

/// Sample count for Monte-Carlo truth references.
pub const TRUTH_MC_SAMPLES: usize = 1_000_000;

/// Loss table of the noisy-slices family, indexed by
/// (g_1, g_2) = (-1,-1), (-1,+1), (+1,-1), (+1,+1).
pub const NOISY_SLICES_LOSS_TABLE: [f64; 4] = [0.02, 0.2, 0.9, 0.2];

/// How the bundled ground truth was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthKind {
    /// Exact expectation over an enumerated distribution.
    Analytic,
    /// Mean over [`TRUTH_MC_SAMPLES`] independent draws (conditional-mean
    /// form, so the reference noise is well below 1e-3).
    MonteCarlo,
}

/// Slice-model parameters drawn for one side of the noisy-slices family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaRecord {
    pub theta_singleton: Vec<f64>,
    pub theta_edge: Vec<f64>,
}

/// Everything that parameterized a generated bundle, recorded for
/// reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GeneratorConfig {
    SupportShift {
        p_spurious: f64,
        n: usize,
        feature_variance: f64,
        logistic_coef: f64,
    },
    HighDim {
        d_irrelevant: usize,
        n_source: usize,
        n_target: usize,
    },
    NoisySlices {
        theta_ii: f64,
        n: usize,
        theta_source: ThetaRecord,
        theta_target: ThetaRecord,
        loss_table: [f64; 4],
    },
}

/// One generated experiment: features and slices for both sides, source
/// losses, ground truth, and the correction tables / dependency edges the
/// estimators should use.
#[derive(Debug, Clone)]
pub struct SyntheticBundle {
    pub source_features: FeatureMatrix,
    pub target_features: FeatureMatrix,
    pub source_slices: SliceMatrix,
    pub target_slices: SliceMatrix,
    pub source_loss: LossVector,
    pub true_target_value: f64,
    pub truth_kind: TruthKind,
    pub edges: Vec<(usize, usize)>,
    pub correction: CorrectionBundle,
    pub generator_config: GeneratorConfig,
    pub seed: u64,
}

fn data_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

fn truth_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Support-shift family: one perfectly observed binary slice g, one real
/// feature centered at g, and one spurious indicator that equals 1 with
/// probability `p_spurious` on the source but always on the target. The
/// quantity to estimate is the target mean of a Bernoulli outcome driven by
/// the real feature. The slice-based estimator only sees g; classifier-based
/// weighting sees the spurious column and fails as `p_spurious → 0`.
pub fn gen_support_shift(p_spurious: f64, n: usize, seed: u64) -> Result<SyntheticBundle> {
    if !(p_spurious > 0.0 && p_spurious <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "p_spurious must lie in (0, 1], got {p_spurious}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    let mut rng = data_rng(seed);
    let feature_variance = 0.5 + 1.5 * rng.gen::<f64>();
    let logistic_coef = 1.0 + 2.0 * rng.gen::<f64>();
    let noise = Normal::new(0.0, feature_variance.sqrt()).expect("positive std");

    let side = |p_minus: f64, p_spur: f64, rng: &mut ChaCha8Rng| {
        let mut features = Vec::with_capacity(n);
        let mut slices = Vec::with_capacity(n);
        let mut losses = Vec::with_capacity(n);
        for _ in 0..n {
            let g: i8 = if rng.gen::<f64>() < p_minus { -1 } else { 1 };
            let f1 = g as f64 + noise.sample(rng);
            let spur = if rng.gen::<f64>() < p_spur { 1.0 } else { 0.0 };
            let y = f64::from(rng.gen::<f64>() < sigmoid(logistic_coef * f1));
            features.push(vec![f1, spur]);
            slices.push(g);
            losses.push(y);
        }
        (features, slices, losses)
    };
    let (sf, ss, sl) = side(0.25, p_spurious, &mut rng);
    let (tf, ts, _) = side(0.75, 1.0, &mut rng);

    let mut rng_t = truth_rng(seed);
    let mut acc = 0.0;
    for _ in 0..TRUTH_MC_SAMPLES {
        let g: f64 = if rng_t.gen::<f64>() < 0.75 { -1.0 } else { 1.0 };
        let f1 = g + noise.sample(&mut rng_t);
        acc += sigmoid(logistic_coef * f1);
    }

    Ok(SyntheticBundle {
        source_features: FeatureMatrix::from_rows(&sf)?,
        target_features: FeatureMatrix::from_rows(&tf)?,
        source_slices: SliceMatrix::new(ss, n, 1)?,
        target_slices: SliceMatrix::new(ts, n, 1)?,
        source_loss: LossVector::new(sl)?,
        true_target_value: acc / TRUTH_MC_SAMPLES as f64,
        truth_kind: TruthKind::MonteCarlo,
        edges: vec![],
        correction: CorrectionBundle::identity(1),
        generator_config: GeneratorConfig::SupportShift {
            p_spurious,
            n,
            feature_variance,
            logistic_coef,
        },
        seed,
    })
}

const HIGHDIM_N_SOURCE: usize = 1000;
const HIGHDIM_N_TARGET: usize = 10_000;

/// High-dimension family: the two informative features lie on unit circles
/// whose center depends on the slice label (source 75% positive class,
/// target 25%), padded with `d_irrelevant` Normal(0, 25) columns. The
/// outcome is Bernoulli in the informative features only, so the slice-based
/// estimate is unaffected by d while classifier-based weighting degrades.
pub fn gen_highdim(d_irrelevant: usize, seed: u64) -> Result<SyntheticBundle> {
    let mut rng = data_rng(seed);
    let irr = Normal::new(0.0, 5.0).expect("positive std");
    let coef = 1.0 / 2.0_f64.sqrt();

    let side = |p_minus: f64, n: usize, rng: &mut ChaCha8Rng| {
        let mut features = Vec::with_capacity(n);
        let mut slices = Vec::with_capacity(n);
        let mut losses = Vec::with_capacity(n);
        for _ in 0..n {
            let g: i8 = if rng.gen::<f64>() < p_minus { -1 } else { 1 };
            let angle = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
            let (cx, cy) = if g == 1 { (0.0, 1.0) } else { (-1.0, 0.0) };
            let x1 = cx + angle.cos();
            let x2 = cy + angle.sin();
            let mut row = Vec::with_capacity(2 + d_irrelevant);
            row.push(x1);
            row.push(x2);
            for _ in 0..d_irrelevant {
                row.push(irr.sample(rng));
            }
            let y = f64::from(rng.gen::<f64>() < sigmoid(coef * (x1 + x2)));
            features.push(row);
            slices.push(g);
            losses.push(y);
        }
        (features, slices, losses)
    };
    let (sf, ss, sl) = side(0.25, HIGHDIM_N_SOURCE, &mut rng);
    let (tf, ts, _) = side(0.75, HIGHDIM_N_TARGET, &mut rng);

    let mut rng_t = truth_rng(seed);
    let mut acc = 0.0;
    for _ in 0..TRUTH_MC_SAMPLES {
        let g: i8 = if rng_t.gen::<f64>() < 0.75 { -1 } else { 1 };
        let angle = 2.0 * std::f64::consts::PI * rng_t.gen::<f64>();
        let (cx, cy) = if g == 1 { (0.0, 1.0) } else { (-1.0, 0.0) };
        acc += sigmoid(coef * (cx + angle.cos() + cy + angle.sin()));
    }

    Ok(SyntheticBundle {
        source_features: FeatureMatrix::from_rows(&sf)?,
        target_features: FeatureMatrix::from_rows(&tf)?,
        source_slices: SliceMatrix::new(ss, HIGHDIM_N_SOURCE, 1)?,
        target_slices: SliceMatrix::new(ts, HIGHDIM_N_TARGET, 1)?,
        source_loss: LossVector::new(sl)?,
        true_target_value: acc / TRUTH_MC_SAMPLES as f64,
        truth_kind: TruthKind::MonteCarlo,
        edges: vec![],
        correction: CorrectionBundle::identity(1),
        generator_config: GeneratorConfig::HighDim {
            d_irrelevant,
            n_source: HIGHDIM_N_SOURCE,
            n_target: HIGHDIM_N_TARGET,
        },
        seed,
    })
}

const NOISY_SLICES_N: usize = 100_000;

fn noisy_loss(g: &[i8]) -> f64 {
    let idx = match (g[0], g[1]) {
        (-1, -1) => 0,
        (-1, 1) => 1,
        (1, -1) => 2,
        (1, 1) => 3,
        other => unreachable!("latent labels are signs, got {other:?}"),
    };
    NOISY_SLICES_LOSS_TABLE[idx]
}

/// Exact correction tables p(g_i | g̃_i) of a joint model, by enumeration.
fn exact_correction(params: &JointModelParams) -> Result<Vec<CorrectionMatrix>> {
    let joint = enumerate_joint(params)?;
    let k = params.k();
    let mut tables = Vec::with_capacity(k);
    for i in 0..k {
        let column = |beta: i8| {
            let mut mass = [0.0_f64; 2];
            for c in &joint {
                if c.g_tilde[i] == beta {
                    mass[usize::from(c.g[i] == 1)] += c.prob;
                }
            }
            let total = mass[0] + mass[1];
            [mass[0] / total, mass[1] / total]
        };
        let zero = if params.theta_abstain()[i].is_some() {
            Some(column(0))
        } else {
            None
        };
        tables.push(CorrectionMatrix {
            minus: column(-1),
            zero,
            plus: column(1),
        });
    }
    Ok(tables)
}

/// Noisy-slices family: two latent labels with one observed-pattern edge,
/// slicing functions whose fidelity is controlled by the shared coupling
/// `theta_ii` (0 = pure noise, large = near-perfect), and a loss that is a
/// fixed table over the latent labels. All other model parameters are drawn
/// uniformly in [0, 1], independently per side. The bundle carries the exact
/// enumerated correction tables and the analytic target value.
pub fn gen_noisy_slices(theta_ii: f64, seed: u64) -> Result<SyntheticBundle> {
    if !theta_ii.is_finite() || theta_ii < 0.0 {
        return Err(Error::InvalidInput(format!(
            "theta_ii must be finite and non-negative, got {theta_ii}"
        )));
    }
    let n = NOISY_SLICES_N;
    let mut rng = data_rng(seed);
    let draw_theta = |rng: &mut ChaCha8Rng| ThetaRecord {
        theta_singleton: vec![rng.gen::<f64>(), rng.gen::<f64>()],
        theta_edge: vec![rng.gen::<f64>()],
    };
    let theta_source = draw_theta(&mut rng);
    let theta_target = draw_theta(&mut rng);
    let graph = DependencyGraph::new(vec![(0, 1)])?;
    let make = |theta: &ThetaRecord| {
        JointModelParams::without_abstains(
            theta.theta_singleton.clone(),
            vec![theta_ii; 2],
            theta.theta_edge.clone(),
            graph.clone(),
        )
    };
    let params_s = make(&theta_source)?;
    let params_t = make(&theta_target)?;

    let sample_s = sample_joint(&params_s, n, &mut rng)?;
    let sample_t = sample_joint(&params_t, n, &mut rng)?;
    let losses: Vec<f64> = (0..n).map(|r| noisy_loss(sample_s.latent.row(r))).collect();

    let truth = enumerate_joint(&params_t)?
        .iter()
        .map(|c| c.prob * noisy_loss(&c.g))
        .sum();

    Ok(SyntheticBundle {
        source_features: FeatureMatrix::from_slices(&sample_s.observed),
        target_features: FeatureMatrix::from_slices(&sample_t.observed),
        source_slices: sample_s.observed,
        target_slices: sample_t.observed,
        source_loss: LossVector::new(losses)?,
        true_target_value: truth,
        truth_kind: TruthKind::Analytic,
        edges: vec![(0, 1)],
        correction: CorrectionBundle {
            source: exact_correction(&params_s)?,
            target: exact_correction(&params_t)?,
        },
        generator_config: GeneratorConfig::NoisySlices {
            theta_ii,
            n,
            theta_source,
            theta_target,
            loss_table: NOISY_SLICES_LOSS_TABLE,
        },
        seed,
    })
}
