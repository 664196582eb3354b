//! Independent checks of the noise-aware ratio objective: factorized
//! conditional expectations against exhaustive enumeration, analytic
//! gradients against finite differences, concavity along random segments,
//! and exact reduction to point-mass log-linear KLIEP under identity
//! corrections.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sliceweight::correction::CorrectionBundle;
use sliceweight::kliep::{cond_mean_exp, RatioProblem, SolverConfig};
use sliceweight::model::PotentialMap;
use sliceweight::slices::DependencyGraph;

use common::{
    brute_cond_exp, brute_objective, random_correction, random_matching,
    random_pattern, random_slice_matrix, rel_to, uniform, DirectKliep,
};

fn random_map(rng: &mut ChaCha8Rng, k: usize) -> PotentialMap {
    PotentialMap::new(k, &random_matching(rng, k))
}

fn random_delta(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| uniform(rng, -scale, scale)).collect()
}

#[test]
fn conditional_expectation_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    for instance in 0..120 {
        let k = rng.gen_range(1..=8);
        let map = random_map(&mut rng, k);
        let corr = random_correction(&mut rng, k, 0.6, 0.15);
        let pattern = random_pattern(&mut rng, k, 0.25);
        let delta = random_delta(&mut rng, map.dim(), 1.5);
        let fast = cond_mean_exp(&map, &corr, &pattern, &delta);
        let (reference, tilted_ref) = brute_cond_exp(&map, &corr, &pattern, &delta);
        let err = rel_to(fast.log_value.exp(), reference);
        assert!(
            err <= 1e-10,
            "instance {instance} (k = {k}): value disagrees by {err:e}"
        );
        for (pos, (a, b)) in fast.tilted_phi_mean.iter().zip(&tilted_ref).enumerate() {
            assert!(
                (a - b).abs() <= 1e-10 * b.abs().max(1.0),
                "instance {instance}: tilted mean coordinate {pos}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn objective_and_gradient_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    for instance in 0..40 {
        let k = rng.gen_range(1..=5);
        let map = random_map(&mut rng, k);
        let corr = CorrectionBundle {
            source: random_correction(&mut rng, k, 0.5, 0.1),
            target: random_correction(&mut rng, k, 0.5, 0.1),
        };
        let n_t = rng.gen_range(20..60);
        let n_s = rng.gen_range(20..60);
        let target = random_slice_matrix(&mut rng, n_t, k, 0.2);
        let train = random_slice_matrix(&mut rng, n_s, k, 0.2);
        let problem = RatioProblem::new(&target, &train, &map, &corr).unwrap();
        let delta = random_delta(&mut rng, map.dim(), 1.0);
        let (ref_value, ref_grad) = brute_objective(&map, &corr, &target, &train, &delta);
        let mut grad = vec![0.0; map.dim()];
        let value = problem.objective_and_gradient(&delta, &mut grad);
        assert!(
            (value - ref_value).abs() <= 1e-10 * ref_value.abs().max(1.0),
            "instance {instance}: objective {value} vs {ref_value}"
        );
        for (pos, (a, b)) in grad.iter().zip(&ref_grad).enumerate() {
            assert!(
                (a - b).abs() <= 1e-10 * b.abs().max(1.0),
                "instance {instance}: gradient coordinate {pos}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(72);
    let h = 1e-5;
    for instance in 0..20 {
        let k = rng.gen_range(1..=5);
        let map = random_map(&mut rng, k);
        let corr = CorrectionBundle {
            source: random_correction(&mut rng, k, 0.4, 0.0),
            target: random_correction(&mut rng, k, 0.4, 0.0),
        };
        let target = random_slice_matrix(&mut rng, 40, k, 0.2);
        let train = random_slice_matrix(&mut rng, 40, k, 0.2);
        let problem = RatioProblem::new(&target, &train, &map, &corr).unwrap();
        let delta = random_delta(&mut rng, map.dim(), 1.0);
        let grad = problem.gradient(&delta);
        for i in 0..map.dim() {
            let mut plus = delta.clone();
            plus[i] += h;
            let mut minus = delta.clone();
            minus[i] -= h;
            let fd = (problem.objective(&plus) - problem.objective(&minus)) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() <= 1e-6 * grad[i].abs().max(1.0),
                "instance {instance}, coordinate {i}: finite difference {fd} vs analytic {}",
                grad[i]
            );
        }
    }
}

#[test]
fn objective_is_concave_along_random_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    for _ in 0..5 {
        let k = rng.gen_range(1..=4);
        let map = random_map(&mut rng, k);
        let corr = CorrectionBundle {
            source: random_correction(&mut rng, k, 0.5, 0.1),
            target: random_correction(&mut rng, k, 0.5, 0.1),
        };
        let target = random_slice_matrix(&mut rng, 30, k, 0.2);
        let train = random_slice_matrix(&mut rng, 30, k, 0.2);
        let problem = RatioProblem::new(&target, &train, &map, &corr).unwrap();
        for _ in 0..50 {
            let a = random_delta(&mut rng, map.dim(), 2.0);
            let b = random_delta(&mut rng, map.dim(), 2.0);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let chord = 0.5 * (problem.objective(&a) + problem.objective(&b));
            assert!(
                problem.objective(&mid) >= chord - 1e-9,
                "midpoint value fell below the chord"
            );
        }
    }
}

#[test]
fn identity_corrections_reduce_to_point_mass_kliep() {
    let mut rng = ChaCha8Rng::seed_from_u64(74);
    for instance in 0..20 {
        let k = rng.gen_range(1..=4);
        let map = random_map(&mut rng, k);
        let corr = CorrectionBundle::identity(k);
        let n_t = rng.gen_range(20..50);
        let n_s = rng.gen_range(20..50);
        let target = random_slice_matrix(&mut rng, n_t, k, 0.0);
        let train = random_slice_matrix(&mut rng, n_s, k, 0.0);
        let problem = RatioProblem::new(&target, &train, &map, &corr).unwrap();
        let direct = DirectKliep::new(&map, &target, &train);

        // Objectives agree at random probe points.
        for _ in 0..10 {
            let delta = random_delta(&mut rng, map.dim(), 1.5);
            let err = (problem.objective(&delta) - direct.objective(&delta)).abs();
            assert!(err <= 1e-12, "instance {instance}: objectives differ by {err:e}");
        }

        // Weights agree at the fitted optimum.
        let solved = problem.solve(&SolverConfig::default()).unwrap();
        let weights = problem.weights(&solved.delta, &train, false).unwrap();
        let reference = direct.weights(&solved.delta.delta, &train);
        for (row, (w, r)) in weights.weights().iter().zip(&reference).enumerate() {
            assert!(
                (w - r).abs() <= 1e-12 * r.abs().max(1.0),
                "instance {instance}, row {row}: weight {w} vs {r}"
            );
        }
    }
}

#[test]
fn solver_recovers_a_known_shift() {
    // Single perfectly observed slice: the true log ratio is linear in g, so
    // the fitted weights must reproduce the frequency ratio exactly in the
    // infinite-data limit and closely at n = 20000.
    let mut rng = ChaCha8Rng::seed_from_u64(75);
    let k = 1;
    let map = PotentialMap::new(k, &DependencyGraph::empty());
    let corr = CorrectionBundle::identity(k);
    let draw = |p_plus: f64, n: usize, rng: &mut ChaCha8Rng| {
        let values: Vec<i8> = (0..n)
            .map(|_| if rng.gen::<f64>() < p_plus { 1 } else { -1 })
            .collect();
        sliceweight::slices::SliceMatrix::new(values, n, 1).unwrap()
    };
    let source = draw(0.7, 20_000, &mut rng);
    let target = draw(0.3, 20_000, &mut rng);
    let problem = RatioProblem::new(&target, &source, &map, &corr).unwrap();
    let solved = problem.solve(&SolverConfig::default()).unwrap();
    let weights = problem.weights(&solved.delta, &source, false).unwrap();
    // Weighted source frequency of +1 should land on the target frequency.
    let n = source.n() as f64;
    let weighted_plus: f64 = (0..source.n())
        .filter(|&r| source.get(r, 0) == 1)
        .map(|r| weights.weights()[r])
        .sum::<f64>()
        / n;
    let target_plus = (0..target.n()).filter(|&r| target.get(r, 0) == 1).count() as f64
        / target.n() as f64;
    assert!(
        (weighted_plus - target_plus).abs() < 1e-6,
        "weighted {weighted_plus} vs target {target_plus}"
    );
}
