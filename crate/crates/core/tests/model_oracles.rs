//! Cross-checks of the factorized joint model against exhaustive
//! enumeration: closed-form marginalization, enumerated distributions, and
//! the exact sampler's empirical frequencies.

mod common;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sliceweight::model::{
    enumerate_joint, enumerate_marginal, marginalize, sample_joint, JointModelParams,
};
use sliceweight::slices::DependencyGraph;

use common::{brute_marginal, random_joint_params, rel_to, uniform};

#[test]
fn closed_form_marginal_matches_enumeration_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    for instance in 0..60 {
        let k = rng.gen_range(1..=6);
        let allow_abstain = instance % 2 == 0;
        let params = random_joint_params(&mut rng, k, allow_abstain);
        let reference = brute_marginal(&params);
        let (map, psi) = marginalize(&params);
        let table = enumerate_marginal(&map, &psi).unwrap();
        for mask in 0..(1_usize << k) {
            let err = rel_to(table.prob(mask), reference[mask]);
            assert!(
                err <= 1e-10,
                "instance {instance} (k = {k}): config {mask} disagrees by {err:e}"
            );
        }
    }
}

#[test]
fn marginal_potentials_have_expected_layout() {
    // k = 4 with one edge (1, 3): unpaired singles 0 and 2 come first in
    // ascending order, then the edge block [g_1, g_3, g_1 g_3].
    let graph = DependencyGraph::new(vec![(3, 1)]).unwrap();
    let params = JointModelParams::without_abstains(
        vec![0.3, -0.2, 0.9, 0.4],
        vec![0.5; 4],
        vec![0.7],
        graph,
    )
    .unwrap();
    let (map, psi) = marginalize(&params);
    assert_eq!(map.dim(), 5);
    // Unpaired slices reduce to their singleton parameters exactly.
    assert!((psi.psi[0] - 0.3).abs() < 1e-14);
    assert!((psi.psi[1] - 0.9).abs() < 1e-14);
    // The edge block's singleton entries shift away from the raw parameters
    // only through the shared observed-pattern coupling, which is symmetric
    // here, so the interaction entry must be symmetric in i and j.
    let flipped = JointModelParams::without_abstains(
        vec![0.3, 0.4, 0.9, -0.2],
        vec![0.5; 4],
        vec![0.7],
        DependencyGraph::new(vec![(1, 3)]).unwrap(),
    )
    .unwrap();
    let (_, psi_flipped) = marginalize(&flipped);
    assert!((psi.psi[2] - psi_flipped.psi[3]).abs() < 1e-12);
    assert!((psi.psi[3] - psi_flipped.psi[2]).abs() < 1e-12);
    assert!((psi.psi[4] - psi_flipped.psi[4]).abs() < 1e-12);
}

#[test]
fn enumerated_joint_conditionals_factor_over_components() {
    // With a matching graph, latent/observed blocks of different components
    // must be independent: p(block_a, block_b) = p(block_a) p(block_b).
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let params = random_joint_params(&mut rng, 4, true);
    let configs = enumerate_joint(&params).unwrap();
    // Block a: slice 0's (g, g̃); block b: slice 1's (g, g̃).
    let mut joint: BTreeMap<(i8, i8, i8, i8), f64> = BTreeMap::new();
    let mut a: BTreeMap<(i8, i8), f64> = BTreeMap::new();
    let mut b: BTreeMap<(i8, i8), f64> = BTreeMap::new();
    let (sa, sb) = pick_separated_slices(&params);
    for c in &configs {
        *joint
            .entry((c.g[sa], c.g_tilde[sa], c.g[sb], c.g_tilde[sb]))
            .or_default() += c.prob;
        *a.entry((c.g[sa], c.g_tilde[sa])).or_default() += c.prob;
        *b.entry((c.g[sb], c.g_tilde[sb])).or_default() += c.prob;
    }
    for ((ga, ta, gb, tb), p) in &joint {
        let product = a[&(*ga, *ta)] * b[&(*gb, *tb)];
        assert!(
            (p - product).abs() < 1e-12,
            "blocks are not independent: {p} vs {product}"
        );
    }
}

/// Two slices that are not joined by an edge.
fn pick_separated_slices(params: &JointModelParams) -> (usize, usize) {
    let k = params.k();
    for i in 0..k {
        for j in i + 1..k {
            let joined = params
                .graph()
                .edges()
                .iter()
                .any(|&(a, b)| (a, b) == (i, j));
            if !joined {
                return (i, j);
            }
        }
    }
    panic!("every pair is joined; matching over k >= 3 cannot do that");
}

#[test]
fn sampler_frequencies_match_enumerated_joint() {
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let graph = DependencyGraph::new(vec![(0, 2)]).unwrap();
    let params = JointModelParams::new(
        vec![0.4, -0.3, 0.2],
        vec![0.8, 0.5, 1.1],
        vec![None, Some(-0.6), None],
        vec![0.9],
        graph,
    )
    .unwrap();
    let n = 200_000;
    let sample = sample_joint(&params, n, &mut rng).unwrap();
    let mut freq: BTreeMap<(Vec<i8>, Vec<i8>), f64> = BTreeMap::new();
    for r in 0..n {
        *freq
            .entry((
                sample.latent.row(r).to_vec(),
                sample.observed.row(r).to_vec(),
            ))
            .or_default() += 1.0 / n as f64;
    }
    for c in enumerate_joint(&params).unwrap() {
        let observed = freq.get(&(c.g.clone(), c.g_tilde.clone())).copied();
        let se = (c.prob * (1.0 - c.prob) / n as f64).sqrt();
        let empirical = observed.unwrap_or(0.0);
        assert!(
            (empirical - c.prob).abs() < 5.0 * se.max(1e-5),
            "config (g = {:?}, g̃ = {:?}): empirical {empirical}, exact {}",
            c.g,
            c.g_tilde,
            c.prob
        );
    }
}

#[test]
fn extreme_parameters_stay_finite_end_to_end() {
    // Large couplings push the per-component state sums far into the
    // exponential tails; the log-domain path must not overflow.
    let graph = DependencyGraph::new(vec![(0, 1)]).unwrap();
    let params = JointModelParams::without_abstains(
        vec![30.0, -30.0],
        vec![25.0, 25.0],
        vec![-20.0],
        graph,
    )
    .unwrap();
    let (map, psi) = marginalize(&params);
    assert!(psi.psi.iter().all(|v| v.is_finite()));
    let table = enumerate_marginal(&map, &psi).unwrap();
    let total: f64 = table.probs().iter().sum();
    assert!((total - 1.0).abs() < 1e-9);
    let reference = brute_marginal(&params);
    for mask in 0..4 {
        // Probabilities range over ~50 orders of magnitude here; compare in
        // the log domain.
        let err = (table.prob(mask).ln() - reference[mask].ln()).abs();
        assert!(err < 1e-8, "config {mask}: {err:e}");
    }
}

#[test]
fn marginal_interaction_grows_with_observed_coupling() {
    // The observed-pattern edge induces latent dependence only through the
    // noise couplings; with theta_ii = 0 the latent marginal factorizes and
    // the interaction potential vanishes.
    let graph = DependencyGraph::new(vec![(0, 1)]).unwrap();
    let at = |theta_ii: f64| {
        let params = JointModelParams::without_abstains(
            vec![0.2, -0.4],
            vec![theta_ii; 2],
            vec![1.3],
            graph.clone(),
        )
        .unwrap();
        let (_, psi) = marginalize(&params);
        psi.psi[2].abs()
    };
    assert!(at(0.0) < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    let lo = at(uniform(&mut rng, 0.1, 0.3));
    let hi = at(uniform(&mut rng, 1.5, 2.0));
    assert!(hi > lo, "interaction should strengthen with the coupling");
}
