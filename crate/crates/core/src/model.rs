//! Exponential-family model coupling latent slice labels g in {-1, +1}^k to
//! observed slicing-function outputs g̃, where g̃_i may additionally abstain
//! (take the value 0).
//!
//! The joint density is
//!
//! ```text
//! p(g, g̃) ∝ exp( Σ_i θ_i g_i  +  Σ_i θ_ii g_i g̃_i
//!               + Σ_i θ_i0 1[g̃_i = 0]  +  Σ_(i,j) θ_ij g̃_i g̃_j )
//! ```
//!
//! where the pair sum runs over a matching on slice indices. Because every
//! potential touches the slices of exactly one matching component, the joint
//! factorizes over components, which gives an exact closed-form marginal over
//! g and an exact sampler. Brute-force enumeration is also provided for small
//! k and serves as the reference the closed forms are tested against.

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{dot, log_sum_exp, sign_config};
use crate::slices::{DependencyGraph, SliceMatrix};

/// Largest k for which the joint over (g, g̃) is enumerated explicitly.
pub const JOINT_ENUMERATION_LIMIT: usize = 8;

/// Largest k for which the marginal over g is tabulated explicitly.
pub const MARGINAL_ENUMERATION_LIMIT: usize = 20;

const NO_ABSTAIN_STATES: &[i8] = &[-1, 1];
const ABSTAIN_STATES: &[i8] = &[-1, 0, 1];

/// Natural parameters of the joint model.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModelParams {
    theta_singleton: Vec<f64>,
    theta_noise: Vec<f64>,
    theta_abstain: Vec<Option<f64>>,
    theta_edge: Vec<f64>,
    graph: DependencyGraph,
}

impl JointModelParams {
    /// `theta_singleton[i]` multiplies g_i, `theta_noise[i]` multiplies
    /// g_i g̃_i, `theta_abstain[i]` (when present) is added for g̃_i = 0 and
    /// its absence removes the abstain state entirely, and `theta_edge[e]`
    /// multiplies g̃_i g̃_j for the e-th edge of `graph`.
    pub fn new(
        theta_singleton: Vec<f64>,
        theta_noise: Vec<f64>,
        theta_abstain: Vec<Option<f64>>,
        theta_edge: Vec<f64>,
        graph: DependencyGraph,
    ) -> Result<Self> {
        let k = theta_singleton.len();
        if k == 0 {
            return Err(Error::InvalidInput("model needs at least one slice".into()));
        }
        if theta_noise.len() != k || theta_abstain.len() != k {
            return Err(Error::InvalidInput(format!(
                "parameter lengths disagree: {k} singleton, {} noise, {} abstain",
                theta_noise.len(),
                theta_abstain.len()
            )));
        }
        if theta_edge.len() != graph.len() {
            return Err(Error::InvalidInput(format!(
                "{} edge potentials for {} edges",
                theta_edge.len(),
                graph.len()
            )));
        }
        if graph.max_index().is_some_and(|m| m >= k) {
            return Err(Error::InvalidInput(format!(
                "edge references slice {} but k = {k}",
                graph.max_index().unwrap()
            )));
        }
        let finite = theta_singleton
            .iter()
            .chain(&theta_noise)
            .chain(&theta_edge)
            .all(|v| v.is_finite())
            && theta_abstain.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite model parameter".into()));
        }
        Ok(Self {
            theta_singleton,
            theta_noise,
            theta_abstain,
            theta_edge,
            graph,
        })
    }

    /// Convenience constructor for a model in which no slice abstains.
    pub fn without_abstains(
        theta_singleton: Vec<f64>,
        theta_noise: Vec<f64>,
        theta_edge: Vec<f64>,
        graph: DependencyGraph,
    ) -> Result<Self> {
        let k = theta_singleton.len();
        Self::new(theta_singleton, theta_noise, vec![None; k], theta_edge, graph)
    }

    pub fn k(&self) -> usize {
        self.theta_singleton.len()
    }

    pub fn graph(&self) -> &DependencyGraph {
        &self.graph
    }

    pub fn theta_singleton(&self) -> &[f64] {
        &self.theta_singleton
    }

    pub fn theta_noise(&self) -> &[f64] {
        &self.theta_noise
    }

    pub fn theta_abstain(&self) -> &[Option<f64>] {
        &self.theta_abstain
    }

    pub fn theta_edge(&self) -> &[f64] {
        &self.theta_edge
    }

    /// The values g̃_i can take under this model.
    pub fn observed_states(&self, i: usize) -> &'static [i8] {
        if self.theta_abstain[i].is_some() {
            ABSTAIN_STATES
        } else {
            NO_ABSTAIN_STATES
        }
    }

    /// Unnormalized log density of one full configuration.
    pub fn log_potential(&self, g: &[i8], g_tilde: &[i8]) -> f64 {
        debug_assert_eq!(g.len(), self.k());
        debug_assert_eq!(g_tilde.len(), self.k());
        let mut lp = 0.0;
        for i in 0..self.k() {
            lp += self.theta_singleton[i] * g[i] as f64;
            lp += self.theta_noise[i] * (g[i] * g_tilde[i]) as f64;
            if g_tilde[i] == 0 {
                lp += self.theta_abstain[i]
                    .expect("abstain state requires an abstain potential");
            }
        }
        for (&(i, j), &t) in self.graph.edges().iter().zip(&self.theta_edge) {
            lp += t * (g_tilde[i] * g_tilde[j]) as f64;
        }
        lp
    }

    /// log Σ_b exp(θ_ii a b + θ_i0 1[b=0]) over the observed states of slice i.
    fn log_state_sum_single(&self, i: usize, a: f64) -> f64 {
        log_sum_exp(self.observed_states(i).iter().map(|&b| {
            let mut lp = self.theta_noise[i] * a * b as f64;
            if b == 0 {
                lp += self.theta_abstain[i].unwrap();
            }
            lp
        }))
    }

    /// log Σ_{b_i, b_j} exp(component potential) for a paired component with
    /// latent labels fixed at (a_i, a_j).
    fn log_state_sum_pair(&self, i: usize, j: usize, theta_e: f64, a_i: f64, a_j: f64) -> f64 {
        let mut terms = Vec::with_capacity(9);
        for &b_i in self.observed_states(i) {
            for &b_j in self.observed_states(j) {
                let mut lp = self.theta_noise[i] * a_i * b_i as f64
                    + self.theta_noise[j] * a_j * b_j as f64
                    + theta_e * (b_i * b_j) as f64;
                if b_i == 0 {
                    lp += self.theta_abstain[i].unwrap();
                }
                if b_j == 0 {
                    lp += self.theta_abstain[j].unwrap();
                }
                terms.push(lp);
            }
        }
        log_sum_exp(terms)
    }
}

/// One component of the sufficient statistic of the marginal over g.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// Slice not covered by the matching; contributes the single feature g_i
    /// at `pos`.
    Single { slice: usize, pos: usize },
    /// Matched pair; contributes [g_i, g_j, g_i g_j] at `pos..pos + 3`.
    /// `edge` is the index into the graph's edge list.
    Pair {
        edge: usize,
        i: usize,
        j: usize,
        pos: usize,
    },
}

/// Layout of the marginal sufficient statistic phi(g): features for unpaired
/// slices in ascending order, then one [g_i, g_j, g_i g_j] block per edge, so
/// the dimension is k + |E|.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotentialMap {
    k: usize,
    components: Vec<Component>,
    dim: usize,
}

impl PotentialMap {
    pub fn new(k: usize, graph: &DependencyGraph) -> Self {
        assert!(
            graph.max_index().is_none_or(|m| m < k),
            "graph references slice {:?} but k = {k}",
            graph.max_index()
        );
        let mut paired = vec![false; k];
        for &(i, j) in graph.edges() {
            paired[i] = true;
            paired[j] = true;
        }
        let mut components = Vec::new();
        let mut pos = 0;
        for (slice, &p) in paired.iter().enumerate() {
            if !p {
                components.push(Component::Single { slice, pos });
                pos += 1;
            }
        }
        for (edge, &(i, j)) in graph.edges().iter().enumerate() {
            components.push(Component::Pair { edge, i, j, pos });
            pos += 3;
        }
        Self {
            k,
            components,
            dim: pos,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Evaluates phi at a full latent configuration.
    pub fn phi(&self, g: &[i8]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.phi_into(g, &mut out);
        out
    }

    pub fn phi_into(&self, g: &[i8], out: &mut [f64]) {
        debug_assert_eq!(g.len(), self.k);
        debug_assert_eq!(out.len(), self.dim);
        for comp in &self.components {
            match *comp {
                Component::Single { slice, pos } => out[pos] = g[slice] as f64,
                Component::Pair { i, j, pos, .. } => {
                    out[pos] = g[i] as f64;
                    out[pos + 1] = g[j] as f64;
                    out[pos + 2] = (g[i] * g[j]) as f64;
                }
            }
        }
    }
}

/// Natural parameters psi of the marginal p(g) ∝ exp(psiᵀ phi(g)), aligned
/// with a [`PotentialMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalParams {
    pub psi: Vec<f64>,
}

/// Exact marginal over g, obtained per matching component.
///
/// For each component the log of the g̃-summed factor is decomposed onto the
/// component's feature basis: an unpaired slice uses the two-point average
/// `(L(+1) - L(-1)) / 2`, a pair uses the four-point signed averages of
/// `L(a_i, a_j)` onto g_i, g_j, and g_i g_j. Constant parts cancel in the
/// normalizer and are dropped.
pub fn marginalize(params: &JointModelParams) -> (PotentialMap, MarginalParams) {
    let map = PotentialMap::new(params.k(), params.graph());
    let mut psi = vec![0.0; map.dim()];
    for comp in map.components() {
        match *comp {
            Component::Single { slice: i, pos } => {
                let l = |a: f64| params.theta_singleton[i] * a + params.log_state_sum_single(i, a);
                psi[pos] = 0.5 * (l(1.0) - l(-1.0));
            }
            Component::Pair { edge, i, j, pos } => {
                let theta_e = params.theta_edge[edge];
                let l = |a_i: f64, a_j: f64| {
                    params.theta_singleton[i] * a_i
                        + params.theta_singleton[j] * a_j
                        + params.log_state_sum_pair(i, j, theta_e, a_i, a_j)
                };
                let (lpp, lpm, lmp, lmm) = (l(1.0, 1.0), l(1.0, -1.0), l(-1.0, 1.0), l(-1.0, -1.0));
                psi[pos] = 0.25 * (lpp + lpm - lmp - lmm);
                psi[pos + 1] = 0.25 * (lpp - lpm + lmp - lmm);
                psi[pos + 2] = 0.25 * (lpp - lpm - lmp + lmm);
            }
        }
    }
    (map, MarginalParams { psi })
}

/// One fully enumerated joint configuration with its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct JointConfig {
    pub g: Vec<i8>,
    pub g_tilde: Vec<i8>,
    pub prob: f64,
}

/// Brute-force tabulation of the joint distribution; the reference
/// implementation the closed-form marginal and the sampler are checked
/// against. Fails for k above [`JOINT_ENUMERATION_LIMIT`].
pub fn enumerate_joint(params: &JointModelParams) -> Result<Vec<JointConfig>> {
    let k = params.k();
    if k > JOINT_ENUMERATION_LIMIT {
        return Err(Error::TooManySlices {
            k,
            limit: JOINT_ENUMERATION_LIMIT,
        });
    }
    let states: Vec<&[i8]> = (0..k).map(|i| params.observed_states(i)).collect();
    let tilde_total: usize = states.iter().map(|s| s.len()).product();
    let mut configs = Vec::with_capacity((1usize << k) * tilde_total);
    let mut log_pots = Vec::with_capacity(configs.capacity());
    let mut g_tilde = vec![0i8; k];
    for mask in 0..1usize << k {
        let g = sign_config(mask, k);
        for t in 0..tilde_total {
            let mut rem = t;
            for (slot, s) in g_tilde.iter_mut().zip(&states) {
                *slot = s[rem % s.len()];
                rem /= s.len();
            }
            log_pots.push(params.log_potential(&g, &g_tilde));
            configs.push(JointConfig {
                g: g.clone(),
                g_tilde: g_tilde.clone(),
                prob: 0.0,
            });
        }
    }
    let log_z = log_sum_exp(log_pots.iter().copied());
    for (c, lp) in configs.iter_mut().zip(&log_pots) {
        c.prob = (lp - log_z).exp();
    }
    Ok(configs)
}

/// Explicit distribution over g in {-1, +1}^k. Index bit i set means
/// g_i = +1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    k: usize,
    probs: Vec<f64>,
}

impl ProbabilityTable {
    pub fn new(k: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << k {
            return Err(Error::InvalidInput(format!(
                "probability table for k = {k} needs {} entries, got {}",
                1usize << k,
                probs.len()
            )));
        }
        Ok(Self { k, probs })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, mask: usize) -> f64 {
        self.probs[mask]
    }

    /// The sign vector a mask encodes.
    pub fn config(&self, mask: usize) -> Vec<i8> {
        sign_config(mask, self.k)
    }

    /// Mask of a sign vector; None if any entry is 0 (a marginal over g has
    /// no abstain state).
    pub fn mask_of(g: &[i8]) -> Option<usize> {
        let mut mask = 0;
        for (i, &v) in g.iter().enumerate() {
            match v {
                1 => mask |= 1 << i,
                -1 => {}
                _ => return None,
            }
        }
        Some(mask)
    }
}

/// Tabulates p(g) ∝ exp(psiᵀ phi(g)) for every configuration. Fails for k
/// above [`MARGINAL_ENUMERATION_LIMIT`].
pub fn enumerate_marginal(map: &PotentialMap, params: &MarginalParams) -> Result<ProbabilityTable> {
    let k = map.k();
    if k > MARGINAL_ENUMERATION_LIMIT {
        return Err(Error::TooManySlices {
            k,
            limit: MARGINAL_ENUMERATION_LIMIT,
        });
    }
    if params.psi.len() != map.dim() {
        return Err(Error::InvalidInput(format!(
            "psi has {} entries but the potential map has dimension {}",
            params.psi.len(),
            map.dim()
        )));
    }
    let log_probs: Vec<f64> = (0..1usize << k)
        .map(|mask| dot(&params.psi, &map.phi(&sign_config(mask, k))))
        .collect();
    let log_z = log_sum_exp(log_probs.iter().copied());
    let probs = log_probs.iter().map(|lp| (lp - log_z).exp()).collect();
    ProbabilityTable::new(k, probs)
}

/// Paired draw of latent labels and observed slicing-function outputs.
#[derive(Debug, Clone)]
pub struct JointSample {
    /// g values, in {-1, +1}.
    pub latent: SliceMatrix,
    /// g̃ values, in {-1, 0, +1}.
    pub observed: SliceMatrix,
}

/// Exact sampler: each matching component has at most 4 x 9 joint
/// configurations, so components are tabulated once and every example draws
/// one categorical value per component. Examples are generated in order and
/// components are visited in [`PotentialMap`] order, so a seeded RNG yields a
/// reproducible sample.
pub fn sample_joint(params: &JointModelParams, n: usize, rng: &mut impl Rng) -> Result<JointSample> {
    if n == 0 {
        return Err(Error::InvalidInput("cannot sample 0 examples".into()));
    }
    let k = params.k();
    let map = PotentialMap::new(k, params.graph());

    // (cumulative probability, (slice, g, g̃) assignments) per configuration.
    type Entry = (f64, Vec<(usize, i8, i8)>);
    let mut tables: Vec<Vec<Entry>> = Vec::with_capacity(map.components().len());
    for comp in map.components() {
        let mut log_pots = Vec::new();
        let mut assigns = Vec::new();
        match *comp {
            Component::Single { slice: i, .. } => {
                for a in [-1i8, 1] {
                    for &b in params.observed_states(i) {
                        let mut lp = params.theta_singleton[i] * a as f64
                            + params.theta_noise[i] * (a * b) as f64;
                        if b == 0 {
                            lp += params.theta_abstain[i].unwrap();
                        }
                        log_pots.push(lp);
                        assigns.push(vec![(i, a, b)]);
                    }
                }
            }
            Component::Pair { edge, i, j, .. } => {
                let theta_e = params.theta_edge[edge];
                for a_i in [-1i8, 1] {
                    for a_j in [-1i8, 1] {
                        for &b_i in params.observed_states(i) {
                            for &b_j in params.observed_states(j) {
                                let mut lp = params.theta_singleton[i] * a_i as f64
                                    + params.theta_singleton[j] * a_j as f64
                                    + params.theta_noise[i] * (a_i * b_i) as f64
                                    + params.theta_noise[j] * (a_j * b_j) as f64
                                    + theta_e * (b_i * b_j) as f64;
                                if b_i == 0 {
                                    lp += params.theta_abstain[i].unwrap();
                                }
                                if b_j == 0 {
                                    lp += params.theta_abstain[j].unwrap();
                                }
                                log_pots.push(lp);
                                assigns.push(vec![(i, a_i, b_i), (j, a_j, b_j)]);
                            }
                        }
                    }
                }
            }
        }
        let log_z = log_sum_exp(log_pots.iter().copied());
        let mut cum = 0.0;
        let entries = log_pots
            .iter()
            .zip(assigns)
            .map(|(lp, a)| {
                cum += (lp - log_z).exp();
                (cum, a)
            })
            .collect();
        tables.push(entries);
    }

    let mut latent = vec![0i8; n * k];
    let mut observed = vec![0i8; n * k];
    for row in 0..n {
        for table in &tables {
            let u: f64 = rng.gen();
            let entry = table
                .iter()
                .find(|(c, _)| u < *c)
                .unwrap_or_else(|| table.last().expect("component has configurations"));
            for &(idx, a, b) in &entry.1 {
                latent[row * k + idx] = a;
                observed[row * k + idx] = b;
            }
        }
    }
    Ok(JointSample {
        latent: SliceMatrix::new(latent, n, k)?,
        observed: SliceMatrix::new(observed, n, k)?,
    })
}
