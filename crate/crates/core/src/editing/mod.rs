//! Weighted cluster editing: log-odds pair weights, per-component instances,
//! an exact solver and the repair step that turns solutions into links.
//!
//! For an instance on `n` entities with symmetric weights `w(i, j)` the
//! solver maximizes `Σ_{i<j} w(i, j) x_ij` over all transitive `x`, i.e. over
//! all partitions of the entities into clusters. Equivalently it minimizes
//! the edit cost `Σ_{w>0} w − Σ w x`, see [`EditingInstance::edit_cost`].
//!
//! Ties between optimal partitions (objectives within [`TIE_TOLERANCE`]) are
//! broken by fewer clusters, then by the lexicographically smallest label
//! vector (restricted growth string) over the entity order.

mod kernel;
mod oracle;
mod repair;
mod solver;

pub use kernel::{kernelize, Decision, Kernel};
pub use oracle::{brute_force_oracle, ORACLE_MAX_ENTITIES};
pub use repair::{oversized_reports, repair, ComponentReport, RepairOutcome, RepairStatus};
pub use solver::{solve_exact, solve_kernel, solve_with, SolverOptions, DEFAULT_NODE_BUDGET};

use std::cmp::Ordering;

use crate::classifier::{PairScorer, PROB_CEIL, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::graph::{Component, Cutoff};
use crate::model::{ClusterPartition, EntityId, EntityPair, WeightedPair};

/// Absolute tolerance for objective comparisons.
pub const TIE_TOLERANCE: f64 = 1e-9;

fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Log-odds difference `logit(p) − logit(θ)`. Positive exactly when `p > θ`.
pub fn pair_weight(p: f64, theta: Cutoff) -> Result<f64> {
    if !(PROB_FLOOR..=PROB_CEIL).contains(&p) {
        return Err(Error::ProbabilityDomain(p));
    }
    Ok(logit(p) - logit(theta.value()))
}

/// Symmetric weight matrix over the entities of one component.
#[derive(Clone, Debug, PartialEq)]
pub struct EditingInstance {
    entities: Vec<EntityId>,
    weights: Vec<f64>,
}

impl EditingInstance {
    /// `weights` is row-major `n × n`; the diagonal is ignored.
    pub fn new(entities: Vec<EntityId>, weights: Vec<f64>) -> Result<Self> {
        let n = entities.len();
        if weights.len() != n * n {
            return Err(Error::Parameter(format!(
                "weight matrix has {} entries, expected {}",
                weights.len(),
                n * n
            )));
        }
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (weights[i * n + j], weights[j * n + i]);
                if !a.is_finite() || a != b {
                    return Err(Error::Parameter(format!(
                        "weights ({i},{j}) = {a} / {b} are not finite and symmetric"
                    )));
                }
            }
        }
        let mut weights = weights;
        for i in 0..n {
            weights[i * n + i] = 0.0;
        }
        Ok(EditingInstance { entities, weights })
    }

    /// Builds an instance from a weight function on index pairs `i < j`.
    /// Entities are named `v00, v01, ...`.
    pub fn from_fn(n: usize, mut w: impl FnMut(usize, usize) -> f64) -> Self {
        let entities = (0..n)
            .map(|i| EntityId::new(format!("v{i:02}")).expect("non-empty"))
            .collect();
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let x = w(i, j);
                weights[i * n + j] = x;
                weights[j * n + i] = x;
            }
        }
        EditingInstance::new(entities, weights).expect("finite weights")
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entities(&self) -> &[EntityId] {
        &self.entities
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.len() + j]
    }

    pub(crate) fn matrix(&self) -> &[f64] {
        &self.weights
    }

    pub fn weighted_pairs(&self) -> Vec<WeightedPair> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(WeightedPair {
                    pair: EntityPair::new(self.entities[i].clone(), self.entities[j].clone())
                        .expect("distinct entities"),
                    w: self.weight(i, j),
                });
            }
        }
        out
    }

    /// `Σ_{i<j in the same cluster} w(i, j)`.
    pub fn objective(&self, clusters: &[Vec<usize>]) -> f64 {
        clusters
            .iter()
            .map(|c| {
                let mut s = 0.0;
                for (a, &i) in c.iter().enumerate() {
                    for &j in &c[a + 1..] {
                        s += self.weight(i, j);
                    }
                }
                s
            })
            .sum()
    }

    /// Sum of all positive weights: the value of the unconstrained optimum.
    pub fn positive_mass(&self) -> f64 {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.weight(i, j).max(0.0))
            .sum()
    }

    /// Minimization form of the objective: `Σ_{w>0} w − objective`.
    pub fn edit_cost(&self, clusters: &[Vec<usize>]) -> f64 {
        self.positive_mass() - self.objective(clusters)
    }
}

/// An optimal partition of an [`EditingInstance`].
#[derive(Clone, Debug, PartialEq)]
pub struct EditingSolution {
    /// Clusters of entity indices, canonical order.
    pub clusters: Vec<Vec<usize>>,
    pub partition: ClusterPartition,
    pub objective: f64,
    /// Search nodes visited (1 for the oracle).
    pub nodes: u64,
}

impl EditingSolution {
    pub(crate) fn from_clusters(inst: &EditingInstance, clusters: Vec<Vec<usize>>, nodes: u64) -> Self {
        let clusters = canonical_clusters(clusters);
        let objective = inst.objective(&clusters);
        let partition = ClusterPartition::new(
            clusters
                .iter()
                .map(|c| c.iter().map(|&i| inst.entities[i].clone()).collect())
                .collect(),
        )
        .expect("solver output is a partition");
        EditingSolution {
            clusters,
            partition,
            objective,
            nodes,
        }
    }

    /// Restricted growth string: label of each entity's cluster, clusters
    /// numbered by their smallest member.
    pub fn labels(&self) -> Vec<usize> {
        labels_of(&self.clusters)
    }
}

pub(crate) fn canonical_clusters(mut clusters: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    clusters.retain(|c| !c.is_empty());
    for c in &mut clusters {
        c.sort_unstable();
    }
    clusters.sort_unstable_by_key(|c| c[0]);
    clusters
}

/// Label vector over the sorted union of cluster members.
pub(crate) fn labels_of(clusters: &[Vec<usize>]) -> Vec<usize> {
    let mut members: Vec<(usize, usize)> = Vec::new();
    let mut order: Vec<(usize, usize)> = clusters
        .iter()
        .enumerate()
        .map(|(ci, c)| (*c.iter().min().expect("non-empty"), ci))
        .collect();
    order.sort_unstable();
    let mut label_of_cluster = vec![0; clusters.len()];
    for (label, &(_, ci)) in order.iter().enumerate() {
        label_of_cluster[ci] = label;
    }
    for (ci, c) in clusters.iter().enumerate() {
        for &e in c {
            members.push((e, label_of_cluster[ci]));
        }
    }
    members.sort_unstable();
    members.into_iter().map(|(_, l)| l).collect()
}

/// Preference order between two partitions of the same element set:
/// `Less` means `a` is preferred.
pub(crate) fn compare_solutions(
    a_obj: f64,
    a_clusters: &[Vec<usize>],
    b_obj: f64,
    b_clusters: &[Vec<usize>],
) -> Ordering {
    if a_obj > b_obj + TIE_TOLERANCE {
        return Ordering::Less;
    }
    if b_obj > a_obj + TIE_TOLERANCE {
        return Ordering::Greater;
    }
    a_clusters
        .len()
        .cmp(&b_clusters.len())
        .then_with(|| labels_of(a_clusters).cmp(&labels_of(b_clusters)))
}

/// Scores every pair inside `component` (labels first, then the classifier)
/// and converts the probabilities to weights at cutoff `theta`.
pub fn build_instance(component: &Component, scorer: &PairScorer<'_>, theta: Cutoff) -> Result<EditingInstance> {
    let entities = component.entities.clone();
    let n = entities.len();
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let pair = EntityPair::new(entities[i].clone(), entities[j].clone())?;
            let w = pair_weight(scorer.probability(&pair)?, theta)?;
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
    }
    EditingInstance::new(entities, weights)
}
