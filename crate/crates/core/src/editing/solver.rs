//! Exact branch-and-bound for weighted cluster editing.
//!
//! Each node holds a contracted problem. Branching picks an unresolved pair
//! and either merges it (contracting the two groups, summing their weights)
//! or forbids it. The upper bound at a node is the realized objective plus
//! every remaining positive weight, minus a weighted packing of conflict
//! triples: for `u–v`, `v–x` non-negative and `u–x` negative, at least one of
//! the three pairs must be violated in any partition, so a share of their
//! weights can be charged to the triple without double counting.
//!
//! Nodes whose non-negative pair graph splits are solved component by
//! component. Pruning keeps nodes whose bound ties the incumbent so that the
//! tie-break order is honoured exactly.

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use super::kernel::{Kernel, Reduced};
use super::{compare_solutions, EditingInstance, EditingSolution, TIE_TOLERANCE};
use crate::error::{Error, Result};

pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Maximum search nodes before giving up.
    pub node_budget: u64,
    pub time_limit: Option<Duration>,
    /// Apply the reduction rules at every node.
    pub kernelize: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            node_budget: DEFAULT_NODE_BUDGET,
            time_limit: None,
            kernelize: true,
        }
    }
}

#[derive(Clone, Debug)]
struct Sol {
    objective: f64,
    clusters: Vec<Vec<usize>>,
}

impl Sol {
    fn prefer(&mut self, other: Sol) {
        if compare_solutions(other.objective, &other.clusters, self.objective, &self.clusters) == Ordering::Less {
            *self = other;
        }
    }
}

struct Search {
    nodes: u64,
    budget: u64,
    deadline: Option<Instant>,
    rules: bool,
    root_incumbent: f64,
    root_bound: f64,
}

impl Search {
    fn tick(&mut self) -> Result<()> {
        self.nodes += 1;
        let out_of_time = self.nodes.is_multiple_of(1024) && self.deadline.is_some_and(|d| Instant::now() > d);
        if self.nodes > self.budget || out_of_time {
            return Err(Error::BudgetExceeded {
                nodes: self.nodes,
                best_objective: self.root_incumbent,
                upper_bound: self.root_bound,
            });
        }
        Ok(())
    }
}

/// Solves to certified optimality with default options.
pub fn solve_exact(inst: &EditingInstance) -> Result<EditingSolution> {
    solve_with(inst, &SolverOptions::default())
}

pub fn solve_with(inst: &EditingInstance, opts: &SolverOptions) -> Result<EditingSolution> {
    solve_from(inst, Reduced::from_instance(inst), opts)
}

/// Solves the reduced problem left by [`kernelize`](super::kernelize) and
/// expands the answer back to the full instance.
pub fn solve_kernel(inst: &EditingInstance, kernel: &Kernel, opts: &SolverOptions) -> Result<EditingSolution> {
    solve_from(inst, kernel.reduced.clone(), opts)
}

fn solve_from(inst: &EditingInstance, start: Reduced, opts: &SolverOptions) -> Result<EditingSolution> {
    if inst.is_empty() {
        return Ok(EditingSolution::from_clusters(inst, Vec::new(), 0));
    }
    let mut search = Search {
        nodes: 0,
        budget: opts.node_budget,
        deadline: opts.time_limit.map(|t| Instant::now() + t),
        rules: opts.kernelize,
        root_incumbent: greedy(&start).objective,
        root_bound: start.fixed + positive_mass(&start),
    };
    let sol = solve_problem(start, &mut search)?;
    Ok(EditingSolution::from_clusters(inst, sol.clusters, search.nodes))
}

fn positive_mass(p: &Reduced) -> f64 {
    let n = p.n();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += p.get(i, j).max(0.0);
        }
    }
    s
}

/// Optimal solution of `p` on its own.
fn solve_problem(mut p: Reduced, search: &mut Search) -> Result<Sol> {
    if search.rules {
        p.reduce();
    }
    let comps = p.components();
    if comps.len() > 1 {
        return solve_split(&p, comps, search);
    }
    let mut best = greedy(&p);
    descend(p, &mut best, search)?;
    Ok(best)
}

fn solve_split(p: &Reduced, comps: Vec<Vec<usize>>, search: &mut Search) -> Result<Sol> {
    let mut total = Sol {
        objective: p.fixed,
        clusters: Vec::new(),
    };
    for c in comps {
        let sub = solve_problem(p.restrict(&c), search)?;
        total.objective += sub.objective;
        total.clusters.extend(sub.clusters);
    }
    Ok(total)
}

fn descend(mut p: Reduced, best: &mut Sol, search: &mut Search) -> Result<()> {
    search.tick()?;
    if search.rules {
        p.reduce();
    }
    if p.n() == 1 {
        best.prefer(single_cluster(&p));
        return Ok(());
    }
    let comps = p.components();
    if comps.len() > 1 {
        let sol = solve_split(&p, comps, search)?;
        best.prefer(sol);
        return Ok(());
    }
    let node = analyse(&p);
    if node.bound < best.objective - TIE_TOLERANCE {
        return Ok(());
    }
    let Some((u, v)) = node.branch else {
        // the non-negative graph is one clique
        best.prefer(single_cluster(&p));
        return Ok(());
    };
    let mut forbidden = p.clone();
    forbidden.forbid(u, v);
    let merged = p.contract(u, v);
    if p.get(u, v) > 0.0 {
        descend(merged, best, search)?;
        descend(forbidden, best, search)
    } else {
        descend(forbidden, best, search)?;
        descend(merged, best, search)
    }
}

fn single_cluster(p: &Reduced) -> Sol {
    let n = p.n();
    let mut objective = p.fixed;
    for i in 0..n {
        for j in i + 1..n {
            objective += p.get(i, j);
        }
    }
    Sol {
        objective,
        clusters: vec![p.groups.concat()],
    }
}

/// Agglomerative heuristic: keep merging the pair of clusters with the
/// largest positive total weight.
fn greedy(p: &Reduced) -> Sol {
    let mut q = p.clone();
    loop {
        let n = q.n();
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            for j in i + 1..n {
                let x = q.get(i, j);
                if x > TIE_TOLERANCE && best.is_none_or(|(_, _, b)| x > b) {
                    best = Some((i, j, x));
                }
            }
        }
        match best {
            Some((i, j, _)) => q = q.contract(i, j),
            None => break,
        }
    }
    Sol {
        objective: q.fixed,
        clusters: q.groups,
    }
}

struct NodeInfo {
    bound: f64,
    branch: Option<(usize, usize)>,
}

fn analyse(p: &Reduced) -> NodeInfo {
    let n = p.n();
    let nonneg = |x: f64| x >= -TIE_TOLERANCE;
    // residual capacity per pair for the triple packing
    let mut cap: Vec<f64> = p
        .w
        .iter()
        .map(|&x| if nonneg(x) { x.max(0.0) } else { -x })
        .collect();
    let mut in_conflict = vec![false; n * n];
    let mut packed = 0.0;
    let mut any_conflict = false;
    for v in 0..n {
        for u in 0..n {
            if u == v || !nonneg(p.get(u, v)) {
                continue;
            }
            for x in u + 1..n {
                if x == v || !nonneg(p.get(v, x)) || nonneg(p.get(u, x)) {
                    continue;
                }
                any_conflict = true;
                in_conflict[u * n + v] = true;
                in_conflict[v * n + x] = true;
                let c = cap[u * n + v].min(cap[v * n + x]).min(cap[u * n + x]);
                if c > 0.0 {
                    for (a, b) in [(u, v), (v, x), (u, x)] {
                        cap[a * n + b] -= c;
                        cap[b * n + a] -= c;
                    }
                    packed += c;
                }
            }
        }
    }
    let bound = p.fixed + positive_mass(p) - packed;
    if !any_conflict {
        return NodeInfo { bound, branch: None };
    }

    // branch on the conflicted pair whose cheaper outcome costs the most
    let mut branch = None;
    let mut best_score = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            if !(in_conflict[i * n + j] || in_conflict[j * n + i]) {
                continue;
            }
            let forbid_cost = p.get(i, j).max(0.0);
            let mut merge_cost = 0.0;
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let (a, b) = (p.get(i, k), p.get(j, k));
                if nonneg(a) != nonneg(b) {
                    merge_cost += a.abs().min(b.abs());
                }
            }
            let score = forbid_cost.min(merge_cost);
            if score > best_score {
                best_score = score;
                branch = Some((i, j));
            }
        }
    }
    NodeInfo { bound, branch }
}
