//! Safe reduction rules and the contracted problem representation shared
//! with the solver.
//!
//! Two rules, both only fire when every optimal partition agrees:
//!
//! * heavy edge: merge `i, j` when `w(i,j) > ½ Σ_{k≠i,j} (|w(i,k)| + |w(j,k)|)`.
//!   If `i, j` were split, moving `i` to `j`'s cluster or `j` to `i`'s would
//!   gain a strictly positive amount for at least one of the two moves.
//! * heavy non-edge: forbid `i, j` when `−w(i,j) > min(P(i), P(j))` with
//!   `P(x)` the total positive weight at `x`. Isolating the endpoint with the
//!   smaller `P` from a shared cluster would gain strictly.

use super::{EditingInstance, TIE_TOLERANCE};

/// Contracted problem: groups of original entities, weights between groups
/// (`−∞` for forbidden pairs) and the objective already realized inside the
/// groups.
#[derive(Clone, Debug)]
pub(crate) struct Reduced {
    pub groups: Vec<Vec<usize>>,
    pub w: Vec<f64>,
    pub fixed: f64,
}

impl Reduced {
    pub fn from_instance(inst: &EditingInstance) -> Self {
        Reduced {
            groups: (0..inst.len()).map(|i| vec![i]).collect(),
            w: inst.matrix().to_vec(),
            fixed: 0.0,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.groups.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n() + j]
    }

    pub fn forbid(&mut self, i: usize, j: usize) {
        let n = self.n();
        self.w[i * n + j] = f64::NEG_INFINITY;
        self.w[j * n + i] = f64::NEG_INFINITY;
    }

    /// Merges group `j` into group `i`; `j` is removed and later indices
    /// shift down by one.
    pub fn contract(&self, i: usize, j: usize) -> Reduced {
        debug_assert!(i != j);
        let n = self.n();
        let keep: Vec<usize> = (0..n).filter(|&k| k != j).collect();
        let m = n - 1;
        let mut w = vec![0.0; m * m];
        for (a, &ka) in keep.iter().enumerate() {
            for (b, &kb) in keep.iter().enumerate().skip(a + 1) {
                let mut x = self.get(ka, kb);
                if ka == i {
                    x += self.get(j, kb);
                } else if kb == i {
                    x += self.get(ka, j);
                }
                w[a * m + b] = x;
                w[b * m + a] = x;
            }
        }
        let mut groups: Vec<Vec<usize>> = keep.iter().map(|&k| self.groups[k].clone()).collect();
        let target = keep.iter().position(|&k| k == i).expect("i kept");
        groups[target].extend_from_slice(&self.groups[j]);
        Reduced {
            groups,
            w,
            fixed: self.fixed + self.get(i, j),
        }
    }

    /// Subproblem induced by a subset of groups, with no fixed objective.
    pub fn restrict(&self, members: &[usize]) -> Reduced {
        let m = members.len();
        let mut w = vec![0.0; m * m];
        for (a, &ka) in members.iter().enumerate() {
            for (b, &kb) in members.iter().enumerate() {
                if a != b {
                    w[a * m + b] = self.get(ka, kb);
                }
            }
        }
        Reduced {
            groups: members.iter().map(|&k| self.groups[k].clone()).collect(),
            w,
            fixed: 0.0,
        }
    }

    /// Connected components of the graph of non-negative pairs. Clusters
    /// never need to span two of them.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut stack = vec![s];
            let mut comp = Vec::new();
            while let Some(u) = stack.pop() {
                comp.push(u);
                for (v, flag) in seen.iter_mut().enumerate() {
                    if v != u && !*flag && self.get(u, v) >= -TIE_TOLERANCE {
                        *flag = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Applies both rules until neither fires. Returns the decisions taken,
    /// as pairs of group representatives (smallest original index).
    pub fn reduce(&mut self) -> Vec<Decision> {
        let mut decisions = Vec::new();
        'outer: loop {
            let n = self.n();
            let mut abs_sum = vec![0.0; n];
            let mut pos_sum = vec![0.0; n];
            for i in 0..n {
                for k in 0..n {
                    if k != i {
                        let x = self.get(i, k);
                        abs_sum[i] += x.abs();
                        pos_sum[i] += x.max(0.0);
                    }
                }
            }
            for i in 0..n {
                for j in i + 1..n {
                    let x = self.get(i, j);
                    if x == f64::NEG_INFINITY {
                        continue;
                    }
                    if x > 0.0 {
                        let rest = (abs_sum[i] - x) + (abs_sum[j] - x);
                        if x > 0.5 * rest + TIE_TOLERANCE {
                            decisions.push(Decision::Merge(self.rep(i), self.rep(j)));
                            *self = self.contract(i, j);
                            continue 'outer;
                        }
                    } else if -x > pos_sum[i].min(pos_sum[j]) + TIE_TOLERANCE {
                        decisions.push(Decision::Forbid(self.rep(i), self.rep(j)));
                        self.forbid(i, j);
                        abs_sum[i] = f64::INFINITY;
                        abs_sum[j] = f64::INFINITY;
                    }
                }
            }
            return decisions;
        }
    }

    fn rep(&self, i: usize) -> usize {
        *self.groups[i].iter().min().expect("non-empty group")
    }
}

/// A forced decision, naming each side by its smallest entity index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Merge(usize, usize),
    Forbid(usize, usize),
}

/// Result of [`kernelize`]: the reduced problem plus the decisions that
/// produced it.
#[derive(Clone, Debug)]
pub struct Kernel {
    pub(crate) reduced: Reduced,
    pub decisions: Vec<Decision>,
}

impl Kernel {
    /// Number of (possibly merged) nodes left.
    pub fn len(&self) -> usize {
        self.reduced.n()
    }

    pub fn is_empty(&self) -> bool {
        self.reduced.n() == 0
    }

    /// Original entity indices in each node.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.reduced.groups
    }

    /// Weight between two nodes; `−∞` when forbidden.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.reduced.get(i, j)
    }

    /// Objective already realized by the merges.
    pub fn offset(&self) -> f64 {
        self.reduced.fixed
    }

    pub fn is_forbidden(&self, i: usize, j: usize) -> bool {
        self.reduced.get(i, j) == f64::NEG_INFINITY
    }
}

/// Applies the heavy-edge and heavy-non-edge rules to a fixpoint.
pub fn kernelize(inst: &EditingInstance) -> Kernel {
    let mut reduced = Reduced::from_instance(inst);
    let decisions = reduced.reduce();
    Kernel { reduced, decisions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::editing::brute_force_oracle;

    #[test]
    fn isolated_negative_pair_is_forbidden() {
        let k = kernelize(&EditingInstance::from_fn(2, |_, _| -2.0));
        assert_eq!(k.decisions, vec![Decision::Forbid(0, 1)]);
        assert!(k.is_forbidden(0, 1));
        assert_eq!(k.len(), 2);
    }

    #[test]
    fn heavy_edge_is_merged() {
        let inst = EditingInstance::from_fn(5, |i, j| if (i, j) == (1, 3) { 50.0 } else { 0.1 * ((i + j) % 3) as f64 - 0.1 });
        let k = kernelize(&inst);
        assert!(k.decisions.contains(&Decision::Merge(1, 3)));
        let s = brute_force_oracle(&inst).unwrap();
        assert!(s.clusters.iter().any(|c| c.contains(&1) && c.contains(&3)));
    }

    #[test]
    fn quiet_instance_is_unchanged() {
        // 4-cycle of +1 with -1 diagonals: neither rule applies
        let inst = EditingInstance::from_fn(4, |i, j| if (i + j) % 2 == 1 { 1.0 } else { -1.0 });
        let k = kernelize(&inst);
        assert!(k.decisions.is_empty());
        assert_eq!(k.len(), 4);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(k.weight(i, j), inst.weight(i, j));
                }
            }
        }
        assert_eq!(k.offset(), 0.0);
    }

    #[test]
    fn contraction_sums_weights() {
        let inst = EditingInstance::from_fn(3, |i, j| (i + 2 * j) as f64);
        let r = Reduced::from_instance(&inst).contract(0, 1);
        assert_eq!(r.groups, vec![vec![0, 1], vec![2]]);
        assert_eq!(r.get(0, 1), inst.weight(0, 2) + inst.weight(1, 2));
        assert_eq!(r.fixed, inst.weight(0, 1));
    }
}
