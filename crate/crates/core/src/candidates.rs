//! Exact k-nearest-neighbour candidate pairs under Euclidean distance.
//!
//! Distances are compared on squared values. Ties are broken by entity id, so
//! neighbour lists are fully determined by the table. Queries run in parallel
//! over a read-only index; the result does not depend on the schedule.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{EmbeddingTable, EntityId, EntityPair};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    pub pairs: BTreeSet<EntityPair>,
    pub k: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[inline]
pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// A neighbour candidate ordered by `(distance, index)`. Row indices follow
/// id order, so index order is the tie-break order.
#[derive(Clone, Copy, Debug)]
struct Neighbour {
    dist: f64,
    index: usize,
}

impl PartialEq for Neighbour {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Neighbour {}

impl PartialOrd for Neighbour {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbour {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.index.cmp(&other.index))
    }
}

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Static kd-tree over the rows of an [`EmbeddingTable`].
pub struct KdTree<'a> {
    table: &'a EmbeddingTable,
    order: Vec<usize>,
    root: Node,
}

impl<'a> KdTree<'a> {
    pub fn build(table: &'a EmbeddingTable) -> Self {
        let mut order: Vec<usize> = (0..table.len()).collect();
        let root = Self::build_node(table, &mut order, 0);
        KdTree { table, order, root }
    }

    fn build_node(table: &EmbeddingTable, order: &mut [usize], offset: usize) -> Node {
        let n = order.len();
        if n <= LEAF_SIZE {
            return Node::Leaf {
                start: offset,
                end: offset + n,
            };
        }
        // split on the axis of largest spread
        let dim = table.dim();
        let mut axis = 0;
        let mut best_spread = f64::NEG_INFINITY;
        for d in 0..dim {
            let (lo, hi) = order.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let x = table.row(i)[d];
                (lo.min(x), hi.max(x))
            });
            if hi - lo > best_spread {
                best_spread = hi - lo;
                axis = d;
            }
        }
        if best_spread <= 0.0 {
            return Node::Leaf {
                start: offset,
                end: offset + n,
            };
        }
        let mid = n / 2;
        order.select_nth_unstable_by(mid, |&x, &y| {
            table.row(x)[axis].total_cmp(&table.row(y)[axis])
        });
        let value = table.row(order[mid])[axis];
        let (left, right) = order.split_at_mut(mid);
        Node::Split {
            axis,
            value,
            left: Box::new(Self::build_node(table, left, offset)),
            right: Box::new(Self::build_node(table, right, offset + mid)),
        }
    }

    /// The `k` nearest rows to row `query`, excluding itself, ascending.
    pub fn query(&self, query: usize, k: usize) -> Vec<usize> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        let point = self.table.row(query);
        self.search(&self.root, point, query, k, &mut heap);
        let mut out = heap.into_vec();
        out.sort();
        out.into_iter().map(|n| n.index).collect()
    }

    fn search(
        &self,
        node: &Node,
        point: &[f64],
        query: usize,
        k: usize,
        heap: &mut BinaryHeap<Neighbour>,
    ) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    if i == query {
                        continue;
                    }
                    let cand = Neighbour {
                        dist: squared_distance(point, self.table.row(i)),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("k > 0") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = point[*axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, point, query, k, heap);
                // Equal distances must still be visited for the id tie-break.
                let full = heap.len() == k;
                if !full || diff * diff <= heap.peek().expect("k > 0").dist {
                    self.search(far, point, query, k, heap);
                }
            }
        }
    }
}

fn check_k(table: &EmbeddingTable, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Parameter("k must be positive".into()));
    }
    if k >= table.len() {
        return Err(Error::Parameter(format!(
            "k = {k} requires more than {} entities",
            table.len()
        )));
    }
    Ok(())
}

/// Neighbour row indices for every row, via the kd-tree.
pub fn knn_indices(table: &EmbeddingTable, k: usize) -> Result<Vec<Vec<usize>>> {
    check_k(table, k)?;
    let tree = KdTree::build(table);
    Ok((0..table.len())
        .into_par_iter()
        .map(|i| tree.query(i, k))
        .collect())
}

/// Neighbour row indices by exhaustive scan. Kept as the reference for the
/// index-backed search.
pub fn knn_brute_force(table: &EmbeddingTable, k: usize) -> Result<Vec<Vec<usize>>> {
    check_k(table, k)?;
    Ok((0..table.len())
        .into_par_iter()
        .map(|i| {
            let point = table.row(i);
            let mut all: Vec<Neighbour> = (0..table.len())
                .filter(|&j| j != i)
                .map(|j| Neighbour {
                    dist: squared_distance(point, table.row(j)),
                    index: j,
                })
                .collect();
            all.select_nth_unstable(k - 1);
            all.truncate(k);
            all.sort();
            all.into_iter().map(|n| n.index).collect()
        })
        .collect())
}

/// The `k` nearest entities of every entity, nearest first.
pub fn knn(table: &EmbeddingTable, k: usize) -> Result<BTreeMap<EntityId, Vec<EntityId>>> {
    let ids = table.ids();
    Ok(knn_indices(table, k)?
        .into_iter()
        .enumerate()
        .map(|(i, ns)| (ids[i].clone(), ns.into_iter().map(|j| ids[j].clone()).collect()))
        .collect())
}

/// Canonicalized union of `(e, neighbour)` over all entities.
pub fn candidate_pairs(table: &EmbeddingTable, k: usize) -> Result<CandidateSet> {
    let ids = table.ids();
    let mut pairs = BTreeSet::new();
    for (i, ns) in knn_indices(table, k)?.into_iter().enumerate() {
        for j in ns {
            pairs.insert(EntityPair::new(ids[i].clone(), ids[j].clone())?);
        }
    }
    Ok(CandidateSet { pairs, k })
}
