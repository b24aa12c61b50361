//! Tentative linkset, connected components and the transitive-closure
//! baseline.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::model::{EntityId, EntityPair, Linkset, ScoredPair};

/// Classification cutoff θ in the open interval (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Cutoff(f64);

impl Cutoff {
    pub fn new(theta: f64) -> Result<Self> {
        if theta > 0.0 && theta < 1.0 {
            Ok(Cutoff(theta))
        } else {
            Err(Error::Parameter(format!("cutoff {theta} outside (0, 1)")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A connected component of the tentative link graph. Always has at least
/// two entities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    /// Sorted.
    pub entities: Vec<EntityId>,
    /// The tentative links inside the component, sorted.
    pub edges: Vec<EntityPair>,
}

impl Component {
    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

/// Pairs scoring strictly above θ, plus the expert-labeled duplicates.
pub fn tentative_linkset(scored: &[ScoredPair], labeled_dups: &[EntityPair], theta: Cutoff) -> Linkset {
    scored
        .iter()
        .filter(|sp| sp.p > theta.value())
        .map(|sp| sp.pair.clone())
        .chain(labeled_dups.iter().cloned())
        .collect()
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Components of the link graph, ordered by smallest member. Entities
/// without links never appear.
pub fn connected_components(links: &Linkset) -> Vec<Component> {
    let entities = links.entities();
    let index: HashMap<&EntityId, usize> = entities.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let mut uf = UnionFind::new(entities.len());
    for p in links {
        uf.union(index[p.a()], index[p.b()]);
    }
    // entities are sorted, so the first member seen for each root is its
    // smallest, and BTreeMap keyed by that first index gives the order
    let mut by_root: HashMap<usize, usize> = HashMap::new();
    let mut groups: BTreeMap<usize, Component> = BTreeMap::new();
    for (i, e) in entities.iter().enumerate() {
        let root = uf.find(i);
        let key = *by_root.entry(root).or_insert(i);
        groups
            .entry(key)
            .or_insert_with(|| Component {
                entities: Vec::new(),
                edges: Vec::new(),
            })
            .entities
            .push(e.clone());
    }
    for p in links {
        let root = uf.find(index[p.a()]);
        let key = by_root[&root];
        groups.get_mut(&key).expect("component exists").edges.push(p.clone());
    }
    groups.into_values().collect()
}

/// Splits components at `max_size` entities: larger ones are discarded.
pub fn filter_components(comps: Vec<Component>, max_size: usize) -> Result<(Vec<Component>, Vec<Component>)> {
    if max_size < 2 {
        return Err(Error::Parameter("component cap must be at least 2".into()));
    }
    Ok(comps.into_iter().partition(|c| c.len() <= max_size))
}

/// Complete graph on every component.
pub fn transitive_closure(comps: &[Component]) -> Linkset {
    let mut out = Linkset::new();
    for c in comps {
        for (i, x) in c.entities.iter().enumerate() {
            for y in &c.entities[i + 1..] {
                out.insert(EntityPair::new(x.clone(), y.clone()).expect("distinct entities"));
            }
        }
    }
    out
}

/// Closes an arbitrary linkset.
pub fn close(links: &Linkset) -> Linkset {
    transitive_closure(&connected_components(links))
}
