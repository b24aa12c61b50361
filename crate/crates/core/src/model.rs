//! Shared domain types: entity identifiers, unordered pairs, linksets and
//! partitions.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Opaque, URI-like entity identifier. Ordering is byte-wise lexicographic.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(Arc<str>);

impl EntityId {
    pub fn new(id: impl AsRef<str>) -> Result<Self> {
        let id = id.as_ref();
        if id.is_empty() {
            return Err(Error::EmptyId);
        }
        Ok(EntityId(Arc::from(id)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for EntityId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// An unordered pair of distinct entities, stored with `a < b`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct EntityPair {
    a: EntityId,
    b: EntityId,
}

impl EntityPair {
    /// Canonicalizes `(x, y)`; `(x, y)` and `(y, x)` produce the same value.
    pub fn new(x: EntityId, y: EntityId) -> Result<Self> {
        match x.cmp(&y) {
            std::cmp::Ordering::Less => Ok(EntityPair { a: x, b: y }),
            std::cmp::Ordering::Greater => Ok(EntityPair { a: y, b: x }),
            std::cmp::Ordering::Equal => Err(Error::SelfLink(x.to_string())),
        }
    }

    pub fn a(&self) -> &EntityId {
        &self.a
    }

    pub fn b(&self) -> &EntityId {
        &self.b
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        &self.a == id || &self.b == id
    }
}

impl fmt::Display for EntityPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

/// Free-function form of [`EntityPair::new`].
pub fn canonical_pair(x: &EntityId, y: &EntityId) -> Result<EntityPair> {
    EntityPair::new(x.clone(), y.clone())
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Label {
    Duplicate,
    Distinct,
}

impl Label {
    pub fn is_duplicate(self) -> bool {
        matches!(self, Label::Duplicate)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct LabeledPair {
    pub pair: EntityPair,
    pub label: Label,
}

#[derive(Clone, PartialEq, Debug)]
pub struct ScoredPair {
    pub pair: EntityPair,
    pub p: f64,
}

#[derive(Clone, PartialEq, Debug)]
pub struct WeightedPair {
    pub pair: EntityPair,
    pub w: f64,
}

/// A set of same-as links. Not necessarily transitively closed.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct Linkset {
    links: BTreeSet<EntityPair>,
}

impl Linkset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, pair: EntityPair) -> bool {
        self.links.insert(pair)
    }

    pub fn contains(&self, pair: &EntityPair) -> bool {
        self.links.contains(pair)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &EntityPair> {
        self.links.iter()
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = EntityPair>) {
        self.links.extend(other);
    }

    pub fn intersection_len(&self, other: &Linkset) -> usize {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.iter().filter(|p| large.contains(p)).count()
    }

    pub fn is_subset(&self, other: &Linkset) -> bool {
        self.links.is_subset(&other.links)
    }

    /// Entities touched by at least one link, sorted.
    pub fn entities(&self) -> Vec<EntityId> {
        let set: BTreeSet<&EntityId> = self.links.iter().flat_map(|p| [&p.a, &p.b]).collect();
        set.into_iter().cloned().collect()
    }

    /// True when `(a,b), (b,c)` in the set always implies `(a,c)`.
    pub fn is_transitive(&self) -> bool {
        let mut adjacency: HashMap<&EntityId, BTreeSet<&EntityId>> = HashMap::new();
        for p in &self.links {
            adjacency.entry(&p.a).or_default().insert(&p.b);
            adjacency.entry(&p.b).or_default().insert(&p.a);
        }
        for (center, neighbours) in &adjacency {
            let ns: Vec<_> = neighbours.iter().collect();
            for (i, x) in ns.iter().enumerate() {
                for y in &ns[i + 1..] {
                    if !adjacency[**x].contains(**y) {
                        log::trace!("transitivity violated at {center}: {x} / {y}");
                        return false;
                    }
                }
            }
        }
        true
    }
}

impl FromIterator<EntityPair> for Linkset {
    fn from_iter<I: IntoIterator<Item = EntityPair>>(iter: I) -> Self {
        Linkset {
            links: iter.into_iter().collect(),
        }
    }
}

impl IntoIterator for Linkset {
    type Item = EntityPair;
    type IntoIter = std::collections::btree_set::IntoIter<EntityPair>;

    fn into_iter(self) -> Self::IntoIter {
        self.links.into_iter()
    }
}

impl<'a> IntoIterator for &'a Linkset {
    type Item = &'a EntityPair;
    type IntoIter = std::collections::btree_set::Iter<'a, EntityPair>;

    fn into_iter(self) -> Self::IntoIter {
        self.links.iter()
    }
}

/// Disjoint, non-empty clusters. Canonical form: members sorted within each
/// cluster, clusters ordered by their smallest member.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ClusterPartition {
    clusters: Vec<Vec<EntityId>>,
}

impl ClusterPartition {
    pub fn new(clusters: Vec<Vec<EntityId>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut clusters = clusters;
        for c in &mut clusters {
            if c.is_empty() {
                return Err(Error::InvalidPartition("empty cluster".into()));
            }
            c.sort();
            for id in c.iter() {
                if !seen.insert(id.clone()) {
                    return Err(Error::InvalidPartition(format!(
                        "entity `{id}` appears in more than one cluster"
                    )));
                }
            }
        }
        clusters.sort_by(|x, y| x[0].cmp(&y[0]));
        Ok(ClusterPartition { clusters })
    }

    /// Like [`ClusterPartition::new`], additionally requiring the clusters to
    /// cover exactly `universe`.
    pub fn with_universe(clusters: Vec<Vec<EntityId>>, universe: &[EntityId]) -> Result<Self> {
        let partition = Self::new(clusters)?;
        let covered: BTreeSet<&EntityId> = partition.clusters.iter().flatten().collect();
        let expected: BTreeSet<&EntityId> = universe.iter().collect();
        if expected.len() != universe.len() {
            return Err(Error::InvalidPartition("universe has repeated entities".into()));
        }
        if covered != expected {
            return Err(Error::InvalidPartition(
                "clusters do not cover the universe exactly".into(),
            ));
        }
        Ok(partition)
    }

    pub fn clusters(&self) -> &[Vec<EntityId>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// All entities, sorted.
    pub fn universe(&self) -> Vec<EntityId> {
        let mut all: Vec<EntityId> = self.clusters.iter().flatten().cloned().collect();
        all.sort();
        all
    }

    /// Every intra-cluster pair.
    pub fn linkset(&self) -> Linkset {
        let mut links = Linkset::new();
        for c in &self.clusters {
            for (i, x) in c.iter().enumerate() {
                for y in &c[i + 1..] {
                    links.insert(EntityPair {
                        a: x.clone(),
                        b: y.clone(),
                    });
                }
            }
        }
        links
    }
}

/// Known duplicate clusters over every generated entity.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GroundTruth {
    pub clusters: ClusterPartition,
}

impl GroundTruth {
    pub fn new(clusters: ClusterPartition) -> Self {
        GroundTruth { clusters }
    }

    pub fn universe(&self) -> Vec<EntityId> {
        self.clusters.universe()
    }
}

/// The gold linkset: all intra-cluster pairs of the ground truth.
pub fn gold_linkset(truth: &GroundTruth) -> Linkset {
    truth.clusters.linkset()
}

/// Fixed-dimension real vectors keyed by entity, stored in id order.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dim: usize,
    ids: Vec<EntityId>,
    data: Vec<f64>,
    index: HashMap<EntityId, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, rows: Vec<(EntityId, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidTable("dimension must be positive".into()));
        }
        let mut rows = rows;
        rows.sort_by(|x, y| x.0.cmp(&y.0));
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        let mut index = HashMap::with_capacity(rows.len());
        for (id, v) in rows {
            if v.len() != dim {
                return Err(Error::InvalidTable(format!(
                    "`{id}` has {} components, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidTable(format!("`{id}` has a non-finite component")));
            }
            if index.insert(id.clone(), ids.len()).is_some() {
                return Err(Error::DuplicateId(id.to_string()));
            }
            ids.push(id);
            data.extend_from_slice(&v);
        }
        Ok(EmbeddingTable {
            dim,
            ids,
            data,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Identifiers in ascending order; row `i` belongs to `ids()[i]`.
    pub fn ids(&self) -> &[EntityId] {
        &self.ids
    }

    pub fn index_of(&self, id: &EntityId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector(&self, id: &EntityId) -> Result<&[f64]> {
        self.index_of(id)
            .map(|i| self.row(i))
            .ok_or_else(|| Error::UnknownEntity(id.to_string()))
    }
}
