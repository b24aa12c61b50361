//! Entity matching in knowledge graphs: nearest-neighbour candidate pairs,
//! a logistic-regression pair classifier, and repair of the resulting links
//! into transitive clusters by exact weighted cluster editing.

pub mod candidates;
pub mod classifier;
pub mod editing;
mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod model;
pub mod rng;
pub mod synth;

pub use candidates::{candidate_pairs, knn, CandidateSet};
pub use classifier::{FeatureSpec, LrModel, PairClassifier, PairScorer};
pub use editing::{solve_exact, EditingInstance, EditingSolution, SolverOptions};
pub use error::{Error, Result};
pub use eval::{MetricRow, SweepReport, Variant};
pub use graph::{Component, Cutoff};
pub use model::{
    ClusterPartition, EmbeddingTable, EntityId, EntityPair, GroundTruth, Label, LabeledPair, Linkset,
    ScoredPair, WeightedPair,
};
pub use synth::{GeneratorConfig, SynthBenchmark};
