//! Semi-synthetic benchmarks: duplicate clusters produced by renaming entity
//! copies across subgraphs, and embeddings that place duplicates together.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::model::{ClusterPartition, EmbeddingTable, EntityId, EntityPair, GroundTruth, Label, LabeledPair};
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub n_base: usize,
    pub n_subgraphs: usize,
    /// Probability that a given copy of an entity is renamed in its subgraph.
    pub sample_rate: f64,
    pub dim: usize,
    pub noise_sigma: f64,
    /// Lower bound on the expected distance between two cluster centers.
    pub cluster_sep: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_base: 1000,
            n_subgraphs: 4,
            sample_rate: 0.25,
            dim: 100,
            noise_sigma: 0.07,
            cluster_sep: 1.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sample_rate) {
            return Err(Error::Parameter(format!(
                "sample rate {} outside [0, 1]",
                self.sample_rate
            )));
        }
        if self.n_subgraphs < 2 {
            return Err(Error::Parameter("at least two subgraphs are required".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Parameter(format!("noise sigma {} must be >= 0", self.noise_sigma)));
        }
        if !(self.cluster_sep >= 0.0 && self.cluster_sep.is_finite()) {
            return Err(Error::Parameter(format!(
                "cluster separation {} must be >= 0",
                self.cluster_sep
            )));
        }
        if self.dim == 0 {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        Ok(())
    }

    /// `key=value` lines, one per field, in a fixed order.
    pub fn to_kv(&self) -> String {
        format!(
            "n_base={}\nsubgraphs={}\nrate={}\ndim={}\nnoise={}\nsep={}\nseed={}\n",
            self.n_base,
            self.n_subgraphs,
            self.sample_rate,
            self.dim,
            self.noise_sigma,
            self.cluster_sep,
            self.seed
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = GeneratorConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse("config", lineno + 1, "expected key=value"))?;
            let value = value.trim();
            let line = lineno + 1;
            match key.trim() {
                "n_base" => cfg.n_base = parse_value(key, value, line)?,
                "subgraphs" => cfg.n_subgraphs = parse_value(key, value, line)?,
                "rate" => cfg.sample_rate = parse_value(key, value, line)?,
                "dim" => cfg.dim = parse_value(key, value, line)?,
                "noise" => cfg.noise_sigma = parse_value(key, value, line)?,
                "sep" => cfg.cluster_sep = parse_value(key, value, line)?,
                "seed" => cfg.seed = parse_value(key, value, line)?,
                _ => {}
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse("config", line, format!("bad value `{value}` for {key}")))
}

#[derive(Clone, Debug)]
pub struct SynthBenchmark {
    pub embeddings: EmbeddingTable,
    pub truth: GroundTruth,
    pub config: GeneratorConfig,
}

fn base_id(i: usize) -> String {
    format!("e{i:06}")
}

/// Duplicate clusters: every base entity has one copy per subgraph, and each
/// copy is independently renamed to `<base-id>/<subgraph>` with probability
/// `sample_rate`. Unrenamed copies share the base identifier.
pub fn generate_clusters(cfg: &GeneratorConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, Stream::Clusters);
    let mut clusters = Vec::with_capacity(cfg.n_base);
    for i in 0..cfg.n_base {
        let base = base_id(i);
        let mut members = Vec::with_capacity(cfg.n_subgraphs);
        let mut kept_original = false;
        for s in 1..=cfg.n_subgraphs {
            if rng.random_bool(cfg.sample_rate) {
                members.push(EntityId::new(format!("{base}/{s}"))?);
            } else {
                kept_original = true;
            }
        }
        if kept_original {
            members.push(EntityId::new(&base)?);
        }
        clusters.push(members);
    }
    Ok(GroundTruth::new(ClusterPartition::new(clusters)?))
}

/// Side length of a centered hypercube whose uniform points are at least
/// `sep` apart in expectation. Uses E[D] >= E[D^2]^(3/2) / E[D^4]^(1/2)
/// with the exact moments of the squared distance between two uniform points.
pub fn hypercube_side(dim: usize, sep: f64) -> f64 {
    let d = dim as f64;
    // per unit side: E[D^2] = d/6, Var(D^2) = 7d/180
    let m2 = d / 6.0;
    let m4 = 7.0 * d / 180.0 + m2 * m2;
    let unit_lower = m2.powf(1.5) / m4.sqrt();
    sep / unit_lower
}

/// One center per ground-truth cluster, members scattered around it with
/// isotropic Gaussian noise.
pub fn generate_embeddings(truth: &GroundTruth, cfg: &GeneratorConfig) -> Result<EmbeddingTable> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, Stream::Embeddings);
    let half = hypercube_side(cfg.dim, cfg.cluster_sep) / 2.0;
    let uniform = Uniform::new_inclusive(-half, half)
        .map_err(|e| Error::Parameter(format!("hypercube: {e}")))?;
    let noise = Normal::new(0.0, cfg.noise_sigma)
        .map_err(|e| Error::Parameter(format!("noise: {e}")))?;
    let mut rows = Vec::new();
    for cluster in truth.clusters.clusters() {
        let center: Vec<f64> = (0..cfg.dim).map(|_| uniform.sample(&mut rng)).collect();
        for id in cluster {
            let v = center
                .iter()
                .map(|c| {
                    if cfg.noise_sigma > 0.0 {
                        c + noise.sample(&mut rng)
                    } else {
                        *c
                    }
                })
                .collect();
            rows.push((id.clone(), v));
        }
    }
    EmbeddingTable::new(cfg.dim, rows)
}

pub fn generate_benchmark(cfg: &GeneratorConfig) -> Result<SynthBenchmark> {
    let truth = generate_clusters(cfg)?;
    let embeddings = generate_embeddings(&truth, cfg)?;
    Ok(SynthBenchmark {
        embeddings,
        truth,
        config: cfg.clone(),
    })
}

/// Fraction of duplicate pairs among all pairs, and among `candidates`.
pub fn class_ratio(truth: &GroundTruth, candidates: &BTreeSet<EntityPair>) -> Result<(f64, f64)> {
    if candidates.is_empty() {
        return Err(Error::UndefinedRatio);
    }
    let n = truth.clusters.clusters().iter().map(Vec::len).sum::<usize>() as f64;
    let gold = truth.clusters.linkset();
    let all_pairs = n * (n - 1.0) / 2.0;
    let ratio_all = if all_pairs > 0.0 {
        gold.len() as f64 / all_pairs
    } else {
        0.0
    };
    let hits = candidates.iter().filter(|p| gold.contains(p)).count();
    Ok((ratio_all, hits as f64 / candidates.len() as f64))
}

/// Labels `n` candidate pairs drawn uniformly without replacement, using
/// the ground truth as the expert. Takes every candidate when `n` exceeds
/// their number.
pub fn sample_labels(
    truth: &GroundTruth,
    candidates: &BTreeSet<EntityPair>,
    n: usize,
    seed: u64,
) -> Vec<LabeledPair> {
    let gold = truth.clusters.linkset();
    let pool: Vec<&EntityPair> = candidates.iter().collect();
    let mut rng = stream_rng(seed, Stream::Sampling);
    let mut picked = rand::seq::index::sample(&mut rng, pool.len(), n.min(pool.len())).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| LabeledPair {
            pair: pool[i].clone(),
            label: if gold.contains(pool[i]) {
                Label::Duplicate
            } else {
                Label::Distinct
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_base: usize, rate: f64) -> GeneratorConfig {
        GeneratorConfig {
            n_base,
            sample_rate: rate,
            dim: 8,
            ..GeneratorConfig::default()
        }
    }

    fn sizes(truth: &GroundTruth) -> Vec<usize> {
        truth.clusters.clusters().iter().map(Vec::len).collect()
    }

    #[test]
    fn no_sampling_gives_singletons() {
        let truth = generate_clusters(&cfg(200, 0.0)).unwrap();
        assert_eq!(truth.clusters.len(), 200);
        assert!(sizes(&truth).iter().all(|&s| s == 1));
        assert_eq!(truth.universe().len(), 200);
    }

    #[test]
    fn full_sampling_gives_full_clusters() {
        let truth = generate_clusters(&cfg(200, 1.0)).unwrap();
        assert!(sizes(&truth).iter().all(|&s| s == 4));
        // the original identifier disappears when every copy is renamed
        assert!(truth.universe().iter().all(|id| id.as_str().contains('/')));
    }

    #[test]
    fn renaming_convention() {
        let truth = generate_clusters(&cfg(50, 0.5)).unwrap();
        for c in truth.clusters.clusters() {
            let base = c[0].as_str().split('/').next().unwrap().to_owned();
            for id in c {
                let s = id.as_str();
                assert!(s == base || s.starts_with(&format!("{base}/")), "{s} vs {base}");
            }
        }
    }

    #[test]
    fn rejects_invalid_config() {
        assert!(generate_clusters(&cfg(10, 1.5)).is_err());
        let mut c = cfg(10, 0.5);
        c.n_subgraphs = 1;
        assert!(generate_clusters(&c).is_err());
        c.n_subgraphs = 4;
        c.noise_sigma = -1.0;
        assert!(generate_clusters(&c).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let c = cfg(300, 0.3);
        let a = generate_benchmark(&c).unwrap();
        let b = generate_benchmark(&c).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.embeddings.ids(), b.embeddings.ids());
        for i in 0..a.embeddings.len() {
            assert_eq!(a.embeddings.row(i), b.embeddings.row(i));
        }
        let other = generate_benchmark(&GeneratorConfig { seed: 9, ..c }).unwrap();
        assert_ne!(a.truth, other.truth);
    }

    #[test]
    fn zero_noise_collapses_clusters() {
        let c = GeneratorConfig {
            noise_sigma: 0.0,
            ..cfg(100, 0.5)
        };
        let b = generate_benchmark(&c).unwrap();
        for cluster in b.truth.clusters.clusters() {
            let first = b.embeddings.vector(&cluster[0]).unwrap();
            for id in cluster {
                assert_eq!(b.embeddings.vector(id).unwrap(), first);
            }
        }
        assert_eq!(b.embeddings.ids(), b.truth.universe().as_slice());
    }

    #[test]
    fn nearest_neighbour_is_co_cluster_member() {
        // brute-force distance check on a 50-entity instance
        let c = GeneratorConfig {
            n_base: 20,
            sample_rate: 0.5,
            dim: 16,
            noise_sigma: 0.01,
            cluster_sep: 5.0,
            seed: 3,
            ..GeneratorConfig::default()
        };
        let b = generate_benchmark(&c).unwrap();
        let t = &b.embeddings;
        assert!(t.len() >= 50, "only {} entities", t.len());
        let cluster_of: std::collections::HashMap<_, _> = b
            .truth
            .clusters
            .clusters()
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| c.iter().map(move |id| (id.clone(), (ci, c.len()))))
            .collect();
        for i in 0..t.len() {
            let (ci, size) = cluster_of[&t.ids()[i]];
            if size < 2 {
                continue;
            }
            let nearest = (0..t.len())
                .filter(|&j| j != i)
                .min_by(|&x, &y| {
                    let dx: f64 = t.row(i).iter().zip(t.row(x)).map(|(a, b)| (a - b).powi(2)).sum();
                    let dy: f64 = t.row(i).iter().zip(t.row(y)).map(|(a, b)| (a - b).powi(2)).sum();
                    dx.total_cmp(&dy)
                })
                .unwrap();
            assert_eq!(cluster_of[&t.ids()[nearest]].0, ci);
        }
    }

    #[test]
    fn hypercube_meets_expected_separation() {
        // Monte Carlo check of the analytic lower bound.
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for dim in [1usize, 2, 10, 100] {
            let side = hypercube_side(dim, 2.0);
            let u = Uniform::new(-side / 2.0, side / 2.0).unwrap();
            let trials = 20_000;
            let mean: f64 = (0..trials)
                .map(|_| {
                    (0..dim)
                        .map(|_| (u.sample(&mut rng) - u.sample(&mut rng)).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum::<f64>()
                / trials as f64;
            assert!(mean >= 2.0, "dim {dim}: mean distance {mean}");
            assert!(mean <= 2.0 * 1.35, "dim {dim}: bound too loose ({mean})");
        }
    }

    #[test]
    fn class_ratio_examples() {
        let id = |s: &str| EntityId::new(s).unwrap();
        let singles = GroundTruth::new(ClusterPartition::new(vec![vec![id("a")], vec![id("b")]]).unwrap());
        let cands: BTreeSet<_> = [EntityPair::new(id("a"), id("b")).unwrap()].into_iter().collect();
        assert_eq!(class_ratio(&singles, &cands).unwrap().0, 0.0);

        let pair = GroundTruth::new(ClusterPartition::new(vec![vec![id("a"), id("b")]]).unwrap());
        assert_eq!(class_ratio(&pair, &cands).unwrap(), (1.0, 1.0));
        assert!(matches!(
            class_ratio(&pair, &BTreeSet::new()),
            Err(Error::UndefinedRatio)
        ));
    }

    #[test]
    fn config_round_trips_through_kv() {
        let c = GeneratorConfig {
            sample_rate: 0.1,
            noise_sigma: 0.37,
            seed: 12345678901,
            ..GeneratorConfig::default()
        };
        assert_eq!(GeneratorConfig::from_kv(&c.to_kv()).unwrap(), c);
    }

    #[test]
    fn label_sample_is_uniform_subset() {
        let truth = generate_clusters(&cfg(100, 0.5)).unwrap();
        let gold = truth.clusters.linkset();
        let ids = truth.universe();
        let candidates: BTreeSet<EntityPair> = ids
            .windows(2)
            .map(|w| EntityPair::new(w[0].clone(), w[1].clone()).unwrap())
            .collect();
        let labels = sample_labels(&truth, &candidates, 40, 9);
        assert_eq!(labels.len(), 40);
        assert!(labels.windows(2).all(|w| w[0].pair < w[1].pair));
        for lp in &labels {
            assert!(candidates.contains(&lp.pair));
            assert_eq!(lp.label.is_duplicate(), gold.contains(&lp.pair));
        }
        assert_eq!(labels, sample_labels(&truth, &candidates, 40, 9));
        assert_eq!(sample_labels(&truth, &candidates, 10_000, 9).len(), candidates.len());
    }
}
