use std::path::{Path, PathBuf};

use linkforge_core::classifier::DEFAULT_EPSILON;
use linkforge_core::editing::DEFAULT_NODE_BUDGET;
use linkforge_core::io::{self, EMBEDDINGS_FILE, TRUTH_FILE};
use linkforge_core::FeatureSpec;

use crate::stage::{fail, AtStage, Outcome, Stage};

/// Settings of a full pipeline run. Read from a `key=value` file, then
/// overridden by command-line flags.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub embeddings: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub k: usize,
    pub feature: FeatureSpec,
    pub theta: Option<f64>,
    pub sweep: bool,
    pub max_component: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub node_budget: u64,
    /// Labeled pairs drawn from the truth when no labels file is given.
    pub sample_labels: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            embeddings: None,
            labels: None,
            truth: None,
            out_dir: PathBuf::from("linkforge-out"),
            k: 3,
            feature: FeatureSpec::Cosine,
            theta: None,
            sweep: false,
            max_component: 50,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            node_budget: DEFAULT_NODE_BUDGET,
            sample_labels: 100,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Outcome<T> {
    value
        .parse()
        .or_else(|_| fail(Stage::Config, format!("bad value `{value}` for `{key}`")))
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Outcome<()> {
        match key {
            "embeddings" => self.embeddings = Some(value.into()),
            "labels" => self.labels = Some(value.into()),
            "truth" => self.truth = Some(value.into()),
            "benchmark_dir" => {
                let dir = Path::new(value);
                self.embeddings = Some(dir.join(EMBEDDINGS_FILE));
                self.truth = Some(dir.join(TRUTH_FILE));
            }
            "out_dir" => self.out_dir = value.into(),
            "k" => self.k = parse(key, value)?,
            "feature" => self.feature = value.parse().at(Stage::Config)?,
            "theta" => self.theta = Some(parse(key, value)?),
            "sweep" => self.sweep = parse(key, value)?,
            "max_component" => self.max_component = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "node_budget" => self.node_budget = parse(key, value)?,
            "sample_labels" => self.sample_labels = parse(key, value)?,
            other => return fail(Stage::Config, format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Outcome<Self> {
        let mut cfg = PipelineConfig::default();
        for (k, v) in io::read_kv(path).at(Stage::Config)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Outcome<()> {
        if self.embeddings.is_none() {
            return fail(Stage::Config, "no embeddings file given");
        }
        if self.labels.is_none() && self.truth.is_none() {
            return fail(Stage::Config, "need a labels file or a truth file to sample labels from");
        }
        if self.theta.is_none() && !self.sweep {
            return fail(Stage::Config, "set `theta` or enable `sweep`");
        }
        if self.sweep && self.truth.is_none() {
            return fail(Stage::Config, "`sweep` needs a truth file");
        }
        if let Some(t) = self.theta {
            if !(t > 0.0 && t < 1.0) {
                return fail(Stage::Config, format!("theta {t} outside (0, 1)"));
            }
        }
        if self.k == 0 {
            return fail(Stage::Config, "k must be positive");
        }
        if self.max_component < 2 {
            return fail(Stage::Config, "max_component must be at least 2");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return fail(Stage::Config, format!("epsilon {} outside (0, 0.5)", self.epsilon));
        }
        Ok(())
    }

    /// The effective settings as `key=value` pairs.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("embeddings", path(&self.embeddings));
        push("labels", path(&self.labels));
        push("truth", path(&self.truth));
        push("out_dir", Some(self.out_dir.display().to_string()));
        push("k", Some(self.k.to_string()));
        push("feature", Some(self.feature.to_string()));
        push("theta", self.theta.map(|t| t.to_string()));
        push("sweep", Some(self.sweep.to_string()));
        push("max_component", Some(self.max_component.to_string()));
        push("epsilon", Some(self.epsilon.to_string()));
        push("seed", Some(self.seed.to_string()));
        push("node_budget", Some(self.node_budget.to_string()));
        push("sample_labels", Some(self.sample_labels.to_string()));
        out
    }
}
