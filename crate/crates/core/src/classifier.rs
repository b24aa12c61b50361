//! Symmetric pair features and an elastic-net logistic-regression classifier.
//!
//! The penalized objective is
//!
//! ```text
//! f(w, b) = mean_i logloss(y_i, w·x_i + b) + λ (α ‖w‖₁ + (1 − α)/2 ‖w‖²)
//! ```
//!
//! on standardized features, minimized by proximal Newton steps (coordinate
//! descent on the local quadratic model) with a backtracking line search.
//! The intercept is not penalized.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{EmbeddingTable, EntityPair, Label, LabeledPair, ScoredPair};
use crate::rng::{stream_rng, Stream};

/// Probabilities are clamped to this range before any logit is taken.
pub const PROB_FLOOR: f64 = 1e-12;
pub const PROB_CEIL: f64 = 1.0 - 1e-12;

/// Default probability assigned to expert-labeled distinct pairs.
pub const DEFAULT_EPSILON: f64 = 1e-6;

pub const GRADIENT_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 1_000;
pub const CV_FOLDS: usize = 5;

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, PROB_CEIL)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureSpec {
    Cosine,
    Hadamard,
}

impl FeatureSpec {
    pub fn len(self, dim: usize) -> usize {
        match self {
            FeatureSpec::Cosine => 1,
            FeatureSpec::Hadamard => dim,
        }
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSpec::Cosine => "cosine",
            FeatureSpec::Hadamard => "hadamard",
        })
    }
}

impl FromStr for FeatureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(FeatureSpec::Cosine),
            "hadamard" => Ok(FeatureSpec::Hadamard),
            other => Err(Error::Parameter(format!("unknown feature `{other}`"))),
        }
    }
}

fn features_of(u: &[f64], v: &[f64], spec: FeatureSpec) -> Option<Vec<f64>> {
    match spec {
        FeatureSpec::Cosine => {
            let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if nu == 0.0 || nv == 0.0 {
                return None;
            }
            Some(vec![dot / (nu * nv)])
        }
        FeatureSpec::Hadamard => Some(u.iter().zip(v).map(|(a, b)| a * b).collect()),
    }
}

/// Features of an unordered pair; identical for either endpoint order.
pub fn featurize(table: &EmbeddingTable, pair: &EntityPair, spec: FeatureSpec) -> Result<Vec<f64>> {
    let u = table.vector(pair.a())?;
    let v = table.vector(pair.b())?;
    features_of(u, v, spec).ok_or_else(|| {
        let zero = if u.iter().all(|x| *x == 0.0) { pair.a() } else { pair.b() };
        Error::DegenerateFeature(zero.to_string())
    })
}

/// Anything that maps a pair's feature vector to a duplicate probability.
pub trait PairClassifier: Sync {
    fn feature_spec(&self) -> FeatureSpec;
    fn probability(&self, features: &[f64]) -> f64;
}

#[derive(Clone, Debug, PartialEq)]
pub struct LrModel {
    pub feature: FeatureSpec,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub alpha: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(z)) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl PairClassifier for LrModel {
    fn feature_spec(&self) -> FeatureSpec {
        self.feature
    }

    fn probability(&self, features: &[f64]) -> f64 {
        let z: f64 = self
            .weights
            .iter()
            .zip(features)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.intercept;
        sigmoid(z)
    }
}

impl LrModel {
    /// Constant-probability model: zero weights, intercept `logit(p)`.
    pub fn constant(feature: FeatureSpec, dim: usize, p: f64) -> Self {
        let p = clamp_probability(p);
        LrModel {
            feature,
            dim,
            weights: vec![0.0; feature.len(dim)],
            intercept: (p / (1.0 - p)).ln(),
            lambda: 0.0,
            alpha: 0.0,
        }
    }

    pub fn to_text(&self) -> String {
        let weights: Vec<String> = self.weights.iter().map(|w| w.to_string()).collect();
        format!(
            "feature={}\ndim={}\nlambda={}\nalpha={}\nintercept={}\nweights={}\n",
            self.feature,
            self.dim,
            self.lambda,
            self.alpha,
            self.intercept,
            weights.join(",")
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields: HashMap<&str, &str> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse("model", i + 1, "expected key=value"))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::parse("model", 0, format!("missing `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::parse("model", 0, format!("bad number for `{k}`")))
        };
        let feature: FeatureSpec = get("feature")?.parse()?;
        let dim: usize = get("dim")?
            .parse()
            .map_err(|_| Error::parse("model", 0, "bad dim"))?;
        let raw = get("weights")?;
        let weights = if raw.is_empty() {
            Vec::new()
        } else {
            raw.split(',')
                .map(|w| {
                    w.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse("model", 0, format!("bad weight `{w}`")))
                })
                .collect::<Result<Vec<_>>>()?
        };
        if weights.len() != feature.len(dim) {
            return Err(Error::parse(
                "model",
                0,
                format!("expected {} weights, found {}", feature.len(dim), weights.len()),
            ));
        }
        let model = LrModel {
            feature,
            dim,
            weights,
            intercept: num("intercept")?,
            lambda: num("lambda")?,
            alpha: num("alpha")?,
        };
        if !model.intercept.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::parse("model", 0, "non-finite parameter"));
        }
        Ok(model)
    }
}

/// Row-major design matrix with binary targets.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    fn n_features(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

/// Elastic-net penalty strength and mixing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Penalty {
    pub lambda: f64,
    pub alpha: f64,
}

/// The fixed hyperparameter grid: λ log-spaced over [1e-4, 1], α ∈ {0, ½, 1}.
pub fn default_grid() -> Vec<Penalty> {
    let mut grid = Vec::new();
    for e in [-4, -3, -2, -1, 0] {
        for alpha in [0.0, 0.5, 1.0] {
            grid.push(Penalty {
                lambda: 10f64.powi(e),
                alpha,
            });
        }
    }
    grid
}

/// Penalized loss at `(weights, intercept)`.
pub fn penalized_loss(data: &Dataset, weights: &[f64], intercept: f64, penalty: Penalty) -> f64 {
    smooth_loss(data, weights, intercept, penalty)
        + penalty.lambda * penalty.alpha * weights.iter().map(|w| w.abs()).sum::<f64>()
}

/// Gradient of [`penalized_loss`] wherever it is differentiable (no zero
/// weight under an active L1 term). Last entry is the intercept component.
pub fn penalized_gradient(data: &Dataset, weights: &[f64], intercept: f64, penalty: Penalty) -> Vec<f64> {
    let mut g = smooth_gradient(data, weights, intercept, penalty);
    for (gi, w) in g.iter_mut().zip(weights) {
        *gi += penalty.lambda * penalty.alpha * w.signum();
    }
    g
}

fn smooth_loss(data: &Dataset, weights: &[f64], intercept: f64, penalty: Penalty) -> f64 {
    let n = data.rows.len() as f64;
    let log_loss: f64 = data
        .rows
        .iter()
        .zip(&data.targets)
        .map(|(x, &y)| {
            let z = dot(weights, x) + intercept;
            // y·softplus(−z) + (1−y)·softplus(z), without cancellation for 0/1 targets
            if y == 1.0 {
                softplus(-z)
            } else if y == 0.0 {
                softplus(z)
            } else {
                softplus(z) - y * z
            }
        })
        .sum::<f64>()
        / n;
    log_loss + penalty.lambda * (1.0 - penalty.alpha) * 0.5 * dot(weights, weights)
}

fn smooth_gradient(data: &Dataset, weights: &[f64], intercept: f64, penalty: Penalty) -> Vec<f64> {
    let n = data.rows.len() as f64;
    let m = weights.len();
    let mut g = vec![0.0; m + 1];
    for (x, &y) in data.rows.iter().zip(&data.targets) {
        let r = sigmoid(dot(weights, x) + intercept) - y;
        for (gj, xj) in g[..m].iter_mut().zip(x) {
            *gj += r * xj;
        }
        g[m] += r;
    }
    for gj in &mut g {
        *gj /= n;
    }
    let ridge = penalty.lambda * (1.0 - penalty.alpha);
    for (gj, w) in g[..m].iter_mut().zip(weights) {
        *gj += ridge * w;
    }
    g
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Norm of the minimum-norm subgradient; zero exactly at the optimum.
fn stationarity(grad: &[f64], x: &[f64], l1: f64) -> f64 {
    let m = x.len() - 1;
    let mut s = grad[m] * grad[m];
    for j in 0..m {
        let r = if x[j] != 0.0 {
            grad[j] + l1 * x[j].signum()
        } else {
            soft_threshold(grad[j], l1)
        };
        s += r * r;
    }
    s.sqrt()
}

/// Hessian of the smooth part; last row and column belong to the intercept.
fn smooth_hessian(data: &Dataset, x: &[f64], ridge: f64) -> Vec<f64> {
    let m = x.len() - 1;
    let k = m + 1;
    let n = data.rows.len() as f64;
    let mut h = vec![0.0; k * k];
    let mut ext = vec![1.0; k];
    for row in &data.rows {
        let p = sigmoid(dot(&x[..m], row) + x[m]);
        let c = p * (1.0 - p) / n;
        ext[..m].copy_from_slice(row);
        for a in 0..k {
            let ca = c * ext[a];
            for b in a..k {
                h[a * k + b] += ca * ext[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            h[a * k + b] = h[b * k + a];
        }
    }
    for j in 0..m {
        h[j * k + j] += ridge;
    }
    h
}

/// Minimizes `g·d + ½ dᵀHd + l1 ‖w + d‖₁` by cyclic coordinate descent.
fn newton_direction(h: &[f64], grad: &[f64], x: &[f64], l1: f64) -> Vec<f64> {
    let k = x.len();
    let m = k - 1;
    let mut d = vec![0.0; k];
    let mut hd = vec![0.0; k];
    for _ in 0..1000 {
        let mut largest = 0.0_f64;
        for j in 0..k {
            let a = h[j * k + j];
            if a <= 0.0 {
                continue;
            }
            let c = grad[j] + hd[j] - a * d[j];
            let next = if j == m {
                -c / a
            } else {
                soft_threshold(a * x[j] - c, l1) / a - x[j]
            };
            let delta = next - d[j];
            if delta != 0.0 {
                for (i, hdi) in hd.iter_mut().enumerate() {
                    *hdi += h[i * k + j] * delta;
                }
                d[j] = next;
                largest = largest.max(delta.abs() * a.sqrt());
            }
        }
        if largest < 1e-15 {
            break;
        }
    }
    d
}

/// Result of one penalized fit on (already standardized) data.
#[derive(Clone, Debug)]
pub struct Fit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    /// Norm of the minimum-norm subgradient at the returned point.
    pub grad_norm: f64,
}

/// Minimizes the penalized loss until the minimum-norm subgradient is at
/// most `tol`, by proximal Newton steps with a backtracking line search.
pub fn fit_penalized(data: &Dataset, penalty: Penalty, tol: f64, max_iter: usize) -> Result<Fit> {
    let m = data.n_features();
    let l1 = penalty.lambda * penalty.alpha;
    let ridge = penalty.lambda * (1.0 - penalty.alpha);
    let total = |x: &[f64]| {
        smooth_loss(data, &x[..m], x[m], penalty) + l1 * x[..m].iter().map(|w| w.abs()).sum::<f64>()
    };

    let mut x = vec![0.0; m + 1];
    let mut f_x = total(&x);
    let mut grad_norm = f64::INFINITY;
    for iter in 0..max_iter {
        let g = smooth_gradient(data, &x[..m], x[m], penalty);
        grad_norm = stationarity(&g, &x, l1);
        if grad_norm <= tol {
            return Ok(Fit {
                weights: x[..m].to_vec(),
                intercept: x[m],
                iterations: iter,
                grad_norm,
            });
        }
        let h = smooth_hessian(data, &x, ridge);
        let d = newton_direction(&h, &g, &x, l1);
        let l1_norm = |v: &[f64]| v[..m].iter().map(|w| w.abs()).sum::<f64>();
        let moved: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        let decrease = dot(&g, &d) + l1 * (l1_norm(&moved) - l1_norm(&x));
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let f_trial = total(&trial);
            // slack for rounding in the objective itself near the optimum
            if f_trial <= f_x + 1e-4 * step * decrease + 16.0 * f64::EPSILON * f_x.abs().max(1.0) {
                accepted = Some((trial, f_trial));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, f_trial)) if trial != x => {
                x = trial;
                f_x = f_trial;
            }
            // no representable descent left
            _ => {
                return Err(Error::NotConverged {
                    iterations: iter + 1,
                    grad_norm,
                })
            }
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        grad_norm,
    })
}

/// Per-feature centering and scaling; zero-variance features are only
/// centered.
#[derive(Clone, Debug)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[Vec<f64>]) -> Self {
        let m = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; m];
        for r in rows {
            for (mu, x) in mean.iter_mut().zip(r) {
                *mu += x / n;
            }
        }
        let mut scale = vec![0.0; m];
        for r in rows {
            for ((s, x), mu) in scale.iter_mut().zip(r).zip(&mean) {
                *s += (x - mu) * (x - mu) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
        }
        Standardizer { mean, scale }
    }

    fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .zip(&self.mean)
                    .zip(&self.scale)
                    .map(|((x, mu), s)| (x - mu) / s)
                    .collect()
            })
            .collect()
    }

    /// Maps standardized-space parameters back to raw feature space.
    fn unscale(&self, weights: &[f64], intercept: f64) -> (Vec<f64>, f64) {
        let raw: Vec<f64> = weights.iter().zip(&self.scale).map(|(w, s)| w / s).collect();
        let shift: f64 = raw.iter().zip(&self.mean).map(|(w, mu)| w * mu).sum();
        (raw, intercept - shift)
    }
}

fn fit_raw(rows: &[Vec<f64>], targets: &[f64], penalty: Penalty) -> Result<(Vec<f64>, f64)> {
    let scaler = Standardizer::fit(rows);
    let data = Dataset {
        rows: scaler.apply(rows),
        targets: targets.to_vec(),
    };
    let fit = fit_penalized(&data, penalty, GRADIENT_TOLERANCE, MAX_ITERATIONS)?;
    Ok(scaler.unscale(&fit.weights, fit.intercept))
}

fn log_loss(rows: &[Vec<f64>], targets: &[f64], weights: &[f64], intercept: f64) -> f64 {
    rows.iter()
        .zip(targets)
        .map(|(x, &y)| {
            let p = clamp_probability(sigmoid(dot(weights, x) + intercept));
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum()
}

/// Stratified fold assignment, shuffled with the training stream.
fn stratified_folds(targets: &[f64], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = stream_rng(seed, Stream::Training);
    let mut assignment = vec![0; targets.len()];
    for class in [1.0, 0.0] {
        let mut members: Vec<usize> = (0..targets.len()).filter(|&i| targets[i] == class).collect();
        members.shuffle(&mut rng);
        for (rank, i) in members.into_iter().enumerate() {
            assignment[i] = rank % folds;
        }
    }
    assignment
}

/// Fallback penalty when there are too few minority examples to
/// cross-validate.
const FALLBACK_PENALTY: Penalty = Penalty {
    lambda: 1e-2,
    alpha: 0.5,
};

/// Fits the classifier on labeled pairs, choosing `(λ, α)` from `grid` by
/// stratified k-fold cross-validated log-loss. Deterministic given `seed`.
pub fn train(
    labeled: &[LabeledPair],
    table: &EmbeddingTable,
    feature: FeatureSpec,
    grid: &[Penalty],
    seed: u64,
) -> Result<LrModel> {
    if grid.is_empty() {
        return Err(Error::Training("empty hyperparameter grid".into()));
    }
    let mut labeled = labeled.to_vec();
    labeled.sort_by(|x, y| x.pair.cmp(&y.pair));
    labeled.dedup_by(|x, y| x.pair == y.pair);
    let rows = labeled
        .iter()
        .map(|lp| featurize(table, &lp.pair, feature))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = labeled
        .iter()
        .map(|lp| if lp.label.is_duplicate() { 1.0 } else { 0.0 })
        .collect();
    let positives = targets.iter().filter(|&&y| y == 1.0).count();
    let negatives = targets.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Training(format!(
            "training set needs both classes ({positives} duplicate, {negatives} distinct)"
        )));
    }

    let folds = CV_FOLDS.min(positives.min(negatives));
    let penalty = if folds < 2 {
        log::warn!("too few minority examples for cross-validation; using λ=1e-2, α=0.5");
        FALLBACK_PENALTY
    } else {
        let assignment = stratified_folds(&targets, folds, seed);
        let scores = grid
            .par_iter()
            .map(|&penalty| -> Result<f64> {
                let mut total = 0.0;
                for fold in 0..folds {
                    let (mut tr_x, mut tr_y, mut va_x, mut va_y) = (vec![], vec![], vec![], vec![]);
                    for i in 0..rows.len() {
                        if assignment[i] == fold {
                            va_x.push(rows[i].clone());
                            va_y.push(targets[i]);
                        } else {
                            tr_x.push(rows[i].clone());
                            tr_y.push(targets[i]);
                        }
                    }
                    let (w, b) = fit_raw(&tr_x, &tr_y, penalty)?;
                    total += log_loss(&va_x, &va_y, &w, b);
                }
                Ok(total / rows.len() as f64)
            })
            .collect::<Result<Vec<_>>>()?;
        let best = scores
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .expect("grid is non-empty");
        log::debug!("selected {:?} (cv log-loss {:.5})", grid[best], scores[best]);
        grid[best]
    };

    let (weights, intercept) = fit_raw(&rows, &targets, penalty)?;
    Ok(LrModel {
        feature,
        dim: table.dim(),
        weights,
        intercept,
        lambda: penalty.lambda,
        alpha: penalty.alpha,
    })
}

/// Clamped probabilities for every pair, in pair order.
pub fn score(
    model: &dyn PairClassifier,
    pairs: &[EntityPair],
    table: &EmbeddingTable,
) -> Result<Vec<ScoredPair>> {
    pairs
        .par_iter()
        .map(|pair| {
            let x = featurize(table, pair, model.feature_spec())?;
            Ok(ScoredPair {
                pair: pair.clone(),
                p: clamp_probability(model.probability(&x)),
            })
        })
        .collect()
}

/// Replaces model scores with `1 − ε` for labeled duplicates and `ε` for
/// labeled distinct pairs. Labeled pairs missing from `scored` are added.
pub fn apply_label_override(scored: &[ScoredPair], labeled: &[LabeledPair], epsilon: f64) -> Vec<ScoredPair> {
    let labels: HashMap<&EntityPair, Label> = labeled.iter().map(|lp| (&lp.pair, lp.label)).collect();
    let forced = |label: Label| if label.is_duplicate() { 1.0 - epsilon } else { epsilon };
    let mut out: Vec<ScoredPair> = scored
        .iter()
        .map(|sp| match labels.get(&sp.pair) {
            Some(&label) => ScoredPair {
                pair: sp.pair.clone(),
                p: forced(label),
            },
            None => sp.clone(),
        })
        .collect();
    let present: std::collections::HashSet<&EntityPair> = scored.iter().map(|sp| &sp.pair).collect();
    let mut missing: Vec<ScoredPair> = labeled
        .iter()
        .filter(|lp| !present.contains(&lp.pair))
        .map(|lp| ScoredPair {
            pair: lp.pair.clone(),
            p: forced(lp.label),
        })
        .collect();
    if !missing.is_empty() {
        out.append(&mut missing);
        out.sort_by(|x, y| x.pair.cmp(&y.pair));
        out.dedup_by(|x, y| x.pair == y.pair);
    }
    out
}

enum Source<'a> {
    Model {
        model: &'a dyn PairClassifier,
        table: &'a EmbeddingTable,
    },
    Scores(HashMap<EntityPair, f64>),
}

/// Probability of any pair: expert labels first, then the classifier or a
/// fixed score table.
pub struct PairScorer<'a> {
    source: Source<'a>,
    labels: HashMap<EntityPair, Label>,
    epsilon: f64,
}

impl<'a> PairScorer<'a> {
    pub fn new(
        model: &'a dyn PairClassifier,
        table: &'a EmbeddingTable,
        labeled: &[LabeledPair],
        epsilon: f64,
    ) -> Result<Self> {
        Self::with_source(Source::Model { model, table }, labeled, epsilon)
    }

    /// Scores come from a table; pairs absent from it get probability `ε`.
    pub fn from_scores(scored: &[ScoredPair], labeled: &[LabeledPair], epsilon: f64) -> Result<Self> {
        let scores = scored
            .iter()
            .map(|sp| (sp.pair.clone(), clamp_probability(sp.p)))
            .collect();
        Self::with_source(Source::Scores(scores), labeled, epsilon)
    }

    fn with_source(source: Source<'a>, labeled: &[LabeledPair], epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::Parameter(format!("epsilon {epsilon} outside (0, 0.5)")));
        }
        Ok(PairScorer {
            source,
            labels: labeled.iter().map(|lp| (lp.pair.clone(), lp.label)).collect(),
            epsilon,
        })
    }

    pub fn probability(&self, pair: &EntityPair) -> Result<f64> {
        if let Some(label) = self.labels.get(pair) {
            return Ok(if label.is_duplicate() {
                1.0 - self.epsilon
            } else {
                self.epsilon
            });
        }
        match &self.source {
            Source::Model { model, table } => {
                let x = featurize(table, pair, model.feature_spec())?;
                Ok(clamp_probability(model.probability(&x)))
            }
            Source::Scores(scores) => Ok(scores.get(pair).copied().unwrap_or(self.epsilon)),
        }
    }

    pub fn label(&self, pair: &EntityPair) -> Option<Label> {
        self.labels.get(pair).copied()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EntityId;
    use rand::{Rng, SeedableRng};

    fn id(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn pair(x: &str, y: &str) -> EntityPair {
        EntityPair::new(id(x), id(y)).unwrap()
    }

    fn table(rows: &[(&str, &[f64])]) -> EmbeddingTable {
        let dim = rows[0].1.len();
        EmbeddingTable::new(dim, rows.iter().map(|(s, v)| (id(s), v.to_vec())).collect()).unwrap()
    }

    #[test]
    fn feature_examples() {
        let t = table(&[("u", &[1.0, 2.0]), ("v", &[3.0, 4.0]), ("x", &[1.0, 0.0]), ("y", &[0.0, 1.0])]);
        let cos = featurize(&t, &pair("u", "v"), FeatureSpec::Cosine).unwrap()[0];
        assert!((cos - 11.0 / (5f64.sqrt() * 5.0)).abs() < 1e-15);
        assert_eq!(featurize(&t, &pair("u", "v"), FeatureSpec::Hadamard).unwrap(), [3.0, 8.0]);
        assert_eq!(featurize(&t, &pair("x", "y"), FeatureSpec::Cosine).unwrap(), [0.0]);
        assert_eq!(featurize(&t, &pair("x", "y"), FeatureSpec::Hadamard).unwrap(), [0.0, 0.0]);

        let t = table(&[("a", &[0.6, 0.8]), ("b", &[0.6, 0.8])]);
        let c = featurize(&t, &pair("a", "b"), FeatureSpec::Cosine).unwrap()[0];
        assert!((c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_vector_is_degenerate_under_cosine() {
        let t = table(&[("a", &[0.0, 0.0]), ("b", &[1.0, 0.0])]);
        assert!(matches!(
            featurize(&t, &pair("a", "b"), FeatureSpec::Cosine),
            Err(Error::DegenerateFeature(ref s)) if s == "a"
        ));
        assert!(featurize(&t, &pair("a", "b"), FeatureSpec::Hadamard).is_ok());
    }

    #[test]
    fn features_ignore_endpoint_order() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let u: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            for spec in [FeatureSpec::Cosine, FeatureSpec::Hadamard] {
                assert_eq!(features_of(&u, &v, spec), features_of(&v, &u, spec));
            }
        }
    }

    fn labeled(x: &str, y: &str, dup: bool) -> LabeledPair {
        LabeledPair {
            pair: pair(x, y),
            label: if dup { Label::Duplicate } else { Label::Distinct },
        }
    }

    #[test]
    fn separable_training_is_perfect() {
        // cosine 0.99 for duplicates, 0.10 for distinct pairs
        let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
        let mut labels = Vec::new();
        let c_dup = 0.99f64;
        let c_dis = 0.10f64;
        for i in 0..20 {
            let (c, dup) = if i % 2 == 0 { (c_dup, true) } else { (c_dis, false) };
            rows.push((format!("a{i:02}"), vec![1.0, 0.0]));
            rows.push((format!("b{i:02}"), vec![c, (1.0 - c * c).sqrt()]));
            labels.push(labeled(&format!("a{i:02}"), &format!("b{i:02}"), dup));
        }
        let t = EmbeddingTable::new(2, rows.into_iter().map(|(s, v)| (id(&s), v)).collect()).unwrap();
        let model = train(&labels, &t, FeatureSpec::Cosine, &default_grid(), 1).unwrap();
        let pairs: Vec<_> = labels.iter().map(|l| l.pair.clone()).collect();
        let scored = score(&model, &pairs, &t).unwrap();
        for (sp, lp) in scored.iter().zip(&labels) {
            assert_eq!(sp.p > 0.5, lp.label.is_duplicate(), "{sp:?}");
        }
    }

    #[test]
    fn uninformative_features_give_half() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            rows.push((id(&format!("a{i:02}")), vec![1.0, 0.0]));
            rows.push((id(&format!("b{i:02}")), vec![1.0, 1.0]));
            labels.push(labeled(&format!("a{i:02}"), &format!("b{i:02}"), i % 2 == 0));
        }
        let t = EmbeddingTable::new(2, rows).unwrap();
        for spec in [FeatureSpec::Cosine, FeatureSpec::Hadamard] {
            let model = train(&labels, &t, spec, &default_grid(), 3).unwrap();
            let p = model.probability(&featurize(&t, &labels[0].pair, spec).unwrap());
            assert!((p - 0.5).abs() < 1e-6, "{spec}: {p}");
        }
    }

    #[test]
    fn single_class_training_fails() {
        let t = table(&[("a", &[1.0]), ("b", &[2.0]), ("c", &[3.0])]);
        let labels = [labeled("a", "b", true), labeled("b", "c", true)];
        assert!(matches!(
            train(&labels, &t, FeatureSpec::Cosine, &default_grid(), 0),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            rows.push((id(&format!("a{i:02}")), a));
            rows.push((id(&format!("b{i:02}")), b));
            labels.push(labeled(&format!("a{i:02}"), &format!("b{i:02}"), rng.random_bool(0.4)));
        }
        let t = EmbeddingTable::new(3, rows).unwrap();
        let m1 = train(&labels, &t, FeatureSpec::Hadamard, &default_grid(), 5).unwrap();
        let m2 = train(&labels, &t, FeatureSpec::Hadamard, &default_grid(), 5).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn fit_reaches_gradient_tolerance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let targets = rows
            .iter()
            .map(|r| if r[0] - 0.5 * r[1] + rng.random_range(-1.0..1.0) > 0.0 { 1.0 } else { 0.0 })
            .collect();
        let data = Dataset { rows, targets };
        for penalty in default_grid() {
            let fit = fit_penalized(&data, penalty, GRADIENT_TOLERANCE, MAX_ITERATIONS).unwrap();
            assert!(fit.grad_norm <= GRADIENT_TOLERANCE);
            if penalty.alpha == 0.0 {
                // smooth objective: the plain gradient vanishes at the optimum
                let g = penalized_gradient(&data, &fit.weights, fit.intercept, penalty);
                assert!(g.iter().all(|x| x.abs() < 1e-7), "{g:?}");
            }
        }
    }

    #[test]
    fn iteration_cap_reports_gradient_norm() {
        let data = Dataset {
            rows: vec![vec![1.0], vec![-1.0], vec![0.5]],
            targets: vec![1.0, 0.0, 1.0],
        };
        let penalty = Penalty { lambda: 1e-4, alpha: 0.0 };
        match fit_penalized(&data, penalty, 1e-30, 5) {
            Err(Error::NotConverged { iterations, grad_norm }) => {
                assert!(iterations <= 5);
                assert!(grad_norm > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn score_examples() {
        let t = table(&[("a", &[1.0, 0.0]), ("b", &[0.5, 0.5]), ("c", &[0.0, 1.0])]);
        let zero = LrModel::constant(FeatureSpec::Cosine, 2, 0.5);
        let scored = score(&zero, &[pair("a", "b"), pair("a", "c")], &t).unwrap();
        assert!(scored.iter().all(|s| s.p == 0.5));
        assert!(score(&zero, &[pair("a", "zz")], &t).is_err());

        // monotone in the cosine feature with a positive weight
        let model = LrModel {
            weights: vec![3.0],
            intercept: -1.0,
            ..zero.clone()
        };
        let grid: Vec<f64> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
        let ps: Vec<f64> = grid.iter().map(|&c| model.probability(&[c])).collect();
        assert!(ps.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(model.probability(&[1.0 / 3.0]), sigmoid(0.0));
    }

    #[test]
    fn label_override_examples() {
        let scored = vec![
            ScoredPair { pair: pair("a", "b"), p: 0.2 },
            ScoredPair { pair: pair("b", "c"), p: 0.9 },
            ScoredPair { pair: pair("c", "d"), p: 0.7 },
        ];
        let labels = [labeled("a", "b", true), labeled("b", "c", false), labeled("x", "y", true)];
        let out = apply_label_override(&scored, &labels, DEFAULT_EPSILON);
        let get = |x, y| out.iter().find(|s| s.pair == pair(x, y)).unwrap().p;
        assert_eq!(get("a", "b"), 1.0 - 1e-6);
        assert_eq!(get("b", "c"), 1e-6);
        assert_eq!(get("c", "d"), 0.7);
        assert_eq!(get("x", "y"), 1.0 - 1e-6);
    }

    #[test]
    fn model_text_round_trip() {
        let m = LrModel {
            feature: FeatureSpec::Hadamard,
            dim: 3,
            weights: vec![0.1, -2.5e-7, 3.0],
            intercept: -0.75,
            lambda: 1e-3,
            alpha: 0.5,
        };
        assert_eq!(LrModel::from_text(&m.to_text()).unwrap(), m);
        assert!(LrModel::from_text("feature=cosine\ndim=2\n").is_err());
    }
}
