//! Precision, recall and F-scores against a gold linkset, the θ sweep that
//! compares the closure and edited linksets, and report rendering.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::candidate_pairs;
use crate::classifier::{apply_label_override, score, PairClassifier, PairScorer, DEFAULT_EPSILON};
use crate::editing::{repair, RepairOutcome, SolverOptions};
use crate::error::{Error, Result};
use crate::graph::{connected_components, filter_components, tentative_linkset, transitive_closure, Component, Cutoff};
use crate::model::{gold_linkset, EntityPair, LabeledPair, Linkset, ScoredPair};
use crate::synth::SynthBenchmark;

/// The β of the reported F-score.
pub const BETA: f64 = 0.5;

/// `(|pred ∩ gold| / |pred|, |pred ∩ gold| / |gold|)`, with 1.0 for an empty
/// denominator.
pub fn precision_recall(pred: &Linkset, gold: &Linkset) -> (f64, f64) {
    let hits = pred.intersection_len(gold) as f64;
    let precision = if pred.is_empty() { 1.0 } else { hits / pred.len() as f64 };
    let recall = if gold.is_empty() { 1.0 } else { hits / gold.len() as f64 };
    (precision, recall)
}

pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        return 0.0;
    }
    (1.0 + b2) * precision * recall / denom
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Closure,
    Edited,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Closure, Variant::Edited];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Closure => "closure",
            Variant::Edited => "edited",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closure" => Ok(Variant::Closure),
            "edited" => Ok(Variant::Edited),
            other => Err(Error::Parameter(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub theta: f64,
    pub variant: Variant,
    pub precision: f64,
    pub recall: f64,
    pub f_half: f64,
    pub linkset_size: usize,
    /// Linkset size over gold size (over 1 when the gold linkset is empty).
    pub relative_size: f64,
}

impl MetricRow {
    pub fn new(theta: f64, variant: Variant, pred: &Linkset, gold: &Linkset) -> Self {
        let (precision, recall) = precision_recall(pred, gold);
        MetricRow {
            theta,
            variant,
            precision,
            recall,
            f_half: f_beta(precision, recall, BETA),
            linkset_size: pred.len(),
            relative_size: pred.len() as f64 / gold.len().max(1) as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariantSummary {
    pub mean_f_half: f64,
    pub max_f_half: f64,
    /// Smallest θ attaining the maximum.
    pub argmax_theta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepFailure {
    pub theta: f64,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepReport {
    /// Ordered by θ, then variant.
    pub rows: Vec<MetricRow>,
    pub failures: Vec<SweepFailure>,
}

impl SweepReport {
    pub fn rows_for(&self, variant: Variant) -> impl Iterator<Item = &MetricRow> {
        self.rows.iter().filter(move |r| r.variant == variant)
    }

    pub fn summary(&self, variant: Variant) -> Option<VariantSummary> {
        let rows: Vec<&MetricRow> = self.rows_for(variant).collect();
        if rows.is_empty() {
            return None;
        }
        let mean_f_half = rows.iter().map(|r| r.f_half).sum::<f64>() / rows.len() as f64;
        let best = rows
            .iter()
            .copied()
            .reduce(|best, r| if r.f_half > best.f_half { r } else { best })
            .expect("non-empty");
        Some(VariantSummary {
            mean_f_half,
            max_f_half: best.f_half,
            argmax_theta: best.theta,
        })
    }

    /// Metric row for one grid point and variant.
    pub fn row(&self, theta: f64, variant: Variant) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.theta == theta && r.variant == variant)
    }
}

/// `{0.005} ∪ {0.01·i : i = 1..99}`, ascending.
pub fn default_grid() -> Vec<f64> {
    std::iter::once(0.005)
        .chain((1..=99).map(|i| i as f64 / 100.0))
        .collect()
}

/// Everything held fixed across the θ sweep.
pub struct SweepContext<'a> {
    /// Candidate pairs with label-overridden probabilities.
    pub scored: &'a [ScoredPair],
    pub labeled_duplicates: Vec<EntityPair>,
    pub scorer: &'a PairScorer<'a>,
    pub gold: &'a Linkset,
    pub max_component: usize,
    pub solver: SolverOptions,
}

/// Intermediate and final linksets at one cutoff.
#[derive(Clone, Debug)]
pub struct ThetaResult {
    pub theta: Cutoff,
    pub tentative: Linkset,
    pub kept: Vec<Component>,
    pub discarded: Vec<Component>,
    pub closure: Linkset,
    pub edited: RepairOutcome,
}

pub fn link_at(ctx: &SweepContext<'_>, theta: Cutoff) -> Result<ThetaResult> {
    let tentative = tentative_linkset(ctx.scored, &ctx.labeled_duplicates, theta);
    let (kept, discarded) = filter_components(connected_components(&tentative), ctx.max_component)?;
    let closure = transitive_closure(&kept);
    let edited = repair(&kept, ctx.scorer, theta, &ctx.solver)?;
    Ok(ThetaResult {
        theta,
        tentative,
        kept,
        discarded,
        closure,
        edited,
    })
}

/// Scores both variants at every grid point. Grid points that fail are
/// listed in `failures` and contribute no rows.
pub fn sweep(ctx: &SweepContext<'_>, grid: &[f64]) -> SweepReport {
    let results: Vec<(f64, Result<[MetricRow; 2]>)> = grid
        .par_iter()
        .map(|&theta| {
            let rows = Cutoff::new(theta).and_then(|c| link_at(ctx, c)).map(|r| {
                [
                    MetricRow::new(theta, Variant::Closure, &r.closure, ctx.gold),
                    MetricRow::new(theta, Variant::Edited, &r.edited.links, ctx.gold),
                ]
            });
            (theta, rows)
        })
        .collect();
    let mut report = SweepReport::default();
    for (theta, res) in results {
        match res {
            Ok(rows) => report.rows.extend(rows),
            Err(e) => {
                log::warn!("θ = {theta}: {e}");
                report.failures.push(SweepFailure {
                    theta,
                    message: e.to_string(),
                });
            }
        }
    }
    report
        .rows
        .sort_by(|x, y| x.theta.total_cmp(&y.theta).then(x.variant.cmp(&y.variant)));
    report.failures.sort_by(|x, y| x.theta.total_cmp(&y.theta));
    report
}

/// Settings for [`sweep_benchmark`].
#[derive(Clone, Debug)]
pub struct SweepSettings {
    pub k: usize,
    pub max_component: usize,
    pub epsilon: f64,
    pub solver: SolverOptions,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            k: 3,
            max_component: 50,
            epsilon: DEFAULT_EPSILON,
            solver: SolverOptions::default(),
        }
    }
}

/// Candidates, scoring and the θ sweep for a generated benchmark with a
/// trained model.
pub fn sweep_benchmark(
    bench: &SynthBenchmark,
    model: &dyn PairClassifier,
    labeled: &[LabeledPair],
    settings: &SweepSettings,
    grid: &[f64],
) -> Result<SweepReport> {
    let candidates = candidate_pairs(&bench.embeddings, settings.k)?;
    let pairs: Vec<EntityPair> = candidates.pairs.iter().cloned().collect();
    let scored = apply_label_override(&score(model, &pairs, &bench.embeddings)?, labeled, settings.epsilon);
    let scorer = PairScorer::new(model, &bench.embeddings, labeled, settings.epsilon)?;
    let gold = gold_linkset(&bench.truth);
    let ctx = SweepContext {
        scored: &scored,
        labeled_duplicates: labeled
            .iter()
            .filter(|lp| lp.label.is_duplicate())
            .map(|lp| lp.pair.clone())
            .collect(),
        scorer: &scorer,
        gold: &gold,
        max_component: settings.max_component,
        solver: settings.solver.clone(),
    };
    Ok(sweep(&ctx, grid))
}

pub fn write_metrics_csv(rows: &[MetricRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record([
            "theta",
            "variant",
            "precision",
            "recall",
            "f_half",
            "linkset_size",
            "relative_size",
        ])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Writes `metrics.csv`, `summary.txt` and one SVG chart per metric.
pub fn emit_report(report: &SweepReport, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_metrics_csv(&report.rows, &out_dir.join("metrics.csv"))?;
    type Metric = fn(&MetricRow) -> f64;
    let charts: [(&str, &str, Metric); 4] = [
        ("fscore.svg", "F0.5", |r| r.f_half),
        ("precision.svg", "precision", |r| r.precision),
        ("recall.svg", "recall", |r| r.recall),
        ("size.svg", "linkset size / gold size", |r| r.relative_size),
    ];
    for (file, label, metric) in charts {
        let series: Vec<(Variant, Vec<(f64, f64)>)> = Variant::ALL
            .iter()
            .map(|&v| (v, report.rows_for(v).map(|r| (r.theta, metric(r))).collect()))
            .collect();
        let path = out_dir.join(file);
        fs::write(&path, line_chart(label, &series)).map_err(|e| Error::io(&path, e))?;
    }
    let path = out_dir.join("summary.txt");
    fs::write(&path, summary_text(report)).map_err(|e| Error::io(&path, e))
}

pub fn summary_text(report: &SweepReport) -> String {
    let mut out = String::new();
    for v in Variant::ALL {
        match report.summary(v) {
            Some(s) => out.push_str(&format!(
                "{v}\tmean_f_half={:.6}\tmax_f_half={:.6}\targmax_theta={}\n",
                s.mean_f_half, s.max_f_half, s.argmax_theta
            )),
            None => out.push_str(&format!("{v}\tno rows\n")),
        }
    }
    for f in &report.failures {
        out.push_str(&format!("failed\ttheta={}\t{}\n", f.theta, f.message));
    }
    out
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

fn line_chart(y_label: &str, series: &[(Variant, Vec<(f64, f64)>)]) -> String {
    let y_max = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.1))
        .filter(|y| y.is_finite())
        .fold(1.0_f64, f64::max);
    let px = |x: f64| MARGIN + x * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - y / y_max * (HEIGHT - 2.0 * MARGIN);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n<path d=\"M{l},{t} V{b} H{r}\" stroke=\"black\" fill=\"none\"/>\n",
        l = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{f:.2}</text>\n",
            px(f),
            HEIGHT - MARGIN + 16.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.2}</text>\n",
            MARGIN - 6.0,
            py(f * y_max) + 4.0,
            f * y_max
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">theta</text>\n",
        WIDTH / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">{y_label}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    ));
    for (i, (variant, pts)) in series.iter().enumerate() {
        let color = match variant {
            Variant::Closure => "#d95f02",
            Variant::Edited => "#1b9e77",
        };
        let path: Vec<String> = pts
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if !path.is_empty() {
            svg.push_str(&format!(
                "<polyline points=\"{}\" stroke=\"{color}\" stroke-width=\"2\" fill=\"none\"/>\n",
                path.join(" ")
            ));
        }
        let ly = MARGIN - 24.0 + 14.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{x0:.1}\" y1=\"{ly:.1}\" x2=\"{x1:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{tx:.1}\" y=\"{ty:.1}\">{variant}</text>\n",
            x0 = WIDTH - MARGIN - 90.0,
            x1 = WIDTH - MARGIN - 70.0,
            tx = WIDTH - MARGIN - 64.0,
            ty = ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EntityId;

    fn links(pairs: &[(&str, &str)]) -> Linkset {
        pairs
            .iter()
            .map(|(x, y)| EntityPair::new(EntityId::new(x).unwrap(), EntityId::new(y).unwrap()).unwrap())
            .collect()
    }

    #[test]
    fn precision_recall_examples() {
        let gold = links(&[("a", "b"), ("a", "c"), ("b", "c"), ("d", "e"), ("f", "g"), ("h", "i")]);
        assert_eq!(precision_recall(&gold, &gold), (1.0, 1.0));
        assert_eq!(precision_recall(&Linkset::new(), &gold), (1.0, 0.0));
        let pred = links(&[("a", "b"), ("a", "c"), ("d", "e"), ("x", "y")]);
        assert_eq!(precision_recall(&pred, &gold), (0.75, 0.5));
        assert_eq!(precision_recall(&pred, &Linkset::new()), (0.0, 1.0));
    }

    #[test]
    fn f_beta_examples() {
        assert_eq!(f_beta(1.0, 1.0, 0.5), 1.0);
        assert!((f_beta(0.6, 0.3, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(f_beta(0.0, 0.7, 0.5), 0.0);
        assert_eq!(f_beta(0.0, 0.0, 0.5), 0.0);
    }

    #[test]
    fn grid_has_one_hundred_points() {
        let g = default_grid();
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 0.005);
        assert_eq!(g[1], 0.01);
        assert_eq!(g[99], 0.99);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    fn row(theta: f64, variant: Variant, f: f64) -> MetricRow {
        MetricRow {
            theta,
            variant,
            precision: f,
            recall: f,
            f_half: f,
            linkset_size: 3,
            relative_size: 0.1 + theta,
        }
    }

    #[test]
    fn summary_takes_first_maximum() {
        let report = SweepReport {
            rows: vec![
                row(0.1, Variant::Edited, 0.5),
                row(0.2, Variant::Edited, 0.9),
                row(0.3, Variant::Edited, 0.9),
                row(0.3, Variant::Closure, 0.2),
            ],
            failures: vec![],
        };
        let s = report.summary(Variant::Edited).unwrap();
        assert!((s.mean_f_half - 2.3 / 3.0).abs() < 1e-12);
        assert_eq!(s.max_f_half, 0.9);
        assert_eq!(s.argmax_theta, 0.2);
        assert!(SweepReport::default().summary(Variant::Closure).is_none());
    }

    #[test]
    fn empty_report_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&SweepReport::default(), dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(csv, "theta,variant,precision,recall,f_half,linkset_size,relative_size\n");
        for f in ["fscore.svg", "precision.svg", "recall.svg", "size.svg", "summary.txt"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn metrics_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let report = SweepReport {
            rows: vec![
                row(0.01, Variant::Closure, 1.0 / 3.0),
                row(0.01, Variant::Edited, 0.7),
                row(0.02, Variant::Closure, 0.0),
                row(0.02, Variant::Edited, 0.123456789012345),
            ],
            failures: vec![],
        };
        emit_report(&report, dir.path()).unwrap();
        let back = read_metrics_csv(&dir.path().join("metrics.csv")).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(back, report.rows);
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("file");
        fs::write(&file, "x").unwrap();
        let err = emit_report(&SweepReport::default(), &file.join("sub")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
