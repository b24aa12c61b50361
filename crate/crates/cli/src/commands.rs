use std::fs;
use std::path::{Path, PathBuf};

use linkforge_core::candidates::candidate_pairs;
use linkforge_core::classifier::{self, apply_label_override, score, train, PairScorer};
use linkforge_core::editing::{oversized_reports, repair, SolverOptions};
use linkforge_core::eval::{self, emit_report, sweep, MetricRow, SweepContext, Variant};
use linkforge_core::graph::{connected_components, filter_components, tentative_linkset, transitive_closure, Cutoff};
use linkforge_core::io;
use linkforge_core::synth::{generate_benchmark, sample_labels, GeneratorConfig};
use linkforge_core::model::gold_linkset;
use linkforge_core::{EmbeddingTable, EntityPair, FeatureSpec, LabeledPair, Linkset, LrModel, ScoredPair};

use crate::config::PipelineConfig;
use crate::stage::{fail, AtStage, Outcome, Stage};

pub fn generate(cfg: &GeneratorConfig, out_dir: &Path) -> Outcome<()> {
    cfg.validate().at(Stage::Config)?;
    let bench = generate_benchmark(cfg).at(Stage::Input)?;
    io::write_benchmark(&bench, out_dir).at(Stage::Output)
}

pub fn candidates(embeddings: &Path, k: usize, out: &Path) -> Outcome<()> {
    let table = io::read_embeddings(embeddings).at(Stage::Input)?;
    let set = candidate_pairs(&table, k).at(Stage::Candidates)?;
    io::write_pairs(&set.pairs, out).at(Stage::Output)
}

/// Trains on `labeled`; with a single class present, falls back to a
/// constant model at the smoothed class rate.
fn fit(labeled: &[LabeledPair], table: &EmbeddingTable, feature: FeatureSpec, seed: u64) -> Outcome<LrModel> {
    let positives = labeled.iter().filter(|lp| lp.label.is_duplicate()).count();
    if positives == 0 || positives == labeled.len() {
        let p = (positives as f64 + 1.0) / (labeled.len() as f64 + 2.0);
        log::warn!(
            "labels contain a single class ({positives} of {} duplicates); using a constant model with p = {p}",
            labeled.len()
        );
        return Ok(LrModel::constant(feature, table.dim(), p));
    }
    train(labeled, table, feature, &classifier::default_grid(), seed).at(Stage::Train)
}

pub fn train_model(embeddings: &Path, labels: &Path, feature: FeatureSpec, seed: u64, out: &Path) -> Outcome<()> {
    let table = io::read_embeddings(embeddings).at(Stage::Input)?;
    let labeled = io::read_labels(labels).at(Stage::Input)?;
    let model = fit(&labeled, &table, feature, seed)?;
    io::write_model(&model, out).at(Stage::Output)
}

fn check_model(model: &LrModel, table: &EmbeddingTable) -> Outcome<()> {
    if model.dim != table.dim() {
        return fail(
            Stage::Score,
            format!("model expects dimension {}, embeddings have {}", model.dim, table.dim()),
        );
    }
    Ok(())
}

pub struct ClassifyArgs<'a> {
    pub model: &'a Path,
    pub embeddings: &'a Path,
    pub pairs: &'a Path,
    pub labels: Option<&'a Path>,
    pub epsilon: f64,
    pub out: &'a Path,
}

pub fn classify(args: &ClassifyArgs<'_>) -> Outcome<()> {
    let model = io::read_model(args.model).at(Stage::Input)?;
    let table = io::read_embeddings(args.embeddings).at(Stage::Input)?;
    let pairs = io::read_pairs(args.pairs).at(Stage::Input)?;
    let labeled = read_optional_labels(args.labels)?;
    check_model(&model, &table)?;
    let scored = score(&model, &pairs, &table).at(Stage::Score)?;
    let scored = if labeled.is_empty() {
        scored
    } else {
        apply_label_override(&scored, &labeled, args.epsilon)
    };
    io::write_scores(&scored, args.out).at(Stage::Output)
}

fn read_optional_labels(path: Option<&Path>) -> Outcome<Vec<LabeledPair>> {
    path.map_or(Ok(Vec::new()), |p| io::read_labels(p).at(Stage::Input))
}

fn labeled_duplicates(labeled: &[LabeledPair]) -> Vec<EntityPair> {
    labeled
        .iter()
        .filter(|lp| lp.label.is_duplicate())
        .map(|lp| lp.pair.clone())
        .collect()
}

pub struct ClosureArgs<'a> {
    pub scores: &'a Path,
    pub labels: Option<&'a Path>,
    pub theta: f64,
    pub max_component: usize,
    pub epsilon: f64,
    pub out: &'a Path,
    pub same_as: Option<&'a Path>,
}

pub fn closure(args: &ClosureArgs<'_>) -> Outcome<()> {
    let theta = Cutoff::new(args.theta).at(Stage::Config)?;
    let scored = io::read_scores(args.scores).at(Stage::Input)?;
    let labeled = read_optional_labels(args.labels)?;
    let scored = apply_label_override(&scored, &labeled, args.epsilon);
    let tentative = tentative_linkset(&scored, &labeled_duplicates(&labeled), theta);
    let (kept, _) = filter_components(connected_components(&tentative), args.max_component).at(Stage::Graph)?;
    let links = transitive_closure(&kept);
    write_links(&links, args.out, args.same_as)
}

fn write_links(links: &Linkset, out: &Path, same_as: Option<&Path>) -> Outcome<()> {
    io::write_linkset(links, out).at(Stage::Output)?;
    if let Some(p) = same_as {
        io::write_same_as(links, p).at(Stage::Output)?;
    }
    Ok(())
}

pub struct RepairArgs<'a> {
    pub scores: Option<&'a Path>,
    pub model: Option<&'a Path>,
    pub embeddings: Option<&'a Path>,
    pub labels: Option<&'a Path>,
    pub k: usize,
    pub theta: f64,
    pub max_component: usize,
    pub epsilon: f64,
    pub solver: SolverOptions,
    pub out: &'a Path,
    pub same_as: Option<&'a Path>,
    pub report: Option<&'a Path>,
}

/// Repairs the tentative linkset of a scores file, or of model-scored kNN
/// candidates. Pairs inside a component that have no score get `ε` unless a
/// model is available.
pub fn repair_links(args: &RepairArgs<'_>) -> Outcome<()> {
    let theta = Cutoff::new(args.theta).at(Stage::Config)?;
    let labeled = read_optional_labels(args.labels)?;
    let source = match (args.model, args.embeddings) {
        (Some(m), Some(e)) => {
            let model = io::read_model(m).at(Stage::Input)?;
            let table = io::read_embeddings(e).at(Stage::Input)?;
            check_model(&model, &table)?;
            Some((model, table))
        }
        (None, None) => None,
        _ => return fail(Stage::Config, "--model and --embeddings go together"),
    };
    let scored: Vec<ScoredPair> = match (args.scores, &source) {
        (Some(path), _) => io::read_scores(path).at(Stage::Input)?,
        (None, Some((model, table))) => {
            let set = candidate_pairs(table, args.k).at(Stage::Candidates)?;
            let pairs: Vec<EntityPair> = set.pairs.into_iter().collect();
            score(model, &pairs, table).at(Stage::Score)?
        }
        (None, None) => return fail(Stage::Config, "give --scores or --model with --embeddings"),
    };
    let scored = apply_label_override(&scored, &labeled, args.epsilon);
    let scorer = match &source {
        Some((model, table)) => PairScorer::new(model, table, &labeled, args.epsilon),
        None => PairScorer::from_scores(&scored, &labeled, args.epsilon),
    }
    .at(Stage::Config)?;

    let tentative = tentative_linkset(&scored, &labeled_duplicates(&labeled), theta);
    let (kept, discarded) =
        filter_components(connected_components(&tentative), args.max_component).at(Stage::Graph)?;
    let outcome = repair(&kept, &scorer, theta, &args.solver).at(Stage::Repair)?;
    write_links(&outcome.links, args.out, args.same_as)?;
    if let Some(path) = args.report {
        let mut reports = outcome.reports;
        reports.extend(oversized_reports(&discarded, &scorer));
        io::write_repair_report(&reports, path).at(Stage::Output)?;
    }
    Ok(())
}

pub struct SweepArgs<'a> {
    pub benchmark_dir: &'a Path,
    pub model: &'a Path,
    pub feature: Option<FeatureSpec>,
    pub labels: &'a Path,
    pub k: usize,
    pub max_component: usize,
    pub epsilon: f64,
    pub solver: SolverOptions,
    pub out_dir: &'a Path,
}

pub fn sweep_command(args: &SweepArgs<'_>) -> Outcome<()> {
    let bench = io::read_benchmark(args.benchmark_dir).at(Stage::Input)?;
    let model = io::read_model(args.model).at(Stage::Input)?;
    let labeled = io::read_labels(args.labels).at(Stage::Input)?;
    if let Some(f) = args.feature {
        if f != model.feature {
            return fail(
                Stage::Config,
                format!("--feature {f} does not match the model's {}", model.feature),
            );
        }
    }
    check_model(&model, &bench.embeddings)?;
    let settings = eval::SweepSettings {
        k: args.k,
        max_component: args.max_component,
        epsilon: args.epsilon,
        solver: args.solver.clone(),
    };
    let report = eval::sweep_benchmark(&bench, &model, &labeled, &settings, &eval::default_grid())
        .at(Stage::Evaluate)?;
    emit_report(&report, args.out_dir).at(Stage::Output)?;
    if !report.failures.is_empty() {
        return fail(
            Stage::Evaluate,
            format!("{} grid points failed; see summary.txt", report.failures.len()),
        );
    }
    Ok(())
}

/// Files written by a pipeline run, relative to the output directory.
struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn path(&mut self, name: &str) -> PathBuf {
        self.names.push(name.to_string());
        self.dir.join(name)
    }
}

pub const ECHO_FILE: &str = "config.echo";

pub fn pipeline(cfg: &PipelineConfig) -> Outcome<()> {
    cfg.validate()?;
    let solver = &SolverOptions {
        node_budget: cfg.node_budget,
        ..SolverOptions::default()
    };
    if let Err(e) = fs::create_dir_all(&cfg.out_dir) {
        return fail(Stage::Output, format!("{}: {e}", cfg.out_dir.display()));
    }
    let mut out = Artifacts {
        dir: cfg.out_dir.clone(),
        names: Vec::new(),
    };

    let table = io::read_embeddings(cfg.embeddings.as_deref().expect("validated")).at(Stage::Input)?;
    let truth = match &cfg.truth {
        Some(p) => Some(io::read_truth(p).at(Stage::Input)?),
        None => None,
    };

    let set = candidate_pairs(&table, cfg.k).at(Stage::Candidates)?;
    io::write_pairs(&set.pairs, &out.path("candidates.csv")).at(Stage::Output)?;

    let labeled = match (&cfg.labels, &truth) {
        (Some(p), _) => io::read_labels(p).at(Stage::Input)?,
        (None, Some(t)) => sample_labels(t, &set.pairs, cfg.sample_labels, cfg.seed),
        (None, None) => unreachable!("validated"),
    };
    io::write_labels(&labeled, &out.path("labels.csv")).at(Stage::Output)?;

    let model = fit(&labeled, &table, cfg.feature, cfg.seed)?;
    io::write_model(&model, &out.path("model.txt")).at(Stage::Output)?;

    let pairs: Vec<EntityPair> = set.pairs.iter().cloned().collect();
    let scored = apply_label_override(&score(&model, &pairs, &table).at(Stage::Score)?, &labeled, cfg.epsilon);
    io::write_scores(&scored, &out.path("scores.csv")).at(Stage::Output)?;
    let scorer = PairScorer::new(&model, &table, &labeled, cfg.epsilon).at(Stage::Score)?;
    let gold = truth.as_ref().map(gold_linkset);

    if let Some(t) = cfg.theta {
        let theta = Cutoff::new(t).at(Stage::Config)?;
        let tentative = tentative_linkset(&scored, &labeled_duplicates(&labeled), theta);
        io::write_linkset(&tentative, &out.path("tentative.csv")).at(Stage::Output)?;
        let (kept, discarded) =
            filter_components(connected_components(&tentative), cfg.max_component).at(Stage::Graph)?;
        let closed = transitive_closure(&kept);
        io::write_linkset(&closed, &out.path("closure.csv")).at(Stage::Output)?;
        let edited = repair(&kept, &scorer, theta, solver).at(Stage::Repair)?;
        io::write_linkset(&edited.links, &out.path("edited.csv")).at(Stage::Output)?;
        io::write_same_as(&edited.links, &out.path("edited.nt")).at(Stage::Output)?;
        let mut reports = edited.reports.clone();
        reports.extend(oversized_reports(&discarded, &scorer));
        io::write_repair_report(&reports, &out.path("repair_report.jsonl")).at(Stage::Output)?;
        if let Some(gold) = &gold {
            let rows = [
                MetricRow::new(t, Variant::Closure, &closed, gold),
                MetricRow::new(t, Variant::Edited, &edited.links, gold),
            ];
            eval::write_metrics_csv(&rows, &out.path("metrics.csv")).at(Stage::Output)?;
        }
    }

    let mut sweep_failures = 0;
    if cfg.sweep {
        let gold = gold.as_ref().expect("validated");
        let ctx = SweepContext {
            scored: &scored,
            labeled_duplicates: labeled_duplicates(&labeled),
            scorer: &scorer,
            gold,
            max_component: cfg.max_component,
            solver: solver.clone(),
        };
        let report = sweep(&ctx, &eval::default_grid());
        sweep_failures = report.failures.len();
        for name in ["metrics.csv", "fscore.svg", "precision.svg", "recall.svg", "size.svg", "summary.txt"] {
            out.path(&format!("sweep/{name}"));
        }
        emit_report(&report, &cfg.out_dir.join("sweep")).at(Stage::Output)?;
    }

    io::write_kv(&cfg.to_kv(), &cfg.out_dir.join(ECHO_FILE)).at(Stage::Output)?;
    let mut text = fs::read_to_string(cfg.out_dir.join(ECHO_FILE)).expect("just written");
    for name in &out.names {
        text.push_str(&format!("# artifact {name}\n"));
    }
    fs::write(cfg.out_dir.join(ECHO_FILE), text)
        .or_else(|e| fail(Stage::Output, format!("{ECHO_FILE}: {e}")))?;

    if sweep_failures > 0 {
        return fail(
            Stage::Evaluate,
            format!("{sweep_failures} grid points failed; see sweep/summary.txt"),
        );
    }
    Ok(())
}

