use std::collections::BTreeSet;

use proptest::prelude::*;

use linkforge_core::candidates::candidate_pairs;
use linkforge_core::classifier::{apply_label_override, default_grid, score, train, FeatureSpec, LrModel, PairScorer};
use linkforge_core::editing::{
    brute_force_oracle, kernelize, oversized_reports, repair, solve_exact, solve_kernel, EditingInstance,
    RepairStatus, SolverOptions,
};
use linkforge_core::eval::{default_grid as theta_grid, link_at, sweep_benchmark, SweepContext, SweepSettings, Variant};
use linkforge_core::graph::{close, connected_components, filter_components, Cutoff};
use linkforge_core::model::{gold_linkset, EmbeddingTable, EntityId, EntityPair, Label, LabeledPair, Linkset, ScoredPair};
use linkforge_core::synth::{generate_benchmark, generate_clusters, sample_labels, GeneratorConfig};

fn id(s: &str) -> EntityId {
    EntityId::new(s).unwrap()
}

fn pair(x: &str, y: &str) -> EntityPair {
    EntityPair::new(id(x), id(y)).unwrap()
}

fn small_config(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n_base: 200,
        dim: 16,
        sample_rate: 0.5,
        seed,
        ..GeneratorConfig::default()
    }
}

#[test]
fn cluster_size_law_is_unbiased_over_seeds() {
    let runs = 40;
    let mut mean = [0.0_f64; 4];
    for seed in 0..runs {
        let cfg = GeneratorConfig {
            n_base: 10_000,
            sample_rate: 0.5,
            dim: 2,
            seed,
            ..GeneratorConfig::default()
        };
        for c in generate_clusters(&cfg).unwrap().clusters.clusters() {
            mean[c.len() - 1] += 1.0 / (cfg.n_base as f64 * runs as f64);
        }
    }
    let expected = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 5.0 / 16.0];
    for (m, e) in mean.iter().zip(expected) {
        assert!((m - e).abs() < 0.003, "{mean:?}");
    }
}

#[test]
fn sweep_is_deterministic_and_consistent() {
    let bench = generate_benchmark(&small_config(3)).unwrap();
    let candidates = candidate_pairs(&bench.embeddings, 3).unwrap();
    let labeled = sample_labels(&bench.truth, &candidates.pairs, 80, 3);
    let model = train(&labeled, &bench.embeddings, FeatureSpec::Cosine, &default_grid(), 3).unwrap();
    let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
    let a = sweep_benchmark(&bench, &model, &labeled, &SweepSettings::default(), &grid).unwrap();
    let b = sweep_benchmark(&bench, &model, &labeled, &SweepSettings::default(), &grid).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 2 * grid.len());
    assert!(a.failures.is_empty());
    for row in &a.rows {
        let f = linkforge_core::eval::f_beta(row.precision, row.recall, 0.5);
        assert!((row.f_half - f).abs() <= 1e-12);
        assert!((0.0..=1.0).contains(&row.precision) && (0.0..=1.0).contains(&row.recall));
    }
    // more threads must not change anything
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = pool.install(|| sweep_benchmark(&bench, &model, &labeled, &SweepSettings::default(), &grid).unwrap());
    assert_eq!(a, c);
}

#[test]
fn perfect_geometry_reaches_full_score() {
    let cfg = GeneratorConfig {
        noise_sigma: 0.0,
        ..small_config(11)
    };
    let bench = generate_benchmark(&cfg).unwrap();
    let candidates = candidate_pairs(&bench.embeddings, 3).unwrap();
    let labeled = sample_labels(&bench.truth, &candidates.pairs, 100, 11);
    let model = train(&labeled, &bench.embeddings, FeatureSpec::Cosine, &default_grid(), 11).unwrap();
    let report = sweep_benchmark(&bench, &model, &labeled, &SweepSettings::default(), &theta_grid()).unwrap();
    for v in Variant::ALL {
        assert_eq!(report.summary(v).unwrap().max_f_half, 1.0, "{v}");
    }
}

#[test]
fn repair_outputs_partition_links_and_reports() {
    let bench = generate_benchmark(&small_config(5)).unwrap();
    let candidates = candidate_pairs(&bench.embeddings, 3).unwrap();
    let labeled = sample_labels(&bench.truth, &candidates.pairs, 60, 5);
    let model = train(&labeled, &bench.embeddings, FeatureSpec::Cosine, &default_grid(), 5).unwrap();
    let pairs: Vec<EntityPair> = candidates.pairs.iter().cloned().collect();
    let scored = apply_label_override(&score(&model, &pairs, &bench.embeddings).unwrap(), &labeled, 1e-6);
    let scorer = PairScorer::new(&model, &bench.embeddings, &labeled, 1e-6).unwrap();
    let gold = gold_linkset(&bench.truth);
    let ctx = SweepContext {
        scored: &scored,
        labeled_duplicates: labeled.iter().filter(|l| l.label.is_duplicate()).map(|l| l.pair.clone()).collect(),
        scorer: &scorer,
        gold: &gold,
        max_component: 6,
        solver: SolverOptions::default(),
    };
    for theta in [0.02, 0.2, 0.5, 0.8] {
        let r = link_at(&ctx, Cutoff::new(theta).unwrap()).unwrap();
        assert_eq!(close(&r.edited.links), r.edited.links);
        assert!(r.closure.len() >= r.kept.iter().map(|c| c.edges.len()).sum::<usize>());
        assert_eq!(r.edited.reports.len(), r.kept.len());
        assert!(r.edited.reports.iter().all(|x| x.status == RepairStatus::Solved && x.size <= 6));
        // edited links stay inside the kept components
        let kept: BTreeSet<&EntityId> = r.kept.iter().flat_map(|c| &c.entities).collect();
        assert!(r.edited.links.iter().all(|p| kept.contains(p.a()) && kept.contains(p.b())));
        let oversized = oversized_reports(&r.discarded, &scorer);
        assert!(oversized.iter().all(|x| x.status == RepairStatus::Oversized && x.size > 6));
    }
}

#[test]
fn budget_exceeded_component_is_dropped() {
    let ids: Vec<String> = (0..12).map(|i| format!("x{i:02}")).collect();
    // alternating scores create many conflicts
    let scored: Vec<ScoredPair> = (0..12)
        .flat_map(|i| (i + 1..12).map(move |j| (i, j)))
        .map(|(i, j)| ScoredPair {
            pair: pair(&ids[i], &ids[j]),
            p: if (i * 7 + j * 3) % 5 < 3 { 0.8 } else { 0.2 },
        })
        .collect();
    let labeled = vec![LabeledPair { pair: pair("x00", "x01"), label: Label::Duplicate }];
    let scorer = PairScorer::from_scores(&scored, &labeled, 1e-6).unwrap();
    let links: Linkset = scored.iter().filter(|s| s.p > 0.5).map(|s| s.pair.clone()).collect();
    let (kept, _) = filter_components(connected_components(&links), 50).unwrap();
    let opts = SolverOptions { node_budget: 1, kernelize: false, ..SolverOptions::default() };
    let out = repair(&kept, &scorer, Cutoff::new(0.5).unwrap(), &opts).unwrap();
    assert!(out.links.is_empty());
    assert_eq!(out.reports[0].status, RepairStatus::BudgetExceeded);
    assert_eq!(out.reports[0].dropped_labeled_duplicates, 1);
}

#[test]
fn identical_pair_with_duplicate_label_is_linked_at_any_cutoff() {
    let table = EmbeddingTable::new(2, vec![(id("a"), vec![1.0, 0.0]), (id("b"), vec![1.0, 0.0])]).unwrap();
    let labeled = vec![LabeledPair { pair: pair("a", "b"), label: Label::Duplicate }];
    let model = LrModel::constant(FeatureSpec::Cosine, 2, 0.01);
    let scorer = PairScorer::new(&model, &table, &labeled, 1e-6).unwrap();
    let scored = apply_label_override(&[], &labeled, 1e-6);
    let gold: Linkset = [pair("a", "b")].into_iter().collect();
    let ctx = SweepContext {
        scored: &scored,
        labeled_duplicates: vec![pair("a", "b")],
        scorer: &scorer,
        gold: &gold,
        max_component: 50,
        solver: SolverOptions::default(),
    };
    for theta in theta_grid() {
        let r = link_at(&ctx, Cutoff::new(theta).unwrap()).unwrap();
        assert_eq!(r.edited.links, gold);
        assert_eq!(r.closure, gold);
    }
}

fn weights(n: usize) -> impl Strategy<Value = EditingInstance> {
    prop::collection::vec(-2.0..2.0f64, n * (n - 1) / 2).prop_map(move |w| {
        let mut it = w.into_iter();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let x = it.next().unwrap();
                m[i * n + j] = x;
                m[j * n + i] = x;
            }
        }
        EditingInstance::from_fn(n, |i, j| m[i * n + j])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_matches_oracle_and_dominates_baselines(inst in (2usize..=8).prop_flat_map(weights)) {
        let exact = solve_exact(&inst).unwrap();
        let oracle = brute_force_oracle(&inst).unwrap();
        prop_assert!((exact.objective - oracle.objective).abs() <= 1e-9);
        prop_assert_eq!(&exact.partition, &oracle.partition);
        let everything: Vec<usize> = (0..inst.len()).collect();
        prop_assert!(exact.objective >= inst.objective(&[everything]) - 1e-12);
        prop_assert!(exact.objective >= -1e-12);
        prop_assert!(exact.partition.linkset().is_transitive());
        let clusters = exact.clusters.clone();
        prop_assert!((inst.edit_cost(&clusters) - (inst.positive_mass() - exact.objective)).abs() < 1e-9);
    }

    #[test]
    fn kernel_preserves_optimum(inst in (2usize..=8).prop_flat_map(weights)) {
        let kernel = kernelize(&inst);
        let via = solve_kernel(&inst, &kernel, &SolverOptions::default()).unwrap();
        let direct = brute_force_oracle(&inst).unwrap();
        prop_assert!((via.objective - direct.objective).abs() <= 1e-9);
    }

    #[test]
    fn weight_sign_flips_across_theta(p in 0.001..0.999f64, t in 0.001..0.999f64) {
        let w = linkforge_core::editing::pair_weight(p, Cutoff::new(t).unwrap()).unwrap();
        if p > t { prop_assert!(w > 0.0); } else if p < t { prop_assert!(w < 0.0); } else { prop_assert_eq!(w, 0.0); }
        let back = linkforge_core::editing::pair_weight(t, Cutoff::new(p).unwrap()).unwrap();
        prop_assert!((w + back).abs() < 1e-9);
    }
}
