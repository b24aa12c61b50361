use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{build_instance, solve_with, SolverOptions};
use crate::classifier::PairScorer;
use crate::error::{Error, Result};
use crate::graph::{Component, Cutoff};
use crate::model::{EntityPair, Linkset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairStatus {
    Solved,
    /// Search budget ran out; the component contributes no links.
    BudgetExceeded,
    /// Above the size cap; never solved, contributes no links.
    Oversized,
}

/// One line of the per-component repair report.
#[derive(Clone, Debug, Serialize)]
pub struct ComponentReport {
    pub first_entity: String,
    pub size: usize,
    pub status: RepairStatus,
    pub objective: Option<f64>,
    pub clusters: Option<usize>,
    pub links: usize,
    pub nodes: u64,
    pub seconds: f64,
    /// Expert-labeled duplicate pairs inside a component that was dropped.
    pub dropped_labeled_duplicates: usize,
}

#[derive(Clone, Debug, Default)]
pub struct RepairOutcome {
    pub links: Linkset,
    pub reports: Vec<ComponentReport>,
}

fn labeled_duplicates_inside(component: &Component, scorer: &PairScorer<'_>) -> usize {
    let e = &component.entities;
    let mut count = 0;
    for (i, a) in e.iter().enumerate() {
        for b in &e[i + 1..] {
            let pair = EntityPair::new(a.clone(), b.clone()).expect("distinct entities");
            if scorer.label(&pair).is_some_and(|l| l.is_duplicate()) {
                count += 1;
            }
        }
    }
    count
}

/// Solves every component independently and returns the union of the
/// intra-cluster links. Components that exhaust the search budget are
/// dropped with a warning.
pub fn repair(
    components: &[Component],
    scorer: &PairScorer<'_>,
    theta: Cutoff,
    opts: &SolverOptions,
) -> Result<RepairOutcome> {
    let solved = components
        .par_iter()
        .map(|c| -> Result<(Vec<EntityPair>, ComponentReport)> {
            let start = Instant::now();
            let inst = build_instance(c, scorer, theta)?;
            let first_entity = c.entities[0].to_string();
            match solve_with(&inst, opts) {
                Ok(sol) => {
                    let links: Vec<EntityPair> = sol.partition.linkset().into_iter().collect();
                    let report = ComponentReport {
                        first_entity,
                        size: c.len(),
                        status: RepairStatus::Solved,
                        objective: Some(sol.objective),
                        clusters: Some(sol.clusters.len()),
                        links: links.len(),
                        nodes: sol.nodes,
                        seconds: start.elapsed().as_secs_f64(),
                        dropped_labeled_duplicates: 0,
                    };
                    Ok((links, report))
                }
                Err(Error::BudgetExceeded { nodes, .. }) => {
                    log::warn!(
                        "component at {first_entity} ({} entities) exceeded the search budget; dropped",
                        c.len()
                    );
                    let report = ComponentReport {
                        first_entity,
                        size: c.len(),
                        status: RepairStatus::BudgetExceeded,
                        objective: None,
                        clusters: None,
                        links: 0,
                        nodes,
                        seconds: start.elapsed().as_secs_f64(),
                        dropped_labeled_duplicates: labeled_duplicates_inside(c, scorer),
                    };
                    Ok((Vec::new(), report))
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut outcome = RepairOutcome::default();
    for (links, report) in solved {
        outcome.links.extend(links);
        outcome.reports.push(report);
    }
    Ok(outcome)
}

/// Report lines for components discarded by the size cap.
pub fn oversized_reports(discarded: &[Component], scorer: &PairScorer<'_>) -> Vec<ComponentReport> {
    discarded
        .iter()
        .map(|c| ComponentReport {
            first_entity: c.entities[0].to_string(),
            size: c.len(),
            status: RepairStatus::Oversized,
            objective: None,
            clusters: None,
            links: 0,
            nodes: 0,
            seconds: 0.0,
            dropped_labeled_duplicates: labeled_duplicates_inside(c, scorer),
        })
        .collect()
}
