//! Exhaustive reference solver over all set partitions.

use std::cmp::Ordering;

use super::{compare_solutions, EditingInstance, EditingSolution};
use crate::error::{Error, Result};

/// Bell(10) = 115975 partitions is the largest enumeration we accept.
pub const ORACLE_MAX_ENTITIES: usize = 10;

/// Enumerates every partition as a restricted growth string in lexicographic
/// order and keeps the best under the solver's preference order.
pub fn brute_force_oracle(inst: &EditingInstance) -> Result<EditingSolution> {
    let n = inst.len();
    if n > ORACLE_MAX_ENTITIES {
        return Err(Error::OracleTooLarge(n));
    }
    if n == 0 {
        return Ok(EditingSolution::from_clusters(inst, Vec::new(), 1));
    }
    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    let mut count = 0u64;
    loop {
        count += 1;
        let k = labels.iter().max().copied().unwrap_or(0) + 1;
        let mut clusters = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            clusters[l].push(i);
        }
        let objective = inst.objective(&clusters);
        let better = match &best {
            None => true,
            Some((bo, bc)) => compare_solutions(objective, &clusters, *bo, bc) == Ordering::Less,
        };
        if better {
            best = Some((objective, clusters));
        }
        if !next_rgs(&mut labels) {
            break;
        }
    }
    log::trace!("oracle enumerated {count} partitions");
    let (_, clusters) = best.expect("at least one partition");
    Ok(EditingSolution::from_clusters(inst, clusters, 1))
}

/// Advances to the next restricted growth string; false after the last one.
fn next_rgs(labels: &mut [usize]) -> bool {
    let n = labels.len();
    for i in (1..n).rev() {
        let prefix_max = labels[..i].iter().max().copied().unwrap_or(0);
        if labels[i] <= prefix_max {
            labels[i] += 1;
            for l in &mut labels[i + 1..] {
                *l = 0;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell(n: usize) -> u64 {
        // Bell triangle
        let mut row = vec![1u64];
        for _ in 1..=n {
            let mut next = vec![*row.last().unwrap()];
            for x in &row {
                next.push(next.last().unwrap() + x);
            }
            row = next;
        }
        row[0]
    }

    #[test]
    fn enumerates_bell_many_partitions() {
        for n in 1..=8 {
            let mut labels = vec![0; n];
            let mut count = 1;
            while next_rgs(&mut labels) {
                count += 1;
            }
            assert_eq!(count, bell(n), "n = {n}");
        }
        assert_eq!(bell(10), 115_975);
    }

    #[test]
    fn singleton_instance() {
        let s = brute_force_oracle(&EditingInstance::from_fn(1, |_, _| 0.0)).unwrap();
        assert_eq!(s.clusters, vec![vec![0]]);
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn three_entity_examples() {
        // w(a,b)=1, w(b,c)=1, w(a,c)=-0.5
        let w = |ac: f64| move |i: usize, j: usize| if (i, j) == (0, 2) { ac } else { 1.0 };
        let s = brute_force_oracle(&EditingInstance::from_fn(3, w(-0.5))).unwrap();
        assert_eq!(s.clusters, vec![vec![0, 1, 2]]);
        assert!((s.objective - 1.5).abs() < 1e-12);

        let s = brute_force_oracle(&EditingInstance::from_fn(3, w(-3.0))).unwrap();
        assert_eq!(s.objective, 1.0);
        assert_eq!(s.clusters, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn negative_weights_give_singletons() {
        let s = brute_force_oracle(&EditingInstance::from_fn(5, |i, j| -1.0 - (i + j) as f64)).unwrap();
        assert_eq!(s.clusters.len(), 5);
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn refuses_large_instances() {
        assert!(matches!(
            brute_force_oracle(&EditingInstance::from_fn(11, |_, _| 1.0)),
            Err(Error::OracleTooLarge(11))
        ));
    }
}
