//! Speaker-exclusive stratified fold assignment.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::Impairment;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    /// Sample indices, ascending.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Assigns whole groups (subjects) to `k` folds, class by class, each
/// group going to the fold that currently holds the fewest samples of its
/// class, then the fewest samples overall, then the lowest index. Group
/// order within a class is a seeded shuffle.
///
/// A group's class is the majority label of its samples (ties: impaired).
pub fn plan_outer_folds(labels: &[Impairment], groups: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    if labels.len() != groups.len() {
        return Err(Error::invalid(format!("{} labels for {} group keys", labels.len(), groups.len())));
    }
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g.as_str()).or_default().push(i);
    }
    if members.len() < k {
        return Err(Error::invalid(format!("{} subjects cannot fill {k} speaker-disjoint folds", members.len())));
    }
    let classes: BTreeSet<Impairment> = labels.iter().copied().collect();
    if classes.len() < 2 {
        return Err(Error::invalid("stratified folds need both classes"));
    }

    let mut by_class: BTreeMap<Impairment, Vec<&Vec<usize>>> = BTreeMap::new();
    for idx in members.values() {
        let impaired = idx.iter().filter(|&&i| labels[i] == Impairment::Impaired).count();
        let class = if 2 * impaired >= idx.len() { Impairment::Impaired } else { Impairment::NonImpaired };
        by_class.entry(class).or_default().push(idx);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<(Impairment, Vec<&Vec<usize>>)> = by_class.into_iter().collect();
    // minority class first, impaired first on ties
    order.sort_by_key(|(c, g)| (g.len(), std::cmp::Reverse(*c)));

    let mut test: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (_, mut class_groups) in order {
        class_groups.shuffle(&mut rng);
        let mut class_count = vec![0usize; k];
        for g in class_groups {
            let f = (0..k)
                .min_by_key(|&f| (class_count[f], test[f].len(), f))
                .expect("k >= 2");
            class_count[f] += g.len();
            test[f].extend(g);
        }
    }
    let n = labels.len();
    let folds = test
        .into_iter()
        .map(|mut t| {
            t.sort_unstable();
            let in_test: BTreeSet<usize> = t.iter().copied().collect();
            Fold { train: (0..n).filter(|i| !in_test.contains(i)).collect(), test: t }
        })
        .collect();
    Ok(FoldPlan { k, seed, folds })
}

/// Checks that test sets partition `0..n`, train is the complement, and no
/// group appears on both sides of any fold.
pub fn audit_fold_plan(plan: &FoldPlan, groups: &[String]) -> Result<()> {
    let n = groups.len();
    let mut seen = vec![0usize; n];
    for (f, fold) in plan.folds.iter().enumerate() {
        for &i in &fold.test {
            if i >= n {
                return Err(Error::invalid(format!("fold {f}: sample {i} out of range")));
            }
            seen[i] += 1;
        }
        let test: BTreeSet<usize> = fold.test.iter().copied().collect();
        let train: BTreeSet<usize> = fold.train.iter().copied().collect();
        if train.len() + test.len() != n || !train.is_disjoint(&test) {
            return Err(Error::invalid(format!("fold {f}: train is not the complement of test")));
        }
        let test_groups: BTreeSet<&str> = fold.test.iter().map(|&i| groups[i].as_str()).collect();
        if let Some(&i) = fold.train.iter().find(|&&i| test_groups.contains(groups[i].as_str())) {
            return Err(Error::invalid(format!("fold {f}: subject {} in both train and test", groups[i])));
        }
    }
    if let Some(i) = seen.iter().position(|&c| c != 1) {
        return Err(Error::invalid(format!("sample {i} appears in {} test sets", seen[i])));
    }
    Ok(())
}
