//! Nested cross-validation runs and layer sweeps.

use std::collections::BTreeMap;

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::folds::{audit_fold_plan, plan_outer_folds, FoldPlan};
use super::grid::{inner_grid_search, GridSpace, Protocol, Selection};
use super::svm::{squared_distances, fit_from_distances, Standardizer, TrainedModel};
use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::task::{Impairment, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    /// Percent correct on the outer test fold.
    pub accuracy: f64,
    pub correct: usize,
    pub n_test: usize,
    pub selection: Selection,
    /// Subject-level majority-vote accuracy (interview only).
    pub vote_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectVote {
    pub mean: f64,
    pub std: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub task: Task,
    pub kind: FeatureKind,
    pub seed: u64,
    pub normalize: bool,
    pub folds: Vec<FoldOutcome>,
    /// Mean of fold accuracies, percent.
    pub mean: f64,
    /// Population standard deviation of fold accuracies, percent.
    pub std: f64,
    pub subject_vote: Option<SubjectVote>,
}

impl ExperimentResult {
    pub fn fold_accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.accuracy).collect()
    }
}

/// Everything needed to re-check one outer fold for leakage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldLog {
    pub fold: usize,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
    pub normalization: Standardizer,
    pub selection: Selection,
    pub grid: Vec<Selection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub result: ExperimentResult,
    pub plan: FoldPlan,
    pub logs: Vec<FoldLog>,
    pub models: Vec<TrainedModel>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn inner_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(fold as u64 + 1)
}

fn sorted_unique(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v.dedup();
    v
}

/// Outer speaker-disjoint CV; in each fold an inner grid search on the
/// training portion picks (gamma, C[, layer]), the model is refit on the
/// whole training portion and scored on the test fold.
pub fn run_task_experiment(ds: &Dataset, grid: &GridSpace, protocol: &Protocol, seed: u64) -> Result<ExperimentRun> {
    let plan = plan_outer_folds(&ds.labels, &ds.subjects, protocol.outer_k, seed)?;
    audit_fold_plan(&plan, &ds.subjects)?;

    let per_fold: Vec<(FoldOutcome, FoldLog, TrainedModel)> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let search = inner_grid_search(ds, &fold.train, grid, protocol, inner_seed(seed, f))?;
            let sel = search.best;
            let x = &ds.view(sel.layer)?.x;
            let x_tr = x.select(Axis(0), &fold.train);
            let normalization =
                if protocol.normalize { Standardizer::fit(x_tr.view()) } else { Standardizer::identity(x.ncols()) };
            let z_tr = normalization.transform(x_tr.view());
            let d_tr = squared_distances(z_tr.view(), z_tr.view());
            let y_tr: Vec<Impairment> = fold.train.iter().map(|&i| ds.labels[i]).collect();
            let mut model = fit_from_distances(d_tr.view(), &y_tr, sel.gamma, sel.c, &protocol.solver, |i| z_tr.row(i).to_vec())?;
            model.standardizer = normalization.clone();
            model.layer = sel.layer;

            let predictions: Vec<(usize, f64)> = fold.test.iter().map(|&i| (i, model.decision(x.row(i)))).collect();
            let correct = predictions
                .iter()
                .filter(|(i, d)| Impairment::from_decision(*d) == ds.labels[*i])
                .count();
            let vote_accuracy = (ds.task == Task::Interview).then(|| subject_vote(ds, &predictions));
            let outcome = FoldOutcome {
                fold: f,
                accuracy: 100.0 * correct as f64 / fold.test.len() as f64,
                correct,
                n_test: fold.test.len(),
                selection: sel,
                vote_accuracy,
            };
            let log = FoldLog {
                fold: f,
                train_ids: fold.train.iter().map(|&i| ds.sample_ids[i].clone()).collect(),
                test_ids: fold.test.iter().map(|&i| ds.sample_ids[i].clone()).collect(),
                train_subjects: sorted_unique(fold.train.iter().map(|&i| ds.subjects[i].clone()).collect()),
                test_subjects: sorted_unique(fold.test.iter().map(|&i| ds.subjects[i].clone()).collect()),
                normalization,
                selection: sel,
                grid: search.scores,
            };
            Ok((outcome, log, model))
        })
        .collect::<Result<_>>()?;

    let mut folds = Vec::new();
    let mut logs = Vec::new();
    let mut models = Vec::new();
    for (o, l, m) in per_fold {
        folds.push(o);
        logs.push(l);
        models.push(m);
    }
    let (mean, std) = mean_std(&folds.iter().map(|f| f.accuracy).collect::<Vec<_>>());
    let subject_vote = (ds.task == Task::Interview).then(|| {
        let votes: Vec<f64> = folds.iter().filter_map(|f| f.vote_accuracy).collect();
        let (mean, std) = mean_std(&votes);
        SubjectVote { mean, std, note: "subject-level majority vote; supplementary, not the segment-level protocol".into() }
    });
    let result = ExperimentResult {
        task: ds.task,
        kind: ds.kind,
        seed,
        normalize: protocol.normalize,
        folds,
        mean,
        std,
        subject_vote,
    };
    let run = ExperimentRun { result, plan, logs, models };
    audit_run(ds, &run, protocol)?;
    Ok(run)
}

/// Majority vote per test subject; ties go to the sign of the mean decision.
fn subject_vote(ds: &Dataset, predictions: &[(usize, f64)]) -> f64 {
    let mut per_subject: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for &(i, d) in predictions {
        per_subject.entry(ds.subjects[i].as_str()).or_default().push(d);
    }
    let label_of: BTreeMap<&str, Impairment> = predictions.iter().map(|&(i, _)| (ds.subjects[i].as_str(), ds.labels[i])).collect();
    let correct = per_subject
        .iter()
        .filter(|(s, ds_)| {
            let impaired = ds_.iter().filter(|&&d| d >= 0.0).count();
            let vote = match (2 * impaired).cmp(&ds_.len()) {
                std::cmp::Ordering::Greater => Impairment::Impaired,
                std::cmp::Ordering::Less => Impairment::NonImpaired,
                std::cmp::Ordering::Equal => Impairment::from_decision(ds_.iter().sum::<f64>()),
            };
            vote == label_of[*s]
        })
        .count();
    100.0 * correct as f64 / per_subject.len() as f64
}

/// Re-derives each fold's normalization from the logged training ids and
/// checks speaker exclusivity and the test partition.
pub fn audit_run(ds: &Dataset, run: &ExperimentRun, protocol: &Protocol) -> Result<()> {
    audit_fold_plan(&run.plan, &ds.subjects)?;
    let index: BTreeMap<&str, usize> = ds.sample_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut tested = Vec::new();
    for log in &run.logs {
        let train: Vec<usize> = log.train_ids.iter().map(|id| index[id.as_str()]).collect();
        if log.train_subjects.iter().any(|s| log.test_subjects.binary_search(s).is_ok()) {
            return Err(Error::invalid(format!("fold {}: subject in train and test", log.fold)));
        }
        let x = &ds.view(log.selection.layer)?.x;
        let x_tr = x.select(Axis(0), &train);
        let expected =
            if protocol.normalize { Standardizer::fit(x_tr.view()) } else { Standardizer::identity(x.ncols()) };
        if expected != log.normalization {
            return Err(Error::invalid(format!("fold {}: normalization not derived from the training portion", log.fold)));
        }
        tested.extend(log.test_ids.iter().cloned());
    }
    tested.sort();
    let mut all = ds.sample_ids.clone();
    all.sort();
    if tested != all {
        return Err(Error::invalid("test folds do not partition the dataset"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerScore {
    pub layer: usize,
    pub mean: f64,
    pub std: f64,
}

/// Full outer CV once per fixed layer, searching only gamma and C.
pub fn layer_sweep(ds: &Dataset, grid: &GridSpace, protocol: &Protocol, seed: u64) -> Result<Vec<LayerScore>> {
    let layers: Vec<usize> = ds.layers().into_iter().flatten().collect();
    if layers.is_empty() {
        return Err(Error::invalid("layer sweep needs embedding features"));
    }
    layers
        .par_iter()
        .map(|&layer| {
            let run = run_task_experiment(ds, &grid.with_layers(vec![layer]), protocol, seed)?;
            Ok(LayerScore { layer, mean: run.result.mean, std: run.result.std })
        })
        .collect()
}

/// Layer with the highest mean accuracy (ties to the smaller layer).
pub fn best_layer(scores: &[LayerScore]) -> Option<usize> {
    scores
        .iter()
        .min_by(|a, b| b.mean.total_cmp(&a.mean).then(a.layer.cmp(&b.layer)))
        .map(|s| s.layer)
}
