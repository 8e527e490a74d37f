//! Nested, speaker-disjoint cross-validation of RBF SVMs.

mod dataset;
mod folds;
mod grid;
mod run;
mod svm;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::task::Task;

pub use dataset::{Dataset, DatasetSummary, FeatureView};
pub use folds::{audit_fold_plan, plan_outer_folds, Fold, FoldPlan};
pub use grid::{inner_grid_search, preference, GridOutcome, GridSpace, Protocol, Selection};
pub use run::{
    audit_run, best_layer, layer_sweep, mean_std, run_task_experiment, ExperimentResult, ExperimentRun, FoldLog,
    FoldOutcome, LayerScore, SubjectVote,
};
pub use svm::{rbf, solve_dual, squared_distances, train_rbf_classifier, DualSolution, SolverOptions, Standardizer, TrainedModel};

/// Experiment section of the pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub tasks: Vec<Task>,
    pub kinds: Vec<FeatureKind>,
    pub grid: GridSpace,
    pub protocol: Protocol,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            tasks: Task::ALL.to_vec(),
            kinds: vec![FeatureKind::Functionals, FeatureKind::Embedding],
            grid: GridSpace::default(),
            protocol: Protocol::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.protocol.outer_k < 2 || self.protocol.inner_k < 2 {
            return Err(Error::Config("fold counts must be at least 2".into()));
        }
        Ok(())
    }
}

/// Writes `{stem}.json` (result), `{stem}_folds.json` (fold logs and plan)
/// and `{stem}_models.json`.
pub fn write_run(dir: &Path, stem: &str, run: &ExperimentRun) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: String, bytes: Vec<u8>| {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    write(format!("{stem}.json"), serde_json::to_vec_pretty(&run.result)?)?;
    write(
        format!("{stem}_folds.json"),
        serde_json::to_vec_pretty(&serde_json::json!({ "plan": run.plan, "folds": run.logs }))?,
    )?;
    write(format!("{stem}_models.json"), serde_json::to_vec(&run.models)?)
}
