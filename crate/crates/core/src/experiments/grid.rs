//! Exhaustive hyperparameter search with speaker-disjoint inner folds.

use std::cmp::Ordering;

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::folds::plan_outer_folds;
use super::svm::{decisions_from_distances, fit_dual, squared_distances, SolverOptions, Standardizer};
use crate::error::{Error, Result};
use crate::task::Impairment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpace {
    pub gammas: Vec<f64>,
    pub cs: Vec<f64>,
    /// Candidate embedding layers; ignored for functionals.
    pub layers: Vec<usize>,
}

impl Default for GridSpace {
    fn default() -> Self {
        Self {
            gammas: (1..=5).map(|k| 10f64.powi(-k)).collect(),
            cs: (-1..=3).map(|k| 10f64.powi(k)).collect(),
            layers: (1..=12).collect(),
        }
    }
}

impl GridSpace {
    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.cs.is_empty() {
            return Err(Error::Config("grid needs at least one gamma and one C".into()));
        }
        if self.gammas.iter().chain(&self.cs).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("grid values must be positive and finite".into()));
        }
        if self.layers.contains(&0) {
            return Err(Error::Config("layers are numbered from 1".into()));
        }
        Ok(())
    }

    pub fn with_layers(&self, layers: Vec<usize>) -> Self {
        Self { layers, ..self.clone() }
    }
}

/// Cross-validation protocol settings shared by outer and inner loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Protocol {
    pub outer_k: usize,
    pub inner_k: usize,
    pub normalize: bool,
    pub solver: SolverOptions,
}

impl Default for Protocol {
    fn default() -> Self {
        Self { outer_k: 5, inner_k: 5, normalize: true, solver: SolverOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub gamma: f64,
    pub c: f64,
    pub layer: Option<usize>,
    /// Mean inner-fold accuracy in [0, 1].
    pub inner_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best: Selection,
    /// Every evaluated point, layer-major then gamma then C.
    pub scores: Vec<Selection>,
}

/// Ordering of candidates: higher accuracy, then smaller C, then larger
/// gamma, then smaller layer. `Less` means `a` is preferred.
pub fn preference(a: &Selection, b: &Selection) -> Ordering {
    const EPS: f64 = 1e-12;
    if (a.inner_accuracy - b.inner_accuracy).abs() > EPS {
        return b.inner_accuracy.total_cmp(&a.inner_accuracy);
    }
    a.c.total_cmp(&b.c)
        .then(b.gamma.total_cmp(&a.gamma))
        .then(a.layer.cmp(&b.layer))
}

/// Layers to search for this dataset: `None` for functionals, otherwise
/// the grid's layers, all of which must exist.
pub(crate) fn candidate_layers(ds: &Dataset, grid: &GridSpace) -> Result<Vec<Option<usize>>> {
    let available = ds.layers();
    if available == [None] {
        return Ok(vec![None]);
    }
    let layers: Vec<Option<usize>> = grid.layers.iter().map(|&l| Some(l)).collect();
    if layers.is_empty() {
        return Err(Error::Config("embedding grid needs at least one layer".into()));
    }
    for l in &layers {
        ds.view(*l)?;
    }
    Ok(layers)
}

/// Grid search over `train` (indices into `ds`) with inner grouped,
/// stratified folds.
pub fn inner_grid_search(ds: &Dataset, train: &[usize], grid: &GridSpace, protocol: &Protocol, seed: u64) -> Result<GridOutcome> {
    grid.validate()?;
    let layers = candidate_layers(ds, grid)?;
    let labels: Vec<Impairment> = train.iter().map(|&i| ds.labels[i]).collect();
    let groups: Vec<String> = train.iter().map(|&i| ds.subjects[i].clone()).collect();
    let plan = plan_outer_folds(&labels, &groups, protocol.inner_k, seed)?;

    let units: Vec<(Option<usize>, usize)> = layers
        .iter()
        .flat_map(|&l| (0..plan.folds.len()).map(move |f| (l, f)))
        .collect();
    // fraction correct per (gamma, C) for each (layer, inner fold)
    let per_unit: Vec<Vec<f64>> = units
        .par_iter()
        .map(|&(layer, f)| {
            let fold = &plan.folds[f];
            let tr: Vec<usize> = fold.train.iter().map(|&i| train[i]).collect();
            let te: Vec<usize> = fold.test.iter().map(|&i| train[i]).collect();
            evaluate_grid(ds, layer, &tr, &te, grid, protocol)
        })
        .collect::<Result<_>>()?;

    let n_folds = plan.folds.len() as f64;
    let mut scores = Vec::with_capacity(layers.len() * grid.gammas.len() * grid.cs.len());
    for (li, &layer) in layers.iter().enumerate() {
        let unit_rows = &per_unit[li * plan.folds.len()..(li + 1) * plan.folds.len()];
        for (gi, &gamma) in grid.gammas.iter().enumerate() {
            for (ci, &c) in grid.cs.iter().enumerate() {
                let p = gi * grid.cs.len() + ci;
                let acc = unit_rows.iter().map(|u| u[p]).sum::<f64>() / n_folds;
                scores.push(Selection { gamma, c, layer, inner_accuracy: acc });
            }
        }
    }
    let best = *scores.iter().min_by(|a, b| preference(a, b)).expect("non-empty grid");
    Ok(GridOutcome { best, scores })
}

/// Accuracy of every (gamma, C) pair trained on `tr` and tested on `te`.
pub(crate) fn evaluate_grid(
    ds: &Dataset,
    layer: Option<usize>,
    tr: &[usize],
    te: &[usize],
    grid: &GridSpace,
    protocol: &Protocol,
) -> Result<Vec<f64>> {
    let x = &ds.view(layer)?.x;
    let x_tr = x.select(Axis(0), tr);
    let x_te = x.select(Axis(0), te);
    let s = if protocol.normalize { Standardizer::fit(x_tr.view()) } else { Standardizer::identity(x.ncols()) };
    let (z_tr, z_te) = (s.transform(x_tr.view()), s.transform(x_te.view()));
    let d_tr = squared_distances(z_tr.view(), z_tr.view());
    let d_te = squared_distances(z_te.view(), z_tr.view());
    let y_tr: Vec<Impairment> = tr.iter().map(|&i| ds.labels[i]).collect();
    let y_te: Vec<Impairment> = te.iter().map(|&i| ds.labels[i]).collect();
    let mut out = Vec::with_capacity(grid.gammas.len() * grid.cs.len());
    for &gamma in &grid.gammas {
        for &c in &grid.cs {
            let fit = fit_dual(d_tr.view(), &y_tr, gamma, c, &protocol.solver)?;
            let dec = decisions_from_distances(d_te.view(), &fit.coef, fit.rho, gamma);
            let correct = dec.iter().zip(&y_te).filter(|(d, y)| Impairment::from_decision(**d) == **y).count();
            out.push(correct as f64 / y_te.len() as f64);
        }
    }
    Ok(out)
}
