use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureVector};
use crate::scoring::LabelSet;
use crate::task::{Impairment, Task};

/// One feature matrix (rows aligned with the dataset's samples).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureView {
    /// Embedding layer, `None` for functionals.
    pub layer: Option<usize>,
    pub schema_id: String,
    pub x: Array2<f64>,
}

/// Labelled samples of one task with one or more aligned feature views.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: Task,
    pub kind: FeatureKind,
    pub sample_ids: Vec<String>,
    pub subjects: Vec<String>,
    pub labels: Vec<Impairment>,
    pub views: Vec<FeatureView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub samples: usize,
    pub subjects: usize,
    pub impaired: usize,
    pub non_impaired: usize,
    pub dim: usize,
    pub layers: Vec<Option<usize>>,
}

impl Dataset {
    pub fn new(
        task: Task,
        kind: FeatureKind,
        sample_ids: Vec<String>,
        subjects: Vec<String>,
        labels: Vec<Impairment>,
        views: Vec<FeatureView>,
    ) -> Result<Self> {
        let n = sample_ids.len();
        if n == 0 {
            return Err(Error::invalid(format!("no {task} samples")));
        }
        if subjects.len() != n || labels.len() != n {
            return Err(Error::invalid("sample ids, subjects and labels differ in length"));
        }
        if views.is_empty() || views.iter().any(|v| v.x.nrows() != n) {
            return Err(Error::invalid("every feature view needs one row per sample"));
        }
        if views.iter().any(|v| v.x.iter().any(|f| !f.is_finite())) {
            return Err(Error::invalid("feature matrix contains non-finite values"));
        }
        Ok(Self { task, kind, sample_ids, subjects, labels, views })
    }

    /// Joins feature vectors of `task` with the task labels; samples of
    /// unlabelled (excluded) subjects are dropped.
    pub fn from_vectors(task: Task, vectors: &[FeatureVector], labels: &LabelSet) -> Result<Self> {
        let mut by_layer: BTreeMap<Option<usize>, BTreeMap<String, &FeatureVector>> = BTreeMap::new();
        let mut kind = None;
        for v in vectors.iter().filter(|v| v.provenance.segment_kind == task) {
            if *kind.get_or_insert(v.kind) != v.kind {
                return Err(Error::invalid("cannot mix functionals and embeddings in one dataset"));
            }
            if labels.label(&v.provenance.subject_id, task).is_none() {
                continue;
            }
            let layer = by_layer.entry(v.layer).or_default();
            if layer.insert(v.provenance.sample_id(), v).is_some() {
                return Err(Error::invalid(format!("duplicate feature row {}", v.provenance.sample_id())));
            }
        }
        let kind = kind.ok_or_else(|| Error::invalid(format!("no {task} feature vectors")))?;
        let mut layers = by_layer.into_iter();
        let (first_layer, first) = layers.next().ok_or_else(|| Error::invalid(format!("no labelled {task} samples")))?;
        let sample_ids: Vec<String> = first.keys().cloned().collect();
        let subjects: Vec<String> = first.values().map(|v| v.provenance.subject_id.clone()).collect();
        let label_vec: Vec<Impairment> = subjects
            .iter()
            .map(|s| labels.label(s, task).expect("filtered to labelled subjects"))
            .collect();
        let mut views = vec![matrix(first_layer, &first)?];
        for (layer, rows) in layers {
            if rows.keys().ne(sample_ids.iter()) {
                return Err(Error::invalid(format!("layer {layer:?} covers different samples than layer {first_layer:?}")));
            }
            views.push(matrix(layer, &rows)?);
        }
        Self::new(task, kind, sample_ids, subjects, label_vec, views)
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn view(&self, layer: Option<usize>) -> Result<&FeatureView> {
        self.views
            .iter()
            .find(|v| v.layer == layer)
            .ok_or_else(|| Error::invalid(format!("dataset has no features for layer {layer:?}")))
    }

    pub fn layers(&self) -> Vec<Option<usize>> {
        self.views.iter().map(|v| v.layer).collect()
    }

    pub fn with_labels(&self, labels: Vec<Impairment>) -> Result<Self> {
        Self::new(self.task, self.kind, self.sample_ids.clone(), self.subjects.clone(), labels, self.views.clone())
    }

    pub fn summary(&self) -> DatasetSummary {
        let impaired = self.labels.iter().filter(|l| **l == Impairment::Impaired).count();
        let mut subjects = self.subjects.clone();
        subjects.sort();
        subjects.dedup();
        DatasetSummary {
            samples: self.len(),
            subjects: subjects.len(),
            impaired,
            non_impaired: self.len() - impaired,
            dim: self.views[0].x.ncols(),
            layers: self.layers(),
        }
    }
}

fn matrix(layer: Option<usize>, rows: &BTreeMap<String, &FeatureVector>) -> Result<FeatureView> {
    let first = rows.values().next().expect("non-empty layer");
    let dim = first.values.len();
    let mut data = Vec::with_capacity(rows.len() * dim);
    for v in rows.values() {
        if v.values.len() != dim || v.schema_id != first.schema_id {
            return Err(Error::invalid(format!("{} does not match schema {}", v.provenance.sample_id(), first.schema_id)));
        }
        data.extend_from_slice(&v.values);
    }
    Ok(FeatureView {
        layer,
        schema_id: first.schema_id.clone(),
        x: Array2::from_shape_vec((rows.len(), dim), data).expect("rows x dim"),
    })
}
