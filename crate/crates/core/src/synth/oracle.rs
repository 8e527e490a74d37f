//! Agreement between scored labels and the classes a cohort was generated with.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SubjectTruth;
use crate::scoring::LabelSet;
use crate::task::Task;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskAgreement {
    pub compared: usize,
    pub agreed: usize,
}

impl TaskAgreement {
    /// Agreed fraction; 0 when nothing was compared.
    pub fn rate(&self) -> f64 {
        if self.compared == 0 {
            0.0
        } else {
            self.agreed as f64 / self.compared as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub per_task: BTreeMap<Task, TaskAgreement>,
    /// Subjects without scored labels, with the scorer's reason when it gave one.
    pub flagged: Vec<(String, String)>,
}

impl OracleReport {
    /// Agreement pooled over the three scored sub-tests.
    pub fn agreement(&self) -> f64 {
        let (mut n, mut k) = (0, 0);
        for t in [Task::Skt3, Task::Skt7, Task::Cerad1] {
            if let Some(a) = self.per_task.get(&t) {
                n += a.compared;
                k += a.agreed;
            }
        }
        if n == 0 {
            0.0
        } else {
            k as f64 / n as f64
        }
    }
}

/// Compares scored labels with generating classes. Subjects the scorer
/// excluded are flagged and left out of every count.
pub fn verify_oracle(truth: &[SubjectTruth], labels: &LabelSet) -> OracleReport {
    let mut per_task: BTreeMap<Task, TaskAgreement> = Task::ALL.iter().map(|t| (*t, TaskAgreement::default())).collect();
    let mut flagged = Vec::new();
    for t in truth {
        if !labels.subjects.contains_key(&t.subject_id) {
            let reason = labels
                .excluded
                .iter()
                .find(|e| e.subject_id == t.subject_id)
                .map_or_else(|| "not scored".to_owned(), |e| e.reason.clone());
            flagged.push((t.subject_id.clone(), reason));
            continue;
        }
        for task in Task::ALL {
            let entry = per_task.get_mut(&task).expect("all tasks present");
            entry.compared += 1;
            if labels.label(&t.subject_id, task) == Some(t.class(task)) {
                entry.agreed += 1;
            }
        }
    }
    OracleReport { per_task, flagged }
}
