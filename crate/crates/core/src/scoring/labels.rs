use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::cerad::{binarize_z, cerad_z_score, derive_z_threshold, CeradCoeffs, CeradScore, ThresholdInput};
use super::norms::{binarize_norm, skt_norm_value, NormTable, SktScore};
use crate::corpus::{Cohort, RawTime, SubjectMeta};
use crate::error::{Error, Result};
use crate::task::{Impairment, Task};

/// How the verbal-fluency z threshold is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdRule {
    /// Derived from SKT-concordant subjects, see [`derive_z_threshold`].
    Derive,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    pub skt3_norms: NormTable,
    pub skt7_norms: NormTable,
    pub cerad: CeradCoeffs,
    pub cutoff: u8,
    pub threshold: ThresholdRule,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            skt3_norms: NormTable::synthetic_default(Task::Skt3),
            skt7_norms: NormTable::synthetic_default(Task::Skt7),
            cerad: CeradCoeffs::synthetic_default(),
            cutoff: 1,
            threshold: ThresholdRule::Derive,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        self.skt3_norms.validate()?;
        self.skt7_norms.validate()?;
        self.cerad.validate()?;
        if !(1..=3).contains(&self.cutoff) {
            return Err(Error::Config(format!("cutoff {} outside 1..=3", self.cutoff)));
        }
        Ok(())
    }
}

/// Class target with the sub-test it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabel {
    pub value: Impairment,
    pub source: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectLabels {
    pub skt3: SktScore,
    pub skt7: SktScore,
    pub cerad1: CeradScore,
    pub labels: BTreeMap<Task, ClassLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub subject_id: String,
    pub reason: String,
}

/// Labels for every scorable subject of a cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub threshold: f64,
    pub subjects: BTreeMap<String, SubjectLabels>,
    pub excluded: Vec<Exclusion>,
}

impl LabelSet {
    pub fn label(&self, subject_id: &str, task: Task) -> Option<Impairment> {
        self.subjects
            .get(subject_id)
            .and_then(|s| s.labels.get(&task))
            .map(|l| l.value)
    }

    /// (non-impaired, impaired) counts for a task.
    pub fn split(&self, task: Task) -> (usize, usize) {
        let impaired = self
            .subjects
            .values()
            .filter(|s| s.labels[&task].value == Impairment::Impaired)
            .count();
        (self.subjects.len() - impaired, impaired)
    }

    /// Writes `subject_id,task,label,score` rows; the score is the SKT norm
    /// value or the verbal-fluency z.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["subject_id", "task", "label", "score"])?;
        for (id, s) in &self.subjects {
            for task in Task::ALL {
                let score = match task {
                    Task::Skt3 => s.skt3.norm_value.to_string(),
                    Task::Skt7 => s.skt7.norm_value.to_string(),
                    Task::Cerad1 | Task::Interview => format!("{}", s.cerad1.z),
                };
                csv.write_record([id.as_str(), task.as_str(), s.labels[&task].value.as_str(), &score])?;
            }
        }
        csv.flush().map_err(|e| Error::io("<labels csv>", e))
    }
}

/// Derives SKT 3, SKT 7, verbal-fluency and interview labels for every subject
/// with complete raw scores. Interview labels copy the verbal-fluency label.
pub fn assign_labels(cohort: &Cohort, config: &ScoringConfig) -> Result<LabelSet> {
    config.validate()?;
    let mut excluded = Vec::new();
    let mut scored: Vec<(SktScore, SktScore, CeradScore)> = Vec::new();
    for subject in &cohort.subjects {
        match score_subject(cohort, subject, config) {
            Ok(s) => scored.push(s),
            Err(reason) => {
                log::warn!("excluding subject {}: {reason}", subject.subject_id);
                excluded.push(Exclusion {
                    subject_id: subject.subject_id.clone(),
                    reason,
                });
            }
        }
    }

    let threshold = match config.threshold {
        ThresholdRule::Fixed(t) => t,
        ThresholdRule::Derive => {
            let inputs: Vec<ThresholdInput> = scored
                .iter()
                .map(|(s3, s7, c)| ThresholdInput {
                    skt3: binarize_norm(s3.norm_value, config.cutoff),
                    skt7: binarize_norm(s7.norm_value, config.cutoff),
                    z: c.z,
                })
                .collect();
            derive_z_threshold(&inputs)?
        }
    };

    let subjects = scored
        .into_iter()
        .map(|(skt3, skt7, cerad1)| {
            let fluency = binarize_z(cerad1.z, threshold);
            let labels = BTreeMap::from([
                (Task::Skt3, ClassLabel { value: binarize_norm(skt3.norm_value, config.cutoff), source: Task::Skt3 }),
                (Task::Skt7, ClassLabel { value: binarize_norm(skt7.norm_value, config.cutoff), source: Task::Skt7 }),
                (Task::Cerad1, ClassLabel { value: fluency, source: Task::Cerad1 }),
                (Task::Interview, ClassLabel { value: fluency, source: Task::Cerad1 }),
            ]);
            (cerad1.subject_id.clone(), SubjectLabels { skt3, skt7, cerad1, labels })
        })
        .collect();
    Ok(LabelSet {
        threshold,
        subjects,
        excluded,
    })
}

fn score_subject(
    cohort: &Cohort,
    subject: &SubjectMeta,
    config: &ScoringConfig,
) -> std::result::Result<(SktScore, SktScore, CeradScore), String> {
    let scores = cohort.scores(&subject.subject_id);
    let skt = |task: Task, raw: Option<RawTime>, table: &NormTable| -> std::result::Result<SktScore, String> {
        let raw = raw.ok_or_else(|| format!("missing {task} completion time"))?;
        let (raw_time_s, norm_value) = match raw {
            RawTime::Seconds(t) => (
                Some(t),
                skt_norm_value(t, subject.age, subject.iq_group, table).map_err(|e| e.to_string())?,
            ),
            // could not perform the task at all
            RawTime::Failed(_) => (None, 3),
        };
        Ok(SktScore {
            subject_id: subject.subject_id.clone(),
            subtest: task,
            raw_time_s,
            norm_value,
        })
    };
    let skt3 = skt(Task::Skt3, scores.skt3_time_s, &config.skt3_norms)?;
    let skt7 = skt(Task::Skt7, scores.skt7_time_s, &config.skt7_norms)?;
    let count = scores.cerad1_count.ok_or("missing cerad1 count")?;
    let z = cerad_z_score(count, subject.age, subject.education_years, subject.sex, &config.cerad)
        .map_err(|e| e.to_string())?;
    Ok((
        skt3,
        skt7,
        CeradScore {
            subject_id: subject.subject_id.clone(),
            raw_count: count,
            z,
        },
    ))
}
