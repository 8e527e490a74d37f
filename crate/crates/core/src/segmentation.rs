//! Sub-test segment extraction and fixed interview sampling.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_mono_wav, Cohort, Recording, SegmentLabel, Waveform};
use crate::error::{Error, Result};
use crate::task::Task;

/// Sub-tests are one-minute tasks; longer spans probably include extra material.
pub const SUBTEST_WARN_S: f64 = 90.0;
pub const INTERVIEW_WINDOW_S: f64 = 30.0;
pub const INTERVIEW_ANCHORS: [f64; 4] = [0.30, 0.40, 0.50, 0.60];

/// Mono 16 kHz audio cut from a session recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub subject_id: String,
    pub kind: Task,
    /// Position among the subject's segments of this kind (interview samples 0-3).
    pub index: usize,
    pub waveform: Waveform,
    /// Start of the segment within the session recording, seconds.
    pub offset_s: f64,
}

impl Segment {
    pub fn duration_s(&self) -> f64 {
        self.waveform.duration_s()
    }

    /// Stable identifier `{subject}_{kind}_{index}`.
    pub fn id(&self) -> String {
        format!("{}_{}_{}", self.subject_id, self.kind, self.index)
    }
}

fn sample_index(t: f64, rate: u32) -> usize {
    (t * rate as f64).round() as usize
}

/// Cuts the labelled span out of the session waveform, sample-accurately.
pub fn extract_subtest_segment(waveform: &Waveform, label: &SegmentLabel) -> Result<Segment> {
    let rate = waveform.sample_rate;
    let start = sample_index(label.start_s, rate);
    let end = sample_index(label.end_s, rate);
    if !(label.start_s >= 0.0) || start >= end || end > waveform.samples.len() {
        return Err(Error::invalid(format!(
            "segment {} {} [{}, {}] s outside waveform of {:.3} s",
            label.subject_id,
            label.segment_kind,
            label.start_s,
            label.end_s,
            waveform.duration_s()
        )));
    }
    let duration = label.duration_s();
    if duration > SUBTEST_WARN_S && label.segment_kind != Task::Interview {
        log::warn!(
            "{} {} segment lasts {duration:.1} s, longer than the expected one-minute task",
            label.subject_id,
            label.segment_kind
        );
    }
    Ok(Segment {
        subject_id: label.subject_id.clone(),
        kind: label.segment_kind,
        index: 0,
        waveform: Waveform::new(waveform.samples[start..end].to_vec(), rate),
        offset_s: start as f64 / rate as f64,
    })
}

/// Takes `window_s` samples starting at each anchor fraction of the labelled
/// interview span. Windows may overlap for short interviews.
pub fn sample_interview_segments(
    waveform: &Waveform,
    interview: &SegmentLabel,
    window_s: f64,
    anchors: &[f64],
) -> Result<Vec<Segment>> {
    if anchors.is_empty() || anchors.iter().any(|a| !(0.0..1.0).contains(a)) {
        return Err(Error::invalid("interview anchors must lie in [0, 1)"));
    }
    if !(window_s > 0.0) {
        return Err(Error::invalid("interview window must be positive"));
    }
    let duration = interview.duration_s();
    let last = anchors.iter().cloned().fold(0.0, f64::max);
    if last * duration + window_s > duration {
        return Err(Error::invalid(format!(
            "interview too short: {} lasts {duration:.1} s, needs {:.1} s for the last window",
            interview.subject_id,
            window_s / (1.0 - last)
        )));
    }
    let rate = waveform.sample_rate;
    let window_len = sample_index(window_s, rate);
    anchors
        .iter()
        .enumerate()
        .map(|(index, anchor)| {
            let start = sample_index(interview.start_s + anchor * duration, rate);
            let end = start + window_len;
            if end > waveform.samples.len() {
                return Err(Error::invalid(format!(
                    "interview window {index} of {} ends beyond the recording",
                    interview.subject_id
                )));
            }
            Ok(Segment {
                subject_id: interview.subject_id.clone(),
                kind: Task::Interview,
                index,
                waveform: Waveform::new(waveform.samples[start..end].to_vec(), rate),
                offset_s: start as f64 / rate as f64,
            })
        })
        .collect()
}

/// Cuts every requested task out of each subject's session recording, which
/// `load` is asked for once per subject. Subjects without a span for a task
/// are skipped with a warning. Output is in subject order, then task order.
pub fn segment_cohort<F>(cohort: &Cohort, tasks: &[Task], load: F) -> Result<Vec<Segment>>
where
    F: Fn(&Recording) -> Result<Waveform> + Sync,
{
    let per_subject: Vec<Vec<Segment>> = cohort
        .subjects
        .par_iter()
        .map(|subject| {
            let id = &subject.subject_id;
            let mut out = Vec::new();
            let labels: Vec<(Task, &SegmentLabel)> = tasks
                .iter()
                .filter_map(|&t| {
                    let found = cohort.labels_of(id, t).next();
                    if found.is_none() {
                        log::warn!("{id} has no {t} span");
                    }
                    found.map(|l| (t, l))
                })
                .collect();
            if labels.is_empty() {
                return Ok(out);
            }
            let recording = cohort
                .session_recording(id)
                .ok_or_else(|| Error::invalid(format!("subject {id} has no recording")))?;
            let waveform = load(recording)?;
            for (task, label) in labels {
                if task == Task::Interview {
                    out.extend(sample_interview_segments(&waveform, label, INTERVIEW_WINDOW_S, &INTERVIEW_ANCHORS)?);
                } else {
                    out.push(extract_subtest_segment(&waveform, label)?);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_subject.into_iter().flatten().collect())
}

/// Index entry written next to dumped segment WAVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub subject_id: String,
    pub kind: Task,
    pub index: usize,
    pub offset_s: f64,
    pub duration_s: f64,
    pub path: PathBuf,
}

/// Writes `{subject}_{kind}_{index}.wav` into `dir` for auditing.
pub fn dump_segment(dir: &Path, segment: &Segment) -> Result<SegmentRecord> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{}.wav", segment.id()));
    write_mono_wav(&path, &segment.waveform)?;
    Ok(SegmentRecord {
        subject_id: segment.subject_id.clone(),
        kind: segment.kind,
        index: segment.index,
        offset_s: segment.offset_s,
        duration_s: segment.duration_s(),
        path,
    })
}
