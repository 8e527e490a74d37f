//! Cohort metadata, session recordings and speaker-channel attribution.

mod audio;
mod channels;
mod manifest;
mod resample;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use audio::{
    downmix, f32_to_pcm, load_audio, load_audio_with, pcm_to_f32, probe_wav, read_wav, write_mono_wav,
    write_wav, ChannelMode, PcmAudio, Waveform, TARGET_RATE_HZ,
};
pub use channels::{attribute_channels, Speaker, SpeakerMask};
pub use manifest::{load_manifest, parse_manifest, ManifestDoc, RecordingRow, SegmentRow, SubjectRow};
pub use resample::{resample, Resampler};

use crate::error::{Error, Result};
use crate::task::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

/// IQ band: below average (< 90), average (90-110), above average (> 110).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IqGroup {
    BelowAverage,
    Average,
    AboveAverage,
}

impl IqGroup {
    pub const ALL: [IqGroup; 3] = [IqGroup::BelowAverage, IqGroup::Average, IqGroup::AboveAverage];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMeta {
    pub subject_id: String,
    pub age: u32,
    pub sex: Sex,
    pub iq_group: IqGroup,
    pub education_years: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gds_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_adl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub npi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelLayout {
    Mono,
    Stereo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub subject_id: String,
    pub audio_path: PathBuf,
    pub sample_rate_hz: u32,
    pub channels: ChannelLayout,
    pub duration_s: f64,
}

/// Completion time of a timed sub-test; `Failed` when the task could not be done at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawTime {
    Seconds(f64),
    Failed(FailedMarker),
}

/// Serialized as the string "failed".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailedMarker {
    Failed,
}

impl RawTime {
    pub const FAILED: RawTime = RawTime::Failed(FailedMarker::Failed);
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RawScores {
    pub skt3_time_s: Option<RawTime>,
    pub skt7_time_s: Option<RawTime>,
    pub cerad1_count: Option<u32>,
}

impl RawScores {
    pub fn is_complete(&self) -> bool {
        self.skt3_time_s.is_some() && self.skt7_time_s.is_some() && self.cerad1_count.is_some()
    }
}

/// Time-stamped span of a session recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLabel {
    pub subject_id: String,
    pub segment_kind: Task,
    pub start_s: f64,
    pub end_s: f64,
}

impl SegmentLabel {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Fully cross-referenced cohort, stored in canonical (sorted) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub subjects: Vec<SubjectMeta>,
    pub recordings: Vec<Recording>,
    pub segment_labels: Vec<SegmentLabel>,
    pub raw_scores: BTreeMap<String, RawScores>,
}

impl Cohort {
    /// Validates referential integrity and sorts every table canonically.
    pub fn from_parts(
        mut subjects: Vec<SubjectMeta>,
        mut recordings: Vec<Recording>,
        mut segment_labels: Vec<SegmentLabel>,
        raw_scores: BTreeMap<String, RawScores>,
    ) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::ManifestEmpty("no subjects".into()));
        }
        subjects.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
        for pair in subjects.windows(2) {
            if pair[0].subject_id == pair[1].subject_id {
                return Err(Error::invalid(format!("duplicate subject_id {}", pair[0].subject_id)));
            }
        }
        let known: BTreeSet<&str> = subjects.iter().map(|s| s.subject_id.as_str()).collect();
        for r in &recordings {
            if !known.contains(r.subject_id.as_str()) {
                return Err(Error::invalid(format!(
                    "recording {} references unknown subject {}",
                    r.audio_path.display(),
                    r.subject_id
                )));
            }
            if r.duration_s <= 0.0 {
                return Err(Error::invalid(format!("recording {} is empty", r.audio_path.display())));
            }
        }
        recordings.sort_by(|a, b| (&a.subject_id, &a.audio_path).cmp(&(&b.subject_id, &b.audio_path)));
        let with_audio: BTreeSet<&str> = recordings.iter().map(|r| r.subject_id.as_str()).collect();
        if let Some(missing) = known.difference(&with_audio).next() {
            return Err(Error::invalid(format!("subject {missing} has no recording")));
        }
        for id in raw_scores.keys() {
            if !known.contains(id.as_str()) {
                return Err(Error::invalid(format!("scores reference unknown subject {id}")));
            }
        }
        segment_labels.sort_by(|a, b| {
            (&a.subject_id, a.segment_kind)
                .cmp(&(&b.subject_id, b.segment_kind))
                .then(a.start_s.total_cmp(&b.start_s))
                .then(a.end_s.total_cmp(&b.end_s))
        });
        let cohort = Self {
            subjects,
            recordings,
            segment_labels,
            raw_scores,
        };
        for label in &cohort.segment_labels {
            let Some(rec) = cohort.session_recording(&label.subject_id) else {
                return Err(Error::invalid(format!(
                    "segment references unknown subject {}",
                    label.subject_id
                )));
            };
            if !(label.start_s >= 0.0 && label.start_s < label.end_s && label.end_s <= rec.duration_s + 1.0 / rec.sample_rate_hz as f64) {
                return Err(Error::invalid(format!(
                    "segment {} {} [{}, {}] outside recording of {:.3} s",
                    label.subject_id, label.segment_kind, label.start_s, label.end_s, rec.duration_s
                )));
            }
        }
        Ok(cohort)
    }

    pub fn subject(&self, subject_id: &str) -> Option<&SubjectMeta> {
        self.subjects
            .binary_search_by(|s| s.subject_id.as_str().cmp(subject_id))
            .ok()
            .map(|i| &self.subjects[i])
    }

    /// The recording segment labels refer to: the subject's first recording in canonical order.
    pub fn session_recording(&self, subject_id: &str) -> Option<&Recording> {
        self.recordings.iter().find(|r| r.subject_id == subject_id)
    }

    pub fn scores(&self, subject_id: &str) -> RawScores {
        self.raw_scores.get(subject_id).copied().unwrap_or_default()
    }

    pub fn labels_of(&self, subject_id: &str, kind: Task) -> impl Iterator<Item = &SegmentLabel> {
        let subject_id = subject_id.to_owned();
        self.segment_labels
            .iter()
            .filter(move |l| l.subject_id == subject_id && l.segment_kind == kind)
    }

    pub fn mean_age(&self) -> f64 {
        self.subjects.iter().map(|s| s.age as f64).sum::<f64>() / self.subjects.len() as f64
    }
}
