//! JSON cohort manifest.
//!
//! ```json
//! {
//!   "subjects":   [{"subject_id": "S001", "age": 74, "sex": "female",
//!                   "iq_group": "average", "education_years": 12}],
//!   "recordings": [{"subject_id": "S001", "audio_path": "audio/S001.wav",
//!                   "skt3_time_s": 23.5, "skt7_time_s": "failed", "cerad1_count": 17}],
//!   "segments":   [{"subject_id": "S001", "segment_kind": "skt3", "start_s": 12.0, "end_s": 47.5}]
//! }
//! ```
//!
//! Audio paths are resolved relative to the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::audio::probe_wav;
use super::{
    ChannelLayout, Cohort, IqGroup, RawScores, RawTime, Recording, SegmentLabel, Sex, SubjectMeta,
};
use crate::error::{Error, Result};
use crate::task::Task;

/// Serializable manifest document, used when writing manifests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestDoc {
    pub subjects: Vec<SubjectRow>,
    pub recordings: Vec<RecordingRow>,
    #[serde(default)]
    pub segments: Vec<SegmentRow>,
}

pub type SubjectRow = SubjectMeta;
pub type SegmentRow = SegmentLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingRow {
    pub subject_id: String,
    pub audio_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skt3_time_s: Option<RawTime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skt7_time_s: Option<RawTime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cerad1_count: Option<u32>,
}

impl ManifestDoc {
    /// Manifest rows for a cohort; audio paths are written as stored.
    pub fn from_cohort(cohort: &Cohort) -> Self {
        let recordings = cohort
            .recordings
            .iter()
            .map(|r| {
                let scores = cohort.scores(&r.subject_id);
                let first = cohort.session_recording(&r.subject_id).map(|f| f.audio_path == r.audio_path);
                // scores belong to the session recording only
                let scores = if first == Some(true) { scores } else { RawScores::default() };
                RecordingRow {
                    subject_id: r.subject_id.clone(),
                    audio_path: r.audio_path.to_string_lossy().replace('\\', "/"),
                    skt3_time_s: scores.skt3_time_s,
                    skt7_time_s: scores.skt7_time_s,
                    cerad1_count: scores.cerad1_count,
                }
            })
            .collect();
        Self {
            subjects: cohort.subjects.clone(),
            recordings,
            segments: cohort.segment_labels.clone(),
        }
    }
}

/// Loads and cross-references a manifest, verifying that every audio file exists.
pub fn load_manifest(path: &Path) -> Result<Cohort> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&text, base)
}

pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Cohort> {
    if text.trim().is_empty() {
        return Err(Error::ManifestEmpty("no subjects".into()));
    }
    let doc: Value = serde_json::from_str(text)?;
    let Value::Object(doc) = doc else {
        return Err(Error::ManifestEmpty("top level must be a JSON object".into()));
    };

    let subject_rows = section(&doc, "subjects")?;
    if subject_rows.is_empty() {
        return Err(Error::ManifestEmpty("no subjects".into()));
    }
    let mut subjects = Vec::with_capacity(subject_rows.len());
    let mut seen = BTreeSet::new();
    for (row, value) in subject_rows.iter().enumerate() {
        let subject = parse_subject(row, value)?;
        if !seen.insert(subject.subject_id.clone()) {
            return Err(Error::Manifest {
                section: "subjects",
                row,
                field: "subject_id",
                message: format!("duplicate subject_id {}", subject.subject_id),
            });
        }
        subjects.push(subject);
    }

    let mut recordings = Vec::new();
    let mut raw_scores: BTreeMap<String, RawScores> = BTreeMap::new();
    for (row, value) in section(&doc, "recordings")?.iter().enumerate() {
        let fields = object(value, "recordings", row)?;
        let subject_id = string_field(fields, "recordings", row, "subject_id")?;
        if !seen.contains(&subject_id) {
            return Err(Error::Manifest {
                section: "recordings",
                row,
                field: "subject_id",
                message: format!("unknown subject {subject_id}"),
            });
        }
        let rel = string_field(fields, "recordings", row, "audio_path")?;
        let audio_path = resolve(base_dir, &rel);
        let (sample_rate_hz, channels, duration_s) = probe_wav(&audio_path).map_err(|e| Error::Manifest {
            section: "recordings",
            row,
            field: "audio_path",
            message: format!("dangling or unreadable audio reference {rel}: {e}"),
        })?;
        if sample_rate_hz != 16_000 && sample_rate_hz != 48_000 {
            return Err(Error::Manifest {
                section: "recordings",
                row,
                field: "audio_path",
                message: format!("sample rate {sample_rate_hz} Hz not in {{16000, 48000}}"),
            });
        }
        let channels = match channels {
            1 => ChannelLayout::Mono,
            2 => ChannelLayout::Stereo,
            n => {
                return Err(Error::Manifest {
                    section: "recordings",
                    row,
                    field: "audio_path",
                    message: format!("{n} channels (expected mono or stereo)"),
                })
            }
        };
        if duration_s <= 0.0 {
            return Err(Error::Manifest {
                section: "recordings",
                row,
                field: "audio_path",
                message: "empty audio file".into(),
            });
        }

        let scores = RawScores {
            skt3_time_s: raw_time_field(fields, row, "skt3_time_s")?,
            skt7_time_s: raw_time_field(fields, row, "skt7_time_s")?,
            cerad1_count: optional_u32(fields, "recordings", row, "cerad1_count")?,
        };
        let entry = raw_scores.entry(subject_id.clone()).or_default();
        merge_scores(entry, scores, row)?;

        recordings.push(Recording {
            subject_id,
            audio_path,
            sample_rate_hz,
            channels,
            duration_s,
        });
    }
    raw_scores.retain(|_, s| s.skt3_time_s.is_some() || s.skt7_time_s.is_some() || s.cerad1_count.is_some());

    let with_audio: BTreeSet<&str> = recordings.iter().map(|r| r.subject_id.as_str()).collect();
    for (row, s) in subjects.iter().enumerate() {
        if !with_audio.contains(s.subject_id.as_str()) {
            return Err(Error::Manifest {
                section: "subjects",
                row,
                field: "subject_id",
                message: format!("subject {} has no recording", s.subject_id),
            });
        }
    }

    let mut segments = Vec::new();
    if let Some(rows) = doc.get("segments") {
        let rows = rows.as_array().ok_or(Error::Manifest {
            section: "segments",
            row: 0,
            field: "segments",
            message: "must be an array".into(),
        })?;
        for (row, value) in rows.iter().enumerate() {
            let fields = object(value, "segments", row)?;
            let subject_id = string_field(fields, "segments", row, "subject_id")?;
            if !seen.contains(&subject_id) {
                return Err(Error::Manifest {
                    section: "segments",
                    row,
                    field: "subject_id",
                    message: format!("unknown subject {subject_id}"),
                });
            }
            let kind: Task = string_field(fields, "segments", row, "segment_kind")?
                .parse()
                .map_err(|e: Error| Error::Manifest {
                    section: "segments",
                    row,
                    field: "segment_kind",
                    message: e.to_string(),
                })?;
            let start_s = f64_field(fields, "segments", row, "start_s")?;
            let end_s = f64_field(fields, "segments", row, "end_s")?;
            if !(start_s >= 0.0 && start_s < end_s) {
                return Err(Error::Manifest {
                    section: "segments",
                    row,
                    field: "end_s",
                    message: format!("invalid span [{start_s}, {end_s}]"),
                });
            }
            segments.push(SegmentLabel {
                subject_id,
                segment_kind: kind,
                start_s,
                end_s,
            });
        }
    }

    Cohort::from_parts(subjects, recordings, segments, raw_scores)
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn merge_scores(into: &mut RawScores, new: RawScores, row: usize) -> Result<()> {
    fn merge<T: PartialEq + Copy>(slot: &mut Option<T>, value: Option<T>, row: usize, field: &'static str) -> Result<()> {
        match (*slot, value) {
            (Some(a), Some(b)) if a != b => Err(Error::Manifest {
                section: "recordings",
                row,
                field,
                message: "conflicts with a score given on another recording of the same subject".into(),
            }),
            (None, Some(b)) => {
                *slot = Some(b);
                Ok(())
            }
            _ => Ok(()),
        }
    }
    merge(&mut into.skt3_time_s, new.skt3_time_s, row, "skt3_time_s")?;
    merge(&mut into.skt7_time_s, new.skt7_time_s, row, "skt7_time_s")?;
    merge(&mut into.cerad1_count, new.cerad1_count, row, "cerad1_count")
}

fn section<'a>(doc: &'a Map<String, Value>, name: &'static str) -> Result<&'a Vec<Value>> {
    match doc.get(name) {
        Some(Value::Array(rows)) => Ok(rows),
        Some(_) => Err(Error::Manifest {
            section: name,
            row: 0,
            field: name,
            message: "must be an array".into(),
        }),
        None if name == "subjects" => Err(Error::ManifestEmpty("no subjects".into())),
        None => Err(Error::Manifest {
            section: name,
            row: 0,
            field: name,
            message: "missing section".into(),
        }),
    }
}

fn object<'a>(value: &'a Value, section: &'static str, row: usize) -> Result<&'a Map<String, Value>> {
    value.as_object().ok_or(Error::Manifest {
        section,
        row,
        field: "*",
        message: "row must be an object".into(),
    })
}

fn parse_subject(row: usize, value: &Value) -> Result<SubjectMeta> {
    const S: &str = "subjects";
    let fields = object(value, S, row)?;
    let subject_id = string_field(fields, S, row, "subject_id")?;
    if subject_id.is_empty() {
        return Err(Error::Manifest {
            section: S,
            row,
            field: "subject_id",
            message: "empty".into(),
        });
    }
    let age = required(optional_u32(fields, S, row, "age")?, S, row, "age")?;
    let sex = match string_field(fields, S, row, "sex")?.as_str() {
        "male" | "m" => Sex::Male,
        "female" | "f" => Sex::Female,
        other => {
            return Err(Error::Manifest {
                section: S,
                row,
                field: "sex",
                message: format!("{other:?} is not male/female"),
            })
        }
    };
    let iq_group = match string_field(fields, S, row, "iq_group")?.as_str() {
        "below_average" => IqGroup::BelowAverage,
        "average" => IqGroup::Average,
        "above_average" => IqGroup::AboveAverage,
        other => {
            return Err(Error::Manifest {
                section: S,
                row,
                field: "iq_group",
                message: format!("{other:?} is not below_average/average/above_average"),
            })
        }
    };
    let education_years = required(optional_u32(fields, S, row, "education_years")?, S, row, "education_years")?;
    Ok(SubjectMeta {
        subject_id,
        age,
        sex,
        iq_group,
        education_years,
        gds_k: optional_f64(fields, S, row, "gds_k")?,
        b_adl: optional_f64(fields, S, row, "b_adl")?,
        npi: optional_f64(fields, S, row, "npi")?,
    })
}

fn required<T>(v: Option<T>, section: &'static str, row: usize, field: &'static str) -> Result<T> {
    v.ok_or(Error::Manifest {
        section,
        row,
        field,
        message: "missing".into(),
    })
}

fn string_field(fields: &Map<String, Value>, section: &'static str, row: usize, field: &'static str) -> Result<String> {
    match fields.get(field) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(Error::Manifest {
            section,
            row,
            field,
            message: format!("expected a string, found {other}"),
        }),
        None => Err(Error::Manifest {
            section,
            row,
            field,
            message: "missing".into(),
        }),
    }
}

fn optional_f64(fields: &Map<String, Value>, section: &'static str, row: usize, field: &'static str) -> Result<Option<f64>> {
    match fields.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => n.as_f64().filter(|v| v.is_finite()).map(Some).ok_or(Error::Manifest {
            section,
            row,
            field,
            message: "not a finite number".into(),
        }),
        Some(other) => Err(Error::Manifest {
            section,
            row,
            field,
            message: format!("expected a number, found {other}"),
        }),
    }
}

fn f64_field(fields: &Map<String, Value>, section: &'static str, row: usize, field: &'static str) -> Result<f64> {
    required(optional_f64(fields, section, row, field)?, section, row, field)
}

fn optional_u32(fields: &Map<String, Value>, section: &'static str, row: usize, field: &'static str) -> Result<Option<u32>> {
    match fields.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => n
            .as_u64()
            .and_then(|v| u32::try_from(v).ok())
            .map(Some)
            .ok_or(Error::Manifest {
                section,
                row,
                field,
                message: format!("{n} is not a non-negative integer"),
            }),
        Some(other) => Err(Error::Manifest {
            section,
            row,
            field,
            message: format!("expected an integer, found {other}"),
        }),
    }
}

fn raw_time_field(fields: &Map<String, Value>, row: usize, field: &'static str) -> Result<Option<RawTime>> {
    match fields.get(field) {
        Some(Value::String(s)) if s == "failed" => Ok(Some(RawTime::FAILED)),
        Some(Value::String(s)) => Err(Error::Manifest {
            section: "recordings",
            row,
            field,
            message: format!("{s:?} is neither a time in seconds nor \"failed\""),
        }),
        _ => match optional_f64(fields, "recordings", row, field)? {
            Some(t) if t <= 0.0 => Err(Error::Manifest {
                section: "recordings",
                row,
                field,
                message: format!("completion time {t} must be positive"),
            }),
            other => Ok(other.map(RawTime::Seconds)),
        },
    }
}
