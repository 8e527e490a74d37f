//! Deterministic synthetic cohorts: tone-burst session audio, segment spans,
//! raw score sheets and the classes they were generated from.
//!
//! Every subject draws from its own ChaCha stream keyed by `(seed, index)`,
//! so rendering order and thread count never change the output.

mod audio;
mod oracle;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use audio::{render_session, SpeechStyle};
pub use oracle::{verify_oracle, OracleReport, TaskAgreement};

use crate::corpus::{
    write_mono_wav, ChannelLayout, Cohort, IqGroup, ManifestDoc, RawScores, RawTime, Recording, SegmentLabel, Sex,
    SubjectMeta, Waveform, TARGET_RATE_HZ,
};
use crate::error::{Error, Result};
use crate::scoring::{LabelSet, NormTable, ScoringConfig};
use crate::task::{Impairment, Task};

/// Verbal-fluency z threshold the generator places scores around.
pub const REFERENCE_Z_THRESHOLD: f64 = -1.2;

const LEAD_S: f64 = 1.0;
const GAP_S: f64 = 1.5;
/// Width of the unshifted score distribution, in norm intervals (z units for fluency).
const SCORE_SPREAD: f64 = 1.8;
const SCORE_U_RANGE: (f64, f64) = (0.05, 0.95);
/// Times at or beyond this many intervals are recorded as a failed attempt.
const FAILED_POSITION: f64 = 3.5;

/// Exact per-task impaired counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub skt3_impaired: usize,
    pub skt7_impaired: usize,
    /// Impaired on both SKT sub-tests.
    pub both_impaired: usize,
    pub cerad_impaired: usize,
}

impl ClassCounts {
    fn validate(&self, n: usize) -> Result<()> {
        let c = self;
        let discordant = (c.skt3_impaired + c.skt7_impaired).checked_sub(2 * c.both_impaired);
        let ok = c.skt3_impaired <= n
            && c.skt7_impaired <= n
            && c.both_impaired <= c.skt3_impaired.min(c.skt7_impaired)
            && c.skt3_impaired + c.skt7_impaired - c.both_impaired <= n
            && discordant.is_some_and(|d| (c.both_impaired..=c.both_impaired + d).contains(&c.cerad_impaired));
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("class counts {c:?} are infeasible for {n} subjects")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassBalance {
    /// Impaired fraction per task and the share of subjects whose two SKT classes agree.
    Fraction { impaired: f64, concordance: f64 },
    Counts(ClassCounts),
}

impl ClassBalance {
    pub fn resolve(&self, n: usize) -> Result<ClassCounts> {
        let counts = match *self {
            ClassBalance::Counts(c) => c,
            ClassBalance::Fraction { impaired, concordance } => {
                if !(0.0..=1.0).contains(&impaired) || !(0.0..=1.0).contains(&concordance) {
                    return Err(Error::Config("class balance fractions must lie in [0, 1]".into()));
                }
                let k = (impaired * n as f64).round() as usize;
                let concordant = (concordance * n as f64).round() as i64;
                // concordant = both + (n - 2k + both)
                let lo = (2 * k).saturating_sub(n) as i64;
                let both = ((concordant - n as i64 + 2 * k as i64) / 2).clamp(lo, k as i64) as usize;
                ClassCounts {
                    skt3_impaired: k,
                    skt7_impaired: k,
                    both_impaired: both,
                    cerad_impaired: k.clamp(both, 2 * k - both),
                }
            }
        };
        counts.validate(n)?;
        Ok(counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub age_min: u32,
    pub age_max: u32,
    pub age_mean: f64,
    pub age_sd: f64,
    pub female_fraction: f64,
    pub education_min: u32,
    pub education_max: u32,
    /// Sampling weights for below-average, average and above-average IQ.
    pub iq_weights: [f64; 3],
}

impl Default for Demographics {
    fn default() -> Self {
        Self {
            age_min: 55,
            age_max: 88,
            age_mean: 73.9,
            age_sd: 8.0,
            female_fraction: 61.0 / 101.0,
            education_min: 8,
            education_max: 18,
            iq_weights: [0.2, 0.6, 0.2],
        }
    }
}

/// Class effects, all zero for a null cohort.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Effects {
    /// Impaired burst rate is the subject's base rate divided by `1 + speech_rate`.
    pub speech_rate: f64,
    /// Impaired pauses are `1 + pause_length` times longer.
    pub pause_length: f64,
    /// Separation of the impaired and non-impaired score distributions, in
    /// norm intervals (SKT) and z units (verbal fluency). Scores cross the
    /// cut-off for every subject once it reaches 1.8.
    pub completion_time_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n_subjects: usize,
    pub balance: ClassBalance,
    pub demographics: Demographics,
    pub effects: Effects,
    pub seed: u64,
    /// Interview length; 75 s is the minimum for four 30 s windows anchored up to 60 %.
    pub interview_s: f64,
    /// Length of each sub-test span.
    pub subtest_s: f64,
    /// Subjects written without a score sheet.
    pub missing_scores: Vec<String>,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self::reference(0)
    }
}

impl CohortSpec {
    /// 101 subjects with fixed clinical class splits and about 72 % SKT concordance.
    pub fn reference(seed: u64) -> Self {
        Self {
            n_subjects: 101,
            balance: ClassBalance::Counts(ClassCounts {
                skt3_impaired: 47,
                skt7_impaired: 51,
                both_impaired: 35,
                cerad_impaired: 51,
            }),
            demographics: Demographics::default(),
            effects: Effects {
                speech_rate: 0.3,
                pause_length: 0.6,
                completion_time_shift: 2.0,
            },
            seed,
            interview_s: 80.0,
            subtest_s: 20.0,
            missing_scores: Vec::new(),
        }
    }

    /// Balanced cohort with large class effects on audio and scores.
    pub fn strong(n_subjects: usize, seed: u64) -> Self {
        Self {
            n_subjects,
            balance: ClassBalance::Fraction {
                impaired: 0.5,
                concordance: 0.8,
            },
            effects: Effects {
                speech_rate: 1.0,
                pause_length: 2.0,
                completion_time_shift: 4.0,
            },
            ..Self::reference(seed)
        }
    }

    /// Balanced cohort with no class effects at all.
    pub fn null(n_subjects: usize, seed: u64) -> Self {
        Self {
            effects: Effects::default(),
            ..Self::strong(n_subjects, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 2 {
            return Err(Error::Config("a cohort needs at least 2 subjects".into()));
        }
        let e = self.effects;
        for (name, v) in [
            ("speech_rate", e.speech_rate),
            ("pause_length", e.pause_length),
            ("completion_time_shift", e.completion_time_shift),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("effect {name} = {v} must be finite and >= 0")));
            }
        }
        let d = &self.demographics;
        if d.age_min > d.age_max || d.education_min > d.education_max {
            return Err(Error::Config("demographic ranges are empty".into()));
        }
        if d.age_min < 55 {
            return Err(Error::Config("ages below 55 are outside the norm tables".into()));
        }
        if !(0.0..=1.0).contains(&d.female_fraction) || !(d.age_sd >= 0.0) {
            return Err(Error::Config("invalid sex fraction or age spread".into()));
        }
        if d.iq_weights.iter().any(|w| !(*w >= 0.0)) || d.iq_weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("IQ weights must be non-negative with a positive sum".into()));
        }
        if !(self.interview_s >= 75.0) {
            return Err(Error::Config(format!("interview_s {} is below 75 s", self.interview_s)));
        }
        if !(self.subtest_s >= 2.0) {
            return Err(Error::Config(format!("subtest_s {} is below 2 s", self.subtest_s)));
        }
        self.balance.resolve(self.n_subjects)?;
        Ok(())
    }

    pub fn subject_id(&self, index: usize) -> String {
        let width = self.n_subjects.to_string().len().max(3);
        format!("S{:0width$}", index + 1)
    }
}

/// Classes a subject was generated with, and the speaking style behind its audio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectTruth {
    pub subject_id: String,
    pub index: usize,
    pub skt3: Impairment,
    pub skt7: Impairment,
    pub cerad1: Impairment,
    pub style: SpeechStyle,
}

impl SubjectTruth {
    /// Intended class for a task; interviews follow verbal fluency.
    pub fn class(&self, task: Task) -> Impairment {
        match task {
            Task::Skt3 => self.skt3,
            Task::Skt7 => self.skt7,
            Task::Cerad1 | Task::Interview => self.cerad1,
        }
    }
}

/// A generated cohort held in memory; audio is rendered on demand.
#[derive(Debug, Clone)]
pub struct SynthCohort {
    pub spec: CohortSpec,
    pub cohort: Cohort,
    pub truth: Vec<SubjectTruth>,
}

/// Contents of `truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDoc {
    pub spec: CohortSpec,
    pub subjects: Vec<SubjectTruth>,
}

fn subject_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const COHORT_STREAM: u64 = 0;
const SEX_STREAM: u64 = u64::MAX;
const AUDIO_STREAM_BASE: u64 = 1 << 32;

/// Builds the cohort tables and intended classes; no audio is rendered.
pub fn generate_cohort(spec: &CohortSpec, scoring: &ScoringConfig) -> Result<SynthCohort> {
    spec.validate()?;
    scoring.validate()?;
    let n = spec.n_subjects;
    let counts = spec.balance.resolve(n)?;
    let classes = assign_classes(n, &counts, &mut subject_rng(spec.seed, COHORT_STREAM));
    let females = {
        let mut rng = subject_rng(spec.seed, SEX_STREAM);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let k = (spec.demographics.female_fraction * n as f64).round() as usize;
        let mut female = vec![false; n];
        for &i in &order[..k] {
            female[i] = true;
        }
        female
    };

    let session_s = session_length(spec);
    let built: Vec<(SubjectMeta, Recording, Vec<SegmentLabel>, Option<RawScores>, SubjectTruth)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let id = spec.subject_id(i);
            let mut rng = subject_rng(spec.seed, i as u64 + 1);
            let sex = if females[i] { Sex::Female } else { Sex::Male };
            let meta = draw_meta(&id, sex, &spec.demographics, &mut rng)?;
            let (skt3, skt7, cerad1) = classes[i];
            let shift = spec.effects.completion_time_shift;
            let u3 = rng.random_range(SCORE_U_RANGE.0..SCORE_U_RANGE.1);
            let u7 = rng.random_range(SCORE_U_RANGE.0..SCORE_U_RANGE.1);
            let uz = rng.random_range(SCORE_U_RANGE.0..SCORE_U_RANGE.1);
            let scores = RawScores {
                skt3_time_s: Some(skt_time(&meta, &scoring.skt3_norms, position(u3, shift, skt3))?),
                skt7_time_s: Some(skt_time(&meta, &scoring.skt7_norms, position(u7, shift, skt7))?),
                cerad1_count: Some(cerad_count(&meta, scoring, uz, shift, cerad1)),
            };
            let style = SpeechStyle::draw(sex, &mut rng);
            let truth = SubjectTruth {
                subject_id: id.clone(),
                index: i,
                skt3,
                skt7,
                cerad1,
                style,
            };
            let recording = Recording {
                subject_id: id.clone(),
                audio_path: PathBuf::from(format!("audio/{id}.wav")),
                sample_rate_hz: TARGET_RATE_HZ,
                channels: ChannelLayout::Mono,
                duration_s: session_samples(session_s) as f64 / TARGET_RATE_HZ as f64,
            };
            let spans = session_spans(spec)
                .into_iter()
                .map(|(kind, start_s, end_s)| SegmentLabel {
                    subject_id: id.clone(),
                    segment_kind: kind,
                    start_s,
                    end_s,
                })
                .collect();
            let scores = (!spec.missing_scores.contains(&id)).then_some(scores);
            Ok((meta, recording, spans, scores, truth))
        })
        .collect::<Result<_>>()?;

    let mut subjects = Vec::with_capacity(n);
    let mut recordings = Vec::with_capacity(n);
    let mut labels = Vec::new();
    let mut raw_scores = BTreeMap::new();
    let mut truth = Vec::with_capacity(n);
    for (meta, rec, spans, scores, t) in built {
        if let Some(s) = scores {
            raw_scores.insert(meta.subject_id.clone(), s);
        }
        subjects.push(meta);
        recordings.push(rec);
        labels.extend(spans);
        truth.push(t);
    }
    let cohort = Cohort::from_parts(subjects, recordings, labels, raw_scores)?;
    Ok(SynthCohort {
        spec: spec.clone(),
        cohort,
        truth,
    })
}

impl SynthCohort {
    pub fn truth_of(&self, subject_id: &str) -> Option<&SubjectTruth> {
        self.truth.iter().find(|t| t.subject_id == subject_id)
    }

    /// Renders a subject's session recording.
    pub fn session_waveform(&self, subject_id: &str) -> Result<Waveform> {
        let truth = self
            .truth_of(subject_id)
            .ok_or_else(|| Error::invalid(format!("unknown synthetic subject {subject_id}")))?;
        let spans: Vec<(Task, f64, f64)> = self
            .cohort
            .segment_labels
            .iter()
            .filter(|l| l.subject_id == subject_id)
            .map(|l| (l.segment_kind, l.start_s, l.end_s))
            .collect();
        let len = session_samples(session_length(&self.spec));
        let mut rng = subject_rng(self.spec.seed, AUDIO_STREAM_BASE + truth.index as u64);
        Ok(render_session(len, TARGET_RATE_HZ, truth, &spans, &self.spec.effects, &mut rng))
    }

    /// Loader for [`crate::segmentation::segment_cohort`].
    pub fn loader(&self) -> impl Fn(&Recording) -> Result<Waveform> + Sync + '_ {
        move |rec: &Recording| self.session_waveform(&rec.subject_id)
    }

    pub fn manifest(&self) -> ManifestDoc {
        ManifestDoc::from_cohort(&self.cohort)
    }

    /// Writes `audio/*.wav` (16-bit mono), `manifest.json` and `truth.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let audio_dir = dir.join("audio");
        std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;
        self.truth.par_iter().try_for_each(|t| {
            let wave = self.session_waveform(&t.subject_id)?;
            write_mono_wav(&audio_dir.join(format!("{}.wav", t.subject_id)), &wave)
        })?;
        write_json(&dir.join("manifest.json"), &self.manifest())?;
        write_json(
            &dir.join("truth.json"),
            &TruthDoc {
                spec: self.spec.clone(),
                subjects: self.truth.clone(),
            },
        )
    }

    /// Scores the cohort and compares the labels with the generating classes.
    pub fn verify(&self, scoring: &ScoringConfig) -> Result<(LabelSet, OracleReport)> {
        let labels = crate::scoring::assign_labels(&self.cohort, scoring)?;
        let report = verify_oracle(&self.truth, &labels);
        Ok((labels, report))
    }
}

pub fn read_truth(path: &Path) -> Result<TruthDoc> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Per subject (skt3, skt7, cerad1) classes with the exact requested counts.
fn assign_classes(n: usize, c: &ClassCounts, rng: &mut ChaCha8Rng) -> Vec<(Impairment, Impairment, Impairment)> {
    use Impairment::{Impaired as I, NonImpaired as N};
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let only3 = c.skt3_impaired - c.both_impaired;
    let only7 = c.skt7_impaired - c.both_impaired;
    let mut extra_cerad = c.cerad_impaired - c.both_impaired;
    let mut classes = vec![(N, N, N); n];
    // discordant subjects are interleaved so extra fluency impairment hits both kinds
    let mut discordant: Vec<(usize, Impairment, Impairment)> = Vec::with_capacity(only3 + only7);
    for (rank, &i) in order.iter().enumerate() {
        if rank < c.both_impaired {
            classes[i] = (I, I, I);
        } else if rank < c.both_impaired + only3 {
            discordant.push((i, I, N));
        } else if rank < c.both_impaired + only3 + only7 {
            discordant.push((i, N, I));
        }
    }
    discordant.shuffle(rng);
    for (i, s3, s7) in discordant {
        let cerad = if extra_cerad > 0 {
            extra_cerad -= 1;
            I
        } else {
            N
        };
        classes[i] = (s3, s7, cerad);
    }
    classes
}

fn draw_meta(id: &str, sex: Sex, d: &Demographics, rng: &mut ChaCha8Rng) -> Result<SubjectMeta> {
    let normal = Normal::new(d.age_mean, d.age_sd).map_err(|e| Error::Config(e.to_string()))?;
    let age = normal.sample(rng).round().clamp(d.age_min as f64, d.age_max as f64) as u32;
    let education_years = rng.random_range(d.education_min..=d.education_max);
    let total: f64 = d.iq_weights.iter().sum();
    let mut pick = rng.random::<f64>() * total;
    let mut iq_group = IqGroup::Average;
    for (g, w) in IqGroup::ALL.into_iter().zip(d.iq_weights) {
        if pick < w {
            iq_group = g;
            break;
        }
        pick -= w;
    }
    Ok(SubjectMeta {
        subject_id: id.to_owned(),
        age,
        sex,
        iq_group,
        education_years,
        gds_k: None,
        b_adl: None,
        npi: None,
    })
}

/// Score position relative to the cut-off at 1: impaired subjects move up by
/// half the shift, non-impaired ones down.
fn position(u: f64, shift: f64, class: Impairment) -> f64 {
    1.0 + SCORE_SPREAD * (u - 0.5) + 0.5 * shift * class.sign()
}

/// Completion time at `x` norm intervals: [0, 1) spans 40-100 % of t1, each
/// further unit spans one table interval, and beyond t3 the last interval width repeats.
fn skt_time(meta: &SubjectMeta, table: &NormTable, x: f64) -> Result<RawTime> {
    if x >= FAILED_POSITION {
        return Ok(RawTime::FAILED);
    }
    let band = table.band(meta.age, meta.iq_group).ok_or_else(|| {
        Error::Config(format!("no norm band for age {} {:?}", meta.age, meta.iq_group))
    })?;
    let [t1, t2, t3] = band.boundaries;
    let x = x.max(0.0);
    let t = if x < 1.0 {
        t1 * (0.4 + 0.6 * x)
    } else if x < 2.0 {
        t1 + (x - 1.0) * (t2 - t1)
    } else if x < 3.0 {
        t2 + (x - 2.0) * (t3 - t2)
    } else {
        t3 + (x - 3.0) * (t3 - t2)
    };
    Ok(RawTime::Seconds((t * 10.0).round() / 10.0))
}

/// Animal count whose z lands at `REFERENCE_Z_THRESHOLD - (position - 1)`.
fn cerad_count(meta: &SubjectMeta, scoring: &ScoringConfig, u: f64, shift: f64, class: Impairment) -> u32 {
    let z = REFERENCE_Z_THRESHOLD - (position(u, shift, class) - 1.0);
    let c = &scoring.cerad;
    let raw = z * c.population_std + c.population_mean + c.demographic_effect(meta.age, meta.education_years, meta.sex);
    raw.round().max(0.0) as u32
}

fn session_spans(spec: &CohortSpec) -> Vec<(Task, f64, f64)> {
    let mut t = LEAD_S;
    let mut spans = Vec::with_capacity(4);
    for (kind, len) in [
        (Task::Skt3, spec.subtest_s),
        (Task::Skt7, spec.subtest_s),
        (Task::Cerad1, spec.subtest_s),
        (Task::Interview, spec.interview_s),
    ] {
        spans.push((kind, t, t + len));
        t += len + GAP_S;
    }
    spans
}

fn session_length(spec: &CohortSpec) -> f64 {
    session_spans(spec).last().map_or(0.0, |s| s.2) + LEAD_S
}

fn session_samples(seconds: f64) -> usize {
    (seconds * TARGET_RATE_HZ as f64).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_balance_resolves_to_feasible_counts() {
        let c = ClassBalance::Fraction {
            impaired: 0.5,
            concordance: 0.8,
        }
        .resolve(40)
        .unwrap();
        assert_eq!((c.skt3_impaired, c.skt7_impaired), (20, 20));
        // both + neither = 2 * both = 32
        assert_eq!(c.both_impaired, 16);
        assert_eq!(c.cerad_impaired, 20);
    }

    #[test]
    fn infeasible_counts_are_rejected() {
        let bad = ClassBalance::Counts(ClassCounts {
            skt3_impaired: 10,
            skt7_impaired: 10,
            both_impaired: 2,
            cerad_impaired: 30,
        });
        assert!(bad.resolve(20).is_err());
    }

    #[test]
    fn class_assignment_hits_requested_counts() {
        let counts = ClassBalance::Counts(ClassCounts {
            skt3_impaired: 47,
            skt7_impaired: 51,
            both_impaired: 35,
            cerad_impaired: 51,
        })
        .resolve(101)
        .unwrap();
        let classes = assign_classes(101, &counts, &mut subject_rng(3, 0));
        let count = |f: fn(&(Impairment, Impairment, Impairment)) -> bool| classes.iter().filter(|c| f(c)).count();
        assert_eq!(count(|c| c.0 == Impairment::Impaired), 47);
        assert_eq!(count(|c| c.1 == Impairment::Impaired), 51);
        assert_eq!(count(|c| c.2 == Impairment::Impaired), 51);
        assert_eq!(count(|c| c.0 == c.1), 73);
        // concordant subjects carry their SKT class into fluency
        assert!(classes.iter().filter(|c| c.0 == c.1).all(|c| c.2 == c.0));
    }

    #[test]
    fn positions_straddle_cutoff_without_shift() {
        let lo = position(SCORE_U_RANGE.0, 0.0, Impairment::Impaired);
        let hi = position(SCORE_U_RANGE.1, 0.0, Impairment::NonImpaired);
        assert!(lo < 1.0 && hi > 1.0);
        assert!(position(SCORE_U_RANGE.0, 1.8, Impairment::Impaired) >= 1.0);
        assert!(position(SCORE_U_RANGE.1, 1.8, Impairment::NonImpaired) < 1.0);
    }

    #[test]
    fn spec_validation() {
        assert!(CohortSpec::reference(0).validate().is_ok());
        let mut s = CohortSpec::reference(0);
        s.effects.pause_length = -0.1;
        assert!(s.validate().is_err());
        let mut s = CohortSpec::reference(0);
        s.n_subjects = 1;
        assert!(s.validate().is_err());
        let mut s = CohortSpec::reference(0);
        s.interview_s = 60.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn subject_ids_are_zero_padded() {
        let s = CohortSpec::strong(1200, 0);
        assert_eq!(s.subject_id(0), "S0001");
        assert_eq!(CohortSpec::reference(0).subject_id(100), "S101");
    }
}
