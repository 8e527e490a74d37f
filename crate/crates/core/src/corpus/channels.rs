//! Speaker attribution from inter-channel level differences.
//!
//! The recorder sat between the two speakers with the psychologist on the
//! left channel and the patient on the right.

use serde::{Deserialize, Serialize};

use super::audio::PcmAudio;
use crate::error::{Error, Result};

/// RMS floor so that silent frames compare as equal rather than dividing by zero.
const RMS_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Patient,
    Psychologist,
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerMask {
    pub frame_ms: u32,
    pub labels: Vec<Speaker>,
}

impl SpeakerMask {
    /// Number of frames for `num_samples` at `sample_rate`: floor(duration_ms / frame_ms).
    pub fn frame_count(num_samples: usize, sample_rate: u32, frame_ms: u32) -> usize {
        (num_samples as u128 * 1000 / (sample_rate as u128 * frame_ms as u128)) as usize
    }

    pub fn count(&self, speaker: Speaker) -> usize {
        self.labels.iter().filter(|&&s| s == speaker).count()
    }
}

/// Labels each frame by comparing right (patient) and left (psychologist) RMS in dB.
pub fn attribute_channels(audio: &PcmAudio, frame_ms: u32, margin_db: f64) -> Result<SpeakerMask> {
    if audio.channels.len() != 2 {
        return Err(Error::invalid(format!(
            "channel attribution needs stereo input, got {} channel(s)",
            audio.channels.len()
        )));
    }
    if frame_ms == 0 {
        return Err(Error::invalid("frame_ms must be positive"));
    }
    let (left, right) = (&audio.channels[0], &audio.channels[1]);
    let n = left.len().min(right.len());
    let count = SpeakerMask::frame_count(n, audio.sample_rate, frame_ms);
    let labels = (0..count)
        .map(|i| {
            let start = frame_bound(i, audio.sample_rate, frame_ms);
            let end = frame_bound(i + 1, audio.sample_rate, frame_ms).min(n);
            let diff_db = 20.0 * (rms(&right[start..end]) / rms(&left[start..end])).log10();
            if diff_db >= margin_db {
                Speaker::Patient
            } else if -diff_db >= margin_db {
                Speaker::Psychologist
            } else {
                Speaker::Ambiguous
            }
        })
        .collect();
    Ok(SpeakerMask { frame_ms, labels })
}

fn frame_bound(index: usize, sample_rate: u32, frame_ms: u32) -> usize {
    (index as u128 * frame_ms as u128 * sample_rate as u128 / 1000) as usize
}

fn rms(x: &[f32]) -> f64 {
    if x.is_empty() {
        return RMS_FLOOR;
    }
    let power = x.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / x.len() as f64;
    power.sqrt().max(RMS_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn stereo(left: Vec<f32>, right: Vec<f32>) -> PcmAudio {
        PcmAudio {
            channels: vec![left, right],
            sample_rate: 16_000,
        }
    }

    fn noise_like(n: usize, amp: f64, phase: f64) -> Vec<f32> {
        (0..n)
            .map(|i| (amp * (2.0 * PI * 310.0 * i as f64 / 16_000.0 + phase).sin()) as f32)
            .collect()
    }

    #[test]
    fn silence_is_ambiguous() {
        let audio = stereo(vec![0.0; 16_000], vec![0.0; 16_000]);
        let mask = attribute_channels(&audio, 10, 6.0).unwrap();
        assert_eq!(mask.labels.len(), 100);
        assert_eq!(mask.count(Speaker::Ambiguous), 100);
    }

    #[test]
    fn equal_levels_below_margin_are_ambiguous() {
        let x = noise_like(8_000, 0.3, 0.0);
        let y = noise_like(8_000, 0.3, 1.0);
        let mask = attribute_channels(&stereo(x, y), 20, 6.0).unwrap();
        assert!(mask.labels.iter().all(|&s| s == Speaker::Ambiguous));
    }

    #[test]
    fn twenty_db_level_steps_are_attributed() {
        let frame = 160; // 10 ms at 16 kHz
        let quiet = 0.01;
        let loud = 0.1; // +20 dB
        let mut left = Vec::new();
        let mut right = Vec::new();
        for i in 0..100 {
            let (l, r) = if i < 50 { (quiet, loud) } else { (loud, quiet) };
            left.extend(noise_like(frame, l, 0.0));
            right.extend(noise_like(frame, r, 0.0));
        }
        let audio = stereo(left, right);
        let mask = attribute_channels(&audio, 10, 6.0).unwrap();

        // per-frame RMS oracle on the constructed signal
        let expected: Vec<Speaker> = (0..100)
            .map(|i| {
                let span = i * frame..(i + 1) * frame;
                let e = |c: &[f32]| c[span.clone()].iter().map(|v| (*v as f64).powi(2)).sum::<f64>();
                let db = 10.0 * (e(&audio.channels[1]) / e(&audio.channels[0])).log10();
                if db >= 6.0 {
                    Speaker::Patient
                } else if db <= -6.0 {
                    Speaker::Psychologist
                } else {
                    Speaker::Ambiguous
                }
            })
            .collect();
        assert_eq!(mask.labels, expected);
        assert_eq!(&mask.labels[..50], &[Speaker::Patient; 50]);
        assert_eq!(&mask.labels[50..], &[Speaker::Psychologist; 50]);
    }

    #[test]
    fn mono_input_is_rejected() {
        let audio = PcmAudio {
            channels: vec![vec![0.0; 100]],
            sample_rate: 16_000,
        };
        assert!(attribute_channels(&audio, 10, 6.0).is_err());
    }

    #[test]
    fn frame_count_follows_floor_formula_at_48k() {
        let audio = PcmAudio {
            channels: vec![vec![0.0; 48_000 + 100], vec![0.0; 48_000 + 100]],
            sample_rate: 48_000,
        };
        let mask = attribute_channels(&audio, 30, 3.0).unwrap();
        assert_eq!(mask.labels.len(), 33); // floor(1002.08 / 30)
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mask_length_matches_formula(n in 0usize..40_000, frame_ms in 1u32..200, rate in prop::sample::select(vec![16_000u32, 48_000])) {
                let audio = PcmAudio { channels: vec![vec![0.0; n], vec![0.0; n]], sample_rate: rate };
                let mask = attribute_channels(&audio, frame_ms, 6.0).unwrap();
                let duration_ms = n as f64 * 1000.0 / rate as f64;
                prop_assert_eq!(mask.labels.len(), (duration_ms / frame_ms as f64).floor() as usize);
            }
        }
    }
}
