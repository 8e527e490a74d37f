//! Tone-burst "speech": phrases of harmonic bursts separated by pauses.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Effects, SubjectTruth};
use crate::corpus::{Sex, Waveform};
use crate::task::{Impairment, Task};

const NOISE_FLOOR: f32 = 1e-3;
const HARMONICS: usize = 3;
/// Voiced fraction of a burst period at the subject's own rate.
const DUTY: f64 = 0.6;

/// A subject's unimpaired speaking style.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeechStyle {
    pub f0_hz: f64,
    /// Bursts per second inside a phrase.
    pub burst_rate_hz: f64,
    /// Length of one burst; slower speech keeps it and lengthens the gaps.
    pub burst_s: f64,
    /// Mean pause between phrases, seconds.
    pub pause_s: f64,
    /// Peak amplitude of a burst.
    pub level: f64,
}

impl SpeechStyle {
    pub fn draw(sex: Sex, rng: &mut ChaCha8Rng) -> Self {
        let f0_hz = match sex {
            Sex::Male => rng.random_range(95.0..145.0),
            Sex::Female => rng.random_range(165.0..235.0),
        };
        let burst_rate_hz = rng.random_range(3.5..5.0);
        Self {
            f0_hz,
            burst_rate_hz,
            burst_s: DUTY / burst_rate_hz,
            pause_s: rng.random_range(0.25..0.45),
            level: rng.random_range(0.15..0.35),
        }
    }

    pub fn with_class(self, class: Impairment, effects: &Effects) -> Self {
        match class {
            Impairment::NonImpaired => self,
            Impairment::Impaired => Self {
                burst_rate_hz: self.burst_rate_hz / (1.0 + effects.speech_rate),
                pause_s: self.pause_s * (1.0 + effects.pause_length),
                ..self
            },
        }
    }
}

/// Renders a session of `len` samples: a noise floor everywhere and speech
/// inside each `(task, start_s, end_s)` span, styled by the task's class.
pub fn render_session(
    len: usize,
    sample_rate: u32,
    truth: &SubjectTruth,
    spans: &[(Task, f64, f64)],
    effects: &Effects,
    rng: &mut ChaCha8Rng,
) -> Waveform {
    let noise = Normal::new(0.0f32, NOISE_FLOOR).expect("valid noise sd");
    let mut samples: Vec<f32> = (0..len).map(|_| noise.sample(rng)).collect();
    let rate = sample_rate as f64;
    for &(task, start_s, end_s) in spans {
        let style = truth.style.with_class(truth.class(task), effects);
        let end = ((end_s * rate).round() as usize).min(len);
        let mut t = start_s + rng.random_range(0.0..0.2);
        while t < end_s {
            let bursts = rng.random_range(3..=7);
            for _ in 0..bursts {
                let period = 1.0 / style.burst_rate_hz;
                let dur = style.burst_s;
                if t + dur > end_s {
                    break;
                }
                let f0 = style.f0_hz * rng.random_range(0.96..1.04);
                let amp = style.level * rng.random_range(0.8..1.2);
                add_burst(&mut samples[..end], (t * rate).round() as usize, (dur * rate) as usize, f0 / rate, amp);
                t += period;
            }
            t += style.pause_s * rng.random_range(0.5..1.5);
        }
    }
    for s in &mut samples {
        *s = s.clamp(-1.0, 1.0);
    }
    Waveform::new(samples, sample_rate)
}

/// Adds a Hann-windowed harmonic tone; `freq` is in cycles per sample.
fn add_burst(out: &mut [f32], start: usize, n: usize, freq: f64, amp: f64) {
    let norm: f64 = (1..=HARMONICS).map(|k| 1.0 / k as f64).sum();
    for i in 0..n.min(out.len().saturating_sub(start)) {
        let env = (std::f64::consts::PI * i as f64 / n as f64).sin().powi(2);
        let phase = std::f64::consts::TAU * freq * i as f64;
        let tone: f64 = (1..=HARMONICS).map(|k| (k as f64 * phase).sin() / k as f64).sum();
        out[start + i] += (amp * env * tone / norm) as f32;
    }
}
