//! PCM WAV input/output, channel downmix and sample-rate conversion.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::resample::resample;
use super::{ChannelLayout, Recording};
use crate::error::{Error, Result};

/// Sample rate every downstream module works at.
pub const TARGET_RATE_HZ: u32 = 16_000;

/// Mono waveform with samples in [-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// De-interleaved multi-channel PCM as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct PcmAudio {
    pub channels: Vec<Vec<f32>>,
    pub sample_rate: u32,
}

impl PcmAudio {
    pub fn num_frames(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.num_frames() as f64 / self.sample_rate as f64
    }
}

/// Which signal feeds feature extraction for stereo session recordings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    /// Arithmetic mean of both channels.
    #[default]
    Mix,
    /// Right channel only (the recorder faced the patient on the right).
    Patient,
}

/// Reads a 16-bit PCM WAV file.
pub fn read_wav(path: &Path) -> Result<PcmAudio> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Audio {
            path: path.to_path_buf(),
            message: format!(
                "unsupported encoding: {:?} {} bit (expected 16-bit PCM)",
                spec.sample_format, spec.bits_per_sample
            ),
        });
    }
    let n_channels = spec.channels as usize;
    if n_channels == 0 {
        return Err(Error::Audio {
            path: path.to_path_buf(),
            message: "zero channels".into(),
        });
    }
    let mut channels = vec![Vec::with_capacity(reader.duration() as usize); n_channels];
    for (i, sample) in reader.into_samples::<i16>().enumerate() {
        let sample = sample.map_err(|e| wav_error(path, e))?;
        channels[i % n_channels].push(pcm_to_f32(sample));
    }
    Ok(PcmAudio {
        channels,
        sample_rate: spec.sample_rate,
    })
}

/// Reads only the header of a WAV file: (sample rate, channel count, duration in seconds).
pub fn probe_wav(path: &Path) -> Result<(u32, u16, f64)> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Audio {
            path: path.to_path_buf(),
            message: "unsupported encoding (expected 16-bit PCM)".into(),
        });
    }
    let duration = reader.duration() as f64 / spec.sample_rate as f64;
    Ok((spec.sample_rate, spec.channels, duration))
}

pub fn write_wav(path: &Path, audio: &PcmAudio) -> Result<()> {
    let spec = hound::WavSpec {
        channels: audio.channels.len() as u16,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for i in 0..audio.num_frames() {
        for channel in &audio.channels {
            writer
                .write_sample(f32_to_pcm(channel[i]))
                .map_err(|e| wav_error(path, e))?;
        }
    }
    writer.finalize().map_err(|e| wav_error(path, e))
}

pub fn write_mono_wav(path: &Path, waveform: &Waveform) -> Result<()> {
    write_wav(
        path,
        &PcmAudio {
            channels: vec![waveform.samples.clone()],
            sample_rate: waveform.sample_rate,
        },
    )
}

/// Loads a recording as a 16 kHz mono waveform using the channel mean.
pub fn load_audio(recording: &Recording) -> Result<Waveform> {
    load_audio_with(recording, ChannelMode::Mix)
}

pub fn load_audio_with(recording: &Recording, mode: ChannelMode) -> Result<Waveform> {
    let pcm = read_wav(&recording.audio_path)?;
    if recording.channels == ChannelLayout::Stereo && pcm.channels.len() != 2 {
        return Err(Error::Audio {
            path: recording.audio_path.clone(),
            message: format!("expected 2 channels, found {}", pcm.channels.len()),
        });
    }
    to_mono_16k(pcm, mode, &recording.audio_path)
}

pub(crate) fn to_mono_16k(pcm: PcmAudio, mode: ChannelMode, path: &Path) -> Result<Waveform> {
    let rate = pcm.sample_rate;
    let mono = match (pcm.channels.len(), mode) {
        (1, ChannelMode::Patient) => {
            log::warn!(
                "{}: mono recording, patient channel unavailable; using the mono signal",
                path.display()
            );
            pcm.channels.into_iter().next().unwrap_or_default()
        }
        (1, ChannelMode::Mix) => pcm.channels.into_iter().next().unwrap_or_default(),
        (2, ChannelMode::Patient) => pcm.channels.into_iter().nth(1).unwrap_or_default(),
        (_, ChannelMode::Mix) => downmix(&pcm.channels),
        (n, ChannelMode::Patient) => {
            return Err(Error::Audio {
                path: path.to_path_buf(),
                message: format!("patient channel undefined for {n}-channel audio"),
            })
        }
    };
    Ok(Waveform::new(resample(&mono, rate, TARGET_RATE_HZ), TARGET_RATE_HZ))
}

/// Arithmetic mean across channels.
pub fn downmix(channels: &[Vec<f32>]) -> Vec<f32> {
    let Some(first) = channels.first() else {
        return Vec::new();
    };
    if channels.len() == 1 {
        return first.clone();
    }
    let scale = 1.0 / channels.len() as f32;
    (0..first.len())
        .map(|i| channels.iter().map(|c| c[i]).sum::<f32>() * scale)
        .collect()
}

pub fn pcm_to_f32(sample: i16) -> f32 {
    sample as f32 / 32768.0
}

pub fn f32_to_pcm(sample: f32) -> i16 {
    (sample * 32768.0).round().clamp(i16::MIN as f32, i16::MAX as f32) as i16
}

fn wav_error(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(source) => Error::io(path, source),
        other => Error::Audio {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}
