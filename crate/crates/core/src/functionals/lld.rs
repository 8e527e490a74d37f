//! Frame-level low-level descriptors.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-energy value reported for frames at or below this mean power.
pub const ENERGY_FLOOR: f64 = 1e-10;
const MEL_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LldConfig {
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub n_fft: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub voicing_threshold: f64,
    pub rolloff_fraction: f64,
    pub deltas: bool,
}

impl Default for LldConfig {
    fn default() -> Self {
        Self {
            frame_len_ms: 25.0,
            hop_ms: 10.0,
            n_fft: 512,
            n_mels: 26,
            n_mfcc: 13,
            f0_min_hz: 60.0,
            f0_max_hz: 400.0,
            voicing_threshold: 0.45,
            rolloff_fraction: 0.85,
            deltas: true,
        }
    }
}

impl LldConfig {
    pub fn frame_len(&self, rate: u32) -> usize {
        (self.frame_len_ms * rate as f64 / 1000.0).round() as usize
    }

    pub fn hop(&self, rate: u32) -> usize {
        (self.hop_ms * rate as f64 / 1000.0).round() as usize
    }

    /// Contour names in registry order.
    pub fn contour_names(&self) -> Vec<String> {
        let mut base: Vec<String> = [
            "log_energy",
            "zcr",
            "f0",
            "voicing_prob",
            "spectral_centroid",
            "spectral_flux",
            "spectral_rolloff",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        base.extend((0..self.n_mfcc).map(|i| format!("mfcc_{i}")));
        if self.deltas {
            let deltas: Vec<String> = base.iter().map(|n| format!("delta_{n}")).collect();
            base.extend(deltas);
        }
        base
    }

    fn validate(&self) -> Result<()> {
        if !(self.frame_len_ms > 0.0 && self.hop_ms > 0.0) {
            return Err(Error::Config("frame and hop lengths must be positive".into()));
        }
        if !(self.f0_min_hz > 0.0 && self.f0_min_hz < self.f0_max_hz) {
            return Err(Error::Config("F0 search range must satisfy 0 < min < max".into()));
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return Err(Error::Config("need 1 <= n_mfcc <= n_mels".into()));
        }
        Ok(())
    }
}

/// Equal-length named contours sampled at `frame_rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct LldContours {
    pub frame_rate_hz: f64,
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl LldContours {
    pub fn num_frames(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i].as_slice())
    }
}

/// Number of frames: floor((num_samples - frame_len) / hop) + 1.
pub fn frame_count(num_samples: usize, frame_len: usize, hop: usize) -> usize {
    if num_samples < frame_len {
        0
    } else {
        (num_samples - frame_len) / hop + 1
    }
}

struct Analyzer {
    rate: f64,
    frame_len: usize,
    n_fft: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    acf_fwd: Arc<dyn Fft<f64>>,
    acf_inv: Arc<dyn Fft<f64>>,
    acf_len: usize,
    window_acf: Vec<f64>,
    mel_bank: Vec<Vec<(usize, f64)>>,
    dct: Vec<Vec<f64>>,
    lag_range: (usize, usize),
    cfg: LldConfig,
}

impl Analyzer {
    fn new(rate: u32, cfg: &LldConfig) -> Self {
        let frame_len = cfg.frame_len(rate);
        let n_fft = cfg.n_fft.max(frame_len.next_power_of_two());
        let window: Vec<f64> = (0..frame_len)
            .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (frame_len - 1).max(1) as f64).cos())
            .collect();
        let mut planner = FftPlanner::new();
        let acf_len = (2 * frame_len).next_power_of_two();
        let mut an = Self {
            rate: rate as f64,
            frame_len,
            n_fft,
            fft: planner.plan_fft_forward(n_fft),
            acf_fwd: planner.plan_fft_forward(acf_len),
            acf_inv: planner.plan_fft_inverse(acf_len),
            acf_len,
            window_acf: Vec::new(),
            mel_bank: mel_filterbank(cfg.n_mels, n_fft, rate as f64),
            dct: dct_matrix(cfg.n_mfcc, cfg.n_mels),
            lag_range: (
                (rate as f64 / cfg.f0_max_hz).ceil() as usize,
                ((rate as f64 / cfg.f0_min_hz).floor() as usize).min(frame_len.saturating_sub(2)),
            ),
            window: window.clone(),
            cfg: cfg.clone(),
        };
        an.window_acf = an.autocorrelation(&window);
        an
    }

    fn autocorrelation(&self, x: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(self.acf_len, Complex::new(0.0, 0.0));
        self.acf_fwd.process(&mut buf);
        for c in &mut buf {
            *c = Complex::new(c.norm_sqr(), 0.0);
        }
        self.acf_inv.process(&mut buf);
        let scale = 1.0 / self.acf_len as f64;
        buf.iter().take(self.frame_len).map(|c| c.re * scale).collect()
    }

    /// (voicing probability, F0 in Hz or 0 when unvoiced)
    fn pitch(&self, windowed: &[f64], power: f64) -> (f64, f64) {
        let acf = self.autocorrelation(windowed);
        if acf[0] <= 0.0 || power <= ENERGY_FLOOR {
            return (0.0, 0.0);
        }
        let (lo, hi) = self.lag_range;
        if lo + 2 > hi {
            return (0.0, 0.0);
        }
        let norm = |lag: usize| (acf[lag] / acf[0]) / (self.window_acf[lag] / self.window_acf[0]);
        let r: Vec<f64> = (lo - 1..=hi + 1).map(norm).collect();
        // local maxima inside [lo, hi]
        let peaks: Vec<(usize, f64)> = (1..r.len() - 1)
            .filter(|&i| r[i] > r[i - 1] && r[i] >= r[i + 1])
            .map(|i| (i, r[i]))
            .collect();
        let Some(best) = peaks.iter().map(|p| p.1).reduce(f64::max) else {
            return (0.0, 0.0);
        };
        // earliest strong peak guards against octave-down errors on periodic input
        let &(i, value) = peaks.iter().find(|p| p.1 >= 0.9 * best).expect("best peak exists");
        let voicing = value.clamp(0.0, 1.0);
        if voicing < self.cfg.voicing_threshold {
            return (voicing, 0.0);
        }
        let (a, b, c) = (r[i - 1], r[i], r[i + 1]);
        let denom = a - 2.0 * b + c;
        let offset = if denom.abs() > 1e-12 { 0.5 * (a - c) / denom } else { 0.0 };
        let lag = (lo - 1 + i) as f64 + offset.clamp(-0.5, 0.5);
        (voicing, self.rate / lag)
    }
}

/// Computes every registered contour for a mono signal.
pub fn compute_llds(samples: &[f32], sample_rate: u32, cfg: &LldConfig) -> Result<LldContours> {
    cfg.validate()?;
    let frame_len = cfg.frame_len(sample_rate);
    let hop = cfg.hop(sample_rate);
    let n_frames = frame_count(samples.len(), frame_len, hop);
    if n_frames == 0 {
        return Err(Error::invalid(format!(
            "segment of {} samples is shorter than one {} ms frame",
            samples.len(),
            cfg.frame_len_ms
        )));
    }
    let an = Analyzer::new(sample_rate, cfg);
    let n_base = 7 + cfg.n_mfcc;
    let mut base: Vec<Vec<f64>> = vec![Vec::with_capacity(n_frames); n_base];
    let mut prev_mag: Option<Vec<f64>> = None;
    let bin_hz = an.rate / an.n_fft as f64;
    let mut spec_buf = vec![Complex::new(0.0, 0.0); an.n_fft];

    for f in 0..n_frames {
        let frame: Vec<f64> = samples[f * hop..f * hop + frame_len].iter().map(|&v| v as f64).collect();
        let power = frame.iter().map(|v| v * v).sum::<f64>() / frame_len as f64;
        base[0].push(power.max(ENERGY_FLOOR).log10());

        let crossings = frame.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
        base[1].push(crossings as f64 / (frame_len - 1).max(1) as f64);

        let windowed: Vec<f64> = frame.iter().zip(&an.window).map(|(x, w)| x * w).collect();
        let (voicing, f0) = an.pitch(&windowed, power);
        base[2].push(f0);
        base[3].push(voicing);

        for (slot, &v) in spec_buf.iter_mut().zip(windowed.iter().chain(std::iter::repeat(&0.0))) {
            *slot = Complex::new(v, 0.0);
        }
        an.fft.process(&mut spec_buf);
        let n_bins = an.n_fft / 2 + 1;
        let pow: Vec<f64> = spec_buf[..n_bins].iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = pow.iter().sum();

        let centroid = if total > 0.0 {
            pow.iter().enumerate().map(|(k, p)| k as f64 * bin_hz * p).sum::<f64>() / total
        } else {
            0.0
        };
        base[4].push(centroid);

        let mag: Vec<f64> = pow.iter().map(|p| p.sqrt()).collect();
        let mag_sum: f64 = mag.iter().sum();
        let mag: Vec<f64> = if mag_sum > 0.0 { mag.iter().map(|m| m / mag_sum).collect() } else { vec![0.0; n_bins] };
        let flux = prev_mag
            .as_ref()
            .map_or(0.0, |p| p.iter().zip(&mag).map(|(a, b)| (b - a) * (b - a)).sum());
        base[5].push(flux);
        prev_mag = Some(mag);

        let rolloff = if total > 0.0 {
            let target = cfg.rolloff_fraction * total;
            let mut acc = 0.0;
            let k = pow
                .iter()
                .position(|p| {
                    acc += p;
                    acc >= target
                })
                .unwrap_or(n_bins - 1);
            k as f64 * bin_hz
        } else {
            0.0
        };
        base[6].push(rolloff);

        let log_mel: Vec<f64> = an
            .mel_bank
            .iter()
            .map(|filter| filter.iter().map(|&(k, w)| w * pow[k]).sum::<f64>().max(MEL_FLOOR).ln())
            .collect();
        for (c, row) in an.dct.iter().enumerate() {
            base[7 + c].push(row.iter().zip(&log_mel).map(|(a, b)| a * b).sum());
        }
    }

    let mut values = base;
    if cfg.deltas {
        let deltas: Vec<Vec<f64>> = values.iter().map(|c| delta(c)).collect();
        values.extend(deltas);
    }
    Ok(LldContours {
        frame_rate_hz: sample_rate as f64 / hop as f64,
        names: cfg.contour_names(),
        values,
    })
}

/// Regression delta over +-2 frames with edge replication.
pub fn delta(x: &[f64]) -> Vec<f64> {
    const N: isize = 2;
    let denom = 2.0 * (1..=N).map(|n| (n * n) as f64).sum::<f64>();
    let len = x.len() as isize;
    let at = |i: isize| x[i.clamp(0, len - 1) as usize];
    (0..len)
        .map(|t| (1..=N).map(|n| n as f64 * (at(t + n) - at(t - n))).sum::<f64>() / denom)
        .collect()
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK-style filters as sparse (bin, weight) lists.
fn mel_filterbank(n_mels: usize, n_fft: usize, rate: f64) -> Vec<Vec<(usize, f64)>> {
    let n_bins = n_fft / 2 + 1;
    let max_mel = hz_to_mel(rate / 2.0);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(max_mel * i as f64 / (n_mels + 1) as f64))
        .collect();
    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .filter_map(|k| {
                    let f = k as f64 * rate / n_fft as f64;
                    let w = if f > lo && f <= mid {
                        (f - lo) / (mid - lo)
                    } else if f > mid && f < hi {
                        (hi - f) / (hi - mid)
                    } else {
                        0.0
                    };
                    (w > 0.0).then_some((k, w))
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II rows.
fn dct_matrix(n_out: usize, n_in: usize) -> Vec<Vec<f64>> {
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n_in as f64).sqrt() } else { (2.0 / n_in as f64).sqrt() };
            (0..n_in)
                .map(|n| scale * (PI * k as f64 * (n as f64 + 0.5) / n_in as f64).cos())
                .collect()
        })
        .collect()
}
