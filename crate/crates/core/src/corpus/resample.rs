//! Rational-ratio polyphase resampler with a Kaiser-windowed sinc low-pass.
//!
//! The prototype filter is designed at the upsampled rate `L * f_in` with its
//! stop band starting at the lower of the two Nyquist frequencies and 80 dB of
//! attenuation, so aliasing after decimation stays below -60 dB.

use std::f64::consts::PI;

const STOPBAND_DB: f64 = 80.0;
/// Pass-band edge as a fraction of the lower Nyquist frequency.
const PASSBAND_FRACTION: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    taps: Vec<f64>,
}

impl Resampler {
    pub fn new(from_hz: u32, to_hz: u32) -> Self {
        assert!(from_hz > 0 && to_hz > 0, "sample rates must be positive");
        let g = gcd(from_hz as usize, to_hz as usize);
        let up = to_hz as usize / g;
        let down = from_hz as usize / g;
        let design_rate = from_hz as f64 * up as f64;
        let nyquist = from_hz.min(to_hz) as f64 / 2.0;
        let pass_edge = PASSBAND_FRACTION * nyquist;
        let transition = nyquist - pass_edge;
        let cutoff = (pass_edge + nyquist) / 2.0 / design_rate;

        let beta = 0.1102 * (STOPBAND_DB - 8.7);
        let mut len = ((STOPBAND_DB - 7.95) / (14.36 * transition / design_rate)).ceil() as usize + 1;
        if len % 2 == 0 {
            len += 1;
        }
        let centre = (len - 1) as f64 / 2.0;
        let i0_beta = bessel_i0(beta);
        let taps = (0..len)
            .map(|k| {
                let t = k as f64 - centre;
                let sinc = if t == 0.0 {
                    2.0 * cutoff
                } else {
                    (2.0 * PI * cutoff * t).sin() / (PI * t)
                };
                let r = t / centre;
                let window = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                sinc * window
            })
            .collect();
        Self { up, down, taps }
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    pub fn process(&self, input: &[f32]) -> Vec<f32> {
        let n_out = self.output_len(input.len());
        let delay = (self.taps.len() - 1) / 2;
        let gain = self.up as f64;
        let up = self.up;
        let up_len = input.len() * up;
        (0..n_out)
            .map(|n| {
                // position in the zero-stuffed stream, shifted to undo the filter delay
                let m = n * self.down + delay;
                let mut acc = 0.0f64;
                let mut k = m % up;
                while k < self.taps.len() && k <= m {
                    let pos = m - k;
                    if pos < up_len {
                        acc += self.taps[k] * input[pos / up] as f64;
                    }
                    k += up;
                }
                (acc * gain) as f32
            })
            .collect()
    }
}

/// Resamples `input` from `from_hz` to `to_hz`; identical rates return a copy.
pub fn resample(input: &[f32], from_hz: u32, to_hz: u32) -> Vec<f32> {
    if from_hz == to_hz {
        return input.to_vec();
    }
    Resampler::new(from_hz, to_hz).process(input)
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}
