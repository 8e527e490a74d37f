//! Statistics that collapse a contour to a scalar.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Mean,
    Std,
    Min,
    Max,
    Range,
    P10,
    P25,
    P50,
    P75,
    P90,
    Skewness,
    Kurtosis,
    LinregSlope,
    LinregError,
}

impl Functional {
    pub const ALL: [Functional; 14] = [
        Functional::Mean,
        Functional::Std,
        Functional::Min,
        Functional::Max,
        Functional::Range,
        Functional::P10,
        Functional::P25,
        Functional::P50,
        Functional::P75,
        Functional::P90,
        Functional::Skewness,
        Functional::Kurtosis,
        Functional::LinregSlope,
        Functional::LinregError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Functional::Mean => "mean",
            Functional::Std => "std",
            Functional::Min => "min",
            Functional::Max => "max",
            Functional::Range => "range",
            Functional::P10 => "p10",
            Functional::P25 => "p25",
            Functional::P50 => "p50",
            Functional::P75 => "p75",
            Functional::P90 => "p90",
            Functional::Skewness => "skewness",
            Functional::Kurtosis => "kurtosis",
            Functional::LinregSlope => "linreg_slope",
            Functional::LinregError => "linreg_error",
        }
    }

    fn percentile(self) -> Option<f64> {
        match self {
            Functional::P10 => Some(10.0),
            Functional::P25 => Some(25.0),
            Functional::P50 => Some(50.0),
            Functional::P75 => Some(75.0),
            Functional::P90 => Some(90.0),
            _ => None,
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Functional::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown functional {s:?}")))
    }
}

/// Ordered, duplicate-free list of functionals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Functional>", into = "Vec<Functional>")]
pub struct FunctionalSet(Vec<Functional>);

impl FunctionalSet {
    pub fn new(items: Vec<Functional>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Config("functional set is empty".into()));
        }
        for (i, f) in items.iter().enumerate() {
            if items[..i].contains(f) {
                return Err(Error::Config(format!("functional {f} listed twice")));
            }
        }
        Ok(Self(items))
    }

    pub fn items(&self) -> &[Functional] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for FunctionalSet {
    fn default() -> Self {
        Self(Functional::ALL.to_vec())
    }
}

impl TryFrom<Vec<Functional>> for FunctionalSet {
    type Error = Error;

    fn try_from(v: Vec<Functional>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FunctionalSet> for Vec<Functional> {
    fn from(s: FunctionalSet) -> Self {
        s.0
    }
}

/// Evaluates every functional of `set` on `x`, in set order.
///
/// Percentiles interpolate linearly between order statistics at rank
/// p/100·(n−1). Degenerate moments (zero variance) evaluate to 0.
pub fn evaluate(x: &[f64], set: &FunctionalSet) -> Vec<f64> {
    let m = Moments::of(x);
    let mut sorted: Option<Vec<f64>> = None;
    set.items()
        .iter()
        .map(|&f| match f {
            Functional::Mean => m.mean,
            Functional::Std => m.var.sqrt(),
            Functional::Min => m.min,
            Functional::Max => m.max,
            Functional::Range => m.max - m.min,
            Functional::Skewness => m.skewness(),
            Functional::Kurtosis => m.kurtosis(),
            Functional::LinregSlope => linreg(x).0,
            Functional::LinregError => linreg(x).1,
            p => {
                let s = sorted.get_or_insert_with(|| {
                    let mut v = x.to_vec();
                    v.sort_by(f64::total_cmp);
                    v
                });
                percentile_sorted(s, p.percentile().expect("percentile functional"))
            }
        })
        .collect()
}

pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

struct Moments {
    mean: f64,
    var: f64,
    m3: f64,
    m4: f64,
    min: f64,
    max: f64,
}

impl Moments {
    fn of(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &v in x {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        Self {
            mean,
            var: m2 / n,
            m3: m3 / n,
            m4: m4 / n,
            min: x.iter().copied().fold(f64::INFINITY, f64::min),
            max: x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn degenerate(&self) -> bool {
        self.var <= 1e-24 * (1.0 + self.mean * self.mean)
    }

    fn skewness(&self) -> f64 {
        if self.degenerate() {
            0.0
        } else {
            self.m3 / self.var.powf(1.5)
        }
    }

    /// Excess kurtosis.
    fn kurtosis(&self) -> f64 {
        if self.degenerate() {
            0.0
        } else {
            self.m4 / (self.var * self.var) - 3.0
        }
    }
}

/// Least-squares line over frame index: (slope per frame, mean squared residual).
fn linreg(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n < 2 {
        return (0.0, 0.0);
    }
    let t_mean = (n - 1) as f64 / 2.0;
    let y_mean = x.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (y - y_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let mse = x
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let r = y - (intercept + slope * i as f64);
            r * r
        })
        .sum::<f64>()
        / n as f64;
    (slope, mse)
}
