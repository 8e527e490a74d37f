//! SKT completion-time norms.

use serde::{Deserialize, Serialize};

use crate::corpus::IqGroup;
use crate::error::{Error, Result};
use crate::task::{Impairment, Task};

/// Lowest and highest age the norm tables must cover.
pub const NORM_AGE_RANGE: (u32, u32) = (55, 120);

/// Completion-time boundaries for one (age band, IQ group) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBand {
    pub age_min: u32,
    /// Inclusive.
    pub age_max: u32,
    pub iq_group: IqGroup,
    /// Times in seconds at which the norm value steps to 1, 2 and 3.
    pub boundaries: [f64; 3],
}

/// Age- and IQ-banded lookup mapping completion time to a 0-3 norm value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    pub bands: Vec<NormBand>,
}

impl NormTable {
    /// Checks increasing boundaries and gap-free, non-overlapping coverage of
    /// ages 55-120 for all three IQ groups.
    pub fn validate(&self) -> Result<()> {
        for band in &self.bands {
            let [t1, t2, t3] = band.boundaries;
            if !(t1 > 0.0 && t1 < t2 && t2 < t3 && t3.is_finite()) {
                return Err(Error::Config(format!(
                    "norm band {}-{} {:?}: boundaries {:?} must be positive and strictly increasing",
                    band.age_min, band.age_max, band.iq_group, band.boundaries
                )));
            }
            if band.age_min > band.age_max {
                return Err(Error::Config(format!(
                    "norm band {}-{}: empty age range",
                    band.age_min, band.age_max
                )));
            }
        }
        for iq in IqGroup::ALL {
            let mut bands: Vec<&NormBand> = self.bands.iter().filter(|b| b.iq_group == iq).collect();
            bands.sort_by_key(|b| b.age_min);
            let mut next = NORM_AGE_RANGE.0;
            for b in &bands {
                if b.age_min != next {
                    return Err(Error::Config(format!(
                        "norm table for {iq:?}: ages {next}.. not covered exactly (band starts at {})",
                        b.age_min
                    )));
                }
                next = b.age_max + 1;
            }
            if next <= NORM_AGE_RANGE.1 {
                return Err(Error::Config(format!(
                    "norm table for {iq:?}: ages {next}-{} not covered",
                    NORM_AGE_RANGE.1
                )));
            }
        }
        Ok(())
    }

    pub fn band(&self, age: u32, iq_group: IqGroup) -> Option<&NormBand> {
        self.bands
            .iter()
            .find(|b| b.iq_group == iq_group && (b.age_min..=b.age_max).contains(&age))
    }

    /// Synthetic stand-in for the licensed SKT manual tables (sub-test 3 or 7).
    pub fn synthetic_default(subtest: Task) -> Self {
        let scale = match subtest {
            Task::Skt7 => 1.5,
            _ => 1.0,
        };
        let ages = [(55, 64, [16.0, 24.0, 36.0]), (65, 69, [18.0, 27.0, 40.0]), (70, 79, [20.0, 30.0, 45.0]), (80, 120, [23.0, 34.0, 51.0])];
        let mut bands = Vec::new();
        for (age_min, age_max, base) in ages {
            for iq in IqGroup::ALL {
                let iq_factor = match iq {
                    IqGroup::BelowAverage => 1.15,
                    IqGroup::Average => 1.0,
                    IqGroup::AboveAverage => 0.9,
                };
                let boundaries = base.map(|t: f64| (t * scale * iq_factor * 2.0).round() / 2.0);
                bands.push(NormBand {
                    age_min,
                    age_max,
                    iq_group: iq,
                    boundaries,
                });
            }
        }
        Self { bands }
    }
}

/// Norm value and provenance for one timed SKT sub-test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SktScore {
    pub subject_id: String,
    pub subtest: Task,
    /// `None` when the subject could not perform the task.
    pub raw_time_s: Option<f64>,
    pub norm_value: u8,
}

/// Maps a completion time to its norm interval: below t1 → 0, [t1, t2) → 1,
/// [t2, t3) → 2, t3 and above → 3.
pub fn skt_norm_value(raw_time_s: f64, age: u32, iq_group: IqGroup, table: &NormTable) -> Result<u8> {
    if !(raw_time_s > 0.0) || !raw_time_s.is_finite() {
        return Err(Error::Scoring(format!("completion time {raw_time_s} must be positive")));
    }
    let band = table
        .band(age, iq_group)
        .ok_or_else(|| Error::Scoring(format!("norm table does not cover age {age} / {iq_group:?}")))?;
    Ok(band.boundaries.iter().filter(|&&t| raw_time_s >= t).count() as u8)
}

/// Impaired iff `norm_value >= cutoff`.
pub fn binarize_norm(norm_value: u8, cutoff: u8) -> Impairment {
    if norm_value >= cutoff {
        Impairment::Impaired
    } else {
        Impairment::NonImpaired
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_70s() -> NormTable {
        let mut t = NormTable::synthetic_default(Task::Skt3);
        for b in &mut t.bands {
            if b.age_min == 70 && b.iq_group == IqGroup::Average {
                b.boundaries = [20.0, 30.0, 45.0];
            }
        }
        t
    }

    #[test]
    fn default_tables_are_valid() {
        NormTable::synthetic_default(Task::Skt3).validate().unwrap();
        NormTable::synthetic_default(Task::Skt7).validate().unwrap();
    }

    #[test]
    fn interval_membership() {
        let t = table_70s();
        // interval-membership oracle over (20, 30, 45)
        let oracle = |x: f64| match x {
            x if x < 20.0 => 0,
            x if x < 30.0 => 1,
            x if x < 45.0 => 2,
            _ => 3,
        };
        for time in [5.0, 19.9, 20.0, 25.0, 30.0, 31.0, 44.9, 45.0, 120.0] {
            assert_eq!(skt_norm_value(time, 75, IqGroup::Average, &t).unwrap(), oracle(time), "t = {time}");
        }
        assert_eq!(skt_norm_value(31.0, 75, IqGroup::Average, &t).unwrap(), 2);
        assert_eq!(skt_norm_value(10.0, 75, IqGroup::Average, &t).unwrap(), 0);
        assert_eq!(skt_norm_value(300.0, 75, IqGroup::Average, &t).unwrap(), 3);
    }

    #[test]
    fn uncovered_age_is_an_error() {
        let t = table_70s();
        assert!(skt_norm_value(25.0, 40, IqGroup::Average, &t).is_err());
        let partial = NormTable {
            bands: t.bands.into_iter().filter(|b| b.iq_group != IqGroup::AboveAverage).collect(),
        };
        assert!(skt_norm_value(25.0, 75, IqGroup::AboveAverage, &partial).is_err());
        assert!(partial.validate().is_err());
    }

    #[test]
    fn validation_rejects_unordered_boundaries() {
        let mut t = table_70s();
        t.bands[0].boundaries = [10.0, 10.0, 20.0];
        assert!(t.validate().is_err());
    }

    #[test]
    fn cutoff_partition_is_exhaustive() {
        assert_eq!(binarize_norm(0, 1), Impairment::NonImpaired);
        for v in 1..=3 {
            assert_eq!(binarize_norm(v, 1), Impairment::Impaired);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn norm_value_is_monotone_in_time(a in 0.1f64..200.0, b in 0.1f64..200.0, age in 55u32..=120, iq in 0usize..3) {
                let t = NormTable::synthetic_default(Task::Skt7);
                let iq = IqGroup::ALL[iq];
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let v_lo = skt_norm_value(lo, age, iq, &t).unwrap();
                let v_hi = skt_norm_value(hi, age, iq, &t).unwrap();
                prop_assert!(v_lo <= v_hi);
                prop_assert!(!(binarize_norm(v_lo, 1) == Impairment::Impaired && binarize_norm(v_hi, 1) == Impairment::NonImpaired));
            }
        }
    }
}
