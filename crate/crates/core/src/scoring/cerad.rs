//! Verbal-fluency z-scores and the cohort-derived impairment threshold.

use serde::{Deserialize, Serialize};

use crate::corpus::Sex;
use crate::error::{Error, Result};
use crate::task::Impairment;

/// Linear demographic correction plus reference-population scaling.
///
/// The coefficients give the expected change in the raw count per unit of
/// each covariate; that expected effect is removed before z-scaling:
/// `z = (raw - b_age (age - age_ref) - b_edu (edu - edu_ref) - b_f [female] - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeradCoeffs {
    pub age_coef: f64,
    pub age_ref: f64,
    pub education_coef: f64,
    pub education_ref: f64,
    pub female_coef: f64,
    pub population_mean: f64,
    pub population_std: f64,
}

impl CeradCoeffs {
    /// Synthetic stand-in for clinical regression norms.
    pub fn synthetic_default() -> Self {
        Self {
            age_coef: -0.15,
            age_ref: 70.0,
            education_coef: 0.35,
            education_ref: 12.0,
            female_coef: 0.3,
            population_mean: 20.0,
            population_std: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.age_coef,
            self.age_ref,
            self.education_coef,
            self.education_ref,
            self.female_coef,
            self.population_mean,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("CERAD coefficients must be finite".into()));
        }
        if !(self.population_std > 0.0 && self.population_std.is_finite()) {
            return Err(Error::Config(format!(
                "CERAD population std must be positive, got {}",
                self.population_std
            )));
        }
        Ok(())
    }

    /// Expected demographic shift of the raw count.
    pub fn demographic_effect(&self, age: u32, education_years: u32, sex: Sex) -> f64 {
        let female = if sex == Sex::Female { 1.0 } else { 0.0 };
        self.age_coef * (age as f64 - self.age_ref)
            + self.education_coef * (education_years as f64 - self.education_ref)
            + self.female_coef * female
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeradScore {
    pub subject_id: String,
    pub raw_count: u32,
    pub z: f64,
}

pub fn cerad_z_score(raw_count: u32, age: u32, education_years: u32, sex: Sex, coeffs: &CeradCoeffs) -> Result<f64> {
    coeffs.validate()?;
    let adjusted = raw_count as f64 - coeffs.demographic_effect(age, education_years, sex);
    Ok((adjusted - coeffs.population_mean) / coeffs.population_std)
}

/// Impaired iff `z <= threshold`.
pub fn binarize_z(z: f64, threshold: f64) -> Impairment {
    if z <= threshold {
        Impairment::Impaired
    } else {
        Impairment::NonImpaired
    }
}

/// One subject's inputs to [`derive_z_threshold`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdInput {
    pub skt3: Impairment,
    pub skt7: Impairment,
    pub z: f64,
}

/// Picks the z threshold that best reproduces the classes of subjects on whom
/// both SKT sub-tests agree.
///
/// Candidates are midpoints between consecutive distinct concordant z values.
/// Among candidates with maximal agreement, the one giving the most balanced
/// impaired/non-impaired split over all `entries` wins, then the smallest |θ|.
pub fn derive_z_threshold(entries: &[ThresholdInput]) -> Result<f64> {
    if entries.iter().any(|e| !e.z.is_finite()) {
        return Err(Error::Scoring("non-finite z-score".into()));
    }
    let mut concordant: Vec<(f64, Impairment)> = entries
        .iter()
        .filter(|e| e.skt3 == e.skt7)
        .map(|e| (e.z, e.skt3))
        .collect();
    let total_impaired = concordant.iter().filter(|c| c.1 == Impairment::Impaired).count();
    let total_non = concordant.len() - total_impaired;
    if total_impaired == 0 || total_non == 0 {
        return Err(Error::Scoring(format!(
            "threshold derivation needs concordant subjects in both classes (impaired {total_impaired}, non-impaired {total_non})"
        )));
    }
    concordant.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut all_z: Vec<f64> = entries.iter().map(|e| e.z).collect();
    all_z.sort_by(f64::total_cmp);

    let mut best: Option<(usize, usize, f64)> = None; // (agreement, imbalance, θ)
    let mut impaired_below = 0;
    let mut non_below = 0;
    for i in 0..concordant.len() - 1 {
        match concordant[i].1 {
            Impairment::Impaired => impaired_below += 1,
            Impairment::NonImpaired => non_below += 1,
        }
        let (lo, hi) = (concordant[i].0, concordant[i + 1].0);
        if lo == hi {
            continue;
        }
        let theta = lo + (hi - lo) / 2.0;
        let agreement = impaired_below + (total_non - non_below);
        let below = all_z.partition_point(|&z| z <= theta);
        let imbalance = below.abs_diff(all_z.len() - below);
        let better = match best {
            None => true,
            Some((a, b, t)) => {
                (agreement, std::cmp::Reverse(imbalance)) > (a, std::cmp::Reverse(b))
                    || (agreement == a && imbalance == b && (theta.abs() < t.abs() || (theta.abs() == t.abs() && theta < t)))
            }
        };
        if better {
            best = Some((agreement, imbalance, theta));
        }
    }
    best.map(|b| b.2)
        .ok_or_else(|| Error::Scoring("concordant z-scores are all identical".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Impairment::{Impaired as I, NonImpaired as N};

    fn zero_coeffs(mean: f64, std: f64) -> CeradCoeffs {
        CeradCoeffs {
            age_coef: 0.0,
            age_ref: 70.0,
            education_coef: 0.0,
            education_ref: 10.0,
            female_coef: 0.0,
            population_mean: mean,
            population_std: std,
        }
    }

    #[test]
    fn centering_and_unit_scaling() {
        let c = zero_coeffs(20.0, 4.0);
        assert_eq!(cerad_z_score(20, 75, 12, Sex::Male, &c).unwrap(), 0.0);
        assert_eq!(cerad_z_score(24, 75, 12, Sex::Female, &c).unwrap(), 1.0);
    }

    #[test]
    fn demographic_correction_matches_hand_formula() {
        let c = CeradCoeffs {
            age_coef: -0.05,
            age_ref: 70.0,
            education_coef: 0.2,
            education_ref: 10.0,
            female_coef: 0.0,
            population_mean: 20.0,
            population_std: 4.0,
        };
        // expected count shift: -0.05 * 10 + 0.2 * 2 = -0.1 → adjusted 18.1
        let expected = (18.0 - (-0.05 * (80.0 - 70.0) + 0.2 * (12.0 - 10.0)) - 20.0) / 4.0;
        let z = cerad_z_score(18, 80, 12, Sex::Male, &c).unwrap();
        assert!((z - expected).abs() < 1e-12);
        assert!((z - (-0.475)).abs() < 1e-12);
    }

    #[test]
    fn non_positive_std_is_rejected() {
        assert!(cerad_z_score(10, 70, 10, Sex::Male, &zero_coeffs(20.0, 0.0)).is_err());
        assert!(cerad_z_score(10, 70, 10, Sex::Male, &zero_coeffs(20.0, -1.0)).is_err());
    }

    #[test]
    fn threshold_boundary_is_inclusive() {
        assert_eq!(binarize_z(-1.2, -1.2), I);
        assert_eq!(binarize_z(-1.19, -1.2), N);
        assert_eq!(binarize_z(0.0, -1.2), N);
    }

    #[test]
    fn separable_gap_gives_midpoint() {
        let mut entries = Vec::new();
        for z in [-3.5, -2.8, -2.0] {
            entries.push(ThresholdInput { skt3: I, skt7: I, z });
        }
        for z in [0.0, 0.4, 1.7] {
            entries.push(ThresholdInput { skt3: N, skt7: N, z });
        }
        // a discordant subject does not move the threshold
        entries.push(ThresholdInput { skt3: I, skt7: N, z: 5.0 });
        assert_eq!(derive_z_threshold(&entries).unwrap(), -1.0);
    }

    #[test]
    fn one_sided_concordance_is_an_error() {
        let entries = vec![
            ThresholdInput { skt3: I, skt7: I, z: -2.0 },
            ThresholdInput { skt3: I, skt7: N, z: 1.0 },
        ];
        assert!(derive_z_threshold(&entries).is_err());
    }

    #[test]
    fn ties_prefer_balanced_split_then_small_magnitude() {
        // impaired at -1, non-impaired at 1 and 3; all midpoints 0 and 2 ... only 0 separates perfectly
        let entries = vec![
            ThresholdInput { skt3: I, skt7: I, z: -1.0 },
            ThresholdInput { skt3: N, skt7: N, z: 1.0 },
            ThresholdInput { skt3: N, skt7: N, z: -0.5 },
            ThresholdInput { skt3: I, skt7: I, z: 0.5 },
        ];
        // candidates -0.75 (agree 3), 0.0 (agree 2), 0.75 (agree 3): -0.75 splits 1/3, 0.75 splits 3/1,
        // equal imbalance, equal |θ| → smaller θ
        assert_eq!(derive_z_threshold(&entries).unwrap(), -0.75);
    }
}
