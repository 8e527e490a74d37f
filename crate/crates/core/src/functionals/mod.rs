//! Functionals over low-level descriptor contours.
//!
//! Each segment is framed (25 ms / 10 ms, Hamming), a fixed registry of
//! contours is computed per frame, and every functional in a
//! [`FunctionalSet`] collapses every contour. Vectors are laid out contour
//! major: `values[c * |fset| + f]`.

mod lld;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{schema_hash, FeatureKind, FeatureVector, Provenance};
use crate::segmentation::Segment;

pub use lld::{compute_llds, delta, frame_count, LldConfig, LldContours, ENERGY_FLOOR};
pub use stats::{evaluate, percentile_sorted, Functional, FunctionalSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct FunctionalsConfig {
    pub lld: LldConfig,
    pub functionals: FunctionalSet,
}

impl FunctionalsConfig {
    /// 7 MFCCs and no regression error: 28 contours x 13 functionals.
    pub fn compact() -> Self {
        let functionals = Functional::ALL
            .into_iter()
            .filter(|f| *f != Functional::LinregError)
            .collect();
        Self {
            lld: LldConfig { n_mfcc: 7, ..LldConfig::default() },
            functionals: FunctionalSet::new(functionals).expect("non-empty"),
        }
    }

    pub fn dim(&self) -> usize {
        self.lld.contour_names().len() * self.functionals.len()
    }

    /// Column names in vector order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        for c in self.lld.contour_names() {
            for f in self.functionals.items() {
                names.push(format!("{c}__{f}"));
            }
        }
        names
    }

    pub fn schema_id(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        schema_hash("fn", &canonical)
    }
}

/// Applies `fset` to every contour, contour-major.
pub fn apply_functionals(contours: &LldContours, fset: &FunctionalSet) -> Result<Vec<f64>> {
    if contours.values.is_empty() || contours.num_frames() == 0 {
        return Err(Error::invalid("no contours to summarize"));
    }
    let mut out = Vec::with_capacity(contours.values.len() * fset.len());
    for c in &contours.values {
        out.extend(evaluate(c, fset));
    }
    Ok(out)
}

/// [`extract_functionals`] over many segments in parallel, keeping their order.
pub fn extract_functionals_batch(segments: &[Segment], config: &FunctionalsConfig) -> Result<Vec<FeatureVector>> {
    segments.par_iter().map(|s| extract_functionals(s, config)).collect()
}

pub fn extract_functionals(segment: &Segment, config: &FunctionalsConfig) -> Result<FeatureVector> {
    let contours = compute_llds(&segment.waveform.samples, segment.waveform.sample_rate, &config.lld)?;
    let values = apply_functionals(&contours, &config.functionals)?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{}: feature {i} is not finite", segment.id())));
    }
    Ok(FeatureVector {
        values,
        schema_id: config.schema_id(),
        kind: FeatureKind::Functionals,
        layer: None,
        provenance: Provenance {
            subject_id: segment.subject_id.clone(),
            segment_kind: segment.kind,
            index: segment.index,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Waveform;
    use crate::task::Task;
    use proptest::prelude::*;

    fn segment(samples: Vec<f32>) -> Segment {
        Segment {
            subject_id: "S01".into(),
            kind: Task::Skt3,
            index: 0,
            waveform: Waveform { samples, sample_rate: 16_000 },
            offset_s: 0.0,
        }
    }

    fn chirp(seconds: f64, amp: f64) -> Vec<f32> {
        (0..(seconds * 16_000.0) as usize)
            .map(|i| {
                let t = i as f64 / 16_000.0;
                (amp * (2.0 * std::f64::consts::PI * (150.0 * t + 60.0 * t * t)).sin()) as f32
            })
            .collect()
    }

    #[test]
    fn default_dimension_is_full_grid() {
        let cfg = FunctionalsConfig::default();
        assert_eq!(cfg.dim(), 40 * 14);
        let v = extract_functionals(&segment(chirp(0.5, 0.3)), &cfg).unwrap();
        assert_eq!(v.values.len(), 560);
        assert_eq!(cfg.feature_names().len(), 560);
    }

    #[test]
    fn compact_grid_is_28_by_13() {
        let cfg = FunctionalsConfig::compact();
        assert_eq!(cfg.lld.contour_names().len(), 28);
        assert_eq!(cfg.functionals.len(), 13);
        let v = extract_functionals(&segment(chirp(0.5, 0.3)), &cfg).unwrap();
        assert_eq!(v.values.len(), 364);
        assert_ne!(cfg.schema_id(), FunctionalsConfig::default().schema_id());
    }

    #[test]
    fn extraction_is_deterministic() {
        let cfg = FunctionalsConfig::default();
        let s = segment(chirp(0.7, 0.2));
        let a = extract_functionals(&s, &cfg).unwrap();
        let b = extract_functionals(&s, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.schema_id, cfg.schema_id());
    }

    #[test]
    fn silence_is_finite() {
        let v = extract_functionals(&segment(vec![0.0; 8_000]), &FunctionalsConfig::default()).unwrap();
        assert!(v.values.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn layout_is_contour_major() {
        let contours = LldContours {
            frame_rate_hz: 100.0,
            names: vec!["a".into(), "b".into()],
            values: vec![vec![1.0, 1.0], vec![(0.0), 4.0]],
        };
        let fset = FunctionalSet::new(vec![Functional::Mean, Functional::Max]).unwrap();
        assert_eq!(apply_functionals(&contours, &fset).unwrap(), vec![1.0, 1.0, 2.0, 4.0]);
        let empty = LldContours { frame_rate_hz: 100.0, names: vec![], values: vec![] };
        assert!(apply_functionals(&empty, &fset).is_err());
    }

    #[test]
    fn gain_leaves_zcr_functionals_and_shifts_energy_mean() {
        let cfg = FunctionalsConfig::default();
        let names = cfg.feature_names();
        let idx = |n: &str| names.iter().position(|x| x == n).unwrap();
        let base: Vec<f32> = chirp(0.6, 0.4);
        for g in [0.05f64, 0.5, 2.0] {
            let scaled: Vec<f32> = base.iter().map(|&v| (v as f64 * g) as f32).collect();
            let a = extract_functionals(&segment(base.clone()), &cfg).unwrap().values;
            let b = extract_functionals(&segment(scaled), &cfg).unwrap().values;
            for f in Functional::ALL {
                let i = idx(&format!("zcr__{f}"));
                assert_eq!(a[i], b[i], "zcr {f}");
            }
            let e = idx("log_energy__mean");
            assert!((b[e] - a[e] - 20.0 * g.log10() / 10.0).abs() < 1e-5);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn any_finite_input_gives_finite_full_length(
            x in prop::collection::vec(-1.0f32..1.0, 400..2400),
        ) {
            let cfg = FunctionalsConfig::default();
            let v = extract_functionals(&segment(x), &cfg).unwrap();
            prop_assert_eq!(v.values.len(), cfg.dim());
            prop_assert!(v.values.iter().all(|f| f.is_finite()));
        }
    }
}
