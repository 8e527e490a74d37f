//! Raw sub-test scores to binary impairment labels.

mod cerad;
mod labels;
mod norms;

pub use cerad::{binarize_z, cerad_z_score, derive_z_threshold, CeradCoeffs, CeradScore, ThresholdInput};
pub use labels::{assign_labels, ClassLabel, Exclusion, LabelSet, ScoringConfig, SubjectLabels, ThresholdRule};
pub use norms::{binarize_norm, skt_norm_value, NormBand, NormTable, SktScore, NORM_AGE_RANGE};
