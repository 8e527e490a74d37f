//! Cognitive-impairment screening experiments on speech from standardized
//! neuropsychological sub-tests and clinical interviews.
//!
//! The crate covers the whole path from a cohort manifest to a results table:
//! label derivation from raw test scores ([`scoring`]), segment extraction
//! ([`segmentation`]), functionals-over-LLD and pooled transformer-embedding
//! features ([`functionals`], [`embeddings`]), speaker-disjoint nested
//! cross-validation of RBF support vector machines ([`experiments`]),
//! synthetic cohorts for end-to-end checks ([`synth`]) and reporting
//! ([`report`]).

pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod experiments;
pub mod features;
pub mod functionals;
pub mod scoring;
pub mod report;
pub mod segmentation;
pub mod synth;
pub mod task;

pub use error::{Error, Result};
pub use task::{Impairment, Task};
