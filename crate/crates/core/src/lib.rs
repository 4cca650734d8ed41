//! Soft-confusion-matrix wrapping classifier for drifting data streams.
//!
//! A batch base classifier ([`base`]) is wrapped so that its supports are
//! corrected by a locally estimated soft confusion matrix ([`scm`]) built from
//! randomized-reference-classifier probabilities ([`rrc`]). In streaming use
//! ([`wrapper`]) the validation set is maintained by an ADWIN detector
//! ([`adwin`]). [`gen`] produces synthetic drifting streams and [`eval`]
//! scores and compares classifiers.

pub mod adwin;
pub mod base;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod gen;
pub mod kdtree;
pub mod rrc;
pub mod scm;
pub mod wrapper;

pub use data::{ClassLabel, Dataset, FeatureVector, LabeledInstance, SupportVector};
pub use error::{Error, Result};
