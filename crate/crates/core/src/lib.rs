//! Capability-aware prompt reformulation.
//!
//! Mines reformulation pairs from text-to-image interaction logs, turns them
//! into conditioned training corpora, tunes the capability delta applied at
//! inference time, and evaluates reformulation policies. A deterministic
//! synthetic world stands in for the generator, scorers and reformulation
//! model; remote HTTP backends plug in through the same traits.

pub mod backends;
pub mod capability;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod log_store;
pub mod numeric;
pub mod surrogate;
pub mod text;
pub mod tuner;

pub use capability::{CapabilityCondition, QualityScores, QuantizerSpec, ScoreBins};
pub use error::{CaprError, Result};
pub use text::StyleLexicon;
pub use tuner::DeltaVector;

pub type FeatureRange = capability::FeatureRange<f64>;
pub type GpHyper = tuner::GpHyper<f64>;
pub type GpState = tuner::GpState<f64>;
pub type TTest = evaluation::TTest<f64>;
