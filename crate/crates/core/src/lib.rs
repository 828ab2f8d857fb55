//! Time-image contrastive learning over precomputed image features: a time
//! encoder and an image adaptor trained so that adapted image embeddings
//! point at the embedding of their clock-time class.
//!
//! Shared domain types are re-exported at the crate root.

pub mod baselines;
pub mod curation;
pub mod encoders;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod retrieval;
pub mod synth;
pub mod time;
pub mod train;

pub use curation::{DbscanConfig, GrayImage, NightWindow, SnrReport, SplitRatio};
pub use error::{Error, Result};
pub use metrics::{EvalReport, Prediction};
pub use model::{Activation, ModelConfig, ModelParams, TimeInputKind};
pub use retrieval::{GalleryIndex, Query, RetrievalReport, SearchOptions};
pub use synth::SynthSpec;
pub use time::{ClockTime, Dataset, FeatureRecord, TimeLabelSpace};
pub use train::{LossMode, TrainConfig};
