//! Mostly-unsupervised word segmentation from character n-gram statistics.
//!
//! The pipeline: build an [`NGramTable`] from raw text, segment delimiter-free
//! sequences with [`tango`] voting (or the [`sst`] mutual-information
//! baseline), score output against two-level gold bracketings with
//! [`metrics`], and pick parameters with the grid search in [`trainer`].

pub mod annotation;
pub mod error;
mod kv;
pub mod metrics;
pub mod ngram;
pub mod sequence;
pub mod sst;
pub mod synth;
pub mod tango;
pub mod trainer;

pub use annotation::TwoLevelAnnotation;
pub use error::{Error, Result};
pub use ngram::{build_table, extract_sequences, CharClass, CharFilter, Corpus, NGramTable};
pub use sequence::{Bracket, FlatSegmentation, Sequence};
pub use sst::{BigramStats, DtsExtremum, Estimator, SstParams};
pub use tango::{Tango, TangoParams, VoteProfile};
pub use synth::{Generator, Lexicon, SynthConfig};
pub use trainer::{train_sst, train_tango, Criterion, SstGrid, TangoGrid, TrainResult};
