pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod label;
pub mod model;
pub mod proba;
pub mod rng;
pub mod sweep;
pub mod synth;
pub mod tensor;
pub mod tokenizer;
pub mod training;

pub use error::{Error, Result};
pub use label::{Emotion, NUM_CLASSES};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/tokenizer.md")]
    struct Tokenizer;
    #[doc = include_str!("../../../book/src/training.md")]
    struct Training;
    #[doc = include_str!("../../../book/src/ensemble.md")]
    struct Ensemble;
    #[doc = include_str!("../../../book/src/analysis.md")]
    struct Analysis;
    #[doc = include_str!("../../../book/src/formats.md")]
    struct Formats;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
