pub mod dataset;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod hash;
pub mod heads;
pub mod model;
pub mod numerics;
pub mod patch;
pub mod synth;
pub mod training;

pub use error::{Error, Result};

/// The guide's chapters, compiled so their snippets run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tokenization.md")]
    mod tokenization {}
    #[doc = include_str!("../../../book/src/encoder.md")]
    mod encoder {}
    #[doc = include_str!("../../../book/src/pretraining.md")]
    mod pretraining {}
    #[doc = include_str!("../../../book/src/finetuning.md")]
    mod finetuning {}
    #[doc = include_str!("../../../book/src/ranging.md")]
    mod ranging {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
