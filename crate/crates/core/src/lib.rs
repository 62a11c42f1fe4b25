//! Multi-scale siamese embedding networks for image retrieval.
//!
//! The crate covers the whole pipeline: a small NCHW tensor library with
//! hand-written gradients, the multi-scale network, contrastive and angular
//! losses, fractional `L_k` distances, histogram-based pair sampling,
//! RMSProp training, exact nearest-neighbour retrieval and the file
//! formats that tie them together.

pub mod config;
pub mod dataset;
pub mod distance;
pub mod error;
pub mod index;
pub mod io;
pub mod losses;
pub mod net;
pub mod sampling;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

// The book's snippets run as doctests, one module per chapter so a failure
// points at its chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/distances.md")]
    mod distances {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
