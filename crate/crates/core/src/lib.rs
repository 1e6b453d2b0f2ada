pub mod comms;
pub mod dft;
pub mod ep;
pub mod error;
pub mod gaussian;
pub mod graph;
pub mod harness;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/gaussians.md")]
    mod gaussians {}
    #[doc = include_str!("../../../book/src/exact-posterior.md")]
    mod exact_posterior {}
    #[doc = include_str!("../../../book/src/fft-graph.md")]
    mod fft_graph {}
    #[doc = include_str!("../../../book/src/ep.md")]
    mod ep {}
    #[doc = include_str!("../../../book/src/isi.md")]
    mod isi {}
    #[doc = include_str!("../../../book/src/radar.md")]
    mod radar {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
