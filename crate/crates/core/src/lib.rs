//! Hybrid quantum–classical machine-learned interatomic potentials.

pub mod analysis;
pub mod equivariant;
mod error;
pub mod geometry;
pub mod linalg;
pub mod potential;
pub mod real;
pub mod reference_sw;
pub mod rng;
pub mod simulate;
pub mod training;
pub mod vqc;

pub use error::{Error, Result};

// The guide's chapters run as doc-tests so their snippets stay compilable.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/equivariance.md")]
    mod equivariance {}
    #[doc = include_str!("../../../book/src/circuits.md")]
    mod circuits {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
