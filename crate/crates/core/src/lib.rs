//! Two-view focal length self-calibration.
//!
//! Given a fundamental matrix and weak priors on the intrinsics, [`prior::calibrate`]
//! finds the focal lengths and principal points nearest the priors that make
//! `K2ᵀ F K1` an essential matrix. Closed-form estimators, a robust
//! fundamental-matrix estimator and a synthetic benchmark live alongside.

pub mod closed_form;
pub mod epipolar;
pub mod error;
pub mod formats;
pub mod metrics;
pub mod poly;
pub mod solver;
pub mod prior;
pub mod robust;
pub mod synth;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/epipolar.md")]
    mod epipolar {}
    #[doc = include_str!("../../../book/src/closed-form.md")]
    mod closed_form {}
    #[doc = include_str!("../../../book/src/iterative.md")]
    mod iterative {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/robust.md")]
    mod robust {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
