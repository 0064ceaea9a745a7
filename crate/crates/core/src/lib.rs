//! Location-based boosting of Hit-or-Shift (HoS) weak object detectors.
//!
//! A master detector is built as a sum of weak detectors, each of which
//! thresholds a confidence-rated list of `(x, y)` predictions, adds
//! `alpha * f(x)` near the surviving predictions and subtracts a shift `s`
//! everywhere else. Training minimizes a spatial loss that charges
//! `exp(-H)` on labeled object centers and a hinged `exp(H) - 1` on
//! background pixels, so background that is already predicted negative
//! costs nothing.
//!
//! Module map:
//!
//! - [`kernel`] – correlation kernels and the evidence they induce.
//! - [`hos`] – threshold filtering, HoS hypotheses and the objectness field.
//! - [`lossopt`] – loss terms, the four-way partition, the closed-form
//!   shift/alpha optimizers and the incremental threshold sweep.
//! - [`features`] – random Haar-like feature generation and response maps.
//! - [`boost`] – the training driver and validation of extraction parameters.
//! - [`extract`] – LLM and KDE detection extraction from a master field.
//! - [`eval`] – nearest-neighbor matching, truncated ROC and average precision.
//! - [`io`] – graymap images, datasets, model files and synthetic data.

pub mod boost;
pub mod error;
pub mod eval;
pub mod extract;
pub mod features;
pub mod geometry;
pub mod hos;
pub mod io;
pub mod kernel;
pub mod lossopt;
pub mod numeric;
pub mod peaks;

pub use error::{Error, Result};
pub use geometry::{Extent, GrayImage, Location};
