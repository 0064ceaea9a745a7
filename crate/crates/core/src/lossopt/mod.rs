//! Spatial loss, the four-way partition, closed-form shift and alpha
//! optimizers, and the incremental threshold sweep.

mod alpha;
mod loss;
mod mask;
mod partition;
mod shift;
mod sweep;

use std::fmt;
use std::str::FromStr;

pub use alpha::{
    optimize_alpha, optimize_alpha_flat, optimize_alpha_smooth, AlphaCell, AlphaOptState, AlphaSolution,
};
pub use loss::{background_loss, foreground_loss, smooth_background_loss, smooth_loss, total_loss};
pub use mask::{PixelLabel, TrainingMask};
pub use partition::{
    alpha_loss, alpha_overestimate, build_partition, build_partition_multi, shift_loss, smooth_alpha_loss,
    smooth_alpha_overestimate, smooth_shift_loss, LossPartition, Sample,
};
pub use shift::{optimize_shift, optimize_shift_smooth, ShiftOptState, ShiftSolution};
pub use sweep::{SweepContext, SweepImage, SweepParams, SweepPoint};

/// Default cap on a single member's hit weight.
pub const DEFAULT_ALPHA_MAX: f64 = 10.0;

/// Which objective the optimizers minimize.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `Σ_obj e^{-H} + b Σ_bg max{0, e^H − 1}`.
    Hinge,
    /// `Σ_obj e^{-H} + b Σ_bg e^H`.
    Smooth,
}

impl LossKind {
    pub fn tag(&self) -> &'static str {
        match self {
            LossKind::Hinge => "hinge",
            LossKind::Smooth => "smooth",
        }
    }

    /// Optimal `(s, α)` for a fixed partition under this objective.
    pub fn optimize(&self, partition: &LossPartition, b: f64, alpha_max: f64) -> (ShiftSolution, AlphaSolution) {
        match self {
            LossKind::Hinge => (optimize_shift(partition, b), optimize_alpha(partition, b, alpha_max)),
            LossKind::Smooth => (
                optimize_shift_smooth(partition, b, alpha_max),
                optimize_alpha_smooth(partition, b, alpha_max),
            ),
        }
    }

    /// Exact (non-overestimated) objective after adding a member with
    /// parameters `(alpha, shift)` whose evidence produced `partition`.
    pub fn exact_update_loss(&self, partition: &LossPartition, b: f64, alpha: f64, shift: f64) -> f64 {
        match self {
            LossKind::Hinge => shift_loss(partition, b, shift) + alpha_loss(partition, b, alpha),
            LossKind::Smooth => smooth_shift_loss(partition, b, shift) + smooth_alpha_loss(partition, b, alpha),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hinge" => Ok(LossKind::Hinge),
            "smooth" => Ok(LossKind::Smooth),
            other => Err(format!("unknown loss `{other}`")),
        }
    }
}
