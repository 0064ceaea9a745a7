use crate::hos::ObjectnessField;
use crate::numeric;

use super::mask::{PixelLabel, TrainingMask};

fn check(field: &ObjectnessField, mask: &TrainingMask) {
    assert_eq!(field.extent(), mask.extent(), "field and mask extents differ");
}

/// `Σ_{x ∈ obj} e^{-H(x)}`.
pub fn foreground_loss(field: &ObjectnessField, mask: &TrainingMask) -> f64 {
    check(field, mask);
    numeric::sum(mask.objects().iter().map(|&o| (-field.get(o)).exp()))
}

/// `b · Σ_{x ∈ bg} max{0, e^{H(x)} − 1}`; don't-care pixels are skipped.
pub fn background_loss(field: &ObjectnessField, mask: &TrainingMask) -> f64 {
    check(field, mask);
    let b = mask.background_discount();
    b * numeric::sum(
        mask.labels()
            .iter()
            .zip(field.values())
            .filter(|(&l, &h)| l == PixelLabel::Background && h > 0.0)
            .map(|(_, &h)| h.exp_m1()),
    )
}

/// `b · Σ_{x ∈ bg} e^{H(x)}`.
pub fn smooth_background_loss(field: &ObjectnessField, mask: &TrainingMask) -> f64 {
    check(field, mask);
    let b = mask.background_discount();
    b * numeric::sum(
        mask.labels()
            .iter()
            .zip(field.values())
            .filter(|(&l, _)| l == PixelLabel::Background)
            .map(|(_, &h)| h.exp()),
    )
}

/// Smooth ablation objective `Σ_obj e^{-H} + b Σ_bg e^H`.
pub fn smooth_loss(field: &ObjectnessField, mask: &TrainingMask) -> f64 {
    foreground_loss(field, mask) + smooth_background_loss(field, mask)
}

/// Hinge objective `L_fg + L_bg`.
pub fn total_loss(field: &ObjectnessField, mask: &TrainingMask) -> f64 {
    foreground_loss(field, mask) + background_loss(field, mask)
}
