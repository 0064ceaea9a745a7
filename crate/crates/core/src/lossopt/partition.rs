use crate::hos::ObjectnessField;
use crate::kernel::EvidenceField;
use crate::numeric::{self, CompensatedSum};

use super::mask::{PixelLabel, TrainingMask};

/// One masked pixel: current objectness `h` and candidate evidence `f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub image: u32,
    pub index: u32,
    pub h: f64,
    pub f: f64,
}

impl Sample {
    /// A free-standing sample, for building partitions by hand.
    pub fn new(h: f64, f: f64) -> Self {
        Self { image: 0, index: 0, h, f }
    }
}

/// Masked pixels split by label and by whether the candidate's evidence is
/// positive (`fg⁺`, `bg⁺`) or zero (`fg⁰`, `bg⁰`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossPartition {
    pub fg_pos: Vec<Sample>,
    pub bg_pos: Vec<Sample>,
    pub fg_zero: Vec<Sample>,
    pub bg_zero: Vec<Sample>,
    v: f64,
}

impl LossPartition {
    /// Builds a partition from explicit sets. Samples in the zero sets must
    /// have `f == 0` and samples in the positive sets `f > 0`.
    pub fn from_sets(fg_pos: Vec<Sample>, bg_pos: Vec<Sample>, fg_zero: Vec<Sample>, bg_zero: Vec<Sample>) -> Self {
        debug_assert!(fg_pos.iter().chain(&bg_pos).all(|s| s.f > 0.0 && s.f <= 1.0));
        debug_assert!(fg_zero.iter().chain(&bg_zero).all(|s| s.f == 0.0));
        let v = numeric::sum(fg_zero.iter().map(|s| (-s.h).exp()));
        Self {
            fg_pos,
            bg_pos,
            fg_zero,
            bg_zero,
            v,
        }
    }

    /// `V = Σ_{fg⁰} e^{-H}`.
    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn len(&self) -> usize {
        self.fg_pos.len() + self.bg_pos.len() + self.fg_zero.len() + self.bg_zero.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn extend(&mut self, other: LossPartition) {
        self.fg_pos.extend(other.fg_pos);
        self.bg_pos.extend(other.bg_pos);
        self.fg_zero.extend(other.fg_zero);
        self.bg_zero.extend(other.bg_zero);
    }
}

fn partition_image(image: u32, field: &ObjectnessField, evidence: &EvidenceField, mask: &TrainingMask) -> LossPartition {
    assert_eq!(field.extent(), mask.extent(), "field and mask extents differ");
    assert_eq!(evidence.extent(), mask.extent(), "evidence and mask extents differ");
    let mut p = LossPartition::default();
    for (i, &label) in mask.labels().iter().enumerate() {
        let f = evidence.get_index(i);
        let sample = Sample {
            image,
            index: i as u32,
            h: field.get_index(i),
            f,
        };
        match (label, f > 0.0) {
            (PixelLabel::Object, true) => p.fg_pos.push(sample),
            (PixelLabel::Object, false) => p.fg_zero.push(sample),
            (PixelLabel::Background, true) => p.bg_pos.push(sample),
            (PixelLabel::Background, false) => p.bg_zero.push(sample),
            (PixelLabel::DontCare, _) => {}
        }
    }
    p
}

/// Partition of one image's masked pixels by a candidate's evidence.
pub fn build_partition(field: &ObjectnessField, evidence: &EvidenceField, mask: &TrainingMask) -> LossPartition {
    let p = partition_image(0, field, evidence, mask);
    LossPartition::from_sets(p.fg_pos, p.bg_pos, p.fg_zero, p.bg_zero)
}

/// Union of per-image partitions, tagging each sample with its image.
pub fn build_partition_multi<'a, I>(images: I) -> LossPartition
where
    I: IntoIterator<Item = (&'a ObjectnessField, &'a EvidenceField, &'a TrainingMask)>,
{
    let mut all = LossPartition::default();
    for (i, (field, evidence, mask)) in images.into_iter().enumerate() {
        all.extend(partition_image(i as u32, field, evidence, mask));
    }
    LossPartition::from_sets(all.fg_pos, all.bg_pos, all.fg_zero, all.bg_zero)
}

/// `L^s(s) = V e^s + b Σ_{bg⁰} max{0, e^{H−s} − 1}`.
pub fn shift_loss(p: &LossPartition, b: f64, s: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    for x in &p.bg_zero {
        if x.h > s {
            acc.add((x.h - s).exp_m1());
        }
    }
    p.v * s.exp() + b * acc.value()
}

/// Exact alpha loss
/// `Σ_{fg⁺} e^{-αf−H} + b Σ_{bg⁺} max{0, e^{αf+H} − 1}`.
pub fn alpha_loss(p: &LossPartition, b: f64, alpha: f64) -> f64 {
    let fg = numeric::sum(p.fg_pos.iter().map(|x| (-alpha * x.f - x.h).exp()));
    let bg = numeric::sum(p.bg_pos.iter().map(|x| (alpha * x.f + x.h).exp_m1().max(0.0)));
    fg + b * bg
}

/// Convex overestimate of [`alpha_loss`] obtained by bounding
/// `e^{±αf} ≤ 1 − f + f e^{±α}` for `f ∈ [0, 1]`.
pub fn alpha_overestimate(p: &LossPartition, b: f64, alpha: f64) -> f64 {
    let (em, ep) = ((-alpha).exp(), alpha.exp());
    let fg = numeric::sum(p.fg_pos.iter().map(|x| (-x.h).exp() * (1.0 - x.f + x.f * em)));
    let bg = numeric::sum(
        p.bg_pos
            .iter()
            .map(|x| (x.h.exp() * (1.0 - x.f + x.f * ep) - 1.0).max(0.0)),
    );
    fg + b * bg
}

/// Shift part of the smooth objective: `V e^s + b e^{-s} Σ_{bg⁰} e^H`.
pub fn smooth_shift_loss(p: &LossPartition, b: f64, s: f64) -> f64 {
    let w = numeric::sum(p.bg_zero.iter().map(|x| x.h.exp()));
    p.v * s.exp() + b * w * (-s).exp()
}

/// Alpha part of the smooth objective, exact.
pub fn smooth_alpha_loss(p: &LossPartition, b: f64, alpha: f64) -> f64 {
    let fg = numeric::sum(p.fg_pos.iter().map(|x| (-alpha * x.f - x.h).exp()));
    let bg = numeric::sum(p.bg_pos.iter().map(|x| (alpha * x.f + x.h).exp()));
    fg + b * bg
}

/// Linearized overestimate of [`smooth_alpha_loss`].
pub fn smooth_alpha_overestimate(p: &LossPartition, b: f64, alpha: f64) -> f64 {
    let (em, ep) = ((-alpha).exp(), alpha.exp());
    let fg = numeric::sum(p.fg_pos.iter().map(|x| (-x.h).exp() * (1.0 - x.f + x.f * em)));
    let bg = numeric::sum(p.bg_pos.iter().map(|x| x.h.exp() * (1.0 - x.f + x.f * ep)));
    fg + b * bg
}
