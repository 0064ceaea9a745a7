//! Confidence-rated detections, threshold filtering, Hit-or-Shift weak
//! hypotheses and the accumulated objectness field of the master detector.

use crate::error::Result;
use crate::features::FeatureDescriptor;
use crate::geometry::{Extent, Location};
use crate::kernel::{evidence, evidence_field, CorrelationKernel, EvidenceField, EvidenceMode};
use crate::peaks;

/// A predicted pixel location with a real-valued confidence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredLocation {
    pub x: u32,
    pub y: u32,
    pub confidence: f64,
}

impl ScoredLocation {
    pub const fn new(x: u32, y: u32, confidence: f64) -> Self {
        Self { x, y, confidence }
    }

    #[inline]
    pub fn location(&self) -> Location {
        Location::new(self.x, self.y)
    }
}

/// Locations with confidence `≥ threshold`, confidence-descending with
/// row-major tie-break.
pub fn filter_at_threshold(detections: &[ScoredLocation], threshold: f64) -> Vec<Location> {
    let mut kept: Vec<ScoredLocation> = detections
        .iter()
        .copied()
        .filter(|d| d.confidence >= threshold)
        .collect();
    peaks::sort_by_confidence(&mut kept);
    kept.into_iter().map(|d| d.location()).collect()
}

/// A weak detector with its trained threshold, hit weight and shift.
///
/// Predicts `alpha * f(x)` wherever the thresholded detections give positive
/// evidence `f(x)`, and `-shift` everywhere else.
#[derive(Clone, Debug, PartialEq)]
pub struct HosHypothesis {
    pub feature: FeatureDescriptor,
    pub threshold: f64,
    pub alpha: f64,
    pub shift: f64,
    pub kernel: CorrelationKernel,
    pub mode: EvidenceMode,
}

impl HosHypothesis {
    /// Evidence field of this member's thresholded detections.
    pub fn evidence(&self, extent: Extent, raw: &[ScoredLocation]) -> Result<EvidenceField> {
        let kept = filter_at_threshold(raw, self.threshold);
        evidence_field(extent, &kept, &self.kernel, self.mode)
    }
}

/// HoS output `f'(x)` of a single member at one location.
pub fn hos_apply(h: &HosHypothesis, raw: &[ScoredLocation], x: Location) -> f64 {
    let kept = filter_at_threshold(raw, h.threshold);
    let f = evidence(x, &kept, &h.kernel, h.mode);
    if f > 0.0 {
        h.alpha * f
    } else {
        -h.shift
    }
}

/// Dense per-pixel master hypothesis `H_t` over one image.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectnessField {
    extent: Extent,
    values: Vec<f64>,
    iterations: usize,
}

impl ObjectnessField {
    /// The empty ensemble: `H ≡ 0`.
    pub fn zeros(extent: Extent) -> Self {
        Self {
            extent,
            values: vec![0.0; extent.len()],
            iterations: 0,
        }
    }

    /// Wraps precomputed values (e.g. a smoothed field).
    pub fn from_values(extent: Extent, values: Vec<f64>, iterations: usize) -> Self {
        assert_eq!(values.len(), extent.len(), "raster size mismatch");
        Self {
            extent,
            values,
            iterations,
        }
    }

    pub fn extent(&self) -> Extent {
        self.extent
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, loc: Location) -> f64 {
        self.values[self.extent.index(loc)]
    }

    #[inline]
    pub fn get_index(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Adds one member's output computed from its raw detections.
    pub fn accumulate(&mut self, h: &HosHypothesis, raw: &[ScoredLocation]) -> Result<()> {
        let field = h.evidence(self.extent, raw)?;
        self.accumulate_evidence(&field, h.alpha, h.shift)
    }

    /// Adds `alpha * f` on the evidence support and subtracts `shift` elsewhere.
    pub fn accumulate_evidence(&mut self, f: &EvidenceField, alpha: f64, shift: f64) -> Result<()> {
        self.extent.expect_same(f.extent())?;
        let mut support = f.iter().peekable();
        for (i, h) in self.values.iter_mut().enumerate() {
            match support.peek() {
                Some(&(j, fx)) if j == i => {
                    *h += alpha * fx;
                    support.next();
                }
                _ => *h += -shift,
            }
        }
        self.iterations += 1;
        Ok(())
    }

    /// Non-consuming variant of [`ObjectnessField::accumulate`].
    pub fn accumulated(&self, h: &HosHypothesis, raw: &[ScoredLocation]) -> Result<Self> {
        let mut next = self.clone();
        next.accumulate(h, raw)?;
        Ok(next)
    }
}

/// Positive local maxima of the master hypothesis, confidence-descending.
pub fn master_detections(field: &ObjectnessField) -> Vec<ScoredLocation> {
    peaks::local_maxima_where(field.values(), field.extent(), |v| v > 0.0)
}
