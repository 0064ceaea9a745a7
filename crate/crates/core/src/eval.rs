//! Nearest-neighbor detection scoring, truncated ROC curves and average
//! precision.

use crate::error::{Error, Result};
use crate::geometry::Location;
use crate::hos::ScoredLocation;
use crate::peaks;

/// Default matching distance in pixels.
pub const DEFAULT_DELTA: f64 = 10.0;
/// Default false-positive-rate bound of the truncated ROC.
pub const DEFAULT_TRUNCATION: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    TruePositive,
    FalsePositive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    /// One verdict per detection, in input order.
    pub verdicts: Vec<Verdict>,
    /// Per truth location, whether some detection claimed it.
    pub found: Vec<bool>,
    pub delta: f64,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.verdicts.iter().filter(|&&v| v == Verdict::TruePositive).count()
    }

    pub fn false_positives(&self) -> usize {
        self.verdicts.len() - self.true_positives()
    }
}

/// Greedy matcher state for one image.
struct Matcher<'a> {
    truth: &'a [Location],
    claimed: Vec<bool>,
    delta_sq: f64,
}

impl<'a> Matcher<'a> {
    fn new(truth: &'a [Location], delta: f64) -> Self {
        Self {
            truth,
            claimed: vec![false; truth.len()],
            delta_sq: delta * delta,
        }
    }

    /// Claims the nearest unmatched truth strictly within `δ`, first index
    /// on distance ties.
    fn offer(&mut self, at: Location) -> Verdict {
        let mut best: Option<(f64, usize)> = None;
        for (i, t) in self.truth.iter().enumerate() {
            if self.claimed[i] {
                continue;
            }
            let d = t.distance_sq(at);
            if d < self.delta_sq && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        match best {
            Some((_, i)) => {
                self.claimed[i] = true;
                Verdict::TruePositive
            }
            None => Verdict::FalsePositive,
        }
    }
}

/// Scores confidence-sorted detections against truth locations.
pub fn match_detections(detections: &[ScoredLocation], truth: &[Location], delta: f64) -> MatchResult {
    let mut m = Matcher::new(truth, delta);
    let verdicts = detections.iter().map(|d| m.offer(d.location())).collect();
    MatchResult {
        verdicts,
        found: m.claimed,
        delta,
    }
}

/// Detections and ground truth of one evaluation image.
#[derive(Clone, Copy, Debug)]
pub struct EvalImage<'a> {
    pub detections: &'a [ScoredLocation],
    pub truth: &'a [Location],
}

/// Pooled counts after admitting every detection with confidence `≥ threshold`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepCount {
    pub threshold: f64,
    pub true_positives: usize,
    pub false_positives: usize,
}

/// Pooled TP/FP counts at every distinct confidence, highest first,
/// preceded by the empty threshold `+∞`.
pub fn threshold_sweep(images: &[EvalImage], delta: f64) -> Vec<SweepCount> {
    let mut all: Vec<(usize, ScoredLocation)> = Vec::new();
    for (i, img) in images.iter().enumerate() {
        let mut dets = img.detections.to_vec();
        peaks::sort_by_confidence(&mut dets);
        all.extend(dets.into_iter().map(|d| (i, d)));
    }
    all.sort_by(|a, b| b.1.confidence.total_cmp(&a.1.confidence).then(a.0.cmp(&b.0)));
    let mut matchers: Vec<Matcher> = images.iter().map(|img| Matcher::new(img.truth, delta)).collect();
    let mut out = vec![SweepCount {
        threshold: f64::INFINITY,
        true_positives: 0,
        false_positives: 0,
    }];
    let (mut tp, mut fp) = (0, 0);
    for (n, &(i, d)) in all.iter().enumerate() {
        match matchers[i].offer(d.location()) {
            Verdict::TruePositive => tp += 1,
            Verdict::FalsePositive => fp += 1,
        }
        if all.get(n + 1).is_none_or(|next| next.1.confidence != d.confidence) {
            out.push(SweepCount {
                threshold: d.confidence,
                true_positives: tp,
                false_positives: fp,
            });
        }
    }
    out
}

fn total_objects(images: &[EvalImage]) -> Result<usize> {
    let n: usize = images.iter().map(|i| i.truth.len()).sum();
    if n == 0 {
        Err(Error::NoObjects)
    } else {
        Ok(n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    /// False positives per ground-truth object.
    pub fpr: f64,
    pub detection_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub delta: f64,
    pub truncation: f64,
    /// Area up to `truncation`, normalized to `[0, 1]`.
    pub area: f64,
}

impl RocCurve {
    /// Highest detection rate among points with `fpr ≤ max_fpr`.
    pub fn detection_rate_at(&self, max_fpr: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.fpr <= max_fpr)
            .map(|p| p.detection_rate)
            .fold(0.0, f64::max)
    }
}

/// Truncated ROC over a global confidence threshold.
///
/// The area is the trapezoidal area of the retained points plus a
/// horizontal run from the last retained point out to `truncation`,
/// divided by `truncation`.
pub fn roc(images: &[EvalImage], delta: f64, truncation: f64) -> Result<RocCurve> {
    if !(truncation > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation must be positive, got {truncation}")));
    }
    let n = total_objects(images)? as f64;
    let points: Vec<RocPoint> = threshold_sweep(images, delta)
        .into_iter()
        .map(|c| RocPoint {
            threshold: c.threshold,
            fpr: c.false_positives as f64 / n,
            detection_rate: c.true_positives as f64 / n,
        })
        .take_while(|p| p.fpr <= truncation)
        .collect();
    let mut area = 0.0;
    for w in points.windows(2) {
        area += (w[1].fpr - w[0].fpr) * (w[0].detection_rate + w[1].detection_rate) / 2.0;
    }
    let last = points.last().expect("the empty threshold is always retained");
    area += (truncation - last.fpr) * last.detection_rate;
    Ok(RocCurve {
        points,
        delta,
        truncation,
        area: area / truncation,
    })
}

/// `Σ_k (recall_k − recall_{k−1}) · precision_k` over distinct thresholds.
pub fn average_precision(images: &[EvalImage], delta: f64) -> Result<f64> {
    let n = total_objects(images)? as f64;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for c in threshold_sweep(images, delta).into_iter().skip(1) {
        let recall = c.true_positives as f64 / n;
        let precision = c.true_positives as f64 / (c.true_positives + c.false_positives) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loc(x: u32, y: u32) -> Location {
        Location::new(x, y)
    }

    #[test]
    fn single_detection_on_truth() {
        let m = match_detections(&[ScoredLocation::new(3, 3, 1.0)], &[loc(3, 3)], 10.0);
        assert_eq!((m.true_positives(), m.false_positives()), (1, 0));
        assert_eq!(m.found, vec![true]);
    }

    #[test]
    fn duplicate_detection_is_false_positive() {
        let dets = [ScoredLocation::new(3, 3, 1.0), ScoredLocation::new(5, 3, 0.9)];
        let m = match_detections(&dets, &[loc(4, 3)], 10.0);
        assert_eq!(m.verdicts, vec![Verdict::TruePositive, Verdict::FalsePositive]);
    }

    #[test]
    fn exactly_delta_away_is_false_positive() {
        let m = match_detections(&[ScoredLocation::new(10, 0, 1.0)], &[loc(0, 0)], 10.0);
        assert_eq!(m.verdicts, vec![Verdict::FalsePositive]);
    }

    #[test]
    fn claims_nearest_unmatched() {
        let dets = [ScoredLocation::new(5, 0, 1.0), ScoredLocation::new(1, 0, 0.5)];
        let m = match_detections(&dets, &[loc(0, 0), loc(6, 0)], 10.0);
        assert_eq!(m.true_positives(), 2);
    }

    #[test]
    fn perfect_and_empty_detectors() {
        let truth = [loc(5, 5), loc(40, 40)];
        let dets = [ScoredLocation::new(5, 5, 2.0), ScoredLocation::new(40, 40, 1.0)];
        let imgs = [EvalImage { detections: &dets, truth: &truth }];
        let c = roc(&imgs, 10.0, 2.0).unwrap();
        assert_eq!(c.area, 1.0);
        assert_eq!(average_precision(&imgs, 10.0).unwrap(), 1.0);
        let none = [EvalImage { detections: &[], truth: &truth }];
        let c = roc(&none, 10.0, 2.0).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.area, 0.0);
        assert_eq!(average_precision(&none, 10.0).unwrap(), 0.0);
        let empty_truth = [EvalImage { detections: &dets, truth: &[] }];
        assert!(matches!(roc(&empty_truth, 10.0, 2.0), Err(Error::NoObjects)));
    }

    #[test]
    fn pooled_over_images() {
        let t1 = [loc(0, 0)];
        let t2 = [loc(0, 0)];
        let d1 = [ScoredLocation::new(0, 0, 0.9)];
        let d2 = [ScoredLocation::new(30, 30, 0.8), ScoredLocation::new(0, 1, 0.7)];
        let imgs = [
            EvalImage { detections: &d1, truth: &t1 },
            EvalImage { detections: &d2, truth: &t2 },
        ];
        let sweep = threshold_sweep(&imgs, 10.0);
        let counts: Vec<(usize, usize)> = sweep.iter().map(|c| (c.true_positives, c.false_positives)).collect();
        assert_eq!(counts, vec![(0, 0), (1, 0), (1, 1), (2, 1)]);
    }
}
