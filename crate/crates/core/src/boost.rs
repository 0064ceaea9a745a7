//! The training driver: candidate generation, threshold sweeps, selection
//! and accumulation, plus validation of the extraction parameters.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{self, EvalImage};
use crate::extract::{self, ExtractionMethod, ExtractionParams};
use crate::features::{FeatureDescriptor, FeatureSampler, FeatureSpace, Grammar, IntegralImage};
use crate::geometry::{GrayImage, Location};
use crate::hos::{filter_at_threshold, HosHypothesis, ObjectnessField, ScoredLocation};
use crate::kernel::{evidence_field, CorrelationKernel, EvidenceField, EvidenceMode, KernelShape};
use crate::lossopt::{
    background_loss, build_partition_multi, foreground_loss, smooth_background_loss, LossKind, SweepContext,
    SweepImage, SweepParams, SweepPoint, TrainingMask, DEFAULT_ALPHA_MAX,
};

/// Relative slack below which a candidate is not considered an improvement.
const IMPROVEMENT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub candidates_per_iteration: usize,
    pub grammar: Grammar,
    pub feature_space: FeatureSpace,
    pub kernel: CorrelationKernel,
    pub mode: EvidenceMode,
    pub dont_care_radius: f64,
    pub alpha_max: f64,
    /// Replaces the pooled `|obj| / |bg|` discount when set.
    pub background_discount: Option<f64>,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            candidates_per_iteration: 100,
            grammar: Grammar::Rich,
            feature_space: FeatureSpace::default(),
            kernel: CorrelationKernel::new(KernelShape::QuadraticFalloff, 3.0).expect("positive radius"),
            mode: EvidenceMode::Unique,
            dont_care_radius: 7.0,
            alpha_max: DEFAULT_ALPHA_MAX,
            background_discount: None,
            loss: LossKind::Hinge,
            seed: 0,
        }
    }
}

/// One labeled image.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub image: GrayImage,
    pub objects: Vec<Location>,
}

/// Per-iteration training log entry.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// One-based iteration index.
    pub iteration: usize,
    pub feature: FeatureDescriptor,
    pub threshold: f64,
    pub alpha: f64,
    pub shift: f64,
    /// Foreground loss of the accumulated fields.
    pub fg_loss: f64,
    /// Background term of the training objective.
    pub bg_loss: f64,
    pub total_loss: f64,
    /// Selection bound `L^s + L̂^α` of the chosen member.
    pub bound: f64,
    /// Exact objective predicted by the sweep's partition before accumulation.
    pub predicted_loss: f64,
    /// Hinged background loss of the accumulated fields.
    pub hinge_bg_loss: f64,
    /// Exponential background term of the accumulated fields.
    pub smooth_bg_loss: f64,
}

impl IterationRecord {
    /// Whitespace-separated log line.
    pub fn log_line(&self) -> String {
        format!(
            "iter={} feature={} theta={:e} alpha={:e} shift={:e} fg={:e} bg={:e} total={:e}",
            self.iteration,
            crate::io::model::format_descriptor(&self.feature),
            self.threshold,
            self.alpha,
            self.shift,
            self.fg_loss,
            self.bg_loss,
            self.total_loss
        )
    }
}

/// Loss state of the training set under the empty or a trained ensemble.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSnapshot {
    pub fg: f64,
    pub hinge_bg: f64,
    pub smooth_bg: f64,
}

impl LossSnapshot {
    fn of(fields: &[ObjectnessField], masks: &[TrainingMask]) -> Self {
        let mut s = LossSnapshot {
            fg: 0.0,
            hinge_bg: 0.0,
            smooth_bg: 0.0,
        };
        for (f, m) in fields.iter().zip(masks) {
            s.fg += foreground_loss(f, m);
            s.hinge_bg += background_loss(f, m);
            s.smooth_bg += smooth_background_loss(f, m);
        }
        s
    }

    pub fn background(&self, loss: LossKind) -> f64 {
        match loss {
            LossKind::Hinge => self.hinge_bg,
            LossKind::Smooth => self.smooth_bg,
        }
    }

    pub fn total(&self, loss: LossKind) -> f64 {
        self.fg + self.background(loss)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub members: Vec<HosHypothesis>,
    pub trace: Vec<IterationRecord>,
    pub extraction: ExtractionParams,
}

impl Ensemble {
    pub fn new(members: Vec<HosHypothesis>) -> Self {
        Self {
            members,
            trace: Vec::new(),
            extraction: ExtractionParams::default(),
        }
    }

    /// Master objectness field of an image.
    pub fn objectness(&self, image: &GrayImage) -> Result<ObjectnessField> {
        let ii = IntegralImage::new(image);
        let mut field = ObjectnessField::zeros(image.extent());
        for m in &self.members {
            let raw = m.feature.detect(&ii)?;
            field.accumulate(m, &raw)?;
        }
        Ok(field)
    }

    /// Final detections with the stored extraction parameters.
    pub fn detect(&self, image: &GrayImage) -> Result<Vec<ScoredLocation>> {
        Ok(extract::detect(&self.objectness(image)?, &self.extraction))
    }
}

/// Pooled background discount `Σ|obj| / Σ|bg|` (1 without background).
pub fn pooled_background_discount(masks: &[TrainingMask]) -> f64 {
    let obj: usize = masks.iter().map(|m| m.object_count()).sum();
    let bg: usize = masks.iter().map(|m| m.background_count()).sum();
    if bg == 0 {
        1.0
    } else {
        obj as f64 / bg as f64
    }
}

pub fn train(samples: &[TrainingSample], config: &TrainConfig) -> Result<Ensemble> {
    train_with_observer(samples, config, |_| {})
}

/// Trains an ensemble, reporting each iteration to `observer` as it lands.
pub fn train_with_observer<F>(samples: &[TrainingSample], config: &TrainConfig, mut observer: F) -> Result<Ensemble>
where
    F: FnMut(&IterationRecord),
{
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if !(config.alpha_max > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha_max must be positive, got {}", config.alpha_max)));
    }
    let mut masks = samples
        .iter()
        .map(|s| TrainingMask::new(s.image.extent(), &s.objects, config.dont_care_radius))
        .collect::<Result<Vec<_>>>()?;
    if masks.iter().all(|m| m.object_count() == 0) {
        return Err(Error::NoObjects);
    }
    let b = match config.background_discount {
        Some(b) if b > 0.0 && b.is_finite() => b,
        Some(b) => return Err(Error::InvalidParameter(format!("background discount must be positive, got {b}"))),
        None => pooled_background_discount(&masks),
    };
    for m in &mut masks {
        m.set_background_discount(b);
    }
    let integrals: Vec<IntegralImage> = samples.iter().map(|s| IntegralImage::new(&s.image)).collect();
    let mut fields: Vec<ObjectnessField> = samples.iter().map(|s| ObjectnessField::zeros(s.image.extent())).collect();
    let sampler = FeatureSampler::new(config.seed, config.grammar, config.feature_space);
    let params = SweepParams {
        kernel: config.kernel,
        mode: config.mode,
        b,
        alpha_max: config.alpha_max,
        loss: config.loss,
    };

    let mut ensemble = Ensemble::new(Vec::new());
    let mut current = LossSnapshot::of(&fields, &masks).total(config.loss);
    for t in 0..config.iterations {
        let images: Vec<SweepImage> = fields
            .iter()
            .zip(&masks)
            .map(|(field, mask)| SweepImage { field, mask })
            .collect();
        let ctx = SweepContext::new(&images, params.clone())?;
        let base = t as u64 * config.candidates_per_iteration as u64;
        let results: Vec<Option<(FeatureDescriptor, SweepPoint)>> = (0..config.candidates_per_iteration)
            .into_par_iter()
            .map(|c| evaluate_candidate(&ctx, &integrals, sampler.draw(base + c as u64)))
            .collect::<Result<_>>()?;
        let mut best: Option<(FeatureDescriptor, SweepPoint)> = None;
        for r in results.into_iter().flatten() {
            if best.as_ref().is_none_or(|b| r.1.bound < b.1.bound) {
                best = Some(r);
            }
        }
        let Some((feature, point)) = best else { break };
        if (point.alpha == 0.0 && point.shift == 0.0) || point.bound >= current - IMPROVEMENT_TOLERANCE * current {
            break;
        }

        let member = HosHypothesis {
            feature,
            threshold: point.threshold,
            alpha: point.alpha,
            shift: point.shift,
            kernel: config.kernel,
            mode: config.mode,
        };
        let evidence: Vec<EvidenceField> = integrals
            .iter()
            .zip(&fields)
            .map(|(ii, f)| {
                let kept = filter_at_threshold(&feature.detect(ii)?, member.threshold);
                evidence_field(f.extent(), &kept, &member.kernel, member.mode)
            })
            .collect::<Result<_>>()?;
        let partition = build_partition_multi(fields.iter().zip(&evidence).zip(&masks).map(|((f, e), m)| (f, e, m)));
        let predicted_loss = config.loss.exact_update_loss(&partition, b, member.alpha, member.shift);
        for (field, e) in fields.iter_mut().zip(&evidence) {
            field.accumulate_evidence(e, member.alpha, member.shift)?;
        }
        let snap = LossSnapshot::of(&fields, &masks);
        let record = IterationRecord {
            iteration: t + 1,
            feature,
            threshold: member.threshold,
            alpha: member.alpha,
            shift: member.shift,
            fg_loss: snap.fg,
            bg_loss: snap.background(config.loss),
            total_loss: snap.total(config.loss),
            bound: point.bound,
            predicted_loss,
            hinge_bg_loss: snap.hinge_bg,
            smooth_bg_loss: snap.smooth_bg,
        };
        current = record.total_loss;
        observer(&record);
        ensemble.members.push(member);
        ensemble.trace.push(record);
    }
    Ok(ensemble)
}

/// Sweeps one candidate; `None` when its window does not fit some image.
fn evaluate_candidate(
    ctx: &SweepContext,
    integrals: &[IntegralImage],
    feature: FeatureDescriptor,
) -> Result<Option<(FeatureDescriptor, SweepPoint)>> {
    let mut detections = Vec::with_capacity(integrals.len());
    for ii in integrals {
        match feature.detect(ii) {
            Ok(d) => detections.push(d),
            Err(Error::WindowTooLarge { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some((feature, ctx.sweep(&detections)?)))
}

/// Extraction settings tried during validation, in priority order.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationGrid {
    pub llm_radii: Vec<u32>,
    pub kde_radii: Vec<f64>,
}

impl Default for ValidationGrid {
    fn default() -> Self {
        Self {
            llm_radii: vec![0, 1, 2, 3],
            kde_radii: vec![2.0, 4.0, 6.0, 8.0],
        }
    }
}

impl ValidationGrid {
    pub fn llm_only() -> Self {
        Self {
            kde_radii: Vec::new(),
            ..Self::default()
        }
    }

    /// Grid points with threshold 0, LLM radii first, each list ascending.
    pub fn points(&self) -> Vec<ExtractionParams> {
        let mut llm = self.llm_radii.clone();
        llm.sort_unstable();
        let mut kde = self.kde_radii.clone();
        kde.sort_by(f64::total_cmp);
        let base = ExtractionParams::default();
        llm.into_iter()
            .map(|r| ExtractionParams {
                method: ExtractionMethod::Llm,
                smoothing_radius: r,
                ..base
            })
            .chain(kde.into_iter().map(|r| ExtractionParams {
                method: ExtractionMethod::Kde,
                kde_radius: r,
                ..base
            }))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Validation {
    pub best: ExtractionParams,
    pub best_ap: f64,
    /// Average precision of every grid point, in grid order.
    pub scores: Vec<(ExtractionParams, f64)>,
}

/// Picks the grid point with the highest average precision on `samples`;
/// ties keep the earliest point, i.e. the smallest radius.
pub fn validate(ensemble: &Ensemble, samples: &[TrainingSample], grid: &ValidationGrid, delta: f64) -> Result<Validation> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("validation set is empty".into()));
    }
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::InvalidParameter("validation grid is empty".into()));
    }
    let fields = samples
        .iter()
        .map(|s| ensemble.objectness(&s.image))
        .collect::<Result<Vec<_>>>()?;
    let mut scores = Vec::with_capacity(points.len());
    for p in points {
        let dets: Vec<Vec<ScoredLocation>> = fields.iter().map(|f| extract::detect(f, &p)).collect();
        let imgs: Vec<EvalImage> = dets
            .iter()
            .zip(samples)
            .map(|(d, s)| EvalImage {
                detections: d,
                truth: &s.objects,
            })
            .collect();
        scores.push((p, eval::average_precision(&imgs, delta)?));
    }
    let (best, best_ap) = scores
        .iter()
        .copied()
        .fold(None::<(ExtractionParams, f64)>, |acc, s| match acc {
            Some(a) if a.1 >= s.1 => Some(a),
            _ => Some(s),
        })
        .expect("grid is nonempty");
    Ok(Validation { best, best_ap, scores })
}
