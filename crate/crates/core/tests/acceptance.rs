//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use lbboost::boost::{self, TrainConfig, TrainingSample, ValidationGrid};
use lbboost::eval::{self, match_detections, EvalImage, Verdict};
use lbboost::features::{FeatureSampler, Grammar, IntegralImage};
use lbboost::hos::{filter_at_threshold, ObjectnessField, ScoredLocation};
use lbboost::io::dataset::Partition;
use lbboost::io::model::format_model;
use lbboost::io::results::{format_detections, ImageDetections};
use lbboost::io::synth::{synth, SynthConfig};
use lbboost::kernel::{evidence_field, CorrelationKernel, EvidenceMode, KernelShape};
use lbboost::lossopt::{
    alpha_loss, alpha_overestimate, build_partition_multi, optimize_alpha, optimize_alpha_flat, optimize_shift,
    LossKind, LossPartition, Sample, SweepContext, SweepImage, SweepParams, TrainingMask,
};
use lbboost::Location;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DISCOUNTS: [f64; 3] = [0.01, 0.1, 1.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn samples(rng: &mut ChaCha8Rng, max: usize, f: impl Fn(&mut ChaCha8Rng) -> f64) -> Vec<Sample> {
    (0..rng.gen_range(0..=max))
        .map(|_| {
            let h = rng.gen_range(-3.0..=3.0);
            let fv = f(rng);
            Sample::new(h, fv)
        })
        .collect()
}

fn shift_instance(rng: &mut ChaCha8Rng) -> (LossPartition, f64) {
    let fg0 = samples(rng, 20, |_| 0.0);
    let bg0 = samples(rng, 50, |_| 0.0);
    let b = DISCOUNTS[rng.gen_range(0..3)];
    (LossPartition::from_sets(vec![], vec![], fg0, bg0), b)
}

fn alpha_instance(rng: &mut ChaCha8Rng, flat: bool) -> (LossPartition, f64) {
    let f = |r: &mut ChaCha8Rng| if flat { 1.0 } else { 1.0 - r.gen_range(0.0..1.0) };
    let fgp = samples(rng, 20, f);
    let bgp = samples(rng, 50, f);
    let b = DISCOUNTS[rng.gen_range(0..3)];
    (LossPartition::from_sets(fgp, bgp, vec![], vec![]), b)
}

/// Minimum of a convex `loss` on `[0, hi]`: a grid of step `1e-4`, then a
/// ternary search over the grid cells adjacent to the best grid point.
fn grid_min(hi: f64, loss: impl Fn(f64) -> f64) -> f64 {
    const STEP: f64 = 1e-4;
    let n = (hi / STEP).round() as usize;
    let best = (0..=n)
        .map(|i| i as f64 * STEP)
        .min_by(|a, b| loss(*a).total_cmp(&loss(*b)))
        .expect("nonempty grid");
    let (mut lo, mut up) = ((best - STEP).max(0.0), (best + STEP).min(hi));
    for _ in 0..100 {
        let (m1, m2) = (lo + (up - lo) / 3.0, up - (up - lo) / 3.0);
        if loss(m1) <= loss(m2) {
            up = m2;
        } else {
            lo = m1;
        }
    }
    loss(lo).min(loss(best))
}

/// Oracle for `Σ_{fg⁰} e^{s−H} + b Σ_{bg⁰} max{0, e^{H−s} − 1}` over `s ∈ [0, 6]`.
fn shift_grid(p: &LossPartition, b: f64) -> f64 {
    let fg: f64 = p.fg_zero.iter().map(|s| (-s.h).exp()).sum();
    let bg: Vec<f64> = p.bg_zero.iter().map(|s| s.h.exp()).collect();
    grid_min(6.0, |s| {
        let down = (-s).exp();
        fg * s.exp() + b * bg.iter().map(|e| (e * down - 1.0).max(0.0)).sum::<f64>()
    })
}

/// Oracle for the flat-kernel alpha loss over `α ∈ [0, 10]`.
fn alpha_grid_flat(p: &LossPartition, b: f64) -> f64 {
    let fg: f64 = p.fg_pos.iter().map(|s| (-s.h).exp()).sum();
    let bg: Vec<f64> = p.bg_pos.iter().map(|s| s.h.exp()).collect();
    grid_min(10.0, |a| {
        let up = a.exp();
        fg * (-a).exp() + b * bg.iter().map(|e| (e * up - 1.0).max(0.0)).sum::<f64>()
    })
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (p, b) = shift_instance(&mut rng);
        let got = optimize_shift(&p, b);
        worst = worst.max((got.loss - shift_grid(&p, b)).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && elapsed.as_secs_f64() < 5.0,
        format!("max |opt − grid| = {worst:.2e}, {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut agree, mut grid) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let (p, b) = alpha_instance(&mut rng, true);
        let flat = optimize_alpha_flat(&p, b, 10.0);
        let general = optimize_alpha(&p, b, 10.0);
        agree = agree.max((flat.loss - general.loss).abs());
        grid = grid.max((flat.loss - alpha_grid_flat(&p, b)).abs());
    }
    outcome(
        agree <= 1e-9 && grid <= 1e-6,
        format!("max |flat − general| = {agree:.2e}, max |flat − grid| = {grid:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut violation, mut at_zero) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let (p, b) = alpha_instance(&mut rng, false);
        at_zero = at_zero.max((alpha_overestimate(&p, b, 0.0) - alpha_loss(&p, b, 0.0)).abs());
        for _ in 0..100 {
            let a = rng.gen_range(0.0..=10.0);
            let (hat, exact) = (alpha_overestimate(&p, b, a), alpha_loss(&p, b, a));
            violation = violation.max((exact - hat) / exact.abs().max(1.0));
        }
    }
    outcome(
        violation <= 1e-12 && at_zero <= 1e-12,
        format!("max relative shortfall = {violation:.2e}, max gap at 0 = {at_zero:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = 0;
    for _ in 0..100 {
        let (mut p, b) = shift_instance(&mut rng);
        p = LossPartition::from_sets(p.fg_pos, p.bg_pos, vec![], p.bg_zero);
        let want = p.bg_zero.iter().map(|s| s.h).fold(0.0f64, f64::max);
        let got = optimize_shift(&p, b);
        if got.loss != 0.0 || got.shift != want {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{bad}/100 instances off"))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn criterion_5() -> Outcome {
    let data = synth(&SynthConfig {
        train: 1,
        validation: 0,
        test: 0,
        width: 32,
        height: 32,
        min_objects: 2,
        max_objects: 3,
        seed: 5,
        ..SynthConfig::default()
    })
    .expect("synth");
    let sample = &data.entries[0];
    let extent = sample.image.extent();
    let mask = TrainingMask::new(extent, &sample.objects, 7.0).expect("mask");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let values = (0..extent.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let field = ObjectnessField::from_values(extent, values, 1);
    let ii = IntegralImage::new(&sample.image);
    let sampler = FeatureSampler::new(5, Grammar::Rich, Default::default());
    let (mut candidates, mut points, mut mismatches, mut draw) = (0, 0, 0, 0);
    while candidates < 50 {
        let Ok(dets) = sampler.draw(draw).detect(&ii) else {
            draw += 1;
            continue;
        };
        draw += 1;
        let params = SweepParams {
            kernel: CorrelationKernel::new(
                [KernelShape::FlatDisk, KernelShape::LinearFalloff, KernelShape::QuadraticFalloff][candidates % 3],
                3.0,
            )
            .unwrap(),
            mode: if candidates % 2 == 0 { EvidenceMode::Unique } else { EvidenceMode::Capped },
            b: mask.background_discount(),
            alpha_max: 10.0,
            loss: LossKind::Hinge,
        };
        let images = [SweepImage { field: &field, mask: &mask }];
        let ctx = SweepContext::new(&images, params.clone()).expect("context");
        let dets = vec![dets];
        for point in ctx.sweep_traced(&dets).expect("sweep") {
            let kept = filter_at_threshold(&dets[0], point.threshold);
            let f = evidence_field(extent, &kept, &params.kernel, params.mode).unwrap();
            let p = build_partition_multi([(&field, &f, &mask)]);
            let (s, a) = params.loss.optimize(&p, params.b, params.alpha_max);
            points += 1;
            if !(close(point.shift, s.shift) && close(point.alpha, a.alpha) && close(point.bound, s.loss + a.loss)) {
                mismatches += 1;
            }
        }
        candidates += 1;
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches over {points} thresholds of {candidates} candidates"),
    )
}

fn protocol_data() -> Vec<TrainingSample> {
    synth(&SynthConfig {
        train: 10,
        validation: 0,
        test: 0,
        min_objects: 5,
        max_objects: 5,
        seed: 6,
        ..SynthConfig::default()
    })
    .expect("synth")
    .samples(Partition::Train)
}

fn protocol_config(loss: LossKind) -> TrainConfig {
    TrainConfig {
        iterations: 50,
        loss,
        seed: 6,
        ..TrainConfig::default()
    }
}

fn criterion_6(trace: &[boost::IterationRecord], initial: f64) -> Outcome {
    let mut prev = initial;
    let mut ok = !trace.is_empty();
    for r in trace {
        ok &= r.total_loss > 0.0 && r.total_loss < prev;
        prev = r.total_loss;
    }
    outcome(
        ok,
        format!(
            "{} iterations, loss {initial:.4} → {:.4e}",
            trace.len(),
            trace.last().map_or(initial, |r| r.total_loss)
        ),
    )
}

fn criterion_7(trace: &[boost::IterationRecord]) -> Outcome {
    let worst = trace
        .iter()
        .take(10)
        .map(|r| (r.predicted_loss - r.total_loss).abs() / r.total_loss.abs())
        .fold(0.0f64, f64::max);
    outcome(
        !trace.is_empty() && worst <= 1e-6,
        format!("max relative gap over {} iterations = {worst:.2e}", trace.len().min(10)),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let data = synth(&SynthConfig {
        seed: 8,
        ..SynthConfig::default()
    })
    .expect("synth");
    let config = TrainConfig {
        iterations: 30,
        candidates_per_iteration: 50,
        seed: 8,
        ..TrainConfig::default()
    };
    let mut ensemble = boost::train(&data.samples(Partition::Train), &config).expect("train");
    let validation = boost::validate(
        &ensemble,
        &data.samples(Partition::Validation),
        &ValidationGrid::llm_only(),
        eval::DEFAULT_DELTA,
    )
    .expect("validate");
    ensemble.extraction = validation.best;
    let test = data.samples(Partition::Test);
    let dets: Vec<Vec<ScoredLocation>> = test.iter().map(|s| ensemble.detect(&s.image).expect("detect")).collect();
    let images: Vec<EvalImage> = dets
        .iter()
        .zip(&test)
        .map(|(d, s)| EvalImage {
            detections: d,
            truth: &s.objects,
        })
        .collect();
    let curve = eval::roc(&images, eval::DEFAULT_DELTA, eval::DEFAULT_TRUNCATION).expect("roc");
    let rate = curve.detection_rate_at(1.0);
    outcome(
        rate >= 0.9,
        format!(
            "detection rate at fpr ≤ 1 = {rate:.3} on {} test images, {:.1?}",
            test.len(),
            start.elapsed()
        ),
    )
}

fn criterion_9(hinge: &[boost::IterationRecord], smooth: &[boost::IterationRecord]) -> Outcome {
    let within = hinge
        .iter()
        .chain(smooth)
        .all(|r| r.hinge_bg_loss <= r.smooth_bg_loss);
    let n = hinge.len().min(smooth.len());
    let across = hinge.iter().zip(smooth).all(|(h, s)| h.bg_loss <= s.bg_loss);
    outcome(
        !hinge.is_empty() && !smooth.is_empty() && within && across,
        format!(
            "hinge {} and smooth {} iterations, pointwise bound {}, hinge ≤ smooth over {n} shared iterations {}",
            hinge.len(),
            smooth.len(),
            if within { "holds" } else { "violated" },
            if across { "holds" } else { "violated" }
        ),
    )
}

fn criterion_10() -> Outcome {
    let truth = [Location::new(10, 10), Location::new(50, 50)];
    let dets = [
        ScoredLocation::new(10, 10, 0.9),
        ScoredLocation::new(30, 30, 0.8),
        ScoredLocation::new(80, 80, 0.7),
        ScoredLocation::new(50, 50, 0.6),
        ScoredLocation::new(90, 10, 0.5),
    ];
    let images = [EvalImage {
        detections: &dets,
        truth: &truth,
    }];
    let want = [
        (f64::INFINITY, 0.0, 0.0),
        (0.9, 0.0, 0.5),
        (0.8, 0.5, 0.5),
        (0.7, 1.0, 0.5),
        (0.6, 1.0, 1.0),
        (0.5, 1.5, 1.0),
    ];
    let curve = eval::roc(&images, 10.0, 2.0).expect("roc");
    let got: Vec<(f64, f64, f64)> = curve
        .points
        .iter()
        .map(|p| (p.threshold, p.fpr, p.detection_rate))
        .collect();
    let table = got == want;
    let ap = eval::average_precision(&images, 10.0).expect("ap");
    let dup = match_detections(
        &[ScoredLocation::new(20, 20, 1.0), ScoredLocation::new(22, 20, 0.5)],
        &[Location::new(21, 20)],
        10.0,
    );
    let dup_rule = dup.verdicts == [Verdict::TruePositive, Verdict::FalsePositive];
    outcome(
        table && curve.area == 0.75 && ap == 0.75 && dup_rule,
        format!(
            "table {}, aroc {}, ap {ap}, duplicate → {} TP + {} FP",
            if table { "matches" } else { "differs" },
            curve.area,
            dup.true_positives(),
            dup.false_positives()
        ),
    )
}

fn run_bytes(data: &lbboost::io::dataset::Dataset) -> (String, String) {
    let config = TrainConfig {
        iterations: 8,
        candidates_per_iteration: 30,
        seed: 11,
        ..TrainConfig::default()
    };
    let ensemble = boost::train(&data.samples(Partition::Train), &config).expect("train");
    let dets: Vec<ImageDetections> = data
        .entries
        .iter()
        .map(|e| ImageDetections {
            id: e.id.clone(),
            detections: ensemble.detect(&e.image).expect("detect"),
        })
        .collect();
    (format_model(&ensemble), format_detections(&dets))
}

fn criterion_11() -> Outcome {
    let data = synth(&SynthConfig {
        train: 4,
        validation: 0,
        test: 3,
        seed: 11,
        ..SynthConfig::default()
    })
    .expect("synth");
    let (m1, d1) = run_bytes(&data);
    let (m2, d2) = run_bytes(&data);
    outcome(
        m1 == m2 && d1 == d2,
        format!("model {} bytes, detections {} bytes", m1.len(), d1.len()),
    )
}

fn main() -> ExitCode {
    let data = protocol_data();
    let initial: f64 = data.iter().map(|s| s.objects.len() as f64).sum();
    let hinge = boost::train(&data, &protocol_config(LossKind::Hinge)).expect("hinge training");
    let smooth = boost::train(&data, &protocol_config(LossKind::Smooth)).expect("smooth training");

    let results = [
        ("shift optimizer matches grid oracle", criterion_1()),
        ("flat alpha optimizer matches overestimate and grid", criterion_2()),
        ("alpha overestimate is sound and tight at zero", criterion_3()),
        ("empty fg⁰ gives zero shift loss", criterion_4()),
        ("incremental sweep matches scratch rebuild", criterion_5()),
        ("training loss is positive and strictly decreasing", criterion_6(&hinge.trace, initial)),
        ("loss decomposition is exact", criterion_7(&hinge.trace)),
        ("end-to-end synthetic detection", criterion_8()),
        ("hinge background loss bounded by smooth", criterion_9(&hinge.trace, &smooth.trace)),
        ("toy ROC, AP and duplicate rule", criterion_10()),
        ("training and detection are deterministic", criterion_11()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!("{} criterion {:>2}: {name} ({})", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
