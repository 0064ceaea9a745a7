use crate::error::Result;
use crate::hos::{ObjectnessField, ScoredLocation};
use crate::kernel::{CorrelationKernel, EvidenceMode, KernelTap};
use crate::numeric::{CompensatedSum, Fenwick};

use super::alpha::{hinge_breakpoint, smooth_alpha_argmin};
use super::mask::{PixelLabel, TrainingMask};
use super::shift::smooth_shift_argmin;
use super::LossKind;

const NONE: u32 = u32::MAX;

/// One training image as seen by the sweep: its current field and mask.
#[derive(Clone, Copy, Debug)]
pub struct SweepImage<'a> {
    pub field: &'a ObjectnessField,
    pub mask: &'a TrainingMask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepParams {
    pub kernel: CorrelationKernel,
    pub mode: EvidenceMode,
    /// Pooled background discount.
    pub b: f64,
    pub alpha_max: f64,
    pub loss: LossKind,
}

/// Optimal parameters at one threshold and their loss estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub alpha: f64,
    pub shift: f64,
    pub shift_loss: f64,
    /// Overestimated alpha loss at `alpha`.
    pub alpha_bound: f64,
    pub bound: f64,
}

/// Evidence change at one masked pixel when a confidence level enters.
#[derive(Clone, Copy, Debug)]
struct Event {
    image: u32,
    index: u32,
    old: f64,
    new: f64,
}

struct ImageData<'a> {
    width: usize,
    height: usize,
    labels: &'a [PixelLabel],
    h: &'a [f64],
    exp_h: Vec<f64>,
    exp_neg_h: Vec<f64>,
    /// Position in the shift universe, for background pixels with `H > 0`.
    shift_pos: Vec<u32>,
}

/// Per-iteration state shared by all candidate sweeps: exponentials of the
/// current fields and the universe of background pixels the shift optimizer
/// may see.
pub struct SweepContext<'a> {
    params: SweepParams,
    taps: Vec<KernelTap>,
    images: Vec<ImageData<'a>>,
    /// Shift universe values `H`, sorted descending.
    shift_keys: Vec<f64>,
    shift_exp: Fenwick,
    shift_count: Fenwick,
    v_total: CompensatedSum,
    objects: usize,
    w_total: CompensatedSum,
    background: usize,
}

impl<'a> SweepContext<'a> {
    pub fn new(images: &[SweepImage<'a>], params: SweepParams) -> Result<Self> {
        let mut data = Vec::with_capacity(images.len());
        let mut universe: Vec<(f64, u32, u32)> = Vec::new();
        let mut v_total = CompensatedSum::new();
        let mut w_total = CompensatedSum::new();
        let (mut objects, mut background) = (0, 0);
        for (i, img) in images.iter().enumerate() {
            let extent = img.mask.extent();
            extent.expect_same(img.field.extent())?;
            let h = img.field.values();
            let labels = img.mask.labels();
            let exp_h: Vec<f64> = h.iter().map(|v| v.exp()).collect();
            let exp_neg_h: Vec<f64> = h.iter().map(|v| (-v).exp()).collect();
            for (j, &label) in labels.iter().enumerate() {
                match label {
                    PixelLabel::Object => {
                        v_total.add(exp_neg_h[j]);
                        objects += 1;
                    }
                    PixelLabel::Background => {
                        w_total.add(exp_h[j]);
                        background += 1;
                        if h[j] > 0.0 {
                            universe.push((h[j], i as u32, j as u32));
                        }
                    }
                    PixelLabel::DontCare => {}
                }
            }
            data.push(ImageData {
                width: extent.width,
                height: extent.height,
                labels,
                h,
                exp_h,
                exp_neg_h,
                shift_pos: vec![NONE; extent.len()],
            });
        }
        universe.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut exps = Vec::with_capacity(universe.len());
        for (pos, &(_, i, j)) in universe.iter().enumerate() {
            data[i as usize].shift_pos[j as usize] = pos as u32;
            exps.push(data[i as usize].exp_h[j as usize]);
        }
        Ok(Self {
            taps: params.kernel.taps(),
            params,
            images: data,
            shift_keys: universe.iter().map(|u| u.0).collect(),
            shift_exp: Fenwick::from_values(&exps),
            shift_count: Fenwick::from_values(&vec![1.0; exps.len()]),
            v_total,
            objects,
            w_total,
            background,
        })
    }

    pub fn params(&self) -> &SweepParams {
        &self.params
    }

    /// Best threshold for a candidate given its raw detections per image.
    /// Ties in the bound keep the higher threshold.
    pub fn sweep(&self, detections: &[Vec<ScoredLocation>]) -> Result<SweepPoint> {
        let mut best: Option<SweepPoint> = None;
        self.run(detections, |p| {
            if best.is_none_or(|b| p.bound < b.bound) {
                best = Some(p);
            }
        })?;
        Ok(best.expect("the empty threshold is always evaluated"))
    }

    /// Every evaluated threshold, from `+∞` down to the lowest confidence.
    pub fn sweep_traced(&self, detections: &[Vec<ScoredLocation>]) -> Result<Vec<SweepPoint>> {
        let mut out = Vec::new();
        self.run(detections, |p| out.push(p))?;
        Ok(out)
    }

    fn run(&self, detections: &[Vec<ScoredLocation>], mut visit: impl FnMut(SweepPoint)) -> Result<()> {
        assert_eq!(detections.len(), self.images.len(), "one detection list per image");
        let (events, levels) = self.replay(detections)?;
        let hinge = self.params.loss == LossKind::Hinge;

        // Alpha universe: background events with H < 0 keyed by breakpoint.
        let mut keyed: Vec<(f64, u32)> = Vec::new();
        if hinge {
            for (e, ev) in events.iter().enumerate() {
                let img = &self.images[ev.image as usize];
                let i = ev.index as usize;
                if img.labels[i] == PixelLabel::Background && img.h[i] < 0.0 {
                    keyed.push((hinge_breakpoint(img.h[i], ev.new), e as u32));
                }
            }
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        let mut event_pos = vec![NONE; if hinge { events.len() } else { 0 }];
        for (pos, &(_, e)) in keyed.iter().enumerate() {
            event_pos[e as usize] = pos as u32;
        }
        let alpha_keys: Vec<f64> = keyed.iter().map(|k| k.0).collect();

        let mut st = State {
            v: self.v_total,
            fg_zero: self.objects,
            fg_pos: 0,
            p: CompensatedSum::new(),
            f0: CompensatedSum::new(),
            w: self.w_total,
            bg_zero: self.background,
            q_all: CompensatedSum::new(),
            r_all: CompensatedSum::new(),
            shift_exp: if hinge { self.shift_exp.clone() } else { Fenwick::new(0) },
            shift_count: if hinge { self.shift_count.clone() } else { Fenwick::new(0) },
            q0: CompensatedSum::new(),
            r0: CompensatedSum::new(),
            alpha_q: Fenwick::new(alpha_keys.len()),
            alpha_r: Fenwick::new(alpha_keys.len()),
            current: self
                .images
                .iter()
                .map(|img| if hinge { vec![NONE; img.h.len()] } else { Vec::new() })
                .collect(),
        };

        visit(self.evaluate(&st, f64::INFINITY, &alpha_keys));
        let mut start = 0;
        for &(threshold, end) in &levels {
            for (e, ev) in events[start..end].iter().enumerate() {
                self.apply(&mut st, ev, event_pos.get(start + e).copied().unwrap_or(NONE));
            }
            start = end;
            visit(self.evaluate(&st, threshold, &alpha_keys));
        }
        Ok(())
    }

    /// Replays evidence accumulation over the globally sorted detections,
    /// recording per-pixel changes and the end of each confidence level.
    fn replay(&self, detections: &[Vec<ScoredLocation>]) -> Result<(Vec<Event>, Vec<(f64, usize)>)> {
        let mut all: Vec<(f64, u32, u32, u32)> = Vec::new();
        for (i, (dets, img)) in detections.iter().zip(&self.images).enumerate() {
            for d in dets {
                crate::geometry::Extent::new(img.width, img.height).check(d.location())?;
                all.push((d.confidence, i as u32, d.y, d.x));
            }
        }
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2, a.3).cmp(&(b.1, b.2, b.3))));

        let mode = self.params.mode;
        let mut acc: Vec<Vec<f64>> = self.images.iter().map(|img| vec![0.0; img.h.len()]).collect();
        let mut events = Vec::new();
        let mut levels: Vec<(f64, usize)> = Vec::new();
        for (n, &(c, i, y, x)) in all.iter().enumerate() {
            let img = &self.images[i as usize];
            let acc = &mut acc[i as usize];
            for tap in &self.taps {
                let px = x as i64 + tap.dx as i64;
                let py = y as i64 + tap.dy as i64;
                if px < 0 || py < 0 || px >= img.width as i64 || py >= img.height as i64 {
                    continue;
                }
                let j = py as usize * img.width + px as usize;
                if img.labels[j] == PixelLabel::DontCare {
                    continue;
                }
                let before = acc[j];
                acc[j] = mode.combine(before, tap.value);
                let (old, new) = (mode.finish(before), mode.finish(acc[j]));
                if new != old {
                    events.push(Event {
                        image: i,
                        index: j as u32,
                        old,
                        new,
                    });
                }
            }
            if all.get(n + 1).is_none_or(|next| next.0 != c) {
                levels.push((c, events.len()));
            }
        }
        Ok((events, levels))
    }

    fn apply(&self, st: &mut State, ev: &Event, alpha_pos: u32) {
        let img = &self.images[ev.image as usize];
        let i = ev.index as usize;
        let (old, new) = (ev.old, ev.new);
        match img.labels[i] {
            PixelLabel::Object => {
                let e = img.exp_neg_h[i];
                if old == 0.0 {
                    st.v.sub(e);
                    st.fg_zero -= 1;
                    st.fg_pos += 1;
                } else {
                    st.p.sub(e * old);
                    st.f0.sub(e * (1.0 - old));
                }
                st.p.add(e * new);
                st.f0.add(e * (1.0 - new));
            }
            PixelLabel::Background => {
                let e = img.exp_h[i];
                if old == 0.0 {
                    st.w.sub(e);
                    st.bg_zero -= 1;
                } else {
                    st.q_all.sub(e * old);
                    st.r_all.sub(e * (1.0 - old));
                }
                st.q_all.add(e * new);
                st.r_all.add(e * (1.0 - new));
                if self.params.loss != LossKind::Hinge {
                    return;
                }
                if old == 0.0 && img.h[i] > 0.0 {
                    let pos = img.shift_pos[i] as usize;
                    st.shift_exp.add(pos, -e);
                    st.shift_count.add(pos, -1.0);
                }
                if img.h[i] >= 0.0 {
                    if old > 0.0 {
                        st.q0.sub(e * old);
                        st.r0.sub(e * (1.0 - old) - 1.0);
                    }
                    st.q0.add(e * new);
                    st.r0.add(e * (1.0 - new) - 1.0);
                } else {
                    let current = &mut st.current[ev.image as usize][i];
                    if *current != NONE {
                        st.alpha_q.add(*current as usize, -e * old);
                        st.alpha_r.add(*current as usize, -(e * (1.0 - old) - 1.0));
                    }
                    st.alpha_q.add(alpha_pos as usize, e * new);
                    st.alpha_r.add(alpha_pos as usize, e * (1.0 - new) - 1.0);
                    *current = alpha_pos;
                }
            }
            PixelLabel::DontCare => unreachable!("don't-care pixels are never replayed"),
        }
    }

    fn evaluate(&self, st: &State, threshold: f64, alpha_keys: &[f64]) -> SweepPoint {
        let SweepParams { b, alpha_max, .. } = self.params;
        let v = if st.fg_zero == 0 { 0.0 } else { st.v.value() };
        let p = if st.fg_pos == 0 { 0.0 } else { st.p.value() };
        let f0 = st.f0.value();
        let (shift, shift_loss, alpha, alpha_bound) = match self.params.loss {
            LossKind::Smooth => {
                let w = if st.bg_zero == 0 { 0.0 } else { st.w.value() };
                let q = st.q_all.value();
                let s = smooth_shift_argmin(v, w, b, alpha_max);
                let a = smooth_alpha_argmin(p, q, b, alpha_max);
                (
                    s,
                    v * s.exp() + b * w * (-s).exp(),
                    a,
                    f0 + p * (-a).exp() + b * (st.r_all.value() + q * a.exp()),
                )
            }
            LossKind::Hinge => {
                let (s, ls) = self.hinge_shift(st, v, b);
                let (a, la) = hinge_alpha(st, p, f0, b, alpha_max, alpha_keys);
                (s, ls, a, la)
            }
        };
        SweepPoint {
            threshold,
            alpha,
            shift,
            shift_loss,
            alpha_bound,
            bound: shift_loss + alpha_bound,
        }
    }

    fn hinge_shift(&self, st: &State, v: f64, b: f64) -> (f64, f64) {
        let keys = &self.shift_keys;
        if st.fg_zero == 0 {
            let (first, _) = st.shift_count.descend(|_, pre| pre < 0.5);
            let top = keys.get(first).copied().unwrap_or(0.0);
            return (top.max(0.0), 0.0);
        }
        // Largest active prefix whose segment derivative at its upper end
        // is still non-negative.
        let (c, sum) = st
            .shift_exp
            .descend(|c, pre| v * (2.0 * keys[c - 1]).exp() - b * pre >= 0.0);
        let count = st.shift_count.prefix(c);
        let lo = keys.get(c).copied().unwrap_or(0.0);
        let hi = if c == 0 { f64::INFINITY } else { keys[c - 1] };
        let stationary = if sum > 0.0 {
            0.5 * (b * sum / v).ln()
        } else {
            f64::NEG_INFINITY
        };
        let s = stationary.clamp(lo, hi);
        let active = if sum > 0.0 { (-s).exp() * sum - count } else { 0.0 };
        (s, v * s.exp() + b * active)
    }
}

fn hinge_alpha(st: &State, p: f64, f0: f64, b: f64, alpha_max: f64, keys: &[f64]) -> (f64, f64) {
    let q0 = st.q0.value();
    let alpha = if st.fg_pos == 0 {
        0.0
    } else {
        let (c, pre) = st.alpha_q.descend(|c, pre| {
            let w = keys[c - 1];
            -p * (-w).exp() + b * w.exp() * (q0 + pre) < 0.0
        });
        let lo = if c == 0 { 0.0 } else { keys[c - 1] };
        let hi = keys.get(c).copied().unwrap_or(f64::INFINITY);
        let q = q0 + pre;
        let stationary = if q > 0.0 {
            0.5 * (p / (b * q)).ln()
        } else {
            f64::INFINITY
        };
        stationary.clamp(lo, hi).clamp(0.0, alpha_max)
    };
    let active = keys.partition_point(|&w| w < alpha);
    let bg = (q0 + st.alpha_q.prefix(active)) * alpha.exp() + st.r0.value() + st.alpha_r.prefix(active);
    (alpha, f0 + p * (-alpha).exp() + b * bg)
}

struct State {
    v: CompensatedSum,
    fg_zero: usize,
    fg_pos: usize,
    p: CompensatedSum,
    f0: CompensatedSum,
    w: CompensatedSum,
    bg_zero: usize,
    q_all: CompensatedSum,
    r_all: CompensatedSum,
    shift_exp: Fenwick,
    shift_count: Fenwick,
    q0: CompensatedSum,
    r0: CompensatedSum,
    alpha_q: Fenwick,
    alpha_r: Fenwick,
    /// Alpha-universe position currently holding each pixel's contribution.
    current: Vec<Vec<u32>>,
}
