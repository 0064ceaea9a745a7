use crate::numeric::CompensatedSum;

use super::partition::{alpha_loss, alpha_overestimate, smooth_alpha_overestimate, LossPartition};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaSolution {
    pub alpha: f64,
    pub loss: f64,
}

/// Pixels of `bg⁺` sharing one breakpoint, with their summed weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaCell {
    pub breakpoint: f64,
    /// `Σ e^H f` over the cell.
    pub slope: f64,
    /// `Σ (e^H (1 − f) − 1)` over the cell.
    pub offset: f64,
}

/// Breakpoint structure of the alpha overestimate.
///
/// The always-active cell `A₀` holds `bg⁺` pixels with `H ≥ 0`; every other
/// `bg⁺` pixel enters the hinge once `α` passes its breakpoint
/// `ln(1 + (e^{-H} − 1)/f)`, which is `−H` when `f = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaOptState {
    /// `Σ_{fg⁺} e^{-H} f`.
    pub fg_slope: f64,
    /// `Σ_{fg⁺} e^{-H} (1 − f)`.
    pub fg_offset: f64,
    pub base: AlphaCell,
    /// Cells with positive breakpoints, sorted ascending.
    pub cells: Vec<AlphaCell>,
}

/// Point where `e^H (1 − f + f e^α) = 1`; only meaningful for `H < 0`.
#[inline]
pub(super) fn hinge_breakpoint(h: f64, f: f64) -> f64 {
    ((-h).exp_m1() / f).ln_1p()
}

impl AlphaOptState {
    pub fn new(partition: &LossPartition) -> Self {
        Self::build(partition, hinge_breakpoint)
    }

    /// Flat-kernel variant: breakpoints are `−H`, and `f ≡ 1`.
    pub fn new_flat(partition: &LossPartition) -> Self {
        Self::build(partition, |h, _| -h)
    }

    fn build(partition: &LossPartition, breakpoint: impl Fn(f64, f64) -> f64) -> Self {
        let mut fg_slope = CompensatedSum::new();
        let mut fg_offset = CompensatedSum::new();
        for x in &partition.fg_pos {
            let e = (-x.h).exp();
            fg_slope.add(e * x.f);
            fg_offset.add(e * (1.0 - x.f));
        }
        let mut base_slope = CompensatedSum::new();
        let mut base_offset = CompensatedSum::new();
        let mut keyed: Vec<(f64, f64, f64)> = Vec::new();
        for x in &partition.bg_pos {
            let e = x.h.exp();
            let (slope, offset) = (e * x.f, e * (1.0 - x.f) - 1.0);
            if x.h >= 0.0 {
                base_slope.add(slope);
                base_offset.add(offset);
            } else {
                keyed.push((breakpoint(x.h, x.f), slope, offset));
            }
        }
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cells: Vec<AlphaCell> = Vec::new();
        let mut sums: Vec<(CompensatedSum, CompensatedSum)> = Vec::new();
        for (z, slope, offset) in keyed {
            if cells.last().map(|c| c.breakpoint) != Some(z) {
                cells.push(AlphaCell {
                    breakpoint: z,
                    slope: 0.0,
                    offset: 0.0,
                });
                sums.push((CompensatedSum::new(), CompensatedSum::new()));
            }
            let last = sums.last_mut().unwrap();
            last.0.add(slope);
            last.1.add(offset);
        }
        for (cell, (s, o)) in cells.iter_mut().zip(&sums) {
            cell.slope = s.value();
            cell.offset = o.value();
        }
        Self {
            fg_slope: fg_slope.value(),
            fg_offset: fg_offset.value(),
            base: AlphaCell {
                breakpoint: 0.0,
                slope: base_slope.value(),
                offset: base_offset.value(),
            },
            cells,
        }
    }

    /// Walks segments `[z_j, z_{j+1}] ∩ [0, α_max]`, projecting each
    /// segment's stationary point `½ ln(P / (b Q_j))` into it, and keeps the
    /// best. Returns `α` only; callers evaluate the loss they need.
    fn argmin(&self, b: f64, alpha_max: f64) -> f64 {
        let p = self.fg_slope;
        if p <= 0.0 {
            return 0.0;
        }
        let mut slope = CompensatedSum::new();
        let mut offset = CompensatedSum::new();
        slope.add(self.base.slope);
        offset.add(self.base.offset);
        let mut best = (0.0, f64::INFINITY);
        for j in 0..=self.cells.len() {
            let lo = if j == 0 { 0.0 } else { self.cells[j - 1].breakpoint };
            if lo > alpha_max {
                break;
            }
            if j > 0 {
                slope.add(self.cells[j - 1].slope);
                offset.add(self.cells[j - 1].offset);
            }
            let hi = self.cells.get(j).map_or(f64::INFINITY, |c| c.breakpoint).min(alpha_max);
            let q = slope.value();
            let stationary = if q > 0.0 {
                0.5 * (p / (b * q)).ln()
            } else {
                f64::INFINITY
            };
            let a = stationary.clamp(lo, hi);
            let loss = self.fg_offset + p * (-a).exp() + b * (offset.value() + q * a.exp());
            if loss < best.1 {
                best = (a, loss);
            }
        }
        best.0
    }
}

/// Minimizes the alpha-loss overestimate over `[0, α_max]`.
///
/// The overestimate equals the true alpha loss at `α = 0`, so the returned
/// weight never increases the true loss.
pub fn optimize_alpha(partition: &LossPartition, b: f64, alpha_max: f64) -> AlphaSolution {
    let alpha = AlphaOptState::new(partition).argmin(b, alpha_max);
    AlphaSolution {
        alpha,
        loss: alpha_overestimate(partition, b, alpha),
    }
}

/// Exact minimizer of the alpha loss when every positive evidence value is 1
/// (flat kernels). The loss reported is the exact alpha loss.
pub fn optimize_alpha_flat(partition: &LossPartition, b: f64, alpha_max: f64) -> AlphaSolution {
    debug_assert!(
        partition.fg_pos.iter().chain(&partition.bg_pos).all(|x| x.f == 1.0),
        "flat optimizer needs f ∈ {{0, 1}}"
    );
    let alpha = AlphaOptState::new_flat(partition).argmin(b, alpha_max);
    AlphaSolution {
        alpha,
        loss: alpha_loss(partition, b, alpha),
    }
}

/// Smooth-objective alpha minimizing its linear overestimate in closed form.
pub fn optimize_alpha_smooth(partition: &LossPartition, b: f64, alpha_max: f64) -> AlphaSolution {
    let mut p = CompensatedSum::new();
    for x in &partition.fg_pos {
        p.add((-x.h).exp() * x.f);
    }
    let mut q = CompensatedSum::new();
    for x in &partition.bg_pos {
        q.add(x.h.exp() * x.f);
    }
    let alpha = smooth_alpha_argmin(p.value(), q.value(), b, alpha_max);
    AlphaSolution {
        alpha,
        loss: smooth_alpha_overestimate(partition, b, alpha),
    }
}

pub(super) fn smooth_alpha_argmin(p: f64, q: f64, b: f64, alpha_max: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if q <= 0.0 {
        alpha_max
    } else {
        (0.5 * (p / (b * q)).ln()).clamp(0.0, alpha_max)
    }
}
