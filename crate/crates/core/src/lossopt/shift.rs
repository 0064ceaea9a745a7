use crate::numeric::{self, CompensatedSum};

use super::partition::{shift_loss, LossPartition};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftSolution {
    pub shift: f64,
    pub loss: f64,
}

/// Distinct positive objectness values `k₁ < … < kₙ` over `bg⁰` with their
/// multiplicities and suffix sums `Σ_{i≥j} mᵢ e^{kᵢ}`.
///
/// Values `k ≤ 0` are dropped: their hinge `max{0, e^{k−s} − 1}` is zero on
/// the whole feasible range `s ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftOptState {
    pub values: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// `suffix_exp[j] = Σ_{i≥j} mᵢ e^{kᵢ}`, with a trailing zero.
    pub suffix_exp: Vec<f64>,
    /// `suffix_count[j] = Σ_{i≥j} mᵢ`, with a trailing zero.
    pub suffix_count: Vec<usize>,
}

impl ShiftOptState {
    pub fn new(partition: &LossPartition) -> Self {
        let mut ks: Vec<f64> = partition.bg_zero.iter().map(|x| x.h).filter(|&h| h > 0.0).collect();
        ks.sort_by(f64::total_cmp);
        let mut values: Vec<f64> = Vec::new();
        let mut multiplicities: Vec<usize> = Vec::new();
        for k in ks {
            match values.last() {
                Some(&last) if last == k => *multiplicities.last_mut().unwrap() += 1,
                _ => {
                    values.push(k);
                    multiplicities.push(1);
                }
            }
        }
        let n = values.len();
        let mut suffix_exp = vec![0.0; n + 1];
        let mut suffix_count = vec![0usize; n + 1];
        let mut acc = CompensatedSum::new();
        for j in (0..n).rev() {
            acc.add(multiplicities[j] as f64 * values[j].exp());
            suffix_exp[j] = acc.value();
            suffix_count[j] = suffix_count[j + 1] + multiplicities[j];
        }
        Self {
            values,
            multiplicities,
            suffix_exp,
            suffix_count,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Minimizes `L^s(s) = V e^s + b Σ_{bg⁰} max{0, e^{H−s} − 1}` over `s ≥ 0`.
///
/// On the segment `[k_{j−1}, k_j]` only values `kᵢ ≥ k_j` are active and the
/// loss is `V e^s + b e^{-s} S_j − b M_j`, minimized at
/// `½ ln(b S_j / V)` and projected into the segment. Segments are walked
/// from the top and the best projected point wins.
pub fn optimize_shift(partition: &LossPartition, b: f64) -> ShiftSolution {
    let v = partition.v();
    if partition.fg_zero.is_empty() {
        let top = partition
            .bg_zero
            .iter()
            .map(|x| x.h)
            .fold(0.0f64, f64::max);
        return ShiftSolution { shift: top, loss: 0.0 };
    }
    let state = ShiftOptState::new(partition);
    let n = state.len();
    let mut best = ShiftSolution {
        shift: 0.0,
        loss: f64::INFINITY,
    };
    // Segment j covers [k_{j-1}, k_j] with k_0 = 0 and k_{n} = ∞ (0-based
    // values shifted by one); its active set is values[j..].
    for j in (0..=n).rev() {
        let lo = if j == 0 { 0.0 } else { state.values[j - 1] };
        let hi = if j == n { f64::INFINITY } else { state.values[j] };
        let s_exp = state.suffix_exp[j];
        let m = state.suffix_count[j] as f64;
        let unconstrained = if s_exp > 0.0 {
            0.5 * (b * s_exp / v).ln()
        } else {
            f64::NEG_INFINITY
        };
        let s = unconstrained.clamp(lo, hi);
        let loss = v * s.exp() + b * ((-s).exp() * s_exp - m);
        if loss < best.loss || (loss == best.loss && s < best.shift) {
            best = ShiftSolution { shift: s, loss };
        }
    }
    ShiftSolution {
        shift: best.shift,
        loss: shift_loss(partition, b, best.shift),
    }
}

/// Smooth-objective shift `½ ln(b Σ_{bg⁰} e^H / V)` clamped to `[0, shift_max]`.
pub fn optimize_shift_smooth(partition: &LossPartition, b: f64, shift_max: f64) -> ShiftSolution {
    let v = partition.v();
    let w = numeric::sum(partition.bg_zero.iter().map(|x| x.h.exp()));
    let shift = smooth_shift_argmin(v, w, b, shift_max);
    ShiftSolution {
        shift,
        loss: v * shift.exp() + b * w * (-shift).exp(),
    }
}

pub(super) fn smooth_shift_argmin(v: f64, w: f64, b: f64, shift_max: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else if v <= 0.0 {
        shift_max
    } else {
        (0.5 * (b * w / v).ln()).clamp(0.0, shift_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lossopt::partition::Sample;
    use proptest::prelude::*;

    fn part(fg_zero: &[f64], bg_zero: &[f64]) -> LossPartition {
        LossPartition::from_sets(
            vec![],
            vec![],
            fg_zero.iter().map(|&h| Sample::new(h, 0.0)).collect(),
            bg_zero.iter().map(|&h| Sample::new(h, 0.0)).collect(),
        )
    }

    /// Grid oracle evaluating the loss from its definition.
    fn grid_min(p: &LossPartition, b: f64, hi: f64, step: f64) -> (f64, f64) {
        let v: f64 = p.fg_zero.iter().map(|x| (-x.h).exp()).sum();
        let n = (hi / step).round() as usize;
        (0..=n)
            .map(|i| {
                let s = i as f64 * step;
                let bg: f64 = p.bg_zero.iter().map(|x| ((x.h - s).exp() - 1.0).max(0.0)).sum();
                (s, v * s.exp() + b * bg)
            })
            .fold((0.0, f64::INFINITY), |a, c| if c.1 < a.1 { c } else { a })
    }

    #[test]
    fn zero_loss_without_false_negatives() {
        let sol = optimize_shift(&part(&[], &[0.5, 1.2]), 1.0);
        assert_eq!(sol, ShiftSolution { shift: 1.2, loss: 0.0 });
        let sol = optimize_shift(&part(&[], &[-0.5]), 1.0);
        assert_eq!(sol, ShiftSolution { shift: 0.0, loss: 0.0 });
    }

    #[test]
    fn single_pixel_examples() {
        let sol = optimize_shift(&part(&[0.0], &[0.0]), 1.0);
        assert_eq!(sol.shift, 0.0);
        assert!((sol.loss - 1.0).abs() < 1e-12);
        let (gs, gl) = grid_min(&part(&[0.0], &[0.0]), 1.0, 5.0, 1e-4);
        assert_eq!(gs, 0.0);
        assert!((gl - 1.0).abs() < 1e-12);

        let p = part(&[0.0], &[2.0]);
        let sol = optimize_shift(&p, 1.0);
        assert!((sol.shift - 1.0).abs() < 1e-12);
        let expected = 2.0 * std::f64::consts::E - 1.0;
        assert!((sol.loss - expected).abs() < 1e-12);
        let (gs, gl) = grid_min(&p, 1.0, 5.0, 1e-4);
        assert!((gs - 1.0).abs() < 1e-4);
        assert!((gl - expected).abs() < 1e-6);
    }

    #[test]
    fn empty_background_returns_zero_shift() {
        let sol = optimize_shift(&part(&[0.3, -0.2], &[]), 0.5);
        assert_eq!(sol.shift, 0.0);
        assert!((sol.loss - ((-0.3f64).exp() + 0.2f64.exp())).abs() < 1e-12);
    }

    #[test]
    fn state_suffix_sums_are_consistent() {
        let p = part(&[0.0], &[1.0, 1.0, -2.0, 0.0, 2.5, 0.3]);
        let st = ShiftOptState::new(&p);
        assert_eq!(st.values, vec![0.3, 1.0, 2.5]);
        assert_eq!(st.multiplicities, vec![1, 2, 1]);
        for j in 0..st.len() {
            let direct: f64 = (j..st.len()).map(|i| st.multiplicities[i] as f64 * st.values[i].exp()).sum();
            assert!((st.suffix_exp[j] - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn smooth_shift_closed_form() {
        let p = part(&[0.0], &[1.0]);
        let sol = optimize_shift_smooth(&p, 1.0, 10.0);
        assert!((sol.shift - 0.5).abs() < 1e-12);
        assert_eq!(optimize_shift_smooth(&part(&[], &[1.0]), 1.0, 10.0).shift, 10.0);
        assert_eq!(optimize_shift_smooth(&part(&[1.0], &[]), 1.0, 10.0).shift, 0.0);
    }

    proptest! {
        #[test]
        fn shift_loss_is_convex(
            fg in proptest::collection::vec(-3.0f64..3.0, 0..10),
            bg in proptest::collection::vec(-3.0f64..3.0, 0..20),
            b in 0.01f64..1.0,
            s1 in 0.0f64..6.0,
            s2 in 0.0f64..6.0,
        ) {
            let p = part(&fg, &bg);
            let mid = shift_loss(&p, b, 0.5 * (s1 + s2));
            let avg = 0.5 * (shift_loss(&p, b, s1) + shift_loss(&p, b, s2));
            prop_assert!(mid <= avg + 1e-9);
        }

        #[test]
        fn optimum_beats_grid(
            fg in proptest::collection::vec(-3.0f64..3.0, 1..10),
            bg in proptest::collection::vec(-3.0f64..3.0, 0..20),
            b in 0.01f64..1.0,
        ) {
            let p = part(&fg, &bg);
            let sol = optimize_shift(&p, b);
            let (_, gl) = grid_min(&p, b, 6.0, 1e-3);
            prop_assert!(sol.loss <= gl + 1e-9);
            prop_assert!(sol.shift >= 0.0);
        }
    }
}
