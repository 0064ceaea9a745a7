//! Compensated summation and a Fenwick tree for prefix sums.

/// Neumaier-compensated running sum. Supports removal of previously added
/// terms by adding their negation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub const fn new() -> Self {
        Self { sum: 0.0, carry: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn sub(&mut self, value: f64) {
        self.add(-value);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator of terms.
pub fn sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    terms.into_iter().collect::<CompensatedSum>().value()
}

/// Binary indexed tree over `f64` with point updates, prefix queries and a
/// descent for monotone prefix predicates.
#[derive(Clone, Debug)]
pub struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    pub fn new(len: usize) -> Self {
        Self {
            tree: vec![0.0; len + 1],
        }
    }

    /// Builds the tree in O(n) from initial leaf values.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mut tree = vec![0.0; n + 1];
        tree[1..].copy_from_slice(values);
        for i in 1..=n {
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i];
            }
        }
        Self { tree }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.tree.len() - 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds `delta` to the element at zero-based `pos`.
    pub fn add(&mut self, pos: usize, delta: f64) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of the first `count` elements.
    pub fn prefix(&self, count: usize) -> f64 {
        let mut i = count.min(self.len());
        let mut acc = 0.0;
        while i > 0 {
            acc += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        acc
    }

    /// Largest `count` such that `pred(count, prefix(count))` holds, given
    /// that `pred` is monotone (true then false) in `count` and
    /// `pred(0, 0.0)` is assumed true. Returns `(count, prefix(count))`.
    pub fn descend<F>(&self, mut pred: F) -> (usize, f64)
    where
        F: FnMut(usize, f64) -> bool,
    {
        let n = self.len();
        let mut pos = 0usize;
        let mut acc = 0.0;
        let mut step = if n == 0 { 0 } else { 1usize << (usize::BITS - 1 - n.leading_zeros()) };
        while step > 0 {
            let next = pos + step;
            if next <= n {
                let candidate = acc + self.tree[next];
                if pred(next, candidate) {
                    pos = next;
                    acc = candidate;
                }
            }
            step >>= 1;
        }
        (pos, acc)
    }
}
