//! Correlation kernels and the evidence they induce at query locations.
//!
//! A kernel `C(x, v)` measures how strongly a predicted location `v` supports
//! an object at `x`. All shapes lie in `[0, 1]`, equal 1 at zero distance and
//! vanish once `‖x − v‖ ≥ r`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{Extent, Location};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelShape {
    /// 1 strictly inside the disk, 0 outside.
    FlatDisk,
    /// `max{0, 1 − d/r}`.
    LinearFalloff,
    /// `max{0, 1 − (d/r)²}`, the truncated quadratic.
    QuadraticFalloff,
}

impl KernelShape {
    pub fn tag(&self) -> &'static str {
        match self {
            KernelShape::FlatDisk => "flat",
            KernelShape::LinearFalloff => "linear",
            KernelShape::QuadraticFalloff => "quadratic",
        }
    }
}

impl fmt::Display for KernelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for KernelShape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "flat" => Ok(KernelShape::FlatDisk),
            "linear" => Ok(KernelShape::LinearFalloff),
            "quadratic" => Ok(KernelShape::QuadraticFalloff),
            other => Err(format!("unknown kernel shape `{other}`")),
        }
    }
}

/// How overlapping kernel contributions combine into evidence in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EvidenceMode {
    /// `min{1, Σ C(x, v)}`.
    Capped,
    /// `max C(x, v)`, i.e. evidence from the closest detection.
    Unique,
}

impl EvidenceMode {
    /// Folds one kernel contribution into a running accumulator.
    #[inline]
    pub fn combine(&self, acc: f64, contribution: f64) -> f64 {
        match self {
            EvidenceMode::Capped => acc + contribution,
            EvidenceMode::Unique => acc.max(contribution),
        }
    }

    /// Maps an accumulator to evidence.
    #[inline]
    pub fn finish(&self, acc: f64) -> f64 {
        match self {
            EvidenceMode::Capped => acc.min(1.0),
            EvidenceMode::Unique => acc,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            EvidenceMode::Capped => "capped",
            EvidenceMode::Unique => "unique",
        }
    }
}

impl fmt::Display for EvidenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EvidenceMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "capped" => Ok(EvidenceMode::Capped),
            "unique" => Ok(EvidenceMode::Unique),
            other => Err(format!("unknown evidence mode `{other}`")),
        }
    }
}

/// One pixel offset inside a kernel's support together with its weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelTap {
    pub dx: i32,
    pub dy: i32,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationKernel {
    shape: KernelShape,
    radius: f64,
}

impl CorrelationKernel {
    pub fn new(shape: KernelShape, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidRadius(radius));
        }
        Ok(Self { shape, radius })
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Kernel value as a function of squared distance.
    #[inline]
    pub fn at_distance_sq(&self, d2: f64) -> f64 {
        let r2 = self.radius * self.radius;
        if d2 >= r2 {
            return 0.0;
        }
        match self.shape {
            KernelShape::FlatDisk => 1.0,
            KernelShape::LinearFalloff => (1.0 - d2.sqrt() / self.radius).max(0.0),
            KernelShape::QuadraticFalloff => (1.0 - d2 / r2).max(0.0),
        }
    }

    #[inline]
    pub fn value(&self, x: Location, v: Location) -> f64 {
        self.at_distance_sq(x.distance_sq(v))
    }

    /// All integer offsets with a strictly positive kernel value, in
    /// row-major order.
    pub fn taps(&self) -> Vec<KernelTap> {
        let reach = self.radius.ceil() as i32;
        let mut taps = Vec::new();
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let value = self.at_distance_sq((dx * dx + dy * dy) as f64);
                if value > 0.0 {
                    taps.push(KernelTap { dx, dy, value });
                }
            }
        }
        taps
    }
}

impl fmt::Display for CorrelationKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{:?}", self.shape, self.radius)
    }
}

impl FromStr for CorrelationKernel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (shape, radius) = s
            .split_once(':')
            .ok_or_else(|| format!("kernel `{s}` is not of the form shape:radius"))?;
        let radius: f64 = radius
            .parse()
            .map_err(|_| format!("bad kernel radius `{radius}`"))?;
        CorrelationKernel::new(shape.parse()?, radius).map_err(|e| e.to_string())
    }
}

/// Evidence at `x` from a filtered list of predicted locations.
pub fn evidence(
    x: Location,
    locations: &[Location],
    kernel: &CorrelationKernel,
    mode: EvidenceMode,
) -> f64 {
    let acc = locations
        .iter()
        .fold(0.0, |acc, &v| mode.combine(acc, kernel.value(x, v)));
    mode.finish(acc)
}

/// Sparse evidence over an image: only pixels with positive evidence are
/// stored, keyed by row-major index.
#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceField {
    extent: Extent,
    values: BTreeMap<usize, f64>,
}

impl EvidenceField {
    pub fn empty(extent: Extent) -> Self {
        Self {
            extent,
            values: BTreeMap::new(),
        }
    }

    pub fn extent(&self) -> Extent {
        self.extent
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Evidence at a pixel; zero off the support.
    pub fn get(&self, loc: Location) -> f64 {
        self.values
            .get(&self.extent.index(loc))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn get_index(&self, index: usize) -> f64 {
        self.values.get(&index).copied().unwrap_or(0.0)
    }

    /// `(row-major index, evidence)` pairs in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().map(|(&i, &v)| (i, v))
    }
}

/// Batched [`evidence`] restricted to the kernel support of each location.
pub fn evidence_field(
    extent: Extent,
    locations: &[Location],
    kernel: &CorrelationKernel,
    mode: EvidenceMode,
) -> Result<EvidenceField> {
    for &loc in locations {
        extent.check(loc)?;
    }
    let taps = kernel.taps();
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for &v in locations {
        for tap in &taps {
            let x = v.x as i64 + tap.dx as i64;
            let y = v.y as i64 + tap.dy as i64;
            if x < 0 || y < 0 || x >= extent.width as i64 || y >= extent.height as i64 {
                continue;
            }
            let slot = acc.entry(y as usize * extent.width + x as usize).or_insert(0.0);
            *slot = mode.combine(*slot, tap.value);
        }
    }
    let values = acc
        .into_iter()
        .map(|(i, a)| (i, mode.finish(a)))
        .filter(|&(_, f)| f > 0.0)
        .collect();
    Ok(EvidenceField { extent, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn loc(x: u32, y: u32) -> Location {
        Location::new(x, y)
    }

    #[test]
    fn kernel_values() {
        let flat = CorrelationKernel::new(KernelShape::FlatDisk, 3.0).unwrap();
        assert_eq!(flat.value(loc(4, 4), loc(4, 4)), 1.0);
        assert_eq!(flat.value(loc(4, 4), loc(7, 4)), 0.0);
        assert_eq!(flat.value(loc(4, 4), loc(6, 5)), 1.0);
        let lin = CorrelationKernel::new(KernelShape::LinearFalloff, 4.0).unwrap();
        assert_eq!(lin.value(loc(0, 0), loc(1, 0)), 0.75);
        let quad = CorrelationKernel::new(KernelShape::QuadraticFalloff, 2.0).unwrap();
        assert_eq!(quad.value(loc(0, 0), loc(1, 0)), 0.75);
        assert_eq!(quad.value(loc(0, 0), loc(2, 0)), 0.0);
    }

    #[test]
    fn rejects_bad_radius() {
        assert!(CorrelationKernel::new(KernelShape::FlatDisk, 0.0).is_err());
        assert!(CorrelationKernel::new(KernelShape::FlatDisk, -1.0).is_err());
        assert!(CorrelationKernel::new(KernelShape::FlatDisk, f64::NAN).is_err());
    }

    #[test]
    fn evidence_modes() {
        let lin = CorrelationKernel::new(KernelShape::LinearFalloff, 5.0).unwrap();
        let x = loc(10, 10);
        assert_eq!(evidence(x, &[], &lin, EvidenceMode::Capped), 0.0);
        // Two detections at distance 2 each give C = 0.6.
        let dets = [loc(12, 10), loc(8, 10)];
        assert!((lin.value(x, dets[0]) - 0.6).abs() < 1e-15);
        assert_eq!(evidence(x, &dets, &lin, EvidenceMode::Capped), 1.0);
        assert!((evidence(x, &dets, &lin, EvidenceMode::Unique) - 0.6).abs() < 1e-15);
        let flat = CorrelationKernel::new(KernelShape::FlatDisk, 2.0).unwrap();
        for mode in [EvidenceMode::Capped, EvidenceMode::Unique] {
            assert_eq!(evidence(x, &[x], &flat, mode), 1.0);
        }
    }

    #[test]
    fn field_support_of_unit_flat_disk() {
        let flat = CorrelationKernel::new(KernelShape::FlatDisk, 1.0).unwrap();
        let extent = Extent::new(5, 5);
        let field = evidence_field(extent, &[loc(2, 2)], &flat, EvidenceMode::Unique).unwrap();
        assert_eq!(field.len(), 1);
        assert_eq!(field.get(loc(2, 2)), 1.0);
        assert!(evidence_field(extent, &[], &flat, EvidenceMode::Unique)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn field_rejects_outside_location() {
        let flat = CorrelationKernel::new(KernelShape::FlatDisk, 1.0).unwrap();
        let err = evidence_field(Extent::new(5, 5), &[loc(5, 0)], &flat, EvidenceMode::Unique);
        assert!(matches!(err, Err(Error::OutOfExtent { .. })));
    }

    #[test]
    fn field_matches_pointwise_evidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let extent = Extent::new(40, 30);
        for shape in [
            KernelShape::FlatDisk,
            KernelShape::LinearFalloff,
            KernelShape::QuadraticFalloff,
        ] {
            let kernel = CorrelationKernel::new(shape, rng.gen_range(1.0..6.0)).unwrap();
            let locs: Vec<Location> = (0..12)
                .map(|_| loc(rng.gen_range(0..40), rng.gen_range(0..30)))
                .collect();
            for mode in [EvidenceMode::Capped, EvidenceMode::Unique] {
                let field = evidence_field(extent, &locs, &kernel, mode).unwrap();
                let disk = kernel.taps().len();
                assert!(field.len() <= locs.len() * disk);
                for (i, f) in field.iter() {
                    assert!(f > 0.0);
                    assert_eq!(f, evidence(extent.location(i), &locs, &kernel, mode));
                }
                for _ in 0..100 {
                    let x = loc(rng.gen_range(0..40), rng.gen_range(0..30));
                    assert_eq!(field.get(x), evidence(x, &locs, &kernel, mode));
                }
            }
        }
    }

    fn arb_kernel() -> impl Strategy<Value = CorrelationKernel> {
        (0..3usize, 0.5f64..8.0).prop_map(|(s, r)| {
            let shape = [
                KernelShape::FlatDisk,
                KernelShape::LinearFalloff,
                KernelShape::QuadraticFalloff,
            ][s];
            CorrelationKernel::new(shape, r).unwrap()
        })
    }

    fn arb_loc() -> impl Strategy<Value = Location> {
        (0u32..30, 0u32..30).prop_map(|(x, y)| Location::new(x, y))
    }

    proptest! {
        #[test]
        fn kernel_is_bounded_symmetric_and_compact(k in arb_kernel(), a in arb_loc(), b in arb_loc()) {
            let v = k.value(a, b);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, k.value(b, a));
            prop_assert_eq!(k.value(a, a), 1.0);
            if a.distance(b) >= k.radius() {
                prop_assert_eq!(v, 0.0);
            }
        }

        #[test]
        fn capped_dominates_unique_and_is_monotone(
            k in arb_kernel(),
            x in arb_loc(),
            locs in proptest::collection::vec(arb_loc(), 0..8),
            extra in arb_loc(),
        ) {
            let capped = evidence(x, &locs, &k, EvidenceMode::Capped);
            let unique = evidence(x, &locs, &k, EvidenceMode::Unique);
            prop_assert!(capped >= unique);
            prop_assert!((0.0..=1.0).contains(&capped));
            let mut more = locs.clone();
            more.push(extra);
            for mode in [EvidenceMode::Capped, EvidenceMode::Unique] {
                prop_assert!(evidence(x, &more, &k, mode) >= evidence(x, &locs, &k, mode));
            }
            let nearest = locs.iter().map(|v| x.distance(*v)).fold(f64::INFINITY, f64::min);
            if nearest >= k.radius() {
                prop_assert_eq!(capped, 0.0);
            }
        }
    }
}
