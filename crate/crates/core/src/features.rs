//! Random image features whose response-map local maxima serve as
//! confidence-rated weak detectors.
//!
//! Haar-like kinds are evaluated on an integral image with exact integer
//! arithmetic, so a descriptor yields bit-identical detections everywhere.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Extent, GrayImage};
use crate::hos::ScoredLocation;
use crate::peaks;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    /// Difference of two adjacent cells.
    HaarTwoRect,
    /// Twice the middle cell minus its two flanking cells.
    HaarThreeRect,
    /// Diagonal cells minus off-diagonal cells of a 2×2 block.
    HaarCheckerboard,
    /// Mean over a `(2·scale+1)²` box.
    BoxSmooth,
    /// Central-difference gradient magnitude of the `scale`-box-smoothed image.
    GradientMagnitude,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::HaarTwoRect,
        FeatureKind::HaarThreeRect,
        FeatureKind::HaarCheckerboard,
        FeatureKind::BoxSmooth,
        FeatureKind::GradientMagnitude,
    ];
    pub const HAAR: [FeatureKind; 3] = [
        FeatureKind::HaarTwoRect,
        FeatureKind::HaarThreeRect,
        FeatureKind::HaarCheckerboard,
    ];

    pub fn is_haar(&self) -> bool {
        Self::HAAR.contains(self)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            FeatureKind::HaarTwoRect => "haar2",
            FeatureKind::HaarThreeRect => "haar3",
            FeatureKind::HaarCheckerboard => "haar4",
            FeatureKind::BoxSmooth => "box",
            FeatureKind::GradientMagnitude => "grad",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| format!("unknown feature kind `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

impl Orientation {
    pub fn tag(&self) -> &'static str {
        match self {
            Orientation::Horizontal => "h",
            Orientation::Vertical => "v",
        }
    }
}

impl FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "h" => Ok(Orientation::Horizontal),
            "v" => Ok(Orientation::Vertical),
            other => Err(format!("unknown orientation `{other}`")),
        }
    }
}

/// Cell size and window-center offset, both in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Geometry {
    pub cell_w: u32,
    pub cell_h: u32,
    pub offset_x: i32,
    pub offset_y: i32,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            cell_w: 1,
            cell_h: 1,
            offset_x: 0,
            offset_y: 0,
        }
    }
}

/// Where a descriptor came from: sampler seed and draw index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Lineage {
    pub seed: u64,
    pub draw: u64,
}

/// Fully determines a response map for any image.
///
/// For Haar kinds each cell is `cell_w·scale × cell_h·scale`; for
/// [`FeatureKind::BoxSmooth`] and [`FeatureKind::GradientMagnitude`] `scale`
/// is the box radius and the cell sizes are ignored. The window is centered
/// at the evaluated pixel plus `(offset_x, offset_y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FeatureDescriptor {
    pub kind: FeatureKind,
    pub orientation: Orientation,
    pub geometry: Geometry,
    pub scale: u32,
    pub polarity: i8,
    pub lineage: Lineage,
}

/// Feature window in pixels relative to the evaluated pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub left: i64,
    pub top: i64,
    pub width: usize,
    pub height: usize,
}

impl FeatureDescriptor {
    fn cell(&self) -> (usize, usize) {
        let s = self.scale.max(1) as usize;
        (self.geometry.cell_w as usize * s, self.geometry.cell_h as usize * s)
    }

    pub fn window(&self) -> Window {
        let (cw, ch) = self.cell();
        let (width, height) = match (self.kind, self.orientation) {
            (FeatureKind::HaarTwoRect, Orientation::Horizontal) => (2 * cw, ch),
            (FeatureKind::HaarTwoRect, Orientation::Vertical) => (cw, 2 * ch),
            (FeatureKind::HaarThreeRect, Orientation::Horizontal) => (3 * cw, ch),
            (FeatureKind::HaarThreeRect, Orientation::Vertical) => (cw, 3 * ch),
            (FeatureKind::HaarCheckerboard, _) => (2 * cw, 2 * ch),
            (FeatureKind::BoxSmooth, _) => {
                let side = 2 * self.scale as usize + 1;
                (side, side)
            }
            (FeatureKind::GradientMagnitude, _) => {
                let side = 2 * self.scale as usize + 3;
                (side, side)
            }
        };
        Window {
            left: self.geometry.offset_x as i64 - (width / 2) as i64,
            top: self.geometry.offset_y as i64 - (height / 2) as i64,
            width,
            height,
        }
    }

    /// Response map of `image`.
    pub fn response_map(&self, image: &GrayImage) -> Result<ResponseMap> {
        self.response_map_integral(&IntegralImage::new(image))
    }

    pub fn response_map_integral(&self, ii: &IntegralImage) -> Result<ResponseMap> {
        let extent = ii.extent();
        let win = self.window();
        if win.width > extent.width || win.height > extent.height {
            return Err(Error::WindowTooLarge {
                window_w: win.width,
                window_h: win.height,
                extent,
            });
        }
        // Range of pixels whose window lies inside the image.
        let x0 = (-win.left).max(0);
        let y0 = (-win.top).max(0);
        let x1 = (extent.width as i64 - win.width as i64 - win.left).min(extent.width as i64 - 1);
        let y1 = (extent.height as i64 - win.height as i64 - win.top).min(extent.height as i64 - 1);
        if x0 > x1 || y0 > y1 {
            return Err(Error::WindowTooLarge {
                window_w: win.width,
                window_h: win.height,
                extent,
            });
        }

        let mut values = vec![f64::NAN; extent.len()];
        let mut min = f64::INFINITY;
        let polarity = self.polarity as f64;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (l, t) = ((x + win.left) as usize, (y + win.top) as usize);
                let v = polarity * self.evaluate(ii, l, t, win);
                min = min.min(v);
                values[y as usize * extent.width + x as usize] = v;
            }
        }
        for v in values.iter_mut() {
            if v.is_nan() {
                *v = min;
            }
        }
        Ok(ResponseMap { extent, values })
    }

    fn evaluate(&self, ii: &IntegralImage, l: usize, t: usize, win: Window) -> f64 {
        let (cw, ch) = self.cell();
        match (self.kind, self.orientation) {
            (FeatureKind::HaarTwoRect, Orientation::Horizontal) => {
                (ii.sum(l, t, cw, ch) - ii.sum(l + cw, t, cw, ch)) as f64
            }
            (FeatureKind::HaarTwoRect, Orientation::Vertical) => {
                (ii.sum(l, t, cw, ch) - ii.sum(l, t + ch, cw, ch)) as f64
            }
            (FeatureKind::HaarThreeRect, Orientation::Horizontal) => {
                (2 * ii.sum(l + cw, t, cw, ch) - ii.sum(l, t, cw, ch) - ii.sum(l + 2 * cw, t, cw, ch)) as f64
            }
            (FeatureKind::HaarThreeRect, Orientation::Vertical) => {
                (2 * ii.sum(l, t + ch, cw, ch) - ii.sum(l, t, cw, ch) - ii.sum(l, t + 2 * ch, cw, ch)) as f64
            }
            (FeatureKind::HaarCheckerboard, _) => (ii.sum(l, t, cw, ch) + ii.sum(l + cw, t + ch, cw, ch)
                - ii.sum(l + cw, t, cw, ch)
                - ii.sum(l, t + ch, cw, ch)) as f64,
            (FeatureKind::BoxSmooth, _) => {
                ii.sum(l, t, win.width, win.height) as f64 / (win.width * win.height) as f64
            }
            (FeatureKind::GradientMagnitude, _) => {
                let side = 2 * self.scale as usize + 1;
                let (cx, cy) = (l + 1, t + 1);
                let gx = ii.sum(cx + 1, cy, side, side) - ii.sum(cx - 1, cy, side, side);
                let gy = ii.sum(cx, cy + 1, side, side) - ii.sum(cx, cy - 1, side, side);
                ((gx * gx + gy * gy) as f64).sqrt() / (2 * side * side) as f64
            }
        }
    }

    /// Confidence-rated detections of this feature on one image.
    pub fn detect(&self, ii: &IntegralImage) -> Result<Vec<ScoredLocation>> {
        Ok(to_detector(&self.response_map_integral(ii)?))
    }
}

/// Real-valued per-pixel feature response.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseMap {
    pub extent: Extent,
    pub values: Vec<f64>,
}

impl ResponseMap {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.extent.width + x]
    }
}

/// Local maxima of a response map as a confidence-rated detector.
pub fn to_detector(response: &ResponseMap) -> Vec<ScoredLocation> {
    peaks::local_maxima(&response.values, response.extent)
}

/// Summed-area table with one row and column of zero padding.
#[derive(Clone, Debug)]
pub struct IntegralImage {
    extent: Extent,
    table: Vec<i64>,
}

impl IntegralImage {
    pub fn new(image: &GrayImage) -> Self {
        let extent = image.extent();
        let stride = extent.width + 1;
        let mut table = vec![0i64; stride * (extent.height + 1)];
        for y in 0..extent.height {
            let mut row = 0i64;
            for x in 0..extent.width {
                row += image.get(x, y) as i64;
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            }
        }
        Self { extent, table }
    }

    pub fn extent(&self) -> Extent {
        self.extent
    }

    /// Sum over the `w × h` rectangle with top-left corner `(x, y)`.
    #[inline]
    pub fn sum(&self, x: usize, y: usize, w: usize, h: usize) -> i64 {
        let stride = self.extent.width + 1;
        let (x1, y1) = (x + w, y + h);
        self.table[y1 * stride + x1] - self.table[y * stride + x1] - self.table[y1 * stride + x]
            + self.table[y * stride + x]
    }
}

/// Which feature kinds a sampler may draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Grammar {
    Rich,
    HaarOnly,
}

impl Grammar {
    pub fn tag(&self) -> &'static str {
        match self {
            Grammar::Rich => "rich",
            Grammar::HaarOnly => "haar",
        }
    }

    pub fn kinds(&self) -> &'static [FeatureKind] {
        match self {
            Grammar::Rich => &FeatureKind::ALL,
            Grammar::HaarOnly => &FeatureKind::HAAR,
        }
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Grammar {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rich" => Ok(Grammar::Rich),
            "haar" => Ok(Grammar::HaarOnly),
            other => Err(format!("unknown grammar `{other}`")),
        }
    }
}

/// Inclusive bounds for sampled geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureSpace {
    pub max_cell: u32,
    pub max_offset: i32,
    pub max_scale: u32,
}

impl Default for FeatureSpace {
    fn default() -> Self {
        Self {
            max_cell: 6,
            max_offset: 2,
            max_scale: 3,
        }
    }
}

/// Draws one descriptor from `rng`.
pub fn sample_feature<R: Rng>(rng: &mut R, grammar: Grammar, space: &FeatureSpace, lineage: Lineage) -> FeatureDescriptor {
    let kinds = grammar.kinds();
    let kind = kinds[rng.gen_range(0..kinds.len())];
    let orientation = if rng.gen_bool(0.5) {
        Orientation::Horizontal
    } else {
        Orientation::Vertical
    };
    let geometry = Geometry {
        cell_w: rng.gen_range(1..=space.max_cell),
        cell_h: rng.gen_range(1..=space.max_cell),
        offset_x: rng.gen_range(-space.max_offset..=space.max_offset),
        offset_y: rng.gen_range(-space.max_offset..=space.max_offset),
    };
    let min_scale = if kind == FeatureKind::GradientMagnitude { 0 } else { 1 };
    let scale = rng.gen_range(min_scale..=space.max_scale);
    let polarity = if rng.gen_bool(0.5) { 1 } else { -1 };
    FeatureDescriptor {
        kind,
        orientation,
        geometry,
        scale,
        polarity,
        lineage,
    }
}

/// Reproducible stream of descriptors: draw `i` depends only on
/// `(seed, i)`.
#[derive(Clone, Copy, Debug)]
pub struct FeatureSampler {
    pub seed: u64,
    pub grammar: Grammar,
    pub space: FeatureSpace,
}

impl FeatureSampler {
    pub fn new(seed: u64, grammar: Grammar, space: FeatureSpace) -> Self {
        Self { seed, grammar, space }
    }

    pub fn draw(&self, index: u64) -> FeatureDescriptor {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        sample_feature(
            &mut rng,
            self.grammar,
            &self.space,
            Lineage {
                seed: self.seed,
                draw: index,
            },
        )
    }
}
