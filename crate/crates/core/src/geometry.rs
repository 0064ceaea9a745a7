//! Pixel grids, locations and 8-bit grayscale rasters.

use crate::error::{Error, Result};

/// Width and height of a raster in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Extent {
    pub width: usize,
    pub height: usize,
}

impl Extent {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn contains(&self, loc: Location) -> bool {
        (loc.x as usize) < self.width && (loc.y as usize) < self.height
    }

    /// Row-major pixel index.
    #[inline]
    pub fn index(&self, loc: Location) -> usize {
        loc.y as usize * self.width + loc.x as usize
    }

    #[inline]
    pub fn location(&self, index: usize) -> Location {
        Location::new((index % self.width) as u32, (index / self.width) as u32)
    }

    pub fn check(&self, loc: Location) -> Result<()> {
        if self.contains(loc) {
            Ok(())
        } else {
            Err(Error::OutOfExtent {
                location: loc,
                extent: *self,
            })
        }
    }

    pub fn expect_same(&self, other: Extent) -> Result<()> {
        if *self == other {
            Ok(())
        } else {
            Err(Error::ExtentMismatch {
                expected: *self,
                found: other,
            })
        }
    }
}

/// Integer pixel coordinate; `x` is the column and `y` the row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location {
    pub x: u32,
    pub y: u32,
}

impl Location {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance_sq(&self, other: Location) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn distance(&self, other: Location) -> f64 {
        self.distance_sq(other).sqrt()
    }

    /// Row-major ordering key (row first, then column).
    #[inline]
    pub fn row_major_key(&self) -> (u32, u32) {
        (self.y, self.x)
    }
}

/// 8-bit grayscale raster in row-major layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    extent: Extent,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(extent: Extent, data: Vec<u8>) -> Result<Self> {
        if data.len() != extent.len() {
            return Err(Error::InvalidParameter(format!(
                "pixel buffer has {} bytes, expected {}",
                data.len(),
                extent.len()
            )));
        }
        Ok(Self { extent, data })
    }

    pub fn filled(extent: Extent, value: u8) -> Self {
        Self {
            extent,
            data: vec![value; extent.len()],
        }
    }

    #[inline]
    pub fn extent(&self) -> Extent {
        self.extent
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.extent.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.extent.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.extent.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.extent.width + x] = value;
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    /// Copy shifted by `(dx, dy)`; uncovered pixels take `fill`.
    pub fn translated(&self, dx: i64, dy: i64, fill: u8) -> GrayImage {
        let mut out = GrayImage::filled(self.extent, fill);
        let (w, h) = (self.width() as i64, self.height() as i64);
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = (x - dx, y - dy);
                if sx >= 0 && sy >= 0 && sx < w && sy < h {
                    out.set(x as usize, y as usize, self.get(sx as usize, sy as usize));
                }
            }
        }
        out
    }
}
