use crate::error::{Error, Result};
use crate::geometry::{Extent, Location};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PixelLabel {
    Object,
    Background,
    DontCare,
}

/// Per-pixel labels for one training image.
///
/// Object centers are labeled [`PixelLabel::Object`]; every other pixel
/// strictly within `dont_care_radius` of a center is
/// [`PixelLabel::DontCare`]; the rest is background.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingMask {
    extent: Extent,
    labels: Vec<PixelLabel>,
    objects: Vec<Location>,
    background: usize,
    dont_care_radius: f64,
    background_discount: f64,
}

impl TrainingMask {
    pub fn new(extent: Extent, objects: &[Location], dont_care_radius: f64) -> Result<Self> {
        if !(dont_care_radius >= 0.0 && dont_care_radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "don't-care radius must be finite and non-negative, got {dont_care_radius}"
            )));
        }
        let mut centers = Vec::with_capacity(objects.len());
        for &o in objects {
            extent.check(o)?;
            if !centers.contains(&o) {
                centers.push(o);
            }
        }
        centers.sort_by_key(|l| l.row_major_key());

        let mut labels = vec![PixelLabel::Background; extent.len()];
        let reach = dont_care_radius.ceil() as i64;
        let r2 = dont_care_radius * dont_care_radius;
        for c in &centers {
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    let (x, y) = (c.x as i64 + dx, c.y as i64 + dy);
                    if x < 0 || y < 0 || x >= extent.width as i64 || y >= extent.height as i64 {
                        continue;
                    }
                    if ((dx * dx + dy * dy) as f64) < r2 {
                        labels[y as usize * extent.width + x as usize] = PixelLabel::DontCare;
                    }
                }
            }
        }
        for c in &centers {
            labels[extent.index(*c)] = PixelLabel::Object;
        }
        let background = labels.iter().filter(|&&l| l == PixelLabel::Background).count();
        let background_discount = if background == 0 {
            1.0
        } else {
            centers.len() as f64 / background as f64
        };
        Ok(Self {
            extent,
            labels,
            objects: centers,
            background,
            dont_care_radius,
            background_discount,
        })
    }

    /// Replaces the default discount `|obj| / |bg|`.
    pub fn with_background_discount(mut self, b: f64) -> Self {
        self.background_discount = b;
        self
    }

    pub fn set_background_discount(&mut self, b: f64) {
        self.background_discount = b;
    }

    pub fn extent(&self) -> Extent {
        self.extent
    }

    pub fn labels(&self) -> &[PixelLabel] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, index: usize) -> PixelLabel {
        self.labels[index]
    }

    pub fn objects(&self) -> &[Location] {
        &self.objects
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn background_count(&self) -> usize {
        self.background
    }

    pub fn dont_care_radius(&self) -> f64 {
        self.dont_care_radius
    }

    pub fn background_discount(&self) -> f64 {
        self.background_discount
    }
}
