//! Final detection extraction from a master objectness field.

use std::fmt;
use std::str::FromStr;

use crate::geometry::Extent;
use crate::hos::{ObjectnessField, ScoredLocation};
use crate::peaks;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExtractionMethod {
    /// Large local maxima of the box-smoothed field.
    Llm,
    /// Maxima of a kernel density estimate over unsmoothed LLM locations.
    Kde,
}

impl ExtractionMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            ExtractionMethod::Llm => "llm",
            ExtractionMethod::Kde => "kde",
        }
    }
}

impl fmt::Display for ExtractionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ExtractionMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm" => Ok(ExtractionMethod::Llm),
            "kde" => Ok(ExtractionMethod::Kde),
            other => Err(format!("unknown extraction method `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractionParams {
    pub method: ExtractionMethod,
    pub smoothing_radius: u32,
    pub kde_radius: f64,
    /// Operating point; detections below it are dropped.
    pub threshold: f64,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        Self {
            method: ExtractionMethod::Llm,
            smoothing_radius: 0,
            kde_radius: 4.0,
            threshold: 0.0,
        }
    }
}

/// Mean over the `(2r+1)²` window around each pixel, with pixels outside
/// the image counted as zero.
pub fn box_smooth(values: &[f64], extent: Extent, radius: u32) -> Vec<f64> {
    assert_eq!(values.len(), extent.len(), "raster size mismatch");
    if radius == 0 || extent.is_empty() {
        return values.to_vec();
    }
    let (w, h, r) = (extent.width, extent.height, radius as usize);
    let mut rows = vec![0.0; values.len()];
    for y in 0..h {
        let row = &values[y * w..(y + 1) * w];
        for x in 0..w {
            let (lo, hi) = (x.saturating_sub(r), (x + r).min(w - 1));
            rows[y * w + x] = row[lo..=hi].iter().sum::<f64>();
        }
    }
    let area = ((2 * r + 1) * (2 * r + 1)) as f64;
    let mut out = vec![0.0; values.len()];
    for x in 0..w {
        for y in 0..h {
            let (lo, hi) = (y.saturating_sub(r), (y + r).min(h - 1));
            let s: f64 = (lo..=hi).map(|yy| rows[yy * w + x]).sum();
            out[y * w + x] = s / area;
        }
    }
    out
}

/// Positive local maxima of the smoothed field with value `≥ threshold`.
pub fn detect_llm(field: &ObjectnessField, smoothing_radius: u32, threshold: f64) -> Vec<ScoredLocation> {
    let smoothed = box_smooth(field.values(), field.extent(), smoothing_radius);
    peaks::local_maxima_where(&smoothed, field.extent(), |v| v > 0.0 && v >= threshold)
}

/// Confidence-weighted Epanechnikov density over `detect_llm(field, 0, 0)`
/// and its positive local maxima with value `≥ threshold`.
pub fn detect_kde(field: &ObjectnessField, kde_radius: f64, threshold: f64) -> Vec<ScoredLocation> {
    let extent = field.extent();
    let points = detect_llm(field, 0, 0.0);
    if points.is_empty() || !(kde_radius > 0.0) {
        return Vec::new();
    }
    let mut density = vec![0.0; extent.len()];
    let reach = kde_radius.ceil() as i64;
    let r2 = kde_radius * kde_radius;
    for p in &points {
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (x, y) = (p.x as i64 + dx, p.y as i64 + dy);
                if x < 0 || y < 0 || x >= extent.width as i64 || y >= extent.height as i64 {
                    continue;
                }
                let k = 1.0 - (dx * dx + dy * dy) as f64 / r2;
                if k > 0.0 {
                    density[y as usize * extent.width + x as usize] += p.confidence * k;
                }
            }
        }
    }
    peaks::local_maxima_where(&density, extent, |v| v > 0.0 && v >= threshold)
}

/// Dispatches on the extraction method.
pub fn detect(field: &ObjectnessField, params: &ExtractionParams) -> Vec<ScoredLocation> {
    match params.method {
        ExtractionMethod::Llm => detect_llm(field, params.smoothing_radius, params.threshold),
        ExtractionMethod::Kde => detect_kde(field, params.kde_radius, params.threshold),
    }
}
