//! Detection and ROC output files.

use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::RocCurve;
use crate::hos::ScoredLocation;
use crate::peaks;

use super::model::format_real;
use super::{content_lines, read_text, write_text};

/// Detections of one image, tagged with its id.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageDetections {
    pub id: String,
    pub detections: Vec<ScoredLocation>,
}

/// `image_id x y confidence` lines, confidence-descending across all
/// images; ties follow image order, then row-major order.
pub fn format_detections(images: &[ImageDetections]) -> String {
    let mut all: Vec<(usize, ScoredLocation)> = Vec::new();
    for (i, img) in images.iter().enumerate() {
        let mut d = img.detections.clone();
        peaks::sort_by_confidence(&mut d);
        all.extend(d.into_iter().map(|d| (i, d)));
    }
    all.sort_by(|a, b| b.1.confidence.total_cmp(&a.1.confidence).then(a.0.cmp(&b.0)));
    all.iter()
        .map(|(i, d)| format!("{} {} {} {}\n", images[*i].id, d.x, d.y, format_real(d.confidence)))
        .collect()
}

/// Groups detection lines by image id, in first-appearance order.
pub fn parse_detections(text: &str, path: &Path) -> Result<Vec<ImageDetections>> {
    let mut out: Vec<ImageDetections> = Vec::new();
    for (line, content) in content_lines(text) {
        let parts: Vec<&str> = content.split_whitespace().collect();
        let [id, x, y, c] = parts[..] else {
            return Err(Error::parse(path, line, "expected `image_id x y confidence`"));
        };
        let bad = |what: &str, v: &str| Error::parse(path, line, format!("bad {what} `{v}`"));
        let x: u32 = x.parse().map_err(|_| bad("x", x))?;
        let y: u32 = y.parse().map_err(|_| bad("y", y))?;
        let c: f64 = c.parse().map_err(|_| bad("confidence", c))?;
        if !c.is_finite() {
            return Err(bad("confidence", parts[3]));
        }
        let d = ScoredLocation::new(x, y, c);
        match out.iter_mut().find(|e| e.id == id) {
            Some(e) => e.detections.push(d),
            None => out.push(ImageDetections {
                id: id.to_owned(),
                detections: vec![d],
            }),
        }
    }
    Ok(out)
}

pub fn write_detections(path: &Path, images: &[ImageDetections]) -> Result<()> {
    write_text(path, &format_detections(images))
}

pub fn read_detections(path: &Path) -> Result<Vec<ImageDetections>> {
    parse_detections(&read_text(path)?, path)
}

/// Header with the metric parameters and summary numbers, then
/// `threshold fpr detection_rate` rows.
pub fn format_roc(curve: &RocCurve, average_precision: f64) -> String {
    let mut out = format!(
        "# delta {}\n# truncation {}\n# aroc {}\n# ap {}\n# threshold fpr detection_rate\n",
        curve.delta, curve.truncation, curve.area, average_precision
    );
    for p in &curve.points {
        out.push_str(&format!("{} {} {}\n", format_real(p.threshold), p.fpr, p.detection_rate));
    }
    out
}

pub fn write_roc(path: &Path, curve: &RocCurve, average_precision: f64) -> Result<()> {
    write_text(path, &format_roc(curve, average_precision))
}
