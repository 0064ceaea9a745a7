//! Portable graymap files, written as binary `P5` with 8-bit samples.

use std::fs;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{Error, Result};
use crate::geometry::{Extent, GrayImage};

pub fn encode(image: &GrayImage) -> std::result::Result<Vec<u8>, String> {
    let mut out = Vec::with_capacity(image.pixels().len() + 16);
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(image.pixels(), image.width() as u32, image.height() as u32, ExtendedColorType::L8)
        .map_err(|e| e.to_string())?;
    Ok(out)
}

/// Decodes a graymap. Deeper samples are rescaled to 8 bits.
pub fn decode(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Pnm).map_err(|e| e.to_string())?;
    if decoded.color().has_color() {
        return Err("not a graymap".into());
    }
    let gray = decoded.into_luma8();
    let extent = Extent::new(gray.width() as usize, gray.height() as usize);
    GrayImage::new(extent, gray.into_raw()).map_err(|e| e.to_string())
}

pub fn read(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|m| Error::parse(path, 1, m))
}

pub fn write(path: &Path, image: &GrayImage) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let bytes = encode(image).map_err(|m| Error::InvalidParameter(format!("{}: {m}", path.display())))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
