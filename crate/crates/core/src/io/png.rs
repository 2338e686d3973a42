use std::path::Path;

use image::{ColorType, GrayImage, ImageReader, RgbImage};

use crate::error::{Error, Result};
use crate::mask::{LabelMap2D, Mask2D};
use crate::splatting::RenderedImage;

fn load_gray8(path: &Path) -> Result<GrayImage> {
    let ctx = path.display().to_string();
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::format(&ctx, e.to_string()))?;
    if img.color() != ColorType::L8 {
        return Err(Error::format(
            ctx,
            format!("expected 8-bit single-channel PNG, found {:?}", img.color()),
        ));
    }
    Ok(img.into_luma8())
}

fn save_gray8(path: &Path, width: u32, height: u32, data: Vec<u8>) -> Result<()> {
    let img = GrayImage::from_raw(width, height, data).expect("buffer sized from dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

/// Any nonzero pixel is foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask2D> {
    let img = load_gray8(path.as_ref())?;
    let (w, h) = img.dimensions();
    Mask2D::new(w, h, img.into_raw().into_iter().map(|v| v > 0).collect())
}

/// Writes 255 for set pixels, 0 otherwise.
pub fn save_mask(mask: &Mask2D, path: impl AsRef<Path>) -> Result<()> {
    let data = mask.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
    save_gray8(path.as_ref(), mask.width, mask.height, data)
}

/// Raw byte value is the label id.
pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap2D> {
    let img = load_gray8(path.as_ref())?;
    let (w, h) = img.dimensions();
    LabelMap2D::new(w, h, img.into_raw())
}

pub fn save_label_map(map: &LabelMap2D, path: impl AsRef<Path>) -> Result<()> {
    save_gray8(path.as_ref(), map.width, map.height, map.labels.clone())
}

/// 8-bit RGB PNG, rounding half-up.
pub fn save_rendered_png(image: &RenderedImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img = RgbImage::from_raw(image.width, image.height, image.to_rgb8())
        .expect("buffer sized from dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}
