use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::RgbImage;

pub fn load_png(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)?.to_rgb8();
    let (w, h) = img.dimensions();
    RgbImage::new(w as usize, h as usize, img.into_raw())
}

pub fn save_png(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, img.pixels.clone())
        .ok_or_else(|| Error::Shape("pixel buffer does not match image size".into()))?;
    buf.save_with_format(path.as_ref(), image::ImageFormat::Png)?;
    Ok(())
}
