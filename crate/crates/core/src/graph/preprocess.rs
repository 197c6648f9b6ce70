//! Raster to network input.

use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor};

/// Interleaved 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        RgbImage {
            width,
            height,
            pixels: rgb.repeat(width * height),
        }
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * 3 + c]
    }

    /// Copy of the window `[x0, x0 + w) × [y0, y0 + h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<RgbImage> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::InvalidArgument(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{} image",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(w * h * 3);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * 3;
            pixels.extend_from_slice(&self.pixels[start..start + w * 3]);
        }
        Ok(RgbImage {
            width: w,
            height: h,
            pixels,
        })
    }
}

/// Source coordinate and blend weight along one axis (half-pixel centres).
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f32)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, (pos - lo as f64) as f32)
        })
        .collect()
}

/// Bilinear resize to `size × size`, scale to `[0, 1]`, subtract `mean`.
/// Output is `(1, 3, size, size)` in RGB order.
pub fn preprocess(image: &RgbImage, size: usize, mean: [f32; 3]) -> Result<Tensor> {
    if image.width == 0 || image.height == 0 || size == 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot resize a {}x{} image to {size}x{size}",
            image.width, image.height
        )));
    }
    let xs = axis_taps(image.width, size);
    let ys = axis_taps(image.height, size);
    let mut out = Tensor::zeros(Shape4::new(1, 3, size, size));
    let data = out.data_mut();
    for c in 0..3 {
        for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                let p = |x, y| image.get(x, y, c) as f32;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                data[(c * size + oy) * size + ox] = v / 255.0 - mean[c];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_size_is_scaling_only() {
        let pixels: Vec<u8> = (0..4 * 4 * 3).map(|i| (i * 5) as u8).collect();
        let img = RgbImage::new(4, 4, pixels.clone()).unwrap();
        let t = preprocess(&img, 4, [0.0; 3]).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                for c in 0..3 {
                    assert_eq!(t.at(0, c, y, x), img.get(x, y, c) as f32 / 255.0);
                }
            }
        }
    }

    #[test]
    fn constant_stays_constant() {
        let img = RgbImage::filled(64, 64, [10, 20, 30]);
        let t = preprocess(&img, 16, [0.0; 3]).unwrap();
        assert!((0..16 * 16).all(|i| t.data()[i] == 10.0 / 255.0));
    }

    #[test]
    fn checkerboard_averages() {
        let mut px = Vec::new();
        for v in [0u8, 255, 255, 0] {
            px.extend([v; 3]);
        }
        let img = RgbImage::new(2, 2, px).unwrap();
        let t = preprocess(&img, 1, [0.0; 3]).unwrap();
        assert!((t.at(0, 0, 0, 0) - 0.5).abs() < 1e-7);
    }

    #[test]
    fn mean_and_errors() {
        let img = RgbImage::filled(2, 2, [255, 0, 0]);
        let t = preprocess(&img, 2, [0.5, 0.0, 0.25]).unwrap();
        assert_eq!(t.at(0, 0, 0, 0), 0.5);
        assert_eq!(t.at(0, 2, 1, 1), -0.25);
        assert!(preprocess(&RgbImage::filled(0, 3, [0; 3]), 2, [0.0; 3]).is_err());
    }
}
