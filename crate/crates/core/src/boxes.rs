//! Axis-aligned boxes and overlap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Corner-form box. Used both in normalised `[0, 1]` and pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub xmin: f32,
    pub ymin: f32,
    pub xmax: f32,
    pub ymax: f32,
}

impl BBox {
    pub const fn new(xmin: f32, ymin: f32, xmax: f32, ymax: f32) -> Self {
        BBox {
            xmin,
            ymin,
            xmax,
            ymax,
        }
    }

    pub fn from_center(cx: f32, cy: f32, w: f32, h: f32) -> Self {
        BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn width(&self) -> f32 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f32 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f32 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    /// Finite with positive extent on both axes.
    pub fn is_valid(&self) -> bool {
        [self.xmin, self.ymin, self.xmax, self.ymax]
            .iter()
            .all(|v| v.is_finite())
            && self.xmin < self.xmax
            && self.ymin < self.ymax
    }

    pub fn checked(self) -> Result<Self> {
        if self.is_valid() {
            Ok(self)
        } else {
            Err(Error::DegenerateBox(self.xmin, self.ymin, self.xmax, self.ymax))
        }
    }

    pub fn translate(&self, dx: f32, dy: f32) -> Self {
        BBox::new(self.xmin + dx, self.ymin + dy, self.xmax + dx, self.ymax + dy)
    }

    pub fn scale(&self, sx: f32, sy: f32) -> Self {
        BBox::new(self.xmin * sx, self.ymin * sy, self.xmax * sx, self.ymax * sy)
    }
}

/// Intersection over union without validation; 0 when the union is empty.
pub(crate) fn iou_unchecked(a: &BBox, b: &BBox) -> f32 {
    let iw = (a.xmax.min(b.xmax) - a.xmin.max(b.xmin)).max(0.0);
    let ih = (a.ymax.min(b.ymax) - a.ymin.max(b.ymin)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Intersection over union of two valid boxes.
pub fn iou(a: &BBox, b: &BBox) -> Result<f32> {
    a.checked()?;
    b.checked()?;
    Ok(iou_unchecked(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_examples() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &BBox::new(5.0, 5.0, 6.0, 6.0)).unwrap(), 0.0);
        let v = iou(&a, &BBox::new(1.0, 1.0, 3.0, 3.0)).unwrap();
        assert!((v - 1.0 / 7.0).abs() < 1e-7);
    }

    #[test]
    fn degenerate_rejected() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        assert!(iou(&a, &BBox::new(1.0, 1.0, 1.0, 3.0)).is_err());
        assert!(iou(&BBox::new(0.0, f32::NAN, 1.0, 1.0), &a).is_err());
    }
}
