//! Dense NCHW tensors.
//!
//! Every activation and weight in the engine is a [`Tensor`]: a contiguous
//! `f32` buffer laid out row-major over `(n, c, h, w)`. Tensors are never
//! mutated after construction by the public API; channel slices copy.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Shape4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape4 {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape4 { n, c, h, w }
    }

    pub const fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    /// Elements in one `(h, w)` plane.
    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    /// Linear offset of `(n, c, h, w)`.
    #[inline]
    pub const fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.c + c) * self.h + h) * self.w + w
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }
}

impl fmt::Display for Shape4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Shape4,
    data: Vec<f32>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("len", &self.data.len())
            .finish()
    }
}

impl Tensor {
    pub fn full(shape: Shape4, value: f32) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.numel()],
        }
    }

    pub fn zeros(shape: Shape4) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn from_vec(shape: Shape4, data: Vec<f32>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::LengthMismatch {
                shape: shape.to_string(),
                len: data.len(),
                expected: shape.numel(),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> f32 {
        self.data[self.shape.index(n, c, h, w)]
    }

    /// Contiguous `(h, w)` plane of channel `c` in batch item `n`.
    pub fn channel(&self, n: usize, c: usize) -> &[f32] {
        let start = self.shape.index(n, c, 0, 0);
        &self.data[start..start + self.shape.plane()]
    }

    /// Copy of channels `lo..hi`.
    pub fn slice_channels(&self, lo: usize, hi: usize) -> Result<Tensor> {
        let s = self.shape;
        if lo >= hi || hi > s.c {
            return Err(Error::ChannelRange {
                lo,
                hi,
                channels: s.c,
            });
        }
        let out_shape = Shape4::new(s.n, hi - lo, s.h, s.w);
        let mut data = Vec::with_capacity(out_shape.numel());
        for n in 0..s.n {
            let start = s.index(n, lo, 0, 0);
            let end = s.index(n, hi - 1, 0, 0) + s.plane();
            data.extend_from_slice(&self.data[start..end]);
        }
        Ok(Tensor {
            shape: out_shape,
            data,
        })
    }

    /// Concatenate along the channel axis, preserving list order.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of an empty list".into()))?
            .shape;
        let mut channels = 0;
        for p in parts {
            let s = p.shape;
            if (s.n, s.h, s.w) != (first.n, first.h, first.w) {
                return Err(Error::Shape(format!(
                    "cannot concatenate {s} with {first} along channels"
                )));
            }
            channels += s.c;
        }
        let out_shape = Shape4::new(first.n, channels, first.h, first.w);
        let mut data = Vec::with_capacity(out_shape.numel());
        for n in 0..first.n {
            for p in parts {
                let s = p.shape;
                let start = s.index(n, 0, 0, 0);
                data.extend_from_slice(&p.data[start..start + s.c * s.plane()]);
            }
        }
        Ok(Tensor {
            shape: out_shape,
            data,
        })
    }

    /// Element-wise sum of two tensors of identical shape.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "cannot add {} and {}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor {
            shape: self.shape,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Per-channel means over `(n, h, w)`.
    pub fn channel_means(&self) -> Vec<f32> {
        let s = self.shape;
        (0..s.c)
            .map(|c| {
                let sum: f64 = (0..s.n)
                    .flat_map(|n| self.channel(n, c).iter())
                    .map(|&v| v as f64)
                    .sum();
                (sum / (s.n * s.plane()) as f64) as f32
            })
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert_eq!(self.shape, other.shape, "max_abs_diff on mismatched shapes");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_tensor() {
        let t = Tensor::zeros(Shape4::new(1, 1, 1, 1));
        assert_eq!(t.data(), &[0.0]);
    }

    #[test]
    fn layout_formula() {
        let s = Shape4::new(1, 2, 2, 2);
        let t = Tensor::full(s, 1.0);
        assert_eq!(t.data().len(), 8);
        assert!(t.data().iter().all(|&v| v == 1.0));
        assert_eq!(s.index(0, 1, 1, 1), 7);

        let t = Tensor::from_vec(Shape4::new(1, 3, 2, 2), (0..12).map(|v| v as f32).collect())
            .unwrap();
        assert_eq!(t.at(0, 2, 1, 0), 10.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        let err = Tensor::from_vec(Shape4::new(1, 2, 2, 2), vec![0.0; 7]).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { len: 7, expected: 8, .. }));
    }

    #[test]
    fn layout_enumeration_is_strictly_increasing() {
        let s = Shape4::new(2, 3, 4, 5);
        let mut last = None;
        for n in 0..s.n {
            for c in 0..s.c {
                for h in 0..s.h {
                    for w in 0..s.w {
                        let i = s.index(n, c, h, w);
                        if let Some(prev) = last {
                            assert_eq!(i, prev + 1);
                        }
                        last = Some(i);
                    }
                }
            }
        }
        assert_eq!(last, Some(s.numel() - 1));
    }

    #[test]
    fn slicing() {
        let t = Tensor::from_vec(Shape4::new(1, 4, 1, 1), vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(t.slice_channels(0, 4).unwrap(), t);
        let mid = t.slice_channels(1, 3).unwrap();
        assert_eq!(mid.shape(), Shape4::new(1, 2, 1, 1));
        assert_eq!(mid.data(), &[6.0, 7.0]);

        let t = Tensor::from_vec(Shape4::new(1, 8, 2, 2), (0..32).map(|v| v as f32).collect())
            .unwrap();
        let first = t.slice_channels(0, 1).unwrap();
        assert_eq!(first.shape(), Shape4::new(1, 1, 2, 2));
        assert_eq!(first.data(), &t.data()[..4]);
    }

    #[test]
    fn slice_bounds() {
        let t = Tensor::zeros(Shape4::new(1, 4, 1, 1));
        assert!(t.slice_channels(2, 2).is_err());
        assert!(t.slice_channels(3, 5).is_err());
    }

    #[test]
    fn concat() {
        let a = Tensor::full(Shape4::new(1, 2, 3, 3), 1.0);
        assert_eq!(Tensor::concat_channels(&[&a]).unwrap(), a);

        let b = Tensor::from_vec(Shape4::new(1, 3, 3, 3), (0..27).map(|v| v as f32).collect())
            .unwrap();
        let ab = Tensor::concat_channels(&[&a, &b]).unwrap();
        assert_eq!(ab.shape().c, 5);
        assert_eq!(ab.slice_channels(2, 5).unwrap(), b);

        let p1 = Tensor::full(Shape4::new(1, 1, 2, 2), 1.0);
        let p2 = Tensor::full(Shape4::new(1, 1, 2, 2), 2.0);
        let p3 = Tensor::full(Shape4::new(1, 2, 2, 2), 3.0);
        let out = Tensor::concat_channels(&[&p1, &p2, &p3]).unwrap();
        assert_eq!(out.channel_means(), vec![1.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn concat_rejects_mismatch() {
        let a = Tensor::zeros(Shape4::new(1, 2, 3, 3));
        let b = Tensor::zeros(Shape4::new(1, 2, 3, 4));
        assert!(Tensor::concat_channels(&[&a, &b]).is_err());
        assert!(Tensor::concat_channels(&[]).is_err());
    }
}
