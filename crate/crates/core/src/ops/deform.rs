//! Deformable convolution with bilinear sampling.
//!
//! Each kernel tap `(i, j)` of output location `(oy, ox)` reads the input at
//! `(oy·s − p + i + dy, ox·s − p + j + dx)` where `(dy, dx)` comes from the
//! offset field at channels `2·(i·k + j)` and `2·(i·k + j) + 1`. Fractional
//! positions blend the four surrounding pixels; neighbours outside the input
//! contribute zero, matching zero padding.

use super::conv::ConvParams;
use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor};

/// Per-tap `(dy, dx)` displacements, shaped `(n, 2·k², h_out, w_out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetField(Tensor);

impl OffsetField {
    pub fn new(offsets: Tensor, kernel: usize) -> Result<Self> {
        let c = offsets.shape().c;
        if c != 2 * kernel * kernel {
            return Err(Error::Shape(format!(
                "offset field has {c} channels, kernel {kernel} needs {}",
                2 * kernel * kernel
            )));
        }
        if offsets.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("offset field contains non-finite values".into()));
        }
        Ok(OffsetField(offsets))
    }

    pub fn zeros(n: usize, kernel: usize, h: usize, w: usize) -> Self {
        OffsetField(Tensor::zeros(Shape4::new(n, 2 * kernel * kernel, h, w)))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }
}

/// Bilinear corner weights and flat indices of one sampling point.
#[derive(Clone, Copy)]
struct Sample {
    idx: [usize; 4],
    wt: [f32; 4],
}

impl Sample {
    fn at(y: f32, x: f32, h: usize, w: usize) -> Sample {
        let mut s = Sample {
            idx: [0; 4],
            wt: [0.0; 4],
        };
        let y0 = y.floor();
        let x0 = x.floor();
        let ly = y - y0;
        let lx = x - x0;
        let corners = [
            (y0, x0, (1.0 - ly) * (1.0 - lx)),
            (y0, x0 + 1.0, (1.0 - ly) * lx),
            (y0 + 1.0, x0, ly * (1.0 - lx)),
            (y0 + 1.0, x0 + 1.0, ly * lx),
        ];
        for (slot, (cy, cx, wt)) in corners.into_iter().enumerate() {
            if wt != 0.0 && cy >= 0.0 && cx >= 0.0 && (cy as usize) < h && (cx as usize) < w {
                s.idx[slot] = cy as usize * w + cx as usize;
                s.wt[slot] = wt;
            }
        }
        s
    }

    #[inline]
    fn read(&self, plane: &[f32]) -> f32 {
        let mut v = 0.0;
        for c in 0..4 {
            if self.wt[c] != 0.0 {
                v += self.wt[c] * plane[self.idx[c]];
            }
        }
        v
    }
}

/// Bilinear read of a single channel plane at a fractional position.
pub fn bilinear_sample(plane: &[f32], h: usize, w: usize, y: f32, x: f32) -> f32 {
    Sample::at(y, x, h, w).read(plane)
}

pub fn deformable_conv2d(input: &Tensor, offsets: &OffsetField, p: &ConvParams) -> Result<Tensor> {
    p.validate()?;
    let s = input.shape();
    let cin_g = p.in_channels_per_group();
    if s.c != cin_g * p.groups {
        return Err(Error::Shape(format!(
            "deformable conv expects {} input channels, got {}",
            cin_g * p.groups,
            s.c
        )));
    }
    let k = p.kernel();
    let taps = k * k;
    let (oh_n, ow_n) = p.output_hw(s.h, s.w)?;
    let off = offsets.tensor().shape();
    if off != Shape4::new(s.n, 2 * taps, oh_n, ow_n) {
        return Err(Error::Shape(format!(
            "offset field {off} does not match output ({}, {}, {oh_n}, {ow_n})",
            s.n,
            2 * taps
        )));
    }
    let positions = oh_n * ow_n;
    let cout = p.out_channels();
    let cout_g = cout / p.groups;
    let out_shape = Shape4::new(s.n, cout, oh_n, ow_n);
    let mut out = vec![0.0f32; out_shape.numel()];
    let wdata = p.weights.data();

    let mut samples = vec![
        Sample {
            idx: [0; 4],
            wt: [0.0; 4]
        };
        taps * positions
    ];
    // columns[(ic·k² + tap)·P + pos]
    let mut columns = vec![0.0f32; s.c * taps * positions];

    for n in 0..s.n {
        let field = offsets.tensor();
        for i in 0..k {
            for j in 0..k {
                let tap = i * k + j;
                let dy = field.channel(n, 2 * tap);
                let dx = field.channel(n, 2 * tap + 1);
                for oy in 0..oh_n {
                    for ox in 0..ow_n {
                        let pos = oy * ow_n + ox;
                        let y = (oy * p.stride + i) as f32 - p.pad as f32 + dy[pos];
                        let x = (ox * p.stride + j) as f32 - p.pad as f32 + dx[pos];
                        samples[tap * positions + pos] = Sample::at(y, x, s.h, s.w);
                    }
                }
            }
        }
        for ic in 0..s.c {
            let plane = input.channel(n, ic);
            let dst = &mut columns[ic * taps * positions..(ic + 1) * taps * positions];
            for (d, smp) in dst.iter_mut().zip(&samples) {
                *d = smp.read(plane);
            }
        }
        for oc in 0..cout {
            let g = oc / cout_g;
            let base = out_shape.index(n, oc, 0, 0);
            let acc = &mut out[base..base + positions];
            if let Some(b) = &p.bias {
                acc.fill(b[oc]);
            }
            for icl in 0..cin_g {
                let ic = g * cin_g + icl;
                for tap in 0..taps {
                    let wv = wdata[(oc * cin_g + icl) * taps + tap];
                    let col = &columns[(ic * taps + tap) * positions..][..positions];
                    for (a, &v) in acc.iter_mut().zip(col) {
                        *a += wv * v;
                    }
                }
            }
        }
    }
    Tensor::from_vec(out_shape, out)
}
