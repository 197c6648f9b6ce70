use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor};

/// Weights and geometry of a square-kernel 2-D convolution.
///
/// `weights` is shaped `(c_out, c_in / groups, k, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weights: Tensor,
    pub bias: Option<Vec<f32>>,
    pub stride: usize,
    pub pad: usize,
    pub groups: usize,
}

impl ConvParams {
    pub fn new(weights: Tensor, stride: usize, pad: usize, groups: usize) -> Result<Self> {
        let p = ConvParams {
            weights,
            bias: None,
            stride,
            pad,
            groups,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_bias(mut self, bias: Vec<f32>) -> Result<Self> {
        if bias.len() != self.out_channels() {
            return Err(Error::Shape(format!(
                "bias length {} for {} output channels",
                bias.len(),
                self.out_channels()
            )));
        }
        self.bias = Some(bias);
        Ok(self)
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape().n
    }

    pub fn in_channels_per_group(&self) -> usize {
        self.weights.shape().c
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels_per_group() * self.groups
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape().h
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.weights.shape();
        if w.h != w.w || w.h == 0 {
            return Err(Error::Shape(format!("kernel must be square and non-empty, got {w}")));
        }
        if self.stride == 0 || self.groups == 0 {
            return Err(Error::InvalidArgument("stride and groups must be positive".into()));
        }
        if !w.n.is_multiple_of(self.groups) {
            return Err(Error::Divisibility {
                what: "output channels",
                value: w.n,
                divisor: self.groups,
            });
        }
        if let Some(b) = &self.bias {
            if b.len() != w.n {
                return Err(Error::Shape(format!("bias length {} for {} outputs", b.len(), w.n)));
            }
        }
        Ok(())
    }

    /// Output spatial size for an `h x w` input.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        Ok((
            out_len(h, self.kernel(), self.stride, self.pad)?,
            out_len(w, self.kernel(), self.stride, self.pad)?,
        ))
    }
}

pub(crate) fn out_len(len: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = len + 2 * pad;
    if padded < k {
        return Err(Error::Shape(format!(
            "kernel {k} larger than padded extent {padded}"
        )));
    }
    Ok((padded - k) / stride + 1)
}

/// Output indices `lo..hi` whose input coordinate `o * stride + tap - pad`
/// falls inside `0..in_len`.
#[inline]
pub(crate) fn valid_range(
    tap: usize,
    pad: usize,
    stride: usize,
    in_len: usize,
    out_len: usize,
) -> (usize, usize) {
    let lo = if pad > tap {
        (pad - tap).div_ceil(stride)
    } else {
        0
    };
    // largest o with o * stride + tap - pad <= in_len - 1
    let hi = if in_len + pad > tap {
        ((in_len - 1 + pad - tap) / stride + 1).min(out_len)
    } else {
        0
    };
    (lo.min(hi), hi)
}

/// Grouped 2-D convolution with zero padding.
///
/// Each output element is accumulated as `bias` followed by the taps in
/// `(input channel, kernel row, kernel col)` order, so results are bitwise
/// reproducible.
pub fn conv2d(input: &Tensor, p: &ConvParams) -> Result<Tensor> {
    p.validate()?;
    let s = input.shape();
    let cin_g = p.in_channels_per_group();
    if s.c != cin_g * p.groups {
        return Err(Error::Shape(format!(
            "conv expects {} input channels ({} groups x {}), got {}",
            cin_g * p.groups,
            p.groups,
            cin_g,
            s.c
        )));
    }
    let k = p.kernel();
    let (oh_n, ow_n) = p.output_hw(s.h, s.w)?;
    let cout = p.out_channels();
    let cout_g = cout / p.groups;
    let out_shape = Shape4::new(s.n, cout, oh_n, ow_n);
    let mut out = vec![0.0f32; out_shape.numel()];
    let wdata = p.weights.data();
    let (stride, pad) = (p.stride, p.pad);

    let col_ranges: Vec<(usize, usize)> = (0..k)
        .map(|kw| valid_range(kw, pad, stride, s.w, ow_n))
        .collect();
    let row_ranges: Vec<(usize, usize)> = (0..k)
        .map(|kh| valid_range(kh, pad, stride, s.h, oh_n))
        .collect();

    for n in 0..s.n {
        for oc in 0..cout {
            let g = oc / cout_g;
            let base = out_shape.index(n, oc, 0, 0);
            let plane = &mut out[base..base + oh_n * ow_n];
            if let Some(b) = &p.bias {
                plane.fill(b[oc]);
            }
            for icl in 0..cin_g {
                let src = input.channel(n, g * cin_g + icl);
                for kh in 0..k {
                    let (oh_lo, oh_hi) = row_ranges[kh];
                    for kw in 0..k {
                        let wv = wdata[((oc * cin_g + icl) * k + kh) * k + kw];
                        let (ow_lo, ow_hi) = col_ranges[kw];
                        if ow_lo >= ow_hi {
                            continue;
                        }
                        for oh in oh_lo..oh_hi {
                            let ih = oh * stride + kh - pad;
                            let row = &mut plane[oh * ow_n..(oh + 1) * ow_n];
                            let src_row = &src[ih * s.w..(ih + 1) * s.w];
                            if stride == 1 {
                                let iw0 = ow_lo + kw - pad;
                                let dst = &mut row[ow_lo..ow_hi];
                                let sv = &src_row[iw0..iw0 + dst.len()];
                                for (d, &x) in dst.iter_mut().zip(sv) {
                                    *d += wv * x;
                                }
                            } else {
                                for (ow, d) in row.iter_mut().enumerate().take(ow_hi).skip(ow_lo) {
                                    *d += wv * src_row[ow * stride + kw - pad];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(out_shape, out)
}

/// Depthwise convolution: one group per channel, `c_in == c_out`.
pub fn depthwise_conv2d(input: &Tensor, p: &ConvParams) -> Result<Tensor> {
    let c = input.shape().c;
    if p.groups != c || p.out_channels() != c || p.in_channels_per_group() != 1 {
        return Err(Error::InvalidArgument(format!(
            "depthwise conv needs groups == c_in == c_out == {c}, got groups {} and {} outputs",
            p.groups,
            p.out_channels()
        )));
    }
    conv2d(input, p)
}
