use super::conv::out_len;
use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor};

#[derive(Clone, Copy)]
enum Reduce {
    Max,
    Mean,
}

/// Max pooling; padded positions never win.
pub fn max_pool(input: &Tensor, k: usize, stride: usize, pad: usize) -> Result<Tensor> {
    pool(input, k, stride, pad, Reduce::Max)
}

/// Average pooling over the non-padded taps of each window.
pub fn avg_pool(input: &Tensor, k: usize, stride: usize, pad: usize) -> Result<Tensor> {
    pool(input, k, stride, pad, Reduce::Mean)
}

fn pool(input: &Tensor, k: usize, stride: usize, pad: usize, op: Reduce) -> Result<Tensor> {
    if k == 0 || stride == 0 {
        return Err(Error::InvalidArgument("pool kernel and stride must be positive".into()));
    }
    let s = input.shape();
    let oh_n = out_len(s.h, k, stride, pad)?;
    let ow_n = out_len(s.w, k, stride, pad)?;
    let out_shape = Shape4::new(s.n, s.c, oh_n, ow_n);

    // Input row/col span for every output row/col; an empty span means the
    // window lies entirely in padding.
    let span = |o: usize, len: usize| -> (usize, usize) {
        let start = (o * stride) as isize - pad as isize;
        let lo = start.max(0) as usize;
        let hi = ((start + k as isize).max(0) as usize).min(len);
        (lo, hi.max(lo))
    };
    let rows: Vec<_> = (0..oh_n).map(|o| span(o, s.h)).collect();
    let cols: Vec<_> = (0..ow_n).map(|o| span(o, s.w)).collect();
    if rows.iter().chain(&cols).any(|(lo, hi)| lo == hi) {
        return Err(Error::InvalidArgument(format!(
            "pool window k={k} stride={stride} pad={pad} falls fully outside a {}x{} input",
            s.h, s.w
        )));
    }
    let mut out = Vec::with_capacity(out_shape.numel());
    for n in 0..s.n {
        for c in 0..s.c {
            let src = input.channel(n, c);
            for &(r0, r1) in &rows {
                for &(c0, c1) in &cols {
                    let taps = (r0..r1).flat_map(|h| src[h * s.w + c0..h * s.w + c1].iter());
                    let v = match op {
                        Reduce::Max => taps.fold(f32::NEG_INFINITY, |m, &x| m.max(x)),
                        Reduce::Mean => {
                            let count = ((r1 - r0) * (c1 - c0)) as f32;
                            taps.sum::<f32>() / count
                        }
                    };
                    out.push(v);
                }
            }
        }
    }
    Tensor::from_vec(out_shape, out)
}
