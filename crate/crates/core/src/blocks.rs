//! Composite blocks: ShuffleNet units, the modified Reduction-B extra layer
//! ("mincep"), the plain SSD extra layer used by the baseline, and the
//! deformation-adaptation block (DAB).

use crate::error::{Error, Result};
use crate::ops::{
    avg_pool, batch_norm, channel_shuffle, conv2d, deformable_conv2d, max_pool, relu, BnParams,
    ConvParams, OffsetField,
};
use crate::tensor::Tensor;

/// A convolution followed by inference batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBn {
    pub conv: ConvParams,
    pub bn: BnParams,
}

impl ConvBn {
    pub fn new(conv: ConvParams, bn: BnParams) -> Result<Self> {
        if bn.channels() != conv.out_channels() {
            return Err(Error::Shape(format!(
                "batch norm over {} channels after a conv with {} outputs",
                bn.channels(),
                conv.out_channels()
            )));
        }
        Ok(ConvBn { conv, bn })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        batch_norm(&conv2d(x, &self.conv)?, &self.bn)
    }

    pub fn forward_relu(&self, x: &Tensor) -> Result<Tensor> {
        Ok(relu(&self.forward(x)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShuffleUnitParams {
    /// 1x1 grouped bottleneck.
    pub gconv1: ConvBn,
    /// 3x3 depthwise, stride 1 or 2.
    pub dwconv: ConvBn,
    /// 1x1 grouped expansion.
    pub gconv2: ConvBn,
    pub stride: usize,
    pub groups: usize,
}

/// ShuffleNet unit.
///
/// The residual branch is `gconv1 → BN → ReLU → shuffle → dw → BN → gconv2 → BN`.
/// Stride 1 adds the branch to the input; stride 2 concatenates it after a
/// 3x3/s2 average-pooled shortcut. Both end in a ReLU.
pub fn shuffle_unit(input: &Tensor, p: &ShuffleUnitParams) -> Result<Tensor> {
    let c = input.shape().c;
    if p.groups == 0 || !c.is_multiple_of(p.groups) {
        return Err(Error::Divisibility {
            what: "shuffle unit input channels",
            value: c,
            divisor: p.groups,
        });
    }
    let branch = p.gconv1.forward_relu(input)?;
    let branch = channel_shuffle(&branch, p.groups)?;
    let branch = p.dwconv.forward(&branch)?;
    let branch = p.gconv2.forward(&branch)?;
    let merged = match p.stride {
        1 => input.add(&branch)?,
        2 => {
            let shortcut = avg_pool(input, 3, 2, 1)?;
            Tensor::concat_channels(&[&shortcut, &branch])?
        }
        s => return Err(Error::InvalidArgument(format!("shuffle unit stride {s}"))),
    };
    Ok(relu(&merged))
}

/// Modified Reduction-B block with depthwise 3x3 convolutions.
///
/// Input channels are split into three near-equal contiguous parts:
/// * (a) maxpool 3x3/s2 → 1x1
/// * (b) 1x1 → dw 3x3/s2
/// * (c) 1x1 → dw 3x3/s1 → dw 3x3/s2
///
/// The branch outputs are concatenated and fused by a final 1x1 conv.
/// 1x1 convs are followed by BN and ReLU, depthwise convs by BN only.
#[derive(Debug, Clone, PartialEq)]
pub struct MincepParams {
    pub split: [usize; 3],
    pub pool_proj: ConvBn,
    pub mid_reduce: ConvBn,
    pub mid_dw: ConvBn,
    pub deep_reduce: ConvBn,
    pub deep_dw1: ConvBn,
    pub deep_dw2: ConvBn,
    pub fuse: ConvBn,
}

/// Sizes of `parts` contiguous chunks of `total`, differing by at most one,
/// larger chunks first.
pub fn even_split(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| total / parts + usize::from(i < total % parts))
        .collect()
}

pub fn mincep_block(input: &Tensor, p: &MincepParams) -> Result<Tensor> {
    let c = input.shape().c;
    if p.split.iter().sum::<usize>() != c || p.split.contains(&0) {
        return Err(Error::Shape(format!(
            "mincep split {:?} does not partition {c} channels",
            p.split
        )));
    }
    let a_in = input.slice_channels(0, p.split[0])?;
    let b_in = input.slice_channels(p.split[0], p.split[0] + p.split[1])?;
    let c_in = input.slice_channels(p.split[0] + p.split[1], c)?;

    let a = p.pool_proj.forward_relu(&max_pool(&a_in, 3, 2, 1)?)?;
    let b = p.mid_dw.forward(&p.mid_reduce.forward_relu(&b_in)?)?;
    let d = p.deep_reduce.forward_relu(&c_in)?;
    let d = p.deep_dw2.forward(&p.deep_dw1.forward(&d)?)?;

    let cat = Tensor::concat_channels(&[&a, &b, &d])?;
    p.fuse.forward_relu(&cat)
}

/// Conventional SSD extra layer: 1x1 reduce then 3x3/s2, each with BN + ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainExtraParams {
    pub reduce: ConvBn,
    pub expand: ConvBn,
}

pub fn plain_extra_block(input: &Tensor, p: &PlainExtraParams) -> Result<Tensor> {
    p.expand.forward_relu(&p.reduce.forward_relu(input)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DabParams {
    /// 1x1 conv + BN on the consumed channels.
    pub conv1: ConvBn,
    /// 3x3 conv producing the `2·k²` offset channels.
    pub offset_conv: ConvParams,
    /// 3x3 deformable conv restoring the consumed width, followed by BN.
    pub dconv: ConvParams,
    pub dbn: BnParams,
    /// Fraction of the input channels the block consumes.
    pub input_portion: f64,
    /// Configured internal branch fractions (1x1 width is the first).
    pub branch_portions: [f64; 3],
}

/// Number of channels a portion selects, if it is a whole number ≥ 1.
pub fn portion_channels(channels: usize, portion: f64) -> Result<usize> {
    let exact = portion * channels as f64;
    let rounded = exact.round();
    if !(portion > 0.0 && portion <= 1.0) || (exact - rounded).abs() > 1e-9 || rounded < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "portion {portion} of {channels} channels is not a whole number of channels"
        )));
    }
    Ok(rounded as usize)
}

/// Deformation-adaptation block over the leading `portion·C` channels.
///
/// `x' = x[0..portion·C]`, `out = ReLU(x' + BN(dconv(BN(conv1(x')), offsets(x'))))`.
pub fn dab_block(input: &Tensor, p: &DabParams) -> Result<Tensor> {
    let c = input.shape().c;
    let consumed = portion_channels(c, p.input_portion)?;
    let x = input.slice_channels(0, consumed)?;
    let h = p.conv1.forward(&x)?;
    let k = p.dconv.kernel();
    let offsets = OffsetField::new(conv2d(&x, &p.offset_conv)?, k)?;
    let d = batch_norm(&deformable_conv2d(&h, &offsets, &p.dconv)?, &p.dbn)?;
    Ok(relu(&x.add(&d)?))
}
