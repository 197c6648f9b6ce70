//! Executable detector built from a [`NetworkPlan`].

use super::config::NetworkConfig;
use super::params::{Init, ParamSource};
use super::plan::{ConvGeom, DabSpec, ExtraSpec, Hw, NetworkPlan};
use crate::blocks::{
    dab_block, mincep_block, plain_extra_block, shuffle_unit, ConvBn, DabParams, MincepParams,
    PlainExtraParams, ShuffleUnitParams,
};
use crate::error::{Error, Result};
use crate::io::weights::WeightStore;
use crate::ops::{conv2d, max_pool, BnParams, ConvParams};
use crate::tensor::{Shape4, Tensor};

/// One stored parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Raw multi-box head outputs, one entry per tap in head order.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutput {
    /// `(1, B·4, h, w)` per tap.
    pub loc: Vec<Tensor>,
    /// `(1, B·classes, h, w)` per tap.
    pub conf: Vec<Tensor>,
    pub tap_shapes: Vec<Hw>,
    pub boxes: Vec<usize>,
    pub num_classes: usize,
}

impl HeadOutput {
    /// Builds head outputs from prior-ordered flat arrays. Mostly useful for
    /// driving post-processing without a network.
    pub fn from_flat(
        tap_shapes: &[Hw],
        boxes: &[usize],
        num_classes: usize,
        loc: &[[f32; 4]],
        conf: &[Vec<f32>],
    ) -> Result<Self> {
        if tap_shapes.len() != boxes.len() {
            return Err(Error::Shape("one box count per tap required".into()));
        }
        let total: usize = tap_shapes.iter().zip(boxes).map(|(&(h, w), &b)| h * w * b).sum();
        if loc.len() != total || conf.len() != total || conf.iter().any(|c| c.len() != num_classes) {
            return Err(Error::Shape(format!(
                "expected {total} priors with {num_classes} scores, got {} loc / {} conf rows",
                loc.len(),
                conf.len()
            )));
        }
        let mut out = HeadOutput {
            loc: Vec::new(),
            conf: Vec::new(),
            tap_shapes: tap_shapes.to_vec(),
            boxes: boxes.to_vec(),
            num_classes,
        };
        let mut p = 0;
        for (&(h, w), &b) in tap_shapes.iter().zip(boxes) {
            let mut l = Tensor::zeros(Shape4::new(1, b * 4, h, w));
            let mut c = Tensor::zeros(Shape4::new(1, b * num_classes, h, w));
            let (ld, cd) = (l.data_mut(), c.data_mut());
            for y in 0..h {
                for x in 0..w {
                    for bi in 0..b {
                        for q in 0..4 {
                            ld[((bi * 4 + q) * h + y) * w + x] = loc[p][q];
                        }
                        for k in 0..num_classes {
                            cd[((bi * num_classes + k) * h + y) * w + x] = conf[p][k];
                        }
                        p += 1;
                    }
                }
            }
            out.loc.push(l);
            out.conf.push(c);
        }
        Ok(out)
    }

    pub fn num_priors(&self) -> usize {
        self.tap_shapes
            .iter()
            .zip(&self.boxes)
            .map(|(&(h, w), &b)| h * w * b)
            .sum()
    }

    /// Location offsets in prior order (tap, row, column, box).
    pub fn flat_loc(&self) -> Vec<[f32; 4]> {
        let mut out = Vec::with_capacity(self.num_priors());
        for (t, &b) in self.loc.iter().zip(&self.boxes) {
            let s = t.shape();
            for y in 0..s.h {
                for x in 0..s.w {
                    for bi in 0..b {
                        out.push(std::array::from_fn(|q| t.at(0, bi * 4 + q, y, x)));
                    }
                }
            }
        }
        out
    }

    /// Class logits in prior order, `num_classes` per prior.
    pub fn flat_conf(&self) -> Vec<Vec<f32>> {
        let k = self.num_classes;
        let mut out = Vec::with_capacity(self.num_priors());
        for (t, &b) in self.conf.iter().zip(&self.boxes) {
            let s = t.shape();
            for y in 0..s.h {
                for x in 0..s.w {
                    for bi in 0..b {
                        out.push((0..k).map(|c| t.at(0, bi * k + c, y, x)).collect());
                    }
                }
            }
        }
        out
    }
}

/// Intermediate tensors of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Backbone feature at every active tap.
    pub taps: Vec<Tensor>,
    /// What the loc/conf convs read (DAB-refined when enabled).
    pub head_inputs: Vec<Tensor>,
    pub head: HeadOutput,
}

#[derive(Debug, Clone, PartialEq)]
enum ExtraBlock {
    Mincep(MincepParams),
    Plain(PlainExtraParams),
}

#[derive(Debug, Clone, PartialEq)]
struct TapHead {
    dab: Option<DabParams>,
    loc: ConvParams,
    conf: ConvParams,
}

/// Immutable executable network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    plan: NetworkPlan,
    stem: ConvBn,
    stages: Vec<Vec<ShuffleUnitParams>>,
    extras: Vec<ExtraBlock>,
    heads: Vec<TapHead>,
    params: Vec<NamedParam>,
}

struct Builder<'a> {
    source: &'a mut dyn ParamSource,
    params: Vec<NamedParam>,
    eps: f32,
}

impl Builder<'_> {
    fn fetch(&mut self, name: String, shape: Vec<usize>, init: Init) -> Result<Vec<f32>> {
        let data = self.source.fetch(&name, &shape, init)?;
        self.params.push(NamedParam {
            name,
            shape,
            data: data.clone(),
        });
        Ok(data)
    }

    fn conv_with(&mut self, g: &ConvGeom, init: Init) -> Result<ConvParams> {
        let ws = g.weight_shape();
        let w = self.fetch(format!("{}.weight", g.name), ws.to_vec(), init)?;
        let weights = Tensor::from_vec(Shape4::new(ws[0], ws[1], ws[2], ws[3]), w)?;
        let conv = ConvParams::new(weights, g.stride, g.pad, g.groups)?;
        if g.bias {
            let b = self.fetch(format!("{}.bias", g.name), vec![g.cout], Init::Zeros)?;
            conv.with_bias(b)
        } else {
            Ok(conv)
        }
    }

    fn conv(&mut self, g: &ConvGeom) -> Result<ConvParams> {
        self.conv_with(g, Init::He { fan_in: g.fan_in() })
    }

    fn bn(&mut self, name: &str, c: usize) -> Result<BnParams> {
        let mut get = |field: &str, init| self.fetch(format!("{name}.{field}"), vec![c], init);
        Ok(BnParams {
            gamma: get("gamma", Init::Ones)?,
            beta: get("beta", Init::Zeros)?,
            mean: get("mean", Init::Zeros)?,
            var: get("var", Init::Ones)?,
            eps: self.eps,
        })
    }

    fn conv_bn(&mut self, g: &ConvGeom) -> Result<ConvBn> {
        let conv = self.conv(g)?;
        let bn = self.bn(&g.bn_name(), g.cout)?;
        ConvBn::new(conv, bn)
    }

    fn dab(&mut self, d: &DabSpec) -> Result<DabParams> {
        Ok(DabParams {
            conv1: self.conv_bn(&d.conv1)?,
            // Zero offsets make a fresh block start as a plain convolution.
            offset_conv: self.conv_with(&d.offset, Init::Zeros)?,
            dconv: self.conv(&d.dconv)?,
            dbn: self.bn(&d.dconv.bn_name(), d.dconv.cout)?,
            input_portion: d.portion,
            branch_portions: d.branch_portions,
        })
    }
}

/// Materialises every layer of `cfg`, drawing parameters from `source`.
pub fn build_network(cfg: &NetworkConfig, source: &mut dyn ParamSource) -> Result<Network> {
    let plan = NetworkPlan::new(cfg)?;
    let mut b = Builder {
        source,
        params: Vec::new(),
        eps: cfg.bn_eps,
    };

    let stem = b.conv_bn(&plan.stem.conv)?;
    let mut stages = Vec::new();
    for stage in &plan.stages {
        let mut units = Vec::new();
        for u in stage {
            units.push(ShuffleUnitParams {
                gconv1: b.conv_bn(&u.gconv1)?,
                dwconv: b.conv_bn(&u.dwconv)?,
                gconv2: b.conv_bn(&u.gconv2)?,
                stride: u.stride,
                groups: u.groups,
            });
        }
        stages.push(units);
    }

    let mut extras = Vec::new();
    for e in &plan.extras {
        extras.push(match e {
            ExtraSpec::Mincep(m) => ExtraBlock::Mincep(MincepParams {
                split: m.split,
                pool_proj: b.conv_bn(&m.pool_proj)?,
                mid_reduce: b.conv_bn(&m.mid_reduce)?,
                mid_dw: b.conv_bn(&m.mid_dw)?,
                deep_reduce: b.conv_bn(&m.deep_reduce)?,
                deep_dw1: b.conv_bn(&m.deep_dw1)?,
                deep_dw2: b.conv_bn(&m.deep_dw2)?,
                fuse: b.conv_bn(&m.fuse)?,
            }),
            ExtraSpec::Plain(p) => ExtraBlock::Plain(PlainExtraParams {
                reduce: b.conv_bn(&p.reduce)?,
                expand: b.conv_bn(&p.expand)?,
            }),
        });
    }

    let mut heads = Vec::new();
    for t in &plan.taps {
        let dab = t.dab.as_ref().map(|d| b.dab(d)).transpose()?;
        heads.push(TapHead {
            dab,
            loc: b.conv(&t.loc)?,
            conf: b.conv(&t.conf)?,
        });
    }

    let params = b.params;
    source.finish()?;
    Ok(Network {
        plan,
        stem,
        stages,
        extras,
        heads,
        params,
    })
}

impl Network {
    pub fn config(&self) -> &NetworkConfig {
        &self.plan.config
    }

    pub fn plan(&self) -> &NetworkPlan {
        &self.plan
    }

    /// Every parameter tensor in build order.
    pub fn params(&self) -> &[NamedParam] {
        &self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    /// Names of every layer that owns parameters (convs and batch norms).
    pub fn layer_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for p in &self.params {
            let layer = p.name.rsplit_once('.').map_or(p.name.as_str(), |(l, _)| l);
            if names.last().map(String::as_str) != Some(layer) {
                names.push(layer.to_string());
            }
        }
        names
    }

    pub fn to_weight_store(&self) -> Result<WeightStore> {
        WeightStore::from_tensors(
            self.params
                .iter()
                .map(|p| (p.name.as_str(), p.shape.as_slice(), p.data.as_slice())),
        )
    }

    pub fn forward(&self, image: &Tensor) -> Result<HeadOutput> {
        Ok(self.forward_detailed(image)?.head)
    }

    pub fn forward_detailed(&self, image: &Tensor) -> Result<ForwardTrace> {
        let size = self.plan.config.input_size;
        let expected = Shape4::new(1, 3, size, size);
        if image.shape() != expected {
            return Err(Error::Shape(format!(
                "network input must be {expected}, got {}",
                image.shape()
            )));
        }

        let x = self.stem.forward_relu(image)?;
        let mut x = max_pool(&x, 3, 2, 1)?;
        let mut stage_out = Vec::new();
        for stage in &self.stages {
            for unit in stage {
                x = shuffle_unit(&x, unit)?;
            }
            stage_out.push(x.clone());
        }
        let mut extra_out = Vec::new();
        for e in &self.extras {
            x = match e {
                ExtraBlock::Mincep(p) => mincep_block(&x, p)?,
                ExtraBlock::Plain(p) => plain_extra_block(&x, p)?,
            };
            extra_out.push(x.clone());
        }

        let mut trace = ForwardTrace {
            taps: Vec::new(),
            head_inputs: Vec::new(),
            head: HeadOutput {
                loc: Vec::new(),
                conf: Vec::new(),
                tap_shapes: self.plan.tap_shapes(),
                boxes: self.plan.boxes_per_tap(),
                num_classes: self.plan.config.num_classes,
            },
        };
        for (spec, head) in self.plan.taps.iter().zip(&self.heads) {
            let feat = match spec.slot {
                s @ 0..=2 => &stage_out[s],
                s => &extra_out[s - 3],
            };
            let head_in = match (&head.dab, &spec.dab) {
                (Some(p), Some(d)) => {
                    let refined = dab_block(feat, p)?;
                    if d.consumed < d.channels {
                        let rest = feat.slice_channels(d.consumed, d.channels)?;
                        Tensor::concat_channels(&[&refined, &rest])?
                    } else {
                        refined
                    }
                }
                _ => feat.clone(),
            };
            trace.head.loc.push(conv2d(&head_in, &head.loc)?);
            trace.head.conf.push(conv2d(&head_in, &head.conf)?);
            trace.taps.push(feat.clone());
            trace.head_inputs.push(head_in);
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::params::{RandomInit, ZeroInit};

    fn small() -> NetworkConfig {
        NetworkConfig {
            input_size: 64,
            stage_widths: [12, 48, 96, 192],
            stage_units: [1, 1, 1],
            mincep_widths: [48, 24, 24, 24],
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn small_forward_shapes() {
        let cfg = small();
        let net = build_network(&cfg, &mut RandomInit::new(1)).unwrap();
        let out = net.forward(&Tensor::full(Shape4::new(1, 3, 64, 64), 0.3)).unwrap();
        assert_eq!(out.tap_shapes, vec![(8, 8), (4, 4), (2, 2), (1, 1), (1, 1), (1, 1), (1, 1)]);
        for (l, (&b, &(h, w))) in out.loc.iter().zip(out.boxes.iter().zip(&out.tap_shapes)) {
            assert_eq!(l.shape(), Shape4::new(1, b * 4, h, w));
        }
        assert_eq!(out.flat_loc().len(), out.num_priors());
    }

    #[test]
    fn wrong_input_rejected() {
        let net = build_network(&small(), &mut ZeroInit).unwrap();
        assert!(net.forward(&Tensor::zeros(Shape4::new(1, 3, 32, 32))).is_err());
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let net = build_network(&small(), &mut ZeroInit).unwrap();
        let out = net.forward(&Tensor::full(Shape4::new(1, 3, 64, 64), 0.7)).unwrap();
        assert!(out.conf.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn flat_round_trip() {
        let shapes = [(2, 2), (1, 1)];
        let boxes = [2, 4];
        let n = 2 * 2 * 2 + 4;
        let loc: Vec<[f32; 4]> = (0..n).map(|i| [i as f32, 1.0, 2.0, -(i as f32)]).collect();
        let conf: Vec<Vec<f32>> = (0..n).map(|i| vec![i as f32, 0.5]).collect();
        let h = HeadOutput::from_flat(&shapes, &boxes, 2, &loc, &conf).unwrap();
        assert_eq!(h.flat_loc(), loc);
        assert_eq!(h.flat_conf(), conf);
    }

    #[test]
    fn layer_names_follow_plan() {
        let net = build_network(&small(), &mut ZeroInit).unwrap();
        let names = net.layer_names();
        assert_eq!(names[0], "stage1.conv");
        assert_eq!(names[1], "stage1.conv.bn");
        assert!(names.contains(&"tap0.dab.offset".to_string()));
    }
}
