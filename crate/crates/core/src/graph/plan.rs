//! Weight-free description of the network.
//!
//! [`NetworkPlan`] resolves a [`NetworkConfig`] into named layers with
//! concrete channel counts and spatial sizes. The executable network and the
//! complexity analysis are both derived from it.

use super::config::{ExtraKind, NetworkConfig};
use crate::blocks::{even_split, portion_channels};
use crate::error::{Error, Result};
use crate::ops::ConvParams;
use crate::tensor::{Shape4, Tensor};

pub type Hw = (usize, usize);

/// Geometry of one named convolution. Padding is always `k / 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvGeom {
    pub name: String,
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub groups: usize,
    pub bias: bool,
    pub in_hw: Hw,
    pub out_hw: Hw,
}

impl ConvGeom {
    #[allow(clippy::too_many_arguments)]
    fn new(
        name: String,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        groups: usize,
        bias: bool,
        in_hw: Hw,
    ) -> Result<Self> {
        for (what, value) in [("conv input channels", cin), ("conv output channels", cout)] {
            if value % groups != 0 {
                return Err(Error::Divisibility {
                    what,
                    value,
                    divisor: groups,
                });
            }
        }
        let pad = k / 2;
        // Validates the spatial extent through the kernel's own arithmetic.
        let probe = ConvParams::new(Tensor::zeros(Shape4::new(1, 1, k, k)), stride, pad, 1)?;
        let out_hw = probe.output_hw(in_hw.0, in_hw.1)?;
        Ok(ConvGeom {
            name,
            cin,
            cout,
            k,
            stride,
            pad,
            groups,
            bias,
            in_hw,
            out_hw,
        })
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.cout, self.cin / self.groups, self.k, self.k]
    }

    pub fn fan_in(&self) -> usize {
        self.cin / self.groups * self.k * self.k
    }

    pub fn bn_name(&self) -> String {
        format!("{}.bn", self.name)
    }
}

/// One operation in forward order, with what the cost model needs.
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    Conv(ConvGeom),
    BatchNorm { channels: usize, hw: Hw },
    Relu { channels: usize, hw: Hw },
    MaxPool { channels: usize, k: usize, out_hw: Hw },
    AvgPool { channels: usize, k: usize, out_hw: Hw },
    Shuffle { channels: usize, hw: Hw },
    Add { channels: usize, hw: Hw },
    Concat { channels: usize, hw: Hw },
    Slice { channels: usize, hw: Hw },
    /// Bilinear sampling of a deformable conv: `k²` taps per input channel
    /// per output position.
    DeformSampling { cin: usize, k: usize, out_hw: Hw },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOp {
    pub name: String,
    pub kind: OpKind,
}

struct Ops<'a>(&'a mut Vec<PlanOp>);

impl Ops<'_> {
    fn push(&mut self, name: impl Into<String>, kind: OpKind) {
        self.0.push(PlanOp {
            name: name.into(),
            kind,
        });
    }

    fn conv(&mut self, g: &ConvGeom) {
        self.push(g.name.clone(), OpKind::Conv(g.clone()));
    }

    fn conv_bn(&mut self, g: &ConvGeom, relu: bool) {
        self.conv(g);
        self.push(
            g.bn_name(),
            OpKind::BatchNorm {
                channels: g.cout,
                hw: g.out_hw,
            },
        );
        if relu {
            self.push(
                format!("{}.relu", g.name),
                OpKind::Relu {
                    channels: g.cout,
                    hw: g.out_hw,
                },
            );
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StemSpec {
    pub conv: ConvGeom,
    pub pool_out: Hw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitSpec {
    pub name: String,
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
    pub groups: usize,
    pub gconv1: ConvGeom,
    pub dwconv: ConvGeom,
    pub gconv2: ConvGeom,
}

impl UnitSpec {
    pub fn out_hw(&self) -> Hw {
        self.gconv2.out_hw
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MincepSpec {
    pub name: String,
    pub cin: usize,
    pub in_hw: Hw,
    pub split: [usize; 3],
    pub pool_proj: ConvGeom,
    pub mid_reduce: ConvGeom,
    pub mid_dw: ConvGeom,
    pub deep_reduce: ConvGeom,
    pub deep_dw1: ConvGeom,
    pub deep_dw2: ConvGeom,
    pub fuse: ConvGeom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlainSpec {
    pub name: String,
    pub reduce: ConvGeom,
    pub expand: ConvGeom,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExtraSpec {
    Mincep(MincepSpec),
    Plain(PlainSpec),
}

impl ExtraSpec {
    pub fn out_channels(&self) -> usize {
        match self {
            ExtraSpec::Mincep(m) => m.fuse.cout,
            ExtraSpec::Plain(p) => p.expand.cout,
        }
    }

    pub fn out_hw(&self) -> Hw {
        match self {
            ExtraSpec::Mincep(m) => m.fuse.out_hw,
            ExtraSpec::Plain(p) => p.expand.out_hw,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DabSpec {
    pub name: String,
    /// Channels of the tap feature.
    pub channels: usize,
    /// Leading channels the block consumes and refines.
    pub consumed: usize,
    pub hw: Hw,
    pub portion: f64,
    pub branch_portions: [f64; 3],
    pub conv1: ConvGeom,
    pub offset: ConvGeom,
    pub dconv: ConvGeom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TapSpec {
    pub slot: usize,
    pub name: String,
    pub channels: usize,
    pub hw: Hw,
    pub boxes: usize,
    pub dab: Option<DabSpec>,
    pub loc: ConvGeom,
    pub conf: ConvGeom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkPlan {
    pub config: NetworkConfig,
    pub stem: StemSpec,
    /// Stages 2, 3, 4.
    pub stages: Vec<Vec<UnitSpec>>,
    pub extras: Vec<ExtraSpec>,
    pub taps: Vec<TapSpec>,
}

fn pooled(hw: Hw, k: usize, stride: usize, pad: usize) -> Hw {
    ((hw.0 + 2 * pad - k) / stride + 1, (hw.1 + 2 * pad - k) / stride + 1)
}

impl NetworkPlan {
    pub fn new(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let g = cfg.groups;
        let size = cfg.input_size;

        let stem_conv = ConvGeom::new(
            "stage1.conv".into(),
            3,
            cfg.stage_widths[0],
            3,
            2,
            1,
            false,
            (size, size),
        )?;
        let pool_out = pooled(stem_conv.out_hw, 3, 2, 1);
        let stem = StemSpec {
            conv: stem_conv,
            pool_out,
        };

        let mut stages = Vec::new();
        let mut cin = cfg.stage_widths[0];
        let mut hw = pool_out;
        for (si, (&cout, &units)) in cfg.stage_widths[1..].iter().zip(&cfg.stage_units).enumerate() {
            let bottleneck = cout / 4;
            if bottleneck == 0 || bottleneck % g != 0 {
                return Err(Error::Config(format!(
                    "stage {} bottleneck {bottleneck} (width / 4) must be a positive multiple of {g}",
                    si + 2
                )));
            }
            let mut stage = Vec::new();
            for u in 0..units {
                let name = format!("stage{}.unit{u}", si + 2);
                let stride = if u == 0 { 2 } else { 1 };
                let unit_in = if u == 0 { cin } else { cout };
                let branch_out = if stride == 2 { cout - unit_in } else { cout };
                // The first stage-2 unit sees the narrow stem output and is not grouped.
                let g1 = if si == 0 && u == 0 { 1 } else { g };
                let gconv1 = ConvGeom::new(
                    format!("{name}.gconv1"),
                    unit_in,
                    bottleneck,
                    1,
                    1,
                    g1,
                    false,
                    hw,
                )?;
                let dwconv = ConvGeom::new(
                    format!("{name}.dwconv"),
                    bottleneck,
                    bottleneck,
                    3,
                    stride,
                    bottleneck,
                    false,
                    hw,
                )?;
                let gconv2 = ConvGeom::new(
                    format!("{name}.gconv2"),
                    bottleneck,
                    branch_out,
                    1,
                    1,
                    g,
                    false,
                    dwconv.out_hw,
                )?;
                if unit_in % g != 0 {
                    return Err(Error::Divisibility {
                        what: "shuffle unit input channels",
                        value: unit_in,
                        divisor: g,
                    });
                }
                hw = gconv2.out_hw;
                stage.push(UnitSpec {
                    name,
                    cin: unit_in,
                    cout,
                    stride,
                    groups: g,
                    gconv1,
                    dwconv,
                    gconv2,
                });
            }
            stages.push(stage);
            cin = cout;
        }

        let mut extras = Vec::new();
        for (i, kind) in cfg.extra_layers().into_iter().enumerate() {
            let name = format!("extra{}", i + 1);
            let width = cfg.mincep_widths[i];
            let spec = match kind {
                ExtraKind::Mincep => ExtraSpec::Mincep(mincep_spec(name, cin, width, hw)?),
                ExtraKind::Plain => {
                    let reduce =
                        ConvGeom::new(format!("{name}.reduce"), cin, width / 2, 1, 1, 1, false, hw)?;
                    let expand = ConvGeom::new(
                        format!("{name}.expand"),
                        width / 2,
                        width,
                        3,
                        2,
                        1,
                        false,
                        hw,
                    )?;
                    ExtraSpec::Plain(PlainSpec {
                        name,
                        reduce,
                        expand,
                    })
                }
            };
            cin = spec.out_channels();
            hw = spec.out_hw();
            extras.push(spec);
        }

        let mut taps = Vec::new();
        for slot in cfg.active_slots() {
            let (channels, feat_hw) = match slot {
                0..=2 => {
                    let last = stages[slot].last().expect("stage has units");
                    (last.cout, last.out_hw())
                }
                s => (extras[s - 3].out_channels(), extras[s - 3].out_hw()),
            };
            let name = format!("tap{slot}");
            let dab = if cfg.dab_enabled[slot] {
                let consumed = portion_channels(channels, cfg.dab_portions[slot])?;
                // Round up, ignoring representation noise such as 30 · 0.2 = 6.000…01.
                let mid = (consumed as f64 * cfg.dab_branch_portions[0] - 1e-9).ceil().max(1.0) as usize;
                let dab_name = format!("{name}.dab");
                let k = 3;
                Some(DabSpec {
                    conv1: ConvGeom::new(
                        format!("{dab_name}.conv1"),
                        consumed,
                        mid,
                        1,
                        1,
                        1,
                        false,
                        feat_hw,
                    )?,
                    offset: ConvGeom::new(
                        format!("{dab_name}.offset"),
                        consumed,
                        2 * k * k,
                        k,
                        1,
                        1,
                        true,
                        feat_hw,
                    )?,
                    dconv: ConvGeom::new(
                        format!("{dab_name}.dconv"),
                        mid,
                        consumed,
                        k,
                        1,
                        1,
                        false,
                        feat_hw,
                    )?,
                    name: dab_name,
                    channels,
                    consumed,
                    hw: feat_hw,
                    portion: cfg.dab_portions[slot],
                    branch_portions: cfg.dab_branch_portions,
                })
            } else {
                None
            };
            let boxes = cfg.boxes_per_location[slot];
            let loc = ConvGeom::new(format!("{name}.loc"), channels, boxes * 4, 3, 1, 1, true, feat_hw)?;
            let conf = ConvGeom::new(
                format!("{name}.conf"),
                channels,
                boxes * cfg.num_classes,
                3,
                1,
                1,
                true,
                feat_hw,
            )?;
            taps.push(TapSpec {
                slot,
                name,
                channels,
                hw: feat_hw,
                boxes,
                dab,
                loc,
                conf,
            });
        }

        Ok(NetworkPlan {
            config: cfg.clone(),
            stem,
            stages,
            extras,
            taps,
        })
    }

    pub fn tap_shapes(&self) -> Vec<Hw> {
        self.taps.iter().map(|t| t.hw).collect()
    }

    pub fn boxes_per_tap(&self) -> Vec<usize> {
        self.taps.iter().map(|t| t.boxes).collect()
    }

    /// Every operation in forward order.
    pub fn ops(&self) -> Vec<PlanOp> {
        let mut v = Vec::new();
        let mut ops = Ops(&mut v);

        ops.conv_bn(&self.stem.conv, true);
        ops.push(
            "stage1.pool",
            OpKind::MaxPool {
                channels: self.stem.conv.cout,
                k: 3,
                out_hw: self.stem.pool_out,
            },
        );

        for unit in self.stages.iter().flatten() {
            ops.conv_bn(&unit.gconv1, true);
            ops.push(
                format!("{}.shuffle", unit.name),
                OpKind::Shuffle {
                    channels: unit.gconv1.cout,
                    hw: unit.gconv1.out_hw,
                },
            );
            ops.conv_bn(&unit.dwconv, false);
            ops.conv_bn(&unit.gconv2, false);
            let out_hw = unit.out_hw();
            if unit.stride == 2 {
                ops.push(
                    format!("{}.shortcut_pool", unit.name),
                    OpKind::AvgPool {
                        channels: unit.cin,
                        k: 3,
                        out_hw,
                    },
                );
                ops.push(
                    format!("{}.concat", unit.name),
                    OpKind::Concat {
                        channels: unit.cout,
                        hw: out_hw,
                    },
                );
            } else {
                ops.push(
                    format!("{}.add", unit.name),
                    OpKind::Add {
                        channels: unit.cout,
                        hw: out_hw,
                    },
                );
            }
            ops.push(
                format!("{}.relu", unit.name),
                OpKind::Relu {
                    channels: unit.cout,
                    hw: out_hw,
                },
            );
        }

        for extra in &self.extras {
            match extra {
                ExtraSpec::Mincep(m) => {
                    ops.push(
                        format!("{}.split", m.name),
                        OpKind::Slice {
                            channels: m.cin,
                            hw: m.in_hw,
                        },
                    );
                    ops.push(
                        format!("{}.pool", m.name),
                        OpKind::MaxPool {
                            channels: m.split[0],
                            k: 3,
                            out_hw: m.pool_proj.in_hw,
                        },
                    );
                    ops.conv_bn(&m.pool_proj, true);
                    ops.conv_bn(&m.mid_reduce, true);
                    ops.conv_bn(&m.mid_dw, false);
                    ops.conv_bn(&m.deep_reduce, true);
                    ops.conv_bn(&m.deep_dw1, false);
                    ops.conv_bn(&m.deep_dw2, false);
                    ops.push(
                        format!("{}.concat", m.name),
                        OpKind::Concat {
                            channels: m.fuse.cin,
                            hw: m.fuse.in_hw,
                        },
                    );
                    ops.conv_bn(&m.fuse, true);
                }
                ExtraSpec::Plain(p) => {
                    ops.conv_bn(&p.reduce, true);
                    ops.conv_bn(&p.expand, true);
                }
            }
        }

        for tap in &self.taps {
            if let Some(d) = &tap.dab {
                ops.push(
                    format!("{}.slice", d.name),
                    OpKind::Slice {
                        channels: d.consumed,
                        hw: d.hw,
                    },
                );
                ops.conv_bn(&d.conv1, false);
                ops.conv(&d.offset);
                ops.conv(&d.dconv);
                ops.push(
                    format!("{}.sampling", d.dconv.name),
                    OpKind::DeformSampling {
                        cin: d.dconv.cin,
                        k: d.dconv.k,
                        out_hw: d.dconv.out_hw,
                    },
                );
                ops.push(
                    d.dconv.bn_name(),
                    OpKind::BatchNorm {
                        channels: d.consumed,
                        hw: d.hw,
                    },
                );
                ops.push(
                    format!("{}.add", d.name),
                    OpKind::Add {
                        channels: d.consumed,
                        hw: d.hw,
                    },
                );
                ops.push(
                    format!("{}.relu", d.name),
                    OpKind::Relu {
                        channels: d.consumed,
                        hw: d.hw,
                    },
                );
                if d.consumed < d.channels {
                    ops.push(
                        format!("{}.rejoin", d.name),
                        OpKind::Concat {
                            channels: d.channels,
                            hw: d.hw,
                        },
                    );
                }
            }
            ops.conv(&tap.loc);
            ops.conv(&tap.conf);
        }
        v
    }
}

fn mincep_spec(name: String, cin: usize, width: usize, hw: Hw) -> Result<MincepSpec> {
    let split = even_split(cin, 3);
    if split.contains(&0) {
        return Err(Error::Config(format!("{name}: {cin} input channels cannot feed 3 branches")));
    }
    let outs = even_split(width, 3);
    let pooled_hw = pooled(hw, 3, 2, 1);
    let conv = |suffix: &str, cin, cout, k, stride, groups, at| {
        ConvGeom::new(format!("{name}.{suffix}"), cin, cout, k, stride, groups, false, at)
    };
    let mid_dw = conv("mid_dw", outs[1], outs[1], 3, 2, outs[1], hw)?;
    let deep_dw1 = conv("deep_dw1", outs[2], outs[2], 3, 1, outs[2], hw)?;
    let deep_dw2 = conv("deep_dw2", outs[2], outs[2], 3, 2, outs[2], deep_dw1.out_hw)?;
    let spec = MincepSpec {
        pool_proj: conv("pool_proj", split[0], outs[0], 1, 1, 1, pooled_hw)?,
        mid_reduce: conv("mid_reduce", split[1], outs[1], 1, 1, 1, hw)?,
        deep_reduce: conv("deep_reduce", split[2], outs[2], 1, 1, 1, hw)?,
        fuse: conv("fuse", width, width, 1, 1, 1, pooled_hw)?,
        mid_dw,
        deep_dw1,
        deep_dw2,
        name,
        cin,
        in_hw: hw,
        split: [split[0], split[1], split[2]],
    };
    for out in [spec.mid_dw.out_hw, spec.deep_dw2.out_hw] {
        if out != pooled_hw {
            return Err(Error::Shape(format!(
                "{}: branch output {out:?} differs from pooled {pooled_hw:?}",
                spec.name
            )));
        }
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_tap_shapes() {
        let plan = NetworkPlan::new(&NetworkConfig::default()).unwrap();
        assert_eq!(
            plan.tap_shapes(),
            vec![(64, 64), (32, 32), (16, 16), (8, 8), (4, 4), (2, 2), (1, 1)]
        );
        let widths: Vec<usize> = plan.taps.iter().map(|t| t.channels).collect();
        assert_eq!(widths, vec![240, 480, 960, 512, 256, 256, 256]);
        assert_eq!(plan.stages.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 7, 3]);
    }

    #[test]
    fn op_names_are_unique() {
        for cfg in [NetworkConfig::default(), NetworkConfig::shufflenet_ssd()] {
            let ops = NetworkPlan::new(&cfg).unwrap().ops();
            let mut names: Vec<_> = ops.iter().map(|o| o.name.as_str()).collect();
            let n = names.len();
            names.sort_unstable();
            names.dedup();
            assert_eq!(names.len(), n);
        }
    }

    #[test]
    fn dab_widths() {
        let plan = NetworkPlan::new(&NetworkConfig::default()).unwrap();
        let dab = plan.taps[0].dab.as_ref().unwrap();
        assert_eq!((dab.consumed, dab.conv1.cout, dab.dconv.cout), (30, 6, 30));
        let dab = plan.taps[3].dab.as_ref().unwrap();
        assert_eq!((dab.consumed, dab.conv1.cout), (128, 26));
        assert!(plan.taps[6].dab.is_none());
    }

    #[test]
    fn indivisible_width_rejected() {
        let cfg = NetworkConfig {
            stage_widths: [24, 244, 480, 960],
            ..NetworkConfig::default()
        };
        assert!(NetworkPlan::new(&cfg).is_err());
    }
}
