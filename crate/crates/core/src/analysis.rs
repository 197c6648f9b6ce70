//! Analytic MAC, FLOP and parameter accounting.
//!
//! Conventions: a convolution costs `2·MACs` FLOPs; pooling one op per
//! window tap per output; batch norm two ops per element; ReLU and residual
//! add one op per element; shuffle, slice and concat are free. Bilinear
//! sampling in a deformable conv costs 8 ops per sampled tap.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::plan::{ConvGeom, OpKind, PlanOp};
use crate::graph::{NetworkConfig, NetworkPlan};

/// Ops per bilinear sample: four weights and four multiply-adds.
pub const BILINEAR_OPS: u64 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerCost {
    pub name: String,
    pub kind: &'static str,
    pub macs: u64,
    pub flops: u64,
    pub params: u64,
}

/// Cost of a bias-free convolution producing `h_out × w_out` outputs.
pub fn conv_cost(
    cin: usize,
    cout: usize,
    k: usize,
    h_out: usize,
    w_out: usize,
    groups: usize,
) -> Result<LayerCost> {
    for (what, value) in [("conv input channels", cin), ("conv output channels", cout)] {
        if groups == 0 || value % groups != 0 {
            return Err(Error::Divisibility {
                what,
                value,
                divisor: groups,
            });
        }
    }
    let per_out = (cin / groups * k * k) as u64;
    let macs = (h_out * w_out * cout) as u64 * per_out;
    Ok(LayerCost {
        name: String::new(),
        kind: "conv",
        macs,
        flops: 2 * macs,
        params: cout as u64 * per_out,
    })
}

/// Cost of a depthwise + pointwise pair relative to a dense `k × k` conv
/// with `n` output channels.
pub fn depthwise_cost_ratio(n: usize, k: usize) -> f64 {
    1.0 / n as f64 + 1.0 / (k * k) as f64
}

fn geom_cost(g: &ConvGeom) -> Result<LayerCost> {
    let mut c = conv_cost(g.cin, g.cout, g.k, g.out_hw.0, g.out_hw.1, g.groups)?;
    if g.bias {
        c.params += g.cout as u64;
    }
    Ok(c)
}

/// Cost of one plan operation.
pub fn op_cost(op: &PlanOp) -> Result<LayerCost> {
    let elems = |c: usize, hw: (usize, usize)| (c * hw.0 * hw.1) as u64;
    let simple = |kind, flops, params| LayerCost {
        name: String::new(),
        kind,
        macs: 0,
        flops,
        params,
    };
    let mut cost = match &op.kind {
        OpKind::Conv(g) => geom_cost(g)?,
        OpKind::BatchNorm { channels, hw } => simple("bn", 2 * elems(*channels, *hw), 2 * *channels as u64),
        OpKind::Relu { channels, hw } => simple("relu", elems(*channels, *hw), 0),
        OpKind::MaxPool { channels, k, out_hw } => simple("maxpool", (k * k) as u64 * elems(*channels, *out_hw), 0),
        OpKind::AvgPool { channels, k, out_hw } => simple("avgpool", (k * k) as u64 * elems(*channels, *out_hw), 0),
        OpKind::Shuffle { .. } => simple("shuffle", 0, 0),
        OpKind::Concat { .. } => simple("concat", 0, 0),
        OpKind::Slice { .. } => simple("slice", 0, 0),
        OpKind::Add { channels, hw } => simple("add", elems(*channels, *hw), 0),
        OpKind::DeformSampling { cin, k, out_hw } => {
            simple("sampling", BILINEAR_OPS * (k * k) as u64 * elems(*cin, *out_hw), 0)
        }
    };
    cost.name = op.name.clone();
    Ok(cost)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageCost {
    pub stage: String,
    pub macs: u64,
    pub flops: u64,
    pub params: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlopsReport {
    pub config: NetworkConfig,
    pub layers: Vec<LayerCost>,
    pub stages: Vec<StageCost>,
    pub total_macs: u64,
    pub total_flops: u64,
    pub total_params: u64,
}

impl FlopsReport {
    pub fn gflops(&self) -> f64 {
        self.total_flops as f64 / 1e9
    }

    pub fn gmacs(&self) -> f64 {
        self.total_macs as f64 / 1e9
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned per-layer table followed by stage subtotals and totals.
    pub fn to_text(&self) -> String {
        let width = self.layers.iter().map(|l| l.name.len()).max().unwrap_or(4).max(5);
        let mut s = String::new();
        let _ = writeln!(s, "{:<width$}  {:<8}  {:>14}  {:>14}  {:>10}", "layer", "kind", "macs", "flops", "params");
        for l in &self.layers {
            let _ = writeln!(s, "{:<width$}  {:<8}  {:>14}  {:>14}  {:>10}", l.name, l.kind, l.macs, l.flops, l.params);
        }
        let _ = writeln!(s);
        for st in &self.stages {
            let _ = writeln!(s, "{:<width$}  {:<8}  {:>14}  {:>14}  {:>10}", st.stage, "subtotal", st.macs, st.flops, st.params);
        }
        let _ = writeln!(
            s,
            "{:<width$}  {:<8}  {:>14}  {:>14}  {:>10}",
            "total", "", self.total_macs, self.total_flops, self.total_params
        );
        let _ = writeln!(s, "GFLOPs {:.4}  GMACs {:.4}", self.gflops(), self.gmacs());
        s
    }
}

/// Stage a layer belongs to: `stage1..4`, `stage5` for extra layers, `head`
/// for taps (DAB and loc/conf convs).
pub fn stage_of(name: &str) -> String {
    let first = name.split('.').next().unwrap_or(name);
    if first.starts_with("stage") {
        first.to_string()
    } else if first.starts_with("extra") {
        "stage5".to_string()
    } else {
        "head".to_string()
    }
}

pub fn cost_of_ops(config: NetworkConfig, ops: &[PlanOp]) -> Result<FlopsReport> {
    let layers = ops.iter().map(op_cost).collect::<Result<Vec<_>>>()?;
    let mut stages: BTreeMap<String, StageCost> = BTreeMap::new();
    for l in &layers {
        let key = stage_of(&l.name);
        let e = stages.entry(key.clone()).or_insert(StageCost {
            stage: key,
            macs: 0,
            flops: 0,
            params: 0,
        });
        e.macs += l.macs;
        e.flops += l.flops;
        e.params += l.params;
    }
    Ok(FlopsReport {
        config,
        total_macs: layers.iter().map(|l| l.macs).sum(),
        total_flops: layers.iter().map(|l| l.flops).sum(),
        total_params: layers.iter().map(|l| l.params).sum(),
        stages: stages.into_values().collect(),
        layers,
    })
}

/// Cost of the network described by `cfg`. Needs no weights.
pub fn network_cost(cfg: &NetworkConfig) -> Result<FlopsReport> {
    let plan = NetworkPlan::new(cfg)?;
    cost_of_ops(cfg.clone(), &plan.ops())
}

/// Which optional parts a row enables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Toggles {
    pub stage2_tap: bool,
    pub mincep: Vec<bool>,
    pub plain_extra_fallback: bool,
    pub dab: Vec<bool>,
    pub s_min: f64,
    pub s_max: f64,
}

impl Toggles {
    fn of(cfg: &NetworkConfig) -> Self {
        Toggles {
            stage2_tap: cfg.stage2_tap,
            mincep: cfg.mincep_enabled.to_vec(),
            plain_extra_fallback: cfg.plain_extra_fallback,
            dab: cfg.dab_enabled.to_vec(),
            s_min: cfg.s_min,
            s_max: cfg.s_max,
        }
    }

    fn compact(&self) -> String {
        let bits = |v: &[bool]| v.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>();
        format!(
            "s2tap={} mincep={}{} dab={} s={}..{}",
            u8::from(self.stage2_tap),
            bits(&self.mincep),
            if self.plain_extra_fallback { "+plain" } else { "" },
            bits(&self.dab),
            self.s_min,
            self.s_max
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub toggles: Toggles,
    pub gflops: f64,
    pub gmacs: f64,
    pub flops: u64,
    pub params: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn to_text(&self) -> String {
        let lw = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
        let tw = self.rows.iter().map(|r| r.toggles.compact().len()).max().unwrap_or(7).max(7);
        let mut s = String::new();
        let _ = writeln!(s, "{:<lw$}  {:<tw$}  {:>8}  {:>8}  {:>10}", "row", "toggles", "GFLOPs", "GMACs", "params");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<lw$}  {:<tw$}  {:>8.4}  {:>8.4}  {:>10}",
                r.label,
                r.toggles.compact(),
                r.gflops,
                r.gmacs,
                r.params
            );
        }
        s
    }
}

pub fn ablation_table(cfgs: &[(String, NetworkConfig)]) -> Result<AblationTable> {
    if cfgs.is_empty() {
        return Err(Error::InvalidArgument("ablation table needs at least one config".into()));
    }
    let rows = cfgs
        .iter()
        .map(|(label, cfg)| {
            let r = network_cost(cfg)?;
            Ok(AblationRow {
                label: label.clone(),
                toggles: Toggles::of(cfg),
                gflops: r.gflops(),
                gmacs: r.gmacs(),
                flops: r.total_flops,
                params: r.total_params,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationTable { rows })
}
