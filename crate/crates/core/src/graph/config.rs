use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of multi-box tap slots: stage 2, stage 3, stage 4 and four extra layers.
pub const TAP_SLOTS: usize = 7;
/// Number of extra (stage 5) layers.
pub const EXTRA_LAYERS: usize = 4;

/// Declarative description of the detector graph.
///
/// Per-tap arrays are indexed by slot: `0` stage 2, `1` stage 3, `2` stage 4,
/// `3..7` the extra layers. Slots that are not active (stage-2 tap disabled,
/// extra layer absent) ignore their entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_size: usize,
    pub groups: usize,
    /// Output channels of stage 1 through stage 4.
    pub stage_widths: [usize; 4],
    /// ShuffleNet units in stages 2, 3 and 4.
    pub stage_units: [usize; 3],
    pub mincep_widths: [usize; EXTRA_LAYERS],
    pub mincep_enabled: [bool; EXTRA_LAYERS],
    /// When a mincep flag is off, use a conventional SSD extra layer in its
    /// place instead of truncating the extra stack.
    pub plain_extra_fallback: bool,
    /// Attach a multi-box tap to the stage-2 output.
    pub stage2_tap: bool,
    pub dab_enabled: [bool; TAP_SLOTS],
    pub dab_portions: [f64; TAP_SLOTS],
    pub dab_branch_portions: [f64; 3],
    pub boxes_per_location: [usize; TAP_SLOTS],
    /// Including background.
    pub num_classes: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub variances: [f32; 2],
    pub match_iou: f32,
    pub conf_threshold: f32,
    pub nms_threshold: f32,
    /// Subtracted after scaling pixels to `[0, 1]`.
    pub pixel_mean: [f32; 3],
    pub bn_eps: f32,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            input_size: 512,
            groups: 3,
            stage_widths: [24, 240, 480, 960],
            stage_units: [3, 7, 3],
            mincep_widths: [512, 256, 256, 256],
            mincep_enabled: [true; EXTRA_LAYERS],
            plain_extra_fallback: false,
            stage2_tap: true,
            dab_enabled: [true, true, true, true, true, true, false],
            dab_portions: [0.125, 0.125, 0.125, 0.25, 0.5, 0.5, 1.0],
            dab_branch_portions: [0.2, 0.8, 0.8],
            boxes_per_location: [4, 6, 6, 6, 4, 4, 4],
            num_classes: 2,
            s_min: 0.05,
            s_max: 0.4,
            variances: [0.1, 0.2],
            match_iou: 0.5,
            conf_threshold: 0.5,
            nms_threshold: 0.3,
            pixel_mean: [0.0; 3],
            bn_eps: 1e-5,
        }
    }
}

/// Kind of layer occupying an extra-layer slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtraKind {
    Mincep,
    Plain,
}

impl NetworkConfig {
    /// Full ShuffleDet.
    pub fn shuffledet() -> Self {
        Self::default()
    }

    /// Naive ShuffleNet + SSD: no stage-2 tap, conventional extra layers,
    /// no DAB, standard SSD scales.
    pub fn shufflenet_ssd() -> Self {
        NetworkConfig {
            mincep_enabled: [false; EXTRA_LAYERS],
            plain_extra_fallback: true,
            stage2_tap: false,
            dab_enabled: [false; TAP_SLOTS],
            s_min: 0.2,
            s_max: 0.9,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: NetworkConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Extra layers in stack order.
    pub fn extra_layers(&self) -> Vec<ExtraKind> {
        let mut out = Vec::new();
        for &on in &self.mincep_enabled {
            match (on, self.plain_extra_fallback) {
                (true, _) => out.push(ExtraKind::Mincep),
                (false, true) => out.push(ExtraKind::Plain),
                (false, false) => break,
            }
        }
        out
    }

    /// Active tap slots in head order.
    pub fn active_slots(&self) -> Vec<usize> {
        let mut slots = Vec::new();
        if self.stage2_tap {
            slots.push(0);
        }
        slots.extend([1, 2]);
        slots.extend((0..self.extra_layers().len()).map(|i| 3 + i));
        slots
    }

    pub fn slot_name(slot: usize) -> &'static str {
        ["stage2", "stage3", "stage4", "extra1", "extra2", "extra3", "extra4"][slot]
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.groups == 0 {
            return fail("groups must be positive".into());
        }
        if self.input_size < 32 {
            return fail(format!("input_size {} is below the 32x stride", self.input_size));
        }
        if self.stage_widths.contains(&0) || self.mincep_widths.contains(&0) {
            return fail("layer widths must be positive".into());
        }
        if self.stage_units.contains(&0) {
            return fail("every stage needs at least one unit".into());
        }
        for (i, pair) in self.stage_widths.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return fail(format!(
                    "stage {} width {} must exceed the previous stage width {}",
                    i + 2,
                    pair[1],
                    pair[0]
                ));
            }
        }
        if !self.plain_extra_fallback {
            let enabled = self.mincep_enabled.iter().filter(|&&on| on).count();
            if self.mincep_enabled[..enabled].iter().any(|&on| !on) {
                return fail(
                    "without plain_extra_fallback the enabled mincep layers must be a prefix".into(),
                );
            }
        }
        if self.mincep_widths.iter().any(|&w| w < 3) {
            return fail("mincep widths must cover three branches".into());
        }
        for (slot, &b) in self.boxes_per_location.iter().enumerate() {
            if ![2, 4, 6].contains(&b) {
                return fail(format!("slot {slot}: boxes_per_location must be 2, 4 or 6, got {b}"));
            }
        }
        for &p in self.dab_portions.iter().chain(&self.dab_branch_portions) {
            if !(p > 0.0 && p <= 1.0) {
                return fail(format!("portion {p} outside (0, 1]"));
            }
        }
        if self.num_classes < 2 {
            return fail("num_classes counts background and must be at least 2".into());
        }
        if !(self.s_min > 0.0 && self.s_min < self.s_max && self.s_max <= 1.0) {
            return fail(format!("need 0 < s_min < s_max <= 1, got {} / {}", self.s_min, self.s_max));
        }
        if self.variances.iter().any(|&v| v <= 0.0) {
            return fail("variances must be positive".into());
        }
        for (name, v) in [
            ("match_iou", self.match_iou),
            ("nms_threshold", self.nms_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} {v} outside [0, 1]"));
            }
        }
        if !self.conf_threshold.is_finite() || self.conf_threshold < 0.0 {
            return fail(format!("conf_threshold {} must be non-negative", self.conf_threshold));
        }
        if !(self.bn_eps >= 0.0) {
            return fail("bn_eps must be non-negative".into());
        }
        Ok(())
    }

    /// Progressive DAB enablement, one config per row: none, then stage 2,
    /// stage 3, stage 4, extra 1, extra 2, extra 3.
    pub fn dab_ablation_grid() -> Vec<(String, NetworkConfig)> {
        (0..TAP_SLOTS)
            .map(|enabled| {
                let mut cfg = Self::default();
                cfg.dab_enabled = [false; TAP_SLOTS];
                cfg.dab_enabled[..enabled].fill(true);
                let label = if enabled == 0 {
                    "no DAB".to_string()
                } else {
                    format!("DAB through {}", Self::slot_name(enabled - 1))
                };
                (label, cfg)
            })
            .collect()
    }

    /// Baseline, then ShuffleDet with plain extra layers, small scales, and
    /// mincep layers enabled one by one.
    pub fn mincep_ablation_grid() -> Vec<(String, NetworkConfig)> {
        let mut rows = vec![("shufflenet-ssd".to_string(), Self::shufflenet_ssd())];
        let mut cfg = NetworkConfig {
            mincep_enabled: [false; EXTRA_LAYERS],
            plain_extra_fallback: true,
            s_min: 0.2,
            s_max: 0.9,
            ..Self::default()
        };
        rows.push(("shuffledet plain extras".into(), cfg.clone()));
        cfg.s_min = 0.05;
        cfg.s_max = 0.4;
        rows.push(("+ small scales".into(), cfg.clone()));
        for i in 0..EXTRA_LAYERS {
            cfg.mincep_enabled[i] = true;
            rows.push((format!("+ mincep-{}", i + 1), cfg.clone()));
        }
        rows
    }
}
