//! Sliding-window inference over images larger than the network input.

use serde::{Deserialize, Serialize};

use super::nms::{nms, Detection};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileWindow {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

/// Window origins along one axis. The last window is shifted back so it ends
/// on the image edge.
fn axis_origins(len: usize, tile: usize, stride: usize) -> Vec<usize> {
    if len <= tile {
        return vec![0];
    }
    let mut out: Vec<usize> = (0..).map(|k| k * stride).take_while(|&o| o + tile < len).collect();
    out.push(len - tile);
    out.dedup();
    out
}

/// Windows of `tile` pixels overlapping by `overlap`, row-major. An image
/// smaller than a tile along an axis gets one window of its own size there.
pub fn plan_tiles(width: usize, height: usize, tile: usize, overlap: usize) -> Result<Vec<TileWindow>> {
    if tile == 0 || overlap >= tile {
        return Err(Error::InvalidArgument(format!(
            "tile {tile} must exceed overlap {overlap}"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!("cannot tile a {width}x{height} image")));
    }
    let stride = tile - overlap;
    let xs = axis_origins(width, tile, stride);
    let ys = axis_origins(height, tile, stride);
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &y0 in &ys {
        for &x0 in &xs {
            out.push(TileWindow {
                x0,
                y0,
                width: tile.min(width),
                height: tile.min(height),
            });
        }
    }
    Ok(out)
}

/// Shifts each tile's detections (window pixel coordinates) into the image
/// frame and suppresses duplicates, first per tile, then globally.
pub fn merge_tiles(per_tile: &[(TileWindow, Vec<Detection>)], nms_threshold: f32) -> Result<Vec<Detection>> {
    let mut all = Vec::new();
    for (win, dets) in per_tile {
        for d in dets {
            let b = d.bbox;
            let inside = b.is_valid()
                && b.xmin >= 0.0
                && b.ymin >= 0.0
                && b.xmax <= win.width as f32
                && b.ymax <= win.height as f32;
            if !inside {
                return Err(Error::InvalidArgument(format!(
                    "detection {b:?} lies outside its {}x{} window at ({}, {})",
                    win.width, win.height, win.x0, win.y0
                )));
            }
        }
        for d in nms(dets, nms_threshold) {
            all.push(Detection {
                bbox: d.bbox.translate(win.x0 as f32, win.y0 as f32),
                ..d
            });
        }
    }
    Ok(nms(&all, nms_threshold))
}
