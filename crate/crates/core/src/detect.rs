//! Image-level detection, whole-image or tiled.

use crate::error::Result;
use crate::graph::{preprocess, Network, RgbImage};
use crate::postprocess::{merge_tiles, plan_tiles, run_postprocess, Detection, PostprocessParams};
use crate::ssd::{generate_priors, PriorSet};

/// Overlap between neighbouring tiles, in pixels.
pub const TILE_OVERLAP: usize = 100;

pub struct Detector {
    net: Network,
    priors: PriorSet,
    params: PostprocessParams,
}

impl Detector {
    pub fn new(net: Network) -> Result<Self> {
        let cfg = net.config();
        let priors = generate_priors(cfg)?;
        let params = PostprocessParams {
            conf_threshold: cfg.conf_threshold,
            nms_threshold: cfg.nms_threshold,
            variances: cfg.variances,
        };
        Ok(Detector {
            net,
            priors,
            params,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn priors(&self) -> &PriorSet {
        &self.priors
    }

    /// Resizes the whole image to the network input; boxes are in image pixels.
    pub fn detect(&self, image: &RgbImage) -> Result<Vec<Detection>> {
        let cfg = self.net.config();
        let input = preprocess(image, cfg.input_size, cfg.pixel_mean)?;
        let head = self.net.forward(&input)?;
        run_postprocess(&head, &self.priors, &self.params, (image.width, image.height))
    }

    /// Runs [`Detector::detect`] on overlapping input-sized windows and merges.
    pub fn detect_tiled(&self, image: &RgbImage) -> Result<Vec<Detection>> {
        let tile = self.net.config().input_size;
        let windows = plan_tiles(image.width, image.height, tile, TILE_OVERLAP.min(tile - 1))?;
        let mut per_tile = Vec::with_capacity(windows.len());
        for w in windows {
            let crop = image.crop(w.x0, w.y0, w.width, w.height)?;
            per_tile.push((w, self.detect(&crop)?));
        }
        merge_tiles(&per_tile, self.params.nms_threshold)
    }
}
