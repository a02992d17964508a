use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::{conv3d_block, conv3d_block_backward, BlockCache, ConvBlock, ConvBlockSpec};
use super::VideoClip;
use crate::error::{Error, Result};
use crate::linalg::Tensor;
use crate::params::{prefixed, prefixed_mut, Params};
use crate::rational::FrameRate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoFrontendConfig {
    /// Square thumbnail side in pixels.
    pub image_size: usize,
    /// Output channels of each block.
    pub channels: Vec<usize>,
    pub groups: usize,
}

impl Default for VideoFrontendConfig {
    fn default() -> Self {
        VideoFrontendConfig {
            image_size: 128,
            channels: vec![64, 128, 256, 512, 512],
            groups: 32,
        }
    }
}

impl VideoFrontendConfig {
    pub fn embedding_dim(&self) -> usize {
        self.channels.last().copied().unwrap_or(0)
    }

    pub fn block_specs(&self) -> Vec<ConvBlockSpec> {
        let mut prev = 3;
        self.channels
            .iter()
            .map(|&c| {
                let spec = ConvBlockSpec {
                    in_channels: prev,
                    out_channels: c,
                    groups: self.groups,
                };
                prev = c;
                spec
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::ConfigError("video front end needs at least one block".into()));
        }
        let reduction = 1usize << self.channels.len();
        if self.image_size == 0 || self.image_size % reduction != 0 {
            return Err(Error::ConfigError(format!(
                "image size {} is not divisible by {reduction} ({} pooling stages)",
                self.image_size,
                self.channels.len()
            )));
        }
        self.block_specs().iter().try_for_each(|s| s.validate())
    }

    /// Spatial side of the last block output.
    pub fn final_grid(&self) -> usize {
        self.image_size >> self.channels.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoFrontend {
    pub config: VideoFrontendConfig,
    pub blocks: Vec<ConvBlock>,
}

/// Per-frame embeddings, `T × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoEmbeddingSequence {
    pub dim: usize,
    pub embeddings: Vec<f64>,
    pub fps: FrameRate,
}

impl VideoEmbeddingSequence {
    pub fn num_frames(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.embeddings.len() / self.dim
        }
    }
}

pub struct FrontendCache {
    frames: usize,
    blocks: Vec<BlockCache>,
}

impl VideoFrontend {
    pub fn new<R: Rng + ?Sized>(config: VideoFrontendConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let blocks = config
            .block_specs()
            .into_iter()
            .map(|s| ConvBlock::new(s, rng))
            .collect::<Result<_>>()?;
        Ok(VideoFrontend { config, blocks })
    }

    pub fn forward(&self, clip: &VideoClip) -> Result<(Vec<f64>, FrontendCache)> {
        let size = self.config.image_size;
        if clip.height != size || clip.width != size {
            return Err(Error::shape(format!(
                "front end expects {size}x{size} thumbnails, clip is {}x{}",
                clip.height, clip.width
            )));
        }
        let t = clip.num_frames;
        let plane = size * size;
        // HWC -> CHW per frame
        let mut x = vec![0.0; t * 3 * plane];
        for f in 0..t {
            let src = clip.frame(f);
            for p in 0..plane {
                for c in 0..3 {
                    x[(f * 3 + c) * plane + p] = src[p * 3 + c];
                }
            }
        }
        let mut side = size;
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (y, cache) = conv3d_block(block, &x, t, side, side)?;
            caches.push(cache);
            x = y;
            side /= 2;
        }
        let c = self.config.embedding_dim();
        let grid = side * side;
        let mut emb = vec![0.0; t * c];
        for f in 0..t {
            for ch in 0..c {
                let s = &x[(f * c + ch) * grid..(f * c + ch + 1) * grid];
                emb[f * c + ch] = s.iter().sum::<f64>() / grid as f64;
            }
        }
        Ok((emb, FrontendCache { frames: t, blocks: caches }))
    }

    pub fn backward(&self, cache: &FrontendCache, d_emb: &[f64], grads: &mut VideoFrontend) {
        let c = self.config.embedding_dim();
        let side = self.config.final_grid();
        let grid = side * side;
        let t = cache.frames;
        let mut d = vec![0.0; t * c * grid];
        for f in 0..t {
            for ch in 0..c {
                let g = d_emb[f * c + ch] / grid as f64;
                d[(f * c + ch) * grid..(f * c + ch + 1) * grid].iter_mut().for_each(|v| *v = g);
            }
        }
        for (i, block) in self.blocks.iter().enumerate().rev() {
            d = conv3d_block_backward(block, &cache.blocks[i], &d, &mut grads.blocks[i], i > 0);
        }
    }
}

impl Params for VideoFrontend {
    fn params(&self) -> Vec<(String, &Tensor)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(i, b)| prefixed(&format!("block{i}"), b.params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        self.blocks
            .iter_mut()
            .enumerate()
            .flat_map(|(i, b)| prefixed_mut(&format!("block{i}"), b.params_mut()))
            .collect()
    }
}

/// Embeds every frame of `clip`; one output row per input frame.
pub fn embed_clip(clip: &VideoClip, frontend: &VideoFrontend) -> Result<VideoEmbeddingSequence> {
    let (embeddings, _) = frontend.forward(clip)?;
    Ok(VideoEmbeddingSequence {
        dim: frontend.config.embedding_dim(),
        embeddings,
        fps: clip.fps,
    })
}
