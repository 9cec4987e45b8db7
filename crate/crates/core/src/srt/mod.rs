//! Scene representation transformer.
//!
//! Posed input views become conv patch tokens with ray-based positional
//! encodings; encoder self-attention (epipolar-biased across views)
//! produces a set-latent scene representation; a cross-attention decoder
//! maps ray queries to pixel colors, trained with a summed squared
//! reconstruction loss over sampled rays.

mod model;
mod train;

pub use model::{
    decode_ray, decode_rays, encode_views, predict_latent_image, ray_queries_for_camera,
    srt_param_names, ViewTensors,
};
pub use train::{
    evaluate_view_psnr, recon_loss, srt_init, train_srt, SrtTrainOptions, SrtTrainReport,
};

use serde::{Deserialize, Serialize};

use crate::diffcore::{DiffError, Scalar, Tensor};

/// Architecture and epipolar-bias settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrtConfig {
    pub patch_size: usize,
    pub model_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub heads: usize,
    pub epipolar_enabled: bool,
    /// Gaussian width of the bias, in feature-grid cells.
    pub sigma_px: f64,
    /// Peak bias added to cross-view attention logits.
    pub bias_weight: f64,
}

impl Default for SrtConfig {
    fn default() -> Self {
        SrtConfig {
            patch_size: 4,
            model_dim: 128,
            encoder_layers: 4,
            decoder_layers: 2,
            heads: 4,
            epipolar_enabled: true,
            sigma_px: 2.0,
            bias_weight: 1.0,
        }
    }
}

impl SrtConfig {
    pub fn validate(&self, image_size: usize) -> Result<(), DiffError> {
        if self.model_dim % self.heads != 0 {
            return Err(DiffError::ShapeMismatch {
                op: "srt_config",
                detail: format!("model_dim {} not divisible by {} heads", self.model_dim, self.heads),
            });
        }
        if self.patch_size == 0 || image_size % self.patch_size != 0 {
            return Err(DiffError::ShapeMismatch {
                op: "srt_config",
                detail: format!("patch {} does not divide image {}", self.patch_size, image_size),
            });
        }
        Ok(())
    }
}

/// Number of sinusoidal frequency bands per ray coordinate.
pub const RAY_ENC_FREQS: usize = 6;
/// Ray encoding width: (origin 3 + direction 3) * freqs * (sin, cos).
pub const RAY_ENC_DIM: usize = 6 * RAY_ENC_FREQS * 2;

/// Token-set scene representation with per-token provenance.
pub struct SetLatent<T: Scalar> {
    /// (n_views * tokens_per_view) x model_dim.
    pub tokens: Tensor<T>,
    /// Per token: (view index, grid y, grid x).
    pub provenance: Vec<(usize, usize, usize)>,
    /// Count of view pairs whose epipolar geometry was degenerate
    /// (coincident centers -> zero bias blocks).
    pub degenerate_pairs: usize,
}

/// One ray query for the decoder.
#[derive(Debug, Clone, Copy)]
pub struct RayQuery {
    pub origin: [f64; 3],
    pub direction: [f64; 3],
}

impl RayQuery {
    pub fn from_ray(ray: &crate::camera::Ray) -> RayQuery {
        RayQuery {
            origin: [ray.origin.x, ray.origin.y, ray.origin.z],
            direction: [ray.direction.x, ray.direction.y, ray.direction.z],
        }
    }
}
