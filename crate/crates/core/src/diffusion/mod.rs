//! View-conditioned denoising diffusion.
//!
//! A small UNet predicts the noise in a target view given the noisy
//! image concatenated with the SRT's low-resolution latent image of the
//! same view, cross-attention on the set-latent scene code, and
//! multi-view attention across the jointly generated views. Images live
//! in [-1, 1] inside the model and are de-normalized on output.

mod generate;
mod sampler;
mod schedule;
mod train;
mod unet;

pub use generate::{generate_multiview, Candidate, GenerateOptions, GenerationResult};
pub use sampler::ddim_sample;
pub use schedule::{q_sample, schedule_linear, NoiseSchedule};
pub use train::{
    normalize_image, train_diffusion, unet_init, vldm_loss, DiffTrainOptions, DiffTrainReport,
};
pub use unet::{noise_mse, unet_forward, unet_param_names, MultiViewBatch, UNetConfig};

#[cfg(test)]
mod tests;
