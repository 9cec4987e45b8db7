//! Geometry-conditioned multi-view diffusion pipeline.
//!
//! A scene representation transformer with epipolar-biased attention
//! encodes posed views into a set-latent scene code; a view-conditioned
//! denoising diffusion model generates consistent novel views jointly;
//! space carving and marching cubes turn generated views into evaluable
//! meshes. Everything runs on a small built-in reverse-mode tensor
//! engine, on CPU, deterministically per seed.

pub mod camera;
pub mod diffcore;
pub mod img;
pub mod metrics;
pub mod recon;
pub mod rng;
pub mod scenes;
pub mod srt;
