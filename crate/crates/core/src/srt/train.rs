use rand::Rng;

use crate::camera::CameraMeta;
use crate::diffcore::{
    backward, ops, sc, AdamWParams, DiffError, ParamStore, Result, Scalar, Tape, Tensor,
};
use crate::img::{tensor_to_image, Image};
use crate::metrics;
use crate::rng::seeded_rng;
use crate::scenes::LoadedScene;

use super::{decode_rays, encode_views, predict_latent_image, srt_param_names, RayQuery, SrtConfig, ViewTensors};

/// Summed squared color error over the sampled ray set.
pub fn recon_loss<T: Scalar>(pred: &Tensor<T>, truth: &Tensor<T>) -> Result<Tensor<T>> {
    if pred.shape() != truth.shape() {
        return Err(DiffError::ShapeMismatch {
            op: "recon_loss",
            detail: format!("{:?} vs {:?}", pred.shape(), truth.shape()),
        });
    }
    let diff = ops::sub(pred, truth)?;
    ops::sum_all(&ops::mul(&diff, &diff)?)
}

/// Fresh parameter store for a configuration. Linear and conv weights
/// draw from N(0, 1/fan_in); norms start at identity; the output head is
/// zero so an untrained decoder emits a constant color.
pub fn srt_init<T: Scalar>(config: &SrtConfig, seed: u64) -> ParamStore<T> {
    let mut store = ParamStore::new();
    for (name, shape) in srt_param_names(config) {
        let tensor = init_tensor::<T>(&name, &shape, seed);
        store.register(&name, tensor).expect("unique srt parameter names");
    }
    store
}

pub(crate) fn init_tensor<T: Scalar>(name: &str, shape: &[usize], seed: u64) -> Tensor<T> {
    let mut rng = seeded_rng(seed, name);
    if name.ends_with("/g") {
        return Tensor::full(shape.to_vec(), T::one()).expect("finite");
    }
    if name.ends_with("/b") || name.contains("head/2") {
        return Tensor::zeros(shape.to_vec());
    }
    let fan_in: usize = match shape.len() {
        2 => shape[0],
        4 => shape[1] * shape[2] * shape[3],
        _ => shape.iter().product::<usize>().max(1),
    };
    let std = 1.0 / (fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<T> = (0..n)
        .map(|_| {
            sc::<T>(rng.sample::<f64, _>(rand_distr::StandardNormal) * std)
        })
        .collect();
    Tensor::from_vec(shape.to_vec(), data).expect("finite init")
}

#[derive(Debug, Clone)]
pub struct SrtTrainOptions {
    pub steps: usize,
    /// Input views sampled per step; 0 means all views of the scene.
    pub input_views: usize,
    /// Target views sampled per step (with replacement).
    pub target_views: usize,
    pub rays_per_view: usize,
    pub adamw: AdamWParams,
    /// Learning rate drops to `lr_final` after this fraction of steps.
    pub lr_drop_fraction: f64,
    pub lr_final: f64,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for SrtTrainOptions {
    fn default() -> Self {
        SrtTrainOptions {
            steps: 2000,
            input_views: 3,
            target_views: 3,
            rays_per_view: 512,
            adamw: AdamWParams::default(),
            lr_drop_fraction: 0.8,
            lr_final: 1e-5,
            seed: 0,
            log_every: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SrtTrainReport {
    pub steps: usize,
    /// Per-pixel-channel MSE of the last training step.
    pub final_mse: f64,
    /// (step, mse) samples along the run.
    pub history: Vec<(usize, f64)>,
}

/// Train the SRT on a set of loaded scenes.
pub fn train_srt<T: Scalar>(
    store: &mut ParamStore<T>,
    config: &SrtConfig,
    scenes: &[LoadedScene],
    opts: &SrtTrainOptions,
) -> Result<SrtTrainReport> {
    assert!(!scenes.is_empty(), "train_srt needs at least one scene");
    let mut history = Vec::new();
    let mut final_mse = f64::NAN;
    for step in 0..opts.steps {
        let mut rng = seeded_rng(opts.seed, &format!("srt-step-{step}"));
        let scene = &scenes[rng.random_range(0..scenes.len())];
        let n_views = scene.views.len();

        let input_idx: Vec<usize> = if opts.input_views == 0 || opts.input_views >= n_views {
            (0..n_views).collect()
        } else {
            (0..opts.input_views).map(|_| rng.random_range(0..n_views)).collect()
        };
        let target_idx: Vec<usize> =
            (0..opts.target_views.max(1)).map(|_| rng.random_range(0..n_views)).collect();

        let tape = Tape::new();
        let bound = store.bind(&tape);
        let inputs: Vec<ViewTensors<T>> =
            input_idx.iter().map(|&i| ViewTensors::from_view(&scene.views[i])).collect();
        let z = encode_views(&inputs, config, &bound)?;

        let mut queries = Vec::with_capacity(opts.target_views * opts.rays_per_view);
        let mut truth = Vec::with_capacity(queries.capacity() * 3);
        for &ti in &target_idx {
            let view = &scene.views[ti];
            let pose = view.camera.pose().map_err(cam_err)?;
            let intr = view.camera.intrinsics().map_err(cam_err)?;
            for _ in 0..opts.rays_per_view {
                let px = rng.random_range(0..intr.width);
                let py = rng.random_range(0..intr.height);
                let ray =
                    crate::camera::ray_for_pixel([px as f64 + 0.5, py as f64 + 0.5], &pose, &intr)
                        .map_err(cam_err)?;
                queries.push(RayQuery::from_ray(&ray));
                let rgb = view.image.get(px, py);
                truth.extend_from_slice(&[sc::<T>(rgb[0] as f64), sc::<T>(rgb[1] as f64), sc::<T>(rgb[2] as f64)]);
            }
        }
        let truth = Tensor::from_vec(vec![queries.len(), 3], truth)?;
        let pred = decode_rays(&z, &queries, config, &bound)?;
        let loss = recon_loss(&pred, &truth)?;
        let grads = backward(&loss)?;
        store.accumulate_gradients(&bound, &grads);

        let lr = if (step as f64) < opts.lr_drop_fraction * opts.steps as f64 {
            opts.adamw.lr
        } else {
            opts.lr_final
        };
        store.adamw_step(&AdamWParams { lr, ..opts.adamw })?;

        let mse = loss.item().into_f64() / (queries.len() * 3) as f64;
        final_mse = mse;
        if opts.log_every > 0 && step % opts.log_every == 0 {
            history.push((step, mse));
        }
    }
    history.push((opts.steps.saturating_sub(1), final_mse));
    Ok(SrtTrainReport { steps: opts.steps, final_mse, history })
}

fn cam_err(e: crate::camera::CameraError) -> DiffError {
    DiffError::ShapeMismatch { op: "train_srt", detail: e.to_string() }
}

/// Render a held-out view through the SRT (encode inputs, decode the full
/// target grid, clamp) and report PSNR against the ground-truth image.
pub fn evaluate_view_psnr<T: Scalar>(
    store: &ParamStore<T>,
    config: &SrtConfig,
    input_views: &[&crate::scenes::RenderedView],
    target_camera: &CameraMeta,
    target_image: &Image,
) -> Result<f64> {
    let bound = store.bind_untracked();
    let inputs: Vec<ViewTensors<T>> =
        input_views.iter().map(|v| ViewTensors::from_view(v)).collect();
    let z = encode_views(&inputs, config, &bound)?;
    let pred = predict_latent_image(&z, target_camera, target_image.width, config, &bound)?;
    let img = tensor_to_image(&pred.clamped(T::zero(), T::one()));
    metrics::psnr(&img, target_image, 1.0).map_err(|e| DiffError::ShapeMismatch {
        op: "evaluate_view_psnr",
        detail: e.to_string(),
    })
}
