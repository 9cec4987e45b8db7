use crate::camera::{epipolar_bias, ray_for_pixel, CameraMeta};
use crate::diffcore::{ops, sc, BoundParams, DiffError, Result, Scalar, Tensor};
use crate::img::image_to_tensor;
use crate::scenes::RenderedView;

use super::{RayQuery, SetLatent, SrtConfig, RAY_ENC_DIM, RAY_ENC_FREQS};

/// An input view converted to tensor form.
pub struct ViewTensors<T: Scalar> {
    /// [3, H, W], values in [0, 1].
    pub image: Tensor<T>,
    pub camera: CameraMeta,
}

impl<T: Scalar> ViewTensors<T> {
    pub fn from_view(view: &RenderedView) -> ViewTensors<T> {
        ViewTensors { image: image_to_tensor(&view.image), camera: view.camera }
    }
}

/// Ray queries through the cell centers of a grid over the camera image.
pub fn ray_queries_for_camera(camera: &CameraMeta, grid_w: usize, grid_h: usize) -> Vec<RayQuery> {
    let pose = camera.pose().expect("valid camera meta");
    let intr = camera.intrinsics().expect("valid camera meta");
    let sx = intr.width as f64 / grid_w as f64;
    let sy = intr.height as f64 / grid_h as f64;
    let mut queries = Vec::with_capacity(grid_w * grid_h);
    for gy in 0..grid_h {
        for gx in 0..grid_w {
            let pixel = [(gx as f64 + 0.5) * sx, (gy as f64 + 0.5) * sy];
            let ray = ray_for_pixel(pixel, &pose, &intr).expect("cell center in bounds");
            queries.push(RayQuery::from_ray(&ray));
        }
    }
    queries
}

/// Sinusoidal encoding of ray origin and direction, 6 frequency bands
/// each: [N, RAY_ENC_DIM], untracked.
fn ray_encoding<T: Scalar>(queries: &[RayQuery]) -> Tensor<T> {
    let mut data = Vec::with_capacity(queries.len() * RAY_ENC_DIM);
    for q in queries {
        for &value in q.origin.iter().chain(q.direction.iter()) {
            for k in 0..RAY_ENC_FREQS {
                let arg = (1 << k) as f64 * std::f64::consts::PI * value;
                data.push(sc::<T>(arg.sin()));
                data.push(sc::<T>(arg.cos()));
            }
        }
    }
    Tensor::from_vec(vec![queries.len(), RAY_ENC_DIM], data).expect("finite encoding")
}

fn linear<T: Scalar>(
    p: &BoundParams<T>,
    prefix: &str,
    x: &Tensor<T>,
) -> Result<Tensor<T>> {
    let w = p.get(&format!("{prefix}/w"))?;
    let b = p.get(&format!("{prefix}/b"))?;
    ops::add_bias(&ops::matmul(x, w)?, b)
}

fn layer_norm_named<T: Scalar>(
    p: &BoundParams<T>,
    prefix: &str,
    x: &Tensor<T>,
) -> Result<Tensor<T>> {
    let g = p.get(&format!("{prefix}/g"))?;
    let b = p.get(&format!("{prefix}/b"))?;
    ops::layer_norm(x, g, b, 1e-5)
}

/// Multi-head attention: queries [N, D] against keys/values [M, D], with
/// an optional [N, M] additive logit bias shared across heads.
fn multi_head_attention<T: Scalar>(
    p: &BoundParams<T>,
    prefix: &str,
    queries: &Tensor<T>,
    keys_values: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    heads: usize,
) -> Result<Tensor<T>> {
    let n = queries.shape()[0];
    let m = keys_values.shape()[0];
    let d = queries.shape()[1];
    let dh = d / heads;

    let split = |t: Tensor<T>, rows: usize| -> Result<Tensor<T>> {
        // [rows, D] -> [heads, rows, Dh]
        ops::permute(&ops::reshape(&t, vec![rows, heads, dh])?, &[1, 0, 2])
    };
    let q = split(linear(p, &format!("{prefix}/q"), queries)?, n)?;
    let k = split(linear(p, &format!("{prefix}/k"), keys_values)?, m)?;
    let v = split(linear(p, &format!("{prefix}/v"), keys_values)?, m)?;

    let scores = ops::scale(&ops::matmul_nt(&q, &k)?, sc::<T>(1.0 / (dh as f64).sqrt()))?;
    let attn = ops::softmax_rows(&scores, bias)?;
    let ctx = ops::matmul(&attn, &v)?; // [heads, N, Dh]
    let merged = ops::reshape(&ops::permute(&ctx, &[1, 0, 2])?, vec![n, d])?;
    linear(p, &format!("{prefix}/o"), &merged)
}

fn mlp<T: Scalar>(p: &BoundParams<T>, prefix: &str, x: &Tensor<T>) -> Result<Tensor<T>> {
    let h = ops::silu(&linear(p, &format!("{prefix}/1"), x)?)?;
    linear(p, &format!("{prefix}/2"), &h)
}

/// Cross-view epipolar bias over the full token matrix, or None when the
/// feature is disabled. Intra-view blocks stay zero: the epipolar
/// constraint only relates distinct views.
fn build_bias<T: Scalar>(
    cameras: &[CameraMeta],
    grid: usize,
    config: &SrtConfig,
) -> Result<(Option<Tensor<T>>, usize)> {
    if !config.epipolar_enabled || cameras.len() < 2 {
        return Ok((None, 0));
    }
    let per_view = grid * grid;
    let n = cameras.len() * per_view;
    let mut bias = vec![0.0f64; n * n];
    let mut degenerate = 0usize;
    for (i, cam_i) in cameras.iter().enumerate() {
        let pose_i = cam_i.pose().map_err(camera_err)?;
        let intr_i = cam_i.intrinsics().map_err(camera_err)?;
        for (j, cam_j) in cameras.iter().enumerate() {
            if i == j {
                continue;
            }
            let pose_j = cam_j.pose().map_err(camera_err)?;
            let intr_j = cam_j.intrinsics().map_err(camera_err)?;
            let map = epipolar_bias(
                &pose_i,
                &pose_j,
                &intr_i,
                &intr_j,
                grid,
                grid,
                config.sigma_px,
                config.bias_weight,
            )
            .map_err(camera_err)?;
            if map.degenerate {
                degenerate += 1;
                continue;
            }
            for q in 0..per_view {
                for kk in 0..per_view {
                    bias[(i * per_view + q) * n + (j * per_view + kk)] =
                        map.weights[q * per_view + kk];
                }
            }
        }
    }
    let data: Vec<T> = bias.into_iter().map(sc::<T>).collect();
    Ok((Some(Tensor::from_vec(vec![n, n], data)?), degenerate))
}

fn camera_err(e: crate::camera::CameraError) -> DiffError {
    DiffError::ShapeMismatch { op: "epipolar_bias", detail: e.to_string() }
}

/// Encode posed views into the set-latent scene representation.
pub fn encode_views<T: Scalar>(
    views: &[ViewTensors<T>],
    config: &SrtConfig,
    params: &BoundParams<T>,
) -> Result<SetLatent<T>> {
    if views.is_empty() {
        return Err(DiffError::ShapeMismatch {
            op: "encode_views",
            detail: "need at least one input view".into(),
        });
    }
    let h = views[0].image.shape()[1];
    let w = views[0].image.shape()[2];
    for v in views {
        if v.image.shape() != [3, h, w] {
            return Err(DiffError::ShapeMismatch {
                op: "encode_views",
                detail: format!("view resolution {:?} differs from [3, {h}, {w}]", v.image.shape()),
            });
        }
    }
    config.validate(w)?;
    let grid = w / config.patch_size;
    let per_view = grid * grid;

    let patch_w = params.get("srt/patch_embed/w")?;
    let patch_b = params.get("srt/patch_embed/b")?;

    let mut view_tokens = Vec::with_capacity(views.len());
    let mut provenance = Vec::with_capacity(views.len() * per_view);
    for (vi, view) in views.iter().enumerate() {
        // CNN patch features: conv with patch-size kernel and stride
        let feat = ops::conv2d(&view.image, patch_w, config.patch_size, 0)?; // [D, g, g]
        let d = feat.shape()[0];
        let tokens = ops::transpose2d(&ops::reshape(&feat, vec![d, per_view])?)?; // [g^2, D]
        let tokens = ops::add_bias(&tokens, patch_b)?;
        // camera injection: sinusoidal ray encodings per token
        let rays = ray_queries_for_camera(&view.camera, grid, grid);
        let enc = linear(params, "srt/ray_embed", &ray_encoding::<T>(&rays))?;
        view_tokens.push(ops::add(&tokens, &enc)?);
        for gy in 0..grid {
            for gx in 0..grid {
                provenance.push((vi, gy, gx));
            }
        }
    }
    let refs: Vec<&Tensor<T>> = view_tokens.iter().collect();
    let mut x = ops::concat(&refs, 0)?; // [V*g^2, D]

    let cameras: Vec<CameraMeta> = views.iter().map(|v| v.camera).collect();
    let (bias, degenerate_pairs) = build_bias::<T>(&cameras, grid, config)?;

    for layer in 0..config.encoder_layers {
        let prefix = format!("srt/enc{layer}");
        let normed = layer_norm_named(params, &format!("{prefix}/ln1"), &x)?;
        let attended = multi_head_attention(
            params,
            &format!("{prefix}/attn"),
            &normed,
            &normed,
            bias.as_ref(),
            config.heads,
        )?;
        x = ops::add(&x, &attended)?;
        let normed = layer_norm_named(params, &format!("{prefix}/ln2"), &x)?;
        x = ops::add(&x, &mlp(params, &format!("{prefix}/mlp"), &normed)?)?;
    }
    let tokens = layer_norm_named(params, "srt/enc_norm", &x)?;
    Ok(SetLatent { tokens, provenance, degenerate_pairs })
}

/// Decode a batch of ray queries to RGB: [N, 3]. Rows are independent
/// (queries never attend to each other), so batching equals looping.
pub fn decode_rays<T: Scalar>(
    z: &SetLatent<T>,
    queries: &[RayQuery],
    config: &SrtConfig,
    params: &BoundParams<T>,
) -> Result<Tensor<T>> {
    let mut q = linear(params, "srt/query_embed", &ray_encoding::<T>(queries))?;
    for layer in 0..config.decoder_layers {
        let prefix = format!("srt/dec{layer}");
        let normed = layer_norm_named(params, &format!("{prefix}/ln1"), &q)?;
        let attended = multi_head_attention(
            params,
            &format!("{prefix}/attn"),
            &normed,
            &z.tokens,
            None,
            config.heads,
        )?;
        q = ops::add(&q, &attended)?;
        let normed = layer_norm_named(params, &format!("{prefix}/ln2"), &q)?;
        q = ops::add(&q, &mlp(params, &format!("{prefix}/mlp"), &normed)?)?;
    }
    let headed = layer_norm_named(params, "srt/head/ln", &q)?;
    let hidden = ops::silu(&linear(params, "srt/head/1", &headed)?)?;
    linear(params, "srt/head/2", &hidden)
}

/// Single-ray decode.
pub fn decode_ray<T: Scalar>(
    z: &SetLatent<T>,
    query: &RayQuery,
    config: &SrtConfig,
    params: &BoundParams<T>,
) -> Result<[T; 3]> {
    let out = decode_rays(z, std::slice::from_ref(query), config, params)?;
    Ok([out.data()[0], out.data()[1], out.data()[2]])
}

/// Decode the full target-view ray grid at the requested resolution:
/// [res, res, 3].
pub fn predict_latent_image<T: Scalar>(
    z: &SetLatent<T>,
    target: &CameraMeta,
    resolution: usize,
    config: &SrtConfig,
    params: &BoundParams<T>,
) -> Result<Tensor<T>> {
    let queries = ray_queries_for_camera(target, resolution, resolution);
    let rgb = decode_rays(z, &queries, config, params)?;
    ops::reshape(&rgb, vec![resolution, resolution, 3])
}

/// Parameter names and shapes for a configuration, used by the
/// initializer and checkpoint checks.
pub fn srt_param_names(config: &SrtConfig) -> Vec<(String, Vec<usize>)> {
    let d = config.model_dim;
    let p = config.patch_size;
    let hidden = 4 * d;
    let mut names: Vec<(String, Vec<usize>)> = vec![
        ("srt/patch_embed/w".into(), vec![d, 3, p, p]),
        ("srt/patch_embed/b".into(), vec![d]),
        ("srt/ray_embed/w".into(), vec![RAY_ENC_DIM, d]),
        ("srt/ray_embed/b".into(), vec![d]),
        ("srt/query_embed/w".into(), vec![RAY_ENC_DIM, d]),
        ("srt/query_embed/b".into(), vec![d]),
        ("srt/enc_norm/g".into(), vec![d]),
        ("srt/enc_norm/b".into(), vec![d]),
        ("srt/head/ln/g".into(), vec![d]),
        ("srt/head/ln/b".into(), vec![d]),
        ("srt/head/1/w".into(), vec![d, d]),
        ("srt/head/1/b".into(), vec![d]),
        ("srt/head/2/w".into(), vec![d, 3]),
        ("srt/head/2/b".into(), vec![3]),
    ];
    let mut block = |prefix: String| {
        for ln in ["ln1", "ln2"] {
            names.push((format!("{prefix}/{ln}/g"), vec![d]));
            names.push((format!("{prefix}/{ln}/b"), vec![d]));
        }
        for proj in ["q", "k", "v", "o"] {
            names.push((format!("{prefix}/attn/{proj}/w"), vec![d, d]));
            names.push((format!("{prefix}/attn/{proj}/b"), vec![d]));
        }
        names.push((format!("{prefix}/mlp/1/w"), vec![d, hidden]));
        names.push((format!("{prefix}/mlp/1/b"), vec![hidden]));
        names.push((format!("{prefix}/mlp/2/w"), vec![hidden, d]));
        names.push((format!("{prefix}/mlp/2/b"), vec![d]));
    };
    for layer in 0..config.encoder_layers {
        block(format!("srt/enc{layer}"));
    }
    for layer in 0..config.decoder_layers {
        block(format!("srt/dec{layer}"));
    }
    names
}
