//! Camera rigs, dataset generation, and the on-disk layout:
//! `<root>/<split>/<scene-id>/{view_k.ppm, view_k.json, spec.json,
//! occupancy.bin}` plus a `manifest.json` per split.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraMeta, Intrinsics};
use crate::rng::seeded_rng;

use super::{generate_scene, render_view, voxelize, RenderedView, SceneSpec};

/// Training cameras draw azimuths from these eight discrete angles.
pub const TRAIN_AZIMUTHS_DEG: [f64; 8] = [0.0, 45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0];

/// Training elevation range, degrees.
pub const TRAIN_ELEVATION_RANGE: (f64, f64) = (-10.0, 45.0);

/// Test rigs: azimuth every 22.5 degrees at a fixed 30-degree elevation.
pub const TEST_ELEVATION_DEG: f64 = 30.0;
pub const TEST_AZIMUTH_STEP_DEG: f64 = 22.5;
pub const TEST_VIEW_COUNT: usize = 16;

/// Threshold used when discarding empty renders during generation.
pub const EMPTY_RENDER_TOL: f32 = 0.05;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("image: {0}")]
    Image(#[from] crate::img::ImageError),
    #[error("camera: {0}")]
    Camera(#[from] crate::camera::CameraError),
    #[error("occupancy: {0}")]
    Occupancy(#[from] crate::recon::ReconError),
    #[error("manifest: {0}")]
    Invalid(String),
    #[error("could not find a non-empty view after {0} camera draws")]
    EmptyViews(usize),
}

/// One train-camera draw: azimuth from the eight discrete angles,
/// elevation uniform in [-10, 45] degrees.
pub fn sample_train_camera(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let az = TRAIN_AZIMUTHS_DEG[rng.random_range(0..TRAIN_AZIMUTHS_DEG.len())];
    let el = rng.random_range(TRAIN_ELEVATION_RANGE.0..TRAIN_ELEVATION_RANGE.1);
    (az, el)
}

/// The fixed 16-view test rig.
pub fn sample_test_rig() -> Vec<(f64, f64)> {
    (0..TEST_VIEW_COUNT)
        .map(|k| (k as f64 * TEST_AZIMUTH_STEP_DEG, TEST_ELEVATION_DEG))
        .collect()
}

/// Reconstruction rig: a fixed 30-degree ring alone cannot constrain the
/// top and bottom of an object, so elevations cycle through a spread.
pub const RECON_ELEVATIONS_DEG: [f64; 4] = [-10.0, 10.0, 30.0, 40.0];

pub fn sample_recon_rig(n_views: usize) -> Vec<(f64, f64)> {
    (0..n_views)
        .map(|k| {
            (
                k as f64 * 360.0 / n_views as f64,
                RECON_ELEVATIONS_DEG[k % RECON_ELEVATIONS_DEG.len()],
            )
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetParams {
    pub seed: u64,
    pub split: String,
    pub n_scenes: usize,
    pub views_per_scene: usize,
    pub difficulty: u8,
    pub image_size: usize,
    pub camera_radius: f64,
    pub occupancy_resolution: usize,
}

impl Default for DatasetParams {
    fn default() -> Self {
        DatasetParams {
            seed: 0,
            split: "train".into(),
            n_scenes: 16,
            views_per_scene: 12,
            difficulty: 2,
            image_size: 32,
            camera_radius: 2.7,
            occupancy_resolution: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ViewEntry {
    pub ppm: String,
    pub camera_json: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SceneEntry {
    pub id: String,
    pub spec_json: String,
    pub occupancy_bin: String,
    pub views: Vec<ViewEntry>,
}

/// Per-split index of every generated file, with paths relative to the
/// split directory.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetManifest {
    pub split: String,
    pub image_size: usize,
    pub scenes: Vec<SceneEntry>,
}

fn is_test_split(split: &str) -> bool {
    split == "test"
}

/// Generate one split under `<root>/<split>/`. Deterministic in
/// `params.seed`. Empty renders (no foreground pixels) invalidate the
/// camera draw and trigger re-sampling, mirroring the data filtering of
/// the training protocol.
pub fn generate_dataset(root: &Path, params: &DatasetParams) -> Result<DatasetManifest, DatasetError> {
    let split_dir = root.join(&params.split);
    std::fs::create_dir_all(&split_dir)?;
    let intr = Intrinsics::square(params.image_size);
    let test_rig = sample_test_rig();
    let mut scenes = Vec::with_capacity(params.n_scenes);
    for si in 0..params.n_scenes {
        let scene_seed = crate::rng::derive_seed(params.seed, &format!("{}/scene/{}", params.split, si));
        let spec = generate_scene(scene_seed, params.difficulty);
        let id = format!("scene_{:04}", si);
        let scene_dir = split_dir.join(&id);
        std::fs::create_dir_all(&scene_dir)?;

        let spec_name = format!("{}/spec.json", id);
        serde_json::to_writer_pretty(
            std::io::BufWriter::new(std::fs::File::create(scene_dir.join("spec.json"))?),
            &spec,
        )?;

        let occ = voxelize(&spec, params.occupancy_resolution);
        let occ_name = format!("{}/occupancy.bin", id);
        occ.save(&scene_dir.join("occupancy.bin"))?;

        let mut cam_rng = seeded_rng(scene_seed, "cameras");
        let mut views = Vec::with_capacity(params.views_per_scene);
        for vi in 0..params.views_per_scene {
            let view = render_nonempty_view(
                &spec,
                &intr,
                params.camera_radius,
                &mut cam_rng,
                if is_test_split(&params.split) {
                    Some(test_rig[vi % test_rig.len()])
                } else {
                    None
                },
            )?;
            let ppm_name = format!("{}/view_{}.ppm", id, vi);
            let json_name = format!("{}/view_{}.json", id, vi);
            view.image.save_ppm(&scene_dir.join(format!("view_{}.ppm", vi)))?;
            serde_json::to_writer_pretty(
                std::io::BufWriter::new(
                    std::fs::File::create(scene_dir.join(format!("view_{}.json", vi)))?,
                ),
                &view.camera,
            )?;
            views.push(ViewEntry { ppm: ppm_name, camera_json: json_name });
        }
        scenes.push(SceneEntry { id, spec_json: spec_name, occupancy_bin: occ_name, views });
    }
    let manifest =
        DatasetManifest { split: params.split.clone(), image_size: params.image_size, scenes };
    serde_json::to_writer_pretty(
        std::io::BufWriter::new(std::fs::File::create(split_dir.join("manifest.json"))?),
        &manifest,
    )?;
    Ok(manifest)
}

fn render_nonempty_view(
    spec: &SceneSpec,
    intr: &Intrinsics,
    radius: f64,
    rng: &mut ChaCha8Rng,
    fixed_angles: Option<(f64, f64)>,
) -> Result<RenderedView, DatasetError> {
    const MAX_TRIES: usize = 64;
    for _ in 0..MAX_TRIES {
        let (az, el) = match fixed_angles {
            Some(angles) => angles,
            None => sample_train_camera(rng),
        };
        let meta = CameraMeta::new(az, el, radius, intr);
        let view = render_view(spec, &meta);
        if view.foreground_pixel_count(EMPTY_RENDER_TOL) > 0 {
            return Ok(view);
        }
        if fixed_angles.is_some() {
            // a fixed test camera cannot be re-sampled
            return Ok(view);
        }
    }
    Err(DatasetError::EmptyViews(MAX_TRIES))
}

/// Load and validate a split manifest: every referenced file must exist
/// and view counts must be uniform.
pub fn load_manifest(split_dir: &Path) -> Result<DatasetManifest, DatasetError> {
    let manifest: DatasetManifest = serde_json::from_reader(std::io::BufReader::new(
        std::fs::File::open(split_dir.join("manifest.json"))?,
    ))?;
    let expected_views = manifest.scenes.first().map(|s| s.views.len()).unwrap_or(0);
    for scene in &manifest.scenes {
        if scene.views.len() != expected_views {
            return Err(DatasetError::Invalid(format!(
                "scene {} has {} views, expected {}",
                scene.id,
                scene.views.len(),
                expected_views
            )));
        }
        for rel in [&scene.spec_json, &scene.occupancy_bin]
            .into_iter()
            .chain(scene.views.iter().flat_map(|v| [&v.ppm, &v.camera_json]))
        {
            if !split_dir.join(rel).exists() {
                return Err(DatasetError::Invalid(format!("missing file {}", rel)));
            }
        }
    }
    Ok(manifest)
}

/// A scene loaded back from disk for training or evaluation.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub id: String,
    pub spec: SceneSpec,
    pub views: Vec<RenderedView>,
    pub occupancy_path: PathBuf,
}

pub fn load_scene(split_dir: &Path, entry: &SceneEntry) -> Result<LoadedScene, DatasetError> {
    let spec: SceneSpec = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(
        split_dir.join(&entry.spec_json),
    )?))?;
    let mut views = Vec::with_capacity(entry.views.len());
    for v in &entry.views {
        let image = crate::img::Image::load_ppm(&split_dir.join(&v.ppm))?;
        let camera: CameraMeta = serde_json::from_reader(std::io::BufReader::new(
            std::fs::File::open(split_dir.join(&v.camera_json))?,
        ))?;
        views.push(RenderedView { image, camera, background: super::BACKGROUND });
    }
    Ok(LoadedScene {
        id: entry.id.clone(),
        spec,
        views,
        occupancy_path: split_dir.join(&entry.occupancy_bin),
    })
}
