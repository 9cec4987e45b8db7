//! Procedural multi-view dataset: primitive scenes rendered by ray
//! casting, with ground-truth occupancy volumes. Objects are centered
//! and contained in the unit-normalized cube [-1, 1]^3.

mod dataset;
mod render;

pub use dataset::{
    generate_dataset, load_manifest, load_scene, sample_recon_rig, sample_test_rig,
    sample_train_camera,
    DatasetError, DatasetManifest, DatasetParams, LoadedScene, SceneEntry, ViewEntry,
    EMPTY_RENDER_TOL, TEST_AZIMUTH_STEP_DEG, TEST_ELEVATION_DEG, TEST_VIEW_COUNT,
    RECON_ELEVATIONS_DEG, TRAIN_AZIMUTHS_DEG, TRAIN_ELEVATION_RANGE,
};
pub use render::{render_image, render_view, render_view_supersampled};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::camera::CameraMeta;
use crate::img::Image;
use crate::recon::VoxelGrid;
use crate::rng::seeded_rng;

/// Solid background color; foreground masks are a simple threshold
/// against it.
pub const BACKGROUND: [f32; 3] = [0.5, 0.5, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrimitiveKind {
    Sphere { radius: f64 },
    Box { half_extents: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub center: [f64; 3],
    #[serde(flatten)]
    pub kind: PrimitiveKind,
    pub albedo: [f64; 3],
}

/// Deterministic description of one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub primitives: Vec<Primitive>,
}

/// Generate a scene. Difficulty selects the primitive count:
/// 1 -> 1-2, 2 -> 3-4, 3 -> 5-8. Deterministic in the seed.
pub fn generate_scene(seed: u64, difficulty: u8) -> SceneSpec {
    let mut rng = seeded_rng(seed, "scene-gen");
    let count = match difficulty {
        0 | 1 => rng.random_range(1..=2usize),
        2 => rng.random_range(3..=4usize),
        _ => rng.random_range(5..=8usize),
    };
    let mut primitives = Vec::with_capacity(count);
    for _ in 0..count {
        let center = [
            rng.random_range(-0.45..0.45),
            rng.random_range(-0.45..0.45),
            rng.random_range(-0.45..0.45),
        ];
        let kind = if rng.random_range(0.0..1.0) < 0.5 {
            PrimitiveKind::Sphere { radius: rng.random_range(0.15..0.5) }
        } else {
            PrimitiveKind::Box {
                half_extents: [
                    rng.random_range(0.12..0.45),
                    rng.random_range(0.12..0.45),
                    rng.random_range(0.12..0.45),
                ],
            }
        };
        // One channel stays dark so the shaded color can never approach
        // the mid-gray background in every channel at once.
        let dark = rng.random_range(0..3usize);
        let mut albedo = [0.0f64; 3];
        for (c, a) in albedo.iter_mut().enumerate() {
            *a = if c == dark {
                rng.random_range(0.02..0.25)
            } else {
                rng.random_range(0.35..0.95)
            };
        }
        primitives.push(Primitive { center, kind, albedo });
    }
    SceneSpec { seed, primitives }
}

impl SceneSpec {
    /// True if the point lies inside any primitive.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        self.primitives.iter().any(|prim| {
            let d = [p[0] - prim.center[0], p[1] - prim.center[1], p[2] - prim.center[2]];
            match prim.kind {
                PrimitiveKind::Sphere { radius } => {
                    d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= radius * radius
                }
                PrimitiveKind::Box { half_extents } => {
                    d[0].abs() <= half_extents[0]
                        && d[1].abs() <= half_extents[1]
                        && d[2].abs() <= half_extents[2]
                }
            }
        })
    }

    /// Axis-aligned bounds over all primitives.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for prim in &self.primitives {
            let ext = match prim.kind {
                PrimitiveKind::Sphere { radius } => [radius; 3],
                PrimitiveKind::Box { half_extents } => half_extents,
            };
            for a in 0..3 {
                lo[a] = lo[a].min(prim.center[a] - ext[a]);
                hi[a] = hi[a].max(prim.center[a] + ext[a]);
            }
        }
        (lo, hi)
    }
}

/// Ground-truth occupancy over [-1, 1]^3 sampled at cell centers.
pub fn voxelize(spec: &SceneSpec, resolution: usize) -> VoxelGrid {
    assert!(resolution >= 8, "voxelize needs resolution >= 8, got {resolution}");
    let mut grid = VoxelGrid::empty(resolution);
    for z in 0..resolution {
        for y in 0..resolution {
            for x in 0..resolution {
                if spec.contains(grid.cell_center(x, y, z)) {
                    grid.set(x, y, z, true);
                }
            }
        }
    }
    grid
}

/// A rendered view bundled with the camera that produced it.
#[derive(Debug, Clone)]
pub struct RenderedView {
    pub image: Image,
    pub camera: CameraMeta,
    pub background: [f32; 3],
}

impl RenderedView {
    pub fn foreground_pixel_count(&self, tol: f32) -> usize {
        let mut n = 0;
        for y in 0..self.image.height {
            for x in 0..self.image.width {
                let p = self.image.get(x, y);
                let dev = (0..3)
                    .map(|c| (p[c] - self.background[c]).abs())
                    .fold(0.0f32, f32::max);
                if dev > tol {
                    n += 1;
                }
            }
        }
        n
    }
}
