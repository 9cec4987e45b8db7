//! Image and geometry quality metrics: PSNR, SSIM, Chamfer distance,
//! volume IoU, and the JSON metric report.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::img::Image;
use crate::recon::VoxelGrid;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("image too small for an {0}x{0} SSIM window: {1}x{2}")]
    ImageTooSmall(usize, usize, usize),
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("voxel resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// PSNR in dB; zero MSE (and anything above the cap) reports as 99 dB.
pub const PSNR_CAP_DB: f64 = 99.0;

pub fn psnr(a: &Image, b: &Image, max_val: f64) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricError::ShapeMismatch(a.width, a.height, b.width, b.height));
    }
    let mse: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(x, y)| {
            let d = (*x - *y) as f64;
            d * d
        })
        .sum::<f64>()
        / a.pixels.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (max_val * max_val / mse).log10()).min(PSNR_CAP_DB))
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            let dx = x as f64 - c;
            let dy = y as f64 - c;
            let v = (-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[y * SSIM_WINDOW + x] = v;
            sum += v;
        }
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Mean local SSIM over valid 11x11 Gaussian windows (sigma 1.5,
/// C1 = (0.01 L)^2, C2 = (0.03 L)^2), per channel then averaged.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricError::ShapeMismatch(a.width, a.height, b.width, b.height));
    }
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(MetricError::ImageTooSmall(SSIM_WINDOW, a.width, a.height));
    }
    let window = gaussian_window();
    let l = 1.0f64;
    let c1 = (0.01 * l) * (0.01 * l);
    let c2 = (0.03 * l) * (0.03 * l);
    let mut total = 0.0;
    let mut count = 0usize;
    for channel in 0..3 {
        for wy in 0..=a.height - SSIM_WINDOW {
            for wx in 0..=a.width - SSIM_WINDOW {
                let (mut mu_x, mut mu_y) = (0.0f64, 0.0f64);
                for ky in 0..SSIM_WINDOW {
                    for kx in 0..SSIM_WINDOW {
                        let w = window[ky * SSIM_WINDOW + kx];
                        let i = ((wy + ky) * a.width + wx + kx) * 3 + channel;
                        mu_x += w * a.pixels[i] as f64;
                        mu_y += w * b.pixels[i] as f64;
                    }
                }
                let (mut var_x, mut var_y, mut cov) = (0.0f64, 0.0f64, 0.0f64);
                for ky in 0..SSIM_WINDOW {
                    for kx in 0..SSIM_WINDOW {
                        let w = window[ky * SSIM_WINDOW + kx];
                        let i = ((wy + ky) * a.width + wx + kx) * 3 + channel;
                        let dx = a.pixels[i] as f64 - mu_x;
                        let dy = b.pixels[i] as f64 - mu_y;
                        var_x += w * dx * dx;
                        var_y += w * dy * dy;
                        cov += w * dx * dy;
                    }
                }
                let s = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2))
                    / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
                total += s;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

// ── Chamfer distance ────────────────────────────────────────────────

/// Static kd-tree over 3D points for nearest-neighbor queries.
struct KdTree {
    // nodes stored as a reordered point array; each subtree is contiguous
    pts: Vec<[f64; 3]>,
    axes: Vec<u8>,
}

impl KdTree {
    fn build(points: &[[f64; 3]]) -> KdTree {
        let mut pts = points.to_vec();
        let mut axes = vec![0u8; points.len()];
        if !pts.is_empty() {
            Self::split(&mut pts, &mut axes, 0);
        }
        KdTree { pts, axes }
    }

    fn split(pts: &mut [[f64; 3]], axes: &mut [u8], depth: u8) {
        if pts.len() <= 1 {
            if !pts.is_empty() {
                axes[0] = depth % 3;
            }
            return;
        }
        let axis = (depth % 3) as usize;
        let mid = pts.len() / 2;
        pts.select_nth_unstable_by(mid, |a, b| a[axis].partial_cmp(&b[axis]).unwrap());
        axes[mid] = axis as u8;
        let (lo, hi) = pts.split_at_mut(mid);
        let (alo, ahi) = axes.split_at_mut(mid);
        Self::split(lo, alo, depth + 1);
        Self::split(&mut hi[1..], &mut ahi[1..], depth + 1);
    }

    fn nearest_sq(&self, q: &[f64; 3]) -> f64 {
        let mut best = f64::INFINITY;
        self.search(q, 0, self.pts.len(), &mut best);
        best
    }

    fn search(&self, q: &[f64; 3], lo: usize, hi: usize, best: &mut f64) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = &self.pts[mid];
        let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + (q[2] - p[2]).powi(2);
        if d2 < *best {
            *best = d2;
        }
        let axis = self.axes[mid] as usize;
        let delta = q[axis] - p[axis];
        let (first, second) = if delta < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(q, first.0, first.1, best);
        if delta * delta < *best {
            self.search(q, second.0, second.1, best);
        }
    }
}

/// Symmetric Chamfer distance: 0.5 * (mean nearest distance from p into
/// q + mean from q into p), non-squared Euclidean.
pub fn chamfer(p: &[[f64; 3]], q: &[[f64; 3]]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(MetricError::EmptyPointSet);
    }
    let tree_q = KdTree::build(q);
    let tree_p = KdTree::build(p);
    let mean_pq: f64 =
        p.iter().map(|x| tree_q.nearest_sq(x).sqrt()).sum::<f64>() / p.len() as f64;
    let mean_qp: f64 =
        q.iter().map(|x| tree_p.nearest_sq(x).sqrt()).sum::<f64>() / q.len() as f64;
    Ok(0.5 * (mean_pq + mean_qp))
}

// ── Volume IoU ──────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeIou {
    pub value: f64,
    /// Both grids empty: IoU defined as 1, flagged.
    pub both_empty: bool,
}

pub fn volume_iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<VolumeIou> {
    if a.resolution() != b.resolution() {
        return Err(MetricError::ResolutionMismatch(a.resolution(), b.resolution()));
    }
    let res = a.resolution();
    let (mut inter, mut union) = (0usize, 0usize);
    for z in 0..res {
        for y in 0..res {
            for x in 0..res {
                let (va, vb) = (a.get(x, y, z), b.get(x, y, z));
                inter += (va && vb) as usize;
                union += (va || vb) as usize;
            }
        }
    }
    if union == 0 {
        return Ok(VolumeIou { value: 1.0, both_empty: true });
    }
    Ok(VolumeIou { value: inter as f64 / union as f64, both_empty: false })
}

// ── Reports ─────────────────────────────────────────────────────────

/// One row of metric values. LPIPS needs a pretrained perceptual network
/// and is always reported as null, keeping the schema stable.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricValues {
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub lpips: Option<f64>,
    pub chamfer: Option<f64>,
    pub volume_iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfigEcho {
    pub ssim_window: usize,
    pub ssim_sigma: f64,
    pub chamfer_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricItem {
    pub id: String,
    pub values: MetricValues,
}

/// Per-item values plus their arithmetic-mean aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config: MetricConfigEcho,
    pub count: usize,
    pub items: Vec<MetricItem>,
    pub aggregate: MetricValues,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let xs: Vec<f64> = values.flatten().collect();
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

impl MetricReport {
    pub fn from_items(config: MetricConfigEcho, items: Vec<MetricItem>) -> MetricReport {
        let aggregate = MetricValues {
            psnr: mean_of(items.iter().map(|i| i.values.psnr)),
            ssim: mean_of(items.iter().map(|i| i.values.ssim)),
            lpips: None,
            chamfer: mean_of(items.iter().map(|i| i.values.chamfer)),
            volume_iou: mean_of(items.iter().map(|i| i.values.volume_iou)),
        };
        MetricReport { config, count: items.len(), items, aggregate }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn image_of(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Image {
        let mut img = Image::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.set(x, y, f(x, y));
            }
        }
        img
    }

    #[test]
    fn psnr_spot_values() {
        let a = Image::filled(8, 8, [0.25, 0.5, 0.75]);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), 99.0);

        // uniform error of 0.1 in every channel: MSE = 0.01 -> 20 dB
        let b = image_of(8, 8, |_, _| [0.35, 0.6, 0.85]);
        let v = psnr(&a, &b, 1.0).unwrap();
        // exact up to the f32 representation of the 0.1 error value
        assert!((v - 20.0).abs() < 1e-5, "got {}", v);

        // uniform error of 1.0: MSE = 1 -> 0 dB
        let zero = Image::filled(8, 8, [0.0, 0.0, 0.0]);
        let one = Image::filled(8, 8, [1.0, 1.0, 1.0]);
        let v = psnr(&zero, &one, 1.0).unwrap();
        assert!(v.abs() < 1e-9, "got {}", v);
    }

    #[test]
    fn psnr_strictly_decreases_with_mse() {
        let a = Image::filled(8, 8, [0.5, 0.5, 0.5]);
        let mut prev = f64::INFINITY;
        for err in [0.01f32, 0.05, 0.1, 0.2, 0.4] {
            let b = Image::filled(8, 8, [0.5 + err, 0.5, 0.5]);
            let v = psnr(&a, &b, 1.0).unwrap();
            assert!(v < prev, "psnr not decreasing at err {}", err);
            prev = v;
        }
    }

    #[test]
    fn psnr_rejects_shape_mismatch() {
        let a = Image::new(8, 8);
        let b = Image::new(8, 9);
        assert!(psnr(&a, &b, 1.0).is_err());
    }

    #[test]
    fn ssim_identity_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = image_of(16, 16, |_, _| {
            [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]
        });
        let v = ssim(&img, &img).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "ssim(x,x) = {}", v);
    }

    #[test]
    fn ssim_of_inverted_checkerboard_is_negative() {
        let a = image_of(16, 16, |x, y| {
            let v = ((x + y) % 2) as f32;
            [v, v, v]
        });
        let b = image_of(16, 16, |x, y| {
            let v = 1.0 - ((x + y) % 2) as f32;
            [v, v, v]
        });
        let v = ssim(&a, &b).unwrap();
        assert!(v < 0.0, "got {}", v);
    }

    #[test]
    fn ssim_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = image_of(16, 16, |_, _| {
            [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]
        });
        let b = image_of(16, 16, |_, _| {
            [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]
        });
        let xy = ssim(&a, &b).unwrap();
        let yx = ssim(&b, &a).unwrap();
        assert!((xy - yx).abs() < 1e-9);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = Image::new(10, 16);
        assert!(matches!(ssim(&a, &a), Err(MetricError::ImageTooSmall(11, 10, 16))));
    }

    #[test]
    fn chamfer_identity_and_singletons() {
        let pts: Vec<[f64; 3]> = vec![[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [-1.0, 0.5, 0.2]];
        assert_eq!(chamfer(&pts, &pts).unwrap(), 0.0);
        let p = vec![[0.0, 0.0, 0.0]];
        let q = vec![[0.5, 0.0, 0.0]];
        assert!((chamfer(&p, &q).unwrap() - 0.5).abs() < 1e-15);
        assert!(chamfer(&[], &q).is_err());
    }

    #[test]
    fn chamfer_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut random_set = |n: usize| -> Vec<[f64; 3]> {
            (0..n)
                .map(|_| {
                    [
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ]
                })
                .collect()
        };
        for _ in 0..5 {
            let p = random_set(200);
            let q = random_set(200);
            let fast = chamfer(&p, &q).unwrap();
            // independent O(n^2) evaluation
            let near = |from: &[[f64; 3]], to: &[[f64; 3]]| -> f64 {
                from.iter()
                    .map(|a| {
                        to.iter()
                            .map(|b| {
                                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2))
                                    .sqrt()
                            })
                            .fold(f64::INFINITY, f64::min)
                    })
                    .sum::<f64>()
                    / from.len() as f64
            };
            let brute = 0.5 * (near(&p, &q) + near(&q, &p));
            assert!((fast - brute).abs() < 1e-9, "{} vs {}", fast, brute);
            let swapped = chamfer(&q, &p).unwrap();
            assert!((fast - swapped).abs() < 1e-12, "not symmetric");
        }
    }

    #[test]
    fn volume_iou_cases() {
        use crate::scenes::{voxelize, Primitive, PrimitiveKind, SceneSpec};
        let cube = |center: [f64; 3]| SceneSpec {
            seed: 0,
            primitives: vec![Primitive {
                center,
                kind: PrimitiveKind::Box { half_extents: [0.5, 0.5, 0.5] },
                albedo: [0.5, 0.5, 0.5],
            }],
        };
        let a = voxelize(&cube([0.0, 0.0, 0.0]), 64);
        assert_eq!(volume_iou(&a, &a).unwrap(), VolumeIou { value: 1.0, both_empty: false });

        // unit cubes offset by half an edge: overlap 0.5, union 1.5 -> 1/3
        let b = voxelize(&cube([0.5, 0.0, 0.0]), 64);
        let iou = volume_iou(&a, &b).unwrap();
        assert!((iou.value - 1.0 / 3.0).abs() < 0.02 / 3.0, "IoU {}", iou.value);

        let empty = VoxelGrid::empty(64);
        assert_eq!(volume_iou(&a, &empty).unwrap().value, 0.0);
        let both = volume_iou(&empty, &empty).unwrap();
        assert!(both.both_empty && both.value == 1.0);

        assert!(volume_iou(&a, &VoxelGrid::empty(32)).is_err());
    }

    #[test]
    fn volume_iou_monotone_under_shared_voxels() {
        let mut a = VoxelGrid::empty(8);
        let mut b = VoxelGrid::empty(8);
        a.set(1, 1, 1, true);
        b.set(1, 1, 1, true);
        b.set(2, 2, 2, true);
        let before = volume_iou(&a, &b).unwrap().value;
        // add a shared voxel to both
        a.set(3, 3, 3, true);
        b.set(3, 3, 3, true);
        let after = volume_iou(&a, &b).unwrap().value;
        assert!(after > before);
    }

    #[test]
    fn report_aggregates_are_means_and_lpips_is_null() {
        let config = MetricConfigEcho { ssim_window: 11, ssim_sigma: 1.5, chamfer_samples: 4096 };
        let items = vec![
            MetricItem {
                id: "a".into(),
                values: MetricValues {
                    psnr: Some(20.0),
                    ssim: Some(0.8),
                    lpips: None,
                    chamfer: Some(0.1),
                    volume_iou: Some(0.5),
                },
            },
            MetricItem {
                id: "b".into(),
                values: MetricValues {
                    psnr: Some(30.0),
                    ssim: Some(0.9),
                    lpips: None,
                    chamfer: Some(0.3),
                    volume_iou: Some(0.7),
                },
            },
        ];
        let report = MetricReport::from_items(config, items);
        let close = |a: Option<f64>, b: f64| (a.unwrap() - b).abs() < 1e-12;
        assert!(close(report.aggregate.psnr, 25.0));
        assert!(close(report.aggregate.ssim, 0.85));
        assert!(close(report.aggregate.chamfer, 0.2));
        assert!(close(report.aggregate.volume_iou, 0.6));
        let json = serde_json::to_value(&report).unwrap();
        assert!(json["aggregate"]["lpips"].is_null());
        assert!(json["items"][0]["values"]["lpips"].is_null());
    }
}
