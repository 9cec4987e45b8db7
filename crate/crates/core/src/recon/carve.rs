use nalgebra::Vector3;
use rayon::prelude::*;

use crate::camera::{project, CameraPose, Intrinsics};

use super::mask::Mask;
use super::{ReconError, VoxelGrid};

/// A silhouette observation used for carving.
pub struct CarveView {
    pub mask: Mask,
    pub pose: CameraPose,
    pub intr: Intrinsics,
}

/// Space carving: a voxel survives iff its center projects into the
/// foreground in every view where it lands in front of the camera and
/// inside the image. Projections outside the image impose no constraint,
/// which keeps the visual hull a superset for partially clipped views.
///
/// Masks are dilated by one pixel before lookup: a voxel center strictly
/// inside the object can project into a boundary pixel whose center ray
/// misses, and carving on the raw mask would then violate the superset
/// property. One pixel absorbs that discretization.
pub fn space_carve(views: &[CarveView], resolution: usize) -> Result<VoxelGrid, ReconError> {
    if views.len() < 2 {
        return Err(ReconError::TooFewViews(views.len()));
    }
    let dilated: Vec<Mask> = views.iter().map(|v| dilate(&v.mask)).collect();
    let probe = VoxelGrid::empty(resolution);
    let n = probe.num_cells();
    let occupied: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = i % resolution;
            let y = (i / resolution) % resolution;
            let z = i / (resolution * resolution);
            let c = probe.cell_center(x, y, z);
            let point = Vector3::new(c[0], c[1], c[2]);
            for (view, mask) in views.iter().zip(&dilated) {
                let Ok(pix) = project(&point, &view.pose, &view.intr) else {
                    continue; // behind the camera: no constraint
                };
                let (px, py) = (pix[0].floor(), pix[1].floor());
                if px < 0.0
                    || py < 0.0
                    || px >= view.intr.width as f64
                    || py >= view.intr.height as f64
                {
                    continue; // outside the image: no constraint
                }
                if !mask.get(px as usize, py as usize) {
                    return false;
                }
            }
            true
        })
        .collect();
    let mut grid = VoxelGrid::empty(resolution);
    for (i, occ) in occupied.iter().enumerate() {
        if *occ {
            let x = i % resolution;
            let y = (i / resolution) % resolution;
            let z = i / (resolution * resolution);
            grid.set(x, y, z, true);
        }
    }
    Ok(grid)
}

fn dilate(mask: &Mask) -> Mask {
    let (w, h) = (mask.width, mask.height);
    let mut bits = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                        bits[ny as usize * w + nx as usize] = true;
                    }
                }
            }
        }
    }
    Mask { width: w, height: h, bits }
}
