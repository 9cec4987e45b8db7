//! Nearest-hit ray caster with Lambertian shading.
//!
//! One fixed directional light plus 0.3 ambient; misses fall through to
//! the solid background. Deterministic: only pixel-center rays, no
//! stochastic sampling.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::camera::{ray_for_pixel, CameraMeta, CameraPose, Intrinsics, Ray};
use crate::img::Image;

use super::{Primitive, PrimitiveKind, RenderedView, SceneSpec, BACKGROUND};

/// Fixed light direction (from surface toward the light).
fn light_dir() -> Vector3<f64> {
    Vector3::new(0.4, -0.6, 0.9).normalize()
}

const AMBIENT: f64 = 0.3;

struct Hit {
    t: f64,
    normal: Vector3<f64>,
    albedo: [f64; 3],
}

// Entry-face hits only: the orbit cameras always sit outside the unit
// cube, so rays never start inside a primitive.
fn intersect_sphere(ray: &Ray, center: &Vector3<f64>, radius: f64) -> Option<(f64, Vector3<f64>)> {
    let oc = ray.origin - center;
    let b = oc.dot(&ray.direction);
    let c = oc.dot(&oc) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    if t <= 1e-9 {
        return None;
    }
    let normal = (ray.point_at(t) - center).normalize();
    Some((t, normal))
}

fn intersect_box(
    ray: &Ray,
    center: &Vector3<f64>,
    half: &[f64; 3],
) -> Option<(f64, Vector3<f64>)> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut near_axis = 0usize;
    let mut near_sign = 1.0f64;
    for a in 0..3 {
        let o = ray.origin[a] - center[a];
        let d = ray.direction[a];
        if d.abs() < 1e-12 {
            if o.abs() > half[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let mut t0 = (-half[a] - o) * inv;
        let mut t1 = (half[a] - o) * inv;
        let mut sign = -1.0;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
            sign = 1.0;
        }
        if t0 > t_near {
            t_near = t0;
            near_axis = a;
            near_sign = sign;
        }
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    if t_near <= 1e-9 {
        return None;
    }
    let mut normal = Vector3::zeros();
    normal[near_axis] = near_sign;
    Some((t_near, normal))
}

fn trace(ray: &Ray, primitives: &[Primitive]) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for prim in primitives {
        let center = Vector3::new(prim.center[0], prim.center[1], prim.center[2]);
        let hit = match prim.kind {
            PrimitiveKind::Sphere { radius } => intersect_sphere(ray, &center, radius),
            PrimitiveKind::Box { half_extents } => intersect_box(ray, &center, &half_extents),
        };
        if let Some((t, normal)) = hit {
            if best.as_ref().map_or(true, |b| t < b.t) {
                best = Some(Hit { t, normal, albedo: prim.albedo });
            }
        }
    }
    best
}

fn shade(hit: &Hit) -> [f32; 3] {
    let diffuse = hit.normal.dot(&light_dir()).max(0.0);
    let factor = AMBIENT + (1.0 - AMBIENT) * diffuse;
    [
        (hit.albedo[0] * factor).clamp(0.0, 1.0) as f32,
        (hit.albedo[1] * factor).clamp(0.0, 1.0) as f32,
        (hit.albedo[2] * factor).clamp(0.0, 1.0) as f32,
    ]
}

/// Render with explicit pose and intrinsics. Pixels are sampled at their
/// centers; rows render in parallel with per-pixel independence, so the
/// result is identical at any thread count.
pub fn render_image(spec: &SceneSpec, pose: &CameraPose, intr: &Intrinsics) -> Image {
    let mut img = Image::new(intr.width, intr.height);
    let width = intr.width;
    img.pixels
        .par_chunks_mut(width * 3)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..width {
                let pixel = [x as f64 + 0.5, y as f64 + 0.5];
                let ray = ray_for_pixel(pixel, pose, intr).expect("pixel center in bounds");
                let rgb = match trace(&ray, &spec.primitives) {
                    Some(hit) => shade(&hit),
                    None => BACKGROUND,
                };
                row[x * 3..x * 3 + 3].copy_from_slice(&rgb);
            }
        });
    img
}

/// Render a view whose metadata is taken from (and guaranteed to match)
/// the camera that produced it.
pub fn render_view(spec: &SceneSpec, camera: &CameraMeta) -> RenderedView {
    let pose = camera.pose().expect("valid camera meta");
    let intr = camera.intrinsics().expect("valid camera meta");
    RenderedView { image: render_image(spec, &pose, &intr), camera: *camera, background: BACKGROUND }
}

/// Render at `factor` times the resolution and box-downsample. Used to
/// bound the aliasing error of the direct render.
pub fn render_view_supersampled(spec: &SceneSpec, camera: &CameraMeta, factor: usize) -> Image {
    let intr = camera.intrinsics().expect("valid camera meta");
    let hi = intr.scaled_to(intr.width * factor, intr.height * factor);
    let pose = camera.pose().expect("valid camera meta");
    render_image(spec, &pose, &hi).downsample_box(factor)
}
