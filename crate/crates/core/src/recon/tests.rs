use super::*;
use crate::camera::{CameraMeta, Intrinsics};
use crate::scenes::{
    generate_scene, render_view, sample_recon_rig, voxelize, Primitive, PrimitiveKind, SceneSpec,
    BACKGROUND,
};

fn sphere_spec(radius: f64) -> SceneSpec {
    SceneSpec {
        seed: 0,
        primitives: vec![Primitive {
            center: [0.0, 0.0, 0.0],
            kind: PrimitiveKind::Sphere { radius },
            albedo: [0.85, 0.6, 0.1],
        }],
    }
}

fn grid_iou(a: &VoxelGrid, b: &VoxelGrid) -> f64 {
    assert_eq!(a.resolution(), b.resolution());
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
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn ground_truth_carve_views(spec: &SceneSpec, image_size: usize) -> Vec<CarveView> {
    let intr = Intrinsics::square(image_size);
    sample_recon_rig(16)
        .into_iter()
        .map(|(az, el)| {
            let meta = CameraMeta::new(az, el, 2.7, &intr);
            let view = render_view(spec, &meta);
            CarveView {
                mask: foreground_mask(&view, BACKGROUND, 0.05),
                pose: meta.pose().unwrap(),
                intr,
            }
        })
        .collect()
}

// ── foreground_mask ─────────────────────────────────────────────────

#[test]
fn mask_of_background_image_is_empty() {
    let spec = SceneSpec { seed: 0, primitives: vec![] };
    let intr = Intrinsics::square(16);
    let meta = CameraMeta::new(0.0, 10.0, 2.7, &intr);
    let view = render_view(&spec, &meta);
    let mask = foreground_mask(&view, BACKGROUND, 0.05);
    assert_eq!(mask.count(), 0);
}

#[test]
fn mask_area_matches_analytic_disc() {
    let spec = sphere_spec(0.5);
    let intr = Intrinsics::square(64);
    let meta = CameraMeta::new(0.0, 0.0, 2.5, &intr);
    let view = render_view(&spec, &meta);
    let mask = foreground_mask(&view, BACKGROUND, 0.05);
    let disc_radius = intr.fx * 0.5 / (2.5f64 * 2.5 - 0.25).sqrt();
    let analytic_area = std::f64::consts::PI * disc_radius * disc_radius;
    let rel = (mask.count() as f64 - analytic_area).abs() / analytic_area;
    assert!(rel < 0.02, "mask area {} vs analytic {}", mask.count(), analytic_area);
}

#[test]
fn zero_tolerance_marks_any_deviation() {
    let spec = SceneSpec { seed: 0, primitives: vec![] };
    let intr = Intrinsics::square(8);
    let meta = CameraMeta::new(0.0, 10.0, 2.7, &intr);
    let mut view = render_view(&spec, &meta);
    view.image.set(3, 4, [0.5 + 1.0 / 255.0, 0.5, 0.5]);
    let mask = foreground_mask(&view, BACKGROUND, 0.0);
    assert_eq!(mask.count(), 1);
    assert!(mask.get(3, 4));
}

// ── space_carve ─────────────────────────────────────────────────────

#[test]
fn carve_recovers_sphere_volume() {
    let spec = sphere_spec(0.5);
    let views = ground_truth_carve_views(&spec, 128);
    let carved = space_carve(&views, 64).unwrap();
    let truth = voxelize(&spec, 64);
    let iou = grid_iou(&carved, &truth);
    assert!(iou > 0.8, "IoU {}", iou);
}

#[test]
fn carve_with_all_foreground_masks_keeps_everything() {
    let intr = Intrinsics::square(16);
    let views: Vec<CarveView> = [(0.0, 10.0), (90.0, 20.0)]
        .into_iter()
        .map(|(az, el)| CarveView {
            mask: Mask::filled(16, 16, true),
            pose: CameraMeta::new(az, el, 2.7, &intr).pose().unwrap(),
            intr,
        })
        .collect();
    let carved = space_carve(&views, 16).unwrap();
    assert_eq!(carved.count_occupied(), 16 * 16 * 16);
}

#[test]
fn carve_requires_two_views() {
    let intr = Intrinsics::square(16);
    let views = vec![CarveView {
        mask: Mask::filled(16, 16, true),
        pose: CameraMeta::new(0.0, 10.0, 2.7, &intr).pose().unwrap(),
        intr,
    }];
    assert!(matches!(space_carve(&views, 16), Err(ReconError::TooFewViews(1))));
}

#[test]
fn adding_views_never_adds_voxels() {
    let spec = generate_scene(3, 2);
    let views = ground_truth_carve_views(&spec, 32);
    let carved_few = space_carve(&views[..4], 32).unwrap();
    let carved_all = space_carve(&views, 32).unwrap();
    let res = 32;
    for z in 0..res {
        for y in 0..res {
            for x in 0..res {
                if carved_all.get(x, y, z) {
                    assert!(carved_few.get(x, y, z), "carving grew at ({x},{y},{z})");
                }
            }
        }
    }
}

#[test]
fn visual_hull_contains_true_occupancy() {
    for seed in [1u64, 8, 21] {
        let spec = generate_scene(seed, 2);
        let views = ground_truth_carve_views(&spec, 64);
        let carved = space_carve(&views, 48).unwrap();
        let truth = voxelize(&spec, 48);
        let res = 48;
        for z in 0..res {
            for y in 0..res {
                for x in 0..res {
                    if truth.get(x, y, z) {
                        assert!(
                            carved.get(x, y, z),
                            "seed {}: carved away a true voxel at ({x},{y},{z})",
                            seed
                        );
                    }
                }
            }
        }
    }
}

// ── marching_cubes ──────────────────────────────────────────────────

#[test]
fn sphere_mesh_area_matches_analytic() {
    let grid = voxelize(&sphere_spec(0.5), 64);
    let mesh = marching_cubes(&grid).unwrap();
    assert!(!mesh.is_empty());
    let area = mesh.surface_area();
    let analytic = 4.0 * std::f64::consts::PI * 0.25;
    let rel = (area - analytic).abs() / analytic;
    assert!(rel < 0.05, "area {} vs analytic {} (rel {})", area, analytic, rel);
}

#[test]
fn sphere_mesh_is_watertight() {
    let grid = voxelize(&sphere_spec(0.4), 32);
    let mesh = marching_cubes(&grid).unwrap();
    let mut edge_count: std::collections::HashMap<(u32, u32), usize> =
        std::collections::HashMap::new();
    for t in &mesh.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            let key = if a < b { (a, b) } else { (b, a) };
            *edge_count.entry(key).or_insert(0) += 1;
        }
    }
    for (edge, count) in &edge_count {
        assert_eq!(*count, 2, "edge {:?} shared by {} triangles", edge, count);
    }
}

#[test]
fn full_grid_meshes_to_extent_cube() {
    let grid = VoxelGrid::full(32);
    let mesh = marching_cubes(&grid).unwrap();
    assert!(!mesh.is_empty());
    // surface should approximate the cube boundary: area near 24, and
    // all vertices within the extent but near its faces
    let area = mesh.surface_area();
    assert!((area - 24.0).abs() / 24.0 < 0.15, "area {}", area);
    for v in &mesh.vertices {
        let maxc = v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        assert!(maxc <= 1.0 + 1e-12, "vertex {:?} outside extent", v);
        assert!(maxc > 1.0 - 3.0 * (2.0 / 32.0), "vertex {:?} far from boundary", v);
    }
}

#[test]
fn empty_grid_meshes_to_empty() {
    let grid = VoxelGrid::empty(16);
    let mesh = marching_cubes(&grid).unwrap();
    assert!(mesh.is_empty());
}

#[test]
fn marching_cubes_rejects_tiny_grids() {
    assert!(matches!(
        marching_cubes(&VoxelGrid::empty(4)),
        Err(ReconError::ResolutionTooSmall(4))
    ));
}

#[test]
fn mesh_revoxelization_reproduces_convex_grid() {
    // mesh -> point-in-mesh parity test at cell centers -> IoU vs grid
    let grid = voxelize(&sphere_spec(0.5), 32);
    let mesh = marching_cubes(&grid).unwrap();
    let res = 32;
    let mut regrid = VoxelGrid::empty(res);
    for z in 0..res {
        for y in 0..res {
            for x in 0..res {
                // jitter the parity ray so it cannot thread exactly through
                // lattice-aligned mesh vertices and edges
                let c = regrid.cell_center(x, y, z);
                let jittered = [c[0], c[1] + 1.23e-4, c[2] + 2.71e-4];
                if point_in_mesh(&mesh, jittered) {
                    regrid.set(x, y, z, true);
                }
            }
        }
    }
    let iou = grid_iou(&regrid, &grid);
    assert!(iou > 0.9, "re-voxelized IoU {}", iou);
}

/// Parity test: count triangle crossings of the +x ray.
fn point_in_mesh(mesh: &Mesh, p: [f64; 3]) -> bool {
    let mut crossings = 0;
    for t in &mesh.triangles {
        let a = mesh.vertices[t[0] as usize];
        let b = mesh.vertices[t[1] as usize];
        let c = mesh.vertices[t[2] as usize];
        if let Some(tt) = ray_x_triangle(p, a, b, c) {
            if tt > 0.0 {
                crossings += 1;
            }
        }
    }
    crossings % 2 == 1
}

/// Moeller-Trumbore specialised to direction (1, 0, 0).
fn ray_x_triangle(o: [f64; 3], a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Option<f64> {
    let e1 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let e2 = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    // h = dir x e2 with dir = (1,0,0): (0, -e2[2], e2[1])
    let h = [0.0, -e2[2], e2[1]];
    let det = e1[0] * h[0] + e1[1] * h[1] + e1[2] * h[2];
    if det.abs() < 1e-12 {
        return None;
    }
    let inv = 1.0 / det;
    let s = [o[0] - a[0], o[1] - a[1], o[2] - a[2]];
    let u = (s[0] * h[0] + s[1] * h[1] + s[2] * h[2]) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = [s[1] * e1[2] - s[2] * e1[1], s[2] * e1[0] - s[0] * e1[2], s[0] * e1[1] - s[1] * e1[0]];
    let v = q[0] * inv; // dir . q with dir = (1,0,0)
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = (e2[0] * q[0] + e2[1] * q[1] + e2[2] * q[2]) * inv;
    Some(t)
}

// ── sample_surface ──────────────────────────────────────────────────

#[test]
fn surface_samples_lie_on_triangle_planes() {
    let grid = voxelize(&sphere_spec(0.4), 16);
    let mesh = marching_cubes(&grid).unwrap();
    let samples = sample_surface(&mesh, 500, 9).unwrap();
    for p in &samples {
        // nearest triangle plane distance must be ~0
        let mut best = f64::INFINITY;
        for t in &mesh.triangles {
            let a = mesh.vertices[t[0] as usize];
            let b = mesh.vertices[t[1] as usize];
            let c = mesh.vertices[t[2] as usize];
            let e1 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let e2 = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            let n = [
                e1[1] * e2[2] - e1[2] * e2[1],
                e1[2] * e2[0] - e1[0] * e2[2],
                e1[0] * e2[1] - e1[1] * e2[0],
            ];
            let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if norm < 1e-12 {
                continue;
            }
            let d = ((p[0] - a[0]) * n[0] + (p[1] - a[1]) * n[1] + (p[2] - a[2]) * n[2]).abs() / norm;
            best = best.min(d);
        }
        assert!(best < 1e-9, "sample {:?} off-plane by {}", p, best);
    }
}

#[test]
fn surface_sample_counts_proportional_to_area() {
    // two disjoint triangles with area ratio 4:1
    let mesh = Mesh {
        vertices: vec![
            [0.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [5.0, 0.0, 0.0],
            [6.0, 0.0, 0.0],
            [5.0, 1.0, 0.0],
        ],
        triangles: vec![[0, 1, 2], [3, 4, 5]],
    };
    let n = 100_000usize;
    let samples = sample_surface(&mesh, n, 3).unwrap();
    let in_big = samples.iter().filter(|p| p[0] < 4.0).count();
    let expected = [n as f64 * 0.8, n as f64 * 0.2];
    let observed = [in_big as f64, (n - in_big) as f64];
    // chi-square with 1 dof; 10.83 is the 0.1% critical value
    let chi2: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    assert!(chi2 < 10.83, "chi-square {} (observed {:?})", chi2, observed);
}

#[test]
fn surface_sampling_is_deterministic_and_validates() {
    let grid = voxelize(&sphere_spec(0.4), 16);
    let mesh = marching_cubes(&grid).unwrap();
    let a = sample_surface(&mesh, 64, 5).unwrap();
    let b = sample_surface(&mesh, 64, 5).unwrap();
    assert_eq!(a, b);
    assert!(sample_surface(&Mesh::default(), 10, 0).is_err());
    assert!(sample_surface(&mesh, 0, 0).is_err());
}

// ── formats ─────────────────────────────────────────────────────────

#[test]
fn occupancy_file_roundtrip_is_bit_exact() {
    let grid = voxelize(&generate_scene(5, 2), 16);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("occ.bin");
    grid.save(&path).unwrap();
    let back = VoxelGrid::load(&path).unwrap();
    assert_eq!(grid, back);
    let path2 = dir.path().join("occ2.bin");
    back.save(&path2).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}

#[test]
fn obj_export_writes_v_and_f_records() {
    let mesh = Mesh {
        vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        triangles: vec![[0, 1, 2]],
    };
    let mut buf = Vec::new();
    export_obj(&mesh, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
}
