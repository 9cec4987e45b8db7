use rand::Rng;

use crate::rng::seeded_rng;

use super::{Mesh, ReconError};

/// Area-weighted uniform surface samples, deterministic per seed.
/// Triangles are selected by binary search on the cumulative area table;
/// positions use the standard reflected-barycentric construction.
pub fn sample_surface(mesh: &Mesh, n: usize, seed: u64) -> Result<Vec<[f64; 3]>, ReconError> {
    if mesh.is_empty() {
        return Err(ReconError::EmptyMesh);
    }
    if n == 0 {
        return Err(ReconError::ZeroSamples);
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0f64;
    for t in &mesh.triangles {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    let mut rng = seeded_rng(seed, "surface-samples");
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.random_range(0.0..total);
        let ti = cumulative.partition_point(|&c| c <= target).min(mesh.triangles.len() - 1);
        let tri = mesh.triangles[ti];
        let a = mesh.vertices[tri[0] as usize];
        let b = mesh.vertices[tri[1] as usize];
        let c = mesh.vertices[tri[2] as usize];
        let mut u: f64 = rng.random_range(0.0..1.0);
        let mut v: f64 = rng.random_range(0.0..1.0);
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        out.push([
            a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]),
            a[1] + u * (b[1] - a[1]) + v * (c[1] - a[1]),
            a[2] + u * (b[2] - a[2]) + v * (c[2] - a[2]),
        ]);
    }
    Ok(out)
}

/// ASCII OBJ export: v and f records only.
pub fn export_obj<W: std::io::Write>(mesh: &Mesh, w: &mut W) -> Result<(), ReconError> {
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}
