//! Iso-surface extraction from an occupancy grid.
//!
//! The binary occupancy is box-filtered (3x3x3 mean, zero outside the
//! grid) to a smooth scalar field sampled at cell centers plus one
//! padding ring, then the 0.5 level set is triangulated with the classic
//! marching-cubes tables. The padding ring guarantees closed surfaces at
//! the grid boundary; vertices are clamped into the [-1, 1] extent.

use super::tables::{EDGE_CORNERS, EDGE_TABLE, TRI_TABLE};
use super::{Mesh, ReconError, VoxelGrid};

const ISO: f64 = 0.5;

/// Box-filtered occupancy at lattice index (cell index + 1 per axis).
fn filtered_field(grid: &VoxelGrid) -> (Vec<f64>, usize) {
    let res = grid.resolution();
    let lat = res + 2;
    let mut field = vec![0.0f64; lat * lat * lat];
    let idx = |x: usize, y: usize, z: usize| x + lat * (y + lat * z);
    for lz in 0..lat {
        for ly in 0..lat {
            for lx in 0..lat {
                let (cx, cy, cz) = (lx as isize - 1, ly as isize - 1, lz as isize - 1);
                let mut sum = 0.0;
                for dz in -1..=1isize {
                    for dy in -1..=1isize {
                        for dx in -1..=1isize {
                            let (x, y, z) = (cx + dx, cy + dy, cz + dz);
                            if x >= 0
                                && x < res as isize
                                && y >= 0
                                && y < res as isize
                                && z >= 0
                                && z < res as isize
                                && grid.get(x as usize, y as usize, z as usize)
                            {
                                sum += 1.0;
                            }
                        }
                    }
                }
                field[idx(lx, ly, lz)] = sum / 27.0;
            }
        }
    }
    (field, lat)
}

/// World position of a lattice point (cell center, extended one ring
/// beyond the grid).
fn lattice_pos(l: usize, res: usize) -> f64 {
    let step = 2.0 / res as f64;
    -1.0 + ((l as f64 - 1.0) + 0.5) * step
}

/// Extract the 0.5-level surface of the box-filtered occupancy.
/// An empty grid yields an empty mesh rather than an error.
pub fn marching_cubes(grid: &VoxelGrid) -> Result<Mesh, ReconError> {
    let res = grid.resolution();
    if res < 8 {
        return Err(ReconError::ResolutionTooSmall(res));
    }
    let mut mesh = Mesh::default();
    if grid.count_occupied() == 0 {
        return Ok(mesh);
    }
    let (field, lat) = filtered_field(grid);
    let fidx = |x: usize, y: usize, z: usize| x + lat * (y + lat * z);

    // Deduplicate vertices per lattice edge so shared edges share indices
    // and the surface is watertight.
    let mut edge_vertex: std::collections::HashMap<(usize, usize), u32> =
        std::collections::HashMap::new();

    let corner_offsets: [[usize; 3]; 8] = [
        [0, 0, 0],
        [1, 0, 0],
        [1, 1, 0],
        [0, 1, 0],
        [0, 0, 1],
        [1, 0, 1],
        [1, 1, 1],
        [0, 1, 1],
    ];

    for z in 0..lat - 1 {
        for y in 0..lat - 1 {
            for x in 0..lat - 1 {
                let mut values = [0.0f64; 8];
                let mut ids = [0usize; 8];
                for (c, off) in corner_offsets.iter().enumerate() {
                    let (cx, cy, cz) = (x + off[0], y + off[1], z + off[2]);
                    ids[c] = fidx(cx, cy, cz);
                    values[c] = field[ids[c]];
                }
                let mut case = 0usize;
                for (c, v) in values.iter().enumerate() {
                    if *v < ISO {
                        case |= 1 << c;
                    }
                }
                if EDGE_TABLE[case] == 0 {
                    continue;
                }
                let mut cube_edge_vertex = [u32::MAX; 12];
                for (e, corners) in EDGE_CORNERS.iter().enumerate() {
                    if EDGE_TABLE[case] & (1 << e) == 0 {
                        continue;
                    }
                    let (a, b) = (corners[0], corners[1]);
                    let key = if ids[a] < ids[b] { (ids[a], ids[b]) } else { (ids[b], ids[a]) };
                    let vid = *edge_vertex.entry(key).or_insert_with(|| {
                        let (va, vb) = (values[a], values[b]);
                        let t = if (vb - va).abs() < 1e-12 { 0.5 } else { (ISO - va) / (vb - va) };
                        let pa = [
                            lattice_pos(x + corner_offsets[a][0], res),
                            lattice_pos(y + corner_offsets[a][1], res),
                            lattice_pos(z + corner_offsets[a][2], res),
                        ];
                        let pb = [
                            lattice_pos(x + corner_offsets[b][0], res),
                            lattice_pos(y + corner_offsets[b][1], res),
                            lattice_pos(z + corner_offsets[b][2], res),
                        ];
                        let v = [
                            (pa[0] + t * (pb[0] - pa[0])).clamp(-1.0, 1.0),
                            (pa[1] + t * (pb[1] - pa[1])).clamp(-1.0, 1.0),
                            (pa[2] + t * (pb[2] - pa[2])).clamp(-1.0, 1.0),
                        ];
                        mesh.vertices.push(v);
                        (mesh.vertices.len() - 1) as u32
                    });
                    cube_edge_vertex[e] = vid;
                }
                let tri_row = &TRI_TABLE[case];
                let mut k = 0;
                while tri_row[k] >= 0 {
                    let tri = [
                        cube_edge_vertex[tri_row[k] as usize],
                        cube_edge_vertex[tri_row[k + 1] as usize],
                        cube_edge_vertex[tri_row[k + 2] as usize],
                    ];
                    // skip degenerate (zero-area) triangles from crossings
                    // that landed on lattice corners
                    if mesh.triangle_area(&tri) > 1e-14 {
                        mesh.triangles.push(tri);
                    }
                    k += 3;
                }
            }
        }
    }
    Ok(mesh)
}
