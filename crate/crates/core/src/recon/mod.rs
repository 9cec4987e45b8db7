//! 3D reconstruction from views: foreground masking, space carving,
//! marching-cubes mesh extraction, and surface sampling.

mod carve;
mod marching;
mod mask;
mod sample;
mod tables;

pub use carve::{space_carve, CarveView};
pub use marching::marching_cubes;
pub use mask::{foreground_mask, Mask};
pub use sample::{export_obj, sample_surface};

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("space carving needs at least 2 views, got {0}")]
    TooFewViews(usize),
    #[error("voxel grids have different resolutions: {0} vs {1}")]
    ResolutionMismatch(usize, usize),
    #[error("resolution must be at least 8, got {0}")]
    ResolutionTooSmall(usize),
    #[error("mesh is empty")]
    EmptyMesh,
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("occupancy file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub const OCCUPANCY_MAGIC: [u8; 4] = *b"MVOX";

/// Bit-packed occupancy over [-1, 1]^3 sampled at cell centers,
/// x-fastest ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    resolution: usize,
    bits: Vec<u8>,
}

impl VoxelGrid {
    pub fn empty(resolution: usize) -> VoxelGrid {
        let n = resolution * resolution * resolution;
        VoxelGrid { resolution, bits: vec![0u8; n.div_ceil(8)] }
    }

    pub fn full(resolution: usize) -> VoxelGrid {
        let n = resolution * resolution * resolution;
        let mut bits = vec![0xFFu8; n.div_ceil(8)];
        // clear padding bits past the end
        let tail = n % 8;
        if tail != 0 {
            *bits.last_mut().unwrap() = (1u8 << tail) - 1;
        }
        VoxelGrid { resolution, bits }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn num_cells(&self) -> usize {
        self.resolution * self.resolution * self.resolution
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.resolution * (y + self.resolution * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        let i = self.index(x, y, z);
        (self.bits[i / 8] >> (i % 8)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.index(x, y, z);
        if value {
            self.bits[i / 8] |= 1 << (i % 8);
        } else {
            self.bits[i / 8] &= !(1 << (i % 8));
        }
    }

    /// World position of the cell center.
    pub fn cell_center(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        let step = 2.0 / self.resolution as f64;
        [
            -1.0 + (x as f64 + 0.5) * step,
            -1.0 + (y as f64 + 0.5) * step,
            -1.0 + (z as f64 + 0.5) * step,
        ]
    }

    pub fn count_occupied(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.count_occupied() as f64 / self.num_cells() as f64
    }

    /// Serialize: magic "MVOX", u32 LE resolution, bit-packed occupancy.
    pub fn write<W: Write>(&self, w: &mut W) -> Result<(), ReconError> {
        w.write_all(&OCCUPANCY_MAGIC)?;
        w.write_all(&(self.resolution as u32).to_le_bytes())?;
        w.write_all(&self.bits)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ReconError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut f)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<VoxelGrid, ReconError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != OCCUPANCY_MAGIC {
            return Err(ReconError::Format(format!("bad magic {:?}", magic)));
        }
        let mut u32b = [0u8; 4];
        r.read_exact(&mut u32b)?;
        let resolution = u32::from_le_bytes(u32b) as usize;
        let n = resolution * resolution * resolution;
        let mut bits = vec![0u8; n.div_ceil(8)];
        r.read_exact(&mut bits)?;
        Ok(VoxelGrid { resolution, bits })
    }

    pub fn load(path: &Path) -> Result<VoxelGrid, ReconError> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        VoxelGrid::read(&mut f)
    }
}

/// Triangle mesh with indexed vertices.
#[derive(Debug, Clone, Default)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_area(&self, t: &[u32; 3]) -> f64 {
        let a = self.vertices[t[0] as usize];
        let b = self.vertices[t[1] as usize];
        let c = self.vertices[t[2] as usize];
        let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let ac = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let cx = ab[1] * ac[2] - ab[2] * ac[1];
        let cy = ab[2] * ac[0] - ab[0] * ac[2];
        let cz = ab[0] * ac[1] - ab[1] * ac[0];
        0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
    }

    pub fn surface_area(&self) -> f64 {
        self.triangles.iter().map(|t| self.triangle_area(t)).sum()
    }
}

#[cfg(test)]
mod tests;
