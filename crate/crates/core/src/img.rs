//! RGB image buffer shared by the renderer, metrics, and reconstruction.

use std::io::{Read, Write};
use thiserror::Error;

use crate::diffcore::{sc, Scalar, Tensor};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("ppm: {0}")]
    Format(String),
}

/// Row-major H x W x 3 image with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Image {
        Image { width, height, pixels: vec![0.0; width * height * 3] }
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Image {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        Image { width, height, pixels }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn mean_abs_diff(&self, other: &Image) -> f32 {
        assert_eq!(self.pixels.len(), other.pixels.len());
        let sum: f32 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b).abs())
            .sum();
        sum / self.pixels.len() as f32
    }

    /// Box-downsample by an integer factor (both dimensions must divide).
    pub fn downsample_box(&self, factor: usize) -> Image {
        assert!(factor >= 1 && self.width % factor == 0 && self.height % factor == 0);
        let (w, h) = (self.width / factor, self.height / factor);
        let mut out = Image::new(w, h);
        let inv = 1.0 / (factor * factor) as f32;
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0f32; 3];
                for dy in 0..factor {
                    for dx in 0..factor {
                        let p = self.get(x * factor + dx, y * factor + dy);
                        acc[0] += p[0];
                        acc[1] += p[1];
                        acc[2] += p[2];
                    }
                }
                out.set(x, y, [acc[0] * inv, acc[1] * inv, acc[2] * inv]);
            }
        }
        out
    }

    /// Encode as binary PPM (P6, maxval 255).
    pub fn write_ppm<W: Write>(&self, w: &mut W) -> Result<(), ImageError> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .pixels
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn save_ppm(&self, path: &std::path::Path) -> Result<(), ImageError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_ppm(&mut f)
    }

    pub fn read_ppm<R: Read>(r: &mut R) -> Result<Image, ImageError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        // header: "P6" <ws> width <ws> height <ws> maxval <single ws> data
        let mut fields = Vec::new();
        let mut pos = 0usize;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(ImageError::Format("truncated header".into()));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| {
                ImageError::Format("non-ASCII header".into())
            })?.to_string());
        }
        if fields[0] != "P6" {
            return Err(ImageError::Format(format!("expected P6, got {}", fields[0])));
        }
        let width: usize = fields[1].parse().map_err(|_| ImageError::Format("bad width".into()))?;
        let height: usize = fields[2].parse().map_err(|_| ImageError::Format("bad height".into()))?;
        if fields[3] != "255" {
            return Err(ImageError::Format(format!("expected maxval 255, got {}", fields[3])));
        }
        pos += 1; // single whitespace after maxval
        let need = width * height * 3;
        if bytes.len() < pos + need {
            return Err(ImageError::Format("truncated pixel data".into()));
        }
        let pixels = bytes[pos..pos + need].iter().map(|&b| b as f32 / 255.0).collect();
        Ok(Image { width, height, pixels })
    }

    pub fn load_ppm(path: &std::path::Path) -> Result<Image, ImageError> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Image::read_ppm(&mut f)
    }
}

/// Image to a channels-first [3, H, W] tensor.
pub fn image_to_tensor<T: Scalar>(img: &Image) -> Tensor<T> {
    let (w, h) = (img.width, img.height);
    let mut data = vec![T::zero(); 3 * h * w];
    for y in 0..h {
        for x in 0..w {
            let p = img.get(x, y);
            for c in 0..3 {
                data[c * h * w + y * w + x] = sc::<T>(p[c] as f64);
            }
        }
    }
    Tensor::from_vec(vec![3, h, w], data).expect("finite image")
}

/// [H, W, 3] or [3, H, W] tensor back to an image (values clamped).
pub fn tensor_to_image<T: Scalar>(t: &Tensor<T>) -> Image {
    let s = t.shape();
    assert_eq!(s.len(), 3, "expected a rank-3 tensor, got {:?}", s);
    let channels_last = s[2] == 3;
    let (h, w) = if channels_last { (s[0], s[1]) } else { (s[1], s[2]) };
    let mut img = Image::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut rgb = [0.0f32; 3];
            for (c, v) in rgb.iter_mut().enumerate() {
                let idx = if channels_last {
                    (y * w + x) * 3 + c
                } else {
                    c * h * w + y * w + x
                };
                *v = t.data()[idx].into_f64().clamp(0.0, 1.0) as f32;
            }
            img.set(x, y, rgb);
        }
    }
    img
}
