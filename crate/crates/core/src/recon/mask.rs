use crate::scenes::RenderedView;

/// Binary foreground mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Mask {
        Mask { width, height, bits: vec![value; width * height] }
    }
}

/// A pixel is foreground iff its largest per-channel deviation from the
/// background color exceeds `tol`.
pub fn foreground_mask(view: &RenderedView, background: [f32; 3], tol: f32) -> Mask {
    let img = &view.image;
    let mut bits = Vec::with_capacity(img.width * img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            let p = img.get(x, y);
            let dev = (0..3).map(|c| (p[c] - background[c]).abs()).fold(0.0f32, f32::max);
            bits.push(dev > tol);
        }
    }
    Mask { width: img.width, height: img.height, bits }
}
