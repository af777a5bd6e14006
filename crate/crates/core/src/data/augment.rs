//! Rotation augmentation with bilinear resampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::{Image, LabeledDataset, LabeledSample};

/// Rotates `image` by `angle` radians about its centre. Pixels whose source
/// falls outside the image take the image's minimum value.
pub fn rotate_image(image: &Image, angle: f64) -> Result<Image> {
    let (w, h, d) = (image.width(), image.height(), image.depth());
    let fill = image.min_value();
    let (sin, cos) = angle.sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let src = image.values();
    let mut out = vec![fill; src.len()];
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            // inverse map: rotate the destination coordinate back by -angle
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            if sx < 0.0 || sy < 0.0 || sx > (w - 1) as f64 || sy > (h - 1) as f64 {
                continue;
            }
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            for c in 0..d {
                let plane = &src[c * w * h..(c + 1) * w * h];
                let at = |xx: usize, yy: usize| plane[yy * w + xx] as f64;
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out[c * w * h + y * w + x] = v as f32;
            }
        }
    }
    let range = image.range();
    for v in &mut out {
        *v = v.clamp(range.lo, range.hi);
    }
    Image::new(w, h, d, out, range)
}

/// Appends `k` rotated copies after each sample, with angles uniform in `[0, 2π)`.
pub fn augment_rotations(dataset: &LabeledDataset, k: usize, seed: u64) -> Result<LabeledDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    augment_rotations_with(dataset, k, || rng.random_range(0.0..std::f64::consts::TAU))
}

/// As [`augment_rotations`] but drawing angles from `angles`.
pub fn augment_rotations_with(dataset: &LabeledDataset, k: usize, mut angles: impl FnMut() -> f64) -> Result<LabeledDataset> {
    let mut samples = Vec::with_capacity(dataset.len() * (k + 1));
    for s in &dataset.samples {
        samples.push(s.clone());
        for j in 0..k {
            samples.push(LabeledSample {
                image: rotate_image(&s.image, angles())?,
                label: s.label,
                source_id: format!("{}#rot{}", s.source_id, j + 1),
            });
        }
    }
    Ok(LabeledDataset { resolution: dataset.resolution, channels: dataset.channels, samples })
}
