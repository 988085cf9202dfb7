//! Procedural circles and squares, a self-contained stand-in for a sprite
//! corpus with a circle-vs-square task.

use crate::data::LabeledImages;
use crate::error::{Error, Result};
use crate::math::{Matrix, Rng};

pub const MIN_CANVAS: usize = 16;

/// Largest shape extent as a fraction of the shorter canvas side.
const MAX_EXTENT: f64 = 0.75;
/// Scale is drawn uniformly from `[MIN_SCALE, 1]` of the largest extent.
const MIN_SCALE: f64 = 0.5;

/// `n` filled shapes: circles (ỹ = 0) at even indices and squares (ỹ = 1) at
/// odd ones, each with random scale and position, fully inside the canvas.
/// Pixels are 0 or 1.
pub fn synth_shapes(n: usize, height: usize, width: usize, rng: &mut Rng) -> Result<LabeledImages> {
    if height < MIN_CANVAS || width < MIN_CANVAS {
        return Err(Error::Config(format!(
            "canvas {height}x{width} smaller than {MIN_CANVAS}x{MIN_CANVAS}"
        )));
    }
    let side = height.min(width) as f64;
    let max_extent = (MAX_EXTENT * side).round() as usize;
    let mut images = Matrix::zeros(n, height * width);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let scale = rng.uniform_range(MIN_SCALE, 1.0);
        let extent = ((scale * max_extent as f64).round() as usize).clamp(5, max_extent);
        let top = rng.index(height - extent + 1);
        let left = rng.index(width - extent + 1);
        let img = images.row_mut(i);
        if label == 1 {
            draw_square(img, width, top, left, extent);
        } else {
            draw_circle(img, width, top, left, extent);
        }
        labels.push(label);
    }
    LabeledImages::new(images, labels, height, width)
}

fn draw_square(img: &mut [f64], width: usize, top: usize, left: usize, side: usize) {
    for r in top..top + side {
        for c in left..left + side {
            img[r * width + c] = 1.0;
        }
    }
}

/// Disc inscribed in the `extent`-sized box at (`top`, `left`); a pixel is
/// filled when its center lies inside the disc.
fn draw_circle(img: &mut [f64], width: usize, top: usize, left: usize, extent: usize) {
    let radius = extent as f64 / 2.0;
    let cy = top as f64 + radius;
    let cx = left as f64 + radius;
    for r in top..top + extent {
        for c in left..left + extent {
            let dy = r as f64 + 0.5 - cy;
            let dx = c as f64 + 0.5 - cx;
            if dy * dy + dx * dx <= radius * radius {
                img[r * width + c] = 1.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(img: &[f64]) -> usize {
        img.iter().filter(|&&v| v == 1.0).count()
    }

    #[test]
    fn circle_and_square_fill_counts() {
        for extent in 5..=12 {
            let mut sq = vec![0.0; 256];
            draw_square(&mut sq, 16, 2, 3, extent);
            assert_eq!(filled(&sq), extent * extent);
            let mut ci = vec![0.0; 256];
            draw_circle(&mut ci, 16, 2, 3, extent);
            let r = extent as f64 / 2.0;
            let area = std::f64::consts::PI * r * r;
            let perimeter = 2.0 * std::f64::consts::PI * r;
            assert!((filled(&ci) as f64 - area).abs() <= perimeter, "extent {extent}");
        }
    }

    #[test]
    fn smallest_shapes_cover_sixteen_pixels() {
        let mut ci = vec![0.0; 256];
        draw_circle(&mut ci, 16, 0, 0, 5);
        assert!(filled(&ci) >= 16);
        let mut sq = vec![0.0; 256];
        draw_square(&mut sq, 16, 0, 0, 5);
        assert!(filled(&sq) >= 16);
    }

    #[test]
    fn generated_images_are_binary_and_balanced() {
        let imgs = synth_shapes(2, 16, 16, &mut Rng::new(0)).unwrap();
        assert_eq!(imgs.prelim_labels, vec![0, 1]);
        assert!(imgs.images.data().iter().all(|&v| v == 0.0 || v == 1.0));
        for i in 0..2 {
            assert!(filled(imgs.images.row(i)) >= 16);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = synth_shapes(20, 16, 20, &mut Rng::new(9)).unwrap();
        let b = synth_shapes(20, 16, 20, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_canvas_rejected() {
        assert!(synth_shapes(1, 8, 16, &mut Rng::new(0)).is_err());
    }
}
