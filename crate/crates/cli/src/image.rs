//! Conversion between images and grid fields. Intensities map to [0, 1] by
//! the image's max value; the grid spacing is 1/max(W, H) so the longer side
//! spans just under unit length.

use crate::pgm::ImageBuffer;
use fracbv::domain::ConvexDomain;
use fracbv::grid::{Grid, ScalarField};

pub fn image_to_field(
    img: &ImageBuffer,
    domain: Option<&ConvexDomain>,
) -> Result<ScalarField, fracbv::Error> {
    let (w, h) = (img.width, img.height);
    let spacing = 1.0 / w.max(h) as f64;
    let grid = Grid::rect(
        (0.0, (w - 1) as f64 * spacing),
        (0.0, (h - 1) as f64 * spacing),
        w,
        h,
    )?;
    let n = grid.num_nodes();
    let mut values = vec![0.0; n];
    for row in 0..h {
        for col in 0..w {
            // node (ix = col, iy = row), first axis major
            values[col * h + row] = img.pixels[row * w + col] as f64 / img.max_value as f64;
        }
    }
    let mask = match domain {
        None => vec![true; n],
        Some(dom) => (0..n)
            .map(|i| {
                let c = grid.coord(i);
                dom.contains_strict([c[0], c[1]])
            })
            .collect(),
    };
    ScalarField::new(grid, values, mask)
}

/// Quantize a [0, 1]-valued field back to an image; out-of-range values are
/// clamped, so one round trip loses at most half a quantization step.
pub fn field_to_image(field: &ScalarField, max_value: u32) -> ImageBuffer {
    let w = field.grid.axis(0).n;
    let h = field.grid.axis(1).n;
    let mut pixels = vec![0u16; w * h];
    for row in 0..h {
        for col in 0..w {
            let v = field.values[col * h + row].clamp(0.0, 1.0);
            pixels[row * w + col] = (v * max_value as f64).round() as u16;
        }
    }
    ImageBuffer {
        width: w,
        height: h,
        max_value,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_full_images() {
        let img = ImageBuffer::new(4, 3, 255, vec![0; 12]).unwrap();
        let f = image_to_field(&img, None).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));

        let img = ImageBuffer::new(4, 3, 255, vec![255; 12]).unwrap();
        let f = image_to_field(&img, None).unwrap();
        assert!(f.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn roundtrip_is_exact_on_quantized_values() {
        let img = ImageBuffer::new(5, 4, 255, (0..20).map(|i| (i * 13) as u16 % 256).collect())
            .unwrap();
        let f = image_to_field(&img, None).unwrap();
        let back = field_to_image(&f, 255);
        assert_eq!(back.pixels, img.pixels);
    }

    #[test]
    fn quantization_error_bounded_by_half_step() {
        let img = ImageBuffer::new(3, 3, 255, vec![10; 9]).unwrap();
        let mut f = image_to_field(&img, None).unwrap();
        for (i, v) in f.values.iter_mut().enumerate() {
            *v += (i as f64 - 4.0) / 9.0 * (0.9 / 255.0);
        }
        let back = field_to_image(&f, 255);
        for (i, &p) in back.pixels.iter().enumerate() {
            let rebuilt = p as f64 / 255.0;
            let original = {
                let row = i / 3;
                let col = i % 3;
                f.values[col * 3 + row]
            };
            assert!((rebuilt - original).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn domain_mask_applies() {
        let img = ImageBuffer::new(8, 8, 255, vec![100; 64]).unwrap();
        let dom = ConvexDomain::rect([0.1, 0.1], [0.6, 0.6], [0.3, 0.3]).unwrap();
        let f = image_to_field(&img, Some(&dom)).unwrap();
        assert!(f.mask.iter().any(|&m| m));
        assert!(f.mask.iter().any(|&m| !m));
    }
}
