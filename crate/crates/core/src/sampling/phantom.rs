use crate::error::{Error, Result};
use crate::image::ComplexImage;

/// One ellipse of the phantom: intensity, semi-axes, center and rotation (degrees).
#[derive(Debug, Clone, Copy)]
pub struct Ellipse {
    pub intensity: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub angle_deg: f64,
}

const fn e(intensity: f64, semi_x: f64, semi_y: f64, center_x: f64, center_y: f64, angle_deg: f64) -> Ellipse {
    Ellipse { intensity, semi_x, semi_y, center_x, center_y, angle_deg }
}

/// Ten-ellipse Shepp-Logan table with the contrast-enhanced intensities
/// (Toft), which keep every pixel in `[0, 1]`.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    e(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    e(-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    e(-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    e(-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    e(0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    e(0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    e(0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    e(0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    e(0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    e(0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Renders the Shepp-Logan phantom on an `height x width` grid spanning
/// `[-1, 1]` in both axes, with `y` pointing up (row 0 is `y = 1`).
pub fn shepp_logan(height: usize, width: usize) -> Result<ComplexImage> {
    if height < 16 || width < 16 {
        return Err(Error::InvalidDimensions(format!(
            "phantom needs at least 16x16 pixels, got {height}x{width}"
        )));
    }
    let axis = |k: usize, n: usize| (k as f64 - (n as f64 - 1.0) / 2.0) / ((n as f64 - 1.0) / 2.0);
    let trig: Vec<(f64, f64)> = SHEPP_LOGAN
        .iter()
        .map(|el| {
            let phi = el.angle_deg.to_radians();
            (phi.cos(), phi.sin())
        })
        .collect();

    let mut values = vec![0.0; height * width];
    for row in 0..height {
        let y = -axis(row, height);
        for col in 0..width {
            let x = axis(col, width);
            let mut v = 0.0;
            for (el, &(cp, sp)) in SHEPP_LOGAN.iter().zip(&trig) {
                let (dx, dy) = (x - el.center_x, y - el.center_y);
                let u = dx * cp + dy * sp;
                let w = dy * cp - dx * sp;
                if (u * u) / (el.semi_x * el.semi_x) + (w * w) / (el.semi_y * el.semi_y) <= 1.0 {
                    v += el.intensity;
                }
            }
            // cancelling intensities (1 - 0.8 - 0.2) leave -1e-17 residue
            values[row * width + col] = v.clamp(0.0, 1.0);
        }
    }
    ComplexImage::from_real(height, width, &values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_positive_corner_zero() {
        let img = shepp_logan(64, 64).unwrap();
        assert!(img.get(32, 32).re > 0.0);
        assert_eq!(img.get(0, 0).re, 0.0);
        assert_eq!(img.get(63, 63).re, 0.0);
        assert!(img.as_slice().iter().all(|v| v.im == 0.0 && (0.0..=1.0).contains(&v.re)));
    }

    #[test]
    fn too_small_rejected() {
        assert!(shepp_logan(8, 64).is_err());
    }

    #[test]
    fn skull_is_brightest() {
        let img = shepp_logan(128, 128).unwrap();
        let max = img.as_slice().iter().map(|v| v.re).fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
    }
}
