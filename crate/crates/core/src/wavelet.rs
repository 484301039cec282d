//! Orthonormal 2D Haar transform with explicit subband bookkeeping.
//!
//! Coefficients are stored in one flat vector, one contiguous block per
//! subband: the coarse approximation first, then for each scale from the
//! coarsest (`s`) to the finest (`1`) the horizontal, vertical and diagonal
//! details. Each block is row-major at its own resolution.
//!
//! Orientation naming follows the edge direction the detail responds to:
//! horizontal details are high-pass across rows, vertical details are
//! high-pass across columns.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ComplexImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Approx,
    Horizontal,
    Vertical,
    Diagonal,
}

impl Orientation {
    pub fn short_name(self) -> &'static str {
        match self {
            Orientation::Approx => "A",
            Orientation::Horizontal => "H",
            Orientation::Vertical => "V",
            Orientation::Diagonal => "D",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subband {
    /// 1 is the finest scale, `s` the coarsest.
    pub scale: usize,
    pub orientation: Orientation,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Subband {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    /// Label such as `s2H`, used in CSV exports.
    pub fn label(&self) -> String {
        format!("s{}{}", self.scale, self.orientation.short_name())
    }
}

impl fmt::Display for Subband {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Index map from the flat coefficient vector into the `1 + 3s` subbands.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubbandLayout {
    height: usize,
    width: usize,
    scales: usize,
    subbands: Vec<Subband>,
}

impl SubbandLayout {
    pub fn new(height: usize, width: usize, scales: usize) -> Result<Self> {
        if scales == 0 {
            return Err(Error::InvalidDimensions("wavelet scales must be >= 1".into()));
        }
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions(format!("{height}x{width} image is empty")));
        }
        let block = 1usize
            .checked_shl(scales as u32)
            .ok_or_else(|| Error::InvalidDimensions(format!("{scales} scales is too many")))?;
        if !height.is_multiple_of(block) || !width.is_multiple_of(block) {
            return Err(Error::NotDivisible { height, width, scales });
        }

        let mut subbands = Vec::with_capacity(1 + 3 * scales);
        let coarse = (height >> scales, width >> scales);
        subbands.push(Subband {
            scale: scales,
            orientation: Orientation::Approx,
            offset: 0,
            rows: coarse.0,
            cols: coarse.1,
        });
        let mut offset = coarse.0 * coarse.1;
        for scale in (1..=scales).rev() {
            let (rows, cols) = (height >> scale, width >> scale);
            for orientation in [Orientation::Horizontal, Orientation::Vertical, Orientation::Diagonal] {
                subbands.push(Subband { scale, orientation, offset, rows, cols });
                offset += rows * cols;
            }
        }
        debug_assert_eq!(offset, height * width);

        Ok(Self { height, width, scales, subbands })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn scales(&self) -> usize {
        self.scales
    }

    /// Total number of coefficients, equal to the pixel count.
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_subbands(&self) -> usize {
        self.subbands.len()
    }

    pub fn subbands(&self) -> &[Subband] {
        &self.subbands
    }

    pub fn subband(&self, index: usize) -> Result<&Subband> {
        self.subbands.get(index).ok_or(Error::SubbandOutOfRange {
            index,
            count: self.subbands.len(),
        })
    }

    /// Index of the subband with the given scale and orientation.
    pub fn index_of(&self, scale: usize, orientation: Orientation) -> Option<usize> {
        self.subbands
            .iter()
            .position(|b| b.scale == scale && b.orientation == orientation)
    }

    /// Subband sizes `N_j`, in layout order.
    pub fn sizes(&self) -> Vec<usize> {
        self.subbands.iter().map(Subband::len).collect()
    }

    /// Expands one value per subband into a per-coefficient vector.
    pub fn broadcast(&self, per_subband: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for (band, &v) in self.subbands.iter().zip(per_subband) {
            out.extend(std::iter::repeat_n(v, band.len()));
        }
        out
    }
}

/// Flat coefficient vector tied to a [`SubbandLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    values: Vec<Complex64>,
    layout: Arc<SubbandLayout>,
}

impl WaveletCoeffs {
    pub fn zeros(layout: &Arc<SubbandLayout>) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); layout.len()],
            layout: Arc::clone(layout),
        }
    }

    pub fn from_vec(layout: &Arc<SubbandLayout>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::LengthMismatch {
                expected: layout.len(),
                actual: values.len(),
            });
        }
        Ok(Self {
            values,
            layout: Arc::clone(layout),
        })
    }

    pub fn layout(&self) -> &Arc<SubbandLayout> {
        &self.layout
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        crate::image::norm_sqr(&self.values)
    }

    /// The `N_j` entries of subband `index`.
    pub fn subband_view(&self, index: usize) -> Result<&[Complex64]> {
        let band = self.layout.subband(index)?;
        Ok(&self.values[band.range()])
    }

    pub fn subband_view_mut(&mut self, index: usize) -> Result<&mut [Complex64]> {
        let band = *self.layout.subband(index)?;
        Ok(&mut self.values[band.range()])
    }

    /// All subbands at once as disjoint mutable slices.
    pub fn subbands_mut(&mut self) -> Vec<&mut [Complex64]> {
        let mut rest: &mut [Complex64] = &mut self.values;
        let mut out = Vec::with_capacity(self.layout.num_subbands());
        for band in self.layout.subbands() {
            let (head, tail) = rest.split_at_mut(band.len());
            out.push(head);
            rest = tail;
        }
        out
    }

    pub fn subbands(&self) -> impl Iterator<Item = &[Complex64]> + '_ {
        self.layout.subbands().iter().map(|b| &self.values[b.range()])
    }

    pub(crate) fn check_layout(&self, layout: &SubbandLayout) -> Result<()> {
        if *self.layout != *layout {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} s={}", layout.height, layout.width, layout.scales),
                actual: format!(
                    "{}x{} s={}",
                    self.layout.height, self.layout.width, self.layout.scales
                ),
            });
        }
        Ok(())
    }
}

/// Forward transform at `scales` decomposition levels.
pub fn dwt(image: &ComplexImage, scales: usize) -> Result<WaveletCoeffs> {
    let layout = Arc::new(SubbandLayout::new(image.height(), image.width(), scales)?);
    dwt_with(image, &layout)
}

/// Forward transform into an existing layout.
pub fn dwt_with(image: &ComplexImage, layout: &Arc<SubbandLayout>) -> Result<WaveletCoeffs> {
    image.check_shape(layout.height, layout.width)?;
    let mut out = vec![Complex64::new(0.0, 0.0); layout.len()];
    let mut approx = image.as_slice().to_vec();
    let (mut rows, mut cols) = image.shape();

    for scale in 1..=layout.scales {
        let (hr, hc) = (rows / 2, cols / 2);
        let base = 1 + 3 * (layout.scales - scale);
        let [h_off, v_off, d_off] = [0, 1, 2].map(|k| layout.subbands[base + k].offset);
        let mut next = vec![Complex64::new(0.0, 0.0); hr * hc];
        for i in 0..hr {
            let top = &approx[2 * i * cols..(2 * i + 1) * cols];
            let bottom = &approx[(2 * i + 1) * cols..(2 * i + 2) * cols];
            for j in 0..hc {
                let (a, b) = (top[2 * j], top[2 * j + 1]);
                let (c, d) = (bottom[2 * j], bottom[2 * j + 1]);
                let k = i * hc + j;
                next[k] = (a + b + c + d) * 0.5;
                out[h_off + k] = (a + b - c - d) * 0.5;
                out[v_off + k] = (a - b + c - d) * 0.5;
                out[d_off + k] = (a - b - c + d) * 0.5;
            }
        }
        approx = next;
        rows = hr;
        cols = hc;
    }
    out[..approx.len()].copy_from_slice(&approx);

    Ok(WaveletCoeffs {
        values: out,
        layout: Arc::clone(layout),
    })
}

/// Inverse (synthesis) transform, the adjoint of [`dwt`].
pub fn idwt(coeffs: &WaveletCoeffs) -> ComplexImage {
    let layout = &coeffs.layout;
    let values = &coeffs.values;
    let coarse = layout.subbands[0];
    let mut approx = values[coarse.range()].to_vec();
    let (mut rows, mut cols) = (coarse.rows, coarse.cols);

    for scale in (1..=layout.scales).rev() {
        let base = 1 + 3 * (layout.scales - scale);
        let [h, v, d] = [0, 1, 2].map(|k| &values[layout.subbands[base + k].range()]);
        let (fr, fc) = (rows * 2, cols * 2);
        let mut next = vec![Complex64::new(0.0, 0.0); fr * fc];
        for i in 0..rows {
            for j in 0..cols {
                let k = i * cols + j;
                let (ll, hh, vv, dd) = (approx[k], h[k], v[k], d[k]);
                next[2 * i * fc + 2 * j] = (ll + hh + vv + dd) * 0.5;
                next[2 * i * fc + 2 * j + 1] = (ll + hh - vv - dd) * 0.5;
                next[(2 * i + 1) * fc + 2 * j] = (ll - hh + vv - dd) * 0.5;
                next[(2 * i + 1) * fc + 2 * j + 1] = (ll - hh - vv + dd) * 0.5;
            }
        }
        approx = next;
        rows = fr;
        cols = fc;
    }

    ComplexImage::from_vec(layout.height, layout.width, approx)
        .expect("layout dimensions are validated at construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_image(h: usize, w: usize, seed: u64) -> ComplexImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexImage::from_fn(h, w, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    /// Explicit 4x4 orthonormal Haar matrix acting on (a, b, c, d) =
    /// (x00, x01, x10, x11); rows give (A, H, V, D).
    const HAAR4: [[f64; 4]; 4] = [
        [0.5, 0.5, 0.5, 0.5],
        [0.5, 0.5, -0.5, -0.5],
        [0.5, -0.5, 0.5, -0.5],
        [0.5, -0.5, -0.5, 0.5],
    ];

    #[test]
    fn two_by_two_ones_matches_haar_matrix() {
        let img = ComplexImage::from_real(2, 2, &[1.0; 4]).unwrap();
        let w = dwt(&img, 1).unwrap();
        let expected: Vec<f64> = HAAR4.iter().map(|row| row.iter().sum()).collect();
        assert_eq!(expected, vec![2.0, 0.0, 0.0, 0.0]);
        for (got, want) in w.as_slice().iter().zip(&expected) {
            assert!((got - c(*want)).norm() < 1e-15);
        }
    }

    #[test]
    fn unit_approx_coefficient_synthesizes_constant_half() {
        let layout = Arc::new(SubbandLayout::new(2, 2, 1).unwrap());
        let mut w = WaveletCoeffs::zeros(&layout);
        w.subband_view_mut(0).unwrap()[0] = c(1.0);
        let img = idwt(&w);
        // column 0 of the inverse (transpose) of HAAR4
        for (k, px) in img.as_slice().iter().enumerate() {
            assert!((px - c(HAAR4[0][k])).norm() < 1e-15);
            assert!((px - c(0.5)).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let img = ComplexImage::zeros(16, 16);
        let w = dwt(&img, 3).unwrap();
        assert!(w.as_slice().iter().all(|v| v.norm() == 0.0));
        assert!(idwt(&w).as_slice().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn round_trip_64_s4() {
        let img = random_image(64, 64, 1);
        let back = idwt(&dwt(&img, 4).unwrap());
        let err = crate::image::dist_sqr(img.as_slice(), back.as_slice()).sqrt();
        assert!(err <= 1e-12 * img.norm(), "round trip error {err}");
    }

    #[test]
    fn rejects_non_divisible() {
        let img = ComplexImage::zeros(100, 100);
        assert!(matches!(dwt(&img, 4), Err(Error::NotDivisible { .. })));
        assert!(SubbandLayout::new(100, 96, 2).is_ok());
        assert!(SubbandLayout::new(64, 64, 0).is_err());
    }

    #[test]
    fn layout_512_s4() {
        let layout = SubbandLayout::new(512, 512, 4).unwrap();
        assert_eq!(layout.num_subbands(), 13);
        let d1 = layout.index_of(1, Orientation::Diagonal).unwrap();
        assert_eq!(layout.subband(d1).unwrap().len(), 65536);
        assert_eq!(layout.sizes().iter().sum::<usize>(), 512 * 512);
        assert_eq!(layout.subbands()[0].len(), 32 * 32);
        // contiguous and disjoint
        let mut next = 0;
        for b in layout.subbands() {
            assert_eq!(b.offset, next);
            next += b.len();
        }
        assert_eq!(next, layout.len());
    }

    #[test]
    fn rectangular_layout() {
        let img = random_image(32, 64, 5);
        let w = dwt(&img, 3).unwrap();
        assert_eq!(w.layout().subbands()[0].rows, 4);
        assert_eq!(w.layout().subbands()[0].cols, 8);
        let back = idwt(&w);
        assert!(crate::image::dist_sqr(img.as_slice(), back.as_slice()) < 1e-24);
    }

    #[test]
    fn subband_view_out_of_range() {
        let w = dwt(&random_image(8, 8, 2), 2).unwrap();
        assert!(matches!(
            w.subband_view(7),
            Err(Error::SubbandOutOfRange { index: 7, count: 7 })
        ));
    }

    #[test]
    fn subbands_mut_are_disjoint() {
        let layout = Arc::new(SubbandLayout::new(16, 16, 2).unwrap());
        let mut w = WaveletCoeffs::zeros(&layout);
        {
            let mut views = w.subbands_mut();
            views[3].iter_mut().for_each(|v| *v = c(1.0));
        }
        for j in 0..layout.num_subbands() {
            let view = w.subband_view(j).unwrap();
            let expected = if j == 3 { 1.0 } else { 0.0 };
            assert!(view.iter().all(|v| v.re == expected));
        }
        let total: usize = (0..layout.num_subbands())
            .map(|j| w.subband_view(j).unwrap().len())
            .sum();
        assert_eq!(total, 256);
    }

    #[test]
    fn coarse_approx_is_scaled_block_mean() {
        let img = random_image(16, 16, 9);
        let w = dwt(&img, 2).unwrap();
        // approx at scale 2 = (sum over 4x4 block) / 4
        let mut sum = Complex64::new(0.0, 0.0);
        for r in 0..4 {
            for col in 4..8 {
                sum += img.get(r, col);
            }
        }
        assert!((w.subband_view(0).unwrap()[1] - sum / 4.0).norm() < 1e-13);
    }

    #[test]
    fn broadcast_expands_per_subband() {
        let layout = SubbandLayout::new(4, 4, 1).unwrap();
        let v = layout.broadcast(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(v, vec![1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 3.0, 3.0, 3.0, 3.0, 4.0, 4.0, 4.0, 4.0]);
    }
}
