//! Unitary, centered 2D DFT and the undersampled sensing operator `M_Ω F`.
//!
//! K-space arrays are row-major over the centered grid: the DC term of an
//! `H x W` grid sits at `(H/2, W/2)`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ComplexImage;

/// Sampling set Ω over the centered k-space grid.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingMask {
    height: usize,
    width: usize,
    sampled: Vec<bool>,
    indices: Vec<usize>,
}

impl fmt::Debug for SamplingMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SamplingMask")
            .field("height", &self.height)
            .field("width", &self.width)
            .field("n", &self.indices.len())
            .finish()
    }
}

impl SamplingMask {
    pub fn from_bools(height: usize, width: usize, sampled: Vec<bool>) -> Result<Self> {
        if sampled.len() != height * width {
            return Err(Error::LengthMismatch {
                expected: height * width,
                actual: sampled.len(),
            });
        }
        let indices: Vec<usize> = sampled
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect();
        if indices.is_empty() {
            return Err(Error::Degenerate("sampling mask selects no frequencies".into()));
        }
        Ok(Self {
            height,
            width,
            sampled,
            indices,
        })
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            sampled: vec![true; height * width],
            indices: (0..height * width).collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of measurements `n`.
    pub fn n(&self) -> usize {
        self.indices.len()
    }

    /// Grid size `N`.
    pub fn grid_len(&self) -> usize {
        self.sampled.len()
    }

    pub fn is_sampled(&self, index: usize) -> bool {
        self.sampled[index]
    }

    pub fn sampled(&self) -> &[bool] {
        &self.sampled
    }

    /// Centered-grid positions of the measurements, in measurement order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// `N / n`.
    pub fn undersampling_factor(&self) -> f64 {
        self.grid_len() as f64 / self.n() as f64
    }
}

/// Measured k-space samples aligned with a [`SamplingMask`], plus the noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceData {
    pub values: Vec<Complex64>,
    pub noise_var: f64,
}

impl KSpaceData {
    pub fn new(values: Vec<Complex64>, noise_var: f64, mask: &SamplingMask) -> Result<Self> {
        if values.len() != mask.n() {
            return Err(Error::LengthMismatch {
                expected: mask.n(),
                actual: values.len(),
            });
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(crate::error::invalid("noise_var", format!("{noise_var} is not a finite value >= 0")));
        }
        Ok(Self { values, noise_var })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Unitary centered 2D DFT of a fixed grid size.
///
/// Plans are immutable and scratch space is allocated per call, so one
/// instance can be shared across threads.
pub struct Fourier2d {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fourier2d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fourier2d")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fourier2d {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions(format!("{height}x{width} grid is empty")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_mask(&self, mask: &SamplingMask) -> Result<()> {
        if (mask.height, mask.width) != (self.height, self.width) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.height, self.width),
                actual: format!("{}x{} mask", mask.height, mask.width),
            });
        }
        Ok(())
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let (rows, cols) = (self.height, self.width);
        let (row_plan, col_plan) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        let scratch_len = row_plan
            .get_inplace_scratch_len()
            .max(col_plan.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        row_plan.process_with_scratch(data, &mut scratch);

        let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
        transpose(data, &mut t, rows, cols);
        col_plan.process_with_scratch(&mut t, &mut scratch);
        transpose(&t, data, cols, rows);

        let scale = 1.0 / ((rows * cols) as f64).sqrt();
        data.iter_mut().for_each(|v| *v *= scale);
    }

    /// Full centered k-space of `x` (unitary).
    pub fn fft_centered(&self, x: &ComplexImage) -> Result<Vec<Complex64>> {
        x.check_shape(self.height, self.width)?;
        let mut buf = x.as_slice().to_vec();
        self.transform(&mut buf, false);
        Ok(self.shift(&buf, true))
    }

    /// Inverse of [`Fourier2d::fft_centered`].
    pub fn ifft_centered(&self, kspace: &[Complex64]) -> Result<ComplexImage> {
        if kspace.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: kspace.len(),
            });
        }
        let mut buf = self.shift(kspace, false);
        self.transform(&mut buf, true);
        ComplexImage::from_vec(self.height, self.width, buf)
    }

    /// Moves between natural FFT bin order and the centered grid.
    fn shift(&self, src: &[Complex64], to_centered: bool) -> Vec<Complex64> {
        let (h, w) = (self.height, self.width);
        let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
        for r in 0..h {
            let rc = (r + h / 2) % h;
            for c in 0..w {
                let cc = (c + w / 2) % w;
                if to_centered {
                    out[rc * w + cc] = src[r * w + c];
                } else {
                    out[r * w + c] = src[rc * w + cc];
                }
            }
        }
        out
    }

    /// Φx: unitary FFT followed by selection of the sampled positions.
    pub fn forward(&self, x: &ComplexImage, mask: &SamplingMask) -> Result<Vec<Complex64>> {
        self.check_mask(mask)?;
        let k = self.fft_centered(x)?;
        Ok(mask.indices.iter().map(|&i| k[i]).collect())
    }

    /// Φᴴy: zero-fill the unsampled positions and apply the unitary inverse FFT.
    pub fn adjoint(&self, y: &[Complex64], mask: &SamplingMask) -> Result<ComplexImage> {
        self.check_mask(mask)?;
        self.ifft_centered(&zero_fill(y, mask)?)
    }

    /// Φᴴ diag(weights) y, used for density compensation (weights = 1/p).
    pub fn adjoint_weighted(
        &self,
        y: &[Complex64],
        weights: &[f64],
        mask: &SamplingMask,
    ) -> Result<ComplexImage> {
        if weights.len() != y.len() {
            return Err(Error::LengthMismatch {
                expected: y.len(),
                actual: weights.len(),
            });
        }
        let weighted: Vec<Complex64> = y.iter().zip(weights).map(|(v, &wt)| v * wt).collect();
        self.adjoint(&weighted, mask)
    }
}

/// Scatters measurements into a full centered grid, zeros elsewhere.
pub fn zero_fill(y: &[Complex64], mask: &SamplingMask) -> Result<Vec<Complex64>> {
    if y.len() != mask.n() {
        return Err(Error::LengthMismatch {
            expected: mask.n(),
            actual: y.len(),
        });
    }
    let mut full = vec![Complex64::new(0.0, 0.0); mask.grid_len()];
    for (&i, &v) in mask.indices.iter().zip(y) {
        full[i] = v;
    }
    Ok(full)
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const BLOCK: usize = 32;
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}
