use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::{Fourier2d, KSpaceData, SamplingMask};
use crate::image::ComplexImage;
use crate::rng::SeedTree;
use crate::sampling::{draw_mask, polynomial_pmap, synthesize, DensityParams, ProbabilityMap};
use crate::wavelet::{dwt_with, idwt, SubbandLayout, WaveletCoeffs};

/// Operators and measurements shared by every reconstruction algorithm.
///
/// Algorithms borrow one `Acquisition`, so FISTA, SURE-IT and VDAMP run on
/// the same Ψ, Φ and data instances.
#[derive(Debug, Clone)]
pub struct Acquisition {
    pub fourier: Arc<Fourier2d>,
    pub layout: Arc<SubbandLayout>,
    pub mask: Arc<SamplingMask>,
    pub data: KSpaceData,
}

impl Acquisition {
    pub fn new(
        fourier: Arc<Fourier2d>,
        layout: Arc<SubbandLayout>,
        mask: Arc<SamplingMask>,
        data: KSpaceData,
    ) -> Result<Self> {
        let grid = (fourier.height(), fourier.width());
        if (layout.height(), layout.width()) != grid || (mask.height(), mask.width()) != grid {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", grid.0, grid.1),
                actual: format!(
                    "layout {}x{}, mask {}x{}",
                    layout.height(),
                    layout.width(),
                    mask.height(),
                    mask.width()
                ),
            });
        }
        if data.len() != mask.n() {
            return Err(Error::LengthMismatch {
                expected: mask.n(),
                actual: data.len(),
            });
        }
        Ok(Self { fourier, layout, mask, data })
    }

    pub fn y(&self) -> &[Complex64] {
        &self.data.values
    }

    pub fn noise_var(&self) -> f64 {
        self.data.noise_var
    }

    /// Ψx.
    pub fn analyze(&self, x: &ComplexImage) -> Result<WaveletCoeffs> {
        dwt_with(x, &self.layout)
    }

    /// ΦΨᴴw.
    pub fn measure_coeffs(&self, w: &WaveletCoeffs) -> Result<Vec<Complex64>> {
        w.check_layout(&self.layout)?;
        self.fourier.forward(&idwt(w), &self.mask)
    }

    /// ΨΦᴴz.
    pub fn backproject(&self, z: &[Complex64]) -> Result<WaveletCoeffs> {
        dwt_with(&self.fourier.adjoint(z, &self.mask)?, &self.layout)
    }

    /// `y - ΦΨᴴw`.
    pub fn residual(&self, w: &WaveletCoeffs) -> Result<Vec<Complex64>> {
        let pred = self.measure_coeffs(w)?;
        Ok(self.y().iter().zip(&pred).map(|(a, b)| a - b).collect())
    }

    /// Data-consistent image `Ψᴴw + Φᴴ(y - ΦΨᴴw)`.
    pub fn data_consistent(&self, w: &WaveletCoeffs) -> Result<ComplexImage> {
        w.check_layout(&self.layout)?;
        let base = idwt(w);
        let pred = self.fourier.forward(&base, &self.mask)?;
        let resid: Vec<Complex64> = self.y().iter().zip(&pred).map(|(a, b)| a - b).collect();
        let correction = self.fourier.adjoint(&resid, &self.mask)?;
        let data = base
            .as_slice()
            .iter()
            .zip(correction.as_slice())
            .map(|(a, b)| a + b)
            .collect();
        ComplexImage::from_vec(base.height(), base.width(), data)
    }
}

/// A ground-truth image with its sampling density, ready to draw
/// acquisitions from.
#[derive(Debug, Clone)]
pub struct Scene {
    pub truth: ComplexImage,
    pub fourier: Arc<Fourier2d>,
    pub layout: Arc<SubbandLayout>,
    pub pmap: ProbabilityMap,
    pub snr_db: f64,
}

impl Scene {
    pub fn new(truth: ComplexImage, scales: usize, density: DensityParams, snr_db: f64) -> Result<Self> {
        let (h, w) = truth.shape();
        let layout = Arc::new(SubbandLayout::new(h, w, scales)?);
        let fourier = Arc::new(Fourier2d::new(h, w)?);
        let pmap = polynomial_pmap(h, w, density)?;
        Ok(Self { truth, fourier, layout, pmap, snr_db })
    }

    /// Draw `index`: mask from the `"mask"` stream, noise from `"noise"`.
    pub fn acquire(&self, seeds: &SeedTree, index: u64) -> Result<Acquisition> {
        let mask = draw_mask(&self.pmap, &mut seeds.rng("mask", index));
        let data = synthesize(&self.truth, &mask, &self.fourier, self.snr_db, &mut seeds.rng("noise", index))?;
        Acquisition::new(self.fourier.clone(), self.layout.clone(), Arc::new(mask), data)
    }

    pub fn truth_coeffs(&self) -> Result<WaveletCoeffs> {
        dwt_with(&self.truth, &self.layout)
    }
}
