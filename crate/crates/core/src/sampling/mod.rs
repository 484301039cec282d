//! Variable-density sampling: probability maps, Bernoulli masks and noisy
//! measurement synthesis.

mod phantom;

pub use phantom::{shepp_logan, Ellipse, SHEPP_LOGAN};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier::{Fourier2d, KSpaceData, SamplingMask};
use crate::image::ComplexImage;

/// Parameters of the polynomial density `p(r) = clamp(b (1 - r)^d, p_min, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    /// Polynomial degree `d`.
    pub degree: f64,
    /// Fully sampled disc radius, as a fraction of the half-diagonal.
    pub center_radius: f64,
    /// Target undersampling factor `R = N / E[n]`.
    pub undersampling: f64,
    /// Probability floor.
    pub p_min: f64,
}

/// `d = 3`, `ρ_c = 0.05`, `p_min = 0.08`. Steeper laws leave the periphery
/// so sparse that the `(1 - p)/p` aliasing gain of the fine-scale error
/// stalls VDAMP after its first iteration.
impl Default for DensityParams {
    fn default() -> Self {
        Self {
            degree: 3.0,
            center_radius: 0.05,
            undersampling: 4.0,
            p_min: 0.08,
        }
    }
}

impl DensityParams {
    pub fn with_undersampling(self, undersampling: f64) -> Self {
        Self { undersampling, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.undersampling >= 1.0 && self.undersampling.is_finite()) {
            return Err(invalid("undersampling", format!("undersampling factor < 1 ({})", self.undersampling)));
        }
        if !(self.degree >= 1.0 && self.degree.is_finite()) {
            return Err(invalid("degree", format!("polynomial degree must be >= 1, got {}", self.degree)));
        }
        if !(0.0..1.0).contains(&self.center_radius) {
            return Err(invalid("center_radius", format!("must lie in [0, 1), got {}", self.center_radius)));
        }
        if !(self.p_min > 0.0 && self.p_min <= 1.0) {
            return Err(invalid("p_min", format!("must lie in (0, 1], got {}", self.p_min)));
        }
        Ok(())
    }
}

/// Per-frequency inclusion probabilities on the centered k-space grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMap {
    height: usize,
    width: usize,
    probs: Vec<f64>,
    params: DensityParams,
    /// Calibrated scale `b` (0 when the map is fully sampled).
    scale: f64,
}

impl ProbabilityMap {
    /// Wraps an explicit probability grid. Entries must lie in `(0, 1]`.
    pub fn from_probs(height: usize, width: usize, probs: Vec<f64>, params: DensityParams) -> Result<Self> {
        if probs.len() != height * width {
            return Err(Error::LengthMismatch {
                expected: height * width,
                actual: probs.len(),
            });
        }
        if let Some(bad) = probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(invalid("probs", format!("probability {bad} outside (0, 1]")));
        }
        Ok(Self { height, width, probs, params, scale: 0.0 })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn params(&self) -> &DensityParams {
        &self.params
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Expected number of samples `Σ p_j`.
    pub fn expected_samples(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Sampling probabilities of the measured positions, in measurement order.
    pub fn probs_at(&self, mask: &SamplingMask) -> Result<Vec<f64>> {
        if (mask.height(), mask.width()) != (self.height, self.width) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.height, self.width),
                actual: format!("{}x{} mask", mask.height(), mask.width()),
            });
        }
        Ok(mask.indices().iter().map(|&i| self.probs[i]).collect())
    }
}

/// Normalized distance of each centered-grid position from DC, in `[0, 1]`.
pub fn normalized_radius(height: usize, width: usize) -> Vec<f64> {
    let (ch, cw) = ((height / 2) as f64, (width / 2) as f64);
    let half_diag = (ch * ch + cw * cw).sqrt().max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(height * width);
    for r in 0..height {
        let dy = r as f64 - ch;
        for c in 0..width {
            let dx = c as f64 - cw;
            out.push(((dx * dx + dy * dy).sqrt() / half_diag).min(1.0));
        }
    }
    out
}

fn density_at(radius: f64, scale: f64, params: &DensityParams) -> f64 {
    if radius <= params.center_radius {
        1.0
    } else {
        (scale * (1.0 - radius).powf(params.degree)).clamp(params.p_min, 1.0)
    }
}

/// Polynomial variable-density map calibrated by bisection on `b` so that
/// `Σ p_j = N / R`.
pub fn polynomial_pmap(height: usize, width: usize, params: DensityParams) -> Result<ProbabilityMap> {
    params.validate()?;
    if height == 0 || width == 0 {
        return Err(Error::InvalidDimensions(format!("{height}x{width} grid is empty")));
    }
    let n_total = (height * width) as f64;
    if params.undersampling == 1.0 {
        return Ok(ProbabilityMap {
            height,
            width,
            probs: vec![1.0; height * width],
            params,
            scale: f64::INFINITY,
        });
    }

    let radius = normalized_radius(height, width);
    let target = n_total / params.undersampling;
    let total = |scale: f64| -> f64 { radius.iter().map(|&r| density_at(r, scale, &params)).sum() };

    let n_center = radius.iter().filter(|&&r| r <= params.center_radius).count() as f64;
    let lowest = n_center + params.p_min * (n_total - n_center);
    let n_edge = radius
        .iter()
        .filter(|&&r| r > params.center_radius && r >= 1.0)
        .count() as f64;
    let highest = n_total - n_edge + params.p_min * n_edge;
    if target < lowest {
        return Err(Error::InfeasibleTarget(format!(
            "R = {} asks for {target:.1} samples but the centre disc and floor already give {lowest:.1}",
            params.undersampling
        )));
    }
    if target > highest {
        return Err(Error::InfeasibleTarget(format!(
            "R = {} asks for {target:.1} samples but at most {highest:.1} are reachable",
            params.undersampling
        )));
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    while total(hi) < target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-14 * hi {
            break;
        }
    }
    let scale = 0.5 * (lo + hi);
    let probs: Vec<f64> = radius.iter().map(|&r| density_at(r, scale, &params)).collect();
    Ok(ProbabilityMap { height, width, probs, params, scale })
}

/// Draws Ω with independent Bernoulli(p_j) inclusions.
///
/// Positions are visited row-major with one uniform draw each, so the mask
/// is a pure function of the generator state. If every draw misses, the
/// most probable position is included so that `n >= 1`.
pub fn draw_mask<R: Rng + ?Sized>(pmap: &ProbabilityMap, rng: &mut R) -> SamplingMask {
    let mut sampled: Vec<bool> = pmap.probs.iter().map(|&p| rng.random::<f64>() < p).collect();
    if !sampled.iter().any(|&s| s) {
        let best = pmap
            .probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        sampled[best] = true;
    }
    SamplingMask::from_bools(pmap.height, pmap.width, sampled).expect("mask is non-empty")
}

/// Noise variance for a given SNR: `‖F x₀‖² / (N · 10^(snr/10))`.
///
/// `snr_db = +∞` denotes noiseless measurements.
pub fn noise_variance(kspace_energy: f64, grid_len: usize, snr_db: f64) -> Result<f64> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(invalid("snr_db", format!("{snr_db} is not a usable SNR")));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(kspace_energy / (grid_len as f64 * 10f64.powf(snr_db / 10.0)))
}

/// Noisy measurements `y = Φ x₀ + CN(0, σ² I)`.
pub fn synthesize<R: Rng + ?Sized>(
    x0: &ComplexImage,
    mask: &SamplingMask,
    fourier: &Fourier2d,
    snr_db: f64,
    rng: &mut R,
) -> Result<KSpaceData> {
    let kspace = fourier.fft_centered(x0)?;
    if (mask.height(), mask.width()) != x0.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", x0.height(), x0.width()),
            actual: format!("{}x{} mask", mask.height(), mask.width()),
        });
    }
    let energy: f64 = kspace.iter().map(|v| v.norm_sqr()).sum();
    let noise_var = noise_variance(energy, kspace.len(), snr_db)?;
    let mut values: Vec<_> = mask.indices().iter().map(|&i| kspace[i]).collect();
    if noise_var > 0.0 {
        let normal = Normal::new(0.0, (noise_var / 2.0).sqrt()).expect("finite positive std");
        for v in &mut values {
            v.re += normal.sample(rng);
            v.im += normal.sample(rng);
        }
    }
    KSpaceData::new(values, noise_var, mask)
}
