//! Variable density approximate message passing.
//!
//! Each iteration runs, in order:
//!
//! 1. `z = y - ΦΨᴴ r̃`
//! 2. `r = r̃ + Ψ Φᴴ P⁻¹ z` (density-compensated gradient step)
//! 3. `τ = Sᴴ P⁻¹ [(P⁻¹ - 1)|z|² + σ²]`, one value per subband
//! 4. `(ŵ, α) = g(r; τ)` with SURE-tuned per-subband soft thresholds
//! 5. `r̃ = (ŵ - α ⊙ r) ⊘ (1 - α)` (Onsager correction)
//!
//! and the final image is the data-consistent `Ψᴴŵ + Φᴴ(y - ΦΨᴴŵ)`.
//!
//! `S = |ΦΨᴴ|²` has one distinct column per subband because all atoms of a
//! subband are circular translates of each other; those columns are the
//! [`SubbandSpectra`] profiles.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::denoise::{denoise_colored_allow_zero, Quantity, SubbandVector};
use crate::diagnostics::{nmse_db, subband_nmse_db, to_db};
use crate::error::{invalid, Error, Result};
use crate::fourier::{Fourier2d, SamplingMask};
use crate::image::ComplexImage;
use crate::problem::Acquisition;
use crate::sampling::ProbabilityMap;
use crate::trace::{IterationRecord, RunTrace};
use crate::wavelet::{idwt, SubbandLayout, WaveletCoeffs};

/// Largest admissible `α_j`; line-5 division by `1 - α` is guarded here.
pub const ALPHA_MAX: f64 = 1.0 - 1e-9;

/// Power spectrum `|F ψ_j|²` of one atom per subband, on the centered grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandSpectra {
    height: usize,
    width: usize,
    profiles: Vec<Vec<f64>>,
}

impl SubbandSpectra {
    pub fn profiles(&self) -> &[Vec<f64>] {
        &self.profiles
    }

    pub fn profile(&self, subband: usize) -> &[f64] {
        &self.profiles[subband]
    }

    pub fn num_subbands(&self) -> usize {
        self.profiles.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

/// `|F ψ|²` for the atom at `position` (row-major within the subband).
pub fn atom_spectrum(
    layout: &Arc<SubbandLayout>,
    fourier: &Fourier2d,
    subband: usize,
    position: usize,
) -> Result<Vec<f64>> {
    let band = *layout.subband(subband)?;
    if position >= band.len() {
        return Err(invalid("position", format!("{position} outside subband of {} atoms", band.len())));
    }
    let mut w = WaveletCoeffs::zeros(layout);
    w.as_mut_slice()[band.offset + position] = Complex64::new(1.0, 0.0);
    let k = fourier.fft_centered(&idwt(&w))?;
    Ok(k.iter().map(|v| v.norm_sqr()).collect())
}

/// Unique columns of `S = |ΦΨᴴ|²` over the full grid (before masking).
pub fn compute_spectra(layout: &Arc<SubbandLayout>, fourier: &Fourier2d) -> Result<SubbandSpectra> {
    if (layout.height(), layout.width()) != (fourier.height(), fourier.width()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", fourier.height(), fourier.width()),
            actual: format!("{}x{} layout", layout.height(), layout.width()),
        });
    }
    let profiles = (0..layout.num_subbands())
        .into_par_iter()
        .map(|j| atom_spectrum(layout, fourier, j, 0))
        .collect::<Result<Vec<_>>>()?;
    Ok(SubbandSpectra {
        height: layout.height(),
        width: layout.width(),
        profiles,
    })
}

/// Per-measurement weights `p⁻¹ [(p⁻¹ - 1)|z|² + σ²]`.
fn variance_weights(z: &[Complex64], inv_p: &[f64], noise_var: f64) -> Vec<f64> {
    z.iter()
        .zip(inv_p)
        .map(|(v, &ip)| ip * ((ip - 1.0) * v.norm_sqr() + noise_var))
        .collect()
}

/// Per-subband error-variance estimate
/// `τ_j = Σ_{ω∈Ω} m_j(ω) p_ω⁻¹ [(p_ω⁻¹ - 1)|z_ω|² + σ²]`.
pub fn tau_update(
    z: &[Complex64],
    mask: &SamplingMask,
    pmap: &ProbabilityMap,
    noise_var: f64,
    spectra: &SubbandSpectra,
) -> Result<SubbandVector> {
    if z.len() != mask.n() {
        return Err(Error::LengthMismatch { expected: mask.n(), actual: z.len() });
    }
    if spectra.shape() != (mask.height(), mask.width()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", mask.height(), mask.width()),
            actual: format!("{}x{} spectra", spectra.height, spectra.width),
        });
    }
    let inv_p = inverse_probs(pmap, mask)?;
    let q = variance_weights(z, &inv_p, noise_var);
    let tau = spectra
        .profiles
        .iter()
        .map(|prof| mask.indices().iter().zip(&q).map(|(&i, &qi)| prof[i] * qi).sum())
        .collect();
    Ok(SubbandVector::new(Quantity::Variance, tau))
}

fn inverse_probs(pmap: &ProbabilityMap, mask: &SamplingMask) -> Result<Vec<f64>> {
    let probs = pmap.probs_at(mask)?;
    if let Some(&p) = probs.iter().find(|&&p| !(p > 0.0)) {
        return Err(invalid("pmap", format!("sampled position has probability {p}")));
    }
    Ok(probs.iter().map(|&p| 1.0 / p).collect())
}

/// Iteration state; field names follow the update they come from.
#[derive(Debug, Clone, PartialEq)]
pub struct VdampState {
    /// Bias-corrected input `r̃_k` of the next iteration.
    pub r_tilde: WaveletCoeffs,
    /// Density-compensated estimate `r_k`.
    pub r: WaveletCoeffs,
    /// Measurement residual `z_k`.
    pub z: Vec<Complex64>,
    pub tau: SubbandVector,
    pub w_hat: WaveletCoeffs,
    pub alpha: SubbandVector,
    pub thresholds: SubbandVector,
    pub lambda: SubbandVector,
    /// Number of completed iterations.
    pub k: usize,
    pub alpha_clamped: bool,
}

impl VdampState {
    pub fn initial(layout: &Arc<SubbandLayout>, n: usize) -> Self {
        let bands = layout.num_subbands();
        Self {
            r_tilde: WaveletCoeffs::zeros(layout),
            r: WaveletCoeffs::zeros(layout),
            z: vec![Complex64::new(0.0, 0.0); n],
            tau: SubbandVector::filled(Quantity::Variance, bands, 0.0),
            w_hat: WaveletCoeffs::zeros(layout),
            alpha: SubbandVector::filled(Quantity::Derivative, bands, 0.0),
            thresholds: SubbandVector::filled(Quantity::Threshold, bands, 0.0),
            lambda: SubbandVector::filled(Quantity::Lambda, bands, 0.0),
            k: 0,
            alpha_clamped: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VdampOutput {
    pub image: ComplexImage,
    pub trace: RunTrace,
    pub state: VdampState,
}

/// VDAMP bound to one acquisition, with the per-mask precomputation done.
pub struct Vdamp<'a> {
    acq: &'a Acquisition,
    inv_p: Vec<f64>,
    spectra: SubbandSpectra,
    /// `spectra` gathered at the sampled positions, one row per subband.
    sampled_spectra: Vec<Vec<f64>>,
    setup_time_s: f64,
}

impl<'a> Vdamp<'a> {
    pub fn new(acq: &'a Acquisition, pmap: &ProbabilityMap) -> Result<Self> {
        let start = Instant::now();
        let inv_p = inverse_probs(pmap, &acq.mask)?;
        let spectra = compute_spectra(&acq.layout, &acq.fourier)?;
        Ok(Self::with_spectra(acq, inv_p, spectra, start))
    }

    /// Reuses spectra computed for the same grid and layout.
    pub fn with_precomputed(acq: &'a Acquisition, pmap: &ProbabilityMap, spectra: SubbandSpectra) -> Result<Self> {
        let start = Instant::now();
        if spectra.shape() != (acq.layout.height(), acq.layout.width())
            || spectra.num_subbands() != acq.layout.num_subbands()
        {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", acq.layout.height(), acq.layout.width()),
                actual: format!("{}x{} spectra", spectra.height, spectra.width),
            });
        }
        let inv_p = inverse_probs(pmap, &acq.mask)?;
        Ok(Self::with_spectra(acq, inv_p, spectra, start))
    }

    fn with_spectra(acq: &'a Acquisition, inv_p: Vec<f64>, spectra: SubbandSpectra, start: Instant) -> Self {
        let sampled_spectra = spectra
            .profiles
            .iter()
            .map(|prof| acq.mask.indices().iter().map(|&i| prof[i]).collect())
            .collect();
        Self {
            acq,
            inv_p,
            spectra,
            sampled_spectra,
            setup_time_s: start.elapsed().as_secs_f64(),
        }
    }

    pub fn acquisition(&self) -> &Acquisition {
        self.acq
    }

    pub fn spectra(&self) -> &SubbandSpectra {
        &self.spectra
    }

    pub fn initial_state(&self) -> VdampState {
        VdampState::initial(&self.acq.layout, self.acq.mask.n())
    }

    fn tau(&self, z: &[Complex64]) -> SubbandVector {
        let q = variance_weights(z, &self.inv_p, self.acq.noise_var());
        let tau = self
            .sampled_spectra
            .iter()
            .map(|prof| prof.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>().max(0.0))
            .collect();
        SubbandVector::new(Quantity::Variance, tau)
    }

    /// One pass of the update sequence; `state.k` is incremented.
    pub fn iterate(&self, state: &mut VdampState) -> Result<()> {
        state.r_tilde.check_layout(&self.acq.layout)?;
        let z = self.acq.residual(&state.r_tilde)?;
        let compensated: Vec<Complex64> = z.iter().zip(&self.inv_p).map(|(v, &ip)| v * ip).collect();
        let mut r = self.acq.backproject(&compensated)?;
        r.as_mut_slice()
            .iter_mut()
            .zip(state.r_tilde.as_slice())
            .for_each(|(a, b)| *a += b);

        let tau = self.tau(&z);
        let den = denoise_colored_allow_zero(&r, &tau)?;

        let mut clamped = false;
        let alpha: Vec<f64> = den
            .alpha
            .values
            .iter()
            .map(|&a| {
                if a > ALPHA_MAX {
                    clamped = true;
                    ALPHA_MAX
                } else {
                    a
                }
            })
            .collect();

        let mut r_tilde = den.estimate.clone();
        for ((out, r_band), &a) in r_tilde.subbands_mut().into_iter().zip(r.subbands()).zip(&alpha) {
            let scale = 1.0 / (1.0 - a);
            out.iter_mut()
                .zip(r_band)
                .for_each(|(w, &rv)| *w = (*w - rv * a) * scale);
        }

        state.z = z;
        state.r = r;
        state.tau = tau;
        state.w_hat = den.estimate;
        state.alpha = SubbandVector::new(Quantity::Derivative, alpha);
        state.thresholds = den.thresholds;
        state.lambda = den.lambda;
        state.r_tilde = r_tilde;
        state.alpha_clamped = clamped;
        state.k += 1;
        Ok(())
    }

    /// Data-consistent reconstruction from a wavelet estimate.
    pub fn finalize(&self, w_hat: &WaveletCoeffs) -> Result<ComplexImage> {
        finalize(self.acq, w_hat)
    }

    pub fn run(&self, iterations: usize, ground_truth: Option<&ComplexImage>) -> Result<VdampOutput> {
        self.run_with(iterations, ground_truth, |_| {})
    }

    /// Runs `iterations` passes from `r̃₀ = 0`, calling `observe` after each.
    pub fn run_with(
        &self,
        iterations: usize,
        ground_truth: Option<&ComplexImage>,
        mut observe: impl FnMut(&VdampState),
    ) -> Result<VdampOutput> {
        if iterations == 0 {
            return Err(invalid("iterations", "at least one iteration is required"));
        }
        let truth = match ground_truth {
            Some(x0) => Some((x0, self.acq.analyze(x0)?)),
            None => None,
        };
        let sizes = self.acq.layout.sizes();

        let mut trace = RunTrace::new("vdamp");
        trace.setup_time_s = self.setup_time_s;
        let mut state = self.initial_state();
        let mut elapsed = 0.0;
        for iter in 0..iterations {
            let start = Instant::now();
            self.iterate(&mut state)?;
            let wall = start.elapsed().as_secs_f64();
            elapsed += wall;

            let mut record = IterationRecord {
                iter,
                wall_time_s: wall,
                elapsed_s: elapsed,
                nmse_db: None,
                subband_nmse_db: None,
                tau: state.tau.values.clone(),
                tau_nmse_db: None,
                thresholds: state.thresholds.values.clone(),
                lambda: state.lambda.values.clone(),
                alpha: state.alpha.values.clone(),
                objective: None,
                alpha_clamped: state.alpha_clamped,
            };
            if let Some((x0, w0)) = &truth {
                record.nmse_db = Some(nmse_db(&self.finalize(&state.w_hat)?, x0)?);
                record.subband_nmse_db = Some(subband_nmse_db(&state.r, w0)?.values);
                record.tau_nmse_db = Some(
                    w0.subbands()
                        .zip(&state.tau.values)
                        .zip(&sizes)
                        .map(|((band, &t), &n)| {
                            let energy = crate::image::norm_sqr(band);
                            to_db(t * n as f64 / energy)
                        })
                        .collect(),
                );
            }
            trace.records.push(record);
            observe(&state);
        }

        let image = self.finalize(&state.w_hat)?;
        Ok(VdampOutput { image, trace, state })
    }
}

/// `x̂ = Ψᴴŵ + Φᴴ(y - ΦΨᴴŵ)`, exactly consistent with the measurements.
pub fn finalize(acq: &Acquisition, w_hat: &WaveletCoeffs) -> Result<ComplexImage> {
    acq.data_consistent(w_hat)
}
