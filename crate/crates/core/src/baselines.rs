//! Reference algorithms: FISTA with a global threshold, and SURE-IT, which
//! replaces FISTA's shrinkage by SURE-tuned thresholding with the true
//! (oracle) scalar error variance.
//!
//! Both operate in the wavelet domain on `½‖y - ΦΨᴴw‖² + λ‖w‖₁` with unit
//! step size; `‖Φ‖ = 1` under the unitary FFT so the step is admissible.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoise::{denoise_colored_allow_zero, soft_threshold_in_place, Quantity, SubbandVector};
use crate::diagnostics::{nmse_db, subband_nmse_db};
use crate::error::{invalid, Error, Result};
use crate::image::ComplexImage;
use crate::problem::Acquisition;
use crate::trace::{IterationRecord, RunTrace};
use crate::wavelet::{idwt, WaveletCoeffs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineAlgorithm {
    Fista,
    SureIt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub algorithm: BaselineAlgorithm,
    /// Global sparse weighting; FISTA only.
    pub lambda: Option<f64>,
    pub iterations: usize,
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(invalid("iterations", "at least one iteration is required"));
        }
        if self.algorithm == BaselineAlgorithm::Fista {
            match self.lambda {
                Some(l) if l > 0.0 && l.is_finite() => {}
                other => return Err(invalid("lambda", format!("FISTA needs lambda > 0, got {other:?}"))),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BaselineOutput {
    pub image: ComplexImage,
    pub trace: RunTrace,
    pub w_hat: WaveletCoeffs,
}

fn next_momentum(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

/// `out = a + c (a - b)`.
fn extrapolate(a: &WaveletCoeffs, b: &WaveletCoeffs, c: f64) -> WaveletCoeffs {
    let mut out = a.clone();
    out.as_mut_slice()
        .iter_mut()
        .zip(b.as_slice())
        .for_each(|(x, &y)| *x += (*x - y) * c);
    out
}

/// Gradient step `v + ΨΦᴴ(y - ΦΨᴴv)`.
fn gradient_step(acq: &Acquisition, v: &WaveletCoeffs) -> Result<WaveletCoeffs> {
    let z = acq.residual(v)?;
    let back = acq.backproject(&z)?;
    let mut out = v.clone();
    out.as_mut_slice()
        .iter_mut()
        .zip(back.as_slice())
        .for_each(|(a, b)| *a += b);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FistaState {
    /// Current iterate `w_k`.
    pub w: WaveletCoeffs,
    /// Extrapolated point the next gradient step is taken from.
    pub v: WaveletCoeffs,
    pub t: f64,
    pub k: usize,
}

impl FistaState {
    pub fn zeros(acq: &Acquisition) -> Self {
        Self {
            w: WaveletCoeffs::zeros(&acq.layout),
            v: WaveletCoeffs::zeros(&acq.layout),
            t: 1.0,
            k: 0,
        }
    }
}

pub struct Fista<'a> {
    acq: &'a Acquisition,
    lambda: f64,
}

impl<'a> Fista<'a> {
    pub fn new(acq: &'a Acquisition, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be > 0, got {lambda}")));
        }
        Ok(Self { acq, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `½‖y - ΦΨᴴw‖² + λ‖w‖₁`.
    pub fn objective(&self, w: &WaveletCoeffs) -> Result<f64> {
        let r = self.acq.residual(w)?;
        let fit: f64 = r.iter().map(|v| v.norm_sqr()).sum();
        let l1: f64 = w.as_slice().iter().map(|v| v.norm()).sum();
        Ok(0.5 * fit + self.lambda * l1)
    }

    pub fn step(&self, state: &mut FistaState) -> Result<()> {
        let mut w = gradient_step(self.acq, &state.v)?;
        soft_threshold_in_place(w.as_mut_slice(), self.lambda)?;
        let t_next = next_momentum(state.t);
        state.v = extrapolate(&w, &state.w, (state.t - 1.0) / t_next);
        state.w = w;
        state.t = t_next;
        state.k += 1;
        Ok(())
    }

    pub fn run(&self, iterations: usize, ground_truth: Option<&ComplexImage>) -> Result<BaselineOutput> {
        if iterations == 0 {
            return Err(invalid("iterations", "at least one iteration is required"));
        }
        let truth = match ground_truth {
            Some(x0) => Some((x0, self.acq.analyze(x0)?)),
            None => None,
        };
        let bands = self.acq.layout.num_subbands();
        let mut trace = RunTrace::new("fista");
        let mut state = FistaState::zeros(self.acq);
        let mut elapsed = 0.0;
        for iter in 0..iterations {
            let start = Instant::now();
            self.step(&mut state)?;
            let wall = start.elapsed().as_secs_f64();
            elapsed += wall;
            let mut record = IterationRecord {
                iter,
                wall_time_s: wall,
                elapsed_s: elapsed,
                nmse_db: None,
                subband_nmse_db: None,
                tau: Vec::new(),
                tau_nmse_db: None,
                thresholds: vec![self.lambda; bands],
                lambda: vec![self.lambda; bands],
                alpha: Vec::new(),
                objective: Some(self.objective(&state.w)?),
                alpha_clamped: false,
            };
            if let Some((x0, w0)) = &truth {
                record.nmse_db = Some(nmse_db(&idwt(&state.w), x0)?);
                record.subband_nmse_db = Some(subband_nmse_db(&state.w, w0)?.values);
            }
            trace.records.push(record);
        }
        Ok(BaselineOutput {
            image: idwt(&state.w),
            trace,
            w_hat: state.w,
        })
    }
}

/// Convenience wrapper around [`Fista::run`].
pub fn fista(
    acq: &Acquisition,
    lambda: f64,
    iterations: usize,
    ground_truth: Option<&ComplexImage>,
) -> Result<BaselineOutput> {
    Fista::new(acq, lambda)?.run(iterations, ground_truth)
}

/// Log-spaced grid of `points` values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    pub best_lambda: f64,
    pub best_nmse_db: f64,
    /// `(λ, NMSE dB at the budget)`, ascending in λ.
    pub evaluations: Vec<(f64, f64)>,
}

/// Exhaustive search for the λ minimizing FISTA's NMSE after `budget` iterations.
///
/// Grid points are evaluated in parallel; ties go to the smaller λ.
pub fn tune_lambda(acq: &Acquisition, truth: &ComplexImage, budget: usize, grid: &[f64]) -> Result<LambdaSearch> {
    if grid.is_empty() {
        return Err(invalid("grid", "lambda grid is empty"));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let evaluations = sorted
        .par_iter()
        .map(|&lambda| {
            let solver = Fista::new(acq, lambda)?;
            let mut state = FistaState::zeros(acq);
            for _ in 0..budget {
                solver.step(&mut state)?;
            }
            Ok((lambda, nmse_db(&idwt(&state.w), truth)?))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let mut best = evaluations[0];
    for &e in &evaluations[1..] {
        if e.1 < best.1 {
            best = e;
        }
    }
    Ok(LambdaSearch {
        best_lambda: best.0,
        best_nmse_db: best.1,
        evaluations,
    })
}

/// SURE-IT: FISTA whose shrinkage is SURE-tuned soft thresholding under a
/// white noise model, with `τ_k = ‖w₀ - r_k‖² / N` taken from the truth.
///
/// No density compensation and no Onsager correction.
pub fn sure_it(acq: &Acquisition, truth: Option<&ComplexImage>, iterations: usize) -> Result<BaselineOutput> {
    sure_it_with(acq, truth, iterations, |_, _| {})
}

/// [`sure_it`], calling `observe(k, r_k)` with each gradient-step estimate.
pub fn sure_it_with(
    acq: &Acquisition,
    truth: Option<&ComplexImage>,
    iterations: usize,
    mut observe: impl FnMut(usize, &WaveletCoeffs),
) -> Result<BaselineOutput> {
    let x0 = truth.ok_or(Error::MissingGroundTruth("SURE-IT sets its error variance from the true image"))?;
    if iterations == 0 {
        return Err(invalid("iterations", "at least one iteration is required"));
    }
    let w0 = acq.analyze(x0)?;
    let bands = acq.layout.num_subbands();
    let n = acq.layout.len() as f64;

    let mut trace = RunTrace::new("sure_it");
    let mut w = WaveletCoeffs::zeros(&acq.layout);
    let mut v = WaveletCoeffs::zeros(&acq.layout);
    let mut t = 1.0;
    let mut elapsed = 0.0;
    for iter in 0..iterations {
        let start = Instant::now();
        let r = gradient_step(acq, &v)?;
        let tau_k = crate::image::dist_sqr(r.as_slice(), w0.as_slice()) / n;
        let tau = SubbandVector::filled(Quantity::Variance, bands, tau_k);
        let den = denoise_colored_allow_zero(&r, &tau)?;
        let t_next = next_momentum(t);
        v = extrapolate(&den.estimate, &w, (t - 1.0) / t_next);
        w = den.estimate;
        t = t_next;
        let wall = start.elapsed().as_secs_f64();
        elapsed += wall;

        trace.records.push(IterationRecord {
            iter,
            wall_time_s: wall,
            elapsed_s: elapsed,
            nmse_db: Some(nmse_db(&idwt(&w), x0)?),
            subband_nmse_db: Some(subband_nmse_db(&r, &w0)?.values),
            tau: tau.values,
            tau_nmse_db: None,
            thresholds: den.thresholds.values,
            lambda: den.lambda.values,
            alpha: den.alpha.values,
            objective: None,
            alpha_clamped: false,
        });
        observe(iter, &r);
    }
    Ok(BaselineOutput {
        image: idwt(&w),
        trace,
        w_hat: w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{Fourier2d, KSpaceData, SamplingMask};
    use crate::sampling::shepp_logan;
    use crate::wavelet::SubbandLayout;
    use std::sync::Arc;

    fn full_acq(size: usize) -> (Acquisition, ComplexImage) {
        let x0 = shepp_logan(size, size).unwrap();
        let fourier = Arc::new(Fourier2d::new(size, size).unwrap());
        let layout = Arc::new(SubbandLayout::new(size, size, 2).unwrap());
        let mask = Arc::new(SamplingMask::full(size, size));
        let y = fourier.forward(&x0, &mask).unwrap();
        let data = KSpaceData::new(y, 0.0, &mask).unwrap();
        (Acquisition::new(fourier, layout, mask, data).unwrap(), x0)
    }

    #[test]
    fn momentum_sequence() {
        let t2 = next_momentum(1.0);
        assert!((t2 - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn fista_tiny_lambda_recovers_truth() {
        let (acq, x0) = full_acq(32);
        let out = fista(&acq, 1e-12, 50, Some(&x0)).unwrap();
        let err = crate::image::dist_sqr(out.image.as_slice(), x0.as_slice()).sqrt();
        assert!(err <= 1e-6 * x0.norm(), "err {err}");
        assert_eq!(out.trace.len(), 50);
    }

    #[test]
    fn fista_rejects_bad_lambda() {
        let (acq, _) = full_acq(16);
        assert!(Fista::new(&acq, 0.0).is_err());
        assert!(Fista::new(&acq, -1.0).is_err());
        let cfg = BaselineConfig { algorithm: BaselineAlgorithm::Fista, lambda: None, iterations: 5 };
        assert!(cfg.validate().is_err());
        let cfg = BaselineConfig { algorithm: BaselineAlgorithm::SureIt, lambda: None, iterations: 5 };
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn sure_it_full_sampling_is_exact() {
        let (acq, x0) = full_acq(32);
        let out = sure_it(&acq, Some(&x0), 1).unwrap();
        assert!(out.trace.records[0].tau[0] <= 1e-28 * x0.norm_sqr() / x0.len() as f64);
        let err = crate::image::dist_sqr(out.image.as_slice(), x0.as_slice()).sqrt();
        assert!(err <= 1e-10 * x0.norm());
        assert!(matches!(sure_it(&acq, None, 3), Err(Error::MissingGroundTruth(_))));
    }

    #[test]
    fn tune_lambda_single_point_and_empty() {
        let (acq, x0) = full_acq(16);
        let s = tune_lambda(&acq, &x0, 3, &[0.01]).unwrap();
        assert_eq!(s.best_lambda, 0.01);
        assert!(tune_lambda(&acq, &x0, 3, &[]).is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-4, 1e-1, 4);
        assert_eq!(g.len(), 4);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[3] - 1e-1).abs() < 1e-15);
        assert!((g[1] - 1e-3).abs() < 1e-15);
    }
}
