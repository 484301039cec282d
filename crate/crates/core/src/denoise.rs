//! Complex soft thresholding with per-subband SURE-tuned thresholds.
//!
//! Noise model inside subband `j`: `r = w₀ + CN(0, τ_j I)`, i.e. each of the
//! `2 N_j` real coordinates carries variance `τ_j / 2`. With that reduction
//! the risk estimate of `g(r; t) = r · max(1 - t/|r|, 0)` is
//!
//! ```text
//! SURE(t) = ‖g(r;t) - r‖² - N_j τ + τ Σ_{|r_i| > t} (2 - t/|r_i|)
//! ```
//!
//! and the divergence term doubles as the Onsager coefficient:
//! `α = (1/N_j) Σ_{|r_i| > t} (1 - t/(2|r_i|))`. Entries with `|r_i| = t` map
//! to zero and contribute nothing to either sum.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::wavelet::WaveletCoeffs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Variance,
    Threshold,
    Derivative,
    Lambda,
}

/// One real number per subband.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubbandVector {
    pub quantity: Quantity,
    pub values: Vec<f64>,
}

impl SubbandVector {
    pub fn new(quantity: Quantity, values: Vec<f64>) -> Self {
        Self { quantity, values }
    }

    pub fn filled(quantity: Quantity, len: usize, value: f64) -> Self {
        Self { quantity, values: vec![value; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

impl std::ops::Index<usize> for SubbandVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(invalid("threshold", format!("{t} is negative or NaN")));
    }
    Ok(())
}

fn check_variance(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid("tau", format!("noise variance must be positive, got {tau}")));
    }
    Ok(())
}

/// `|v|` without `hypot`'s overflow guard, which costs more than the rest
/// of the denoiser combined.
#[inline]
fn magnitude(v: &Complex64) -> f64 {
    v.norm_sqr().sqrt()
}

/// Ascending magnitudes.
fn sorted_magnitudes(r: &[Complex64]) -> Vec<f64> {
    let mut mags: Vec<f64> = r.iter().map(magnitude).collect();
    radsort::sort(&mut mags);
    mags
}

#[inline]
fn shrink(v: Complex64, t: f64) -> Complex64 {
    let mag = magnitude(&v);
    if mag > t {
        v * (1.0 - t / mag)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Entrywise `r_i · max(1 - t/|r_i|, 0)`.
pub fn soft_threshold(r: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    check_threshold(t)?;
    Ok(r.iter().map(|&v| shrink(v, t)).collect())
}

pub fn soft_threshold_in_place(r: &mut [Complex64], t: f64) -> Result<()> {
    check_threshold(t)?;
    r.iter_mut().for_each(|v| *v = shrink(*v, t));
    Ok(())
}

/// Stein's unbiased estimate of `E‖g(r; t) - w₀‖²` for one subband.
pub fn sure_risk(r: &[Complex64], tau: f64, t: f64) -> Result<f64> {
    check_variance(tau)?;
    check_threshold(t)?;
    let mut residual = 0.0;
    let mut divergence = 0.0;
    for v in r {
        let mag = magnitude(v);
        if mag > t {
            residual += t * t;
            divergence += 2.0 - t / mag;
        } else {
            residual += mag * mag;
        }
    }
    Ok(residual - r.len() as f64 * tau + tau * divergence)
}

/// Threshold minimizing [`sure_risk`] over `t >= 0`.
///
/// With magnitudes sorted ascending, SURE is a convex quadratic in `t` on
/// each interval between consecutive magnitudes and drops by `τ` at each
/// magnitude. The global minimum therefore sits either at an interval's
/// left end (a data magnitude, or 0) or at an interior stationary point,
/// and all of these are scanned in one pass over prefix/suffix sums.
/// Ties resolve toward the smaller threshold.
pub fn select_threshold(r: &[Complex64], tau: f64) -> Result<f64> {
    check_variance(tau)?;
    if r.is_empty() {
        return Err(Error::Degenerate("empty subband".into()));
    }
    Ok(minimize_sorted(&sorted_magnitudes(r), tau).0)
}

/// Returns `(t*, SURE(t*))` for ascending magnitudes.
fn minimize_sorted(mags: &[f64], tau: f64) -> (f64, f64) {
    let n = mags.len();
    let nf = n as f64;

    // suffix[k] = Σ_{i >= k} 1/a_i; zero magnitudes never survive thresholding.
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + if mags[k] > 0.0 { 1.0 / mags[k] } else { 0.0 };
    }

    let mut best_t = 0.0;
    let mut best = f64::INFINITY;
    let mut consider = |t: f64, value: f64| {
        if value < best {
            best = value;
            best_t = t;
        }
    };

    let mut prefix_sq = 0.0;
    // k entries are zeroed: a_{k-1} <= t < a_k
    for k in 0..=n {
        if k > 0 {
            prefix_sq += mags[k - 1] * mags[k - 1];
        }
        let lo = if k == 0 { 0.0 } else { mags[k - 1] };
        let hi = if k == n { f64::INFINITY } else { mags[k] };
        if lo >= hi {
            continue;
        }
        let active = (n - k) as f64;
        let piece = |t: f64| prefix_sq + active * t * t - nf * tau + tau * (2.0 * active - t * suffix[k]);
        consider(lo, piece(lo));
        if active > 0.0 {
            let stationary = tau * suffix[k] / (2.0 * active);
            if stationary > lo && stationary < hi {
                consider(stationary, piece(stationary));
            }
        }
    }
    (best_t, best)
}

/// Average over the `2 N_j` real coordinates of the diagonal of the real
/// Jacobian of [`soft_threshold`].
pub fn alpha(r: &[Complex64], t: f64) -> Result<f64> {
    check_threshold(t)?;
    if r.is_empty() {
        return Err(Error::Degenerate("empty subband".into()));
    }
    let sum: f64 = r
        .iter()
        .map(magnitude)
        .filter(|&mag| mag > t)
        .map(|mag| 1.0 - t / (2.0 * mag))
        .sum();
    Ok(sum / r.len() as f64)
}

/// Output of the colored denoiser.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredDenoise {
    pub estimate: WaveletCoeffs,
    /// Per-subband mean divergence `α_j`.
    pub alpha: SubbandVector,
    /// Per-subband thresholds `t_j` applied to the coefficients.
    pub thresholds: SubbandVector,
    /// Per-subband weights `λ_j = t_j / τ_j` of the variance-normalized objective.
    pub lambda: SubbandVector,
}

/// Per-subband SURE-tuned soft thresholding under the block-white noise model.
///
/// Every `τ_j` must be positive.
pub fn denoise_colored(r: &WaveletCoeffs, tau: &SubbandVector) -> Result<ColoredDenoise> {
    if let Some(&bad) = tau.values.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(invalid("tau", format!("noise variance must be positive, got {bad}")));
    }
    denoise_colored_allow_zero(r, tau)
}

/// As [`denoise_colored`], but a subband with `τ_j = 0` is noise-free and
/// passes through unchanged (`t_j = 0`, `α_j = 1`, `λ_j = 0`).
pub(crate) fn denoise_colored_allow_zero(r: &WaveletCoeffs, tau: &SubbandVector) -> Result<ColoredDenoise> {
    let layout = r.layout();
    if tau.len() != layout.num_subbands() {
        return Err(Error::LengthMismatch {
            expected: layout.num_subbands(),
            actual: tau.len(),
        });
    }
    if let Some(&bad) = tau.values.iter().find(|&&v| !(v >= 0.0 && v.is_finite())) {
        return Err(invalid("tau", format!("noise variance must be >= 0, got {bad}")));
    }

    let mut estimate = r.clone();
    let per_band: Vec<(f64, f64)> = estimate
        .subbands_mut()
        .into_par_iter()
        .zip(tau.values.par_iter())
        .map(|(band, &tau_j)| {
            if tau_j == 0.0 {
                return (0.0, 1.0);
            }
            let (t, _) = minimize_sorted(&sorted_magnitudes(band), tau_j);
            let mut active = 0.0;
            for v in band.iter_mut() {
                let mag = magnitude(v);
                if mag > t {
                    active += 1.0 - t / (2.0 * mag);
                    *v *= 1.0 - t / mag;
                } else {
                    *v = Complex64::new(0.0, 0.0);
                }
            }
            (t, active / band.len() as f64)
        })
        .collect();

    let thresholds: Vec<f64> = per_band.iter().map(|p| p.0).collect();
    let alphas: Vec<f64> = per_band.iter().map(|p| p.1).collect();
    let lambda: Vec<f64> = thresholds
        .iter()
        .zip(&tau.values)
        .map(|(&t, &v)| if v > 0.0 { t / v } else { 0.0 })
        .collect();

    Ok(ColoredDenoise {
        estimate,
        alpha: SubbandVector::new(Quantity::Derivative, alphas),
        thresholds: SubbandVector::new(Quantity::Threshold, thresholds),
        lambda: SubbandVector::new(Quantity::Lambda, lambda),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn noise(n: usize, tau: f64, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let s = (tau / 2.0).sqrt();
        (0..n)
            .map(|_| {
                c(
                    s * rng.sample::<f64, _>(StandardNormal),
                    s * rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect()
    }

    #[test]
    fn soft_threshold_examples() {
        let r = [c(3.0, 4.0), c(0.0, 0.0), c(-1.0, 0.5)];
        assert_eq!(soft_threshold(&r, 0.0).unwrap(), r.to_vec());
        assert_eq!(soft_threshold(&[c(3.0, 4.0)], 5.0).unwrap()[0], c(0.0, 0.0));
        let half = soft_threshold(&[c(3.0, 4.0)], 2.5).unwrap()[0];
        assert!((half - c(1.5, 2.0)).norm() < 1e-15);
        assert_eq!(soft_threshold(&[c(0.0, 0.0)], 1.0).unwrap()[0], c(0.0, 0.0));
        assert!(soft_threshold(&r, -1.0).is_err());
    }

    #[test]
    fn sure_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = noise(500, 0.3, &mut rng);
        let tau = 0.3;
        let n = r.len() as f64;
        assert!((sure_risk(&r, tau, 0.0).unwrap() - n * tau).abs() < 1e-9);
        let energy: f64 = r.iter().map(|v| v.norm_sqr()).sum();
        let huge = sure_risk(&r, tau, 1e9).unwrap();
        assert!((huge - (energy - n * tau)).abs() < 1e-9);
        assert!(sure_risk(&r, 0.0, 1.0).is_err());
        assert!(sure_risk(&r, 1.0, -1.0).is_err());
    }

    #[test]
    fn pure_noise_selects_strong_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tau = 0.5;
        let r = noise(16384, tau, &mut rng);
        let t = select_threshold(&r, tau).unwrap();
        let mut mags: Vec<f64> = r.iter().map(|v| v.norm()).collect();
        mags.sort_by(f64::total_cmp);
        assert!(t >= mags[mags.len() / 2], "t = {t}");
        assert!(sure_risk(&r, tau, t).unwrap() < sure_risk(&r, tau, 0.0).unwrap());
    }

    #[test]
    fn noiseless_sparse_keeps_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r: Vec<Complex64> = (0..1000)
            .map(|_| if rng.random_bool(0.1) { c(rng.random_range(1.0..2.0), 0.5) } else { c(0.0, 0.0) })
            .collect();
        let t = select_threshold(&r, 1e-12).unwrap();
        assert!(t < 1e-6, "t = {t}");
    }

    #[test]
    fn exact_minimizer_beats_dense_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let tau = rng.random_range(0.05..2.0);
            let mut r = noise(200, tau, &mut rng);
            for v in r.iter_mut().take(20) {
                *v += c(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            }
            let t = select_threshold(&r, tau).unwrap();
            let best = sure_risk(&r, tau, t).unwrap();
            let max = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for i in 0..=5000 {
                let s = max * i as f64 / 5000.0;
                assert!(best <= sure_risk(&r, tau, s).unwrap() + 1e-9);
            }
        }
    }

    #[test]
    fn duplicated_magnitudes() {
        let r = vec![c(1.0, 0.0); 10];
        let t = select_threshold(&r, 0.1).unwrap();
        let best = sure_risk(&r, 0.1, t).unwrap();
        for i in 0..=400 {
            assert!(best <= sure_risk(&r, 0.1, i as f64 * 0.005).unwrap() + 1e-12);
        }
    }

    #[test]
    fn alpha_limits_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = noise(300, 1.0, &mut rng);
        assert_eq!(alpha(&r, 0.0).unwrap(), 1.0);
        let max = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert_eq!(alpha(&r, max).unwrap(), 0.0);
        let mut prev = 1.0;
        for i in 0..=50 {
            let a = alpha(&r, max * i as f64 / 50.0).unwrap();
            assert!((0.0..=1.0).contains(&a));
            assert!(a <= prev + 1e-15);
            prev = a;
        }
    }

    #[test]
    fn colored_denoise_rejects_bad_tau() {
        let layout = std::sync::Arc::new(crate::wavelet::SubbandLayout::new(8, 8, 1).unwrap());
        let w = WaveletCoeffs::zeros(&layout);
        let zero = SubbandVector::new(Quantity::Variance, vec![1.0, 0.0, 1.0, 1.0]);
        assert!(denoise_colored(&w, &zero).is_err());
        let short = SubbandVector::new(Quantity::Variance, vec![1.0; 3]);
        assert!(matches!(denoise_colored(&w, &short), Err(Error::LengthMismatch { .. })));
        let out = denoise_colored_allow_zero(&w, &zero).unwrap();
        assert_eq!(out.alpha[1], 1.0);
        assert_eq!(out.lambda[1], 0.0);
    }
}
