//! Read-only metrics: NMSE, per-subband NMSE, QQ data and moment statistics
//! of effective-noise residuals.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::denoise::{Quantity, SubbandVector};
use crate::error::{invalid, Error, Result};
use crate::image::ComplexImage;
use crate::wavelet::WaveletCoeffs;

/// Reported in place of `-∞ dB` when the error is exactly zero.
pub const DB_FLOOR: f64 = -320.0;

/// Converts a ratio to decibels, flooring at [`DB_FLOOR`].
pub fn to_db(ratio: f64) -> f64 {
    if ratio <= 0.0 {
        DB_FLOOR
    } else {
        (10.0 * ratio.log10()).max(DB_FLOOR)
    }
}

/// `10 log₁₀(‖x̂ - x₀‖² / ‖x₀‖²)`.
pub fn nmse_db(estimate: &ComplexImage, truth: &ComplexImage) -> Result<f64> {
    estimate.check_shape(truth.height(), truth.width())?;
    let energy = truth.norm_sqr();
    if energy == 0.0 {
        return Err(Error::Degenerate("reference image is zero".into()));
    }
    Ok(to_db(crate::image::dist_sqr(estimate.as_slice(), truth.as_slice()) / energy))
}

/// Per-subband `10 log₁₀(‖r_j - w₀_j‖² / ‖w₀_j‖²)`.
///
/// A subband whose reference energy is zero reports `NaN` as its sentinel.
pub fn subband_nmse_db(r: &WaveletCoeffs, truth: &WaveletCoeffs) -> Result<SubbandVector> {
    r.check_layout(truth.layout())?;
    let values = r
        .subbands()
        .zip(truth.subbands())
        .map(|(a, b)| {
            let energy = crate::image::norm_sqr(b);
            if energy == 0.0 {
                f64::NAN
            } else {
                to_db(crate::image::dist_sqr(a, b) / energy)
            }
        })
        .collect();
    Ok(SubbandVector::new(Quantity::Variance, values))
}

/// Per-subband mean squared error `‖r_j - w₀_j‖² / N_j`.
pub fn subband_mse(r: &WaveletCoeffs, truth: &WaveletCoeffs) -> Result<Vec<f64>> {
    r.check_layout(truth.layout())?;
    Ok(r.subbands()
        .zip(truth.subbands())
        .map(|(a, b)| crate::image::dist_sqr(a, b) / a.len() as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Real,
    Imag,
}

impl Component {
    pub fn name(self) -> &'static str {
        match self {
            Component::Real => "real",
            Component::Imag => "imag",
        }
    }
}

/// Quantile pairs of standardized residuals against a standard Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QQData {
    pub subband: Option<usize>,
    pub component: Component,
    /// `(theoretical, empirical)` pairs, ascending in the theoretical quantile.
    pub pairs: Vec<(f64, f64)>,
    /// Pearson correlation of the pairs.
    pub correlation: f64,
}

/// Inverse of the standard normal CDF.
///
/// Acklam's rational approximation; relative error below 1.2e-9 over (0, 1).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (mx, my) = pairs
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Empirical quantile of sorted data at probability `p` (linear interpolation
/// between order statistics at positions `(i - 0.5)/n`).
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let pos = p * n as f64 - 0.5;
    if pos <= 0.0 {
        return sorted[0];
    }
    let lo = pos.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
}

/// QQ data for one real component.
pub fn qq_component(values: &[f64], n_quantiles: usize, component: Component) -> Result<QQData> {
    if n_quantiles < 10 {
        return Err(invalid("n_quantiles", format!("need at least 10, got {n_quantiles}")));
    }
    if values.len() < n_quantiles {
        return Err(invalid(
            "residual",
            format!("{} samples is fewer than {n_quantiles} quantiles", values.len()),
        ));
    }
    let (mean, std) = mean_std(values);
    if !(std > 0.0) {
        return Err(Error::Degenerate(format!("{} component has zero variance", component.name())));
    }
    let mut sorted: Vec<f64> = values.iter().map(|v| (v - mean) / std).collect();
    sorted.sort_unstable_by(f64::total_cmp);
    let pairs: Vec<(f64, f64)> = (1..=n_quantiles)
        .map(|i| {
            let p = (i as f64 - 0.5) / n_quantiles as f64;
            (inverse_normal_cdf(p), sorted_quantile(&sorted, p))
        })
        .collect();
    let correlation = pearson(&pairs);
    Ok(QQData { subband: None, component, pairs, correlation })
}

/// QQ data of the real and imaginary parts of a complex residual.
pub fn qq_data(residual: &[Complex64], n_quantiles: usize) -> Result<[QQData; 2]> {
    let re: Vec<f64> = residual.iter().map(|c| c.re).collect();
    let im: Vec<f64> = residual.iter().map(|c| c.im).collect();
    Ok([
        qq_component(&re, n_quantiles, Component::Real)?,
        qq_component(&im, n_quantiles, Component::Imag)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianityStats {
    pub excess_kurtosis_real: f64,
    pub excess_kurtosis_imag: f64,
    pub skew_real: f64,
    pub skew_imag: f64,
    /// Sample correlation between real and imaginary parts.
    pub real_imag_correlation: f64,
}

impl GaussianityStats {
    pub fn max_abs_excess_kurtosis(&self) -> f64 {
        self.excess_kurtosis_real.abs().max(self.excess_kurtosis_imag.abs())
    }
}

fn moments(values: &[f64]) -> Option<(f64, f64, f64)> {
    let (mean, std) = mean_std(values);
    if !(std > 0.0) {
        return None;
    }
    let n = values.len() as f64;
    let (mut m3, mut m4) = (0.0, 0.0);
    for v in values {
        let d = (v - mean) / std;
        let d2 = d * d;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    Some((mean, m3 / n, m4 / n - 3.0))
}

/// Moment-based skewness, excess kurtosis and real/imaginary correlation.
pub fn gaussianity_stats(residual: &[Complex64]) -> Result<GaussianityStats> {
    if residual.len() < 100 {
        return Err(invalid("residual", format!("need at least 100 samples, got {}", residual.len())));
    }
    let re: Vec<f64> = residual.iter().map(|c| c.re).collect();
    let im: Vec<f64> = residual.iter().map(|c| c.im).collect();
    let (_, skew_real, excess_kurtosis_real) =
        moments(&re).ok_or_else(|| Error::Degenerate("real part has zero variance".into()))?;
    let (_, skew_imag, excess_kurtosis_imag) =
        moments(&im).ok_or_else(|| Error::Degenerate("imaginary part has zero variance".into()))?;
    let pairs: Vec<(f64, f64)> = re.into_iter().zip(im).collect();
    Ok(GaussianityStats {
        excess_kurtosis_real,
        excess_kurtosis_imag,
        skew_real,
        skew_imag,
        real_imag_correlation: pearson(&pairs),
    })
}
