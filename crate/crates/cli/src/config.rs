//! Experiment configuration (TOML).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use vdamp::sampling::polynomial_pmap;
use vdamp::{DensityParams, SubbandLayout};

/// Smallest phantom the ellipse table renders sensibly.
const MIN_SIZE: usize = 16;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub phantom: PhantomConfig,
    pub wavelet: WaveletConfig,
    pub acquisition: AcquisitionConfig,
    pub density: DensityConfig,
    pub algorithms: AlgorithmsConfig,
    pub diagnostics: DiagnosticsConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomConfig {
    /// Side length of the square Shepp-Logan phantom.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveletConfig {
    pub scales: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionConfig {
    /// `‖F x₀‖² / (N σ²)` in dB; `inf` for noiseless data.
    pub snr_db: f64,
    pub undersampling: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityConfig {
    pub degree: f64,
    pub center_radius: f64,
    pub p_min: f64,
}

/// All three run when the `[algorithms]` table is absent; when present,
/// only the listed ones do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vdamp: Option<IterationsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fista: Option<FistaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sure_it: Option<IterationsConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationsConfig {
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FistaConfig {
    pub iterations: usize,
    /// Fixed weight; when absent, λ is tuned on `lambda_grid` against the
    /// ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub lambda_grid: LambdaGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LambdaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// VDAMP iterations whose effective noise is exported as QQ data.
    pub qq_iterations: Vec<usize>,
    pub qq_quantiles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self { size: 512 }
    }
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self { scales: 4 }
    }
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            snr_db: 40.0,
            undersampling: vec![4.0, 6.0, 8.0],
        }
    }
}

impl Default for DensityConfig {
    fn default() -> Self {
        let d = DensityParams::default();
        Self {
            degree: d.degree,
            center_radius: d.center_radius,
            p_min: d.p_min,
        }
    }
}

impl Default for AlgorithmsConfig {
    fn default() -> Self {
        Self {
            vdamp: Some(IterationsConfig { iterations: 30 }),
            fista: Some(FistaConfig {
                iterations: 30,
                lambda: None,
                lambda_grid: LambdaGrid::default(),
            }),
            sure_it: Some(IterationsConfig { iterations: 30 }),
        }
    }
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self {
            min: 1e-4,
            max: 1e-1,
            points: 15,
        }
    }
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            qq_iterations: vec![0, 1, 2],
            qq_quantiles: 200,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 2020,
            output_dir: PathBuf::from("runs/default"),
            threads: None,
        }
    }
}

impl DensityConfig {
    pub fn params(&self, undersampling: f64) -> DensityParams {
        DensityParams {
            degree: self.degree,
            center_radius: self.center_radius,
            undersampling,
            p_min: self.p_min,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    /// Every constraint violation, without running anything.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let size = self.phantom.size;
        if size < MIN_SIZE {
            out.push(format!("phantom.size: {size} is below the minimum of {MIN_SIZE}"));
        }
        let layout_ok = match SubbandLayout::new(size, size, self.wavelet.scales) {
            Ok(_) => true,
            Err(vdamp::Error::NotDivisible { scales, .. }) => {
                out.push(format!(
                    "phantom.size: {size} is not divisible by 2^{scales} = {} (wavelet.scales = {scales})",
                    1usize << scales
                ));
                false
            }
            Err(e) => {
                out.push(format!("wavelet.scales: {e}"));
                false
            }
        };
        if self.acquisition.snr_db.is_nan() || self.acquisition.snr_db == f64::NEG_INFINITY {
            out.push(format!("acquisition.snr_db: {} is not a usable SNR", self.acquisition.snr_db));
        }
        if self.acquisition.undersampling.is_empty() {
            out.push("acquisition.undersampling: no undersampling factors given".into());
        }
        let mut seen = Vec::new();
        for &r in &self.acquisition.undersampling {
            if !(r >= 1.0 && r.is_finite()) {
                out.push(format!("acquisition.undersampling: undersampling factor < 1 ({r})"));
                continue;
            }
            if seen.contains(&run_label(r)) {
                out.push(format!("acquisition.undersampling: {r} is listed twice"));
                continue;
            }
            seen.push(run_label(r));
            let params = self.density.params(r);
            match params.validate() {
                Err(e) => out.push(format!("density: {e}")),
                Ok(()) if layout_ok && size >= MIN_SIZE => {
                    if let Err(e) = polynomial_pmap(size, size, params) {
                        out.push(format!("density at R = {r}: {e}"));
                    }
                }
                Ok(()) => {}
            }
        }

        let algs = &self.algorithms;
        if algs.vdamp.is_none() && algs.fista.is_none() && algs.sure_it.is_none() {
            out.push("algorithms: nothing selected".into());
        }
        for (name, iters) in [
            ("vdamp", algs.vdamp.as_ref().map(|c| c.iterations)),
            ("fista", algs.fista.as_ref().map(|c| c.iterations)),
            ("sure_it", algs.sure_it.as_ref().map(|c| c.iterations)),
        ] {
            if iters == Some(0) {
                out.push(format!("algorithms.{name}.iterations: must be >= 1"));
            }
        }
        if let Some(f) = &algs.fista {
            match f.lambda {
                Some(l) if !(l > 0.0 && l.is_finite()) => {
                    out.push(format!("algorithms.fista.lambda: must be > 0, got {l}"));
                }
                Some(_) => {}
                None => {
                    let g = &f.lambda_grid;
                    if !(g.min > 0.0 && g.max >= g.min && g.max.is_finite()) {
                        out.push(format!(
                            "algorithms.fista.lambda_grid: need 0 < min <= max, got [{}, {}]",
                            g.min, g.max
                        ));
                    }
                    if g.points == 0 {
                        out.push("algorithms.fista.lambda_grid.points: must be >= 1".into());
                    }
                }
            }
        }
        if self.diagnostics.qq_quantiles < 10 {
            out.push(format!(
                "diagnostics.qq_quantiles: need at least 10, got {}",
                self.diagnostics.qq_quantiles
            ));
        }
        if self.run.threads == Some(0) {
            out.push("run.threads: must be >= 1".into());
        }
        out
    }
}

/// Directory and run-id prefix for one undersampling factor, e.g. `r4`,
/// `r6.5`.
pub fn run_label(undersampling: f64) -> String {
    format!("r{undersampling}")
}

/// Outcome of `validate`: parse errors are reported as a single violation
/// carrying the parser's line and column.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_config(path: &Path) -> Result<ValidationReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let violations = match ExperimentConfig::from_toml(&text) {
        Ok(cfg) => cfg.violations(),
        Err(e) => vec![format!("{}: {e}", path.display())],
    };
    Ok(ValidationReport { violations })
}
