//! Runs every (undersampling factor, algorithm) cell of a configuration and
//! writes the artifact directory.
//!
//! Layout of `out/`:
//!
//! ```text
//! phantom.bin/.json         ground truth
//! r4/pmap.bin/.json         sampling probabilities (centered grid)
//! r4/mask.bin/.json         sampled positions as 0/1
//! r4/vdamp.bin/.json        final reconstruction, one per algorithm
//! trace.csv qq.csv          long-format diagnostics, reproducible byte for byte
//! timing.csv                wall times
//! config.toml               effective configuration
//! manifest.json             written last
//! ```

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use vdamp::baselines::{fista, log_grid, sure_it, tune_lambda};
use vdamp::diagnostics::{gaussianity_stats, qq_data};
use vdamp::export::{self, QQRow, TraceRow};
use vdamp::rng::SeedTree;
use vdamp::sampling::shepp_logan;
use vdamp::vdamp::Vdamp;
use vdamp::{Acquisition, ComplexImage, RunTrace, Scene, WaveletCoeffs};

use crate::config::{run_label, ExperimentConfig};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Vdamp,
    Fista,
    SureIt,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Vdamp => "vdamp",
            Algorithm::Fista => "fista",
            Algorithm::SureIt => "sure_it",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub run_id: String,
    pub algorithm: Algorithm,
    pub undersampling: f64,
    /// `N / n` of the drawn mask.
    pub measured_undersampling: f64,
    pub iterations: usize,
    pub final_nmse_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSeeds {
    pub run: String,
    pub undersampling: f64,
    pub index: u64,
    pub mask_key: String,
    pub noise_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    /// Absent for files that legitimately differ between reruns.
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    /// The configuration exactly as `config.toml` holds it.
    pub config_toml: String,
    /// `sha256("blob <len>\0" ++ config_toml)`, the git object-hash recipe.
    pub input_hash: String,
    pub master_seed: u64,
    pub acquisitions: Vec<AcquisitionSeeds>,
    pub runs: Vec<CellSummary>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path)
            .with_context(|| format!("{} is missing; the run did not complete", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn git_style_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Index of the seed streams for one undersampling factor. Keyed on the
/// value rather than its position so adding a factor leaves the others'
/// masks untouched.
fn acquisition_index(undersampling: f64) -> u64 {
    undersampling.to_bits()
}

struct Prepared {
    undersampling: f64,
    label: String,
    scene: Scene,
    acq: Acquisition,
}

struct CellOutput {
    summary: CellSummary,
    trace_rows: Vec<TraceRow>,
    qq_rows: Vec<QQRow>,
    trace: RunTrace,
}

fn residual_diagnostics(
    cfg: &ExperimentConfig,
    run_id: &str,
    iter: usize,
    r: &WaveletCoeffs,
    w0: &WaveletCoeffs,
    trace_rows: &mut Vec<TraceRow>,
    qq_rows: &mut Vec<QQRow>,
) {
    for (j, band) in r.layout().subbands().iter().enumerate() {
        let label = band.label();
        let resid: Vec<_> = r
            .subband_view(j)
            .expect("subband of own layout")
            .iter()
            .zip(w0.subband_view(j).expect("subband of own layout"))
            .map(|(a, b)| a - b)
            .collect();
        let quantiles = cfg.diagnostics.qq_quantiles.min(resid.len());
        // Subbands too small or exactly recovered have no meaningful
        // distribution to report.
        let Ok(qq) = qq_data(&resid, quantiles) else { continue };
        for q in &qq {
            qq_rows.extend(export::qq_rows(run_id, iter, &label, q));
        }
        if let Ok(stats) = gaussianity_stats(&resid) {
            trace_rows.extend(export::gaussianity_rows(run_id, iter, &label, &stats, &qq));
        }
    }
}

fn run_cell(cfg: &ExperimentConfig, prep: &Prepared, algorithm: Algorithm, out: &Path) -> Result<CellOutput> {
    let run_id = format!("{}/{}", prep.label, algorithm.name());
    let truth = &prep.scene.truth;
    let acq = &prep.acq;
    let mut qq_rows = Vec::new();
    let mut diag_rows = Vec::new();
    let mut lambda = None;

    let (image, trace, iterations) = match algorithm {
        Algorithm::Vdamp => {
            let iterations = cfg.algorithms.vdamp.as_ref().expect("selected").iterations;
            let w0 = prep.scene.truth_coeffs()?;
            let solver = Vdamp::new(acq, &prep.scene.pmap)?;
            let out = solver.run_with(iterations, Some(truth), |state| {
                let iter = state.k - 1;
                if cfg.diagnostics.qq_iterations.contains(&iter) {
                    residual_diagnostics(cfg, &run_id, iter, &state.r, &w0, &mut diag_rows, &mut qq_rows);
                }
            })?;
            (out.image, out.trace, iterations)
        }
        Algorithm::Fista => {
            let fc = cfg.algorithms.fista.as_ref().expect("selected");
            let chosen = match fc.lambda {
                Some(l) => l,
                None => {
                    let g = &fc.lambda_grid;
                    tune_lambda(acq, truth, fc.iterations, &log_grid(g.min, g.max, g.points))?.best_lambda
                }
            };
            lambda = Some(chosen);
            let out = fista(acq, chosen, fc.iterations, Some(truth))?;
            (out.image, out.trace, fc.iterations)
        }
        Algorithm::SureIt => {
            let iterations = cfg.algorithms.sure_it.as_ref().expect("selected").iterations;
            let out = sure_it(acq, Some(truth), iterations)?;
            (out.image, out.trace, iterations)
        }
    };

    let final_nmse_db = trace.final_nmse_db().context("trace has no ground-truth metrics")?;
    let image_rel = format!("{}/{}.bin", prep.label, algorithm.name());
    export::write_complex_image(
        &out.join(&prep.label).join(algorithm.name()),
        &image,
        json!({
            "run_id": run_id,
            "algorithm": algorithm.name(),
            "undersampling": prep.undersampling,
            "iterations": iterations,
            "lambda": lambda,
            "master_seed": cfg.run.seed,
            "final_nmse_db": final_nmse_db,
        }),
    )?;

    let mut trace_rows = export::trace_rows(&run_id, &trace, &acq.layout);
    trace_rows.extend(diag_rows);
    Ok(CellOutput {
        summary: CellSummary {
            run_id,
            algorithm,
            undersampling: prep.undersampling,
            measured_undersampling: acq.mask.undersampling_factor(),
            iterations,
            final_nmse_db,
            lambda,
            image: image_rel,
        },
        trace_rows,
        qq_rows,
        trace,
    })
}

fn write_inputs(out: &Path, truth: &ComplexImage, preps: &[Prepared], seed: u64) -> Result<()> {
    export::write_complex_image(&out.join("phantom"), truth, json!({ "phantom": "shepp_logan" }))?;
    for p in preps {
        let dir = out.join(&p.label);
        let (h, w) = truth.shape();
        let meta = json!({ "undersampling": p.undersampling, "master_seed": seed, "grid": "centered" });
        export::write_real_array(&dir.join("pmap"), h, w, p.scene.pmap.probs(), meta.clone())?;
        let mask: Vec<f64> = p.acq.mask.sampled().iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
        export::write_real_array(&dir.join("mask"), h, w, &mask, meta)?;
    }
    Ok(())
}

fn selected(cfg: &ExperimentConfig) -> Vec<Algorithm> {
    let a = &cfg.algorithms;
    [
        (a.vdamp.is_some(), Algorithm::Vdamp),
        (a.fista.is_some(), Algorithm::Fista),
        (a.sure_it.is_some(), Algorithm::SureIt),
    ]
    .into_iter()
    .filter_map(|(on, alg)| on.then_some(alg))
    .collect()
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub cells: Vec<CellSummary>,
}

/// Runs the experiment into `cfg.run.output_dir`. The configuration must be
/// free of violations.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let violations = cfg.violations();
    if !violations.is_empty() {
        bail!("invalid configuration:\n  {}", violations.join("\n  "));
    }
    let out = cfg.run.output_dir.clone();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    // The manifest marks a complete run; drop any stale one first.
    let manifest_path = out.join(MANIFEST);
    if manifest_path.exists() {
        fs::remove_file(&manifest_path)?;
    }

    let seeds = SeedTree::new(cfg.run.seed);
    let size = cfg.phantom.size;
    let truth = shepp_logan(size, size)?;
    let preps = cfg
        .acquisition
        .undersampling
        .iter()
        .map(|&r| {
            let scene = Scene::new(truth.clone(), cfg.wavelet.scales, cfg.density.params(r), cfg.acquisition.snr_db)?;
            let acq = scene.acquire(&seeds, acquisition_index(r))?;
            Ok(Prepared { undersampling: r, label: run_label(r), scene, acq })
        })
        .collect::<Result<Vec<_>>>()?;
    write_inputs(&out, &truth, &preps, cfg.run.seed)?;

    let cells: Vec<(usize, Algorithm)> = (0..preps.len())
        .flat_map(|i| selected(cfg).into_iter().map(move |a| (i, a)))
        .collect();
    let outputs = cells
        .par_iter()
        .map(|&(i, alg)| {
            run_cell(cfg, &preps[i], alg, &out).with_context(|| format!("{} at R = {}", alg.name(), preps[i].undersampling))
        })
        .collect::<Result<Vec<_>>>()?;

    let trace_rows: Vec<TraceRow> = outputs.iter().flat_map(|o| o.trace_rows.iter().cloned()).collect();
    export::write_trace_csv(BufWriter::new(File::create(out.join("trace.csv"))?), &trace_rows)?;
    let qq_rows: Vec<QQRow> = outputs.iter().flat_map(|o| o.qq_rows.iter().cloned()).collect();
    export::write_qq_csv(BufWriter::new(File::create(out.join("qq.csv"))?), &qq_rows)?;
    let timings: Vec<(String, &RunTrace)> = outputs.iter().map(|o| (o.summary.run_id.clone(), &o.trace)).collect();
    export::write_timing_csv(BufWriter::new(File::create(out.join("timing.csv"))?), &timings)?;
    let config_toml = cfg.to_toml();
    fs::write(out.join("config.toml"), &config_toml)?;

    let mut files = vec!["phantom.bin".to_owned(), "phantom.json".to_owned()];
    for p in &preps {
        for stem in ["pmap", "mask"] {
            files.push(format!("{}/{stem}.bin", p.label));
            files.push(format!("{}/{stem}.json", p.label));
        }
    }
    for o in &outputs {
        files.push(o.summary.image.clone());
        files.push(o.summary.image.replace(".bin", ".json"));
    }
    files.extend(["trace.csv", "qq.csv", "config.toml"].map(String::from));
    let mut entries = files
        .into_iter()
        .map(|path| {
            let sha256 = Some(file_sha256(&out.join(&path))?);
            Ok(FileEntry { path, sha256 })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.push(FileEntry { path: "timing.csv".into(), sha256: None });

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        input_hash: git_style_hash(config_toml.as_bytes()),
        config_toml,
        master_seed: cfg.run.seed,
        acquisitions: preps
            .iter()
            .map(|p| {
                let index = acquisition_index(p.undersampling);
                AcquisitionSeeds {
                    run: p.label.clone(),
                    undersampling: p.undersampling,
                    index,
                    mask_key: hex::encode(seeds.key("mask", index)),
                    noise_key: hex::encode(seeds.key("noise", index)),
                }
            })
            .collect(),
        runs: outputs.iter().map(|o| o.summary.clone()).collect(),
        files: entries,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&manifest_path, json + "\n")?;

    Ok(RunSummary {
        out_dir: out,
        cells: manifest.runs,
    })
}

/// Files recorded in the manifest of a completed run, relative to `dir`.
pub fn list_outputs(dir: &Path) -> Result<Vec<String>> {
    let manifest = Manifest::load(dir)?;
    let mut files: Vec<String> = manifest.files.into_iter().map(|f| f.path).collect();
    files.push(MANIFEST.to_owned());
    Ok(files)
}
