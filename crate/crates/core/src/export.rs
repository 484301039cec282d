//! File formats shared with downstream tooling.
//!
//! * Flat binary arrays: little-endian `f64`, row-major. Complex arrays are
//!   interleaved `(re, im)`. Each `<stem>.bin` has a `<stem>.json` sidecar
//!   with `height`, `width`, `dtype` and free-form `meta`.
//! * `trace.csv`: long format `run_id,iter,metric,subband,component,value`.
//! * `qq.csv`: `run_id,iter,subband,component,q_theory,q_emp`.
//! * `timing.csv`: `run_id,iter,wall_time_s,elapsed_s`, kept apart so the
//!   other CSVs are reproducible byte for byte.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{GaussianityStats, QQData};
use crate::error::{Error, Result};
use crate::image::ComplexImage;
use crate::trace::RunTrace;
use crate::wavelet::SubbandLayout;

pub const TRACE_HEADER: [&str; 6] = ["run_id", "iter", "metric", "subband", "component", "value"];
pub const QQ_HEADER: [&str; 6] = ["run_id", "iter", "subband", "component", "q_theory", "q_emp"];
pub const TIMING_HEADER: [&str; 4] = ["run_id", "iter", "wall_time_s", "elapsed_s"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DType {
    Float64,
    Complex128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub height: usize,
    pub width: usize,
    pub dtype: DType,
    pub byte_order: String,
    pub meta: serde_json::Value,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn write_with_sidecar(stem: &Path, bytes: &[u8], sidecar: &Sidecar) -> Result<()> {
    if let Some(parent) = stem.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(stem.with_extension("bin"), bytes)?;
    let json = serde_json::to_string_pretty(sidecar).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(stem.with_extension("json"), json + "\n")?;
    Ok(())
}

/// Writes `<stem>.bin` (interleaved complex f64) and `<stem>.json`.
pub fn write_complex_image(stem: &Path, image: &ComplexImage, meta: serde_json::Value) -> Result<()> {
    let mut bytes = Vec::with_capacity(image.len() * 16);
    for v in image.as_slice() {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    let sidecar = Sidecar {
        height: image.height(),
        width: image.width(),
        dtype: DType::Complex128,
        byte_order: "little".into(),
        meta,
    };
    write_with_sidecar(stem, &bytes, &sidecar)
}

/// Writes `<stem>.bin` (real f64) and `<stem>.json`.
pub fn write_real_array(
    stem: &Path,
    height: usize,
    width: usize,
    values: &[f64],
    meta: serde_json::Value,
) -> Result<()> {
    if values.len() != height * width {
        return Err(Error::LengthMismatch {
            expected: height * width,
            actual: values.len(),
        });
    }
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    let sidecar = Sidecar {
        height,
        width,
        dtype: DType::Float64,
        byte_order: "little".into(),
        meta,
    };
    write_with_sidecar(stem, &bytes, &sidecar)
}

pub fn read_sidecar(stem: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(stem.with_extension("json"))?;
    serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", stem.display())))
}

fn read_f64s(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Io(format!("{}: size is not a multiple of 8", path.display())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn read_complex_image(stem: &Path) -> Result<ComplexImage> {
    let sidecar = read_sidecar(stem)?;
    if sidecar.dtype != DType::Complex128 {
        return Err(Error::Io(format!("{}: expected complex128 data", stem.display())));
    }
    let raw = read_f64s(&stem.with_extension("bin"))?;
    let data = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    ComplexImage::from_vec(sidecar.height, sidecar.width, data)
}

pub fn read_real_array(stem: &Path) -> Result<(Sidecar, Vec<f64>)> {
    let sidecar = read_sidecar(stem)?;
    if sidecar.dtype != DType::Float64 {
        return Err(Error::Io(format!("{}: expected float64 data", stem.display())));
    }
    let values = read_f64s(&stem.with_extension("bin"))?;
    if values.len() != sidecar.height * sidecar.width {
        return Err(Error::LengthMismatch {
            expected: sidecar.height * sidecar.width,
            actual: values.len(),
        });
    }
    Ok((sidecar, values))
}

/// One row of the long-format trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub run_id: String,
    pub iter: usize,
    pub metric: String,
    pub subband: String,
    pub component: String,
    pub value: f64,
}

/// Flattens a trace into long-format rows (wall times excluded).
pub fn trace_rows(run_id: &str, trace: &RunTrace, layout: &SubbandLayout) -> Vec<TraceRow> {
    let labels: Vec<String> = layout.subbands().iter().map(|b| b.label()).collect();
    let mut rows = Vec::new();
    let mut push = |iter: usize, metric: &str, subband: &str, component: &str, value: f64| {
        rows.push(TraceRow {
            run_id: run_id.to_owned(),
            iter,
            metric: metric.to_owned(),
            subband: subband.to_owned(),
            component: component.to_owned(),
            value,
        });
    };
    for rec in &trace.records {
        if let Some(v) = rec.nmse_db {
            push(rec.iter, "nmse_db", "all", "image", v);
        }
        if let Some(v) = rec.objective {
            push(rec.iter, "objective", "all", "", v);
        }
        push(rec.iter, "alpha_clamped", "all", "", if rec.alpha_clamped { 1.0 } else { 0.0 });
        let per_band: [(&str, &str, Option<&Vec<f64>>); 6] = [
            ("subband_nmse_db", "r", rec.subband_nmse_db.as_ref()),
            ("tau", "", Some(&rec.tau)),
            ("tau_nmse_db", "r", rec.tau_nmse_db.as_ref()),
            ("threshold", "", Some(&rec.thresholds)),
            ("lambda", "", Some(&rec.lambda)),
            ("alpha", "", Some(&rec.alpha)),
        ];
        for (metric, component, values) in per_band {
            if let Some(values) = values {
                for (label, &v) in labels.iter().zip(values) {
                    push(rec.iter, metric, label, component, v);
                }
            }
        }
    }
    rows
}

/// Gaussianity statistics of one subband residual as long-format rows.
pub fn gaussianity_rows(run_id: &str, iter: usize, subband: &str, stats: &GaussianityStats, qq: &[QQData]) -> Vec<TraceRow> {
    let row = |metric: &str, component: &str, value: f64| TraceRow {
        run_id: run_id.to_owned(),
        iter,
        metric: metric.to_owned(),
        subband: subband.to_owned(),
        component: component.to_owned(),
        value,
    };
    let mut rows = vec![
        row("excess_kurtosis", "real", stats.excess_kurtosis_real),
        row("excess_kurtosis", "imag", stats.excess_kurtosis_imag),
        row("skew", "real", stats.skew_real),
        row("skew", "imag", stats.skew_imag),
        row("real_imag_corr", "", stats.real_imag_correlation),
    ];
    rows.extend(qq.iter().map(|q| row("qq_corr", q.component.name(), q.correlation)));
    rows
}

/// Writes rows with the [`TRACE_HEADER`] columns.
pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.run_id.as_str(),
            &r.iter.to_string(),
            &r.metric,
            &r.subband,
            &r.component,
            &r.value.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(TRACE_HEADER) {
        return Err(Error::Io(format!("{}: unexpected header {:?}", path.display(), headers)));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QQRow {
    pub run_id: String,
    pub iter: usize,
    pub subband: String,
    pub component: String,
    pub q_theory: f64,
    pub q_emp: f64,
}

pub fn qq_rows(run_id: &str, iter: usize, subband: &str, qq: &QQData) -> Vec<QQRow> {
    qq.pairs
        .iter()
        .map(|&(q_theory, q_emp)| QQRow {
            run_id: run_id.to_owned(),
            iter,
            subband: subband.to_owned(),
            component: qq.component.name().to_owned(),
            q_theory,
            q_emp,
        })
        .collect()
}

pub fn write_qq_csv<W: Write>(out: W, rows: &[QQRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(QQ_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.run_id.as_str(),
            &r.iter.to_string(),
            &r.subband,
            &r.component,
            &r.q_theory.to_string(),
            &r.q_emp.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_qq_csv(path: &Path) -> Result<Vec<QQRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(QQ_HEADER) {
        return Err(Error::Io(format!("{}: unexpected header {:?}", path.display(), headers)));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn write_timing_csv<W: Write>(out: W, runs: &[(String, &RunTrace)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TIMING_HEADER).map_err(csv_err)?;
    for (run_id, trace) in runs {
        for rec in &trace.records {
            w.write_record([
                run_id.as_str(),
                &rec.iter.to_string(),
                &rec.wall_time_s.to_string(),
                &rec.elapsed_s.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `dir/name`, creating `dir` if needed.
pub fn prepare(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::IterationRecord;

    #[test]
    fn complex_image_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = ComplexImage::from_fn(4, 8, |r, c| Complex64::new(r as f64, -(c as f64) * 0.5));
        let stem = dir.path().join("img");
        write_complex_image(&stem, &img, serde_json::json!({"seed": 3})).unwrap();
        assert_eq!(std::fs::metadata(stem.with_extension("bin")).unwrap().len(), 4 * 8 * 16);
        let side = read_sidecar(&stem).unwrap();
        assert_eq!((side.height, side.width, side.dtype), (4, 8, DType::Complex128));
        assert_eq!(side.meta["seed"], 3);
        assert_eq!(read_complex_image(&stem).unwrap(), img);
        assert!(read_real_array(&stem).is_err());
    }

    #[test]
    fn trace_csv_schema() {
        let layout = SubbandLayout::new(8, 8, 1).unwrap();
        let mut trace = RunTrace::new("vdamp");
        trace.records.push(IterationRecord {
            iter: 0,
            wall_time_s: 0.5,
            elapsed_s: 0.5,
            nmse_db: Some(-10.0),
            subband_nmse_db: Some(vec![-1.0, -2.0, -3.0, -4.0]),
            tau: vec![0.1; 4],
            tau_nmse_db: None,
            thresholds: vec![0.2; 4],
            lambda: vec![2.0; 4],
            alpha: vec![0.5; 4],
            objective: None,
            alpha_clamped: false,
        });
        let rows = trace_rows("r8/vdamp", &trace, &layout);
        // nmse + clamp flag + 5 per-band metrics x 4 subbands
        assert_eq!(rows.len(), 2 + 5 * 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(std::fs::File::create(&path).unwrap(), &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("run_id,iter,metric,subband,component,value\n"));
        assert!(text.contains("r8/vdamp,0,subband_nmse_db,s1D,r,-4\n"));
        assert!(!text.contains("0.5,"), "wall time must not leak into trace.csv");
        assert_eq!(read_trace_csv(&path).unwrap(), rows);
    }

    #[test]
    fn truncated_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qq.csv");
        std::fs::write(&path, "run_id,iter,subband\n").unwrap();
        assert!(read_qq_csv(&path).is_err());
    }
}
