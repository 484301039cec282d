use serde::{Deserialize, Serialize};

/// Metrics recorded after one completed iteration.
///
/// Ground-truth metrics (`nmse_db`, `subband_nmse_db`, `tau_nmse_db`) are
/// present only when the run was given the true image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Time spent in this iteration, seconds. Excludes metric evaluation.
    pub wall_time_s: f64,
    /// Cumulative algorithm time up to and including this iteration.
    pub elapsed_s: f64,
    pub nmse_db: Option<f64>,
    /// NMSE of the wavelet-domain estimate `r_k` against `w₀`, per subband.
    pub subband_nmse_db: Option<Vec<f64>>,
    /// Per-subband noise variance used by the denoiser.
    pub tau: Vec<f64>,
    /// Subband NMSE predicted from `τ`: `τ_j N_j / ‖w₀_j‖²`.
    pub tau_nmse_db: Option<Vec<f64>>,
    pub thresholds: Vec<f64>,
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Penalized objective, for algorithms that minimize one.
    pub objective: Option<f64>,
    /// Set when some `α_j` hit the `1 - 1e-9` guard.
    pub alpha_clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: String,
    /// Time spent on one-off setup (e.g. the spectra of `|ΦΨᴴ|²`), seconds.
    pub setup_time_s: f64,
    pub records: Vec<IterationRecord>,
}

impl RunTrace {
    pub fn new(algorithm: impl Into<String>) -> Self {
        Self {
            algorithm: algorithm.into(),
            setup_time_s: 0.0,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn nmse_db(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.nmse_db).collect()
    }

    pub fn final_nmse_db(&self) -> Option<f64> {
        self.last().and_then(|r| r.nmse_db)
    }

    pub fn mean_iteration_time(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.wall_time_s).sum::<f64>() / self.records.len() as f64
    }

    /// Median of the per-iteration wall times; robust to scheduler hiccups.
    pub fn median_iteration_time(&self) -> f64 {
        let mut times: Vec<f64> = self.records.iter().map(|r| r.wall_time_s).collect();
        if times.is_empty() {
            return 0.0;
        }
        times.sort_by(f64::total_cmp);
        let mid = times.len() / 2;
        if times.len() % 2 == 1 {
            times[mid]
        } else {
            0.5 * (times[mid - 1] + times[mid])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn timed(times: &[f64]) -> RunTrace {
        let mut trace = RunTrace::new("test");
        for (iter, &wall_time_s) in times.iter().enumerate() {
            trace.records.push(IterationRecord {
                iter,
                wall_time_s,
                elapsed_s: 0.0,
                nmse_db: None,
                subband_nmse_db: None,
                tau: Vec::new(),
                tau_nmse_db: None,
                thresholds: Vec::new(),
                lambda: Vec::new(),
                alpha: Vec::new(),
                objective: None,
                alpha_clamped: false,
            });
        }
        trace
    }

    #[test]
    fn median_ignores_outliers() {
        assert_eq!(timed(&[]).median_iteration_time(), 0.0);
        assert_eq!(timed(&[3.0, 1.0, 100.0]).median_iteration_time(), 3.0);
        assert_eq!(timed(&[4.0, 1.0, 2.0, 100.0]).median_iteration_time(), 3.0);
        assert_eq!(timed(&[1.0, 2.0, 3.0]).mean_iteration_time(), 2.0);
    }
}
