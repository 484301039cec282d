//! Compressed-sensing MRI reconstruction from variable-density Fourier
//! samples.
//!
//! The main algorithm is [`vdamp::Vdamp`], a message-passing scheme whose
//! per-iteration estimate behaves like the true wavelet coefficients plus
//! Gaussian noise with one variance per subband. [`baselines`] provides
//! FISTA and SURE-IT for comparison, and [`diagnostics`] the metrics used to
//! check the Gaussian effective-noise behaviour.

pub mod baselines;
pub mod denoise;
pub mod diagnostics;
pub mod error;
pub mod export;
pub mod fourier;
pub mod image;
pub mod problem;
pub mod rng;
pub mod sampling;
pub mod trace;
pub mod vdamp;
pub mod wavelet;

pub use error::{Error, Result};
pub use fourier::{Fourier2d, KSpaceData, SamplingMask};
pub use image::ComplexImage;
pub use problem::{Acquisition, Scene};
pub use sampling::{DensityParams, ProbabilityMap};
pub use trace::{IterationRecord, RunTrace};
pub use wavelet::{SubbandLayout, WaveletCoeffs};

pub use num_complex::Complex64;
