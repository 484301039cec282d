use std::sync::Arc;

use proptest::prelude::*;
use vdamp::denoise::{alpha, denoise_colored, select_threshold, soft_threshold, sure_risk, Quantity, SubbandVector};
use vdamp::diagnostics::qq_data;
use vdamp::fourier::{KSpaceData, SamplingMask};
use vdamp::sampling::{polynomial_pmap, DensityParams};
use vdamp::vdamp::finalize;
use vdamp::wavelet::{dwt, idwt, SubbandLayout, WaveletCoeffs};
use vdamp::{Acquisition, Complex64, ComplexImage, Fourier2d};

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), len)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

/// `(height, width, scales, pixels)` with both sides divisible by `2^scales`.
fn image() -> impl Strategy<Value = (usize, usize, usize, Vec<Complex64>)> {
    (1usize..=3, 0usize..2, 0usize..2).prop_flat_map(|(s, a, b)| {
        let (h, w) = ((1 << s) * (2 + 2 * a), (1 << s) * (2 + 2 * b));
        complex_vec(h * w).prop_map(move |px| (h, w, s, px))
    })
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wavelet_is_orthonormal((h, w, s, px) in image()) {
        let x = ComplexImage::from_vec(h, w, px).unwrap();
        let c = dwt(&x, s).unwrap();
        prop_assert!((c.norm_sqr() - x.norm_sqr()).abs() <= 1e-10 * x.norm_sqr().max(1.0));
        let back = idwt(&c);
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            prop_assert!((a - b).norm() <= 1e-10);
        }
    }

    #[test]
    fn wavelet_is_linear((h, w, s, px) in image(), other in complex_vec(256), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let x = ComplexImage::from_vec(h, w, px).unwrap();
        let y = ComplexImage::from_fn(h, w, |r, c| other[(r * w + c) % other.len()]);
        let combo = ComplexImage::from_fn(h, w, |r, c| x.get(r, c) * a + y.get(r, c) * b);
        let (cx, cy, cc) = (dwt(&x, s).unwrap(), dwt(&y, s).unwrap(), dwt(&combo, s).unwrap());
        for ((u, v), z) in cx.as_slice().iter().zip(cy.as_slice()).zip(cc.as_slice()) {
            prop_assert!((u * a + v * b - z).norm() <= 1e-9);
        }
    }

    #[test]
    fn centered_fft_is_unitary((h, w, _s, px) in image()) {
        let f = Fourier2d::new(h, w).unwrap();
        let x = ComplexImage::from_vec(h, w, px).unwrap();
        let k = f.fft_centered(&x).unwrap();
        prop_assert!((norm_sqr(&k) - x.norm_sqr()).abs() <= 1e-10 * x.norm_sqr().max(1.0));
        let back = f.ifft_centered(&k).unwrap();
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            prop_assert!((a - b).norm() <= 1e-10);
        }
    }

    #[test]
    fn masked_adjoint_identity((h, w, _s, px) in image(), bits in prop::collection::vec(any::<bool>(), 256), ys in complex_vec(256)) {
        let mut sampled: Vec<bool> = (0..h * w).map(|i| bits[i % bits.len()]).collect();
        sampled[0] = true;
        let mask = SamplingMask::from_bools(h, w, sampled).unwrap();
        let f = Fourier2d::new(h, w).unwrap();
        let x = ComplexImage::from_vec(h, w, px).unwrap();
        let y: Vec<Complex64> = (0..mask.n()).map(|i| ys[i % ys.len()]).collect();
        let lhs = inner(&f.forward(&x, &mask).unwrap(), &y);
        let rhs = inner(x.as_slice(), f.adjoint(&y, &mask).unwrap().as_slice());
        prop_assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(1.0));
    }

    #[test]
    fn finalize_is_data_consistent((h, w, s, px) in image(), bits in prop::collection::vec(any::<bool>(), 64), ys in complex_vec(64)) {
        let mut sampled: Vec<bool> = (0..h * w).map(|i| bits[i % bits.len()]).collect();
        sampled[0] = true;
        let mask = Arc::new(SamplingMask::from_bools(h, w, sampled).unwrap());
        let fourier = Arc::new(Fourier2d::new(h, w).unwrap());
        let layout = Arc::new(SubbandLayout::new(h, w, s).unwrap());
        let y: Vec<Complex64> = (0..mask.n()).map(|i| ys[i % ys.len()]).collect();
        let data = KSpaceData::new(y.clone(), 0.0, &mask).unwrap();
        let acq = Acquisition::new(fourier.clone(), layout.clone(), mask.clone(), data).unwrap();
        let w_hat = WaveletCoeffs::from_vec(&layout, px).unwrap();
        let x = finalize(&acq, &w_hat).unwrap();
        let back = fourier.forward(&x, &mask).unwrap();
        let err: f64 = back.iter().zip(&y).map(|(a, b)| (a - b).norm_sqr()).sum();
        prop_assert!(err.sqrt() <= 1e-10 * norm_sqr(&y).sqrt().max(1.0));
    }

    #[test]
    fn soft_threshold_is_non_expansive(a in complex_vec(32), b in complex_vec(32), t in 0.0..8.0f64) {
        let (ga, gb) = (soft_threshold(&a, t).unwrap(), soft_threshold(&b, t).unwrap());
        let out: f64 = ga.iter().zip(&gb).map(|(x, y)| (x - y).norm_sqr()).sum();
        let inp: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum();
        prop_assert!(out <= inp * (1.0 + 1e-12) + 1e-24);
        for (g, r) in ga.iter().zip(&a) {
            prop_assert!(g.norm() <= r.norm() + 1e-12);
            prop_assert_eq!(*g == Complex64::new(0.0, 0.0), r.norm() <= t);
        }
    }

    #[test]
    fn soft_threshold_is_phase_equivariant(r in complex_vec(32), t in 0.0..8.0f64, theta in -3.2..3.2f64) {
        let rot = Complex64::from_polar(1.0, theta);
        let rotated: Vec<Complex64> = r.iter().map(|v| v * rot).collect();
        let g = soft_threshold(&r, t).unwrap();
        let g_rot = soft_threshold(&rotated, t).unwrap();
        for (a, b) in g.iter().zip(&g_rot) {
            prop_assert!((a * rot - b).norm() <= 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn alpha_in_unit_interval_and_non_increasing(r in complex_vec(48), mut ts in prop::collection::vec(0.0..15.0f64, 2..8)) {
        ts.sort_by(f64::total_cmp);
        let values: Vec<f64> = ts.iter().map(|&t| alpha(&r, t).unwrap()).collect();
        for v in &values {
            prop_assert!((0.0..=1.0).contains(v));
        }
        for pair in values.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-15);
        }
    }

    #[test]
    fn selected_threshold_minimizes_sure(r in complex_vec(40), tau in 0.01..20.0f64, probes in prop::collection::vec(0.0..20.0f64, 16)) {
        let t_star = select_threshold(&r, tau).unwrap();
        let best = sure_risk(&r, tau, t_star).unwrap();
        for t in probes {
            let other = sure_risk(&r, tau, t).unwrap();
            prop_assert!(best <= other + 1e-9 * other.abs().max(1.0), "t* {t_star} risk {best} vs t {t} risk {other}");
        }
    }

    #[test]
    fn sure_is_phase_invariant(r in complex_vec(40), tau in 0.01..20.0f64, theta in -3.2..3.2f64) {
        let rot = Complex64::from_polar(1.0, theta);
        let rotated: Vec<Complex64> = r.iter().map(|v| v * rot).collect();
        let (t1, t2) = (select_threshold(&r, tau).unwrap(), select_threshold(&rotated, tau).unwrap());
        prop_assert!((t1 - t2).abs() <= 1e-9 * t1.max(1.0));
    }

    #[test]
    fn subbands_are_denoised_independently((h, w, s, px) in image(), seed in any::<u64>()) {
        let layout = Arc::new(SubbandLayout::new(h, w, s).unwrap());
        let r = WaveletCoeffs::from_vec(&layout, px).unwrap();
        let tau = SubbandVector::filled(Quantity::Variance, layout.num_subbands(), 2.0);
        let base = denoise_colored(&r, &tau).unwrap();

        let band = (seed as usize) % layout.num_subbands();
        let range = layout.subbands()[band].range();
        let shift = (seed >> 32) as usize % range.len();
        let mut permuted = r.clone();
        permuted.as_mut_slice()[range.clone()].rotate_left(shift);
        let out = denoise_colored(&permuted, &tau).unwrap();

        let mut expected = base.estimate.clone();
        expected.as_mut_slice()[range].rotate_left(shift);
        prop_assert_eq!(out.estimate.as_slice(), expected.as_slice());
        prop_assert_eq!(out.thresholds, base.thresholds);
    }

    #[test]
    fn qq_correlation_is_affine_invariant(x in complex_vec(64), a in 0.1..50.0f64, b in -20.0..20.0f64) {
        prop_assume!(x.iter().map(|v| v.re).fold(f64::NAN, f64::max) > x.iter().map(|v| v.re).fold(f64::NAN, f64::min));
        prop_assume!(x.iter().map(|v| v.im).fold(f64::NAN, f64::max) > x.iter().map(|v| v.im).fold(f64::NAN, f64::min));
        let shifted: Vec<Complex64> = x.iter().map(|v| v * a + Complex64::new(b, -b)).collect();
        let (q, qs) = (qq_data(&x, 20).unwrap(), qq_data(&shifted, 20).unwrap());
        for (u, v) in q.iter().zip(&qs) {
            prop_assert!((u.correlation - v.correlation).abs() <= 1e-9);
            for (p1, p2) in u.pairs.iter().zip(&v.pairs) {
                prop_assert!((p1.0 - p2.0).abs() <= 1e-12 && (p1.1 - p2.1).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn density_is_calibrated(degree in 1.0..8.0f64, center in 0.0..0.1f64, r in 2.0..8.0f64) {
        let params = DensityParams { degree, center_radius: center, undersampling: r, p_min: 1e-3 };
        if let Ok(pmap) = polynomial_pmap(64, 64, params) {
            let target = 4096.0 / r;
            let total: f64 = pmap.probs().iter().sum();
            prop_assert!((total - target).abs() / target <= 0.005, "sum {total} target {target}");
            prop_assert!(pmap.probs().iter().all(|&p| (1e-3..=1.0).contains(&p)));
        }
    }
}
