use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::FeatureError;
use crate::Real;

/// Planned forward FFT of real input returning the `n/2 + 1` non-negative
/// frequency bins.
pub struct RealFft<T: Real> {
    n: usize,
    plan: Arc<dyn Fft<T>>,
    buf: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> RealFft<T> {
    pub fn new(n: usize) -> Self {
        let plan = FftPlanner::new().plan_fft_forward(n);
        let scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
        Self {
            n,
            plan,
            buf: vec![Complex::new(T::zero(), T::zero()); n],
            scratch,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn process(&mut self, input: &[T]) -> Result<&[Complex<T>], FeatureError> {
        if input.len() != self.n {
            return Err(FeatureError::Argument(format!(
                "fft input has {} samples, expected {}",
                input.len(),
                self.n
            )));
        }
        for (b, &x) in self.buf.iter_mut().zip(input) {
            *b = Complex::new(x, T::zero());
        }
        self.plan.process_with_scratch(&mut self.buf, &mut self.scratch);
        Ok(&self.buf[..self.n / 2 + 1])
    }
}

/// One-shot real FFT of a frame that must already be `fft_size` long.
pub fn real_fft<T: Real>(frame: &[T], fft_size: usize) -> Result<Vec<Complex<T>>, FeatureError> {
    Ok(RealFft::new(fft_size).process(frame)?.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;
    use std::f64::consts::PI;

    fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
                    let a = -2.0 * PI * (k * t) as f64 / n as f64;
                    (re + v * a.cos(), im + v * a.sin())
                })
            })
            .collect()
    }

    #[test]
    fn impulse_is_flat() {
        let mut x = vec![0.0f64; 512];
        x[0] = 1.0;
        let bins = real_fft(&x, 512).unwrap();
        assert_eq!(bins.len(), 257);
        assert!(bins.iter().all(|c| (c.re - 1.0).abs() < 1e-15 && c.im.abs() < 1e-15));
    }

    #[test]
    fn zeros_give_zeros() {
        let bins = real_fft(&[0.0f64; 512], 512).unwrap();
        assert!(bins.iter().all(|c| c.re == 0.0 && c.im == 0.0));
    }

    #[test]
    fn wrong_length_is_rejected() {
        assert!(matches!(real_fft(&[0.0f64; 400], 512), Err(FeatureError::Argument(_))));
    }

    #[test]
    fn tone_peaks_at_expected_bin() {
        let mut x = vec![0.0f64; 512];
        for (n, v) in x.iter_mut().enumerate().take(400) {
            let w = 0.5 - 0.5 * (2.0 * PI * n as f64 / 399.0).cos();
            *v = w * (2.0 * PI * 1000.0 * n as f64 / 16000.0).cos();
        }
        let oracle = naive_dft(&x);
        let oracle_peak = (0..257)
            .max_by(|&a, &b| {
                let ma = oracle[a].0.hypot(oracle[a].1);
                let mb = oracle[b].0.hypot(oracle[b].1);
                ma.partial_cmp(&mb).unwrap()
            })
            .unwrap();
        let bins = real_fft(&x, 512).unwrap();
        let peak = (0..257).max_by(|&a, &b| bins[a].norm().partial_cmp(&bins[b].norm()).unwrap()).unwrap();
        assert_eq!(oracle_peak, 32);
        assert_eq!(peak, 32);
    }

    #[test]
    fn matches_naive_dft_and_parseval() {
        let mut rng = seeded_rng(17, 0);
        let mut fft = RealFft::<f64>::new(512);
        for _ in 0..100 {
            let x: Vec<f64> = (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let bins = fft.process(&x).unwrap().to_vec();
            let oracle = naive_dft(&x);
            for (c, (re, im)) in bins.iter().zip(&oracle) {
                assert!((c.re - re).abs() < 1e-6 && (c.im - im).abs() < 1e-6);
            }
            let time_energy: f64 = x.iter().map(|v| v * v).sum();
            let mut freq_energy = bins[0].norm_sqr() + bins[256].norm_sqr();
            freq_energy += 2.0 * bins[1..256].iter().map(|c| c.norm_sqr()).sum::<f64>();
            assert!((time_energy - freq_energy / 512.0).abs() < 1e-9);
        }
    }
}
