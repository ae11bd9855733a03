use super::{FeatureConfig, FeatureError};
use crate::Real;

/// HTK mel scale: `2595 · log10(1 + f / 700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// `n_mels × n_bins` triangular weights, row-major. Each row keeps the span
/// of its nonzero bins so projection skips the zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank<T> {
    n_mels: usize,
    n_bins: usize,
    weights: Vec<T>,
    spans: Vec<(usize, usize)>,
}

impl<T: Real> MelFilterbank<T> {
    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> &[T] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Projects a power spectrum onto the filters.
    pub fn apply(&self, power: &[T], out: &mut [T]) {
        for (m, slot) in out.iter_mut().enumerate().take(self.n_mels) {
            let (lo, hi) = self.spans[m];
            let row = self.row(m);
            *slot = row[lo..hi].iter().zip(&power[lo..hi]).map(|(&w, &p)| w * p).sum();
        }
    }
}

/// Triangular filters with centers equally spaced on the mel scale between
/// `f_min` and `f_max`. Fails if any filter covers no FFT bin.
pub fn mel_filterbank<T: Real>(config: &FeatureConfig) -> Result<MelFilterbank<T>, FeatureError> {
    config.validate()?;
    let n_bins = config.n_bins();
    let n_mels = config.n_mels;
    let (mel_lo, mel_hi) = (hz_to_mel(config.f_min_hz), hz_to_mel(config.f_max_hz));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = config.sample_rate_hz as f64 / config.fft_size as f64;
    let mut weights = vec![T::zero(); n_mels * n_bins];
    let mut spans = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
        let (mut lo, mut hi) = (n_bins, 0);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f > l && f <= c {
                (f - l) / (c - l)
            } else if f > c && f < r {
                (r - f) / (r - c)
            } else {
                0.0
            };
            if w > 0.0 {
                weights[m * n_bins + k] = T::lit(w);
                lo = lo.min(k);
                hi = k + 1;
            }
        }
        if hi == 0 {
            return Err(FeatureError::Config(format!(
                "mel filter {m} ({l:.1}-{r:.1} Hz) covers no FFT bin; too many filters for fft size {}",
                config.fft_size
            )));
        }
        spans.push((lo, hi));
    }
    Ok(MelFilterbank {
        n_mels,
        n_bins,
        weights,
        spans,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_values() {
        assert!((hz_to_mel(700.0) - 781.17).abs() < 0.01);
        assert_eq!(hz_to_mel(0.0), 0.0);
        assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
    }

    #[test]
    fn default_bank_shape_and_support() {
        let fb = mel_filterbank::<f64>(&FeatureConfig::default()).unwrap();
        assert_eq!((fb.n_mels(), fb.n_bins()), (40, 257));
        for m in 0..40 {
            assert!(fb.row(m).iter().all(|&w| w >= 0.0));
            assert!(fb.row(m).iter().sum::<f64>() > 0.0);
        }
    }

    #[test]
    fn too_many_filters_is_config_error() {
        let cfg = FeatureConfig { n_mels: 200, ..FeatureConfig::default() };
        assert!(matches!(mel_filterbank::<f64>(&cfg), Err(FeatureError::Config(_))));
    }
}
