use super::{FeatureError, FeatureMatrix};
use crate::Real;

/// Global per-coefficient standardization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNormalizer<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Real> FeatureNormalizer<T> {
    pub const STD_FLOOR: f64 = 1e-6;

    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![T::zero(); n],
            std: vec![T::one(); n],
        }
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    #[inline]
    pub fn apply_frame(&self, frame: &mut [T]) {
        for ((v, &m), &s) in frame.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }
}

pub fn normalize<T: Real>(feat: &FeatureMatrix<T>, norm: &FeatureNormalizer<T>) -> Result<FeatureMatrix<T>, FeatureError> {
    if feat.n_coeffs() != norm.dims() {
        return Err(FeatureError::Argument(format!(
            "features have {} coefficients, normalizer has {}",
            feat.n_coeffs(),
            norm.dims()
        )));
    }
    let mut out = feat.clone();
    for c in 0..norm.dims() {
        let (m, s) = (norm.mean[c], norm.std[c]);
        for v in out.data.row_mut(c) {
            *v = (*v - m) / s;
        }
    }
    Ok(out)
}

/// Mean and standard deviation of every coefficient over all frames of all
/// matrices, accumulated in `f64`. Standard deviations are floored at 1e-6.
pub fn fit_normalizer<T: Real>(corpus: &[FeatureMatrix<T>]) -> Result<FeatureNormalizer<T>, FeatureError> {
    let frames: usize = corpus.iter().map(|f| f.frames()).sum();
    if frames < 2 {
        return Err(FeatureError::Argument(format!("need at least 2 frames, got {frames}")));
    }
    let dims = corpus[0].n_coeffs();
    if corpus.iter().any(|f| f.n_coeffs() != dims) {
        return Err(FeatureError::Argument("feature matrices differ in coefficient count".into()));
    }
    let n = frames as f64;
    let mut mean = vec![0.0f64; dims];
    let mut std = vec![0.0f64; dims];
    for c in 0..dims {
        mean[c] = corpus.iter().flat_map(|f| f.data.row(c)).map(|v| v.as_f64()).sum::<f64>() / n;
        let ss: f64 = corpus
            .iter()
            .flat_map(|f| f.data.row(c))
            .map(|v| (v.as_f64() - mean[c]).powi(2))
            .sum();
        std[c] = (ss / n).sqrt().max(FeatureNormalizer::<T>::STD_FLOOR);
    }
    Ok(FeatureNormalizer {
        mean: mean.into_iter().map(T::lit).collect(),
        std: std.into_iter().map(T::lit).collect(),
    })
}
